//! Deterministic 2D gridworld: scenes, episodes, agent kinematics and the
//! ray-cast sensor model.

mod scene;
mod sim;

pub use scene::{
    load_episode, load_episode_with_space, load_scene, load_scene_with_space, GoalSpec, GridScene,
    Query, Relation, RelationClause, SceneError, SceneObject,
};
pub use sim::{check_success, observe, step, Action, Detection, Observation, SensorNoise};

use crate::grid::Cell;
use crate::num::Real;

/// Agent pose: position in meters plus heading in degrees `[0, 360)`.
/// Heading 0 points along +x; positive angles turn counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose<T> {
    pub x: T,
    pub y: T,
    pub heading_deg: T,
}

impl<T: Real> AgentPose<T> {
    pub fn new(x: T, y: T, heading_deg: T) -> Self {
        let mut h = heading_deg % crate::num::real(360.0);
        if h < T::zero() {
            h = h + crate::num::real(360.0);
        }
        Self { x, y, heading_deg: h }
    }

    /// Cell containing the pose position.
    pub fn cell(&self, cell_size: T) -> Cell {
        Cell::new(
            (self.x / cell_size).floor().to_i32().unwrap_or(0),
            (self.y / cell_size).floor().to_i32().unwrap_or(0),
        )
    }

    pub fn distance_to(&self, x: T, y: T) -> T {
        ((self.x - x).powi(2) + (self.y - y).powi(2)).sqrt()
    }
}

/// One navigation episode: a scene reference plus start state and query.
#[derive(Debug, Clone)]
pub struct Episode<T> {
    pub scene_path: String,
    pub start: AgentPose<T>,
    pub query: Query,
    pub success_radius: T,
    pub max_steps: usize,
}

pub const DEFAULT_SUCCESS_RADIUS: f64 = 1.0;
pub const DEFAULT_MAX_STEPS: usize = 500;
pub const FORWARD_STEP_M: f64 = 0.25;
pub const TURN_DEG: f64 = 30.0;
pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const DEFAULT_RANGE_M: f64 = 5.0;
