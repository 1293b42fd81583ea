//! Agent kinematics and the ray-cast sensor model.

use serde::{Deserialize, Serialize};

use crate::embedding::{mix_seed, rng_from, rotate_in_random_plane};
use crate::grid::{Cell, CellSet};
use crate::num::{real, Real};
use crate::world::{AgentPose, Episode, GridScene, FORWARD_STEP_M, TURN_DEG};

/// Discrete action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
    Stop,
}

/// Kinematics: forward moves 0.25 m along the heading unless the destination
/// cell is blocked (collision keeps the pose); turns rotate by 30 degrees
/// (left is counter-clockwise). Camera pitch and stop leave the pose as-is.
pub fn step<T: Real>(scene: &GridScene<T>, pose: &AgentPose<T>, action: Action) -> AgentPose<T> {
    match action {
        Action::MoveForward => {
            let rad = pose.heading_deg.to_radians();
            let nx = pose.x + real::<T>(FORWARD_STEP_M) * rad.cos();
            let ny = pose.y + real::<T>(FORWARD_STEP_M) * rad.sin();
            let dest = AgentPose::new(nx, ny, pose.heading_deg);
            if scene.is_free(dest.cell(scene.cell_size)) {
                dest
            } else {
                *pose
            }
        }
        Action::TurnLeft => AgentPose::new(pose.x, pose.y, pose.heading_deg + real(TURN_DEG)),
        Action::TurnRight => AgentPose::new(pose.x, pose.y, pose.heading_deg - real(TURN_DEG)),
        Action::LookUp | Action::LookDown | Action::Stop => *pose,
    }
}

/// Controls the view-descriptor noise: descriptors are the true embedding
/// rotated by `angle_scale * (distance / range)` radians in a seeded random
/// 2-plane, so far views are less reliable than close ones.
#[derive(Debug, Clone, Copy)]
pub struct SensorNoise<T> {
    pub angle_scale: T,
    pub seed: u64,
}

impl<T: Real> SensorNoise<T> {
    pub fn none() -> Self {
        Self {
            angle_scale: T::zero(),
            seed: 0,
        }
    }
}

/// One detected object instance in a frame.
#[derive(Debug, Clone)]
pub struct Detection<T> {
    /// Ground-truth identity; available to oracles and scoring, never to the
    /// navigation policy.
    pub object_id: u32,
    /// Noisy unit-norm view descriptor.
    pub descriptor: Vec<T>,
    /// The part of the object's footprint visible in this frame.
    pub visible_footprint: CellSet,
    pub distance_m: T,
}

/// Sensor output at one pose.
#[derive(Debug, Clone)]
pub struct Observation<T> {
    pub visible_cells: CellSet,
    /// Subset of `visible_cells` observed to be obstacles.
    pub visible_obstacles: CellSet,
    pub detections: Vec<Detection<T>>,
}

/// Ray-cast visibility plus object detections.
///
/// Rays sweep the field of view at fixed angular increments; obstacles
/// occlude but are themselves visible when hit. Deterministic for identical
/// `(scene, pose, noise.seed)`.
pub fn observe<T: Real>(
    scene: &GridScene<T>,
    pose: &AgentPose<T>,
    fov_deg: T,
    range_m: T,
    noise: &SensorNoise<T>,
) -> Observation<T> {
    let mut visible = CellSet::new();
    let mut visible_obstacles = CellSet::new();

    let agent_cell = pose.cell(scene.cell_size);
    if scene.in_bounds(agent_cell) {
        visible.insert(agent_cell);
        if scene.is_obstacle(agent_cell) {
            visible_obstacles.insert(agent_cell);
        }
    }

    // 0.5 deg steps keep full cell coverage out to the default range.
    let step_deg = 0.5;
    let n_rays = (fov_deg.to_f64().unwrap_or(90.0) / step_deg).round() as i64;
    let half = fov_deg * real(0.5);
    let march = scene.cell_size * real(0.5);
    let n_march = (range_m / march).to_f64().unwrap_or(0.0).ceil() as i64;

    for i in 0..=n_rays {
        let off = real::<T>(i as f64 * step_deg) - half;
        let ang = (pose.heading_deg + off).to_radians();
        let (sin, cos) = ang.sin_cos();
        for k in 1..=n_march {
            let d = march * real::<T>(k as f64);
            if d > range_m {
                break;
            }
            let px = pose.x + d * cos;
            let py = pose.y + d * sin;
            let c = Cell::new(
                (px / scene.cell_size).floor().to_i32().unwrap_or(-1),
                (py / scene.cell_size).floor().to_i32().unwrap_or(-1),
            );
            if !scene.in_bounds(c) {
                break;
            }
            visible.insert(c);
            if scene.is_obstacle(c) {
                visible_obstacles.insert(c);
                break;
            }
        }
    }

    let mut detections = Vec::new();
    for obj in &scene.objects {
        let visible_footprint: CellSet = obj
            .footprint
            .iter()
            .filter(|c| visible.contains(c))
            .copied()
            .collect();
        if visible_footprint.is_empty() {
            continue;
        }
        let distance = pose.distance_to(obj.centroid.0, obj.centroid.1);
        let descriptor = if noise.angle_scale == T::zero() {
            obj.true_embedding.clone()
        } else {
            let frac = (distance / range_m).min(T::one());
            let angle = noise.angle_scale * frac;
            // Seed per (episode, object, quantized view) so revisiting the
            // same pose reproduces the same descriptor.
            let hq = (pose.heading_deg / real(TURN_DEG))
                .round()
                .to_i64()
                .unwrap_or(0) as u64;
            let view_seed = mix_seed(&[
                noise.seed,
                obj.id as u64,
                agent_cell.x as u64,
                (agent_cell.y as u64) << 20,
                hq,
            ]);
            let mut rng = rng_from(&[view_seed]);
            rotate_in_random_plane(&obj.true_embedding, angle, &mut rng)
        };
        detections.push(Detection {
            object_id: obj.id,
            descriptor,
            visible_footprint,
            distance_m: distance,
        });
    }

    Observation {
        visible_cells: visible,
        visible_obstacles,
        detections,
    }
}

/// Ground-truth success test: within `success_radius` (inclusive) of the
/// nearest goal object centroid.
pub fn check_success<T: Real>(
    scene: &GridScene<T>,
    pose: &AgentPose<T>,
    episode: &Episode<T>,
) -> bool {
    episode
        .query
        .goal_object_ids
        .iter()
        .filter_map(|id| scene.object(*id))
        .any(|o| pose.distance_to(o.centroid.0, o.centroid.1) <= episode.success_radius)
}
