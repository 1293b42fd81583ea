//! Scene and episode files: JSON schemas, validation, loading.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingSpace;
use crate::grid::{Cell, CellSet, Grid};
use crate::num::{real, Real};
use crate::world::{AgentPose, Episode, DEFAULT_MAX_STEPS, DEFAULT_SUCCESS_RADIUS};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed scene: {0}")]
    MalformedScene(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("malformed episode: {0}")]
    MalformedEpisode(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Spatial relation tokens understood by the query schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Near,
    Between,
    LeftOf,
    RightOf,
    InFrontOf,
    Behind,
}

impl Relation {
    /// Number of reference categories the relation expects.
    pub fn arity(&self) -> usize {
        match self {
            Relation::Between => 2,
            _ => 1,
        }
    }
}

/// One relation constraint: `relation` anchored at reference categories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationClause {
    pub relation: Relation,
    pub references: Vec<String>,
}

/// Parsed main goal of a query: category plus attribute tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalSpec {
    pub category: String,
    #[serde(default)]
    pub attributes: Vec<String>,
}

/// Target query: free text, the parsed main goal, relation constraints, and
/// the ground-truth goal IDs (used for scoring only, never by the policy).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Query {
    pub raw_text: String,
    pub main_goal: GoalSpec,
    #[serde(default)]
    pub relations: Vec<RelationClause>,
    #[serde(default)]
    pub goal_object_ids: BTreeSet<u32>,
}

impl Query {
    pub fn has_relations(&self) -> bool {
        !self.relations.is_empty()
    }
}

/// A placed object with its ground-truth semantic embedding.
#[derive(Debug, Clone)]
pub struct SceneObject<T> {
    pub id: u32,
    pub category: String,
    pub attributes: Vec<String>,
    pub footprint: CellSet,
    pub centroid: (T, T),
    pub true_embedding: Vec<T>,
}

/// Immutable ground-truth world: occupancy plus placed objects.
#[derive(Debug, Clone)]
pub struct GridScene<T> {
    pub width: usize,
    pub height: usize,
    pub cell_size: T,
    occupancy: Grid<bool>, // true = obstacle
    pub objects: Vec<SceneObject<T>>,
    pub embedding_dim: usize,
}

impl<T: Real> GridScene<T> {
    pub fn is_obstacle(&self, c: Cell) -> bool {
        *self.occupancy.get(c).unwrap_or(&true)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.occupancy.get(c).map(|o| !o).unwrap_or(false)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.occupancy.in_bounds(c)
    }

    /// Obstacle grid snapshot (true = obstacle), for ground-truth planning.
    pub fn obstacle_grid(&self) -> Grid<bool> {
        self.occupancy.clone()
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject<T>> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn diagonal_m(&self) -> T {
        let w = real::<T>(self.width as f64);
        let h = real::<T>(self.height as f64);
        (w * w + h * h).sqrt() * self.cell_size
    }

    /// Build a scene from parts, enforcing the placement invariants.
    pub fn from_parts(
        width: usize,
        height: usize,
        cell_size: T,
        obstacles: &[Cell],
        objects: Vec<(u32, String, Vec<String>, Vec<Cell>, u64)>,
        space: &EmbeddingSpace,
    ) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::MalformedScene(
                "scene dimensions must be positive".into(),
            ));
        }
        if cell_size <= T::zero() {
            return Err(SceneError::MalformedScene(
                "cell_size must be positive".into(),
            ));
        }
        let mut occupancy = Grid::new(width, height, false);
        for &c in obstacles {
            if !occupancy.in_bounds(c) {
                return Err(SceneError::MalformedScene(format!(
                    "obstacle {c:?} out of bounds"
                )));
            }
            occupancy.set(c, true);
        }

        let mut seen = BTreeSet::new();
        let mut built = Vec::with_capacity(objects.len());
        for (id, category, attributes, cells, embedding_seed) in objects {
            if !seen.insert(id) {
                return Err(SceneError::MalformedScene(format!(
                    "duplicate object id {id}"
                )));
            }
            if cells.is_empty() {
                return Err(SceneError::MalformedScene(format!(
                    "object {id} has empty footprint"
                )));
            }
            let mut footprint = CellSet::new();
            for c in cells {
                if !occupancy.in_bounds(c) {
                    return Err(SceneError::InvalidPlacement(format!(
                        "object {id} footprint cell {c:?} out of bounds"
                    )));
                }
                if *occupancy.at(c) {
                    return Err(SceneError::InvalidPlacement(format!(
                        "object {id} footprint cell {c:?} lies on an obstacle"
                    )));
                }
                footprint.insert(c);
            }
            let centroid = footprint_centroid(&footprint, cell_size);
            let true_embedding = space.object_embedding(&category, &attributes, embedding_seed);
            built.push(SceneObject {
                id,
                category,
                attributes,
                footprint,
                centroid,
                true_embedding,
            });
        }

        Ok(Self {
            width,
            height,
            cell_size,
            occupancy,
            objects: built,
            embedding_dim: space.dim(),
        })
    }
}

/// Mean of footprint cell centers, in meters.
pub fn footprint_centroid<T: Real>(footprint: &CellSet, cell_size: T) -> (T, T) {
    let n = real::<T>(footprint.len() as f64);
    let mut sx = T::zero();
    let mut sy = T::zero();
    for c in footprint {
        let half = real::<T>(0.5);
        sx = sx + (real::<T>(c.x as f64) + half) * cell_size;
        sy = sy + (real::<T>(c.y as f64) + half) * cell_size;
    }
    (sx / n, sy / n)
}

// -------- JSON schemas --------

#[derive(Deserialize)]
struct SceneFile {
    width: usize,
    height: usize,
    cell_size: f64,
    #[serde(default)]
    obstacles: Vec<[i32; 2]>,
    #[serde(default)]
    objects: Vec<ObjectFile>,
}

#[derive(Deserialize)]
struct ObjectFile {
    id: u32,
    category: String,
    #[serde(default)]
    attributes: Vec<String>,
    footprint: Vec<[i32; 2]>,
    embedding_seed: u64,
}

#[derive(Deserialize)]
struct EpisodeFile {
    scene: String,
    start: StartFile,
    query: Query,
    #[serde(default)]
    success_radius: Option<f64>,
    #[serde(default)]
    max_steps: Option<usize>,
}

#[derive(Deserialize)]
struct StartFile {
    x: f64,
    y: f64,
    heading: f64,
}

fn read_file(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate a scene file with the default 16-dim embedding space.
pub fn load_scene<T: Real>(path: &Path) -> Result<GridScene<T>, SceneError> {
    load_scene_with_space(path, &EmbeddingSpace::new(EmbeddingSpace::DEFAULT_DIM))
}

pub fn load_scene_with_space<T: Real>(
    path: &Path,
    space: &EmbeddingSpace,
) -> Result<GridScene<T>, SceneError> {
    let text = read_file(path)?;
    let file: SceneFile = serde_json::from_str(&text)
        .map_err(|e| SceneError::MalformedScene(format!("{}: {e}", path.display())))?;
    let obstacles: Vec<Cell> = file
        .obstacles
        .iter()
        .map(|&[x, y]| Cell::new(x, y))
        .collect();
    let objects = file
        .objects
        .into_iter()
        .map(|o| {
            (
                o.id,
                o.category,
                o.attributes,
                o.footprint.iter().map(|&[x, y]| Cell::new(x, y)).collect(),
                o.embedding_seed,
            )
        })
        .collect();
    GridScene::from_parts(
        file.width,
        file.height,
        real(file.cell_size),
        &obstacles,
        objects,
        space,
    )
}

/// Load an episode file, resolving its scene path relative to the episode
/// file's directory, and validate it against the scene.
pub fn load_episode<T: Real>(path: &Path) -> Result<(GridScene<T>, Episode<T>), SceneError> {
    load_episode_with_space(path, &EmbeddingSpace::new(EmbeddingSpace::DEFAULT_DIM))
}

pub fn load_episode_with_space<T: Real>(
    path: &Path,
    space: &EmbeddingSpace,
) -> Result<(GridScene<T>, Episode<T>), SceneError> {
    let text = read_file(path)?;
    let file: EpisodeFile = serde_json::from_str(&text)
        .map_err(|e| SceneError::MalformedEpisode(format!("{}: {e}", path.display())))?;
    let scene_path = path
        .parent()
        .map(|dir| dir.join(&file.scene))
        .unwrap_or_else(|| Path::new(&file.scene).to_path_buf());
    let scene = load_scene_with_space::<T>(&scene_path, space)?;
    let episode = build_episode(&scene, scene_path.display().to_string(), &file)?;
    Ok((scene, episode))
}

fn build_episode<T: Real>(
    scene: &GridScene<T>,
    scene_path: String,
    file: &EpisodeFile,
) -> Result<Episode<T>, SceneError> {
    let start = AgentPose::new(
        real(file.start.x),
        real(file.start.y),
        real(file.start.heading),
    );
    let cell = start.cell(scene.cell_size);
    if !scene.is_free(cell) {
        return Err(SceneError::MalformedEpisode(format!(
            "start pose {:?} not on a free cell",
            (file.start.x, file.start.y)
        )));
    }
    for id in &file.query.goal_object_ids {
        if scene.object(*id).is_none() {
            return Err(SceneError::MalformedEpisode(format!(
                "goal object id {id} not present in scene"
            )));
        }
    }
    let categories: BTreeSet<&str> = scene.objects.iter().map(|o| o.category.as_str()).collect();
    for clause in &file.query.relations {
        if clause.references.len() != clause.relation.arity() {
            return Err(SceneError::MalformedEpisode(format!(
                "relation {:?} expects {} references, got {}",
                clause.relation,
                clause.relation.arity(),
                clause.references.len()
            )));
        }
        for r in &clause.references {
            if !categories.contains(r.as_str()) {
                return Err(SceneError::MalformedEpisode(format!(
                    "relation references category '{r}' absent from scene"
                )));
            }
        }
    }
    Ok(Episode {
        scene_path,
        start,
        query: file.query.clone(),
        success_radius: real(file.success_radius.unwrap_or(DEFAULT_SUCCESS_RADIUS)),
        max_steps: file.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("semnav_scene_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn minimal_scene_loads() {
        let path = write_temp(
            "mini.json",
            r#"{"width":5,"height":5,"cell_size":0.25,"obstacles":[],
                "objects":[{"id":1,"category":"chair","attributes":[],
                            "footprint":[[2,2]],"embedding_seed":1}]}"#,
        );
        let scene: GridScene<f64> = load_scene(&path).unwrap();
        assert_eq!(scene.objects.len(), 1);
        assert!(scene.is_free(Cell::new(0, 0)));
        let o = &scene.objects[0];
        assert!((o.centroid.0 - 0.625).abs() < 1e-12);
    }

    #[test]
    fn object_on_obstacle_rejected() {
        let path = write_temp(
            "bad.json",
            r#"{"width":5,"height":5,"cell_size":0.25,"obstacles":[[2,2]],
                "objects":[{"id":1,"category":"chair","attributes":[],
                            "footprint":[[2,2]],"embedding_seed":1}]}"#,
        );
        let err = load_scene::<f64>(&path).unwrap_err();
        assert!(matches!(err, SceneError::InvalidPlacement(_)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let path = write_temp(
            "dup.json",
            r#"{"width":5,"height":5,"cell_size":0.25,"obstacles":[],
                "objects":[
                  {"id":1,"category":"chair","attributes":[],"footprint":[[1,1]],"embedding_seed":1},
                  {"id":1,"category":"table","attributes":[],"footprint":[[3,3]],"embedding_seed":2}]}"#,
        );
        let err = load_scene::<f64>(&path).unwrap_err();
        assert!(matches!(err, SceneError::MalformedScene(_)));
    }

    #[test]
    fn schema_violation_is_malformed() {
        let path = write_temp("garbage.json", r#"{"width": "five"}"#);
        let err = load_scene::<f64>(&path).unwrap_err();
        assert!(matches!(err, SceneError::MalformedScene(_)));
    }

    #[test]
    fn episode_relation_validation() {
        let scene_path = write_temp(
            "rel_scene.json",
            r#"{"width":6,"height":6,"cell_size":0.25,"obstacles":[],
                "objects":[{"id":1,"category":"chair","attributes":[],
                            "footprint":[[2,2]],"embedding_seed":1}]}"#,
        );
        let ep = format!(
            r#"{{"scene":"{}","start":{{"x":0.3,"y":0.3,"heading":0.0}},
                "query":{{"raw_text":"chair near desk",
                          "main_goal":{{"category":"chair","attributes":[]}},
                          "relations":[{{"relation":"near","references":["desk"]}}],
                          "goal_object_ids":[1]}}}}"#,
            scene_path.file_name().unwrap().to_str().unwrap()
        );
        let path = write_temp("rel_ep.json", &ep);
        let err = load_episode::<f64>(&path).unwrap_err();
        assert!(matches!(err, SceneError::MalformedEpisode(_)));
    }
}
