//! Incremental maps built from observations: the object-centric map (merged
//! detections with running embeddings), the exploration map with frontier
//! extraction, and the query-similarity grids that bias frontier choice.

use serde::Serialize;
use serde_json::json;

use crate::embedding::{cosine, normalize, unit_similarity};
use crate::grid::{Cell, CellSet, Grid, NEIGHBORS_4, NEIGHBORS_8};
use crate::num::{real, real_of, Real};
use crate::world::{AgentPose, Observation};

/// Coarse lifecycle of a mapped object with respect to the current query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapObjectStatus {
    Active,
    Candidate,
    Rejected,
}

/// One merged object in the object-centric map.
#[derive(Debug, Clone)]
pub struct MapObject<T> {
    pub map_id: u32,
    /// Union of the visible footprints across views.
    pub footprint: CellSet,
    /// Unit-norm running mean of view descriptors.
    pub embedding: Vec<T>,
    pub view_count: usize,
    /// Latest query similarity on the [0, 1] scale, cached by
    /// [`build_similarity_grids`].
    pub query_similarity: Option<T>,
    pub status: MapObjectStatus,
    /// Ground-truth provenance (majority source id); used only by oracles
    /// and scoring, never by the navigation policy.
    pub source_ids: Vec<u32>,
    descriptor_sum: Vec<T>,
}

impl<T: Real> MapObject<T> {
    /// Estimated centroid in meters from the observed footprint.
    pub fn centroid(&self, cell_size: T) -> (T, T) {
        let n = real_of::<T>(self.footprint.len());
        let half = real::<T>(0.5);
        let mut sx = T::zero();
        let mut sy = T::zero();
        for c in &self.footprint {
            sx = sx + (real::<T>(c.x as f64) + half) * cell_size;
            sy = sy + (real::<T>(c.y as f64) + half) * cell_size;
        }
        (sx / n, sy / n)
    }

    /// Most frequent ground-truth source id across merged views.
    pub fn dominant_source(&self) -> u32 {
        let mut best = (self.source_ids[0], 0usize);
        for &id in &self.source_ids {
            let count = self.source_ids.iter().filter(|&&x| x == id).count();
            if count > best.1 || (count == best.1 && id < best.0) {
                best = (id, count);
            }
        }
        best.0
    }

    fn absorb(&mut self, descriptor: &[T], footprint: &CellSet, source_id: u32) {
        for c in footprint {
            self.footprint.insert(*c);
        }
        for (s, d) in self.descriptor_sum.iter_mut().zip(descriptor) {
            *s = *s + *d;
        }
        self.view_count += 1;
        self.source_ids.push(source_id);
        let mut mean = self.descriptor_sum.clone();
        if normalize(&mut mean) {
            self.embedding = mean;
        }
    }
}

/// Association weights and threshold for merging detections into objects.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MergeConfig {
    pub weight_geometry: f64,
    pub weight_semantic: f64,
    pub threshold: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            weight_geometry: 0.5,
            weight_semantic: 0.5,
            threshold: 0.7,
        }
    }
}

/// The object-centric map.
#[derive(Debug, Clone, Default)]
pub struct ObjectCentricMap<T> {
    pub objects: Vec<MapObject<T>>,
    next_id: u32,
}

impl<T: Real> ObjectCentricMap<T> {
    pub fn new() -> Self {
        Self {
            objects: Vec::new(),
            next_id: 0,
        }
    }

    pub fn object(&self, map_id: u32) -> Option<&MapObject<T>> {
        self.objects.iter().find(|o| o.map_id == map_id)
    }

    pub fn object_mut(&mut self, map_id: u32) -> Option<&mut MapObject<T>> {
        self.objects.iter_mut().find(|o| o.map_id == map_id)
    }
}

fn iou(a: &CellSet, b: &CellSet) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Merge each detection into the best-scoring existing object when the
/// combined geometry/semantic score reaches the threshold, otherwise
/// instantiate a new object. Score = w_geo * IoU + w_sem * cosine.
pub fn integrate<T: Real>(
    map: &mut ObjectCentricMap<T>,
    obs: &Observation<T>,
    _pose: &AgentPose<T>,
    cfg: &MergeConfig,
) {
    for det in &obs.detections {
        let mut best: Option<(f64, usize)> = None;
        for (idx, obj) in map.objects.iter().enumerate() {
            let geo = iou(&det.visible_footprint, &obj.footprint);
            let sem = cosine(&det.descriptor, &obj.embedding)
                .to_f64()
                .unwrap_or(0.0);
            let score = cfg.weight_geometry * geo + cfg.weight_semantic * sem;
            if score >= cfg.threshold {
                let better = match best {
                    None => true,
                    Some((bs, _)) => score > bs,
                };
                if better {
                    best = Some((score, idx));
                }
            }
        }
        match best {
            Some((_, idx)) => {
                map.objects[idx].absorb(&det.descriptor, &det.visible_footprint, det.object_id);
            }
            None => {
                let mut embedding = det.descriptor.clone();
                normalize(&mut embedding);
                map.objects.push(MapObject {
                    map_id: map.next_id,
                    footprint: det.visible_footprint.clone(),
                    embedding: embedding.clone(),
                    view_count: 1,
                    query_similarity: None,
                    status: MapObjectStatus::Active,
                    source_ids: vec![det.object_id],
                    descriptor_sum: embedding,
                });
                map.next_id += 1;
            }
        }
    }
}

/// Per-cell knowledge accumulated from observations.
#[derive(Debug, Clone)]
pub struct ExplorationMap {
    obstacle: Grid<bool>,
    explored: Grid<bool>,
    /// Obstacle dilation radius (Chebyshev, in cells) excluded from the
    /// frontier band.
    pub dilation_cells: i32,
}

pub const DEFAULT_DILATION_CELLS: i32 = 2;
pub const DEFAULT_MIN_FRONTIER_SIZE: usize = 4;

impl ExplorationMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            obstacle: Grid::new(width, height, false),
            explored: Grid::new(width, height, false),
            dilation_cells: DEFAULT_DILATION_CELLS,
        }
    }

    pub fn width(&self) -> usize {
        self.obstacle.width()
    }

    pub fn height(&self) -> usize {
        self.obstacle.height()
    }

    pub fn is_explored(&self, c: Cell) -> bool {
        *self.explored.get(c).unwrap_or(&false)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        *self.obstacle.get(c).unwrap_or(&false)
    }

    pub fn explored_count(&self) -> usize {
        self.explored.values().filter(|&&e| e).count()
    }

    /// Known-obstacle grid for planning (unknown space counts as free).
    pub fn obstacle_grid(&self) -> &Grid<bool> {
        &self.obstacle
    }

    fn near_obstacle(&self, c: Cell) -> bool {
        let r = self.dilation_cells;
        for dy in -r..=r {
            for dx in -r..=r {
                if self.is_obstacle(Cell::new(c.x + dx, c.y + dy)) {
                    return true;
                }
            }
        }
        false
    }

    /// Frontier predicate: explored free cell, 4-adjacent to unexplored
    /// in-bounds space, outside the dilated obstacle band.
    pub fn is_frontier_cell(&self, c: Cell) -> bool {
        if !self.explored.in_bounds(c) || !self.is_explored(c) || self.is_obstacle(c) {
            return false;
        }
        if self.near_obstacle(c) {
            return false;
        }
        NEIGHBORS_4.iter().any(|&(dx, dy)| {
            let n = Cell::new(c.x + dx, c.y + dy);
            self.explored.in_bounds(n) && !self.is_explored(n)
        })
    }

    pub fn frontier_cells(&self) -> CellSet {
        self.explored
            .cells()
            .filter(|&c| self.is_frontier_cell(c))
            .collect()
    }
}

/// Fold an observation into the exploration map: visible cells become
/// explored, visible obstacle cells additionally mark the obstacle channel.
/// Knowledge only grows; nothing is ever un-explored.
pub fn update_exploration<T: Real>(
    expl: &mut ExplorationMap,
    obs: &Observation<T>,
    _pose: &AgentPose<T>,
) {
    for &c in &obs.visible_cells {
        if expl.explored.in_bounds(c) {
            expl.explored.set(c, true);
        }
    }
    for &c in &obs.visible_obstacles {
        if expl.obstacle.in_bounds(c) {
            expl.obstacle.set(c, true);
            expl.explored.set(c, true);
        }
    }
}

/// A connected frontier cluster.
#[derive(Debug, Clone)]
pub struct Frontier<T> {
    pub cells: CellSet,
    /// Mean of cell centers, meters.
    pub centroid: (T, T),
    pub size: usize,
}

impl<T: Real> Frontier<T> {
    /// Frontier cell nearest the centroid; a safe navigation goal because
    /// the centroid of a bent cluster may fall off the cluster.
    pub fn anchor_cell(&self, cell_size: T) -> Cell {
        let mut best = *self.cells.iter().next().expect("non-empty frontier");
        let mut best_d = T::infinity();
        for &c in &self.cells {
            let (cx, cy) = c.center(cell_size.to_f64().unwrap_or(1.0));
            let dx = real::<T>(cx) - self.centroid.0;
            let dy = real::<T>(cy) - self.centroid.1;
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

/// Cluster frontier cells into 8-connected chains, discarding clusters
/// smaller than `min_size`. Returned in row-major order of their smallest
/// cell, so output is deterministic.
pub fn extract_frontiers<T: Real>(
    expl: &ExplorationMap,
    cell_size: T,
    min_size: usize,
) -> Vec<Frontier<T>> {
    let cells = expl.frontier_cells();
    let mut remaining: CellSet = cells.clone();
    let mut frontiers = Vec::new();
    while let Some(&seed) = remaining.iter().next() {
        let mut cluster = CellSet::new();
        let mut stack = vec![seed];
        remaining.remove(&seed);
        while let Some(c) = stack.pop() {
            cluster.insert(c);
            for (dx, dy) in NEIGHBORS_8 {
                let n = Cell::new(c.x + dx, c.y + dy);
                if remaining.remove(&n) {
                    stack.push(n);
                }
            }
        }
        if cluster.len() >= min_size {
            let n = real_of::<T>(cluster.len());
            let half = real::<T>(0.5);
            let mut sx = T::zero();
            let mut sy = T::zero();
            for c in &cluster {
                sx = sx + (real::<T>(c.x as f64) + half) * cell_size;
                sy = sy + (real::<T>(c.y as f64) + half) * cell_size;
            }
            frontiers.push(Frontier {
                size: cluster.len(),
                centroid: (sx / n, sy / n),
                cells: cluster,
            });
        }
    }
    frontiers
}

/// Query-similarity grids: `obj_sem` projects per-object similarity onto
/// object footprints, `img_sem` projects per-frame similarity onto the
/// frame's visible region. Values live in [0, 1]; unobserved cells carry 0.
#[derive(Debug, Clone)]
pub struct SimilarityGrids<T> {
    pub obj_sem: Grid<T>,
    pub img_sem: Grid<T>,
}

impl<T: Real> SimilarityGrids<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            obj_sem: Grid::new(width, height, T::zero()),
            img_sem: Grid::new(width, height, T::zero()),
        }
    }

    /// Refresh the object channel from the map and cache each object's
    /// similarity. Overlapping footprints keep the maximum.
    pub fn refresh_objects(&mut self, map: &mut ObjectCentricMap<T>, query_embedding: &[T]) {
        self.obj_sem = Grid::new(self.obj_sem.width(), self.obj_sem.height(), T::zero());
        for obj in &mut map.objects {
            let sim = unit_similarity(cosine(&obj.embedding, query_embedding));
            obj.query_similarity = Some(sim);
            for &c in &obj.footprint {
                if self.obj_sem.in_bounds(c) && *self.obj_sem.at(c) < sim {
                    self.obj_sem.set(c, sim);
                }
            }
        }
    }

    /// Stamp one frame into the image channel. The frame descriptor is the
    /// mean of the frame's detection descriptors; frames with no detections
    /// carry similarity 0. Overlaps keep the maximum, so stamping is
    /// order-invariant.
    pub fn stamp_frame(&mut self, obs: &Observation<T>, query_embedding: &[T]) {
        let sim = frame_similarity(obs, query_embedding);
        if sim <= T::zero() {
            return;
        }
        for &c in &obs.visible_cells {
            if self.img_sem.in_bounds(c) && *self.img_sem.at(c) < sim {
                self.img_sem.set(c, sim);
            }
        }
    }
}

/// Similarity of a frame's mean detection descriptor to the query; 0 when
/// the frame saw no objects.
pub fn frame_similarity<T: Real>(obs: &Observation<T>, query_embedding: &[T]) -> T {
    if obs.detections.is_empty() {
        return T::zero();
    }
    let dim = query_embedding.len();
    let mut mean = vec![T::zero(); dim];
    for det in &obs.detections {
        for (m, d) in mean.iter_mut().zip(&det.descriptor) {
            *m = *m + *d;
        }
    }
    if !normalize(&mut mean) {
        return T::zero();
    }
    unit_similarity(cosine(&mean, query_embedding))
}

/// Build both similarity grids from the map and the full observation
/// history. Output does not depend on the order of objects in the map.
pub fn build_similarity_grids<T: Real>(
    map: &mut ObjectCentricMap<T>,
    history: &[Observation<T>],
    query_embedding: &[T],
    width: usize,
    height: usize,
) -> SimilarityGrids<T> {
    let mut grids = SimilarityGrids::new(width, height);
    grids.refresh_objects(map, query_embedding);
    for obs in history {
        grids.stamp_frame(obs, query_embedding);
    }
    grids
}

/// Plain-text rendering of the exploration map. `#` known obstacle,
/// `.` explored free, `F` frontier, space unknown.
pub fn exploration_ascii(expl: &ExplorationMap) -> String {
    let frontier = expl.frontier_cells();
    let mut out = String::new();
    for y in 0..expl.height() as i32 {
        for x in 0..expl.width() as i32 {
            let c = Cell::new(x, y);
            let ch = if frontier.contains(&c) {
                'F'
            } else if expl.is_obstacle(c) {
                '#'
            } else if expl.is_explored(c) {
                '.'
            } else {
                ' '
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

/// JSON dump of the object map for golden-file tests and tracing.
pub fn object_map_json<T: Real>(map: &ObjectCentricMap<T>) -> serde_json::Value {
    let objects: Vec<serde_json::Value> = map
        .objects
        .iter()
        .map(|o| {
            json!({
                "map_id": o.map_id,
                "footprint": o.footprint.iter().map(|c| [c.x, c.y]).collect::<Vec<_>>(),
                "embedding": o.embedding.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect::<Vec<_>>(),
                "view_count": o.view_count,
                "similarity": o.query_similarity.map(|s| s.to_f64().unwrap_or(0.0)),
                "status": o.status,
            })
        })
        .collect();
    json!({ "objects": objects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Detection;

    fn det(id: u32, cells: &[(i32, i32)], descriptor: Vec<f64>) -> Detection<f64> {
        Detection {
            object_id: id,
            descriptor,
            visible_footprint: cells.iter().map(|&(x, y)| Cell::new(x, y)).collect(),
            distance_m: 1.0,
        }
    }

    fn obs(detections: Vec<Detection<f64>>) -> Observation<f64> {
        let mut visible = CellSet::new();
        for d in &detections {
            visible.extend(d.visible_footprint.iter().copied());
        }
        Observation {
            visible_cells: visible,
            visible_obstacles: CellSet::new(),
            detections,
        }
    }

    fn e(dir: usize) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[dir] = 1.0;
        v
    }

    #[test]
    fn first_detection_creates_object() {
        let mut map = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        integrate(
            &mut map,
            &obs(vec![det(1, &[(2, 2)], e(0))]),
            &pose,
            &MergeConfig::default(),
        );
        assert_eq!(map.objects.len(), 1);
        assert_eq!(map.objects[0].view_count, 1);
    }

    #[test]
    fn identical_observation_merges() {
        let mut map = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        let o = obs(vec![det(1, &[(2, 2), (2, 3)], e(0))]);
        integrate(&mut map, &o, &pose, &MergeConfig::default());
        integrate(&mut map, &o, &pose, &MergeConfig::default());
        assert_eq!(map.objects.len(), 1);
        assert_eq!(map.objects[0].view_count, 2);
    }

    #[test]
    fn overlapping_views_merge_at_hand_computed_score() {
        // IoU 0.6 (6 shared of 10 union), cosine 0.95:
        // 0.5*0.6 + 0.5*0.95 = 0.775 >= 0.7, so one object.
        let mut map = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        let a: Vec<(i32, i32)> = (0..8).map(|i| (i % 4, i / 4)).collect();
        let b: Vec<(i32, i32)> = (2..10).map(|i| (i % 4, i / 4)).collect();
        let d1 = vec![1.0, 0.0, 0.0, 0.0];
        let d2 = vec![0.95, (1.0f64 - 0.95 * 0.95).sqrt(), 0.0, 0.0];
        integrate(&mut map, &obs(vec![det(1, &a, d1)]), &pose, &MergeConfig::default());
        integrate(&mut map, &obs(vec![det(1, &b, d2)]), &pose, &MergeConfig::default());
        assert_eq!(map.objects.len(), 1);
        assert_eq!(map.objects[0].footprint.len(), 10);
    }

    #[test]
    fn dissimilar_detection_instantiates_new_object() {
        let mut map = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        integrate(&mut map, &obs(vec![det(1, &[(0, 0)], e(0))]), &pose, &MergeConfig::default());
        integrate(&mut map, &obs(vec![det(2, &[(5, 5)], e(1))]), &pose, &MergeConfig::default());
        assert_eq!(map.objects.len(), 2);
    }

    #[test]
    fn merged_embedding_stays_unit_norm() {
        let mut map = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        let d2 = vec![0.9, (1.0f64 - 0.81).sqrt(), 0.0, 0.0];
        integrate(&mut map, &obs(vec![det(1, &[(1, 1)], e(0))]), &pose, &MergeConfig::default());
        integrate(&mut map, &obs(vec![det(1, &[(1, 1)], d2)]), &pose, &MergeConfig::default());
        let n = crate::embedding::norm(&map.objects[0].embedding);
        assert!((n - 1.0).abs() < 1e-9);
    }

    fn observe_region(expl: &mut ExplorationMap, cells: &[(i32, i32)], obstacles: &[(i32, i32)]) {
        let visible: CellSet = cells.iter().map(|&(x, y)| Cell::new(x, y)).collect();
        let visible_obstacles: CellSet = obstacles.iter().map(|&(x, y)| Cell::new(x, y)).collect();
        let o: Observation<f64> = Observation {
            visible_cells: visible,
            visible_obstacles,
            detections: vec![],
        };
        update_exploration(expl, &o, &AgentPose::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn exploration_is_monotone_and_counts_visible() {
        let mut expl = ExplorationMap::new(6, 6);
        observe_region(&mut expl, &[(0, 0), (1, 0), (2, 0)], &[]);
        assert_eq!(expl.explored_count(), 3);
        // Re-observing the same cells changes nothing.
        observe_region(&mut expl, &[(0, 0), (1, 0), (2, 0)], &[]);
        assert_eq!(expl.explored_count(), 3);
    }

    #[test]
    fn fully_explored_room_has_no_frontiers() {
        let mut expl = ExplorationMap::new(6, 6);
        let all: Vec<(i32, i32)> = (0..36).map(|i| (i % 6, i / 6)).collect();
        observe_region(&mut expl, &all, &[]);
        assert_eq!(expl.explored_count(), 36);
        assert!(extract_frontiers::<f64>(&expl, 0.25, 4).is_empty());
    }

    #[test]
    fn straight_boundary_is_one_frontier() {
        // Explore rows 0..5 of a 10x12 map, far from any obstacle: the
        // boundary row y=4 becomes a single 10-cell frontier.
        let mut expl = ExplorationMap::new(10, 12);
        let cells: Vec<(i32, i32)> = (0..10)
            .flat_map(|x| (0..5).map(move |y| (x, y)))
            .collect();
        observe_region(&mut expl, &cells, &[]);
        let frontiers = extract_frontiers::<f64>(&expl, 0.25, 4);
        assert_eq!(frontiers.len(), 1);
        assert_eq!(frontiers[0].size, 10);
        assert!(frontiers[0].cells.iter().all(|c| c.y == 4));
    }

    #[test]
    fn wall_splits_frontier_in_two() {
        // Same layout but a wall column through the middle splits the
        // boundary; the dilated band around the wall separates the halves.
        let mut expl = ExplorationMap::new(13, 12);
        let cells: Vec<(i32, i32)> = (0..13)
            .flat_map(|x| (0..5).map(move |y| (x, y)))
            .collect();
        let wall: Vec<(i32, i32)> = (0..6).map(|y| (6, y)).collect();
        observe_region(&mut expl, &cells, &wall);
        let frontiers = extract_frontiers::<f64>(&expl, 0.25, 4);
        assert_eq!(frontiers.len(), 2);
    }

    #[test]
    fn small_clusters_are_discarded() {
        let mut expl = ExplorationMap::new(10, 10);
        observe_region(&mut expl, &[(0, 0), (1, 0), (0, 1)], &[]);
        // Frontier cells exist but every cluster is below the minimum size.
        let frontiers = extract_frontiers::<f64>(&expl, 0.25, 4);
        assert!(frontiers.is_empty());
    }

    #[test]
    fn frontier_invariant_holds_for_extracted_cells() {
        let mut expl = ExplorationMap::new(12, 12);
        let cells: Vec<(i32, i32)> = (0..12)
            .flat_map(|x| (0..6).map(move |y| (x, y)))
            .collect();
        observe_region(&mut expl, &cells, &[(3, 2), (4, 2)]);
        for f in extract_frontiers::<f64>(&expl, 0.25, 1) {
            for &c in &f.cells {
                assert!(expl.is_explored(c));
                assert!(!expl.is_obstacle(c));
                assert!(!expl.near_obstacle(c));
                assert!(NEIGHBORS_4.iter().any(|&(dx, dy)| {
                    let n = Cell::new(c.x + dx, c.y + dy);
                    expl.explored.in_bounds(n) && !expl.is_explored(n)
                }));
            }
        }
    }

    #[test]
    fn similarity_grid_levels() {
        let mut map: ObjectCentricMap<f64> = ObjectCentricMap::new();
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        integrate(&mut map, &obs(vec![det(1, &[(1, 1)], e(0))]), &pose, &MergeConfig::default());
        integrate(&mut map, &obs(vec![det(2, &[(4, 4)], e(1))]), &pose, &MergeConfig::default());
        let query = e(0);
        let grids = build_similarity_grids(&mut map, &[], &query, 6, 6);
        // Equal embedding -> 1.0; orthogonal -> 0.5 under (cos+1)/2.
        assert!((grids.obj_sem.at(Cell::new(1, 1)) - 1.0).abs() < 1e-12);
        assert!((grids.obj_sem.at(Cell::new(4, 4)) - 0.5).abs() < 1e-12);
        // Unobserved cells carry zero.
        assert_eq!(*grids.obj_sem.at(Cell::new(0, 5)), 0.0);
        assert_eq!(*grids.img_sem.at(Cell::new(0, 5)), 0.0);
    }

    #[test]
    fn no_observations_means_all_zero() {
        let mut map: ObjectCentricMap<f64> = ObjectCentricMap::new();
        let grids = build_similarity_grids(&mut map, &[], &e(0), 4, 4);
        assert!(grids.obj_sem.values().all(|&v| v == 0.0));
        assert!(grids.img_sem.values().all(|&v| v == 0.0));
    }

    #[test]
    fn grids_are_object_order_invariant() {
        let pose = AgentPose::new(0.0, 0.0, 0.0);
        let query = e(0);
        let mut m1: ObjectCentricMap<f64> = ObjectCentricMap::new();
        integrate(&mut m1, &obs(vec![det(1, &[(1, 1)], e(0))]), &pose, &MergeConfig::default());
        integrate(&mut m1, &obs(vec![det(2, &[(1, 1)], e(1))]), &pose, &MergeConfig::default());
        let mut m2: ObjectCentricMap<f64> = ObjectCentricMap::new();
        integrate(&mut m2, &obs(vec![det(2, &[(1, 1)], e(1))]), &pose, &MergeConfig::default());
        integrate(&mut m2, &obs(vec![det(1, &[(1, 1)], e(0))]), &pose, &MergeConfig::default());
        let g1 = build_similarity_grids(&mut m1, &[], &query, 3, 3);
        let g2 = build_similarity_grids(&mut m2, &[], &query, 3, 3);
        assert_eq!(g1.obj_sem.at(Cell::new(1, 1)), g2.obj_sem.at(Cell::new(1, 1)));
    }

    #[test]
    fn ascii_dump_shows_channels() {
        let mut expl = ExplorationMap::new(4, 2);
        observe_region(&mut expl, &[(0, 0), (1, 0)], &[(1, 0)]);
        let art = exploration_ascii(&expl);
        assert!(art.contains('#'));
        assert!(art.contains('.'));
    }
}
