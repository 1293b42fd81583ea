//! Frontier scoring and selection, plus the candidate-target list that turns
//! high-similarity map objects into identification goals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Cell;
use crate::mapping::{Frontier, MapObjectStatus, ObjectCentricMap, SimilarityGrids};
use crate::num::{real, real_of, Real};
use crate::planning::DistanceField;

#[derive(Debug, Error)]
pub enum ExplorationError {
    #[error("no frontier available; exploration exhausted")]
    NoFrontier,
}

/// Semantic score bound driving the selection rule: the object channel wins
/// above `sup`, the image channel above `inf`, geometry otherwise.
#[derive(Debug, Clone, Copy)]
pub struct Bound<T> {
    pub inf: T,
    pub sup: T,
}

impl<T: Real> Bound<T> {
    pub fn new(inf: T, sup: T) -> Self {
        assert!(inf < sup, "bound requires inf < sup");
        Self { inf, sup }
    }
}

impl<T: Real> Default for Bound<T> {
    fn default() -> Self {
        Self::new(real(0.22), real(0.26))
    }
}

/// Scores attached to one frontier.
#[derive(Debug, Clone, Copy)]
pub struct FrontierScore<T> {
    /// Cost-utility geometry score; negative infinity marks unreachable.
    pub geo: T,
    pub sem_obj: T,
    pub sem_img: T,
    /// Geodesic distance from the agent, used for tie-breaks.
    pub distance_m: T,
}

/// Cost-utility geometry score: the fraction of unknown cells in a square
/// window around the frontier centroid, minus `lambda_cu` times the geodesic
/// distance from the agent normalized by the map diagonal. Unreachable
/// frontiers score negative infinity and are skipped by selection.
pub fn score_geometry<T: Real>(
    frontier: &Frontier<T>,
    expl: &crate::mapping::ExplorationMap,
    field_from_agent: &DistanceField<T>,
    lambda_cu: T,
    window_side_m: T,
    map_diagonal_m: T,
) -> (T, T) {
    let cell_size = field_from_agent.cell_size();
    let anchor = frontier.anchor_cell(cell_size);
    let dist = field_from_agent.value(anchor);
    if !dist.is_finite() {
        return (T::neg_infinity(), T::infinity());
    }
    let utility = unknown_fraction(frontier, expl, window_side_m, cell_size);
    let cost = dist / map_diagonal_m;
    (utility - lambda_cu * cost, dist)
}

/// Fraction of in-bounds window cells that are still unexplored.
fn unknown_fraction<T: Real>(
    frontier: &Frontier<T>,
    expl: &crate::mapping::ExplorationMap,
    window_side_m: T,
    cell_size: T,
) -> T {
    let center = centroid_cell(frontier, cell_size);
    let half = (window_side_m / cell_size / real(2.0))
        .round()
        .to_i32()
        .unwrap_or(4);
    let mut total = 0usize;
    let mut unknown = 0usize;
    for dy in -half..=half {
        for dx in -half..=half {
            let c = Cell::new(center.x + dx, center.y + dy);
            if c.x < 0 || c.y < 0 || c.x as usize >= expl.width() || c.y as usize >= expl.height()
            {
                continue;
            }
            total += 1;
            if !expl.is_explored(c) {
                unknown += 1;
            }
        }
    }
    if total == 0 {
        T::zero()
    } else {
        real_of::<T>(unknown) / real_of::<T>(total)
    }
}

fn centroid_cell<T: Real>(frontier: &Frontier<T>, cell_size: T) -> Cell {
    Cell::new(
        (frontier.centroid.0 / cell_size)
            .floor()
            .to_i32()
            .unwrap_or(0),
        (frontier.centroid.1 / cell_size)
            .floor()
            .to_i32()
            .unwrap_or(0),
    )
}

/// Maximum similarity of each channel in a square window centered on the
/// frontier centroid. `window_side_cells` is the side length in cells.
pub fn score_semantic<T: Real>(
    frontier: &Frontier<T>,
    grids: &SimilarityGrids<T>,
    window_side_cells: usize,
    cell_size: T,
) -> (T, T) {
    let center = centroid_cell(frontier, cell_size);
    let half = (window_side_cells / 2) as i32;
    let mut obj = T::zero();
    let mut img = T::zero();
    for dy in -half..=half {
        for dx in -half..=half {
            let c = Cell::new(center.x + dx, center.y + dy);
            if let Some(&v) = grids.obj_sem.get(c) {
                if v > obj {
                    obj = v;
                }
            }
            if let Some(&v) = grids.img_sem.get(c) {
                if v > img {
                    img = v;
                }
            }
        }
    }
    (obj, img)
}

/// Bounded selection rule over scored frontiers:
/// object-similarity argmax when its best value exceeds `bound.sup`, else
/// image-similarity argmax when its best value exceeds `bound.inf`, else the
/// geometry argmax. Unreachable frontiers are skipped entirely; ties break by
/// smaller geodesic distance, then row-major centroid order.
pub fn select_frontier<'f, T: Real>(
    frontiers: &'f [Frontier<T>],
    scores: &[FrontierScore<T>],
    bound: &Bound<T>,
) -> Result<&'f Frontier<T>, ExplorationError> {
    assert_eq!(frontiers.len(), scores.len(), "one score per frontier");
    let reachable: Vec<usize> = (0..frontiers.len())
        .filter(|&i| scores[i].geo.is_finite())
        .collect();
    if reachable.is_empty() {
        return Err(ExplorationError::NoFrontier);
    }

    let max_obj = reachable
        .iter()
        .map(|&i| scores[i].sem_obj)
        .fold(T::neg_infinity(), T::max);
    let max_img = reachable
        .iter()
        .map(|&i| scores[i].sem_img)
        .fold(T::neg_infinity(), T::max);

    let key: Box<dyn Fn(usize) -> T> = if max_obj > bound.sup {
        Box::new(|i| scores[i].sem_obj)
    } else if max_img > bound.inf {
        Box::new(|i| scores[i].sem_img)
    } else {
        Box::new(|i| scores[i].geo)
    };

    let mut best = reachable[0];
    for &i in &reachable[1..] {
        if better(i, best, &key, frontiers, scores) {
            best = i;
        }
    }
    Ok(&frontiers[best])
}

fn better<T: Real>(
    i: usize,
    j: usize,
    key: &dyn Fn(usize) -> T,
    frontiers: &[Frontier<T>],
    scores: &[FrontierScore<T>],
) -> bool {
    let (ki, kj) = (key(i), key(j));
    if ki != kj {
        return ki > kj;
    }
    if scores[i].distance_m != scores[j].distance_m {
        return scores[i].distance_m < scores[j].distance_m;
    }
    // Row-major centroid order for a final deterministic break.
    let ci = (frontiers[i].centroid.1, frontiers[i].centroid.0);
    let cj = (frontiers[j].centroid.1, frontiers[j].centroid.0);
    ci.partial_cmp(&cj) == Some(std::cmp::Ordering::Less)
}

/// Identification lifecycle of a candidate target. Transitions only move
/// forward: tentative -> pending -> confirmed or rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Tentative,
    PendingIdentification,
    Rejected,
    Confirmed,
}

/// A map object promoted to a potential target.
#[derive(Debug, Clone)]
pub struct CandidateTarget<T> {
    pub map_id: u32,
    pub best_similarity: T,
    pub status: CandidateStatus,
    /// Per-view descriptor pairs (first-person, top-down) packaged for the
    /// identification game.
    pub views: Vec<(Vec<T>, Vec<T>)>,
    /// Set once the agent has closed in for a better look, so a stalled
    /// tentative candidate is not approached forever.
    pub approached: bool,
}

/// Promotion thresholds on the [0, 1] similarity scale.
#[derive(Debug, Clone, Copy)]
pub struct CandidateThresholds<T> {
    pub tentative: T,
    pub confirm: T,
}

impl<T: Real> Default for CandidateThresholds<T> {
    fn default() -> Self {
        Self {
            tentative: real(0.80),
            confirm: real(0.90),
        }
    }
}

/// Candidate list with monotone status transitions.
#[derive(Debug, Clone, Default)]
pub struct CandidateList<T> {
    pub candidates: Vec<CandidateTarget<T>>,
}

impl<T: Real> CandidateList<T> {
    pub fn new() -> Self {
        Self { candidates: Vec::new() }
    }

    pub fn get(&self, map_id: u32) -> Option<&CandidateTarget<T>> {
        self.candidates.iter().find(|c| c.map_id == map_id)
    }

    pub fn get_mut(&mut self, map_id: u32) -> Option<&mut CandidateTarget<T>> {
        self.candidates.iter_mut().find(|c| c.map_id == map_id)
    }

    pub fn pending(&self) -> Vec<&CandidateTarget<T>> {
        self.candidates
            .iter()
            .filter(|c| c.status == CandidateStatus::PendingIdentification)
            .collect()
    }

    pub fn confirmed(&self) -> Option<&CandidateTarget<T>> {
        self.candidates
            .iter()
            .find(|c| c.status == CandidateStatus::Confirmed)
    }

    /// Tentative candidates not yet approached, ordered by map id.
    pub fn approach_queue(&self) -> Vec<&CandidateTarget<T>> {
        self.candidates
            .iter()
            .filter(|c| c.status == CandidateStatus::Tentative && !c.approached)
            .collect()
    }

    /// Promote the chosen candidate and reject the other pending ones.
    pub fn confirm(&mut self, map_id: u32, map: &mut ObjectCentricMap<T>) {
        for c in &mut self.candidates {
            if c.status != CandidateStatus::PendingIdentification {
                continue;
            }
            c.status = if c.map_id == map_id {
                CandidateStatus::Confirmed
            } else {
                CandidateStatus::Rejected
            };
            if let Some(obj) = map.object_mut(c.map_id) {
                obj.status = if c.map_id == map_id {
                    MapObjectStatus::Candidate
                } else {
                    MapObjectStatus::Rejected
                };
            }
        }
    }

    /// Reject every pending candidate (identification found no match).
    pub fn reject_pending(&mut self, map: &mut ObjectCentricMap<T>) {
        for c in &mut self.candidates {
            if c.status == CandidateStatus::PendingIdentification {
                c.status = CandidateStatus::Rejected;
                if let Some(obj) = map.object_mut(c.map_id) {
                    obj.status = MapObjectStatus::Rejected;
                }
            }
        }
    }
}

/// Fold the latest object similarities into the candidate list.
///
/// Objects whose similarity reaches the tentative threshold join as
/// tentative; reaching the confirm threshold promotes them to pending
/// identification. For relation-free queries a pending candidate confirms
/// directly (the similarity channel alone decides); with relations the
/// identification game resolves pending candidates. Returns map ids newly
/// promoted to pending.
pub fn update_candidates<T: Real>(
    list: &mut CandidateList<T>,
    map: &mut ObjectCentricMap<T>,
    thresholds: &CandidateThresholds<T>,
    query_has_relations: bool,
) -> Vec<u32> {
    let mut newly_pending = Vec::new();
    let snapshot: Vec<(u32, Option<T>, Vec<T>)> = map
        .objects
        .iter()
        .map(|o| (o.map_id, o.query_similarity, o.embedding.clone()))
        .collect();
    for (map_id, sim, embedding) in snapshot {
        let Some(sim) = sim else { continue };
        match list.get_mut(map_id) {
            Some(cand) => {
                if sim > cand.best_similarity {
                    cand.best_similarity = sim;
                }
                cand.views.push((embedding.clone(), embedding));
                if cand.status == CandidateStatus::Tentative
                    && cand.best_similarity >= thresholds.confirm
                {
                    cand.status = CandidateStatus::PendingIdentification;
                    newly_pending.push(map_id);
                }
            }
            None => {
                if sim < thresholds.tentative {
                    continue;
                }
                let status = if sim >= thresholds.confirm {
                    CandidateStatus::PendingIdentification
                } else {
                    CandidateStatus::Tentative
                };
                if status == CandidateStatus::PendingIdentification {
                    newly_pending.push(map_id);
                }
                if let Some(obj) = map.object_mut(map_id) {
                    obj.status = MapObjectStatus::Candidate;
                }
                list.candidates.push(CandidateTarget {
                    map_id,
                    best_similarity: sim,
                    status,
                    views: vec![(embedding.clone(), embedding)],
                    approached: false,
                });
            }
        }
    }
    // Relation-free queries: the similarity channel confirms directly.
    if !query_has_relations {
        let to_confirm: Option<u32> = list
            .pending()
            .iter()
            .max_by(|a, b| {
                a.best_similarity
                    .partial_cmp(&b.best_similarity)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.map_id.cmp(&a.map_id))
            })
            .map(|c| c.map_id);
        if let Some(id) = to_confirm {
            list.confirm(id, map);
        }
    }
    newly_pending
}

/// Configuration for the exploration policy. Field names double as the
/// config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub lambda_cu: f64,
    pub window_utility_m: f64,
    pub window_semantic_cells: usize,
    pub bound_inf: f64,
    pub bound_sup: f64,
    pub cand_tentative: f64,
    pub cand_confirm: f64,
    pub min_frontier_size: usize,
    pub dilation_cells: i32,
    pub approach_m: f64,
    pub replan_every: usize,
    /// `semantic` uses the bounded rule; `nearest` always takes the closest
    /// reachable frontier (ablation).
    pub frontier_policy: FrontierPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierPolicy {
    Semantic,
    Nearest,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            lambda_cu: 0.5,
            window_utility_m: 2.0,
            window_semantic_cells: 8,
            bound_inf: 0.22,
            bound_sup: 0.26,
            cand_tentative: 0.80,
            cand_confirm: 0.90,
            min_frontier_size: crate::mapping::DEFAULT_MIN_FRONTIER_SIZE,
            dilation_cells: crate::mapping::DEFAULT_DILATION_CELLS,
            approach_m: 1.5,
            replan_every: 10,
            frontier_policy: FrontierPolicy::Semantic,
        }
    }
}
