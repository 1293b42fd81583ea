//! Episode runner, identification variants, metrics and batch execution.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{mix_seed, EmbeddingSpace};
use crate::equilibrium::{
    init_policies, initial_policy, run_equilibrium, select_target, trace_csv, EquilibriumConfig,
    EquilibriumError, EquilibriumOutcome, TargetChoice,
};
use crate::exploration::{
    score_geometry, score_semantic, select_frontier, update_candidates, Bound, CandidateList,
    CandidateThresholds, ExplorationConfig, ExplorationError, FrontierPolicy, FrontierScore,
};
use crate::grid::{Cell, CellSet};
use crate::mapping::{
    exploration_ascii, extract_frontiers, integrate, object_map_json, update_exploration,
    ExplorationMap, MergeConfig, ObjectCentricMap, SimilarityGrids,
};
use crate::num::{real, Real};
use crate::oracles::{
    estimate_distribution, truth_scores, CandidatePack, ContextItem, Oracle, OracleError,
    PackEntry, PackQuery, RemoteOracle, RemoteOracleConfig, SyntheticOracle,
    SyntheticOracleConfig,
};
use crate::planning::{extract_path, fmm_field, local_goal, next_action, PlanError};
use crate::world::{
    check_success, load_episode_with_space, observe, step, Action, AgentPose, Episode, GridScene,
    SensorNoise,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] crate::world::SceneError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("episodes failed: {}", .0.iter().map(|(i, e)| format!("#{i}: {e}")).collect::<Vec<_>>().join("; "))]
    Episodes(Vec<(usize, String)>),
}

/// Identification policy variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    /// Pick the candidate with the highest cached query similarity.
    ClipOnly,
    /// Argmax of the initial generator policy.
    GeneratorOnly,
    /// Modal answer of n generative samples.
    Ranking,
    /// Full equilibrium search over both policies.
    Game,
}

impl std::fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolicyVariant::ClipOnly => "clip_only",
            PolicyVariant::GeneratorOnly => "generator_only",
            PolicyVariant::Ranking => "ranking",
            PolicyVariant::Game => "game",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for PolicyVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clip_only" => Ok(Self::ClipOnly),
            "generator_only" => Ok(Self::GeneratorOnly),
            "ranking" => Ok(Self::Ranking),
            "game" => Ok(Self::Game),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

/// Sensor and embedding parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub fov_deg: f64,
    pub range_m: f64,
    /// Descriptor rotation in radians at full range.
    pub sensor_noise: f64,
    pub embed_dim: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fov_deg: crate::world::DEFAULT_FOV_DEG,
            range_m: crate::world::DEFAULT_RANGE_M,
            sensor_noise: 0.35,
            embed_dim: EmbeddingSpace::DEFAULT_DIM,
        }
    }
}

/// Which oracle backs the identification game.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OracleSelection {
    Synthetic(SyntheticOracleConfig),
    Remote(RemoteOracleConfig),
}

impl Default for OracleSelection {
    fn default() -> Self {
        Self::Synthetic(SyntheticOracleConfig::default())
    }
}

/// Full run configuration; doubles as the JSON config-file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Episode file paths, resolved relative to the config file location by
    /// the CLI.
    pub episodes: Vec<String>,
    pub variant: PolicyVariant,
    pub seed: u64,
    pub parallel: usize,
    pub out_dir: Option<String>,
    pub oracle: OracleSelection,
    /// Generative samples for the ranking variant (and sampled
    /// initializations); at least 2 for ranking.
    pub ranking_samples: usize,
    pub sim: SimConfig,
    pub exploration: ExplorationConfig,
    pub equilibrium: EquilibriumConfig,
    pub merge: MergeConfig,
    /// Record real wall-clock per episode; off by default so batch output is
    /// byte-identical across runs.
    pub timing: bool,
    /// Dump per-game equilibrium traces to the output directory.
    pub eq_trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            episodes: Vec::new(),
            variant: PolicyVariant::Game,
            seed: 0,
            parallel: 1,
            out_dir: None,
            oracle: OracleSelection::default(),
            ranking_samples: 5,
            sim: SimConfig::default(),
            exploration: ExplorationConfig::default(),
            equilibrium: EquilibriumConfig::default(),
            merge: MergeConfig::default(),
            timing: false,
            eq_trace: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.variant == PolicyVariant::Ranking && self.ranking_samples < 2 {
            return Err(HarnessError::Config(
                "ranking variant requires ranking_samples >= 2".into(),
            ));
        }
        self.equilibrium.validate()?;
        Ok(())
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StoppedSuccess,
    StoppedWrong,
    StepLimit,
    NoFrontier,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::StoppedSuccess => "stopped_success",
            Termination::StoppedWrong => "stopped_wrong",
            Termination::StepLimit => "step_limit",
            Termination::NoFrontier => "no_frontier",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Termination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stopped_success" => Ok(Self::StoppedSuccess),
            "stopped_wrong" => Ok(Self::StoppedWrong),
            "step_limit" => Ok(Self::StepLimit),
            "no_frontier" => Ok(Self::NoFrontier),
            other => Err(format!("unknown termination '{other}'")),
        }
    }
}

/// Per-episode outcome.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub episode_id: usize,
    pub variant: PolicyVariant,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    /// Ground-truth shortest length to the success boundary (meters).
    pub shortest_m: f64,
    /// Traversed length (meters).
    pub traversed_m: f64,
    /// Final distance to the nearest goal centroid (meters).
    pub dtg_m: f64,
    pub termination: Termination,
    pub wall_ms: u64,
    /// Step index at which the candidate list first became non-empty.
    pub steps_to_first_candidate: Option<usize>,
}

/// Aggregate metrics.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsSummary {
    pub variant: String,
    pub n: usize,
    pub sr: f64,
    pub spl: f64,
    pub dtg_mean: f64,
}

/// SR, SPL and mean DTG over a non-empty result set.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<MetricsSummary, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::EmptyBatch);
    }
    let n = results.len() as f64;
    let sr = results.iter().filter(|r| r.success).count() as f64 / n;
    let spl = results
        .iter()
        .map(|r| {
            if r.success {
                r.shortest_m / r.shortest_m.max(r.traversed_m)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / n;
    let dtg_mean = results.iter().map(|r| r.dtg_m).sum::<f64>() / n;
    let first = results[0].variant;
    let variant = if results.iter().all(|r| r.variant == first) {
        first.to_string()
    } else {
        "mixed".to_string()
    };
    Ok(MetricsSummary {
        variant,
        n: results.len(),
        sr,
        spl,
        dtg_mean,
    })
}

/// Resolve one identification event under the chosen variant. Returns the
/// choice plus the equilibrium outcome when the game actually ran.
pub fn identify_with_variant<T: Real>(
    variant: PolicyVariant,
    pack: &CandidatePack<T>,
    oracle: &dyn Oracle<T>,
    eq_cfg: &EquilibriumConfig,
    ranking_samples: usize,
) -> Result<(TargetChoice, Option<EquilibriumOutcome<T>>), HarnessError> {
    if pack.entries.is_empty() {
        return Ok((TargetChoice::NoMatch, None));
    }
    let bias: T = real(eq_cfg.bias);
    match variant {
        PolicyVariant::ClipOnly => {
            let mut best = 0usize;
            for (i, e) in pack.entries.iter().enumerate() {
                if e.similarity > pack.entries[best].similarity {
                    best = i;
                }
            }
            Ok((TargetChoice::Candidate(best), None))
        }
        PolicyVariant::GeneratorOnly => {
            let weights = oracle.generative_weights(pack)?;
            let policy = initial_policy(&weights, bias)?;
            let r = policy.argmax();
            let choice = if r == policy.no_match_index() {
                TargetChoice::NoMatch
            } else {
                TargetChoice::Candidate(r)
            };
            Ok((choice, None))
        }
        PolicyVariant::Ranking => {
            let counts = estimate_distribution(oracle, pack, ranking_samples)?;
            let mut best = 0usize;
            for (i, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = i;
                }
            }
            let choice = if best + 1 == counts.len() {
                TargetChoice::NoMatch
            } else {
                TargetChoice::Candidate(best)
            };
            Ok((choice, None))
        }
        PolicyVariant::Game => {
            let gen_w = oracle.generative_weights(pack)?;
            let disc_w = oracle.discriminative_weights(pack)?;
            let (g, d) = init_policies(&gen_w, &disc_w, bias)?;
            let outcome = run_equilibrium(g, d, eq_cfg)?;
            let choice = select_target(&outcome.generator, &outcome.discriminator);
            Ok((choice, Some(outcome)))
        }
    }
}

/// Nearby-object radius serialized into candidate packs.
const CONTEXT_RADIUS_M: f64 = 3.0;

/// Build the identification pack for the current pending candidates.
/// Returns the pack plus each candidate's ground-truth source id (consumed
/// only by the synthetic oracle and scoring).
pub fn build_pack<T: Real>(
    scene: &GridScene<T>,
    map: &ObjectCentricMap<T>,
    pending_ids: &[u32],
    query: &crate::world::Query,
) -> Result<(CandidatePack<T>, Vec<u32>), HarnessError> {
    let mut entries = Vec::new();
    let mut sources = Vec::new();
    for (i, &map_id) in pending_ids.iter().enumerate() {
        let obj = map
            .object(map_id)
            .ok_or_else(|| HarnessError::Config(format!("unknown map object {map_id}")))?;
        let source = obj.dominant_source();
        let source_obj = scene.object(source);
        let centroid = source_obj
            .map(|o| {
                (
                    o.centroid.0.to_f64().unwrap_or(0.0),
                    o.centroid.1.to_f64().unwrap_or(0.0),
                )
            })
            .unwrap_or((0.0, 0.0));
        let mut context = Vec::new();
        for other in &scene.objects {
            if other.id == source {
                continue;
            }
            let ox = other.centroid.0.to_f64().unwrap_or(0.0);
            let oy = other.centroid.1.to_f64().unwrap_or(0.0);
            let d = ((ox - centroid.0).powi(2) + (oy - centroid.1).powi(2)).sqrt();
            if d <= CONTEXT_RADIUS_M {
                let mut bearing = (oy - centroid.1).atan2(ox - centroid.0).to_degrees();
                if bearing < 0.0 {
                    bearing += 360.0;
                }
                context.push(ContextItem {
                    category: other.category.clone(),
                    bearing_deg: bearing,
                    distance_m: d,
                });
            }
        }
        entries.push(PackEntry {
            candidate_id: i,
            map_id,
            similarity: obj.query_similarity.unwrap_or_else(T::zero),
            first_person: obj.embedding.clone(),
            top_down: obj.embedding.clone(),
            context,
            summary: String::new(),
        });
        sources.push(source);
    }
    let pack = CandidatePack::new(PackQuery::from_query(query), entries)?;
    Ok((pack, sources))
}

fn make_oracle<T: Real>(
    selection: &OracleSelection,
    scene: &GridScene<T>,
    query: &crate::world::Query,
    sources: &[u32],
    game_seed: u64,
) -> Result<Box<dyn Oracle<T>>, HarnessError> {
    match selection {
        OracleSelection::Synthetic(base) => {
            let truth = truth_scores(scene, query, sources);
            let mut cfg = base.clone();
            cfg.seed = mix_seed(&[base.seed, game_seed]);
            Ok(Box::new(SyntheticOracle::new(cfg, &truth)))
        }
        OracleSelection::Remote(rc) => Ok(Box::new(RemoteOracle::new(rc.clone())?)),
    }
}

/// One per-step snapshot for tracing.
#[derive(Debug, Clone, Serialize)]
pub struct StepSnapshot {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
    pub action: Action,
    pub exploration: String,
    pub objects: serde_json::Value,
}

/// Run one episode to termination.
pub fn run_episode<T: Real>(
    scene: &GridScene<T>,
    episode: &Episode<T>,
    cfg: &RunConfig,
    episode_id: usize,
    seed: u64,
) -> Result<EpisodeResult, HarnessError> {
    run_episode_impl(scene, episode, cfg, episode_id, seed, None)
}

/// Run one episode recording per-step snapshots.
pub fn run_episode_traced<T: Real>(
    scene: &GridScene<T>,
    episode: &Episode<T>,
    cfg: &RunConfig,
    episode_id: usize,
    seed: u64,
) -> Result<(EpisodeResult, Vec<StepSnapshot>), HarnessError> {
    let mut snapshots = Vec::new();
    let result = run_episode_impl(scene, episode, cfg, episode_id, seed, Some(&mut snapshots))?;
    Ok((result, snapshots))
}

fn run_episode_impl<T: Real>(
    scene: &GridScene<T>,
    episode: &Episode<T>,
    cfg: &RunConfig,
    episode_id: usize,
    seed: u64,
    mut trace: Option<&mut Vec<StepSnapshot>>,
) -> Result<EpisodeResult, HarnessError> {
    let started = Instant::now();
    let space = EmbeddingSpace::new(cfg.sim.embed_dim);
    let query_emb: Vec<T> = space.query_embedding(
        &episode.query.main_goal.category,
        &episode.query.main_goal.attributes,
    );
    let cell_size = scene.cell_size;
    let fov: T = real(cfg.sim.fov_deg);
    let range: T = real(cfg.sim.range_m);
    let noise = SensorNoise {
        angle_scale: real(cfg.sim.sensor_noise),
        seed: mix_seed(&[seed, 0x6f6273]),
    };
    let merge = cfg.merge;
    let thresholds = CandidateThresholds {
        tentative: real(cfg.exploration.cand_tentative),
        confirm: real(cfg.exploration.cand_confirm),
    };
    let bound = Bound::new(
        real(cfg.exploration.bound_inf),
        real(cfg.exploration.bound_sup),
    );
    let lambda_cu: T = real(cfg.exploration.lambda_cu);
    let window_utility: T = real(cfg.exploration.window_utility_m);
    let horizon: T = real(2.0);
    let heading_tol: T = real(15.0);
    let approach: T = real(cfg.exploration.approach_m);
    let stop_margin = (episode.success_radius - cell_size - cell_size).max(cell_size);
    let diagonal = scene.diagonal_m();

    let mut pose = episode.start;
    let mut map: ObjectCentricMap<T> = ObjectCentricMap::new();
    let mut expl = ExplorationMap::new(scene.width, scene.height);
    expl.dilation_cells = cfg.exploration.dilation_cells;
    let mut grids: SimilarityGrids<T> = SimilarityGrids::new(scene.width, scene.height);
    let mut candidates: CandidateList<T> = CandidateList::new();

    let mut confirmed_goal: Option<u32> = None;
    let mut frontier_goal: Option<CellSet> = None;
    let mut frontier_selected_at = 0usize;
    let mut game_count = 0u64;
    let mut traversed = T::zero();
    let mut steps_used = 0usize;
    let mut termination = Termination::StepLimit;
    let mut steps_to_first_candidate: Option<usize> = None;

    'episode: for step_i in 0..episode.max_steps {
        let obs = observe(scene, &pose, fov, range, &noise);
        integrate(&mut map, &obs, &pose, &merge);
        update_exploration(&mut expl, &obs, &pose);
        grids.refresh_objects(&mut map, &query_emb);
        grids.stamp_frame(&obs, &query_emb);
        let candidate_count_before = candidates.candidates.len();
        let newly_pending = update_candidates(
            &mut candidates,
            &mut map,
            &thresholds,
            episode.query.has_relations(),
        );
        if steps_to_first_candidate.is_none() && !candidates.candidates.is_empty() {
            steps_to_first_candidate = Some(step_i);
        }
        let candidate_event =
            !newly_pending.is_empty() || candidates.candidates.len() != candidate_count_before;

        // Identification: resolve all pending candidates when new ones show
        // up and no target is confirmed yet.
        if confirmed_goal.is_none() && !newly_pending.is_empty() {
            let pending_ids: Vec<u32> = candidates.pending().iter().map(|c| c.map_id).collect();
            if !pending_ids.is_empty() {
                let (pack, sources) = build_pack(scene, &map, &pending_ids, &episode.query)?;
                let game_seed = mix_seed(&[seed, 0x67616d65, game_count]);
                game_count += 1;
                let oracle = make_oracle(&cfg.oracle, scene, &episode.query, &sources, game_seed)?;
                let (choice, outcome) = identify_with_variant(
                    cfg.variant,
                    &pack,
                    oracle.as_ref(),
                    &cfg.equilibrium,
                    cfg.ranking_samples,
                )?;
                if cfg.eq_trace {
                    if let (Some(outcome), Some(dir)) = (&outcome, &cfg.out_dir) {
                        let path = Path::new(dir)
                            .join(format!("eq_trace_ep{episode_id}_game{}.csv", game_count - 1));
                        std::fs::write(path, trace_csv(outcome))?;
                    }
                }
                match choice {
                    TargetChoice::Candidate(i) => {
                        let id = pack.entries[i].map_id;
                        candidates.confirm(id, &mut map);
                        confirmed_goal = Some(id);
                    }
                    TargetChoice::NoMatch => candidates.reject_pending(&mut map),
                }
            }
        }
        if confirmed_goal.is_none() {
            if let Some(c) = candidates.confirmed() {
                confirmed_goal = Some(c.map_id);
            }
        }

        // Goal choice: confirmed target, then approach views, then frontier.
        let agent_cell = pose.cell(cell_size);
        let mut goal_cells: Option<CellSet> = None;
        if let Some(id) = confirmed_goal {
            let obj = map
                .object(id)
                .ok_or_else(|| HarnessError::Config(format!("lost map object {id}")))?;
            let (cx, cy) = obj.centroid(cell_size);
            if pose.distance_to(cx, cy) <= stop_margin {
                steps_used = step_i + 1;
                termination = if check_success(scene, &pose, episode) {
                    Termination::StoppedSuccess
                } else {
                    Termination::StoppedWrong
                };
                push_snapshot(&mut trace, step_i, &pose, Action::Stop, &expl, &map);
                break 'episode;
            }
            goal_cells = Some(obj.footprint.clone());
        } else {
            // Close in on the nearest unapproached tentative candidate.
            loop {
                let target = candidates
                    .approach_queue()
                    .into_iter()
                    .map(|c| c.map_id)
                    .filter_map(|id| map.object(id).map(|o| (id, o.centroid(cell_size))))
                    .min_by(|a, b| {
                        let da = pose.distance_to(a.1 .0, a.1 .1);
                        let db = pose.distance_to(b.1 .0, b.1 .1);
                        da.partial_cmp(&db)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.0.cmp(&b.0))
                    });
                match target {
                    Some((id, (cx, cy))) => {
                        if pose.distance_to(cx, cy) <= approach {
                            if let Some(c) = candidates.get_mut(id) {
                                c.approached = true;
                            }
                            continue;
                        }
                        goal_cells = map.object(id).map(|o| o.footprint.clone());
                        break;
                    }
                    None => break,
                }
            }
        }

        // Frontier goal when nothing better is on the table.
        if goal_cells.is_none() {
            let keep = match &frontier_goal {
                Some(cells)
                    if !candidate_event
                        && step_i < frontier_selected_at + cfg.exploration.replan_every =>
                {
                    cells.iter().any(|&c| expl.is_frontier_cell(c))
                }
                _ => false,
            };
            if !keep {
                let frontiers =
                    extract_frontiers(&expl, cell_size, cfg.exploration.min_frontier_size);
                if frontiers.is_empty() {
                    steps_used = step_i;
                    termination = Termination::NoFrontier;
                    break 'episode;
                }
                let agent_goal: CellSet = [agent_cell].into_iter().collect();
                let field_from_agent = fmm_field(expl.obstacle_grid(), &agent_goal, cell_size)?;
                let scores: Vec<FrontierScore<T>> = frontiers
                    .iter()
                    .map(|f| {
                        let (geo, dist) = score_geometry(
                            f,
                            &expl,
                            &field_from_agent,
                            lambda_cu,
                            window_utility,
                            diagonal,
                        );
                        let (sem_obj, sem_img) = score_semantic(
                            f,
                            &grids,
                            cfg.exploration.window_semantic_cells,
                            cell_size,
                        );
                        FrontierScore {
                            geo,
                            sem_obj,
                            sem_img,
                            distance_m: dist,
                        }
                    })
                    .collect();
                let selected = match cfg.exploration.frontier_policy {
                    FrontierPolicy::Semantic => select_frontier(&frontiers, &scores, &bound),
                    FrontierPolicy::Nearest => nearest_frontier(&frontiers, &scores),
                };
                match selected {
                    Ok(f) => {
                        frontier_goal = Some(f.cells.clone());
                        frontier_selected_at = step_i;
                    }
                    Err(ExplorationError::NoFrontier) => {
                        steps_used = step_i;
                        termination = Termination::NoFrontier;
                        break 'episode;
                    }
                }
            }
            goal_cells = frontier_goal.clone();
        }

        let goal_cells = goal_cells.expect("goal decided above");

        // Plan over known obstacles (unknown space is traversable) and act.
        let action = match fmm_field(expl.obstacle_grid(), &goal_cells, cell_size) {
            Ok(field) => match extract_path(&field, expl.obstacle_grid(), agent_cell) {
                Ok(path) if !path.is_empty() => {
                    let wp = local_goal(&path, &pose, horizon, cell_size);
                    let (wx, wy) = wp.center(cell_size.to_f64().unwrap_or(1.0));
                    next_action(&pose, (real(wx), real(wy)), false, heading_tol)
                }
                _ => {
                    // Goal currently unreachable in the known map: scan.
                    frontier_goal = None;
                    Action::TurnLeft
                }
            },
            Err(_) => {
                frontier_goal = None;
                Action::TurnLeft
            }
        };

        push_snapshot(&mut trace, step_i, &pose, action, &expl, &map);
        let next = step(scene, &pose, action);
        traversed = traversed + pose.distance_to(next.x, next.y);
        pose = next;
        steps_used = step_i + 1;
    }

    // Ground-truth accounting.
    let goal_centroids: Vec<(T, T)> = episode
        .query
        .goal_object_ids
        .iter()
        .filter_map(|id| scene.object(*id))
        .map(|o| o.centroid)
        .collect();
    let dtg = goal_centroids
        .iter()
        .map(|&(x, y)| pose.distance_to(x, y))
        .fold(T::infinity(), T::min);
    let shortest = shortest_to_goal(scene, episode, &goal_centroids);
    let success = termination == Termination::StoppedSuccess;

    let wall_ms = if cfg.timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(EpisodeResult {
        episode_id,
        variant: cfg.variant,
        seed,
        success,
        steps: steps_used,
        shortest_m: shortest.to_f64().unwrap_or(f64::INFINITY),
        traversed_m: traversed.to_f64().unwrap_or(0.0),
        dtg_m: dtg.to_f64().unwrap_or(f64::INFINITY),
        termination,
        wall_ms,
        steps_to_first_candidate,
    })
}

fn push_snapshot<T: Real>(
    trace: &mut Option<&mut Vec<StepSnapshot>>,
    step: usize,
    pose: &AgentPose<T>,
    action: Action,
    expl: &ExplorationMap,
    map: &ObjectCentricMap<T>,
) {
    if let Some(sink) = trace {
        sink.push(StepSnapshot {
            step,
            x: pose.x.to_f64().unwrap_or(0.0),
            y: pose.y.to_f64().unwrap_or(0.0),
            heading_deg: pose.heading_deg.to_f64().unwrap_or(0.0),
            action,
            exploration: exploration_ascii(expl),
            objects: object_map_json(map),
        });
    }
}

fn nearest_frontier<'f, T: Real>(
    frontiers: &'f [crate::mapping::Frontier<T>],
    scores: &[FrontierScore<T>],
) -> Result<&'f crate::mapping::Frontier<T>, ExplorationError> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if !s.distance_m.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(j) => s.distance_m < scores[j].distance_m,
        };
        if better {
            best = Some(i);
        }
    }
    best.map(|i| &frontiers[i]).ok_or(ExplorationError::NoFrontier)
}

/// Ground-truth shortest length: geodesic from the start to each goal
/// centroid minus the success radius, floored at one cell. Falls back to the
/// straight-line distance when the map blocks every route.
fn shortest_to_goal<T: Real>(
    scene: &GridScene<T>,
    episode: &Episode<T>,
    goal_centroids: &[(T, T)],
) -> T {
    let cell_size = scene.cell_size;
    if goal_centroids.is_empty() {
        return cell_size;
    }
    let start_cell = episode.start.cell(cell_size);
    let obstacles = scene.obstacle_grid();
    let start_goal: CellSet = [start_cell].into_iter().collect();
    let field = fmm_field(&obstacles, &start_goal, cell_size).ok();
    let mut best = T::infinity();
    for &(x, y) in goal_centroids {
        let c = Cell::new(
            (x / cell_size).floor().to_i32().unwrap_or(0),
            (y / cell_size).floor().to_i32().unwrap_or(0),
        );
        let geodesic = field
            .as_ref()
            .map(|f| f.value(c))
            .unwrap_or_else(T::infinity);
        let d = if geodesic.is_finite() {
            geodesic
        } else {
            episode.start.distance_to(x, y)
        };
        if d < best {
            best = d;
        }
    }
    (best - episode.success_radius).max(cell_size)
}

/// Outcome of a batch run.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub results: Vec<EpisodeResult>,
    pub summary: MetricsSummary,
    pub csv: String,
    pub summary_json: String,
}

pub const RESULTS_CSV_HEADER: &str =
    "episode_id,variant,seed,success,steps,l_i,p_i,dtg,termination,wall_ms";

/// Render results in CSV form, ordered by episode index.
pub fn results_csv(results: &[EpisodeResult]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.episode_id,
            r.variant,
            r.seed,
            u8::from(r.success),
            r.steps,
            r.shortest_m,
            r.traversed_m,
            r.dtg_m,
            r.termination,
            r.wall_ms
        ));
    }
    out
}

/// Parse a results CSV produced by [`results_csv`].
pub fn parse_results_csv(text: &str) -> Result<Vec<EpisodeResult>, HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Config("empty results file".into()))?;
    if header.trim() != RESULTS_CSV_HEADER {
        return Err(HarnessError::Config(format!(
            "unexpected results header: {header}"
        )));
    }
    let mut results = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(HarnessError::Config(format!(
                "line {}: expected 10 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| HarnessError::Config(format!("line {}: bad {what}", ln + 2));
        results.push(EpisodeResult {
            episode_id: fields[0].parse().map_err(|_| parse_err("episode_id"))?,
            variant: fields[1].parse().map_err(HarnessError::Config)?,
            seed: fields[2].parse().map_err(|_| parse_err("seed"))?,
            success: fields[3] == "1",
            steps: fields[4].parse().map_err(|_| parse_err("steps"))?,
            shortest_m: fields[5].parse().map_err(|_| parse_err("l_i"))?,
            traversed_m: fields[6].parse().map_err(|_| parse_err("p_i"))?,
            dtg_m: fields[7].parse().map_err(|_| parse_err("dtg"))?,
            termination: fields[8].parse().map_err(HarnessError::Config)?,
            wall_ms: fields[9].parse().map_err(|_| parse_err("wall_ms"))?,
            steps_to_first_candidate: None,
        });
    }
    Ok(results)
}

/// Load every episode, run them (parallel up to `cfg.parallel`, per-episode
/// seed = master seed XOR episode index), and emit deterministic CSV/JSON.
/// Fails fast on config errors and aggregates per-episode failures.
pub fn run_batch(cfg: &RunConfig) -> Result<BatchOutput, HarnessError> {
    run_batch_from(cfg, Path::new("."))
}

/// [`run_batch`] with episode paths resolved relative to `base`.
pub fn run_batch_from(cfg: &RunConfig, base: &Path) -> Result<BatchOutput, HarnessError> {
    cfg.validate()?;
    if cfg.episodes.is_empty() {
        return Err(HarnessError::EmptyBatch);
    }
    let space = EmbeddingSpace::new(cfg.sim.embed_dim);
    // Validate everything upfront: any missing file aborts before running.
    let mut loaded: Vec<(GridScene<f64>, Episode<f64>)> = Vec::new();
    for rel in &cfg.episodes {
        let path = resolve(base, rel);
        loaded.push(load_episode_with_space::<f64>(&path, &space)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let outcomes: Vec<Result<EpisodeResult, HarnessError>> = pool.install(|| {
        use rayon::prelude::*;
        loaded
            .par_iter()
            .enumerate()
            .map(|(i, (scene, episode))| {
                run_episode(scene, episode, cfg, i, cfg.seed ^ i as u64)
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(res) => results.push(res),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(HarnessError::Episodes(failures));
    }

    let summary = compute_metrics(&results)?;
    let csv = results_csv(&results);
    let summary_json =
        serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Config(e.to_string()))?;

    if let Some(dir) = &cfg.out_dir {
        let dir = resolve(base, dir);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("results.csv"), &csv)?;
        std::fs::write(dir.join("summary.json"), &summary_json)?;
    }

    Ok(BatchOutput {
        results,
        summary,
        csv,
        summary_json,
    })
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(success: bool, l: f64, p: f64, dtg: f64) -> EpisodeResult {
        EpisodeResult {
            episode_id: 0,
            variant: PolicyVariant::Game,
            seed: 0,
            success,
            steps: 10,
            shortest_m: l,
            traversed_m: p,
            dtg_m: dtg,
            termination: if success {
                Termination::StoppedSuccess
            } else {
                Termination::StepLimit
            },
            wall_ms: 0,
            steps_to_first_candidate: None,
        }
    }

    #[test]
    fn spl_formula() {
        let m = compute_metrics(&[result(true, 10.0, 20.0, 0.2)]).unwrap();
        assert_eq!(m.sr, 1.0);
        assert!((m.spl - 0.5).abs() < 1e-12);
    }

    #[test]
    fn failures_contribute_zero() {
        let m = compute_metrics(&[result(true, 10.0, 20.0, 0.2), result(false, 5.0, 9.0, 3.0)])
            .unwrap();
        assert_eq!(m.sr, 0.5);
        assert!((m.spl - 0.25).abs() < 1e-12);
        assert!((m.dtg_mean - 1.6).abs() < 1e-12);
    }

    #[test]
    fn short_traversal_clamps_to_one() {
        let m = compute_metrics(&[result(true, 10.0, 7.0, 0.0)]).unwrap();
        assert!((m.spl - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            compute_metrics(&[]).unwrap_err(),
            HarnessError::EmptyBatch
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![result(true, 2.5, 3.75, 0.5), result(false, 1.0, 0.25, 4.0)];
        let csv = results_csv(&rows);
        let parsed = parse_results_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].success, true);
        assert_eq!(parsed[0].shortest_m, 2.5);
        assert_eq!(parsed[1].termination, Termination::StepLimit);
    }

    #[test]
    fn ranking_requires_samples() {
        let cfg = RunConfig {
            variant: PolicyVariant::Ranking,
            ranking_samples: 1,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_episode_fails_before_running() {
        let cfg = RunConfig {
            episodes: vec!["does_not_exist.json".into()],
            ..RunConfig::default()
        };
        let err = run_batch(&cfg).unwrap_err();
        assert!(matches!(err, HarnessError::Scene(_)));
    }
}
