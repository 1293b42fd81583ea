//! Sources for the raw generative and discriminative weights consumed by the
//! identification game: a deterministic synthetic oracle with controllable
//! miscalibration, and an optional remote chat-completion client.

use std::sync::{Arc, Condvar, Mutex};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::rng_from;
use crate::num::{real, Real};
use crate::world::{GoalSpec, GridScene, Query, Relation, RelationClause};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("candidate pack mismatch: {0}")]
    PackMismatch(String),
}

/// Query content shipped to oracles. Deliberately excludes the ground-truth
/// goal ids.
#[derive(Debug, Clone, Serialize)]
pub struct PackQuery {
    pub text: String,
    pub main_goal: GoalSpec,
    pub relations: Vec<RelationClause>,
}

impl PackQuery {
    pub fn from_query(q: &Query) -> Self {
        Self {
            text: q.raw_text.clone(),
            main_goal: q.main_goal.clone(),
            relations: q.relations.clone(),
        }
    }
}

/// Nearby object summary attached to a candidate (category plus bearing and
/// range from the candidate).
#[derive(Debug, Clone, Serialize)]
pub struct ContextItem {
    pub category: String,
    pub bearing_deg: f64,
    pub distance_m: f64,
}

/// One candidate in the pack: multi-view descriptors plus spatial context.
#[derive(Debug, Clone)]
pub struct PackEntry<T> {
    /// Contiguous from 0 in pack order.
    pub candidate_id: usize,
    pub map_id: u32,
    /// Best query similarity seen for this candidate, [0, 1] scale.
    pub similarity: T,
    pub first_person: Vec<T>,
    pub top_down: Vec<T>,
    pub context: Vec<ContextItem>,
    /// Human-readable rendering used by the remote prompt.
    pub summary: String,
}

/// The bundle submitted to identification. The no-match option is appended
/// by the game layer as index `entries.len()`, not stored here.
#[derive(Debug, Clone)]
pub struct CandidatePack<T> {
    pub query: PackQuery,
    pub entries: Vec<PackEntry<T>>,
}

impl<T: Real> CandidatePack<T> {
    pub fn new(query: PackQuery, entries: Vec<PackEntry<T>>) -> Result<Self, OracleError> {
        for (i, e) in entries.iter().enumerate() {
            if e.candidate_id != i {
                return Err(OracleError::PackMismatch(format!(
                    "candidate ids must be contiguous from 0, found {} at {}",
                    e.candidate_id, i
                )));
            }
        }
        Ok(Self { query, entries })
    }

    /// Support size of the game: candidates plus the no-match option.
    pub fn support_len(&self) -> usize {
        self.entries.len() + 1
    }
}

// -------- ground truth --------

/// Relation thresholds used by the synthetic truth model.
pub const NEAR_DISTANCE_M: f64 = 2.0;
pub const BETWEEN_DISTANCE_M: f64 = 1.0;

/// Clean logit assigned to the no-match option: above any partial match,
/// below a full match.
pub const NO_MATCH_SCORE: f64 = 0.75;

/// Ground-truth assessment of one candidate against the query.
#[derive(Debug, Clone, Copy)]
pub struct CandidateTruth<T> {
    /// 1.0 for a full match, otherwise half the satisfied-constraint
    /// fraction (always <= 0.5).
    pub score: T,
    pub is_match: bool,
}

/// Does `point` lie within `tol` of the segment from `a` to `b`?
fn near_segment(point: (f64, f64), a: (f64, f64), b: (f64, f64), tol: f64) -> bool {
    let (px, py) = (point.0 - a.0, point.1 - a.1);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= f64::EPSILON {
        0.0
    } else {
        ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - point.0, a.1 + t * dy - point.1);
    (cx * cx + cy * cy).sqrt() <= tol
}

/// Evaluate one relation clause for a candidate centroid against the scene.
/// Directional relations use the dominant world-frame axis: right is +x,
/// left is -x, in-front is -y, behind is +y relative to the reference.
pub fn relation_satisfied<T: Real>(
    scene: &GridScene<T>,
    candidate_id: u32,
    centroid: (f64, f64),
    clause: &RelationClause,
) -> bool {
    let refs = |category: &str| {
        scene
            .objects
            .iter()
            .filter(move |o| o.id != candidate_id && o.category == category)
            .map(|o| {
                (
                    o.centroid.0.to_f64().unwrap_or(0.0),
                    o.centroid.1.to_f64().unwrap_or(0.0),
                )
            })
    };
    match clause.relation {
        Relation::Near => refs(&clause.references[0]).any(|r| {
            let d = ((centroid.0 - r.0).powi(2) + (centroid.1 - r.1).powi(2)).sqrt();
            d <= NEAR_DISTANCE_M
        }),
        Relation::Between => {
            let a_refs: Vec<_> = refs(&clause.references[0]).collect();
            let b_refs: Vec<_> = refs(&clause.references[1]).collect();
            a_refs.iter().any(|&a| {
                b_refs
                    .iter()
                    .any(|&b| near_segment(centroid, a, b, BETWEEN_DISTANCE_M))
            })
        }
        Relation::LeftOf | Relation::RightOf | Relation::InFrontOf | Relation::Behind => {
            // Judge against the nearest reference instance.
            let nearest = refs(&clause.references[0]).min_by(|a, b| {
                let da = (centroid.0 - a.0).powi(2) + (centroid.1 - a.1).powi(2);
                let db = (centroid.0 - b.0).powi(2) + (centroid.1 - b.1).powi(2);
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            });
            let Some(r) = nearest else { return false };
            let dx = centroid.0 - r.0;
            let dy = centroid.1 - r.1;
            match clause.relation {
                Relation::LeftOf => dx < -dy.abs(),
                Relation::RightOf => dx > dy.abs(),
                Relation::InFrontOf => dy < -dx.abs(),
                Relation::Behind => dy > dx.abs(),
                _ => unreachable!(),
            }
        }
    }
}

/// Score each candidate (identified by its ground-truth source object)
/// against the full query: category, attributes, and every relation clause.
pub fn truth_scores<T: Real>(
    scene: &GridScene<T>,
    query: &Query,
    source_ids: &[u32],
) -> Vec<CandidateTruth<T>> {
    source_ids
        .iter()
        .map(|&id| {
            let Some(obj) = scene.object(id) else {
                return CandidateTruth {
                    score: T::zero(),
                    is_match: false,
                };
            };
            let centroid = (
                obj.centroid.0.to_f64().unwrap_or(0.0),
                obj.centroid.1.to_f64().unwrap_or(0.0),
            );
            let mut total = 1usize;
            let mut hit = usize::from(obj.category == query.main_goal.category);
            for attr in &query.main_goal.attributes {
                total += 1;
                hit += usize::from(obj.attributes.contains(attr));
            }
            for clause in &query.relations {
                total += 1;
                hit += usize::from(relation_satisfied(scene, id, centroid, clause));
            }
            let frac = hit as f64 / total as f64;
            if hit == total {
                CandidateTruth {
                    score: T::one(),
                    is_match: true,
                }
            } else {
                CandidateTruth {
                    score: real(0.5 * frac),
                    is_match: false,
                }
            }
        })
        .collect()
}

// -------- synthetic oracle --------

/// Seeded synthetic oracle parameters. Noise perturbs the clean truth logits
/// per slot; bias shifts one randomly chosen wrong candidate per channel
/// (distinct between channels when possible), which models decorrelated
/// miscalibration of the two protocols.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticOracleConfig {
    pub seed: u64,
    pub gen_noise: f64,
    pub disc_noise: f64,
    pub gen_bias: f64,
    pub disc_bias: f64,
    /// Multiplies truth scores into logits.
    pub logit_scale: f64,
}

impl Default for SyntheticOracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gen_noise: 0.0,
            disc_noise: 0.0,
            gen_bias: 0.0,
            disc_bias: 0.0,
            logit_scale: 4.0,
        }
    }
}

const GEN_STREAM: u64 = 0x67656e;
const DISC_STREAM: u64 = 0x64697363;
const SAMPLE_STREAM: u64 = 0x73616d706c65;

/// Answer source shared by the identification variants.
pub trait Oracle<T: Real> {
    /// Raw non-negative weights over candidates plus no-match (generative
    /// protocol: "which candidate matches?").
    fn generative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError>;

    /// Raw non-negative per-candidate acceptance weights plus no-match
    /// (discriminative protocol: "is this candidate correct?").
    fn discriminative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError>;

    /// One sampled generative answer; `None` is an abstention.
    fn sample_answer(
        &self,
        pack: &CandidatePack<T>,
        draw_index: usize,
    ) -> Result<Option<usize>, OracleError>;
}

/// Deterministic oracle over ground-truth match scores.
#[derive(Debug, Clone)]
pub struct SyntheticOracle<T> {
    cfg: SyntheticOracleConfig,
    gen_logits: Vec<T>,
    disc_logits: Vec<T>,
}

impl<T: Real> SyntheticOracle<T> {
    pub fn new(cfg: SyntheticOracleConfig, truth: &[CandidateTruth<T>]) -> Self {
        let n = truth.len();
        let scale = cfg.logit_scale;
        let clean: Vec<f64> = truth
            .iter()
            .map(|t| scale * t.score.to_f64().unwrap_or(0.0))
            .chain(std::iter::once(scale * NO_MATCH_SCORE))
            .collect();
        let wrong: Vec<usize> = (0..n).filter(|&i| !truth[i].is_match).collect();

        let mut gen_rng = rng_from(&[cfg.seed, GEN_STREAM]);
        let mut gen_logits: Vec<f64> = clean
            .iter()
            .map(|&l| l + cfg.gen_noise * gen_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let gen_target = pick_index(&mut gen_rng, &wrong);
        if cfg.gen_bias != 0.0 {
            if let Some(i) = gen_target {
                gen_logits[i] += cfg.gen_bias;
            }
        }

        let mut disc_rng = rng_from(&[cfg.seed, DISC_STREAM]);
        let mut disc_logits: Vec<f64> = clean
            .iter()
            .map(|&l| l + cfg.disc_noise * disc_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let disc_pool: Vec<usize> = match gen_target {
            Some(g) if wrong.len() > 1 => wrong.iter().copied().filter(|&i| i != g).collect(),
            _ => wrong.clone(),
        };
        if cfg.disc_bias != 0.0 {
            if let Some(i) = pick_index(&mut disc_rng, &disc_pool) {
                disc_logits[i] += cfg.disc_bias;
            }
        }

        Self {
            cfg,
            gen_logits: gen_logits.into_iter().map(real).collect(),
            disc_logits: disc_logits.into_iter().map(real).collect(),
        }
    }

    fn check(&self, pack: &CandidatePack<T>) -> Result<(), OracleError> {
        if pack.support_len() != self.gen_logits.len() {
            return Err(OracleError::PackMismatch(format!(
                "oracle built for support {}, pack has {}",
                self.gen_logits.len(),
                pack.support_len()
            )));
        }
        Ok(())
    }
}

fn pick_index(rng: &mut ChaCha8Rng, pool: &[usize]) -> Option<usize> {
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

impl<T: Real> Oracle<T> for SyntheticOracle<T> {
    fn generative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError> {
        self.check(pack)?;
        Ok(self.gen_logits.iter().map(|&l| l.exp()).collect())
    }

    fn discriminative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError> {
        self.check(pack)?;
        Ok(self.disc_logits.iter().map(|&l| l.exp()).collect())
    }

    /// Gumbel-max draw over the generative logits with spread `gen_noise`:
    /// zero noise collapses to the deterministic argmax.
    fn sample_answer(
        &self,
        pack: &CandidatePack<T>,
        draw_index: usize,
    ) -> Result<Option<usize>, OracleError> {
        self.check(pack)?;
        let mut rng = rng_from(&[self.cfg.seed, SAMPLE_STREAM, draw_index as u64]);
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (i, &l) in self.gen_logits.iter().enumerate() {
            let u: f64 = rng.random_range(1e-12..1.0);
            let gumbel = -(-u.ln()).ln();
            let v = l.to_f64().unwrap_or(0.0) + self.cfg.gen_noise * gumbel;
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        Ok(Some(best))
    }
}

/// Free-function form of the synthetic generative channel.
pub fn synthetic_generative<T: Real>(
    pack: &CandidatePack<T>,
    truth: &[CandidateTruth<T>],
    cfg: &SyntheticOracleConfig,
) -> Result<Vec<T>, OracleError> {
    SyntheticOracle::new(cfg.clone(), truth).generative_weights(pack)
}

/// Free-function form of the synthetic discriminative channel.
pub fn synthetic_discriminative<T: Real>(
    pack: &CandidatePack<T>,
    truth: &[CandidateTruth<T>],
    cfg: &SyntheticOracleConfig,
) -> Result<Vec<T>, OracleError> {
    SyntheticOracle::new(cfg.clone(), truth).discriminative_weights(pack)
}

/// Draw `n` categorical samples from the oracle's answer channel and return
/// the empirical counts over candidates plus no-match (normalization happens
/// in the game's policy initialization). Abstentions are not counted.
pub fn estimate_distribution<T: Real>(
    oracle: &dyn Oracle<T>,
    pack: &CandidatePack<T>,
    n: usize,
) -> Result<Vec<T>, OracleError> {
    assert!(n >= 1, "at least one sample");
    let mut counts = vec![T::zero(); pack.support_len()];
    for i in 0..n {
        if let Some(r) = oracle.sample_answer(pack, i)? {
            if r < counts.len() {
                counts[r] = counts[r] + T::one();
            }
        }
    }
    Ok(counts)
}

// -------- remote oracle --------

/// Connection settings for an OpenAI-style chat-completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteOracleConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Samples per distribution estimate.
    pub sample_count: usize,
    pub timeout_s: f64,
    pub max_in_flight: usize,
    pub retries: usize,
}

impl Default for RemoteOracleConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            temperature: 1.0,
            sample_count: 5,
            timeout_s: 30.0,
            max_in_flight: 4,
            retries: 3,
        }
    }
}

/// Environment variable holding the bearer token for the remote oracle.
pub const API_KEY_ENV: &str = "VLN_GAME_API_KEY";

#[derive(Debug, Clone, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completion request body.
#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Prompt flavor: one request naming all candidates, or a yes/no probe of a
/// single candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    Generative,
    Discriminative(usize),
}

const GENERATIVE_TEMPLATE: &str = include_str!("../prompts/generative.txt");
const DISCRIMINATIVE_TEMPLATE: &str = include_str!("../prompts/discriminative.txt");

fn render_entry<T: Real>(e: &PackEntry<T>) -> String {
    let mut line = format!(
        "candidate {}: similarity {:.3} to the main goal",
        e.candidate_id,
        e.similarity.to_f64().unwrap_or(0.0)
    );
    if !e.context.is_empty() {
        let ctx: Vec<String> = e
            .context
            .iter()
            .map(|c| {
                format!(
                    "{} at {:.1} m bearing {:.0} deg",
                    c.category, c.distance_m, c.bearing_deg
                )
            })
            .collect();
        line.push_str(&format!("; nearby: {}", ctx.join(", ")));
    }
    if !e.summary.is_empty() {
        line.push_str(&format!("; {}", e.summary));
    }
    line
}

/// Render a candidate pack into a chat-completion request for the given
/// mode. Text-only: descriptors are summarized, never shipped as vectors.
pub fn remote_prompt<T: Real>(
    pack: &CandidatePack<T>,
    mode: PromptMode,
    cfg: &RemoteOracleConfig,
) -> Result<ChatRequest, OracleError> {
    let query = format!(
        "{} (main goal: {} {})",
        pack.query.text,
        pack.query
            .main_goal
            .attributes
            .join(" "),
        pack.query.main_goal.category
    );
    let content = match mode {
        PromptMode::Generative => {
            let blocks: Vec<String> = pack.entries.iter().map(render_entry).collect();
            GENERATIVE_TEMPLATE
                .replace("{query}", &query)
                .replace("{candidates}", &blocks.join("\n"))
        }
        PromptMode::Discriminative(i) => {
            let entry = pack.entries.get(i).ok_or_else(|| {
                OracleError::PackMismatch(format!("no candidate {i} in pack"))
            })?;
            DISCRIMINATIVE_TEMPLATE
                .replace("{query}", &query)
                .replace("{candidate}", &render_entry(entry))
        }
    };
    Ok(ChatRequest {
        model: cfg.model.clone(),
        temperature: cfg.temperature,
        messages: vec![ChatMessage {
            role: "user".into(),
            content,
        }],
    })
}

/// Parse a generative answer: `candidate: <id>` or a no-match phrase.
/// Anything else is an abstention.
pub fn parse_generative(text: &str, support_len: usize) -> Option<usize> {
    let id_re = Regex::new(r"(?im)^\s*candidate\s*:\s*(\d+)\s*$").expect("static regex");
    if let Some(caps) = id_re.captures(text) {
        let id: usize = caps[1].parse().ok()?;
        if id + 1 < support_len {
            return Some(id);
        }
        return None;
    }
    let nm_re = Regex::new(r"(?i)\bno[\s_-]?match\b").expect("static regex");
    if nm_re.is_match(text) {
        return Some(support_len - 1);
    }
    None
}

/// Parse a discriminative answer into accept/reject; `None` abstains.
pub fn parse_discriminative(text: &str) -> Option<bool> {
    let re = Regex::new(r"(?im)^\s*(yes|no)\b").expect("static regex");
    re.captures(text).map(|c| c[1].eq_ignore_ascii_case("yes"))
}

/// Blocking chat-completion client with bounded in-flight requests and
/// exponential backoff.
pub struct RemoteOracle {
    cfg: RemoteOracleConfig,
    client: reqwest::blocking::Client,
    gate: Arc<(Mutex<usize>, Condvar)>,
}

impl RemoteOracle {
    pub fn new(cfg: RemoteOracleConfig) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| OracleUnavailableFrom(e).0)?;
        Ok(Self {
            client,
            gate: Arc::new((Mutex::new(cfg.max_in_flight.max(1)), Condvar::new())),
            cfg,
        })
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError> {
        let url = format!(
            "{}/chat/completions",
            self.cfg.base_url.trim_end_matches('/')
        );
        let _permit = Permit::acquire(&self.gate);
        let mut delay = std::time::Duration::from_millis(250);
        let mut last_err = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            let mut req = self.client.post(&url).json(request);
            if let Ok(key) = std::env::var(API_KEY_ENV) {
                if !key.is_empty() {
                    req = req.header("Authorization", format!("Bearer {key}"));
                }
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: ChatResponse = resp
                        .json()
                        .map_err(|e| OracleError::MalformedResponse(e.to_string()))?;
                    return parsed
                        .choices
                        .first()
                        .map(|c| c.message.content.clone())
                        .ok_or_else(|| {
                            OracleError::MalformedResponse("empty choices".into())
                        });
                }
                Ok(resp) => {
                    last_err = format!("status {}", resp.status());
                }
                Err(e) => {
                    last_err = e.to_string();
                }
            }
        }
        Err(OracleError::OracleUnavailable(last_err))
    }
}

struct OracleUnavailableFrom(OracleError);

impl From<reqwest::Error> for OracleUnavailableFrom {
    fn from(e: reqwest::Error) -> Self {
        Self(OracleError::OracleUnavailable(e.to_string()))
    }
}

struct Permit<'a> {
    gate: &'a (Mutex<usize>, Condvar),
}

impl<'a> Permit<'a> {
    fn acquire(gate: &'a Arc<(Mutex<usize>, Condvar)>) -> Self {
        let (lock, cv) = &**gate;
        let mut available = lock.lock().expect("gate poisoned");
        while *available == 0 {
            available = cv.wait(available).expect("gate poisoned");
        }
        *available -= 1;
        Self { gate }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let (lock, cv) = self.gate;
        *lock.lock().expect("gate poisoned") += 1;
        cv.notify_one();
    }
}

impl<T: Real> Oracle<T> for RemoteOracle {
    fn generative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError> {
        estimate_distribution(self, pack, self.cfg.sample_count)
    }

    fn discriminative_weights(&self, pack: &CandidatePack<T>) -> Result<Vec<T>, OracleError> {
        let n = self.cfg.sample_count;
        let mut weights = vec![T::zero(); pack.support_len()];
        let mut max_yes = 0usize;
        for (i, _) in pack.entries.iter().enumerate() {
            let request = remote_prompt(pack, PromptMode::Discriminative(i), &self.cfg)?;
            let mut yes = 0usize;
            for _ in 0..n {
                let text = self.complete(&request)?;
                if parse_discriminative(&text) == Some(true) {
                    yes += 1;
                }
            }
            max_yes = max_yes.max(yes);
            weights[i] = crate::num::real_of(yes);
        }
        // No-match weight: how far the best candidate is from unanimous
        // acceptance.
        weights[pack.support_len() - 1] = crate::num::real_of(n - max_yes);
        Ok(weights)
    }

    fn sample_answer(
        &self,
        pack: &CandidatePack<T>,
        _draw_index: usize,
    ) -> Result<Option<usize>, OracleError> {
        let request = remote_prompt(pack, PromptMode::Generative, &self.cfg)?;
        let text = self.complete(&request)?;
        Ok(parse_generative(&text, pack.support_len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pack(n: usize) -> CandidatePack<f64> {
        let entries = (0..n)
            .map(|i| PackEntry {
                candidate_id: i,
                map_id: i as u32,
                similarity: 0.9,
                first_person: vec![1.0, 0.0],
                top_down: vec![0.0, 1.0],
                context: vec![ContextItem {
                    category: "table".into(),
                    bearing_deg: 90.0,
                    distance_m: 1.2,
                }],
                summary: String::new(),
            })
            .collect();
        CandidatePack::new(
            PackQuery {
                text: "black chair near the table".into(),
                main_goal: GoalSpec {
                    category: "chair".into(),
                    attributes: vec!["black".into()],
                },
                relations: vec![RelationClause {
                    relation: Relation::Near,
                    references: vec!["table".into()],
                }],
            },
            entries,
        )
        .unwrap()
    }

    fn truth(flags: &[bool]) -> Vec<CandidateTruth<f64>> {
        flags
            .iter()
            .map(|&m| CandidateTruth {
                score: if m { 1.0 } else { 0.4 },
                is_match: m,
            })
            .collect()
    }

    #[test]
    fn noiseless_generative_argmax_is_truth() {
        let p = pack(3);
        let t = truth(&[false, true, false]);
        let w = synthetic_generative(&p, &t, &SyntheticOracleConfig::default()).unwrap();
        let argmax = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 1);
    }

    #[test]
    fn no_match_wins_when_nothing_matches() {
        let p = pack(2);
        let t = truth(&[false, false]);
        let w = synthetic_generative(&p, &t, &SyntheticOracleConfig::default()).unwrap();
        let argmax = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 2);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let p = pack(3);
        let t = truth(&[true, false, false]);
        let cfg = SyntheticOracleConfig {
            seed: 42,
            gen_noise: 0.7,
            disc_noise: 0.7,
            gen_bias: 1.0,
            disc_bias: 1.0,
            ..SyntheticOracleConfig::default()
        };
        let a = synthetic_generative(&p, &t, &cfg).unwrap();
        let b = synthetic_generative(&p, &t, &cfg).unwrap();
        assert_eq!(a, b);
        let c = synthetic_discriminative(&p, &t, &cfg).unwrap();
        let d = synthetic_discriminative(&p, &t, &cfg).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn channel_noise_streams_decorrelated() {
        let p = pack(2);
        let t = truth(&[true, false]);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for seed in 0..10_000u64 {
            let cfg = SyntheticOracleConfig {
                seed,
                gen_noise: 1.0,
                disc_noise: 1.0,
                ..SyntheticOracleConfig::default()
            };
            let o = SyntheticOracle::<f64>::new(cfg, &t);
            // Recover the first-slot noise from the logits.
            let clean = 4.0 * 1.0;
            xs.push(o.gen_logits[0] - clean);
            ys.push(o.disc_logits[0] - clean);
            let _ = &p;
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr.abs() < 0.1, "corr = {corr}");
    }

    #[test]
    fn deterministic_oracle_sampling_is_one_hot() {
        let p = pack(3);
        let t = truth(&[false, true, false]);
        let o = SyntheticOracle::new(SyntheticOracleConfig::default(), &t);
        let counts = estimate_distribution(&o, &p, 7).unwrap();
        assert_eq!(counts, vec![0.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn sample_counts_sum_to_n() {
        let p = pack(2);
        let t = truth(&[false, false]);
        let cfg = SyntheticOracleConfig {
            seed: 5,
            gen_noise: 2.0,
            ..SyntheticOracleConfig::default()
        };
        let o = SyntheticOracle::new(cfg, &t);
        let counts = estimate_distribution(&o, &p, 5).unwrap();
        let total: f64 = counts.iter().sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn generative_prompt_contains_all_candidates() {
        let p = pack(2);
        let req = remote_prompt(&p, PromptMode::Generative, &RemoteOracleConfig::default())
            .unwrap();
        let content = &req.messages[0].content;
        assert!(content.contains("candidate 0"));
        assert!(content.contains("candidate 1"));
        assert!(content.contains("black chair near the table"));
        assert_eq!(req.temperature, 1.0);
    }

    #[test]
    fn discriminative_prompt_has_exactly_one_candidate() {
        let p = pack(3);
        let req = remote_prompt(
            &p,
            PromptMode::Discriminative(1),
            &RemoteOracleConfig::default(),
        )
        .unwrap();
        let content = &req.messages[0].content;
        assert!(content.contains("candidate 1"));
        assert!(!content.contains("candidate 0"));
        assert!(!content.contains("candidate 2"));
    }

    #[test]
    fn response_parsing() {
        assert_eq!(parse_generative("candidate: 1", 4), Some(1));
        assert_eq!(parse_generative("Candidate: 2\n", 4), Some(2));
        assert_eq!(parse_generative("no match", 4), Some(3));
        assert_eq!(parse_generative("I think it's 1", 4), None);
        assert_eq!(parse_generative("candidate: 9", 4), None);
        assert_eq!(parse_discriminative("yes"), Some(true));
        assert_eq!(parse_discriminative("No, it is not."), Some(false));
        assert_eq!(parse_discriminative("maybe"), None);
    }

    #[test]
    fn unreachable_remote_is_unavailable() {
        let cfg = RemoteOracleConfig {
            base_url: "http://127.0.0.1:1".into(),
            timeout_s: 0.5,
            retries: 0,
            ..RemoteOracleConfig::default()
        };
        let oracle = RemoteOracle::new(cfg).unwrap();
        let p = pack(2);
        let err = Oracle::<f64>::sample_answer(&oracle, &p, 0).unwrap_err();
        assert!(matches!(err, OracleError::OracleUnavailable(_)));
    }
}
