//! Generator/Discriminator consensus game.
//!
//! Both players hold a distribution over candidate IDs `0..N` where index `N`
//! is an explicit no-match option. Play alternates accumulation of average
//! opponent policies (the Q values) with anchored exponential-weights policy
//! updates (piKL): each new policy is proportional to
//! `exp{(Q + lambda * log pi1) / (1/(eta t) + lambda)}`, which keeps iterates
//! near the initial policy while following accumulated payoffs. The realized
//! bilinear utility is `1/2 * sum_r piG(r) * piD(r)` minus each player's KL
//! penalty from its anchor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{real, real_of, Real};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("degenerate input: all weights zero with zero bias")]
    DegenerateInput,
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("weight vectors must share a support of size >= 2")]
    SupportMismatch,
}

/// Finite probability vector over candidate IDs plus the trailing no-match
/// option. Guaranteed non-negative and normalized within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution<T> {
    probs: Vec<T>,
}

impl<T: Real> PolicyDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self, EquilibriumError> {
        if probs.len() < 2 {
            return Err(EquilibriumError::SupportMismatch);
        }
        let mut sum = T::zero();
        for &p in &probs {
            if !(p >= T::zero()) {
                return Err(EquilibriumError::InvalidWeight(format!(
                    "probability {p} is negative or NaN"
                )));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > real(1e-9) {
            return Err(EquilibriumError::InvalidWeight(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len >= 2);
        Self {
            probs: vec![T::one() / real_of(len); len],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn prob(&self, r: usize) -> T {
        self.probs[r]
    }

    /// Index of the no-match option (always the last slot).
    pub fn no_match_index(&self) -> usize {
        self.probs.len() - 1
    }

    /// Argmax with ties broken by the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Total-variation distance: half the L1 difference.
    pub fn total_variation(&self, other: &Self) -> T {
        let half = real::<T>(0.5);
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<T>()
            * half
    }

    /// KL divergence to a strictly positive reference.
    pub fn kl_divergence(&self, reference: &Self) -> T {
        self.probs
            .iter()
            .zip(&reference.probs)
            .map(|(&p, &q)| {
                if p <= T::zero() {
                    T::zero()
                } else {
                    p * (p / q).ln()
                }
            })
            .sum()
    }

    /// Simplex check used by tests and the acceptance suite.
    pub fn simplex_violation(&self) -> T {
        let sum: T = self.probs.iter().copied().sum();
        let neg = self
            .probs
            .iter()
            .copied()
            .fold(T::zero(), |acc, p| if p < T::zero() { acc + p.abs() } else { acc });
        (sum - T::one()).abs() + neg
    }
}

/// Hyperparameters of the equilibrium search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumConfig {
    /// Learning rates (eta) for the two players.
    pub learning_rate_gen: f64,
    pub learning_rate_disc: f64,
    /// KL anchor weights (lambda) for the two players.
    pub kl_weight_gen: f64,
    pub kl_weight_disc: f64,
    pub iterations: usize,
    /// Smoothing added to the normalized initial weights; keeps the anchors
    /// strictly positive so their logs are finite.
    pub bias: f64,
    /// Stop when both players' successive total variation stays below this
    /// for `early_exit_patience` consecutive iterations. `None` disables.
    pub early_exit_tv: Option<f64>,
    pub early_exit_patience: usize,
    /// Iteration indices at which per-player time-averaged regret is
    /// recorded.
    pub regret_checkpoints: Vec<usize>,
    /// Record the per-iteration diagnostic trace (agreement and TV from the
    /// initial pair).
    pub record_trace: bool,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            learning_rate_gen: 0.1,
            learning_rate_disc: 0.1,
            kl_weight_gen: 0.1,
            kl_weight_disc: 0.1,
            iterations: 5000,
            bias: 0.01,
            early_exit_tv: Some(1e-9),
            early_exit_patience: 10,
            regret_checkpoints: Vec::new(),
            record_trace: false,
        }
    }
}

impl EquilibriumConfig {
    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let ok = self.learning_rate_gen > 0.0
            && self.learning_rate_disc > 0.0
            && self.kl_weight_gen > 0.0
            && self.kl_weight_disc > 0.0
            && self.iterations >= 1
            && self.bias >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(EquilibriumError::InvalidWeight(
                "rates and KL weights must be positive, iterations >= 1, bias >= 0".into(),
            ))
        }
    }
}

/// Build the initial policy pair from raw non-negative oracle weights.
///
/// Each side is normalized first, then the bias is added uniformly and the
/// result renormalized: `pi1 = normalize(normalize(w) + bias)`. Scaling all
/// weights of a side by any positive constant therefore leaves the output
/// bit-identical.
pub fn init_policies<T: Real>(
    gen_weights: &[T],
    disc_weights: &[T],
    bias: T,
) -> Result<(PolicyDistribution<T>, PolicyDistribution<T>), EquilibriumError> {
    if gen_weights.len() != disc_weights.len() || gen_weights.len() < 2 {
        return Err(EquilibriumError::SupportMismatch);
    }
    Ok((
        normalize_with_bias(gen_weights, bias)?,
        normalize_with_bias(disc_weights, bias)?,
    ))
}

/// Initial policy for a single side: `normalize(normalize(w) + bias)`.
pub fn initial_policy<T: Real>(
    weights: &[T],
    bias: T,
) -> Result<PolicyDistribution<T>, EquilibriumError> {
    if weights.len() < 2 {
        return Err(EquilibriumError::SupportMismatch);
    }
    normalize_with_bias(weights, bias)
}

fn normalize_with_bias<T: Real>(
    weights: &[T],
    bias: T,
) -> Result<PolicyDistribution<T>, EquilibriumError> {
    for &w in weights {
        if !(w >= T::zero()) || !w.is_finite() {
            return Err(EquilibriumError::InvalidWeight(format!(
                "raw weight {w} is negative or non-finite"
            )));
        }
    }
    if bias < T::zero() {
        return Err(EquilibriumError::InvalidWeight("bias is negative".into()));
    }
    let sum: T = weights.iter().copied().sum();
    if sum <= T::zero() && bias <= T::zero() {
        return Err(EquilibriumError::DegenerateInput);
    }
    let base: Vec<T> = if sum > T::zero() {
        weights.iter().map(|&w| w / sum).collect()
    } else {
        vec![T::zero(); weights.len()]
    };
    let total: T = base.iter().map(|&b| b + bias).sum();
    let probs = base.iter().map(|&b| (b + bias) / total).collect();
    PolicyDistribution::new(probs)
}

/// Anchored exponential-weights update:
/// `pi'(r) ∝ exp{(Q(r) + lambda * ln pi1(r)) / (1/(eta t) + lambda)}`,
/// evaluated in log space with max subtraction.
pub fn policy_update<T: Real>(
    q: &[T],
    anchor: &PolicyDistribution<T>,
    eta: T,
    lambda: T,
    t: usize,
) -> PolicyDistribution<T> {
    assert_eq!(q.len(), anchor.len());
    assert!(t >= 1);
    let denom = T::one() / (eta * real_of(t)) + lambda;
    let exponents: Vec<T> = q
        .iter()
        .zip(anchor.probs())
        .map(|(&qi, &a)| (qi + lambda * a.ln()) / denom)
        .collect();
    let m = exponents
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let unnorm: Vec<T> = exponents.iter().map(|&x| (x - m).exp()).collect();
    let sum: T = unnorm.iter().copied().sum();
    PolicyDistribution {
        probs: unnorm.into_iter().map(|u| u / sum).collect(),
    }
}

/// Expected agreement: the bilinear utility term `1/2 * sum_r g(r) * d(r)`
/// without penalties.
pub fn expected_agreement<T: Real>(
    gen: &PolicyDistribution<T>,
    disc: &PolicyDistribution<T>,
) -> T {
    assert_eq!(gen.len(), disc.len(), "policies must share a support");
    gen.probs()
        .iter()
        .zip(disc.probs())
        .map(|(&g, &d)| g * d)
        .sum::<T>()
        * real(0.5)
}

/// Magnitude of the anchor penalty: `lambda * KL(pi || pi1)`.
pub fn kl_penalty<T: Real>(
    policy: &PolicyDistribution<T>,
    anchor: &PolicyDistribution<T>,
    lambda: T,
) -> T {
    lambda * policy.kl_divergence(anchor)
}

/// Final selection outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetChoice {
    Candidate(usize),
    NoMatch,
}

/// Consensus selection: argmax of the per-candidate product of the two final
/// policies (ties go to the lower ID). Landing on the no-match slot rejects
/// every candidate.
pub fn select_target<T: Real>(
    gen: &PolicyDistribution<T>,
    disc: &PolicyDistribution<T>,
) -> TargetChoice {
    assert_eq!(gen.len(), disc.len(), "policies must share a support");
    let mut best = 0usize;
    let mut best_v = T::neg_infinity();
    for r in 0..gen.len() {
        let v = gen.prob(r) * disc.prob(r);
        if v > best_v {
            best_v = v;
            best = r;
        }
    }
    if best == gen.no_match_index() {
        TargetChoice::NoMatch
    } else {
        TargetChoice::Candidate(best)
    }
}

/// Mutable game state: anchors, current pair, running opponent-policy sums
/// (the Q numerators) and realized-utility sums for regret reporting.
#[derive(Debug, Clone)]
pub struct GameState<T> {
    anchor_gen: PolicyDistribution<T>,
    anchor_disc: PolicyDistribution<T>,
    current_gen: PolicyDistribution<T>,
    current_disc: PolicyDistribution<T>,
    sum_disc_policies: Vec<T>,
    sum_gen_policies: Vec<T>,
    realized_gen: T,
    realized_disc: T,
    t: usize,
    eta_gen: T,
    eta_disc: T,
    lambda_gen: T,
    lambda_disc: T,
}

impl<T: Real> GameState<T> {
    pub fn new(
        initial_gen: PolicyDistribution<T>,
        initial_disc: PolicyDistribution<T>,
        cfg: &EquilibriumConfig,
    ) -> Result<Self, EquilibriumError> {
        cfg.validate()?;
        if initial_gen.len() != initial_disc.len() {
            return Err(EquilibriumError::SupportMismatch);
        }
        let n = initial_gen.len();
        Ok(Self {
            current_gen: initial_gen.clone(),
            current_disc: initial_disc.clone(),
            anchor_gen: initial_gen,
            anchor_disc: initial_disc,
            sum_disc_policies: vec![T::zero(); n],
            sum_gen_policies: vec![T::zero(); n],
            realized_gen: T::zero(),
            realized_disc: T::zero(),
            t: 0,
            eta_gen: real(cfg.learning_rate_gen),
            eta_disc: real(cfg.learning_rate_disc),
            lambda_gen: real(cfg.kl_weight_gen),
            lambda_disc: real(cfg.kl_weight_disc),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn current(&self) -> (&PolicyDistribution<T>, &PolicyDistribution<T>) {
        (&self.current_gen, &self.current_disc)
    }

    pub fn anchors(&self) -> (&PolicyDistribution<T>, &PolicyDistribution<T>) {
        (&self.anchor_gen, &self.anchor_disc)
    }

    /// Fold the current pair into the running averages. After this call the
    /// Q values cover policies `1..=t`.
    pub fn accumulate(&mut self) {
        self.t += 1;
        for (s, &p) in self.sum_disc_policies.iter_mut().zip(self.current_disc.probs()) {
            *s = *s + p;
        }
        for (s, &p) in self.sum_gen_policies.iter_mut().zip(self.current_gen.probs()) {
            *s = *s + p;
        }
        let agreement = expected_agreement(&self.current_gen, &self.current_disc);
        self.realized_gen = self.realized_gen + agreement
            - kl_penalty(&self.current_gen, &self.anchor_gen, self.lambda_gen);
        self.realized_disc = self.realized_disc + agreement
            - kl_penalty(&self.current_disc, &self.anchor_disc, self.lambda_disc);
    }

    /// Generator Q: per-candidate running average of discriminator policies,
    /// scaled by 1/(2t).
    pub fn q_gen(&self) -> Vec<T> {
        let scale = T::one() / (real::<T>(2.0) * real_of(self.t.max(1)));
        self.sum_disc_policies.iter().map(|&s| s * scale).collect()
    }

    /// Discriminator Q: mirror of [`GameState::q_gen`].
    pub fn q_disc(&self) -> Vec<T> {
        let scale = T::one() / (real::<T>(2.0) * real_of(self.t.max(1)));
        self.sum_gen_policies.iter().map(|&s| s * scale).collect()
    }

    /// Apply the anchored update to both players at the current t.
    pub fn update_policies(&mut self) {
        assert!(self.t >= 1, "accumulate before updating policies");
        self.current_gen = policy_update(
            &self.q_gen(),
            &self.anchor_gen,
            self.eta_gen,
            self.lambda_gen,
            self.t,
        );
        self.current_disc = policy_update(
            &self.q_disc(),
            &self.anchor_disc,
            self.eta_disc,
            self.lambda_disc,
            self.t,
        );
    }

    /// One full iteration: accumulate averages, then update both policies.
    pub fn step(&mut self) {
        self.accumulate();
        self.update_policies();
    }

    /// Time-averaged external regret of the generator against the best
    /// fixed response to the opponent's average play, measured on the
    /// KL-regularized utility.
    pub fn regret_gen(&self) -> T {
        best_fixed_value(&self.q_gen(), &self.anchor_gen, self.lambda_gen)
            - self.realized_gen / real_of(self.t.max(1))
    }

    pub fn regret_disc(&self) -> T {
        best_fixed_value(&self.q_disc(), &self.anchor_disc, self.lambda_disc)
            - self.realized_disc / real_of(self.t.max(1))
    }
}

/// `max_pi <pi, q> - lambda*KL(pi||anchor)`, in closed form
/// `lambda * ln sum_r anchor(r) * exp(q(r)/lambda)`.
fn best_fixed_value<T: Real>(q: &[T], anchor: &PolicyDistribution<T>, lambda: T) -> T {
    let m = q
        .iter()
        .map(|&qi| qi / lambda)
        .fold(T::neg_infinity(), T::max);
    let z: T = q
        .iter()
        .zip(anchor.probs())
        .map(|(&qi, &a)| a * (qi / lambda - m).exp())
        .sum();
    lambda * (z.ln() + m)
}

/// Regret of both players at a checkpoint iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegretCheckpoint<T> {
    pub t: usize,
    pub generator: T,
    pub discriminator: T,
}

/// One diagnostic trace row.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow<T> {
    pub t: usize,
    pub agreement: T,
    pub tv_gen_from_initial: T,
    pub tv_disc_from_initial: T,
}

/// Result of a full equilibrium search.
#[derive(Debug, Clone)]
pub struct EquilibriumOutcome<T> {
    pub generator: PolicyDistribution<T>,
    pub discriminator: PolicyDistribution<T>,
    pub iterations_run: usize,
    pub agreement_initial: T,
    pub agreement_final: T,
    pub regret_checkpoints: Vec<RegretCheckpoint<T>>,
    pub trace: Vec<TraceRow<T>>,
}

/// Run the no-regret dynamics from an initial pair and return the final
/// policies plus diagnostics. Deterministic for identical inputs.
pub fn run_equilibrium<T: Real>(
    initial_gen: PolicyDistribution<T>,
    initial_disc: PolicyDistribution<T>,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumOutcome<T>, EquilibriumError> {
    let mut state = GameState::new(initial_gen.clone(), initial_disc.clone(), cfg)?;
    let agreement_initial = expected_agreement(&initial_gen, &initial_disc);
    let mut trace = Vec::new();
    let mut checkpoints = Vec::new();
    let tol = cfg.early_exit_tv.map(real::<T>);
    let mut calm_streak = 0usize;
    let mut iterations_run = 0usize;

    for _ in 0..cfg.iterations {
        let prev_gen = state.current_gen.clone();
        let prev_disc = state.current_disc.clone();
        state.step();
        iterations_run = state.t();

        if cfg.record_trace {
            trace.push(TraceRow {
                t: state.t(),
                agreement: expected_agreement(&state.current_gen, &state.current_disc),
                tv_gen_from_initial: state.current_gen.total_variation(&initial_gen),
                tv_disc_from_initial: state.current_disc.total_variation(&initial_disc),
            });
        }
        if cfg.regret_checkpoints.contains(&state.t()) {
            checkpoints.push(RegretCheckpoint {
                t: state.t(),
                generator: state.regret_gen(),
                discriminator: state.regret_disc(),
            });
        }

        if let Some(tol) = tol {
            let moved = state
                .current_gen
                .total_variation(&prev_gen)
                .max(state.current_disc.total_variation(&prev_disc));
            if moved < tol {
                calm_streak += 1;
                if calm_streak >= cfg.early_exit_patience {
                    break;
                }
            } else {
                calm_streak = 0;
            }
        }
    }

    let agreement_final = expected_agreement(&state.current_gen, &state.current_disc);
    Ok(EquilibriumOutcome {
        generator: state.current_gen.clone(),
        discriminator: state.current_disc.clone(),
        iterations_run,
        agreement_initial,
        agreement_final,
        regret_checkpoints: checkpoints,
        trace,
    })
}

/// Render the diagnostic trace as CSV (t, agreement, TV per player).
pub fn trace_csv<T: Real>(outcome: &EquilibriumOutcome<T>) -> String {
    let mut out = String::from("t,agreement,tv_gen,tv_disc\n");
    for row in &outcome.trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.t, row.agreement, row.tv_gen_from_initial, row.tv_disc_from_initial
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pd(probs: &[f64]) -> PolicyDistribution<f64> {
        PolicyDistribution::new(probs.to_vec()).unwrap()
    }

    #[test]
    fn init_normalizes_and_applies_bias() {
        let (g, d) = init_policies(&[1.0, 1.0], &[3.0, 1.0], 0.0).unwrap();
        assert_eq!(g.probs(), &[0.5, 0.5]);
        assert_eq!(d.probs(), &[0.75, 0.25]);
    }

    #[test]
    fn init_is_scale_invariant() {
        let (a, _) = init_policies(&[3.0, 1.0], &[1.0, 1.0], 0.01).unwrap();
        let (b, _) = init_policies(&[3.0e7, 1.0e7], &[5.0, 5.0], 0.01).unwrap();
        assert_eq!(a.probs(), b.probs());
    }

    #[test]
    fn degenerate_input_detected() {
        let err = init_policies(&[0.0, 0.0], &[1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, EquilibriumError::DegenerateInput));
        // With a positive bias the all-zero side becomes uniform.
        let (g, _) = init_policies(&[0.0, 0.0], &[1.0, 1.0], 0.01).unwrap();
        assert_eq!(g.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn negative_weights_rejected() {
        let err = init_policies(&[-1.0, 2.0], &[1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, EquilibriumError::InvalidWeight(_)));
    }

    #[test]
    fn q_scaling_matches_running_average() {
        let cfg = EquilibriumConfig::default();
        let mut s = GameState::new(pd(&[0.5, 0.5]), pd(&[0.5, 0.5]), &cfg).unwrap();
        s.accumulate();
        assert_eq!(s.q_gen(), vec![0.25, 0.25]);

        // Constant opponent: averages stay at half the constant.
        let mut s = GameState::new(pd(&[0.5, 0.5]), pd(&[0.8, 0.2]), &cfg).unwrap();
        for _ in 0..5 {
            s.accumulate();
            // Freeze the policies to keep the stream constant.
            let q = s.q_gen();
            assert_abs_diff_eq!(q[0], 0.4, epsilon = 1e-12);
            assert_abs_diff_eq!(q[1], 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_two_step_history() {
        // Hand-driven two-step history (1,0) then (0,1).
        let cfg = EquilibriumConfig::default();
        let mut s = GameState::new(pd(&[0.5, 0.5]), pd(&[1.0, 0.0]), &cfg).unwrap();
        s.accumulate();
        s.current_disc = pd(&[0.0, 1.0]);
        s.accumulate();
        assert_eq!(s.q_gen(), vec![0.25, 0.25]);
    }

    #[test]
    fn uniform_q_reproduces_anchor_power() {
        // With a uniform Q the update is the anchor raised to
        // lambda/(1/(eta t)+lambda), renormalized.
        let anchor = pd(&[0.7, 0.3]);
        let q = vec![0.25, 0.25];
        let (eta, lambda, t) = (0.1, 0.1, 4usize);
        let updated = policy_update(&q, &anchor, eta, lambda, t);
        let denom = 1.0 / (eta * t as f64) + lambda;
        let pow = lambda / denom;
        let raw: Vec<f64> = anchor.probs().iter().map(|p| p.powf(pow)).collect();
        let z: f64 = raw.iter().sum();
        for (u, r) in updated.probs().iter().zip(&raw) {
            assert_abs_diff_eq!(*u, r / z, epsilon = 1e-12);
        }
    }

    #[test]
    fn huge_lambda_pins_to_anchor() {
        let anchor = pd(&[0.65, 0.35]);
        let updated = policy_update(&[0.5, 0.0], &anchor, 0.1, 1e9, 3);
        assert!(updated.total_variation(&anchor) <= 1e-6);
    }

    #[test]
    fn tiny_eta_at_t1_gives_uniform() {
        let anchor = pd(&[0.9, 0.1]);
        let updated = policy_update(&[0.5, 0.0], &anchor, 1e-9, 0.1, 1);
        let uniform = PolicyDistribution::uniform(2);
        assert!(updated.total_variation(&uniform) <= 1e-6);
    }

    #[test]
    fn uniform_pair_is_a_fixed_point() {
        let cfg = EquilibriumConfig {
            iterations: 50,
            ..EquilibriumConfig::default()
        };
        let out = run_equilibrium(
            PolicyDistribution::<f64>::uniform(2),
            PolicyDistribution::uniform(2),
            &cfg,
        )
        .unwrap();
        assert!(out.generator.total_variation(&PolicyDistribution::uniform(2)) < 1e-12);
        assert!(out.discriminator.total_variation(&PolicyDistribution::uniform(2)) < 1e-12);
    }

    #[test]
    fn one_hot_agreement_stays_on_favorite() {
        let (g, d) = init_policies(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0.01).unwrap();
        let cfg = EquilibriumConfig {
            iterations: 500,
            ..EquilibriumConfig::default()
        };
        let out = run_equilibrium(g, d, &cfg).unwrap();
        assert_eq!(out.generator.argmax(), 0);
        assert_eq!(out.discriminator.argmax(), 0);
    }

    #[test]
    fn agreement_levels() {
        assert_abs_diff_eq!(
            expected_agreement(&pd(&[0.5, 0.5]), &pd(&[0.5, 0.5])),
            0.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            expected_agreement(&pd(&[1.0, 0.0]), &pd(&[1.0, 0.0])),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            expected_agreement(&pd(&[1.0, 0.0]), &pd(&[0.0, 1.0])),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kl_penalty_closed_forms() {
        let anchor = pd(&[0.5, 0.5]);
        assert_eq!(kl_penalty(&anchor, &anchor, 1.0), 0.0);
        assert_eq!(kl_penalty(&pd(&[1.0, 0.0]), &anchor, 0.0), 0.0);
        assert_abs_diff_eq!(
            kl_penalty(&pd(&[1.0, 0.0]), &anchor, 1.0),
            2.0f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn select_target_rules() {
        let g = pd(&[0.7, 0.2, 0.1]);
        let d = pd(&[0.6, 0.3, 0.1]);
        assert_eq!(select_target(&g, &d), TargetChoice::Candidate(0));

        // Product ties break toward the lower candidate id.
        let g = pd(&[0.4, 0.4, 0.2]);
        let d = pd(&[0.4, 0.4, 0.2]);
        assert_eq!(select_target(&g, &d), TargetChoice::Candidate(0));

        let g = pd(&[0.1, 0.1, 0.8]);
        let d = pd(&[0.2, 0.1, 0.7]);
        assert_eq!(select_target(&g, &d), TargetChoice::NoMatch);
    }

    #[test]
    fn determinism_bitwise() {
        let (g, d) = init_policies(&[0.8, 0.2], &[0.3, 0.7], 0.01).unwrap();
        let cfg = EquilibriumConfig {
            iterations: 200,
            ..EquilibriumConfig::default()
        };
        let a = run_equilibrium(g.clone(), d.clone(), &cfg).unwrap();
        let b = run_equilibrium(g, d, &cfg).unwrap();
        assert_eq!(a.generator.probs(), b.generator.probs());
        assert_eq!(a.discriminator.probs(), b.discriminator.probs());
        assert_eq!(a.iterations_run, b.iterations_run);
    }

    #[test]
    fn order_preserved_when_q_and_anchor_agree() {
        let anchor = pd(&[0.5, 0.3, 0.2]);
        let q = vec![0.4, 0.3, 0.1];
        let updated = policy_update(&q, &anchor, 0.1, 0.1, 10);
        assert!(updated.prob(0) > updated.prob(1));
        assert!(updated.prob(1) > updated.prob(2));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let (g, d) = init_policies(&[0.8, 0.2], &[0.3, 0.7], 0.01).unwrap();
        let cfg = EquilibriumConfig {
            iterations: 5,
            record_trace: true,
            early_exit_tv: None,
            ..EquilibriumConfig::default()
        };
        let out = run_equilibrium(g, d, &cfg).unwrap();
        let csv = trace_csv(&out);
        assert!(csv.starts_with("t,agreement,tv_gen,tv_disc\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
