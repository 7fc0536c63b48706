//! Surrogate objectives and the adaptive KL controller.
//!
//! Four policy-term variants over the probability ratio r = π(a|s)/π_old(a|s):
//!
//! * `NoClip` — r·Â, the unconstrained conservative-policy-iteration
//!   surrogate (destructive under repeated epochs; kept as the ablation
//!   baseline),
//! * `Clip(ε)` — min(r·Â, clip(r, 1−ε, 1+ε)·Â), a pointwise lower bound on
//!   the unclipped term that removes the incentive for moving r outside
//!   [1−ε, 1+ε],
//! * `FixedKl(β)` — r·Â − β·KL[π_old‖π], with the divergence computed in
//!   closed form per state and averaged,
//! * `AdaptiveKl(β₀, d_targ)` — the same penalty with β retuned once per
//!   iteration by [`kl_controller_update`].
//!
//! The combined objective adds a value-regression term and an entropy bonus
//! and is maximized: mean[policy − c_v·(V−V^targ)² + c₂·S]. With separate
//! policy/value networks the value coefficient is 1 and `c1` is unused; it
//! only applies to a shared trunk.
//!
//! All quantities are exposed through [`MinibatchLossReport`] so training
//! diagnostics and objective-geometry sweeps read the same numbers.

use crate::distributions::{kl, kl_grad_wrt_q, Dist, DistGrad};
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::policy::ActorCritic;
use crate::rollout::{AdvantageEstimate, Segment};

/// Ratios above this are clamped (and flagged): the policy has diverged so
/// far from the behavior snapshot that the surrogate is meaningless.
pub const RATIO_CLAMP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurrogateVariant {
    NoClip,
    Clip { epsilon: f64 },
    FixedKl { beta: f64 },
    AdaptiveKl { beta_init: f64, d_targ: f64 },
}

impl SurrogateVariant {
    pub fn name(&self) -> &'static str {
        match self {
            SurrogateVariant::NoClip => "noclip",
            SurrogateVariant::Clip { .. } => "clip",
            SurrogateVariant::FixedKl { .. } => "fixedkl",
            SurrogateVariant::AdaptiveKl { .. } => "adaptivekl",
        }
    }
}

/// Objective selection plus the combined-loss coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub variant: SurrogateVariant,
    /// Value-loss coefficient; only meaningful with a shared network.
    pub c1: f64,
    /// Entropy-bonus coefficient.
    pub c2: f64,
    pub shared_network: bool,
}

impl ObjectiveConfig {
    pub fn clip(epsilon: f64) -> Self {
        ObjectiveConfig {
            variant: SurrogateVariant::Clip { epsilon },
            c1: 0.5,
            c2: 0.0,
            shared_network: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SurrogateVariant::Clip { epsilon } = self.variant {
            if epsilon <= 0.0 {
                return Err(Error::Config(format!("clip epsilon must be in (0,1), got {epsilon}")));
            }
        }
        self.validate_runtime()
    }

    /// Like [`validate`](Self::validate) but admits ε = 0, the terminal
    /// value of the annealing schedule.
    pub(crate) fn validate_runtime(&self) -> Result<()> {
        match self.variant {
            SurrogateVariant::Clip { epsilon } => {
                if !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::Config(format!("clip epsilon must be in [0,1), got {epsilon}")));
                }
            }
            SurrogateVariant::FixedKl { beta } => {
                if beta <= 0.0 {
                    return Err(Error::Config(format!("fixed KL beta must be > 0, got {beta}")));
                }
            }
            SurrogateVariant::AdaptiveKl { beta_init, d_targ } => {
                if beta_init <= 0.0 || d_targ <= 0.0 {
                    return Err(Error::Config(format!(
                        "adaptive KL needs beta_init > 0 and d_targ > 0, got {beta_init} / {d_targ}"
                    )));
                }
            }
            SurrogateVariant::NoClip => {}
        }
        Ok(())
    }

    /// Copy with the penalty coefficient replaced by the controller's
    /// current β (used once per iteration under `AdaptiveKl`).
    pub fn with_current_beta(mut self, beta: f64) -> Self {
        match &mut self.variant {
            SurrogateVariant::FixedKl { beta: b } => *b = beta,
            SurrogateVariant::AdaptiveKl { beta_init, .. } => *beta_init = beta,
            _ => {}
        }
        self
    }

    /// Copy with ε scaled by the annealing factor α (Clip variant only).
    pub fn with_scaled_epsilon(mut self, alpha: f64) -> Self {
        if let SurrogateVariant::Clip { epsilon } = &mut self.variant {
            *epsilon *= alpha;
        }
        self
    }

    fn penalty_beta(&self) -> Option<f64> {
        match self.variant {
            SurrogateVariant::FixedKl { beta } => Some(beta),
            SurrogateVariant::AdaptiveKl { beta_init, .. } => Some(beta_init),
            _ => None,
        }
    }
}

/// β and its target divergence for the adaptive penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlControllerState {
    pub beta: f64,
    pub d_targ: f64,
}

/// The two-rule β adaptation: halve when the measured divergence fell below
/// d_targ/1.5, double when it rose above d_targ·1.5, otherwise unchanged.
/// The updated β applies to the *next* policy update.
pub fn kl_controller_update(state: &KlControllerState, d: f64) -> KlControllerState {
    let mut beta = state.beta;
    if d < state.d_targ / 1.5 {
        beta /= 2.0;
    } else if d > state.d_targ * 1.5 {
        beta *= 2.0;
    }
    KlControllerState { beta, d_targ: state.d_targ }
}

/// exp(new − old), computed in the log domain and clamped at [`RATIO_CLAMP`]
/// with a warning when the policies have pathologically diverged.
pub fn prob_ratio(new_log_prob: f64, old_log_prob: f64) -> f64 {
    prob_ratio_checked(new_log_prob, old_log_prob).0
}

fn prob_ratio_checked(new_log_prob: f64, old_log_prob: f64) -> (f64, bool) {
    let diff = new_log_prob - old_log_prob;
    if diff > RATIO_CLAMP.ln() {
        log::warn!("probability ratio overflow (log diff {diff:.3}); clamping at {RATIO_CLAMP:e}");
        (RATIO_CLAMP, true)
    } else {
        (diff.exp(), false)
    }
}

/// One unclipped surrogate term: r·Â.
pub fn cpi_term(r: f64, adv: f64) -> f64 {
    r * adv
}

/// One clipped surrogate term: min(r·Â, clip(r, 1−ε, 1+ε)·Â).
pub fn clip_term(r: f64, adv: f64, epsilon: f64) -> f64 {
    let clipped = r.clamp(1.0 - epsilon, 1.0 + epsilon) * adv;
    (r * adv).min(clipped)
}

/// Pooled training batch: one entry per collected timestep.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub old_dists: Vec<Dist>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Flatten per-actor segments and their advantage estimates into one
    /// pooled batch, in actor-major order.
    pub fn from_segments(segments: &[Segment], estimates: &[AdvantageEstimate]) -> SampleBatch {
        assert_eq!(segments.len(), estimates.len());
        let total: usize = segments.iter().map(|s| s.len()).sum();
        let mut b = SampleBatch {
            observations: Vec::with_capacity(total),
            actions: Vec::with_capacity(total),
            advantages: Vec::with_capacity(total),
            value_targets: Vec::with_capacity(total),
            old_log_probs: Vec::with_capacity(total),
            old_dists: Vec::with_capacity(total),
        };
        for (seg, est) in segments.iter().zip(estimates.iter()) {
            for t in 0..seg.len() {
                b.observations.push(seg.observations[t].clone());
                b.actions.push(seg.actions[t].clone());
                b.advantages.push(est.advantages[t]);
                b.value_targets.push(est.value_targets[t]);
                b.old_log_probs.push(seg.old_log_probs[t]);
                b.old_dists.push(seg.old_dists[t].clone());
            }
        }
        b
    }

    /// Materialize the minibatch at the given indices.
    pub fn select(&self, indices: &[usize]) -> SampleBatch {
        SampleBatch {
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            actions: indices.iter().map(|&i| self.actions[i].clone()).collect(),
            advantages: indices.iter().map(|&i| self.advantages[i]).collect(),
            value_targets: indices.iter().map(|&i| self.value_targets[i]).collect(),
            old_log_probs: indices.iter().map(|&i| self.old_log_probs[i]).collect(),
            old_dists: indices.iter().map(|&i| self.old_dists[i].clone()).collect(),
        }
    }
}

/// Loss diagnostics for one minibatch evaluation. `total_loss` is the value
/// of the maximization objective (larger is better); `value_term` is the
/// raw mean squared error before its coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinibatchLossReport {
    pub total_loss: f64,
    pub policy_term: f64,
    pub value_term: f64,
    pub entropy_term: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

fn scaled_dist_grad(terms: &[(f64, &DistGrad)]) -> DistGrad {
    let mut iter = terms.iter();
    let (w0, g0) = iter.next().expect("at least one term");
    let mut acc = match g0 {
        DistGrad::Gaussian { mean, log_std } => DistGrad::Gaussian {
            mean: mean.iter().map(|x| w0 * x).collect(),
            log_std: log_std.iter().map(|x| w0 * x).collect(),
        },
        DistGrad::Categorical { logits } => {
            DistGrad::Categorical { logits: logits.iter().map(|x| w0 * x).collect() }
        }
    };
    for (w, g) in iter {
        match (&mut acc, g) {
            (DistGrad::Gaussian { mean: am, log_std: als }, DistGrad::Gaussian { mean, log_std }) => {
                for (a, x) in am.iter_mut().zip(mean.iter()) {
                    *a += w * x;
                }
                for (a, x) in als.iter_mut().zip(log_std.iter()) {
                    *a += w * x;
                }
            }
            (DistGrad::Categorical { logits: al }, DistGrad::Categorical { logits }) => {
                for (a, x) in al.iter_mut().zip(logits.iter()) {
                    *a += w * x;
                }
            }
            _ => panic!("mixed distribution gradient families"),
        }
    }
    acc
}

/// Evaluate the combined maximization objective on a batch and, optionally,
/// its gradient over the full flat parameter vector.
fn evaluate(
    batch: &SampleBatch,
    ac: &ActorCritic,
    theta: &ParamVector,
    cfg: &ObjectiveConfig,
    want_grad: bool,
) -> Result<(MinibatchLossReport, Option<ParamVector>)> {
    cfg.validate_runtime()?;
    let n = batch.len();
    if n == 0 {
        return Err(Error::Config("empty minibatch".into()));
    }
    let w = 1.0 / n as f64;
    let value_coeff = if cfg.shared_network { cfg.c1 } else { 1.0 };
    let beta = cfg.penalty_beta();
    let mut grad = want_grad.then(|| ParamVector::zeros(ac.param_count()));

    let (mut policy_sum, mut value_sum, mut entropy_sum) = (0.0, 0.0, 0.0);
    let (mut kl_sum, mut ratio_sum) = (0.0, 0.0);
    let mut clipped_count = 0usize;

    for i in 0..n {
        let (dist, value, cache) = ac.forward(theta, &batch.observations[i])?;
        let new_lp = dist.log_prob(&batch.actions[i]);
        let (ratio, clamped) = prob_ratio_checked(new_lp, batch.old_log_probs[i]);
        let adv = batch.advantages[i];
        let kl_i = kl(&batch.old_dists[i], &dist)?;

        // policy term and its derivative w.r.t. the new log-probability
        let (term, mut d_lp) = match cfg.variant {
            SurrogateVariant::NoClip => (cpi_term(ratio, adv), ratio * adv),
            SurrogateVariant::Clip { epsilon } => {
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * adv;
                if clipped < unclipped {
                    clipped_count += 1;
                }
                // ties take the unclipped branch's gradient
                let d = if unclipped <= clipped { ratio * adv } else { 0.0 };
                (unclipped.min(clipped), d)
            }
            SurrogateVariant::FixedKl { .. } | SurrogateVariant::AdaptiveKl { .. } => {
                let beta = beta.expect("penalty variants carry beta");
                (cpi_term(ratio, adv) - beta * kl_i, ratio * adv)
            }
        };
        if clamped {
            d_lp = 0.0; // the clamped ratio is constant in θ
        }
        policy_sum += term;
        let err = value - batch.value_targets[i];
        value_sum += err * err;
        entropy_sum += dist.entropy();
        kl_sum += kl_i;
        ratio_sum += ratio;

        if let Some(g) = grad.as_mut() {
            let lp_grad = dist.log_prob_grad(&batch.actions[i]);
            let ent_grad = dist.entropy_grad();
            let mut terms: Vec<(f64, &DistGrad)> = vec![(d_lp, &lp_grad), (cfg.c2, &ent_grad)];
            let kl_grad;
            if let Some(b) = beta {
                kl_grad = kl_grad_wrt_q(&batch.old_dists[i], &dist)?;
                terms.push((-b, &kl_grad));
            }
            let d_dist = scaled_dist_grad(&terms);
            let d_value = -value_coeff * 2.0 * err;
            ac.backward_into(theta, &cache, Some(&d_dist), d_value, w, g)?;
        }
    }

    let report = MinibatchLossReport {
        total_loss: w * policy_sum - value_coeff * w * value_sum + cfg.c2 * w * entropy_sum,
        policy_term: w * policy_sum,
        value_term: w * value_sum,
        entropy_term: w * entropy_sum,
        mean_kl: w * kl_sum,
        clip_fraction: clipped_count as f64 / n as f64,
        mean_ratio: w * ratio_sum,
    };
    for (name, v) in [
        ("policy", report.policy_term),
        ("value", report.value_term),
        ("entropy", report.entropy_term),
        ("kl", report.mean_kl),
    ] {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} term became non-finite")));
        }
    }
    Ok((report, grad))
}

/// Evaluate the combined objective without gradients (diagnostics path).
pub fn surrogate_report(
    batch: &SampleBatch,
    ac: &ActorCritic,
    theta: &ParamVector,
    cfg: &ObjectiveConfig,
) -> Result<MinibatchLossReport> {
    Ok(evaluate(batch, ac, theta, cfg, false)?.0)
}

/// Combined maximization objective (policy surrogate, value error, entropy
/// bonus) and its gradient over all parameters. With separate networks the
/// value error reaches only the value parameters, structurally.
pub fn combined_loss(
    batch: &SampleBatch,
    ac: &ActorCritic,
    theta: &ParamVector,
    cfg: &ObjectiveConfig,
) -> Result<(MinibatchLossReport, ParamVector)> {
    let (report, grad) = evaluate(batch, ac, theta, cfg, true)?;
    Ok((report, grad.expect("gradient requested")))
}

/// The KL-penalized surrogate mean[r·Â − β·KL[π_old‖π]] as a maximization
/// objective, reported without gradients.
pub fn klpen_loss(
    batch: &SampleBatch,
    ac: &ActorCritic,
    theta: &ParamVector,
    beta: f64,
) -> Result<MinibatchLossReport> {
    if beta <= 0.0 {
        return Err(Error::Config(format!("klpen beta must be > 0, got {beta}")));
    }
    let cfg = ObjectiveConfig {
        variant: SurrogateVariant::FixedKl { beta },
        c1: 0.0,
        c2: 0.0,
        shared_network: false,
    };
    let (mut report, _) = evaluate(batch, ac, theta, &cfg, false)?;
    // the penalized surrogate alone, no value/entropy contributions
    report.total_loss = report.policy_term;
    Ok(report)
}

/// The trust-region diagnostic pair: the unclipped surrogate value and the
/// mean KL from the behavior policy. Only evaluated, never solved against.
pub fn trpo_diagnostics(batch: &SampleBatch, ac: &ActorCritic, theta: &ParamVector) -> Result<(f64, f64)> {
    let cfg = ObjectiveConfig {
        variant: SurrogateVariant::NoClip,
        c1: 0.0,
        c2: 0.0,
        shared_network: false,
    };
    let (report, _) = evaluate(batch, ac, theta, &cfg, false)?;
    Ok((report.policy_term, report.mean_kl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionSpace;
    use crate::gradcheck::{central_diff, max_rel_error_scaled};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_ac(space: ActionSpace, shared: bool) -> ActorCritic {
        ActorCritic::new(3, space, vec![6, 5], shared).unwrap()
    }

    /// Batch whose behavior snapshot comes from `theta_old`, so ratios are
    /// exactly 1 when evaluated at `theta_old`.
    fn make_batch(ac: &ActorCritic, theta_old: &ParamVector, n: usize, seed: u64) -> SampleBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = SampleBatch {
            observations: Vec::new(),
            actions: Vec::new(),
            advantages: Vec::new(),
            value_targets: Vec::new(),
            old_log_probs: Vec::new(),
            old_dists: Vec::new(),
        };
        for _ in 0..n {
            let obs: Vec<f64> = (0..ac.obs_dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let (dist, _, _) = ac.forward(theta_old, &obs).unwrap();
            let action = dist.sample(&mut rng);
            b.old_log_probs.push(dist.log_prob(&action));
            b.old_dists.push(dist);
            b.observations.push(obs);
            b.actions.push(action);
            b.advantages.push(4.0 * rng.random::<f64>() - 2.0);
            b.value_targets.push(2.0 * rng.random::<f64>() - 1.0);
        }
        b
    }

    fn perturbed(theta: &ParamVector, scale: f64, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParamVector(theta.iter().map(|x| x + scale * (2.0 * rng.random::<f64>() - 1.0)).collect())
    }

    #[test]
    fn prob_ratio_identities() {
        assert_eq!(prob_ratio(-1.37, -1.37), 1.0);
        assert!((prob_ratio(0.0, -(2.0f64.ln())) - 2.0).abs() < 1e-12);
        assert!((prob_ratio(-0.5, 0.0) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((prob_ratio(-0.5, 0.0) - 0.6065307).abs() < 1e-7);
        // overflow clamps
        assert_eq!(prob_ratio(100.0, 0.0), RATIO_CLAMP);
    }

    #[test]
    fn cpi_term_examples() {
        assert_eq!(cpi_term(1.0, 2.5), 2.5);
        assert_eq!(cpi_term(1.5, -1.0), -1.5);
        // linear in r: finite difference equals adv
        let adv = 0.8;
        let fd = (cpi_term(1.0 + 1e-6, adv) - cpi_term(1.0 - 1e-6, adv)) / 2e-6;
        assert!((fd - adv).abs() < 1e-9);
    }

    #[test]
    fn clip_term_forced_examples() {
        // positive advantage, ratio above 1+ε: plateau at (1+ε)·A
        assert_eq!(clip_term(1.5, 1.0, 0.2), 1.2);
        // negative advantage, ratio below 1−ε: plateau at (1−ε)·A
        assert_eq!(clip_term(0.5, -1.0, 0.2), -0.8);
        // negative advantage, ratio above 1+ε: worsening term is kept
        assert_eq!(clip_term(1.5, -1.0, 0.2), -1.5);
        // ratio 1: equals the unclipped term for any advantage
        for adv in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(clip_term(1.0, adv, 0.2), cpi_term(1.0, adv));
        }
    }

    #[test]
    fn clip_term_is_pointwise_lower_bound_with_equality_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for eps in [0.1, 0.2, 0.3] {
            for _ in 0..10_000 {
                let r = 5.0 * rng.random::<f64>() + 1e-9;
                let a = 6.0 * rng.random::<f64>() - 3.0;
                let c = clip_term(r, a, eps);
                assert!(c <= cpi_term(r, a) + 1e-15);
                if (1.0 - eps..=1.0 + eps).contains(&r) {
                    assert_eq!(c, cpi_term(r, a));
                }
            }
        }
    }

    #[test]
    fn clip_term_flat_gradient_regions() {
        let eps = 0.2;
        let fd = |r: f64, a: f64| (clip_term(r + 1e-7, a, eps) - clip_term(r - 1e-7, a, eps)) / 2e-7;
        assert!(fd(1.5, 1.0).abs() < 1e-9); // A>0, r>1+ε
        assert!(fd(0.5, -1.0).abs() < 1e-9); // A<0, r<1−ε
        assert!((fd(1.5, -1.0) + 1.0).abs() < 1e-6); // worsening side stays linear
        assert!((fd(1.0, 0.7) - 0.7).abs() < 1e-6); // inside the band
    }

    #[test]
    fn kl_controller_forced_sequence() {
        let mut st = KlControllerState { beta: 1.0, d_targ: 0.01 };
        let ds = [0.001, 0.02, 0.01, 0.002];
        let expect = [0.5, 1.0, 1.0, 0.5];
        for (d, e) in ds.iter().zip(expect.iter()) {
            st = kl_controller_update(&st, *d);
            assert_eq!(st.beta, *e);
            assert_eq!(st.d_targ, 0.01);
        }
    }

    #[test]
    fn kl_controller_dead_zone_and_power_of_two() {
        let st = KlControllerState { beta: 1.0, d_targ: 0.01 };
        assert_eq!(kl_controller_update(&st, 0.01).beta, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut st = KlControllerState { beta: 3.0, d_targ: 0.01 };
        for _ in 0..200 {
            st = kl_controller_update(&st, 0.05 * rng.random::<f64>());
            let log2 = (st.beta / 3.0).log2();
            assert!((log2 - log2.round()).abs() < 1e-12, "beta {}", st.beta);
            assert!(st.beta > 0.0);
        }
    }

    #[test]
    fn klpen_at_theta_old_is_mean_advantage() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(3, -0.2).unwrap();
        let batch = make_batch(&ac, &theta, 16, 4);
        let report = klpen_loss(&batch, &ac, &theta, 1.0).unwrap();
        let mean_adv = batch.advantages.iter().sum::<f64>() / 16.0;
        assert!((report.total_loss - mean_adv).abs() < 1e-12);
        assert!(report.mean_kl.abs() < 1e-12);
    }

    #[test]
    fn klpen_large_beta_dominates() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(3, -0.2).unwrap();
        let batch = make_batch(&ac, &theta, 16, 4);
        let moved = perturbed(&theta, 0.05, 99);
        let report = klpen_loss(&batch, &ac, &moved, 1e9).unwrap();
        assert!(report.total_loss < 0.0);
    }

    #[test]
    fn klpen_matches_direct_transcription() {
        let ac = test_ac(ActionSpace::Discrete { n: 3 }, false);
        let theta_old = ac.init(5, 0.0).unwrap();
        let batch = make_batch(&ac, &theta_old, 8, 6);
        let theta = perturbed(&theta_old, 0.1, 7);
        let beta = 0.7;
        let report = klpen_loss(&batch, &ac, &theta, beta).unwrap();
        // term-by-term transcription of the penalized surrogate
        let mut expect = 0.0;
        for i in 0..batch.len() {
            let dist = ac.policy_dist(&theta, &batch.observations[i]).unwrap();
            let r = (dist.log_prob(&batch.actions[i]) - batch.old_log_probs[i]).exp();
            let d = kl(&batch.old_dists[i], &dist).unwrap();
            expect += r * batch.advantages[i] - beta * d;
        }
        expect /= batch.len() as f64;
        assert!((report.total_loss - expect).abs() < 1e-12);
    }

    #[test]
    fn trpo_diagnostics_match_klpen_with_zero_penalty() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta_old = ac.init(8, -0.1).unwrap();
        let batch = make_batch(&ac, &theta_old, 12, 9);
        let theta = perturbed(&theta_old, 0.08, 10);
        let (surrogate, mean_kl) = trpo_diagnostics(&batch, &ac, &theta).unwrap();
        assert!(mean_kl >= 0.0);
        // β→0 limit of the penalized objective
        let report = klpen_loss(&batch, &ac, &theta, 1e-300).unwrap();
        assert!((surrogate - report.total_loss).abs() < 1e-12);
        assert!((mean_kl - report.mean_kl).abs() < 1e-12);
        // at θ_old: surrogate = mean advantage, KL = 0
        let (s0, k0) = trpo_diagnostics(&batch, &ac, &theta_old).unwrap();
        let mean_adv = batch.advantages.iter().sum::<f64>() / batch.len() as f64;
        assert!((s0 - mean_adv).abs() < 1e-12);
        assert!(k0.abs() < 1e-12);
    }

    #[test]
    fn combined_loss_at_theta_old_clip_equals_noclip_gradient() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(13, -0.4).unwrap();
        let batch = make_batch(&ac, &theta, 20, 14);
        let base = ObjectiveConfig { c1: 0.0, c2: 0.0, shared_network: false, variant: SurrogateVariant::NoClip };
        let clip = ObjectiveConfig { variant: SurrogateVariant::Clip { epsilon: 0.2 }, ..base };
        let (rep_clip, g_clip) = combined_loss(&batch, &ac, &theta, &clip).unwrap();
        let (rep_noclip, g_noclip) = combined_loss(&batch, &ac, &theta, &base).unwrap();
        let mean_adv = batch.advantages.iter().sum::<f64>() / batch.len() as f64;
        assert!((rep_clip.policy_term - mean_adv).abs() < 1e-12);
        assert_eq!(rep_clip.clip_fraction, 0.0);
        assert!((rep_clip.mean_ratio - 1.0).abs() < 1e-12);
        for (a, b) in g_clip.iter().zip(g_noclip.iter()) {
            assert_eq!(a, b, "first-order identity must be exact at θ_old");
        }
        assert_eq!(rep_clip.total_loss, rep_noclip.total_loss);
    }

    #[test]
    fn entropy_term_increases_with_log_std() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(15, -0.5).unwrap();
        let batch = make_batch(&ac, &theta, 10, 16);
        let cfg = ObjectiveConfig {
            variant: SurrogateVariant::Clip { epsilon: 0.2 },
            c1: 0.0,
            c2: 0.02,
            shared_network: false,
        };
        let (rep1, _) = combined_loss(&batch, &ac, &theta, &cfg).unwrap();
        let mut theta2 = theta.clone();
        for i in ac.log_std_range() {
            theta2.0[i] += 0.3;
        }
        let (rep2, _) = combined_loss(&batch, &ac, &theta2, &cfg).unwrap();
        assert!(rep2.entropy_term > rep1.entropy_term);
    }

    #[test]
    fn combined_loss_matches_term_by_term_oracle() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, true);
        let theta_old = ac.init(17, -0.3).unwrap();
        let batch = make_batch(&ac, &theta_old, 4, 18);
        let theta = perturbed(&theta_old, 0.05, 19);
        let cfg = ObjectiveConfig {
            variant: SurrogateVariant::Clip { epsilon: 0.2 },
            c1: 0.6,
            c2: 0.01,
            shared_network: true,
        };
        let (report, _) = combined_loss(&batch, &ac, &theta, &cfg).unwrap();
        let mut expect = 0.0;
        for i in 0..4 {
            let (dist, v, _) = ac.forward(&theta, &batch.observations[i]).unwrap();
            let r = (dist.log_prob(&batch.actions[i]) - batch.old_log_probs[i]).exp();
            let a = batch.advantages[i];
            let pol = (r * a).min(r.clamp(0.8, 1.2) * a);
            let verr = v - batch.value_targets[i];
            expect += pol - 0.6 * verr * verr + 0.01 * dist.entropy();
        }
        expect /= 4.0;
        assert!((report.total_loss - expect).abs() < 1e-10);
    }

    #[test]
    fn combined_loss_gradients_match_finite_differences_all_variants() {
        let variants = [
            SurrogateVariant::NoClip,
            SurrogateVariant::Clip { epsilon: 0.2 },
            SurrogateVariant::FixedKl { beta: 1.3 },
            SurrogateVariant::AdaptiveKl { beta_init: 0.8, d_targ: 0.01 },
        ];
        for (vi, variant) in variants.into_iter().enumerate() {
            for (shared, space) in [
                (false, ActionSpace::Continuous { dim: 2 }),
                (true, ActionSpace::Discrete { n: 3 }),
            ] {
                let ac = test_ac(space, shared);
                let theta_old = ac.init(20 + vi as u64, -0.2).unwrap();
                let batch = make_batch(&ac, &theta_old, 6, 30 + vi as u64);
                let theta = perturbed(&theta_old, 0.03, 40 + vi as u64);
                let cfg = ObjectiveConfig { variant, c1: 0.5, c2: 0.01, shared_network: shared };
                let (_, analytic) = combined_loss(&batch, &ac, &theta, &cfg).unwrap();
                let f = |th: &ParamVector| {
                    combined_loss(&batch, &ac, th, &cfg).unwrap().0.total_loss
                };
                let numeric = central_diff(f, &theta, 1e-6);
                let err = max_rel_error_scaled(analytic.as_slice(), &numeric, 1e-4);
                assert!(err < 1e-4, "variant {variant:?} shared={shared} err={err}");
            }
        }
    }

    #[test]
    fn value_loss_reaches_only_value_parameters_when_separate() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(50, 0.0).unwrap();
        let batch = make_batch(&ac, &theta, 8, 51);
        // zero advantages and entropy coefficient: only the value term remains
        let mut b = batch.clone();
        for a in &mut b.advantages {
            *a = 0.0;
        }
        let cfg = ObjectiveConfig {
            variant: SurrogateVariant::Clip { epsilon: 0.2 },
            c1: 0.0,
            c2: 0.0,
            shared_network: false,
        };
        let (_, grad) = combined_loss(&b, &ac, &theta, &cfg).unwrap();
        assert!(grad.0[ac.policy_range()].iter().all(|&g| g == 0.0));
        assert!(grad.0[ac.log_std_range()].iter().all(|&g| g == 0.0));
        assert!(grad.0[ac.value_range().unwrap()].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn empty_minibatch_is_config_error() {
        let ac = test_ac(ActionSpace::Continuous { dim: 2 }, false);
        let theta = ac.init(1, 0.0).unwrap();
        let batch = make_batch(&ac, &theta, 4, 1).select(&[]);
        let cfg = ObjectiveConfig::clip(0.2);
        assert!(combined_loss(&batch, &ac, &theta, &cfg).is_err());
    }
}
