//! Fixed-length trajectory segments and advantage estimation.
//!
//! A segment spans exactly `T` transitions regardless of episode
//! boundaries: episodes that end mid-segment auto-reset and collection
//! continues. Alongside each transition the collector records the values and
//! log-probabilities of the behavior policy, so every later optimization
//! epoch sees the identical frozen snapshot.
//!
//! Bootstrapping conventions: a true terminal stops value bootstrapping
//! (the TD residual's successor term is masked), while a time-limit
//! truncation bootstraps through the cut using the value of the final
//! pre-reset observation. The advantage recursion stops at every episode
//! boundary of either kind; with λ = 1 it then telescopes exactly into the
//! finite-horizon return estimator on any segment.

use crate::distributions::Dist;
use crate::envs::{Action, Env};
use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::policy::ActorCritic;
use rand_chacha::ChaCha8Rng;

/// One actor's length-T trajectory slice.
///
/// `observations[t]` is the state acted on at step `t` (after any auto
/// reset); `observations[T]` is the state the next segment would act on.
/// `old_values[t]` is V(observations[t]) under the behavior parameters.
/// `boot_values[t]` is V at the true successor of transition `t`: equal to
/// `old_values[t + 1]` away from episode ends, and the value of the final
/// pre-reset observation when the episode ended at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
    pub truncated: Vec<bool>,
    pub old_values: Vec<f64>,
    pub boot_values: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub old_dists: Vec<Dist>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Whether transition `t` ended its episode (terminal or time limit).
    pub fn episode_ends(&self) -> Vec<bool> {
        self.terminal
            .iter()
            .zip(self.truncated.iter())
            .map(|(&a, &b)| a || b)
            .collect()
    }
}

/// Per-timestep advantage estimates and value-regression targets aligned to
/// one segment. `value_targets[t] = raw_advantages[t] + old_values[t]`
/// always; `advantages` may additionally be normalized over the pooled
/// batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub raw_advantages: Vec<f64>,
}

/// One rollout worker: an environment plus its action-sampling RNG and the
/// bookkeeping that persists across segment boundaries.
pub struct Actor {
    pub env: Box<dyn Env>,
    pub rng: ChaCha8Rng,
    current_obs: Option<Vec<f64>>,
    running_return: f64,
}

impl Actor {
    pub fn new(env: Box<dyn Env>, rng: ChaCha8Rng) -> Self {
        Actor { env, rng, current_obs: None, running_return: 0.0 }
    }

    pub fn running_return(&self) -> f64 {
        self.running_return
    }

    pub fn set_running_return(&mut self, r: f64) {
        self.running_return = r;
    }

    pub fn current_obs(&self) -> Option<&Vec<f64>> {
        self.current_obs.as_ref()
    }

    pub fn set_current_obs(&mut self, obs: Option<Vec<f64>>) {
        self.current_obs = obs;
    }

    /// Run the behavior policy for exactly `horizon` transitions, resetting
    /// through episode ends. Returns the segment and the total returns of
    /// every episode completed inside it.
    pub fn collect_segment(
        &mut self,
        ac: &ActorCritic,
        theta: &ParamVector,
        horizon: usize,
    ) -> Result<(Segment, Vec<f64>)> {
        if horizon == 0 {
            return Err(Error::Config("segment horizon must be at least 1".into()));
        }
        let mut seg = Segment {
            observations: Vec::with_capacity(horizon + 1),
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            terminal: Vec::with_capacity(horizon),
            truncated: Vec::with_capacity(horizon),
            old_values: Vec::with_capacity(horizon + 1),
            boot_values: Vec::with_capacity(horizon),
            old_log_probs: Vec::with_capacity(horizon),
            old_dists: Vec::with_capacity(horizon),
        };
        let mut completed = Vec::new();
        let mut obs = match self.current_obs.take() {
            Some(o) => o,
            None => self.env.reset(),
        };
        for t in 0..horizon {
            if obs.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("non-finite observation at timestep {t}")));
            }
            let (dist, value, _) = ac.forward(theta, &obs)?;
            let action = dist.sample(&mut self.rng);
            let log_prob = dist.log_prob(&action);
            let step = self.env.step(&action)?;
            if !step.reward.is_finite() {
                return Err(Error::Numeric(format!("non-finite reward at timestep {t}")));
            }
            self.running_return += step.reward;
            let ended = step.terminal || step.truncated;
            // value of the true successor state, before any reset
            let boot = ac.value(theta, &step.observation)?;
            seg.observations.push(obs);
            seg.actions.push(action);
            seg.rewards.push(step.reward);
            seg.terminal.push(step.terminal);
            seg.truncated.push(step.truncated);
            seg.old_values.push(value);
            seg.boot_values.push(boot);
            seg.old_log_probs.push(log_prob);
            seg.old_dists.push(dist);
            obs = if ended {
                completed.push(self.running_return);
                self.running_return = 0.0;
                self.env.reset()
            } else {
                step.observation
            };
        }
        let final_value = ac.value(theta, &obs)?;
        seg.observations.push(obs.clone());
        seg.old_values.push(final_value);
        self.current_obs = Some(obs);
        Ok((seg, completed))
    }
}

/// TD residuals δ_t = r_t + γ·mask_t·V(successor_t) − V(s_t), where mask_t
/// is 0 exactly when transition t was terminal. Truncated transitions
/// bootstrap normally through the stored pre-reset successor value.
pub fn compute_deltas(segment: &Segment, gamma: f64) -> Vec<f64> {
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    (0..segment.len())
        .map(|t| {
            let mask = if segment.terminal[t] { 0.0 } else { 1.0 };
            segment.rewards[t] + gamma * mask * segment.boot_values[t] - segment.old_values[t]
        })
        .collect()
}

/// Truncated generalized advantage estimation by the backward recursion
/// Â_t = δ_t + γλ·Â_{t+1}, restarted at every episode boundary
/// (`episode_ends[t]` true). Â after the last index is 0.
pub fn compute_gae(deltas: &[f64], episode_ends: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(deltas.len(), episode_ends.len());
    assert!((0.0..=1.0).contains(&lambda), "lambda must be in [0, 1]");
    let mut adv = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        let cont = if episode_ends[t] { 0.0 } else { 1.0 };
        acc = deltas[t] + gamma * lambda * cont * acc;
        adv[t] = acc;
    }
    adv
}

/// Finite-horizon advantage estimator evaluated directly from rewards:
/// Â_t = −V(s_t) + r_t + γ·r_{t+1} + … , closed at the first episode end
/// after t (bootstrapping through truncations but not terminals) or at the
/// segment boundary with γ^{T−t}·V(s_T).
pub fn compute_nstep_return_advantage(segment: &Segment, gamma: f64) -> Vec<f64> {
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must be in (0, 1]");
    let t_max = segment.len();
    let mut adv = vec![0.0; t_max];
    for t in 0..t_max {
        let mut acc = -segment.old_values[t];
        let mut disc = 1.0;
        for l in t..t_max {
            acc += disc * segment.rewards[l];
            if segment.terminal[l] {
                break;
            }
            if segment.truncated[l] || l == t_max - 1 {
                acc += disc * gamma * segment.boot_values[l];
                break;
            }
            disc *= gamma;
        }
        adv[t] = acc;
    }
    adv
}

/// Per-segment GAE plus value targets for a batch of same-length segments.
///
/// With `normalize` set, advantages are standardized over the pooled N·T
/// batch (value targets are built from raw advantages and unaffected). A
/// pooled standard deviation below 1e-8 skips the scaling and only centers,
/// with a warning.
pub fn build_advantages(
    segments: &[Segment],
    gamma: f64,
    lambda: f64,
    normalize: bool,
) -> Result<Vec<AdvantageEstimate>> {
    if segments.is_empty() {
        return Err(Error::Config("no segments to estimate advantages from".into()));
    }
    let t_len = segments[0].len();
    if segments.iter().any(|s| s.len() != t_len) {
        return Err(Error::Config("segments must share the same horizon".into()));
    }
    let mut estimates: Vec<AdvantageEstimate> = segments
        .iter()
        .map(|seg| {
            let deltas = compute_deltas(seg, gamma);
            let raw = compute_gae(&deltas, &seg.episode_ends(), gamma, lambda);
            let value_targets: Vec<f64> =
                raw.iter().zip(seg.old_values.iter()).map(|(a, v)| a + v).collect();
            AdvantageEstimate { advantages: raw.clone(), value_targets, raw_advantages: raw }
        })
        .collect();
    if normalize {
        let n = (segments.len() * t_len) as f64;
        let mean = estimates.iter().flat_map(|e| e.raw_advantages.iter()).sum::<f64>() / n;
        let var = estimates
            .iter()
            .flat_map(|e| e.raw_advantages.iter())
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        if std < 1e-8 {
            log::warn!("pooled advantage std {std:.3e} below 1e-8; centering without scaling");
            for e in &mut estimates {
                for a in &mut e.advantages {
                    *a -= mean;
                }
            }
        } else {
            for e in &mut estimates {
                for a in &mut e.advantages {
                    *a = (*a - mean) / std;
                }
            }
        }
    }
    Ok(estimates)
}
