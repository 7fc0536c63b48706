//! Objective-surface sweep along the line between two parameter vectors:
//! evaluates the unclipped surrogate, the clipped surrogate, the mean KL,
//! the clip fraction, and the KL-penalized objective at
//! θ(α) = θ_old + α·(θ_new − θ_old) on one fixed batch collected under
//! θ_old. After a real policy update this reproduces the classic picture:
//! the clipped surrogate lower-bounds the unclipped one everywhere, ties it
//! at α = 0, and peaks in the interior.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::nn::{read_param_block, ParamVector};
use crate::objectives::{surrogate_report, ObjectiveConfig, SampleBatch, SurrogateVariant};
use crate::policy::ActorCritic;
use crate::rollout::{build_advantages, Actor};

#[derive(Debug, Clone)]
pub struct InterpolationSweep {
    pub alphas: Vec<f64>,
    pub cpi: Vec<f64>,
    pub clip: Vec<f64>,
    pub mean_kl: Vec<f64>,
    pub clip_fraction: Vec<f64>,
    pub klpen: Vec<f64>,
}

impl InterpolationSweep {
    /// Grid point where the clipped surrogate is largest.
    pub fn clip_argmax(&self) -> (f64, f64) {
        let mut best = 0;
        for i in 1..self.alphas.len() {
            if self.clip[i] > self.clip[best] {
                best = i;
            }
        }
        (self.alphas[best], self.clip[best])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,l_cpi,l_clip,mean_kl,clip_fraction,l_klpen\n");
        for i in 0..self.alphas.len() {
            s.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?},{:?}\n",
                self.alphas[i],
                self.cpi[i],
                self.clip[i],
                self.mean_kl[i],
                self.clip_fraction[i],
                self.klpen[i],
            ));
        }
        s
    }
}

/// The default sweep grid: 0.0 to 1.2 in steps of 0.02.
pub fn default_alphas() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * 0.02).collect()
}

/// Load two parameter checkpoints that must share one architecture.
pub fn load_checkpoint_pair(
    old: &Path,
    new: &Path,
) -> Result<(ActorCritic, ParamVector, ParamVector)> {
    let (ac_old, theta_old) = ActorCritic::from_param_block(&read_param_block(old)?)?;
    let (ac_new, theta_new) = ActorCritic::from_param_block(&read_param_block(new)?)?;
    if ac_old != ac_new {
        return Err(Error::Config(format!(
            "checkpoints disagree on architecture: {} vs {}",
            old.display(),
            new.display()
        )));
    }
    Ok((ac_old, theta_old, theta_new))
}

/// Collect one evaluation batch under `theta_old` (single actor, `steps`
/// transitions, GAE advantages).
pub fn collect_eval_batch(
    ac: &ActorCritic,
    theta_old: &ParamVector,
    env_name: &str,
    seed: u64,
    steps: usize,
    gamma: f64,
    lambda: f64,
    normalize: bool,
) -> Result<SampleBatch> {
    let env = make_env(env_name, seed)?;
    let mut actor = Actor::new(env, ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
    let (segment, _) = actor.collect_segment(ac, theta_old, steps)?;
    let estimates = build_advantages(std::slice::from_ref(&segment), gamma, lambda, normalize)?;
    Ok(SampleBatch::from_segments(std::slice::from_ref(&segment), &estimates))
}

/// Sweep the objectives along the interpolation line on a fixed batch.
pub fn interpolate_objectives(
    ac: &ActorCritic,
    theta_old: &ParamVector,
    theta_new: &ParamVector,
    batch: &SampleBatch,
    alphas: &[f64],
    epsilon: f64,
    beta: f64,
) -> Result<InterpolationSweep> {
    if theta_old.len() != theta_new.len() || theta_old.len() != ac.param_count() {
        return Err(Error::Config("parameter vectors do not match the architecture".into()));
    }
    let policy_only = |variant: SurrogateVariant| ObjectiveConfig {
        variant,
        c1: 0.0,
        c2: 0.0,
        shared_network: false,
    };
    let mut sweep = InterpolationSweep {
        alphas: alphas.to_vec(),
        cpi: Vec::with_capacity(alphas.len()),
        clip: Vec::with_capacity(alphas.len()),
        mean_kl: Vec::with_capacity(alphas.len()),
        clip_fraction: Vec::with_capacity(alphas.len()),
        klpen: Vec::with_capacity(alphas.len()),
    };
    for &alpha in alphas {
        let theta = ParamVector(
            theta_old
                .iter()
                .zip(theta_new.iter())
                .map(|(o, n)| o + alpha * (n - o))
                .collect(),
        );
        let cpi = surrogate_report(batch, ac, &theta, &policy_only(SurrogateVariant::NoClip))?;
        let clip =
            surrogate_report(batch, ac, &theta, &policy_only(SurrogateVariant::Clip { epsilon }))?;
        let klpen =
            surrogate_report(batch, ac, &theta, &policy_only(SurrogateVariant::FixedKl { beta }))?;
        sweep.cpi.push(cpi.policy_term);
        sweep.clip.push(clip.policy_term);
        sweep.mean_kl.push(clip.mean_kl);
        sweep.clip_fraction.push(clip.clip_fraction);
        sweep.klpen.push(klpen.policy_term);
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionSpace;
    use rand::Rng;

    #[test]
    fn identity_interpolation_at_alpha_zero() {
        let ac = ActorCritic::new(4, ActionSpace::Continuous { dim: 2 }, vec![8], false).unwrap();
        let theta_old = ac.init(3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta_new =
            ParamVector(theta_old.iter().map(|x| x + 0.05 * (rng.random::<f64>() - 0.5)).collect());
        let batch =
            collect_eval_batch(&ac, &theta_old, "point_mass", 2, 64, 0.99, 0.95, true).unwrap();
        let sweep =
            interpolate_objectives(&ac, &theta_old, &theta_new, &batch, &default_alphas(), 0.2, 1.0)
                .unwrap();
        assert!((sweep.cpi[0] - sweep.clip[0]).abs() < 1e-10);
        assert!(sweep.mean_kl[0].abs() < 1e-10);
        // lower bound everywhere on the grid
        for i in 0..sweep.alphas.len() {
            assert!(sweep.clip[i] <= sweep.cpi[i] + 1e-12);
        }
        // csv round shape
        let csv = sweep.to_csv();
        assert!(csv.starts_with("alpha,"));
        assert_eq!(csv.lines().count(), 62);
    }
}
