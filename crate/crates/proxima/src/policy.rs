//! Actor-critic parameter bundle: wires the MLP substrate to the policy
//! distributions and exposes one flat parameter vector covering everything
//! trainable.
//!
//! Flat layout: policy network parameters, then the state-independent
//! log-std vector (continuous control only, length 0 otherwise), then the
//! value network parameters when the networks are separate. With a shared
//! network there is a single MLP whose output layer carries the
//! distribution head plus one value unit as its last output.

use crate::distributions::{Categorical, DiagGaussian, Dist, DistGrad};
use crate::envs::ActionSpace;
use crate::error::{Error, Result};
use crate::nn::{
    init_params, mlp_backward_into, mlp_forward, ForwardCache, MlpSpec, ParamBlock, ParamSection,
    ParamVector,
};
use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorCritic {
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub hidden_dims: Vec<usize>,
    pub shared: bool,
    policy_mlp: MlpSpec,
    value_mlp: Option<MlpSpec>,
}

impl ActorCritic {
    pub fn new(
        obs_dim: usize,
        action_space: ActionSpace,
        hidden_dims: Vec<usize>,
        shared: bool,
    ) -> Result<Self> {
        let head = Self::head_dim_of(action_space);
        let out = if shared { head + 1 } else { head };
        let policy_mlp = MlpSpec::new(obs_dim, hidden_dims.clone(), out)?;
        let value_mlp = if shared { None } else { Some(MlpSpec::new(obs_dim, hidden_dims.clone(), 1)?) };
        Ok(ActorCritic { obs_dim, action_space, hidden_dims, shared, policy_mlp, value_mlp })
    }

    fn head_dim_of(space: ActionSpace) -> usize {
        match space {
            ActionSpace::Continuous { dim } => dim,
            ActionSpace::Discrete { n } => n,
        }
    }

    pub fn head_dim(&self) -> usize {
        Self::head_dim_of(self.action_space)
    }

    pub fn log_std_dim(&self) -> usize {
        match self.action_space {
            ActionSpace::Continuous { dim } => dim,
            ActionSpace::Discrete { .. } => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.policy_mlp.param_count()
            + self.log_std_dim()
            + self.value_mlp.as_ref().map_or(0, |m| m.param_count())
    }

    pub fn policy_range(&self) -> Range<usize> {
        0..self.policy_mlp.param_count()
    }

    pub fn log_std_range(&self) -> Range<usize> {
        let s = self.policy_mlp.param_count();
        s..s + self.log_std_dim()
    }

    pub fn value_range(&self) -> Option<Range<usize>> {
        self.value_mlp.as_ref().map(|m| {
            let s = self.policy_mlp.param_count() + self.log_std_dim();
            s..s + m.param_count()
        })
    }

    /// Seeded initialization: fan-in-scaled uniform weights, the policy head
    /// rows of the final layer scaled by 0.01 so the initial policy sits
    /// near zero mean / near uniform logits, value head at full scale,
    /// log-std entries at `log_std_init`.
    pub fn init(&self, seed: u64, log_std_init: f64) -> Result<ParamVector> {
        let mut theta = Vec::with_capacity(self.param_count());
        let mut policy = init_params(&self.policy_mlp, seed, 1.0)?;
        let dims = self.policy_mlp.layer_dims();
        let (last_in, last_out) = *dims.last().expect("mlp has layers");
        let last_off = self.policy_mlp.param_count() - (last_in + 1) * last_out;
        for row in 0..self.head_dim() {
            for i in 0..last_in {
                policy.0[last_off + row * last_in + i] *= 0.01;
            }
        }
        theta.extend_from_slice(&policy.0);
        theta.extend(std::iter::repeat(log_std_init).take(self.log_std_dim()));
        if let Some(vm) = &self.value_mlp {
            let value = init_params(vm, seed.wrapping_add(0x9e3779b9), 1.0)?;
            theta.extend_from_slice(&value.0);
        }
        Ok(ParamVector(theta))
    }

    fn dist_from_head(&self, head: &[f64], theta: &ParamVector) -> Dist {
        match self.action_space {
            ActionSpace::Continuous { dim } => {
                let ls = &theta.0[self.log_std_range()];
                Dist::Gaussian(DiagGaussian::new(head[..dim].to_vec(), ls.to_vec()))
            }
            ActionSpace::Discrete { n } => Dist::Categorical(Categorical::new(head[..n].to_vec())),
        }
    }

    /// Evaluate policy distribution and state value in one pass.
    pub fn forward(&self, theta: &ParamVector, obs: &[f64]) -> Result<(Dist, f64, AcCache)> {
        self.check_len(theta)?;
        let (pout, pcache) = mlp_forward(&self.policy_mlp, &theta.0[self.policy_range()], obs)?;
        let dist = self.dist_from_head(&pout, theta);
        let (value, vcache) = match (&self.value_mlp, self.value_range()) {
            (Some(vm), Some(r)) => {
                let (vout, vc) = mlp_forward(vm, &theta.0[r], obs)?;
                (vout[0], Some(vc))
            }
            _ => (pout[self.head_dim()], None),
        };
        Ok((dist, value, AcCache { policy: pcache, value: vcache }))
    }

    pub fn policy_dist(&self, theta: &ParamVector, obs: &[f64]) -> Result<Dist> {
        Ok(self.forward(theta, obs)?.0)
    }

    pub fn value(&self, theta: &ParamVector, obs: &[f64]) -> Result<f64> {
        Ok(self.forward(theta, obs)?.1)
    }

    /// Accumulate `weight ·` the parameter gradient of a scalar whose
    /// derivatives w.r.t. the distribution parameters and the value output
    /// are given. `d_dist` entries flow through the policy network (and the
    /// log-std slice directly); `d_value` flows through the value network or
    /// the shared value head.
    pub fn backward_into(
        &self,
        theta: &ParamVector,
        cache: &AcCache,
        d_dist: Option<&DistGrad>,
        d_value: f64,
        weight: f64,
        out: &mut ParamVector,
    ) -> Result<()> {
        self.check_len(theta)?;
        if out.len() != self.param_count() {
            return Err(Error::Config("gradient accumulator length mismatch".into()));
        }
        let head = self.head_dim();
        let mut upstream = vec![0.0; self.policy_mlp.output_dim];
        if let Some(dg) = d_dist {
            match (dg, self.action_space) {
                (DistGrad::Gaussian { mean, log_std }, ActionSpace::Continuous { dim }) => {
                    upstream[..dim].copy_from_slice(mean);
                    let r = self.log_std_range();
                    for (slot, g) in out.0[r].iter_mut().zip(log_std.iter()) {
                        *slot += weight * g;
                    }
                }
                (DistGrad::Categorical { logits }, ActionSpace::Discrete { n }) => {
                    upstream[..n].copy_from_slice(logits);
                }
                _ => return Err(Error::Config("distribution gradient family mismatch".into())),
            }
        }
        match (&self.value_mlp, self.value_range()) {
            (Some(vm), Some(r)) => {
                if d_dist.is_some() {
                    mlp_backward_into(
                        &self.policy_mlp,
                        &theta.0[self.policy_range()],
                        &cache.policy,
                        &upstream,
                        weight,
                        &mut out.0[self.policy_range()],
                    )?;
                }
                if d_value != 0.0 {
                    let vcache = cache
                        .value
                        .as_ref()
                        .ok_or_else(|| Error::Config("cache missing value pass".into()))?;
                    mlp_backward_into(vm, &theta.0[r.clone()], vcache, &[d_value], weight, &mut out.0[r])?;
                }
            }
            _ => {
                upstream[head] = d_value;
                mlp_backward_into(
                    &self.policy_mlp,
                    &theta.0[self.policy_range()],
                    &cache.policy,
                    &upstream,
                    weight,
                    &mut out.0[self.policy_range()],
                )?;
            }
        }
        Ok(())
    }

    fn check_len(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::Config(format!(
                "parameter vector length {} does not match actor-critic ({} expected)",
                theta.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    /// Serialize the flat vector into the on-disk parameter block. Sections:
    /// policy network, log-std vector, and (for separate networks) the value
    /// network.
    pub fn to_param_block(&self, theta: &ParamVector) -> Result<ParamBlock> {
        self.check_len(theta)?;
        let mut sections = vec![
            ParamSection::mlp(&self.policy_mlp, &ParamVector(theta.0[self.policy_range()].to_vec()))?,
            ParamSection::vector(theta.0[self.log_std_range()].to_vec()),
        ];
        if let (Some(vm), Some(r)) = (&self.value_mlp, self.value_range()) {
            sections.push(ParamSection::mlp(vm, &ParamVector(theta.0[r].to_vec()))?);
        }
        Ok(ParamBlock { sections })
    }

    /// Rebuild the architecture and flat vector from a parameter block.
    pub fn from_param_block(block: &ParamBlock) -> Result<(ActorCritic, ParamVector)> {
        if block.sections.len() < 2 || block.sections.len() > 3 {
            return Err(Error::Format(format!(
                "actor-critic block wants 2 or 3 sections, got {}",
                block.sections.len()
            )));
        }
        let shared = block.sections.len() == 2;
        let pspec = MlpSpec::from_dims(&block.sections[0].dims)?;
        let log_std_len = block.sections[1].data.len();
        let head = if shared { pspec.output_dim - 1 } else { pspec.output_dim };
        let action_space = if log_std_len > 0 {
            if log_std_len != head {
                return Err(Error::Format("log-std length does not match head".into()));
            }
            ActionSpace::Continuous { dim: head }
        } else {
            ActionSpace::Discrete { n: head }
        };
        let ac = ActorCritic::new(pspec.input_dim, action_space, pspec.hidden_dims.clone(), shared)?;
        if !shared {
            let vspec = MlpSpec::from_dims(&block.sections[2].dims)?;
            if vspec != *ac.value_mlp.as_ref().expect("separate nets have a value mlp") {
                return Err(Error::Format("value network dims do not match policy".into()));
            }
        }
        let mut theta = Vec::with_capacity(ac.param_count());
        for s in &block.sections {
            theta.extend_from_slice(&s.data);
        }
        let theta = ParamVector(theta);
        ac.check_len(&theta)?;
        Ok((ac, theta))
    }
}

/// Activation caches from [`ActorCritic::forward`].
#[derive(Debug, Clone)]
pub struct AcCache {
    policy: ForwardCache,
    value: Option<ForwardCache>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_diff, max_rel_error_scaled};

    fn gaussian_ac(shared: bool) -> ActorCritic {
        ActorCritic::new(3, ActionSpace::Continuous { dim: 2 }, vec![8, 6], shared).unwrap()
    }

    #[test]
    fn layout_and_counts() {
        let ac = gaussian_ac(false);
        let pc = (3 + 1) * 8 + (8 + 1) * 6 + (6 + 1) * 2;
        let vc = (3 + 1) * 8 + (8 + 1) * 6 + (6 + 1) * 1;
        assert_eq!(ac.param_count(), pc + 2 + vc);
        let shared = gaussian_ac(true);
        let pcs = (3 + 1) * 8 + (8 + 1) * 6 + (6 + 1) * 3;
        assert_eq!(shared.param_count(), pcs + 2);
    }

    #[test]
    fn init_policy_head_is_small_and_value_head_is_not() {
        let ac = gaussian_ac(true);
        let theta = ac.init(7, -0.5).unwrap();
        let obs = [0.5, -0.2, 0.9];
        let (dist, value, _) = ac.forward(&theta, &obs).unwrap();
        if let Dist::Gaussian(g) = dist {
            assert!(g.mean.iter().all(|m| m.abs() < 0.05), "{:?}", g.mean);
            assert_eq!(g.log_std, vec![-0.5, -0.5]);
        } else {
            panic!("expected gaussian");
        }
        assert!(value.abs() > 1e-4, "value head should not be scaled down: {value}");
    }

    #[test]
    fn param_block_roundtrip_both_modes() {
        for shared in [false, true] {
            let ac = gaussian_ac(shared);
            let theta = ac.init(3, 0.0).unwrap();
            let block = ac.to_param_block(&theta).unwrap();
            let (ac2, theta2) = ActorCritic::from_param_block(&block).unwrap();
            assert_eq!(ac, ac2);
            assert_eq!(theta, theta2);
        }
        let disc = ActorCritic::new(4, ActionSpace::Discrete { n: 3 }, vec![5], false).unwrap();
        let theta = disc.init(1, 0.0).unwrap();
        let (disc2, theta2) =
            ActorCritic::from_param_block(&disc.to_param_block(&theta).unwrap()).unwrap();
        assert_eq!(disc, disc2);
        assert_eq!(theta, theta2);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // scalar probe: log_prob(action) + 2·entropy + 3·value, both modes
        // and both families
        let action_c = crate::envs::Action::Continuous(vec![0.4, -0.1]);
        let action_d = crate::envs::Action::Discrete(1);
        let cases: Vec<(ActorCritic, crate::envs::Action)> = vec![
            (gaussian_ac(false), action_c.clone()),
            (gaussian_ac(true), action_c),
            (ActorCritic::new(3, ActionSpace::Discrete { n: 4 }, vec![8, 6], false).unwrap(), action_d.clone()),
            (ActorCritic::new(3, ActionSpace::Discrete { n: 4 }, vec![8, 6], true).unwrap(), action_d),
        ];
        let obs = [0.5, -0.2, 0.9];
        for (ac, action) in cases {
            let theta = ac.init(11, -0.3).unwrap();
            let f = |th: &ParamVector| {
                let (d, v, _) = ac.forward(th, &obs).unwrap();
                d.log_prob(&action) + 2.0 * d.entropy() + 3.0 * v
            };
            let numeric = central_diff(f, &theta, 1e-6);
            let (dist, _, cache) = ac.forward(&theta, &obs).unwrap();
            let lp = dist.log_prob_grad(&action);
            let ent = dist.entropy_grad();
            let combined = match (lp, ent) {
                (
                    DistGrad::Gaussian { mean: m1, log_std: s1 },
                    DistGrad::Gaussian { mean: m2, log_std: s2 },
                ) => DistGrad::Gaussian {
                    mean: m1.iter().zip(m2.iter()).map(|(a, b)| a + 2.0 * b).collect(),
                    log_std: s1.iter().zip(s2.iter()).map(|(a, b)| a + 2.0 * b).collect(),
                },
                (DistGrad::Categorical { logits: l1 }, DistGrad::Categorical { logits: l2 }) => {
                    DistGrad::Categorical {
                        logits: l1.iter().zip(l2.iter()).map(|(a, b)| a + 2.0 * b).collect(),
                    }
                }
                _ => unreachable!(),
            };
            let mut analytic = ParamVector::zeros(ac.param_count());
            ac.backward_into(&theta, &cache, Some(&combined), 3.0, 1.0, &mut analytic).unwrap();
            let err = max_rel_error_scaled(analytic.as_slice(), &numeric, 1e-4);
            assert!(err < 1e-5, "shared={} err={err}", ac.shared);
        }
    }
}
