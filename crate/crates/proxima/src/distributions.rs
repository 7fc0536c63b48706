//! Policy output distributions: diagonal Gaussian for continuous actions and
//! categorical for discrete actions, with log-probability, sampling,
//! entropy, KL divergence, and closed-form gradients with respect to the
//! distribution parameters.
//!
//! Probability ratios elsewhere in the crate are always formed in the log
//! domain from these log-probabilities, never by dividing densities.
//!
//! Shape mismatches (action dimension vs distribution dimension) are
//! programmer errors and panic; mixing distribution families in a KL call is
//! a configuration error and returns `Err`.

use crate::envs::Action;
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Clamp bounds applied to log standard deviations before exponentiation.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

fn clamped(ls: f64) -> (f64, f64) {
    // (clamped value, derivative of the clamp)
    if ls <= LOG_STD_MIN {
        (LOG_STD_MIN, 0.0)
    } else if ls >= LOG_STD_MAX {
        (LOG_STD_MAX, 0.0)
    } else {
        (ls, 1.0)
    }
}

/// Diagonal Gaussian with state-dependent mean and state-independent
/// log standard deviations (one trainable entry per action dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean/log_std length mismatch");
        DiagGaussian { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        assert_eq!(action.len(), self.dim(), "action dimension mismatch");
        let mut lp = 0.0;
        for d in 0..self.dim() {
            let (s, _) = clamped(self.log_std[d]);
            let sigma = s.exp();
            let z = (action[d] - self.mean[d]) / sigma;
            lp += -0.5 * LN_2PI - s - 0.5 * z * z;
        }
        lp
    }

    /// Gradient of `log_prob` with respect to (mean, log_std).
    pub fn log_prob_grad(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(action.len(), self.dim(), "action dimension mismatch");
        let mut d_mean = vec![0.0; self.dim()];
        let mut d_ls = vec![0.0; self.dim()];
        for d in 0..self.dim() {
            let (s, pass) = clamped(self.log_std[d]);
            let sigma = s.exp();
            let z = (action[d] - self.mean[d]) / sigma;
            d_mean[d] = z / sigma;
            d_ls[d] = pass * (z * z - 1.0);
        }
        (d_mean, d_ls)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                let (s, _) = clamped(self.log_std[d]);
                let z: f64 = rng.sample(StandardNormal);
                self.mean[d] + s.exp() * z
            })
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|&ls| clamped(ls).0 + 0.5 * (LN_2PI + 1.0))
            .sum()
    }

    /// Gradient of entropy w.r.t. (mean, log_std): (0, 1) per dimension.
    pub fn entropy_grad(&self) -> (Vec<f64>, Vec<f64>) {
        let d_mean = vec![0.0; self.dim()];
        let d_ls = self.log_std.iter().map(|&ls| clamped(ls).1).collect();
        (d_mean, d_ls)
    }

    /// KL(self ‖ q), closed form.
    pub fn kl(&self, q: &DiagGaussian) -> f64 {
        assert_eq!(self.dim(), q.dim(), "distribution dimension mismatch");
        let mut kl = 0.0;
        for d in 0..self.dim() {
            let (sp, _) = clamped(self.log_std[d]);
            let (sq, _) = clamped(q.log_std[d]);
            let vp = (2.0 * sp).exp();
            let vq = (2.0 * sq).exp();
            let dm = self.mean[d] - q.mean[d];
            kl += sq - sp + (vp + dm * dm) / (2.0 * vq) - 0.5;
        }
        kl
    }

    /// Gradient of KL(self ‖ q) w.r.t. q's (mean, log_std).
    pub fn kl_grad_wrt_q(&self, q: &DiagGaussian) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(self.dim(), q.dim(), "distribution dimension mismatch");
        let mut d_mean = vec![0.0; q.dim()];
        let mut d_ls = vec![0.0; q.dim()];
        for d in 0..self.dim() {
            let (sp, _) = clamped(self.log_std[d]);
            let (sq, pass) = clamped(q.log_std[d]);
            let vp = (2.0 * sp).exp();
            let vq = (2.0 * sq).exp();
            let dm = self.mean[d] - q.mean[d];
            d_mean[d] = (q.mean[d] - self.mean[d]) / vq;
            d_ls[d] = pass * (1.0 - (vp + dm * dm) / vq);
        }
        (d_mean, d_ls)
    }
}

/// Categorical distribution over `logits.len()` discrete actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub logits: Vec<f64>,
}

impl Categorical {
    pub fn new(logits: Vec<f64>) -> Self {
        assert!(!logits.is_empty(), "categorical needs at least one logit");
        Categorical { logits }
    }

    pub fn n(&self) -> usize {
        self.logits.len()
    }

    /// Stable log-softmax of the logits.
    pub fn log_probs(&self) -> Vec<f64> {
        let m = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + self.logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        self.logits.iter().map(|l| l - lse).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs().iter().map(|lp| lp.exp()).collect()
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        assert!(action < self.n(), "action index out of range");
        self.log_probs()[action]
    }

    /// Gradient of `log_prob(action)` w.r.t. the logits: δ_ik − p_i.
    pub fn log_prob_grad(&self, action: usize) -> Vec<f64> {
        assert!(action < self.n(), "action index out of range");
        let p = self.probs();
        (0..self.n()).map(|i| (i == action) as u8 as f64 - p[i]).collect()
    }

    /// Inverse-CDF draw from a single uniform variate.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let p = self.probs();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        self.n() - 1
    }

    pub fn entropy(&self) -> f64 {
        let lp = self.log_probs();
        -lp.iter().map(|l| l.exp() * l).sum::<f64>()
    }

    /// Gradient of entropy w.r.t. the logits: −p_j (log p_j + H).
    pub fn entropy_grad(&self) -> Vec<f64> {
        let lp = self.log_probs();
        let h = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
        lp.iter().map(|l| -l.exp() * (l + h)).collect()
    }

    pub fn kl(&self, q: &Categorical) -> f64 {
        assert_eq!(self.n(), q.n(), "distribution dimension mismatch");
        let lp = self.log_probs();
        let lq = q.log_probs();
        lp.iter().zip(lq.iter()).map(|(a, b)| a.exp() * (a - b)).sum()
    }

    /// Gradient of KL(self ‖ q) w.r.t. q's logits: q_j − p_j.
    pub fn kl_grad_wrt_q(&self, q: &Categorical) -> Vec<f64> {
        assert_eq!(self.n(), q.n(), "distribution dimension mismatch");
        let p = self.probs();
        let pq = q.probs();
        (0..self.n()).map(|i| pq[i] - p[i]).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.n() {
            if self.logits[i] > self.logits[best] {
                best = i;
            }
        }
        best
    }
}

/// Either policy distribution family.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Gaussian(DiagGaussian),
    Categorical(Categorical),
}

/// Gradient with respect to a distribution's parameters, same family shape.
#[derive(Debug, Clone)]
pub enum DistGrad {
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
    Categorical { logits: Vec<f64> },
}

impl Dist {
    pub fn log_prob(&self, action: &Action) -> f64 {
        match (self, action) {
            (Dist::Gaussian(g), Action::Continuous(a)) => g.log_prob(a),
            (Dist::Categorical(c), Action::Discrete(k)) => c.log_prob(*k),
            _ => panic!("action kind does not match distribution family"),
        }
    }

    pub fn log_prob_grad(&self, action: &Action) -> DistGrad {
        match (self, action) {
            (Dist::Gaussian(g), Action::Continuous(a)) => {
                let (mean, log_std) = g.log_prob_grad(a);
                DistGrad::Gaussian { mean, log_std }
            }
            (Dist::Categorical(c), Action::Discrete(k)) => {
                DistGrad::Categorical { logits: c.log_prob_grad(*k) }
            }
            _ => panic!("action kind does not match distribution family"),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Action {
        match self {
            Dist::Gaussian(g) => Action::Continuous(g.sample(rng)),
            Dist::Categorical(c) => Action::Discrete(c.sample(rng)),
        }
    }

    /// Distribution mode, for deterministic evaluation.
    pub fn mode(&self) -> Action {
        match self {
            Dist::Gaussian(g) => Action::Continuous(g.mean.clone()),
            Dist::Categorical(c) => Action::Discrete(c.argmax()),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            Dist::Gaussian(g) => g.entropy(),
            Dist::Categorical(c) => c.entropy(),
        }
    }

    pub fn entropy_grad(&self) -> DistGrad {
        match self {
            Dist::Gaussian(g) => {
                let (mean, log_std) = g.entropy_grad();
                DistGrad::Gaussian { mean, log_std }
            }
            Dist::Categorical(c) => DistGrad::Categorical { logits: c.entropy_grad() },
        }
    }
}

/// KL(p ‖ q). The first argument is the old policy; the penalty measures the
/// divergence from old to new.
pub fn kl(p: &Dist, q: &Dist) -> Result<f64> {
    match (p, q) {
        (Dist::Gaussian(a), Dist::Gaussian(b)) => Ok(a.kl(b)),
        (Dist::Categorical(a), Dist::Categorical(b)) => Ok(a.kl(b)),
        _ => Err(Error::Config("KL between different distribution families".into())),
    }
}

/// Gradient of KL(p ‖ q) with respect to q's parameters.
pub fn kl_grad_wrt_q(p: &Dist, q: &Dist) -> Result<DistGrad> {
    match (p, q) {
        (Dist::Gaussian(a), Dist::Gaussian(b)) => {
            let (mean, log_std) = a.kl_grad_wrt_q(b);
            Ok(DistGrad::Gaussian { mean, log_std })
        }
        (Dist::Categorical(a), Dist::Categorical(b)) => {
            Ok(DistGrad::Categorical { logits: a.kl_grad_wrt_q(b) })
        }
        _ => Err(Error::Config("KL between different distribution families".into())),
    }
}
