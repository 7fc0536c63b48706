//! Built-in episodic environments with analytically tractable optima.
//!
//! Both tasks are deterministic given their construction seed and action
//! sequence. Episodes end either by a true terminal transition or by the
//! time limit (`truncated`); the two are reported separately because
//! advantage estimation bootstraps through time-limit cuts but not through
//! terminals.

mod chain;
mod oracle;
mod point_mass;

pub use chain::ChainEnv;
pub use oracle::{
    chain_optimal_actions, chain_optimal_value, point_mass_grid_dp_value, point_mass_optimal_return,
    point_mass_pd_controller, PD_GAIN_POS, PD_GAIN_VEL,
};
pub use point_mass::{PointMassEnv, POINT_MASS_HORIZON};

use crate::error::{Error, Result};

/// An action of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpace {
    Continuous { dim: usize },
    Discrete { n: usize },
}

/// One transition's outcome. `terminal` and `truncated` are never both set
/// by the built-in tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

pub trait Env: Send {
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn max_episode_length(&self) -> usize;

    /// Start a new episode and return its first observation.
    fn reset(&mut self) -> Vec<f64>;

    /// Advance one step. Stepping after a terminal/truncated transition
    /// without an intervening reset is a usage error.
    fn step(&mut self, action: &Action) -> Result<StepResult>;

    /// Full internal state (including RNG position) as flat floats, for
    /// exact checkpoint resume.
    fn state_blob(&self) -> Vec<f64>;
    fn restore_blob(&mut self, blob: &[f64]) -> Result<()>;
}

/// Build an environment from its config name: `point_mass` or `chain:<n>`.
pub fn make_env(name: &str, seed: u64) -> Result<Box<dyn Env>> {
    if name == "point_mass" {
        return Ok(Box::new(PointMassEnv::new(seed)));
    }
    if let Some(n) = name.strip_prefix("chain:") {
        let n: usize = n
            .parse()
            .map_err(|_| Error::Config(format!("bad chain size in env name '{name}'")))?;
        return Ok(Box::new(ChainEnv::new(n, seed)?));
    }
    Err(Error::Config(format!("unknown env '{name}' (expected point_mass or chain:<n>)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_env_parses_names() {
        assert_eq!(make_env("point_mass", 0).unwrap().observation_dim(), 4);
        assert_eq!(make_env("chain:7", 0).unwrap().observation_dim(), 7);
        assert!(make_env("chain:x", 0).is_err());
        assert!(make_env("mujoco", 0).is_err());
    }

    #[test]
    fn determinism_same_seed_same_trajectory() {
        for name in ["point_mass", "chain:5"] {
            let mut a = make_env(name, 99).unwrap();
            let mut b = make_env(name, 99).unwrap();
            let space = a.action_space();
            let act = move |i: usize| match space {
                ActionSpace::Continuous { dim } => {
                    Action::Continuous((0..dim).map(|d| ((i + d) as f64 * 0.37).sin()).collect())
                }
                ActionSpace::Discrete { .. } => Action::Discrete(i % 2),
            };
            let (oa, ob) = (a.reset(), b.reset());
            assert_eq!(oa, ob);
            for i in 0..30 {
                let ra = a.step(&act(i)).unwrap();
                let rb = b.step(&act(i)).unwrap();
                assert_eq!(ra, rb);
                if ra.terminal || ra.truncated {
                    assert_eq!(a.reset(), b.reset());
                }
            }
        }
    }

    #[test]
    fn state_blob_roundtrip_continues_identically() {
        let mut a = make_env("point_mass", 4).unwrap();
        a.reset();
        let act = Action::Continuous(vec![0.3, -0.2]);
        for _ in 0..7 {
            a.step(&act).unwrap();
        }
        let blob = a.state_blob();
        let r1 = a.step(&act).unwrap();
        let mut b = make_env("point_mass", 0).unwrap();
        b.restore_blob(&blob).unwrap();
        let r2 = b.step(&act).unwrap();
        assert_eq!(r1, r2);
    }
}
