use super::{Action, ActionSpace, Env, StepResult};
use crate::error::{Error, Result};

/// 1-D chain of `n` cells with two deterministic actions (0 = left,
/// 1 = right). Entering the rightmost cell pays 1 and terminates; entering
/// the leftmost cell pays the distractor reward 0.01 and terminates. All
/// other transitions pay 0. Episodes start at the center cell and are
/// truncated after 2·n steps. Observations are one-hot position encodings.
pub struct ChainEnv {
    n: usize,
    pos: usize,
    t: usize,
    needs_reset: bool,
}

impl ChainEnv {
    pub fn new(n: usize, _seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("chain env needs at least 3 states, got {n}")));
        }
        Ok(ChainEnv { n, pos: n / 2, t: 0, needs_reset: true })
    }

    pub fn start_cell(&self) -> usize {
        self.n / 2
    }

    fn obs(&self) -> Vec<f64> {
        let mut o = vec![0.0; self.n];
        o[self.pos] = 1.0;
        o
    }

    /// Place the walker on an exact cell (used by oracle checks).
    pub fn set_cell(&mut self, cell: usize) {
        assert!(cell < self.n);
        self.pos = cell;
        self.t = 0;
        self.needs_reset = false;
    }
}

impl Env for ChainEnv {
    fn observation_dim(&self) -> usize {
        self.n
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: 2 }
    }

    fn max_episode_length(&self) -> usize {
        2 * self.n
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.n / 2;
        self.t = 0;
        self.needs_reset = false;
        self.obs()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::Usage("chain stepped after episode end without reset".into()));
        }
        let a = match action {
            Action::Discrete(a) if *a < 2 => *a,
            Action::Discrete(a) => {
                return Err(Error::Config(format!("chain action must be 0 or 1, got {a}")))
            }
            Action::Continuous(_) => {
                return Err(Error::Config("chain expects discrete actions".into()))
            }
        };
        self.pos = if a == 0 { self.pos.saturating_sub(1) } else { (self.pos + 1).min(self.n - 1) };
        self.t += 1;
        let (reward, terminal) = if self.pos == self.n - 1 {
            (1.0, true)
        } else if self.pos == 0 {
            (0.01, true)
        } else {
            (0.0, false)
        };
        let truncated = !terminal && self.t >= 2 * self.n;
        if terminal || truncated {
            self.needs_reset = true;
        }
        Ok(StepResult { observation: self.obs(), reward, terminal, truncated })
    }

    fn state_blob(&self) -> Vec<f64> {
        vec![self.pos as f64, self.t as f64, self.needs_reset as u8 as f64]
    }

    fn restore_blob(&mut self, blob: &[f64]) -> Result<()> {
        if blob.len() != 3 {
            return Err(Error::Format(format!("chain state blob wants 3 entries, got {}", blob.len())));
        }
        self.pos = blob[0] as usize;
        self.t = blob[1] as usize;
        self.needs_reset = blob[2] != 0.0;
        Ok(())
    }
}
