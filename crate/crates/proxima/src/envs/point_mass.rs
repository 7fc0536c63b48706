use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Env, StepResult};
use crate::error::{Error, Result};
use rand::Rng;

pub const POINT_MASS_HORIZON: usize = 100;
const DT_POS: f64 = 0.05;
const VEL_DECAY: f64 = 0.95;
const FORCE_GAIN: f64 = 0.1;
const ACTION_COST: f64 = 0.01;

/// 2-D point mass steered toward the origin.
///
/// State is (position, velocity) ∈ ℝ⁴, the action is a force in [−1,1]²
/// (out-of-range components are clamped, not rejected). Dynamics per step:
/// `x ← x + 0.05·v`, then `v ← 0.95·v + 0.1·a`. The reward is
/// `−‖x‖² − 0.01‖a‖²` evaluated at the post-step position and the clamped
/// action. Episodes start at a uniformly random position in [−1,1]² with
/// zero velocity and are truncated (never terminal) after 100 steps.
pub struct PointMassEnv {
    pos: [f64; 2],
    vel: [f64; 2],
    t: usize,
    needs_reset: bool,
    rng: ChaCha8Rng,
}

impl PointMassEnv {
    pub fn new(seed: u64) -> Self {
        PointMassEnv {
            pos: [0.0; 2],
            vel: [0.0; 2],
            t: 0,
            needs_reset: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    /// Place the mass at an exact state (used by tests and oracles).
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.t = 0;
        self.needs_reset = false;
    }
}

impl Env for PointMassEnv {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous { dim: 2 }
    }

    fn max_episode_length(&self) -> usize {
        POINT_MASS_HORIZON
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = [
            2.0 * self.rng.random::<f64>() - 1.0,
            2.0 * self.rng.random::<f64>() - 1.0,
        ];
        self.vel = [0.0; 2];
        self.t = 0;
        self.needs_reset = false;
        self.obs()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::Usage("point_mass stepped after episode end without reset".into()));
        }
        let a = match action {
            Action::Continuous(a) if a.len() == 2 => [a[0].clamp(-1.0, 1.0), a[1].clamp(-1.0, 1.0)],
            Action::Continuous(a) => {
                return Err(Error::Config(format!("point_mass expects 2-D actions, got {}", a.len())))
            }
            Action::Discrete(_) => {
                return Err(Error::Config("point_mass expects continuous actions".into()))
            }
        };
        for d in 0..2 {
            self.pos[d] += DT_POS * self.vel[d];
            self.vel[d] = VEL_DECAY * self.vel[d] + FORCE_GAIN * a[d];
        }
        let reward = -(self.pos[0] * self.pos[0] + self.pos[1] * self.pos[1])
            - ACTION_COST * (a[0] * a[0] + a[1] * a[1]);
        self.t += 1;
        let truncated = self.t >= POINT_MASS_HORIZON;
        if truncated {
            self.needs_reset = true;
        }
        Ok(StepResult { observation: self.obs(), reward, terminal: false, truncated })
    }

    fn state_blob(&self) -> Vec<f64> {
        let mut b = vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.t as f64,
            self.needs_reset as u8 as f64,
        ];
        let seed = self.rng.get_seed();
        for chunk in seed.chunks(8) {
            let mut a = [0u8; 8];
            a.copy_from_slice(chunk);
            b.push(f64::from_bits(u64::from_le_bytes(a)));
        }
        b.push(f64::from_bits(self.rng.get_stream()));
        let wp = self.rng.get_word_pos();
        b.push(f64::from_bits(wp as u64));
        b.push(f64::from_bits((wp >> 64) as u64));
        b
    }

    fn restore_blob(&mut self, blob: &[f64]) -> Result<()> {
        if blob.len() != 13 {
            return Err(Error::Format(format!("point_mass state blob wants 13 entries, got {}", blob.len())));
        }
        self.pos = [blob[0], blob[1]];
        self.vel = [blob[2], blob[3]];
        self.t = blob[4] as usize;
        self.needs_reset = blob[5] != 0.0;
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            chunk.copy_from_slice(&blob[6 + i].to_bits().to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(blob[10].to_bits());
        let wp = (blob[11].to_bits() as u128) | ((blob[12].to_bits() as u128) << 64);
        rng.set_word_pos(wp);
        self.rng = rng;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_at_goal() {
        let mut env = PointMassEnv::new(0);
        env.set_state([0.0, 0.0], [0.0, 0.0]);
        for _ in 0..10 {
            let r = env.step(&Action::Continuous(vec![0.0, 0.0])).unwrap();
            assert_eq!(r.reward, 0.0);
        }
    }

    #[test]
    fn actions_are_clamped() {
        let mut a = PointMassEnv::new(0);
        let mut b = PointMassEnv::new(0);
        a.set_state([0.5, -0.5], [0.1, 0.2]);
        b.set_state([0.5, -0.5], [0.1, 0.2]);
        let ra = a.step(&Action::Continuous(vec![2.0, 2.0])).unwrap();
        let rb = b.step(&Action::Continuous(vec![1.0, 1.0])).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn truncates_at_horizon_without_terminal() {
        let mut env = PointMassEnv::new(1);
        env.reset();
        let act = Action::Continuous(vec![0.1, 0.0]);
        for t in 1..=POINT_MASS_HORIZON {
            let r = env.step(&act).unwrap();
            assert!(!r.terminal);
            assert_eq!(r.truncated, t == POINT_MASS_HORIZON);
        }
        assert!(env.step(&act).is_err());
        env.reset();
        env.step(&act).unwrap();
    }

    #[test]
    fn reward_stays_in_bound() {
        // |pos| can grow to at most 1 + H·0.05·v_max with v_max = 2
        let mut env = PointMassEnv::new(3);
        env.reset();
        let max_pos_sq = {
            let m = 1.0 + POINT_MASS_HORIZON as f64 * DT_POS * 2.0;
            2.0 * m * m
        };
        for _ in 0..POINT_MASS_HORIZON {
            let r = env.step(&Action::Continuous(vec![1.0, -1.0])).unwrap();
            assert!(r.reward <= 0.0 && r.reward >= -(max_pos_sq + 0.02));
        }
    }
}
