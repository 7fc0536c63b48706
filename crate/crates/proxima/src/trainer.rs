//! The actor-critic training loop: N actors × T steps per iteration, K
//! epochs of shuffled minibatch ascent, behavior-policy snapshot swap, and
//! the per-iteration adaptive-KL / annealing bookkeeping, plus metrics and
//! checkpoint emission.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{make_env, Env};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, ParamVector, CHECKPOINT_MAGIC};
use crate::objectives::{
    combined_loss, kl_controller_update, trpo_diagnostics, KlControllerState, ObjectiveConfig,
    SampleBatch, SurrogateVariant,
};
use crate::policy::ActorCritic;
use crate::rollout::{build_advantages, Actor, Segment};

/// Full training configuration. Defaults mirror the continuous-control
/// benchmark hyperparameters (horizon 2048, Adam stepsize 3e-4, 10 epochs,
/// minibatch 64, γ 0.99, λ 0.95); the `*_preset` constructors scale the
/// batch down for the built-in toy tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env_name: String,
    /// Segment length T collected by each actor per iteration.
    pub horizon: usize,
    /// Number of parallel actors N.
    pub num_actors: usize,
    /// Optimization epochs K per iteration.
    pub epochs: usize,
    /// Minibatch size M; must divide N·T.
    pub minibatch_size: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub stepsize: f64,
    pub total_timesteps: usize,
    /// Linearly anneal stepsize and clip ε from 1× to 0× over training.
    pub anneal: bool,
    pub normalize_advantages: bool,
    pub seed: u64,
    pub objective: ObjectiveConfig,
    pub hidden_dims: Vec<usize>,
    pub log_std_init: f64,
    /// When set, the log-std vector follows LinearAnneal(start, end) over
    /// training and is excluded from gradient updates.
    pub log_std_anneal: Option<(f64, f64)>,
    /// Collect the N segments on worker threads. Results are written to
    /// per-actor slots, so the pooled batch is schedule-independent.
    pub parallel_actors: bool,
    /// Write a parameter checkpoint every this many iterations (0 = only
    /// the initial and final ones).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env_name: "point_mass".into(),
            horizon: 2048,
            num_actors: 1,
            epochs: 10,
            minibatch_size: 64,
            gamma: 0.99,
            lambda: 0.95,
            stepsize: 3e-4,
            total_timesteps: 1_000_000,
            anneal: false,
            normalize_advantages: true,
            seed: 0,
            objective: ObjectiveConfig::clip(0.2),
            hidden_dims: vec![64, 64],
            log_std_init: 0.0,
            log_std_anneal: None,
            parallel_actors: false,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Toy-scale continuous preset: T=256, N=4, 150k timesteps.
    pub fn point_mass_preset() -> Self {
        TrainConfig {
            env_name: "point_mass".into(),
            horizon: 256,
            num_actors: 4,
            total_timesteps: 150_000,
            ..Default::default()
        }
    }

    /// Toy-scale discrete preset: chain of `n` cells, entropy bonus 0.01.
    pub fn chain_preset(n: usize) -> Self {
        let mut objective = ObjectiveConfig::clip(0.2);
        objective.c2 = 0.01;
        TrainConfig {
            env_name: format!("chain:{n}"),
            horizon: 256,
            num_actors: 4,
            total_timesteps: 50_000,
            objective,
            ..Default::default()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.num_actors * self.horizon
    }

    pub fn iterations(&self) -> usize {
        self.total_timesteps.div_ceil(self.batch_size())
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.num_actors == 0 {
            return Err(Error::Config("horizon and num_actors must be at least 1".into()));
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.batch_size() {
            return Err(Error::Config(format!(
                "minibatch size {} must be in 1..=N·T ({})",
                self.minibatch_size,
                self.batch_size()
            )));
        }
        if self.batch_size() % self.minibatch_size != 0 {
            return Err(Error::Config(format!(
                "N·T ({}) must be divisible by the minibatch size {}",
                self.batch_size(),
                self.minibatch_size
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0,1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must be in [0,1], got {}", self.lambda)));
        }
        if self.stepsize < 0.0 {
            return Err(Error::Config(format!("stepsize must be >= 0, got {}", self.stepsize)));
        }
        if self.total_timesteps == 0 {
            return Err(Error::Config("total_timesteps must be positive".into()));
        }
        self.objective.validate()
    }
}

/// Per-iteration diagnostics. Loss fields are averages over the iteration's
/// minibatch updates and NaN when no update ran (K = 0). The wall time is
/// reported here but deliberately kept out of the metrics CSV so identical
/// seeded runs produce byte-identical files.
#[derive(Debug, Clone, Copy)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub timesteps_so_far: usize,
    pub mean_episode_return: f64,
    pub total_loss: f64,
    pub policy_term: f64,
    pub value_term: f64,
    pub entropy_term: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    pub beta: Option<f64>,
    pub wall_time_s: f64,
}

/// Column order of the metrics CSV (documented interface; header row
/// required).
pub const METRICS_COLUMNS: &[&str] = &[
    "iteration",
    "timesteps",
    "mean_episode_return",
    "total_loss",
    "policy_term",
    "value_term",
    "entropy_term",
    "mean_kl",
    "clip_fraction",
    "mean_ratio",
    "beta",
];

fn fmt_opt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.timesteps_so_far,
            fmt_opt(self.mean_episode_return),
            fmt_opt(self.total_loss),
            fmt_opt(self.policy_term),
            fmt_opt(self.value_term),
            fmt_opt(self.entropy_term),
            fmt_opt(self.mean_kl),
            fmt_opt(self.clip_fraction),
            fmt_opt(self.mean_ratio),
            self.beta.map(|b| format!("{b:?}")).unwrap_or_default(),
        )
    }
}

const EPISODE_RING: usize = 100;

pub struct Trainer {
    pub config: TrainConfig,
    pub ac: ActorCritic,
    pub theta: ParamVector,
    pub adam: AdamState,
    pub kl_state: Option<KlControllerState>,
    actors: Vec<Actor>,
    shuffle_rng: ChaCha8Rng,
    pub iteration: usize,
    pub timesteps: usize,
    episode_returns: VecDeque<f64>,
    /// Offending minibatch kept for the diagnostic dump after a numeric
    /// abort.
    failed_minibatch: Option<SampleBatch>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        // Fixed derivation order for all component seeds.
        let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
        let init_seed: u64 = seeder.random();
        let probe = make_env(&config.env_name, 0)?;
        let (obs_dim, action_space) = (probe.observation_dim(), probe.action_space());
        drop(probe);
        let ac = ActorCritic::new(
            obs_dim,
            action_space,
            config.hidden_dims.clone(),
            config.objective.shared_network,
        )?;
        let theta = ac.init(init_seed, config.log_std_init)?;
        let mut actors = Vec::with_capacity(config.num_actors);
        for _ in 0..config.num_actors {
            let env_seed: u64 = seeder.random();
            let rng_seed: u64 = seeder.random();
            actors.push(Actor::new(
                make_env(&config.env_name, env_seed)?,
                ChaCha8Rng::seed_from_u64(rng_seed),
            ));
        }
        let shuffle_rng = ChaCha8Rng::seed_from_u64(seeder.random());
        let adam = AdamState::new(theta.len(), config.stepsize.max(f64::MIN_POSITIVE));
        let kl_state = match config.objective.variant {
            SurrogateVariant::AdaptiveKl { beta_init, d_targ } => {
                Some(KlControllerState { beta: beta_init, d_targ })
            }
            _ => None,
        };
        Ok(Trainer {
            config,
            ac,
            theta,
            adam,
            kl_state,
            actors,
            shuffle_rng,
            iteration: 0,
            timesteps: 0,
            episode_returns: VecDeque::with_capacity(EPISODE_RING),
            failed_minibatch: None,
        })
    }

    /// Annealing progress in [0, 1]: 0 on the first iteration, exactly 1 on
    /// the final one (linear in timesteps so far).
    fn progress(&self) -> f64 {
        let n = self.config.iterations();
        if n <= 1 {
            0.0
        } else {
            (self.iteration as f64 / (n - 1) as f64).min(1.0)
        }
    }

    fn collect_all(&mut self) -> Result<(Vec<Segment>, Vec<Vec<f64>>)> {
        let ac = &self.ac;
        let theta = &self.theta;
        let horizon = self.config.horizon;
        let results: Vec<Result<(Segment, Vec<f64>)>> = if self.config.parallel_actors {
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .actors
                    .iter_mut()
                    .map(|actor| s.spawn(move || actor.collect_segment(ac, theta, horizon)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("actor thread panicked")).collect()
            })
        } else {
            self.actors
                .iter_mut()
                .map(|actor| actor.collect_segment(ac, theta, horizon))
                .collect()
        };
        let mut segments = Vec::with_capacity(results.len());
        let mut completed = Vec::with_capacity(results.len());
        for r in results {
            let (seg, eps) = r?;
            segments.push(seg);
            completed.push(eps);
        }
        Ok((segments, completed))
    }

    /// One full iteration: collect under the current parameters, estimate
    /// advantages once, run K shuffled-minibatch epochs of Adam ascent, then
    /// retune β (adaptive variant) and advance the annealing schedule.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        Ok(self.train_iteration_with_batch()?.0)
    }

    /// [`train_iteration`](Self::train_iteration), also handing back the
    /// pooled batch the iteration trained on (collected under the pre-update
    /// parameters) for objective-geometry diagnostics.
    pub fn train_iteration_with_batch(&mut self) -> Result<(IterationMetrics, SampleBatch)> {
        let start = Instant::now();
        let cfg = self.config.clone();
        let alpha = if cfg.anneal { 1.0 - self.progress() } else { 1.0 };
        if let Some((s, e)) = cfg.log_std_anneal {
            let v = s + (e - s) * self.progress();
            for i in self.ac.log_std_range() {
                self.theta.0[i] = v;
            }
        }
        let effective_stepsize = cfg.stepsize * alpha;
        let mut objective = cfg.objective;
        if cfg.anneal {
            objective = objective.with_scaled_epsilon(alpha);
        }
        if let Some(kl) = &self.kl_state {
            objective = objective.with_current_beta(kl.beta);
        }

        let (segments, completed) = self.collect_all()?;
        for eps in &completed {
            for &r in eps {
                if self.episode_returns.len() == EPISODE_RING {
                    self.episode_returns.pop_front();
                }
                self.episode_returns.push_back(r);
            }
        }
        let estimates =
            build_advantages(&segments, cfg.gamma, cfg.lambda, cfg.normalize_advantages)?;
        let pooled = SampleBatch::from_segments(&segments, &estimates);
        let nt = pooled.len();

        let mut sums = [0.0f64; 7];
        let mut updates = 0usize;
        let freeze_log_std = cfg.log_std_anneal.is_some();
        for _ in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..nt).collect();
            order.shuffle(&mut self.shuffle_rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let minibatch = pooled.select(chunk);
                let (report, mut grad) =
                    combined_loss(&minibatch, &self.ac, &self.theta, &objective).map_err(|e| {
                        if matches!(e, Error::Numeric(_)) {
                            self.failed_minibatch = Some(minibatch.clone());
                            Error::Numeric(format!("iteration {}: {e}", self.iteration))
                        } else {
                            e
                        }
                    })?;
                if freeze_log_std {
                    for i in self.ac.log_std_range() {
                        grad.0[i] = 0.0;
                    }
                }
                if effective_stepsize > 0.0 {
                    self.adam.stepsize = effective_stepsize;
                    adam_step(&mut self.adam, &mut self.theta, &grad, true)?;
                }
                sums[0] += report.total_loss;
                sums[1] += report.policy_term;
                sums[2] += report.value_term;
                sums[3] += report.entropy_term;
                sums[4] += report.mean_kl;
                sums[5] += report.clip_fraction;
                sums[6] += report.mean_ratio;
                updates += 1;
            }
        }

        // β for the *next* update, from the end-of-iteration divergence
        if let Some(state) = self.kl_state {
            let (_, d) = trpo_diagnostics(&pooled, &self.ac, &self.theta)?;
            self.kl_state = Some(kl_controller_update(&state, d));
        }

        self.iteration += 1;
        self.timesteps += nt;
        let avg = |i: usize| if updates > 0 { sums[i] / updates as f64 } else { f64::NAN };
        let mean_ret = if self.episode_returns.is_empty() {
            f64::NAN
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        };
        let metrics = IterationMetrics {
            iteration: self.iteration,
            timesteps_so_far: self.timesteps,
            mean_episode_return: mean_ret,
            total_loss: avg(0),
            policy_term: avg(1),
            value_term: avg(2),
            entropy_term: avg(3),
            mean_kl: avg(4),
            clip_fraction: avg(5),
            mean_ratio: avg(6),
            beta: match (&self.kl_state, &self.config.objective.variant) {
                (Some(kl), _) => Some(kl.beta),
                (None, SurrogateVariant::FixedKl { beta }) => Some(*beta),
                _ => None,
            },
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        Ok((metrics, pooled))
    }

    /// Mean return over the last (up to) 100 completed training episodes.
    pub fn recent_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            f64::NAN
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }

    fn dump_failed_minibatch(&self, dir: &Path) -> Result<Option<PathBuf>> {
        let Some(batch) = &self.failed_minibatch else {
            return Ok(None);
        };
        let path = dir.join("diagnostic_dump.txt");
        let mut f = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        let mut write = |s: String| -> Result<()> {
            f.write_all(s.as_bytes()).map_err(|e| Error::io(&path, e))
        };
        write(format!("offending minibatch at iteration {}\n", self.iteration))?;
        for i in 0..batch.len() {
            write(format!(
                "sample {i}: obs={:?} action={:?} adv={:?} v_targ={:?} old_lp={:?}\n",
                batch.observations[i],
                batch.actions[i],
                batch.advantages[i],
                batch.value_targets[i],
                batch.old_log_probs[i],
            ))?;
        }
        Ok(Some(path))
    }

    pub fn write_params(&self, path: &Path) -> Result<()> {
        crate::nn::write_param_block(path, &self.ac.to_param_block(&self.theta)?)
    }

    /// Serialize the complete training state (parameters, optimizer moments,
    /// controller, every RNG and environment state, episode ring) so a
    /// resumed run continues bit-identically.
    pub fn save_state(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        let line = |s: String, buf: &mut Vec<u8>| {
            buf.extend_from_slice(s.as_bytes());
            buf.push(b'\n');
        };
        line("trainstate 1".into(), &mut buf);
        line(format!("params {}", self.theta.len()), &mut buf);
        line(format!("iteration {} timesteps {}", self.iteration, self.timesteps), &mut buf);
        line(format!("adam {} {:?}", self.adam.step_count, self.adam.stepsize), &mut buf);
        match &self.kl_state {
            Some(k) => line(format!("kl {:?} {:?}", k.beta, k.d_targ), &mut buf),
            None => line("kl none".into(), &mut buf),
        }
        line(format!("rng shuffle {}", rng_text(&self.shuffle_rng)), &mut buf);
        line(format!("actors {}", self.actors.len()), &mut buf);
        for (i, a) in self.actors.iter().enumerate() {
            line(format!("actor {i} rng {}", rng_text(&a.rng)), &mut buf);
            line(format!("actor {i} env {}", floats_text(&a.env.state_blob())), &mut buf);
            match a.current_obs() {
                Some(o) => line(format!("actor {i} obs {}", floats_text(o)), &mut buf),
                None => line(format!("actor {i} obs none"), &mut buf),
            }
            line(format!("actor {i} running {:?}", a.running_return()), &mut buf);
        }
        let ring: Vec<f64> = self.episode_returns.iter().copied().collect();
        line(format!("ring {}", floats_text(&ring)), &mut buf);
        line("blobs theta m v".into(), &mut buf);
        for arr in [&self.theta.0, &self.adam.m, &self.adam.v] {
            for x in arr {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
    }

    /// Rebuild a trainer from a state file. The config must describe the
    /// same architecture that produced the state.
    pub fn load_state(config: TrainConfig, path: &Path) -> Result<Self> {
        let mut trainer = Trainer::new(config)?;
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!("{}: bad magic", path.display())));
        }
        let mut pos = 8;
        let next_line = |bytes: &[u8], pos: &mut usize| -> Result<String> {
            let nl = bytes[*pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("truncated state file".into()))?;
            let s = std::str::from_utf8(&bytes[*pos..*pos + nl])
                .map_err(|_| Error::Format("non-utf8 state line".into()))?
                .to_string();
            *pos += nl + 1;
            Ok(s)
        };
        let expect = |line: &str, prefix: &str| -> Result<String> {
            line.strip_prefix(prefix)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Format(format!("state line '{line}' missing '{prefix}'")))
        };
        let header = next_line(&bytes, &mut pos)?;
        if header != "trainstate 1" {
            return Err(Error::Format(format!("unsupported state header '{header}'")));
        }
        let n_params: usize = expect(&next_line(&bytes, &mut pos)?, "params")?
            .parse()
            .map_err(|_| Error::Format("bad params line".into()))?;
        if n_params != trainer.theta.len() {
            return Err(Error::Format(format!(
                "state has {n_params} parameters but config builds {}",
                trainer.theta.len()
            )));
        }
        let iter_line = next_line(&bytes, &mut pos)?;
        let toks: Vec<&str> = iter_line.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "iteration" || toks[2] != "timesteps" {
            return Err(Error::Format(format!("bad iteration line '{iter_line}'")));
        }
        trainer.iteration = toks[1].parse().map_err(|_| Error::Format("bad iteration".into()))?;
        trainer.timesteps = toks[3].parse().map_err(|_| Error::Format("bad timesteps".into()))?;
        let adam_line = expect(&next_line(&bytes, &mut pos)?, "adam")?;
        let toks: Vec<&str> = adam_line.split_whitespace().collect();
        trainer.adam.step_count = toks[0].parse().map_err(|_| Error::Format("bad adam".into()))?;
        trainer.adam.stepsize = parse_f64(toks.get(1))?;
        let kl_line = expect(&next_line(&bytes, &mut pos)?, "kl")?;
        trainer.kl_state = if kl_line == "none" {
            None
        } else {
            let toks: Vec<&str> = kl_line.split_whitespace().collect();
            Some(KlControllerState { beta: parse_f64(toks.first())?, d_targ: parse_f64(toks.get(1))? })
        };
        trainer.shuffle_rng = rng_from_text(&expect(&next_line(&bytes, &mut pos)?, "rng shuffle")?)?;
        let n_actors: usize = expect(&next_line(&bytes, &mut pos)?, "actors")?
            .parse()
            .map_err(|_| Error::Format("bad actors line".into()))?;
        if n_actors != trainer.actors.len() {
            return Err(Error::Format("actor count mismatch".into()));
        }
        for i in 0..n_actors {
            let rng = rng_from_text(&expect(&next_line(&bytes, &mut pos)?, &format!("actor {i} rng"))?)?;
            let envb = floats_from_text(&expect(&next_line(&bytes, &mut pos)?, &format!("actor {i} env"))?)?;
            let obs_line = expect(&next_line(&bytes, &mut pos)?, &format!("actor {i} obs"))?;
            let running = parse_f64(Some(
                &expect(&next_line(&bytes, &mut pos)?, &format!("actor {i} running"))?.as_str(),
            ))?;
            let actor = &mut trainer.actors[i];
            actor.rng = rng;
            actor.env.restore_blob(&envb)?;
            actor.set_current_obs(if obs_line == "none" {
                None
            } else {
                Some(floats_from_text(&obs_line)?)
            });
            actor.set_running_return(running);
        }
        let ring = floats_from_text(&expect(&next_line(&bytes, &mut pos)?, "ring")?)?;
        trainer.episode_returns = ring.into_iter().collect();
        let blob_header = next_line(&bytes, &mut pos)?;
        if blob_header != "blobs theta m v" {
            return Err(Error::Format(format!("bad blob header '{blob_header}'")));
        }
        let need = 3 * n_params * 8;
        if bytes.len() - pos != need {
            return Err(Error::Format("state blob size mismatch".into()));
        }
        let read_arr = |pos: &mut usize| -> Vec<f64> {
            let mut v = Vec::with_capacity(n_params);
            for _ in 0..n_params {
                let mut b = [0u8; 8];
                b.copy_from_slice(&bytes[*pos..*pos + 8]);
                v.push(f64::from_le_bytes(b));
                *pos += 8;
            }
            v
        };
        trainer.theta = ParamVector(read_arr(&mut pos));
        trainer.adam.m = read_arr(&mut pos);
        trainer.adam.v = read_arr(&mut pos);
        Ok(trainer)
    }
}

fn parse_f64(tok: Option<&&str>) -> Result<f64> {
    tok.ok_or_else(|| Error::Format("missing float".into()))?
        .parse()
        .map_err(|_| Error::Format("bad float".into()))
}

fn rng_text(rng: &ChaCha8Rng) -> String {
    let seed = rng.get_seed();
    let hex: String = seed.iter().map(|b| format!("{b:02x}")).collect();
    let wp = rng.get_word_pos();
    format!("{hex} {} {} {}", rng.get_stream(), wp as u64, (wp >> 64) as u64)
}

fn rng_from_text(text: &str) -> Result<ChaCha8Rng> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 4 || toks[0].len() != 64 {
        return Err(Error::Format(format!("bad rng state '{text}'")));
    }
    let mut seed = [0u8; 32];
    for i in 0..32 {
        seed[i] = u8::from_str_radix(&toks[0][2 * i..2 * i + 2], 16)
            .map_err(|_| Error::Format("bad rng seed hex".into()))?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    let stream: u64 = toks[1].parse().map_err(|_| Error::Format("bad rng stream".into()))?;
    let lo: u64 = toks[2].parse().map_err(|_| Error::Format("bad rng word pos".into()))?;
    let hi: u64 = toks[3].parse().map_err(|_| Error::Format("bad rng word pos".into()))?;
    rng.set_stream(stream);
    rng.set_word_pos((lo as u128) | ((hi as u128) << 64));
    Ok(rng)
}

fn floats_text(v: &[f64]) -> String {
    let mut s = format!("{}", v.len());
    for x in v {
        s.push_str(&format!(" {x:?}"));
    }
    s
}

fn floats_from_text(text: &str) -> Result<Vec<f64>> {
    let mut toks = text.split_whitespace();
    let n: usize = toks
        .next()
        .ok_or_else(|| Error::Format("missing float count".into()))?
        .parse()
        .map_err(|_| Error::Format("bad float count".into()))?;
    let v: Vec<f64> = toks
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad float '{t}'"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Format("float count mismatch".into()));
    }
    Ok(v)
}

/// Everything a completed `train` run leaves on disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub final_params_path: PathBuf,
    pub resume_path: PathBuf,
    pub manifest_path: PathBuf,
    pub final_return: f64,
}

/// Run the full loop: ⌈total/(N·T)⌉ iterations, appending one metrics row
/// per iteration and checkpointing on the configured cadence. `run_dir`
/// must already exist; the manifest lists every artifact written.
pub fn train(config: TrainConfig, run_dir: &Path) -> Result<RunArtifacts> {
    let mut trainer = Trainer::new(config)?;
    train_loop(&mut trainer, run_dir)
}

/// Continue a checkpointed run to its configured end.
pub fn train_resumed(config: TrainConfig, state_path: &Path, run_dir: &Path) -> Result<RunArtifacts> {
    let mut trainer = Trainer::load_state(config, state_path)?;
    train_loop(&mut trainer, run_dir)
}

fn train_loop(trainer: &mut Trainer, run_dir: &Path) -> Result<RunArtifacts> {
    let metrics_path = run_dir.join("metrics.csv");
    let mut artifacts: Vec<String> = vec!["metrics.csv".into()];
    let fresh = trainer.iteration == 0;
    let mut metrics_file = if fresh {
        let mut f = BufWriter::new(File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?);
        writeln!(f, "{}", METRICS_COLUMNS.join(",")).map_err(|e| Error::io(&metrics_path, e))?;
        f
    } else {
        // resumed runs append; a resume into a fresh directory starts a new
        // file with the header
        let f = File::options()
            .append(true)
            .create(true)
            .open(&metrics_path)
            .map_err(|e| Error::io(&metrics_path, e))?;
        let mut f = BufWriter::new(f);
        if f.get_ref().metadata().map(|m| m.len() == 0).unwrap_or(false) {
            writeln!(f, "{}", METRICS_COLUMNS.join(",")).map_err(|e| Error::io(&metrics_path, e))?;
        }
        f
    };
    if fresh {
        let init_path = run_dir.join("checkpoint_init.params");
        trainer.write_params(&init_path)?;
        artifacts.push("checkpoint_init.params".into());
    }
    let n_iters = trainer.config.iterations();
    while trainer.iteration < n_iters {
        let metrics = match trainer.train_iteration() {
            Ok(m) => m,
            Err(e) => {
                if let Some(dump) = trainer.dump_failed_minibatch(run_dir)? {
                    log::error!("numeric failure; minibatch dumped to {}", dump.display());
                }
                return Err(e);
            }
        };
        writeln!(metrics_file, "{}", metrics.csv_row()).map_err(|e| Error::io(&metrics_path, e))?;
        metrics_file.flush().map_err(|e| Error::io(&metrics_path, e))?;
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.iteration % every == 0 && trainer.iteration < n_iters {
            let name = format!("checkpoint_iter{}.params", trainer.iteration);
            trainer.write_params(&run_dir.join(&name))?;
            trainer.save_state(&run_dir.join("trainer_state.resume"))?;
            artifacts.push(name);
        }
    }
    let final_params = run_dir.join("checkpoint_final.params");
    trainer.write_params(&final_params)?;
    let resume_path = run_dir.join("trainer_state.resume");
    trainer.save_state(&resume_path)?;
    artifacts.push("checkpoint_final.params".into());
    artifacts.push("trainer_state.resume".into());

    let manifest_path = run_dir.join("manifest.txt");
    let mut listed: Vec<String> = Vec::new();
    if let Ok(existing) = std::fs::read_to_string(&manifest_path) {
        listed.extend(existing.lines().map(|s| s.to_string()));
    }
    for a in artifacts {
        if !listed.contains(&a) {
            listed.push(a);
        }
    }
    std::fs::write(&manifest_path, listed.join("\n") + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    Ok(RunArtifacts {
        run_dir: run_dir.to_path_buf(),
        metrics_path,
        final_params_path: final_params,
        resume_path,
        manifest_path,
        final_return: trainer.recent_return(),
    })
}

/// Average (and population std) of full-episode returns under the given
/// parameters. With `deterministic` the action is the distribution mode
/// instead of a sample; `seed` drives the sampling RNG only — start-state
/// randomness comes from the environment instance.
pub fn evaluate_policy(
    ac: &ActorCritic,
    theta: &ParamVector,
    env: &mut dyn Env,
    episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Config("evaluate_policy needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut total = 0.0;
        loop {
            let dist = ac.policy_dist(theta, &obs)?;
            let action = if deterministic { dist.mode() } else { dist.sample(&mut rng) };
            let step = env.step(&action)?;
            total += step.reward;
            if step.terminal || step.truncated {
                break;
            }
            obs = step.observation;
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ActionSpace;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            env_name: "chain:5".into(),
            horizon: 16,
            num_actors: 2,
            epochs: 2,
            minibatch_size: 8,
            total_timesteps: 96,
            hidden_dims: vec![8],
            ..TrainConfig::chain_preset(5)
        }
    }

    #[test]
    fn validate_rejects_bad_minibatch() {
        let mut c = tiny_config();
        c.minibatch_size = 7; // 32 % 7 != 0
        assert!(c.validate().is_err());
        c.minibatch_size = 64; // > N·T
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_epochs_leaves_theta_unchanged() {
        let mut c = tiny_config();
        c.epochs = 0;
        let mut t = Trainer::new(c).unwrap();
        let before = t.theta.clone();
        let m = t.train_iteration().unwrap();
        assert_eq!(t.theta, before);
        assert!(m.total_loss.is_nan());
        assert_eq!(m.timesteps_so_far, 32);
    }

    #[test]
    fn zero_stepsize_leaves_theta_unchanged() {
        let mut c = tiny_config();
        c.stepsize = 0.0;
        let mut t = Trainer::new(c).unwrap();
        let before = t.theta.clone();
        t.train_iteration().unwrap();
        t.train_iteration().unwrap();
        assert_eq!(t.theta, before);
    }

    #[test]
    fn update_count_is_k_times_nt_over_m() {
        let c = tiny_config();
        let mut t = Trainer::new(c.clone()).unwrap();
        t.train_iteration().unwrap();
        assert_eq!(t.adam.step_count, (c.epochs * c.batch_size() / c.minibatch_size) as u64);
    }

    #[test]
    fn identical_seeds_produce_identical_metrics() {
        let run = || {
            let mut t = Trainer::new(tiny_config()).unwrap();
            (0..3).map(|_| t.train_iteration().unwrap().csv_row()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parallel_and_sequential_actors_agree() {
        let mut cs = tiny_config();
        cs.parallel_actors = false;
        let mut cp = tiny_config();
        cp.parallel_actors = true;
        let mut ts = Trainer::new(cs).unwrap();
        let mut tp = Trainer::new(cp).unwrap();
        for _ in 0..3 {
            let ms = ts.train_iteration().unwrap();
            let mp = tp.train_iteration().unwrap();
            assert_eq!(ms.csv_row(), mp.csv_row());
        }
        assert_eq!(ts.theta, tp.theta);
    }

    #[test]
    fn anneal_reaches_end_values_exactly() {
        let mut c = tiny_config();
        c.anneal = true;
        c.total_timesteps = 4 * c.batch_size();
        c.log_std_anneal = Some((-0.7, -1.6));
        c.env_name = "point_mass".into();
        c.objective.c2 = 0.0;
        let mut t = Trainer::new(c.clone()).unwrap();
        let n = c.iterations();
        for i in 0..n {
            t.train_iteration().unwrap();
            if i == n - 1 {
                // final iteration ran with α = 0 and the annealed end log-std
                for idx in t.ac.log_std_range() {
                    assert_eq!(t.theta.0[idx], -1.6);
                }
            }
        }
        assert_eq!(t.iteration, n);
    }

    #[test]
    fn save_and_load_state_resumes_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let state = dir.path().join("t.resume");
        let c = tiny_config();
        // uninterrupted: 5 iterations
        let mut full = Trainer::new(c.clone()).unwrap();
        let mut full_rows = Vec::new();
        for _ in 0..5 {
            full_rows.push(full.train_iteration().unwrap().csv_row());
        }
        // interrupted after 2
        let mut first = Trainer::new(c.clone()).unwrap();
        let mut rows = Vec::new();
        for _ in 0..2 {
            rows.push(first.train_iteration().unwrap().csv_row());
        }
        first.save_state(&state).unwrap();
        drop(first);
        let mut second = Trainer::load_state(c, &state).unwrap();
        for _ in 0..3 {
            rows.push(second.train_iteration().unwrap().csv_row());
        }
        assert_eq!(rows, full_rows);
        assert_eq!(second.theta, full.theta);
    }

    #[test]
    fn train_writes_artifacts_and_exact_iteration_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny_config();
        c.total_timesteps = c.batch_size(); // exactly one iteration
        let arts = train(c, dir.path()).unwrap();
        let metrics = std::fs::read_to_string(&arts.metrics_path).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines.len(), 2, "header plus one row token: {metrics}");
        assert!(lines[0].starts_with("iteration,timesteps,"));
        assert!(arts.final_params_path.exists());
        assert!(arts.resume_path.exists());
        let manifest = std::fs::read_to_string(&arts.manifest_path).unwrap();
        assert!(manifest.contains("metrics.csv"));
        assert!(manifest.contains("checkpoint_final.params"));
    }

    #[test]
    fn evaluate_zero_policy_from_goal_is_zero_return() {
        use crate::envs::PointMassEnv;
        let ac = ActorCritic::new(4, ActionSpace::Continuous { dim: 2 }, vec![8], false).unwrap();
        let theta = ParamVector::zeros(ac.param_count()); // mean ≡ 0
        let mut env = PointMassEnv::new(0);
        // deterministic mode drives force 0 from wherever reset lands; pin
        // the start at the goal by restoring a state blob
        env.set_state([0.0, 0.0], [0.0, 0.0]);
        let mut total = 0.0;
        for _ in 0..crate::envs::POINT_MASS_HORIZON {
            let dist = ac.policy_dist(&theta, &[0.0, 0.0, 0.0, 0.0]).unwrap();
            let a = dist.mode();
            let r = env.step(&a).unwrap();
            total += r.reward;
        }
        assert_eq!(total, 0.0);
    }

    #[test]
    fn evaluate_single_episode_std_is_zero() {
        let c = tiny_config();
        let t = Trainer::new(c).unwrap();
        let mut env = make_env("chain:5", 7).unwrap();
        let (_, std) = evaluate_policy(&t.ac, &t.theta, env.as_mut(), 1, false, 3).unwrap();
        assert_eq!(std, 0.0);
    }
}
