//! Ablation suite: trains every (environment, variant, seed) combination at
//! a fixed timestep budget, scores each run by the mean return of its last
//! 100 training episodes, and normalizes scores per environment so that a
//! random policy maps to 0 and the invocation's best run maps to 1.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::variant_label;
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::objectives::SurrogateVariant;
use crate::policy::ActorCritic;
use crate::trainer::{evaluate_policy, TrainConfig, Trainer};

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub envs: Vec<String>,
    pub variants: Vec<SurrogateVariant>,
    pub seeds: Vec<u64>,
    /// Training timesteps per cell.
    pub budget: usize,
    /// Everything except env/variant/seed/budget comes from here.
    pub base: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub env: String,
    pub variant: String,
    pub seed: u64,
    /// Mean return over the last 100 training episodes.
    pub score: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub cells: Vec<CellResult>,
    /// env → random-policy anchor (normalized 0).
    pub random_baseline: BTreeMap<String, f64>,
    /// env → best final score in this invocation (normalized 1).
    pub best: BTreeMap<String, f64>,
    /// (variant, env) → mean normalized score over seeds.
    pub per_variant_env: BTreeMap<(String, String), f64>,
    /// variant → normalized score pooled over envs × seeds.
    pub pooled: BTreeMap<String, f64>,
    /// (env, variant, seed, message) for cells that failed to train.
    pub failures: Vec<(String, String, u64, String)>,
}

impl SuiteResult {
    pub fn cells_csv(&self) -> String {
        let mut s = String::from("env,variant,seed,score,normalized\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{:?},{:?}\n",
                c.env, c.variant, c.seed, c.score, c.normalized
            ));
        }
        s
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        s.push_str("per-env anchors (random -> 0, best -> 1):\n");
        for (env, rand) in &self.random_baseline {
            s.push_str(&format!(
                "  {env}: random {rand:.4}, best {:.4}\n",
                self.best.get(env).copied().unwrap_or(f64::NAN)
            ));
        }
        s.push_str("\nnormalized scores per (variant, env):\n");
        for ((variant, env), score) in &self.per_variant_env {
            s.push_str(&format!("  {variant:<22} {env:<12} {score:+.3}\n"));
        }
        s.push_str("\npooled normalized score per variant:\n");
        let mut pooled: Vec<(&String, &f64)> = self.pooled.iter().collect();
        pooled.sort_by(|a, b| b.1.partial_cmp(a.1).unwrap_or(std::cmp::Ordering::Equal));
        for (variant, score) in pooled {
            s.push_str(&format!("  {variant:<22} {score:+.3}\n"));
        }
        if !self.failures.is_empty() {
            s.push_str("\nfailed cells:\n");
            for (env, variant, seed, msg) in &self.failures {
                s.push_str(&format!("  {env}/{variant}/seed{seed}: {msg}\n"));
            }
        }
        s
    }
}

fn cell_config(spec: &SuiteSpec, env: &str, variant: SurrogateVariant, seed: u64) -> TrainConfig {
    let mut cfg = spec.base.clone();
    cfg.env_name = env.to_string();
    cfg.objective.variant = variant;
    cfg.seed = seed;
    cfg.total_timesteps = spec.budget;
    cfg.checkpoint_every = 0;
    cfg
}

/// Stochastic evaluation of a freshly initialized policy over 100 episodes,
/// the per-env normalization anchor.
fn random_policy_score(spec: &SuiteSpec, env_name: &str) -> Result<f64> {
    let mut seeder = ChaCha8Rng::seed_from_u64(spec.base.seed);
    use rand::Rng;
    let init_seed: u64 = seeder.random();
    let env_seed: u64 = seeder.random();
    let eval_seed: u64 = seeder.random();
    let mut env = make_env(env_name, env_seed)?;
    let ac = ActorCritic::new(
        env.observation_dim(),
        env.action_space(),
        spec.base.hidden_dims.clone(),
        spec.base.objective.shared_network,
    )?;
    let theta = ac.init(init_seed, spec.base.log_std_init)?;
    let (mean, _) = evaluate_policy(&ac, &theta, env.as_mut(), 100, false, eval_seed)?;
    Ok(mean)
}

/// Train all cells and assemble the normalized table. Individual cell
/// failures are recorded and excluded rather than aborting the suite.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteResult> {
    if spec.envs.is_empty() || spec.variants.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("suite needs at least one env, variant, and seed".into()));
    }
    let mut random_baseline = BTreeMap::new();
    let mut failures = Vec::new();
    let mut usable_envs = Vec::new();
    for env in &spec.envs {
        match random_policy_score(spec, env) {
            Ok(score) => {
                random_baseline.insert(env.clone(), score);
                usable_envs.push(env.clone());
            }
            Err(e) => {
                log::warn!("suite env {env} unusable (baseline failed): {e}");
                failures.push((env.clone(), "baseline".into(), spec.base.seed, e.to_string()));
            }
        }
    }

    let mut raw_cells: Vec<(String, String, u64, f64)> = Vec::new();
    for env in &usable_envs {
        for &variant in &spec.variants {
            for &seed in &spec.seeds {
                let label = variant_label(&variant);
                let cfg = cell_config(spec, env, variant, seed);
                let outcome = Trainer::new(cfg).and_then(|mut t| {
                    let n = t.config.iterations();
                    for _ in 0..n {
                        t.train_iteration()?;
                    }
                    Ok(t.recent_return())
                });
                match outcome {
                    Ok(score) => raw_cells.push((env.clone(), label, seed, score)),
                    Err(e) => {
                        log::warn!("suite cell {env}/{label}/seed{seed} failed: {e}");
                        failures.push((env.clone(), label, seed, e.to_string()));
                    }
                }
            }
        }
    }
    if raw_cells.is_empty() {
        return Err(Error::Numeric("every suite cell failed".into()));
    }

    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for (env, _, _, score) in &raw_cells {
        let b = best.entry(env.clone()).or_insert(f64::NEG_INFINITY);
        *b = b.max(*score);
    }

    let normalize = |env: &str, score: f64| -> f64 {
        let rand = random_baseline[env];
        let top = best[env];
        if (top - rand).abs() < 1e-12 {
            0.0
        } else {
            (score - rand) / (top - rand)
        }
    };

    let cells: Vec<CellResult> = raw_cells
        .into_iter()
        .map(|(env, variant, seed, score)| {
            let normalized = normalize(&env, score);
            CellResult { env, variant, seed, score, normalized }
        })
        .collect();

    let mut per_ve: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    let mut per_v: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in &cells {
        let e = per_ve.entry((c.variant.clone(), c.env.clone())).or_insert((0.0, 0));
        e.0 += c.normalized;
        e.1 += 1;
        let v = per_v.entry(c.variant.clone()).or_insert((0.0, 0));
        v.0 += c.normalized;
        v.1 += 1;
    }
    let per_variant_env = per_ve.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let pooled = per_v.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();

    Ok(SuiteResult { cells, random_baseline, best, per_variant_env, pooled, failures })
}
