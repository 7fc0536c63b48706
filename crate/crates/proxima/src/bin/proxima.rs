//! Command-line surface over the proxima library: training runs, policy
//! evaluation, the ablation suite, objective-geometry diagnostics, and
//! plot-data export.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numeric failure,
//! 3 partial suite failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use proxima::envs::make_env;
use proxima::harness::{
    apply_pairs, clip_geometry_table, collect_eval_batch, config_hash, default_alphas,
    emit_plot_data, interpolate_objectives, load_checkpoint_pair, parse_config_file,
    parse_overrides, parse_variant, render_pairs, run_suite, to_pairs, AdvantageSign, SuiteSpec,
};
use proxima::nn::read_param_block;
use proxima::policy::ActorCritic;
use proxima::trainer::{evaluate_policy, train, train_resumed, TrainConfig};
use proxima::Error;

#[derive(Parser)]
#[command(name = "proxima", version, about = "Proximal policy optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named preset instead of the benchmark defaults.
    #[arg(long, value_parser = ["point_mass", "chain"])]
    preset: Option<String>,
    /// Dotted-key overrides, e.g. objective.epsilon=0.1 seed=3.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> proxima::Result<TrainConfig> {
        let base = match self.preset.as_deref() {
            Some("point_mass") => TrainConfig::point_mass_preset(),
            Some("chain") => TrainConfig::chain_preset(9),
            _ => TrainConfig::default(),
        };
        let base = match &self.config {
            Some(path) => apply_pairs(base, &parse_config_file(path)?)?,
            None => base,
        };
        apply_pairs(base, &parse_overrides(&self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics/checkpoints into a run directory.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory (default: runs/run-<timestamp>-<confighash>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume from a trainer_state.resume file.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a parameter checkpoint over full episodes.
    Eval {
        /// Parameter checkpoint (.params).
        #[arg(long)]
        params: PathBuf,
        /// Environment name (point_mass or chain:<n>).
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Act with the distribution mode instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every (env, variant, seed) cell and report normalized scores.
    Suite {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated env names.
        #[arg(long, value_delimiter = ',', default_value = "point_mass,chain:9")]
        envs: Vec<String>,
        /// Comma-separated variant specs (noclip, clip:<e>, fixedkl:<b>,
        /// adaptivekl:<d> or adaptivekl:<b>:<d>).
        #[arg(long, value_delimiter = ',', default_value = "noclip,clip:0.1,clip:0.2,clip:0.3")]
        variants: Vec<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Training timesteps per cell.
        #[arg(long, default_value_t = 60_000)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the surrogate objectives along the θ_old → θ_new line.
    Interp {
        /// Checkpoint collected before the update (θ_old).
        #[arg(long)]
        old: PathBuf,
        /// Checkpoint after the update (θ_new).
        #[arg(long)]
        new: PathBuf,
        /// Environment used to collect the evaluation batch.
        #[arg(long, default_value = "point_mass")]
        env: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Batch size (transitions) collected under θ_old.
        #[arg(long, default_value_t = 512)]
        steps: usize,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Output CSV path (default: interp_sweep.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate one clipped-surrogate term over a ratio grid.
    Clipgeom {
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Advantage sign: pos or neg.
        #[arg(long, default_value = "pos")]
        sign: String,
        #[arg(long, default_value_t = 2.0)]
        r_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Output CSV path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert metrics CSVs into tidy long-format plot data.
    Plotdata {
        /// Input metrics.csv files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "plotdata")]
        out: PathBuf,
    },
}

fn unique_run_dir(base: &Path, stem: &str) -> PathBuf {
    let mut dir = base.join(stem);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stem}-{k}"));
        k += 1;
    }
    dir
}

fn prepare_run_dir(out: Option<PathBuf>, kind: &str, cfg: &TrainConfig) -> proxima::Result<PathBuf> {
    let dir = match out {
        Some(d) => d,
        None => {
            let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            unique_run_dir(Path::new("runs"), &format!("{kind}-{ts}-{}", config_hash(cfg)))
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let resolved = dir.join("config.resolved");
    std::fs::write(&resolved, render_pairs(&to_pairs(cfg))).map_err(|e| Error::io(&resolved, e))?;
    let manifest = dir.join("manifest.txt");
    std::fs::write(&manifest, "config.resolved\n").map_err(|e| Error::io(&manifest, e))?;
    Ok(dir)
}

fn append_manifest(dir: &Path, names: &[&str]) -> proxima::Result<()> {
    let path = dir.join("manifest.txt");
    let mut listed = std::fs::read_to_string(&path).unwrap_or_default();
    for n in names {
        if !listed.lines().any(|l| l == *n) {
            listed.push_str(n);
            listed.push('\n');
        }
    }
    std::fs::write(&path, listed).map_err(|e| Error::io(&path, e))
}

fn run(cli: Cli) -> proxima::Result<ExitCode> {
    match cli.command {
        Command::Train { config, out, resume } => {
            let cfg = config.resolve()?;
            let dir = prepare_run_dir(out, "run", &cfg)?;
            println!("run directory: {}", dir.display());
            let artifacts = match resume {
                Some(state) => train_resumed(cfg, &state, &dir)?,
                None => train(cfg, &dir)?,
            };
            println!(
                "finished: mean return over last 100 episodes = {:.4}",
                artifacts.final_return
            );
            println!("metrics: {}", artifacts.metrics_path.display());
            println!("final params: {}", artifacts.final_params_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { params, env, episodes, deterministic, seed } => {
            let (ac, theta) = ActorCritic::from_param_block(&read_param_block(&params)?)?;
            let mut e = make_env(&env, seed)?;
            let (mean, std) = evaluate_policy(&ac, &theta, e.as_mut(), episodes, deterministic, seed)?;
            println!("episodes: {episodes}");
            println!("mean return: {mean:.6}");
            println!("std return:  {std:.6}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { config, envs, variants, seeds, budget, out } => {
            let base = config.resolve()?;
            let parsed: Vec<_> = variants
                .iter()
                .map(|v| parse_variant(v))
                .collect::<proxima::Result<_>>()?;
            let spec = SuiteSpec { envs, variants: parsed, seeds, budget, base: base.clone() };
            let dir = prepare_run_dir(out, "suite", &base)?;
            println!("suite directory: {}", dir.display());
            let result = run_suite(&spec)?;
            let cells = dir.join("suite_cells.csv");
            std::fs::write(&cells, result.cells_csv()).map_err(|e| Error::io(&cells, e))?;
            let summary = dir.join("suite_summary.txt");
            std::fs::write(&summary, result.summary_table()).map_err(|e| Error::io(&summary, e))?;
            append_manifest(&dir, &["suite_cells.csv", "suite_summary.txt"])?;
            print!("{}", result.summary_table());
            if result.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} cell(s) failed; see summary", result.failures.len());
                Ok(ExitCode::from(3))
            }
        }
        Command::Interp { old, new, env, seed, steps, epsilon, beta, out } => {
            let (ac, theta_old, theta_new) = load_checkpoint_pair(&old, &new)?;
            let batch = collect_eval_batch(&ac, &theta_old, &env, seed, steps, 0.99, 0.95, true)?;
            let sweep = interpolate_objectives(
                &ac,
                &theta_old,
                &theta_new,
                &batch,
                &default_alphas(),
                epsilon,
                beta,
            )?;
            let path = out.unwrap_or_else(|| PathBuf::from("interp_sweep.csv"));
            std::fs::write(&path, sweep.to_csv()).map_err(|e| Error::io(&path, e))?;
            let (amax, vmax) = sweep.clip_argmax();
            println!("wrote {}", path.display());
            println!("clipped surrogate peaks at alpha = {amax:.2} (value {vmax:.6})");
            println!("mean KL at alpha = 1: {:.6}", sweep.mean_kl[50.min(sweep.mean_kl.len() - 1)]);
            Ok(ExitCode::SUCCESS)
        }
        Command::Clipgeom { epsilon, sign, r_max, points, out } => {
            let sign: AdvantageSign = sign.parse()?;
            if points < 2 || r_max <= 0.0 {
                return Err(Error::Usage("need points >= 2 and r_max > 0".into()));
            }
            let grid: Vec<f64> = (1..=points)
                .map(|i| r_max * i as f64 / points as f64)
                .collect();
            let table = clip_geometry_table(sign, epsilon, &grid)?;
            let csv = proxima::harness::clipgeom::table_csv(&table);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plotdata { inputs, out } => {
            let paths = emit_plot_data(&inputs, &out)?;
            println!("wrote {}", paths.long_path.display());
            if let Some(b) = paths.bands_path {
                println!("wrote {}", b.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap's help/version "errors" are successful exits
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
