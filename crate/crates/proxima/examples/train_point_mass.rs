//! Train the clipped-objective preset on the point-mass task and compare
//! the learned policy against the constrained-LQ optimal-return oracle on
//! identical start states.
//!
//! Run with: `cargo run --release --example train_point_mass`

use proxima::envs::{make_env, point_mass_optimal_return};
use proxima::trainer::{evaluate_policy, TrainConfig, Trainer};

fn main() -> proxima::Result<()> {
    let mut config = TrainConfig::point_mass_preset();
    config.total_timesteps = 40_000;
    config.seed = 0;
    println!(
        "training clip(0.2) on point_mass: {} timesteps, {} actors x horizon {}",
        config.total_timesteps, config.num_actors, config.horizon
    );

    let mut trainer = Trainer::new(config.clone())?;
    for _ in 0..config.iterations() {
        let m = trainer.train_iteration()?;
        if m.iteration % 10 == 0 || m.iteration == 1 {
            println!(
                "iter {:>3}  steps {:>6}  return {:>8.3}  kl {:.5}  clipfrac {:.3}",
                m.iteration, m.timesteps_so_far, m.mean_episode_return, m.mean_kl, m.clip_fraction
            );
        }
    }

    // deterministic evaluation on a fixed start set, oracle on the same set
    let episodes = 32;
    let eval_seed = 777;
    let mut env = make_env("point_mass", eval_seed)?;
    let (mean, std) = evaluate_policy(&trainer.ac, &trainer.theta, env.as_mut(), episodes, true, 1)?;

    let mut env = make_env("point_mass", eval_seed)?;
    let oracle: f64 = (0..episodes)
        .map(|_| {
            let o = env.reset();
            point_mass_optimal_return(&[o[0], o[1], o[2], o[3]])
        })
        .sum::<f64>()
        / episodes as f64;

    println!("\ndeterministic eval over {episodes} episodes: {mean:.3} ± {std:.3}");
    println!("optimal return on the same starts:          {oracle:.3}");
    println!("mean regret vs the oracle:                  {:.3}  ({:.1}% above optimal cost)",
        oracle - mean, 100.0 * (oracle - mean) / oracle.abs());
    Ok(())
}
