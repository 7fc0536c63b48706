//! Train the discrete preset on the chain task and check the learned greedy
//! policy against exact value iteration, cell by cell.
//!
//! Run with: `cargo run --release --example train_chain`

use proxima::envs::{chain_optimal_actions, chain_optimal_value, Action};
use proxima::trainer::{TrainConfig, Trainer};

fn main() -> proxima::Result<()> {
    let n = 9;
    let mut config = TrainConfig::chain_preset(n);
    config.total_timesteps = 10_000;
    config.seed = 1;
    println!("training clip(0.2) + entropy bonus on chain:{n}");

    let mut trainer = Trainer::new(config.clone())?;
    for _ in 0..config.iterations() {
        let m = trainer.train_iteration()?;
        println!(
            "iter {:>2}  steps {:>5}  return {:>6.3}  entropy {:.3}",
            m.iteration, m.timesteps_so_far, m.mean_episode_return, m.entropy_term
        );
    }

    let optimal = chain_optimal_actions(n, config.gamma);
    let values = chain_optimal_value(n, config.gamma);
    println!("\ncell | V*(s)   | optimal | greedy");
    let mut all_match = true;
    for cell in 1..n - 1 {
        let mut obs = vec![0.0; n];
        obs[cell] = 1.0;
        let dist = trainer.ac.policy_dist(&trainer.theta, &obs)?;
        let greedy = match dist.mode() {
            Action::Discrete(a) => a,
            _ => unreachable!(),
        };
        let label = |a: usize| if a == 1 { "right" } else { "left" };
        all_match &= greedy == optimal[cell - 1];
        println!(
            "{cell:>4} | {:>7.4} | {:>7} | {:>6} {}",
            values[cell],
            label(optimal[cell - 1]),
            label(greedy),
            if greedy == optimal[cell - 1] { "" } else { "  <- mismatch" }
        );
    }
    println!("\ngreedy policy {} value iteration", if all_match { "matches" } else { "differs from" });
    Ok(())
}
