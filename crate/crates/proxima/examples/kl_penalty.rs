//! The adaptive KL penalty in action: the two-rule β controller on a
//! synthetic divergence trace, then a short adaptive-KL training run
//! showing β settling so the measured divergence tracks its target.
//!
//! Run with: `cargo run --release --example kl_penalty`

use proxima::objectives::{kl_controller_update, KlControllerState, SurrogateVariant};
use proxima::trainer::{TrainConfig, Trainer};

fn main() -> proxima::Result<()> {
    println!("controller rule: d < d_targ/1.5 halves beta, d > 1.5*d_targ doubles it\n");
    let mut state = KlControllerState { beta: 1.0, d_targ: 0.01 };
    println!("  d measured | beta after");
    for d in [0.001, 0.02, 0.01, 0.002, 0.03, 0.05, 0.004] {
        state = kl_controller_update(&state, d);
        println!("  {d:>10} | {:>8}", state.beta);
    }

    println!("\nadaptive-KL training on point_mass (d_targ = 0.01):\n");
    let mut config = TrainConfig::point_mass_preset();
    config.total_timesteps = 25_000;
    config.seed = 2;
    config.objective.variant = SurrogateVariant::AdaptiveKl { beta_init: 1.0, d_targ: 0.01 };
    let mut trainer = Trainer::new(config.clone())?;
    println!("iter | return   | mean KL  | beta");
    for _ in 0..config.iterations() {
        let m = trainer.train_iteration()?;
        println!(
            "{:>4} | {:>8.3} | {:.6} | {}",
            m.iteration,
            m.mean_episode_return,
            m.mean_kl,
            m.beta.unwrap_or(f64::NAN)
        );
    }
    println!("\nbeta stays a power-of-two multiple of its initial value by construction");
    Ok(())
}
