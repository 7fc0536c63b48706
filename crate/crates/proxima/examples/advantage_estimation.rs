//! Advantage estimation on a hand-built segment: TD residuals, the λ sweep
//! between one-step residuals and full returns, terminal masking, and the
//! λ = 1 agreement with the finite-horizon estimator.
//!
//! Run with: `cargo run --example advantage_estimation`

use proxima::distributions::{Categorical, Dist};
use proxima::envs::Action;
use proxima::rollout::{compute_deltas, compute_gae, compute_nstep_return_advantage, Segment};

fn demo_segment() -> Segment {
    // eight transitions, an episode terminal at t = 4
    let rewards = vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 0.5];
    let old_values = vec![0.6, 0.7, 0.9, 0.4, 0.8, 0.3, 0.35, 0.4, 0.45];
    let mut terminal = vec![false; 8];
    terminal[4] = true;
    let boot_values: Vec<f64> = (0..8)
        .map(|t| if t == 4 { 0.0 } else { old_values[t + 1] })
        .collect();
    Segment {
        observations: vec![vec![0.0]; 9],
        actions: vec![Action::Discrete(0); 8],
        rewards,
        terminal,
        truncated: vec![false; 8],
        old_values,
        boot_values,
        old_log_probs: vec![0.0; 8],
        old_dists: vec![Dist::Categorical(Categorical::new(vec![0.0, 0.0])); 8],
    }
}

fn main() {
    let seg = demo_segment();
    let gamma = 0.99;
    let deltas = compute_deltas(&seg, gamma);
    let ends = seg.episode_ends();

    println!("TD residuals (terminal at t=4 masks its bootstrap):");
    println!("  {deltas:.3?}\n");

    println!("lambda sweep (credit reaches further back as lambda grows):");
    for lambda in [0.0, 0.5, 0.95, 1.0] {
        let adv = compute_gae(&deltas, &ends, gamma, lambda);
        println!("  lambda={lambda:<4}  {adv:.3?}");
    }

    let lambda_one = compute_gae(&deltas, &ends, gamma, 1.0);
    let nstep = compute_nstep_return_advantage(&seg, gamma);
    let max_diff = lambda_one
        .iter()
        .zip(nstep.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("\nfinite-horizon estimator:   {nstep:.3?}");
    println!("max |GAE(1) - finite-horizon| = {max_diff:.2e}");
    println!("\nnote: credit never crosses the terminal at t=4 -- advantages");
    println!("for t <= 4 ignore everything the next episode earned");
}
