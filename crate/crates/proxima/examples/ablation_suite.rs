//! A miniature ablation suite: the unclipped objective against three
//! clipping levels on both built-in tasks, scores normalized per
//! environment (random policy 0, best run 1). Small budget, so expect a
//! noisier version of the full picture.
//!
//! Run with: `cargo run --release --example ablation_suite`

use proxima::harness::{run_suite, SuiteSpec};
use proxima::objectives::SurrogateVariant;
use proxima::trainer::TrainConfig;

fn main() -> proxima::Result<()> {
    let spec = SuiteSpec {
        envs: vec!["point_mass".into(), "chain:9".into()],
        variants: vec![
            SurrogateVariant::NoClip,
            SurrogateVariant::Clip { epsilon: 0.1 },
            SurrogateVariant::Clip { epsilon: 0.2 },
            SurrogateVariant::Clip { epsilon: 0.3 },
        ],
        seeds: vec![0, 1],
        budget: 12_000,
        base: TrainConfig::point_mass_preset(),
    };
    println!(
        "running {} cells ({} envs x {} variants x {} seeds, {} steps each)...\n",
        spec.envs.len() * spec.variants.len() * spec.seeds.len(),
        spec.envs.len(),
        spec.variants.len(),
        spec.seeds.len(),
        spec.budget
    );
    let result = run_suite(&spec)?;
    print!("{}", result.summary_table());
    Ok(())
}
