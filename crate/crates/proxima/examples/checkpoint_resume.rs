//! Checkpointing round trip: interrupt a run, restore it from the saved
//! trainer state (parameters, optimizer moments, every RNG and environment
//! state), and verify the resumed run reproduces the uninterrupted one
//! iteration for iteration.
//!
//! Run with: `cargo run --example checkpoint_resume`

use proxima::trainer::{TrainConfig, Trainer};

fn main() -> proxima::Result<()> {
    let mut config = TrainConfig::chain_preset(5);
    config.horizon = 64;
    config.minibatch_size = 64;
    config.total_timesteps = 6 * config.batch_size();
    config.seed = 5;

    // reference: six uninterrupted iterations
    let mut reference = Trainer::new(config.clone())?;
    let mut reference_rows = Vec::new();
    for _ in 0..6 {
        reference_rows.push(reference.train_iteration()?.csv_row());
    }

    // interrupted: three iterations, save, reload, three more
    let dir = std::env::temp_dir().join("proxima_resume_demo");
    std::fs::create_dir_all(&dir).map_err(|e| proxima::Error::io(&dir, e))?;
    let state_path = dir.join("trainer_state.resume");

    let mut first = Trainer::new(config.clone())?;
    let mut rows = Vec::new();
    for _ in 0..3 {
        rows.push(first.train_iteration()?.csv_row());
    }
    first.save_state(&state_path)?;
    println!("saved state after 3 iterations ({} bytes)", std::fs::metadata(&state_path).unwrap().len());
    drop(first);

    let mut resumed = Trainer::load_state(config, &state_path)?;
    for _ in 0..3 {
        rows.push(resumed.train_iteration()?.csv_row());
    }

    let identical = rows == reference_rows;
    println!("resumed metrics identical to uninterrupted run: {identical}");
    for (i, (a, b)) in rows.iter().zip(reference_rows.iter()).enumerate() {
        let mark = if a == b { "==" } else { "!=" };
        println!("  iter {} {} reference", i + 1, mark);
    }
    assert!(identical);
    println!("\nfinal parameters also match: {}", resumed.theta == reference.theta);
    Ok(())
}
