//! Saving, inspecting and resuming a trial.
//!
//! `cargo run --release --example checkpoint_inspect`

use dhtm::harness::{inspect, ExperimentConfig, Trial};

fn main() -> dhtm::Result<()> {
    let dir = std::env::temp_dir().join(format!("dhtm-checkpoint-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("trial.bin");

    let config = ExperimentConfig { episodes: 40, ..ExperimentConfig::default() };
    let mut trial = Trial::new(config, 3)?;
    for _ in 0..20 {
        trial.run_episode()?;
    }
    trial.save(&path)?;
    println!("saved {} ({} bytes)\n", path.display(), std::fs::metadata(&path)?.len());
    print!("{}", inspect(&path)?);

    let mut resumed = Trial::load(&path)?;
    let a = trial.run_episode()?;
    let b = resumed.run_episode()?;
    println!("\nnext episode from memory and from disk identical: {}", a.steps == b.steps);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
