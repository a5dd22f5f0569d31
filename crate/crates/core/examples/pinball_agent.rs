//! One agent learning the open pinball table.
//!
//! Prints return and 1-step surprise averaged over blocks of episodes.
//! Arguments: episodes (default 300) and seed (default 0).
//!
//! `cargo run --release --example pinball_agent -- 300 0`

use dhtm::harness::{ExperimentConfig, Trial};

fn main() -> dhtm::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let config = ExperimentConfig { episodes, ..ExperimentConfig::default() };
    let mut trial = Trial::new(config, seed)?;
    let block = 50;
    let (mut returns, mut surprise) = (Vec::new(), Vec::new());
    println!("episodes   return  surprise_1  segments");
    for ep in 1..=episodes {
        let record = trial.run_episode()?;
        returns.push(record.episode_return);
        surprise.extend(record.mean_surprise(1));
        if ep % block == 0 || ep == episodes {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            println!(
                "{:>4}-{:<4} {:>7.3} {:>11.3} {:>9}",
                ep + 1 - returns.len(),
                ep,
                mean(&returns),
                mean(&surprise),
                trial.agent.memory().segment_count()
            );
            returns.clear();
            surprise.clear();
        }
    }
    Ok(())
}
