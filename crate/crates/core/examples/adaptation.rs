//! Adaptation to a changed table for two TD horizons.
//!
//! Both agents learn the open table, then a deflector is placed in front of
//! the target. Prints mean return per block of episodes for each horizon.
//! Arguments: episodes before the change (default 300), episodes after it
//! (default 200), seed (default 0).
//!
//! `cargo run --release --example adaptation -- 300 200 0`

use dhtm::harness::{run_trials, ExperimentConfig};

fn main() -> dhtm::Result<()> {
    let mut args = std::env::args().skip(1);
    let before: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);
    let after: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let block = 50;
    let mut rows = Vec::new();
    for horizon in [1, 5] {
        let mut config = ExperimentConfig { episodes: before + after, switch_episode: Some(before), seeds: vec![seed], ..ExperimentConfig::default() };
        config.agent.horizon = horizon;
        let trial = run_trials(&config)?.remove(0);
        let blocks: Vec<f64> =
            trial.returns().chunks(block).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        rows.push((horizon, blocks));
    }
    print!("episodes  ");
    for (h, _) in &rows {
        print!("   T={h:<3}");
    }
    println!();
    for i in 0..rows[0].1.len() {
        let start = i * block + 1;
        let marker = if start > before { "*" } else { " " };
        print!("{start:>4}-{:<4}{marker}", (start + block - 1).min(before + after));
        for (_, blocks) in &rows {
            print!(" {:>7.3}", blocks[i]);
        }
        println!();
    }
    println!("(* after the table change)");
    Ok(())
}
