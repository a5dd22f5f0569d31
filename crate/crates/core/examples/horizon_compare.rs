//! Runs a config file's variants, or T=1 against T=5, and writes the joined
//! `compare.csv` plus one output directory per variant.
//!
//! Arguments: output directory (default `runs/compare`) and episodes
//! (default 100).
//!
//! `cargo run --release --example horizon_compare -- runs/compare 100`

use std::path::PathBuf;

use dhtm::harness::{compare, ExperimentConfig, Variant};

fn main() -> dhtm::Result<()> {
    let mut args = std::env::args().skip(1);
    let out: PathBuf = args.next().map(PathBuf::from).unwrap_or_else(|| "runs/compare".into());
    let episodes: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let base = ExperimentConfig { episodes, seeds: vec![0, 1], out_dir: Some(out), ..ExperimentConfig::default() };
    let (path, results) = compare(&base, &[Variant::horizon(1), Variant::horizon(5)])?;
    for (name, trials) in &results {
        for t in trials {
            let r = t.returns();
            println!("{name} seed {}: mean return {:.3}", t.seed, r.iter().sum::<f64>() / r.len() as f64);
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}
