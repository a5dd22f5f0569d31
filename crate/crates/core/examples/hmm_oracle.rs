//! Dense HMM reference: fixture parsing, forward filtering and a comparison
//! with the memory's predictions on the same deterministic cycle.
//!
//! `cargo run --example hmm_oracle`

use dhtm::oracle::DenseHmm;
use dhtm::tm::{Memory, MemoryConfig, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIXTURE: &str = "
# three-state cycle 0 -> 1 -> 2 -> 0, observed directly
states 3
observations 3
actions 1
initial
0.3333333333333333 0.3333333333333333 0.3333333333333334
transition 0
0 1 0
0 0 1
1 0 0
emission
1 0 0
0 1 0
0 0 1
";

fn main() -> dhtm::Result<()> {
    let hmm = DenseHmm::parse(FIXTURE)?;
    let obs = [1usize, 2, 0, 1, 2];
    let predictive = hmm.forward_predictive(&obs, &[])?;
    let filtered = hmm.forward_filter(&obs, &[])?;

    let config = MemoryConfig {
        topology: Topology { n_vars: 1, n_obs_states: 3, cells_per_column: 1, context_field_size: 1, n_actions: 0 },
        ..MemoryConfig::default()
    };
    let mut memory = Memory::new(config, ChaCha8Rng::seed_from_u64(0))?;
    for &o in &[0, 1, 2, 0] {
        memory.step(None, &[o])?;
    }
    memory.reset();

    println!("step  obs  oracle prior            memory prior            max |diff|");
    for (t, &o) in obs.iter().enumerate() {
        let (prior, _) = memory.infer(None, &[o])?;
        let diff = prior.probs().iter().zip(&predictive[t]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "{t:>4}  {o:>3}  {:<22}  {:<22}  {diff:.1e}",
            format!("{:.3?}", predictive[t]),
            format!("{:.3?}", prior.probs())
        );
    }
    println!("filtered posterior at the last step: {:.3?}", filtered[obs.len() - 1]);
    println!("\nround-tripped fixture:\n{}", hmm.to_text());
    Ok(())
}
