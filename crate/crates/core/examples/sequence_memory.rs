//! Temporal memory on two sequences that share a middle element.
//!
//! `A B C D` and `E B C F` differ only in their first and last elements.
//! Several cells per column let the memory keep the two contexts apart
//! through `B C` and predict the right ending.
//!
//! `cargo run --example sequence_memory`

use dhtm::tm::{Memory, MemoryConfig, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAMES: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

fn column_marginals(memory: &Memory, belief: &dhtm::tm::BeliefState) -> Vec<f64> {
    belief.column_marginals(memory.topology())
}

fn main() -> dhtm::Result<()> {
    let config = MemoryConfig {
        topology: Topology { n_vars: 1, n_obs_states: 6, cells_per_column: 4, context_field_size: 1, n_actions: 0 },
        factor_lr: 0.2,
        ..MemoryConfig::default()
    };
    let mut memory = Memory::new(config, ChaCha8Rng::seed_from_u64(1))?;
    let sequences = [[0usize, 1, 2, 3], [4, 1, 2, 5]];

    for _ in 0..60 {
        for seq in &sequences {
            memory.reset();
            for &o in seq {
                memory.step(None, &[o])?;
            }
        }
    }
    println!("segments after training: {}", memory.segment_count());

    for seq in &sequences {
        memory.reset();
        let label: String = seq.iter().map(|&o| NAMES[o]).collect();
        println!("sequence {label}:");
        for (t, &o) in seq.iter().enumerate() {
            memory.infer(None, &[o])?;
            if t + 1 < seq.len() {
                let next = column_marginals(&memory, &memory.predict(None)?);
                let best = (0..next.len()).max_by(|&a, &b| next[a].total_cmp(&next[b])).unwrap_or(0);
                println!("  after {}: predicts {} with p={:.3}", NAMES[o], NAMES[best], next[best]);
            }
        }
    }
    Ok(())
}
