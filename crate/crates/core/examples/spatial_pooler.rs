//! Spatial pooler: block k-WTA codes, the newborn stage and code stability.
//!
//! Trains on noisy copies of a few prototype patterns and reports how often
//! a prototype keeps its code once the encoder is adult. Each block has one
//! neuron per prototype; spare neurons would duplicate a specialization and
//! split its wins.
//!
//! `cargo run --release --example spatial_pooler`

use dhtm::encoder::{EncoderConfig, SpatialPooler, Stage};
use dhtm::sdr::Sdr;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy(proto: &Sdr, flips: usize, rng: &mut ChaCha8Rng) -> dhtm::Result<Sdr> {
    let mut active: Vec<usize> = proto.active().to_vec();
    for _ in 0..flips {
        let i = rng.random_range(0..active.len());
        active[i] = rng.random_range(0..proto.dimension());
    }
    Sdr::new(proto.dimension(), active)
}

fn main() -> dhtm::Result<()> {
    let config = EncoderConfig {
        input_dim: 400,
        num_neurons: 32,
        blocks: 4,
        newborn_steps: 2000,
        target_rf_size: 30,
        ..EncoderConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut pooler = SpatialPooler::new(config.clone(), &mut rng)?;
    let prototypes: Vec<Sdr> =
        (0..8).map(|_| Sdr::new(400, sample(&mut rng, 400, 30).into_vec())).collect::<Result<_, _>>()?;

    for step in 0..4000 {
        let x = noisy(&prototypes[step % prototypes.len()], 3, &mut rng)?;
        let z = pooler.encode(&x)?;
        pooler.learn(&x, &z)?;
        pooler.newborn_step();
        if step % 1000 == 999 {
            let rf: usize = (0..config.num_neurons).map(|i| pooler.receptive_field_size(i)).sum();
            println!(
                "step {:>4}: boost scale {:>6.1}, mean receptive field {:>5.1}, stage {:?}",
                step + 1,
                pooler.boost_scale(),
                rf as f64 / config.num_neurons as f64,
                pooler.stage()
            );
        }
    }
    assert_eq!(pooler.stage(), Stage::Adult);

    let k = config.k();
    for (i, p) in prototypes.iter().enumerate() {
        let code = pooler.encode(p)?;
        let stable: f64 = (0..20)
            .map(|_| noisy(p, 3, &mut rng).and_then(|x| pooler.encode(&x)?.overlap(&code)))
            .sum::<dhtm::Result<usize>>()? as f64
            / 20.0;
        println!("prototype {i}: code {:?}, mean overlap under noise {stable:.2} of {k}", code.active());
    }
    Ok(())
}
