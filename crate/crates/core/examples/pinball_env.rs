//! The pinball table: configuration, dynamics and rendering.
//!
//! Shoots the ball straight up on the open table and on the obstructed one,
//! printing the frames as ASCII art.
//!
//! `cargo run --example pinball_env`

use dhtm::env::{Pinball, PinballConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shoot(name: &str, config: PinballConfig) -> dhtm::Result<()> {
    let mut env = Pinball::new(config, ChaCha8Rng::seed_from_u64(0))?;
    let first = env.reset();
    println!("== {name}: {} actions, start frame", env.n_actions());
    print!("{}", first.frame.to_ascii());
    let mut total = 0.0;
    loop {
        let out = env.step(0)?;
        total += out.reward;
        let s = env.state();
        println!("step {:>2}: ball at ({:>5.2}, {:>5.2}) reward {:+.2}", s.steps, s.position[0], s.position[1], out.reward);
        if out.terminal {
            print!("{}", out.frame.to_ascii());
            break;
        }
    }
    println!("return {total:.2}\n");
    Ok(())
}

fn main() -> dhtm::Result<()> {
    let open = PinballConfig::default();
    shoot("open table", open.clone())?;
    shoot("obstructed table", open.obstructed())?;
    Ok(())
}
