//! Sparse distributed representations: construction, overlap and k-WTA.
//!
//! `cargo run --example sdr_basics`

use dhtm::sdr::{kwta, Sdr};

fn main() -> dhtm::Result<()> {
    let a = Sdr::new(64, vec![3, 17, 40, 41, 63])?;
    let b = Sdr::from_dense(&{
        let mut dense = vec![0u8; 64];
        for i in [3, 17, 22, 41] {
            dense[i] = 1;
        }
        dense
    })?;
    println!("a = {:?}", a.active());
    println!("b = {:?}", b.active());
    println!("overlap(a, b) = {}", a.overlap(&b)?);

    // unsorted or repeated indices are normalized, out-of-range ones rejected
    let c = Sdr::new(8, vec![5, 1, 5])?;
    println!("Sdr::new(8, [5, 1, 5]) = {:?}", c.active());
    println!("Sdr::new(8, [9]) -> {}", Sdr::new(8, vec![9]).unwrap_err());

    let scores = [0.1, 0.9, 0.4, 0.9, 0.2, 0.7];
    let winners = kwta(&scores, 3)?;
    println!("top 3 of {scores:?} = {:?} (ties go to the lower index)", winners.active());
    Ok(())
}
