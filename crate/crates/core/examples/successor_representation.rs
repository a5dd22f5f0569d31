//! Successor representation learned by n-step TD on a small chain, compared
//! with the closed form, plus the value readout and the surprise metric.
//!
//! `cargo run --example successor_representation`

use dhtm::oracle::{sr_closed_form, Horizon};
use dhtm::sr::SrMatrix;

fn main() -> dhtm::Result<()> {
    let n = 4;
    let gamma = 0.9;
    // a ring that mostly moves forward
    #[rustfmt::skip]
    let p = [
        0.1, 0.9, 0.0, 0.0,
        0.0, 0.1, 0.9, 0.0,
        0.0, 0.0, 0.1, 0.9,
        0.9, 0.0, 0.0, 0.1,
    ];
    let identity: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    let truth = sr_closed_form(&p, &identity, n, gamma, Horizon::Infinite)?;
    let step = |d: &[f64]| (0..n).map(|j| (0..n).map(|i| d[i] * p[i * n + j]).sum()).collect::<Vec<f64>>();

    for horizon in [0, 2, 5] {
        let mut sr = SrMatrix::new(n, 1, n, gamma, horizon, 0.3)?;
        let mut updates = 0;
        loop {
            let s = updates % n;
            let belief: Vec<f64> = (0..n).map(|j| if j == s { 1.0 } else { 0.0 }).collect();
            let mut predicted = vec![belief.clone()];
            for _ in 0..horizon {
                let next = step(predicted.last().expect("non-empty"));
                predicted.push(next);
            }
            let future = step(predicted.last().expect("non-empty"));
            sr.td_update(&belief, &predicted, &future)?;
            updates += 1;
            let err = sr.entries().iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if err < 1e-3 {
                println!("T={horizon}: max error below 1e-3 after {updates} updates");
                break;
            }
        }
    }

    let mut sr = SrMatrix::new(n, 1, n, gamma, 0, 0.0)?;
    for i in 0..n {
        sr.row_mut(i).copy_from_slice(&truth[i * n..(i + 1) * n]);
    }
    let reward = [0.0, 0.0, 0.0, 1.0];
    for s in 0..n {
        let belief: Vec<f64> = (0..n).map(|j| if j == s { 1.0 } else { 0.0 }).collect();
        let surprise = sr.surprise(&belief, &[vec![(s + 1) % n]])?;
        println!(
            "state {s}: value {:.3}, surprise at seeing {} next {:.3}",
            sr.value(&belief, &reward)?,
            (s + 1) % n,
            surprise[0]
        );
    }
    Ok(())
}
