//! Exact reference computations on small dense models.
//!
//! These are test instruments: a dense HMM forward filter (optionally with
//! per-action transition matrices) and closed-form successor representations.
//! Matrices are row-major `Vec<f64>`.
//!
//! Fixtures use a plain text format:
//!
//! ```text
//! # comments start with '#'
//! states 2
//! observations 2
//! actions 1
//! initial
//! 0.5 0.5
//! transition 0
//! 0 1
//! 1 0
//! emission
//! 1 0
//! 0 1
//! ```

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{invalid_arg, Error, Result};

const ROW_TOL: f64 = 1e-12;

type Distributions = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseHmm {
    n_states: usize,
    n_obs: usize,
    transitions: Vec<Vec<f64>>,
    emission: Vec<f64>,
    initial: Vec<f64>,
}

fn check_stochastic(name: &str, m: &[f64], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows * cols {
        return invalid_arg(format!("{name} has {} entries, expected {rows}x{cols}", m.len()));
    }
    for (r, row) in m.chunks(cols).enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > ROW_TOL {
            return invalid_arg(format!("{name} row {r} is not a distribution (sum {sum})"));
        }
    }
    Ok(())
}

/// Normalizes each row of a nonnegative count matrix; all-zero rows become uniform.
pub fn row_normalize(counts: &[f64], cols: usize) -> Vec<f64> {
    counts
        .chunks(cols)
        .flat_map(|row| {
            let s: f64 = row.iter().sum();
            row.iter()
                .map(move |&x| if s > 0.0 { x / s } else { 1.0 / cols as f64 })
                .collect::<Vec<_>>()
        })
        .collect()
}

impl DenseHmm {
    pub fn new(transitions: Vec<Vec<f64>>, emission: Vec<f64>, initial: Vec<f64>) -> Result<Self> {
        let n_states = initial.len();
        if n_states == 0 || transitions.is_empty() {
            return invalid_arg("model needs at least one state and one transition matrix");
        }
        if !emission.len().is_multiple_of(n_states) || emission.is_empty() {
            return invalid_arg("emission size is not a multiple of the state count");
        }
        let n_obs = emission.len() / n_states;
        check_stochastic("initial", &initial, 1, n_states)?;
        for (a, p) in transitions.iter().enumerate() {
            check_stochastic(&format!("transition {a}"), p, n_states, n_states)?;
        }
        check_stochastic("emission", &emission, n_states, n_obs)?;
        Ok(Self { n_states, n_obs, transitions, emission, initial })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, action: usize) -> &[f64] {
        &self.transitions[action]
    }

    pub fn emission(&self) -> &[f64] {
        &self.emission
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Predictive priors and filtering posteriors for every step.
    fn run(&self, obs: &[usize], actions: &[usize]) -> Result<(Distributions, Distributions)> {
        let n = self.n_states;
        if obs.iter().any(|&o| o >= self.n_obs) {
            return invalid_arg("observation out of range");
        }
        let action_at = |t: usize| -> Result<usize> {
            // actions[t - 1] drives the transition into step t
            match actions.get(t - 1) {
                Some(&a) if a < self.n_actions() => Ok(a),
                Some(&a) => invalid_arg(format!("action {a} out of range")),
                None if self.n_actions() == 1 => Ok(0),
                None => invalid_arg(format!("missing action for step {t}")),
            }
        };
        let mut priors = Vec::with_capacity(obs.len());
        let mut posteriors: Vec<Vec<f64>> = Vec::with_capacity(obs.len());
        for (t, &o) in obs.iter().enumerate() {
            let prior = if t == 0 {
                self.initial.clone()
            } else {
                let p = &self.transitions[action_at(t)?];
                let prev = &posteriors[t - 1];
                (0..n)
                    .map(|j| (0..n).map(|i| prev[i] * p[i * n + j]).sum())
                    .collect()
            };
            let mut post: Vec<f64> = (0..n).map(|j| prior[j] * self.emission[j * self.n_obs + o]).collect();
            let z: f64 = post.iter().sum();
            if !(z > 0.0) {
                return Err(Error::ZeroLikelihood { step: t });
            }
            post.iter_mut().for_each(|x| *x /= z);
            priors.push(prior);
            posteriors.push(post);
        }
        Ok((priors, posteriors))
    }

    /// Filtering posteriors `p(h_t | o_1..t)` for every step.
    ///
    /// `actions[t - 1]` selects the transition matrix used to enter step `t`;
    /// single-action models may pass an empty slice.
    pub fn forward_filter(&self, obs: &[usize], actions: &[usize]) -> Result<Vec<Vec<f64>>> {
        Ok(self.run(obs, actions)?.1)
    }

    /// One-step predictive distributions `p(h_t | o_1..t-1)`; the first entry
    /// is the initial distribution.
    pub fn forward_predictive(&self, obs: &[usize], actions: &[usize]) -> Result<Vec<Vec<f64>>> {
        Ok(self.run(obs, actions)?.0)
    }

    /// Parses the fixture text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .peekable();
        fn next<'a>(it: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<&'a str> {
            it.next().ok_or_else(|| Error::Parse(format!("unexpected end of input, wanted {what}")))
        }
        fn keyword<'a>(it: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<()> {
            let t = next(it, key)?;
            if t != key {
                return Err(Error::Parse(format!("expected '{key}', found '{t}'")));
            }
            Ok(())
        }
        fn count<'a>(it: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<usize> {
            let t = next(it, what)?;
            t.parse().map_err(|_| Error::Parse(format!("bad {what} '{t}'")))
        }
        fn reals<'a>(it: &mut impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    let t = next(it, "number")?;
                    t.parse().map_err(|_| Error::Parse(format!("bad number '{t}'")))
                })
                .collect()
        }

        keyword(&mut tokens, "states")?;
        let n = count(&mut tokens, "state count")?;
        keyword(&mut tokens, "observations")?;
        let m = count(&mut tokens, "observation count")?;
        keyword(&mut tokens, "actions")?;
        let a = count(&mut tokens, "action count")?;
        if n == 0 || m == 0 || a == 0 || n > 4096 || m > 4096 || a > 256 {
            return Err(Error::Parse("model dimensions out of range".into()));
        }
        keyword(&mut tokens, "initial")?;
        let initial = reals(&mut tokens, n)?;
        let mut transitions = Vec::with_capacity(a);
        for i in 0..a {
            keyword(&mut tokens, "transition")?;
            let idx = count(&mut tokens, "transition index")?;
            if idx != i {
                return Err(Error::Parse(format!("transition {idx} out of order, expected {i}")));
            }
            transitions.push(reals(&mut tokens, n * n)?);
        }
        keyword(&mut tokens, "emission")?;
        let emission = reals(&mut tokens, n * m)?;
        if let Some(t) = tokens.next() {
            return Err(Error::Parse(format!("trailing token '{t}'")));
        }
        Self::new(transitions, emission, initial).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let row = |out: &mut String, r: &[f64]| {
            let cells: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        };
        let mut out = String::new();
        let _ = writeln!(out, "states {}\nobservations {}\nactions {}", self.n_states, self.n_obs, self.n_actions());
        out.push_str("initial\n");
        row(&mut out, &self.initial);
        for (a, p) in self.transitions.iter().enumerate() {
            let _ = writeln!(out, "transition {a}");
            p.chunks(self.n_states).for_each(|r| row(&mut out, r));
        }
        out.push_str("emission\n");
        self.emission.chunks(self.n_obs).for_each(|r| row(&mut out, r));
        out
    }
}

/// Mixes per-action transition matrices under a state-independent policy.
pub fn policy_transition(hmm: &DenseHmm, policy: &[f64]) -> Result<Vec<f64>> {
    if policy.len() != hmm.n_actions() {
        return invalid_arg("policy length does not match the action count");
    }
    let n = hmm.n_states();
    let mut p = vec![0.0; n * n];
    for (a, &pa) in policy.iter().enumerate() {
        p.iter_mut().zip(hmm.transition(a)).for_each(|(x, &y)| *x += pa * y);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

/// Series length used when the infinite-horizon solve is singular.
pub const FALLBACK_TERMS: usize = 10_000;

/// Successor representation `sum_l gamma^l P^l D` over `l = 0..=T`, or
/// `(I - gamma P)^-1 D` for an infinite horizon.
///
/// `p` is `n x n`, `d` is `n x m`. If the infinite-horizon system is singular
/// the series is truncated after [`FALLBACK_TERMS`] terms.
pub fn sr_closed_form(p: &[f64], d: &[f64], n: usize, gamma: f64, horizon: Horizon) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return invalid_arg(format!("discount {gamma} outside [0, 1)"));
    }
    if n == 0 || !d.len().is_multiple_of(n) || d.is_empty() {
        return invalid_arg("emission shape does not match the state count");
    }
    check_stochastic("policy transition", p, n, n)?;
    let m = d.len() / n;
    match horizon {
        Horizon::Finite(t) => Ok(sr_series(p, d, n, m, gamma, t)),
        Horizon::Infinite => {
            let a = DMatrix::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - gamma * p[i * n + j]);
            let b = DMatrix::from_fn(n, m, |i, j| d[i * m + j]);
            match a.lu().solve(&b) {
                Some(x) if x.iter().all(|v| v.is_finite()) => {
                    Ok((0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| x[(i, j)]).collect())
                }
                _ => Ok(sr_series(p, d, n, m, gamma, FALLBACK_TERMS)),
            }
        }
    }
}

fn sr_series(p: &[f64], d: &[f64], n: usize, m: usize, gamma: f64, t: usize) -> Vec<f64> {
    let mut term = d.to_vec();
    let mut acc = d.to_vec();
    for _ in 0..t {
        let mut next = vec![0.0; n * m];
        for i in 0..n {
            for k in 0..n {
                let pik = p[i * n + k];
                if pik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    next[i * m + j] += gamma * pik * term[k * m + j];
                }
            }
        }
        acc.iter_mut().zip(&next).for_each(|(a, x)| *a += x);
        term = next;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Vec<f64> {
        (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()
    }

    fn cycle(n: usize) -> Vec<f64> {
        (0..n * n).map(|k| if (k / n + 1) % n == k % n { 1.0 } else { 0.0 }).collect()
    }

    fn random_stochastic(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() + 0.05).collect();
        row_normalize(&raw, cols)
    }

    #[test]
    fn cycle_with_identity_emission_tracks_state() {
        let hmm = DenseHmm::new(vec![cycle(3)], identity(3), vec![1.0 / 3.0; 3]).unwrap();
        let post = hmm.forward_filter(&[1, 2, 0, 1], &[]).unwrap();
        for (t, p) in post.iter().enumerate() {
            let expect: Vec<f64> = (0..3).map(|s| if s == (1 + t) % 3 { 1.0 } else { 0.0 }).collect();
            assert_eq!(p, &expect);
        }
        assert!(matches!(hmm.forward_filter(&[1, 1], &[]), Err(Error::ZeroLikelihood { step: 1 })));
    }

    #[test]
    fn uniform_model_stays_uniform() {
        let hmm = DenseHmm::new(vec![vec![0.25; 16]], vec![0.5; 8], vec![0.25; 4]).unwrap();
        for p in hmm.forward_filter(&[0, 1, 1, 0, 1], &[]).unwrap() {
            assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn filter_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p0 = random_stochastic(&mut rng, 3, 3);
        let p1 = random_stochastic(&mut rng, 3, 3);
        let d = random_stochastic(&mut rng, 3, 2);
        let init = random_stochastic(&mut rng, 1, 3);
        let hmm = DenseHmm::new(vec![p0, p1], d, init).unwrap();
        let obs = [0, 1, 1, 0, 1];
        let actions = [1, 0, 0, 1];
        let post = hmm.forward_filter(&obs, &actions).unwrap();

        // p(h_t | o_1..t) by summing the joint over all 3^(t+1) paths
        for t in 0..obs.len() {
            let mut marg = [0.0; 3];
            for code in 0..3usize.pow(t as u32 + 1) {
                let path: Vec<usize> = (0..=t).map(|i| code / 3usize.pow(i as u32) % 3).collect();
                let mut w = hmm.initial()[path[0]] * hmm.emission()[path[0] * 2 + obs[0]];
                for i in 1..=t {
                    w *= hmm.transition(actions[i - 1])[path[i - 1] * 3 + path[i]];
                    w *= hmm.emission()[path[i] * 2 + obs[i]];
                }
                marg[path[t]] += w;
            }
            let z: f64 = marg.iter().sum();
            for s in 0..3 {
                assert!((post[t][s] - marg[s] / z).abs() < 1e-12);
            }
            assert!((post[t].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(DenseHmm::new(vec![vec![0.5, 0.4, 0.5, 0.5]], identity(2), vec![0.5, 0.5]).is_err());
        assert!(DenseHmm::new(vec![cycle(2)], vec![1.0, 0.0, 1.0], vec![0.5, 0.5]).is_err());
        let hmm = DenseHmm::new(vec![cycle(2), identity(2)], identity(2), vec![0.5, 0.5]).unwrap();
        assert!(hmm.forward_filter(&[0, 1], &[]).is_err());
        assert!(hmm.forward_filter(&[0, 2], &[0]).is_err());
    }

    #[test]
    fn two_state_cycle_sr() {
        let m = sr_closed_form(&cycle(2), &identity(2), 2, 0.5, Horizon::Infinite).unwrap();
        let expect = [4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0];
        for (a, b) in m.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = vec![0.3, 0.7, 0.9, 0.1];
        assert_eq!(sr_closed_form(&cycle(2), &d, 2, 0.0, Horizon::Infinite).unwrap(), d);
        assert_eq!(sr_closed_form(&cycle(2), &d, 2, 0.0, Horizon::Finite(5)).unwrap(), d);
        assert!(sr_closed_form(&cycle(2), &d, 2, 1.0, Horizon::Infinite).is_err());
    }

    #[test]
    fn truncated_sr_matches_term_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 4;
        let p = random_stochastic(&mut rng, n, n);
        let d = random_stochastic(&mut rng, n, 3);
        let gamma = 0.8;
        for t in [0usize, 1, 3, 7] {
            let m = sr_closed_form(&p, &d, n, gamma, Horizon::Finite(t)).unwrap();
            // explicit matrix powers via nalgebra
            let pm = DMatrix::from_row_slice(n, n, &p);
            let dm = DMatrix::from_row_slice(n, 3, &d);
            let mut acc = DMatrix::<f64>::zeros(n, 3);
            let mut power = DMatrix::<f64>::identity(n, n);
            for l in 0..=t {
                acc += gamma.powi(l as i32) * &power * &dm;
                power = &power * &pm;
            }
            for i in 0..n {
                let row_sum: f64 = m[i * 3..(i + 1) * 3].iter().sum();
                assert!((row_sum - (1.0 - gamma.powi(t as i32 + 1)) / (1.0 - gamma)).abs() < 1e-9);
                for j in 0..3 {
                    assert!((m[i * 3 + j] - acc[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn infinite_sr_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 5;
        let p = random_stochastic(&mut rng, n, n);
        let d = random_stochastic(&mut rng, n, 2);
        let gamma = 0.95;
        let m = sr_closed_form(&p, &d, n, gamma, Horizon::Infinite).unwrap();
        for i in 0..n {
            for j in 0..2 {
                let pm: f64 = (0..n).map(|k| p[i * n + k] * m[k * 2 + j]).sum();
                assert!((m[i * 2 + j] - d[i * 2 + j] - gamma * pm).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn policy_mixing() {
        let hmm = DenseHmm::new(vec![cycle(2), identity(2)], identity(2), vec![1.0, 0.0]).unwrap();
        assert_eq!(policy_transition(&hmm, &[0.5, 0.5]).unwrap(), vec![0.5; 4]);
        assert!(policy_transition(&hmm, &[1.0]).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let text = "# two-state fixture\nstates 2\nobservations 3\nactions 2\ninitial\n0.5 0.5\n\
                    transition 0\n0 1\n1 0\ntransition 1\n1 0\n0 1\nemission\n0.5 0.25 0.25\n0 0 1\n";
        let hmm = DenseHmm::parse(text).unwrap();
        assert_eq!(hmm.n_actions(), 2);
        assert_eq!(hmm.n_obs(), 3);
        assert_eq!(DenseHmm::parse(&hmm.to_text()).unwrap(), hmm);
        assert!(DenseHmm::parse("states 2\nobservations").is_err());
        assert!(DenseHmm::parse(&text.replace("0 0 1", "0 0 2")).is_err());
        assert!(DenseHmm::parse(&format!("{text} 7")).is_err());
    }
}
