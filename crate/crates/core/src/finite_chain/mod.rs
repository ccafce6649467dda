//! Exact engines for finite-state Markov chains.
//!
//! A [`FiniteChain`] is a row-stochastic kernel `P` together with an
//! observable `f` that is centered under the stationary law `π` at
//! construction, so that `X_i = f(ξ_i)` is a centered stationary sequence
//! under `π`. All projective criteria reduce to iterating `P` on vectors.

mod blocks;
mod criteria;
mod ergodic;
mod inequality;

pub use blocks::{block_diagnostics_exact, BlockDiagnostics, Estimate, EpsStat};
pub(crate) use blocks::lindeberg_stats;
pub use criteria::{
    alpha_coeffs, cond21_series, eta_exact, gordin_l1_stats, hh_series, mw_series, AlphaMode, GordinStats,
};
pub use ergodic::{ergodic_checks, ErgodicReport};
pub use inequality::{max_inequality_bruteforce, MaxInequality};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-13;
const STATIONARY_MAX_ITER: usize = 1_000_000;

/// On-disk form of a chain: `{"kernel": [[...]], "f": [...], "labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub kernel: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FiniteChain {
    n: usize,
    kernel: Vec<f64>,
    cumulative: Vec<f64>,
    f: Vec<f64>,
    f_mean: f64,
    labels: Option<Vec<f64>>,
    pi: Vec<f64>,
}

impl FiniteChain {
    /// Builds the chain, computes `π` and centers `f`.
    pub fn new(kernel: Vec<Vec<f64>>, f: Vec<f64>, labels: Option<Vec<f64>>) -> Result<Self> {
        let n = kernel.len();
        if n < 2 {
            return invalid("a chain needs at least two states");
        }
        if f.len() != n {
            return invalid(format!("observable has {} entries for {n} states", f.len()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return invalid("observable contains a non-finite value");
        }
        if let Some(l) = &labels {
            if l.len() != n || l.iter().any(|v| !v.is_finite()) {
                return invalid("labels must be finite, one per state");
            }
        }
        let pi = stationary(&kernel)?;
        let flat: Vec<f64> = kernel.into_iter().flatten().collect();
        let mut cumulative = Vec::with_capacity(n * n);
        for row in flat.chunks(n) {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
        }
        let f_mean: f64 = pi.iter().zip(&f).map(|(p, v)| p * v).sum();
        let f = f.iter().map(|v| v - f_mean).collect();
        Ok(FiniteChain {
            n,
            kernel: flat,
            cumulative,
            f,
            f_mean,
            labels,
            pi,
        })
    }

    pub fn from_spec(spec: ChainSpec) -> Result<Self> {
        Self::new(spec.kernel, spec.f, spec.labels)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ChainSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed chain JSON: {e}")))?;
        Self::from_spec(spec)
    }

    /// The chain with the (already centered) observable, as stored.
    pub fn to_spec(&self) -> ChainSpec {
        ChainSpec {
            kernel: self.kernel.chunks(self.n).map(|r| r.to_vec()).collect(),
            f: self.f.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Same kernel with a different observable.
    pub fn with_observable(&self, f: Vec<f64>) -> Result<Self> {
        let spec = self.to_spec();
        Self::new(spec.kernel, f, spec.labels)
    }

    /// Two-state chain with `P(0,1) = a`, `P(1,0) = b`.
    pub fn two_state(a: f64, b: f64, f: [f64; 2]) -> Result<Self> {
        Self::new(vec![vec![1.0 - a, a], vec![b, 1.0 - b]], f.to_vec(), Some(vec![0.0, 1.0]))
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// The centered observable.
    pub fn observable(&self) -> &[f64] {
        &self.f
    }

    /// `π(f)` of the observable as supplied, before centering.
    pub fn observable_mean(&self) -> f64 {
        self.f_mean
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn transition(&self, x: usize, y: usize) -> f64 {
        self.kernel[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.kernel[x * self.n..(x + 1) * self.n]
    }

    /// `(Pv)(x) = Σ_y P(x,y) v(y)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.kernel
            .chunks(self.n)
            .map(|row| row.iter().zip(v).map(|(p, w)| p * w).sum())
            .collect()
    }

    /// `(μP)(y) = Σ_x μ(x) P(x,y)`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &m) in self.kernel.chunks(self.n).zip(mu) {
            if m != 0.0 {
                for (o, p) in out.iter_mut().zip(row) {
                    *o += m * p;
                }
            }
        }
        out
    }

    /// `π(u·v)`.
    pub fn pi_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.pi.iter().zip(u).zip(v).map(|((p, a), b)| p * a * b).sum()
    }

    /// Norm in `L²(π)`.
    pub fn pi_norm(&self, v: &[f64]) -> f64 {
        self.pi_dot(v, v).max(0.0).sqrt()
    }

    /// Period of the (irreducible) kernel.
    pub fn period(&self) -> usize {
        let mut level = vec![usize::MAX; self.n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(x) = queue.pop_front() {
            for y in 0..self.n {
                if self.transition(x, y) > 0.0 {
                    if level[y] == usize::MAX {
                        level[y] = level[x] + 1;
                        queue.push_back(y);
                    } else {
                        g = gcd(g, (level[x] + 1).abs_diff(level[y]));
                    }
                }
            }
        }
        g.max(1)
    }

    pub fn require_aperiodic(&self) -> Result<()> {
        match self.period() {
            1 => Ok(()),
            d => Err(Error::Periodic(d)),
        }
    }

    /// One transition from `x` by inverse-cdf sampling of row `x`.
    pub fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let row = &self.cumulative[x * self.n..(x + 1) * self.n];
        row.partition_point(|&c| c <= u).min(self.n - 1)
    }

    /// A state drawn from `π`.
    pub fn sample_stationary(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in self.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                return x;
            }
        }
        self.n - 1
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_kernel(kernel: &[Vec<f64>]) -> Result<usize> {
    let n = kernel.len();
    for (x, row) in kernel.iter().enumerate() {
        if row.len() != n {
            return invalid(format!("kernel row {x} has {} entries, expected {n}", row.len()));
        }
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return invalid(format!("kernel row {x} has a negative or non-finite entry"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return invalid(format!("kernel row {x} sums to {s}"));
        }
    }
    Ok(n)
}

fn reaches_all(n: usize, edge: impl Fn(usize, usize) -> bool) -> Option<usize> {
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0usize];
    while let Some(x) = stack.pop() {
        for y in 0..n {
            if !seen[y] && edge(x, y) {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.iter().position(|s| !s)
}

/// Stationary law of an irreducible row-stochastic kernel.
///
/// Power iteration on the lazy kernel `(I + P)/2`, which has the same
/// invariant law and is aperiodic, until the L¹ change drops below 1e-13.
/// Iteration then continues while the change keeps shrinking, so the result
/// is a fixed point to rounding precision.
pub fn stationary(kernel: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_kernel(kernel)?;
    if n == 0 {
        return invalid("empty kernel");
    }
    if let Some(y) = reaches_all(n, |x, y| kernel[x][y] > 0.0) {
        return Err(Error::NotIrreducible(y));
    }
    if let Some(y) = reaches_all(n, |x, y| kernel[y][x] > 0.0) {
        return Err(Error::NotIrreducible(y));
    }
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    let mut converged = false;
    for _ in 0..STATIONARY_MAX_ITER {
        let previous = change;
        next.iter_mut().zip(&pi).for_each(|(o, p)| *o = 0.5 * p);
        for (row, &m) in kernel.iter().zip(&pi) {
            for (o, p) in next.iter_mut().zip(row) {
                *o += 0.5 * m * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        change = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if converged && (change >= previous || change == 0.0) {
            return Ok(if change < previous { next } else { pi });
        }
        std::mem::swap(&mut pi, &mut next);
        converged |= change < STATIONARY_TOL;
    }
    if converged {
        return Ok(pi);
    }
    Err(Error::NoConvergence {
        iterations: STATIONARY_MAX_ITER,
        residual: change,
    })
}

/// A trajectory `ξ_0 = x0, ξ_1, ..., ξ_n` and its observations
/// `X_i = f(ξ_i)` for `i = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub states: Vec<usize>,
    pub xs: Vec<f64>,
}

pub fn sample_path(chain: &FiniteChain, x0: usize, n: usize, seed: u64) -> Result<SamplePath> {
    if x0 >= chain.n_states() {
        return invalid(format!("start state {x0} out of range"));
    }
    if n == 0 {
        return invalid("path length must be at least 1");
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut states = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n);
    let mut x = x0;
    states.push(x);
    for _ in 0..n {
        x = chain.step(x, &mut rng);
        states.push(x);
        xs.push(chain.observable()[x]);
    }
    Ok(SamplePath { states, xs })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn symmetric() -> FiniteChain {
        FiniteChain::two_state(0.25, 0.25, [1.0, -1.0]).unwrap()
    }

    pub(crate) fn iid_rademacher() -> FiniteChain {
        FiniteChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, -1.0], Some(vec![0.0, 1.0])).unwrap()
    }

    #[test]
    fn stationary_two_state() {
        let pi = stationary(&[vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        assert_relative_eq!(pi[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(pi[1], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn stationary_doubly_stochastic_is_uniform() {
        let k = vec![vec![0.0, 0.3, 0.7], vec![0.7, 0.0, 0.3], vec![0.3, 0.7, 0.0]];
        let pi = stationary(&k).unwrap();
        for p in pi {
            assert_relative_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_is_fixed_point_for_asymmetric_chain() {
        let k = vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]];
        let chain = FiniteChain::new(k, vec![1.0, 2.0, 3.0], None).unwrap();
        let pushed = chain.push_forward(chain.stationary());
        for (a, b) in pushed.iter().zip(chain.stationary()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(chain.pi_dot(chain.observable(), &[1.0; 3]).abs() < 1e-10);
    }

    #[test]
    fn absorbing_state_is_rejected() {
        let k = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        assert!(matches!(stationary(&k), Err(Error::NotIrreducible(_))));
    }

    #[test]
    fn bad_rows_are_rejected() {
        assert!(stationary(&[vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(stationary(&[vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(FiniteChain::new(vec![vec![1.0]], vec![0.0], None).is_err());
    }

    #[test]
    fn period_detection() {
        let flip = FiniteChain::two_state(1.0, 1.0, [1.0, -1.0]).unwrap();
        assert_eq!(flip.period(), 2);
        assert_eq!(symmetric().period(), 1);
        let cycle = FiniteChain::new(
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        assert_eq!(cycle.period(), 3);
    }

    #[test]
    fn json_roundtrip() {
        let c = FiniteChain::from_json(r#"{"kernel": [[0.75,0.25],[0.25,0.75]], "f": [2, 0], "labels": [0, 1]}"#).unwrap();
        assert_eq!(c.observable(), &[1.0, -1.0]);
        assert_eq!(c.observable_mean(), 1.0);
        assert!(FiniteChain::from_json("{\"kernel\": 3}").is_err());
    }

    #[test]
    fn deterministic_chain_path() {
        let cycle = FiniteChain::new(
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        let path = sample_path(&cycle, 0, 6, 1).unwrap();
        assert_eq!(path.states, vec![0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(path.xs, vec![0.0, -1.0, 1.0, 0.0, -1.0, 1.0]);
    }

    #[test]
    fn same_seed_same_path() {
        let c = symmetric();
        assert_eq!(sample_path(&c, 0, 500, 9).unwrap(), sample_path(&c, 0, 500, 9).unwrap());
        assert_ne!(sample_path(&c, 0, 500, 9).unwrap(), sample_path(&c, 0, 500, 10).unwrap());
        assert!(sample_path(&c, 2, 5, 1).is_err());
    }

    #[test]
    fn occupation_frequency() {
        let path = sample_path(&symmetric(), 0, 1_000_000, 2024).unwrap();
        let zeros = path.states[1..].iter().filter(|&&s| s == 0).count() as f64 / 1e6;
        assert!((zeros - 0.5).abs() < 0.002, "occupation {zeros}");
    }
}
