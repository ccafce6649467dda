//! Pointwise ergodic averages started at a state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiniteChain;
use crate::error::{invalid, Result};
use crate::numerics::{linear_fit, mean_and_stderr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub x0: usize,
    /// `π(z)`, the limit of the averages.
    pub limit: f64,
    /// `(1/n) Σ_{i=1}^n (Pⁱz)(x0)` for `n = 1..=nmax`.
    pub averages: Vec<f64>,
    /// `(n, mean, stderr)` estimates of `(1/n) E_{x0}(max_{i≤n} |z(ξ_i)|)`
    /// at dyadic `n` and at `nmax`.
    pub max_trace: Vec<(usize, f64, f64)>,
    /// Slope of `ln(max_trace)` against `ln n`.
    pub max_trace_slope: Option<f64>,
    pub max_trace_decreasing: bool,
}

fn dyadic_grid(nmax: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
        .take_while(|&n| n <= nmax)
        .collect();
    if grid.last() != Some(&nmax) {
        grid.push(nmax);
    }
    grid
}

/// Exact Cesàro averages of `Pⁱz` at `x0`, and a Monte Carlo trace of the
/// normalized running maximum of `|z(ξ_i)|`.
pub fn ergodic_checks(
    chain: &FiniteChain,
    x0: usize,
    z: &[f64],
    nmax: usize,
    replicas: usize,
    seed: u64,
) -> Result<ErgodicReport> {
    chain.require_aperiodic()?;
    if x0 >= chain.n_states() || z.len() != chain.n_states() {
        return invalid("start state or observable does not match the chain");
    }
    if nmax == 0 || replicas < 2 {
        return invalid("need nmax ≥ 1 and at least two replicas");
    }
    let mut mu = vec![0.0; chain.n_states()];
    mu[x0] = 1.0;
    let mut total = 0.0;
    let mut averages = Vec::with_capacity(nmax);
    for n in 1..=nmax {
        mu = chain.push_forward(&mu);
        total += mu.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        averages.push(total / n as f64);
    }
    let limit = chain.stationary().iter().zip(z).map(|(a, b)| a * b).sum();

    let grid = dyadic_grid(nmax);
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replica_rng(seed, r as u64);
            let mut x = x0;
            let mut running = 0.0f64;
            let mut out = Vec::with_capacity(grid.len());
            let mut next = 0;
            for n in 1..=nmax {
                x = chain.step(x, &mut rng);
                running = running.max(z[x].abs());
                if grid[next] == n {
                    out.push(running / n as f64);
                    next += 1;
                }
            }
            out
        })
        .collect();
    let max_trace: Vec<(usize, f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let col: Vec<f64> = per_replica.iter().map(|r| r[k]).collect();
            let (m, se) = mean_and_stderr(&col);
            (n, m, se)
        })
        .collect();
    let pts: Vec<(f64, f64)> = max_trace
        .iter()
        .filter(|t| t.1 > 0.0)
        .map(|&(n, m, _)| ((n as f64).ln(), m.ln()))
        .collect();
    let max_trace_slope = linear_fit(&pts).map(|f| f.slope);
    let first = max_trace.first().map_or(0.0, |t| t.1);
    let last = max_trace.last().map_or(0.0, |t| t.1);
    let max_trace_decreasing = last == 0.0 || (last < first && max_trace_slope.is_some_and(|s| s < 0.0));
    Ok(ErgodicReport {
        x0,
        limit,
        averages,
        max_trace,
        max_trace_slope,
        max_trace_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::symmetric;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_chain_averages() {
        let chain = symmetric();
        let f = chain.observable().to_vec();
        let r = ergodic_checks(&chain, 0, &f, 64, 50, 4).unwrap();
        for (i, a) in r.averages.iter().enumerate() {
            let n = (i + 1) as f64;
            assert_relative_eq!(*a, (1.0 - 0.5f64.powf(n)) / n, epsilon = 1e-14);
        }
        assert_eq!(r.limit, 0.0);
        assert!(r.max_trace_decreasing);
        // |z| = 1 on every state so the running max is exactly 1.
        for &(n, m, se) in &r.max_trace {
            assert_relative_eq!(m, 1.0 / n as f64, epsilon = 1e-15);
            assert_eq!(se, 0.0);
        }
        assert_relative_eq!(r.max_trace_slope.unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_observable() {
        let r = ergodic_checks(&symmetric(), 1, &[2.5, 2.5], 20, 10, 1).unwrap();
        assert!(r.averages.iter().all(|&a| (a - 2.5).abs() < 1e-14));
        assert_relative_eq!(r.limit, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn bounded_observable_trace() {
        let chain = FiniteChain::new(
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        let z = [0.0, 3.0, -1.0];
        let r = ergodic_checks(&chain, 2, &z, 1000, 200, 8).unwrap();
        assert!(r.max_trace.iter().all(|t| t.1 <= 3.0));
        assert!(r.max_trace_decreasing);
        let tail = r.averages.last().unwrap();
        assert!((tail - r.limit).abs() < 0.02);
    }

    #[test]
    fn dyadic_grid_ends_at_nmax() {
        assert_eq!(dyadic_grid(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(dyadic_grid(8), vec![1, 2, 4, 8]);
    }
}
