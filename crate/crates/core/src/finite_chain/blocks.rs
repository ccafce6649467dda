//! Block conditions C1–C4 at a fixed `(m, p)` for a chain started at a state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eta_exact, FiniteChain};
use crate::error::{invalid, Error, Result};
use crate::numerics::mean_and_stderr;

/// Largest number of skeleton paths enumerated for the exact C2 outer
/// expectation; beyond it the skeleton chain is sampled.
const C2_ENUMERATION_LIMIT: u128 = 1_000_000;
const C2_SKELETON_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Monte Carlo standard error; `None` for exact values.
    pub stderr: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsStat {
    pub eps: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub paper_condition: String,
    pub m: usize,
    pub p: usize,
    /// Description of the starting point.
    pub start: String,
    pub c1: Estimate,
    /// Deviations for `E_{(i-1)p}((S_p^{(i+1)})²)` against `η` and for
    /// `E_{(i-1)p}((S_p^{(i)} + S_p^{(i+1)})²)` against `2η`.
    pub c2: [Estimate; 2],
    pub c3: Vec<EpsStat>,
    pub c4: Vec<EpsStat>,
    pub eta_used: f64,
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                for (o, bkj) in row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                    *o += aik * bkj;
                }
            }
        }
    }
    out
}

/// `Pᵖ` as a flat row-major matrix, by repeated squaring.
pub(crate) fn kernel_power(chain: &FiniteChain, p: usize) -> Vec<f64> {
    let n = chain.n_states();
    let mut result: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    let mut base: Vec<f64> = (0..n).flat_map(|x| chain.row(x).to_vec()).collect();
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            result = matmul(&result, &base, n);
        }
        e >>= 1;
        if e > 0 {
            base = matmul(&base, &base, n);
        }
    }
    result
}

fn apply_flat(q: &[f64], v: &[f64]) -> Vec<f64> {
    q.chunks(v.len()).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn push_flat(q: &[f64], mu: &[f64]) -> Vec<f64> {
    let n = mu.len();
    let mut out = vec![0.0; n];
    for (row, &w) in q.chunks(n).zip(mu) {
        if w != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, r)| *o += w * r);
        }
    }
    out
}

/// `(A_n, B_n)` with `A_n(x) = E_x(S_n)` and `B_n(x) = E_x(S_n²)`.
fn moments(chain: &FiniteChain, n: usize) -> (Vec<f64>, Vec<f64>) {
    let f = chain.observable();
    let mut a = vec![0.0; f.len()];
    let mut b = vec![0.0; f.len()];
    for _ in 0..n {
        let b_in: Vec<f64> = (0..f.len()).map(|x| f[x] * f[x] + 2.0 * f[x] * a[x] + b[x]).collect();
        let a_in: Vec<f64> = f.iter().zip(&a).map(|(u, v)| u + v).collect();
        b = chain.apply(&b_in);
        a = chain.apply(&a_in);
    }
    (a, b)
}

// E|Σ_{i<m} w(Y_i) − target| for the skeleton chain Y with kernel `q`
// started at x0: exhaustive over the n^{m-1} paths when that is small,
// otherwise sampled.
#[allow(clippy::too_many_arguments)]
fn skeleton_abs_deviation(
    q: &[f64],
    n: usize,
    x0: usize,
    m: usize,
    w: &[f64],
    target: f64,
    seed: u64,
    limit: u128,
) -> Estimate {
    let paths = (n as u128).checked_pow((m - 1) as u32);
    if paths.is_some_and(|c| c <= limit) {
        fn walk(q: &[f64], n: usize, x: usize, left: usize, prob: f64, acc: f64, w: &[f64], target: f64) -> f64 {
            if left == 0 {
                return prob * (acc - target).abs();
            }
            (0..n)
                .filter(|&y| q[x * n + y] > 0.0)
                .map(|y| walk(q, n, y, left - 1, prob * q[x * n + y], acc + w[y], w, target))
                .sum()
        }
        return Estimate::exact(walk(q, n, x0, m - 1, 1.0, w[x0], w, target));
    }
    let cumulative: Vec<f64> = q
        .chunks(n)
        .flat_map(|row| {
            row.iter()
                .scan(0.0, |s, v| {
                    *s += v;
                    Some(*s)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let vals: Vec<f64> = (0..C2_SKELETON_SAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replica_rng(seed, r as u64);
            let mut x = x0;
            let mut acc = w[x0];
            for _ in 1..m {
                let u: f64 = rng.random();
                x = cumulative[x * n..(x + 1) * n].partition_point(|&c| c <= u).min(n - 1);
                acc += w[x];
            }
            (acc - target).abs()
        })
        .collect();
    let (value, se) = mean_and_stderr(&vals);
    Estimate { value, stderr: Some(se) }
}

/// `E_0((1/m) Σ_i (Z_i²/p) 1{|Z_i| > ε√(mp)})` for per-replica block
/// statistics `Z_1..Z_m`, with standard errors over replicas.
pub(crate) fn lindeberg_stats(blocks: &[Vec<f64>], eps_grid: &[f64], m: usize, p: usize) -> Vec<EpsStat> {
    let mp = (m * p) as f64;
    eps_grid
        .iter()
        .map(|&eps| {
            let cut = eps * mp.sqrt();
            let vals: Vec<f64> = blocks
                .iter()
                .map(|b| b.iter().map(|&s| if s.abs() > cut { s * s / p as f64 } else { 0.0 }).sum::<f64>() / m as f64)
                .collect();
            let (value, stderr) = mean_and_stderr(&vals);
            EpsStat { eps, value, stderr }
        })
        .collect()
}

/// C1 and C2 exactly from kernel powers, C3 and C4 by Monte Carlo over
/// `replicas` trajectories of length `mp` started at `x0`.
pub fn block_diagnostics_exact(
    chain: &FiniteChain,
    x0: usize,
    m: usize,
    p: usize,
    eps_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<BlockDiagnostics> {
    if m < 2 || p < 1 {
        return invalid("block diagnostics need m ≥ 2 and p ≥ 1");
    }
    if x0 >= chain.n_states() {
        return invalid(format!("start state {x0} out of range"));
    }
    if replicas < 2 {
        return invalid("need at least two replicas");
    }
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return invalid("eps values must be positive");
    }
    let n = chain.n_states();
    let mp = (m * p) as f64;
    let (eta, _) = eta_exact(chain, 100_000, 1e-13)?;
    let q = kernel_power(chain, p);

    // C1: h_p = Σ_{j=p+1}^{2p} Pʲf = Pᵖ(A_p) since A_p = Σ_{j=1}^p Pʲf.
    let (a_p, b_p) = moments(chain, p);
    let h = apply_flat(&q, &a_p);
    let mut mu = vec![0.0; n];
    mu[x0] = 1.0;
    let mut c1 = 0.0;
    for _ in 0..m {
        c1 += mu.iter().zip(&h).map(|(w, v)| w * v.abs()).sum::<f64>();
        mu = push_flat(&q, &mu);
    }
    c1 /= mp.sqrt();

    // C2 integrands as functions of ξ_{(i-1)p}.
    let v_next: Vec<f64> = apply_flat(&q, &b_p).iter().map(|v| v / mp).collect();
    let (_, b_2p) = moments(chain, 2 * p);
    let v_pair: Vec<f64> = b_2p.iter().map(|v| v / mp).collect();
    let c2 = [
        skeleton_abs_deviation(&q, n, x0, m, &v_next, eta, crate::rng::split(seed, 1), C2_ENUMERATION_LIMIT),
        skeleton_abs_deviation(&q, n, x0, m, &v_pair, 2.0 * eta, crate::rng::split(seed, 2), C2_ENUMERATION_LIMIT),
    ];

    // C3/C4: per replica, block sums and block running maxima.
    let mc_seed = crate::rng::split(seed, 3);
    let per_replica: Vec<(Vec<f64>, Vec<f64>)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replica_rng(mc_seed, r as u64);
            let mut x = x0;
            let mut sums = Vec::with_capacity(m);
            let mut maxes = Vec::with_capacity(m);
            for _ in 0..m {
                let mut s = 0.0f64;
                let mut mx = 0.0f64;
                for _ in 0..p {
                    x = chain.step(x, &mut rng);
                    s += chain.observable()[x];
                    mx = mx.max(s.abs());
                }
                sums.push(s);
                maxes.push(mx);
            }
            (sums, maxes)
        })
        .collect();
    let sums: Vec<Vec<f64>> = per_replica.iter().map(|r| r.0.clone()).collect();
    let maxes: Vec<Vec<f64>> = per_replica.into_iter().map(|r| r.1).collect();
    let c3 = lindeberg_stats(&sums, eps_grid, m, p);
    let c4 = lindeberg_stats(&maxes, eps_grid, m, p);
    if !c1.is_finite() {
        return Err(Error::InvalidInput("non-finite C1 statistic".into()));
    }
    Ok(BlockDiagnostics {
        paper_condition: "C1-C4".into(),
        m,
        p,
        start: format!("state {x0}"),
        c1: Estimate::exact(c1),
        c2,
        c3,
        c4,
        eta_used: eta,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{iid_rademacher, symmetric};
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments_match_enumeration() {
        // E_x(S_n²) by summing over all 2^n paths of the symmetric chain.
        let chain = symmetric();
        let n = 6;
        let (a, b) = moments(&chain, n);
        for x0 in 0..2 {
            let mut ea = 0.0;
            let mut eb = 0.0;
            for code in 0..(1u32 << n) {
                let mut x = x0;
                let mut prob = 1.0;
                let mut s = 0.0;
                for i in 0..n {
                    let y = ((code >> i) & 1) as usize;
                    prob *= chain.transition(x, y);
                    s += chain.observable()[y];
                    x = y;
                }
                ea += prob * s;
                eb += prob * s * s;
            }
            assert_relative_eq!(a[x0], ea, epsilon = 1e-12);
            assert_relative_eq!(b[x0], eb, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_power_matches_iteration() {
        let chain = FiniteChain::new(
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        let q = kernel_power(&chain, 13);
        for x in 0..3 {
            let mut mu = vec![0.0; 3];
            mu[x] = 1.0;
            for _ in 0..13 {
                mu = chain.push_forward(&mu);
            }
            for y in 0..3 {
                assert_relative_eq!(q[x * 3 + y], mu[y], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn iid_chain_has_no_c1_and_exact_c2() {
        let d = block_diagnostics_exact(&iid_rademacher(), 0, 4, 8, &[0.5], 100, 3).unwrap();
        assert_eq!(d.c1.value, 0.0);
        assert_relative_eq!(d.eta_used, 1.0, epsilon = 1e-14);
        assert!(d.c2[0].value.abs() < 1e-12);
        assert!(d.c2[1].value.abs() < 1e-12);
        assert!(d.c2[0].stderr.is_none());
    }

    #[test]
    fn zero_observable_gives_zero_statistics() {
        let chain = symmetric().with_observable(vec![0.0, 0.0]).unwrap();
        let d = block_diagnostics_exact(&chain, 1, 3, 5, &[0.1, 1.0], 50, 0).unwrap();
        assert_eq!(d.c1.value, 0.0);
        assert_eq!(d.c2[0].value, 0.0);
        assert_eq!(d.c2[1].value, 0.0);
        assert!(d.c3.iter().chain(&d.c4).all(|s| s.value == 0.0));
    }

    #[test]
    fn symmetric_chain_c1_vanishes() {
        let d = block_diagnostics_exact(&symmetric(), 0, 8, 64, &[1.0], 20, 5).unwrap();
        assert!(d.c1.value < 1e-10);
    }

    #[test]
    fn c1_decreases_with_p() {
        let chain = FiniteChain::new(
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        let stats: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&p| block_diagnostics_exact(&chain, 0, 4, p, &[1.0], 4, 1).unwrap().c1.value)
            .collect();
        for w in stats.windows(2) {
            assert!(w[1] < 0.9 * w[0], "{stats:?}");
        }
    }

    #[test]
    fn c4_dominates_c3() {
        let d = block_diagnostics_exact(&symmetric(), 0, 4, 16, &[0.1, 0.3, 0.6], 400, 9).unwrap();
        for (a, b) in d.c3.iter().zip(&d.c4) {
            assert!(b.value >= a.value);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(block_diagnostics_exact(&symmetric(), 0, 1, 4, &[1.0], 10, 0).is_err());
        assert!(block_diagnostics_exact(&symmetric(), 0, 2, 0, &[1.0], 10, 0).is_err());
        assert!(block_diagnostics_exact(&symmetric(), 5, 2, 2, &[1.0], 10, 0).is_err());
    }

    #[test]
    fn sampled_c2_agrees_with_enumeration() {
        let chain = FiniteChain::new(
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap();
        let q = kernel_power(&chain, 2);
        let w = [0.3, -1.0, 2.0];
        let exact = skeleton_abs_deviation(&q, 3, 0, 5, &w, 1.0, 1, C2_ENUMERATION_LIMIT);
        assert!(exact.stderr.is_none());
        let sampled = skeleton_abs_deviation(&q, 3, 0, 5, &w, 1.0, 1, 0);
        let se = sampled.stderr.unwrap();
        assert!((sampled.value - exact.value).abs() < 4.0 * se, "{sampled:?} vs {exact:?}");
    }
}
