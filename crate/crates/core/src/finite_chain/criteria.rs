//! Projective criteria and dependence coefficients evaluated exactly by
//! iterating the kernel on the observable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiniteChain;
use crate::error::{invalid, Result};
use crate::numerics::mean_and_stderr;
use crate::series::{geometric_certificate, SeriesReport, Verdict};

// `(Pᵏf)` for k = 0..=kmax along with the L²(π) norms.
fn iterates(chain: &FiniteChain, kmax: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut vs = Vec::with_capacity(kmax + 1);
    let mut norms = Vec::with_capacity(kmax + 1);
    let mut v = chain.observable().to_vec();
    for _ in 0..=kmax {
        norms.push(chain.pi_norm(&v));
        let next = chain.apply(&v);
        vs.push(v);
        v = next;
    }
    (vs, norms)
}

fn certify(report: SeriesReport, norms: &[f64], scale: f64) -> SeriesReport {
    match geometric_certificate(norms) {
        Some((ratio, tail)) => {
            let mut r = report.with_verdict(Verdict::ConvergentCertified).with_constant("contraction_ratio", ratio);
            r.tail_bound = Some(scale * tail);
            r
        }
        None => report.with_verdict(Verdict::Inconclusive),
    }
}

/// Long-run variance `η = π(f²) + 2 Σ_{k≥1} π(f·Pᵏf)`.
///
/// Iterates until the certified remainder drops below `tol` or `kmax` terms
/// were summed; term `0` of the report is `π(f²)` and term `k ≥ 1` is
/// `2π(f·Pᵏf)`. Without a certificate the verdict is inconclusive and the
/// best partial value is returned.
pub fn eta_exact(chain: &FiniteChain, kmax: usize, tol: f64) -> Result<(f64, SeriesReport)> {
    chain.require_aperiodic()?;
    if kmax < 1 {
        return invalid("kmax must be at least 1");
    }
    let f = chain.observable();
    let f_norm = chain.pi_norm(f);
    let mut terms = vec![chain.pi_dot(f, f)];
    let mut norms = vec![f_norm];
    let mut v = f.to_vec();
    for _ in 1..=kmax {
        v = chain.apply(&v);
        terms.push(2.0 * chain.pi_dot(f, &v));
        norms.push(chain.pi_norm(&v));
        if norms.len() > 6 {
            if let Some((_, tail)) = geometric_certificate(&norms) {
                if 2.0 * f_norm * tail < tol {
                    break;
                }
            }
        }
    }
    let report = certify(SeriesReport::from_terms(terms).tagged("2.2"), &norms, 2.0 * f_norm);
    Ok((report.total(), report))
}

/// Terms `π(|f·Pᵏf|)` for `k = 0..=kmax`.
pub fn cond21_series(chain: &FiniteChain, kmax: usize) -> SeriesReport {
    let (vs, norms) = iterates(chain, kmax);
    let f = chain.observable();
    let terms = vs
        .iter()
        .map(|v| {
            chain
                .stationary()
                .iter()
                .zip(f)
                .zip(v)
                .map(|((p, a), b)| p * (a * b).abs())
                .sum()
        })
        .collect();
    certify(SeriesReport::from_terms(terms).tagged("2.1"), &norms, chain.pi_norm(f))
}

/// Terms `‖E₀(S_n)‖₂ / n^{3/2}` for `n = 1..=nmax`, where
/// `E₀(S_n) = g_n(ξ₀)` with `g_n = Σ_{j=1}^n Pʲf`.
pub fn mw_series(chain: &FiniteChain, nmax: usize) -> SeriesReport {
    let mut g = vec![0.0; chain.n_states()];
    let mut v = chain.observable().to_vec();
    let mut terms = Vec::with_capacity(nmax);
    let mut norms = Vec::with_capacity(nmax);
    for n in 1..=nmax {
        v = chain.apply(&v);
        g.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        norms.push(chain.pi_norm(&v));
        terms.push(chain.pi_norm(&g) / (n as f64).powf(1.5));
    }
    let mut report = SeriesReport::from_terms(terms).tagged("5.2");
    report.first_index = 1;
    match geometric_certificate(&norms) {
        Some((ratio, tail)) => {
            // ‖g_n‖ ≤ ‖g_N‖ + tail for n > N, and Σ_{n>N} n^{-3/2} ≤ 2/√N.
            let g_sup = chain.pi_norm(&g) + tail;
            report.tail_bound = Some(g_sup * 2.0 / (nmax.max(1) as f64).sqrt());
            report.with_constant("contraction_ratio", ratio).with_verdict(Verdict::ConvergentCertified)
        }
        None => report.judge_by_stabilization(1e-6),
    }
}

/// Terms `‖E₀(X_n) − E₋₁(X_n)‖₂ = (π((Pⁿf)²) − π((Pⁿ⁺¹f)²))^{1/2}` for
/// `n = 0..=nmax`.
pub fn hh_series(chain: &FiniteChain, nmax: usize) -> SeriesReport {
    let (_, norms) = iterates(chain, nmax + 1);
    let terms = norms
        .windows(2)
        .map(|w| {
            let d = w[0] * w[0] - w[1] * w[1];
            // A projection norm: negative only through rounding.
            d.max(0.0).sqrt()
        })
        .collect();
    certify(SeriesReport::from_terms(terms).tagged("5.3"), &norms[..=nmax], 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GordinStats {
    pub paper_condition: String,
    /// `max_{n ≤ nmax} ‖E₀(S_n)‖₁`, exact.
    pub sup_norm: f64,
    /// `‖E₀(S_n)‖₁ = π(|g_n|)` for `n = 1..=nmax`.
    pub norms: Vec<f64>,
    /// `(n, mean, stderr)` Monte Carlo estimates of `E|S_n|/√n` under the
    /// stationary start.
    pub ratio_trace: Vec<(usize, f64, f64)>,
}

/// Statistics of the L¹ Gordin criterion: the exact supremum of
/// `‖E₀(S_n)‖₁` and a stationary Monte Carlo trace of `E|S_n|/√n`.
pub fn gordin_l1_stats(chain: &FiniteChain, nmax: usize, replicas: usize, seed: u64) -> Result<GordinStats> {
    if nmax < 1 || replicas < 2 {
        return invalid("need nmax ≥ 1 and at least two replicas");
    }
    let mut g = vec![0.0; chain.n_states()];
    let mut v = chain.observable().to_vec();
    let mut norms = Vec::with_capacity(nmax);
    for _ in 0..nmax {
        v = chain.apply(&v);
        g.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        norms.push(chain.stationary().iter().zip(&g).map(|(p, x)| p * x.abs()).sum());
    }
    let sup_norm = norms.iter().copied().fold(0.0, f64::max);
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replica_rng(seed, r as u64);
            let mut x = chain.sample_stationary(&mut rng);
            let mut s = 0.0;
            (1..=nmax)
                .map(|n| {
                    x = chain.step(x, &mut rng);
                    s += chain.observable()[x];
                    s.abs() / (n as f64).sqrt()
                })
                .collect()
        })
        .collect();
    let ratio_trace = (0..nmax)
        .map(|i| {
            let col: Vec<f64> = per_replica.iter().map(|r| r[i]).collect();
            let (m, se) = mean_and_stderr(&col);
            (i + 1, m, se)
        })
        .collect();
    Ok(GordinStats {
        paper_condition: "2.3".into(),
        sup_norm,
        norms,
        ratio_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    /// `α_Y(0)` from the same formula as `k ≥ 1`.
    Weak,
    /// Strong-mixing convention `α(0) = 1`.
    Rosenblatt,
}

/// `α_Y(k) = max_t Σ_x π(x)|Pᵏ(x, {label ≤ t}) − π({label ≤ t})|` over the
/// nontrivial thresholds `t`, for `k = 0..=kmax`.
pub fn alpha_coeffs(chain: &FiniteChain, kmax: usize, mode: AlphaMode) -> Result<Vec<f64>> {
    let labels = chain
        .labels()
        .ok_or_else(|| crate::Error::InvalidInput("alpha coefficients need state labels".into()))?;
    let mut thresholds: Vec<f64> = labels.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.pop();
    let pi = chain.stationary();
    let mut alphas = vec![0.0f64; kmax + 1];
    for t in thresholds {
        let mut ind: Vec<f64> = labels.iter().map(|&l| if l <= t { 1.0 } else { 0.0 }).collect();
        let mass: f64 = pi.iter().zip(&ind).map(|(p, i)| p * i).sum();
        for alpha in alphas.iter_mut() {
            let dev: f64 = pi.iter().zip(&ind).map(|(p, i)| p * (i - mass).abs()).sum();
            *alpha = alpha.max(dev);
            ind = chain.apply(&ind);
        }
    }
    if mode == AlphaMode::Rosenblatt {
        alphas[0] = 1.0;
    }
    Ok(alphas)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{iid_rademacher, symmetric};
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zero_observable() -> FiniteChain {
        symmetric().with_observable(vec![0.0, 0.0]).unwrap()
    }

    // Brute-force covariance oracle: Cov(X_0, X_k) from the k-step matrix
    // power, built with explicit matrix multiplication.
    fn covariance_by_matrix_power(chain: &FiniteChain, k: usize) -> f64 {
        let n = chain.n_states();
        let mut pk: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _ in 0..k {
            pk = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|l| pk[i][l] * chain.transition(l, j)).sum()).collect())
                .collect();
        }
        let f = chain.observable();
        (0..n)
            .map(|i| chain.stationary()[i] * f[i] * (0..n).map(|j| pk[i][j] * f[j]).sum::<f64>())
            .sum()
    }

    #[test]
    fn eta_symmetric_chain() {
        let (eta, report) = eta_exact(&symmetric(), 200, 1e-14).unwrap();
        assert_relative_eq!(eta, 3.0, epsilon = 1e-10);
        assert_eq!(report.verdict, Verdict::ConvergentCertified);
        assert!(report.tail_bound.unwrap() < 1e-12);
    }

    #[test]
    fn eta_iid_rows_and_zero() {
        let (eta, _) = eta_exact(&iid_rademacher(), 50, 1e-12).unwrap();
        assert_relative_eq!(eta, 1.0, epsilon = 1e-14);
        let (eta0, r) = eta_exact(&zero_observable(), 50, 1e-12).unwrap();
        assert_eq!(eta0, 0.0);
        assert_eq!(r.verdict, Verdict::ConvergentCertified);
    }

    #[test]
    fn eta_rejects_periodic() {
        let flip = FiniteChain::two_state(1.0, 1.0, [1.0, -1.0]).unwrap();
        assert!(matches!(eta_exact(&flip, 10, 1e-10), Err(crate::Error::Periodic(2))));
    }

    #[test]
    fn eta_matches_covariance_oracle() {
        let k = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]];
        let chain = FiniteChain::new(k, vec![1.0, -2.0, 0.5], None).unwrap();
        let (eta, _) = eta_exact(&chain, 400, 1e-15).unwrap();
        let oracle = covariance_by_matrix_power(&chain, 0)
            + 2.0 * (1..60).map(|k| covariance_by_matrix_power(&chain, k)).sum::<f64>();
        assert_relative_eq!(eta, oracle, epsilon = 1e-12);
    }

    #[test]
    fn cond21_examples() {
        let r = cond21_series(&symmetric(), 200);
        for k in 0..10 {
            assert_relative_eq!(r.terms[k], 0.5f64.powi(k as i32), epsilon = 1e-15);
        }
        assert_relative_eq!(r.total(), 2.0, epsilon = 1e-10);
        assert_eq!(r.paper_condition.as_deref(), Some("2.1"));
        assert_relative_eq!(cond21_series(&iid_rademacher(), 20).total(), 1.0, epsilon = 1e-15);
        assert_eq!(cond21_series(&zero_observable(), 20).total(), 0.0);
    }

    #[test]
    fn mw_examples() {
        let r = mw_series(&symmetric(), 4000);
        for n in 1..20 {
            let want = (1.0 - 0.5f64.powi(n)) / (n as f64).powf(1.5);
            assert_relative_eq!(r.terms[n as usize - 1], want, epsilon = 1e-14);
        }
        let direct: f64 = (1..=4000).map(|n| (1.0 - 0.5f64.powi(n)) / (n as f64).powf(1.5)).sum();
        assert_relative_eq!(r.total(), direct, epsilon = 1e-12);
        assert!(r.tail_bound.unwrap() < 2.0 / 4000f64.sqrt() * 1.0001);
        assert_eq!(mw_series(&iid_rademacher(), 30).total(), 0.0);
        assert_eq!(mw_series(&zero_observable(), 30).total(), 0.0);
    }

    #[test]
    fn hh_examples() {
        let r = hh_series(&symmetric(), 80);
        assert_relative_eq!(r.terms[0], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.total(), 3f64.sqrt(), epsilon = 1e-8);
        let iid = hh_series(&iid_rademacher(), 10);
        assert_relative_eq!(iid.terms[0], 1.0, epsilon = 1e-15);
        assert!(iid.terms[1..].iter().all(|&t| t == 0.0));
        assert_eq!(hh_series(&zero_observable(), 10).total(), 0.0);
    }

    #[test]
    fn gordin_examples() {
        let g = gordin_l1_stats(&symmetric(), 40, 200, 1).unwrap();
        for (i, v) in g.norms.iter().enumerate() {
            assert_relative_eq!(*v, 1.0 - 0.5f64.powi(i as i32 + 1), epsilon = 1e-14);
        }
        assert!(g.sup_norm <= 1.0 && g.sup_norm > 0.999);
        let iid = gordin_l1_stats(&iid_rademacher(), 10, 50, 1).unwrap();
        assert_eq!(iid.sup_norm, 0.0);
        let zero = gordin_l1_stats(&zero_observable(), 10, 50, 1).unwrap();
        assert_eq!(zero.sup_norm, 0.0);
        assert!(zero.ratio_trace.iter().all(|&(_, m, se)| m == 0.0 && se == 0.0));
    }

    #[test]
    fn alpha_examples() {
        let a = alpha_coeffs(&symmetric(), 20, AlphaMode::Weak).unwrap();
        for (k, v) in a.iter().enumerate() {
            assert_eq!(*v, 0.5f64.powi(k as i32 + 1));
        }
        let iid = alpha_coeffs(&iid_rademacher(), 5, AlphaMode::Weak).unwrap();
        assert!(iid[1..].iter().all(|&v| v == 0.0));
        let ros = alpha_coeffs(&symmetric(), 3, AlphaMode::Rosenblatt).unwrap();
        assert_eq!(ros[0], 1.0);
        let unlabeled = FiniteChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, 0.0], None).unwrap();
        assert!(alpha_coeffs(&unlabeled, 3, AlphaMode::Weak).is_err());
    }

    #[test]
    fn hh_telescopes() {
        let k = vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]];
        let chain = FiniteChain::new(k, vec![3.0, -1.0, 0.5], Some(vec![0.0, 1.0, 2.0])).unwrap();
        let big_n = 30;
        let r = hh_series(&chain, big_n);
        let sq: f64 = r.terms.iter().map(|t| t * t).sum();
        let mut v = chain.observable().to_vec();
        for _ in 0..=big_n {
            v = chain.apply(&v);
        }
        let want = chain.pi_dot(chain.observable(), chain.observable()) - chain.pi_dot(&v, &v);
        assert!((sq - want).abs() < 1e-10);
    }

    fn random_chain(rows: &[Vec<f64>], f: &[f64]) -> FiniteChain {
        let kernel: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                let mut row: Vec<f64> = r.iter().map(|x| x / s).collect();
                let fix = 1.0 - row.iter().sum::<f64>();
                row[0] += fix;
                row
            })
            .collect();
        let labels = (0..f.len()).map(|i| i as f64).collect();
        FiniteChain::new(kernel, f.to_vec(), Some(labels)).unwrap()
    }

    proptest! {
        #[test]
        fn scaling_observable(rows in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 3),
                              f in prop::collection::vec(-2.0f64..2.0, 3), c in 0.1f64..5.0) {
            let chain = random_chain(&rows, &f);
            let scaled = chain.with_observable(f.iter().map(|v| c * v).collect()).unwrap();
            let (e1, _) = eta_exact(&chain, 300, 1e-14).unwrap();
            let (e2, _) = eta_exact(&scaled, 300, 1e-14).unwrap();
            prop_assert!((e2 - c * c * e1).abs() < 1e-9 * (1.0 + e2.abs()));
            let s1 = cond21_series(&chain, 100).total();
            let s2 = cond21_series(&scaled, 100).total();
            prop_assert!((s2 - c * c * s1).abs() < 1e-9 * (1.0 + s2));
            prop_assert_eq!(alpha_coeffs(&chain, 10, AlphaMode::Weak).unwrap(), alpha_coeffs(&scaled, 10, AlphaMode::Weak).unwrap());
        }

        #[test]
        fn cond21_dominates_covariances(rows in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 4), 4),
                                        f in prop::collection::vec(-2.0f64..2.0, 4)) {
            let chain = random_chain(&rows, &f);
            let c21 = cond21_series(&chain, 60);
            let (eta, er) = eta_exact(&chain, 60, 0.0).unwrap();
            prop_assert!(eta >= -1e-9);
            for k in 1..er.terms.len().min(c21.terms.len()) {
                prop_assert!(er.terms[k].abs() <= 2.0 * c21.terms[k] + 1e-12);
            }
            let abs_cov: f64 = er.terms.iter().map(|t| t.abs()).sum();
            prop_assert!(abs_cov <= 2.0 * c21.total() + 1e-9);
        }
    }
}
