//! Test statistics on an ensemble: KS against the Gaussian limit,
//! finite-dimensional marginals, the tightness modulus and variance growth.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::{run_replicas, ChainSampler, DonskerPath, Ensemble, PathRequest};
use crate::error::{invalid, Result};
use crate::numerics::{linear_fit, mean_and_stderr, normal_cdf, variance_with_jackknife};
use crate::probkit::{ks_distance, EmpiricalSample};

/// 95% Kolmogorov band constant.
const KS_95: f64 = 1.36;
/// `max_u u φ(u)`, attained at `u = 1`: the sup-norm derivative of
/// `η ↦ Φ(x/√η)` is this over `2η`.
const MAX_U_PHI: f64 = 0.241_970_724_519_143_37;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidisReport {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    /// `η Σ a_ℓ² (t_ℓ − t_{ℓ−1})`.
    pub target_variance: f64,
    pub ks: f64,
    pub ks_null_band: f64,
    /// Sample covariance of the increments `W_n(t_ℓ) − W_n(t_{ℓ−1})`.
    pub covariance: Vec<Vec<f64>>,
    pub max_abs_offdiag_corr: f64,
    /// Approximate standard error of a sample correlation near 0, `1/√R`.
    pub corr_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub m: usize,
    pub q95: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub rows: Vec<TightnessRow>,
    /// Whether the quantile strictly decreases along increasing `m`.
    pub decreasing: bool,
}

impl TightnessReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("m,q95,stderr\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.m, r.q95, r.stderr);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n: usize,
    pub var_over_n: f64,
    /// Jackknife standard error.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub paper_condition: String,
    pub points: Vec<VariancePoint>,
    /// Least-squares slope of `Var(S_n)/n` against `ln n`.
    pub slope: f64,
    /// Standard error of the slope from the fit residuals.
    pub slope_stderr: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedReport {
    pub paper_condition: String,
    pub start: String,
    pub n: usize,
    pub replicas: usize,
    pub seed: Option<u64>,
    pub eta_ref: f64,
    /// Standard error of `eta_ref` when it is itself an estimate.
    pub eta_stderr: Option<f64>,
    pub ks: f64,
    /// `1.36/√R`, widened by `1.96 σ_η max_u uφ(u) / (2η)` when `η` carries
    /// an error.
    pub ks_null_band: f64,
    pub within_band: bool,
    /// Mean and standard error of `S_n/√n`.
    pub mean: f64,
    pub mean_stderr: f64,
    /// Sample variance of `S_n/√n` with its jackknife error.
    pub variance: f64,
    pub variance_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidis: Option<FidisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tightness: Option<TightnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_trace: Option<VarianceScan>,
}

fn ks_against(values: Vec<f64>, var: f64) -> Result<f64> {
    let sample = EmpiricalSample::uniform(values)?;
    Ok(if var > 0.0 {
        ks_distance(&sample, |x| normal_cdf(x, var))
    } else {
        ks_distance(&sample, |x| if x >= 0.0 { 1.0 } else { 0.0 })
    })
}

/// KS distance of `{S_n/√n}` to `N(0, eta_ref)`. With `eta_ref = 0` the
/// reference law is the point mass at 0.
pub fn quenched_clt_report(ens: &Ensemble, eta_ref: f64, eta_stderr: Option<f64>) -> Result<QuenchedReport> {
    if !(eta_ref >= 0.0) {
        return invalid(format!("eta_ref must be non-negative, got {eta_ref}"));
    }
    if ens.len() < 3 {
        return invalid("need at least three replicas");
    }
    let values = ens.normalized_sums();
    let (mean, mean_stderr) = mean_and_stderr(&values);
    let (variance, variance_stderr) = variance_with_jackknife(&values);
    let ks = ks_against(values, eta_ref)?;
    let r = ens.len() as f64;
    let mut band = KS_95 / r.sqrt();
    if let (Some(se), true) = (eta_stderr, eta_ref > 0.0) {
        band += 1.96 * se * MAX_U_PHI / (2.0 * eta_ref);
    }
    Ok(QuenchedReport {
        paper_condition: "2.1".into(),
        start: ens.start.clone(),
        n: ens.n,
        replicas: ens.len(),
        seed: ens.seed,
        eta_ref,
        eta_stderr,
        ks,
        ks_null_band: band,
        within_band: ks <= band,
        mean,
        mean_stderr,
        variance,
        variance_stderr,
        fidis: None,
        tightness: None,
        variance_trace: None,
    })
}

fn path_values(ens: &Ensemble, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let canon = ens.canonical();
    let recorded: Option<Vec<usize>> = times
        .iter()
        .map(|t| ens.request.times.iter().position(|s| s == t))
        .collect();
    if let Some(idx) = recorded {
        return Ok(canon.iter().map(|r| idx.iter().map(|&i| r.path_values[i]).collect()).collect());
    }
    canon
        .iter()
        .map(|r| match &r.increments {
            Some(inc) => {
                let p = DonskerPath::new(inc.clone());
                Ok(times.iter().map(|&t| p.eval(t)).collect())
            }
            None => invalid("times were not recorded and increments were not kept"),
        })
        .collect()
}

/// Law of `Σ_ℓ a_ℓ (W_n(t_ℓ) − W_n(t_{ℓ−1}))` (with `t_0 = 0`) against
/// `N(0, η Σ a_ℓ²(t_ℓ − t_{ℓ−1}))`, and the covariance of the increments.
pub fn fidis_report(ens: &Ensemble, times: &[f64], weights: &[f64], eta: f64) -> Result<FidisReport> {
    if times.is_empty() || times.len() != weights.len() {
        return invalid("need one weight per time");
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) || *times.last().unwrap() > 1.0 {
        return invalid("times must satisfy 0 < t_1 < ... < t_d ≤ 1");
    }
    if !(eta >= 0.0) {
        return invalid("eta must be non-negative");
    }
    let d = times.len();
    let incs: Vec<Vec<f64>> = path_values(ens, times)?
        .into_iter()
        .map(|w| (0..d).map(|l| if l == 0 { w[0] } else { w[l] - w[l - 1] }).collect())
        .collect();
    let combo: Vec<f64> = incs
        .iter()
        .map(|inc| {
            if d == 1 {
                weights[0] * inc[0]
            } else {
                inc.iter().zip(weights).map(|(x, a)| a * x).sum()
            }
        })
        .collect();
    let target_variance = eta
        * times
            .iter()
            .enumerate()
            .map(|(l, &t)| weights[l] * weights[l] * (t - if l == 0 { 0.0 } else { times[l - 1] }))
            .sum::<f64>();
    let ks = ks_against(combo, target_variance)?;

    let r = incs.len() as f64;
    let means: Vec<f64> = (0..d).map(|l| incs.iter().map(|v| v[l]).sum::<f64>() / r).collect();
    let mut covariance = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let c = incs.iter().map(|v| (v[i] - means[i]) * (v[j] - means[j])).sum::<f64>() / (r - 1.0);
            covariance[i][j] = c;
            covariance[j][i] = c;
        }
    }
    let mut max_abs_offdiag_corr = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            let denom = (covariance[i][i] * covariance[j][j]).sqrt();
            if denom > 0.0 {
                max_abs_offdiag_corr = max_abs_offdiag_corr.max((covariance[i][j] / denom).abs());
            }
        }
    }
    Ok(FidisReport {
        times: times.to_vec(),
        weights: weights.to_vec(),
        target_variance,
        ks,
        ks_null_band: KS_95 / r.sqrt(),
        covariance,
        max_abs_offdiag_corr,
        corr_stderr: 1.0 / r.sqrt(),
    })
}

// Order statistic at rank ⌈R·p⌉ (1-based), clamped.
fn order_stat(sorted: &[f64], p: f64) -> f64 {
    let r = sorted.len();
    let rank = ((r as f64 * p).ceil() as usize).clamp(1, r);
    sorted[rank - 1]
}

/// Empirical 95% quantile of the modulus for each `m`. The standard error
/// is half the spread between the order statistics at `0.95 ± √(0.95·0.05/R)`.
pub fn tightness_report(ens: &Ensemble, m_grid: &[usize]) -> Result<TightnessReport> {
    if m_grid.is_empty() || m_grid.contains(&0) {
        return invalid("m grid must be non-empty with m ≥ 1");
    }
    let canon = ens.canonical();
    let mut rows = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let mut vals: Vec<f64> = match ens.request.moduli.iter().position(|&x| x == m) {
            Some(i) => canon.iter().map(|r| r.moduli[i]).collect(),
            None => canon
                .iter()
                .map(|r| match &r.increments {
                    Some(inc) => Ok(DonskerPath::new(inc.clone()).modulus(1.0 / m as f64)),
                    None => invalid("modulus not recorded and increments not kept"),
                })
                .collect::<Result<_>>()?,
        };
        vals.sort_by(f64::total_cmp);
        let s = (0.95 * 0.05 / vals.len() as f64).sqrt();
        let stderr = 0.5 * (order_stat(&vals, 0.95 + s) - order_stat(&vals, 0.95 - s));
        rows.push(TightnessRow {
            m,
            q95: order_stat(&vals, 0.95),
            stderr,
        });
    }
    let mut by_m = rows.clone();
    by_m.sort_by_key(|r| r.m);
    let decreasing = by_m.windows(2).all(|w| w[1].q95 < w[0].q95);
    Ok(TightnessReport { rows, decreasing })
}

/// `Var(S_n)/n` along `n_grid` from one ensemble of length `max(n_grid)`,
/// with the regression on `ln n`.
pub fn variance_growth_scan<S: ChainSampler>(
    sampler: &S,
    x0: S::State,
    n_grid: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<VarianceScan> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return invalid("n grid must be increasing with at least two positive entries");
    }
    let request = PathRequest {
        checkpoints: n_grid.to_vec(),
        ..Default::default()
    };
    let ens = run_replicas(sampler, x0, *n_grid.last().unwrap(), replicas, seed, &request)?;
    let canon = ens.canonical();
    let points: Vec<VariancePoint> = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let vals: Vec<f64> = canon.iter().map(|r| r.checkpoints[i]).collect();
            let (var, se) = variance_with_jackknife(&vals);
            VariancePoint {
                n,
                var_over_n: var / n as f64,
                stderr: se / n as f64,
            }
        })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| ((p.n as f64).ln(), p.var_over_n)).collect();
    let fit = linear_fit(&xy).expect("at least two distinct abscissae");
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sse: f64 = xy.iter().map(|p| (p.1 - fit.intercept - fit.slope * p.0).powi(2)).sum();
    let slope_stderr = if k > 2.0 { (sse / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(VarianceScan {
        paper_condition: "sqrt(n ln n) borderline".into(),
        points,
        slope: fit.slope,
        slope_stderr,
        r_squared: fit.r_squared,
    })
}
