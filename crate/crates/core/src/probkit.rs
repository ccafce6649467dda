//! Distribution-level primitives: quantile and tail functions, the
//! mixing-integral criteria, Kolmogorov-Smirnov distance and the
//! conditional truncation inequalities.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::adaptive_integral;
use crate::series::SeriesReport;

/// A finite weighted sample. Weights default to uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return invalid("empty sample");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("sample contains a non-finite value");
        }
        let weights = match weights {
            None => vec![1.0 / values.len() as f64; values.len()],
            Some(w) => {
                if w.len() != values.len() {
                    return invalid("weights and values differ in length");
                }
                if w.iter().any(|&x| !(x >= 0.0)) {
                    return invalid("negative weight");
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return invalid(format!("weights sum to {total}, not 1"));
                }
                w
            }
        };
        Ok(EmpiricalSample { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A non-increasing function on (0, 1] with values in [0, ∞).
///
/// `Piecewise` points `(u_j, v_j)` with `0 < u_1 < ... ≤ 1` mean
/// `Q(u) = v_j` on `[u_{j-1}, u_j)` (with `u_0 = 0`) and `Q = 0` from the
/// last breakpoint on. This is the convention produced by the infimum
/// `Q_Z(u) = inf{t ≥ 0 : P(|Z| > t) ≤ u}`; in particular `Q_Z(1) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantileFunction {
    Piecewise { points: Vec<(f64, f64)> },
    /// `u ↦ c·u^(-q)` with `0 ≤ q < 1/2`.
    Power { c: f64, q: f64 },
}

impl QuantileFunction {
    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        let q = QuantileFunction::Piecewise { points };
        q.validate()?;
        Ok(q)
    }

    pub fn power(c: f64, q: f64) -> Result<Self> {
        let f = QuantileFunction::Power { c, q };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::piecewise(vec![(1.0, c)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuantileFunction::Piecewise { points } => {
                let mut prev_u = 0.0;
                let mut prev_v = f64::INFINITY;
                for &(u, v) in points {
                    if !(u > prev_u && u <= 1.0) {
                        return invalid(format!("breakpoint {u} not increasing in (0,1]"));
                    }
                    if !(v >= 0.0 && v <= prev_v && v.is_finite()) {
                        return invalid(format!("value {v} breaks monotonicity or sign"));
                    }
                    prev_u = u;
                    prev_v = v;
                }
                Ok(())
            }
            QuantileFunction::Power { c, q } => {
                if !(*c >= 0.0 && c.is_finite()) {
                    return invalid("power quantile needs c ≥ 0");
                }
                if !(*q >= 0.0 && *q < 0.5) {
                    return invalid("power quantile needs 0 ≤ q < 1/2");
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return invalid(format!("quantile argument {u} outside (0,1]"));
        }
        Ok(match self {
            QuantileFunction::Piecewise { points } => points
                .iter()
                .find(|&&(bp, _)| u < bp)
                .map_or(0.0, |&(_, v)| v),
            QuantileFunction::Power { c, q } => c * u.powf(-q),
        })
    }

    /// `∫_0^a Q(u)^2 du`.
    pub fn integral_squared(&self, a: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) {
            return invalid(format!("upper limit {a} outside [0,1]"));
        }
        Ok(match self {
            QuantileFunction::Piecewise { points } => {
                let mut acc = 0.0;
                let mut lo = 0.0;
                for &(bp, v) in points {
                    if lo >= a {
                        break;
                    }
                    acc += v * v * (bp.min(a) - lo);
                    lo = bp;
                }
                acc
            }
            QuantileFunction::Power { c, q } => {
                if a == 0.0 {
                    0.0
                } else {
                    c * c * a.powf(1.0 - 2.0 * q) / (1.0 - 2.0 * q)
                }
            }
        })
    }

    /// `∫_0^1 Q(u) du`.
    pub fn integral(&self) -> f64 {
        match self {
            QuantileFunction::Piecewise { points } => {
                let mut lo = 0.0;
                points
                    .iter()
                    .map(|&(bp, v)| {
                        let w = bp - lo;
                        lo = bp;
                        v * w
                    })
                    .sum()
            }
            QuantileFunction::Power { c, q } => c / (1.0 - q),
        }
    }
}

/// Quantile function of `|Z|` for a discrete law given as a weighted sample.
pub fn quantile_of(dist: &EmpiricalSample) -> QuantileFunction {
    let mut atoms: Vec<(f64, f64)> = dist
        .values()
        .iter()
        .zip(dist.weights())
        .filter(|&(_, &w)| w > 0.0)
        .map(|(&z, &w)| (z.abs(), w))
        .collect();
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut mass = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let z = atoms[i].0;
        while i < atoms.len() && atoms[i].0 == z {
            mass += atoms[i].1;
            i += 1;
        }
        if z > 0.0 {
            // P(|Z| > t) = mass on [z_next, z) so Q = z on [mass_prev, mass).
            points.push((mass.min(1.0), z));
        }
    }
    if let Some(last) = points.last_mut() {
        if (last.0 - 1.0).abs() < 1e-12 {
            last.0 = 1.0;
        }
    }
    // Rounding can produce a repeated breakpoint when masses are tiny.
    points.dedup_by(|b, a| b.0 <= a.0);
    QuantileFunction::Piecewise { points }
}

/// Partial sums of `Σ_k ∫_0^{α(k)} Q^2` for `k = 0..=kmax`.
///
/// The verdict is `convergent-evidence` when `S_kmax - S_{kmax/2} < tol`
/// (default `1e-6 · S_kmax`) and `inconclusive` otherwise.
pub fn mixing_series(alphas: &[f64], q: &QuantileFunction, kmax: usize, tol: Option<f64>) -> Result<SeriesReport> {
    if kmax < 1 {
        return invalid("kmax must be at least 1");
    }
    if alphas.len() < kmax + 1 {
        return invalid(format!("need {} coefficients, got {}", kmax + 1, alphas.len()));
    }
    let terms = alphas[..=kmax]
        .iter()
        .map(|&a| {
            if !(0.0..=1.0).contains(&a) {
                return invalid(format!("mixing coefficient {a} outside [0,1]"));
            }
            q.integral_squared(a)
        })
        .collect::<Result<Vec<f64>>>()?;
    let report = SeriesReport::from_terms(terms).tagged("3.1");
    let total = report.total();
    let drift = report.partial(kmax) - report.partial(kmax / 2);
    let tol = tol.unwrap_or(1e-6 * total);
    let verdict = if drift < tol {
        crate::series::Verdict::ConvergentEvidence
    } else {
        crate::series::Verdict::Inconclusive
    };
    Ok(report.with_verdict(verdict))
}

/// A non-increasing right-continuous envelope `H : [0, ∞) → [0, 1]`.
///
/// `Piecewise` points `(x_i, H_i)` with `x_0 = 0` mean `H = H_i` on
/// `[x_i, x_{i+1})` and `H = H_last` beyond the last point. `Power` is
/// `H = 1` on `[0, x0)` and `min(1, c·x^(-q)·(ln x)^(-b))` from `x0` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailFunction {
    Piecewise { points: Vec<(f64, f64)> },
    Power {
        c: f64,
        q: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        x0: f64,
    },
}

impl TailFunction {
    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        let h = TailFunction::Piecewise { points };
        h.validate()?;
        Ok(h)
    }

    pub fn power(c: f64, q: f64, b: f64, x0: f64) -> Result<Self> {
        let h = TailFunction::Power { c, q, b, x0 };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TailFunction::Piecewise { points } => {
                if points.first().map(|p| p.0) != Some(0.0) {
                    return invalid("tail table must start at x = 0");
                }
                let mut prev = (f64::NEG_INFINITY, 1.0);
                for &(x, h) in points {
                    if !(x > prev.0) || !x.is_finite() {
                        return invalid(format!("tail abscissa {x} not increasing"));
                    }
                    if !(0.0..=prev.1).contains(&h) {
                        return invalid(format!("tail value {h} not in [0, previous]"));
                    }
                    prev = (x, h);
                }
                Ok(())
            }
            TailFunction::Power { c, q, b, x0 } => {
                if !(*c >= 0.0 && *q > 0.0 && *b >= 0.0 && *x0 >= 0.0) {
                    return invalid("power tail needs c ≥ 0, q > 0, b ≥ 0, x0 ≥ 0");
                }
                if *b > 0.0 && *x0 < 1.0 {
                    return invalid("a logarithmic factor needs x0 ≥ 1");
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TailFunction::Piecewise { points } => {
                let idx = points.partition_point(|p| p.0 <= x);
                if idx == 0 {
                    1.0
                } else {
                    points[idx - 1].1
                }
            }
            TailFunction::Power { c, q, b, x0 } => {
                if x < *x0 {
                    return 1.0;
                }
                let mut v = c * x.powf(-q);
                if *b > 0.0 {
                    v *= x.ln().powf(-b);
                }
                if v.is_nan() {
                    1.0
                } else {
                    v.min(1.0)
                }
            }
        }
    }
}

/// `∫_0^∞ x · H(x)^e dx` with `e = (1-2γ)/(1-γ)`; `+∞` when the integral
/// diverges.
pub fn tail_condition_integral(h: &TailFunction, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return invalid(format!("gamma {gamma} outside (0, 1/2)"));
    }
    h.validate()?;
    let e = (1.0 - 2.0 * gamma) / (1.0 - gamma);
    match h {
        TailFunction::Piecewise { points } => {
            if points.last().map_or(0.0, |p| p.1) > 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(points
                .windows(2)
                .map(|w| w[0].1.powf(e) * 0.5 * (w[1].0 * w[1].0 - w[0].0 * w[0].0))
                .sum())
        }
        &TailFunction::Power { c, q, b, x0 } => {
            if c == 0.0 {
                return Ok(0.5 * x0 * x0);
            }
            let qe = q * e;
            let be = b * e;
            const BORDER: f64 = 1e-9;
            if qe < 2.0 - BORDER || ((qe - 2.0).abs() <= BORDER && be <= 1.0 + BORDER) {
                return Ok(f64::INFINITY);
            }
            if b == 0.0 {
                // H = 1 up to max(x0, c^(1/q)), then c^e x^(1-qe) exactly.
                let cross = x0.max(c.powf(1.0 / q));
                let tail = c.powf(e) * cross.powf(2.0 - qe) / (qe - 2.0);
                return Ok(0.5 * cross * cross + tail);
            }
            Ok(power_log_tail_integral(c, q, b, qe, be, x0))
        }
    }
}

// Integrates x·H(x)^e in s = ln x from ln x0 outward; in that variable the
// envelope part is c^e exp((2 − qe)s) s^(-be), evaluated without forming x.
// On the border qe = 2 the part beyond the crossing point is closed in
// analytically.
fn power_log_tail_integral(c: f64, q: f64, b: f64, qe: f64, be: f64, x0: f64) -> f64 {
    let ce = c.powf(qe / q);
    // H = 1 exactly where ln c − qs − b ln s ≥ 0.
    let saturated = |s: f64| c.ln() - q * s - b * s.ln() >= 0.0;
    let integrand = move |s: f64| {
        if saturated(s) {
            (2.0 * s).exp()
        } else {
            ce * ((2.0 - qe) * s).exp() * s.powf(-be)
        }
    };
    let mut total = 0.5 * x0 * x0;
    let mut s = x0.ln().max(0.0);
    let mut width = 1.0;
    let border = (qe - 2.0).abs() <= 1e-9;
    loop {
        if border && !saturated(s) {
            return total + ce * s.powf(1.0 - be) / (be - 1.0);
        }
        let piece = adaptive_integral(&integrand, s, s + width, 1e-12);
        total += piece;
        s += width;
        if (!saturated(s) && integrand(s) < 1e-14 * total) || s > 1e7 {
            break;
        }
        width = (width * 1.5).min(1e5);
    }
    // Remainder: s^(-be) ≤ s_stop^(-be) beyond the stopping point.
    total + ce * ((2.0 - qe) * s).exp() * s.powf(-be) / (qe - 2.0)
}

/// Kolmogorov-Smirnov distance between a weighted sample and a
/// distribution function, using both one-sided limits of the empirical
/// distribution function at each sample point.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &EmpiricalSample, cdf: F) -> f64 {
    let mut pairs: Vec<(f64, f64)> = sample
        .values()
        .iter()
        .copied()
        .zip(sample.weights().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below = 0.0;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        let mut mass = 0.0;
        while i < pairs.len() && pairs[i].0 == x {
            mass += pairs[i].1;
            i += 1;
        }
        let upto = (below + mass).min(1.0);
        d = d.max((below - cdf(x.next_down())).abs()).max((upto - cdf(x)).abs());
        below = upto;
    }
    d.min(1.0)
}

/// A finite probability space carrying one random variable and a partition
/// generating the conditioning sigma-field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProbSpace {
    /// `(probability, value)` per atom.
    pub atoms: Vec<(f64, f64)>,
    pub partition: Vec<Vec<usize>>,
}

impl FiniteProbSpace {
    pub fn new(atoms: Vec<(f64, f64)>, partition: Vec<Vec<usize>>) -> Result<Self> {
        let space = FiniteProbSpace { atoms, partition };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return invalid("no atoms");
        }
        if self.atoms.iter().any(|&(p, x)| !(p > 0.0) || !x.is_finite()) {
            return invalid("atom probabilities must be positive and values finite");
        }
        let total: f64 = self.atoms.iter().map(|a| a.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}"));
        }
        let mut seen = vec![false; self.atoms.len()];
        for block in &self.partition {
            if block.is_empty() {
                return invalid("empty partition block");
            }
            for &i in block {
                if i >= seen.len() || seen[i] {
                    return invalid(format!("atom {i} missing or repeated in partition"));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return invalid("partition does not cover every atom");
        }
        Ok(())
    }

    /// `E(X | partition)` evaluated atom by atom.
    pub fn conditional_expectation(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.atoms.len()];
        for block in &self.partition {
            let mass: f64 = block.iter().map(|&i| self.atoms[i].0).sum();
            let mean = block.iter().map(|&i| self.atoms[i].0 * self.atoms[i].1).sum::<f64>() / mass;
            for &i in block {
                out[i] = mean;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    /// `(lhs, rhs)` of the three inequalities, in order.
    pub sides: [(f64, f64); 3],
    pub all_hold: bool,
}

/// Evaluates, with `Y = X - E(X|F)`,
///
/// 1. `E(|X|^p 1{|E(X|F)| > 2ε}) ≤ 2 E(|X|^p 1{|X| > ε})`
/// 2. `E(|X|^p 1{|Y| > 3ε}) ≤ 2 E(|X|^p 1{|X| > ε})`
/// 3. `E(|Y|^p 1{|Y| > 4ε}) ≤ 3·2^p E(|X|^p 1{|X| > ε})`
pub fn check_truncation_inequalities(space: &FiniteProbSpace, p: f64, eps: f64) -> Result<TruncationCheck> {
    if !(p >= 1.0) {
        return invalid(format!("exponent {p} below 1"));
    }
    if !(eps > 0.0) {
        return invalid(format!("threshold {eps} not positive"));
    }
    space.validate()?;
    let cond = space.conditional_expectation();
    let (mut l1, mut l2, mut l3, mut base) = (0.0, 0.0, 0.0, 0.0);
    for (&(prob, x), &c) in space.atoms.iter().zip(&cond) {
        let y = x - c;
        let xp = x.abs().powf(p);
        if x.abs() > eps {
            base += prob * xp;
        }
        if c.abs() > 2.0 * eps {
            l1 += prob * xp;
        }
        if y.abs() > 3.0 * eps {
            l2 += prob * xp;
        }
        if y.abs() > 4.0 * eps {
            l3 += prob * y.abs().powf(p);
        }
    }
    let sides = [(l1, 2.0 * base), (l2, 2.0 * base), (l3, 3.0 * 2f64.powf(p) * base)];
    let slack = 1e-12 * (1.0 + base);
    let all_hold = sides.iter().all(|&(l, r)| l <= r + slack);
    Ok(TruncationCheck { sides, all_hold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn uniform(values: &[f64]) -> EmpiricalSample {
        EmpiricalSample::uniform(values.to_vec()).unwrap()
    }

    // Q_Z(u) by scanning thresholds: the smallest candidate t in {0} ∪ |Z|
    // with P(|Z| > t) ≤ u.
    fn quantile_by_enumeration(values: &[f64], u: f64) -> f64 {
        let n = values.len() as f64;
        let mut cands: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        cands.push(0.0);
        cands.sort_by(f64::total_cmp);
        for t in cands {
            let tail = values.iter().filter(|v| v.abs() > t).count() as f64 / n;
            if tail <= u + 1e-15 {
                return t;
            }
        }
        unreachable!()
    }

    #[test]
    fn quantile_of_three_point_law() {
        let q = quantile_of(&uniform(&[0.0, 1.0, 3.0]));
        for (u, want) in [(0.2, 3.0), (0.5, 1.0), (0.7, 0.0), (1.0, 0.0)] {
            assert_eq!(q.eval(u).unwrap(), want);
            assert_eq!(quantile_by_enumeration(&[0.0, 1.0, 3.0], u), want);
        }
    }

    #[test]
    fn quantile_of_point_mass() {
        let q = quantile_of(&uniform(&[2.5, 2.5]));
        assert_eq!(q.eval(0.3).unwrap(), 2.5);
        assert_eq!(q.eval(0.999).unwrap(), 2.5);
        assert_eq!(q.eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn quantile_rejects_bad_argument() {
        let q = QuantileFunction::constant(1.0).unwrap();
        assert!(q.eval(0.0).is_err());
        assert!(q.eval(1.5).is_err());
        assert!(EmpiricalSample::uniform(vec![]).is_err());
    }

    #[test]
    fn integral_q_squared_examples() {
        let one = QuantileFunction::constant(1.0).unwrap();
        assert_relative_eq!(one.integral_squared(0.3).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(one.integral_squared(0.0).unwrap(), 0.0);
        let pw = QuantileFunction::power(1.0, 0.25).unwrap();
        assert_relative_eq!(pw.integral_squared(0.25).unwrap(), 1.0, epsilon = 1e-12);
        assert!(pw.integral_squared(1.2).is_err());
        // Closed form against quadrature of u^(-1/2); the endpoint
        // singularity limits the quadrature to about eight digits.
        let quad = adaptive_integral(&|u: f64| u.powf(-0.5), 0.0, 0.6, 1e-12);
        assert_relative_eq!(pw.integral_squared(0.6).unwrap(), quad, max_relative = 1e-7);
    }

    #[test]
    fn mixing_series_geometric() {
        let alphas: Vec<f64> = (0..=60).map(|k| 0.5f64.powi(k + 1)).collect();
        let q = QuantileFunction::constant(1.0).unwrap();
        let r = mixing_series(&alphas, &q, 60, None).unwrap();
        assert_relative_eq!(r.total(), 1.0, epsilon = 1e-15);
        assert_eq!(r.verdict, crate::series::Verdict::ConvergentEvidence);
    }

    #[test]
    fn mixing_series_independent() {
        let mut alphas = vec![0.0; 11];
        alphas[0] = 0.4;
        let q = QuantileFunction::constant(1.0).unwrap();
        let r = mixing_series(&alphas, &q, 10, None).unwrap();
        assert!(r.partial_sums.iter().all(|&s| s == 0.4));
    }

    #[test]
    fn mixing_series_divergent_is_inconclusive() {
        let alphas: Vec<f64> = (0..=400).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let q = QuantileFunction::power(1.0, 0.25).unwrap();
        let r = mixing_series(&alphas, &q, 400, None).unwrap();
        for k in 0..5 {
            assert_relative_eq!(r.terms[k], 2.0 / ((k + 1) as f64).sqrt(), epsilon = 1e-12);
        }
        assert_eq!(r.verdict, crate::series::Verdict::Inconclusive);
        assert!(mixing_series(&[1.2, 0.0], &q, 1, None).is_err());
    }

    #[test]
    fn tail_integral_examples() {
        let h = TailFunction::power(1.0, 6.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(tail_condition_integral(&h, 0.25).unwrap(), 1.0, epsilon = 1e-12);
        let zero = TailFunction::piecewise(vec![(0.0, 0.0)]).unwrap();
        assert_eq!(tail_condition_integral(&zero, 0.25).unwrap(), 0.0);
        let border = TailFunction::power(1.0, 3.0, 0.0, 0.0).unwrap();
        assert!(tail_condition_integral(&border, 0.25).unwrap().is_infinite());
        assert!(tail_condition_integral(&h, 0.5).is_err());
        assert!(tail_condition_integral(&h, 0.0).is_err());
    }

    #[test]
    fn tail_integral_table_matches_oracle() {
        // H = 1 on [0,1), 1/8 on [1,2), 0 beyond; e = 2/3 at γ = 1/4.
        let h = TailFunction::piecewise(vec![(0.0, 1.0), (1.0, 0.125), (2.0, 0.0)]).unwrap();
        let want = 0.5 + 0.25 * 1.5;
        assert_relative_eq!(tail_condition_integral(&h, 0.25).unwrap(), want, epsilon = 1e-14);
    }

    #[test]
    fn tail_integral_log_factor_against_quadrature() {
        // q·e = 2, b·e = 4/3 > 1: ∫_e^∞ x·(x^-3 (ln x)^-2)^(2/3) dx = ∫_1^∞ s^(-4/3) ds = 3.
        let h = TailFunction::power(1.0, 3.0, 2.0, std::f64::consts::E).unwrap();
        let v = tail_condition_integral(&h, 0.25).unwrap();
        assert_relative_eq!(v, 0.5 * std::f64::consts::E.powi(2) + 3.0, max_relative = 1e-6);
        let h_div = TailFunction::power(1.0, 3.0, 1.0, std::f64::consts::E).unwrap();
        assert!(tail_condition_integral(&h_div, 0.25).unwrap().is_infinite());
    }

    #[test]
    fn tail_json_shapes() {
        let h: TailFunction = serde_json::from_str(r#"{"kind":"power","c":1.0,"q":6.0,"b":0.0,"x0":0.0}"#).unwrap();
        assert_eq!(h, TailFunction::power(1.0, 6.0, 0.0, 0.0).unwrap());
        let q: QuantileFunction = serde_json::from_str(r#"{"kind":"piecewise","points":[[0.5,2.0],[1.0,1.0]]}"#).unwrap();
        assert_eq!(q.eval(0.4).unwrap(), 2.0);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"kind":"piecewise","points":[[0.5,2.0],[1.0,1.0]]}"#);
    }

    #[test]
    fn ks_examples() {
        let point = |x: f64| if x >= 0.0 { 1.0 } else { 0.0 };
        assert_eq!(ks_distance(&uniform(&[0.0]), point), 0.0);
        assert_eq!(ks_distance(&uniform(&[-1.0, 1.0]), point), 0.5);
    }

    #[test]
    fn ks_on_exact_normal_quantiles() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = 999;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (1..=n).map(|k| normal.inverse_cdf(k as f64 / (n as f64 + 1.0))).collect();
        let d = ks_distance(&uniform(&values), crate::numerics::std_normal_cdf);
        assert!(d < 2.0 / (n as f64 + 1.0), "d = {d}");
    }

    #[test]
    fn truncation_constant_below_threshold() {
        let space = FiniteProbSpace::new(vec![(0.5, 0.3), (0.5, 0.3)], vec![vec![0], vec![1]]).unwrap();
        let r = check_truncation_inequalities(&space, 2.0, 0.5).unwrap();
        assert!(r.all_hold);
        assert!(r.sides.iter().all(|&(l, rr)| l == 0.0 && rr == 0.0));
    }

    #[test]
    fn truncation_rademacher_trivial_partition() {
        let space = FiniteProbSpace::new(vec![(0.5, -1.0), (0.5, 1.0)], vec![vec![0, 1]]).unwrap();
        let r = check_truncation_inequalities(&space, 1.0, 0.5).unwrap();
        assert_eq!(space.conditional_expectation(), vec![0.0, 0.0]);
        assert_eq!(r.sides[0], (0.0, 2.0));
        assert!(r.all_hold);
        assert!(check_truncation_inequalities(&space, 0.5, 0.5).is_err());
        assert!(check_truncation_inequalities(&space, 1.0, 0.0).is_err());
    }

    pub(crate) fn random_space<R: Rng>(rng: &mut R) -> FiniteProbSpace {
        let n = rng.random_range(1..=16);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut atoms: Vec<(f64, f64)> = raw.iter().map(|w| (w / total, rng.random_range(-3.0..3.0))).collect();
        let fix: f64 = 1.0 - atoms.iter().map(|a| a.0).sum::<f64>();
        atoms[0].0 += fix;
        let blocks = rng.random_range(1..=4usize.min(n));
        let mut partition = vec![Vec::new(); blocks];
        for i in 0..n {
            let b = if i < blocks { i } else { rng.random_range(0..blocks) };
            partition[b].push(i);
        }
        FiniteProbSpace::new(atoms, partition).unwrap()
    }

    #[test]
    fn truncation_sweep_random_spaces() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let space = random_space(&mut rng);
            let p = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
            let eps = 10f64.powf(rng.random_range(-2.0..0.7));
            assert!(check_truncation_inequalities(&space, p, eps).unwrap().all_hold);
        }
    }

    proptest! {
        #[test]
        fn quantile_integrates_to_mean_abs(values in prop::collection::vec(-50.0f64..50.0, 1..30)) {
            let sample = uniform(&values);
            let q = quantile_of(&sample);
            let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
            prop_assert!((q.integral() - mean_abs).abs() < 1e-10 * (1.0 + mean_abs));
        }

        #[test]
        fn quantile_matches_infimum_definition(values in prop::collection::vec(0u8..6, 1..12), u in 0.001f64..1.0) {
            let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let q = quantile_of(&uniform(&vals));
            prop_assert_eq!(q.eval(u).unwrap(), quantile_by_enumeration(&vals, u));
        }

        #[test]
        fn integral_squared_monotone_and_additive(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let q = quantile_of(&uniform(&[0.5, 2.0, 3.0, 7.0]));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let i_lo = q.integral_squared(lo).unwrap();
            let i_hi = q.integral_squared(hi).unwrap();
            prop_assert!(i_lo <= i_hi);
            let pw = QuantileFunction::power(1.3, 0.2).unwrap();
            let piece = adaptive_integral(&|u: f64| pw.eval(u).unwrap().powi(2), lo.max(1e-300), hi.max(2e-300), 1e-12);
            let diff = pw.integral_squared(hi).unwrap() - pw.integral_squared(lo).unwrap();
            prop_assert!((diff - piece).abs() < 1e-8 * (1.0 + diff));
        }

        #[test]
        fn ks_permutation_invariant(mut values in prop::collection::vec(-3.0f64..3.0, 1..40), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let d1 = ks_distance(&uniform(&values), crate::numerics::std_normal_cdf);
            values.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let d2 = ks_distance(&uniform(&values), crate::numerics::std_normal_cdf);
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn tail_integral_monotone(scale in 0.0f64..1.0, x1 in 0.1f64..3.0, x2 in 3.1f64..10.0, h1 in 0.0f64..1.0) {
            let big = TailFunction::piecewise(vec![(0.0, 1.0), (x1, h1), (x2, 0.0)]).unwrap();
            let small = TailFunction::piecewise(vec![(0.0, scale), (x1, h1 * scale), (x2, 0.0)]).unwrap();
            prop_assert!(tail_condition_integral(&small, 0.3).unwrap() <= tail_condition_integral(&big, 0.3).unwrap());
            let p_small = TailFunction::power(scale, 7.0, 0.0, 0.0).unwrap();
            let p_big = TailFunction::power(1.0, 7.0, 0.0, 0.0).unwrap();
            prop_assert!(tail_condition_integral(&p_small, 0.25).unwrap() <= tail_condition_integral(&p_big, 0.25).unwrap() + 1e-12);
        }
    }
}
