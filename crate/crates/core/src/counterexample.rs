//! A stationary sequence satisfying the projective condition while the
//! Gordin, Maxwell-Woodroofe and Hannan-Heyde conditions fail.
//!
//! With `N_k = 4^k`, `ρ_k = 4^{-k}`, `θ_k = 1/(k 2^k)`, `ε_k = 1/(k² 4^{3k})`,
//! disjoint sets `A_k` of measure about `ρ_k` that are nearly invariant over
//! `2N_k` steps, and i.i.d. Rademacher signs `e_i`, the observable is
//! `f = Σ_k θ_k 1_{A_k} Σ_{j=N_k+1}^{2N_k} e_{-j}`.
//!
//! The series below reduce to `1/k²`, `1/k`, `4^k/k²` and `1/ℓ`; their terms
//! are computed in exact rational arithmetic.
//!
//! The realization is a product of the Rademacher shift with `K` circle
//! rotations: `B_k = [0, ρ_k)` on circle `k`, rotated by `α_k` per step, and
//! `A_k = B_k ∖ ∪_{j<k} B_j`. Phases are fixed-point fractions of `2^128`,
//! so angles far below `f64` resolution still act exactly.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::numerics::mean_and_stderr;
use crate::rng::replica_rng;
use crate::series::{SeriesReport, Verdict};

pub const MAX_PARAM_LEVEL: u32 = 12;
pub const MAX_REALIZED_LEVEL: u32 = 8;
/// `√2/√3`, the prefactor of the Hannan-Heyde lower bound.
pub const HH_PREFACTOR: f64 = 0.816_496_580_927_726;

fn ratio_string<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

// Fixed-point values exceed what JSON numbers carry exactly.
fn u128_string<S: Serializer>(v: &u128, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn u128_strings<S: Serializer>(v: &[u128], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow_rat(base: i64, exp: u32) -> BigRational {
    BigRational::from_integer(num::pow(BigInt::from(base), exp as usize))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Square root of a rational whose numerator and denominator are perfect
/// squares.
pub fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub k: u32,
    #[serde(serialize_with = "ratio_string")]
    pub n_k: BigRational,
    #[serde(serialize_with = "ratio_string")]
    pub rho: BigRational,
    #[serde(serialize_with = "ratio_string")]
    pub theta: BigRational,
    #[serde(serialize_with = "ratio_string")]
    pub eps: BigRational,
}

impl Level {
    /// The exact parameters of level `k ≥ 1`.
    pub fn new(k: u32) -> Self {
        assert!(k >= 1, "levels start at 1");
        let four_k = pow_rat(4, k);
        Level {
            k,
            n_k: four_k.clone(),
            rho: four_k.recip(),
            theta: (BigRational::from_integer(BigInt::from(k)) * pow_rat(2, k)).recip(),
            eps: (BigRational::from_integer(BigInt::from(k * k)) * pow_rat(4, 3 * k)).recip(),
        }
    }

    fn n(&self) -> BigRational {
        self.n_k.clone()
    }

    /// `θ_k² N_k² ρ_k`.
    pub fn cond21_term(&self) -> BigRational {
        &self.theta * &self.theta * self.n() * self.n() * &self.rho
    }

    /// `θ_k ρ_k N_k^{3/2}`.
    pub fn gordin_term(&self) -> BigRational {
        let root = exact_sqrt(&self.n()).expect("N_k is a power of 4");
        &self.theta * &self.rho * self.n() * root
    }

    /// `θ_k² N_k³ ρ_k`.
    pub fn mw_inner_term(&self) -> BigRational {
        let n = self.n();
        &self.theta * &self.theta * &n * &n * &n * &self.rho
    }

    /// `2^{2k} θ_k √ρ_k`.
    pub fn hh_term(&self) -> BigRational {
        pow_rat(2, 2 * self.k) * &self.theta * exact_sqrt(&self.rho).expect("ρ_k is a power of 1/4")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleParams {
    pub k_max: u32,
    pub levels: Vec<Level>,
}

pub fn params(k_max: u32) -> Result<CounterexampleParams> {
    if !(1..=MAX_PARAM_LEVEL).contains(&k_max) {
        return invalid(format!("K must lie in 1..={MAX_PARAM_LEVEL}, got {k_max}"));
    }
    Ok(CounterexampleParams {
        k_max,
        levels: (1..=k_max).map(Level::new).collect(),
    })
}

fn harmonic_report(terms: Vec<BigRational>, tag: &str) -> SeriesReport {
    let mut r = SeriesReport::from_terms(terms.iter().map(to_f64).collect())
        .tagged(tag)
        .with_verdict(Verdict::DivergentEvidence);
    r.first_index = 1;
    r
}

/// `Σ_k θ_k² N_k² ρ_k = Σ 1/k²`, with the tail bound `Σ_{k>K} 1/k² ≤ 1/K`.
pub fn series_cond21(k_max: u32) -> Result<SeriesReport> {
    if k_max < 1 {
        return invalid("K must be at least 1");
    }
    let terms: Vec<f64> = (1..=k_max).map(|k| to_f64(&Level::new(k).cond21_term())).collect();
    let mut r = SeriesReport::from_terms(terms)
        .tagged("2.1")
        .with_verdict(Verdict::ConvergentCertified);
    r.first_index = 1;
    r.tail_bound = Some(1.0 / k_max as f64);
    Ok(r)
}

/// `Σ_{k=1}^{K−1} θ_k ρ_k N_k^{3/2} = H_{K−1}`, the lower bound for
/// `‖E_0(S_{N_K})‖_1` up to a constant.
pub fn series_gordin_lowerbound(k_max: u32) -> Result<SeriesReport> {
    if k_max < 2 {
        return invalid("K must be at least 2");
    }
    let terms = (1..k_max).map(|k| Level::new(k).gordin_term()).collect();
    Ok(harmonic_report(terms, "2.3").with_constant("log_lower_bound", ((k_max - 1) as f64).ln()))
}

/// `Σ_{k : 2N_k ≤ n} 4^k/k²`, exactly.
pub fn mw_inner_sum(n: u64) -> BigRational {
    let mut sum = BigRational::zero();
    let mut k = 1;
    while 2 * 4u64.saturating_pow(k) <= n {
        sum += Level::new(k).mw_inner_term();
        k += 1;
    }
    sum
}

/// `Σ_{n=1}^{2 n_max} n^{-3/2} (Σ_{k: 2N_k ≤ n} θ_k² N_k³ ρ_k)^{1/2}` with the
/// doubling increments `S(2n_max) − S(n_max)` and `S(n_max) − S(n_max/2)`.
pub fn series_mw_lowerbound(n_max: u64) -> Result<SeriesReport> {
    if n_max < 8 {
        return invalid("n_max must be at least 8");
    }
    let top = 2 * n_max;
    let mut terms = Vec::with_capacity(top as usize);
    let mut inner = BigRational::zero();
    let mut next_k = 1u32;
    for n in 1..=top {
        while 2 * 4u64.pow(next_k) <= n {
            inner += Level::new(next_k).mw_inner_term();
            next_k += 1;
        }
        terms.push(to_f64(&inner).sqrt() / (n as f64).powf(1.5));
    }
    let mut r = SeriesReport::from_terms(terms).tagged("5.2").with_verdict(Verdict::DivergentEvidence);
    r.first_index = 1;
    let s = |n: u64| r.partial_sums[n as usize - 1];
    let recent = s(top) - s(n_max);
    let earlier = s(n_max) - s(n_max / 2);
    Ok(r.with_constant("doubling_increment", recent)
        .with_constant("previous_increment", earlier)
        .with_constant("doubling_ratio", recent / earlier))
}

/// `Σ_{ℓ=1}^{L} 2^{2ℓ} θ_ℓ √ρ_ℓ = H_L`; the lower bound carries the
/// prefactor `√2/√3`.
pub fn series_hh_lowerbound(l_max: u32) -> Result<SeriesReport> {
    if l_max < 1 {
        return invalid("L must be at least 1");
    }
    let terms = (1..=l_max).map(|l| Level::new(l).hh_term()).collect();
    Ok(harmonic_report(terms, "5.3").with_constant("prefactor", HH_PREFACTOR))
}

/// Largest level whose block length `2N_K` sets the range of the
/// Maxwell-Woodroofe series in [`series_summary`].
const MW_SUMMARY_LEVEL: u32 = 10;

/// The four series keyed by the condition they evaluate, for
/// `2 ≤ K ≤ MAX_PARAM_LEVEL`. The Maxwell-Woodroofe series runs to
/// `n = 4N_K`, with `K` capped at 10.
pub fn series_summary(k_max: u32) -> Result<BTreeMap<String, SeriesReport>> {
    if !(2..=MAX_PARAM_LEVEL).contains(&k_max) {
        return invalid(format!("K must lie in 2..={MAX_PARAM_LEVEL}, got {k_max}"));
    }
    let mut out = BTreeMap::new();
    out.insert("2.1".to_string(), series_cond21(k_max)?);
    out.insert("2.3".to_string(), series_gordin_lowerbound(k_max)?);
    out.insert("5.2".to_string(), series_mw_lowerbound(2 * 4u64.pow(k_max.min(MW_SUMMARY_LEVEL)))?);
    out.insert("5.3".to_string(), series_hh_lowerbound(k_max)?);
    Ok(out)
}

/// One level of the realized system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedLevel {
    pub k: u32,
    pub n_k: u64,
    pub rho: f64,
    pub eps: f64,
    /// Rotation of circle `k` per step, in units of `2^{-128}`.
    #[serde(serialize_with = "u128_string")]
    pub alpha_fixed: u128,
    pub alpha: f64,
    /// `μ(A_k) = ρ_k Π_{j<k}(1 − ρ_j)`.
    pub measure: f64,
    pub measure_in_bounds: bool,
    /// `max_{i,j ≤ 2N_k} μ(T^{-i}A_k Δ T^{-j}A_k)`, attained at lag `2N_k`.
    pub max_sym_diff: f64,
    /// `max_sym_diff / ε_k`.
    pub sym_diff_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedSystem {
    pub k_max: u32,
    pub seed: u64,
    pub levels: Vec<RealizedLevel>,
    /// Initial phases of the circles, fractions of `2^128`.
    #[serde(serialize_with = "u128_strings")]
    pub phases: Vec<u128>,
    /// `e_{-m}` for `m = 0..=2N_K`.
    pub signs: Vec<i8>,
}

// μ(T^{-i}A_k Δ T^{-j}A_k) at |i − j| = lag, exactly. The circles are
// independent, so with p_l = μ(E_l) and q_l = μ(E_l ∩ R^{-d}E_l) for the
// events E_k = B_k, E_l = B_l^c (l < k) the measure is 2(Π p − Π q).
fn sym_diff_exact(rhos: &[BigRational], alphas: &[BigRational], k: usize, lag: u64) -> BigRational {
    let one = BigRational::one();
    let mut prod_p = BigRational::one();
    let mut prod_q = BigRational::one();
    for l in 0..=k {
        let rho = &rhos[l];
        let mut d = &alphas[l] * BigRational::from_integer(BigInt::from(lag));
        d = &d - d.floor();
        let zero = BigRational::zero();
        let over = |x: BigRational| if x > zero { x } else { zero.clone() };
        let overlap = over(rho - &d) + over(rho - (&one - &d));
        let (p, q) = if l == k {
            (rho.clone(), overlap)
        } else {
            (&one - rho, &one - rho - rho + overlap)
        };
        prod_p *= p;
        prod_q *= q;
    }
    BigRational::from_integer(BigInt::from(2)) * (prod_p - prod_q)
}

fn fixed_point_angle(a: &BigRational) -> u128 {
    let scaled = a * pow_rat(2, 128);
    scaled.floor().to_integer().to_u128().unwrap_or(u128::MAX)
}

fn realized_levels(k_max: u32) -> Vec<RealizedLevel> {
    let levels: Vec<Level> = (1..=k_max).map(Level::new).collect();
    let cap = &levels[k_max as usize - 1].eps / BigRational::from_integer(BigInt::from(16 * k_max));
    let alphas_fixed: Vec<u128> = levels
        .iter()
        .map(|l| {
            let own = &l.eps / (BigRational::from_integer(BigInt::from(16)) * l.n());
            fixed_point_angle(if own < cap { &own } else { &cap })
        })
        .collect();
    let two128 = pow_rat(2, 128);
    let alphas: Vec<BigRational> = alphas_fixed
        .iter()
        .map(|&a| BigRational::from_integer(BigInt::from(a)) / &two128)
        .collect();
    let rhos: Vec<BigRational> = levels.iter().map(|l| l.rho.clone()).collect();
    levels
        .iter()
        .enumerate()
        .map(|(idx, l)| {
            let measure = rhos[..idx].iter().fold(l.rho.clone(), |acc, r| acc * (BigRational::one() - r));
            let lower = rat(2, 3) * &l.rho;
            let sym = sym_diff_exact(&rhos, &alphas, idx, 2 * 4u64.pow(l.k));
            RealizedLevel {
                k: l.k,
                n_k: 4u64.pow(l.k),
                rho: to_f64(&l.rho),
                eps: to_f64(&l.eps),
                alpha_fixed: alphas_fixed[idx],
                alpha: to_f64(&alphas[idx]),
                measure: to_f64(&measure),
                measure_in_bounds: measure >= lower && measure <= l.rho,
                max_sym_diff: to_f64(&sym),
                sym_diff_fraction: to_f64(&(&sym / &l.eps)),
            }
        })
        .collect()
}

fn draw_sample(k_max: u32, levels: &[RealizedLevel], seed: u64, index: u64) -> (Vec<u128>, Vec<i8>) {
    let mut rng = replica_rng(seed, index);
    let phases = levels.iter().map(|_| rng.random::<u128>()).collect();
    let len = 2 * 4usize.pow(k_max) + 1;
    let mut signs = Vec::with_capacity(len);
    while signs.len() < len {
        let bits: u64 = rng.random();
        for b in 0..64 {
            if signs.len() == len {
                break;
            }
            signs.push(if (bits >> b) & 1 == 1 { 1 } else { -1 });
        }
    }
    (phases, signs)
}

/// The product system for levels `1..=K` with one sampled point `ω`.
///
/// Circle `k` rotates by `α_k = min(ε_k/(16N_k), ε_K/(16K))`, rounded down to
/// a multiple of `2^{-128}`; the cap keeps the drift of the earlier arcs
/// inside `A_k` within `ε_k/4`, so property (ii) holds with half of `ε_k`
/// to spare.
pub fn realize(k_max: u32, seed: u64) -> Result<RealizedSystem> {
    if k_max < 1 {
        return invalid("K must be at least 1");
    }
    if k_max > MAX_REALIZED_LEVEL {
        return Err(Error::TooLarge(2 * 4u128.pow(k_max)));
    }
    let levels = realized_levels(k_max);
    let (phases, signs) = draw_sample(k_max, &levels, seed, 0);
    Ok(RealizedSystem {
        k_max,
        seed,
        levels,
        phases,
        signs,
    })
}

// Membership of T^i ω in A_k for every k, from the phases.
fn level_at(levels: &[RealizedLevel], phases: &[u128], i: u64) -> Option<usize> {
    for (idx, l) in levels.iter().enumerate() {
        let pos = phases[idx].wrapping_add(l.alpha_fixed.wrapping_mul(i as u128));
        // B_k = [0, 4^{-k}) is [0, 2^{128−2k}) in fixed point.
        if pos >> (128 - 2 * l.k) == 0 {
            return Some(idx);
        }
    }
    None
}

impl RealizedSystem {
    /// `f(ω) = Σ_k θ_k 1_{A_k}(ω) Σ_{j=N_k+1}^{2N_k} e_{-j}`.
    pub fn f0(&self) -> f64 {
        match level_at(&self.levels, &self.phases, 0) {
            None => 0.0,
            Some(idx) => {
                let l = &self.levels[idx];
                let n = l.n_k as usize;
                let s: i64 = self.signs[n + 1..=2 * n].iter().map(|&e| e as i64).sum();
                s as f64 / (l.k as f64 * 2f64.powi(l.k as i32))
            }
        }
    }

    /// `E_0(S_n)(ω)` for each `n` in `n_grid`.
    pub fn conditional_sums(&self, n_grid: &[u64]) -> Vec<f64> {
        conditional_sums(&self.levels, &self.phases, &self.signs, n_grid)
    }
}

// E(X_i | F_0) = Σ_k θ_k 1_{A_k}(T^i ω) Σ_{j=max(N_k+1, i)}^{2N_k} e_{i−j},
// summed over i = 1..n.
fn conditional_sums(levels: &[RealizedLevel], phases: &[u128], signs: &[i8], n_grid: &[u64]) -> Vec<f64> {
    // prefix[t] = Σ_{m<t} e_{-m}
    let mut prefix = Vec::with_capacity(signs.len() + 1);
    let mut acc = 0i64;
    prefix.push(0);
    for &e in signs {
        acc += e as i64;
        prefix.push(acc);
    }
    let n_max = n_grid.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(n_grid.len());
    let mut total = 0.0;
    for i in 1..=n_max {
        if let Some(idx) = level_at(levels, phases, i) {
            let l = &levels[idx];
            if i <= 2 * l.n_k {
                // m = j − i runs over [max(N_k + 1 − i, 0), 2N_k − i].
                let lo = (l.n_k + 1).saturating_sub(i) as usize;
                let hi = (2 * l.n_k - i) as usize;
                let w = prefix[hi + 1] - prefix[lo];
                total += w as f64 / (l.k as f64 * 2f64.powi(l.k as i32));
            }
        }
        for (slot, &n) in n_grid.iter().enumerate() {
            if n == i {
                out.resize(slot + 1, 0.0);
                out[slot] = total;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalNormPoint {
    pub n: u64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalNorms {
    pub paper_condition: String,
    pub k_max: u32,
    pub replicas: usize,
    pub seed: u64,
    /// Estimates of `‖E_0(S_n)‖_1`.
    pub points: Vec<ConditionalNormPoint>,
    /// `Σ_{k<K} 1/k` and `ln(K − 1)`, the shape of the lower bound.
    pub harmonic_target: f64,
    pub log_target: f64,
}

/// `‖E_0(S_n)‖_1` by averaging `|E_0(S_n)|` over `replicas` independent
/// draws of the phases and signs, for `n` among the block lengths `N_k`.
pub fn empirical_conditional_norms(
    system: &RealizedSystem,
    n_grid: &[u64],
    replicas: usize,
    seed: u64,
) -> Result<ConditionalNorms> {
    if n_grid.is_empty() || n_grid.iter().any(|n| !system.levels.iter().any(|l| l.n_k == *n)) {
        return invalid("n must be one of the block lengths N_1, ..., N_K");
    }
    if replicas < 2 {
        return invalid("need at least two replicas");
    }
    let per: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let (phases, signs) = draw_sample(system.k_max, &system.levels, seed, r);
            conditional_sums(&system.levels, &phases, &signs, n_grid)
                .into_iter()
                .map(f64::abs)
                .collect()
        })
        .collect();
    let points = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let col: Vec<f64> = per.iter().map(|v| v[i]).collect();
            let (mean, stderr) = mean_and_stderr(&col);
            ConditionalNormPoint { n, mean, stderr }
        })
        .collect();
    let k = system.k_max;
    Ok(ConditionalNorms {
        paper_condition: "2.3".into(),
        k_max: k,
        replicas,
        seed,
        points,
        harmonic_target: (1..k).map(|j| 1.0 / j as f64).sum(),
        log_target: if k > 1 { ((k - 1) as f64).ln() } else { 0.0 },
    })
}
