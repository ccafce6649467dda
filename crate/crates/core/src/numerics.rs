//! Small numerical helpers shared across modules.

use statrs::function::erf::erfc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Distribution function of a centered normal with variance `var > 0`.
pub fn normal_cdf(x: f64, var: f64) -> f64 {
    std_normal_cdf(x / var.sqrt())
}

// 16-point Gauss-Legendre rule on [-1, 1]; positive nodes only.
const GL_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_8,
    0.062_253_523_938_647_9,
    0.027_152_459_411_754_1,
];

/// 16-point Gauss-Legendre approximation of `∫_a^b g`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (g(mid - half * x) + g(mid + half * x));
    }
    acc * half
}

/// Adaptive bisection on top of the 16-point rule, relative tolerance `rtol`.
pub fn adaptive_integral<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, rtol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gauss_legendre(g, a, m);
        let right = gauss_legendre(g, m, b);
        let both = left + right;
        if depth == 0 || !both.is_finite() || (both - whole).abs() <= tol.max(f64::MIN_POSITIVE) {
            both
        } else {
            recurse(g, a, m, left, 0.5 * tol, depth - 1) + recurse(g, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    let whole = gauss_legendre(g, a, b);
    recurse(g, a, b, whole, rtol * whole.abs(), 40)
}

/// Mean and standard error of the mean, summed in sorted order so the
/// result does not depend on the order of `values`.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n as f64 - 1.0) / n as f64).sqrt())
}

/// Sample variance (unbiased) and its leave-one-out jackknife standard
/// error, computed order-independently.
pub fn variance_with_jackknife(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n < 3 {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    // Shift by the mean before accumulating to limit cancellation.
    let centered: Vec<f64> = sorted.iter().map(|v| v - mean).collect();
    let s1: f64 = centered.iter().sum();
    let s2: f64 = centered.iter().map(|c| c * c).sum();
    let var = (s2 - s1 * s1 / nf) / (nf - 1.0);
    let loo: Vec<f64> = centered
        .iter()
        .map(|c| {
            let t1 = s1 - c;
            let t2 = s2 - c * c;
            (t2 - t1 * t1 / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let jk = ((nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).sum::<f64>()).sqrt();
    (var, jk)
}
