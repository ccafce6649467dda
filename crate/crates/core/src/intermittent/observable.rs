//! Observables on `[0, 1]` for the intermittent chain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::adaptive_integral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    /// `1_{[0, threshold]}`.
    BvIndicator { threshold: f64 },
    /// `x^{-a} (1 − ln x)^{-d}`, positive and non-increasing on `(0, 1]`.
    PowerLog { a: f64, d: f64 },
    /// Step function equal to `values[i]` on `[breaks[i], breaks[i+1])`,
    /// with `breaks` increasing from 0 to 1.
    Table { breaks: Vec<f64>, values: Vec<f64> },
}

impl ObservableSpec {
    pub fn indicator(threshold: f64) -> Self {
        ObservableSpec::BvIndicator { threshold }
    }

    pub fn power_log(a: f64, d: f64) -> Self {
        ObservableSpec::PowerLog { a, d }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObservableSpec::BvIndicator { threshold } => {
                if !(0.0..=1.0).contains(threshold) {
                    return invalid("indicator threshold must lie in [0, 1]");
                }
            }
            ObservableSpec::PowerLog { a, d } => {
                if !(a.is_finite() && *a >= 0.0 && *a < 1.0 && d.is_finite() && *d >= 0.0) {
                    return invalid("power_log needs 0 ≤ a < 1 and d ≥ 0");
                }
            }
            ObservableSpec::Table { breaks, values } => {
                if breaks.len() != values.len() + 1 || values.is_empty() {
                    return invalid("table needs one more break than values");
                }
                if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 || breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("table breaks must increase from 0 to 1");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return invalid("table values must be finite");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ObservableSpec::BvIndicator { threshold } => {
                if x <= *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            ObservableSpec::PowerLog { a, d } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(-a) * (1.0 - x.ln()).powf(-d)
                }
            }
            ObservableSpec::Table { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= x).clamp(1, values.len());
                values[i - 1]
            }
        }
    }

    /// `(∫_lo^hi f, ∫_lo^hi f²)` over a cell `[lo, hi] ⊆ [0, 1]`.
    pub fn cell_integrals(&self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            ObservableSpec::BvIndicator { threshold } => {
                let len = (hi.min(*threshold) - lo).max(0.0);
                (len, len)
            }
            ObservableSpec::Table { breaks, values } => {
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for (i, v) in values.iter().enumerate() {
                    let len = (hi.min(breaks[i + 1]) - lo.max(breaks[i])).max(0.0);
                    s1 += v * len;
                    s2 += v * v * len;
                }
                (s1, s2)
            }
            ObservableSpec::PowerLog { a, d } => (power_log_integral(*a, *d, lo, hi), power_log_integral(2.0 * a, 2.0 * d, lo, hi)),
        }
    }

    /// `(a, d)` for observables behaving like `x^{-a}(1 − ln x)^{-d}`
    /// at the origin; bounded observables report `(0, 0)`.
    pub fn singularity(&self) -> (f64, f64) {
        match self {
            ObservableSpec::PowerLog { a, d } => (*a, *d),
            _ => (0.0, 0.0),
        }
    }
}

/// `∫_lo^hi x^{-a}(1 − ln x)^{-d} dx` for `a < 1`.
///
/// With `u = x^{1−a}` the integrand becomes `(1 − ln x)^{-d}/(1 − a)`, which
/// is bounded, so Gauss-Legendre converges on every cell including `[0, e₁]`.
fn power_log_integral(a: f64, d: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if a >= 1.0 {
        return f64::INFINITY;
    }
    let s = 1.0 - a;
    if d == 0.0 {
        return (hi.powf(s) - lo.powf(s)) / s;
    }
    let g = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            let lnx = u.ln() / s;
            (1.0 - lnx).powf(-d) / s
        }
    };
    adaptive_integral(&g, lo.powf(s), hi.powf(s), 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn indicator_cells() {
        let f = ObservableSpec::indicator(0.5);
        assert_eq!(f.cell_integrals(0.0, 0.25), (0.25, 0.25));
        assert_eq!(f.cell_integrals(0.4, 0.6), (0.09999999999999998, 0.09999999999999998));
        assert_eq!(f.cell_integrals(0.6, 0.7), (0.0, 0.0));
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.50001), 0.0);
    }

    #[test]
    fn power_law_integrals() {
        let f = ObservableSpec::power_log(0.25, 0.0);
        let (s1, s2) = f.cell_integrals(0.0, 1.0);
        assert_relative_eq!(s1, 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(s2, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn power_log_matches_substitution_free_quadrature() {
        let f = ObservableSpec::power_log(0.25, 1.5);
        let (lo, hi) = (0.2, 0.7);
        let direct = adaptive_integral(&|x: f64| f.eval(x), lo, hi, 1e-13);
        assert_relative_eq!(f.cell_integrals(lo, hi).0, direct, max_relative = 1e-10);
        // Near the origin, split at a point and compare additivity.
        let whole = f.cell_integrals(0.0, 1e-3).0;
        let parts = f.cell_integrals(0.0, 1e-6).0 + f.cell_integrals(1e-6, 1e-3).0;
        assert_relative_eq!(whole, parts, max_relative = 1e-10);
    }

    #[test]
    fn table_observable() {
        let f = ObservableSpec::Table {
            breaks: vec![0.0, 0.3, 1.0],
            values: vec![2.0, -1.0],
        };
        f.validate().unwrap();
        assert_eq!(f.eval(0.1), 2.0);
        assert_eq!(f.eval(0.3), -1.0);
        assert_eq!(f.eval(1.0), -1.0);
        let (s1, s2) = f.cell_integrals(0.2, 0.5);
        assert_relative_eq!(s1, 0.2 - 0.2, epsilon = 1e-15);
        assert_relative_eq!(s2, 0.4 + 0.2, epsilon = 1e-15);
        let bad = ObservableSpec::Table {
            breaks: vec![0.0, 0.5],
            values: vec![1.0, 2.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_form() {
        let f: ObservableSpec = serde_json::from_str(r#"{"kind":"power_log","a":0.25,"d":0}"#).unwrap();
        assert_eq!(f, ObservableSpec::power_log(0.25, 0.0));
        let g: ObservableSpec = serde_json::from_str(r#"{"kind":"bv_indicator","threshold":0.5}"#).unwrap();
        assert_eq!(g, ObservableSpec::indicator(0.5));
    }
}
