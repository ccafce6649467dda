//! The intermittent map `T_γ`, the Ulam discretization of its transfer
//! operator, and the backward Markov chain whose kernel is the transfer
//! operator with respect to the invariant measure.
//!
//! `T(x) = x(1 + 2^γ x^γ)` on `[0, 1/2)` and `T(x) = 2x − 1` on `[1/2, 1]`.

mod observable;
mod sampler;
mod ulam;

pub use observable::ObservableSpec;
pub use sampler::IntermittentChain;
pub use ulam::{alpha_coeffs_ulam, eta_ulam, DualityCheck, Kernel, UlamModel, DUALITY_DICTIONARY};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMap {
    gamma: f64,
    // 2^γ
    scale: f64,
}

impl GammaMap {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return invalid(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        Ok(GammaMap {
            gamma,
            scale: 2f64.powf(gamma),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub(crate) fn left(&self, x: f64) -> f64 {
        x * (1.0 + self.scale * x.powf(self.gamma))
    }

    pub(crate) fn left_deriv(&self, x: f64) -> f64 {
        1.0 + self.scale * (1.0 + self.gamma) * x.powf(self.gamma)
    }

    fn check(x: f64) -> Result<()> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            invalid(format!("{x} is outside [0, 1]"))
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok(self.apply(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        Ok(if x < 0.5 { self.left_deriv(x) } else { 2.0 })
    }

    /// `T(x)` without the domain check.
    #[inline]
    pub(crate) fn apply(&self, x: f64) -> f64 {
        if x < 0.5 {
            self.left(x)
        } else {
            2.0 * x - 1.0
        }
    }

    /// Solves `T_left(x) = y` for `x` in `[lo, hi]`, a bracket of the root.
    pub(crate) fn left_inverse_in(&self, y: f64, lo: f64, hi: f64) -> f64 {
        self.left_inverse_from(y, lo, hi, hi).0
    }

    /// Newton's method for `T_left(x) = y` from `start` in the bracket
    /// `[lo, hi]`.
    ///
    /// The left branch is increasing and convex, so from any start the
    /// iterates after the first lie above the root and decrease to it. The
    /// error after a step of relative size `r` is about `c r²` with
    /// `c = x T''/(2T') < 1/2`, so iteration stops once `r ≤ 1e-8`.
    /// Returns the root and `T'` at the last iterate, which agrees with
    /// `T'(root)` to relative order `1e-8`.
    pub(crate) fn left_inverse_from(&self, y: f64, lo: f64, hi: f64, start: f64) -> (f64, f64) {
        if y <= 0.0 {
            return (0.0, 1.0);
        }
        let mut x = start.clamp(lo, hi);
        for _ in 0..NEWTON_MAX_ITER {
            let xg = x.powf(self.gamma);
            let value = x * (1.0 + self.scale * xg);
            let deriv = 1.0 + self.scale * (1.0 + self.gamma) * xg;
            let next = (x - (value - y) / deriv).clamp(lo, hi);
            if (next - x).abs() <= NEWTON_RTOL * x {
                return (next, deriv);
            }
            x = next;
        }
        (x, self.left_deriv(x))
    }

    /// The two preimages of `y`: the left one (absent for `y = 1`, whose
    /// left preimage would be `1/2`, which belongs to the right branch) and
    /// `(y + 1)/2`.
    pub fn preimages(&self, y: f64) -> Result<(Option<f64>, f64)> {
        Self::check(y)?;
        let right = 0.5 * (y + 1.0);
        if y == 1.0 {
            return Ok((None, right));
        }
        // T(x) ≥ x gives x ≤ y; T(x) ≤ x(1 + (2y)^γ) on [0, y] gives the
        // lower end.
        let hi = y.min(0.5);
        let lo = y / (1.0 + (2.0 * y).powf(self.gamma));
        Ok((Some(self.left_inverse_in(y, lo, hi)), right))
    }
}

/// A forward orbit `x_0, ..., x_n` with the Birkhoff sum of an observable
/// over `x_0, ..., x_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub orbit: Vec<f64>,
    pub sum: f64,
}

pub fn traj(map: &GammaMap, x0: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Trajectory> {
    GammaMap::check(x0)?;
    let mut orbit = Vec::with_capacity(n + 1);
    let mut x = x0;
    let mut sum = 0.0;
    orbit.push(x);
    for _ in 0..n {
        sum += f(x);
        x = map.apply(x);
        orbit.push(x);
    }
    Ok(Trajectory { orbit, sum })
}
