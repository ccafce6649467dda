//! The backward chain: from `y`, jump to a preimage `x` of `y` with
//! probability proportional to `h(x)/T'(x)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use super::{ObservableSpec, UlamModel};
use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct IntermittentChain {
    model: Arc<UlamModel>,
    obs: ObservableSpec,
    // ν̂(f), subtracted from every observation.
    mean: f64,
    // Cell averages of the centered observable and of its square.
    cell_f: Vec<f64>,
    cell_f2: Vec<f64>,
}

impl IntermittentChain {
    /// The chain driven by `model`, observing `obs` centered under `ν̂`.
    pub fn new(model: Arc<UlamModel>, obs: ObservableSpec) -> Result<Self> {
        let (avg, avg_sq) = model.cell_averages(&obs)?;
        let mean = model.integrate(&avg);
        let cell_f = avg.iter().map(|v| v - mean).collect();
        let cell_f2 = avg.iter().zip(&avg_sq).map(|(a, s)| s - 2.0 * mean * a + mean * mean).collect();
        Ok(IntermittentChain {
            model,
            obs,
            mean,
            cell_f,
            cell_f2,
        })
    }

    pub fn model(&self) -> &UlamModel {
        &self.model
    }

    pub fn observable_spec(&self) -> &ObservableSpec {
        &self.obs
    }

    pub fn observable_mean(&self) -> f64 {
        self.mean
    }

    pub fn centered_cell_values(&self) -> &[f64] {
        &self.cell_f
    }

    pub fn centered_cell_squares(&self) -> &[f64] {
        &self.cell_f2
    }

    /// The centered observable at a point.
    #[inline]
    pub fn observe(&self, x: f64) -> f64 {
        self.obs.eval(x) - self.mean
    }

    /// The two candidate moves from `y` with their normalized weights:
    /// `[(x_left, w_left), (x_right, w_right)]`. At `y = 1` the only
    /// preimage is `1`.
    pub fn step_weights(&self, y: f64) -> Result<[(f64, f64); 2]> {
        if !(0.0..=1.0).contains(&y) {
            return invalid(format!("{y} is outside [0, 1]"));
        }
        Ok(self.weights_unchecked(y))
    }

    #[inline]
    fn weights_unchecked(&self, y: f64) -> [(f64, f64); 2] {
        let right = 0.5 * (y + 1.0);
        if y >= 1.0 {
            return [(0.5, 0.0), (right, 1.0)];
        }
        let model = &*self.model;
        let (left, deriv) = model.left_preimage(y);
        let wl = model.density()[model.cell_of(left)] / deriv;
        let wr = model.density()[model.cell_of(right)] / 2.0;
        let total = wl + wr;
        [(left, wl / total), (right, wr / total)]
    }

    /// One move of the chain.
    #[inline]
    pub fn chain_step(&self, y: f64, rng: &mut ChaCha8Rng) -> f64 {
        let [(left, wl), (right, _)] = self.weights_unchecked(y.clamp(0.0, 1.0));
        let u: f64 = rng.random();
        if u < wl {
            left
        } else {
            right
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn chain() -> IntermittentChain {
        let model = Arc::new(UlamModel::build(0.25, 2048, 2.0).unwrap());
        IntermittentChain::new(model, ObservableSpec::indicator(0.5)).unwrap()
    }

    #[test]
    fn weights_are_normalized() {
        let c = chain();
        for y in [0.0, 0.1, 0.3, 0.5, 0.99, 1.0] {
            let w = c.step_weights(y).unwrap();
            assert!((w[0].1 + w[1].1 - 1.0).abs() < 1e-15);
            assert!(w.iter().all(|p| p.1 >= 0.0));
        }
        assert!(c.step_weights(1.5).is_err());
    }

    #[test]
    fn moves_follow_backward_orbits() {
        let c = chain();
        let map = *c.model().map();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = 0.3;
        for _ in 0..10_000 {
            let x = c.chain_step(y, &mut rng);
            assert!((map.apply(x) - y).abs() <= 1e-12, "T({x}) != {y}");
            y = x;
        }
    }

    #[test]
    fn one_step_law_from_fixed_point() {
        let c = chain();
        let w = c.step_weights(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let lefts = (0..n).filter(|_| c.chain_step(0.3, &mut rng) < 0.5).count();
        let freq = lefts as f64 / n as f64;
        assert!((freq - w[0].1).abs() < 0.003, "{freq} vs {}", w[0].1);
    }

    #[test]
    fn observable_is_centered_on_cells() {
        let c = chain();
        assert!(c.model().integrate(c.centered_cell_values()).abs() < 1e-14);
        assert!((c.observe(0.2) - (1.0 - c.observable_mean())).abs() < 1e-15);
    }
}
