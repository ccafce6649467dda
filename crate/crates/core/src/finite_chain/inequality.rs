//! Exhaustive check of the conditional maximal inequality for partial sums.

use serde::{Deserialize, Serialize};

use super::FiniteChain;
use crate::error::{invalid, Error, Result};

const PATH_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxInequality {
    /// `E₀((S̄_{0,n} − λ)₊²)`.
    pub lhs: f64,
    /// `8 Σ E₀(X_i² 1_Γ) + 16 Σ E₀|X_i 1_Γ E_i(S_n − S_i)|`.
    pub rhs: f64,
}

impl MaxInequality {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-10
    }
}

struct Walk<'a> {
    chain: &'a FiniteChain,
    // g[j] = Σ_{i=1}^j Pⁱf, so E_i(S_n − S_i) = g[n-i](ξ_i).
    g: Vec<Vec<f64>>,
    n: usize,
    lambda: f64,
    lhs: f64,
    rhs: f64,
}

impl Walk<'_> {
    fn descend(&mut self, x: usize, depth: usize, prob: f64, s: f64, smax: f64) {
        if depth == self.n {
            let excess = (smax - self.lambda).max(0.0);
            self.lhs += prob * excess * excess;
            return;
        }
        for y in 0..self.chain.n_states() {
            let pxy = self.chain.transition(x, y);
            if pxy == 0.0 {
                continue;
            }
            let prob = prob * pxy;
            let xi = self.chain.observable()[y];
            let s = s + xi;
            let smax = smax.max(s.abs());
            let i = depth + 1;
            if smax > self.lambda {
                let future = self.g[self.n - i][y];
                self.rhs += prob * (8.0 * xi * xi + 16.0 * (xi * future).abs());
            }
            self.descend(y, i, prob, s, smax);
        }
    }
}

/// Both sides of the maximal inequality for `k = 0`, `l = n` by enumerating
/// every state path of length `n` from `x0` with its exact probability.
pub fn max_inequality_bruteforce(chain: &FiniteChain, x0: usize, n: usize, lambda: f64) -> Result<MaxInequality> {
    if x0 >= chain.n_states() {
        return invalid(format!("start state {x0} out of range"));
    }
    if n == 0 || !(lambda >= 0.0) {
        return invalid("need n ≥ 1 and λ ≥ 0");
    }
    let count = (chain.n_states() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > PATH_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let mut g = vec![vec![0.0; chain.n_states()]];
    let mut v = chain.observable().to_vec();
    for j in 1..n {
        v = chain.apply(&v);
        let next = g[j - 1].iter().zip(&v).map(|(a, b)| a + b).collect();
        g.push(next);
    }
    let mut walk = Walk {
        chain,
        g,
        n,
        lambda,
        lhs: 0.0,
        rhs: 0.0,
    };
    walk.descend(x0, 0, 1.0, 0.0, 0.0);
    Ok(MaxInequality {
        lhs: walk.lhs,
        rhs: walk.rhs,
    })
}
