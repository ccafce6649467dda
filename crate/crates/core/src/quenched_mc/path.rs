//! The piecewise-linear Donsker process of a sequence of increments.

use std::collections::VecDeque;

/// `W_n(t) = n^{-1/2}(S_⌊nt⌋ + (nt − ⌊nt⌋) X_{⌊nt⌋+1})` for increments
/// `X_1, ..., X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DonskerPath {
    increments: Vec<f64>,
    // partial[k] = S_k, partial[0] = 0.
    partial: Vec<f64>,
    root_n: f64,
}

impl DonskerPath {
    pub fn new(increments: Vec<f64>) -> Self {
        let mut partial = Vec::with_capacity(increments.len() + 1);
        let mut s = 0.0;
        partial.push(s);
        for x in &increments {
            s += x;
            partial.push(s);
        }
        let root_n = (increments.len() as f64).sqrt();
        DonskerPath {
            increments,
            partial,
            root_n,
        }
    }

    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn into_increments(self) -> Vec<f64> {
        self.increments
    }

    /// `S_k`.
    pub fn partial_sum(&self, k: usize) -> f64 {
        self.partial[k]
    }

    /// `W_n` at the grid point `k/n`, exactly `S_k/√n`.
    pub fn at_node(&self, k: usize) -> f64 {
        self.partial[k] / self.root_n
    }

    /// `W_n(t)` for `t ∈ [0, 1]`. Arguments within rounding of a node
    /// `k/n` evaluate to `S_k/√n` bit for bit.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.n();
        let x = (t.clamp(0.0, 1.0)) * n as f64;
        let k = x.round();
        if (x - k).abs() <= 4.0 * f64::EPSILON * x.max(1.0) {
            return self.at_node(k as usize);
        }
        self.at_position(x)
    }

    // W_n at t = x/n for a fractional position x ∈ [0, n].
    fn at_position(&self, x: f64) -> f64 {
        let k = (x.floor() as usize).min(self.n());
        let frac = x - k as f64;
        if frac == 0.0 || k == self.n() {
            return self.at_node(k);
        }
        (self.partial[k] + frac * self.increments[k]) / self.root_n
    }

    /// `sup_{0≤s≤t≤1, t−s≤δ} |W_n(t) − W_n(s)|`, exact.
    ///
    /// On each grid cell the difference is linear in `(s, t)`, so the sup is
    /// attained at a vertex of the band `0 ≤ t − s ≤ δ` cut by the grid: a
    /// pair of nodes at lag at most `⌊nδ⌋`, or a pair with `t − s = δ` and
    /// one endpoint on a node.
    pub fn modulus(&self, delta: f64) -> f64 {
        let n = self.n();
        if n == 0 || delta <= 0.0 {
            return 0.0;
        }
        let span = delta * n as f64;
        let lag = if span >= n as f64 { n } else { span.floor() as usize };
        let mut best = windowed_range(&self.partial, lag) / self.root_n;
        if span < n as f64 && span.fract() != 0.0 {
            for k in 0..=n {
                let kf = k as f64;
                if kf + span <= n as f64 {
                    best = best.max((self.at_position(kf + span) - self.at_node(k)).abs());
                }
                if kf - span >= 0.0 {
                    best = best.max((self.at_node(k) - self.at_position(kf - span)).abs());
                }
            }
        }
        best
    }
}

// max over k ≤ j ≤ k + lag of |v_j − v_k|, with monotone deques.
fn windowed_range(v: &[f64], lag: usize) -> f64 {
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    // Sweep k downward; the window is [k, k + lag].
    for k in (0..v.len()).rev() {
        while maxq.back().is_some_and(|&j| v[j] <= v[k]) {
            maxq.pop_back();
        }
        maxq.push_back(k);
        while minq.back().is_some_and(|&j| v[j] >= v[k]) {
            minq.pop_back();
        }
        minq.push_back(k);
        while maxq.front().is_some_and(|&j| j > k + lag) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j > k + lag) {
            minq.pop_front();
        }
        best = best.max(v[maxq[0]] - v[k]).max(v[k] - v[minq[0]]);
    }
    best
}
