//! Block conditions C1–C4 by simulation: the outer expectation given the
//! start is a replica average, the inner conditional expectations are exact
//! functions of the conditioning state computed from a kernel model.

use rayon::prelude::*;

use super::ChainSampler;
use crate::error::{invalid, Error, Result};
use crate::finite_chain::{eta_exact, lindeberg_stats, BlockDiagnostics, Estimate, FiniteChain};
use crate::intermittent::{eta_ulam, IntermittentChain};
use crate::numerics::mean_and_stderr;
use crate::rng::replica_rng;

/// Index range of the long-run variance series used for the reference `η`
/// of the discretized intermittent chain.
const ULAM_ETA_KMAX: usize = 512;

/// A finite description of the transition kernel of a sampler: states of
/// the sampler map to kernel states, on which `P` acts as a matrix.
pub trait KernelModel<S>: Sync {
    fn kernel_size(&self) -> usize;

    fn kernel_index(&self, x: S) -> usize;

    /// `(Pv)(i) = E(v(ξ_1) | ξ_0 ∈ i)`.
    fn kernel_apply(&self, v: &[f64]) -> Vec<f64>;

    /// The centered observable and its square as functions of the kernel
    /// state.
    fn kernel_observable(&self) -> (Vec<f64>, Vec<f64>);

    /// Long-run variance of the observable under the kernel.
    fn reference_eta(&self) -> Result<f64>;
}

impl KernelModel<usize> for FiniteChain {
    fn kernel_size(&self) -> usize {
        self.n_states()
    }

    fn kernel_index(&self, x: usize) -> usize {
        x
    }

    fn kernel_apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v)
    }

    fn kernel_observable(&self) -> (Vec<f64>, Vec<f64>) {
        let f = self.observable().to_vec();
        let f2 = f.iter().map(|v| v * v).collect();
        (f, f2)
    }

    fn reference_eta(&self) -> Result<f64> {
        eta_exact(self, 100_000, 1e-13).map(|r| r.0)
    }
}

impl KernelModel<f64> for IntermittentChain {
    fn kernel_size(&self) -> usize {
        self.model().n_cells()
    }

    fn kernel_index(&self, x: f64) -> usize {
        self.model().cell_of(x)
    }

    fn kernel_apply(&self, v: &[f64]) -> Vec<f64> {
        self.model().apply_unchecked(v)
    }

    fn kernel_observable(&self) -> (Vec<f64>, Vec<f64>) {
        (self.centered_cell_values().to_vec(), self.centered_cell_squares().to_vec())
    }

    fn reference_eta(&self) -> Result<f64> {
        eta_ulam(self.model(), self.observable_spec(), ULAM_ETA_KMAX).map(|r| r.0)
    }
}

// (A_n, B_n) with A_n(i) = E_i(S_n), B_n(i) = E_i(S_n²), by
// A_{k+1} = P(f + A_k) and B_{k+1} = P(f² + 2fA_k + B_k).
fn moments<S>(model: &dyn KernelModel<S>, f: &[f64], f2: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; f.len()];
    let mut b = vec![0.0; f.len()];
    for _ in 0..n {
        let b_in: Vec<f64> = (0..f.len()).map(|i| f2[i] + 2.0 * f[i] * a[i] + b[i]).collect();
        let a_in: Vec<f64> = f.iter().zip(&a).map(|(u, v)| u + v).collect();
        b = model.kernel_apply(&b_in);
        a = model.kernel_apply(&a_in);
    }
    (a, b)
}

fn apply_power<S>(model: &dyn KernelModel<S>, v: &[f64], p: usize) -> Vec<f64> {
    (0..p).fold(v.to_vec(), |acc, _| model.kernel_apply(&acc))
}

struct ReplicaBlocks {
    // Kernel state at times 0, p, ..., (m−1)p.
    anchors: Vec<usize>,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

/// C1–C4 at `(m, p)` from `replicas` trajectories of length `mp` started at
/// `x0`. `eta` defaults to the kernel's reference value.
#[allow(clippy::too_many_arguments)]
pub fn block_diagnostics_mc<S: ChainSampler>(
    sampler: &S,
    model: Option<&dyn KernelModel<S::State>>,
    x0: S::State,
    m: usize,
    p: usize,
    eps_grid: &[f64],
    eta: Option<f64>,
    replicas: usize,
    seed: u64,
) -> Result<BlockDiagnostics> {
    let Some(model) = model else {
        return Err(Error::Unsupported(
            "block diagnostics need a kernel model for the inner conditional expectations".into(),
        ));
    };
    if m < 2 || p < 1 {
        return invalid("block diagnostics need m ≥ 2 and p ≥ 1");
    }
    if replicas < 2 {
        return invalid("need at least two replicas");
    }
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return invalid("eps values must be positive");
    }
    let eta = match eta {
        Some(e) if e >= 0.0 => e,
        Some(e) => return invalid(format!("eta must be non-negative, got {e}")),
        None => model.reference_eta()?,
    };
    let mp = (m * p) as f64;
    let (f, f2) = model.kernel_observable();
    let (a_p, b_p) = moments(model, &f, &f2, p);
    let h = apply_power(model, &a_p, p);
    let v_next: Vec<f64> = apply_power(model, &b_p, p).iter().map(|v| v / mp).collect();
    let (_, b_2p) = moments(model, &f, &f2, 2 * p);
    let v_pair: Vec<f64> = b_2p.iter().map(|v| v / mp).collect();

    let runs: Vec<ReplicaBlocks> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut x = x0;
            let mut out = ReplicaBlocks {
                anchors: Vec::with_capacity(m),
                sums: Vec::with_capacity(m),
                maxes: Vec::with_capacity(m),
            };
            for _ in 0..m {
                out.anchors.push(model.kernel_index(x));
                let mut s = 0.0f64;
                let mut mx = 0.0f64;
                for _ in 0..p {
                    x = sampler.step(x, &mut rng);
                    s += sampler.observe(x);
                    mx = mx.max(s.abs());
                }
                out.sums.push(s);
                out.maxes.push(mx);
            }
            out
        })
        .collect();
    if runs.iter().any(|r| r.sums.iter().any(|s| !s.is_finite())) {
        return invalid("non-finite block sum");
    }
    let estimate = |vals: Vec<f64>| {
        let (value, se) = mean_and_stderr(&vals);
        Estimate {
            value,
            stderr: Some(se),
        }
    };
    let c1 = estimate(
        runs.iter()
            .map(|r| r.anchors.iter().map(|&i| h[i].abs()).sum::<f64>() / mp.sqrt())
            .collect(),
    );
    let skeleton = |w: &[f64], target: f64| {
        estimate(
            runs.iter()
                .map(|r| (r.anchors.iter().map(|&i| w[i]).sum::<f64>() - target).abs())
                .collect(),
        )
    };
    let c2 = [skeleton(&v_next, eta), skeleton(&v_pair, 2.0 * eta)];
    let sums: Vec<Vec<f64>> = runs.iter().map(|r| r.sums.clone()).collect();
    let maxes: Vec<Vec<f64>> = runs.into_iter().map(|r| r.maxes).collect();
    Ok(BlockDiagnostics {
        paper_condition: "C1-C4".into(),
        m,
        p,
        start: sampler.describe(x0),
        c1,
        c2,
        c3: lindeberg_stats(&sums, eps_grid, m, p),
        c4: lindeberg_stats(&maxes, eps_grid, m, p),
        eta_used: eta,
    })
}

#[cfg(test)]
mod tests {
    use super::super::IidNormal;
    use super::*;
    use crate::finite_chain::block_diagnostics_exact;

    fn three_state() -> FiniteChain {
        FiniteChain::new(
            vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.05, 0.05, 0.9]],
            vec![1.0, 0.0, -1.0],
            None,
        )
        .unwrap()
    }

    #[test]
    fn agrees_with_exact_engine() {
        let chain = three_state();
        let eps = [0.25, 0.5];
        let exact = block_diagnostics_exact(&chain, 0, 4, 8, &eps, 4000, 3).unwrap();
        let mc = block_diagnostics_mc(&chain, Some(&chain), 0, 4, 8, &eps, None, 4000, 3).unwrap();
        assert!((mc.eta_used - exact.eta_used).abs() < 1e-12);
        let close = |a: &Estimate, b: &Estimate| {
            let se = a.stderr.unwrap().max(1e-12) + b.stderr.unwrap_or(0.0);
            (a.value - b.value).abs() < 4.0 * se
        };
        assert!(close(&mc.c1, &exact.c1), "{:?} vs {:?}", mc.c1, exact.c1);
        assert!(close(&mc.c2[0], &exact.c2[0]), "{:?} vs {:?}", mc.c2[0], exact.c2[0]);
        assert!(close(&mc.c2[1], &exact.c2[1]), "{:?} vs {:?}", mc.c2[1], exact.c2[1]);
        for (a, b) in mc.c3.iter().zip(&exact.c3) {
            assert!((a.value - b.value).abs() < 4.0 * (a.stderr + b.stderr) + 1e-12);
        }
    }

    #[test]
    fn iid_kernel_has_zero_c1() {
        let chain = FiniteChain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, -1.0], None).unwrap();
        let d = block_diagnostics_mc(&chain, Some(&chain), 0, 8, 16, &[0.5], None, 500, 1).unwrap();
        assert!(d.c1.value.abs() <= 3.0 * d.c1.stderr.unwrap() + 1e-12);
        assert!(d.c1.value < 1e-12);
    }

    #[test]
    fn zero_observable_is_all_zero() {
        let chain = FiniteChain::two_state(0.3, 0.4, [1.0, 1.0]).unwrap();
        let d = block_diagnostics_mc(&chain, Some(&chain), 1, 4, 4, &[0.5], None, 100, 1).unwrap();
        assert_eq!(d.c1.value, 0.0);
        assert_eq!(d.c2[0].value, 0.0);
        assert_eq!(d.c2[1].value, 0.0);
        assert!(d.c3.iter().chain(&d.c4).all(|e| e.value == 0.0));
    }

    #[test]
    fn sampler_without_kernel_is_unsupported() {
        let s = IidNormal { sigma: 1.0 };
        let r = block_diagnostics_mc(&s, None, 0.0, 4, 4, &[0.5], Some(1.0), 100, 1);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let chain = three_state();
        let a = block_diagnostics_mc(&chain, Some(&chain), 2, 4, 8, &[0.5], None, 300, 11).unwrap();
        let b = block_diagnostics_mc(&chain, Some(&chain), 2, 4, 8, &[0.5], None, 300, 11).unwrap();
        assert_eq!(a, b);
    }
}
