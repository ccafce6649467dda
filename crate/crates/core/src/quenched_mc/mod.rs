//! Quenched experiments: many independent trajectories from one fixed
//! starting point, so that ensemble averages realize the expectation
//! conditional on the start.
//!
//! Replica `i` is driven by the generator seeded with `split(seed, i)`.
//! Every aggregate is computed from the replicas in a canonical order
//! (sorted by their values), so results depend only on the multiset of
//! replica seeds, never on thread scheduling.

mod blocks;
mod path;
mod report;

pub use blocks::{block_diagnostics_mc, KernelModel};
pub use path::DonskerPath;
pub use report::{
    fidis_report, quenched_clt_report, tightness_report, variance_growth_scan, FidisReport, QuenchedReport,
    TightnessReport, TightnessRow, VariancePoint, VarianceScan,
};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::finite_chain::FiniteChain;
use crate::intermittent::IntermittentChain;
use crate::rng::{split, rng_from_seed};

/// A Markov chain that can be simulated one step at a time, with a real
/// observable of the current state. Trajectories observe the state after
/// each step: `X_i = f(ξ_i)` for `i = 1..n`.
pub trait ChainSampler: Sync {
    type State: Copy + Send + Sync;

    fn step(&self, x: Self::State, rng: &mut ChaCha8Rng) -> Self::State;

    fn observe(&self, x: Self::State) -> f64;

    /// Human-readable description of a starting point, used in reports.
    fn describe(&self, x: Self::State) -> String;
}

impl ChainSampler for FiniteChain {
    type State = usize;

    fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        FiniteChain::step(self, x, rng)
    }

    fn observe(&self, x: usize) -> f64 {
        self.observable()[x]
    }

    fn describe(&self, x: usize) -> String {
        format!("state {x}")
    }
}

impl ChainSampler for IntermittentChain {
    type State = f64;

    fn step(&self, x: f64, rng: &mut ChaCha8Rng) -> f64 {
        self.chain_step(x, rng)
    }

    fn observe(&self, x: f64) -> f64 {
        IntermittentChain::observe(self, x)
    }

    fn describe(&self, x: f64) -> String {
        format!("x0 = {x}")
    }
}

/// Independent `N(0, σ²)` increments; the state is the last draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidNormal {
    pub sigma: f64,
}

impl ChainSampler for IidNormal {
    type State = f64;

    fn step(&self, _: f64, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.sigma * z
    }

    fn observe(&self, x: f64) -> f64 {
        x
    }

    fn describe(&self, _: f64) -> String {
        "i.i.d. (start irrelevant)".into()
    }
}

/// What each replica keeps besides `S_n`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathRequest {
    /// Times `t` at which `W_n(t)` is recorded.
    pub times: Vec<f64>,
    /// Values of `m` for which the modulus `sup_{|t−s|≤1/m}|W_n(t)−W_n(s)|`
    /// is recorded.
    pub moduli: Vec<usize>,
    /// Indices `k` at which the partial sum `S_k` is recorded.
    pub checkpoints: Vec<usize>,
    /// Keep the full increment record.
    pub keep_increments: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub index: usize,
    pub seed: u64,
    pub s_n: f64,
    pub path_values: Vec<f64>,
    pub moduli: Vec<f64>,
    pub checkpoints: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub increments: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub start: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub request: PathRequest,
    /// Replicas in the order of their seeds.
    pub replicas: Vec<Replica>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    /// Replicas sorted by their recorded values; the order every aggregate
    /// is computed in.
    pub fn canonical(&self) -> Vec<&Replica> {
        let mut out: Vec<&Replica> = self.replicas.iter().collect();
        out.sort_by(|a, b| {
            a.s_n
                .total_cmp(&b.s_n)
                .then_with(|| lexicographic(&a.path_values, &b.path_values))
                .then_with(|| lexicographic(&a.moduli, &b.moduli))
                .then_with(|| lexicographic(&a.checkpoints, &b.checkpoints))
        });
        out
    }

    /// `S_n/√n` for every replica, in canonical order.
    pub fn normalized_sums(&self) -> Vec<f64> {
        let root = (self.n as f64).sqrt();
        self.canonical().iter().map(|r| r.s_n / root).collect()
    }

    /// CSV with columns `replica,S_n,S_n/sqrt(n)`, in seed order.
    pub fn sums_csv(&self) -> String {
        let root = (self.n as f64).sqrt();
        let mut out = String::from("replica,S_n,S_n/sqrt(n)\n");
        for r in &self.replicas {
            let _ = writeln!(out, "{},{},{}", r.index, r.s_n, r.s_n / root);
        }
        out
    }
}

fn check_request(n: usize, request: &PathRequest) -> Result<()> {
    if request.times.iter().any(|t| !(*t >= 0.0 && *t <= 1.0)) {
        return invalid("path times must lie in [0, 1]");
    }
    if request.moduli.contains(&0) {
        return invalid("modulus grid needs m ≥ 1");
    }
    if request.checkpoints.iter().any(|&k| k > n) {
        return invalid("checkpoints must not exceed n");
    }
    Ok(())
}

fn simulate<S: ChainSampler>(
    sampler: &S,
    x0: S::State,
    n: usize,
    index: usize,
    seed: u64,
    request: &PathRequest,
) -> Result<Replica> {
    let mut rng = rng_from_seed(seed);
    let mut x = x0;
    let mut increments = Vec::with_capacity(n);
    for i in 0..n {
        x = sampler.step(x, &mut rng);
        let v = sampler.observe(x);
        if !v.is_finite() {
            return Err(Error::Replica {
                index,
                source: Box::new(Error::InvalidInput(format!("non-finite observation at step {}", i + 1))),
            });
        }
        increments.push(v);
    }
    let path = DonskerPath::new(increments);
    Ok(Replica {
        index,
        seed,
        s_n: path.partial_sum(n),
        path_values: request.times.iter().map(|&t| path.eval(t)).collect(),
        moduli: request.moduli.iter().map(|&m| path.modulus(1.0 / m as f64)).collect(),
        checkpoints: request.checkpoints.iter().map(|&k| path.partial_sum(k)).collect(),
        increments: request.keep_increments.then(|| path.into_increments()),
    })
}

/// Runs one trajectory of length `n` from `x0` per entry of `seeds`.
pub fn run_with_seeds<S: ChainSampler>(
    sampler: &S,
    x0: S::State,
    n: usize,
    seeds: &[u64],
    request: &PathRequest,
) -> Result<Ensemble> {
    if n == 0 || seeds.is_empty() {
        return invalid("need n ≥ 1 and at least one replica");
    }
    check_request(n, request)?;
    let replicas = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| simulate(sampler, x0, n, i, s, request))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        start: sampler.describe(x0),
        n,
        seed: None,
        request: request.clone(),
        replicas,
    })
}

/// `replicas` independent trajectories of length `n` started at `x0`,
/// replica `i` seeded with `split(seed, i)`.
pub fn run_replicas<S: ChainSampler>(
    sampler: &S,
    x0: S::State,
    n: usize,
    replicas: usize,
    seed: u64,
    request: &PathRequest,
) -> Result<Ensemble> {
    if replicas < 100 || n < 16 {
        return invalid(format!("need at least 100 replicas and n ≥ 16, got R={replicas}, n={n}"));
    }
    let seeds: Vec<u64> = (0..replicas as u64).map(|i| split(seed, i)).collect();
    let mut ens = run_with_seeds(sampler, x0, n, &seeds, request)?;
    ens.seed = Some(seed);
    Ok(ens)
}
