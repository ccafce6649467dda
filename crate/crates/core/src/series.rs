//! Partial-sum traces with convergence verdicts.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What a finite computation can say about an infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// A tail bound was computed and the series converges.
    ConvergentCertified,
    /// The partial sums have stabilized, but no tail bound is available.
    ConvergentEvidence,
    /// Terms are identified with a known divergent series.
    DivergentEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    /// Tag of the condition the series evaluates ("2.1", "5.2", ...).
    pub paper_condition: Option<String>,
    /// Index of the first term (`n` starts at 1 for some series).
    #[serde(default)]
    pub first_index: usize,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Certified bound on the remainder beyond the last term.
    pub tail_bound: Option<f64>,
    pub verdict: Verdict,
    /// Named constants attached to the series (prefactors, ratios).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
}

impl SeriesReport {
    pub fn from_terms(terms: Vec<f64>) -> Self {
        let partial_sums = terms
            .iter()
            .scan(0.0, |acc, t| {
                *acc += t;
                Some(*acc)
            })
            .collect();
        SeriesReport {
            paper_condition: None,
            first_index: 0,
            terms,
            partial_sums,
            tail_bound: None,
            verdict: Verdict::Inconclusive,
            constants: BTreeMap::new(),
        }
    }

    pub fn tagged(mut self, tag: &str) -> Self {
        self.paper_condition = Some(tag.to_string());
        self
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// Partial sum through term `k` (inclusive), clamped to the last term.
    pub fn partial(&self, k: usize) -> f64 {
        if self.partial_sums.is_empty() {
            return 0.0;
        }
        self.partial_sums[k.min(self.partial_sums.len() - 1)]
    }

    /// Marks the series convergent-evidence when the second half of the
    /// partial sums moved by less than `tol`.
    pub fn judge_by_stabilization(mut self, tol: f64) -> Self {
        let n = self.partial_sums.len();
        if n >= 2 {
            let drift = (self.partial(n - 1) - self.partial((n - 1) / 2)).abs();
            self.verdict = if drift < tol {
                Verdict::ConvergentEvidence
            } else {
                Verdict::Inconclusive
            };
        }
        self
    }

    /// Least-squares slope of `ln |term_k|` against `ln k` over `k` in
    /// `[lo, hi]`, skipping vanishing terms.
    pub fn tail_exponent(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = (lo.max(1)..=hi.min(self.terms.len().saturating_sub(1)))
            .filter(|&k| self.terms[k].abs() > 0.0)
            .map(|k| ((k as f64).ln(), self.terms[k].abs().ln()))
            .collect();
        crate::numerics::linear_fit(&pts).map(|fit| fit.slope)
    }
}

/// Geometric tail certificate from the decay of successive norms.
///
/// `norms[k]` bounds the magnitude contributed by term `k` onwards; the
/// contraction ratio is the largest of the last five successive ratios and
/// the certificate is issued only when it is below 0.999.
pub fn geometric_certificate(norms: &[f64]) -> Option<(f64, f64)> {
    let n = norms.len();
    if n == 0 {
        return None;
    }
    let last = norms[n - 1];
    if last == 0.0 {
        return Some((0.0, 0.0));
    }
    if n < 2 {
        return None;
    }
    let window = 5.min(n - 1);
    let mut ratio = 0.0f64;
    for k in (n - 1 - window)..(n - 1) {
        if norms[k] == 0.0 {
            return Some((0.0, 0.0));
        }
        ratio = ratio.max(norms[k + 1] / norms[k]);
    }
    if ratio < 0.999 {
        Some((ratio, last * ratio / (1.0 - ratio)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sums_accumulate() {
        let r = SeriesReport::from_terms(vec![1.0, 0.5, 0.25]);
        assert_eq!(r.partial_sums, vec![1.0, 1.5, 1.75]);
        assert_eq!(r.total(), 1.75);
    }

    #[test]
    fn certificate_for_geometric_norms() {
        let norms: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let (r, tail) = geometric_certificate(&norms).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!((tail - 0.5f64.powi(19)).abs() < 1e-15);
    }

    #[test]
    fn no_certificate_without_contraction() {
        let norms = vec![1.0; 10];
        assert!(geometric_certificate(&norms).is_none());
    }

    #[test]
    fn verdict_serializes_kebab_case() {
        let s = serde_json::to_string(&Verdict::ConvergentCertified).unwrap();
        assert_eq!(s, "\"convergent-certified\"");
    }
}
