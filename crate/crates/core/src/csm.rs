//! Confidence-sequence stopping rule.
//!
//! The rule stops as soon as `(n + 1) b(n, alpha, S_n) <= epsilon` and
//! decides by which side of `alpha n` the partial sum landed on. The
//! equivalent integer boundaries
//! `u_n = max{k : (n+1) b(n,alpha,k) > eps} + 1` and
//! `l_n = min{k : (n+1) b(n,alpha,k) > eps} - 1` are computed incrementally,
//! warm-starting each step's search at the previous step's crossing points.

use crate::binom::ln_pmf_raw;
use crate::boundary::{BoundaryMeta, BoundaryPair, Method};
use crate::error::{Error, Result};
use crate::risk::BoundarySource;
use crate::source::SampleSource;
use crate::types::{Decision, RunResult, StoppedBy, TestConfig};

/// True iff the rule stops at step `n` with `s` successes.
///
/// Evaluated as `ln(n+1) + ln b(n, alpha, s) <= ln epsilon`; ties stop.
pub fn csm_should_stop(n: u64, s: u64, cfg: &TestConfig) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    if s > n {
        return Err(Error::InvalidParameter(format!(
            "success count {s} exceeds step {n}"
        )));
    }
    Ok(should_stop_raw(n, s, cfg.alpha, cfg.epsilon.ln()))
}

#[inline]
fn should_stop_raw(n: u64, s: u64, alpha: f64, ln_eps: f64) -> bool {
    ((n + 1) as f64).ln() + ln_pmf_raw(n, alpha, s) <= ln_eps
}

/// Incrementally extensible table of the implied stopping boundaries.
#[derive(Debug, Clone)]
pub struct CsmBoundaries {
    alpha: f64,
    epsilon: f64,
    ln_eps: f64,
    lower: Vec<i64>,
    upper: Vec<i64>,
    /// Smallest k with `(n+1) b(n, alpha, k) > eps` at the last step.
    min_k: u64,
    /// Largest such k at the last step.
    max_k: u64,
}

impl CsmBoundaries {
    pub fn new(cfg: &TestConfig) -> Result<Self> {
        TestConfig::new(cfg.alpha, cfg.epsilon)?;
        Ok(Self {
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            ln_eps: cfg.epsilon.ln(),
            lower: Vec::new(),
            upper: Vec::new(),
            min_k: 0,
            max_k: 0,
        })
    }

    pub fn n_max(&self) -> u64 {
        self.lower.len() as u64
    }

    pub fn lower(&self, n: u64) -> i64 {
        self.lower[(n - 1) as usize]
    }

    pub fn upper(&self, n: u64) -> i64 {
        self.upper[(n - 1) as usize]
    }

    pub fn extend_to(&mut self, n_max: u64) {
        while self.n_max() < n_max {
            self.push_step();
        }
    }

    fn push_step(&mut self) {
        let n = self.n_max() + 1;
        let ln_n1 = ((n + 1) as f64).ln();
        let qualifies = |k: u64| ln_n1 + ln_pmf_raw(n, self.alpha, k) > self.ln_eps;

        // The qualifying set is a non-empty contiguous range: the mass is
        // unimodal in k and its mode satisfies (n+1) b >= 1 > eps.
        let mut k = self.min_k.min(n);
        while !qualifies(k) {
            k += 1;
        }
        while k > 0 && qualifies(k - 1) {
            k -= 1;
        }
        assert!(
            k >= self.min_k,
            "lower stopping boundary decreased at step {n}"
        );
        self.min_k = k;

        let mut k = self.max_k.min(n);
        while !qualifies(k) {
            k -= 1;
        }
        while k < n && qualifies(k + 1) {
            k += 1;
        }
        assert!(
            k >= self.max_k || n == 1,
            "upper stopping boundary decreased at step {n}"
        );
        self.max_k = k;

        self.lower.push(self.min_k as i64 - 1);
        self.upper.push(self.max_k as i64 + 1);
    }

    /// Copies steps `1..=n_max` into a plain boundary table, extending first
    /// if needed.
    pub fn to_pair(&mut self, n_max: u64) -> Result<BoundaryPair> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        self.extend_to(n_max);
        BoundaryPair::new(
            BoundaryMeta {
                method: Method::Csm,
                alpha: self.alpha,
                epsilon: self.epsilon,
                spending: None,
            },
            self.lower[..n_max as usize].to_vec(),
            self.upper[..n_max as usize].to_vec(),
        )
    }
}

impl BoundarySource for CsmBoundaries {
    fn bounds_at(&mut self, n: u64) -> Option<(i64, i64)> {
        if n == 0 {
            return None;
        }
        if n > self.n_max() {
            // grow geometrically so long horizons stay amortized-linear
            self.extend_to(n.max(self.n_max().saturating_mul(2)).max(16));
        }
        Some((self.lower(n), self.upper(n)))
    }
}

/// Implied stopping boundaries for steps `1..=n_max`.
pub fn csm_boundaries(n_max: u64, cfg: &TestConfig) -> Result<BoundaryPair> {
    CsmBoundaries::new(cfg)?.to_pair(n_max)
}

/// Consumes indicators until the stopping rule fires or `cfg.max_steps` is
/// reached.
///
/// On truncation the result carries `Decision::NoDecision` and the empirical
/// fraction `S_N / N` as the estimate; forced decisions are a separate,
/// explicitly truncated procedure.
pub fn csm_run(source: &mut dyn SampleSource, cfg: &TestConfig) -> Result<RunResult> {
    TestConfig::new(cfg.alpha, cfg.epsilon)?;
    let ln_eps = cfg.epsilon.ln();
    let mut n = 0u64;
    let mut s = 0u64;
    loop {
        if let Some(cap) = cfg.max_steps {
            if n >= cap {
                return Ok(RunResult {
                    steps: n,
                    successes: s,
                    estimate: s as f64 / n as f64,
                    decision: Decision::NoDecision,
                    stopped_by: StoppedBy::Truncation,
                });
            }
        }
        s += u64::from(source.next_indicator()?);
        n += 1;
        if should_stop_raw(n, s, cfg.alpha, ln_eps) {
            // Appendix-style bracketing l_n < alpha n < u_n means the side
            // of alpha n identifies the boundary that was hit.
            let upper = s as f64 > cfg.alpha * n as f64;
            return Ok(RunResult {
                steps: n,
                successes: s,
                estimate: s as f64 / n as f64,
                decision: if upper {
                    Decision::AcceptNull
                } else {
                    Decision::RejectNull
                },
                stopped_by: if upper {
                    StoppedBy::Upper
                } else {
                    StoppedBy::Lower
                },
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{FixedPSource, VecSource};

    fn cfg() -> TestConfig {
        TestConfig::new(0.05, 0.001).unwrap()
    }

    #[test]
    fn should_stop_examples() {
        // 2 * 0.05 = 0.1 > 0.001
        assert!(!csm_should_stop(1, 1, &cfg()).unwrap());
        // 301 * 0.95^300 ~ 6.2e-5 <= 1e-3
        assert!(csm_should_stop(300, 0, &cfg()).unwrap());
        // 201 * 0.95^200 ~ 7.0e-3 > 1e-3
        assert!(!csm_should_stop(200, 0, &cfg()).unwrap());
    }

    #[test]
    fn should_stop_preconditions() {
        assert!(csm_should_stop(0, 0, &cfg()).is_err());
        assert!(csm_should_stop(3, 4, &cfg()).is_err());
    }

    #[test]
    fn first_step_boundaries() {
        let pair = csm_boundaries(1, &cfg()).unwrap();
        assert_eq!(pair.lower(1), -1);
        assert_eq!(pair.upper(1), 2);
    }

    #[test]
    fn boundaries_match_direct_search() {
        // independent exhaustive search over k at each step
        let cfg = cfg();
        let pair = csm_boundaries(400, &cfg).unwrap();
        let ln_eps = cfg.epsilon.ln();
        for n in 1..=400u64 {
            let qual: Vec<u64> = (0..=n)
                .filter(|&k| ((n + 1) as f64).ln() + ln_pmf_raw(n, cfg.alpha, k) > ln_eps)
                .collect();
            assert_eq!(pair.lower(n), *qual.first().unwrap() as i64 - 1, "n={n}");
            assert_eq!(pair.upper(n), *qual.last().unwrap() as i64 + 1, "n={n}");
        }
    }

    #[test]
    fn stopping_rule_equals_boundary_form() {
        let cfg = cfg();
        let pair = csm_boundaries(2000, &cfg).unwrap();
        for n in 1..=2000u64 {
            for s in 0..=n {
                let by_rule = csm_should_stop(n, s, &cfg).unwrap();
                let by_bounds = (s as i64) <= pair.lower(n) || (s as i64) >= pair.upper(n);
                assert_eq!(by_rule, by_bounds, "n={n} s={s}");
            }
        }
    }

    #[test]
    fn all_zeros_run_stops_at_242() {
        // smallest n with (n+1) 0.95^n <= 1e-3, found by direct scan
        let mut tau = 1u64;
        while ((tau + 1) as f64).ln() + (tau as f64) * 0.95f64.ln() > 0.001f64.ln() {
            tau += 1;
        }
        assert_eq!(tau, 242);

        let mut src = FixedPSource::new(0.0, 7).unwrap();
        let res = csm_run(&mut src, &cfg()).unwrap();
        assert_eq!(res.steps, 242);
        assert_eq!(res.successes, 0);
        assert_eq!(res.decision, Decision::RejectNull);
        assert_eq!(res.stopped_by, StoppedBy::Lower);
        assert_eq!(res.estimate, 0.0);
    }

    #[test]
    fn all_ones_run_stops_at_3() {
        let mut src = FixedPSource::new(1.0, 7).unwrap();
        let res = csm_run(&mut src, &cfg()).unwrap();
        assert_eq!(res.steps, 3);
        assert_eq!(res.successes, 3);
        assert_eq!(res.decision, Decision::AcceptNull);
        assert_eq!(res.stopped_by, StoppedBy::Upper);
        assert_eq!(res.estimate, 1.0);
    }

    #[test]
    fn truncation_reports_no_decision() {
        let cfg = cfg().with_max_steps(50).unwrap();
        let mut src = FixedPSource::new(0.05, 11).unwrap();
        let res = csm_run(&mut src, &cfg).unwrap();
        assert_eq!(res.steps, 50);
        assert_eq!(res.decision, Decision::NoDecision);
        assert_eq!(res.stopped_by, StoppedBy::Truncation);
        assert_eq!(res.estimate, res.successes as f64 / 50.0);
    }

    #[test]
    fn exhausted_source_is_an_error() {
        let mut src = VecSource::new(vec![0; 10]).unwrap();
        let err = csm_run(&mut src, &cfg()).unwrap_err();
        assert!(matches!(err, Error::SourceExhausted { draws: 10 }), "{err}");
    }

    #[test]
    fn boundary_source_grows_geometrically() {
        let mut b = CsmBoundaries::new(&cfg()).unwrap();
        assert_eq!(b.bounds_at(1), Some((-1, 2)));
        let (l, u) = b.bounds_at(500).unwrap();
        assert!(b.n_max() >= 500);
        assert!(l < u);
    }
}
