//! Boundary recursion driven by an error-spending sequence.
//!
//! Starting from `U_1 = 2`, `L_1 = -1`, each step chooses the tightest
//! integer boundaries whose cumulative hitting probability under `p = alpha`
//! stays within the spending budget `eps_n` on each side. The recursion and
//! its hitting-mass accounting share one forward pass over the conditional
//! distribution of the partial sum, so the boundaries and the risk actually
//! spent are self-consistent by construction.

use std::fmt;

use crate::boundary::{BoundaryMeta, BoundaryPair, Method};
use crate::error::{Error, Result};
use crate::risk::{BoundarySource, StateDistribution};
use crate::source::SampleSource;
use crate::types::{Decision, RunResult, StoppedBy, TestConfig};

/// Functional form of a spending sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpendingKind {
    /// `eps_n = eps * n / (n + k)`.
    Default { k: f64 },
    /// Zero for `n <= lower`, the default form between, all of `eps` from
    /// `upper` on.
    Truncated { lower: u64, upper: u64, k: f64 },
    /// `eps_n = eps * n^gamma / (n^gamma + k)`.
    Power { gamma: f64, k: f64 },
}

impl SpendingKind {
    /// Canonical descriptor, e.g. `default(k=1000)` or
    /// `truncated(L=100,U=10000,k=1000)` or `power(gamma=0.5,k=3)`.
    pub fn descriptor(&self) -> String {
        match self {
            SpendingKind::Default { k } => format!("default(k={k})"),
            SpendingKind::Truncated { lower, upper, k } => {
                format!("truncated(L={lower},U={upper},k={k})")
            }
            SpendingKind::Power { gamma, k } => format!("power(gamma={gamma},k={k})"),
        }
    }

    /// Parses a descriptor produced by [`SpendingKind::descriptor`].
    pub fn parse(s: &str) -> Result<Self> {
        let err = || {
            Error::InvalidParameter(format!(
                "invalid spending descriptor `{s}`; expected `default(k=..)`, \
                 `truncated(L=..,U=..,k=..)`, or `power(gamma=..,k=..)`"
            ))
        };
        let (name, args) = s
            .strip_suffix(')')
            .and_then(|rest| rest.split_once('('))
            .ok_or_else(err)?;
        let mut fields = std::collections::BTreeMap::new();
        for part in args.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(err)?;
            fields.insert(key, value);
        }
        let get = |key: &str| fields.get(key).copied().ok_or_else(err);
        let kind = match name {
            "default" => SpendingKind::Default {
                k: get("k")?.parse().map_err(|_| err())?,
            },
            "truncated" => SpendingKind::Truncated {
                lower: get("L")?.parse().map_err(|_| err())?,
                upper: get("U")?.parse().map_err(|_| err())?,
                k: get("k")?.parse().map_err(|_| err())?,
            },
            "power" => SpendingKind::Power {
                gamma: get("gamma")?.parse().map_err(|_| err())?,
                k: get("k")?.parse().map_err(|_| err())?,
            },
            _ => return Err(err()),
        };
        let expected_fields = match kind {
            SpendingKind::Default { .. } => 1,
            SpendingKind::Power { .. } => 2,
            SpendingKind::Truncated { .. } => 3,
        };
        if fields.len() != expected_fields {
            return Err(err());
        }
        Ok(kind)
    }
}

impl fmt::Display for SpendingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Non-decreasing risk budget `n -> eps_n` with `eps_n -> eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpendingSequence {
    pub kind: SpendingKind,
    /// Total resampling risk the sequence converges to.
    pub epsilon: f64,
}

impl SpendingSequence {
    pub fn new(kind: SpendingKind, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie strictly inside (0, 1), got {epsilon}"
            )));
        }
        match kind {
            SpendingKind::Default { k } if !(k > 0.0) => {
                return Err(Error::InvalidParameter(format!("k must be positive, got {k}")))
            }
            SpendingKind::Power { gamma, k } if !(gamma > 0.0) || !(k > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "gamma and k must be positive, got gamma={gamma}, k={k}"
                )))
            }
            SpendingKind::Truncated { lower, upper, k } if !(k > 0.0) || lower >= upper => {
                return Err(Error::InvalidParameter(format!(
                    "need L < U and k > 0, got L={lower}, U={upper}, k={k}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, epsilon })
    }

    /// The default sequence with `k = 1000`.
    pub fn default_seq(epsilon: f64) -> Result<Self> {
        Self::new(SpendingKind::Default { k: 1000.0 }, epsilon)
    }

    /// Risk budget available by step `n >= 1`.
    pub fn at(&self, n: u64) -> f64 {
        let nf = n as f64;
        match self.kind {
            SpendingKind::Default { k } => self.epsilon * nf / (nf + k),
            SpendingKind::Truncated { lower, upper, k } => {
                if n <= lower {
                    0.0
                } else if n >= upper {
                    self.epsilon
                } else {
                    self.epsilon * nf / (nf + k)
                }
            }
            SpendingKind::Power { gamma, k } => {
                let ng = nf.powf(gamma);
                self.epsilon * ng / (ng + k)
            }
        }
    }
}

/// Lazily extensible boundary table computed by the spending recursion.
#[derive(Debug, Clone)]
pub struct SimctestBoundaries {
    alpha: f64,
    seq: SpendingSequence,
    /// Distribution of the partial sum under `p = alpha`, conditional on no
    /// stop, absorbed at this table's own boundaries.
    dist: StateDistribution,
    lower: Vec<i64>,
    upper: Vec<i64>,
}

impl SimctestBoundaries {
    pub fn new(cfg: &TestConfig, seq: SpendingSequence) -> Result<Self> {
        TestConfig::new(cfg.alpha, cfg.epsilon)?;
        if seq.epsilon != cfg.epsilon {
            return Err(Error::InvalidParameter(format!(
                "spending sequence targets epsilon = {}, config says {}",
                seq.epsilon, cfg.epsilon
            )));
        }
        // With eps >= 1/2 the two per-side budgets can jointly exceed the
        // in-flight mass and the recursion's gap collapses.
        if cfg.epsilon >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "boundary recursion requires epsilon < 0.5, got {}",
                cfg.epsilon
            )));
        }
        Ok(Self {
            alpha: cfg.alpha,
            seq,
            dist: StateDistribution::new(),
            lower: Vec::new(),
            upper: Vec::new(),
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

    /// Cumulative probability of hitting the (upper, lower) boundary by the
    /// current horizon, under `p = alpha`.
    pub fn cumulative_hits(&self) -> (f64, f64) {
        (self.dist.stopped_upper(), self.dist.stopped_lower())
    }

    pub fn spending(&self) -> &SpendingSequence {
        &self.seq
    }

    pub fn extend_to(&mut self, n_max: u64) {
        while self.n_max() < n_max {
            self.push_step();
        }
    }

    fn push_step(&mut self) {
        let n = self.n_max() + 1;
        self.dist.advance(self.alpha);
        let budget = self.seq.at(n);

        let mass = self.dist.mass();
        let offset = self.dist.offset();
        let top = offset + mass.len() as i64 - 1;

        // U_n: smallest j with P(S_n >= j) + spent upper mass <= eps_n.
        // The empty tail at j = top + 1 always qualifies because the spent
        // mass was within the (non-decreasing) budget at the previous step.
        let mut hi = top + 1;
        let mut tail = 0.0;
        while hi > offset {
            let with_next = tail + mass[(hi - 1 - offset) as usize];
            if with_next + self.dist.stopped_upper() <= budget {
                tail = with_next;
                hi -= 1;
            } else {
                break;
            }
        }

        // L_n: largest j with P(S_n <= j) + spent lower mass <= eps_n,
        // capped below the upper boundary so the continuation gap survives.
        let mut lo = offset - 1;
        let mut tail = 0.0;
        while lo < hi - 1 && lo < top {
            let with_next = tail + mass[(lo + 1 - offset) as usize];
            if with_next + self.dist.stopped_lower() <= budget {
                tail = with_next;
                lo += 1;
            } else {
                break;
            }
        }

        debug_assert!(lo < hi);
        self.dist.absorb(lo, hi);

        if let Some(&prev) = self.lower.last() {
            assert!(lo >= prev, "lower boundary decreased at step {n}");
        }
        if !matches!(self.seq.kind, SpendingKind::Truncated { .. }) {
            if let Some(&prev) = self.upper.last() {
                assert!(hi >= prev, "upper boundary decreased at step {n}");
            }
        }
        self.lower.push(lo);
        self.upper.push(hi);
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
                method: Method::Simctest,
                alpha: self.alpha,
                epsilon: self.seq.epsilon,
                spending: Some(self.seq.kind),
            },
            self.lower[..n_max as usize].to_vec(),
            self.upper[..n_max as usize].to_vec(),
        )
    }
}

impl BoundarySource for SimctestBoundaries {
    fn bounds_at(&mut self, n: u64) -> Option<(i64, i64)> {
        if n == 0 {
            return None;
        }
        if n > self.n_max() {
            self.extend_to(n.max(self.n_max().saturating_mul(2)).max(16));
        }
        Some((self.lower(n), self.upper(n)))
    }
}

/// Boundaries for steps `1..=n_max` plus the cumulative (upper, lower)
/// hitting masses spent by the recursion over that horizon.
pub fn simctest_boundaries(
    n_max: u64,
    cfg: &TestConfig,
    seq: SpendingSequence,
) -> Result<(BoundaryPair, (f64, f64))> {
    let mut table = SimctestBoundaries::new(cfg, seq)?;
    let pair = table.to_pair(n_max)?;
    Ok((pair, table.cumulative_hits()))
}

/// Walks a precomputed boundary table: stop at the first step whose partial
/// sum reaches either boundary.
///
/// The walk works for any table, including ones produced by the
/// confidence-sequence rule. An upper hit decides `p > alpha`, a lower hit
/// `p <= alpha`; at `max_steps` the run reports `NoDecision` with the
/// empirical fraction as estimate. Running past the table is an error that
/// names the step that could not be served.
pub fn simctest_run(
    source: &mut dyn SampleSource,
    bounds: &BoundaryPair,
    max_steps: Option<u64>,
) -> Result<RunResult> {
    let mut n = 0u64;
    let mut s = 0u64;
    loop {
        if let Some(cap) = max_steps {
            if n >= cap {
                return Ok(truncated_result(n, s));
            }
        }
        if n >= bounds.n_max() {
            return Err(Error::BoundariesExhausted {
                available: bounds.n_max(),
                needed: n + 1,
            });
        }
        s += u64::from(source.next_indicator()?);
        n += 1;
        if let Some(result) = check_hit(n, s, bounds.lower(n), bounds.upper(n)) {
            return Ok(result);
        }
    }
}

/// Same walk against a lazily growing table; the horizon extends in
/// geometric chunks as the run proceeds.
pub fn simctest_run_growing(
    source: &mut dyn SampleSource,
    bounds: &mut SimctestBoundaries,
    max_steps: Option<u64>,
) -> Result<RunResult> {
    let mut n = 0u64;
    let mut s = 0u64;
    loop {
        if let Some(cap) = max_steps {
            if n >= cap {
                return Ok(truncated_result(n, s));
            }
        }
        let (lo, hi) = bounds.bounds_at(n + 1).expect("growing table always serves");
        s += u64::from(source.next_indicator()?);
        n += 1;
        if let Some(result) = check_hit(n, s, lo, hi) {
            return Ok(result);
        }
    }
}

fn truncated_result(n: u64, s: u64) -> RunResult {
    RunResult {
        steps: n,
        successes: s,
        estimate: s as f64 / n as f64,
        decision: Decision::NoDecision,
        stopped_by: StoppedBy::Truncation,
    }
}

fn check_hit(n: u64, s: u64, lower: i64, upper: i64) -> Option<RunResult> {
    let s_signed = s as i64;
    if s_signed >= upper {
        Some(RunResult {
            steps: n,
            successes: s,
            estimate: s as f64 / n as f64,
            decision: Decision::AcceptNull,
            stopped_by: StoppedBy::Upper,
        })
    } else if s_signed <= lower {
        Some(RunResult {
            steps: n,
            successes: s,
            estimate: s as f64 / n as f64,
            decision: Decision::RejectNull,
            stopped_by: StoppedBy::Lower,
        })
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::FixedPSource;

    fn cfg() -> TestConfig {
        TestConfig::new(0.05, 0.001).unwrap()
    }

    #[test]
    fn spending_descriptor_round_trip() {
        for kind in [
            SpendingKind::Default { k: 1000.0 },
            SpendingKind::Truncated {
                lower: 100,
                upper: 10000,
                k: 1000.0,
            },
            SpendingKind::Power { gamma: 0.5, k: 3.0 },
        ] {
            let text = kind.descriptor();
            assert_eq!(SpendingKind::parse(&text).unwrap(), kind, "{text}");
        }
        assert!(SpendingKind::parse("default(q=3)").is_err());
        assert!(SpendingKind::parse("linear(k=3)").is_err());
        assert!(SpendingKind::parse("default(k=3,extra=1)").is_err());
    }

    #[test]
    fn spending_values() {
        let seq = SpendingSequence::default_seq(1e-3).unwrap();
        // closed form: 5e4 / 5.1e4 * 1e-3
        assert!((seq.at(50_000) - 9.8039215686e-4).abs() < 1e-12);

        let seq = SpendingSequence::new(
            SpendingKind::Truncated {
                lower: 100,
                upper: 10000,
                k: 1000.0,
            },
            1e-3,
        )
        .unwrap();
        assert_eq!(seq.at(100), 0.0);
        assert_eq!(seq.at(10_000), 1e-3);
        assert!((seq.at(101) - 1e-3 * 101.0 / 1101.0).abs() < 1e-18);

        let seq =
            SpendingSequence::new(SpendingKind::Power { gamma: 0.5, k: 3.0 }, 1e-3).unwrap();
        assert!((seq.at(9) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn spending_is_monotone_and_below_epsilon() {
        // formula-level prefix check on a log-spaced grid up to 1e6
        let seqs = [
            SpendingSequence::default_seq(1e-3).unwrap(),
            SpendingSequence::new(SpendingKind::Power { gamma: 0.5, k: 3.0 }, 1e-3).unwrap(),
            SpendingSequence::new(
                SpendingKind::Truncated {
                    lower: 100,
                    upper: 10000,
                    k: 1000.0,
                },
                1e-3,
            )
            .unwrap(),
        ];
        for seq in seqs {
            let mut prev = 0.0;
            for n in 1..=1_000_000u64 {
                let e = seq.at(n);
                assert!(e >= prev, "{:?} decreases at {n}", seq.kind);
                // the truncated kind reaches epsilon exactly at its upper cut
                if matches!(seq.kind, SpendingKind::Truncated { upper, .. } if n >= upper) {
                    assert!(e <= seq.epsilon);
                } else {
                    assert!(e < seq.epsilon, "{:?} reaches epsilon at {n}", seq.kind);
                }
                prev = e;
            }
        }
    }

    #[test]
    fn first_step_is_minus_one_two() {
        let (pair, _) =
            simctest_boundaries(1, &cfg(), SpendingSequence::default_seq(0.001).unwrap()).unwrap();
        assert_eq!(pair.lower(1), -1);
        assert_eq!(pair.upper(1), 2);
    }

    #[test]
    fn budget_respected_each_step() {
        let seq = SpendingSequence::default_seq(0.001).unwrap();
        let mut table = SimctestBoundaries::new(&cfg(), seq).unwrap();
        let mut prev_upper = 0.0;
        let mut prev_lower = 0.0;
        for n in 1..=3000u64 {
            table.extend_to(n);
            let (up, lo) = table.cumulative_hits();
            let budget = seq.at(n);
            assert!(up <= budget, "upper mass {up} over budget {budget} at {n}");
            assert!(lo <= budget, "lower mass {lo} over budget {budget} at {n}");
            assert!(up >= prev_upper && lo >= prev_lower);
            prev_upper = up;
            prev_lower = lo;
        }
    }

    #[test]
    fn recursion_conserves_mass() {
        let seq = SpendingSequence::default_seq(0.001).unwrap();
        let mut table = SimctestBoundaries::new(&cfg(), seq).unwrap();
        for n in 1..=5000u64 {
            table.extend_to(n);
            let (up, lo) = table.cumulative_hits();
            let total = table.dist.in_flight() + up + lo;
            assert!((total - 1.0).abs() < 1e-12, "step {n}: {total}");
        }
    }

    #[test]
    fn config_mismatch_rejected() {
        let seq = SpendingSequence::default_seq(0.01).unwrap();
        assert!(SimctestBoundaries::new(&cfg(), seq).is_err());
    }

    #[test]
    fn all_ones_hits_upper_quickly() {
        let (pair, _) =
            simctest_boundaries(100, &cfg(), SpendingSequence::default_seq(0.001).unwrap())
                .unwrap();
        let expected_stop = (1..=100u64).find(|&n| pair.upper(n) <= n as i64).unwrap();
        let mut src = FixedPSource::new(1.0, 3).unwrap();
        let res = simctest_run(&mut src, &pair, None).unwrap();
        assert_eq!(res.steps, expected_stop);
        assert_eq!(res.decision, Decision::AcceptNull);
        assert_eq!(res.stopped_by, StoppedBy::Upper);
    }

    #[test]
    fn all_zeros_hits_lower_at_first_nonnegative_l() {
        let (pair, _) =
            simctest_boundaries(2000, &cfg(), SpendingSequence::default_seq(0.001).unwrap())
                .unwrap();
        let expected_stop = (1..=2000u64).find(|&n| pair.lower(n) >= 0).unwrap();
        let mut src = FixedPSource::new(0.0, 3).unwrap();
        let res = simctest_run(&mut src, &pair, None).unwrap();
        assert_eq!(res.steps, expected_stop);
        assert_eq!(res.decision, Decision::RejectNull);
        assert_eq!(res.stopped_by, StoppedBy::Lower);
    }

    #[test]
    fn exhausted_table_names_needed_step() {
        let (pair, _) =
            simctest_boundaries(10, &cfg(), SpendingSequence::default_seq(0.001).unwrap())
                .unwrap();
        let mut src = FixedPSource::new(0.05, 3).unwrap();
        let err = simctest_run(&mut src, &pair, None).unwrap_err();
        assert!(
            matches!(err, Error::BoundariesExhausted { available: 10, needed: 11 }),
            "{err}"
        );
    }

    #[test]
    fn growing_run_matches_precomputed() {
        let seq = SpendingSequence::default_seq(0.001).unwrap();
        let (pair, _) = simctest_boundaries(3000, &cfg(), seq).unwrap();
        for seed in 0..20u64 {
            let mut a = FixedPSource::new(0.02, seed).unwrap();
            let mut b = FixedPSource::new(0.02, seed).unwrap();
            let fixed = simctest_run(&mut a, &pair, None).unwrap();
            let mut table = SimctestBoundaries::new(&cfg(), seq).unwrap();
            let grown = simctest_run_growing(&mut b, &mut table, None).unwrap();
            assert_eq!(fixed, grown, "seed {seed}");
        }
    }
}
