//! Truncated decision rules: capped runs that force a decision.
//!
//! A truncated procedure runs its base rule up to a cap and, if undecided
//! there, decides from the cap estimator `(S_N + 1) / (N + 1)`: reject iff
//! the estimate is `<= alpha` (ties reject). The exceedance-count rule of
//! Besag and Clifford is included as a third base: it stops once `h`
//! exceedances have accumulated, estimating `h / n`, and uses the same cap
//! estimator when truncated.

use std::io::{BufRead, Write};

use crate::batch::{derive_seed, par_map};
use crate::boundary::BoundaryPair;
use crate::csm::CsmBoundaries;
use crate::error::{Error, Result};
use crate::risk::{resampling_risk, TruncationRule};
use crate::simctest::{SimctestBoundaries, SpendingSequence};
use crate::source::{FixedPSource, SampleSource};
use crate::types::{Decision, RunResult, StoppedBy, TestConfig};

/// Base stopping rule of a truncated procedure.
#[derive(Debug, Clone)]
pub enum TruncatedBase {
    Csm,
    Simctest(SpendingSequence),
    /// Stop after `h` exceedances.
    BesagClifford { h: u64 },
}

/// A base rule plus a cap.
#[derive(Debug, Clone)]
pub struct TruncatedConfig {
    pub base: TruncatedBase,
    /// Maximum number of samples.
    pub cap: u64,
    pub alpha: f64,
    /// Risk bound of the base rule; ignored by the exceedance-count base.
    pub epsilon: f64,
}

impl TruncatedConfig {
    pub fn validate(&self) -> Result<()> {
        TestConfig::new(self.alpha, self.epsilon)?;
        if self.cap == 0 {
            return Err(Error::InvalidParameter("cap must be positive".into()));
        }
        if let TruncatedBase::BesagClifford { h } = self.base {
            if h == 0 || h > self.cap {
                return Err(Error::InvalidParameter(format!(
                    "exceedance target h must satisfy 1 <= h <= cap, got h={h}, cap={}",
                    self.cap
                )));
            }
        }
        Ok(())
    }
}

/// Reusable truncated procedure; boundary-based rules precompute their
/// table up to the cap once.
#[derive(Debug, Clone)]
pub struct TruncatedRunner {
    cfg: TruncatedConfig,
    bounds: Option<BoundaryPair>,
}

impl TruncatedRunner {
    pub fn new(cfg: TruncatedConfig) -> Result<Self> {
        cfg.validate()?;
        let test_cfg = TestConfig::new(cfg.alpha, cfg.epsilon)?;
        let bounds = match &cfg.base {
            TruncatedBase::Csm => Some(CsmBoundaries::new(&test_cfg)?.to_pair(cfg.cap)?),
            TruncatedBase::Simctest(seq) => {
                Some(SimctestBoundaries::new(&test_cfg, *seq)?.to_pair(cfg.cap)?)
            }
            TruncatedBase::BesagClifford { .. } => None,
        };
        Ok(Self { cfg, bounds })
    }

    pub fn config(&self) -> &TruncatedConfig {
        &self.cfg
    }

    /// Boundary table of a boundary-based base rule.
    pub fn bounds(&self) -> Option<&BoundaryPair> {
        self.bounds.as_ref()
    }

    /// Runs the base rule up to the cap, forcing a decision there.
    pub fn run(&self, source: &mut dyn SampleSource) -> Result<RunResult> {
        match (&self.cfg.base, &self.bounds) {
            (TruncatedBase::BesagClifford { h }, _) => {
                self.run_exceedance_count(source, *h)
            }
            (_, Some(bounds)) => {
                let mut n = 0u64;
                let mut s = 0u64;
                while n < self.cfg.cap {
                    s += u64::from(source.next_indicator()?);
                    n += 1;
                    let si = s as i64;
                    if si >= bounds.upper(n) {
                        return Ok(decided(n, s, s as f64 / n as f64, StoppedBy::Upper));
                    }
                    if si <= bounds.lower(n) {
                        return Ok(decided(n, s, s as f64 / n as f64, StoppedBy::Lower));
                    }
                }
                Ok(self.forced(n, s))
            }
            _ => unreachable!("boundary-based runner always has a table"),
        }
    }

    fn run_exceedance_count(&self, source: &mut dyn SampleSource, h: u64) -> Result<RunResult> {
        let mut n = 0u64;
        let mut s = 0u64;
        while n < self.cfg.cap {
            s += u64::from(source.next_indicator()?);
            n += 1;
            if s >= h {
                let estimate = h as f64 / n as f64;
                return Ok(RunResult {
                    steps: n,
                    successes: s,
                    estimate,
                    decision: decide(estimate, self.cfg.alpha),
                    stopped_by: StoppedBy::Upper,
                });
            }
        }
        Ok(self.forced(n, s))
    }

    fn forced(&self, n: u64, s: u64) -> RunResult {
        let estimate = (s as f64 + 1.0) / (n as f64 + 1.0);
        RunResult {
            steps: n,
            successes: s,
            estimate,
            decision: decide(estimate, self.cfg.alpha),
            stopped_by: StoppedBy::Truncation,
        }
    }
}

fn decide(estimate: f64, alpha: f64) -> Decision {
    if estimate <= alpha {
        Decision::RejectNull
    } else {
        Decision::AcceptNull
    }
}

fn decided(steps: u64, successes: u64, estimate: f64, stopped_by: StoppedBy) -> RunResult {
    RunResult {
        steps,
        successes,
        estimate,
        decision: match stopped_by {
            StoppedBy::Upper => Decision::AcceptNull,
            _ => Decision::RejectNull,
        },
        stopped_by,
    }
}

/// One-shot convenience over [`TruncatedRunner`].
pub fn truncated_run(source: &mut dyn SampleSource, cfg: &TruncatedConfig) -> Result<RunResult> {
    TruncatedRunner::new(cfg.clone())?.run(source)
}

/// How to evaluate a risk curve.
#[derive(Debug, Clone, Copy)]
pub enum CurveMode {
    /// Exact dynamic programming.
    Exact,
    /// Seeded empirical frequencies; each grid point derives its own seeds,
    /// so results do not depend on evaluation order.
    MonteCarlo { runs: u64, seed: u64 },
}

/// Resampling risk of a truncated procedure on a grid of underlying
/// probabilities: the probability that the forced decision disagrees with
/// the true side of `alpha`.
pub fn truncated_risk_curve(
    cfg: &TruncatedConfig,
    p_grid: &[f64],
    mode: CurveMode,
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    for &p in p_grid {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "grid probability must lie in [0, 1], got {p}"
            )));
        }
    }
    match mode {
        CurveMode::Exact => {
            let runner = TruncatedRunner::new(cfg.clone())?;
            let risks: Vec<Result<f64>> = par_map(p_grid, |&p| match (&cfg.base, runner.bounds()) {
                (TruncatedBase::BesagClifford { h }, _) => {
                    Ok(exceedance_count_risk(*h, cfg.cap, cfg.alpha, p))
                }
                (_, Some(bounds)) => resampling_risk(
                    bounds,
                    p,
                    cfg.alpha,
                    cfg.cap,
                    TruncationRule::ForceDecisionAtCap,
                ),
                _ => unreachable!(),
            });
            p_grid
                .iter()
                .zip(risks)
                .map(|(&p, r)| r.map(|risk| (p, risk)))
                .collect()
        }
        CurveMode::MonteCarlo { runs, seed } => {
            let runner = TruncatedRunner::new(cfg.clone())?;
            let out: Vec<Result<(f64, f64)>> = par_map(p_grid, |&p| {
                let point_seed = derive_seed(seed, (p * 1e9).round() as u64);
                let mut wrong = 0u64;
                for i in 0..runs {
                    let mut src = FixedPSource::new(p, derive_seed(point_seed, i))?;
                    let res = runner.run(&mut src)?;
                    let truth = decide(p, runner.cfg.alpha);
                    if res.decision != truth {
                        wrong += 1;
                    }
                }
                Ok((p, wrong as f64 / runs as f64))
            });
            out.into_iter().collect()
        }
    }
}

/// Exact risk of the exceedance-count rule via its `h`-state forward pass.
fn exceedance_count_risk(h: u64, cap: u64, alpha: f64, p: f64) -> f64 {
    let correct_rejects = p <= alpha;
    let h = h as usize;
    let mut mass = vec![0.0f64; h];
    mass[0] = 1.0;
    let mut wrong = 0.0;
    for n in 1..=cap {
        let absorbed = mass[h - 1] * p;
        for s in (1..h).rev() {
            mass[s] = mass[s] * (1.0 - p) + mass[s - 1] * p;
        }
        mass[0] *= 1.0 - p;
        let estimate = h as f64 / n as f64;
        let rejects = estimate <= alpha;
        if rejects != correct_rejects {
            wrong += absorbed;
        }
    }
    for (s, &m) in mass.iter().enumerate() {
        let estimate = (s as f64 + 1.0) / (cap as f64 + 1.0);
        let rejects = estimate <= alpha;
        if rejects != correct_rejects {
            wrong += m;
        }
    }
    wrong
}

/// Writes a `p,risk` curve, one decimal pair per line.
pub fn write_risk_curve<W: Write>(mut w: W, points: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "p,risk")?;
    for (p, risk) in points {
        writeln!(w, "{p},{risk}")?;
    }
    Ok(())
}

/// Parses a `p,risk` curve produced by [`write_risk_curve`] or an external
/// tool following the same format.
pub fn read_risk_curve<R: BufRead>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == "p,risk" => {}
        Some((_, Ok(h))) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `p,risk`, got `{h}`"),
            })
        }
        Some((_, Err(e))) => return Err(e.into()),
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let parse = |raw: &str| -> Result<f64> {
            raw.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid decimal `{raw}`"),
            })
        };
        match line.split_once(',') {
            Some((p, risk)) => points.push((parse(p)?, parse(risk)?)),
            None => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected `p,risk`, got `{line}`"),
                })
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::VecSource;

    fn bc_cfg(h: u64, cap: u64) -> TruncatedConfig {
        TruncatedConfig {
            base: TruncatedBase::BesagClifford { h },
            cap,
            alpha: 0.05,
            epsilon: 0.05,
        }
    }

    #[test]
    fn config_validation() {
        assert!(bc_cfg(0, 10).validate().is_err());
        assert!(bc_cfg(11, 10).validate().is_err());
        assert!(bc_cfg(10, 10).validate().is_ok());
        let mut cfg = bc_cfg(1, 10);
        cfg.cap = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exceedance_rule_all_ones() {
        let mut src = FixedPSource::new(1.0, 1).unwrap();
        let res = truncated_run(&mut src, &bc_cfg(10, 13000)).unwrap();
        assert_eq!(res.steps, 10);
        assert_eq!(res.estimate, 1.0);
        assert_eq!(res.decision, Decision::AcceptNull);
    }

    #[test]
    fn exceedance_rule_all_zeros_at_cap() {
        let cap = 400u64;
        let mut src = FixedPSource::new(0.0, 1).unwrap();
        let res = truncated_run(&mut src, &bc_cfg(10, cap)).unwrap();
        assert_eq!(res.steps, cap);
        assert_eq!(res.estimate, 1.0 / (cap as f64 + 1.0));
        // alpha = 0.05 > 1/(cap+1)
        assert_eq!(res.decision, Decision::RejectNull);
        assert_eq!(res.stopped_by, StoppedBy::Truncation);
    }

    #[test]
    fn forced_decision_uses_cap_estimator() {
        let cfg = TruncatedConfig {
            base: TruncatedBase::Csm,
            cap: 9,
            alpha: 0.5,
            epsilon: 0.001,
        };
        // 4 successes in 9 draws: estimate (4+1)/(9+1) = 0.5 <= alpha -> reject
        let mut src = VecSource::new(vec![1, 0, 1, 0, 1, 0, 1, 0, 0]).unwrap();
        let res = truncated_run(&mut src, &cfg).unwrap();
        assert_eq!(res.steps, 9);
        assert_eq!(res.successes, 4);
        assert_eq!(res.estimate, 0.5);
        assert_eq!(res.decision, Decision::RejectNull);
        assert_eq!(res.stopped_by, StoppedBy::Truncation);
    }

    #[test]
    fn degenerate_probabilities_have_zero_risk() {
        let seq = SpendingSequence::default_seq(0.05).unwrap();
        for base in [
            TruncatedBase::Csm,
            TruncatedBase::Simctest(seq),
            TruncatedBase::BesagClifford { h: 10 },
        ] {
            let cfg = TruncatedConfig {
                base,
                cap: 2000,
                alpha: 0.05,
                epsilon: 0.05,
            };
            let curve = truncated_risk_curve(&cfg, &[0.0, 1.0], CurveMode::Exact).unwrap();
            assert_eq!(curve[0].1, 0.0, "{:?}", cfg.base);
            assert_eq!(curve[1].1, 0.0, "{:?}", cfg.base);
        }
    }

    #[test]
    fn exceedance_count_dp_matches_brute_force() {
        // enumerate every 0/1 path for small caps
        for &(h, cap) in &[(1u64, 6u64), (2, 10), (3, 12)] {
            for &p in &[0.05, 0.3] {
                for &alpha in &[0.05, 0.3] {
                    let cfg = TruncatedConfig {
                        base: TruncatedBase::BesagClifford { h },
                        cap,
                        alpha,
                        epsilon: 0.05,
                    };
                    let mut expect = 0.0f64;
                    for bits in 0u64..(1 << cap) {
                        let mut weight = 1.0f64;
                        let mut s = 0u64;
                        let mut decision = None;
                        for i in 0..cap {
                            let x = (bits >> i) & 1;
                            weight *= if x == 1 { p } else { 1.0 - p };
                            s += x;
                            if decision.is_none() && s >= h {
                                let est = h as f64 / (i as f64 + 1.0);
                                decision = Some(est <= alpha);
                            }
                        }
                        let rejects = decision
                            .unwrap_or((s as f64 + 1.0) / (cap as f64 + 1.0) <= alpha);
                        if rejects != (p <= alpha) {
                            expect += weight;
                        }
                    }
                    let got = exceedance_count_risk(h, cap, alpha, p);
                    assert!(
                        (got - expect).abs() < 1e-10,
                        "h={h} cap={cap} p={p} alpha={alpha}: {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn risk_curve_csv_round_trip() {
        let points = vec![(0.0, 0.0), (0.05, 0.5132), (1.0, 0.0)];
        let mut buf = Vec::new();
        write_risk_curve(&mut buf, &points).unwrap();
        let parsed = read_risk_curve(buf.as_slice()).unwrap();
        assert_eq!(parsed, points);

        let err = read_risk_curve("p;risk\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = read_risk_curve("p,risk\n0.1,oops\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
