//! Exact dynamic-programming analysis of integer stopping boundaries.
//!
//! The engine tracks the distribution of the partial sum `S_n` restricted to
//! paths that have not yet hit a boundary, plus the mass absorbed above and
//! below. One pass over a boundary table yields hitting probabilities,
//! resampling-risk values, expected stopping times, and per-step spending
//! rates for any underlying success probability `p`.

use crate::boundary::BoundaryPair;
use crate::error::{Error, Result};

/// Distribution of `S_n` over not-yet-stopped paths at some step, together
/// with the cumulative mass absorbed at each boundary.
///
/// Invariant: `in_flight() + stopped_upper() + stopped_lower() = 1` up to
/// floating rounding.
#[derive(Debug, Clone)]
pub struct StateDistribution {
    step: u64,
    /// `S` value represented by `mass[0]`.
    offset: i64,
    mass: Vec<f64>,
    stopped_upper: f64,
    stopped_lower: f64,
}

impl StateDistribution {
    /// Point mass at `S_0 = 0`.
    pub fn new() -> Self {
        Self {
            step: 0,
            offset: 0,
            mass: vec![1.0],
            stopped_upper: 0.0,
            stopped_lower: 0.0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// In-flight probabilities for `S = offset(), offset()+1, ...`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stopped_upper(&self) -> f64 {
        self.stopped_upper
    }

    pub fn stopped_lower(&self) -> f64 {
        self.stopped_lower
    }

    pub fn in_flight(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// One Markov step without absorption: each state `s` splits to `s`
    /// (weight `1-p`) and `s+1` (weight `p`).
    pub fn advance(&mut self, p: f64) {
        let q = 1.0 - p;
        let len = self.mass.len();
        self.mass.push(0.0);
        // in place, top down: new[i] = old[i] * q + old[i-1] * p
        self.mass[len] = self.mass[len - 1] * p;
        for i in (1..len).rev() {
            self.mass[i] = self.mass[i] * q + self.mass[i - 1] * p;
        }
        self.mass[0] *= q;
        self.step += 1;
    }

    /// Moves mass at `S >= upper` into `stopped_upper` and `S <= lower`
    /// into `stopped_lower`, renumbering the remainder.
    pub fn absorb(&mut self, lower: i64, upper: i64) {
        debug_assert!(lower < upper);
        let top = self.offset + self.mass.len() as i64 - 1;
        // sum the tails from the outside in so tiny masses accumulate first
        let mut hi = 0.0;
        let mut cut_hi = self.mass.len();
        for s in ((upper.max(self.offset))..=top).rev() {
            hi += self.mass[(s - self.offset) as usize];
            cut_hi = (s - self.offset) as usize;
        }
        let mut lo = 0.0;
        let mut cut_lo = 0usize;
        for s in self.offset..=lower.min(top) {
            lo += self.mass[(s - self.offset) as usize];
            cut_lo = (s - self.offset) as usize + 1;
        }
        self.stopped_upper += hi;
        self.stopped_lower += lo;
        self.mass.truncate(cut_hi.max(cut_lo));
        self.mass.drain(..cut_lo.min(self.mass.len()));
        self.offset += cut_lo as i64;
    }

    /// One exact step against the boundaries in force at the next step.
    pub fn evolve(&mut self, p: f64, lower: i64, upper: i64) {
        self.advance(p);
        self.absorb(lower, upper);
    }

    /// In-flight mass at `S = s`.
    pub fn mass_at(&self, s: i64) -> f64 {
        if s < self.offset || s >= self.offset + self.mass.len() as i64 {
            0.0
        } else {
            self.mass[(s - self.offset) as usize]
        }
    }
}

impl Default for StateDistribution {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-step cumulative boundary-hitting probabilities under a fixed `p`.
#[derive(Debug, Clone)]
pub struct RiskTrace {
    /// `cum_upper[i]` is the probability of hitting the upper boundary by
    /// step `i + 1`.
    pub cum_upper: Vec<f64>,
    pub cum_lower: Vec<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "success probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Exact cumulative hitting probabilities over `1..=n_max`.
pub fn hitting_probabilities(bounds: &BoundaryPair, p: f64, n_max: u64) -> Result<RiskTrace> {
    check_p(p)?;
    if n_max == 0 || n_max > bounds.n_max() {
        return Err(Error::BoundariesExhausted {
            available: bounds.n_max(),
            needed: n_max.max(1),
        });
    }
    let mut dist = StateDistribution::new();
    let mut cum_upper = Vec::with_capacity(n_max as usize);
    let mut cum_lower = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        dist.evolve(p, bounds.lower(n), bounds.upper(n));
        cum_upper.push(dist.stopped_upper());
        cum_lower.push(dist.stopped_lower());
    }
    Ok(RiskTrace {
        cum_upper,
        cum_lower,
    })
}

/// What to do with paths still in flight at the analysis horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationRule {
    /// Count only boundary hits; undecided paths contribute no risk.
    None,
    /// Force a decision at the horizon from the cap estimator
    /// `(S + 1) / (n_max + 1)`: reject iff the estimate is `<= alpha`.
    ForceDecisionAtCap,
}

/// Probability that the procedure decides the wrong side of `alpha`.
///
/// For `p <= alpha` the wrong decision is acceptance (upper-boundary hit,
/// plus forced acceptances at the cap under
/// [`TruncationRule::ForceDecisionAtCap`]); mirrored for `p > alpha`.
pub fn resampling_risk(
    bounds: &BoundaryPair,
    p: f64,
    alpha: f64,
    n_max: u64,
    rule: TruncationRule,
) -> Result<f64> {
    check_p(p)?;
    if n_max == 0 || n_max > bounds.n_max() {
        return Err(Error::BoundariesExhausted {
            available: bounds.n_max(),
            needed: n_max.max(1),
        });
    }
    let mut dist = StateDistribution::new();
    for n in 1..=n_max {
        dist.evolve(p, bounds.lower(n), bounds.upper(n));
    }
    let mut risk = if p <= alpha {
        dist.stopped_upper()
    } else {
        dist.stopped_lower()
    };
    if rule == TruncationRule::ForceDecisionAtCap {
        let cap = n_max as f64 + 1.0;
        for (i, &m) in dist.mass().iter().enumerate() {
            let estimate = (dist.offset() + i as i64 + 1) as f64 / cap;
            let rejects = estimate <= alpha;
            if rejects == (p > alpha) {
                risk += m;
            }
        }
    }
    Ok(risk)
}

/// Anything that can serve boundaries step by step, growing them on demand.
pub trait BoundarySource {
    /// Boundaries `(L_n, U_n)` at 1-based step `n`, or `None` when the
    /// source cannot provide them.
    fn bounds_at(&mut self, n: u64) -> Option<(i64, i64)>;
}

impl BoundarySource for BoundaryPair {
    fn bounds_at(&mut self, n: u64) -> Option<(i64, i64)> {
        self.get(n)
    }
}

/// Expected effort `E[min(tau, N)]` plus the mass that had not stopped.
#[derive(Debug, Clone, Copy)]
pub struct EffortEstimate {
    pub expectation: f64,
    /// In-flight probability when the evaluation ended; `residual * N`
    /// bounds the truncation bias from below.
    pub residual_mass: f64,
    /// Horizon `N` actually evaluated.
    pub steps: u64,
    /// True when the hard cap ended the evaluation with
    /// `residual_mass >= tail_tol`.
    pub capped: bool,
}

/// Expected stopping effort via the identity
/// `E[min(tau, N)] = sum over n < N of P(tau > n)`.
///
/// Extends the table until the in-flight mass drops below `tail_tol` or
/// `hard_cap` steps have been evaluated; a capped result is flagged rather
/// than silently returned.
pub fn expected_stopping_time(
    bounds: &mut dyn BoundarySource,
    p: f64,
    tail_tol: f64,
    hard_cap: u64,
) -> Result<EffortEstimate> {
    check_p(p)?;
    if !(tail_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail tolerance must be positive, got {tail_tol}"
        )));
    }
    let mut dist = StateDistribution::new();
    let mut expectation = 0.0;
    let mut n = 0u64;
    loop {
        let in_flight = dist.in_flight();
        if in_flight < tail_tol {
            return Ok(EffortEstimate {
                expectation,
                residual_mass: in_flight,
                steps: n,
                capped: false,
            });
        }
        if n >= hard_cap {
            return Ok(EffortEstimate {
                expectation,
                residual_mass: in_flight,
                steps: n,
                capped: true,
            });
        }
        expectation += in_flight; // P(tau > n)
        n += 1;
        let (lo, hi) = bounds
            .bounds_at(n)
            .ok_or(Error::BoundariesExhausted {
                available: n - 1,
                needed: n,
            })?;
        dist.evolve(p, lo, hi);
    }
}

/// One sampled point of a spending-rate series.
#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    /// Sample step.
    pub n: u64,
    /// Mean per-step hitting mass over `(n - stride, n]`.
    pub delta: f64,
    /// `delta * n^exponent`.
    pub scaled: f64,
}

/// Per-side spending-rate series and fitted log-log slopes.
#[derive(Debug, Clone)]
pub struct RateSeries {
    pub exponent: f64,
    pub upper: Vec<RatePoint>,
    pub lower: Vec<RatePoint>,
    /// OLS slope of `ln delta` against `ln n`; `None` with fewer than two
    /// positive increments.
    pub slope_upper: Option<f64>,
    pub slope_lower: Option<f64>,
}

/// Samples the per-side per-step boundary-hitting mass at `p`, scales it by
/// `n^exponent`, and fits a log-log slope per side.
///
/// Increments are averaged over each `(n - stride, n]` window, which keeps
/// the series well-defined where the integer boundaries make single-step
/// masses vanish.
pub fn spend_rate_series(
    bounds: &BoundaryPair,
    p: f64,
    exponent: f64,
    stride: u64,
    burn_in: u64,
    n_max: u64,
) -> Result<RateSeries> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    let trace = hitting_probabilities(bounds, p, n_max)?;
    let sample = |cum: &[f64]| {
        let mut pts = Vec::new();
        let mut n = burn_in + stride;
        while n <= n_max {
            let delta =
                (cum[(n - 1) as usize] - cum[(n - stride - 1) as usize]) / stride as f64;
            pts.push(RatePoint {
                n,
                delta,
                scaled: delta * (n as f64).powf(exponent),
            });
            n += stride;
        }
        pts
    };
    let upper = sample(&trace.cum_upper);
    let lower = sample(&trace.cum_lower);
    let slope_upper = log_log_slope(&upper);
    let slope_lower = log_log_slope(&lower);
    Ok(RateSeries {
        exponent,
        upper,
        lower,
        slope_upper,
        slope_lower,
    })
}

fn log_log_slope(points: &[RatePoint]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.delta > 0.0)
        .map(|p| ((p.n as f64).ln(), p.delta.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|(x, _)| x).sum();
    let sy: f64 = logs.iter().map(|(_, y)| y).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
