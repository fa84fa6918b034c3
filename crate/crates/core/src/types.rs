//! Shared domain types: test configuration, decisions, and run outcomes.

use std::fmt;

use crate::error::{Error, Result};

/// Three-way outcome of a sequential test.
///
/// `RejectNull` means the procedure concluded `p <= alpha`, `AcceptNull`
/// means it concluded `p > alpha`, and `NoDecision` is only produced by a
/// truncated run that never hit a boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    RejectNull,
    AcceptNull,
    NoDecision,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::RejectNull => "reject_null",
            Decision::AcceptNull => "accept_null",
            Decision::NoDecision => "no_decision",
        })
    }
}

/// Which event terminated a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoppedBy {
    Lower,
    Upper,
    Truncation,
}

impl fmt::Display for StoppedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoppedBy::Lower => "lower",
            StoppedBy::Upper => "upper",
            StoppedBy::Truncation => "truncation",
        })
    }
}

/// Test threshold, resampling-risk bound, and optional step cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    /// Decision threshold for the p-value, in (0, 1).
    pub alpha: f64,
    /// Bound on the resampling risk, in (0, 1).
    pub epsilon: f64,
    /// Maximum number of samples; `None` means open-ended.
    pub max_steps: Option<u64>,
}

impl TestConfig {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 || epsilon >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie strictly inside (0, 1), got {epsilon}"
            )));
        }
        Ok(Self {
            alpha,
            epsilon,
            max_steps: None,
        })
    }

    /// Caps the run at `max_steps` samples (must be positive).
    pub fn with_max_steps(mut self, max_steps: u64) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidParameter(
                "max_steps must be positive".into(),
            ));
        }
        self.max_steps = Some(max_steps);
        Ok(self)
    }
}

/// Outcome of one sequential run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    /// Step at which the run stopped (boundary hit or truncation).
    pub steps: u64,
    /// Partial sum of indicators at the stopping step.
    pub successes: u64,
    /// P-value estimate reported by the procedure.
    pub estimate: f64,
    pub decision: Decision,
    pub stopped_by: StoppedBy,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_out_of_range() {
        assert!(TestConfig::new(0.0, 0.001).is_err());
        assert!(TestConfig::new(1.0, 0.001).is_err());
        assert!(TestConfig::new(0.05, 0.0).is_err());
        assert!(TestConfig::new(0.05, 1.0).is_err());
        assert!(TestConfig::new(f64::NAN, 0.5).is_err());
        assert!(TestConfig::new(0.05, 0.001).is_ok());
    }

    #[test]
    fn max_steps_must_be_positive() {
        let cfg = TestConfig::new(0.05, 0.001).unwrap();
        assert!(cfg.with_max_steps(0).is_err());
        assert_eq!(cfg.with_max_steps(10).unwrap().max_steps, Some(10));
    }
}
