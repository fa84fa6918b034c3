//! Sequential Monte Carlo decisions on p-values with a uniform bound on the
//! resampling risk.
//!
//! Given a stream of exceedance indicators `X_i ~ Bernoulli(p)`, the crate
//! decides whether the unknown `p` lies above or below a threshold `alpha`
//! while keeping the probability of the wrong decision below a chosen
//! `epsilon`, uniformly in `p`. Two open-ended stopping rules are provided:
//!
//! * [`csm::csm_run`] — stop once `(n + 1) b(n, alpha, S_n) <= epsilon`;
//!   tuning-free, `O(1)` memory.
//! * [`simctest::simctest_run`] — walk integer boundaries computed
//!   recursively so the risk spent by step `n` follows a prescribed
//!   [`simctest::SpendingSequence`].
//!
//! The [`risk`] module analyses any boundary table exactly (hitting
//! probabilities, resampling risk, expected effort, spending rates), and
//! [`truncated`] adds capped variants that force a decision, including the
//! exceedance-count rule of Besag and Clifford. Sample streams live in
//! [`source`]; [`batch`] fans work out deterministically (rayon under the
//! `parallel` feature, sequential otherwise).

pub mod batch;
pub mod binom;
pub mod boundary;
pub mod csm;
pub mod error;
pub mod risk;
pub mod simctest;
pub mod source;
pub mod truncated;
pub mod types;

pub use boundary::{BoundaryMeta, BoundaryPair, Method};
pub use error::{Error, Result};
pub use simctest::{SpendingKind, SpendingSequence};
pub use types::{Decision, RunResult, StoppedBy, TestConfig};
