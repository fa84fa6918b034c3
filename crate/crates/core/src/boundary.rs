//! Integer stopping-boundary tables and their cache file format.
//!
//! A [`BoundaryPair`] holds lower/upper integer boundaries indexed by step
//! `n = 1..=n_max` together with the parameters that produced it. The cache
//! format is line oriented:
//!
//! ```text
//! #version=1
//! #method=simctest
//! #alpha=0.05
//! #epsilon=0.001
//! #spending=default(k=1000)
//! 1,-1,2
//! 2,-1,3
//! ...
//! ```
//!
//! Every line, including the last, is newline-terminated; step numbers are
//! contiguous from 1. Loading re-validates the structural invariants.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simctest::SpendingKind;

pub const BOUNDARY_FORMAT_VERSION: u32 = 1;

/// Which stopping rule produced a boundary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Csm,
    Simctest,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Csm => "csm",
            Method::Simctest => "simctest",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csm" => Ok(Method::Csm),
            "simctest" => Ok(Method::Simctest),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected `csm` or `simctest`)"
            ))),
        }
    }
}

/// Parameters attached to a boundary table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeta {
    pub method: Method,
    pub alpha: f64,
    pub epsilon: f64,
    /// Spending sequence for `simctest` tables; `None` for `csm`.
    pub spending: Option<SpendingKind>,
}

/// Lower/upper stopping boundaries for steps `1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPair {
    meta: BoundaryMeta,
    lower: Vec<i64>,
    upper: Vec<i64>,
}

impl BoundaryPair {
    /// Builds a table and checks its structural invariants.
    pub fn new(meta: BoundaryMeta, lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        let pair = Self { meta, lower, upper };
        pair.validate()?;
        Ok(pair)
    }

    pub fn meta(&self) -> &BoundaryMeta {
        &self.meta
    }

    pub fn n_max(&self) -> u64 {
        self.lower.len() as u64
    }

    /// Lower boundary at step `n` (1-based).
    pub fn lower(&self, n: u64) -> i64 {
        self.lower[(n - 1) as usize]
    }

    /// Upper boundary at step `n` (1-based).
    pub fn upper(&self, n: u64) -> i64 {
        self.upper[(n - 1) as usize]
    }

    pub fn lower_slice(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper_slice(&self) -> &[i64] {
        &self.upper
    }

    /// Boundaries at step `n`, or `None` past the end of the table.
    pub fn get(&self, n: u64) -> Option<(i64, i64)> {
        if n == 0 || n > self.n_max() {
            return None;
        }
        Some((self.lower(n), self.upper(n)))
    }

    fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvariantViolation(format!(
                "need matching non-empty boundary arrays, got {} lower / {} upper",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.meta.method == Method::Simctest && (self.lower[0] != -1 || self.upper[0] != 2) {
            return Err(Error::InvariantViolation(format!(
                "simctest tables start at L_1 = -1, U_1 = 2, got L_1 = {}, U_1 = {}",
                self.lower[0], self.upper[0]
            )));
        }
        // A zero-spend prefix lets the upper boundary drop once spending
        // starts, so upper monotonicity is only required for the other kinds.
        let upper_monotone = !matches!(self.meta.spending, Some(SpendingKind::Truncated { .. }));
        for i in 0..self.lower.len() {
            let n = i + 1;
            if self.lower[i] >= self.upper[i] {
                return Err(Error::InvariantViolation(format!(
                    "L_{n} = {} must stay below U_{n} = {}",
                    self.lower[i], self.upper[i]
                )));
            }
            if i > 0 && self.lower[i] < self.lower[i - 1] {
                return Err(Error::InvariantViolation(format!(
                    "lower boundary decreases at step {n}: {} -> {}",
                    self.lower[i - 1],
                    self.lower[i]
                )));
            }
            if upper_monotone && i > 0 && self.upper[i] < self.upper[i - 1] {
                return Err(Error::InvariantViolation(format!(
                    "upper boundary decreases at step {n}: {} -> {}",
                    self.upper[i - 1],
                    self.upper[i]
                )));
            }
        }
        Ok(())
    }

    /// Writes the table in the cache format.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#version={BOUNDARY_FORMAT_VERSION}")?;
        writeln!(w, "#method={}", self.meta.method)?;
        writeln!(w, "#alpha={}", self.meta.alpha)?;
        writeln!(w, "#epsilon={}", self.meta.epsilon)?;
        match &self.meta.spending {
            Some(kind) => writeln!(w, "#spending={}", kind.descriptor())?,
            None => writeln!(w, "#spending=none")?,
        }
        for i in 0..self.lower.len() {
            writeln!(w, "{},{},{}", i + 1, self.lower[i], self.upper[i])?;
        }
        Ok(())
    }

    /// Parses the cache format, enforcing the grammar byte-for-byte, and
    /// re-validates the loaded table.
    pub fn load<R: BufRead>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;

        let mut lines = Vec::new();
        let mut rest = text.as_str();
        let mut lineno = 0usize;
        while !rest.is_empty() {
            lineno += 1;
            match rest.find('\n') {
                Some(idx) => {
                    lines.push((lineno, &rest[..idx]));
                    rest = &rest[idx + 1..];
                }
                None => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("line is not newline-terminated: `{rest}`"),
                    })
                }
            }
        }

        let mut it = lines.into_iter();
        let version = expect_header(&mut it, "version")?;
        if version.1 != BOUNDARY_FORMAT_VERSION.to_string() {
            return Err(Error::VersionMismatch { found: version.1 });
        }
        let method: Method = {
            let (line, value) = expect_header(&mut it, "method")?;
            value.parse().map_err(|e: Error| Error::Parse {
                line,
                message: e.to_string(),
            })?
        };
        let alpha = parse_header_f64(&mut it, "alpha")?;
        let epsilon = parse_header_f64(&mut it, "epsilon")?;
        let spending = {
            let (line, value) = expect_header(&mut it, "spending")?;
            if value == "none" {
                None
            } else {
                Some(SpendingKind::parse(&value).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?)
            }
        };

        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (lineno, line) in it {
            let mut fields = line.split(',');
            let (n, l, u) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(n), Some(l), Some(u), None) => (n, l, u),
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected `n,L,U`, got `{line}`"),
                    })
                }
            };
            let n: u64 = parse_field(lineno, n, "step")?;
            let l: i64 = parse_field(lineno, l, "lower boundary")?;
            let u: i64 = parse_field(lineno, u, "upper boundary")?;
            if n as usize != lower.len() + 1 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("steps must be contiguous from 1, got step {n}"),
                });
            }
            lower.push(l);
            upper.push(u);
        }

        Self::new(
            BoundaryMeta {
                method,
                alpha,
                epsilon,
                spending,
            },
            lower,
            upper,
        )
    }
}

fn expect_header<'a, I: Iterator<Item = (usize, &'a str)>>(
    it: &mut I,
    key: &str,
) -> Result<(usize, String)> {
    let (lineno, line) = it.next().ok_or_else(|| Error::Parse {
        line: 0,
        message: format!("missing `#{key}=` header"),
    })?;
    let prefix = format!("#{key}=");
    match line.strip_prefix(&prefix) {
        Some(value) => Ok((lineno, value.to_string())),
        None => Err(Error::Parse {
            line: lineno,
            message: format!("expected `{prefix}...`, got `{line}`"),
        }),
    }
}

fn parse_header_f64<'a, I: Iterator<Item = (usize, &'a str)>>(it: &mut I, key: &str) -> Result<f64> {
    let (lineno, value) = expect_header(it, key)?;
    value.parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("invalid decimal for `{key}`: `{value}`"),
    })
}

fn parse_field<T: FromStr>(line: usize, raw: &str, what: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what}: `{raw}`"),
    })
}
