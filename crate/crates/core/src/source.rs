//! Bernoulli exceedance streams.
//!
//! Every stopping rule in this crate consumes indicators
//! `X_i = 1(T_i >= t)` through the [`SampleSource`] trait. Provided sources:
//! i.i.d. streams at a fixed success probability, finite streams read from
//! 0/1 line files, and a two-sample bootstrap stream that recomputes a Welch
//! statistic on resampled count data.
//!
//! Seeded sources draw from ChaCha8, whose output stream is portable and
//! stable across platforms, so a seed pins the whole indicator sequence.

use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A stream of Bernoulli indicators consumed one at a time.
pub trait SampleSource {
    /// Next indicator, strictly 0 or 1.
    fn next_indicator(&mut self) -> Result<u8>;

    /// Number of indicators drawn so far.
    fn draws(&self) -> u64;
}

/// I.i.d. Bernoulli(p) indicators from a seeded generator.
#[derive(Debug, Clone)]
pub struct FixedPSource {
    p: f64,
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl FixedPSource {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "success probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self {
            p,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl SampleSource for FixedPSource {
    fn next_indicator(&mut self) -> Result<u8> {
        self.draws += 1;
        // degenerate probabilities stay exact and still advance the stream
        let u: f64 = self.rng.random();
        Ok(match self.p {
            0.0 => 0,
            1.0 => 1,
            p => u8::from(u < p),
        })
    }

    fn draws(&self) -> u64 {
        self.draws
    }
}

/// Finite indicator stream; exhaustion is an explicit error.
#[derive(Debug, Clone)]
pub struct VecSource {
    bits: Vec<u8>,
    pos: usize,
}

impl VecSource {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(bad) = bits.iter().position(|b| *b > 1) {
            return Err(Error::InvalidParameter(format!(
                "indicator at position {bad} is {}, expected 0 or 1",
                bits[bad]
            )));
        }
        Ok(Self { bits, pos: 0 })
    }

    /// Parses one `0` or `1` per line.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut bits = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            match line.trim() {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected `0` or `1`, got `{other}`"),
                    })
                }
            }
        }
        Ok(Self { bits, pos: 0 })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl SampleSource for VecSource {
    fn next_indicator(&mut self) -> Result<u8> {
        match self.bits.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => Err(Error::SourceExhausted {
                draws: self.pos as u64,
            }),
        }
    }

    fn draws(&self) -> u64 {
        self.pos as u64
    }
}

/// Welch statistic and its approximate degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchT {
    pub statistic: f64,
    pub df: f64,
}

/// Two-sample Welch t statistic with sample variances (divisor `n - 1`) and
/// the Welch–Satterthwaite degrees of freedom.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<WelchT> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "each group needs at least two observations, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::InvalidParameter(
            "group variance must be positive".into(),
        ));
    }
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let ax = vx / nx;
    let ay = vy / ny;
    let statistic = (mx - my) / (ax + ay).sqrt();
    let df = (ax + ay) * (ax + ay) / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
    Ok(WelchT { statistic, df })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Observed counts for a two-group comparison, one cell per location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoSampleCounts {
    group1: Vec<u32>,
    group2: Vec<u32>,
}

impl TwoSampleCounts {
    pub fn new(group1: Vec<u32>, group2: Vec<u32>) -> Result<Self> {
        if group1.len() < 2 || group2.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "each group needs at least two cells, got {} and {}",
                group1.len(),
                group2.len()
            )));
        }
        Ok(Self { group1, group2 })
    }

    /// Breeding-pair counts per island for the penguin comparison:
    /// 19 locations with predators, 10 predator-free.
    pub fn penguins() -> Self {
        Self {
            group1: vec![7, 3, 3, 7, 3, 7, 3, 10, 1, 7, 4, 1, 3, 2, 1, 2, 9, 4, 2],
            group2: vec![15, 32, 1, 13, 14, 11, 1, 3, 2, 7],
        }
    }

    /// Parses `group,count` rows with group labels 1 and 2. A header row
    /// `group,count` is required.
    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "group,count" => {}
            Some((_, Ok(h))) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `group,count`, got `{h}`"),
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
        let mut group1 = Vec::new();
        let mut group2 = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let parse = |raw: &str, what: &str| -> Result<u32> {
                raw.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("invalid {what}: `{raw}`"),
                })
            };
            match line.split_once(',') {
                Some((g, c)) => match parse(g, "group label")? {
                    1 => group1.push(parse(c, "count")?),
                    2 => group2.push(parse(c, "count")?),
                    other => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("group label must be 1 or 2, got {other}"),
                        })
                    }
                },
                None => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected `group,count`, got `{line}`"),
                    })
                }
            }
        }
        Self::new(group1, group2)
    }

    pub fn group1(&self) -> &[u32] {
        &self.group1
    }

    pub fn group2(&self) -> &[u32] {
        &self.group2
    }

    /// Total number of individuals across both groups.
    pub fn total(&self) -> u64 {
        self.group1.iter().chain(&self.group2).map(|&c| u64::from(c)).sum()
    }

    /// Number of cells (locations) across both groups.
    pub fn cells(&self) -> usize {
        self.group1.len() + self.group2.len()
    }

    /// Welch statistic of the observed counts.
    pub fn observed_welch(&self) -> Result<WelchT> {
        let x: Vec<f64> = self.group1.iter().map(|&c| f64::from(c)).collect();
        let y: Vec<f64> = self.group2.iter().map(|&c| f64::from(c)).collect();
        welch_t(&x, &y)
    }
}

/// Bootstrap exceedance stream for a two-sample comparison.
///
/// Each draw reallocates every individual independently and uniformly over
/// all cells, recomputes the Welch statistic on the resampled counts, and
/// emits 1 iff `|t_resampled| >= |t_observed|` (two-sided; ties count as
/// exceedances).
#[derive(Debug, Clone)]
pub struct BootstrapTSource {
    n1: usize,
    cells: usize,
    total: u64,
    abs_t_observed: f64,
    counts: Vec<u32>,
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl BootstrapTSource {
    pub fn new(data: &TwoSampleCounts, seed: u64) -> Result<Self> {
        let observed = data.observed_welch()?;
        Ok(Self {
            n1: data.group1.len(),
            cells: data.cells(),
            total: data.total(),
            abs_t_observed: observed.statistic.abs(),
            counts: vec![0; data.cells()],
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn abs_t_observed(&self) -> f64 {
        self.abs_t_observed
    }

    /// One resampled allocation; returns |t| of the resampled counts.
    fn resample_abs_t(&mut self) -> f64 {
        self.counts.fill(0);
        for _ in 0..self.total {
            let cell = self.rng.random_range(0..self.cells);
            self.counts[cell] += 1;
        }
        let (m1, v1) = count_mean_var(&self.counts[..self.n1]);
        let (m2, v2) = count_mean_var(&self.counts[self.n1..]);
        let denom = v1 / self.n1 as f64 + v2 / self.n2() as f64;
        if denom > 0.0 {
            ((m1 - m2) / denom.sqrt()).abs()
        } else if m1 == m2 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn n2(&self) -> usize {
        self.cells - self.n1
    }
}

/// Mean and sample variance from integer counts, in exact integer sums.
fn count_mean_var(counts: &[u32]) -> (f64, f64) {
    let n = counts.len() as f64;
    let sum: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    let sumsq: u64 = counts.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
    let mean = sum as f64 / n;
    let var = (sumsq as f64 - (sum as f64) * (sum as f64) / n) / (n - 1.0);
    (mean, var)
}

impl SampleSource for BootstrapTSource {
    fn next_indicator(&mut self) -> Result<u8> {
        self.draws += 1;
        let abs_t = self.resample_abs_t();
        Ok(u8::from(abs_t >= self.abs_t_observed))
    }

    fn draws(&self) -> u64 {
        self.draws
    }
}

/// The penguin comparison as a ready-made bootstrap stream.
pub fn penguin_bootstrap_source(seed: u64) -> BootstrapTSource {
    BootstrapTSource::new(&TwoSampleCounts::penguins(), seed)
        .expect("embedded penguin data is valid")
}
