//! Subcommand definitions and their implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use seqmc::batch::par_map;
use seqmc::boundary::BoundaryPair;
use seqmc::csm::{csm_run, CsmBoundaries};
use seqmc::risk::{
    expected_stopping_time, hitting_probabilities, resampling_risk, spend_rate_series,
    TruncationRule,
};
use seqmc::simctest::{simctest_run, simctest_run_growing, SimctestBoundaries, SpendingKind, SpendingSequence};
use seqmc::source::{penguin_bootstrap_source, FixedPSource, SampleSource, VecSource};
use seqmc::truncated::{truncated_risk_curve, CurveMode, TruncatedBase, TruncatedConfig};
use seqmc::types::{Decision, RunResult, TestConfig};

use crate::output::{open_sink, Field, Format, Table};

#[derive(Parser)]
#[command(
    name = "seqmc",
    version,
    about = "Sequential Monte Carlo decisions on p-values with bounded resampling risk"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run one sequential test end to end and print its outcome.
    ///
    /// Exit code 0 on a decision, 2 on no-decision (truncation), 1 on error.
    Run(RunArgs),
    /// Compute a boundary table and write it in the cache format.
    Boundaries(BoundariesArgs),
    /// Compare both methods' boundaries step by step.
    Compare(CompareArgs),
    /// Cumulative hitting trace at one p, or a risk curve over a p grid.
    Risk(RiskArgs),
    /// Expected number of steps to decide, over p and epsilon grids.
    Effort(EffortArgs),
    /// Per-step risk-spending series scaled by n^l, with fitted slopes.
    Rate(RateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Csm,
    Simctest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveMethod {
    Csm,
    Simctest,
    BesagClifford,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    Penguins,
}

#[derive(Args)]
pub struct CommonTest {
    /// Decision threshold for the p-value.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bound on the resampling risk.
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    /// Spending sequence descriptor, e.g. `default(k=1000)`,
    /// `truncated(L=100,U=10000,k=1000)`, `power(gamma=0.5,k=3)`.
    #[arg(long, default_value = "default(k=1000)")]
    spending: String,
}

impl CommonTest {
    fn config(&self) -> Result<TestConfig> {
        Ok(TestConfig::new(self.alpha, self.epsilon)?)
    }

    fn spending_seq(&self) -> Result<SpendingSequence> {
        let kind = SpendingKind::parse(&self.spending)?;
        Ok(SpendingSequence::new(kind, self.epsilon)?)
    }
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    test: CommonTest,
    /// Stop without a decision after this many samples.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Seed for the seeded sources.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw indicators from Bernoulli(p).
    #[arg(long, group = "source")]
    p: Option<f64>,
    /// Read one 0/1 indicator per line from a file.
    #[arg(long, group = "source")]
    input: Option<PathBuf>,
    /// Built-in bootstrap demo stream.
    #[arg(long, value_enum, group = "source")]
    demo: Option<Demo>,
    /// Walk a precomputed boundary table instead of computing on the fly.
    #[arg(long)]
    bounds: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; relative paths resolve against SEQMC_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundariesArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    test: CommonTest,
    /// Number of steps to tabulate.
    #[arg(long)]
    n_max: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    test: CommonTest,
    #[arg(long)]
    n_max: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RiskArgs {
    /// Method whose boundaries are analysed.
    #[arg(long, value_enum, default_value_t = CurveMethod::Csm)]
    method: CurveMethod,
    #[command(flatten)]
    test: CommonTest,
    /// Exceedance target for the besag-clifford method.
    #[arg(long, default_value_t = 10)]
    h: u64,
    /// Analysis horizon (and cap of the truncated procedures).
    #[arg(long, default_value_t = 50_000)]
    cap: u64,
    /// Trace mode: cumulative hitting probabilities under this p.
    #[arg(long, group = "mode")]
    p: Option<f64>,
    /// Curve mode: grid as `a,b,c` or `lo:hi:count`.
    #[arg(long, group = "mode")]
    p_grid: Option<String>,
    /// Re-emit an externally supplied `p,risk` curve, validated and sorted.
    #[arg(long, group = "mode")]
    from_curve: Option<PathBuf>,
    /// Force a decision at the cap (truncated procedure risk).
    #[arg(long)]
    force: bool,
    /// Estimate the curve from this many seeded runs instead of exactly.
    #[arg(long)]
    mc_runs: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Analyse a boundary table loaded from a cache file.
    #[arg(long)]
    bounds: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EffortArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Decision threshold for the p-value.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Spending sequence descriptor (simctest only).
    #[arg(long, default_value = "default(k=1000)")]
    spending: String,
    /// Risk bounds to sweep, comma separated.
    #[arg(long, default_value = "0.001")]
    epsilon_list: String,
    /// Grid of underlying probabilities, `a,b,c` or `lo:hi:count`.
    #[arg(long)]
    p_grid: String,
    /// Stop once the undecided mass drops below this tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tail_tol: f64,
    /// Hard cap on the evaluated horizon.
    #[arg(long, default_value_t = 1_000_000)]
    hard_cap: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RateArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    test: CommonTest,
    /// Scaling exponents, comma separated.
    #[arg(long, default_value = "1.5")]
    l_list: String,
    #[arg(long, default_value_t = 100)]
    stride: u64,
    #[arg(long, default_value_t = 500)]
    burn_in: u64,
    #[arg(long, default_value_t = 50_000)]
    n_max: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Boundaries(args) => cmd_boundaries(args).map(|_| 0),
        Command::Compare(args) => cmd_compare(args).map(|_| 0),
        Command::Risk(args) => cmd_risk(args).map(|_| 0),
        Command::Effort(args) => cmd_effort(args).map(|_| 0),
        Command::Rate(args) => cmd_rate(args).map(|_| 0),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [_] => spec
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("invalid grid value `{v}`"))
            })
            .collect(),
        [lo, hi, count] => {
            let lo: f64 = lo.parse().with_context(|| format!("invalid grid start `{lo}`"))?;
            let hi: f64 = hi.parse().with_context(|| format!("invalid grid end `{hi}`"))?;
            let count: usize = count
                .parse()
                .with_context(|| format!("invalid grid count `{count}`"))?;
            if count < 2 {
                bail!("grid count must be at least 2, got {count}");
            }
            Ok((0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect())
        }
        _ => bail!("grid must be `a,b,c` or `lo:hi:count`, got `{spec}`"),
    }
}

fn load_bounds(path: &Path) -> Result<BoundaryPair> {
    let file = File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?;
    Ok(BoundaryPair::load(BufReader::new(file))?)
}

fn print_run_result(args_format: Format, out: Option<&Path>, res: &RunResult) -> Result<()> {
    let columns = ["steps", "successes", "estimate", "decision", "stopped_by"];
    let mut table = Table::new(open_sink(out)?, args_format, &columns);
    table.row(&[
        Field::U64(res.steps),
        Field::U64(res.successes),
        Field::F64(res.estimate),
        Field::Str(res.decision.to_string()),
        Field::Str(res.stopped_by.to_string()),
    ])?;
    table.finish()
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let mut cfg = args.test.config()?;
    if let Some(cap) = args.max_steps {
        cfg = cfg.with_max_steps(cap)?;
    }

    let mut source: Box<dyn SampleSource> = match (&args.p, &args.input, &args.demo) {
        (Some(p), None, None) => Box::new(FixedPSource::new(*p, args.seed)?),
        (None, Some(path), None) => {
            let file =
                File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?;
            Box::new(VecSource::from_reader(BufReader::new(file))?)
        }
        (None, None, Some(Demo::Penguins)) => Box::new(penguin_bootstrap_source(args.seed)),
        _ => bail!("exactly one of --p, --input, --demo is required"),
    };

    let result = match (args.method, &args.bounds) {
        (Method::Csm, None) => csm_run(source.as_mut(), &cfg)?,
        (_, Some(path)) => {
            let pair = load_bounds(path)?;
            simctest_run(source.as_mut(), &pair, cfg.max_steps)?
        }
        (Method::Simctest, None) => {
            let mut table = SimctestBoundaries::new(&cfg, args.test.spending_seq()?)?;
            simctest_run_growing(source.as_mut(), &mut table, cfg.max_steps)?
        }
    };
    print_run_result(args.format, args.out.as_deref(), &result)?;
    Ok(if result.decision == Decision::NoDecision {
        2
    } else {
        0
    })
}

fn cmd_boundaries(args: BoundariesArgs) -> Result<()> {
    let cfg = args.test.config()?;
    let pair = match args.method {
        Method::Csm => CsmBoundaries::new(&cfg)?.to_pair(args.n_max)?,
        Method::Simctest => {
            SimctestBoundaries::new(&cfg, args.test.spending_seq()?)?.to_pair(args.n_max)?
        }
    };
    let mut sink = open_sink(args.out.as_deref())?;
    pair.save(&mut sink)?;
    sink.flush()?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let cfg = args.test.config()?;
    let csm = CsmBoundaries::new(&cfg)?.to_pair(args.n_max)?;
    let sim = SimctestBoundaries::new(&cfg, args.test.spending_seq()?)?.to_pair(args.n_max)?;

    let columns = [
        "n",
        "csm_lower",
        "csm_upper",
        "sim_lower",
        "sim_upper",
        "width_ratio",
        "upper_diff",
        "lower_diff",
    ];
    let mut table = Table::new(open_sink(args.out.as_deref())?, args.format, &columns);
    for n in 1..=args.n_max {
        let (l, u) = (csm.lower(n), csm.upper(n));
        let (bl, bu) = (sim.lower(n), sim.upper(n));
        table.row(&[
            Field::U64(n),
            Field::F64(l as f64),
            Field::F64(u as f64),
            Field::F64(bl as f64),
            Field::F64(bu as f64),
            Field::F64((u - l) as f64 / (bu - bl) as f64),
            Field::F64((u - bu) as f64),
            Field::F64((bl - l) as f64),
        ])?;
    }
    table.finish()
}

fn analysis_bounds(args: &RiskArgs) -> Result<BoundaryPair> {
    if let Some(path) = &args.bounds {
        return load_bounds(path);
    }
    let cfg = args.test.config()?;
    Ok(match args.method {
        CurveMethod::Csm => CsmBoundaries::new(&cfg)?.to_pair(args.cap)?,
        CurveMethod::Simctest => {
            SimctestBoundaries::new(&cfg, args.test.spending_seq()?)?.to_pair(args.cap)?
        }
        CurveMethod::BesagClifford => {
            bail!("the besag-clifford rule has no boundary table; use --p-grid")
        }
    })
}

fn cmd_risk(args: RiskArgs) -> Result<()> {
    match (&args.p, &args.p_grid, &args.from_curve) {
        (Some(p), None, None) => {
            let pair = analysis_bounds(&args)?;
            let cap = args.cap.min(pair.n_max());
            let trace = hitting_probabilities(&pair, *p, cap)?;
            let columns = ["n", "cum_upper", "cum_lower"];
            let mut table = Table::new(open_sink(args.out.as_deref())?, args.format, &columns);
            for n in 1..=cap {
                table.row(&[
                    Field::U64(n),
                    Field::F64(trace.cum_upper[(n - 1) as usize]),
                    Field::F64(trace.cum_lower[(n - 1) as usize]),
                ])?;
            }
            table.finish()
        }
        (None, Some(grid), None) => {
            let mut grid = parse_grid(grid)?;
            grid.sort_by(f64::total_cmp);
            let points = risk_curve_points(&args, &grid)?;
            emit_curve(&args, &points)
        }
        (None, None, Some(path)) => {
            let file =
                File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?;
            let mut points = seqmc::truncated::read_risk_curve(BufReader::new(file))?;
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            emit_curve(&args, &points)
        }
        _ => bail!("exactly one of --p, --p-grid, --from-curve is required"),
    }
}

fn risk_curve_points(args: &RiskArgs, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let forced = args.force || args.method == CurveMethod::BesagClifford;
    if forced {
        let base = match args.method {
            CurveMethod::Csm => TruncatedBase::Csm,
            CurveMethod::Simctest => TruncatedBase::Simctest(args.test.spending_seq()?),
            CurveMethod::BesagClifford => TruncatedBase::BesagClifford { h: args.h },
        };
        let cfg = TruncatedConfig {
            base,
            cap: args.cap,
            alpha: args.test.alpha,
            epsilon: args.test.epsilon,
        };
        let mode = match args.mc_runs {
            Some(runs) => CurveMode::MonteCarlo {
                runs,
                seed: args.seed,
            },
            None => CurveMode::Exact,
        };
        Ok(truncated_risk_curve(&cfg, grid, mode)?)
    } else {
        if args.mc_runs.is_some() {
            bail!("--mc-runs requires --force (open-ended curves are exact)");
        }
        let pair = analysis_bounds(args)?;
        let cap = args.cap.min(pair.n_max());
        let alpha = args.test.alpha;
        let risks = par_map(grid, |&p| {
            resampling_risk(&pair, p, alpha, cap, TruncationRule::None)
        });
        grid.iter()
            .zip(risks)
            .map(|(&p, r)| Ok((p, r?)))
            .collect()
    }
}

fn emit_curve(args: &RiskArgs, points: &[(f64, f64)]) -> Result<()> {
    let columns = ["p", "risk"];
    let mut table = Table::new(open_sink(args.out.as_deref())?, args.format, &columns);
    for (p, risk) in points {
        table.row(&[Field::F64(*p), Field::F64(*risk)])?;
    }
    table.finish()
}

fn cmd_effort(args: EffortArgs) -> Result<()> {
    let epsilons = parse_grid(&args.epsilon_list)?;
    let mut grid = parse_grid(&args.p_grid)?;
    grid.sort_by(f64::total_cmp);

    let mut jobs = Vec::new();
    for &epsilon in &epsilons {
        for &p in &grid {
            jobs.push((epsilon, p));
        }
    }
    let rows = par_map(&jobs, |&(epsilon, p)| -> Result<_> {
        let cfg = TestConfig::new(args.alpha, epsilon)?;
        let est = match args.method {
            Method::Csm => {
                let mut table = CsmBoundaries::new(&cfg)?;
                expected_stopping_time(&mut table, p, args.tail_tol, args.hard_cap)?
            }
            Method::Simctest => {
                let kind = SpendingKind::parse(&args.spending)?;
                let seq = SpendingSequence::new(kind, epsilon)?;
                let mut table = SimctestBoundaries::new(&cfg, seq)?;
                expected_stopping_time(&mut table, p, args.tail_tol, args.hard_cap)?
            }
        };
        Ok((epsilon, p, est))
    });

    let columns = ["epsilon", "p", "expected_steps", "residual_mass", "capped"];
    let mut table = Table::new(open_sink(args.out.as_deref())?, args.format, &columns);
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    for (epsilon, p, est) in rows {
        table.row(&[
            Field::F64(epsilon),
            Field::F64(p),
            Field::F64(est.expectation),
            Field::F64(est.residual_mass),
            Field::Str(est.capped.to_string()),
        ])?;
    }
    table.finish()
}

fn cmd_rate(args: RateArgs) -> Result<()> {
    let cfg = args.test.config()?;
    let pair = match args.method {
        Method::Csm => CsmBoundaries::new(&cfg)?.to_pair(args.n_max)?,
        Method::Simctest => {
            SimctestBoundaries::new(&cfg, args.test.spending_seq()?)?.to_pair(args.n_max)?
        }
    };
    let exponents = parse_grid(&args.l_list)?;

    let columns = ["side", "l", "n", "delta", "scaled"];
    let mut table = Table::new(open_sink(args.out.as_deref())?, args.format, &columns);
    for &l in &exponents {
        let series = spend_rate_series(&pair, cfg.alpha, l, args.stride, args.burn_in, args.n_max)?;
        for (side, points, slope) in [
            ("lower", &series.lower, series.slope_lower),
            ("upper", &series.upper, series.slope_upper),
        ] {
            for pt in points {
                table.row(&[
                    Field::Str(side.to_string()),
                    Field::F64(l),
                    Field::U64(pt.n),
                    Field::F64(pt.delta),
                    Field::F64(pt.scaled),
                ])?;
            }
            match slope {
                Some(s) => eprintln!("fit: side={side} l={l} slope={s}"),
                None => eprintln!("fit: side={side} l={l} slope=undefined"),
            }
        }
    }
    table.finish()
}
