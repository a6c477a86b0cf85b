//! Benchmark harness: runs a strategy matrix over shared seeded instances
//! and aggregates the per-iteration metric into median curves with nested
//! concentration bands.
//!
//! The metric of a trial is `log₁₀(max_i p_i(x^k) / max_i p_i(x⁰))`. Trial
//! `j` of every strategy solves the identical instance generated from
//! `base_seed + j`, so comparisons are paired. After a trial terminates
//! its metric is held constant at the terminal value so medians stay
//! defined at every iteration, and the `p%` band at iteration `k` spans
//! the `(50−p/2)`-th to `(50+p/2)`-th percentiles of the trial values
//! (linear interpolation between order statistics), so bands nest by
//! construction.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::controls::{InnerStrategy, OuterSchedule};
use crate::error::{Error, Result};
use crate::fmt_real;
use crate::problem::{generate_problem, ProblemInstance};
use crate::rates::Method;
use crate::solver::{run, IterateTrace, SolverConfig, TerminalStatus};

/// Concentration band widths, in percent around the median.
pub const BAND_PERCENTS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

/// How a strategy selects constraints within its cyclic outer control.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategyKind {
    /// Singleton blocks, one projection per step.
    Cyclic,
    /// Whole block (simultaneous step).
    Simultaneous,
    /// Violated constraints of the block.
    Active,
    /// Single most violated constraint of the block.
    MaxProx,
    /// `t` most violated constraints of the block.
    Top(usize),
    /// Constraints within factor `t` of the block's max proximity.
    Threshold(f64),
}

/// A named solver configuration: selection rule plus outer block size.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub block_size: usize,
}

impl Strategy {
    pub fn new(kind: StrategyKind, block_size: usize) -> Self {
        Self { kind, block_size }
    }

    /// Parse the CLI grammar `cyclic|all|active|maxprox|top:<t>|threshold:<t>`.
    pub fn parse(spec: &str, block_size: usize) -> Result<Self> {
        let kind = match spec {
            "cyclic" => StrategyKind::Cyclic,
            "all" => StrategyKind::Simultaneous,
            "active" => StrategyKind::Active,
            "maxprox" => StrategyKind::MaxProx,
            _ => {
                if let Some(t) = spec.strip_prefix("top:") {
                    StrategyKind::Top(t.parse().map_err(|e| {
                        Error::Parse(format!("bad top size {t:?}: {e}"))
                    })?)
                } else if let Some(t) = spec.strip_prefix("threshold:") {
                    StrategyKind::Threshold(t.parse().map_err(|e| {
                        Error::Parse(format!("bad threshold {t:?}: {e}"))
                    })?)
                } else {
                    return Err(Error::Parse(format!(
                        "unknown strategy {spec:?}; expected cyclic|all|active|maxprox|top:<t>|threshold:<t>"
                    )));
                }
            }
        };
        Ok(Self::new(kind, block_size))
    }

    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Cyclic => "cyclic".into(),
            StrategyKind::Simultaneous => format!("all-b{}", self.block_size),
            StrategyKind::Active => format!("active-b{}", self.block_size),
            StrategyKind::MaxProx => format!("maxprox-b{}", self.block_size),
            StrategyKind::Top(t) => format!("top{}-b{}", t, self.block_size),
            StrategyKind::Threshold(t) => format!("thr{}-b{}", t, self.block_size),
        }
    }

    pub fn schedule(&self, m: usize) -> Result<OuterSchedule> {
        match self.kind {
            StrategyKind::Cyclic => OuterSchedule::singletons(m),
            _ => OuterSchedule::contiguous(m, self.block_size),
        }
    }

    pub fn inner(&self) -> InnerStrategy {
        match self.kind {
            StrategyKind::Cyclic | StrategyKind::Simultaneous => InnerStrategy::All,
            StrategyKind::Active => InnerStrategy::Active,
            StrategyKind::MaxProx => InnerStrategy::MaxProx,
            StrategyKind::Top(t) => InnerStrategy::TopT(t),
            StrategyKind::Threshold(t) => InnerStrategy::Threshold(t),
        }
    }

    pub fn method(&self) -> Method {
        match self.kind {
            StrategyKind::Cyclic => Method::Cyclic,
            StrategyKind::Simultaneous => Method::Simultaneous,
            StrategyKind::Active => Method::Active,
            StrategyKind::MaxProx => Method::MaxProx,
            StrategyKind::Top(_) => Method::TopT,
            StrategyKind::Threshold(_) => Method::Threshold,
        }
    }

    /// Inner block size entering the top-t rate formula.
    pub fn top_size(&self) -> Option<usize> {
        match self.kind {
            StrategyKind::Top(t) => Some(t),
            _ => None,
        }
    }
}

/// Experiment matrix: `trials` seeded instances shared by every strategy.
#[derive(Clone)]
pub struct ExperimentPlan {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub strategies: Vec<Strategy>,
    pub config: SolverConfig,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("plan needs at least one strategy".into()));
        }
        for s in &self.strategies {
            if s.block_size == 0 || s.block_size > self.m {
                return Err(Error::InvalidConfig(format!(
                    "strategy {} has block size out of 1..={}",
                    s.label(),
                    self.m
                )));
            }
            s.inner().validate(s.block_size)?;
        }
        self.config.validate()
    }
}

/// Per-iteration relative proximity decay `log₁₀(max p(x^k)/max p(x⁰))`,
/// zero at `k = 0`. Errors when the start point is feasible.
pub fn metric(trace: &IterateTrace) -> Result<Vec<f64>> {
    let series = trace.max_prox_series();
    let p0 = *series.first().ok_or_else(|| {
        Error::InsufficientData("empty trace".into())
    })?;
    if p0 <= 0.0 {
        return Err(Error::InvalidProblem(
            "metric needs an infeasible start point".into(),
        ));
    }
    // exact zeros (all constraints strictly satisfied) are clamped to the
    // smallest positive double so the log stays finite
    Ok(series
        .iter()
        .map(|&p| (p.max(f64::MIN_POSITIVE) / p0).log10())
        .collect())
}

/// One strategy's aggregated curves.
#[derive(Clone, Debug)]
pub struct StrategySummary {
    pub label: String,
    pub rows: Vec<BandRow>,
    /// Terminal iteration of each trial, in trial order.
    pub terminal_iters: Vec<usize>,
    /// Terminal metric value of each trial, in trial order.
    pub terminal_metrics: Vec<f64>,
    pub failures: usize,
}

/// Median and nested concentration bands at one iteration.
#[derive(Clone, Debug)]
pub struct BandRow {
    pub k: usize,
    pub median: f64,
    /// `(lo, hi)` per entry of [`BAND_PERCENTS`].
    pub bands: [(f64, f64); 5],
}

#[derive(Clone, Debug)]
pub struct AggregateResult {
    pub strategies: Vec<StrategySummary>,
}

impl AggregateResult {
    pub fn summary(&self, label: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.label == label)
    }

    /// CSV with one row per (strategy, iteration).
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        write!(w, "strategy,k,median")?;
        for p in BAND_PERCENTS {
            write!(w, ",lo{p:.0},hi{p:.0}")?;
        }
        writeln!(w)?;
        for s in &self.strategies {
            for row in &s.rows {
                write!(w, "{},{},{}", s.label, row.k, fmt_real(row.median))?;
                for (lo, hi) in row.bands {
                    write!(w, ",{},{}", fmt_real(lo), fmt_real(hi))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Percentile with linear interpolation between order statistics;
/// `q ∈ [0, 1]`, input sorted ascending.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Run every (strategy, trial) pair and aggregate. Trials are independent
/// and run in parallel; the reduction is ordered by (strategy, trial), so
/// the result does not depend on scheduling.
pub fn run_plan(plan: &ExperimentPlan) -> Result<AggregateResult> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.strategies.len())
        .flat_map(|si| (0..plan.trials).map(move |j| (si, j)))
        .collect();
    let outcomes: Vec<Result<(Vec<f64>, usize, bool)>> = jobs
        .par_iter()
        .map(|&(si, j)| {
            let strategy = &plan.strategies[si];
            let problem = generate_problem(plan.m, plan.n, plan.base_seed.wrapping_add(j as u64))?;
            let trace = run_trial(&problem, strategy, &plan.config)?;
            let series = metric(&trace)?;
            let failed = trace.status == TerminalStatus::NumericalFailure;
            Ok((series, trace.terminal_iteration(), failed))
        })
        .collect();

    let mut per_strategy: Vec<Vec<(Vec<f64>, usize, bool)>> =
        vec![Vec::with_capacity(plan.trials); plan.strategies.len()];
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let (si, _) = jobs[idx];
        per_strategy[si].push(outcome?);
    }

    let strategies = plan
        .strategies
        .iter()
        .zip(per_strategy)
        .map(|(strategy, trials)| aggregate_strategy(strategy.label(), trials))
        .collect();
    Ok(AggregateResult { strategies })
}

fn run_trial(
    problem: &ProblemInstance,
    strategy: &Strategy,
    config: &SolverConfig,
) -> Result<IterateTrace> {
    let cutters = problem.cutters()?;
    let sched = strategy.schedule(problem.m())?;
    run(problem, &cutters, &sched, &strategy.inner(), config)
}

fn aggregate_strategy(
    label: String,
    trials: Vec<(Vec<f64>, usize, bool)>,
) -> StrategySummary {
    let failures = trials.iter().filter(|t| t.2).count();
    let terminal_iters: Vec<usize> = trials.iter().map(|t| t.1).collect();
    let terminal_metrics: Vec<f64> =
        trials.iter().map(|t| *t.0.last().unwrap_or(&0.0)).collect();
    let len = trials.iter().map(|t| t.0.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(len);
    let mut values = vec![0.0f64; trials.len()];
    for k in 0..len {
        for (vi, (series, _, _)) in trials.iter().enumerate() {
            // terminated trials hold their terminal value
            values[vi] = *series.get(k).unwrap_or_else(|| series.last().unwrap());
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = percentile(&values, 0.5);
        let mut bands = [(0.0, 0.0); 5];
        for (bi, p) in BAND_PERCENTS.iter().enumerate() {
            let half = p / 200.0;
            bands[bi] = (percentile(&values, 0.5 - half), percentile(&values, 0.5 + half));
        }
        rows.push(BandRow { k, median, bands });
    }
    StrategySummary { label, rows, terminal_iters, terminal_metrics, failures }
}

/// Strategy lists of the default figures.
///
/// 1. max-proximity selection across outer block sizes (plus cyclic);
/// 2. fixed outer block, top-t inner blocks from simultaneous to single;
/// 3. fixed outer block, threshold inner blocks;
/// 4. top-t at fixed inner/outer ratios 0.3, 0.5, 0.7.
pub fn figure_strategies(figure: u8) -> Result<Vec<Strategy>> {
    use StrategyKind::*;
    let list = match figure {
        1 => vec![
            Strategy::new(Cyclic, 1),
            Strategy::new(MaxProx, 2),
            Strategy::new(MaxProx, 3),
            Strategy::new(MaxProx, 5),
            Strategy::new(MaxProx, 10),
            Strategy::new(MaxProx, 25),
        ],
        2 => vec![
            Strategy::new(Top(25), 25),
            Strategy::new(Top(15), 25),
            Strategy::new(Top(10), 25),
            Strategy::new(Top(5), 25),
            Strategy::new(Top(1), 25),
        ],
        3 => vec![
            Strategy::new(Threshold(0.0), 25),
            Strategy::new(Threshold(0.1), 25),
            Strategy::new(Threshold(0.25), 25),
            Strategy::new(Threshold(0.5), 25),
            Strategy::new(Threshold(0.75), 25),
            Strategy::new(Threshold(1.0), 25),
        ],
        4 => vec![
            Strategy::new(Top(3), 10),
            Strategy::new(Top(5), 10),
            Strategy::new(Top(7), 10),
            Strategy::new(Top(6), 20),
            Strategy::new(Top(10), 20),
            Strategy::new(Top(14), 20),
            Strategy::new(Top(15), 50),
            Strategy::new(Top(25), 50),
            Strategy::new(Top(35), 50),
        ],
        _ => return Err(Error::InvalidConfig(format!("unknown figure {figure}, expected 1-4"))),
    };
    Ok(list)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Svg,
    Both,
}

impl EmitFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "svg" => Ok(EmitFormat::Svg),
            "both" => Ok(EmitFormat::Both),
            _ => Err(Error::Parse(format!("unknown format {s:?}, expected csv|svg|both"))),
        }
    }
}

/// Write the aggregate as `<stem>.csv` / `<stem>.svg` under `dir`;
/// returns the paths written. Re-running on the same result is
/// byte-identical.
pub fn emit(
    result: &AggregateResult,
    dir: &Path,
    stem: &str,
    title: &str,
    format: EmitFormat,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, EmitFormat::Csv | EmitFormat::Both) {
        let path = dir.join(format!("{stem}.csv"));
        let mut buf = Vec::new();
        result.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    if matches!(format, EmitFormat::Svg | EmitFormat::Both) {
        let path = dir.join(format!("{stem}.svg"));
        let mut buf = Vec::new();
        crate::plot::write_svg(result, title, &mut buf)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{IterRecord, IterateTrace};

    fn plan(strategies: Vec<Strategy>, trials: usize) -> ExperimentPlan {
        let mut config = SolverConfig::default();
        config.stopping.max_iters = 300;
        ExperimentPlan { m: 20, n: 4, trials, base_seed: 100, strategies, config }
    }

    #[test]
    fn strategy_grammar() {
        assert_eq!(Strategy::parse("cyclic", 1).unwrap().kind, StrategyKind::Cyclic);
        assert_eq!(Strategy::parse("all", 5).unwrap().kind, StrategyKind::Simultaneous);
        assert_eq!(Strategy::parse("top:3", 5).unwrap().kind, StrategyKind::Top(3));
        assert_eq!(
            Strategy::parse("threshold:0.5", 5).unwrap().kind,
            StrategyKind::Threshold(0.5)
        );
        assert!(Strategy::parse("bogus", 5).is_err());
        assert_eq!(Strategy::parse("maxprox", 25).unwrap().label(), "maxprox-b25");
    }

    #[test]
    fn metric_starts_at_zero_and_tracks_decay() {
        let series = [4.0, 2.0, 4.0e-6];
        let trace = IterateTrace {
            records: series
                .iter()
                .enumerate()
                .map(|(k, &p)| IterRecord {
                    k,
                    x: None,
                    max_prox_all: p,
                    max_prox_block: p,
                    step_norm: 0.0,
                    dist_witness: 0.0,
                    block_id: 0,
                    inner: Vec::new(),
                })
                .collect(),
            status: TerminalStatus::Converged,
            final_x: Vec::new(),
        };
        let m = metric(&trace).unwrap();
        assert_eq!(m[0], 0.0);
        assert!((m[1] - (-0.30103)).abs() < 1e-5);
        assert!((m[2] - (-6.0)).abs() < 1e-12);
    }

    #[test]
    fn metric_rejects_feasible_start() {
        let trace = IterateTrace {
            records: vec![IterRecord {
                k: 0,
                x: None,
                max_prox_all: 0.0,
                max_prox_block: 0.0,
                step_norm: 0.0,
                dist_witness: 0.0,
                block_id: 0,
                inner: Vec::new(),
            }],
            status: TerminalStatus::Converged,
            final_x: Vec::new(),
        };
        assert!(metric(&trace).is_err());
    }

    #[test]
    fn percentile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
        assert!((percentile(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn single_trial_bands_collapse() {
        let p = plan(vec![Strategy::new(StrategyKind::MaxProx, 5)], 1);
        let agg = run_plan(&p).unwrap();
        let s = &agg.strategies[0];
        for row in &s.rows {
            for (lo, hi) in row.bands {
                assert_eq!(lo, row.median);
                assert_eq!(hi, row.median);
            }
        }
    }

    #[test]
    fn bands_nest_and_median_stays_inside() {
        let p = plan(
            vec![Strategy::new(StrategyKind::MaxProx, 5), Strategy::new(StrategyKind::Cyclic, 1)],
            9,
        );
        let agg = run_plan(&p).unwrap();
        for s in &agg.strategies {
            assert_eq!(s.terminal_iters.len(), 9);
            for row in &s.rows {
                for w in 0..4 {
                    let (lo_narrow, hi_narrow) = row.bands[w];
                    let (lo_wide, hi_wide) = row.bands[w + 1];
                    assert!(lo_wide <= lo_narrow && hi_narrow <= hi_wide);
                }
                let (lo50, hi50) = row.bands[4];
                assert!(lo50 <= row.median && row.median <= hi50);
            }
        }
    }

    #[test]
    fn csv_row_count_matches_aligned_lengths() {
        let p = plan(
            vec![Strategy::new(StrategyKind::MaxProx, 5), Strategy::new(StrategyKind::Cyclic, 1)],
            3,
        );
        let agg = run_plan(&p).unwrap();
        let mut buf = Vec::new();
        agg.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected: usize = agg.strategies.iter().map(|s| s.rows.len()).sum();
        assert_eq!(text.lines().count(), expected + 1);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let p = plan(vec![Strategy::new(StrategyKind::Top(3), 5)], 4);
        let a = run_plan(&p).unwrap();
        let b = run_plan(&p).unwrap();
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn figures_are_wellformed() {
        for f in 1..=4 {
            let strategies = figure_strategies(f).unwrap();
            assert!(!strategies.is_empty());
            for s in &strategies {
                s.inner().validate(s.block_size).unwrap();
            }
        }
        assert!(figure_strategies(9).is_err());
    }
}
