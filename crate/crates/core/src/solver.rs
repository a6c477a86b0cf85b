//! Double-layer fixed point iteration with per-iteration diagnostics.
//!
//! One step aggregates the selected cutters into
//! `x⁺ = x + α(Σ_{i∈I_k} ω_i U_i x − x)` where the outer control offers the
//! block `J_k` and the inner strategy picks `I_k ⊆ J_k` by proximity. Every
//! run records the max-proximity metric, step norms and the distance to the
//! feasibility witness, which is nonincreasing for any feasible point
//! (Fejér monotonicity) — [`fejer_check`] verifies that from a stored
//! trace.
//!
//! Reproducibility contract: the weighted aggregate is accumulated in one
//! pass over `I_k` in ascending index order, seeded from the first term;
//! with `α = 1` the aggregate is used directly as the next iterate. Two
//! runs over the same data therefore agree bit for bit, and degenerate
//! configurations (singleton blocks, whole-block selections) reproduce the
//! classical cyclic and simultaneous methods exactly.

use std::io::Write as IoWrite;
use std::sync::Arc;

use crate::controls::{
    inner_select, next_block_lopping, FlagState, InnerStrategy, OuterSchedule,
};
use crate::error::{Error, Result};
use crate::fmt_real;
use crate::linalg::{dist, norm};
use crate::problem::ProblemInstance;
use crate::sets::Cutter;

/// Iterates are declared divergent past this norm; the theory forbids
/// divergence, so tripping the guard indicates an implementation bug or a
/// non-cutter operator.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Relaxation parameter policy, constant or per-iteration within fixed
/// bounds `[lo, hi] ⊂ (0, 2)`.
#[derive(Clone)]
pub enum AlphaPolicy {
    Constant(f64),
    PerIteration {
        f: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
        lo: f64,
        hi: f64,
    },
}

impl AlphaPolicy {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && lo <= hi && hi < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha bounds must satisfy 0 < lo ≤ hi < 2, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            AlphaPolicy::Constant(a) => (*a, *a),
            AlphaPolicy::PerIteration { lo, hi, .. } => (*lo, *hi),
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        match self {
            AlphaPolicy::Constant(a) => *a,
            AlphaPolicy::PerIteration { f, lo, hi } => f(k).clamp(*lo, *hi),
        }
    }
}

/// Weights over the selected inner block; must be positive and sum to 1.
#[derive(Clone)]
pub enum WeightPolicy {
    /// `ω_i = 1/|I_k|`.
    Uniform,
    /// Caller-supplied weights as a pure function of `(k, I_k)`.
    Custom(Arc<dyn Fn(usize, &[usize]) -> Vec<f64> + Send + Sync>),
}

impl WeightPolicy {
    fn weights(&self, k: usize, selected: &[usize]) -> Result<Vec<f64>> {
        let w = match self {
            WeightPolicy::Uniform => {
                vec![1.0 / selected.len() as f64; selected.len()]
            }
            WeightPolicy::Custom(f) => f(k, selected),
        };
        if w.len() != selected.len() {
            return Err(Error::InvalidConfig("weight count does not match |I_k|".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || w.iter().any(|&wi| wi <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weights must be positive and sum to 1 (sum = {sum})"
            )));
        }
        Ok(w)
    }
}

/// Stopping rule: periodic global proximity check plus an iteration cap.
#[derive(Clone, Copy, Debug)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub check_every: usize,
    pub max_iters: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { epsilon: 1e-6, check_every: 100, max_iters: 5000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceVerbosity {
    /// Record per-iteration metrics only.
    Metrics,
    /// Also keep every iterate (needed by [`fejer_check`] and bitwise
    /// trace comparisons).
    Iterates,
}

#[derive(Clone)]
pub struct SolverConfig {
    pub alpha: AlphaPolicy,
    pub weights: WeightPolicy,
    pub stopping: StoppingRule,
    pub verbosity: TraceVerbosity,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaPolicy::Constant(1.0),
            weights: WeightPolicy::Uniform,
            stopping: StoppingRule::default(),
            verbosity: TraceVerbosity::Metrics,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        if self.stopping.check_every == 0 {
            return Err(Error::InvalidConfig("check_every must be ≥ 1".into()));
        }
        if self.stopping.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be ≥ 1".into()));
        }
        if !(self.stopping.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalStatus {
    /// Periodic global check passed: `max_i p_i ≤ ε`.
    Converged,
    MaxIters,
    /// Lopping certificate: every block skipped in a row.
    LoppingCertified,
    NumericalFailure,
}

impl TerminalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIters => "max-iters",
            TerminalStatus::LoppingCertified => "lopping-certified",
            TerminalStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// State before the step `k → k+1` plus the step's outcome. The terminal
/// record of a run has `step_norm = 0` and an empty selection.
#[derive(Clone, Debug)]
pub struct IterRecord {
    pub k: usize,
    /// Present under [`TraceVerbosity::Iterates`].
    pub x: Option<Vec<f64>>,
    pub max_prox_all: f64,
    pub max_prox_block: f64,
    pub step_norm: f64,
    pub dist_witness: f64,
    pub block_id: usize,
    pub inner: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    pub status: TerminalStatus,
    pub final_x: Vec<f64>,
}

impl IterateTrace {
    /// Iteration index of the terminal record.
    pub fn terminal_iteration(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn max_prox_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.max_prox_all).collect()
    }

    pub fn dist_witness_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dist_witness).collect()
    }

    pub fn final_max_prox(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.max_prox_all)
    }

    /// One CSV row per iteration; reals carry 17 significant digits.
    pub fn write_csv(&self, w: &mut impl IoWrite) -> std::io::Result<()> {
        writeln!(w, "k,max_prox_all,max_prox_block,step_norm,dist_witness,block_id,inner_size")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt_real(r.max_prox_all),
                fmt_real(r.max_prox_block),
                fmt_real(r.step_norm),
                fmt_real(r.dist_witness),
                r.block_id,
                r.inner.len()
            )?;
        }
        Ok(())
    }
}

/// Weighted aggregate of the selected cutters, accumulated in ascending
/// index order, then relaxed toward it. `selected` must be nonempty.
fn aggregate_step(
    x: &[f64],
    cutters: &[Box<dyn Cutter>],
    selected: &[usize],
    weights: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    let mut y = cutters[selected[0]].apply(x)?;
    let w0 = weights[0];
    for v in y.iter_mut() {
        *v *= w0;
    }
    for (&i, &w) in selected.iter().zip(weights).skip(1) {
        let u = cutters[i].apply(x)?;
        for (yj, uj) in y.iter_mut().zip(&u) {
            *yj += w * uj;
        }
    }
    if alpha == 1.0 {
        Ok(y)
    } else {
        Ok(x.iter().zip(&y).map(|(&xj, &yj)| xj + alpha * (yj - xj)).collect())
    }
}

/// One double-layer step over the offered block. Returns the next iterate
/// and the selected inner block `I_k` (ascending). An empty selection
/// (Active strategy with no violated constraint) leaves `x` unchanged.
pub fn step(
    x: &[f64],
    cutters: &[Box<dyn Cutter>],
    block: &[usize],
    strategy: &InnerStrategy,
    alpha: f64,
    weights: &WeightPolicy,
    k: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if let Some(&i) = block.iter().find(|&&i| i >= cutters.len()) {
        return Err(Error::Dimension(format!("block index {i} out of range")));
    }
    let prox: Vec<f64> = block.iter().map(|&i| cutters[i].proximity(x)).collect();
    let selected = inner_select(strategy, block, &prox)?;
    if selected.is_empty() {
        return Ok((x.to_vec(), selected));
    }
    let w = weights.weights(k, &selected)?;
    let next = aggregate_step(x, cutters, &selected, &w, alpha)?;
    Ok((next, selected))
}

struct RunState<'a> {
    cutters: &'a [Box<dyn Cutter>],
    witness: &'a [f64],
    keep_iterates: bool,
    records: Vec<IterRecord>,
}

impl<'a> RunState<'a> {
    fn all_prox(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let prox: Vec<f64> = self.cutters.iter().map(|c| c.proximity(x)).collect();
        // f64::max would swallow NaN; propagate it so the guard trips.
        let mut max = 0.0f64;
        for &p in &prox {
            if !p.is_finite() {
                max = f64::NAN;
                break;
            }
            if p > max {
                max = p;
            }
        }
        (prox, max)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        k: usize,
        x: &[f64],
        max_prox_all: f64,
        max_prox_block: f64,
        step_norm: f64,
        block_id: usize,
        inner: Vec<usize>,
    ) {
        self.records.push(IterRecord {
            k,
            x: self.keep_iterates.then(|| x.to_vec()),
            max_prox_all,
            max_prox_block,
            step_norm,
            dist_witness: dist(x, self.witness),
            block_id,
            inner,
        });
    }

    fn numerical_ok(&self, x: &[f64], max_prox_all: f64) -> bool {
        max_prox_all.is_finite() && norm(x) <= DIVERGENCE_GUARD
    }
}

fn max_over(prox_all: &[f64], block: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for &i in block {
        if prox_all[i] > best {
            best = prox_all[i];
        }
    }
    best
}

/// Run the double-layer iteration from `x0` with the cyclic outer control.
///
/// The global stopping check `max_i p_i ≤ ε` runs at every iteration index
/// divisible by `check_every` (including `k = 0`); the metric is still
/// recorded at every iteration.
pub fn run_from(
    x0: &[f64],
    witness: &[f64],
    cutters: &[Box<dyn Cutter>],
    sched: &OuterSchedule,
    strategy: &InnerStrategy,
    config: &SolverConfig,
) -> Result<IterateTrace> {
    config.validate()?;
    strategy.validate(sched.max_block_len())?;
    if sched.m() != cutters.len() {
        return Err(Error::Dimension(format!(
            "schedule covers {} constraints, {} cutters supplied",
            sched.m(),
            cutters.len()
        )));
    }
    let stopping = config.stopping;
    let mut state = RunState {
        cutters,
        witness,
        keep_iterates: config.verbosity == TraceVerbosity::Iterates,
        records: Vec::new(),
    };
    let mut x = x0.to_vec();
    let status = loop {
        let k = state.records.len();
        let (prox_all, max_prox_all) = state.all_prox(&x);
        let block_id = sched.block_index_at(k);
        let block = sched.block_at(k);
        let max_prox_block = max_over(&prox_all, block);

        if !state.numerical_ok(&x, max_prox_all) {
            state.push(k, &x, max_prox_all, max_prox_block, 0.0, block_id, Vec::new());
            break TerminalStatus::NumericalFailure;
        }
        if k % stopping.check_every == 0 && max_prox_all <= stopping.epsilon {
            state.push(k, &x, max_prox_all, max_prox_block, 0.0, block_id, Vec::new());
            break TerminalStatus::Converged;
        }
        if k == stopping.max_iters {
            state.push(k, &x, max_prox_all, max_prox_block, 0.0, block_id, Vec::new());
            break TerminalStatus::MaxIters;
        }

        let block_prox: Vec<f64> = block.iter().map(|&i| prox_all[i]).collect();
        let selected = inner_select(strategy, block, &block_prox)?;
        let next = if selected.is_empty() {
            x.clone()
        } else {
            let w = config.weights.weights(k, &selected)?;
            aggregate_step(&x, cutters, &selected, &w, config.alpha.at(k))?
        };
        let step_norm = dist(&next, &x);
        state.push(k, &x, max_prox_all, max_prox_block, step_norm, block_id, selected);
        x = next;
    };
    Ok(IterateTrace { records: state.records, status, final_x: x })
}

/// [`run_from`] with start point and witness taken from the problem.
pub fn run(
    problem: &ProblemInstance,
    cutters: &[Box<dyn Cutter>],
    sched: &OuterSchedule,
    strategy: &InnerStrategy,
    config: &SolverConfig,
) -> Result<IterateTrace> {
    run_from(problem.x0(), problem.witness(), cutters, sched, strategy, config)
}

/// Run with lopping and flagging.
///
/// Satisfied blocks (max proximity ≤ ε) are skipped and flagged
/// unavailable for their next `flag_horizon` turns; one full round of
/// consecutive skips stops the run with status `LoppingCertified`, which
/// guarantees `max_i p_i(x) ≤ ε` at the final iterate. There is no
/// periodic global check: with ε = 0 the run terminates only at
/// `max_iters` (or on exact satisfaction), matching the plain cyclic run
/// trajectory bit for bit.
pub fn run_lopping_from(
    x0: &[f64],
    witness: &[f64],
    cutters: &[Box<dyn Cutter>],
    sched: &OuterSchedule,
    strategy: &InnerStrategy,
    config: &SolverConfig,
    flag_horizon: usize,
) -> Result<IterateTrace> {
    config.validate()?;
    strategy.validate(sched.max_block_len())?;
    if sched.m() != cutters.len() {
        return Err(Error::Dimension(format!(
            "schedule covers {} constraints, {} cutters supplied",
            sched.m(),
            cutters.len()
        )));
    }
    let stopping = config.stopping;
    let mut flags = FlagState::new(sched.num_blocks(), flag_horizon, stopping.epsilon)?;
    let mut state = RunState {
        cutters,
        witness,
        keep_iterates: config.verbosity == TraceVerbosity::Iterates,
        records: Vec::new(),
    };
    let mut x = x0.to_vec();
    let status = loop {
        let k = state.records.len();
        let (prox_all, max_prox_all) = state.all_prox(&x);

        if !state.numerical_ok(&x, max_prox_all) {
            let b = flags.peek_next();
            let mp = max_over(&prox_all, &sched.blocks()[b]);
            state.push(k, &x, max_prox_all, mp, 0.0, b, Vec::new());
            break TerminalStatus::NumericalFailure;
        }
        if k == stopping.max_iters {
            let b = flags.peek_next();
            let mp = max_over(&prox_all, &sched.blocks()[b]);
            state.push(k, &x, max_prox_all, mp, 0.0, b, Vec::new());
            break TerminalStatus::MaxIters;
        }

        let decision =
            next_block_lopping(&mut flags, sched, |b| max_over(&prox_all, b));
        let block = &sched.blocks()[decision.block];
        let max_prox_block = max_over(&prox_all, block);

        if decision.compute {
            let block_prox: Vec<f64> = block.iter().map(|&i| prox_all[i]).collect();
            let selected = inner_select(strategy, block, &block_prox)?;
            let next = if selected.is_empty() {
                x.clone()
            } else {
                let w = config.weights.weights(k, &selected)?;
                aggregate_step(&x, cutters, &selected, &w, config.alpha.at(k))?
            };
            let step_norm = dist(&next, &x);
            state.push(k, &x, max_prox_all, max_prox_block, step_norm, decision.block, selected);
            x = next;
        } else {
            state.push(k, &x, max_prox_all, max_prox_block, 0.0, decision.block, Vec::new());
            if decision.stop {
                let k = state.records.len();
                let (prox_all, max_prox_all) = state.all_prox(&x);
                let b = flags.peek_next();
                let mp = max_over(&prox_all, &sched.blocks()[b]);
                state.push(k, &x, max_prox_all, mp, 0.0, b, Vec::new());
                break TerminalStatus::LoppingCertified;
            }
        }
    };
    Ok(IterateTrace { records: state.records, status, final_x: x })
}

/// [`run_lopping_from`] with start point and witness from the problem.
pub fn run_lopping(
    problem: &ProblemInstance,
    cutters: &[Box<dyn Cutter>],
    sched: &OuterSchedule,
    strategy: &InnerStrategy,
    config: &SolverConfig,
    flag_horizon: usize,
) -> Result<IterateTrace> {
    run_lopping_from(
        problem.x0(),
        problem.witness(),
        cutters,
        sched,
        strategy,
        config,
        flag_horizon,
    )
}

/// Worst Fejér violation `max_k (‖x^{k+1} − z‖ − ‖x^k − z‖)` of a stored
/// trace against a feasible point `z`. A correct run stays ≤ 1e-10.
pub fn fejer_check(
    trace: &IterateTrace,
    cutters: &[Box<dyn Cutter>],
    z: &[f64],
) -> Result<f64> {
    for (i, c) in cutters.iter().enumerate() {
        if !c.is_member(z) {
            return Err(Error::InvalidWitness(format!(
                "z violates constraint {i}: proximity {}",
                c.proximity(z)
            )));
        }
    }
    let mut worst = 0.0f64;
    let mut prev: Option<f64> = None;
    for r in &trace.records {
        let x = r.x.as_ref().ok_or_else(|| {
            Error::InsufficientData("fejer_check needs a trace with stored iterates".into())
        })?;
        let d = dist(x, z);
        if let Some(p) = prev {
            worst = worst.max(d - p);
        }
        prev = Some(d);
    }
    Ok(worst)
}
