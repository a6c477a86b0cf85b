//! Outer block schedules, inner selection strategies and the
//! lopping/flagging scheduler.
//!
//! The outer control offers a block `J_k` of constraint indices at step
//! `k`; the inner control picks the subset `I_k ⊆ J_k` actually used,
//! ranked by proximity. Ties always break toward the lowest constraint
//! index and selections are returned in ascending index order, so a run is
//! reproducible bit for bit.

use crate::error::{Error, Result};

/// Cyclic list of index blocks over `I = {0, .., m−1}`.
///
/// Blocks may overlap in general; [`OuterSchedule::contiguous`] builds the
/// partition into `⌈m/b⌉` contiguous blocks (the last one may be smaller).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OuterSchedule {
    blocks: Vec<Vec<usize>>,
    m: usize,
}

impl OuterSchedule {
    pub fn new(blocks: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidControl("m must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidControl("schedule needs at least one block".into()));
        }
        for (j, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::InvalidControl(format!("block {j} is empty")));
            }
            if let Some(&i) = b.iter().find(|&&i| i >= m) {
                return Err(Error::InvalidControl(format!(
                    "block {j} contains index {i} out of range 0..{m}"
                )));
            }
        }
        Ok(Self { blocks, m })
    }

    /// Partition into contiguous blocks of size `block_size`; the last
    /// block holds the remainder.
    pub fn contiguous(m: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 || block_size > m {
            return Err(Error::InvalidControl(format!(
                "block size must lie in 1..={m}, got {block_size}"
            )));
        }
        let blocks = (0..m)
            .step_by(block_size)
            .map(|start| (start..(start + block_size).min(m)).collect())
            .collect();
        Self::new(blocks, m)
    }

    /// Single block `J = I` (s = 1).
    pub fn single_block(m: usize) -> Result<Self> {
        Self::contiguous(m, m)
    }

    /// One singleton block per index (the cyclic control, s = m).
    pub fn singletons(m: usize) -> Result<Self> {
        Self::contiguous(m, 1)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Block offered at iteration `k` under the cyclic rule.
    pub fn block_at(&self, k: usize) -> &[usize] {
        &self.blocks[k % self.blocks.len()]
    }

    pub fn block_index_at(&self, k: usize) -> usize {
        k % self.blocks.len()
    }

    pub fn min_block_len(&self) -> usize {
        self.blocks.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_block_len(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Block offered at iteration `k`.
pub fn outer_block<'a>(sched: &'a OuterSchedule, k: usize) -> &'a [usize] {
    sched.block_at(k)
}

/// Smallest `s` such that every window of `s` consecutive blocks (cyclic)
/// covers all of `I`. Errors when the schedule never covers `I`.
pub fn verify_intermittent(sched: &OuterSchedule) -> Result<usize> {
    let nb = sched.num_blocks();
    let m = sched.m();
    let mut union = vec![false; m];
    for b in sched.blocks() {
        for &i in b {
            union[i] = true;
        }
    }
    if union.iter().any(|&c| !c) {
        return Err(Error::InvalidControl(
            "schedule never covers all constraint indices".into(),
        ));
    }
    let mut counts = vec![0usize; m];
    'outer: for s in 1..=nb {
        for start in 0..nb {
            counts.iter_mut().for_each(|c| *c = 0);
            for w in 0..s {
                for &i in &sched.blocks()[(start + w) % nb] {
                    counts[i] += 1;
                }
            }
            if counts.iter().any(|&c| c == 0) {
                continue 'outer;
            }
        }
        return Ok(s);
    }
    unreachable!("the full window covers I")
}

/// Inner selection rule applied to the offered block.
#[derive(Clone, Debug, PartialEq)]
pub enum InnerStrategy {
    /// Use the whole block (simultaneous step).
    All,
    /// Use the violated constraints; may select nothing.
    Active,
    /// Use the single most violated constraint.
    MaxProx,
    /// Use the `t` constraints with the largest proximities.
    TopT(usize),
    /// Use every constraint with proximity ≥ `t · max` over the block,
    /// `t ∈ [0, 1]`.
    Threshold(f64),
}

impl InnerStrategy {
    pub fn validate(&self, max_block_len: usize) -> Result<()> {
        match *self {
            InnerStrategy::TopT(t) if t == 0 || t > max_block_len => Err(Error::InvalidControl(
                format!("top-t size must lie in 1..={max_block_len}, got {t}"),
            )),
            InnerStrategy::Threshold(t) if !(0.0..=1.0).contains(&t) => Err(
                Error::InvalidControl(format!("threshold must lie in [0, 1], got {t}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Select `I_k ⊆ J_k`. `prox[i]` is the proximity of constraint
/// `block[i]`. The result is sorted ascending; ties break toward the
/// lowest constraint index. Threshold comparison is an exact `≥`.
pub fn inner_select(
    strategy: &InnerStrategy,
    block: &[usize],
    prox: &[f64],
) -> Result<Vec<usize>> {
    if block.is_empty() {
        return Err(Error::InvalidControl("inner selection over an empty block".into()));
    }
    debug_assert_eq!(block.len(), prox.len());
    let mut selected = match *strategy {
        InnerStrategy::All => block.to_vec(),
        InnerStrategy::Active => block
            .iter()
            .zip(prox)
            .filter(|&(_, &p)| p > 0.0)
            .map(|(&i, _)| i)
            .collect(),
        InnerStrategy::MaxProx => {
            vec![argmax_lowest(block, prox)]
        }
        InnerStrategy::TopT(t) => {
            let t = t.min(block.len());
            let mut order: Vec<usize> = (0..block.len()).collect();
            order.sort_by(|&a, &b| {
                prox[b].partial_cmp(&prox[a]).unwrap().then(block[a].cmp(&block[b]))
            });
            order.truncate(t);
            order.into_iter().map(|p| block[p]).collect()
        }
        InnerStrategy::Threshold(t) => {
            let max = prox.iter().cloned().fold(0.0f64, f64::max);
            block
                .iter()
                .zip(prox)
                .filter(|&(_, &p)| p >= t * max)
                .map(|(&i, _)| i)
                .collect()
        }
    };
    selected.sort_unstable();
    Ok(selected)
}

fn argmax_lowest(block: &[usize], prox: &[f64]) -> usize {
    let mut best_p = f64::NEG_INFINITY;
    let mut best_i = usize::MAX;
    for (&i, &p) in block.iter().zip(prox) {
        if p > best_p || (p == best_p && i < best_i) {
            best_p = p;
            best_i = i;
        }
    }
    best_i
}

/// Whether the selection meets the argmax compatibility condition:
/// `inner ∩ Argmax_{j ∈ block} prox(j) ≠ ∅`.
pub fn verify_argmax_condition(inner: &[usize], block: &[usize], prox: &[f64]) -> bool {
    let max = prox.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    block
        .iter()
        .zip(prox)
        .filter(|&(_, &p)| p == max)
        .any(|(i, _)| inner.contains(i))
}

/// Bookkeeping for the lopping/flagging scheduler.
///
/// A block found satisfied (its max proximity ≤ ε) is skipped and flagged
/// unavailable for its next `flag_horizon` cyclic turns; the effective
/// schedule stays `(N·s)`-intermittent. `consecutive_skips` reaching the
/// number of blocks certifies `max_i p_i ≤ ε` and stops the run.
#[derive(Clone, Debug)]
pub struct FlagState {
    skips_remaining: Vec<usize>,
    last_used: usize,
    consecutive_skips: usize,
    flag_horizon: usize,
    epsilon: f64,
}

/// Outcome of one scheduler step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoppingStep {
    /// Index of the block offered this iteration.
    pub block: usize,
    /// Whether the solver should compute an update over the block.
    pub compute: bool,
    /// Certified stop: every block was seen satisfied in a row.
    pub stop: bool,
}

impl FlagState {
    pub fn new(num_blocks: usize, flag_horizon: usize, epsilon: f64) -> Result<Self> {
        if num_blocks == 0 {
            return Err(Error::InvalidControl("flag state needs at least one block".into()));
        }
        if flag_horizon == 0 {
            return Err(Error::InvalidControl("flag horizon must be ≥ 1".into()));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidControl("epsilon must be ≥ 0".into()));
        }
        Ok(Self {
            skips_remaining: vec![0; num_blocks],
            last_used: num_blocks - 1,
            consecutive_skips: 0,
            flag_horizon,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn consecutive_skips(&self) -> usize {
        self.consecutive_skips
    }

    pub fn available(&self, block: usize) -> bool {
        self.skips_remaining[block] == 0
    }

    /// Next available block after the last used one, without mutating the
    /// state. Used for terminal trace records.
    pub fn peek_next(&self) -> usize {
        let nb = self.skips_remaining.len();
        let mut counters = self.skips_remaining.clone();
        let mut pos = self.last_used;
        loop {
            pos = (pos + 1) % nb;
            if counters[pos] == 0 {
                return pos;
            }
            counters[pos] -= 1;
        }
    }

    /// Advance to the next available block, decrementing the skip counter
    /// of every flagged block passed over (each pass is one missed turn).
    fn advance(&mut self) -> usize {
        let nb = self.skips_remaining.len();
        // A full scan releases every flag, so the loop terminates.
        let bound = nb * (self.flag_horizon + 2);
        for _ in 0..bound {
            self.last_used = (self.last_used + 1) % nb;
            if self.skips_remaining[self.last_used] == 0 {
                return self.last_used;
            }
            self.skips_remaining[self.last_used] -= 1;
        }
        unreachable!("no available block: flag counters failed to decrement");
    }
}

/// One step of the double-layer control with lopping and flagging.
///
/// Advances to the next available block, evaluates its max proximity via
/// `block_max_prox`, and either signals a compute step (resetting the skip
/// counter) or skips the block, flagging its next `flag_horizon` turns as
/// unavailable. `stop` is set once every block has been skipped
/// consecutively, which certifies `max_i p_i(x) ≤ ε` for the current
/// iterate.
pub fn next_block_lopping(
    state: &mut FlagState,
    sched: &OuterSchedule,
    block_max_prox: impl FnOnce(&[usize]) -> f64,
) -> LoppingStep {
    debug_assert_eq!(state.skips_remaining.len(), sched.num_blocks());
    let t = state.advance();
    let p = block_max_prox(&sched.blocks()[t]);
    let compute = p > state.epsilon;
    if compute {
        state.consecutive_skips = 0;
    } else {
        state.consecutive_skips += 1;
        state.skips_remaining[t] = state.flag_horizon;
    }
    let stop = state.consecutive_skips == sched.num_blocks();
    LoppingStep { block: t, compute, stop }
}
