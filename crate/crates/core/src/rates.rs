//! Linear-rate constants and error bounds.
//!
//! For a family of cutters over a consistent intersection, the regularity
//! constants bound the proximity by the distance from below and by the
//! displacement from above, `δ·d(x, C_i) ≤ p_i(x) ≤ Δ·‖U_i x − x‖`, and
//! `κ` is the (bounded) linear regularity constant of the family,
//! `d(x, C) ≤ κ·max_i d(x, C_i)`. Together with the control parameters
//! they yield a geometric estimate `‖x^k − x^∞‖ ≤ c·q^k` and the
//! computable proximity envelope `max_i p_i(x^k) ≤ Δ·c·q^k`.
//!
//! For linear systems the proximity constants are closed-form (the extreme
//! row norms); `κ` has no closed form here and is estimated empirically by
//! sampling distance ratios, so reported envelopes built on it are
//! heuristic diagnostics, not certified bounds.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmt_real;
use crate::linalg::norm;
use crate::problem::{Matrix, ProblemInstance};
use crate::sets::{distance_oracle, SublevelSet};
use crate::solver::IterateTrace;

/// How a constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Empirical,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Empirical => "empirical",
        }
    }
}

/// Regularity constants `(δ, Δ, κ)` of a family of sets and operators.
#[derive(Clone, Copy, Debug)]
pub struct RegularityConstants {
    /// Lower proximity constant δ: `δ·d(x, C_i) ≤ p_i(x)`.
    pub delta: f64,
    /// Upper proximity constant Δ: `p_i(x) ≤ Δ·‖U_i x − x‖`.
    pub big_delta: f64,
    /// Linear regularity constant of the family, ≥ 1.
    pub kappa: f64,
    pub provenance: Provenance,
}

impl RegularityConstants {
    pub fn new(delta: f64, big_delta: f64, kappa: f64, provenance: Provenance) -> Result<Self> {
        if !(delta > 0.0 && big_delta > 0.0 && delta <= big_delta) {
            return Err(Error::InvalidConfig(format!(
                "proximity constants must satisfy 0 < δ ≤ Δ, got ({delta}, {big_delta})"
            )));
        }
        if !(kappa >= 1.0) {
            return Err(Error::InvalidConfig(format!("kappa must be ≥ 1, got {kappa}")));
        }
        Ok(Self { delta, big_delta, kappa, provenance })
    }

    /// Squared contraction ratio `(δ / (κ·Δ))²`.
    fn ratio_sq(&self) -> f64 {
        let r = self.delta / (self.kappa * self.big_delta);
        r * r
    }
}

/// Closed-form proximity constants of a linear system: the extreme row
/// norms `(min_i ‖a_i‖, max_i ‖a_i‖)`.
pub fn linear_system_constants(a: &Matrix) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (i, row) in a.rows().enumerate() {
        let nr = norm(row);
        if nr <= 0.0 {
            return Err(Error::InvalidProblem(format!("row {i} is zero")));
        }
        lo = lo.min(nr);
        hi = hi.max(nr);
    }
    Ok((lo, hi))
}

/// Rate factor of the double-layer iteration over an `s`-intermittent
/// control with weights ≥ `omega_min` and relaxation in
/// `[alpha_min, alpha_max]`:
/// `q = (1 − ω⁻(2−α⁺)(α⁻)²/(s·α⁺) · (δ/(κΔ))²)^(1/2s)`, always in [0, 1).
pub fn q_general(
    omega_min: f64,
    alpha_min: f64,
    alpha_max: f64,
    s: usize,
    constants: &RegularityConstants,
) -> Result<f64> {
    if !(omega_min > 0.0 && omega_min <= 1.0) {
        return Err(Error::InvalidConfig(format!("omega_min must lie in (0, 1], got {omega_min}")));
    }
    if !(alpha_min > 0.0 && alpha_min <= alpha_max && alpha_max < 2.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha bounds must satisfy 0 < lo ≤ hi < 2, got [{alpha_min}, {alpha_max}]"
        )));
    }
    if s == 0 {
        return Err(Error::InvalidConfig("s must be ≥ 1".into()));
    }
    let drop = omega_min * (2.0 - alpha_max) * alpha_min * alpha_min
        / (s as f64 * alpha_max)
        * constants.ratio_sq();
    let radicand = 1.0 - drop;
    debug_assert!((0.0..1.0).contains(&radicand));
    Ok(radicand.powf(1.0 / (2.0 * s as f64)))
}

/// Method whose rate factor has a closed form under the cyclic outer
/// control with unit relaxation and uniform weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Cyclic,
    Simultaneous,
    Active,
    MaxProx,
    TopT,
    Threshold,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cyclic => "cyclic",
            Method::Simultaneous => "simultaneous",
            Method::Active => "active",
            Method::MaxProx => "maxprox",
            Method::TopT => "top_t",
            Method::Threshold => "threshold",
        }
    }
}

/// Per-method rate factor for `m` constraints in cyclic blocks of size
/// `b` (`t` is the inner block size for `TopT`).
///
/// When `b` does not divide `m`, the number of blocks is `s = ⌈m/b⌉` and
/// the block size entering the formula is conservatively replaced by the
/// smallest block, which only loosens the bound.
pub fn q_method(
    method: Method,
    m: usize,
    b: usize,
    t: Option<usize>,
    constants: &RegularityConstants,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be ≥ 1".into()));
    }
    if b == 0 || b > m {
        return Err(Error::InvalidConfig(format!("block size must lie in 1..={m}, got {b}")));
    }
    let x2 = constants.ratio_sq();
    let mf = m as f64;
    let (s, b_eff) = if m % b == 0 { (m / b, b) } else { (m / b + 1, m % b) };
    let root = |radicand: f64, s: usize| radicand.powf(1.0 / (2.0 * s as f64));
    let q = match method {
        Method::Cyclic => root(1.0 - x2 / mf, m),
        Method::Simultaneous | Method::Active | Method::Threshold => root(1.0 - x2 / mf, s),
        Method::MaxProx => root(1.0 - b_eff as f64 / mf * x2, s),
        Method::TopT => {
            let t = t.ok_or_else(|| {
                Error::InvalidConfig("top_t needs the inner block size t".into())
            })?;
            if t == 0 || t > b {
                return Err(Error::InvalidConfig(format!(
                    "t must lie in 1..={b}, got {t}"
                )));
            }
            root(1.0 - b_eff as f64 / (mf * t as f64) * x2, s)
        }
    };
    Ok(q)
}

/// Rate report for one method configuration.
#[derive(Clone, Debug)]
pub struct RateReport {
    pub method: Method,
    pub m: usize,
    pub b: usize,
    pub t: Option<usize>,
    /// Number of blocks of the cyclic outer control.
    pub s: usize,
    pub constants: RegularityConstants,
    /// Geometric rate factor, in [0, 1).
    pub q: f64,
    /// Prefactor `c = 2·d(x⁰, C)/q^(s−1)` of the distance estimate.
    pub c: f64,
    /// Distance from the start point to the intersection used in `c`.
    pub d0: f64,
    /// Set when `d0` is the upper bound `‖x⁰ − witness‖` because the
    /// distance oracle exceeded its budget.
    pub d0_upper_bound: bool,
    /// Least-squares rate fitted from an actual trace, when available.
    pub q_hat: Option<f64>,
}

impl RateReport {
    pub fn new(
        method: Method,
        m: usize,
        b: usize,
        t: Option<usize>,
        constants: RegularityConstants,
        d0: f64,
        d0_upper_bound: bool,
    ) -> Result<Self> {
        if !(d0 > 0.0) {
            return Err(Error::InvalidConfig("d0 must be positive".into()));
        }
        let q = q_method(method, m, b, t, &constants)?;
        let s = match method {
            Method::Cyclic => m,
            _ => m.div_ceil(b),
        };
        let c = 2.0 * d0 / q.powi(s as i32 - 1);
        Ok(Self { method, m, b, t, s, constants, q, c, d0, d0_upper_bound, q_hat: None })
    }

    pub fn with_empirical_rate(mut self, q_hat: f64) -> Self {
        self.q_hat = Some(q_hat);
        self
    }

    /// Predicted proximity envelope `Δ·c·q^k`.
    pub fn envelope(&self, k: usize) -> f64 {
        self.constants.big_delta * self.c * self.q.powi(k as i32)
    }

    pub fn csv_header() -> &'static str {
        "method,m,b,t,s,delta_r,Delta_r,kappa,kappa_provenance,q_r,c_r,q_hat_empirical"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method.as_str(),
            self.m,
            self.b,
            self.t.map_or(String::new(), |t| t.to_string()),
            self.s,
            fmt_real(self.constants.delta),
            fmt_real(self.constants.big_delta),
            fmt_real(self.constants.kappa),
            self.constants.provenance.as_str(),
            fmt_real(self.q),
            fmt_real(self.c),
            self.q_hat.map_or(String::new(), fmt_real),
        )
    }
}

/// The two sides of the proximity error bound at iteration `k`: the
/// distance bound `‖x^k − x^∞‖ ≤ 2κ/δ · max_i p_i(x^k)` implied by an
/// observed proximity, and the predicted envelope `Δ·c·q^k`.
pub fn error_bound(
    report: &RateReport,
    constants: &RegularityConstants,
    k: usize,
    observed_max_prox: f64,
) -> (f64, f64) {
    let implied = 2.0 * constants.kappa / constants.delta * observed_max_prox;
    (implied, report.envelope(k))
}

/// Empirical lower estimate of the linear regularity constant κ of an
/// inequality system: the max of `d(x, C)/max_i d(x, C_i)` over seeded
/// samples drawn from the ball around the witness with radius
/// `‖x⁰ − witness‖`. Nondecreasing in `sample_count` for a fixed seed.
pub fn estimate_kappa(
    problem: &ProblemInstance,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    let cutters = problem.cutters()?;
    let radius = crate::linalg::dist(problem.x0(), problem.witness());
    let n = problem.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..sample_count {
        let x = sample_in_ball(&mut rng, problem.witness(), radius, n);
        let dmax = problem.max_row_distance(&x);
        if dmax <= 0.0 {
            continue;
        }
        let dc = distance_oracle(&cutters, &x)?;
        let ratio = dc / dmax;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    match best {
        Some(b) => Ok(b.max(1.0)),
        None => Err(Error::InsufficientData(
            "all samples were feasible; resample with a larger radius".into(),
        )),
    }
}

fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64, n: usize) -> Vec<f64> {
    // rejection from the cube keeps the stream prefix-stable
    loop {
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        if norm(&d) <= 1.0 {
            return center.iter().zip(&d).map(|(&c, &di)| c + radius * di).collect();
        }
    }
}

/// Least-squares geometric rate fitted to the tail of the max-proximity
/// series: `exp(slope)` of `ln p` against `k` over the last half of the
/// positive-proximity records. Needs at least 10 such records.
pub fn fit_empirical_rate(trace: &IterateTrace) -> Result<f64> {
    let series = trace.max_prox_series();
    let positive: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .take_while(|&(_, &p)| p > 0.0)
        .map(|(k, &p)| (k as f64, p.ln()))
        .collect();
    if positive.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 10 records with positive proximity, got {}",
            positive.len()
        )));
    }
    let tail = &positive[positive.len() / 2..];
    let n = tail.len() as f64;
    let mean_k = tail.iter().map(|&(k, _)| k).sum::<f64>() / n;
    let mean_y = tail.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(k, y) in tail {
        sxy += (k - mean_k) * (y - mean_y);
        sxx += (k - mean_k) * (k - mean_k);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate iteration range".into()));
    }
    Ok((sxy / sxx).exp())
}

/// Empirical lower estimate of the Slater-type constant of a sublevel set:
/// `min f₊(x)/d(x, S(f,0))` over the infeasible samples, with the exact
/// distance supplied by the caller.
pub fn estimate_delta_sublevel(
    f: &SublevelSet,
    distance: impl Fn(&[f64]) -> f64,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let mut best: Option<f64> = None;
    for x in samples {
        let v = f.value(x);
        if v <= 0.0 {
            continue;
        }
        let d = distance(x);
        if d <= 0.0 {
            continue;
        }
        let ratio = v / d;
        best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
    }
    best.ok_or_else(|| Error::InsufficientData("no infeasible sample".into()))
}
