//! Convex sets packaged with their cutter operators and proximity functions.
//!
//! Every set type here exposes the same contract through the [`Cutter`]
//! trait: an operator `U` with `Fix U = C`, and a proximity `p ≥ 0` that
//! vanishes exactly on `C`. The operator satisfies the cutter inequality
//! `⟨x − Ux, z − Ux⟩ ≤ 0` for every `z ∈ C`, which is equivalent to being
//! 1-strongly quasi-nonexpansive.
//!
//! Concrete types: [`HalfSpace`] and [`Hyperplane`] (rows of a linear
//! system), [`Ball`], and [`SublevelSet`] of a caller-supplied convex
//! functional whose operator is the subgradient projection. [`Relaxed`]
//! interpolates/extrapolates any cutter and [`AveragedCutter`] converts an
//! averaged operator oracle into a cutter with the same fixed points.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm, norm_sq};

/// A point of R^n.
pub type Point = Vec<f64>;

/// Default absolute tolerance used by `is_member` (proximity-zero tests).
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-12;

/// Iteration budget of [`distance_oracle`].
pub const ORACLE_MAX_ITERS: usize = 1_000_000;

/// Successive-iterate stopping threshold of [`distance_oracle`].
pub const ORACLE_STEP_TOL: f64 = 1e-14;

/// A closed convex set `C = Fix U = p⁻¹(0)` given by its cutter operator
/// `U` and proximity function `p`.
///
/// Implementations are immutable and safe to share across threads.
pub trait Cutter: Send + Sync {
    /// Apply the operator `U` to `x`.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Constraint violation measure; zero exactly on the set.
    fn proximity(&self, x: &[f64]) -> f64;

    /// Absolute tolerance for membership tests.
    fn tolerance(&self) -> f64 {
        DEFAULT_MEMBERSHIP_TOL
    }

    fn is_member(&self, x: &[f64]) -> bool {
        self.proximity(x) <= self.tolerance()
    }
}

/// Half-space `{x : ⟨a, x⟩ ≤ b}` with metric projection as its cutter and
/// the positive residual `(⟨a,x⟩ − b)₊` as its proximity.
#[derive(Clone, Debug)]
pub struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
    tol: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if norm_sq(&normal) <= 0.0 || !crate::linalg::all_finite(&normal) {
            return Err(Error::InvalidSet("half-space normal must be nonzero".into()));
        }
        Ok(Self { normal, offset, tol: DEFAULT_MEMBERSHIP_TOL })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed residual `⟨a, x⟩ − b`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    /// Exact Euclidean distance to the half-space.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.residual(x).max(0.0) / norm(&self.normal)
    }
}

impl Cutter for HalfSpace {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        project_halfspace(self, x)
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.normal.len(), "point/normal dimension mismatch");
        self.residual(x).max(0.0)
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Hyperplane `{x : ⟨a, x⟩ = b}`; proximity is the absolute residual.
#[derive(Clone, Debug)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
    tol: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if norm_sq(&normal) <= 0.0 || !crate::linalg::all_finite(&normal) {
            return Err(Error::InvalidSet("hyperplane normal must be nonzero".into()));
        }
        Ok(Self { normal, offset, tol: DEFAULT_MEMBERSHIP_TOL })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.residual(x).abs() / norm(&self.normal)
    }
}

impl Cutter for Hyperplane {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.normal.len() {
            return Err(Error::Dimension(format!(
                "point has dimension {}, hyperplane {}",
                x.len(),
                self.normal.len()
            )));
        }
        let scale = self.residual(x) / norm_sq(&self.normal);
        Ok(x.iter().zip(&self.normal).map(|(&xi, &ai)| xi - scale * ai).collect())
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.normal.len(), "point/normal dimension mismatch");
        self.residual(x).abs()
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Closed Euclidean ball; the cutter is the metric projection and the
/// proximity is the exact distance `(‖x − c‖ − r)₊`.
#[derive(Clone, Debug)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
    tol: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidSet("ball radius must be positive".into()));
        }
        Ok(Self { center, radius, tol: DEFAULT_MEMBERSHIP_TOL })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        (dist(x, &self.center) - self.radius).max(0.0)
    }
}

impl Cutter for Ball {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        project_ball(self, x)
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.center.len(), "point/center dimension mismatch");
        self.distance(x)
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Functional oracle for [`SublevelSet`]: returns `(f(x), g)` with
/// `g ∈ ∂f(x)`. The selection must be deterministic, and `g ≠ 0` whenever
/// `f(x) > 0`.
pub type SubgradOracle = Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

/// Sublevel set `S(f, 0) = {x : f(x) ≤ 0}` of a convex continuous
/// functional, equipped with the subgradient projection as its cutter and
/// `f₊` as its proximity.
#[derive(Clone)]
pub struct SublevelSet {
    oracle: SubgradOracle,
    tol: f64,
}

impl SublevelSet {
    /// The caller asserts that `S(f, 0)` is nonempty.
    pub fn new(oracle: SubgradOracle) -> Self {
        Self { oracle, tol: DEFAULT_MEMBERSHIP_TOL }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// `f(x) = max_i (⟨a_i, x⟩ − b_i)` with the subgradient of the lowest
    /// attaining index, so that the oracle is deterministic.
    pub fn max_affine(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows.len() != rhs.len() {
            return Err(Error::InvalidSet("max_affine needs matching rows and rhs".into()));
        }
        Ok(Self::new(Arc::new(move |x: &[f64]| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, a) in rows.iter().enumerate() {
                let v = dot(a, x) - rhs[i];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            (best, rows[arg].clone())
        })))
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.oracle)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }
}

impl Cutter for SublevelSet {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        subgradient_project(self, x)
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        self.value(x).max(0.0)
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// `α`-relaxation `Id + α(U − Id)` of a cutter, `α ∈ (0, 2]`. Fixed points
/// and proximity are those of the wrapped operator; for `α < 2` the result
/// is `(2−α)/α`-strongly quasi-nonexpansive.
pub struct Relaxed {
    inner: Box<dyn Cutter>,
    alpha: f64,
}

impl Relaxed {
    pub fn new(inner: Box<dyn Cutter>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation parameter must lie in (0, 2], got {alpha}"
            )));
        }
        Ok(Self { inner, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// SQNE constant `(2 − α)/α` of the relaxed operator.
    pub fn sqne_constant(&self) -> f64 {
        (2.0 - self.alpha) / self.alpha
    }
}

impl Cutter for Relaxed {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.inner.apply(x)?;
        Ok(x.iter().zip(&u).map(|(&xi, &ui)| xi + self.alpha * (ui - xi)).collect())
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        self.inner.proximity(x)
    }

    fn tolerance(&self) -> f64 {
        self.inner.tolerance()
    }
}

/// Operator oracle for [`AveragedCutter`].
pub type OperatorOracle = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Cutter recovered from an averaged operator `V = Id + η(W − Id)` with
/// `W` nonexpansive: `U = Id + (1/2η)(V − Id)` shares the fixed points of
/// `V`. Proximity defaults to the displacement `‖Ux − x‖`.
pub struct AveragedCutter {
    v: OperatorOracle,
    inv_two_eta: f64,
    tol: f64,
}

impl AveragedCutter {
    pub fn new(v: OperatorOracle, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "averagedness parameter must lie in (0, 1), got {eta}"
            )));
        }
        Ok(Self { v, inv_two_eta: 1.0 / (2.0 * eta), tol: DEFAULT_MEMBERSHIP_TOL })
    }
}

impl Cutter for AveragedCutter {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let vx = (self.v)(x);
        if vx.len() != x.len() {
            return Err(Error::Dimension("operator oracle changed the dimension".into()));
        }
        Ok(x.iter().zip(&vx).map(|(&xi, &vi)| xi + self.inv_two_eta * (vi - xi)).collect())
    }

    fn proximity(&self, x: &[f64]) -> f64 {
        let ux = self.apply(x).expect("displacement proximity");
        dist(&ux, x)
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }
}

/// Metric projection onto a half-space:
/// `x − (⟨a,x⟩ − b)₊ / ‖a‖² · a`.
pub fn project_halfspace(h: &HalfSpace, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != h.normal.len() {
        return Err(Error::Dimension(format!(
            "point has dimension {}, half-space {}",
            x.len(),
            h.normal.len()
        )));
    }
    let r = h.residual(x);
    if r <= 0.0 {
        return Ok(x.to_vec());
    }
    let scale = r / norm_sq(&h.normal);
    Ok(x.iter().zip(&h.normal).map(|(&xi, &ai)| xi - scale * ai).collect())
}

/// Metric projection onto a ball: identity inside, radial shrink outside.
pub fn project_ball(b: &Ball, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != b.center.len() {
        return Err(Error::Dimension(format!(
            "point has dimension {}, ball {}",
            x.len(),
            b.center.len()
        )));
    }
    let d = dist(x, &b.center);
    if d <= b.radius {
        return Ok(x.to_vec());
    }
    let scale = b.radius / d;
    Ok(x.iter().zip(&b.center).map(|(&xi, &ci)| ci + scale * (xi - ci)).collect())
}

/// Subgradient projection `x − f₊(x)/‖g‖² · g` relative to the sublevel
/// functional. Identity when `f(x) ≤ 0`.
pub fn subgradient_project(s: &SublevelSet, x: &[f64]) -> Result<Vec<f64>> {
    let (f, g) = s.eval(x);
    if f <= 0.0 {
        return Ok(x.to_vec());
    }
    if g.len() != x.len() {
        return Err(Error::Dimension("subgradient oracle changed the dimension".into()));
    }
    let gg = norm_sq(&g);
    if gg <= 0.0 {
        return Err(Error::OracleContract(format!(
            "zero subgradient at a point with f(x) = {f} > 0"
        )));
    }
    let scale = f / gg;
    Ok(x.iter().zip(&g).map(|(&xi, &gi)| xi - scale * gi).collect())
}

/// α-relaxation of a boxed cutter.
pub fn relax(inner: Box<dyn Cutter>, alpha: f64) -> Result<Relaxed> {
    Relaxed::new(inner, alpha)
}

/// Cutter from an averaged operator oracle.
pub fn cutter_from_averaged(v: OperatorOracle, eta: f64) -> Result<AveragedCutter> {
    AveragedCutter::new(v, eta)
}

/// Maximum proximity over a family.
pub fn max_proximity(cutters: &[Box<dyn Cutter>], x: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for c in cutters {
        let p = c.proximity(x);
        if p > best {
            best = p;
        }
    }
    best
}

pub fn feasible(cutters: &[Box<dyn Cutter>], x: &[f64]) -> bool {
    cutters.iter().all(|c| c.is_member(x))
}

/// Reference value of `d(x, ⋂ C_i)` for testing and rate reports.
///
/// Runs the unrelaxed simultaneous method `z ← (1/M) Σ U_i z` from `z = x`
/// until the successive-iterate change drops below 1e-14 (at most 10⁶
/// iterations) and reports the distance from `x` to the limit. Intended for
/// families of metric projections (half-spaces, hyperplanes, balls) over a
/// consistent intersection.
pub fn distance_oracle(cutters: &[Box<dyn Cutter>], x: &[f64]) -> Result<f64> {
    if cutters.is_empty() {
        return Err(Error::InvalidSet("distance oracle needs at least one set".into()));
    }
    let w = 1.0 / cutters.len() as f64;
    let mut z = x.to_vec();
    for _ in 0..ORACLE_MAX_ITERS {
        let mut next = cutters[0].apply(&z)?;
        for v in next.iter_mut() {
            *v *= w;
        }
        for c in &cutters[1..] {
            let u = c.apply(&z)?;
            for (nj, uj) in next.iter_mut().zip(&u) {
                *nj += w * uj;
            }
        }
        let change = dist(&next, &z);
        z = next;
        if change < ORACLE_STEP_TOL {
            return Ok(dist(x, &z));
        }
    }
    Err(Error::OracleFailure(format!(
        "no convergence within {ORACLE_MAX_ITERS} iterations"
    )))
}
