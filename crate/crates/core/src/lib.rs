//! Projection and fixed-point methods for consistent convex feasibility
//! problems.
//!
//! The iteration `x⁺ = x + α(Σ_{i∈I_k} ω_i U_i x − x)` combines cutter
//! operators `U_i` (metric projections, subgradient projections, or any
//! operator satisfying the cutter inequality) under two controls: a cyclic
//! outer control offering a block `J_k` of constraints per step, and an
//! inner control selecting `I_k ⊆ J_k` by proximity (all, active, max,
//! top-t, or threshold). The crate provides the solver with per-iteration
//! diagnostics, closed-form and empirical linear-rate constants, a
//! lopping/flagging scheduler that skips satisfied blocks, and a seeded
//! benchmark harness producing CSV tables and SVG ribbon plots.
//!
//! Module map:
//! - [`sets`]: set types, cutters, proximity functions, distance oracle;
//! - [`controls`]: outer schedules, inner selection, lopping/flagging;
//! - [`solver`]: the double-layer iteration, traces, Fejér checks;
//! - [`rates`]: rate factors `q`, prefactors `c`, error bounds, empirical
//!   estimates;
//! - [`problem`] / [`bench`] / [`plot`]: instance generation, the
//!   experiment harness and its outputs;
//! - [`config`]: the TOML run-configuration file.

pub mod bench;
pub mod config;
pub mod controls;
mod error;
pub mod linalg;
pub mod plot;
pub mod problem;
pub mod rates;
pub mod sets;
pub mod solver;

pub use error::{Error, Result};

/// Serialize a real with 17 significant digits, enough to round-trip f64
/// exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}
