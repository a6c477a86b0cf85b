//! Run configuration file (TOML). Keys mirror the CLI flags; flags given
//! on the command line override file values.
//!
//! Control keys: `outer_block_size`, `inner` (selection grammar
//! `all|active|maxprox|top:<t>|threshold:<t>`), `lopping`, `flag_horizon`,
//! `epsilon`. `strategy` is accepted as an alias for `inner` that also
//! admits `cyclic`.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub inner: Option<String>,
    pub outer_block_size: Option<usize>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub check_every: Option<usize>,
    pub max_iters: Option<usize>,
    pub lopping: Option<bool>,
    pub flag_horizon: Option<usize>,
    pub out: Option<String>,
    pub format: Option<String>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Strategy string, `strategy` taking precedence over `inner`.
    pub fn strategy_spec(&self) -> Option<&str> {
        self.strategy.as_deref().or(self.inner.as_deref())
    }
}
