//! Random consistent linear-inequality problems and their file format.
//!
//! An instance holds the system `Ax ≤ b` (or `Ax = b` for equality
//! systems), a feasibility witness, an infeasible start point and the seed
//! it was generated from.
//!
//! Generation recipe, all draws from one ChaCha8 stream seeded with the
//! instance seed, in this order: witness coordinates (standard normal),
//! rows of `A` row-major (standard normal), slacks `u_i` uniform in [0, 1)
//! so that `b_i = ⟨a_i, z*⟩ + u_i` keeps the witness strictly inside, then
//! unit directions for `x0 = z* + 10·d` redrawn until `x0` is infeasible.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fmt_real;
use crate::linalg::{dot, norm};
use crate::sets::{Cutter, HalfSpace, Hyperplane};

/// Distance from the witness at which start points are drawn.
pub const START_RADIUS: f64 = 10.0;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || data.len() != m * n {
            return Err(Error::InvalidProblem(format!(
                "matrix {m}×{n} needs {} entries, got {}",
                m * n,
                data.len()
            )));
        }
        Ok(Self { m, n, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.m).map(|i| self.row(i))
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(norm).collect()
    }
}

/// Whether the rows encode inequalities (half-spaces) or equalities
/// (hyperplanes).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Inequality,
    Equality,
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    a: Matrix,
    rhs: Vec<f64>,
    witness: Vec<f64>,
    x0: Vec<f64>,
    seed: u64,
    kind: SystemKind,
}

impl ProblemInstance {
    pub fn new(
        a: Matrix,
        rhs: Vec<f64>,
        witness: Vec<f64>,
        x0: Vec<f64>,
        seed: u64,
        kind: SystemKind,
    ) -> Result<Self> {
        if rhs.len() != a.m() || witness.len() != a.n() || x0.len() != a.n() {
            return Err(Error::InvalidProblem("field dimensions disagree".into()));
        }
        let p = Self { a, rhs, witness, x0, seed, kind };
        p.validate()?;
        Ok(p)
    }

    /// Consistency (the witness satisfies every row), no zero rows, and an
    /// infeasible start point.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.a.rows().enumerate() {
            if norm(row) <= 0.0 {
                return Err(Error::InvalidProblem(format!("row {i} is zero")));
            }
            let r = dot(row, &self.witness) - self.rhs[i];
            let ok = match self.kind {
                SystemKind::Inequality => r <= 0.0,
                SystemKind::Equality => r == 0.0,
            };
            if !ok {
                return Err(Error::InvalidProblem(format!(
                    "witness violates row {i} with residual {r}"
                )));
            }
        }
        if self.max_proximity(&self.x0) <= 0.0 {
            return Err(Error::InvalidProblem("start point is feasible".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.a.m()
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// Row proximity at `x`: positive residual for inequalities, absolute
    /// residual for equalities.
    pub fn proximity(&self, i: usize, x: &[f64]) -> f64 {
        let r = dot(self.a.row(i), x) - self.rhs[i];
        match self.kind {
            SystemKind::Inequality => r.max(0.0),
            SystemKind::Equality => r.abs(),
        }
    }

    pub fn max_proximity(&self, x: &[f64]) -> f64 {
        (0..self.m()).map(|i| self.proximity(i, x)).fold(0.0, f64::max)
    }

    /// The rows as cutters of the matching kind.
    pub fn cutters(&self) -> Result<Vec<Box<dyn Cutter>>> {
        let mut out: Vec<Box<dyn Cutter>> = Vec::with_capacity(self.m());
        for i in 0..self.m() {
            match self.kind {
                SystemKind::Inequality => {
                    out.push(Box::new(HalfSpace::new(self.a.row(i).to_vec(), self.rhs[i])?))
                }
                SystemKind::Equality => {
                    out.push(Box::new(Hyperplane::new(self.a.row(i).to_vec(), self.rhs[i])?))
                }
            }
        }
        Ok(out)
    }

    /// Exact distance from `x` to the `i`-th row's set.
    pub fn row_distance(&self, i: usize, x: &[f64]) -> f64 {
        self.proximity(i, x) / norm(self.a.row(i))
    }

    pub fn max_row_distance(&self, x: &[f64]) -> f64 {
        (0..self.m()).map(|i| self.row_distance(i, x)).fold(0.0, f64::max)
    }

    /// Plain-text serialization; reals carry 17 significant digits.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "n {}", self.n())?;
        writeln!(w, "m {}", self.m())?;
        // inequality systems are the default; only equality systems carry
        // the extra kind line
        if self.kind == SystemKind::Equality {
            writeln!(w, "kind equality")?;
        }
        writeln!(w, "rows")?;
        for row in self.a.rows() {
            writeln!(w, "{}", join_reals(row))?;
        }
        writeln!(w, "rhs")?;
        writeln!(w, "{}", join_reals(&self.rhs))?;
        writeln!(w, "witness")?;
        writeln!(w, "{}", join_reals(&self.witness))?;
        writeln!(w, "x0")?;
        writeln!(w, "{}", join_reals(&self.x0))?;
        writeln!(w, "seed {}", self.seed)?;
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        self.write(&mut f)?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next_line = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            return Ok(l.trim().to_string());
                        }
                    }
                    None => return Err(Error::Parse("unexpected end of problem file".into())),
                }
            }
        };
        let n = parse_keyed_usize(&next_line()?, "n")?;
        let m = parse_keyed_usize(&next_line()?, "m")?;
        let mut line = next_line()?;
        let kind = if line.starts_with("kind") {
            let k = match line.split_whitespace().nth(1) {
                Some("inequality") => SystemKind::Inequality,
                Some("equality") => SystemKind::Equality,
                other => {
                    return Err(Error::Parse(format!("unknown system kind {other:?}")));
                }
            };
            line = next_line()?;
            k
        } else {
            SystemKind::Inequality
        };
        expect_keyword(&line, "rows")?;
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m {
            let row = parse_reals(&next_line()?)?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(&row);
        }
        expect_keyword(&next_line()?, "rhs")?;
        let rhs = parse_reals(&next_line()?)?;
        expect_keyword(&next_line()?, "witness")?;
        let witness = parse_reals(&next_line()?)?;
        expect_keyword(&next_line()?, "x0")?;
        let x0 = parse_reals(&next_line()?)?;
        let seed = parse_keyed_u64(&next_line()?, "seed")?;
        Self::new(Matrix::new(m, n, data)?, rhs, witness, x0, seed, kind)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn join_reals(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(" ")
}

fn parse_reals(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad real {t:?}: {e}"))))
        .collect()
}

fn expect_keyword(line: &str, kw: &str) -> Result<()> {
    if line == kw {
        Ok(())
    } else {
        Err(Error::Parse(format!("expected {kw:?}, found {line:?}")))
    }
}

fn parse_keyed_usize(line: &str, key: &str) -> Result<usize> {
    parse_keyed_u64(line, key).map(|v| v as usize)
}

fn parse_keyed_u64(line: &str, key: &str) -> Result<u64> {
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::Parse(format!("expected key {key:?} in {line:?}")));
    }
    it.next()
        .ok_or_else(|| Error::Parse(format!("missing value for {key:?}")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad value for {key:?}: {e}")))
}

fn standard_normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let d = standard_normals(rng, n);
        let len = norm(&d);
        if len > 1e-12 {
            return d.iter().map(|v| v / len).collect();
        }
    }
}

/// Random consistent inequality system, deterministic in `seed`.
pub fn generate_problem(m: usize, n: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let witness = standard_normals(&mut rng, n);
    let data = standard_normals(&mut rng, m * n);
    let a = Matrix::new(m, n, data)?;
    let rhs: Vec<f64> = a
        .rows()
        .map(|row| dot(row, &witness) + rng.random::<f64>())
        .collect();
    let x0 = loop {
        let d = unit_direction(&mut rng, n);
        let x0: Vec<f64> =
            witness.iter().zip(&d).map(|(&w, &di)| w + START_RADIUS * di).collect();
        let infeasible = a
            .rows()
            .zip(&rhs)
            .any(|(row, &b)| dot(row, &x0) - b > 0.0);
        if infeasible {
            break x0;
        }
    };
    ProblemInstance::new(a, rhs, witness, x0, seed, SystemKind::Inequality)
}

/// Random consistent equality system (`b = A z*` exactly), deterministic
/// in `seed`.
pub fn generate_equality_problem(m: usize, n: usize, seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let witness = standard_normals(&mut rng, n);
    let data = standard_normals(&mut rng, m * n);
    let a = Matrix::new(m, n, data)?;
    let rhs: Vec<f64> = a.rows().map(|row| dot(row, &witness)).collect();
    let x0 = loop {
        let d = unit_direction(&mut rng, n);
        let x0: Vec<f64> =
            witness.iter().zip(&d).map(|(&w, &di)| w + START_RADIUS * di).collect();
        let infeasible = a
            .rows()
            .zip(&rhs)
            .any(|(row, &b)| (dot(row, &x0) - b).abs() > 0.0);
        if infeasible {
            break x0;
        }
    };
    ProblemInstance::new(a, rhs, witness, x0, seed, SystemKind::Equality)
}
