//! Dense conic optimization.
//!
//! Programs are stored in the standard primal form
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             G x + s = h,   s in K
//! ```
//!
//! where `K` is a product of nonnegative orthants and second-order cones
//! `{(t, u) : ||u|| <= t}`. The associated dual is
//!
//! ```text
//! maximize    -b'y - h'z
//! subject to  A'y + G'z + c = 0,   z in K
//! ```
//!
//! [`solve_socp`] is a primal-dual interior-point method on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling. [`solve_lp`] is a dense
//! two-phase simplex method restricted to orthant-only programs; the two
//! share no numerical code, so each can check the other.

mod cones;
mod ipm;
mod simplex;
mod sparse;

pub use cones::{in_cone, Cone};
pub use ipm::solve_socp;
pub use simplex::solve_lp;
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};
use std::io::Write;

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Relative primal and dual residual tolerance.
    pub feas_tol: f64,
    /// Duality gap tolerance, relative to `max(1, |primal objective|)`.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor of the interior-point step.
    pub step_fraction: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Primal infeasible; `y`, `z` hold a Farkas certificate.
    Infeasible,
    /// Dual infeasible; `x` holds an improving ray.
    Unbounded,
    /// Iteration cap or numerical breakdown.
    IterLimit,
}

/// Output of a conic solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// `|c'x - dual objective| / max(1, |c'x|)`.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Conic program in standard form.
#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub g: SparseMatrix,
    pub h: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConeProgram {
    /// Program with inequality (cone) constraints only.
    pub fn new(c: Vec<f64>, g: SparseMatrix, h: Vec<f64>, cones: Vec<Cone>) -> Result<Self> {
        let n = c.len();
        Self::with_equalities(c, SparseMatrix::zeros(0, n), Vec::new(), g, h, cones)
    }

    pub fn with_equalities(
        c: Vec<f64>,
        a: SparseMatrix,
        b: Vec<f64>,
        g: SparseMatrix,
        h: Vec<f64>,
        cones: Vec<Cone>,
    ) -> Result<Self> {
        let p = Self { c, a, b, g, h, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.a.ncols() != n || self.g.ncols() != n {
            return Err(Error::Dimension(format!(
                "constraint matrices must have {n} columns (A: {}, G: {})",
                self.a.ncols(),
                self.g.ncols()
            )));
        }
        if self.a.nrows() != self.b.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows but b has {} entries",
                self.a.nrows(),
                self.b.len()
            )));
        }
        if self.g.nrows() != self.h.len() {
            return Err(Error::Dimension(format!(
                "G has {} rows but h has {} entries",
                self.g.nrows(),
                self.h.len()
            )));
        }
        let total: usize = self.cones.iter().map(|c| c.dim()).sum();
        if total != self.h.len() {
            return Err(Error::Dimension(format!(
                "cone dimensions sum to {total}, constraint dimension is {}",
                self.h.len()
            )));
        }
        if let Some(c) = self.cones.iter().find(|c| matches!(c, Cone::Soc(d) if *d < 2)) {
            return Err(Error::Dimension(format!("second-order cone of dimension {}", c.dim())));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !finite(&self.b) || !finite(&self.h) {
            return Err(Error::Dimension("non-finite program data".into()));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_cone_rows(&self) -> usize {
        self.h.len()
    }

    pub fn num_soc(&self) -> usize {
        self.cones.iter().filter(|c| matches!(c, Cone::Soc(_))).count()
    }

    /// True when every cone is a nonnegative orthant.
    pub fn is_lp(&self) -> bool {
        self.cones.iter().all(|c| matches!(c, Cone::NonNeg(_)))
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// Independent feasibility replay of a candidate `x` against the raw
    /// data: returns the worst of the equality residual and the cone
    /// violation of `h - G x`.
    pub fn feasibility_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let mut ax = vec![0.0; self.b.len()];
        self.a.mul_vec(x, &mut ax);
        for (r, b) in ax.iter().zip(&self.b) {
            worst = worst.max((r - b).abs());
        }
        let mut gx = vec![0.0; self.h.len()];
        self.g.mul_vec(x, &mut gx);
        let slack: Vec<f64> = self.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
        let mut off = 0;
        for cone in &self.cones {
            let d = cone.dim();
            worst = worst.max(cone.violation(&slack[off..off + d]));
            off += d;
        }
        worst
    }

    /// Writes the program in a plain-text matrix format: a size header, the
    /// cone list, dense `c`, `b`, `h`, then `A` and `G` as `row col value`
    /// triplets.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# cone program: minimize c'x s.t. Ax = b, Gx + s = h, s in K")?;
        writeln!(w, "n {} p {} m {}", self.c.len(), self.b.len(), self.h.len())?;
        write!(w, "cones")?;
        for c in &self.cones {
            match c {
                Cone::NonNeg(d) => write!(w, " l{d}")?,
                Cone::Soc(d) => write!(w, " q{d}")?,
            }
        }
        writeln!(w)?;
        for (name, v) in [("c", &self.c), ("b", &self.b), ("h", &self.h)] {
            write!(w, "{name}")?;
            for x in v.iter() {
                write!(w, " {x:e}")?;
            }
            writeln!(w)?;
        }
        for (name, m) in [("A", &self.a), ("G", &self.g)] {
            writeln!(w, "{name} {}", m.nnz())?;
            for (i, j, v) in m.triplets() {
                writeln!(w, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_cones() {
        let g = SparseMatrix::from_dense(2, 1, &[1.0, 0.0]);
        let err = ConeProgram::new(vec![1.0], g.clone(), vec![0.0, 0.0], vec![Cone::NonNeg(3)]);
        assert!(matches!(err, Err(Error::Dimension(_))));
        let err = ConeProgram::new(vec![1.0], g, vec![0.0, 0.0], vec![Cone::NonNeg(1), Cone::Soc(1)]);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn text_dump_lists_everything() {
        let g = SparseMatrix::from_dense(3, 1, &[-1.0, 0.0, 0.0]);
        let p = ConeProgram::new(vec![1.0], g, vec![0.0, 3.0, 4.0], vec![Cone::Soc(3)]).unwrap();
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("n 1 p 0 m 3"));
        assert!(text.contains("cones q3"));
        assert!(text.contains("G 1\n0 0 -1e0"));
    }
}
