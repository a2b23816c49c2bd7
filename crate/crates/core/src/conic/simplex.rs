//! Dense two-phase tableau simplex for orthant-only cone programs.
//!
//! The program `min c'x, Ax = b, Gx <= h` with free `x` is put in standard
//! form by splitting `x = u - v` and adding one slack per inequality. Every
//! row receives an artificial column; phase 1 minimizes their sum. Bland's
//! rule prevents cycling. Artificial columns stay in the tableau (barred from
//! re-entering in phase 2) so dual values can be read off the reduced costs.

use super::{dot, norm_inf, ConeProgram, Settings, SolveResult, Status};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;

/// Solves an LP given as a [`ConeProgram`] whose cones are all orthants.
///
/// Infeasible programs return a Farkas certificate in `y`, `z`
/// (`z >= 0`, `A'y + G'z = 0`, `b'y + h'z = -1`) and the optimal phase-1
/// objective, i.e. the minimal total constraint violation, in `gap`.
pub fn solve_lp(prog: &ConeProgram, settings: &Settings) -> Result<SolveResult> {
    prog.validate()?;
    if !prog.is_lp() {
        return Err(Error::Dimension("solve_lp requires orthant cones only".into()));
    }
    Tableau::build(prog).solve(prog, settings)
}

struct Tableau {
    /// rows x (cols + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    p: usize,
    m: usize,
    /// Row sign flips applied so the right-hand side is nonnegative.
    flip: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    // columns: u (n) | v (n) | slack (m) | artificial (p + m)
    fn ncols(&self) -> usize {
        2 * self.n + self.m + self.p + self.m
    }

    fn art0(&self) -> usize {
        2 * self.n + self.m
    }

    fn build(prog: &ConeProgram) -> Self {
        let n = prog.num_vars();
        let p = prog.b.len();
        let m = prog.h.len();
        let rows = p + m;
        let ncols = 2 * n + m + rows;
        let mut t = vec![vec![0.0; ncols + 1]; rows];
        let mut flip = vec![1.0; rows];
        for (i, j, v) in prog.a.triplets() {
            t[i][j] += v;
            t[i][n + j] -= v;
        }
        for (i, j, v) in prog.g.triplets() {
            t[p + i][j] += v;
            t[p + i][n + j] -= v;
        }
        for i in 0..m {
            t[p + i][2 * n + i] = 1.0;
        }
        for i in 0..rows {
            let rhs = if i < p { prog.b[i] } else { prog.h[i - p] };
            t[i][ncols] = rhs;
            if rhs < 0.0 {
                flip[i] = -1.0;
                for v in t[i].iter_mut() {
                    *v = -*v;
                }
            }
            t[i][2 * n + m + i] = 1.0;
        }
        let basis = (0..rows).map(|i| 2 * n + m + i).collect();
        Self {
            t,
            basis,
            n,
            p,
            m,
            flip,
            pivots: 0,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.ncols()]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.ncols() + 1;
        let pv = self.t[row][col];
        for j in 0..w {
            self.t[row][j] /= pv;
        }
        let prow = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..w {
                    r[j] -= f * prow[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced costs `c_j - c_B' B^{-1} a_j` for all columns.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for (j, r) in rc.iter_mut().enumerate() {
                    *r -= cb * self.t[i][j];
                }
            }
        }
        rc
    }

    /// Runs simplex iterations with Bland's rule on `cost`, allowing only
    /// columns with `allowed(j)` to enter. Returns `Err(col)` on an
    /// unbounded ray.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: impl Fn(usize) -> bool,
        max_pivots: usize,
    ) -> std::result::Result<bool, usize> {
        let scale = 1.0 + norm_inf(cost);
        loop {
            if self.pivots >= max_pivots {
                return Ok(false);
            }
            let rc = self.reduced_costs(cost);
            let Some(enter) = (0..self.ncols()).find(|&j| allowed(j) && rc[j] < -1e-10 * scale) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, enter),
                None => return Err(enter),
            }
        }
    }

    fn solve(mut self, prog: &ConeProgram, settings: &Settings) -> Result<SolveResult> {
        let (n, p, m) = (self.n, self.p, self.m);
        let ncols = self.ncols();
        let art0 = self.art0();
        let max_pivots = settings.max_iter.max(50 * (ncols + self.t.len()));

        // Phase 1
        let mut cost1 = vec![0.0; ncols];
        cost1[art0..].iter_mut().for_each(|c| *c = 1.0);
        let finished = self.optimize(&cost1, |j| j < art0, max_pivots).unwrap_or(true);
        // Each artificial is measured against its own row so that one large
        // right-hand side cannot hide a violated small row.
        let row_rhs = |r: usize| if r < p { prog.b[r] } else { prog.h[r - p] };
        let (mut phase1, mut violated) = (0.0, false);
        for i in (0..self.t.len()).filter(|&i| self.basis[i] >= art0) {
            let v = self.rhs(i);
            phase1 += v;
            violated |= v > settings.feas_tol * (1.0 + row_rhs(self.basis[i] - art0).abs());
        }
        if !finished {
            return Ok(self.limit(prog));
        }
        if violated {
            // Phase-1 duals w = c_B B^{-1}: rc of artificial i is 1 - w_i.
            let rc = self.reduced_costs(&cost1);
            let w: Vec<f64> = (0..p + m).map(|i| (1.0 - rc[art0 + i]) * self.flip[i]).collect();
            // w'[b; h] = phase1 > 0, A'w_A + G'w_G = 0, w_G <= 0
            let scale = dot(&w[..p], &prog.b) + dot(&w[p..], &prog.h);
            let y: Vec<f64> = w[..p].iter().map(|v| -v / scale).collect();
            let z: Vec<f64> = w[p..].iter().map(|v| (-v / scale).max(0.0)).collect();
            return Ok(SolveResult {
                status: Status::Infeasible,
                x: vec![f64::NAN; n],
                s: vec![f64::NAN; m],
                y,
                z,
                primal_objective: f64::INFINITY,
                dual_objective: f64::INFINITY,
                iterations: self.pivots,
                gap: phase1,
                primal_residual: phase1,
                dual_residual: 0.0,
            });
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..self.t.len() {
            if self.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| self.t[i][j].abs() > 1e-9) {
                    self.pivot(i, j);
                }
            }
        }

        // Phase 2
        let mut cost2 = vec![0.0; ncols];
        for j in 0..n {
            cost2[j] = prog.c[j];
            cost2[n + j] = -prog.c[j];
        }
        match self.optimize(&cost2, |j| j < art0, max_pivots) {
            Ok(true) => {}
            Ok(false) => return Ok(self.limit(prog)),
            Err(col) => {
                // ray: entering column increases, basics move along -t[:,col]
                let mut dir = vec![0.0; ncols];
                dir[col] = 1.0;
                for i in 0..self.t.len() {
                    dir[self.basis[i]] -= self.t[i][col];
                }
                let x: Vec<f64> = (0..n).map(|j| dir[j] - dir[n + j]).collect();
                let k = -dot(&prog.c, &x);
                let x: Vec<f64> = x.iter().map(|v| v / k).collect();
                let mut gx = vec![0.0; m];
                prog.g.mul_vec(&x, &mut gx);
                return Ok(SolveResult {
                    status: Status::Unbounded,
                    x,
                    s: gx.iter().map(|v| -v).collect(),
                    y: vec![f64::NAN; p],
                    z: vec![f64::NAN; m],
                    primal_objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    iterations: self.pivots,
                    gap: f64::NAN,
                    primal_residual: 0.0,
                    dual_residual: 0.0,
                });
            }
        }

        let x = self.primal();
        let rc = self.reduced_costs(&cost2);
        // With row multipliers pi (unflipped), c = A'pi_A + G'pi_G at optimum.
        // Slack i has reduced cost -pi_G,i; artificial i has -flip_i pi_i.
        let z: Vec<f64> = (0..m).map(|i| rc[2 * n + i].max(0.0)).collect();
        let y: Vec<f64> = (0..p).map(|i| self.flip[i] * rc[art0 + i]).collect();
        Ok(self.finish(prog, Status::Optimal, x, y, z))
    }

    fn primal(&self) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; self.ncols()];
        for (i, &bj) in self.basis.iter().enumerate() {
            full[bj] = self.rhs(i);
        }
        (0..n).map(|j| full[j] - full[n + j]).collect()
    }

    fn limit(&self, prog: &ConeProgram) -> SolveResult {
        let x = self.primal();
        let (p, m) = (self.p, self.m);
        self.finish(prog, Status::IterLimit, x, vec![0.0; p], vec![0.0; m])
    }

    fn finish(&self, prog: &ConeProgram, status: Status, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> SolveResult {
        let (n, p, m) = (self.n, self.p, self.m);
        let mut gx = vec![0.0; m];
        prog.g.mul_vec(&x, &mut gx);
        let s: Vec<f64> = prog.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
        let mut ax = vec![0.0; p];
        prog.a.mul_vec(&x, &mut ax);
        let pres_eq = ax.iter().zip(&prog.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let pres_in = s.iter().fold(0.0f64, |mx, v| mx.max(-v));
        let mut rx = prog.c.clone();
        prog.a.tmul_add(&y, &mut rx);
        prog.g.tmul_add(&z, &mut rx);
        let pobj = dot(&prog.c, &x);
        let dobj = -(dot(&prog.b, &y) + dot(&prog.h, &z));
        debug_assert_eq!(x.len(), n);
        SolveResult {
            status,
            primal_objective: pobj,
            dual_objective: dobj,
            gap: (pobj - dobj).abs() / pobj.abs().max(1.0),
            primal_residual: pres_eq.max(pres_in) / (1.0 + norm_inf(&prog.b).max(norm_inf(&prog.h))),
            dual_residual: norm_inf(&rx) / (1.0 + norm_inf(&prog.c)),
            x,
            s,
            y,
            z,
            iterations: self.pivots,
        }
    }
}
