//! Primal-dual interior-point method for second-order cone programs.
//!
//! Homogeneous self-dual embedding with Mehrotra predictor-corrector steps
//! and Nesterov-Todd scaling. Each Newton system is reduced to
//!
//! ```text
//! [ G'W^{-2}G  A' ] [dx]   [r_x + G'W^{-2} r_z]
//! [ A          0  ] [dy] = [r_y               ]
//! ```
//!
//! factored densely once per iteration, with iterative refinement against
//! the unreduced system.

use super::cones::{circ, circ_solve, BlockScaling, Cone};
use super::{dot, norm, ConeProgram, Settings, SolveResult, Status};
use crate::error::Result;
use nalgebra::{DMatrix, DVector};

/// Solves a conic program (any mix of orthants and second-order cones).
pub fn solve_socp(prog: &ConeProgram, settings: &Settings) -> Result<SolveResult> {
    prog.validate()?;
    Ipm::new(prog, *settings).run()
}

struct Block {
    cone: Cone,
    offset: usize,
    /// Columns of `G` touched by the block's rows.
    support: Vec<usize>,
    /// Dense restriction of `G` to the block rows and support columns,
    /// column-major (`dim` entries per support column).
    local: Vec<f64>,
}

struct Scaling {
    blocks: Vec<BlockScaling>,
    /// Scaled point `W z = W^{-1} s`.
    lambda: Vec<f64>,
}

struct Ipm<'a> {
    prog: &'a ConeProgram,
    settings: Settings,
    n: usize,
    p: usize,
    m: usize,
    blocks: Vec<Block>,
    degree: f64,
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    summary: (f64, f64, f64),
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Factor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Ipm<'a> {
    fn new(prog: &'a ConeProgram, settings: Settings) -> Self {
        let n = prog.num_vars();
        let p = prog.b.len();
        let m = prog.h.len();
        let mut blocks = Vec::with_capacity(prog.cones.len());
        let mut offset = 0;
        for &cone in &prog.cones {
            let d = cone.dim();
            match cone {
                Cone::NonNeg(_) => {
                    // one block per row so each row keeps its own sparse support
                    for r in offset..offset + d {
                        blocks.push(Self::make_block(prog, Cone::NonNeg(1), r));
                    }
                }
                Cone::Soc(_) => blocks.push(Self::make_block(prog, cone, offset)),
            }
            offset += d;
        }
        let degree = prog.cones.iter().map(|c| c.degree()).sum::<usize>() as f64;
        Self {
            prog,
            settings,
            n,
            p,
            m,
            blocks,
            degree,
        }
    }

    fn make_block(prog: &ConeProgram, cone: Cone, offset: usize) -> Block {
        let d = cone.dim();
        let support = prog.g.column_support(offset..offset + d);
        let mut local = vec![0.0; d * support.len()];
        for r in 0..d {
            let (cols, vals) = prog.g.row(offset + r);
            for (&j, &v) in cols.iter().zip(vals) {
                let pos = support.binary_search(&j).unwrap();
                local[pos * d + r] = v;
            }
        }
        Block {
            cone,
            offset,
            support,
            local,
        }
    }

    fn cones(&self) -> impl Iterator<Item = (&Cone, std::ops::Range<usize>)> {
        self.blocks.iter().map(|b| (&b.cone, b.offset..b.offset + b.cone.dim()))
    }

    fn scaling(&self, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut lambda = vec![0.0; self.m];
        for (cone, r) in self.cones() {
            let w = BlockScaling::compute(cone, &s[r.clone()], &z[r.clone()])?;
            w.apply(&z[r.clone()], &mut lambda[r]);
            blocks.push(w);
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Scaling { blocks, lambda })
    }

    fn identity_scaling(&self) -> Scaling {
        let blocks = self.blocks.iter().map(|b| BlockScaling::identity(&b.cone)).collect();
        Scaling {
            blocks,
            lambda: vec![0.0; self.m],
        }
    }

    fn apply_w(&self, w: &Scaling, x: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for ((_, r), bw) in self.cones().zip(&w.blocks) {
            if inverse {
                bw.apply_inv(&x[r.clone()], &mut out[r]);
            } else {
                bw.apply(&x[r.clone()], &mut out[r]);
            }
        }
        out
    }

    fn w_squared(&self, w: &Scaling, x: &[f64]) -> Vec<f64> {
        let t = self.apply_w(w, x, false);
        self.apply_w(w, &t, false)
    }

    fn w_inv_squared(&self, w: &Scaling, x: &[f64]) -> Vec<f64> {
        let t = self.apply_w(w, x, true);
        self.apply_w(w, &t, true)
    }

    fn factor(&self, w: &Scaling) -> Option<Factor> {
        let (n, p) = (self.n, self.p);
        let mut kkt = DMatrix::<f64>::zeros(n + p, n + p);
        let mut col = Vec::new();
        let mut scaled = Vec::new();
        for (blk, bw) in self.blocks.iter().zip(&w.blocks) {
            let d = blk.cone.dim();
            let ns = blk.support.len();
            scaled.resize(d * ns, 0.0);
            col.resize(d, 0.0);
            for j in 0..ns {
                bw.apply_inv(&blk.local[j * d..(j + 1) * d], &mut col);
                scaled[j * d..(j + 1) * d].copy_from_slice(&col);
            }
            for a in 0..ns {
                let ca = &scaled[a * d..(a + 1) * d];
                for b in a..ns {
                    let cb = &scaled[b * d..(b + 1) * d];
                    let v = dot(ca, cb);
                    let (ja, jb) = (blk.support[a], blk.support[b]);
                    kkt[(ja, jb)] += v;
                    if a != b {
                        kkt[(jb, ja)] += v;
                    }
                }
            }
        }
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(kkt[(i, i)].abs()));
        let reg = 1e-13 * (1.0 + max_diag);
        for i in 0..n {
            kkt[(i, i)] += reg;
        }
        for (i, j, v) in self.prog.a.triplets() {
            kkt[(n + i, j)] = v;
            kkt[(j, n + i)] = v;
        }
        for i in 0..p {
            kkt[(n + i, n + i)] = -reg;
        }
        let lu = kkt.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Factor { lu })
    }

    /// Solves `[0 A' G'; A 0 0; G 0 -W^2] [x; y; z] = [r1; r2; r3]`.
    fn solve_kkt(
        &self,
        f: &Factor,
        w: &Scaling,
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (mut x, mut y, mut z) = self.solve_reduced(f, w, r1, r2, r3)?;
        for _ in 0..3 {
            // residual of the unreduced system
            let mut e1 = r1.to_vec();
            let mut aty = vec![0.0; self.n];
            self.prog.a.tmul_add(&y, &mut aty);
            self.prog.g.tmul_add(&z, &mut aty);
            e1.iter_mut().zip(&aty).for_each(|(e, v)| *e -= v);
            let mut ax = vec![0.0; self.p];
            self.prog.a.mul_vec(&x, &mut ax);
            let e2: Vec<f64> = r2.iter().zip(&ax).map(|(r, v)| r - v).collect();
            let mut gx = vec![0.0; self.m];
            self.prog.g.mul_vec(&x, &mut gx);
            let w2z = self.w_squared(w, &z);
            let e3: Vec<f64> = (0..self.m).map(|i| r3[i] - (gx[i] - w2z[i])).collect();
            let err = norm(&e1).max(norm(&e2)).max(norm(&e3));
            let scale = 1.0 + norm(r1).max(norm(r2)).max(norm(r3));
            if err <= 1e-14 * scale {
                break;
            }
            let (dx, dy, dz) = self.solve_reduced(f, w, &e1, &e2, &e3)?;
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            y.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
            z.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
        }
        Some((x, y, z))
    }

    fn solve_reduced(
        &self,
        f: &Factor,
        w: &Scaling,
        r1: &[f64],
        r2: &[f64],
        r3: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (n, p) = (self.n, self.p);
        let t = self.w_inv_squared(w, r3);
        let mut top = r1.to_vec();
        self.prog.g.tmul_add(&t, &mut top);
        let mut rhs = DVector::<f64>::zeros(n + p);
        rhs.rows_mut(0, n).copy_from_slice(&top);
        rhs.rows_mut(n, p).copy_from_slice(r2);
        let sol = f.lu.solve(&rhs)?;
        let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let y: Vec<f64> = sol.rows(n, p).iter().copied().collect();
        let mut gx = vec![0.0; self.m];
        self.prog.g.mul_vec(&x, &mut gx);
        let diff: Vec<f64> = gx.iter().zip(r3).map(|(a, b)| a - b).collect();
        let z = self.w_inv_squared(w, &diff);
        if x.iter().chain(&y).chain(&z).any(|v| !v.is_finite()) {
            return None;
        }
        Some((x, y, z))
    }

    /// Shifts `v` into the cone interior if it is not already well inside.
    fn push_interior(&self, v: &mut [f64]) {
        let shift = self
            .cones()
            .map(|(c, r)| c.min_shift(&v[r]))
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = norm(v).max(1.0);
        if shift >= -1e-8 * scale {
            let a = 1.0 + shift;
            for (c, r) in self.cones() {
                c.add_identity(&mut v[r], a);
            }
        }
    }

    fn max_step(&self, v: &[f64], dv: &[f64]) -> f64 {
        self.cones()
            .map(|(c, r)| c.max_step(&v[r.clone()], &dv[r]))
            .fold(f64::INFINITY, f64::min)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        f: &Factor,
        w: &Scaling,
        base: &(Vec<f64>, Vec<f64>, Vec<f64>),
        tau: f64,
        kappa: f64,
        d: (&[f64], &[f64], &[f64], f64),
        ds: &[f64],
        dkappa: f64,
    ) -> Option<Direction> {
        let (dx_res, dy_res, dz_res, dtau_res) = d;
        // lambda \ ds, then W of it
        let mut ls = vec![0.0; self.m];
        for (c, r) in self.cones() {
            circ_solve(c, &w.lambda[r.clone()], &ds[r.clone()], &mut ls[r]);
        }
        let wls = self.apply_w(w, &ls, false);
        let r1: Vec<f64> = dx_res.iter().map(|v| -v).collect();
        let r2: Vec<f64> = dy_res.iter().map(|v| -v).collect();
        let r3: Vec<f64> = dz_res.iter().zip(&wls).map(|(a, b)| -a + b).collect();
        let (x2, y2, z2) = self.solve_kkt(f, w, &r1, &r2, &r3)?;
        let (x1, y1, z1) = base;
        let prog = self.prog;
        let num = -dtau_res + dkappa / tau - (dot(&prog.c, &x2) + dot(&prog.b, &y2) + dot(&prog.h, &z2));
        let den = dot(&prog.c, x1) + dot(&prog.b, y1) + dot(&prog.h, z1) - kappa / tau;
        let dtau = num / den;
        let x: Vec<f64> = x2.iter().zip(x1).map(|(a, b)| a + dtau * b).collect();
        let y: Vec<f64> = y2.iter().zip(y1).map(|(a, b)| a + dtau * b).collect();
        let z: Vec<f64> = z2.iter().zip(z1).map(|(a, b)| a + dtau * b).collect();
        // ds = -W (lambda \ ds + W dz)
        let wz = self.apply_w(w, &z, false);
        let inner: Vec<f64> = ls.iter().zip(&wz).map(|(a, b)| a + b).collect();
        let s: Vec<f64> = self.apply_w(w, &inner, false).iter().map(|v| -v).collect();
        let dk = -(dkappa + kappa * dtau) / tau;
        if !(dtau.is_finite() && dk.is_finite()) {
            return None;
        }
        Some(Direction {
            x,
            y,
            z,
            s,
            tau: dtau,
            kappa: dk,
        })
    }

    fn step_length(&self, s: &[f64], z: &[f64], tau: f64, kappa: f64, d: &Direction) -> f64 {
        let mut a = self.max_step(s, &d.s).min(self.max_step(z, &d.z));
        if d.tau < 0.0 {
            a = a.min(-tau / d.tau);
        }
        if d.kappa < 0.0 {
            a = a.min(-kappa / d.kappa);
        }
        a
    }

    fn run(&self) -> Result<SolveResult> {
        let prog = self.prog;
        let (n, p, m) = (self.n, self.p, self.m);
        let set = self.settings;

        // Starting point from two least-squares systems with W = I.
        let ident = self.identity_scaling();
        let f0 = self.factor(&ident);
        let (mut x, mut y, mut z, mut s);
        match f0.as_ref().and_then(|f| {
            let primal = self.solve_kkt(f, &ident, &vec![0.0; n], &prog.b, &prog.h)?;
            let neg_c: Vec<f64> = prog.c.iter().map(|v| -v).collect();
            let dual = self.solve_kkt(f, &ident, &neg_c, &vec![0.0; p], &vec![0.0; m])?;
            Some((primal, dual))
        }) {
            Some(((x0, _, z0), (_, y1, z1))) => {
                x = x0;
                s = z0.iter().map(|v| -v).collect::<Vec<f64>>();
                y = y1;
                z = z1;
            }
            None => {
                x = vec![0.0; n];
                y = vec![0.0; p];
                s = vec![0.0; m];
                z = vec![0.0; m];
            }
        }
        self.push_interior(&mut s);
        self.push_interior(&mut z);
        let mut tau = 1.0;
        let mut kappa = 1.0;

        let nbh = norm(&prog.b).max(norm(&prog.h));
        let nc = norm(&prog.c);

        let mut iterations = 0;
        let mut status = Status::IterLimit;
        let mut summary: (f64, f64, f64);
        // Best iterate seen so far by the worst of its three measures, kept
        // so that late numerical trouble cannot discard a good point.
        let mut best: Option<(f64, Iterate)> = None;
        loop {
            // residuals
            let mut aty = vec![0.0; n];
            prog.a.tmul_add(&y, &mut aty);
            let mut gtz = vec![0.0; n];
            prog.g.tmul_add(&z, &mut gtz);
            let rx: Vec<f64> = (0..n).map(|i| aty[i] + gtz[i] + prog.c[i] * tau).collect();
            let mut ax = vec![0.0; p];
            prog.a.mul_vec(&x, &mut ax);
            let ry: Vec<f64> = ax.iter().zip(&prog.b).map(|(a, b)| a - b * tau).collect();
            let mut gx = vec![0.0; m];
            prog.g.mul_vec(&x, &mut gx);
            let rz: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - prog.h[i] * tau).collect();
            let cx = dot(&prog.c, &x);
            let by_hz = dot(&prog.b, &y) + dot(&prog.h, &z);
            let rtau = kappa + cx + by_hz;

            let pcost = cx / tau;
            let dcost = -by_hz / tau;
            let sz = dot(&s, &z);
            // residuals relative to the size of the terms that make them up
            let pscale = 1.0 + nbh.max(norm(&ax).max(norm(&gx)).max(norm(&s)) / tau);
            let dscale = 1.0 + nc.max(norm(&aty).max(norm(&gtz)) / tau);
            let pres = norm(&ry).hypot(norm(&rz)) / tau / pscale;
            let dres = norm(&rx) / tau / dscale;
            let gap = (sz / (tau * tau)).max((pcost - dcost).abs()) / pcost.abs().max(1.0);
            summary = (pres, dres, gap);
            let score = pres.max(dres).max(gap);
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((
                    score,
                    Iterate {
                        x: x.clone(),
                        y: y.clone(),
                        z: z.clone(),
                        s: s.clone(),
                        tau,
                        summary,
                    },
                ));
            }

            if pres <= set.feas_tol && dres <= set.feas_tol && gap <= set.gap_tol {
                status = Status::Optimal;
                break;
            }
            if by_hz < 0.0 {
                let cert: Vec<f64> = aty.iter().zip(&gtz).map(|(a, b)| a + b).collect();
                if norm(&cert) / (-by_hz) / nc.max(1.0) <= set.feas_tol {
                    status = Status::Infeasible;
                    break;
                }
            }
            if cx < 0.0 {
                let gxs: Vec<f64> = gx.iter().zip(&s).map(|(g, sv)| g + sv).collect();
                if norm(&ax).hypot(norm(&gxs)) / (-cx) / nbh.max(1.0) <= set.feas_tol {
                    status = Status::Unbounded;
                    break;
                }
            }
            if iterations >= set.max_iter {
                break;
            }
            iterations += 1;

            let Some(w) = self.scaling(&s, &z) else { break };
            let Some(f) = self.factor(&w) else { break };
            let neg_c: Vec<f64> = prog.c.iter().map(|v| -v).collect();
            let Some(base) = self.solve_kkt(&f, &w, &neg_c, &prog.b, &prog.h) else {
                break;
            };

            let mu = (sz + tau * kappa) / (self.degree + 1.0);

            // predictor
            let mut ll = vec![0.0; m];
            for (c, r) in self.cones() {
                circ(c, &w.lambda[r.clone()], &w.lambda[r.clone()], &mut ll[r]);
            }
            let Some(aff) = self.direction(&f, &w, &base, tau, kappa, (&rx, &ry, &rz, rtau), &ll, kappa * tau) else {
                break;
            };
            let alpha_aff = self.step_length(&s, &z, tau, kappa, &aff).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

            // corrector
            let ws = self.apply_w(&w, &aff.s, true);
            let wz = self.apply_w(&w, &aff.z, false);
            let mut ds = vec![0.0; m];
            for (c, r) in self.cones() {
                circ(c, &ws[r.clone()], &wz[r.clone()], &mut ds[r.clone()]);
                let mut e = vec![0.0; r.len()];
                c.add_identity(&mut e, 1.0);
                for (i, idx) in r.enumerate() {
                    ds[idx] += ll[idx] - sigma * mu * e[i];
                }
            }
            let dk = kappa * tau + aff.kappa * aff.tau - sigma * mu;
            let scale = 1.0 - sigma;
            let rx_c: Vec<f64> = rx.iter().map(|v| v * scale).collect();
            let ry_c: Vec<f64> = ry.iter().map(|v| v * scale).collect();
            let rz_c: Vec<f64> = rz.iter().map(|v| v * scale).collect();
            let Some(dir) = self.direction(&f, &w, &base, tau, kappa, (&rx_c, &ry_c, &rz_c, rtau * scale), &ds, dk)
            else {
                break;
            };
            let alpha = (set.step_fraction * self.step_length(&s, &z, tau, kappa, &dir)).min(1.0);
            if !(alpha > 1e-12) {
                break;
            }
            x.iter_mut().zip(&dir.x).for_each(|(a, b)| *a += alpha * b);
            y.iter_mut().zip(&dir.y).for_each(|(a, b)| *a += alpha * b);
            z.iter_mut().zip(&dir.z).for_each(|(a, b)| *a += alpha * b);
            s.iter_mut().zip(&dir.s).for_each(|(a, b)| *a += alpha * b);
            tau += alpha * dir.tau;
            kappa += alpha * dir.kappa;
            if !(tau > 0.0 && kappa > 0.0) {
                break;
            }
        }

        let (mut pres, mut dres, mut gap) = summary;
        if status == Status::IterLimit {
            if let Some((_, b)) = best {
                (x, y, z, s, tau) = (b.x, b.y, b.z, b.s, b.tau);
                (pres, dres, gap) = b.summary;
            }
        }
        let result = match status {
            Status::Optimal | Status::IterLimit => {
                let sc = |v: &[f64]| v.iter().map(|e| e / tau).collect::<Vec<f64>>();
                let (x, y, z, s) = (sc(&x), sc(&y), sc(&z), sc(&s));
                SolveResult {
                    status,
                    primal_objective: dot(&prog.c, &x),
                    dual_objective: -(dot(&prog.b, &y) + dot(&prog.h, &z)),
                    x,
                    s,
                    y,
                    z,
                    iterations,
                    gap,
                    primal_residual: pres,
                    dual_residual: dres,
                }
            }
            Status::Infeasible => {
                let k = -(dot(&prog.b, &y) + dot(&prog.h, &z));
                let y: Vec<f64> = y.iter().map(|v| v / k).collect();
                let z: Vec<f64> = z.iter().map(|v| v / k).collect();
                SolveResult {
                    status,
                    x: vec![f64::NAN; n],
                    s: vec![f64::NAN; m],
                    y,
                    z,
                    primal_objective: f64::INFINITY,
                    dual_objective: f64::INFINITY,
                    iterations,
                    gap: f64::NAN,
                    primal_residual: pres,
                    dual_residual: dres,
                }
            }
            Status::Unbounded => {
                let k = -dot(&prog.c, &x);
                let x: Vec<f64> = x.iter().map(|v| v / k).collect();
                let s: Vec<f64> = s.iter().map(|v| v / k).collect();
                SolveResult {
                    status,
                    x,
                    s,
                    y: vec![f64::NAN; p],
                    z: vec![f64::NAN; m],
                    primal_objective: f64::NEG_INFINITY,
                    dual_objective: f64::NEG_INFINITY,
                    iterations,
                    gap: f64::NAN,
                    primal_residual: pres,
                    dual_residual: dres,
                }
            }
        };
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::SparseMatrix;

    fn solve(prog: &ConeProgram) -> SolveResult {
        solve_socp(prog, &Settings::default()).unwrap()
    }

    #[test]
    fn norm_of_fixed_vector() {
        // minimize t s.t. ||(3,4)|| <= t
        let g = SparseMatrix::from_dense(3, 1, &[-1.0, 0.0, 0.0]);
        let prog = ConeProgram::new(vec![1.0], g, vec![0.0, 3.0, 4.0], vec![Cone::Soc(3)]).unwrap();
        let r = solve(&prog);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 5.0).abs() < 1e-7, "{:?}", r.x);
        assert!(r.gap <= 1e-8);
    }

    #[test]
    fn lower_bound_lp() {
        // minimize x s.t. x >= 3
        let g = SparseMatrix::from_dense(1, 1, &[-1.0]);
        let prog = ConeProgram::new(vec![1.0], g, vec![-3.0], vec![Cone::NonNeg(1)]).unwrap();
        let r = solve(&prog);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn equality_constrained() {
        // minimize x1 + x2 s.t. x1 - x2 = 1, ||(x2)|| <= x1 ... as LP: x >= 0
        let a = SparseMatrix::from_dense(1, 2, &[1.0, -1.0]);
        let g = SparseMatrix::from_dense(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let prog = ConeProgram::with_equalities(vec![1.0, 1.0], a, vec![1.0], g, vec![0.0, 0.0], vec![Cone::NonNeg(2)])
            .unwrap();
        let r = solve(&prog);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.primal_objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasible() {
        // x >= 1 and x <= 0
        let g = SparseMatrix::from_dense(2, 1, &[-1.0, 1.0]);
        let prog = ConeProgram::new(vec![1.0], g, vec![-1.0, 0.0], vec![Cone::NonNeg(2)]).unwrap();
        let r = solve(&prog);
        assert_eq!(r.status, Status::Infeasible);
        // Farkas: z >= 0, G'z = 0, h'z < 0
        assert!(r.z.iter().all(|v| *v >= -1e-9));
        let gtz = -r.z[0] + r.z[1];
        assert!(gtz.abs() < 1e-7);
        assert!(-r.z[0] < 0.0);
    }

    #[test]
    fn detects_unbounded() {
        // minimize -x s.t. x >= 0
        let g = SparseMatrix::from_dense(1, 1, &[-1.0]);
        let prog = ConeProgram::new(vec![-1.0], g, vec![0.0], vec![Cone::NonNeg(1)]).unwrap();
        let r = solve(&prog);
        assert_eq!(r.status, Status::Unbounded);
        assert!(r.x[0] > 0.0);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = SparseMatrix::from_dense(3, 1, &[-1.0, 0.0, 0.0]);
        let prog = ConeProgram::new(vec![1.0], g, vec![0.0, 3.0, 4.0], vec![Cone::Soc(3)]).unwrap();
        let r = solve_socp(
            &prog,
            &Settings {
                max_iter: 1,
                ..Settings::default()
            },
        )
        .unwrap();
        assert_eq!(r.status, Status::IterLimit);
        assert_eq!(r.iterations, 1);
    }
}
