//! Cone algebra: membership, step-to-boundary, Jordan products and
//! Nesterov-Todd scalings for orthants and second-order cones.

/// One block of the constraint cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Nonnegative orthant of the given dimension.
    NonNeg(usize),
    /// Second-order cone `{(t, u) : ||u|| <= t}` of the given dimension.
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg(d) | Cone::Soc(d) => d,
        }
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg(d) => d,
            Cone::Soc(_) => 1,
        }
    }

    /// Zero inside the cone, otherwise the amount by which `x` sticks out.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.min_shift(x).max(0.0)
    }

    /// Smallest `a` with `x + a e` in the cone, `e` the identity element.
    pub(crate) fn min_shift(&self, x: &[f64]) -> f64 {
        match self {
            Cone::NonNeg(_) => x.iter().fold(f64::NEG_INFINITY, |m, v| m.max(-v)),
            Cone::Soc(_) => soc_tail_norm(x) - x[0],
        }
    }

    pub(crate) fn add_identity(&self, x: &mut [f64], a: f64) {
        match self {
            Cone::NonNeg(_) => x.iter_mut().for_each(|v| *v += a),
            Cone::Soc(_) => x[0] += a,
        }
    }

    /// Largest step `a >= 0` with `x + a dx` in the cone (`x` interior).
    pub(crate) fn max_step(&self, x: &[f64], dx: &[f64]) -> f64 {
        match self {
            Cone::NonNeg(_) => x
                .iter()
                .zip(dx)
                .filter(|(_, d)| **d < 0.0)
                .fold(f64::INFINITY, |m, (v, d)| m.min(-v / d)),
            Cone::Soc(_) => soc_max_step(x, dx),
        }
    }
}

/// True when `x` lies in `cone` up to `tol`.
pub fn in_cone(cone: &Cone, x: &[f64], tol: f64) -> bool {
    cone.violation(x) <= tol
}

fn soc_tail_norm(x: &[f64]) -> f64 {
    x[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `x0^2 - ||x1||^2` evaluated as a product to limit cancellation.
fn soc_det(x: &[f64]) -> f64 {
    let t = soc_tail_norm(x);
    (x[0] - t) * (x[0] + t)
}

fn soc_max_step(x: &[f64], dx: &[f64]) -> f64 {
    let tail = |u: &[f64], v: &[f64]| -> f64 { u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum() };
    let a = dx[0] * dx[0] - tail(dx, dx);
    let b = x[0] * dx[0] - tail(x, dx);
    let c = soc_det(x);
    if c <= 0.0 {
        return 0.0;
    }
    // f(a) = a t^2 + 2 b t + c, first positive root
    let mut step = f64::INFINITY;
    if a.abs() <= 1e-300 {
        if b < 0.0 {
            step = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            for r in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if r > 0.0 && r < step {
                    step = r;
                }
            }
        }
    }
    // The linear condition x0 + t dx0 >= 0 can only bind on the far branch.
    if dx[0] < 0.0 {
        step = step.min(-x[0] / dx[0]);
    }
    step
}

/// Nesterov-Todd scaling of one cone block.
#[derive(Debug, Clone)]
pub(crate) enum BlockScaling {
    NonNeg {
        w: Vec<f64>,
    },
    /// `W = eta (2 v v' - J)`, `J = diag(1, -I)`.
    Soc {
        eta: f64,
        v: Vec<f64>,
    },
}

impl BlockScaling {
    pub(crate) fn identity(cone: &Cone) -> Self {
        match *cone {
            Cone::NonNeg(d) => BlockScaling::NonNeg { w: vec![1.0; d] },
            Cone::Soc(d) => {
                let mut wbar = vec![0.0; d];
                wbar[0] = 1.0;
                BlockScaling::Soc { eta: 1.0, v: wbar }
            }
        }
    }

    /// Scaling `W` with `W z = W^{-1} s`; `None` if either point is not
    /// strictly interior.
    pub(crate) fn compute(cone: &Cone, s: &[f64], z: &[f64]) -> Option<Self> {
        match cone {
            Cone::NonNeg(_) => {
                if s.iter().chain(z).any(|v| !(*v > 0.0)) {
                    return None;
                }
                Some(BlockScaling::NonNeg {
                    w: s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect(),
                })
            }
            Cone::Soc(_) => {
                let sd = soc_det(s);
                let zd = soc_det(z);
                if !(sd > 0.0 && zd > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                    return None;
                }
                let (sn, zn) = (sd.sqrt(), zd.sqrt());
                let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let zbar: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let sz: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + sz) / 2.0).sqrt();
                let mut wbar: Vec<f64> = sbar.iter().zip(&zbar).map(|(a, b)| -b + a).collect();
                wbar[0] = sbar[0] + zbar[0];
                wbar.iter_mut().for_each(|v| *v /= 2.0 * gamma);
                // W = eta (2 v v' - J) with v = (wbar + e) / sqrt(2 (1 + wbar_0))
                let denom = (2.0 * (1.0 + wbar[0])).sqrt();
                wbar[0] += 1.0;
                wbar.iter_mut().for_each(|v| *v /= denom);
                let eta = (sd / zd).powf(0.25);
                if !eta.is_finite() || wbar.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                Some(BlockScaling::Soc { eta, v: wbar })
            }
        }
    }

    /// `out = W x`.
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            BlockScaling::NonNeg { w } => {
                for i in 0..w.len() {
                    out[i] = w[i] * x[i];
                }
            }
            BlockScaling::Soc { eta, v: wbar } => {
                let wx: f64 = wbar.iter().zip(x).map(|(a, b)| a * b).sum();
                out[0] = eta * (2.0 * wbar[0] * wx - x[0]);
                for i in 1..x.len() {
                    out[i] = eta * (2.0 * wbar[i] * wx + x[i]);
                }
            }
        }
    }

    /// `out = W^{-1} x`.
    pub(crate) fn apply_inv(&self, x: &[f64], out: &mut [f64]) {
        match self {
            BlockScaling::NonNeg { w } => {
                for i in 0..w.len() {
                    out[i] = x[i] / w[i];
                }
            }
            BlockScaling::Soc { eta, v: wbar } => {
                // W^{-1} = (2 J v v' J - J) / eta
                let wjx = wbar[0] * x[0] - wbar[1..].iter().zip(&x[1..]).map(|(a, b)| a * b).sum::<f64>();
                out[0] = (2.0 * wbar[0] * wjx - x[0]) / eta;
                for i in 1..x.len() {
                    out[i] = (-2.0 * wbar[i] * wjx + x[i]) / eta;
                }
            }
        }
    }
}

/// Jordan product `out = a o b` on one block.
pub(crate) fn circ(cone: &Cone, a: &[f64], b: &[f64], out: &mut [f64]) {
    match cone {
        Cone::NonNeg(_) => {
            for i in 0..a.len() {
                out[i] = a[i] * b[i];
            }
        }
        Cone::Soc(_) => {
            let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            for i in 1..a.len() {
                out[i] = a[0] * b[i] + b[0] * a[i];
            }
            out[0] = ab;
        }
    }
}

/// Solves `lambda o v = u` for `v` on one block (`lambda` interior).
pub(crate) fn circ_solve(cone: &Cone, lambda: &[f64], u: &[f64], out: &mut [f64]) {
    match cone {
        Cone::NonNeg(_) => {
            for i in 0..u.len() {
                out[i] = u[i] / lambda[i];
            }
        }
        Cone::Soc(_) => {
            let det = soc_det(lambda);
            let l1u1: f64 = lambda[1..].iter().zip(&u[1..]).map(|(a, b)| a * b).sum();
            let v0 = (lambda[0] * u[0] - l1u1) / det;
            out[0] = v0;
            for i in 1..u.len() {
                out[i] = (u[i] - v0 * lambda[i]) / lambda[0];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interior_soc(v: &[f64], margin: f64) -> Vec<f64> {
        let mut x = v.to_vec();
        x[0] = soc_tail_norm(v) + margin;
        x
    }

    #[test]
    fn violation_and_shift() {
        let q = Cone::Soc(3);
        assert_eq!(q.violation(&[5.0, 3.0, 4.0]), 0.0);
        assert!((q.violation(&[4.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
        let l = Cone::NonNeg(2);
        assert_eq!(l.min_shift(&[1.0, -2.0]), 2.0);
    }

    #[test]
    fn soc_step_to_boundary() {
        let q = Cone::Soc(2);
        // (1, 0) + a(0, 1) leaves the cone at a = 1
        let a = q.max_step(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((a - 1.0).abs() < 1e-14);
        // moving toward the axis never leaves
        assert!(q.max_step(&[1.0, 0.0], &[1.0, 0.0]).is_infinite());
        // straight to the apex
        let a = q.max_step(&[2.0, 1.0], &[-2.0, -1.0]);
        assert!((a - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nt_scaling_identities(
            sv in prop::collection::vec(-2.0f64..2.0, 4),
            zv in prop::collection::vec(-2.0f64..2.0, 4),
            ms in 0.01f64..3.0,
            mz in 0.01f64..3.0,
        ) {
            let cone = Cone::Soc(4);
            let s = interior_soc(&sv, ms);
            let z = interior_soc(&zv, mz);
            let w = BlockScaling::compute(&cone, &s, &z).unwrap();
            let mut wz = vec![0.0; 4];
            let mut wis = vec![0.0; 4];
            w.apply(&z, &mut wz);
            w.apply_inv(&s, &mut wis);
            for i in 0..4 {
                prop_assert!((wz[i] - wis[i]).abs() <= 1e-9 * (1.0 + wz[i].abs()));
            }
            // W^{-1} W = I
            let x = [0.3, -1.2, 0.7, 2.0];
            let mut a = vec![0.0; 4];
            let mut b = vec![0.0; 4];
            w.apply(&x, &mut a);
            w.apply_inv(&a, &mut b);
            for i in 0..4 {
                prop_assert!((b[i] - x[i]).abs() <= 1e-9 * (1.0 + x[i].abs()));
            }
        }

        #[test]
        fn circ_solve_inverts_circ(
            lv in prop::collection::vec(-2.0f64..2.0, 5),
            v in prop::collection::vec(-2.0f64..2.0, 5),
            m in 0.05f64..2.0,
        ) {
            let cone = Cone::Soc(5);
            let lambda = interior_soc(&lv, m);
            let mut u = vec![0.0; 5];
            circ(&cone, &lambda, &v, &mut u);
            let mut back = vec![0.0; 5];
            circ_solve(&cone, &lambda, &u, &mut back);
            for i in 0..5 {
                prop_assert!((back[i] - v[i]).abs() <= 1e-7 * (1.0 + v[i].abs()));
            }
        }

        #[test]
        fn max_step_lands_on_boundary(
            xv in prop::collection::vec(-2.0f64..2.0, 3),
            d in prop::collection::vec(-2.0f64..2.0, 3),
            m in 0.05f64..2.0,
        ) {
            let cone = Cone::Soc(3);
            let x = interior_soc(&xv, m);
            let a = cone.max_step(&x, &d);
            prop_assert!(a > 0.0);
            if a.is_finite() && a < 1e6 {
                let p: Vec<f64> = x.iter().zip(&d).map(|(u, v)| u + a * v).collect();
                let scale = 1.0 + p[0].abs();
                prop_assert!((p[0] - soc_tail_norm(&p)).abs() <= 1e-8 * scale);
                let inside: Vec<f64> = x.iter().zip(&d).map(|(u, v)| u + 0.99 * a * v).collect();
                prop_assert!(cone.violation(&inside) == 0.0);
            }
        }
    }
}
