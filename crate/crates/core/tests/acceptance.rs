//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use mimo_power_core::centralized::solve_centralized;
use mimo_power_core::conic::{solve_lp, solve_socp, Cone, ConeProgram, Settings, SparseMatrix, Status};
use mimo_power_core::dual::complexity_estimate;
use mimo_power_core::experiment::{
    count_signaling, qos_satisfied_fraction, run_drops, ConvergenceSummary, ExperimentConfig, Strategy,
};
use mimo_power_core::montecarlo::{simulate_sinr_terms, TermKind};
use mimo_power_core::network::{drop_seed, generate_drop, DropConfig};
use mimo_power_core::system::{
    qos_to_sinr_target, CellArray, EffectiveGains, NetworkScenario, PowerAllocation, Precoding,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Random SOCP with a planted primal-dual pair `(x, s, z)`: `s` and `z` are
/// complementary members of the cone, `h = G x + s` and `c = -G' z`, so
/// `c'x` is the optimal value.
fn planted_socp(rng: &mut ChaCha8Rng) -> (ConeProgram, f64) {
    let n = rng.random_range(2..=8);
    let mut cones = vec![Cone::NonNeg(rng.random_range(1..=6))];
    for _ in 0..rng.random_range(1..=3) {
        cones.push(Cone::Soc(rng.random_range(2..=5)));
    }
    let mut m: usize = cones.iter().map(|c| c.dim()).sum();
    if m < n {
        cones.push(Cone::NonNeg(n - m));
        m = n;
    }
    let (mut s, mut z) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for cone in &cones {
        match *cone {
            Cone::NonNeg(d) => {
                for _ in 0..d {
                    let v = rng.random_range(0.1..2.0);
                    if rng.random_bool(0.5) {
                        s.push(v);
                        z.push(0.0);
                    } else {
                        s.push(0.0);
                        z.push(v);
                    }
                }
            }
            Cone::Soc(d) => {
                let u = unit_vector(rng, d - 1);
                let (a, b) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
                match rng.random_range(0..3) {
                    0 => {
                        let r = rng.random_range(0.0..1.0);
                        s.push(a);
                        s.extend(u.iter().map(|v| a * r * v));
                        z.extend(std::iter::repeat_n(0.0, d));
                    }
                    1 => {
                        let r = rng.random_range(0.0..1.0);
                        s.extend(std::iter::repeat_n(0.0, d));
                        z.push(b);
                        z.extend(u.iter().map(|v| b * r * v));
                    }
                    _ => {
                        s.push(a);
                        s.extend(u.iter().map(|v| a * v));
                        z.push(b);
                        z.extend(u.iter().map(|v| -b * v));
                    }
                }
            }
        }
    }
    let g: Vec<f64> = (0..m * n).map(|_| normal(rng)).collect();
    let x: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let mut h = s.clone();
    let mut c = vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            h[i] += g[i * n + j] * x[j];
            c[j] -= g[i * n + j] * z[i];
        }
    }
    let optimum = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let prog = ConeProgram::new(c, SparseMatrix::from_dense(m, n, &g), h, cones).unwrap();
    (prog, optimum)
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_obj, mut worst_gap, mut failures) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let (prog, optimum) = planted_socp(&mut rng);
        let r = solve_socp(&prog, &Settings::default()).unwrap();
        if r.status != Status::Optimal {
            failures += 1;
            continue;
        }
        worst_obj = worst_obj.max((r.primal_objective - optimum).abs() / optimum.abs().max(1.0));
        worst_gap = worst_gap.max(r.gap);
    }
    verdict(
        failures == 0 && worst_obj <= 1e-6 && worst_gap <= 1e-8,
        format!("100 planted SOCPs, non-optimal {failures}, max rel objective error {worst_obj:.1e}, max gap {worst_gap:.1e}"),
    )
}

/// `min c'x, D x <= e, 0 <= x <= 1` with `e >= 0`, so `x = 0` is feasible.
fn random_lp(rng: &mut ChaCha8Rng) -> ConeProgram {
    let n = rng.random_range(2..=10);
    let k = rng.random_range(1..=8);
    let mut trip = Vec::new();
    for i in 0..k {
        for j in 0..n {
            trip.push((i, j, rng.random_range(-1.0..1.0)));
        }
    }
    for j in 0..n {
        trip.push((k + j, j, -1.0));
        trip.push((k + n + j, j, 1.0));
    }
    let mut h: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    h.extend(std::iter::repeat_n(0.0, n));
    h.extend(std::iter::repeat_n(1.0, n));
    let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = h.len();
    ConeProgram::new(c, SparseMatrix::from_triplets(m, n, trip), h, vec![Cone::NonNeg(m)]).unwrap()
}

/// Rewrites every scalar inequality `t >= 0` of an orthant-only program as
/// the second-order cone constraint `(t, 0)`.
fn as_degenerate_socp(lp: &ConeProgram) -> ConeProgram {
    let m = lp.h.len();
    let trip = lp.g.triplets().map(|(i, j, v)| (2 * i, j, v)).collect();
    let h = lp.h.iter().flat_map(|&v| [v, 0.0]).collect();
    let g = SparseMatrix::from_triplets(2 * m, lp.c.len(), trip);
    ConeProgram::new(lp.c.clone(), g, h, vec![Cone::Soc(2); m]).unwrap()
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst, mut failures) = (0.0f64, 0);
    for _ in 0..50 {
        let lp = random_lp(&mut rng);
        let socp = as_degenerate_socp(&lp);
        let a = solve_lp(&lp, &Settings::default()).unwrap();
        let b = solve_socp(&socp, &Settings::default()).unwrap();
        if a.status != Status::Optimal || b.status != Status::Optimal {
            failures += 1;
            continue;
        }
        worst = worst.max((a.primal_objective - b.primal_objective).abs() / a.primal_objective.abs().max(1.0));
    }
    verdict(
        failures == 0 && worst <= 1e-7,
        format!("50 LPs, non-optimal {failures}, max rel objective difference {worst:.1e}"),
    )
}

/// Minimal solution of `rho = xi (noise + interference(rho)) / (G gamma)`
/// by monotone iteration from zero.
fn fixed_point_powers(s: &NetworkScenario, gains: &EffectiveGains, xi: &CellArray) -> Option<CellArray> {
    let (cells, users) = (s.cells(), s.users());
    let g = gains.array_gain;
    let mut rho = CellArray::zeros(cells, users);
    for _ in 0..1_000_000 {
        let next = CellArray::from_fn(cells, users, |l, k| {
            let mut denom = s.sigma_dl_sq;
            for i in 0..cells {
                if i != l {
                    denom += g * gains.gamma.get(i, l, k) * rho.get(i, k);
                }
                denom += gains.z_gain.get(i, l, k) * rho.row(i).iter().sum::<f64>();
            }
            xi.get(l, k) * denom / (g * gains.gamma.get(l, l, k))
        });
        let change = next
            .as_slice()
            .iter()
            .zip(rho.as_slice())
            .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        rho = next;
        if change <= 1e-15 {
            return Some(rho);
        }
    }
    None
}

fn two_cell(users: usize, antennas: usize) -> DropConfig {
    DropConfig {
        grid_cols: 2,
        grid_rows: 1,
        users,
        antennas,
        ..DropConfig::default()
    }
}

fn criterion_3() -> Verdict {
    let cfg = two_cell(2, 100);
    let (mut checked, mut worst, mut unconverged) = (0, 0.0f64, 0);
    let mut index = 0;
    while checked < 50 && index < 1000 {
        let mut s = generate_drop(&cfg, drop_seed(303, index)).unwrap().scenario;
        index += 1;
        // budgets far above anything the targets need
        s.p_max = vec![1e12; s.cells()];
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let lp = solve_centralized(&s, &gains, &t).unwrap();
        if !lp.is_feasible() {
            continue;
        }
        checked += 1;
        let Some(fp) = fixed_point_powers(&s, &gains, &t.xi_hat) else {
            unconverged += 1;
            continue;
        };
        for (a, b) in lp.allocation.rho.as_slice().iter().zip(fp.as_slice()) {
            worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
        }
    }
    verdict(
        checked == 50 && unconverged == 0 && worst <= 1e-6,
        format!("{checked} feasible drops, max rel per-user power difference {worst:.1e}"),
    )
}

fn criterion_4() -> Verdict {
    let mut cfg = ExperimentConfig {
        benchmark_tol: 0.01,
        ..ExperimentConfig::default()
    };
    cfg.drop = DropConfig {
        drops: 20,
        ..two_cell(2, 100)
    };
    let records = run_drops(&cfg).unwrap();
    let sum = ConvergenceSummary::from_records(&records);
    let frac = sum.converged as f64 / sum.feasible as f64;
    verdict(
        sum.feasible > 0 && frac >= 0.9,
        format!(
            "{}/{} feasible drops within 1% of the optimum",
            sum.converged, sum.feasible
        ),
    )
}

fn criteria_5_and_6() -> (Verdict, Verdict) {
    let cfg = ExperimentConfig::default();
    let started = Instant::now();
    let records = run_drops(&cfg).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let sum = ConvergenceSummary::from_records(&records);
    let one = sum.one_iteration_fraction();
    let over = sum.over_cap_fraction();
    let five = verdict(
        sum.feasible > 0 && (0.05..=0.25).contains(&one) && over <= 0.05,
        format!(
            "{} drops, {} feasible, one-iteration {:.1}%, over cap {:.1}% ({secs:.0} s)",
            sum.drops,
            sum.feasible,
            100.0 * one,
            100.0 * over
        ),
    );
    let served = qos_satisfied_fraction(&records, 0.95);
    let six = verdict(
        served >= 0.9,
        format!("{:.1}% of users at SE >= 0.95 of target", 100.0 * served),
    );
    (five, six)
}

fn criterion_7() -> Verdict {
    let s = generate_drop(&two_cell(2, 32), drop_seed(1, 0)).unwrap().scenario;
    let rho = PowerAllocation {
        rho: CellArray::from_fn(s.cells(), s.users(), |l, _| s.p_max[l] / s.users() as f64),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for scheme in [Precoding::Zf, Precoding::Mr] {
        let gains = EffectiveGains::new(&s, scheme);
        let rep = simulate_sinr_terms(&s, &gains, &rho, 10_000, 7).unwrap();
        let z = rep
            .terms
            .iter()
            .filter(|t| {
                matches!(
                    t.kind,
                    TermKind::Signal | TermKind::OwnSecondMoment | TermKind::Coherent | TermKind::NonCoherent
                )
            })
            .map(|t| t.z_score().abs())
            .fold(0.0, f64::max);
        let se = rep.se.iter().map(|c| c.relative_error()).fold(0.0, f64::max);
        pass &= z <= 3.0 && se <= 0.02;
        parts.push(format!("{scheme}: max |z| {z:.2}, max SE error {:.2}%", 100.0 * se));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_8() -> Verdict {
    let mut mismatches = Vec::new();
    for (l, k) in [(2u64, 1u64), (4, 10), (8, 5)] {
        for n in [1u64, 3, 17] {
            // grouped differently from the library on purpose
            let expected = [
                (Strategy::Centralized, l * k, 2 * k * l * (l + 1)),
                (Strategy::BasicDistributed, l * l * k, k * l * (l - 1) * (2 * l - 1)),
                (
                    Strategy::DualDecomposition,
                    l * (k * (2 * l - 1) + 1),
                    2 * k * (l - 1) * (2 * (l - 1) * n + l),
                ),
            ];
            for (strategy, vars, exchanged) in expected {
                let got = count_signaling(strategy, l as usize, k as usize, n as usize).unwrap();
                if (got.optimization_vars, got.exchanged_params) != (vars, exchanged) {
                    mismatches.push(format!("{strategy:?} L={l} K={k} N={n}"));
                }
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "six formulas at (2,1), (4,10), (8,5) for N in {1, 3, 17}".into()
        } else {
            format!("mismatch at {}", mismatches.join(", "))
        },
    )
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let l = rng.random_range(1..=16usize);
        let k = rng.random_range(1..=32usize);
        let eps = 10f64.powf(rng.random_range(-9.0..-1.0));
        let (lf, kf) = (l as f64, k as f64);
        let m = 2.0 * lf * kf - kf + 1.0;
        let delta = -eps.ln() * (4.0 + 2.0 * kf * lf).sqrt();
        let inner = kf.powi(3) * lf + 6.0 * kf * kf * lf + lf * lf * kf + 6.0 * kf * lf + 3.0 * kf + 5.0 + m.powi(2);
        let expected = m * inner * delta;
        let got = complexity_estimate(l, k, eps);
        worst = worst.max((got - expected).abs() / expected);
    }
    verdict(
        worst <= 1e-13,
        format!("10 random (L, K, eps), max rel difference {worst:.1e}"),
    )
}

fn main() -> ExitCode {
    let mut results = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
    ];
    let (five, six) = criteria_5_and_6();
    results.push((5, five));
    results.push((6, six));
    results.push((7, criterion_7()));
    results.push((8, criterion_8()));
    results.push((9, criterion_9()));

    let mut all = true;
    for (n, v) in &results {
        println!("criterion {n}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        all &= v.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
