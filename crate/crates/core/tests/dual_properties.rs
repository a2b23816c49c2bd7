use mimo_power_core::centralized::solve_centralized;
use mimo_power_core::dual::{run_dual_decomposition, solve_subproblem, DualOptions, PairTensor, StoppingRule};
use mimo_power_core::network::{drop_seed, generate_drop, DropConfig};
use mimo_power_core::system::{
    qos_to_sinr_target, CellArray, EffectiveGains, LinkTensor, NetworkScenario, Precoding, ScenarioConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn drop_cfg(users: usize) -> DropConfig {
    DropConfig {
        grid_cols: 2,
        grid_rows: 1,
        users,
        ..DropConfig::default()
    }
}

fn two_cell_drop(users: usize, seed: u64, index: usize) -> NetworkScenario {
    generate_drop(&drop_cfg(users), drop_seed(seed, index))
        .unwrap()
        .scenario
}

fn random_lambda(rng: &mut ChaCha8Rng, cells: usize, users: usize) -> PairTensor {
    let mut lambda = PairTensor::zeros(cells, users);
    for (l, i, k) in lambda.pairs().collect::<Vec<_>>() {
        lambda.set(l, i, k, rng.random_range(0.0..2.0));
    }
    lambda
}

#[test]
fn dual_function_lower_bounds_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for index in 0..15 {
        let s = two_cell_drop(2, 31, index);
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let central = solve_centralized(&s, &gains, &t).unwrap();
        if !central.is_feasible() {
            continue;
        }
        checked += 1;
        for trial in 0..4 {
            let lambda = if trial == 0 {
                PairTensor::zeros(2, 2)
            } else {
                random_lambda(&mut rng, 2, 2)
            };
            let dual: f64 = (0..2)
                .map(|l| solve_subproblem(l, &s, &gains, &t, &lambda).unwrap().s)
                .sum();
            assert!(
                dual <= central.total_power + 1e-6,
                "drop {index}: {dual} > {}",
                central.total_power
            );
        }
    }
    assert!(checked >= 8);
}

#[test]
fn every_iterate_respects_weak_duality() {
    let s = two_cell_drop(2, 31, 1);
    let gains = EffectiveGains::new(&s, Precoding::Zf);
    let t = qos_to_sinr_target(&s).unwrap();
    let central = solve_centralized(&s, &gains, &t).unwrap();
    assert!(central.is_feasible());
    let opts = DualOptions {
        max_iter: 60,
        ..DualOptions::default()
    };
    let out = run_dual_decomposition(&s, &gains, &t, &opts).unwrap();
    for it in &out.trace {
        assert!(it.dual_value <= central.total_power + 1e-6, "iteration {}", it.iter);
    }
}

#[test]
fn more_noise_never_lowers_the_local_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for index in 0..15 {
        let s = two_cell_drop(2, 32, index);
        let mut noisy = s.clone();
        noisy.sigma_dl_sq *= 2.0;
        let lambda = random_lambda(&mut rng, 2, 2);
        for l in 0..2 {
            let gains = EffectiveGains::new(&s, Precoding::Zf);
            let t = qos_to_sinr_target(&s).unwrap();
            let (Ok(a), Ok(b)) = (
                solve_subproblem(l, &s, &gains, &t, &lambda),
                solve_subproblem(l, &noisy, &gains, &t, &lambda),
            ) else {
                continue;
            };
            checked += 1;
            assert!(
                b.s >= a.s - 1e-7 * a.s.abs().max(1e-3),
                "drop {index} BS {l}: {} < {}",
                b.s,
                a.s
            );
        }
    }
    assert!(checked >= 10);
}

#[test]
fn epigraph_encoding_is_consistent_at_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for index in 0..10 {
        let s = two_cell_drop(2, 33, index);
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let lambda = random_lambda(&mut rng, 2, 2);
        for l in 0..2 {
            let Ok(sol) = solve_subproblem(l, &s, &gains, &t, &lambda) else {
                continue;
            };
            let (x, y) = (sol.s, sol.epigraph_y);
            let identity = 0.25 * (1.0 + x - y).powi(2) - 0.25 * (1.0 - x + y).powi(2) - (x - y);
            assert!(identity.abs() <= 1e-9 * (1.0 + (x - y).abs()));
            // the epigraph is tight at the optimum: s - y = sum of powers
            let p = sol.power();
            assert!((x - y - p).abs() <= 1e-6 * (1.0 + p), "drop {index}: {} vs {p}", x - y);
        }
    }
}

#[test]
fn single_cell_subproblem_matches_centralized() {
    let cfg = DropConfig {
        grid_cols: 1,
        grid_rows: 1,
        users: 4,
        ..DropConfig::default()
    };
    let mut checked = 0;
    for index in 0..10 {
        let s = generate_drop(&cfg, drop_seed(9, index)).unwrap().scenario;
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let central = solve_centralized(&s, &gains, &t).unwrap();
        if !central.is_feasible() {
            continue;
        }
        checked += 1;
        let sol = solve_subproblem(0, &s, &gains, &t, &PairTensor::zeros(1, 4)).unwrap();
        let p = sol.power();
        assert!(
            (p - central.total_power).abs() <= 1e-6 * central.total_power,
            "{p} vs {}",
            central.total_power
        );
        // per-user powers carry the interior-point accuracy
        for k in 0..4 {
            let (a, b) = (sol.rho_tilde[k].powi(2), central.allocation.rho.get(0, k));
            assert!((a - b).abs() <= 1e-5 * b, "user {k}: {a} vs {b}");
        }
    }
    assert!(checked >= 5);
}

#[test]
fn symmetric_pair_converges_to_the_optimum() {
    for (own, cross) in [(1e-10, 1e-12), (3e-10, 2e-11), (5e-11, 5e-12)] {
        let beta = LinkTensor::from_fn(2, 1, |bs, cell, _| if bs == cell { own } else { cross });
        let s = NetworkScenario::new(
            ScenarioConfig::new(2, 1, 64, 200).unwrap(),
            beta,
            CellArray::filled(2, 1, 0.2),
            1e-13,
            1e-13,
            vec![40.0; 2],
            CellArray::filled(2, 1, 1.0),
        )
        .unwrap();
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let central = solve_centralized(&s, &gains, &t).unwrap();
        // tolerances far below the default, so the returned iterate is the
        // best one within the cap rather than the first acceptable one
        let opts = DualOptions {
            stopping: StoppingRule::Consistency {
                residual_tol: 1e-7,
                qos_tol: 1e-7,
            },
            ..DualOptions::default()
        };
        let out = run_dual_decomposition(&s, &gains, &t, &opts).unwrap();
        let p = out.allocation.total();
        assert!(
            (p - central.total_power).abs() <= 1e-3 * central.total_power,
            "{p} vs {}",
            central.total_power
        );
    }
}

#[test]
fn residual_falls_below_tolerance_in_most_drops() {
    let opts = DualOptions {
        parallel: false,
        ..DualOptions::default()
    };
    let tol = match opts.stopping {
        StoppingRule::Consistency { residual_tol, .. } => residual_tol,
        StoppingRule::NearOptimum { .. } => unreachable!(),
    };
    let outcomes: Vec<Option<bool>> = (0..100)
        .into_par_iter()
        .map(|index| {
            let s = two_cell_drop(2, 1, index);
            let gains = EffectiveGains::new(&s, Precoding::Zf);
            let t = qos_to_sinr_target(&s).unwrap();
            if !solve_centralized(&s, &gains, &t).unwrap().is_feasible() {
                return None;
            }
            let out = run_dual_decomposition(&s, &gains, &t, &opts).ok()?;
            Some(out.trace.iter().any(|it| it.max_residual <= tol))
        })
        .collect();
    let feasible = outcomes.iter().flatten().count();
    let reached = outcomes.iter().flatten().filter(|r| **r).count();
    assert!(feasible >= 50);
    assert!(reached as f64 >= 0.9 * feasible as f64, "{reached}/{feasible}");
}
