//! Centralized total power minimization as a linear program in the powers.
//!
//! Every SINR requirement `SINR_{l,k} >= xi_hat` is linear in the powers
//! once the denominator is multiplied out:
//!
//! ```text
//! G gamma rho_{l,k} - xi_hat (G sum_{i != l} gamma^i rho_{i,k}
//!                             + sum_i sum_t z^i rho_{i,t}) >= xi_hat sigma^2
//! ```
//!
//! Gains are divided by the downlink noise power before the program is
//! built, so the right-hand side is just `xi_hat` and the coefficients are
//! SNR-like numbers of moderate size rather than values near `1e-13`.

use std::io::Write;

use crate::conic::{solve_lp, Cone, ConeProgram, Settings, SolveResult, SparseMatrix, Status};
use crate::error::{Error, Result};
use crate::system::{all_sinr, se_from_sinr, CellArray, EffectiveGains, NetworkScenario, PowerAllocation, SinrTargets};

/// Relative SINR shortfall tolerated when replaying an optimal allocation.
pub const REPLAY_TOL: f64 = 1e-7;

/// Layout of the centralized program: `rho_{l,k}` is variable `l K + k`;
/// rows are the `KL` SINR constraints, then `L` budgets, then `KL` sign
/// constraints.
#[derive(Debug, Clone)]
pub struct CentralizedLp {
    pub program: ConeProgram,
    pub cells: usize,
    pub users: usize,
}

impl CentralizedLp {
    pub fn num_vars(&self) -> usize {
        self.cells * self.users
    }

    /// SINR rows plus budget rows; the sign rows are not counted.
    pub fn num_structural_rows(&self) -> usize {
        self.cells * self.users + self.cells
    }

    pub fn var(&self, l: usize, k: usize) -> usize {
        l * self.users + k
    }
}

/// Builds the centralized program with gains expressed relative to the
/// downlink noise power.
pub fn build_centralized_lp(
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
) -> CentralizedLp {
    let (cells, users) = (scenario.cells(), scenario.users());
    let n = cells * users;
    let norm = gains.scaled(1.0 / scenario.sigma_dl_sq);
    let g = norm.array_gain;
    let var = |l: usize, k: usize| l * users + k;

    let mut trip = Vec::new();
    let mut h = Vec::with_capacity(2 * n + cells);
    for l in 0..cells {
        for k in 0..users {
            let row = var(l, k);
            let xi = targets.xi_hat.get(l, k);
            let mut coef = vec![0.0; n];
            coef[var(l, k)] -= g * norm.gamma.get(l, l, k);
            for i in 0..cells {
                if i != l {
                    coef[var(i, k)] += xi * g * norm.gamma.get(i, l, k);
                }
                let z = norm.z_gain.get(i, l, k);
                for t in 0..users {
                    coef[var(i, t)] += xi * z;
                }
            }
            trip.extend(
                coef.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (row, j, v)),
            );
            h.push(-xi);
        }
    }
    for l in 0..cells {
        for k in 0..users {
            trip.push((n + l, var(l, k), 1.0));
        }
        h.push(scenario.p_max[l]);
    }
    for j in 0..n {
        trip.push((n + cells + j, j, -1.0));
        h.push(0.0);
    }
    let rows = h.len();
    let gmat = SparseMatrix::from_triplets(rows, n, trip);
    let program = ConeProgram::new(vec![1.0; n], gmat, h, vec![Cone::NonNeg(rows)])
        .expect("centralized program dimensions are consistent by construction");
    CentralizedLp { program, cells, users }
}

/// Result of the centralized solve.
#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    /// `Optimal` or `Infeasible` (QoS targets unachievable within budgets).
    pub status: Status,
    /// Optimal powers in watts; all zeros when infeasible.
    pub allocation: PowerAllocation,
    /// Total transmit power in watts (`+inf` when infeasible).
    pub total_power: f64,
    /// Closed-form SINR of every user under `allocation`.
    pub sinr: CellArray,
    pub solve: SolveResult,
}

impl CentralizedSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves the centralized program and replays every SINR constraint
/// against the closed-form expression.
pub fn solve_centralized(
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
) -> Result<CentralizedSolution> {
    let lp = build_centralized_lp(scenario, gains, targets);
    let solve = solve_lp(&lp.program, &Settings::default())?;
    let (cells, users) = (lp.cells, lp.users);
    match solve.status {
        Status::Optimal => {}
        Status::Infeasible => {
            let allocation = PowerAllocation::zeros(cells, users);
            let sinr = all_sinr(&allocation, gains, scenario);
            return Ok(CentralizedSolution {
                status: Status::Infeasible,
                allocation,
                total_power: f64::INFINITY,
                sinr,
                solve,
            });
        }
        other => {
            return Err(Error::Solver(format!(
                "centralized program ended with status {other:?}"
            )))
        }
    }
    let rho = CellArray::from_fn(cells, users, |l, k| solve.x[lp.var(l, k)].max(0.0));
    let allocation = PowerAllocation { rho };
    let sinr = all_sinr(&allocation, gains, scenario);
    for l in 0..cells {
        for k in 0..users {
            let xi = targets.xi_hat.get(l, k);
            if sinr.get(l, k) < xi * (1.0 - REPLAY_TOL) - REPLAY_TOL {
                return Err(Error::Solver(format!(
                    "replayed SINR of user ({l},{k}) is {} below target {xi}",
                    sinr.get(l, k)
                )));
            }
        }
    }
    Ok(CentralizedSolution {
        status: Status::Optimal,
        total_power: allocation.total(),
        allocation,
        sinr,
        solve,
    })
}

/// Writes an allocation as CSV with header `l,k,rho_watts,sinr,se`.
pub fn write_allocation_csv<W: Write>(
    w: W,
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    allocation: &PowerAllocation,
) -> Result<()> {
    let sinr = all_sinr(allocation, gains, scenario);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["l", "k", "rho_watts", "sinr", "se"])
        .map_err(csv_err)?;
    for l in 0..scenario.cells() {
        for k in 0..scenario.users() {
            let s = sinr.get(l, k);
            out.serialize((l, k, allocation.rho.get(l, k), s, se_from_sinr(s, &scenario.config)))
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}
