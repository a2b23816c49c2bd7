//! Distributed power minimization by dual decomposition.
//!
//! Powers are written as `rho = rho_tilde^2`. The inter-cell interference
//! that BS `i` causes at user `(l,k)`,
//!
//! ```text
//! G gamma^i_{l,k} rho_{i,k} + z^i_{l,k} sum_t rho_{i,t},
//! ```
//!
//! is bounded by the square of an *exact* consistency variable
//! `theta[l][i][k]` owned by BS `i`, while BS `l` plans with a *believed*
//! value `theta_tilde[l][i][k]`. Relaxing `theta <= theta_tilde` with
//! multipliers `lambda >= 0` splits the problem into one second-order cone
//! program per base station. A master entity then moves the multipliers
//! along the subgradient `theta_tilde - theta`.
//!
//! All subproblems are built with gains divided by the downlink noise
//! power, so the consistency variables are square roots of interference
//! to noise ratios and the multipliers are in watts per unit of them.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::centralized::csv_err;
use crate::conic::{solve_socp, Cone, ConeProgram, Settings, SparseMatrix, Status};
use crate::error::{Error, Result};
use crate::system::{all_sinr, CellArray, EffectiveGains, NetworkScenario, PowerAllocation, SinrTargets};

/// Tensor over ordered cell pairs `(l, i)` with `i != l`, times users.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTensor {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl PairTensor {
    pub fn zeros(cells: usize, users: usize) -> Self {
        Self::filled(cells, users, 0.0)
    }

    pub fn filled(cells: usize, users: usize, value: f64) -> Self {
        Self {
            cells,
            users,
            data: vec![value; cells * cells.saturating_sub(1) * users],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    fn index(&self, l: usize, i: usize, k: usize) -> usize {
        assert!(l != i, "pair tensors have no diagonal (l = i = {l})");
        assert!(l < self.cells && i < self.cells && k < self.users);
        (l * (self.cells - 1) + slot(l, i)) * self.users + k
    }

    pub fn get(&self, l: usize, i: usize, k: usize) -> f64 {
        self.data[self.index(l, i, k)]
    }

    pub fn set(&mut self, l: usize, i: usize, k: usize, value: f64) {
        let idx = self.index(l, i, k);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// All `(l, i, k)` with `i != l`, in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let (cells, users) = (self.cells, self.users);
        (0..cells).flat_map(move |l| {
            (0..cells)
                .filter(move |&i| i != l)
                .flat_map(move |i| (0..users).map(move |k| (l, i, k)))
        })
    }
}

/// Position of cell `i` among the `L - 1` cells other than `l`.
fn slot(l: usize, i: usize) -> usize {
    if i < l {
        i
    } else {
        i - 1
    }
}

/// Consistency variables and multipliers, all indexed `(l, i, k)`: user
/// `k` of cell `l` as seen from interfering BS `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyState {
    /// Exact interference amplitude, computed by BS `i`.
    pub theta: PairTensor,
    /// Interference amplitude believed by BS `l`.
    pub theta_tilde: PairTensor,
    pub lambda: PairTensor,
}

impl ConsistencyState {
    pub fn new(cells: usize, users: usize, lambda_init: f64) -> Self {
        Self {
            theta: PairTensor::zeros(cells, users),
            theta_tilde: PairTensor::zeros(cells, users),
            lambda: PairTensor::filled(cells, users, lambda_init),
        }
    }

    /// `max |theta_tilde - theta|` over all pairs.
    pub fn max_residual(&self) -> f64 {
        self.theta
            .as_slice()
            .iter()
            .zip(self.theta_tilde.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Projected subgradient step on the multipliers:
/// `lambda <- max(0, lambda - step (theta_tilde - theta))`.
pub fn subgradient_update(state: &ConsistencyState, step: f64) -> ConsistencyState {
    assert!(step > 0.0, "step size must be positive");
    let mut next = state.clone();
    for (lam, (t, tt)) in next
        .lambda
        .data
        .iter_mut()
        .zip(state.theta.as_slice().iter().zip(state.theta_tilde.as_slice()))
    {
        *lam = (*lam - step * (tt - t)).max(0.0);
    }
    next
}

/// Interference that BS `i` causes at user `(l,k)`, `i != l`: the quantity
/// bounded by the squared consistency variables.
pub fn cross_interference(rho: &PowerAllocation, gains: &EffectiveGains, i: usize, l: usize, k: usize) -> f64 {
    let total: f64 = rho.rho.row(i).iter().sum();
    gains.array_gain * gains.gamma.get(i, l, k) * rho.rho.get(i, k) + gains.z_gain.get(i, l, k) * total
}

/// Non-coherent interference among the users of cell `l` at user `(l,k)`.
pub fn local_interference(rho: &PowerAllocation, gains: &EffectiveGains, l: usize, k: usize) -> f64 {
    let total: f64 = rho.rho.row(l).iter().sum();
    gains.z_gain.get(l, l, k) * total
}

/// Variable layout of the subproblem of one base station.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemLayout {
    pub cells: usize,
    pub users: usize,
    pub bs: usize,
}

impl SubproblemLayout {
    pub fn num_vars(&self) -> usize {
        self.users * (2 * self.cells - 1) + 1
    }

    pub fn rho_tilde(&self, k: usize) -> usize {
        k
    }

    /// `theta[i][l][k]`: amplitude of this BS's interference at user `(i,k)`.
    pub fn theta(&self, i: usize, k: usize) -> usize {
        self.users + slot(self.bs, i) * self.users + k
    }

    /// `theta_tilde[l][i][k]`: believed interference from BS `i` at local user `k`.
    pub fn theta_tilde(&self, i: usize, k: usize) -> usize {
        self.users * self.cells + slot(self.bs, i) * self.users + k
    }

    pub fn s(&self) -> usize {
        self.num_vars() - 1
    }

    fn others(&self) -> impl Iterator<Item = usize> {
        let bs = self.bs;
        (0..self.cells).filter(move |&i| i != bs)
    }
}

/// Noise-normalized data shared by the subproblem builder and the replay.
struct Local<'a> {
    gains: EffectiveGains,
    targets: &'a SinrTargets,
    p_max: &'a [f64],
    unit_w: f64,
}

impl<'a> Local<'a> {
    fn new(scenario: &'a NetworkScenario, gains: &EffectiveGains, targets: &'a SinrTargets, unit_w: f64) -> Self {
        assert!(unit_w > 0.0, "power unit must be positive");
        Self {
            gains: gains.scaled(1.0 / scenario.sigma_dl_sq),
            targets,
            p_max: &scenario.p_max,
            unit_w,
        }
    }

    /// Upper bound on the amplitude of BS `i`'s interference at `(l,k)`,
    /// twice the largest value any budget-feasible allocation can produce.
    fn amplitude_bound(&self, i: usize, l: usize, k: usize) -> f64 {
        let g = &self.gains;
        2.0 * self.weight(l, k) * ((g.array_gain * g.gamma.get(i, l, k) + g.z_gain.get(i, l, k)) * self.p_max[i]).sqrt()
    }

    /// Scale of the consistency variables of user `(l,k)`:
    /// `sqrt(xi_hat / (G gamma unit_w))`. A squared amplitude is then the
    /// extra transmit power BS `l` needs to offset that interference,
    /// counted in `unit_w`, so multipliers of strong and weak users live on
    /// comparable scales.
    fn weight(&self, l: usize, k: usize) -> f64 {
        let own = self.gains.array_gain * self.gains.gamma.get(l, l, k) * self.unit_w;
        let xi = self.targets.xi_hat.get(l, k);
        if xi > 0.0 {
            (xi / own).sqrt()
        } else {
            own.sqrt().recip()
        }
    }
}

/// Builds the conic program of base station `l` for the given multipliers.
///
/// Cone order: one orthant block (signs of `rho_tilde`, `theta`,
/// `theta_tilde`, then upper bounds on `theta` and `theta_tilde`), a QoS
/// cone of dimension `K+L+1` per user with a positive target, the objective
/// epigraph cone of dimension `K+2`, `(L-1)K` interference cones of
/// dimension `K+2`, and the budget cone of dimension `K+1`.
///
/// The amplitude upper bounds are never active at a consistent point; they
/// keep the feasible set bounded when some multipliers are zero.
pub fn build_subproblem_socp(
    l: usize,
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
    lambda: &PairTensor,
) -> ConeProgram {
    let local = Local::new(scenario, gains, targets, DEFAULT_POWER_UNIT_W);
    build_normalized(l, &local, lambda)
}

fn build_normalized(l: usize, local: &Local, lambda: &PairTensor) -> ConeProgram {
    let (cells, users) = (lambda.cells(), lambda.users());
    let lay = SubproblemLayout { cells, users, bs: l };
    let n = lay.num_vars();
    let g = &local.gains;
    let gm = g.array_gain;
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    let mut cones = Vec::new();
    let mut row = 0;
    let mut push = |trip: &mut Vec<(usize, usize, f64)>, h: &mut Vec<f64>, entries: &[(usize, f64)], rhs: f64| {
        for &(j, v) in entries {
            if v != 0.0 {
                trip.push((row, j, v));
            }
        }
        h.push(rhs);
        row += 1;
    };

    // orthant block
    let start = h.len();
    for j in 0..n - 1 {
        push(&mut trip, &mut h, &[(j, -1.0)], 0.0);
    }
    for i in lay.others() {
        for k in 0..users {
            push(
                &mut trip,
                &mut h,
                &[(lay.theta(i, k), 1.0)],
                local.amplitude_bound(l, i, k),
            );
        }
    }
    for i in lay.others() {
        for k in 0..users {
            push(
                &mut trip,
                &mut h,
                &[(lay.theta_tilde(i, k), 1.0)],
                local.amplitude_bound(i, l, k),
            );
        }
    }
    cones.push(Cone::NonNeg(h.len() - start));

    // QoS cones
    for k in 0..users {
        let xi = local.targets.xi_hat.get(l, k);
        if xi <= 0.0 {
            continue;
        }
        // divided through by sqrt(G gamma / xi_hat) so every entry is in sqrt-watts
        let unit = local.unit_w.sqrt();
        let w = local.weight(l, k) * unit;
        let zl = w * g.z_gain.get(l, l, k).sqrt();
        push(&mut trip, &mut h, &[(lay.rho_tilde(k), -1.0)], 0.0);
        for t in 0..users {
            push(&mut trip, &mut h, &[(lay.rho_tilde(t), -zl)], 0.0);
        }
        for i in lay.others() {
            push(&mut trip, &mut h, &[(lay.theta_tilde(i, k), -unit)], 0.0);
        }
        push(&mut trip, &mut h, &[], w);
        cones.push(Cone::Soc(users + cells + 1));
    }

    // objective epigraph: (1 + s - y)/2 >= ||(rho_tilde, (1 - s + y)/2)||
    let mut y_terms: Vec<(usize, f64)> = Vec::new();
    for i in lay.others() {
        for k in 0..users {
            y_terms.push((lay.theta(i, k), lambda.get(i, l, k)));
            y_terms.push((lay.theta_tilde(i, k), -lambda.get(l, i, k)));
        }
    }
    let mut first = vec![(lay.s(), -0.5)];
    first.extend(y_terms.iter().map(|&(j, c)| (j, 0.5 * c)));
    push(&mut trip, &mut h, &first, 0.5);
    for k in 0..users {
        push(&mut trip, &mut h, &[(lay.rho_tilde(k), -1.0)], 0.0);
    }
    let mut last = vec![(lay.s(), 0.5)];
    last.extend(y_terms.iter().map(|&(j, c)| (j, -0.5 * c)));
    push(&mut trip, &mut h, &last, 0.5);
    cones.push(Cone::Soc(users + 2));

    // interference cones
    for i in lay.others() {
        for k in 0..users {
            let w = local.weight(i, k);
            let zi = w * g.z_gain.get(l, i, k).sqrt();
            push(&mut trip, &mut h, &[(lay.theta(i, k), -1.0)], 0.0);
            push(
                &mut trip,
                &mut h,
                &[(lay.rho_tilde(k), -w * (gm * g.gamma.get(l, i, k)).sqrt())],
                0.0,
            );
            for t in 0..users {
                push(&mut trip, &mut h, &[(lay.rho_tilde(t), -zi)], 0.0);
            }
            cones.push(Cone::Soc(users + 2));
        }
    }

    // budget cone
    push(&mut trip, &mut h, &[], local.p_max[l].sqrt());
    for k in 0..users {
        push(&mut trip, &mut h, &[(lay.rho_tilde(k), -1.0)], 0.0);
    }
    cones.push(Cone::Soc(users + 1));

    let mut c = vec![0.0; n];
    c[lay.s()] = 1.0;
    let gmat = SparseMatrix::from_triplets(h.len(), n, trip);
    ConeProgram::new(c, gmat, h, cones).expect("subproblem dimensions are consistent by construction")
}

/// Optimal point of one base station's subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub bs: usize,
    /// Square roots of the local powers.
    pub rho_tilde: Vec<f64>,
    /// Epigraph variable: the local dual function value.
    pub s: f64,
    /// `theta_out[slot(i) K + k]`: exact amplitude of this BS's interference
    /// at user `(i,k)`.
    pub theta_out: Vec<f64>,
    /// `theta_tilde_out[slot(i) K + k]`: believed interference amplitude
    /// from BS `i` at local user `k`.
    pub theta_tilde_out: Vec<f64>,
    /// `sum_k sum_{i != l} (lambda^l_{i,k} theta - lambda^i_{l,k} theta_tilde)`
    /// at the solver's point.
    pub epigraph_y: f64,
    pub solver_iterations: usize,
}

impl SubproblemSolution {
    pub fn power(&self) -> f64 {
        self.rho_tilde.iter().map(|r| r * r).sum()
    }
}

/// Solves the subproblem of base station `l`.
///
/// The exact amplitudes in the result are recomputed from the optimal
/// `rho_tilde`. Where the multiplier is positive this is what the solver
/// returns anyway; where it is zero the variable has no cost and any value
/// above the amplitude is optimal, so the smallest one is reported.
pub fn solve_subproblem(
    l: usize,
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
    lambda: &PairTensor,
) -> Result<SubproblemSolution> {
    let local = Local::new(scenario, gains, targets, DEFAULT_POWER_UNIT_W);
    solve_normalized(l, &local, lambda)
}

fn solve_normalized(l: usize, local: &Local, lambda: &PairTensor) -> Result<SubproblemSolution> {
    let (cells, users) = (lambda.cells(), lambda.users());
    let lay = SubproblemLayout { cells, users, bs: l };
    let prog = build_normalized(l, local, lambda);
    let res = solve_socp(&prog, &Settings::default())?;
    match res.status {
        Status::Optimal => {}
        Status::IterLimit if res.primal_residual <= 1e-6 && res.gap <= 1e-6 => {}
        Status::Infeasible => {
            return Err(Error::LocalInfeasible {
                bs: l,
                reason: "QoS targets of the local users cannot be met within the power budget even without \
                         inter-cell interference"
                    .into(),
            })
        }
        other => {
            return Err(Error::Solver(format!(
                "subproblem of BS {l} ended with status {other:?} (gap {:.2e}, residual {:.2e})",
                res.gap, res.primal_residual
            )))
        }
    }
    let x = &res.x;
    // A user without a target only adds cost and interference, so its
    // optimal power is exactly zero.
    let rho_tilde: Vec<f64> = (0..users)
        .map(|k| {
            if local.targets.xi_hat.get(l, k) > 0.0 {
                x[lay.rho_tilde(k)].max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let g = &local.gains;
    let total: f64 = rho_tilde.iter().map(|r| r * r).sum();
    let mut theta_out = vec![0.0; (cells - 1) * users];
    let mut theta_tilde_out = vec![0.0; (cells - 1) * users];
    let mut epigraph_y = 0.0;
    for i in lay.others() {
        for k in 0..users {
            let idx = slot(l, i) * users + k;
            let amp = (g.array_gain * g.gamma.get(l, i, k) * rho_tilde[k] * rho_tilde[k]
                + g.z_gain.get(l, i, k) * total)
                .sqrt();
            theta_out[idx] = local.weight(i, k) * amp;
            theta_tilde_out[idx] = x[lay.theta_tilde(i, k)].max(0.0);
            epigraph_y += lambda.get(i, l, k) * x[lay.theta(i, k)] - lambda.get(l, i, k) * x[lay.theta_tilde(i, k)];
        }
    }
    Ok(SubproblemSolution {
        bs: l,
        rho_tilde,
        s: x[lay.s()],
        theta_out,
        theta_tilde_out,
        epigraph_y,
        solver_iterations: res.iterations,
    })
}

/// Step size schedule of the multiplier update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `step0 / sqrt(n)` at iteration `n`.
    Diminishing(f64),
}

impl StepSize {
    pub fn at(&self, iteration: usize) -> f64 {
        match *self {
            StepSize::Constant(s) => s,
            StepSize::Diminishing(s0) => s0 / (iteration.max(1) as f64).sqrt(),
        }
    }
}

/// Default power unit of the consistency variables, 10 mW.
pub const DEFAULT_POWER_UNIT_W: f64 = 0.01;

/// When to stop iterating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// `max |theta_tilde - theta| <= residual_tol` and every replayed SINR
    /// at least `(1 - qos_tol) xi_hat`.
    Consistency { residual_tol: f64, qos_tol: f64 },
    /// Total power within `rel_tol` of a known optimum (benchmarking).
    NearOptimum { optimum: f64, rel_tol: f64 },
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::Consistency {
            residual_tol: 1e-3,
            qos_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    pub step: StepSize,
    pub lambda_init: f64,
    pub max_iter: usize,
    pub stopping: StoppingRule,
    /// Solve the per-BS subproblems of one iteration in parallel.
    pub parallel: bool,
    /// Power unit in watts of the squared consistency variables. The step
    /// size is only meaningful relative to it.
    pub power_unit_w: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            step: StepSize::Constant(0.01),
            lambda_init: 0.0,
            max_iter: 400,
            stopping: StoppingRule::default(),
            parallel: true,
            power_unit_w: DEFAULT_POWER_UNIT_W,
        }
    }
}

/// What happened in one iteration.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iter: usize,
    /// Sum of all powers in watts.
    pub total_power: f64,
    /// Sum of the local optimal objectives, a lower bound on the optimum.
    pub dual_value: f64,
    pub max_residual: f64,
    /// Closed-form SINR of every user under the true coupling.
    pub sinr: CellArray,
    /// `min (SINR / xi_hat - 1)` over users with a positive target.
    pub min_sinr_margin: f64,
    /// Cumulative backhaul parameter count up to this iteration.
    pub exchanged_params: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualStatus {
    Converged,
    /// Iteration cap reached; the best iterate is returned.
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct DualOutcome {
    pub status: DualStatus,
    /// Powers of the returned iterate.
    pub allocation: PowerAllocation,
    /// Iteration number of the returned iterate.
    pub iterations: usize,
    pub state: ConsistencyState,
    pub trace: Vec<IterationTrace>,
}

/// Cumulative exchanged parameters after `n` iterations.
pub fn exchanged_after(cells: usize, users: usize, n: usize) -> u64 {
    let (l, k, n) = (cells as u64, users as u64, n as u64);
    4 * k * (l - 1) * (l - 1) * n + 2 * k * (l - 1) * l
}

/// Runs the master/sublevel iteration until the stopping rule holds or the
/// iteration cap is reached.
pub fn run_dual_decomposition(
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
    options: &DualOptions,
) -> Result<DualOutcome> {
    let (cells, users) = (scenario.cells(), scenario.users());
    let local = Local::new(scenario, gains, targets, options.power_unit_w);
    // Pairs of users without a QoS target carry no consistency constraint
    // that can bind; their multipliers stay at zero.
    let active = |l: usize, k: usize| targets.xi_hat.get(l, k) > 0.0;
    let mut state = ConsistencyState::new(cells, users, options.lambda_init);
    for (l, i, k) in state.lambda.pairs().collect::<Vec<_>>() {
        if !active(l, k) {
            state.lambda.set(l, i, k, 0.0);
        }
    }

    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, PowerAllocation, ConsistencyState)> = None;
    for iter in 1..=options.max_iter {
        let started = Instant::now();
        let solve = |l: usize| solve_normalized(l, &local, &state.lambda);
        let sols: Vec<SubproblemSolution> = if options.parallel {
            (0..cells).into_par_iter().map(solve).collect::<Result<_>>()?
        } else {
            (0..cells).map(solve).collect::<Result<_>>()?
        };

        let rho = CellArray::from_fn(cells, users, |l, k| sols[l].rho_tilde[k].powi(2));
        let allocation = PowerAllocation { rho };
        for (l, i, k) in state.theta.pairs().collect::<Vec<_>>() {
            let exact = sols[i].theta_out[slot(i, l) * users + k];
            let believed = if active(l, k) {
                sols[l].theta_tilde_out[slot(l, i) * users + k]
            } else {
                exact
            };
            state.theta.set(l, i, k, exact);
            state.theta_tilde.set(l, i, k, believed);
        }

        let sinr = all_sinr(&allocation, gains, scenario);
        let mut margin = f64::INFINITY;
        for l in 0..cells {
            for k in 0..users {
                let xi = targets.xi_hat.get(l, k);
                if xi > 0.0 {
                    margin = margin.min(sinr.get(l, k) / xi - 1.0);
                }
            }
        }
        let total_power = allocation.total();
        let residual = state.max_residual();
        trace.push(IterationTrace {
            iter,
            total_power,
            dual_value: sols.iter().map(|s| s.s).sum(),
            max_residual: residual,
            sinr,
            min_sinr_margin: margin,
            exchanged_params: exchanged_after(cells, users, iter),
            wall_time_s: started.elapsed().as_secs_f64(),
        });

        let (done, score) = match options.stopping {
            StoppingRule::Consistency { residual_tol, qos_tol } => {
                let shortfall = (-margin).max(0.0);
                (
                    residual <= residual_tol && shortfall <= qos_tol,
                    shortfall.max(residual),
                )
            }
            StoppingRule::NearOptimum { optimum, rel_tol } => {
                let dev = (total_power - optimum).abs();
                (dev <= rel_tol * optimum, dev)
            }
        };
        if done {
            return Ok(DualOutcome {
                status: DualStatus::Converged,
                allocation,
                iterations: iter,
                state,
                trace,
            });
        }
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, iter, allocation, state.clone()));
        }
        let step = options.step.at(iter);
        state = subgradient_update(&state, step);
    }
    let (_, iterations, allocation, state) = best.expect("at least one iteration runs");
    Ok(DualOutcome {
        status: DualStatus::IterLimit,
        allocation,
        iterations,
        state,
        trace,
    })
}

/// Order-of-magnitude operation count of solving all subproblems of one
/// iteration to accuracy `epsilon` with an interior-point method:
/// `delta (L K^3 + 6 L K^2 + K L^2 + 6 L K + 3 K + 5 + m^2) m`, where
/// `m = K (2L - 1) + 1` and `delta = ln(1/epsilon) sqrt(2 L K + 4)`.
pub fn complexity_estimate(cells: usize, users: usize, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    let (l, k) = (cells as f64, users as f64);
    let m = k * (2.0 * l - 1.0) + 1.0;
    let delta = (1.0 / epsilon).ln() * (2.0 * l * k + 4.0).sqrt();
    let per = l * k.powi(3) + 6.0 * l * k * k + k * l * l + 6.0 * l * k + 3.0 * k + 5.0 + m * m;
    delta * per * m
}

/// Writes a trace as CSV with header
/// `iter,total_power,max_residual,min_sinr_margin,exchanged_params`.
pub fn write_trace_csv<W: Write>(w: W, trace: &[IterationTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "iter",
        "total_power",
        "max_residual",
        "min_sinr_margin",
        "exchanged_params",
    ])
    .map_err(csv_err)?;
    for t in trace {
        out.serialize((
            t.iter,
            t.total_power,
            t.max_residual,
            t.min_sinr_margin,
            t.exchanged_params,
        ))
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::testing::scenario;
    use crate::system::{qos_to_sinr_target, sinr_terms, Precoding};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pair_tensor_skips_diagonal() {
        let mut t = PairTensor::zeros(3, 2);
        assert_eq!(t.as_slice().len(), 12);
        assert_eq!(t.pairs().count(), 12);
        t.set(2, 0, 1, 5.0);
        t.set(0, 2, 1, 7.0);
        assert_eq!(t.get(2, 0, 1), 5.0);
        assert_eq!(t.get(0, 2, 1), 7.0);
        assert!(t.pairs().all(|(l, i, _)| l != i));
    }

    #[test]
    fn subgradient_examples() {
        let mut s = ConsistencyState::new(2, 1, 0.5);
        s.theta.set(0, 1, 0, 0.1);
        s.theta_tilde.set(0, 1, 0, 0.3);
        s.theta.set(1, 0, 0, 0.4);
        s.theta_tilde.set(1, 0, 0, 0.4);
        let n = subgradient_update(&s, 0.01);
        assert_relative_eq!(n.lambda.get(0, 1, 0), 0.498, max_relative = 1e-12);
        assert_eq!(n.lambda.get(1, 0, 0), 0.5);

        let mut z = ConsistencyState::new(2, 1, 0.0);
        z.theta_tilde.set(0, 1, 0, 0.5);
        assert_eq!(subgradient_update(&z, 0.01).lambda.get(0, 1, 0), 0.0);
    }

    #[test]
    fn layout_counts() {
        let lay = SubproblemLayout {
            cells: 4,
            users: 10,
            bs: 2,
        };
        assert_eq!(lay.num_vars(), 71);
        assert_eq!(lay.theta(3, 0), 10 + 2 * 10);
        assert_eq!(lay.theta_tilde(0, 9), 40 + 9);
    }

    #[test]
    fn cone_families() {
        let (cells, users) = (3, 2);
        let s = scenario(
            cells,
            users,
            8,
            |bs, cell, _| if bs == cell { 1e-11 } else { 1e-13 },
            1e-13,
            0.5,
        );
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let lam = PairTensor::zeros(cells, users);
        let p = build_subproblem_socp(1, &s, &gains, &t, &lam);
        assert_eq!(p.num_vars(), users * (2 * cells - 1) + 1);
        let socs: Vec<usize> = p.cones[1..].iter().map(|c| c.dim()).collect();
        assert_eq!(socs.len(), users + 1 + (cells - 1) * users + 1);
        assert!(socs[..users].iter().all(|&d| d == users + cells + 1));
        assert!(socs[users..users + 1 + (cells - 1) * users]
            .iter()
            .all(|&d| d == users + 2));
        assert_eq!(*socs.last().unwrap(), users + 1);
    }

    #[test]
    fn regrouped_denominator_matches() {
        let (cells, users) = (3, 2);
        let s = scenario(
            cells,
            users,
            8,
            |bs, cell, u| 1e-12 * (1.0 + bs as f64 + 2.0 * cell as f64 + u as f64),
            1e-13,
            0.5,
        );
        let gains = EffectiveGains::new(&s, Precoding::Mr);
        let rho = PowerAllocation {
            rho: CellArray::from_fn(cells, users, |l, k| 0.3 + l as f64 * 0.7 + k as f64 * 1.3),
        };
        for l in 0..cells {
            for k in 0..users {
                let (_, denom) = sinr_terms(&rho, &gains, s.sigma_dl_sq, l, k);
                let mut regrouped = local_interference(&rho, &gains, l, k) + s.sigma_dl_sq;
                for i in (0..cells).filter(|&i| i != l) {
                    regrouped += cross_interference(&rho, &gains, i, l, k);
                }
                assert_relative_eq!(regrouped, denom, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn complexity_pieces() {
        // L = 2, K = 1: m = 4, delta = sqrt(8) at epsilon = 1/e
        let v = complexity_estimate(2, 1, (-1.0f64).exp());
        let per = 2.0 + 12.0 + 4.0 + 12.0 + 3.0 + 5.0 + 16.0;
        assert_relative_eq!(v, 8f64.sqrt() * per * 4.0, max_relative = 1e-14);
    }

    #[test]
    fn single_cell_converges_at_once() {
        let s = scenario(1, 2, 8, |_, _, u| 1e-11 * (1.0 + u as f64), 1e-13, 0.8);
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let out = run_dual_decomposition(&s, &gains, &t, &DualOptions::default()).unwrap();
        assert_eq!(out.status, DualStatus::Converged);
        assert_eq!(out.iterations, 1);
        let central = crate::centralized::solve_centralized(&s, &gains, &t).unwrap();
        assert_relative_eq!(out.allocation.total(), central.total_power, max_relative = 1e-6);
    }

    #[test]
    fn trace_csv_header() {
        let s = scenario(1, 1, 4, |_, _, _| 1e-11, 1e-13, 0.5);
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let out = run_dual_decomposition(&s, &gains, &t, &DualOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &out.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,total_power,max_residual,min_sinr_margin,exchanged_params\n1,"));
    }

    proptest! {
        #[test]
        fn squared_powers_round_trip(r in prop::collection::vec(0.0f64..40.0, 6)) {
            let alloc = PowerAllocation { rho: CellArray::from_vec(2, 3, r.clone()).unwrap() };
            let tilde = alloc.rho.map(f64::sqrt);
            let back = tilde.map(|v| v * v);
            for (a, b) in back.as_slice().iter().zip(&r) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
            }
        }

        #[test]
        fn multipliers_stay_nonnegative(
            lam in prop::collection::vec(0.0f64..2.0, 4),
            th in prop::collection::vec(0.0f64..2.0, 4),
            tt in prop::collection::vec(0.0f64..2.0, 4),
            step in 1e-4f64..1.0,
        ) {
            let mut s = ConsistencyState::new(2, 2, 0.0);
            s.lambda.data = lam;
            s.theta.data = th;
            s.theta_tilde.data = tt;
            let n = subgradient_update(&s, step);
            prop_assert!(n.lambda.as_slice().iter().all(|v| *v >= 0.0));
        }
    }
}
