//! Python bindings: scenarios, closed-form SINR, the centralized and
//! dual-decomposition solvers, signaling counts and the Monte Carlo check.
//!
//! Tensors cross the boundary as nested lists: `beta[bs][cell][user]`,
//! `powers[cell][user]`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mimo_power_core::centralized::solve_centralized;
use mimo_power_core::conic::Status;
use mimo_power_core::dual::{self, DualOptions, DualStatus, StepSize, StoppingRule};
use mimo_power_core::experiment::{self, Strategy};
use mimo_power_core::io::{read_scenario, write_scenario};
use mimo_power_core::montecarlo;
use mimo_power_core::network::{drop_seed, generate_drop, DropConfig};
use mimo_power_core::system::{
    all_sinr, compute_estimate_variance, qos_to_sinr_target, se_from_sinr, CellArray, EffectiveGains, LinkTensor,
    NetworkScenario, PowerAllocation, Precoding,
};
use mimo_power_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::Solver(_) | Error::LocalInfeasible { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn tensor_to_lists(t: &LinkTensor) -> Vec<Vec<Vec<f64>>> {
    let (l, k) = (t.cells(), t.users());
    (0..l)
        .map(|bs| (0..l).map(|c| (0..k).map(|u| t.get(bs, c, u)).collect()).collect())
        .collect()
}

fn cells_to_lists(a: &CellArray) -> Vec<Vec<f64>> {
    (0..a.cells()).map(|l| a.row(l).to_vec()).collect()
}

fn allocation(s: &NetworkScenario, powers: Vec<Vec<f64>>) -> PyResult<PowerAllocation> {
    if powers.len() != s.cells() || powers.iter().any(|r| r.len() != s.users()) {
        return Err(PyValueError::new_err(format!(
            "powers must be a {}x{} nested list",
            s.cells(),
            s.users()
        )));
    }
    let flat = powers.into_iter().flatten().collect();
    Ok(PowerAllocation {
        rho: CellArray::from_vec(s.cells(), s.users(), flat).map_err(to_py)?,
    })
}

fn scheme(name: &str) -> PyResult<Precoding> {
    name.parse().map_err(to_py)
}

/// Large-scale parameters of one multi-cell network.
#[pyclass(frozen)]
struct Scenario {
    inner: NetworkScenario,
}

#[pymethods]
impl Scenario {
    /// Draws a network on a wrap-around grid with default propagation.
    #[staticmethod]
    #[pyo3(signature = (users=10, antennas=100, grid_cols=2, grid_rows=2, drop=0, master_seed=1, qos_se=0.5, shadow_std_db=7.0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        users: usize,
        antennas: usize,
        grid_cols: usize,
        grid_rows: usize,
        drop: usize,
        master_seed: u64,
        qos_se: f64,
        shadow_std_db: f64,
    ) -> PyResult<Self> {
        let cfg = DropConfig {
            users,
            antennas,
            grid_cols,
            grid_rows,
            master_seed,
            qos_se,
            shadow_std_db,
            ..DropConfig::default()
        };
        let d = generate_drop(&cfg, drop_seed(master_seed, drop)).map_err(to_py)?;
        Ok(Self { inner: d.scenario })
    }

    /// Parses the `key = value` scenario format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_scenario(text.as_bytes()).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_scenario(&mut buf, &self.inner).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.cells()
    }

    #[getter]
    fn users(&self) -> usize {
        self.inner.users()
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.inner.config.antennas
    }

    /// `beta[bs][cell][user]`.
    #[getter]
    fn beta(&self) -> Vec<Vec<Vec<f64>>> {
        tensor_to_lists(&self.inner.beta)
    }

    #[getter]
    fn p_max(&self) -> Vec<f64> {
        self.inner.p_max.clone()
    }

    #[getter]
    fn sigma_dl_sq(&self) -> f64 {
        self.inner.sigma_dl_sq
    }

    /// MMSE estimate variances, `gamma[bs][cell][user]`.
    fn estimate_variance(&self) -> Vec<Vec<Vec<f64>>> {
        tensor_to_lists(&compute_estimate_variance(&self.inner))
    }

    /// Closed-form SINR of every user under `powers`.
    #[pyo3(signature = (powers, precoding="zf"))]
    fn sinr(&self, powers: Vec<Vec<f64>>, precoding: &str) -> PyResult<Vec<Vec<f64>>> {
        let rho = allocation(&self.inner, powers)?;
        let gains = EffectiveGains::new(&self.inner, scheme(precoding)?);
        Ok(cells_to_lists(&all_sinr(&rho, &gains, &self.inner)))
    }

    /// Spectral efficiency in b/s/Hz of every user under `powers`.
    #[pyo3(signature = (powers, precoding="zf"))]
    fn spectral_efficiency(&self, powers: Vec<Vec<f64>>, precoding: &str) -> PyResult<Vec<Vec<f64>>> {
        let cfg = self.inner.config;
        Ok(self
            .sinr(powers, precoding)?
            .into_iter()
            .map(|row| row.into_iter().map(|s| se_from_sinr(s, &cfg)).collect())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(cells={}, users={}, antennas={})",
            self.inner.cells(),
            self.inner.users(),
            self.inner.config.antennas
        )
    }
}

/// A power allocation with how it was obtained.
#[pyclass(frozen, get_all)]
struct Solution {
    /// `optimal`, `infeasible`, `converged` or `iter_limit`.
    status: String,
    /// `powers[cell][user]` in watts.
    powers: Vec<Vec<f64>>,
    total_power: f64,
    iterations: usize,
    /// Largest consistency residual per dual iteration; empty for the LP.
    residuals: Vec<f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(status='{}', total_power={:.6e}, iterations={})",
            self.status, self.total_power, self.iterations
        )
    }
}

/// Solves the centralized linear program.
#[pyfunction]
#[pyo3(signature = (scenario, precoding="zf"))]
fn solve_lp(py: Python<'_>, scenario: &Scenario, precoding: &str) -> PyResult<Solution> {
    let s = scenario.inner.clone();
    let gains = EffectiveGains::new(&s, scheme(precoding)?);
    let sol = py
        .detach(|| {
            let t = qos_to_sinr_target(&s)?;
            solve_centralized(&s, &gains, &t)
        })
        .map_err(to_py)?;
    Ok(Solution {
        status: if sol.status == Status::Optimal {
            "optimal"
        } else {
            "infeasible"
        }
        .into(),
        powers: cells_to_lists(&sol.allocation.rho),
        total_power: sol.total_power,
        iterations: sol.solve.iterations,
        residuals: Vec::new(),
    })
}

/// Runs dual decomposition. With `optimum` given it stops once the total
/// power is within `rel_tol` of it; otherwise on consistency.
#[pyfunction]
#[pyo3(signature = (scenario, precoding="zf", step=0.01, diminishing=false, max_iter=400, optimum=None, rel_tol=0.05))]
#[allow(clippy::too_many_arguments)]
fn solve_dual(
    py: Python<'_>,
    scenario: &Scenario,
    precoding: &str,
    step: f64,
    diminishing: bool,
    max_iter: usize,
    optimum: Option<f64>,
    rel_tol: f64,
) -> PyResult<Solution> {
    if !(step > 0.0) || max_iter == 0 {
        return Err(PyValueError::new_err("step and max_iter must be positive"));
    }
    let s = scenario.inner.clone();
    let gains = EffectiveGains::new(&s, scheme(precoding)?);
    let opts = DualOptions {
        step: if diminishing {
            StepSize::Diminishing(step)
        } else {
            StepSize::Constant(step)
        },
        max_iter,
        stopping: match optimum {
            Some(optimum) => StoppingRule::NearOptimum { optimum, rel_tol },
            None => StoppingRule::default(),
        },
        ..DualOptions::default()
    };
    let out = py
        .detach(|| {
            let t = qos_to_sinr_target(&s)?;
            dual::run_dual_decomposition(&s, &gains, &t, &opts)
        })
        .map_err(to_py)?;
    Ok(Solution {
        status: match out.status {
            DualStatus::Converged => "converged",
            DualStatus::IterLimit => "iter_limit",
        }
        .into(),
        powers: cells_to_lists(&out.allocation.rho),
        total_power: out.allocation.total(),
        iterations: out.trace.len(),
        residuals: out.trace.iter().map(|t| t.max_residual).collect(),
    })
}

/// `(optimization_vars, exchanged_params)` of `strategy` in
/// {"centralized", "basic", "dual"}.
#[pyfunction]
#[pyo3(signature = (strategy, cells, users, iterations=1))]
fn count_signaling(strategy: &str, cells: usize, users: usize, iterations: usize) -> PyResult<(u64, u64)> {
    let s: Strategy = strategy.parse().map_err(to_py)?;
    let l = experiment::count_signaling(s, cells, users, iterations).map_err(to_py)?;
    Ok((l.optimization_vars, l.exchanged_params))
}

/// Operation-count estimate of one dual iteration at accuracy `epsilon`.
#[pyfunction]
fn complexity_estimate(cells: usize, users: usize, epsilon: f64) -> PyResult<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(PyValueError::new_err("epsilon must lie in (0, 1)"));
    }
    Ok(dual::complexity_estimate(cells, users, epsilon))
}

/// Monte Carlo estimates of every closed-form SINR term. Returns a list of
/// `(term, l, k, i, t, analytic, empirical, std_err)` tuples.
#[pyfunction]
#[pyo3(signature = (scenario, powers, precoding="zf", draws=10_000, seed=1))]
#[allow(clippy::type_complexity)]
fn simulate_sinr_terms(
    py: Python<'_>,
    scenario: &Scenario,
    powers: Vec<Vec<f64>>,
    precoding: &str,
    draws: usize,
    seed: u64,
) -> PyResult<Vec<(String, usize, usize, usize, usize, f64, f64, f64)>> {
    let s = scenario.inner.clone();
    let rho = allocation(&s, powers)?;
    let gains = EffectiveGains::new(&s, scheme(precoding)?);
    let rep = py
        .detach(|| montecarlo::simulate_sinr_terms(&s, &gains, &rho, draws, seed))
        .map_err(to_py)?;
    Ok(rep
        .terms
        .into_iter()
        .map(|t| {
            (
                t.kind.as_str().to_string(),
                t.l,
                t.k,
                t.i,
                t.t,
                t.analytic,
                t.empirical,
                t.std_err,
            )
        })
        .collect())
}

#[pymodule]
fn mimo_power(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dual, m)?)?;
    m.add_function(wrap_pyfunction!(count_signaling, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_sinr_terms, m)?)?;
    Ok(())
}
