//! Experiment driver: seeded drops, convergence statistics, achieved QoS,
//! backhaul signaling counts and the Monte Carlo check, written as CSV.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::centralized::{csv_err, solve_centralized, CentralizedSolution};
use crate::conic::Status;
use crate::dual::{exchanged_after, run_dual_decomposition, DualOptions, DualStatus, StepSize, StoppingRule};
use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::montecarlo::{simulate_sinr_terms, write_report_csv, SinrTermReport};
use crate::network::{drop_seed, generate_drop, DropConfig};
use crate::system::{
    all_sinr, qos_to_sinr_target, se_from_sinr, CellArray, EffectiveGains, NetworkScenario, PowerAllocation, Precoding,
    SinrTargets,
};

/// Where the power allocation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One entity gathers all statistics, solves the LP and feeds back powers.
    Centralized,
    /// Every BS gathers the statistics it needs and solves the LP itself.
    BasicDistributed,
    DualDecomposition,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Centralized,
        Strategy::BasicDistributed,
        Strategy::DualDecomposition,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Centralized => "centralized",
            Strategy::BasicDistributed => "basic",
            Strategy::DualDecomposition => "dual",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Strategy::Centralized),
            "basic" => Ok(Strategy::BasicDistributed),
            "dual" => Ok(Strategy::DualDecomposition),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Optimization-variable and backhaul parameter counts of one strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalingLedger {
    pub strategy: Strategy,
    pub optimization_vars: u64,
    pub exchanged_params: u64,
    /// Iterations `N` the dual count was evaluated at.
    pub iterations: Option<usize>,
}

/// Counts for `L = cells`, `K = users` and, for dual decomposition, `N`
/// iterations:
///
/// | strategy | variables | exchanged |
/// |---|---|---|
/// | centralized | `KL` | `2KL^2 + 2KL` |
/// | basic | `KL^2` | `2K(L-1)^2 L + K(L-1)L` |
/// | dual | `2KL^2 - KL + L` | `4K(L-1)^2 N + 2K(L-1)L` |
pub fn count_signaling(strategy: Strategy, cells: usize, users: usize, iterations: usize) -> Result<SignalingLedger> {
    if cells == 0 || users == 0 {
        return Err(Error::Config("cells and users must be positive".into()));
    }
    let (l, k) = (cells as u64, users as u64);
    let ledger = match strategy {
        Strategy::Centralized => SignalingLedger {
            strategy,
            optimization_vars: k * l,
            exchanged_params: 2 * k * l * l + 2 * k * l,
            iterations: None,
        },
        Strategy::BasicDistributed => SignalingLedger {
            strategy,
            optimization_vars: k * l * l,
            exchanged_params: 2 * k * (l - 1) * (l - 1) * l + k * (l - 1) * l,
            iterations: None,
        },
        Strategy::DualDecomposition => {
            if iterations == 0 {
                return Err(Error::Config("dual decomposition needs at least one iteration".into()));
            }
            SignalingLedger {
                strategy,
                optimization_vars: 2 * k * l * l - k * l + l,
                exchanged_params: exchanged_after(cells, users, iterations),
                iterations: Some(iterations),
            }
        }
    };
    Ok(ledger)
}

/// Result of the basic distributed implementation.
#[derive(Debug, Clone)]
pub struct BasicSolution {
    pub status: Status,
    /// Row `l` is the allocation BS `l` computed for its own users.
    pub allocation: PowerAllocation,
    pub total_power: f64,
    /// The full solution each BS obtained.
    pub local: Vec<CentralizedSolution>,
}

/// Every BS solves the whole LP from the gathered statistics and keeps
/// the powers of its own users. All BSs see the same data, so their
/// solutions coincide; a mismatch is reported as a solver failure.
pub fn solve_basic_distributed(
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    targets: &SinrTargets,
) -> Result<BasicSolution> {
    let (cells, users) = (scenario.cells(), scenario.users());
    let local: Vec<CentralizedSolution> = (0..cells)
        .into_par_iter()
        .map(|_| solve_centralized(scenario, gains, targets))
        .collect::<Result<_>>()?;
    let status = local[0].status;
    if local.iter().any(|s| s.status != status) {
        return Err(Error::Solver("base stations disagree on feasibility".into()));
    }
    let allocation = PowerAllocation {
        rho: CellArray::from_fn(cells, users, |l, k| local[l].allocation.rho.get(l, k)),
    };
    let total_power = if status == Status::Optimal {
        allocation.total()
    } else {
        f64::INFINITY
    };
    Ok(BasicSolution {
        status,
        allocation,
        total_power,
        local,
    })
}

/// Which experiment [`run_experiment`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    ConvergenceHistogram,
    QosCdf,
    SignalingTable,
    ValidateSinr,
}

impl ExperimentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentMode::ConvergenceHistogram => "convergence-histogram",
            ExperimentMode::QosCdf => "qos-cdf",
            ExperimentMode::SignalingTable => "signaling-table",
            ExperimentMode::ValidateSinr => "validate-sinr",
        }
    }
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence-histogram" => Ok(ExperimentMode::ConvergenceHistogram),
            "qos-cdf" => Ok(ExperimentMode::QosCdf),
            "signaling-table" => Ok(ExperimentMode::SignalingTable),
            "validate-sinr" => Ok(ExperimentMode::ValidateSinr),
            other => Err(Error::Config(format!("unknown experiment mode `{other}`"))),
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub drop: DropConfig,
    pub precoding: Precoding,
    pub step: StepSize,
    pub max_iter: usize,
    pub power_unit_w: f64,
    /// Relative distance to the centralized optimum that counts as converged.
    pub benchmark_tol: f64,
    /// A user counts as served when its SE reaches this fraction of its target.
    pub qos_fraction: f64,
    pub mc_draws: usize,
    pub mc_antennas: usize,
    pub mc_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dual = DualOptions::default();
        Self {
            drop: DropConfig::default(),
            precoding: Precoding::Zf,
            step: dual.step,
            max_iter: dual.max_iter,
            power_unit_w: dual.power_unit_w,
            benchmark_tol: 0.05,
            qos_fraction: 0.95,
            mc_draws: 10_000,
            mc_antennas: 32,
            mc_seed: 1,
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "grid_cols",
    "grid_rows",
    "spacing_km",
    "min_distance_km",
    "pathloss_intercept_db",
    "pathloss_slope",
    "shadow_std_db",
    "users",
    "antennas",
    "tau_c",
    "p_max_w",
    "pilot_power_w",
    "qos_se",
    "noise_dbm",
    "master_seed",
    "drops",
    "precoding",
    "step",
    "step_schedule",
    "max_iter",
    "power_unit_w",
    "benchmark_tol",
    "qos_fraction",
    "mc_draws",
    "mc_antennas",
    "mc_seed",
];

impl ExperimentConfig {
    /// Reads a flat `key = value` config; absent keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if let Some(bad) = kv.keys().find(|k| !CONFIG_KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown config key `{bad}`")));
        }
        let d = Self::default();
        let dc = &d.drop;
        let drop = DropConfig {
            grid_cols: kv.get_or("grid_cols", dc.grid_cols)?,
            grid_rows: kv.get_or("grid_rows", dc.grid_rows)?,
            spacing_km: kv.get_or("spacing_km", dc.spacing_km)?,
            min_distance_km: kv.get_or("min_distance_km", dc.min_distance_km)?,
            pathloss_intercept_db: kv.get_or("pathloss_intercept_db", dc.pathloss_intercept_db)?,
            pathloss_slope: kv.get_or("pathloss_slope", dc.pathloss_slope)?,
            shadow_std_db: kv.get_or("shadow_std_db", dc.shadow_std_db)?,
            users: kv.get_or("users", dc.users)?,
            antennas: kv.get_or("antennas", dc.antennas)?,
            tau_c: kv.get_or("tau_c", dc.tau_c)?,
            p_max_w: kv.get_or("p_max_w", dc.p_max_w)?,
            pilot_power_w: kv.get_or("pilot_power_w", dc.pilot_power_w)?,
            qos_se: kv.get_or("qos_se", dc.qos_se)?,
            noise_dbm: kv.get_or("noise_dbm", dc.noise_dbm)?,
            master_seed: kv.get_or("master_seed", dc.master_seed)?,
            drops: kv.get_or("drops", dc.drops)?,
        };
        let step_value = match d.step {
            StepSize::Constant(s) | StepSize::Diminishing(s) => s,
        };
        let step_value: f64 = kv.get_or("step", step_value)?;
        let step = match kv.get_or("step_schedule", "constant".to_string())?.as_str() {
            "constant" => StepSize::Constant(step_value),
            "diminishing" => StepSize::Diminishing(step_value),
            other => return Err(Error::Config(format!("unknown step schedule `{other}`"))),
        };
        let cfg = Self {
            drop,
            precoding: kv.get_or("precoding", d.precoding)?,
            step,
            max_iter: kv.get_or("max_iter", d.max_iter)?,
            power_unit_w: kv.get_or("power_unit_w", d.power_unit_w)?,
            benchmark_tol: kv.get_or("benchmark_tol", d.benchmark_tol)?,
            qos_fraction: kv.get_or("qos_fraction", d.qos_fraction)?,
            mc_draws: kv.get_or("mc_draws", d.mc_draws)?,
            mc_antennas: kv.get_or("mc_antennas", d.mc_antennas)?,
            mc_seed: kv.get_or("mc_seed", d.mc_seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.drop.validate()?;
        let step = match self.step {
            StepSize::Constant(s) | StepSize::Diminishing(s) => s,
        };
        if !(step > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("iteration cap must be positive".into()));
        }
        if !(self.power_unit_w > 0.0) || !(self.benchmark_tol > 0.0) {
            return Err(Error::Config(
                "power unit and benchmark tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Dual options stopping at `benchmark_tol` of a known optimum.
    pub fn benchmark_options(&self, optimum: f64) -> DualOptions {
        DualOptions {
            step: self.step,
            max_iter: self.max_iter,
            power_unit_w: self.power_unit_w,
            stopping: StoppingRule::NearOptimum {
                optimum,
                rel_tol: self.benchmark_tol,
            },
            // drops already run in parallel
            parallel: false,
            ..DualOptions::default()
        }
    }
}

/// How the dual iteration ended on one drop.
#[derive(Debug, Clone, PartialEq)]
pub enum DropOutcome {
    /// The centralized problem has no solution; the drop is excluded.
    Infeasible,
    Converged,
    /// Iteration cap reached without meeting the benchmark tolerance.
    IterLimit,
    /// A solver error; counted as not converged.
    Failed(String),
}

impl DropOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropOutcome::Infeasible => "infeasible",
            DropOutcome::Converged => "converged",
            DropOutcome::IterLimit => "iter_limit",
            DropOutcome::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DropRecord {
    pub index: usize,
    pub seed: u64,
    pub outcome: DropOutcome,
    /// Centralized optimum in watts (`+inf` when infeasible).
    pub optimum: f64,
    /// Iterations run by the dual method (0 when it did not run).
    pub iterations: usize,
    /// Total power of the stopping iterate.
    pub final_power: f64,
    /// Achieved SE per user at the stopping iterate.
    pub se: Option<CellArray>,
    pub qos_se: CellArray,
}

/// Centralized solve followed by the benchmarked dual iteration on drop
/// `index`.
pub fn run_drop(cfg: &ExperimentConfig, index: usize) -> Result<DropRecord> {
    let seed = drop_seed(cfg.drop.master_seed, index);
    let drop = generate_drop(&cfg.drop, seed)?;
    let s = &drop.scenario;
    let gains = EffectiveGains::new(s, cfg.precoding);
    let targets = qos_to_sinr_target(s)?;
    let central = solve_centralized(s, &gains, &targets)?;
    let mut rec = DropRecord {
        index,
        seed,
        outcome: DropOutcome::Infeasible,
        optimum: central.total_power,
        iterations: 0,
        final_power: f64::NAN,
        se: None,
        qos_se: s.qos_se.clone(),
    };
    if !central.is_feasible() {
        return Ok(rec);
    }
    match run_dual_decomposition(s, &gains, &targets, &cfg.benchmark_options(central.total_power)) {
        Ok(out) => {
            rec.outcome = match out.status {
                DualStatus::Converged => DropOutcome::Converged,
                DualStatus::IterLimit => DropOutcome::IterLimit,
            };
            rec.iterations = out.trace.len();
            rec.final_power = out.allocation.total();
            rec.se = Some(all_sinr(&out.allocation, &gains, s).map(|x| se_from_sinr(x, &s.config)));
        }
        Err(e) => rec.outcome = DropOutcome::Failed(e.to_string()),
    }
    Ok(rec)
}

/// All drops of the configuration, in index order.
pub fn run_drops(cfg: &ExperimentConfig) -> Result<Vec<DropRecord>> {
    cfg.validate()?;
    (0..cfg.drop.drops).into_par_iter().map(|d| run_drop(cfg, d)).collect()
}

/// Convergence statistics over drops. Fractions are over feasible drops;
/// failed drops count as feasible and not converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub drops: usize,
    pub infeasible: usize,
    pub failed: usize,
    pub feasible: usize,
    pub converged: usize,
    pub one_iteration: usize,
    pub over_cap: usize,
}

impl ConvergenceSummary {
    pub fn from_records(records: &[DropRecord]) -> Self {
        let count = |f: &dyn Fn(&DropRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let infeasible = count(&|r| r.outcome == DropOutcome::Infeasible);
        let converged = count(&|r| r.outcome == DropOutcome::Converged);
        Self {
            drops: records.len(),
            infeasible,
            failed: count(&|r| matches!(r.outcome, DropOutcome::Failed(_))),
            feasible: records.len() - infeasible,
            converged,
            one_iteration: count(&|r| r.outcome == DropOutcome::Converged && r.iterations == 1),
            over_cap: records.len() - infeasible - converged,
        }
    }

    pub fn one_iteration_fraction(&self) -> f64 {
        self.one_iteration as f64 / self.feasible as f64
    }

    pub fn over_cap_fraction(&self) -> f64 {
        self.over_cap as f64 / self.feasible as f64
    }
}

/// Fraction of users in feasible drops whose SE at the stopping iterate
/// reaches `fraction` of their target.
pub fn qos_satisfied_fraction(records: &[DropRecord], fraction: f64) -> f64 {
    let (mut ok, mut total) = (0usize, 0usize);
    for r in records {
        if let Some(se) = &r.se {
            for (a, t) in se.as_slice().iter().zip(r.qos_se.as_slice()) {
                total += 1;
                if *a >= fraction * t {
                    ok += 1;
                }
            }
        }
    }
    ok as f64 / total as f64
}

/// What an experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    pub convergence: Option<ConvergenceSummary>,
    pub qos_satisfied: Option<f64>,
    pub signaling: Vec<SignalingLedger>,
    pub sinr_check: Option<SinrTermReport>,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode.as_str())?;
        if let Some(c) = &self.convergence {
            writeln!(
                f,
                "drops: {} (feasible {}, infeasible {}, failed {})",
                c.drops, c.feasible, c.infeasible, c.failed
            )?;
            if c.feasible > 0 {
                writeln!(f, "one-iteration fraction: {:.3}", c.one_iteration_fraction())?;
                writeln!(f, "over-cap fraction: {:.3}", c.over_cap_fraction())?;
            }
        }
        if let Some(q) = self.qos_satisfied {
            writeln!(f, "users meeting the QoS fraction: {q:.3}")?;
        }
        for s in &self.signaling {
            writeln!(
                f,
                "{}: {} variables, {} exchanged",
                s.strategy.as_str(),
                s.optimization_vars,
                s.exchanged_params
            )?;
        }
        if let Some(r) = &self.sinr_check {
            let se_err = r.se.iter().map(|c| c.relative_error()).fold(0.0, f64::max);
            writeln!(
                f,
                "max |z|: {:.2}, max SE relative error: {:.2e}",
                r.max_abs_z(),
                se_err
            )?;
        }
        for p in &self.files {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

fn write_convergence<W: Write>(w: W, records: &[DropRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["drop", "seed", "status", "optimum_w", "iterations", "final_power_w"])
        .map_err(csv_err)?;
    for r in records {
        out.serialize((
            r.index,
            r.seed,
            r.outcome.as_str(),
            r.optimum,
            r.iterations,
            r.final_power,
        ))
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn write_histogram<W: Write>(w: W, records: &[DropRecord], cap: usize) -> Result<()> {
    let mut counts = vec![0usize; cap + 1];
    let mut over = 0;
    for r in records {
        match r.outcome {
            DropOutcome::Converged => counts[r.iterations] += 1,
            DropOutcome::Infeasible => {}
            _ => over += 1,
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iterations", "count"]).map_err(csv_err)?;
    for (n, c) in counts.iter().enumerate().skip(1).filter(|(_, c)| **c > 0) {
        out.serialize((n.to_string(), c)).map_err(csv_err)?;
    }
    out.serialize((format!(">{cap}"), over)).map_err(csv_err)?;
    out.flush()?;
    Ok(())
}

fn write_qos<W: Write>(w: W, records: &[DropRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["drop", "l", "k", "se", "target_se"])
        .map_err(csv_err)?;
    for r in records {
        if let Some(se) = &r.se {
            for l in 0..se.cells() {
                for k in 0..se.users() {
                    out.serialize((r.index, l, k, se.get(l, k), r.qos_se.get(l, k)))
                        .map_err(csv_err)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes signaling counts with header
/// `strategy,optimization_vars,exchanged_params,iterations`.
pub fn write_signaling_csv<W: Write>(w: W, rows: &[SignalingLedger]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["strategy", "optimization_vars", "exchanged_params", "iterations"])
        .map_err(csv_err)?;
    for s in rows {
        let n = s.iterations.map(|n| n.to_string()).unwrap_or_default();
        out.serialize((s.strategy.as_str(), s.optimization_vars, s.exchanged_params, n))
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs one experiment and writes its CSV files into `out_dir`.
///
/// `signaling-table` evaluates the dual count at the mean number of
/// iterations of the converged drops, rounded up. `validate-sinr` uses
/// drop 0 of the configuration with `mc_antennas` antennas and every user
/// at an equal share of its BS budget.
pub fn run_experiment(cfg: &ExperimentConfig, mode: ExperimentMode, out_dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut report = ExperimentReport {
        mode,
        convergence: None,
        qos_satisfied: None,
        signaling: Vec::new(),
        sinr_check: None,
        files: Vec::new(),
    };
    match mode {
        ExperimentMode::ConvergenceHistogram | ExperimentMode::QosCdf | ExperimentMode::SignalingTable => {
            let records = run_drops(cfg)?;
            let summary = ConvergenceSummary::from_records(&records);
            report.convergence = Some(summary);
            write_convergence(create(out_dir, "convergence.csv", &mut report.files)?, &records)?;
            match mode {
                ExperimentMode::ConvergenceHistogram => {
                    write_histogram(
                        create(out_dir, "histogram.csv", &mut report.files)?,
                        &records,
                        cfg.max_iter,
                    )?;
                }
                ExperimentMode::QosCdf => {
                    write_qos(create(out_dir, "qos.csv", &mut report.files)?, &records)?;
                    if summary.feasible > summary.failed {
                        report.qos_satisfied = Some(qos_satisfied_fraction(&records, cfg.qos_fraction));
                    }
                }
                _ => {
                    let conv: Vec<usize> = records
                        .iter()
                        .filter(|r| r.outcome == DropOutcome::Converged)
                        .map(|r| r.iterations)
                        .collect();
                    let n = if conv.is_empty() {
                        cfg.max_iter
                    } else {
                        conv.iter().sum::<usize>().div_ceil(conv.len())
                    };
                    let (cells, users) = (cfg.drop.cells(), cfg.drop.users);
                    report.signaling = Strategy::ALL
                        .iter()
                        .map(|&s| count_signaling(s, cells, users, n))
                        .collect::<Result<_>>()?;
                    write_signaling_csv(create(out_dir, "signaling.csv", &mut report.files)?, &report.signaling)?;
                }
            }
        }
        ExperimentMode::ValidateSinr => {
            let dc = DropConfig {
                antennas: cfg.mc_antennas,
                ..cfg.drop.clone()
            };
            let drop = generate_drop(&dc, drop_seed(dc.master_seed, 0))?;
            let s = &drop.scenario;
            let gains = EffectiveGains::new(s, cfg.precoding);
            let rho = PowerAllocation {
                rho: CellArray::from_fn(s.cells(), s.users(), |l, _| s.p_max[l] / s.users() as f64),
            };
            let rep = simulate_sinr_terms(s, &gains, &rho, cfg.mc_draws, cfg.mc_seed)?;
            write_report_csv(create(out_dir, "sinr_terms.csv", &mut report.files)?, &rep.terms)?;
            let mut out = csv::Writer::from_writer(create(out_dir, "sinr_se.csv", &mut report.files)?);
            out.write_record(["l", "k", "closed_form_se", "empirical_se", "relative_error"])
                .map_err(csv_err)?;
            for c in &rep.se {
                out.serialize((c.l, c.k, c.closed_form, c.empirical, c.relative_error()))
                    .map_err(csv_err)?;
            }
            out.flush()?;
            report.sinr_check = Some(rep);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts_for_four_cells_ten_users() {
        let c = count_signaling(Strategy::Centralized, 4, 10, 1).unwrap();
        assert_eq!((c.optimization_vars, c.exchanged_params), (40, 400));
        let b = count_signaling(Strategy::BasicDistributed, 4, 10, 1).unwrap();
        assert_eq!((b.optimization_vars, b.exchanged_params), (160, 840));
        let d = count_signaling(Strategy::DualDecomposition, 4, 10, 3).unwrap();
        assert_eq!(d.optimization_vars, 2 * 10 * 16 - 40 + 4);
        assert_eq!(d.exchanged_params, 4 * 10 * 9 * 3 + 2 * 10 * 3 * 4);
        assert!(count_signaling(Strategy::DualDecomposition, 4, 10, 0).is_err());
    }

    #[test]
    fn single_cell_has_no_inter_cell_exchange() {
        let b = count_signaling(Strategy::BasicDistributed, 1, 7, 1).unwrap();
        let d = count_signaling(Strategy::DualDecomposition, 1, 7, 5).unwrap();
        assert_eq!((b.exchanged_params, d.exchanged_params), (0, 0));
    }

    #[test]
    fn config_text_overrides_defaults() {
        let cfg = ExperimentConfig::from_text("# small run\nusers = 2\ngrid_cols = 2\ngrid_rows = 1\nstep = 0.5\nstep_schedule = diminishing\nprecoding = mr\n").unwrap();
        assert_eq!(cfg.drop.users, 2);
        assert_eq!(cfg.drop.cells(), 2);
        assert_eq!(cfg.step, StepSize::Diminishing(0.5));
        assert_eq!(cfg.precoding, Precoding::Mr);
        assert_eq!(cfg.max_iter, 400);
        assert!(ExperimentConfig::from_text("typo_key = 1").is_err());
        assert!(ExperimentConfig::from_text("step = -1").is_err());
    }

    #[test]
    fn zero_qos_needs_one_iteration_and_no_power() {
        let mut cfg = ExperimentConfig::default();
        cfg.drop.users = 2;
        cfg.drop.antennas = 16;
        cfg.drop.grid_rows = 1;
        cfg.drop.qos_se = 0.0;
        cfg.drop.drops = 3;
        let records = run_drops(&cfg).unwrap();
        for r in &records {
            assert_eq!(r.outcome, DropOutcome::Converged);
            assert_eq!(r.iterations, 1);
            assert_eq!(r.final_power, 0.0);
        }
    }

    #[test]
    fn basic_distributed_matches_centralized() {
        let cfg = DropConfig {
            grid_rows: 1,
            users: 2,
            antennas: 64,
            shadow_std_db: 0.0,
            ..DropConfig::default()
        };
        let s = generate_drop(&cfg, 5).unwrap().scenario;
        let gains = EffectiveGains::new(&s, Precoding::Zf);
        let t = qos_to_sinr_target(&s).unwrap();
        let basic = solve_basic_distributed(&s, &gains, &t).unwrap();
        let central = solve_centralized(&s, &gains, &t).unwrap();
        assert_eq!(basic.status, Status::Optimal);
        assert_eq!(basic.allocation, central.allocation);
    }

    #[test]
    fn drops_are_deterministic() {
        let mut cfg = ExperimentConfig::default();
        cfg.drop.users = 2;
        cfg.drop.grid_rows = 1;
        cfg.drop.drops = 4;
        let a = run_drops(&cfg).unwrap();
        let b = run_drops(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                (x.seed, x.iterations, x.outcome.clone()),
                (y.seed, y.iterations, y.outcome.clone())
            );
            assert_eq!(x.final_power.to_bits(), y.final_power.to_bits());
        }
    }
}
