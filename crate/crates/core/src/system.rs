//! Large-scale system model of a multi-cell Massive MIMO downlink.
//!
//! Every quantity is stored in linear scale. Indexing follows one convention
//! throughout the crate: a link tensor entry `(bs, cell, user)` describes the
//! channel between user `user` of cell `cell` and base station `bs`.
//!
//! The SINR expression is the closed-form lower bound on the ergodic downlink
//! capacity with MR or ZF precoding built from MMSE channel estimates:
//!
//! ```text
//!                          G rho[l,k] gamma(l; l,k)
//! SINR[l,k] = -----------------------------------------------------------------
//!             G sum_{i!=l} rho[i,k] gamma(i; l,k) + sum_i sum_t rho[i,t] z(i; l,k) + sigma_dl^2
//! ```
//!
//! where `gamma(i; l,k)` is the estimate variance of the channel from user
//! `(l,k)` to BS `i` and `z` is the non-coherent interference gain.
//!
//! Noise note: the downlink and uplink noise variances are both set from a
//! single -96 dBm figure in the default experiment setup. That number is a
//! noise power over 20 MHz, not a noise figure, and is used as such.

use crate::error::{Error, Result};

/// Dimensions and frame structure shared by all cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Number of cells `L`.
    pub cells: usize,
    /// Users per cell `K`.
    pub users: usize,
    /// Antennas per base station `M`.
    pub antennas: usize,
    /// Coherence interval length in symbols.
    pub tau_c: usize,
    /// Pilot length in symbols (equal to `users`).
    pub tau_p: usize,
}

impl ScenarioConfig {
    /// Builds a config with `tau_p = users`, the pilot reuse assumption.
    pub fn new(cells: usize, users: usize, antennas: usize, tau_c: usize) -> Result<Self> {
        let cfg = Self {
            cells,
            users,
            antennas,
            tau_c,
            tau_p: users,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 1 {
            return Err(Error::Config("at least one cell is required".into()));
        }
        if self.users < 1 {
            return Err(Error::Config("at least one user per cell is required".into()));
        }
        if self.antennas <= self.users {
            return Err(Error::Config(format!(
                "antennas ({}) must exceed users per cell ({})",
                self.antennas, self.users
            )));
        }
        if self.tau_p != self.users {
            return Err(Error::Config(format!(
                "pilot length ({}) must equal users per cell ({})",
                self.tau_p, self.users
            )));
        }
        if self.tau_p >= self.tau_c {
            return Err(Error::Config(format!(
                "pilot length ({}) must be shorter than the coherence interval ({})",
                self.tau_p, self.tau_c
            )));
        }
        Ok(())
    }

    /// Fraction of the coherence interval left for data, `1 - tau_p / tau_c`.
    pub fn prelog(&self) -> f64 {
        1.0 - self.tau_p as f64 / self.tau_c as f64
    }
}

/// Dense `L x L x K` tensor indexed `(bs, cell, user)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTensor {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl LinkTensor {
    pub fn zeros(cells: usize, users: usize) -> Self {
        Self {
            cells,
            users,
            data: vec![0.0; cells * cells * users],
        }
    }

    pub fn from_vec(cells: usize, users: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != cells * cells * users {
            return Err(Error::Dimension(format!(
                "link tensor needs {} entries, got {}",
                cells * cells * users,
                data.len()
            )));
        }
        Ok(Self { cells, users, data })
    }

    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(cells * cells * users);
        for bs in 0..cells {
            for cell in 0..cells {
                for user in 0..users {
                    data.push(f(bs, cell, user));
                }
            }
        }
        Self { cells, users, data }
    }

    #[inline]
    fn offset(&self, bs: usize, cell: usize, user: usize) -> usize {
        debug_assert!(bs < self.cells && cell < self.cells && user < self.users);
        (bs * self.cells + cell) * self.users + user
    }

    #[inline]
    pub fn get(&self, bs: usize, cell: usize, user: usize) -> f64 {
        self.data[self.offset(bs, cell, user)]
    }

    #[inline]
    pub fn set(&mut self, bs: usize, cell: usize, user: usize, value: f64) {
        let o = self.offset(bs, cell, user);
        self.data[o] = value;
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Row-major entries, `bs` slowest and `user` fastest.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            cells: self.cells,
            users: self.users,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Iterates `(bs, cell, user, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let (l, k) = (self.cells, self.users);
        self.data
            .iter()
            .enumerate()
            .map(move |(n, &v)| (n / (l * k), (n / k) % l, n % k, v))
    }
}

/// Dense `L x K` array indexed `(cell, user)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellArray {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl CellArray {
    pub fn filled(cells: usize, users: usize, value: f64) -> Self {
        Self {
            cells,
            users,
            data: vec![value; cells * users],
        }
    }

    pub fn zeros(cells: usize, users: usize) -> Self {
        Self::filled(cells, users, 0.0)
    }

    pub fn from_vec(cells: usize, users: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != cells * users {
            return Err(Error::Dimension(format!(
                "cell array needs {} entries, got {}",
                cells * users,
                data.len()
            )));
        }
        Ok(Self { cells, users, data })
    }

    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(cells * users);
        for l in 0..cells {
            for k in 0..users {
                data.push(f(l, k));
            }
        }
        Self { cells, users, data }
    }

    #[inline]
    pub fn get(&self, cell: usize, user: usize) -> f64 {
        debug_assert!(cell < self.cells && user < self.users);
        self.data[cell * self.users + user]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, user: usize, value: f64) {
        self.data[cell * self.users + user] = value;
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.users..(cell + 1) * self.users]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            cells: self.cells,
            users: self.users,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// All large-scale parameters of one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub config: ScenarioConfig,
    /// Large-scale fading, `(bs, cell, user)`.
    pub beta: LinkTensor,
    /// Pilot transmit power per user in watts.
    pub pilot_power: CellArray,
    /// Uplink noise power in watts.
    pub sigma_ul_sq: f64,
    /// Downlink noise power in watts.
    pub sigma_dl_sq: f64,
    /// Downlink power budget per base station in watts.
    pub p_max: Vec<f64>,
    /// Required spectral efficiency per user in b/s/Hz.
    pub qos_se: CellArray,
}

impl NetworkScenario {
    pub fn new(
        config: ScenarioConfig,
        beta: LinkTensor,
        pilot_power: CellArray,
        sigma_ul_sq: f64,
        sigma_dl_sq: f64,
        p_max: Vec<f64>,
        qos_se: CellArray,
    ) -> Result<Self> {
        let s = Self {
            config,
            beta,
            pilot_power,
            sigma_ul_sq,
            sigma_dl_sq,
            p_max,
            qos_se,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let (l, k) = (self.config.cells, self.config.users);
        if self.beta.cells() != l || self.beta.users() != k {
            return Err(Error::Dimension(format!(
                "beta must be {l}x{l}x{k}, got {}x{}x{}",
                self.beta.cells(),
                self.beta.cells(),
                self.beta.users()
            )));
        }
        for arr in [&self.pilot_power, &self.qos_se] {
            if arr.cells() != l || arr.users() != k {
                return Err(Error::Dimension(format!(
                    "per-user arrays must be {l}x{k}, got {}x{}",
                    arr.cells(),
                    arr.users()
                )));
            }
        }
        if self.p_max.len() != l {
            return Err(Error::Dimension(format!(
                "p_max must have {l} entries, got {}",
                self.p_max.len()
            )));
        }
        if let Some((bs, cell, user, v)) = self.beta.iter().find(|t| !(t.3 > 0.0 && t.3.is_finite())) {
            return Err(Error::Scenario(format!(
                "beta({bs},{cell},{user}) = {v} is not positive"
            )));
        }
        if self.pilot_power.as_slice().iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Scenario("pilot powers must be positive".into()));
        }
        if self.p_max.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Scenario("power budgets must be positive".into()));
        }
        if self.qos_se.as_slice().iter().any(|&q| !(q >= 0.0 && q.is_finite())) {
            return Err(Error::Scenario("QoS targets must be nonnegative".into()));
        }
        if !(self.sigma_ul_sq >= 0.0 && self.sigma_ul_sq.is_finite()) {
            return Err(Error::Scenario("uplink noise must be nonnegative".into()));
        }
        if !(self.sigma_dl_sq > 0.0 && self.sigma_dl_sq.is_finite()) {
            return Err(Error::Scenario("downlink noise must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.config.cells
    }

    pub fn users(&self) -> usize {
        self.config.users
    }
}

/// Linear precoding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precoding {
    /// Maximum ratio.
    Mr,
    /// Zero forcing.
    Zf,
}

impl std::str::FromStr for Precoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mr" | "mrt" => Ok(Precoding::Mr),
            "zf" => Ok(Precoding::Zf),
            other => Err(Error::Config(format!("unknown precoding scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Precoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precoding::Mr => "mr",
            Precoding::Zf => "zf",
        })
    }
}

/// Precoding-dependent gains entering every SINR expression.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub scheme: Precoding,
    /// Array gain `G`.
    pub array_gain: f64,
    /// MMSE estimate variance, `(bs, cell, user)`.
    pub gamma: LinkTensor,
    /// Non-coherent interference gain, `(bs, cell, user)`.
    pub z_gain: LinkTensor,
}

impl EffectiveGains {
    pub fn new(scenario: &NetworkScenario, scheme: Precoding) -> Self {
        let gamma = compute_estimate_variance(scenario);
        Self::from_gamma(scenario, scheme, gamma)
    }

    pub fn from_gamma(scenario: &NetworkScenario, scheme: Precoding, gamma: LinkTensor) -> Self {
        let m = scenario.config.antennas as f64;
        let k = scenario.config.users as f64;
        let (array_gain, z_gain) = match scheme {
            Precoding::Mr => (m, scenario.beta.clone()),
            Precoding::Zf => {
                let z = LinkTensor::from_fn(scenario.cells(), scenario.users(), |bs, cell, user| {
                    (scenario.beta.get(bs, cell, user) - gamma.get(bs, cell, user)).max(0.0)
                });
                (m - k, z)
            }
        };
        Self {
            scheme,
            array_gain,
            gamma,
            z_gain,
        }
    }

    /// Gains multiplied by `factor`; used to express everything relative to
    /// the downlink noise power.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scheme: self.scheme,
            array_gain: self.array_gain,
            gamma: self.gamma.map(|v| v * factor),
            z_gain: self.z_gain.map(|v| v * factor),
        }
    }
}

/// Linear SINR targets per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTargets {
    pub xi_hat: CellArray,
}

/// Downlink transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub rho: CellArray,
}

impl PowerAllocation {
    pub fn zeros(cells: usize, users: usize) -> Self {
        Self {
            rho: CellArray::zeros(cells, users),
        }
    }

    pub fn total(&self) -> f64 {
        self.rho.sum()
    }

    pub fn per_bs(&self) -> Vec<f64> {
        (0..self.rho.cells()).map(|l| self.rho.row(l).iter().sum()).collect()
    }

    /// True when every per-BS budget holds within `tol` watts.
    pub fn within_budget(&self, p_max: &[f64], tol: f64) -> bool {
        self.per_bs().iter().zip(p_max).all(|(p, m)| *p <= m + tol)
    }
}

/// MMSE channel estimate variances for every link.
pub fn compute_estimate_variance(scenario: &NetworkScenario) -> LinkTensor {
    let (l, k) = (scenario.cells(), scenario.users());
    let tau_p = scenario.config.tau_p as f64;
    let beta = &scenario.beta;
    let pilot = &scenario.pilot_power;
    let mut gamma = LinkTensor::zeros(l, k);
    for bs in 0..l {
        for user in 0..k {
            // Everything received on pilot `user` at this BS.
            let received: f64 = (0..l)
                .map(|c| pilot.get(c, user) * tau_p * beta.get(bs, c, user))
                .sum::<f64>()
                + scenario.sigma_ul_sq;
            for cell in 0..l {
                let b = beta.get(bs, cell, user);
                gamma.set(bs, cell, user, pilot.get(cell, user) * tau_p * b * b / received);
            }
        }
    }
    gamma
}

fn check_index(scenario: &NetworkScenario, l: usize, k: usize) -> Result<()> {
    if l >= scenario.cells() || k >= scenario.users() {
        return Err(Error::Index(format!(
            "user ({l},{k}) outside {}x{} network",
            scenario.cells(),
            scenario.users()
        )));
    }
    Ok(())
}

/// Desired-signal power `G rho gamma` and the full interference-plus-noise
/// denominator of user `(l,k)`.
pub fn sinr_terms(rho: &PowerAllocation, gains: &EffectiveGains, noise: f64, l: usize, k: usize) -> (f64, f64) {
    let cells = rho.rho.cells();
    let users = rho.rho.users();
    let g = gains.array_gain;
    let signal = g * rho.rho.get(l, k) * gains.gamma.get(l, l, k);
    let mut denom = noise;
    for i in 0..cells {
        if i != l {
            denom += g * rho.rho.get(i, k) * gains.gamma.get(i, l, k);
        }
        let z = gains.z_gain.get(i, l, k);
        for t in 0..users {
            denom += rho.rho.get(i, t) * z;
        }
    }
    (signal, denom)
}

/// Closed-form effective SINR of user `k` in cell `l`.
pub fn closed_form_sinr(
    rho: &PowerAllocation,
    gains: &EffectiveGains,
    scenario: &NetworkScenario,
    l: usize,
    k: usize,
) -> Result<f64> {
    check_index(scenario, l, k)?;
    if rho.rho.cells() != scenario.cells() || rho.rho.users() != scenario.users() {
        return Err(Error::Dimension("power allocation shape differs from scenario".into()));
    }
    if rho.rho.as_slice().iter().any(|&p| p < 0.0) {
        return Err(Error::Scenario("powers must be nonnegative".into()));
    }
    let (signal, denom) = sinr_terms(rho, gains, scenario.sigma_dl_sq, l, k);
    Ok(signal / denom)
}

/// Closed-form SINR of every user.
pub fn all_sinr(rho: &PowerAllocation, gains: &EffectiveGains, scenario: &NetworkScenario) -> CellArray {
    CellArray::from_fn(scenario.cells(), scenario.users(), |l, k| {
        let (s, d) = sinr_terms(rho, gains, scenario.sigma_dl_sq, l, k);
        s / d
    })
}

/// Ergodic spectral efficiency in b/s/Hz for a given effective SINR.
pub fn se_from_sinr(sinr: f64, config: &ScenarioConfig) -> f64 {
    config.prelog() * (1.0 + sinr).log2()
}

/// Converts a single SE requirement to its linear SINR target.
pub fn se_to_sinr(se: f64, config: &ScenarioConfig) -> f64 {
    let tc = config.tau_c as f64;
    let tp = config.tau_p as f64;
    (tc * se / (tc - tp)).exp2() - 1.0
}

/// Elementwise conversion of the QoS requirements to SINR targets.
pub fn qos_to_sinr_target(scenario: &NetworkScenario) -> Result<SinrTargets> {
    let cfg = &scenario.config;
    if cfg.tau_p >= cfg.tau_c {
        return Err(Error::Config(format!(
            "pilot length ({}) must be shorter than the coherence interval ({})",
            cfg.tau_p, cfg.tau_c
        )));
    }
    Ok(SinrTargets {
        xi_hat: scenario
            .qos_se
            .map(|se| if se == 0.0 { 0.0 } else { se_to_sinr(se, cfg) }),
    })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}
