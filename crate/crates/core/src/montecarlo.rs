//! Monte Carlo check of the closed-form SINR.
//!
//! Small-scale fading, pilot transmission and MMSE estimation are simulated
//! explicitly, precoders are built from the estimates, and the moments that
//! enter the use-and-then-forget SINR bound are averaged over draws. Every
//! estimate carries a standard error so it can be compared with the
//! closed form through a z-score.
//!
//! Draws are split into fixed chunks of [`CHUNK`] draws. Chunk `c` uses the
//! ChaCha8 stream `c + 1` of the run seed, so results are bit-identical for
//! a given seed and draw count regardless of the thread count.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::centralized::csv_err;
use crate::error::{Error, Result};
use crate::system::{
    all_sinr, compute_estimate_variance, se_from_sinr, CellArray, EffectiveGains, NetworkScenario, PowerAllocation,
    Precoding,
};

/// Draws per random stream.
pub const CHUNK: usize = 64;

/// Channels and their MMSE estimates for one coherence block.
///
/// `channels[i]` is the `M x LK` matrix whose column `l K + k` is the channel
/// `h^i_{l,k}` from BS `i` to user `k` of cell `l`; `estimates[i]` holds the
/// estimates of the same channels formed at BS `i`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub channels: Vec<DMatrix<Complex64>>,
    pub estimates: Vec<DMatrix<Complex64>>,
}

/// `tau_p x K` DFT pilot book; column `k` has squared norm `tau_p`.
pub fn pilot_book(tau_p: usize, users: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(tau_p, users, |n, k| {
        Complex64::from_polar(1.0, -2.0 * PI * (n * k) as f64 / tau_p as f64)
    })
}

fn cn(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws one realization: Rayleigh channels, the received pilot signal
/// `Y_i = sum sqrt(p) h psi^H + N_i`, and the MMSE estimates computed from
/// `Y_i psi_k`.
pub fn draw_realization(
    scenario: &NetworkScenario,
    pilots: &DMatrix<Complex64>,
    rng: &mut impl Rng,
) -> ChannelRealization {
    let (cells, users) = (scenario.cells(), scenario.users());
    let m = scenario.config.antennas;
    let tau_p = pilots.nrows();
    let mut channels = Vec::with_capacity(cells);
    let mut estimates = Vec::with_capacity(cells);
    for i in 0..cells {
        let h = DMatrix::from_fn(m, cells * users, |_, col| {
            cn(rng, scenario.beta.get(i, col / users, col % users))
        });
        let mut y = DMatrix::from_fn(m, tau_p, |_, _| cn(rng, scenario.sigma_ul_sq));
        for col in 0..cells * users {
            let (l, k) = (col / users, col % users);
            let amp = scenario.pilot_power.get(l, k).sqrt();
            y += h.column(col) * pilots.column(k).adjoint() * Complex64::from(amp);
        }
        let projected = &y * pilots;
        let mut hat = DMatrix::zeros(m, cells * users);
        for k in 0..users {
            let denom = tau_p as f64
                * (0..cells)
                    .map(|l| scenario.pilot_power.get(l, k) * scenario.beta.get(i, l, k))
                    .sum::<f64>()
                + scenario.sigma_ul_sq;
            for l in 0..cells {
                let c = scenario.pilot_power.get(l, k).sqrt() * scenario.beta.get(i, l, k) / denom;
                hat.set_column(l * users + k, &(projected.column(k) * Complex64::from(c)));
            }
        }
        channels.push(h);
        estimates.push(hat);
    }
    ChannelRealization { channels, estimates }
}

/// Precoders of BS `i` as the columns of an `M x K` matrix, normalized by
/// the analytic expectation of their squared norm. `None` if the ZF Gram
/// matrix is singular.
pub fn precoders(real: &ChannelRealization, gains: &EffectiveGains, i: usize) -> Option<DMatrix<Complex64>> {
    let users = gains.gamma.users();
    let own = real.estimates[i].columns(i * users, users).into_owned();
    let m = own.nrows() as f64;
    match gains.scheme {
        Precoding::Mr => {
            let scale = DMatrix::from_fn(users, users, |a, b| {
                if a == b {
                    Complex64::from((m * gains.gamma.get(i, i, a)).sqrt().recip())
                } else {
                    Complex64::from(0.0)
                }
            });
            Some(own * scale)
        }
        Precoding::Zf => {
            let inv = (own.adjoint() * &own).try_inverse()?;
            let scale = DMatrix::from_fn(users, users, |a, b| {
                if a == b {
                    Complex64::from(((m - users as f64) * gains.gamma.get(i, i, a)).sqrt())
                } else {
                    Complex64::from(0.0)
                }
            });
            Some(own * inv * scale)
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn std_err(&self) -> f64 {
        if self.n < 2.0 {
            return f64::INFINITY;
        }
        let var = (self.sum_sq - self.sum * self.sum / self.n).max(0.0) / (self.n - 1.0);
        (var / self.n).sqrt()
    }
}

/// Which moment of the SINR a term estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    /// `|E{h^H w}|^2` of a user's own link, closed form `G gamma`.
    Signal,
    /// `E{|h^H w|^2}` of a user's own link, closed form `G gamma + z`.
    OwnSecondMoment,
    /// Pilot-sharing interference from another cell, `G gamma^i + z^i`.
    Coherent,
    /// Interference from a precoder aimed at another pilot, `z^i`.
    NonCoherent,
    /// `E{||w||^2}`, which should be one.
    PrecoderNorm,
    /// Empirical MMSE estimate variance per antenna, `gamma`.
    EstimateVariance,
    /// Empirical channel variance per antenna, `beta`.
    ChannelVariance,
}

impl TermKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TermKind::Signal => "signal",
            TermKind::OwnSecondMoment => "own_second_moment",
            TermKind::Coherent => "coherent",
            TermKind::NonCoherent => "non_coherent",
            TermKind::PrecoderNorm => "precoder_norm",
            TermKind::EstimateVariance => "estimate_variance",
            TermKind::ChannelVariance => "channel_variance",
        }
    }
}

/// One analytic quantity next to its Monte Carlo estimate. Link-level terms
/// are per unit transmit power.
///
/// Indices: user `k` of cell `l` receiving from BS `i`, whose precoder
/// targets its own user `t`. For estimate and channel variances `t` is
/// unused; for precoder norms `l`, `k` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TermEstimate {
    pub kind: TermKind,
    pub l: usize,
    pub k: usize,
    pub i: usize,
    pub t: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub std_err: f64,
}

impl TermEstimate {
    pub fn z_score(&self) -> f64 {
        let diff = self.empirical - self.analytic;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_err
        }
    }
}

/// Closed-form versus empirical spectral efficiency of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeComparison {
    pub l: usize,
    pub k: usize,
    pub closed_form: f64,
    pub empirical: f64,
}

impl SeComparison {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.closed_form).abs() / self.closed_form.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    /// Estimate variances, then channel variances.
    pub terms: Vec<TermEstimate>,
    pub draws: usize,
}

#[derive(Debug, Clone)]
pub struct SinrTermReport {
    pub terms: Vec<TermEstimate>,
    pub se: Vec<SeComparison>,
    /// Largest `|hhat_t^H w_k| / |hhat_k^H w_k|` over `t != k` and all draws.
    /// Zero up to rounding for ZF.
    pub max_leakage: f64,
    /// Draws redrawn because the ZF Gram matrix was singular.
    pub singular_draws: usize,
    pub draws: usize,
}

impl SinrTermReport {
    pub fn max_abs_z(&self) -> f64 {
        self.terms.iter().map(|t| t.z_score().abs()).fold(0.0, f64::max)
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64 + 1);
    rng
}

/// Runs `per_chunk` over the draw chunks in parallel and merges the
/// accumulators in chunk order.
fn run_chunks<A, F>(draws: usize, seed: u64, per_chunk: F) -> Vec<A>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
{
    let chunks = draws.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(draws - c * CHUNK);
            per_chunk(&mut chunk_rng(seed, c), n)
        })
        .collect()
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 2 {
        return Err(Error::Config("Monte Carlo needs at least two draws".into()));
    }
    Ok(())
}

/// Empirical per-antenna variance of the MMSE estimates and of the channels.
pub fn simulate_estimates(scenario: &NetworkScenario, draws: usize, seed: u64) -> Result<EstimateReport> {
    check_draws(draws)?;
    let (cells, users) = (scenario.cells(), scenario.users());
    let pilots = pilot_book(scenario.config.tau_p, users);
    let links = cells * cells * users;
    let m = scenario.config.antennas as f64;
    let parts = run_chunks(draws, seed, |rng, n| {
        let mut acc = vec![(Moments::default(), Moments::default()); links];
        for _ in 0..n {
            let real = draw_realization(scenario, &pilots, rng);
            for i in 0..cells {
                for col in 0..cells * users {
                    let slot = &mut acc[i * cells * users + col];
                    slot.0.push(real.estimates[i].column(col).norm_squared() / m);
                    slot.1.push(real.channels[i].column(col).norm_squared() / m);
                }
            }
        }
        acc
    });
    let mut acc = vec![(Moments::default(), Moments::default()); links];
    for part in &parts {
        for (a, b) in acc.iter_mut().zip(part) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }
    }
    let gamma = compute_estimate_variance(scenario);
    let mut terms = Vec::with_capacity(2 * links);
    for (pick, kind, analytic) in [
        (0, TermKind::EstimateVariance, &gamma),
        (1, TermKind::ChannelVariance, &scenario.beta),
    ] {
        for i in 0..cells {
            for l in 0..cells {
                for k in 0..users {
                    let mo = if pick == 0 {
                        acc[(i * cells + l) * users + k].0
                    } else {
                        acc[(i * cells + l) * users + k].1
                    };
                    terms.push(TermEstimate {
                        kind,
                        l,
                        k,
                        i,
                        t: k,
                        analytic: analytic.get(i, l, k),
                        empirical: mo.mean(),
                        std_err: mo.std_err(),
                    });
                }
            }
        }
    }
    Ok(EstimateReport { terms, draws })
}

struct TermAcc {
    /// `E{|h^{iH}_{l,k} w_{i,t}|^2}` at `((i L + l) K + k) K + t`.
    second: Vec<Moments>,
    /// Real and imaginary parts of `h^{lH}_{l,k} w_{l,k}` at `l K + k`.
    mean_re: Vec<Moments>,
    mean_im: Vec<Moments>,
    norm: Vec<Moments>,
    leakage: f64,
    singular: usize,
}

impl TermAcc {
    fn new(cells: usize, users: usize) -> Self {
        Self {
            second: vec![Moments::default(); cells * cells * users * users],
            mean_re: vec![Moments::default(); cells * users],
            mean_im: vec![Moments::default(); cells * users],
            norm: vec![Moments::default(); cells * users],
            leakage: 0.0,
            singular: 0,
        }
    }

    fn merge(&mut self, o: &TermAcc) {
        for (a, b) in self.second.iter_mut().zip(&o.second) {
            a.merge(b);
        }
        for (a, b) in self.mean_re.iter_mut().zip(&o.mean_re) {
            a.merge(b);
        }
        for (a, b) in self.mean_im.iter_mut().zip(&o.mean_im) {
            a.merge(b);
        }
        for (a, b) in self.norm.iter_mut().zip(&o.norm) {
            a.merge(b);
        }
        self.leakage = self.leakage.max(o.leakage);
        self.singular += o.singular;
    }
}

/// Estimates every moment of the closed-form SINR and the resulting
/// spectral efficiencies under `rho`.
pub fn simulate_sinr_terms(
    scenario: &NetworkScenario,
    gains: &EffectiveGains,
    rho: &PowerAllocation,
    draws: usize,
    seed: u64,
) -> Result<SinrTermReport> {
    check_draws(draws)?;
    let (cells, users) = (scenario.cells(), scenario.users());
    if gains.scheme == Precoding::Zf && scenario.config.antennas <= users {
        return Err(Error::Config("zero-forcing needs more antennas than users".into()));
    }
    let pilots = pilot_book(scenario.config.tau_p, users);
    let parts = run_chunks(draws, seed, |rng, n| {
        let mut acc = TermAcc::new(cells, users);
        let mut done = 0;
        while done < n {
            let real = draw_realization(scenario, &pilots, rng);
            let Some(ws) = (0..cells)
                .map(|i| precoders(&real, gains, i))
                .collect::<Option<Vec<_>>>()
            else {
                acc.singular += 1;
                continue;
            };
            for (i, w) in ws.iter().enumerate() {
                // x[(l K + k), t] = h^{iH}_{l,k} w_{i,t}
                let x = real.channels[i].adjoint() * w;
                for l in 0..cells {
                    for k in 0..users {
                        for t in 0..users {
                            acc.second[((i * cells + l) * users + k) * users + t]
                                .push(x[(l * users + k, t)].norm_sqr());
                        }
                    }
                }
                for t in 0..users {
                    let own = x[(i * users + t, t)];
                    acc.mean_re[i * users + t].push(own.re);
                    acc.mean_im[i * users + t].push(own.im);
                    acc.norm[i * users + t].push(w.column(t).norm_squared());
                }
                let est = real.estimates[i].columns(i * users, users).adjoint() * w;
                for k in 0..users {
                    let diag = est[(k, k)].norm();
                    for t in (0..users).filter(|&t| t != k) {
                        acc.leakage = acc.leakage.max(est[(t, k)].norm() / diag);
                    }
                }
            }
            done += 1;
        }
        acc
    });
    let mut acc = TermAcc::new(cells, users);
    for p in &parts {
        acc.merge(p);
    }

    let g = gains.array_gain;
    let mut terms = Vec::new();
    for l in 0..cells {
        for k in 0..users {
            let re = acc.mean_re[l * users + k];
            let im = acc.mean_im[l * users + k];
            let (a, b) = (re.mean(), im.mean());
            // delta method on |mean|^2
            let se = 2.0 * (a * a * re.std_err().powi(2) + b * b * im.std_err().powi(2)).sqrt();
            terms.push(TermEstimate {
                kind: TermKind::Signal,
                l,
                k,
                i: l,
                t: k,
                analytic: g * gains.gamma.get(l, l, k),
                empirical: a * a + b * b,
                std_err: se,
            });
            for i in 0..cells {
                for t in 0..users {
                    let mo = acc.second[((i * cells + l) * users + k) * users + t];
                    let z = gains.z_gain.get(i, l, k);
                    let (kind, analytic) = match (i == l, t == k) {
                        (true, true) => (TermKind::OwnSecondMoment, g * gains.gamma.get(i, l, k) + z),
                        (false, true) => (TermKind::Coherent, g * gains.gamma.get(i, l, k) + z),
                        _ => (TermKind::NonCoherent, z),
                    };
                    terms.push(TermEstimate {
                        kind,
                        l,
                        k,
                        i,
                        t,
                        analytic,
                        empirical: mo.mean(),
                        std_err: mo.std_err(),
                    });
                }
            }
        }
    }
    for i in 0..cells {
        for t in 0..users {
            let mo = acc.norm[i * users + t];
            terms.push(TermEstimate {
                kind: TermKind::PrecoderNorm,
                l: i,
                k: t,
                i,
                t,
                analytic: 1.0,
                empirical: mo.mean(),
                std_err: mo.std_err(),
            });
        }
    }

    let closed = all_sinr(rho, gains, scenario);
    let empirical_sinr = CellArray::from_fn(cells, users, |l, k| {
        let signal =
            rho.rho.get(l, k) * (acc.mean_re[l * users + k].mean().powi(2) + acc.mean_im[l * users + k].mean().powi(2));
        let mut received = scenario.sigma_dl_sq;
        for i in 0..cells {
            for t in 0..users {
                received += rho.rho.get(i, t) * acc.second[((i * cells + l) * users + k) * users + t].mean();
            }
        }
        signal / (received - signal)
    });
    let se = (0..cells)
        .flat_map(|l| (0..users).map(move |k| (l, k)))
        .map(|(l, k)| SeComparison {
            l,
            k,
            closed_form: se_from_sinr(closed.get(l, k), &scenario.config),
            empirical: se_from_sinr(empirical_sinr.get(l, k), &scenario.config),
        })
        .collect();

    Ok(SinrTermReport {
        terms,
        se,
        max_leakage: acc.leakage,
        singular_draws: acc.singular,
        draws,
    })
}

/// Writes terms as CSV with header `term,l,k,i,t,analytic,empirical,std_err,z_score`.
pub fn write_report_csv<W: Write>(w: W, terms: &[TermEstimate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "term",
        "l",
        "k",
        "i",
        "t",
        "analytic",
        "empirical",
        "std_err",
        "z_score",
    ])
    .map_err(csv_err)?;
    for t in terms {
        out.serialize((
            t.kind.as_str(),
            t.l,
            t.k,
            t.i,
            t.t,
            t.analytic,
            t.empirical,
            t.std_err,
            t.z_score(),
        ))
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
