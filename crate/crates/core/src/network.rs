//! Random network drops on a wrap-around square grid.
//!
//! Base stations sit at the centres of a `cols x rows` grid of square cells
//! with side `spacing_km`. The grid is wrapped into a torus so every BS
//! sees the same interference geometry. Users are dropped uniformly in
//! their own square, no closer than `min_distance_km` to their BS.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::system::{db_to_linear, dbm_to_watts, CellArray, LinkTensor, NetworkScenario, ScenarioConfig};

/// Geometry, propagation and system parameters of a drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropConfig {
    pub grid_cols: usize,
    pub grid_rows: usize,
    /// Inter-BS distance in km.
    pub spacing_km: f64,
    pub min_distance_km: f64,
    /// Pathloss at 1 km in dB.
    pub pathloss_intercept_db: f64,
    /// Pathloss slope in dB per decade of distance.
    pub pathloss_slope: f64,
    pub shadow_std_db: f64,
    pub users: usize,
    pub antennas: usize,
    pub tau_c: usize,
    pub p_max_w: f64,
    pub pilot_power_w: f64,
    pub qos_se: f64,
    /// Noise power in dBm, used for both uplink and downlink.
    pub noise_dbm: f64,
    pub master_seed: u64,
    pub drops: usize,
}

impl Default for DropConfig {
    fn default() -> Self {
        Self {
            grid_cols: 2,
            grid_rows: 2,
            spacing_km: 0.5,
            min_distance_km: 0.035,
            pathloss_intercept_db: -148.1,
            pathloss_slope: 37.6,
            shadow_std_db: 7.0,
            users: 10,
            antennas: 100,
            tau_c: 200,
            p_max_w: 40.0,
            pilot_power_w: 0.2,
            qos_se: 0.5,
            noise_dbm: -96.0,
            master_seed: 1,
            drops: 200,
        }
    }
}

impl DropConfig {
    pub fn cells(&self) -> usize {
        self.grid_cols * self.grid_rows
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells() == 0 {
            return Err(Error::Config("grid must contain at least one cell".into()));
        }
        if !(self.min_distance_km > 0.0) {
            return Err(Error::Config("minimum distance must be positive".into()));
        }
        if !(self.shadow_std_db >= 0.0) {
            return Err(Error::Config("shadowing deviation must be nonnegative".into()));
        }
        if !(self.spacing_km > 0.0) || self.min_distance_km * 2.0 >= self.spacing_km {
            return Err(Error::Config(format!(
                "cell spacing {} km leaves no room for users beyond {} km",
                self.spacing_km, self.min_distance_km
            )));
        }
        ScenarioConfig::new(self.cells(), self.users, self.antennas, self.tau_c)?;
        Ok(())
    }

    /// Torus width and height in km.
    pub fn torus(&self) -> (f64, f64) {
        (
            self.grid_cols as f64 * self.spacing_km,
            self.grid_rows as f64 * self.spacing_km,
        )
    }

    pub fn bs_position(&self, l: usize) -> (f64, f64) {
        let (c, r) = (l % self.grid_cols, l / self.grid_cols);
        ((c as f64 + 0.5) * self.spacing_km, (r as f64 + 0.5) * self.spacing_km)
    }

    /// Large-scale fading in dB at `d_km` for shadowing `shadow_db`.
    pub fn pathloss_db(&self, d_km: f64, shadow_db: f64) -> f64 {
        self.pathloss_intercept_db - self.pathloss_slope * d_km.log10() + shadow_db
    }
}

/// Shortest distance between two points on a `width x height` torus.
pub fn wrap_distance(a: (f64, f64), b: (f64, f64), width: f64, height: f64) -> f64 {
    let wrap = |d: f64, span: f64| {
        let d = d.abs() % span;
        d.min(span - d)
    };
    wrap(a.0 - b.0, width).hypot(wrap(a.1 - b.1, height))
}

/// User positions and the scenario built from them.
#[derive(Debug, Clone)]
pub struct Drop {
    pub scenario: NetworkScenario,
    /// `positions[l * K + k]` in km.
    pub positions: Vec<(f64, f64)>,
    /// Shadowing realization per link `(bs, cell, user)` in dB.
    pub shadow_db: LinkTensor,
}

/// Seed of drop number `index` under a master seed.
pub fn drop_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// Draws one network realization.
pub fn generate_drop(cfg: &DropConfig, seed: u64) -> Result<Drop> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cells, users) = (cfg.cells(), cfg.users);
    let (width, height) = cfg.torus();
    let half = cfg.spacing_km / 2.0;
    let mut positions = Vec::with_capacity(cells * users);
    for l in 0..cells {
        let bs = cfg.bs_position(l);
        for _ in 0..users {
            loop {
                let p = (
                    bs.0 + rng.random_range(-half..half),
                    bs.1 + rng.random_range(-half..half),
                );
                if wrap_distance(p, bs, width, height) >= cfg.min_distance_km {
                    positions.push((p.0.rem_euclid(width), p.1.rem_euclid(height)));
                    break;
                }
            }
        }
    }
    let shadow = Normal::new(0.0, cfg.shadow_std_db).map_err(|e| Error::Config(e.to_string()))?;
    let shadow_db = LinkTensor::from_fn(cells, users, |_, _, _| shadow.sample(&mut rng));
    let beta = LinkTensor::from_fn(cells, users, |bs, cell, user| {
        let d = wrap_distance(cfg.bs_position(bs), positions[cell * users + user], width, height);
        db_to_linear(cfg.pathloss_db(d, shadow_db.get(bs, cell, user)))
    });
    let noise = dbm_to_watts(cfg.noise_dbm);
    let scenario = NetworkScenario::new(
        ScenarioConfig::new(cells, users, cfg.antennas, cfg.tau_c)?,
        beta,
        CellArray::filled(cells, users, cfg.pilot_power_w),
        noise,
        noise,
        vec![cfg.p_max_w; cells],
        CellArray::filled(cells, users, cfg.qos_se),
    )?;
    Ok(Drop {
        scenario,
        positions,
        shadow_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pathloss_at_one_km() {
        let cfg = DropConfig::default();
        assert_relative_eq!(cfg.pathloss_db(1.0, 0.0), -148.1);
    }

    #[test]
    fn seeded_drop_is_reproducible() {
        let cfg = DropConfig {
            users: 3,
            antennas: 16,
            ..DropConfig::default()
        };
        let a = generate_drop(&cfg, 42).unwrap();
        let b = generate_drop(&cfg, 42).unwrap();
        assert_eq!(a.scenario, b.scenario);
        assert_ne!(a.scenario.beta, generate_drop(&cfg, 43).unwrap().scenario.beta);
    }

    #[test]
    fn users_respect_min_distance() {
        let cfg = DropConfig {
            users: 10,
            antennas: 16,
            ..DropConfig::default()
        };
        let d = generate_drop(&cfg, 7).unwrap();
        let (w, h) = cfg.torus();
        for (idx, p) in d.positions.iter().enumerate() {
            let bs = cfg.bs_position(idx / cfg.users);
            let dist = wrap_distance(*p, bs, w, h);
            assert!(dist >= cfg.min_distance_km && dist <= cfg.spacing_km / 2.0 * 2f64.sqrt() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn wrap_distance_symmetric_and_bounded(
            ax in 0.0f64..1.0, ay in 0.0f64..1.0, bx in 0.0f64..1.0, by in 0.0f64..1.0,
        ) {
            let d1 = wrap_distance((ax, ay), (bx, by), 1.0, 1.0);
            let d2 = wrap_distance((bx, by), (ax, ay), 1.0, 1.0);
            prop_assert!((d1 - d2).abs() < 1e-15);
            prop_assert!(d1 <= 0.5f64.hypot(0.5) + 1e-15);
        }
    }
}
