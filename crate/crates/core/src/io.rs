//! Plain-text scenario files and tensor CSVs.
//!
//! A scenario file is a list of `key = value` lines. Scalars are written as
//! is, arrays as whitespace-separated numbers in row-major order. Blank
//! lines and lines starting with `#` are ignored. Floats are printed with
//! Rust's shortest round-trip formatting, so writing and reading a scenario
//! reproduces it exactly.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::centralized::csv_err;
use crate::error::{Error, Result};
use crate::system::{CellArray, LinkTensor, NetworkScenario, ScenarioConfig};

/// Parsed `key = value` pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: HashMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), (idx + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Result<(usize, &str)> {
        self.entries
            .get(key)
            .map(|(line, v)| (*line, v.as_str()))
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing key `{key}`"),
            })
    }

    /// Parses a required scalar.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|e: T::Err| Error::Parse {
            line,
            msg: format!("`{key}`: {e}"),
        })
    }

    /// Parses an optional scalar.
    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if self.contains(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    /// Parses a whitespace-separated array of exactly `len` numbers.
    pub fn array(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let (line, v) = self.raw(key)?;
        let values = v
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line,
                msg: format!("`{key}`: {e}"),
            })?;
        if values.len() != len {
            return Err(Error::Parse {
                line,
                msg: format!("`{key}` has {} entries, expected {len}", values.len()),
            });
        }
        Ok(values)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Writes a scenario in the `key = value` format.
pub fn write_scenario<W: Write>(mut w: W, s: &NetworkScenario) -> Result<()> {
    let c = &s.config;
    writeln!(w, "cells = {}", c.cells)?;
    writeln!(w, "users = {}", c.users)?;
    writeln!(w, "antennas = {}", c.antennas)?;
    writeln!(w, "tau_c = {}", c.tau_c)?;
    writeln!(w, "sigma_ul_sq = {}", s.sigma_ul_sq)?;
    writeln!(w, "sigma_dl_sq = {}", s.sigma_dl_sq)?;
    writeln!(w, "p_max = {}", join(&s.p_max))?;
    writeln!(w, "pilot_power = {}", join(s.pilot_power.as_slice()))?;
    writeln!(w, "qos_se = {}", join(s.qos_se.as_slice()))?;
    writeln!(w, "# beta[bs][cell][user]")?;
    writeln!(w, "beta = {}", join(s.beta.as_slice()))?;
    Ok(())
}

/// Reads a scenario written by [`write_scenario`] and validates it.
pub fn read_scenario<R: Read>(mut r: R) -> Result<NetworkScenario> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let kv = KeyValues::parse(&text)?;
    let (cells, users): (usize, usize) = (kv.get("cells")?, kv.get("users")?);
    let config = ScenarioConfig::new(cells, users, kv.get("antennas")?, kv.get("tau_c")?)?;
    NetworkScenario::new(
        config,
        LinkTensor::from_vec(cells, users, kv.array("beta", cells * cells * users)?)?,
        CellArray::from_vec(cells, users, kv.array("pilot_power", cells * users)?)?,
        kv.get("sigma_ul_sq")?,
        kv.get("sigma_dl_sq")?,
        kv.array("p_max", cells)?,
        CellArray::from_vec(cells, users, kv.array("qos_se", cells * users)?)?,
    )
}

/// Writes a link tensor as CSV with header `l,i,k,value`: BS `l`, cell `i`,
/// user `k`.
pub fn write_tensor_csv<W: Write>(w: W, t: &LinkTensor) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["l", "i", "k", "value"]).map_err(csv_err)?;
    for (l, i, k, v) in t.iter() {
        out.serialize((l, i, k, v)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a tensor CSV of the given shape. Every entry must appear once.
pub fn read_tensor_csv<R: Read>(r: R, cells: usize, users: usize) -> Result<LinkTensor> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["l", "i", "k", "value"] {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `l,i,k,value`".into(),
        });
    }
    let mut t = LinkTensor::zeros(cells, users);
    let mut seen = vec![false; cells * cells * users];
    for (row, rec) in rdr.deserialize::<(usize, usize, usize, f64)>().enumerate() {
        let line = row + 2;
        let (l, i, k, v) = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if l >= cells || i >= cells || k >= users {
            return Err(Error::Parse {
                line,
                msg: format!("index ({l},{i},{k}) outside {cells}x{cells}x{users}"),
            });
        }
        let idx = (l * cells + i) * users + k;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate entry ({l},{i},{k})"),
            });
        }
        t.set(l, i, k, v);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("entry {missing} (row-major) missing"),
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_drop, DropConfig};
    use crate::system::{compute_estimate_variance, testing::scenario};

    #[test]
    fn scenario_round_trip_is_exact() {
        let cfg = DropConfig {
            users: 3,
            antennas: 12,
            ..DropConfig::default()
        };
        let s = generate_drop(&cfg, 17).unwrap().scenario;
        let mut buf = Vec::new();
        write_scenario(&mut buf, &s).unwrap();
        assert_eq!(read_scenario(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn tensor_csv_round_trip() {
        let s = scenario(
            2,
            3,
            8,
            |bs, cell, user| 1e-12 * (1 + bs * 7 + cell * 3 + user) as f64,
            1e-13,
            0.5,
        );
        let gamma = compute_estimate_variance(&s);
        let mut buf = Vec::new();
        write_tensor_csv(&mut buf, &gamma).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
        assert_eq!(read_tensor_csv(buf.as_slice(), 2, 3).unwrap(), gamma);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = KeyValues::parse("a = 1\n\nno equals sign").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let kv = KeyValues::parse("# comment\nx = 1 2 three").unwrap();
        assert!(matches!(kv.array("x", 3), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(kv.array("x", 2), Err(Error::Parse { .. })));
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
    }

    #[test]
    fn missing_tensor_entry_is_rejected() {
        let csv = "l,i,k,value\n0,0,0,1\n";
        assert!(read_tensor_csv(csv.as_bytes(), 1, 2).is_err());
        assert_eq!(read_tensor_csv(csv.as_bytes(), 1, 1).unwrap().get(0, 0, 0), 1.0);
    }
}
