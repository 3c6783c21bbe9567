//! Flat key/value overrides for a [`ScenarioConfig`].
//!
//! ```toml
//! base = "test1b"
//! nx = "300"
//! tau_lf = "0.5"          # one value for every compartment
//! lambda = "1, 1, 0"      # or one per compartment
//! beta0 = "9.5"
//! ```
//!
//! Values may be TOML numbers, booleans or strings holding decimals.

use std::path::{Path, PathBuf};

use bifi_core::RandomDomain;

use crate::error::{io_err, ExpError, ExpResult};
use crate::scenario::{Model, ScenarioConfig, ScenarioName};

fn text(key: &str, v: &toml::Value) -> ExpResult<String> {
    match v {
        toml::Value::String(s) => Ok(s.trim().to_string()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:e}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => {
            let parts = items.iter().map(|i| text(key, i)).collect::<ExpResult<Vec<_>>>()?;
            Ok(parts.join(","))
        }
        other => Err(ExpError::Config(format!("unsupported value for '{key}': {other}"))),
    }
}

fn number(key: &str, s: &str) -> ExpResult<f64> {
    s.parse()
        .map_err(|_| ExpError::Config(format!("'{key}' expects a number, got '{s}'")))
}

fn count(key: &str, s: &str) -> ExpResult<usize> {
    s.parse()
        .map_err(|_| ExpError::Config(format!("'{key}' expects a nonnegative integer, got '{s}'")))
}

fn list(key: &str, s: &str) -> ExpResult<Vec<f64>> {
    s.split(',').map(|p| number(key, p.trim())).collect()
}

/// A single value is broadcast to every compartment.
fn per_compartment(key: &str, s: &str, nc: usize) -> ExpResult<Vec<f64>> {
    let v = list(key, s)?;
    match v.len() {
        1 => Ok(vec![v[0]; nc]),
        n if n == nc => Ok(v),
        n => Err(ExpError::Config(format!("'{key}' has {n} values, expected 1 or {nc}"))),
    }
}

fn triple(key: &str, s: &str) -> ExpResult<[f64; 3]> {
    let v = list(key, s)?;
    v.try_into()
        .map_err(|_| ExpError::Config(format!("'{key}' expects three values")))
}

/// Reads a config file. A `base` key selects the starting scenario and is
/// required when `scenario` is [`ScenarioName::Custom`].
pub fn load(path: &Path, scenario: ScenarioName) -> ExpResult<ScenarioConfig> {
    let body = std::fs::read_to_string(path).map_err(io_err(path))?;
    from_str(&body, scenario)
}

pub fn from_str(body: &str, scenario: ScenarioName) -> ExpResult<ScenarioConfig> {
    let table: toml::Table = body
        .parse()
        .map_err(|e: toml::de::Error| ExpError::Config(e.to_string()))?;
    let base = match table.get("base") {
        Some(v) => text("base", v)?.parse()?,
        None => scenario,
    };
    if base == ScenarioName::Custom {
        return Err(ExpError::Config("'base' must name a built-in scenario".into()));
    }
    let mut cfg = ScenarioConfig::build(base)?;
    if scenario == ScenarioName::Custom {
        cfg.name = "custom".into();
        cfg.out_dir = PathBuf::from("out").join("custom");
    }
    for (key, value) in &table {
        if key == "base" {
            continue;
        }
        apply(&mut cfg, key, &text(key, value)?)?;
    }
    Ok(cfg)
}

/// Sets one field from its textual value.
pub fn apply(cfg: &mut ScenarioConfig, key: &str, s: &str) -> ExpResult<()> {
    let nc = cfg.compartments().len();
    match key {
        "name" => cfg.name = s.to_string(),
        "nx" => cfg.nx = count(key, s)?,
        "nv" => cfg.nv = count(key, s)?,
        "length" => cfg.length = number(key, s)?,
        "lambda" => cfg.lambda = per_compartment(key, s, nc)?,
        "tau_lf" => cfg.tau_lf = per_compartment(key, s, nc)?,
        "tau_hf" => {
            cfg.tau_hf = per_compartment(key, s, nc)?;
            cfg.consistent = false;
        }
        "consistent" => {
            cfg.consistent = s
                .parse()
                .map_err(|_| ExpError::Config(format!("'{key}' expects true or false")))?
        }
        "z_bounds" => {
            let v = list(key, s)?;
            if v.len() != 2 {
                return Err(ExpError::Config("'z_bounds' expects 'lo, hi'".into()));
            }
            cfg.domain = RandomDomain::cube(2, v[0], v[1])?;
        }
        "cc_level" => {
            cfg.cc_level = s
                .parse()
                .map_err(|_| ExpError::Config(format!("'{key}' expects an integer")))?
        }
        "candidates" => cfg.candidates = count(key, s)?,
        "n" => cfg.n_select = count(key, s)?,
        "t_end" => cfg.t_end = number(key, s)?,
        "seed" => {
            cfg.seed = s
                .parse()
                .map_err(|_| ExpError::Config(format!("'{key}' expects an integer")))?
        }
        "tableau" => cfg.tableau = s.to_string(),
        "out" => cfg.out_dir = PathBuf::from(s),
        _ => return apply_model(&mut cfg.model, key, s),
    }
    Ok(())
}

fn apply_model(model: &mut Model, key: &str, s: &str) -> ExpResult<()> {
    match model {
        Model::Sir(m) => {
            let slot = match key {
                "beta0" => &mut m.beta0,
                "beta_z" => &mut m.beta_z,
                "beta_amp" => &mut m.beta_amp,
                "beta_freq" => &mut m.beta_freq,
                "gamma0" => &mut m.gamma0,
                "gamma_z" => &mut m.gamma_z,
                "infected_amp" => &mut m.infected_amp,
                "infected_center" => &mut m.infected_center,
                "infected_width" => &mut m.infected_width,
                _ => return Err(ExpError::Config(format!("unknown key '{key}' for an SIR scenario"))),
            };
            *slot = number(key, s)?;
        }
        Model::Seiar(m) => match key {
            "cities" => m.cities = triple(key, s)?,
            "exposed_amp" => m.exposed_amp = triple(key, s)?,
            "hotspot" => m.hotspot = triple(key, s)?,
            _ => {
                let slot = match key {
                    "beta_a0" => &mut m.beta_a0,
                    "beta_a_z" => &mut m.beta_a_z,
                    "beta_ripple" => &mut m.beta_ripple,
                    "beta_i_ratio" => &mut m.beta_i_ratio,
                    "gamma_i" => &mut m.gamma_i,
                    "gamma_a" => &mut m.gamma_a,
                    "a" => &mut m.a,
                    "sigma" => &mut m.sigma,
                    _ => {
                        return Err(ExpError::Config(format!(
                            "unknown key '{key}' for an SEIAR scenario"
                        )))
                    }
                };
                *slot = number(key, s)?;
            }
        },
    }
    Ok(())
}
