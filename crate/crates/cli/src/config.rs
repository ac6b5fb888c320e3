//! Line-based `key = value` experiment configuration with geometry
//! validation. Every key has a default; unknown keys and malformed values
//! are rejected by name, and the standing geometric hypotheses are checked
//! at load time.

use hskdv_core::{validate_geometry, Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub length: f64,
    pub grid_n: usize,
    pub grid_m: usize,
    pub horizon: f64,
    pub omega: (f64, f64),
    pub obs: (f64, f64),
    pub omega0: (f64, f64),
    pub s: f64,
    pub eps: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
    pub picard_radius: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub amplitude: f64,
    pub decay: f64,
    pub theta: f64,
    pub seed: u64,
    pub tau: f64,
    pub ensemble: usize,
    pub perturbations: usize,
    pub insensitize_control: bool,
    pub pq_target_factor: f64,
    pub outer_max: usize,
    pub control_tol: f64,
    pub sim_dispersion: f64,
    pub sim_bc: String,
    pub sim_direction: String,
    pub cascade_system: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            length: 1.0,
            grid_n: 64,
            grid_m: 128,
            horizon: 0.5,
            omega: (0.45, 0.8),
            obs: (0.2, 0.6),
            omega0: (0.48, 0.56),
            s: 1.0,
            eps: 1e-6,
            cg_tol: 1e-10,
            cg_max: 20000,
            picard_radius: 1.0,
            picard_tol: 1e-12,
            picard_max: 80,
            amplitude: 1e-3,
            decay: 2.5,
            theta: 0.5,
            seed: 1,
            tau: 1e-3,
            ensemble: 20,
            perturbations: 5,
            insensitize_control: true,
            pq_target_factor: 1e-3,
            outer_max: 10,
            control_tol: 1e-6,
            sim_dispersion: -0.5,
            sim_bc: "left".to_string(),
            sim_direction: "forward".to_string(),
            cascade_system: "extended".to_string(),
        }
    }
}

fn parse_interval(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(|p| p.trim()).collect();
    if parts.len() != 2 {
        return Err(Error::config(format!(
            "key '{key}': expected 'a,b', got '{v}'"
        )));
    }
    let a: f64 = parts[0]
        .parse()
        .map_err(|_| Error::config(format!("key '{key}': malformed number '{}'", parts[0])))?;
    let b: f64 = parts[1]
        .parse()
        .map_err(|_| Error::config(format!("key '{key}': malformed number '{}'", parts[1])))?;
    Ok((a, b))
}

macro_rules! parse_num {
    ($key:expr, $val:expr) => {
        $val.parse().map_err(|_| {
            Error::config(format!("key '{}': malformed value '{}'", $key, $val))
        })?
    };
}

impl ExperimentConfig {
    pub fn apply_line(&mut self, line: &str) -> Result<()> {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return Ok(());
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "length" => self.length = parse_num!(key, value),
            "grid_n" => self.grid_n = parse_num!(key, value),
            "grid_m" => self.grid_m = parse_num!(key, value),
            "horizon" => self.horizon = parse_num!(key, value),
            "omega" => self.omega = parse_interval(key, value)?,
            "obs" => self.obs = parse_interval(key, value)?,
            "omega0" => self.omega0 = parse_interval(key, value)?,
            "s" => self.s = parse_num!(key, value),
            "eps" => self.eps = parse_num!(key, value),
            "cg_tol" => self.cg_tol = parse_num!(key, value),
            "cg_max" => self.cg_max = parse_num!(key, value),
            "picard_radius" => self.picard_radius = parse_num!(key, value),
            "picard_tol" => self.picard_tol = parse_num!(key, value),
            "picard_max" => self.picard_max = parse_num!(key, value),
            "amplitude" => self.amplitude = parse_num!(key, value),
            "decay" => self.decay = parse_num!(key, value),
            "theta" => self.theta = parse_num!(key, value),
            "seed" => self.seed = parse_num!(key, value),
            "tau" => self.tau = parse_num!(key, value),
            "ensemble" => self.ensemble = parse_num!(key, value),
            "perturbations" => self.perturbations = parse_num!(key, value),
            "insensitize_control" => {
                self.insensitize_control = match value {
                    "on" | "true" | "1" => true,
                    "off" | "false" | "0" => false,
                    _ => {
                        return Err(Error::config(format!(
                            "key '{key}': expected on/off, got '{value}'"
                        )))
                    }
                }
            }
            "pq_target_factor" => self.pq_target_factor = parse_num!(key, value),
            "outer_max" => self.outer_max = parse_num!(key, value),
            "control_tol" => self.control_tol = parse_num!(key, value),
            "sim_dispersion" => self.sim_dispersion = parse_num!(key, value),
            "sim_bc" => {
                if value != "left" && value != "right" {
                    return Err(Error::config(format!(
                        "key '{key}': expected left|right, got '{value}'"
                    )));
                }
                self.sim_bc = value.to_string();
            }
            "sim_direction" => {
                if value != "forward" && value != "backward" {
                    return Err(Error::config(format!(
                        "key '{key}': expected forward|backward, got '{value}'"
                    )));
                }
                self.sim_direction = value.to_string();
            }
            "cascade_system" => {
                if value != "extended" && value != "adjoint" {
                    return Err(Error::config(format!(
                        "key '{key}': expected extended|adjoint, got '{value}'"
                    )));
                }
                self.cascade_system = value.to_string();
            }
            _ => return Err(Error::config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        validate_geometry(self.length, self.omega, self.obs, self.omega0)?;
        if self.grid_n < 8 {
            return Err(Error::config("key 'grid_n': need at least 8 interior nodes"));
        }
        if self.grid_m < 2 {
            return Err(Error::config("key 'grid_m': need at least 2 time steps"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("key 'horizon': must be positive"));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::config("key 'theta': must lie in [0.5, 1]"));
        }
        if !(self.s > 0.0) {
            return Err(Error::config("key 's': must be positive"));
        }
        Ok(())
    }

    /// Canonical text of the resolved configuration, used for the manifest
    /// and the run-directory hash.
    pub fn canonical(&self) -> String {
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("length", format!("{:.17e}", self.length));
        pairs.insert("grid_n", self.grid_n.to_string());
        pairs.insert("grid_m", self.grid_m.to_string());
        pairs.insert("horizon", format!("{:.17e}", self.horizon));
        pairs.insert("omega", format!("{:.17e},{:.17e}", self.omega.0, self.omega.1));
        pairs.insert("obs", format!("{:.17e},{:.17e}", self.obs.0, self.obs.1));
        pairs.insert(
            "omega0",
            format!("{:.17e},{:.17e}", self.omega0.0, self.omega0.1),
        );
        pairs.insert("s", format!("{:.17e}", self.s));
        pairs.insert("eps", format!("{:.17e}", self.eps));
        pairs.insert("cg_tol", format!("{:.17e}", self.cg_tol));
        pairs.insert("cg_max", self.cg_max.to_string());
        pairs.insert("picard_radius", format!("{:.17e}", self.picard_radius));
        pairs.insert("picard_tol", format!("{:.17e}", self.picard_tol));
        pairs.insert("picard_max", self.picard_max.to_string());
        pairs.insert("amplitude", format!("{:.17e}", self.amplitude));
        pairs.insert("decay", format!("{:.17e}", self.decay));
        pairs.insert("theta", format!("{:.17e}", self.theta));
        pairs.insert("seed", self.seed.to_string());
        pairs.insert("tau", format!("{:.17e}", self.tau));
        pairs.insert("ensemble", self.ensemble.to_string());
        pairs.insert("perturbations", self.perturbations.to_string());
        pairs.insert(
            "insensitize_control",
            if self.insensitize_control { "on" } else { "off" }.to_string(),
        );
        pairs.insert("pq_target_factor", format!("{:.17e}", self.pq_target_factor));
        pairs.insert("outer_max", self.outer_max.to_string());
        pairs.insert("control_tol", format!("{:.17e}", self.control_tol));
        pairs.insert("sim_dispersion", format!("{:.17e}", self.sim_dispersion));
        pairs.insert("sim_bc", self.sim_bc.clone());
        pairs.insert("sim_direction", self.sim_direction.clone());
        pairs.insert("cascade_system", self.cascade_system.clone());
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config '{}': {e}", path.display())))?;
    let mut cfg = ExperimentConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        cfg.apply_line(line)
            .map_err(|e| Error::config(format!("{} line {}: {e}", path.display(), lineno + 1)))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn geometry_examples() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_line("omega = 0.45,0.8").unwrap();
        cfg.apply_line("obs = 0.2,0.6").unwrap();
        cfg.apply_line("omega0 = 0.48,0.56").unwrap();
        cfg.validate().unwrap();

        let mut bad = ExperimentConfig::default();
        bad.apply_line("omega = 0.7,0.9").unwrap();
        bad.apply_line("obs = 0.1,0.3").unwrap();
        assert!(bad.validate().is_err());

        let mut bad2 = ExperimentConfig::default();
        bad2.apply_line("omega0 = 0.44,0.56").unwrap();
        assert!(bad2.validate().is_err());
    }

    #[test]
    fn malformed_values_name_the_key() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_line("eps = banana").unwrap_err();
        assert!(err.to_string().contains("eps"));
        let err = cfg.apply_line("no_such_key = 1").unwrap_err();
        assert!(err.to_string().contains("no_such_key"));
    }
}
