//! Flat INI-style experiment configuration: `[section]` headers and
//! `key = value` pairs, `#` or `;` comments. Powers are written in dBm and
//! angles in degrees; conversion to linear mW and radians happens here,
//! exactly once.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::baselines::SchemeKind;
use crate::numerics::{db_to_linear, dbm_to_mw};
use crate::scene::{ChannelModel, CorrelationProfile, SystemConfig};
use crate::solver::SolverOptions;

use super::{ExperimentSpec, SceneSpec, SchemeSpec, SweepKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key '{key}' in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("key '{key}': {message}")]
    InvalidValue { key: String, message: String },
    #[error("missing required key '{0}'")]
    MissingKey(String),
    #[error("{0}")]
    Validation(String),
}

type Section = BTreeMap<String, String>;

fn parse_ini(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                line: idx + 1,
                message: "unterminated section header".into(),
            })?;
            current = Some(name.trim().to_string());
            sections.entry(name.trim().to_string()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
            line: idx + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let section = current.clone().ok_or(ConfigError::Syntax {
            line: idx + 1,
            message: "key outside of any [section]".into(),
        })?;
        sections
            .entry(section)
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(sections)
}

struct SectionReader<'a> {
    name: &'a str,
    map: Section,
}

impl<'a> SectionReader<'a> {
    fn qualified(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                key: self.qualified(key),
                message: e.to_string(),
            }),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|e| ConfigError::InvalidValue {
                key: self.qualified(key),
                message: e.to_string(),
            }),
        }
    }

    fn string_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                        key: self.qualified(key),
                        message: format!("'{}': {e}", p.trim()),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(key) = self.map.into_keys().next() {
            return Err(ConfigError::UnknownKey {
                section: self.name.to_string(),
                key,
            });
        }
        Ok(())
    }
}

fn parse_seeds(key: &str, text: &str) -> Result<Vec<u64>, ConfigError> {
    let invalid = |message: String| ConfigError::InvalidValue {
        key: key.to_string(),
        message,
    };
    let text = text.trim();
    if let Some((start, end)) = text.split_once(':') {
        let a: u64 = start.trim().parse().map_err(|e| invalid(format!("{e}")))?;
        let b: u64 = end.trim().parse().map_err(|e| invalid(format!("{e}")))?;
        if b <= a {
            return Err(invalid(format!("empty seed range {a}:{b}")));
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| invalid(format!("'{}': {e}", p.trim()))))
        .collect()
}

/// Parses and validates an experiment configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parses a configuration from text; see README for the key reference.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut sections = parse_ini(text)?;
    for name in sections.keys() {
        if !matches!(name.as_str(), "system" | "scene" | "sweep" | "solver" | "output") {
            return Err(ConfigError::UnknownSection(name.clone()));
        }
    }
    let mut section = |name: &'static str| SectionReader {
        name,
        map: sections.remove(name).unwrap_or_default(),
    };

    // [system]
    let mut sys = section("system");
    let defaults = SystemConfig::defaults();
    let n_users = sys.usize_or("n_users", defaults.n_users)?;
    let weights = sys
        .f64_list("user_weights")?
        .unwrap_or_else(|| vec![1.0; n_users]);
    let base = SystemConfig {
        n_tx: sys.usize_or("n_tx", defaults.n_tx)?,
        n_rx: sys.usize_or("n_rx", defaults.n_rx)?,
        n_rf: sys.usize_or("n_rf", defaults.n_rf)?,
        n_users,
        carrier_freq_hz: sys.f64_or("carrier_freq_ghz", 28.0)? * 1e9,
        antenna_spacing_wavelengths: sys.f64_or("antenna_spacing_wavelengths", 0.5)?,
        power_budget: dbm_to_mw(sys.f64_or("p_t_dbm", 30.0)?),
        user_noise_power: dbm_to_mw(sys.f64_or("noise_dbm", -100.0)?),
        echo_noise_power: dbm_to_mw(sys.f64_or("echo_noise_dbm", -100.0)?),
        user_weights: weights,
        scnr_threshold: db_to_linear(sys.f64_or("scnr_threshold_db", 10.0)?),
    };
    let channel_model = ChannelModel {
        paths_per_user: sys.usize_or("paths_per_user", 4)?,
        gain_scale: db_to_linear(sys.f64_or("channel_gain_db", -80.0)?).sqrt(),
        ..ChannelModel::default()
    };
    sys.finish()?;
    base.validate()
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    if channel_model.paths_per_user < 1 {
        return Err(ConfigError::InvalidValue {
            key: "system.paths_per_user".into(),
            message: "must be >= 1".into(),
        });
    }

    // [scene]
    let mut scn = section("scene");
    let target_angle = scn.f64_or("target_angle_deg", 0.0)?.to_radians();
    let target_amp = db_to_linear(scn.f64_or("target_gain_db", 0.0)?).sqrt();
    let clutter_amp = db_to_linear(scn.f64_or("clutter_gain_db", 0.0)?).sqrt();
    let clutter_angles = scn
        .f64_list("clutter_angles_deg")?
        .unwrap_or_else(|| vec![-50.0, -20.0, 40.0]);
    scn.finish()?;
    let scene_spec = SceneSpec {
        target_angle,
        target_gain: Complex64::new(target_amp, 0.0),
        clutter: clutter_angles
            .into_iter()
            .map(|deg| (deg.to_radians(), Complex64::new(clutter_amp, 0.0)))
            .collect(),
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    if target_angle.abs() > half_pi {
        return Err(ConfigError::InvalidValue {
            key: "scene.target_angle_deg".into(),
            message: "angle outside [-90, 90]".into(),
        });
    }
    for (a, _) in &scene_spec.clutter {
        if a.abs() > half_pi {
            return Err(ConfigError::InvalidValue {
                key: "scene.clutter_angles_deg".into(),
                message: "angle outside [-90, 90]".into(),
            });
        }
    }

    // [sweep]
    let mut swp = section("sweep");
    let kind_str = swp.string_or("kind", "power");
    let values = swp
        .f64_list("values")?
        .ok_or(ConfigError::MissingKey("sweep.values".into()))?;
    let sweep = match kind_str.as_str() {
        "power" => SweepKind::Power(values),
        "scnr" => SweepKind::Scnr(values),
        other => {
            return Err(ConfigError::InvalidValue {
                key: "sweep.kind".into(),
                message: format!("expected 'power' or 'scnr', got '{other}'"),
            })
        }
    };
    let schemes_text = swp.string_or("schemes", "rsma_hybrid");
    let mut schemes = Vec::new();
    for part in schemes_text.split(',') {
        let part = part.trim();
        let scheme = if part == "noma" {
            SchemeSpec::NomaPlaceholder
        } else {
            SchemeSpec::Solve(SchemeKind::parse(part).ok_or_else(|| ConfigError::InvalidValue {
                key: "sweep.schemes".into(),
                message: format!(
                    "unknown scheme '{part}' (expected rsma_hybrid, sdma_hybrid, rsma_fully_digital or noma)"
                ),
            })?)
        };
        schemes.push(scheme);
    }
    let profiles_text = swp.string_or("profiles", "low");
    let mut profiles = Vec::new();
    for part in profiles_text.split(',') {
        profiles.push(match part.trim() {
            "low" => CorrelationProfile::LowCorrelation,
            "high" => CorrelationProfile::HighCorrelation,
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "sweep.profiles".into(),
                    message: format!("expected 'low' or 'high', got '{other}'"),
                })
            }
        });
    }
    let seeds_text = swp
        .take("seeds")
        .ok_or(ConfigError::MissingKey("sweep.seeds".into()))?;
    let seeds = parse_seeds("sweep.seeds", &seeds_text)?;
    swp.finish()?;

    // [solver]
    let mut sol = section("solver");
    let d = SolverOptions::default();
    let solver = SolverOptions {
        inner_tol: sol.f64_or("inner_tol", d.inner_tol)?,
        outer_tol: sol.f64_or("outer_tol", d.outer_tol)?,
        max_inner: sol.usize_or("max_inner", d.max_inner)?,
        max_outer: sol.usize_or("max_outer", d.max_outer)?,
        penalty_init: sol.f64_or("penalty_init", d.penalty_init)?,
        penalty_shrink: sol.f64_or("penalty_shrink", d.penalty_shrink)?,
        violation_shrink: sol.f64_or("violation_shrink", d.violation_shrink)?,
        bisection_tol: sol.f64_or("bisection_tol", d.bisection_tol)?,
        bisection_max_iter: sol.usize_or("bisection_max_iter", d.bisection_max_iter)?,
        rf_phase_sweeps: sol.usize_or("rf_phase_sweeps", d.rf_phase_sweeps)?,
    };
    sol.finish()?;
    solver
        .validate()
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    // [output]
    let mut out = section("output");
    let output_dir = PathBuf::from(out.string_or("dir", "runs"));
    out.finish()?;

    let spec = ExperimentSpec {
        base,
        channel_model,
        scene_spec,
        sweep,
        schemes,
        profiles,
        seeds,
        solver,
        output_dir,
    };
    spec.validate().map_err(ConfigError::Validation)?;
    Ok(spec)
}
