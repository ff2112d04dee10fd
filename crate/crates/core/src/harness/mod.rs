//! Experiment front-end: seeded Monte-Carlo sweeps over the power budget or
//! the sensing threshold, across schemes and correlation profiles, with CSV
//! and SVG outputs.
//!
//! Output bytes are a pure function of the experiment spec: scenes derive
//! from (seed, profile) only, workers merge through a deterministic sort key,
//! and no timing information enters the data files.

use num_complex::Complex64;
use rayon::prelude::*;
use std::path::PathBuf;

use crate::baselines::{solve_scheme, SchemeKind};
use crate::metrics::MetricReport;
use crate::numerics::{db_to_linear, dbm_to_mw, linear_to_db};
use crate::rng::{SeededRng, STREAM_SCENE};
use crate::scene::{
    build_radar_scene, generate_channel_set, ChannelModel, CorrelationProfile, SystemConfig,
};
use crate::solver::{InnerRecord, SolverError, SolverOptions};

pub mod config;
mod csv;
mod svg;

pub use config::{parse_config, parse_config_str, ConfigError};
pub use csv::{write_aggregate_csv, write_csv, write_trace_csv};
pub use svg::write_plot;

/// Swept quantity: transmit power (dBm values) or sensing threshold (dB).
#[derive(Debug, Clone)]
pub enum SweepKind {
    Power(Vec<f64>),
    Scnr(Vec<f64>),
}

impl SweepKind {
    pub fn kind_str(&self) -> &'static str {
        match self {
            SweepKind::Power(_) => "power",
            SweepKind::Scnr(_) => "scnr",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepKind::Power(v) | SweepKind::Scnr(v) => v,
        }
    }
}

/// Scheme entry in a sweep; NOMA is emitted as NaN placeholder rows so CSV
/// schemas line up with the usual figure structure.
#[derive(Debug, Clone, Copy)]
pub enum SchemeSpec {
    Solve(SchemeKind),
    NomaPlaceholder,
}

impl SchemeSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeSpec::Solve(k) => k.as_str(),
            SchemeSpec::NomaPlaceholder => "noma",
        }
    }
}

/// Radar geometry before matrix assembly (angles in radians, linear gains).
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub target_angle: f64,
    pub target_gain: Complex64,
    pub clutter: Vec<(f64, Complex64)>,
}

/// A full experiment: base system, sweep axis, schemes, profiles, seeds.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub channel_model: ChannelModel,
    pub scene_spec: SceneSpec,
    pub sweep: SweepKind,
    pub schemes: Vec<SchemeSpec>,
    pub profiles: Vec<CorrelationProfile>,
    pub seeds: Vec<u64>,
    pub solver: SolverOptions,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.sweep.values().is_empty() {
            return Err("sweep.values must not be empty".into());
        }
        if self.seeds.is_empty() {
            return Err("sweep.seeds must not be empty".into());
        }
        if self.schemes.is_empty() {
            return Err("sweep.schemes must not be empty".into());
        }
        if self.profiles.is_empty() {
            return Err("sweep.profiles must not be empty".into());
        }
        self.base.validate().map_err(|e| e.to_string())?;
        self.solver.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    /// Base config with one sweep value applied (dBm/dB converted here).
    pub fn config_at(&self, value: f64) -> SystemConfig {
        let mut cfg = self.base.clone();
        match self.sweep {
            SweepKind::Power(_) => cfg.power_budget = dbm_to_mw(value),
            SweepKind::Scnr(_) => cfg.scnr_threshold = db_to_linear(value),
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    NotConverged,
    InfeasibleSensing,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "Converged",
            RunStatus::NotConverged => "NotConverged",
            RunStatus::InfeasibleSensing => "InfeasibleSensing",
        }
    }
}

/// One (scheme, profile, sweep value, seed) result row.
///
/// `wall_time_ms` is a schema placeholder pinned to zero: output files are
/// bit-reproducible by contract, so timing goes to the progress log instead.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: &'static str,
    pub profile: &'static str,
    pub sweep_kind: &'static str,
    pub sweep_value: f64,
    pub seed: u64,
    pub wsr_bps_hz: f64,
    pub scnr_in_db: f64,
    pub scnr_out_db: f64,
    pub feasible: bool,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub wall_time_ms: f64,
    pub status: RunStatus,
}

/// Mean/stddev of WSR per (scheme, profile, sweep value).
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub scheme: &'static str,
    pub profile: &'static str,
    pub sweep_kind: &'static str,
    pub sweep_value: f64,
    pub n_seeds: usize,
    pub wsr_mean: f64,
    pub wsr_stddev: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn solve_one(
    spec: &ExperimentSpec,
    scheme: SchemeSpec,
    profile: CorrelationProfile,
    value: f64,
    seed: u64,
) -> RunRecord {
    let cfg = spec.config_at(value);
    let kind = match scheme {
        SchemeSpec::NomaPlaceholder => {
            return RunRecord {
                scheme: "noma",
                profile: profile.as_str(),
                sweep_kind: spec.sweep.kind_str(),
                sweep_value: value,
                seed,
                wsr_bps_hz: f64::NAN,
                scnr_in_db: f64::NAN,
                scnr_out_db: f64::NAN,
                feasible: false,
                outer_iters: 0,
                inner_iters_total: 0,
                wall_time_ms: 0.0,
                status: RunStatus::NotConverged,
            };
        }
        SchemeSpec::Solve(kind) => kind,
    };
    // channels depend on (seed, profile) only, never on the sweep value
    let mut rng = SeededRng::from_seed(seed, STREAM_SCENE);
    let channels = generate_channel_set(&cfg, &spec.channel_model, profile, &mut rng);
    let scene = build_radar_scene(
        spec.scene_spec.target_angle,
        spec.scene_spec.target_gain,
        &spec.scene_spec.clutter,
        &cfg,
    )
    .expect("scene angles validated at parse time");

    let (status, outcome) = match solve_scheme(kind, &channels, &scene, &cfg, &spec.solver, seed) {
        Ok(outcome) => (RunStatus::Converged, Some(outcome)),
        Err(SolverError::NotConverged(best)) => (RunStatus::NotConverged, Some(*best)),
        Err(SolverError::InfeasibleSensing { .. }) => (RunStatus::InfeasibleSensing, None),
        Err(e) => panic!("solver failed on a validated instance: {e}"),
    };
    let (wsr, scnr_in_db, scnr_out_db, feasible, outer_iters, inner_iters_total) = match &outcome {
        None => (f64::NAN, f64::NAN, f64::NAN, false, 0, 0),
        Some(o) => {
            let report = MetricReport::evaluate(&o.solution, &channels, &scene, &cfg)
                .expect("dimensions fixed by construction");
            (
                report.wsr,
                linear_to_db(report.scnr_in),
                linear_to_db(report.scnr_out),
                // feasible implies Converged
                report.feasible && status == RunStatus::Converged,
                o.outer_iters,
                o.inner_iters_total,
            )
        }
    };
    RunRecord {
        scheme: kind.as_str(),
        profile: profile.as_str(),
        sweep_kind: spec.sweep.kind_str(),
        sweep_value: value,
        seed,
        wsr_bps_hz: wsr,
        scnr_in_db,
        scnr_out_db,
        feasible,
        outer_iters,
        inner_iters_total,
        wall_time_ms: 0.0,
        status,
    }
}

/// Runs the full sweep matrix on the current rayon pool and aggregates WSR
/// statistics. Records come back sorted by (scheme, profile, sweep index,
/// seed), so parallel scheduling never changes the output.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, String> {
    spec.validate()?;
    let mut items = Vec::new();
    for (si, scheme) in spec.schemes.iter().enumerate() {
        for (pi, profile) in spec.profiles.iter().enumerate() {
            for (vi, value) in spec.sweep.values().iter().enumerate() {
                for &seed in &spec.seeds {
                    items.push((si, pi, vi, *scheme, *profile, *value, seed));
                }
            }
        }
    }
    let mut results: Vec<((usize, usize, usize, u64), RunRecord)> = items
        .par_iter()
        .map(|&(si, pi, vi, scheme, profile, value, seed)| {
            ((si, pi, vi, seed), solve_one(spec, scheme, profile, value, seed))
        })
        .collect();
    results.sort_by_key(|(key, _)| *key);
    let records: Vec<RunRecord> = results.into_iter().map(|(_, r)| r).collect();

    let mut aggregates = Vec::new();
    for scheme in &spec.schemes {
        for profile in &spec.profiles {
            for value in spec.sweep.values() {
                let group: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| {
                        r.scheme == scheme.as_str()
                            && r.profile == profile.as_str()
                            && r.sweep_value == *value
                    })
                    .collect();
                let n = group.len();
                if n == 0 {
                    continue;
                }
                let mean = group.iter().map(|r| r.wsr_bps_hz).sum::<f64>() / n as f64;
                let var = if n > 1 {
                    group
                        .iter()
                        .map(|r| (r.wsr_bps_hz - mean).powi(2))
                        .sum::<f64>()
                        / (n - 1) as f64
                } else {
                    0.0
                };
                aggregates.push(AggregateRow {
                    scheme: scheme.as_str(),
                    profile: profile.as_str(),
                    sweep_kind: spec.sweep.kind_str(),
                    sweep_value: *value,
                    n_seeds: n,
                    wsr_mean: mean,
                    wsr_stddev: var.sqrt(),
                });
            }
        }
    }
    Ok(ExperimentResult { records, aggregates })
}

/// Runs a single (first scheme, first profile, first sweep value) solve and
/// returns its full inner-iteration trace.
pub fn trace_run(spec: &ExperimentSpec, seed: u64) -> Result<Vec<InnerRecord>, String> {
    spec.validate()?;
    let scheme = spec
        .schemes
        .iter()
        .find_map(|s| match s {
            SchemeSpec::Solve(k) => Some(*k),
            SchemeSpec::NomaPlaceholder => None,
        })
        .ok_or_else(|| "trace requires at least one solvable scheme".to_string())?;
    let profile = spec.profiles[0];
    let value = spec.sweep.values()[0];
    let cfg = spec.config_at(value);
    let mut rng = SeededRng::from_seed(seed, STREAM_SCENE);
    let channels = generate_channel_set(&cfg, &spec.channel_model, profile, &mut rng);
    let scene = build_radar_scene(
        spec.scene_spec.target_angle,
        spec.scene_spec.target_gain,
        &spec.scene_spec.clutter,
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    match solve_scheme(scheme, &channels, &scene, &cfg, &spec.solver, seed) {
        Ok(outcome) => Ok(outcome.trace),
        Err(SolverError::NotConverged(best)) => Ok(best.trace),
        Err(e) => Err(e.to_string()),
    }
}
