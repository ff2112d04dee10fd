//! WMMSE-PDD solver: an augmented-Lagrangian inner loop over five variable
//! blocks with closed-form updates, under a CCCP-linearized sensing
//! constraint, wrapped in an outer loop that updates Lagrange multipliers or
//! shrinks the penalty based on the consensus violation.
//!
//! Consensus variables: X = F_RF F_D, Y = X, Z_k = X, q_k = c. The augmented
//! objective is sum_k alpha_k eta_k(X) - alpha^T c + g_rho where g_rho
//! collects the four quadratic penalty groups.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::metrics::{self, AnalogArch, HbfSolution};
use crate::numerics::{cdotc_parts, ksum, KahanSum};
use crate::rng::{SeededRng, STREAM_SOLVER_INIT};
use crate::scene::{steering_vector, ChannelSet, RadarScene, SystemConfig};

mod steps;

/// Stopping rules and sub-solver knobs.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Inner stop: relative AL-objective change below this ends the sweep loop.
    pub inner_tol: f64,
    /// Outer stop: converged when h <= outer_tol * sqrt(P_T).
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Initial penalty rho.
    pub penalty_init: f64,
    /// Penalty shrink factor c_rho in (0, 1).
    pub penalty_shrink: f64,
    /// Violation-target shrink (0.9).
    pub violation_shrink: f64,
    /// Relative bracket width target for the multiplier bisections.
    pub bisection_tol: f64,
    pub bisection_max_iter: usize,
    /// Coordinate-descent passes over the analog phase entries per sweep.
    pub rf_phase_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-4,
            outer_tol: 1e-5,
            max_inner: 30,
            max_outer: 200,
            penalty_init: 1.0,
            penalty_shrink: 0.8,
            violation_shrink: 0.9,
            bisection_tol: 1e-8,
            bisection_max_iter: 128,
            rf_phase_sweeps: 3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.inner_tol > 0.0
            && self.outer_tol > 0.0
            && self.penalty_init > 0.0
            && self.penalty_shrink > 0.0
            && self.penalty_shrink < 1.0
            && self.violation_shrink > 0.0
            && self.bisection_tol > 0.0
            && self.max_inner >= 1
            && self.max_outer >= 1
            && self.bisection_max_iter >= 1;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidOptions)
        }
    }
}

/// Which solve path runs: RSMA keeps the common stream, SDMA pins it to zero
/// and drops the common-rate machinery; the fully-digital reference fixes the
/// analog stage to the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverVariant {
    pub common_stream: bool,
    pub analog: AnalogArch,
}

impl SolverVariant {
    pub fn rsma_hybrid() -> Self {
        Self { common_stream: true, analog: AnalogArch::PhaseShifter }
    }
    pub fn sdma_hybrid() -> Self {
        Self { common_stream: false, analog: AnalogArch::PhaseShifter }
    }
    pub fn rsma_fully_digital() -> Self {
        Self { common_stream: true, analog: AnalogArch::Identity }
    }
}

/// All PDD optimization variables, multipliers and the penalty.
///
/// Column convention throughout: column 0 of any N_t x (K+1) matrix is the
/// common stream, column k is user k's private stream.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub f_rf: DMatrix<Complex64>,
    pub f_d: DMatrix<Complex64>,
    pub c: DVector<f64>,
    /// Common-stream equalizers w_{c,k}; empty when the common stream is off.
    pub w_common: Vec<Complex64>,
    pub w_private: Vec<Complex64>,
    /// Common-stream weights u_{c,k}; positive after a weight update.
    pub u_common: Vec<f64>,
    pub u_private: Vec<f64>,
    pub x: DMatrix<Complex64>,
    pub y: DMatrix<Complex64>,
    /// Z_k copies of X carrying the common-rate constraint; empty for SDMA.
    pub z: Vec<DMatrix<Complex64>>,
    /// q_k copies of c; empty for SDMA.
    pub q: Vec<DVector<f64>>,
    pub mult_y: DMatrix<Complex64>,
    pub mult_z: Vec<DMatrix<Complex64>>,
    pub mult_fd: DMatrix<Complex64>,
    pub mult_q: Vec<DVector<f64>>,
    pub penalty: f64,
    /// CCCP linearization point for the sensing constraint, refreshed after
    /// every Y update.
    pub cccp_anchor: DMatrix<Complex64>,
}

/// Per-sweep trace entry.
#[derive(Debug, Clone)]
pub struct InnerRecord {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub al_objective: f64,
    pub violation: f64,
    pub penalty: f64,
    pub wsr: f64,
    pub scnr_in: f64,
    /// AL objective sampled after each block update within the sweep.
    pub step_objectives: Vec<(&'static str, f64)>,
}

/// Per-outer-iteration trace entry.
#[derive(Debug, Clone)]
pub struct OuterRecord {
    pub outer_iter: usize,
    pub violation: f64,
    pub zeta: f64,
    pub penalty: f64,
    pub multipliers_updated: bool,
}

/// Converged (or best-effort) output of one PDD run.
#[derive(Debug, Clone)]
pub struct PddOutcome {
    pub solution: HbfSolution,
    pub trace: Vec<InnerRecord>,
    pub outer_trace: Vec<OuterRecord>,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub converged: bool,
    pub final_violation: f64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("sensing threshold {threshold} unattainable: best linearization anchor reaches {anchor_bound}")]
    InfeasibleSensing { threshold: f64, anchor_bound: f64 },
    #[error("bisection bracket failure in {step}: residual {residual} at multiplier {multiplier}")]
    BisectionBracketFailure {
        step: &'static str,
        multiplier: f64,
        residual: f64,
    },
    #[error("analog beamforming matrix is rank deficient (condition number {cond:.3e})")]
    RankDeficientAnalog { cond: f64 },
    #[error("did not reach the violation tolerance within the outer iteration budget")]
    NotConverged(Box<PddOutcome>),
    #[error("invalid solver options")]
    InvalidOptions,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Consensus violation h = max over the four coupling residual norms.
pub fn constraint_violation(state: &SolverState) -> f64 {
    let mut h = (&state.x - &state.y).norm();
    for zk in &state.z {
        h = h.max((&state.x - zk).norm());
    }
    for qk in &state.q {
        h = h.max((&state.c - qk).norm());
    }
    h.max((&state.x - &state.f_rf * &state.f_d).norm())
}

/// One PDD problem instance with the per-scene factorizations precomputed.
pub struct PddSolver<'a> {
    pub channels: &'a ChannelSet,
    pub scene: &'a RadarScene,
    pub cfg: &'a SystemConfig,
    pub opts: &'a SolverOptions,
    pub variant: SolverVariant,
    /// Eigenvectors of Omega.
    omega_u: DMatrix<Complex64>,
    /// Eigenvalues of Omega, clamped to >= 0.
    omega_d: DVector<f64>,
    /// phi with Phi = phi phi^H (rank-1 target form).
    pub(crate) phi_vec: DVector<Complex64>,
    /// Sensing constraint participates in the solve (gamma_0 > 0).
    sensing_active: bool,
}

impl<'a> PddSolver<'a> {
    pub fn new(
        channels: &'a ChannelSet,
        scene: &'a RadarScene,
        cfg: &'a SystemConfig,
        opts: &'a SolverOptions,
        variant: SolverVariant,
    ) -> Result<Self, SolverError> {
        opts.validate()?;
        cfg.validate()
            .map_err(|e| SolverError::InvalidInstance(e.to_string()))?;
        if channels.n_users() != cfg.n_users {
            return Err(SolverError::InvalidInstance(format!(
                "channel set has {} users, config expects {}",
                channels.n_users(),
                cfg.n_users
            )));
        }
        if scene.phi.nrows() != cfg.n_tx {
            return Err(SolverError::InvalidInstance(format!(
                "radar scene dimension {} != N_t {}",
                scene.phi.nrows(),
                cfg.n_tx
            )));
        }
        let eig = scene.omega.clone().symmetric_eigen();
        let omega_d = eig.eigenvalues.map(|l| l.max(0.0));
        let a_t = steering_vector(scene.target_angle, cfg.n_tx)
            .map_err(|e| SolverError::InvalidInstance(e.to_string()))?;
        let phi_scale = scene.target_gain.norm() * ((cfg.n_rx * cfg.n_tx) as f64).sqrt();
        let phi_vec = a_t * Complex64::new(phi_scale, 0.0);
        let sensing_active = cfg.scnr_threshold > 0.0;
        Ok(Self {
            channels,
            scene,
            cfg,
            opts,
            variant,
            omega_u: eig.eigenvectors,
            omega_d,
            phi_vec,
            sensing_active,
        })
    }

    fn n_rf(&self) -> usize {
        match self.variant.analog {
            AnalogArch::PhaseShifter => self.cfg.n_rf,
            AnalogArch::Identity => self.cfg.n_tx,
        }
    }

    fn n_cols(&self) -> usize {
        self.cfg.n_users + 1
    }

    /// Count of consensus quadratics that couple to X in g_rho.
    fn consensus_terms(&self) -> usize {
        if self.variant.common_stream {
            self.cfg.n_users + 2
        } else {
            2
        }
    }

    /// CCCP anchor: every active column along the target steering direction,
    /// scaled to the full power budget.
    fn initial_anchor(&self) -> DMatrix<Complex64> {
        let n_t = self.cfg.n_tx;
        let cols = self.n_cols();
        let a_t = steering_vector(self.scene.target_angle, n_t).expect("validated angle");
        let active = if self.variant.common_stream { cols } else { cols - 1 };
        let amp = (self.cfg.power_budget / active as f64).sqrt();
        let mut y = DMatrix::zeros(n_t, cols);
        for c in 0..cols {
            if c == 0 && !self.variant.common_stream {
                continue;
            }
            y.set_column(c, &(&a_t * Complex64::new(amp, 0.0)));
        }
        y
    }

    /// Original (un-linearized) sensing margin f_1(Y) - f_2(Y); feasible <= 0.
    pub fn sensing_margin(&self, y: &DMatrix<Complex64>) -> f64 {
        let f1 = self.cfg.scnr_threshold
            * (metrics::quadratic_trace(&self.scene.omega, y)
                + self.scene.n_rx as f64 * self.cfg.echo_noise_power);
        let f2 = metrics::quadratic_trace(&self.scene.phi, y);
        f1 - f2
    }

    /// Builds the initial state: random unit-modulus analog phases, a matched
    /// digital filter at full power, consensus copies of X, c = q_k = 0 and
    /// zero multipliers. Fails with InfeasibleSensing when even the
    /// target-aligned anchor cannot meet the threshold.
    pub fn init_state(&self, seed: u64) -> Result<SolverState, SolverError> {
        let n_t = self.cfg.n_tx;
        let n_rf = self.n_rf();
        let cols = self.n_cols();
        let k_users = self.cfg.n_users;
        let mut rng = SeededRng::from_seed(seed, STREAM_SOLVER_INIT);

        let f_rf = match self.variant.analog {
            AnalogArch::PhaseShifter => DMatrix::from_fn(n_t, n_rf, |_, _| rng.unit_phase()),
            AnalogArch::Identity => DMatrix::identity(n_t, n_t),
        };

        // matched-filter digital init: columns [h-centroid, h_1 .. h_K]
        let mut targets = DMatrix::zeros(n_t, cols);
        if self.variant.common_stream {
            let mut centroid = DVector::zeros(n_t);
            for k in 0..k_users {
                centroid += self.channels.channel(k);
            }
            centroid /= Complex64::new(k_users as f64, 0.0);
            targets.set_column(0, &centroid);
        }
        for k in 0..k_users {
            targets.set_column(k + 1, self.channels.channel(k));
        }
        let mut f_d = f_rf.adjoint() * targets;
        for c in 0..cols {
            let norm = f_d.column(c).norm();
            if norm > 0.0 {
                let col = f_d.column(c) / Complex64::new(norm, 0.0);
                f_d.set_column(c, &col);
            }
        }
        let eff_norm = (&f_rf * &f_d).norm();
        if eff_norm > 0.0 {
            f_d *= Complex64::new((self.cfg.power_budget.sqrt()) / eff_norm, 0.0);
        }
        let x = &f_rf * &f_d;

        let anchor = self.initial_anchor();
        if self.sensing_active {
            let margin = self.sensing_margin(&anchor);
            if margin > 0.0 {
                let bound = metrics::scnr_input(&anchor, self.scene, self.cfg);
                return Err(SolverError::InfeasibleSensing {
                    threshold: self.cfg.scnr_threshold,
                    anchor_bound: bound,
                });
            }
        }
        let y = if self.sensing_active { anchor.clone() } else { x.clone() };

        let (z, q, mult_z, mult_q) = if self.variant.common_stream {
            (
                vec![x.clone(); k_users],
                vec![DVector::zeros(k_users); k_users],
                vec![DMatrix::zeros(n_t, cols); k_users],
                vec![DVector::zeros(k_users); k_users],
            )
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };

        Ok(SolverState {
            f_rf,
            f_d,
            c: DVector::zeros(k_users),
            w_common: if self.variant.common_stream {
                vec![Complex64::new(0.0, 0.0); k_users]
            } else {
                Vec::new()
            },
            w_private: vec![Complex64::new(0.0, 0.0); k_users],
            u_common: if self.variant.common_stream {
                vec![1.0 / std::f64::consts::LN_2; k_users]
            } else {
                Vec::new()
            },
            u_private: vec![1.0 / std::f64::consts::LN_2; k_users],
            x,
            y,
            z,
            q,
            mult_y: DMatrix::zeros(n_t, cols),
            mult_z,
            mult_fd: DMatrix::zeros(n_t, cols),
            mult_q,
            penalty: self.opts.penalty_init,
            cccp_anchor: anchor,
        })
    }

    /// Augmented-Lagrangian objective at the current state.
    pub fn al_objective(&self, state: &SolverState) -> f64 {
        let mut acc = KahanSum::new();
        for k in 0..self.cfg.n_users {
            let alpha = self.cfg.user_weights[k];
            acc.add(alpha * self.eta_private(state, k));
        }
        acc.add(-ksum(
            self.cfg
                .user_weights
                .iter()
                .zip(state.c.iter())
                .map(|(a, c)| a * c),
        ));
        acc.add(self.penalty_term(state));
        acc.value()
    }

    /// eta_k(X; u_k, w_k), the augmented weighted MSE of user k's private
    /// stream evaluated on X.
    pub fn eta_private(&self, state: &SolverState, k: usize) -> f64 {
        let h = self.channels.channel(k);
        let gains = metrics::effective_gains(h, &state.x);
        let t_k = metrics::t_private(&gains, self.cfg.user_noise_power);
        let u = state.u_private[k];
        let w = state.w_private[k];
        let cross = (w * gains[k + 1]).re;
        u * (w.norm_sqr() * t_k - 2.0 * cross + 1.0) - u.log2()
    }

    /// eta_{c,k}(Z; u_{c,k}, w_{c,k}) for an arbitrary effective matrix.
    pub fn eta_common_of(&self, z: &DMatrix<Complex64>, state: &SolverState, k: usize) -> f64 {
        let h = self.channels.channel(k);
        let gains = metrics::effective_gains(h, z);
        let t_c = metrics::t_common(&gains, self.cfg.user_noise_power);
        let u = state.u_common[k];
        let w = state.w_common[k];
        let cross = (w * gains[0]).re;
        u * (w.norm_sqr() * t_c - 2.0 * cross + 1.0) - u.log2()
    }

    /// g_rho: the quadratic penalty groups, scaled by 1/(2 rho).
    fn penalty_term(&self, state: &SolverState) -> f64 {
        let rho = state.penalty;
        let mut acc = KahanSum::new();
        acc.add((&state.x - &state.y + &state.mult_y * Complex64::new(rho, 0.0)).norm_squared());
        for k in 0..state.z.len() {
            acc.add(
                (&state.x - &state.z[k] + &state.mult_z[k] * Complex64::new(rho, 0.0))
                    .norm_squared(),
            );
        }
        acc.add(
            (&state.x - &state.f_rf * &state.f_d + &state.mult_fd * Complex64::new(rho, 0.0))
                .norm_squared(),
        );
        for k in 0..state.q.len() {
            acc.add((&state.c - &state.q[k] + &state.mult_q[k] * rho).norm_squared());
        }
        acc.value() / (2.0 * rho)
    }

    /// Runs block updates (Steps 1-5) until the relative objective change
    /// drops below inner_tol or max_inner sweeps elapse. Returns the sweep
    /// count. Trace entries are appended per sweep.
    pub fn inner_loop(
        &self,
        state: &mut SolverState,
        outer_iter: usize,
        trace: &mut Vec<InnerRecord>,
    ) -> Result<usize, SolverError> {
        let mut prev = self.al_objective(state);
        let mut sweeps = 0;
        for t in 0..self.opts.max_inner {
            let mut step_objectives = Vec::with_capacity(8);
            let mut sample = |label: &'static str, solver: &Self, st: &SolverState| {
                let v = solver.al_objective(st);
                step_objectives.push((label, v));
            };
            self.update_equalizers(state);
            sample("equalizers", self, state);
            self.update_weights(state);
            sample("weights", self, state);
            self.update_y(state)?;
            sample("y", self, state);
            if self.variant.common_stream {
                for k in 0..self.cfg.n_users {
                    self.update_z_and_q(state, k)?;
                }
                sample("z_q", self, state);
            }
            self.update_fd(state)?;
            sample("f_d", self, state);
            if self.variant.common_stream {
                self.update_c(state);
                sample("c", self, state);
            }
            if self.variant.analog == AnalogArch::PhaseShifter {
                self.update_frf(state);
                sample("f_rf", self, state);
            }
            self.update_x(state);
            sample("x", self, state);

            let objective = step_objectives.last().expect("non-empty").1;
            sweeps = t + 1;
            let eff = &state.f_rf * &state.f_d;
            let wsr = self.wsr_of_effective(&eff, state);
            let scnr_in = metrics::scnr_input(&eff, self.scene, self.cfg);
            trace.push(InnerRecord {
                outer_iter,
                inner_iter: t,
                al_objective: objective,
                violation: constraint_violation(state),
                penalty: state.penalty,
                wsr,
                scnr_in,
                step_objectives,
            });
            if (objective - prev).abs() <= self.opts.inner_tol * prev.abs().max(1.0) {
                break;
            }
            prev = objective;
        }
        Ok(sweeps)
    }

    fn wsr_of_effective(&self, eff: &DMatrix<Complex64>, state: &SolverState) -> f64 {
        match metrics::sinr_of_effective(eff, self.channels, self.cfg) {
            Ok((_, gp)) => ksum(
                self.cfg
                    .user_weights
                    .iter()
                    .zip(state.c.iter().zip(gp.iter()))
                    .map(|(a, (c, g))| a * (c + (1.0 + g).log2())),
            ),
            Err(_) => f64::NAN,
        }
    }

    /// Full PDD run from a seeded initialization.
    pub fn solve(&self, seed: u64) -> Result<PddOutcome, SolverError> {
        let mut state = self.init_state(seed)?;
        let mut trace = Vec::new();
        let mut outer_trace = Vec::new();
        let tol = self.opts.outer_tol * self.cfg.power_budget.sqrt();

        let mut h_prev = constraint_violation(&state);
        let mut zeta = self.opts.violation_shrink * h_prev;
        let mut inner_total = 0;
        let mut converged = false;
        let mut outer_iters = 0;
        let mut best: Option<(f64, SolverState)> = None;

        for m in 0..self.opts.max_outer {
            inner_total += self.inner_loop(&mut state, m, &mut trace)?;
            outer_iters = m + 1;
            let h = constraint_violation(&state);
            if best.as_ref().map_or(true, |(bh, _)| h < *bh) {
                best = Some((h, state.clone()));
            }
            if h <= tol {
                converged = true;
                outer_trace.push(OuterRecord {
                    outer_iter: m,
                    violation: h,
                    zeta,
                    penalty: state.penalty,
                    multipliers_updated: false,
                });
                break;
            }
            let multipliers_updated = h <= zeta;
            if multipliers_updated {
                let rho = state.penalty;
                let scale = Complex64::new(1.0 / rho, 0.0);
                state.mult_y += (&state.x - &state.y) * scale;
                for k in 0..state.z.len() {
                    let d = (&state.x - &state.z[k]) * scale;
                    state.mult_z[k] += d;
                }
                state.mult_fd += (&state.x - &state.f_rf * &state.f_d) * scale;
                for k in 0..state.q.len() {
                    let d = (&state.c - &state.q[k]) / rho;
                    state.mult_q[k] += d;
                }
            } else {
                state.penalty *= self.opts.penalty_shrink;
            }
            outer_trace.push(OuterRecord {
                outer_iter: m,
                violation: h,
                zeta,
                penalty: state.penalty,
                multipliers_updated,
            });
            zeta = self.opts.violation_shrink * h_prev;
            h_prev = h;
        }

        let (final_violation, final_state) = match (converged, best) {
            (true, _) => (constraint_violation(&state), state),
            (false, Some((bh, bs))) => (bh, bs),
            (false, None) => (constraint_violation(&state), state),
        };
        let solution = self.extract_solution(&final_state);
        let outcome = PddOutcome {
            solution,
            trace,
            outer_trace,
            outer_iters,
            inner_iters_total: inner_total,
            converged,
            final_violation,
        };
        if converged {
            Ok(outcome)
        } else {
            Err(SolverError::NotConverged(Box::new(outcome)))
        }
    }

    /// Final projection: scale F_D into the exact power budget, then clamp the
    /// common-rate vector into the decodable region of the projected precoder.
    fn extract_solution(&self, state: &SolverState) -> HbfSolution {
        let mut f_d = state.f_d.clone();
        let eff_norm_sq = (&state.f_rf * &f_d).norm_squared();
        if eff_norm_sq > self.cfg.power_budget {
            f_d *= Complex64::new((self.cfg.power_budget / eff_norm_sq).sqrt(), 0.0);
        }
        let eff = &state.f_rf * &f_d;
        let mut c = state.c.map(|v| v.max(0.0));
        if self.variant.common_stream {
            let (gc, _) = metrics::sinr_of_effective(&eff, self.channels, self.cfg)
                .expect("dimensions fixed by construction");
            let cap = gc
                .iter()
                .map(|g| (1.0 + g).log2())
                .fold(f64::INFINITY, f64::min);
            let total = ksum(c.iter().cloned());
            if total > cap {
                let scale = if total > 0.0 { (cap / total).max(0.0) } else { 0.0 };
                c *= scale;
            }
        } else {
            c.fill(0.0);
        }
        HbfSolution {
            analog: state.f_rf.clone(),
            digital: f_d,
            common_rates: c,
            analog_arch: self.variant.analog,
        }
    }
}

/// Convenience entry point: build a solver and run it for one seed.
pub fn solve(
    channels: &ChannelSet,
    scene: &RadarScene,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    variant: SolverVariant,
    seed: u64,
) -> Result<PddOutcome, SolverError> {
    PddSolver::new(channels, scene, cfg, opts, variant)?.solve(seed)
}

#[cfg(test)]
mod tests;
