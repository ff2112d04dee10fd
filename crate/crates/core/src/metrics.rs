//! Communication and sensing metrics for a candidate beamforming solution:
//! per-user SINRs and rates, weighted sum rate, MMSE quantities, MVDR receive
//! filtering and the output/input SCNR pair.
//!
//! All evaluators are stateless. Effective precoders are N_t x (K+1) matrices
//! whose column 0 carries the common stream and column k the k-th private
//! stream, so the same code path serves F_RF F_D and each auxiliary copy of it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{cdotc_parts, ksum, KahanSum};
use crate::scene::{steering_vector, ChannelSet, RadarScene, SystemConfig};

/// Relative tolerance on the transmit power constraint.
pub const POWER_REL_TOL: f64 = 1e-8;
/// Absolute tolerance (bit/s/Hz) on the common-rate sum constraint.
pub const COMMON_RATE_ABS_TOL: f64 = 1e-6;
/// Relative tolerance on the sensing SCNR constraint.
pub const SCNR_REL_TOL: f64 = 1e-6;
/// Tolerance on |F_RF(i,j)| - 1 for phase-shifter analog stages.
pub const UNIT_MODULUS_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// Analog stage structure; the fully-digital reference carries an identity
/// matrix that is exempt from the unit-modulus constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalogArch {
    PhaseShifter,
    Identity,
}

/// Converged beamformers and common-rate allocation.
#[derive(Debug, Clone)]
pub struct HbfSolution {
    /// Analog beamforming matrix F_RF, N_t x N_RF.
    pub analog: DMatrix<Complex64>,
    /// Digital beamforming matrix F_D, N_RF x (K+1); column 0 is the common
    /// stream precoder f_c.
    pub digital: DMatrix<Complex64>,
    /// Common-rate split c = [C_1..C_K], bit/s/Hz, nonnegative.
    pub common_rates: DVector<f64>,
    pub analog_arch: AnalogArch,
}

impl HbfSolution {
    /// Effective transmit precoder F_RF F_D, N_t x (K+1).
    pub fn effective(&self) -> DMatrix<Complex64> {
        &self.analog * &self.digital
    }

    pub fn n_users(&self) -> usize {
        self.common_rates.len()
    }

    /// Checks the structural invariants: unit-modulus analog entries (phase
    /// shifter architecture only), transmit power within budget, c >= 0.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<(), MetricsError> {
        if self.analog.nrows() != cfg.n_tx || self.digital.ncols() != cfg.n_users + 1 {
            return Err(MetricsError::DimensionMismatch(format!(
                "analog {}x{}, digital {}x{} for N_t={} K={}",
                self.analog.nrows(),
                self.analog.ncols(),
                self.digital.nrows(),
                self.digital.ncols(),
                cfg.n_tx,
                cfg.n_users
            )));
        }
        if self.analog_arch == AnalogArch::PhaseShifter {
            for v in self.analog.iter() {
                if (v.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
                    return Err(MetricsError::DimensionMismatch(format!(
                        "analog entry modulus {} violates unit-modulus",
                        v.norm()
                    )));
                }
            }
        }
        let p = self.effective().norm_squared();
        if p > cfg.power_budget * (1.0 + POWER_REL_TOL) {
            return Err(MetricsError::DimensionMismatch(format!(
                "transmit power {} exceeds budget {}",
                p, cfg.power_budget
            )));
        }
        if self.common_rates.iter().any(|c| *c < 0.0) {
            return Err(MetricsError::DimensionMismatch("negative common rate".into()));
        }
        Ok(())
    }
}

/// Every communication and sensing quantity evaluated for one solution.
#[derive(Debug, Clone)]
pub struct MetricReport {
    /// gamma_{c,k}, linear.
    pub sinr_common: Vec<f64>,
    /// gamma_k, linear.
    pub sinr_private: Vec<f64>,
    /// R_{c,k} = log2(1 + gamma_{c,k}), bit/s/Hz.
    pub rate_common: Vec<f64>,
    /// R_k, bit/s/Hz.
    pub rate_private: Vec<f64>,
    /// R_c = min_k R_{c,k}.
    pub common_rate_cap: f64,
    /// Weighted sum rate sum_k alpha_k (C_k + R_k).
    pub wsr: f64,
    /// Input SCNR lower bound, linear.
    pub scnr_in: f64,
    /// Average output SCNR after MVDR filtering, linear.
    pub scnr_out: f64,
    /// All constraints satisfied within tolerances.
    pub feasible: bool,
}

/// Link gains h_k^H f_i for every effective-precoder column, compensated.
pub fn effective_gains(h: &DVector<Complex64>, eff: &DMatrix<Complex64>) -> Vec<Complex64> {
    (0..eff.ncols())
        .map(|i| cdotc_parts(h.iter(), eff.column(i).iter()))
        .collect()
}

/// T_{c,k}: total received power including the common stream plus noise.
pub fn t_common(gains: &[Complex64], noise: f64) -> f64 {
    let mut acc = KahanSum::new();
    for g in gains {
        acc.add(g.norm_sqr());
    }
    acc.add(noise);
    acc.value()
}

/// T_k: received power over the private streams only, plus noise.
pub fn t_private(gains: &[Complex64], noise: f64) -> f64 {
    let mut acc = KahanSum::new();
    for g in &gains[1..] {
        acc.add(g.norm_sqr());
    }
    acc.add(noise);
    acc.value()
}

/// Per-user SINRs (gamma_{c,k}, gamma_k) for decoding the common and private
/// streams.
pub fn sinr(
    sol: &HbfSolution,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let eff = sol.effective();
    sinr_of_effective(&eff, channels, cfg)
}

/// SINRs evaluated directly on an effective N_t x (K+1) precoder.
pub fn sinr_of_effective(
    eff: &DMatrix<Complex64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    let k_users = channels.n_users();
    if eff.ncols() != k_users + 1 || eff.nrows() != cfg.n_tx {
        return Err(MetricsError::DimensionMismatch(format!(
            "effective precoder {}x{} for N_t={} K={}",
            eff.nrows(),
            eff.ncols(),
            cfg.n_tx,
            k_users
        )));
    }
    let mut common = Vec::with_capacity(k_users);
    let mut private = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let gains = effective_gains(channels.channel(k), eff);
        let noise = cfg.user_noise_power;
        let sig_c = gains[0].norm_sqr();
        let denom_c = t_private(&gains, noise);
        common.push(sig_c / denom_c);
        let sig_k = gains[k + 1].norm_sqr();
        let mut interf = KahanSum::new();
        for (i, g) in gains.iter().enumerate().skip(1) {
            if i != k + 1 {
                interf.add(g.norm_sqr());
            }
        }
        interf.add(noise);
        private.push(sig_k / interf.value());
    }
    Ok((common, private))
}

/// MMSE estimation errors (e_{c,k}, e_k) per user on an effective precoder;
/// both lie in (0, 1].
pub fn mmse_errors(
    eff: &DMatrix<Complex64>,
    channels: &ChannelSet,
    cfg: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>), MetricsError> {
    if eff.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(MetricsError::NonFinite("effective precoder"));
    }
    let k_users = channels.n_users();
    let mut e_common = Vec::with_capacity(k_users);
    let mut e_private = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let h = channels.channel(k);
        if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(MetricsError::NonFinite("channel vector"));
        }
        let gains = effective_gains(h, eff);
        let noise = cfg.user_noise_power;
        let tc = t_common(&gains, noise);
        let tk = t_private(&gains, noise);
        e_common.push((tc - gains[0].norm_sqr()) / tc);
        e_private.push((tk - gains[k + 1].norm_sqr()) / tk);
    }
    Ok((e_common, e_private))
}

/// The rate-WMMSE constant g = 1/ln2 + log2(ln 2).
pub fn awmse_constant() -> f64 {
    let ln2 = std::f64::consts::LN_2;
    1.0 / ln2 + ln2.log2()
}

/// Minimum augmented weighted MSE achievable at a given rate: g - rate.
pub fn awmse_optimal_value(rate: f64) -> f64 {
    awmse_constant() - rate
}

fn clutter_covariance(
    eff: &DMatrix<Complex64>,
    scene: &RadarScene,
    cfg: &SystemConfig,
) -> DMatrix<Complex64> {
    let n_r = scene.n_rx;
    let mut r_c = DMatrix::zeros(n_r, n_r);
    for (angle, gain) in scene.clutter_angles.iter().zip(&scene.clutter_gains) {
        let g = response_times(eff, *angle, cfg);
        // |xi_q|^2 G G^H with G = A(theta_q) F
        r_c += &g * g.adjoint() * Complex64::new(gain.norm_sqr(), 0.0);
    }
    r_c
}

/// A(theta) F computed from the rank-1 structure of the response matrix.
fn response_times(eff: &DMatrix<Complex64>, angle: f64, cfg: &SystemConfig) -> DMatrix<Complex64> {
    let a_t = steering_vector(angle, cfg.n_tx).expect("validated angle");
    let a_r = steering_vector(angle, cfg.n_rx).expect("validated angle");
    let scale = ((cfg.n_rx * cfg.n_tx) as f64).sqrt();
    let mut proj = DMatrix::zeros(cfg.n_rx, eff.ncols());
    for c in 0..eff.ncols() {
        let atf = cdotc_parts(a_t.iter(), eff.column(c).iter());
        for r in 0..cfg.n_rx {
            proj[(r, c)] = scale * a_r[r] * atf;
        }
    }
    proj
}

/// MVDR receive filter and output SCNR for an instantaneous transmit vector.
pub fn mvdr_receive(
    x: &DVector<Complex64>,
    scene: &RadarScene,
    cfg: &SystemConfig,
) -> (DVector<Complex64>, f64) {
    let eff = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let m = clutter_covariance(&eff, scene, cfg)
        + DMatrix::identity(scene.n_rx, scene.n_rx) * Complex64::new(cfg.echo_noise_power, 0.0);
    let a0x = response_times(&eff, scene.target_angle, cfg).column(0).into_owned();
    let chol = m.cholesky().expect("echo noise keeps the covariance positive definite");
    let m_inv_a0x = chol.solve(&a0x);
    let quad = cdotc_parts(a0x.iter(), m_inv_a0x.iter()).re;
    let v_star = &m_inv_a0x / Complex64::new(quad, 0.0);
    let scnr = scene.target_gain.norm_sqr() * quad;
    (v_star, scnr)
}

/// Output SCNR of an arbitrary receive filter v for transmit vector x.
pub fn scnr_out_given_v(
    x: &DVector<Complex64>,
    v: &DVector<Complex64>,
    scene: &RadarScene,
    cfg: &SystemConfig,
) -> f64 {
    let eff = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
    let m = clutter_covariance(&eff, scene, cfg)
        + DMatrix::identity(scene.n_rx, scene.n_rx) * Complex64::new(cfg.echo_noise_power, 0.0);
    let a0x = response_times(&eff, scene.target_angle, cfg).column(0).into_owned();
    let num = scene.target_gain.norm_sqr() * cdotc_parts(v.iter(), a0x.iter()).norm_sqr();
    let den = cdotc_parts(v.iter(), (&m * v).iter()).re;
    num / den
}

/// Average output SCNR tr(R_0 (R_c + sigma_z^2 I)^{-1}) for an effective
/// precoder matrix.
pub fn mvdr_scnr_out_avg(eff: &DMatrix<Complex64>, scene: &RadarScene, cfg: &SystemConfig) -> f64 {
    let m = clutter_covariance(eff, scene, cfg)
        + DMatrix::identity(scene.n_rx, scene.n_rx) * Complex64::new(cfg.echo_noise_power, 0.0);
    let g0 = response_times(eff, scene.target_angle, cfg);
    let chol = m.cholesky().expect("echo noise keeps the covariance positive definite");
    let solved = chol.solve(&g0);
    let mut acc = KahanSum::new();
    for c in 0..g0.ncols() {
        acc.add(cdotc_parts(g0.column(c).iter(), solved.column(c).iter()).re);
    }
    scene.target_gain.norm_sqr() * acc.value()
}

/// Input SCNR lower bound tr(F^H Phi F) / (tr(F^H Omega F) + N_r sigma_z^2).
pub fn scnr_input(eff: &DMatrix<Complex64>, scene: &RadarScene, cfg: &SystemConfig) -> f64 {
    let num = quadratic_trace(&scene.phi, eff);
    let den = quadratic_trace(&scene.omega, eff) + scene.n_rx as f64 * cfg.echo_noise_power;
    num / den
}

/// tr(F^H M F) for Hermitian M, compensated column-by-column.
pub fn quadratic_trace(m: &DMatrix<Complex64>, f: &DMatrix<Complex64>) -> f64 {
    let mf = m * f;
    ksum((0..f.ncols()).map(|c| cdotc_parts(f.column(c).iter(), mf.column(c).iter()).re))
}

impl MetricReport {
    /// Evaluates every metric and the P1 feasibility flag for a solution.
    pub fn evaluate(
        sol: &HbfSolution,
        channels: &ChannelSet,
        scene: &RadarScene,
        cfg: &SystemConfig,
    ) -> Result<Self, MetricsError> {
        let eff = sol.effective();
        let (sinr_common, sinr_private) = sinr_of_effective(&eff, channels, cfg)?;
        let rate_common: Vec<f64> = sinr_common.iter().map(|g| (1.0 + g).log2()).collect();
        let rate_private: Vec<f64> = sinr_private.iter().map(|g| (1.0 + g).log2()).collect();
        let common_rate_cap = rate_common.iter().cloned().fold(f64::INFINITY, f64::min);
        let wsr = ksum(
            cfg.user_weights
                .iter()
                .zip(sol.common_rates.iter().zip(&rate_private))
                .map(|(alpha, (c, r))| alpha * (c + r)),
        );
        let scnr_in = scnr_input(&eff, scene, cfg);
        let scnr_out = mvdr_scnr_out_avg(&eff, scene, cfg);

        let power = eff.norm_squared();
        let common_sum = ksum(sol.common_rates.iter().cloned());
        let mut feasible = power <= cfg.power_budget * (1.0 + POWER_REL_TOL)
            && common_sum <= common_rate_cap + COMMON_RATE_ABS_TOL
            && sol.common_rates.iter().all(|c| *c >= 0.0)
            && scnr_in >= cfg.scnr_threshold * (1.0 - SCNR_REL_TOL);
        if sol.analog_arch == AnalogArch::PhaseShifter {
            feasible &= sol
                .analog
                .iter()
                .all(|v| (v.norm() - 1.0).abs() <= UNIT_MODULUS_TOL);
        }
        Ok(Self {
            sinr_common,
            sinr_private,
            rate_common,
            rate_private,
            common_rate_cap,
            wsr,
            scnr_in,
            scnr_out,
            feasible,
        })
    }
}
