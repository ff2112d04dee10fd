//! Deterministic, seeded problem instances: user channels, steering vectors,
//! and radar target/clutter response matrices.
//!
//! Channels follow the Saleh-Valenzuela geometric model over a half-wavelength
//! ULA. The radar side assembles the target/clutter quadratic-form matrices
//! used by the sensing constraint. Everything is a pure function of
//! (config, profile, seed).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::numerics::ksum;
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("angle {0} rad outside [-pi/2, pi/2]")]
    AngleOutOfDomain(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Scalar system parameters of the joint design problem.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// Transmit antenna count N_t.
    pub n_tx: usize,
    /// Receive antenna count N_r.
    pub n_rx: usize,
    /// RF chain count N_RF; must satisfy K+1 <= N_RF <= N_t.
    pub n_rf: usize,
    /// Downlink user count K.
    pub n_users: usize,
    /// Carrier frequency in Hz.
    pub carrier_freq_hz: f64,
    /// Antenna spacing d/lambda (half-wavelength ULA by default).
    pub antenna_spacing_wavelengths: f64,
    /// Transmit power budget P_T in linear mW.
    pub power_budget: f64,
    /// Per-user noise power sigma_k^2 in linear mW (shared value).
    pub user_noise_power: f64,
    /// Echo noise power sigma_z^2 in linear mW.
    pub echo_noise_power: f64,
    /// User priority weights alpha_k, length K, all positive.
    pub user_weights: Vec<f64>,
    /// Sensing SCNR threshold gamma_0 as a linear ratio.
    pub scnr_threshold: f64,
}

impl SystemConfig {
    /// Simulation defaults: 32x32 array, 8 RF chains, 4 users, 28 GHz,
    /// P_T = 30 dBm, sigma^2 = -100 dBm, gamma_0 = 10 dB, unit weights.
    pub fn defaults() -> Self {
        Self {
            n_tx: 32,
            n_rx: 32,
            n_rf: 8,
            n_users: 4,
            carrier_freq_hz: 28e9,
            antenna_spacing_wavelengths: 0.5,
            power_budget: 1000.0,
            user_noise_power: 1e-10,
            echo_noise_power: 1e-10,
            user_weights: vec![1.0; 4],
            scnr_threshold: 10.0,
        }
    }

    /// Small-instance constructor used by tests.
    pub fn desk(n_tx: usize, n_rx: usize, n_rf: usize, n_users: usize) -> Self {
        Self {
            n_tx,
            n_rx,
            n_rf,
            n_users,
            user_weights: vec![1.0; n_users],
            ..Self::defaults()
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let err = |m: String| Err(SceneError::InvalidConfig(m));
        if self.n_tx < 1 || self.n_rx < 1 {
            return err(format!("antenna counts must be >= 1 (n_tx={}, n_rx={})", self.n_tx, self.n_rx));
        }
        if self.n_users < 1 {
            return err("n_users must be >= 1".into());
        }
        if self.n_rf < self.n_users + 1 || self.n_rf > self.n_tx {
            return err(format!(
                "K+1 <= N_RF <= N_t violated (K={}, N_RF={}, N_t={})",
                self.n_users, self.n_rf, self.n_tx
            ));
        }
        if !(self.power_budget > 0.0) {
            return err(format!("power_budget must be > 0, got {}", self.power_budget));
        }
        if !(self.user_noise_power > 0.0) || !(self.echo_noise_power > 0.0) {
            return err("noise powers must be > 0".into());
        }
        if self.user_weights.len() != self.n_users {
            return err(format!(
                "user_weights length {} != n_users {}",
                self.user_weights.len(),
                self.n_users
            ));
        }
        if self.user_weights.iter().any(|w| !(*w > 0.0)) {
            return err("user_weights must all be > 0".into());
        }
        if !(self.scnr_threshold >= 0.0) {
            return err(format!("scnr_threshold must be >= 0, got {}", self.scnr_threshold));
        }
        if !(self.carrier_freq_hz > 0.0) || !(self.antenna_spacing_wavelengths > 0.0) {
            return err("carrier frequency and antenna spacing must be > 0".into());
        }
        Ok(())
    }
}

/// Spatial correlation regime of the drawn channel set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationProfile {
    /// Every path angle i.i.d. uniform over [-pi/2, pi/2].
    LowCorrelation,
    /// All users' LoS angles inside one narrow random sector.
    HighCorrelation,
}

impl CorrelationProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationProfile::LowCorrelation => "low",
            CorrelationProfile::HighCorrelation => "high",
        }
    }
}

/// Channel model knobs that the problem statement leaves open.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    /// Paths per user L_k: one LoS plus (L_k - 1) NLoS.
    pub paths_per_user: usize,
    /// LoS gain variance before the global scale.
    pub los_variance: f64,
    /// NLoS gain variance before the global scale (-10 dB vs LoS).
    pub nlos_variance: f64,
    /// Global amplitude scale applied to every path gain. The default is
    /// 1e-4 amplitude, i.e. -80 dB pathloss in power.
    pub gain_scale: f64,
    /// Sector width for HighCorrelation LoS angles, radians.
    pub sector_width: f64,
    /// NLoS angular spread around each user's LoS in HighCorrelation, radians.
    pub nlos_spread: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            paths_per_user: 4,
            los_variance: 1.0,
            nlos_variance: 0.1,
            gain_scale: 1e-4,
            sector_width: 10f64.to_radians(),
            nlos_spread: 5f64.to_radians(),
        }
    }
}

/// One propagation path: complex gain (scale included) and departure angle.
#[derive(Debug, Clone, Copy)]
pub struct PathComponent {
    pub gain: Complex64,
    pub angle: f64,
}

/// One user's path list and reconstructed channel vector.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub paths: Vec<PathComponent>,
    pub vector: DVector<Complex64>,
}

/// The K user channels plus the path-level metadata that generated them.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub users: Vec<UserChannel>,
    pub profile: CorrelationProfile,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn channel(&self, k: usize) -> &DVector<Complex64> {
        &self.users[k].vector
    }
}

/// Radar target/clutter geometry and the derived quadratic-form matrices.
#[derive(Debug, Clone)]
pub struct RadarScene {
    pub target_angle: f64,
    pub target_gain: Complex64,
    pub clutter_angles: Vec<f64>,
    pub clutter_gains: Vec<Complex64>,
    /// Phi = |xi_0|^2 A^H(theta_0) A(theta_0), rank one, Hermitian PSD.
    pub phi: DMatrix<Complex64>,
    /// Omega = sum_q |xi_q|^2 A^H(theta_q) A(theta_q), Hermitian PSD.
    pub omega: DMatrix<Complex64>,
    pub n_rx: usize,
}

/// ULA steering vector: element m is exp(j 2 pi (d/lambda) m sin(theta)) / sqrt(n).
pub fn steering_vector_spaced(theta: f64, n: usize, spacing: f64) -> Result<DVector<Complex64>, SceneError> {
    if !((-PI / 2.0..=PI / 2.0).contains(&theta)) {
        return Err(SceneError::AngleOutOfDomain(theta));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI * spacing * theta.sin();
    Ok(DVector::from_iterator(
        n,
        (0..n).map(|m| {
            let phase = step * m as f64;
            Complex64::new(norm * phase.cos(), norm * phase.sin())
        }),
    ))
}

/// Half-wavelength steering vector (d/lambda = 0.5).
pub fn steering_vector(theta: f64, n: usize) -> Result<DVector<Complex64>, SceneError> {
    steering_vector_spaced(theta, n, 0.5)
}

/// Target/clutter response A(theta) = sqrt(N_r N_t) a_r(theta) a_t^H(theta).
pub fn radar_response(theta: f64, n_tx: usize, n_rx: usize) -> Result<DMatrix<Complex64>, SceneError> {
    let a_t = steering_vector(theta, n_tx)?;
    let a_r = steering_vector(theta, n_rx)?;
    let scale = ((n_rx * n_tx) as f64).sqrt();
    let mut a = DMatrix::zeros(n_rx, n_tx);
    for r in 0..n_rx {
        for t in 0..n_tx {
            a[(r, t)] = scale * a_r[r] * a_t[t].conj();
        }
    }
    Ok(a)
}

fn reconstruct_channel(n_tx: usize, spacing: f64, paths: &[PathComponent]) -> DVector<Complex64> {
    let scale = (n_tx as f64 / paths.len() as f64).sqrt();
    let mut h = DVector::zeros(n_tx);
    for p in paths {
        let a = steering_vector_spaced(p.angle, n_tx, spacing).expect("validated angle");
        h += a * (p.gain * scale);
    }
    h
}

fn clamp_angle(theta: f64) -> f64 {
    theta.clamp(-PI / 2.0, PI / 2.0)
}

/// Draws one user's paths and channel vector.
///
/// Draw order per user is fixed (LoS angle, LoS gain, then each NLoS angle
/// and gain) so that seeds reproduce bit-exactly. `sector_center` carries the
/// set-level sector for HighCorrelation; `None` makes a standalone call draw
/// its own.
fn user_channel_in_sector(
    cfg: &SystemConfig,
    model: &ChannelModel,
    profile: CorrelationProfile,
    rng: &mut SeededRng,
    sector_center: Option<f64>,
) -> UserChannel {
    let half = PI / 2.0;
    let mut paths = Vec::with_capacity(model.paths_per_user);
    let los_angle = match profile {
        CorrelationProfile::LowCorrelation => rng.uniform_in(-half, half),
        CorrelationProfile::HighCorrelation => {
            let c = sector_center.unwrap_or_else(|| draw_sector_center(model, rng));
            let w = model.sector_width / 2.0;
            clamp_angle(rng.uniform_in(c - w, c + w))
        }
    };
    let los_gain = rng.complex_normal(model.los_variance) * model.gain_scale;
    paths.push(PathComponent { gain: los_gain, angle: los_angle });
    for _ in 1..model.paths_per_user {
        let angle = match profile {
            CorrelationProfile::LowCorrelation => rng.uniform_in(-half, half),
            CorrelationProfile::HighCorrelation => {
                clamp_angle(rng.uniform_in(los_angle - model.nlos_spread, los_angle + model.nlos_spread))
            }
        };
        let gain = rng.complex_normal(model.nlos_variance) * model.gain_scale;
        paths.push(PathComponent { gain, angle });
    }
    let vector = reconstruct_channel(cfg.n_tx, cfg.antenna_spacing_wavelengths, &paths);
    UserChannel { paths, vector }
}

fn draw_sector_center(model: &ChannelModel, rng: &mut SeededRng) -> f64 {
    let half = PI / 2.0;
    let margin = model.sector_width / 2.0;
    rng.uniform_in(-half + margin, half - margin)
}

/// One user's Saleh-Valenzuela draw: path list plus h_k.
pub fn generate_user_channel(
    cfg: &SystemConfig,
    model: &ChannelModel,
    profile: CorrelationProfile,
    rng: &mut SeededRng,
) -> UserChannel {
    let sector = match profile {
        CorrelationProfile::HighCorrelation => Some(draw_sector_center(model, rng)),
        CorrelationProfile::LowCorrelation => None,
    };
    user_channel_in_sector(cfg, model, profile, rng, sector)
}

/// K independent user channels. HighCorrelation draws one sector shared by
/// every user's LoS angle.
pub fn generate_channel_set(
    cfg: &SystemConfig,
    model: &ChannelModel,
    profile: CorrelationProfile,
    rng: &mut SeededRng,
) -> ChannelSet {
    let sector = match profile {
        CorrelationProfile::HighCorrelation => Some(draw_sector_center(model, rng)),
        CorrelationProfile::LowCorrelation => None,
    };
    let users = (0..cfg.n_users)
        .map(|_| user_channel_in_sector(cfg, model, profile, rng, sector))
        .collect();
    ChannelSet { users, profile }
}

/// Assembles Phi and Omega from target and clutter responses.
pub fn build_radar_scene(
    target_angle: f64,
    target_gain: Complex64,
    clutter: &[(f64, Complex64)],
    cfg: &SystemConfig,
) -> Result<RadarScene, SceneError> {
    let n_t = cfg.n_tx;
    let a0 = radar_response(target_angle, n_t, cfg.n_rx)?;
    let phi = a0.adjoint() * &a0 * Complex64::new(target_gain.norm_sqr(), 0.0);
    let mut omega = DMatrix::zeros(n_t, n_t);
    for (angle, gain) in clutter {
        let aq = radar_response(*angle, n_t, cfg.n_rx)?;
        omega += aq.adjoint() * &aq * Complex64::new(gain.norm_sqr(), 0.0);
    }
    Ok(RadarScene {
        target_angle,
        target_gain,
        clutter_angles: clutter.iter().map(|c| c.0).collect(),
        clutter_gains: clutter.iter().map(|c| c.1).collect(),
        phi,
        omega,
        n_rx: cfg.n_rx,
    })
}

impl RadarScene {
    /// Default geometry: target broadside at 0 deg, three unit-RCS clutter
    /// patches at -50/-20/+40 deg.
    pub fn default_for(cfg: &SystemConfig) -> Result<Self, SceneError> {
        let one = Complex64::new(1.0, 0.0);
        let clutter: Vec<(f64, Complex64)> = [-50f64, -20.0, 40.0]
            .iter()
            .map(|d| (d.to_radians(), one))
            .collect();
        build_radar_scene(0.0, one, &clutter, cfg)
    }

    /// Transmit steering vector toward the target.
    pub fn target_steering(&self) -> DVector<Complex64> {
        steering_vector(self.target_angle, self.phi.nrows()).expect("validated angle")
    }
}

/// Max |difference| between a channel vector and the Saleh-Valenzuela sum of
/// its stored paths. Used by the reconstruction invariant checks.
pub fn reconstruction_error(cfg: &SystemConfig, user: &UserChannel) -> f64 {
    let rebuilt = reconstruct_channel(cfg.n_tx, cfg.antenna_spacing_wavelengths, &user.paths);
    (rebuilt - &user.vector).norm()
}

/// |a(theta_i)^H a(theta_j)| for the users' LoS angles, all pairs.
pub fn los_steering_correlations(cfg: &SystemConfig, set: &ChannelSet) -> Vec<f64> {
    let vecs: Vec<DVector<Complex64>> = set
        .users
        .iter()
        .map(|u| steering_vector(u.paths[0].angle, cfg.n_tx).expect("validated angle"))
        .collect();
    let mut out = Vec::new();
    for i in 0..vecs.len() {
        for j in (i + 1)..vecs.len() {
            out.push(vecs[i].dotc(&vecs[j]).norm());
        }
    }
    out
}

/// Hermitian check, PSD check and rank of a quadratic-form matrix, used by
/// scene validation and tests.
pub fn hermitian_psd_rank(m: &DMatrix<Complex64>, rel_tol: f64) -> Option<usize> {
    let n = m.nrows();
    let scale = ksum((0..n).map(|i| m[(i, i)].norm()));
    let herm_err = (m - m.adjoint()).norm();
    if scale > 0.0 && herm_err > rel_tol * scale {
        return None;
    }
    let eig = m.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0f64, f64::max);
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale.max(1e-300)) {
        return None;
    }
    let rank_tol = 1e-10 * max_ev.max(1e-300);
    Some(eig.eigenvalues.iter().filter(|&&l| l > rank_tol).count())
}
