//! The five block updates of the inner loop. Every update is the exact
//! minimizer of the augmented objective over its block (subject to the block
//! constraint), so the objective is non-increasing across each one.

use super::*;
use std::f64::consts::LN_2;

/// Bracket cap for the sensing-constraint multiplier search.
const V1_BRACKET_CAP: f64 = 1e12;
/// Complementary-slackness target |multiplier * residual| for bisections.
const SLACK_TARGET: f64 = 1e-7;

impl<'a> PddSolver<'a> {
    /// Step 1: MMSE equalizers given everything else. w_{c,k} reads Z_k, w_k
    /// reads X.
    pub fn update_equalizers(&self, state: &mut SolverState) {
        let noise = self.cfg.user_noise_power;
        for k in 0..self.cfg.n_users {
            let h = self.channels.channel(k);
            if self.variant.common_stream {
                let gains = metrics::effective_gains(h, &state.z[k]);
                let t_c = metrics::t_common(&gains, noise);
                state.w_common[k] = gains[0].conj() / t_c;
            }
            let gains = metrics::effective_gains(h, &state.x);
            let t_k = metrics::t_private(&gains, noise);
            state.w_private[k] = gains[k + 1].conj() / t_k;
        }
    }

    /// Step 2: optimal weights u = 1 / (e^MMSE ln 2); strictly positive since
    /// the MMSE errors live in (0, 1].
    pub fn update_weights(&self, state: &mut SolverState) {
        let noise = self.cfg.user_noise_power;
        for k in 0..self.cfg.n_users {
            let h = self.channels.channel(k);
            if self.variant.common_stream {
                let gains = metrics::effective_gains(h, &state.z[k]);
                let t_c = metrics::t_common(&gains, noise);
                let e = (t_c - gains[0].norm_sqr()) / t_c;
                state.u_common[k] = 1.0 / (e * LN_2);
            }
            let gains = metrics::effective_gains(h, &state.x);
            let t_k = metrics::t_private(&gains, noise);
            let e = (t_k - gains[k + 1].norm_sqr()) / t_k;
            state.u_private[k] = 1.0 / (e * LN_2);
        }
    }

    /// Step 3a: Y = (I + v1 gamma_0 Omega)^{-1} (X + rho Lambda_1 + v1 Phi Y_t)
    /// with the smallest v1 >= 0 satisfying the CCCP-linearized sensing
    /// constraint; the linearization anchor becomes the new Y afterwards.
    pub fn update_y(&self, state: &mut SolverState) -> Result<(), SolverError> {
        let rho = state.penalty;
        let rhs0 = &state.x + &state.mult_y * Complex64::new(rho, 0.0);
        if !self.sensing_active || self.phi_vec.norm_squared() == 0.0 {
            // vacuous constraint (gamma_0 = 0 admits every Y)
            if self.sensing_active {
                // Phi = 0 with gamma_0 > 0 can never be met; caught at init
                debug_assert!(self.cfg.scnr_threshold == 0.0);
            }
            state.y = rhs0;
            state.cccp_anchor = state.y.clone();
            return Ok(());
        }

        let gamma0 = self.cfg.scnr_threshold;
        let n_t = self.cfg.n_tx;
        let cols = self.n_cols();
        let w1 = self.omega_u.adjoint() * &rhs0;
        let phi_hat = self.omega_u.adjoint() * &self.phi_vec;
        // per-column projections phi^H Y_t of the anchor
        let t_row: Vec<Complex64> = (0..cols)
            .map(|c| cdotc_parts(self.phi_vec.iter(), state.cccp_anchor.column(c).iter()))
            .collect();
        let anchor_phi = ksum(t_row.iter().map(|t| t.norm_sqr()));
        let noise_term = gamma0 * self.scene.n_rx as f64 * self.cfg.echo_noise_power;

        // f_1(Y(v)) - fhat_2(Y(v), Y_t); nonincreasing in v
        let residual = |v: f64| -> f64 {
            let mut tr_omega = KahanSum::new();
            let mut cross = KahanSum::new();
            for c in 0..cols {
                let mut phi_y = Complex64::new(0.0, 0.0);
                for m in 0..n_t {
                    let yh = (w1[(m, c)] + phi_hat[m] * t_row[c] * v)
                        / Complex64::new(1.0 + v * gamma0 * self.omega_d[m], 0.0);
                    tr_omega.add(self.omega_d[m] * yh.norm_sqr());
                    phi_y += phi_hat[m].conj() * yh;
                }
                cross.add((t_row[c].conj() * phi_y).re);
            }
            gamma0 * tr_omega.value() + noise_term - 2.0 * cross.value() + anchor_phi
        };

        let v1 = match self.solve_multiplier("sensing", residual, V1_BRACKET_CAP) {
            Ok(v) => v,
            Err(SolverError::BisectionBracketFailure { .. }) => {
                return Err(SolverError::InfeasibleSensing {
                    threshold: self.cfg.scnr_threshold,
                    anchor_bound: metrics::scnr_input(&state.cccp_anchor, self.scene, self.cfg),
                });
            }
            Err(e) => return Err(e),
        };
        let mut y = DMatrix::zeros(n_t, cols);
        for c in 0..cols {
            for m in 0..n_t {
                y[(m, c)] = (w1[(m, c)] + phi_hat[m] * t_row[c] * v1)
                    / Complex64::new(1.0 + v1 * gamma0 * self.omega_d[m], 0.0);
            }
        }
        state.y = &self.omega_u * y;
        state.cccp_anchor = state.y.clone();
        Ok(())
    }

    /// Step 3b: joint closed form for (Z_k, q_k) with the multiplier v_{2,k}
    /// found by bisection on the common-rate constraint evaluated at the
    /// current fixed (u_{c,k}, w_{c,k}).
    pub fn update_z_and_q(&self, state: &mut SolverState, k: usize) -> Result<(), SolverError> {
        let rho = state.penalty;
        let cols = self.n_cols();
        let a = &state.x + &state.mult_z[k] * Complex64::new(rho, 0.0);
        let q_base = &state.c + &state.mult_q[k] * rho;
        let h = self.channels.channel(k);
        let u_c = state.u_common[k];
        let w_c = state.w_common[k];
        let g = metrics::awmse_constant();
        let noise = self.cfg.user_noise_power;
        let h_norm_sq = h.norm_squared();
        let ha: Vec<Complex64> = (0..cols)
            .map(|i| cdotc_parts(h.iter(), a.column(i).iter()))
            .collect();
        let kappa = w_c.conj() * u_c;
        let coef = u_c * w_c.norm_sqr();
        let q_sum_base = ksum(q_base.iter().cloned());
        let kk = self.cfg.n_users as f64;

        // 1^T q(v) + eta_{c,k}(Z(v)) - g; strictly decreasing through the
        // -v K/2 term, so a root always exists
        let psi = |v: f64| -> f64 {
            let shrink = 1.0 + v * coef * h_norm_sq;
            let mut t_acc = KahanSum::new();
            let mut g0 = Complex64::new(0.0, 0.0);
            for (i, hai) in ha.iter().enumerate() {
                let mut hz = *hai;
                if i == 0 {
                    hz += kappa * h_norm_sq * v;
                }
                let hz = hz / shrink;
                t_acc.add(hz.norm_sqr());
                if i == 0 {
                    g0 = hz;
                }
            }
            let t_c = t_acc.value() + noise;
            let eta = u_c * (w_c.norm_sqr() * t_c - 2.0 * (w_c * g0).re + 1.0) - u_c.log2();
            q_sum_base - v * kk / 2.0 + eta - g
        };

        let v2 = self.solve_multiplier("common-rate", psi, f64::INFINITY)?;

        state.q[k] = q_base.add_scalar(-v2 / 2.0);
        let mut b = a;
        if v2 > 0.0 {
            let bump = kappa * v2;
            let mut col0 = b.column_mut(0);
            for m in 0..col0.len() {
                col0[m] += h[m] * bump;
            }
            let cc = coef * v2;
            if cc > 0.0 && h_norm_sq > 0.0 {
                // Sherman-Morrison: (I + cc h h^H)^{-1} B = B - h (h^H B) cc/(1+cc|h|^2)
                let scale = cc / (1.0 + cc * h_norm_sq);
                let hb: Vec<Complex64> = (0..cols)
                    .map(|i| cdotc_parts(h.iter(), b.column(i).iter()))
                    .collect();
                for i in 0..cols {
                    let f = hb[i] * scale;
                    let mut col = b.column_mut(i);
                    for m in 0..col.len() {
                        col[m] -= h[m] * f;
                    }
                }
            }
        }
        state.z[k] = b;
        Ok(())
    }

    /// Step 3c: digital stage least squares, F_D = F_RF^dagger (X + rho Lambda_3).
    pub fn update_fd(&self, state: &mut SolverState) -> Result<(), SolverError> {
        let rho = state.penalty;
        let target = &state.x + &state.mult_fd * Complex64::new(rho, 0.0);
        match self.variant.analog {
            AnalogArch::Identity => {
                state.f_d = target;
            }
            AnalogArch::PhaseShifter => {
                let gram = state.f_rf.adjoint() * &state.f_rf;
                let eig = gram.clone().symmetric_eigen();
                let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
                let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
                let cond = if lmin > 0.0 {
                    (lmax / lmin).sqrt()
                } else {
                    f64::INFINITY
                };
                if !(cond <= 1e12) {
                    return Err(SolverError::RankDeficientAnalog { cond });
                }
                let chol = gram
                    .cholesky()
                    .ok_or(SolverError::RankDeficientAnalog { cond })?;
                state.f_d = chol.solve(&(state.f_rf.adjoint() * target));
            }
        }
        Ok(())
    }

    /// Step 4a: common-rate closed form
    /// C_i = max(0, (sum_k (q_{k,i} - rho lambda_{c,k,i}) + rho alpha_i) / K).
    pub fn update_c(&self, state: &mut SolverState) {
        let rho = state.penalty;
        let kk = self.cfg.n_users;
        for i in 0..kk {
            let mut acc = KahanSum::new();
            for k in 0..kk {
                acc.add(state.q[k][i] - rho * state.mult_q[k][i]);
            }
            acc.add(rho * self.cfg.user_weights[i]);
            state.c[i] = (acc.value() / kk as f64).max(0.0);
        }
    }

    /// Step 4b: elementwise coordinate descent on
    /// tr(F^H F C) - 2 Re tr(F^H B) with C = F_D F_D^H, B = (X + rho L3) F_D^H.
    /// Each entry takes the closed-form phase of B_ij - sum_{l != j} F_il C_lj;
    /// a zero argument keeps the previous phase.
    pub fn update_frf(&self, state: &mut SolverState) {
        let rho = state.penalty;
        let c_mat = &state.f_d * state.f_d.adjoint();
        let b = (&state.x + &state.mult_fd * Complex64::new(rho, 0.0)) * state.f_d.adjoint();
        let n_t = state.f_rf.nrows();
        let n_rf = state.f_rf.ncols();
        for _ in 0..self.opts.rf_phase_sweeps {
            for i in 0..n_t {
                for j in 0..n_rf {
                    let mut s = Complex64::new(0.0, 0.0);
                    for l in 0..n_rf {
                        if l != j {
                            s += state.f_rf[(i, l)] * c_mat[(l, j)];
                        }
                    }
                    let w = b[(i, j)] - s;
                    let norm = w.norm();
                    if norm > 0.0 {
                        state.f_rf[(i, j)] = w / norm;
                    }
                }
            }
        }
    }

    /// Step 5: power-constrained regularized least squares for X. The
    /// (K+1) column systems share one Hermitian factorization; v_3 comes from
    /// bisection on the transmit-power residual.
    pub fn update_x(&self, state: &mut SolverState) {
        let rho = state.penalty;
        let n_t = self.cfg.n_tx;
        let cols = self.n_cols();
        let kk = self.cfg.n_users;

        let mut h_w: DMatrix<Complex64> = DMatrix::zeros(n_t, n_t);
        let mut v_mat: DMatrix<Complex64> = DMatrix::zeros(n_t, cols);
        for k in 0..kk {
            let h = self.channels.channel(k);
            let alpha = self.cfg.user_weights[k];
            let u = state.u_private[k];
            let w = state.w_private[k];
            let quad = alpha * u * w.norm_sqr();
            if quad > 0.0 {
                for r in 0..n_t {
                    let hr = h[r] * quad;
                    for s in 0..n_t {
                        h_w[(r, s)] += hr * h[s].conj();
                    }
                }
            }
            let lin = w.conj() * (alpha * u);
            let mut col = v_mat.column_mut(k + 1);
            for r in 0..n_t {
                col[r] += h[r] * lin;
            }
        }
        let mut consensus = state.y.clone();
        for zk in &state.z {
            consensus += zk;
        }
        consensus += &state.f_rf * &state.f_d;
        let mut mult_sum = &state.mult_y + &state.mult_fd;
        for mz in &state.mult_z {
            mult_sum += mz;
        }
        v_mat += (consensus - mult_sum * Complex64::new(rho, 0.0))
            * Complex64::new(1.0 / (2.0 * rho), 0.0);

        let mu0 = self.consensus_terms() as f64 / (2.0 * rho);
        let eig = h_w.symmetric_eigen();
        let d: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let u_h = eig.eigenvectors;
        let v_hat = u_h.adjoint() * &v_mat;
        let p0 = v_mat.column(0).norm_squared();

        let norm_sq = |v3: f64| -> f64 {
            let mu = mu0 + v3;
            let mut acc = KahanSum::new();
            acc.add(p0 / (mu * mu));
            for i in 1..cols {
                for m in 0..n_t {
                    let den = d[m] + mu;
                    acc.add(v_hat[(m, i)].norm_sqr() / (den * den));
                }
            }
            acc.value()
        };

        let p_t = self.cfg.power_budget;
        let mut v3 = 0.0;
        if norm_sq(0.0) > p_t {
            // strictly decreasing toward zero, so a bracket always exists
            let mut lo = 0.0;
            let mut hi = mu0.max(1.0);
            while norm_sq(hi) > p_t {
                lo = hi;
                hi *= 2.0;
                assert!(hi.is_finite(), "power bisection bracket diverged");
            }
            let mut g_hi = norm_sq(hi) - p_t;
            for _ in 0..self.opts.bisection_max_iter {
                let width_ok = (hi - lo) <= self.opts.bisection_tol * hi.max(1.0);
                let res_ok = g_hi.abs() <= self.opts.bisection_tol * p_t
                    && (hi * g_hi).abs() <= SLACK_TARGET;
                if width_ok && res_ok {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = norm_sq(mid) - p_t;
                if gm <= 0.0 {
                    hi = mid;
                    g_hi = gm;
                } else {
                    lo = mid;
                }
            }
            v3 = hi;
        }

        let mu = mu0 + v3;
        let mut x_hat = DMatrix::zeros(n_t, cols);
        for i in 1..cols {
            for m in 0..n_t {
                x_hat[(m, i)] = v_hat[(m, i)] / Complex64::new(d[m] + mu, 0.0);
            }
        }
        let mut x = &u_h * x_hat;
        x.set_column(0, &(v_mat.column(0) / Complex64::new(mu, 0.0)));
        state.x = x;
    }

    /// Shared multiplier search: returns the smallest v >= 0 with
    /// residual(v) <= 0 (complementary slackness), assuming the residual is
    /// nonincreasing. Falls back to a golden-section scan of |residual| if the
    /// expansion detects non-monotone behaviour before finding a sign change.
    fn solve_multiplier(
        &self,
        step: &'static str,
        residual: impl Fn(f64) -> f64,
        cap: f64,
    ) -> Result<f64, SolverError> {
        let r0 = residual(0.0);
        if !r0.is_finite() {
            return Err(SolverError::BisectionBracketFailure {
                step,
                multiplier: 0.0,
                residual: r0,
            });
        }
        if r0 <= 0.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut r_prev = r0;
        let mut monotone = true;
        let mut r_hi = residual(hi);
        loop {
            if !r_hi.is_finite() {
                return Err(SolverError::BisectionBracketFailure {
                    step,
                    multiplier: hi,
                    residual: r_hi,
                });
            }
            if r_hi <= 0.0 {
                break;
            }
            if r_hi > r_prev {
                monotone = false;
            }
            r_prev = r_hi;
            lo = hi;
            hi *= 2.0;
            if hi > cap {
                if !monotone {
                    // non-monotone numerics: golden-section on |residual|
                    if let Some(v) = golden_min_abs(&residual, 0.0, cap) {
                        return Ok(v);
                    }
                }
                return Err(SolverError::BisectionBracketFailure {
                    step,
                    multiplier: hi,
                    residual: r_hi,
                });
            }
            r_hi = residual(hi);
        }
        for _ in 0..self.opts.bisection_max_iter {
            let width_ok = (hi - lo) <= self.opts.bisection_tol * hi.max(1.0);
            let slack_ok = (hi * r_hi).abs() <= SLACK_TARGET;
            if width_ok && slack_ok {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let rm = residual(mid);
            if rm <= 0.0 {
                hi = mid;
                r_hi = rm;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Golden-section minimization of |f| over [lo, hi]; returns the minimizer
/// when the minimum is a feasible (non-positive) residual.
fn golden_min_abs(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c).abs();
    let mut fd = f(d).abs();
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c).abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d).abs();
        }
    }
    let v = 0.5 * (a + b);
    if f(v) <= 0.0 {
        Some(v)
    } else {
        None
    }
}
