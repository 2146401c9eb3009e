//! Thermodynamic model functions: interpolation weights, obstacle potential,
//! gradient energy, parabolic grand potentials and their derivatives,
//! mobility, and the frozen-temperature schedule.
//!
//! All functions here are pure over value inputs and safe to call from any
//! worker concurrently.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::{N_COMP, N_PHASES};

/// Interpolation weight used for the diagonal mobility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityWeight {
    /// Linear weight `phi_alpha` (default; positive and cheap).
    Phi,
    /// Normalized-quadratic weight `h_alpha(phi)`.
    H,
}

/// Interface and kinetic parameters shared by both kernels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface-width parameter epsilon (meters).
    pub epsilon: f64,
    /// Per-phase relaxation constants tau_alpha.
    pub tau: [f64; N_PHASES],
    /// Symmetric surface-energy matrix, zero diagonal, positive off-diagonal.
    pub gamma: [[f64; N_PHASES]; N_PHASES],
    /// Per-phase, per-independent-component diffusivities D_i^alpha.
    pub diff: [[f64; N_COMP]; N_PHASES],
    /// Index of the liquid phase.
    pub liquid: usize,
    pub mobility_weight: MobilityWeight,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(SimError::Config("epsilon must be > 0".into()));
        }
        if self.liquid >= N_PHASES {
            return Err(SimError::Config(format!(
                "liquid phase index {} out of range",
                self.liquid
            )));
        }
        for (a, &t) in self.tau.iter().enumerate() {
            if !(t > 0.0) {
                return Err(SimError::Config(format!("tau[{a}] must be > 0")));
            }
        }
        for a in 0..N_PHASES {
            if self.gamma[a][a] != 0.0 {
                return Err(SimError::Config(format!("gamma[{a}][{a}] must be 0")));
            }
            for b in 0..N_PHASES {
                if a != b {
                    if !(self.gamma[a][b] > 0.0) {
                        return Err(SimError::Config(format!("gamma[{a}][{b}] must be > 0")));
                    }
                    if self.gamma[a][b] != self.gamma[b][a] {
                        return Err(SimError::Config("gamma must be symmetric".into()));
                    }
                }
            }
            for i in 0..N_COMP {
                if self.diff[a][i] < 0.0 {
                    return Err(SimError::Config(format!("diff[{a}][{i}] must be >= 0")));
                }
            }
        }
        for i in 0..N_COMP {
            if !(self.diff[self.liquid][i] > 0.0) {
                return Err(SimError::Config(format!(
                    "liquid diffusivity for component {i} must be > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Per-phase parabolic grand-potential data.
///
/// For each phase `alpha` and independent component `i`:
/// `c_i^a(mu,T) = mu_i / (2 A_i^a) + cbar_i^a(T)` with
/// `cbar_i^a(T) = c_eq_i^a + m_i^a (T - T_eut)`, and
/// `psi_a(mu,T) = -sum_i [ mu_i^2/(4 A_i^a) + mu_i cbar_i^a(T) ] + B_a(T)`
/// where `B_a(T) = L_a (T - T_eut)/T_eut`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseThermo {
    /// Parabola curvatures A_i^alpha, strictly positive.
    pub curvature: [[f64; N_COMP]; N_PHASES],
    /// Eutectic equilibrium concentrations at T_eut.
    pub c_eq: [[f64; N_COMP]; N_PHASES],
    /// Liquidus/solidus slopes d cbar / dT.
    pub slope: [[f64; N_COMP]; N_PHASES],
    /// Driving offset coefficients L^alpha; B_a(T_eut) = 0 by construction.
    pub latent: [f64; N_PHASES],
    /// Eutectic temperature (K).
    pub t_eut: f64,
}

impl PhaseThermo {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_eut > 0.0) {
            return Err(SimError::Config("t_eut must be > 0".into()));
        }
        for a in 0..N_PHASES {
            for i in 0..N_COMP {
                if !(self.curvature[a][i] > 0.0) {
                    return Err(SimError::Config(format!(
                        "curvature[{a}][{i}] must be > 0"
                    )));
                }
            }
        }
        Ok(())
    }

    /// T-shifted equilibrium concentration cbar_i^a(T).
    #[inline]
    pub fn cbar(&self, alpha: usize, i: usize, t: f64) -> f64 {
        self.c_eq[alpha][i] + self.slope[alpha][i] * (t - self.t_eut)
    }

    /// Undercooling-proportional driving offset B_a(T).
    #[inline]
    pub fn b_offset(&self, alpha: usize, t: f64) -> f64 {
        self.latent[alpha] * (t - self.t_eut) / self.t_eut
    }
}

/// Frozen-temperature schedule: T(z,t) = t_base + G (z - z0 - v t).
///
/// `t_base` is the temperature on the moving reference isotherm; it equals
/// the eutectic temperature in production setups but may be offset in tests
/// to impose a uniform undercooling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub t_base: f64,
    /// Gradient magnitude G (K/m).
    pub g: f64,
    /// Pulling velocity v (m/s).
    pub v: f64,
    /// Initial front position z0 (m).
    pub z0: f64,
}

impl TemperatureSchedule {
    #[inline]
    pub fn temperature_at(&self, z: f64, t: f64) -> f64 {
        self.t_base + self.g * (z - self.z0 - self.v * t)
    }

    /// dT/dt, constant everywhere under the frozen-temperature assumption.
    #[inline]
    pub fn dt_dt(&self) -> f64 {
        -self.g * self.v
    }
}

/// Interpolation weights h_a = phi_a^2 / sum_b phi_b^2 and their Jacobian.
///
/// Returns `(h, dh)` with `dh[a][b] = d h_a / d phi_b`. On the simplex the
/// denominator is bounded below by 1/N, so no guard is needed.
pub fn h_interp(phi: &[f64; N_PHASES]) -> ([f64; N_PHASES], [[f64; N_PHASES]; N_PHASES]) {
    let s: f64 = phi.iter().map(|p| p * p).sum();
    let mut h = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        h[a] = phi[a] * phi[a] / s;
    }
    let mut dh = [[0.0; N_PHASES]; N_PHASES];
    for a in 0..N_PHASES {
        for b in 0..N_PHASES {
            let kron = if a == b { 2.0 * phi[a] / s } else { 0.0 };
            dh[a][b] = kron - 2.0 * phi[b] * phi[a] * phi[a] / (s * s);
        }
    }
    (h, dh)
}

/// Weights only, skipping the Jacobian.
#[inline]
pub fn h_weights(phi: &[f64; N_PHASES]) -> [f64; N_PHASES] {
    let s: f64 = phi.iter().map(|p| p * p).sum();
    let mut h = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        h[a] = phi[a] * phi[a] / s;
    }
    h
}

/// Grand potential psi_a and concentrations c^a for one phase.
pub fn grand_potential_phase(
    th: &PhaseThermo,
    alpha: usize,
    mu: &[f64; N_COMP],
    t: f64,
) -> (f64, [f64; N_COMP]) {
    let mut psi = th.b_offset(alpha, t);
    let mut c = [0.0; N_COMP];
    for i in 0..N_COMP {
        let a2 = 2.0 * th.curvature[alpha][i];
        let cbar = th.cbar(alpha, i, t);
        c[i] = mu[i] / a2 + cbar;
        psi -= mu[i] * mu[i] / (2.0 * a2) + mu[i] * cbar;
    }
    (psi, c)
}

/// d psi / d phi_a = sum_b psi_b(mu,T) dh_b/dphi_a (purely local).
pub fn driving_force_deriv(
    th: &PhaseThermo,
    phi: &[f64; N_PHASES],
    mu: &[f64; N_COMP],
    t: f64,
) -> [f64; N_PHASES] {
    let (_, dh) = h_interp(phi);
    let mut psi = [0.0; N_PHASES];
    for b in 0..N_PHASES {
        psi[b] = grand_potential_phase(th, b, mu, t).0;
    }
    let mut out = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        let mut acc = 0.0;
        for b in 0..N_PHASES {
            acc += psi[b] * dh[b][a];
        }
        out[a] = acc;
    }
    out
}

/// Multi-obstacle potential derivative d omega / d phi_a = 16/pi^2 sum_{b!=a} gamma_ab phi_b.
pub fn obstacle_deriv(params: &ModelParams, phi: &[f64; N_PHASES]) -> [f64; N_PHASES] {
    let pref = 16.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let mut out = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        let mut acc = 0.0;
        for b in 0..N_PHASES {
            if b != a {
                acc += params.gamma[a][b] * phi[b];
            }
        }
        out[a] = pref * acc;
    }
    out
}

/// Obstacle potential value omega(phi) = 16/pi^2 sum_{a<b} gamma_ab phi_a phi_b.
pub fn obstacle_value(params: &ModelParams, phi: &[f64; N_PHASES]) -> f64 {
    let pref = 16.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let mut acc = 0.0;
    for a in 0..N_PHASES {
        for b in (a + 1)..N_PHASES {
            acc += params.gamma[a][b] * phi[a] * phi[b];
        }
    }
    pref * acc
}

/// D3C7 neighborhood of phase vectors: center plus the six face neighbors.
#[derive(Debug, Clone, Copy)]
pub struct PhiNeighborhood {
    pub c: [f64; N_PHASES],
    pub xm: [f64; N_PHASES],
    pub xp: [f64; N_PHASES],
    pub ym: [f64; N_PHASES],
    pub yp: [f64; N_PHASES],
    pub zm: [f64; N_PHASES],
    pub zp: [f64; N_PHASES],
}

impl PhiNeighborhood {
    #[inline]
    pub fn pair(&self, axis: usize) -> (&[f64; N_PHASES], &[f64; N_PHASES]) {
        match axis {
            0 => (&self.xm, &self.xp),
            1 => (&self.ym, &self.yp),
            _ => (&self.zm, &self.zp),
        }
    }
}

/// Normal component of d a / d grad(phi_a) at a staggered face position.
///
/// With `a = sum_{a<b} gamma_ab |q_ab|^2`, `q_ab = phi_a grad phi_b - phi_b grad phi_a`,
/// the axis component of the flux vector only involves phi values and the
/// same-axis derivative, so a two-point face evaluation suffices:
/// face phi by arithmetic mean, normal derivative by exact difference.
/// Argument order is (minus side, plus side) along the axis so both adjacent
/// cells produce bitwise identical values for a shared face.
pub fn grad_energy_face(
    params: &ModelParams,
    minus: &[f64; N_PHASES],
    plus: &[f64; N_PHASES],
    dx: f64,
) -> [f64; N_PHASES] {
    let mut f = [0.0; N_PHASES];
    let mut d = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        f[a] = 0.5 * (minus[a] + plus[a]);
        d[a] = (plus[a] - minus[a]) / dx;
    }
    let mut v = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        let mut acc = 0.0;
        for b in 0..N_PHASES {
            if b != a {
                // q_ab component along the face normal, times phi_b.
                acc += params.gamma[a][b] * f[b] * (f[a] * d[b] - f[b] * d[a]);
            }
        }
        v[a] = -2.0 * acc;
    }
    v
}

/// Cell-local part `d a/d phi_a` with central-difference gradients.
pub fn grad_energy_cell(params: &ModelParams, nb: &PhiNeighborhood, dx: f64) -> [f64; N_PHASES] {
    let mut grad = [[0.0; 3]; N_PHASES];
    for a in 0..N_PHASES {
        grad[a][0] = (nb.xp[a] - nb.xm[a]) / (2.0 * dx);
        grad[a][1] = (nb.yp[a] - nb.ym[a]) / (2.0 * dx);
        grad[a][2] = (nb.zp[a] - nb.zm[a]) / (2.0 * dx);
    }
    let mut out = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        let mut acc = 0.0;
        for b in 0..N_PHASES {
            if b != a {
                // d a / d phi_a = sum_b gamma_ab 2 (q_ab . grad phi_b)
                let mut dot = 0.0;
                for k in 0..3 {
                    let q = nb.c[a] * grad[b][k] - nb.c[b] * grad[a][k];
                    dot += q * grad[b][k];
                }
                acc += params.gamma[a][b] * 2.0 * dot;
            }
        }
        out[a] = acc;
    }
    out
}

/// Discrete `d a/d phi_a - div(d a/d grad phi_a)` on a D3C7 neighborhood.
///
/// Cell part from [`grad_energy_cell`], divergence from staggered face
/// values of [`grad_energy_face`].
pub fn gradient_energy_terms(
    params: &ModelParams,
    nb: &PhiNeighborhood,
    dx: f64,
) -> [f64; N_PHASES] {
    let mut out = grad_energy_cell(params, nb, dx);
    // Divergence by staggered face differences.
    for axis in 0..3 {
        let (m, p) = nb.pair(axis);
        let v_minus = grad_energy_face(params, m, &nb.c, dx);
        let v_plus = grad_energy_face(params, &nb.c, p, dx);
        for a in 0..N_PHASES {
            out[a] -= (v_plus[a] - v_minus[a]) / dx;
        }
    }
    out
}

/// Inverse susceptibility: [(dc/dmu)]^-1, diagonal.
///
/// dc_i/dmu_i = sum_a h_a(phi) / (2 A_i^a); diagonal entries are bounded
/// below by min_a 1/(2 A_i^a) > 0, so the inverse is total.
pub fn susceptibility_inverse(th: &PhaseThermo, phi: &[f64; N_PHASES]) -> [f64; N_COMP] {
    let h = h_weights(phi);
    susceptibility_inverse_from_h(th, &h)
}

#[inline]
pub fn susceptibility_from_h(th: &PhaseThermo, h: &[f64; N_PHASES]) -> [f64; N_COMP] {
    let mut chi = [0.0; N_COMP];
    for i in 0..N_COMP {
        let mut acc = 0.0;
        for a in 0..N_PHASES {
            acc += h[a] / (2.0 * th.curvature[a][i]);
        }
        chi[i] = acc;
    }
    chi
}

#[inline]
pub fn susceptibility_inverse_from_h(th: &PhaseThermo, h: &[f64; N_PHASES]) -> [f64; N_COMP] {
    let chi = susceptibility_from_h(th, h);
    [1.0 / chi[0], 1.0 / chi[1]]
}

/// Partials of the mixed concentration c(phi,mu,T) = sum_a h_a c^a(mu,T).
///
/// Returns `(dc_dphi, dc_dt)` with `dc_dphi[i][b] = dc_i/dphi_b`.
pub fn conc_partials(
    th: &PhaseThermo,
    phi: &[f64; N_PHASES],
    mu: &[f64; N_COMP],
    t: f64,
) -> ([[f64; N_PHASES]; N_COMP], [f64; N_COMP]) {
    let (h, dh) = h_interp(phi);
    let mut dc_dphi = [[0.0; N_PHASES]; N_COMP];
    let mut dc_dt = [0.0; N_COMP];
    for i in 0..N_COMP {
        for b in 0..N_PHASES {
            let mut acc = 0.0;
            for a in 0..N_PHASES {
                let c_ai = mu[i] / (2.0 * th.curvature[a][i]) + th.cbar(a, i, t);
                acc += dh[a][b] * c_ai;
            }
            dc_dphi[i][b] = acc;
        }
        for a in 0..N_PHASES {
            dc_dt[i] += h[a] * th.slope[a][i];
        }
    }
    (dc_dphi, dc_dt)
}

/// Mixed concentration c(phi,mu,T).
pub fn concentration(
    th: &PhaseThermo,
    phi: &[f64; N_PHASES],
    mu: &[f64; N_COMP],
    t: f64,
) -> [f64; N_COMP] {
    let h = h_weights(phi);
    let mut c = [0.0; N_COMP];
    for i in 0..N_COMP {
        for a in 0..N_PHASES {
            c[i] += h[a] * (mu[i] / (2.0 * th.curvature[a][i]) + th.cbar(a, i, t));
        }
    }
    c
}

/// Diagonal mobility M_ii = sum_a w_a D_i^a / (2 A_i^a) with the configured
/// interpolation weight.
pub fn mobility(
    params: &ModelParams,
    th: &PhaseThermo,
    phi: &[f64; N_PHASES],
) -> [f64; N_COMP] {
    let w: [f64; N_PHASES] = match params.mobility_weight {
        MobilityWeight::Phi => *phi,
        MobilityWeight::H => h_weights(phi),
    };
    let mut m = [0.0; N_COMP];
    for i in 0..N_COMP {
        for a in 0..N_PHASES {
            m[i] += w[a] * params.diff[a][i] / (2.0 * th.curvature[a][i]);
        }
    }
    m
}

/// Purely temperature-dependent per-slice values, rebuilt whenever (z, t)
/// changes. Holding these per z-slice instead of recomputing per cell is the
/// slice-precompute optimization; the reference kernel builds the same
/// struct per cell, so cached and uncached evaluations are bitwise equal.
#[derive(Debug, Clone, Copy)]
pub struct SliceCache {
    pub temp: f64,
    /// Temperature at the staggered position half a cell up in z.
    pub temp_face_up: f64,
    /// Temperature at the staggered position half a cell down in z.
    pub temp_face_down: f64,
    pub eps_t: f64,
    pub t_over_eps: f64,
    /// cbar_i^a at the slice temperature.
    pub cbar: [[f64; N_COMP]; N_PHASES],
    pub cbar_face_up: [[f64; N_COMP]; N_PHASES],
    pub cbar_face_down: [[f64; N_COMP]; N_PHASES],
    /// B_a at the slice temperature.
    pub b: [f64; N_PHASES],
}

impl SliceCache {
    /// Build for the slice of global z index `global_k` (cell spacing `dx`)
    /// at simulation time `t`. Face temperatures are evaluated at the exact
    /// integer face coordinates `k dx` and `(k+1) dx`, so two slices agree
    /// bitwise on their shared face.
    pub fn build(
        params: &ModelParams,
        th: &PhaseThermo,
        sched: &TemperatureSchedule,
        global_k: i64,
        dx: f64,
        t: f64,
    ) -> Self {
        let temp = sched.temperature_at((global_k as f64 + 0.5) * dx, t);
        let temp_face_up = sched.temperature_at((global_k + 1) as f64 * dx, t);
        let temp_face_down = sched.temperature_at(global_k as f64 * dx, t);
        let mut cbar = [[0.0; N_COMP]; N_PHASES];
        let mut cbar_up = [[0.0; N_COMP]; N_PHASES];
        let mut cbar_down = [[0.0; N_COMP]; N_PHASES];
        let mut b = [0.0; N_PHASES];
        for a in 0..N_PHASES {
            for i in 0..N_COMP {
                cbar[a][i] = th.cbar(a, i, temp);
                cbar_up[a][i] = th.cbar(a, i, temp_face_up);
                cbar_down[a][i] = th.cbar(a, i, temp_face_down);
            }
            b[a] = th.b_offset(a, temp);
        }
        SliceCache {
            temp,
            temp_face_up,
            temp_face_down,
            eps_t: params.epsilon * temp,
            t_over_eps: temp / params.epsilon,
            cbar,
            cbar_face_up: cbar_up,
            cbar_face_down: cbar_down,
            b,
        }
    }

    /// psi_a(mu, T) using the cached cbar/B values.
    #[inline]
    pub fn psi(&self, th: &PhaseThermo, alpha: usize, mu: &[f64; N_COMP]) -> f64 {
        let mut psi = self.b[alpha];
        for i in 0..N_COMP {
            let a4 = 4.0 * th.curvature[alpha][i];
            psi -= mu[i] * mu[i] / a4 + mu[i] * self.cbar[alpha][i];
        }
        psi
    }

    /// Mixed concentration at the cached slice temperature.
    #[inline]
    pub fn concentration(
        &self,
        th: &PhaseThermo,
        phi: &[f64; N_PHASES],
        mu: &[f64; N_COMP],
    ) -> [f64; N_COMP] {
        let h = h_weights(phi);
        let mut c = [0.0; N_COMP];
        for i in 0..N_COMP {
            for a in 0..N_PHASES {
                c[i] += h[a] * (mu[i] / (2.0 * th.curvature[a][i]) + self.cbar[a][i]);
            }
        }
        c
    }
}
