//! The `delta -> 0` limit of the non-equilibrium reduced model: a
//! Cahn-Hilliard equation with the nonlocal Ohta-Kawasaki term
//!
//! ```text
//! d/dt phi_Gamma = Lap mu_Gamma
//! (5/4) mu_Gamma = -eps Lap phi_Gamma + P W'(phi)/eps - sigma/2
//! Lap sigma      = ((c1 u + c2)/2) phi_Gamma,   int sigma = 0
//! ```
//!
//! driven by the same scalar ODE for `u`.

use num_complex::Complex64;
use serde::Serialize;

use crate::exchange::ExchangeLaw;
use crate::exec::Execution;
use crate::model::{self, DynamicsError, ModelParams};
use crate::reduced::{u_rhs_closed_form, ReducedModel, ReducedState};
use crate::spectral::{solve_surface_helmholtz, SpectralError, SurfaceField};

#[derive(Clone, Debug)]
pub struct OkState {
    pub t: f64,
    /// Mean-free phase field.
    pub phi: SurfaceField,
    pub u: f64,
    /// Spatial mean of `phi`; the double well is evaluated at
    /// `phi_mean + phi_Gamma`.
    pub phi_mean: f64,
}

impl OkState {
    /// Splits `phi` into mean and mean-free part.
    pub fn new(phi: &SurfaceField, u: f64) -> Self {
        OkState { t: 0.0, phi: phi.mean_free(), u, phi_mean: phi.mean() }
    }
}

/// Parameters of the limit system. `params.delta` is not used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OkModel {
    pub params: ModelParams,
    pub c1: f64,
    pub c2: f64,
    pub volume: f64,
    /// Combined cholesterol mass `M`.
    pub mass: f64,
}

impl OkModel {
    pub fn step(&self, state: &OkState) -> Result<OkState, DynamicsError> {
        step_ok(state, self)
    }
}

/// Mean-free `sigma` with `Lap sigma = ((c1 u + c2)/2) phi_Gamma`.
pub fn sigma_solve(phi: &SurfaceField, u: f64, c1: f64, c2: f64) -> Result<SurfaceField, SpectralError> {
    let s = 0.5 * (c1 * u + c2);
    solve_surface_helmholtz(0.0, -1.0, &phi.scale(s))
}

/// One linearly implicit step; `sigma` and `W'` are explicit, the latter
/// stabilized. The zero mode is never touched, so `phi` stays mean-free.
pub fn step_ok(state: &OkState, m: &OkModel) -> Result<OkState, DynamicsError> {
    let p = &m.params;
    let dt = p.dt;
    let geom = state.phi.geometry();
    let sigma = sigma_solve(&state.phi, state.u, m.c1, m.c2)?;
    let force = model::well_force(&state.phi.offset(state.phi_mean));
    let (ph, sh, fh) = (state.phi.coeffs(), sigma.coeffs(), force.coeffs());
    let lam = geom.eigenvalues();
    let mut out = vec![Complex64::new(0.0, 0.0); ph.len()];
    for i in 1..ph.len() {
        let l = 0.8 * dt * lam[i];
        let rhs = ph[i] + (ph[i] * p.stab - fh[i] / p.eps + sh[i] * 0.5) * l;
        out[i] = rhs / (1.0 + l * (p.eps * lam[i] + p.stab));
    }
    let area = geom.area();
    let big_u = m.volume * state.u;
    let u = state.u + dt * u_rhs_closed_form(big_u, m.c1, m.c2, m.mass, m.volume, area) / m.volume;
    let next = OkState { t: state.t + dt, phi: SurfaceField::from_coeffs(geom, out)?, u, phi_mean: state.phi_mean };
    if !next.phi.is_finite() || !u.is_finite() {
        return Err(DynamicsError::NonFinite { t: next.t, field: "phi" });
    }
    Ok(next)
}

/// Shared data of a `delta`-sweep: every member starts from the same
/// phase field and `u`, with membrane cholesterol balanced so that
/// `theta_Gamma(0) = 0`.
#[derive(Clone, Debug)]
pub struct DeltaSweepSetup {
    /// Membrane parameters; `delta` is overridden per member.
    pub params: ModelParams,
    pub c1: f64,
    pub c2: f64,
    pub volume: f64,
    pub mass: f64,
    pub u0: f64,
    pub phi0: SurfaceField,
    pub t_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaSweepRow {
    pub delta: f64,
    pub error_l2: f64,
    pub u_final: f64,
}

impl DeltaSweepSetup {
    pub fn steps(&self) -> usize {
        (self.t_end / self.params.dt).round() as usize
    }

    /// Reduced-model initial state: `v = v_mean + phi_Gamma / 2`.
    pub fn reduced_initial(&self) -> ReducedState {
        let area = self.phi0.geometry().area();
        let v_mean = (self.mass - self.volume * self.u0) / area;
        let v = self.phi0.mean_free().scale(0.5).offset(v_mean);
        ReducedState { t: 0.0, u: self.u0, phi: self.phi0.clone(), v }
    }

    pub fn run_reduced(&self, delta: f64) -> Result<ReducedState, DynamicsError> {
        let law = ExchangeLaw::NonEquilibrium { c1: self.c1, c2: self.c2 };
        let model = ReducedModel::new(self.params.with_delta(delta)?, law, self.volume)?;
        let mut s = self.reduced_initial();
        for _ in 0..self.steps() {
            s = model.step(&s)?;
        }
        Ok(s)
    }

    pub fn run_ok(&self) -> Result<OkState, DynamicsError> {
        let model = OkModel { params: self.params, c1: self.c1, c2: self.c2, volume: self.volume, mass: self.mass };
        let mut s = OkState::new(&self.phi0, self.u0);
        for _ in 0..self.steps() {
            s = model.step(&s)?;
        }
        Ok(s)
    }
}

/// `e(delta) = || phi_Gamma^delta(T) - phi_Gamma^OK(T) ||_L2` for each
/// `delta`; members run concurrently under `exec`.
pub fn delta_sweep(
    setup: &DeltaSweepSetup,
    deltas: &[f64],
    exec: Execution,
) -> Result<Vec<DeltaSweepRow>, DynamicsError> {
    let limit = setup.run_ok()?;
    exec.map(deltas.to_vec(), |delta| {
        let s = setup.run_reduced(delta)?;
        Ok(DeltaSweepRow { delta, error_l2: s.phi.mean_free().sub(&limit.phi)?.l2_norm(), u_final: s.u })
    })
    .into_iter()
    .collect()
}
