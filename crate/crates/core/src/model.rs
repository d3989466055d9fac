//! Parameters, chemical potentials and the linearly implicit surface update
//! shared by the full and reduced models.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{SpectralError, SurfaceField};

/// Smallest admissible interface width or affinity parameter.
pub const MIN_SCALE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite {field} at t = {t}")]
    NonFinite { t: f64, field: &'static str },
    #[error("step size {dt:e} exceeds explicit stability limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },
    #[error("operation requires the non-equilibrium exchange law")]
    UnsupportedLaw,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `W(s) = (1 - s^2)^2`.
#[inline]
pub fn double_well(s: f64) -> f64 {
    let a = 1.0 - s * s;
    a * a
}

/// `W'(s) = 4 s^3 - 4 s`.
#[inline]
pub fn double_well_prime(s: f64) -> f64 {
    4.0 * s * s * s - 4.0 * s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface width `eps`.
    pub eps: f64,
    /// Lipid-cholesterol affinity parameter `delta`.
    pub delta: f64,
    /// Cytosolic diffusivity `D`.
    pub diffusivity: f64,
    /// Time step.
    pub dt: f64,
    /// Stabilization constant of the explicit double-well term.
    pub stab: f64,
}

impl ModelParams {
    /// Parameters with the default stabilization `4 / eps`, which is
    /// `max |W''| / (2 eps)` over `[-1, 1]`.
    pub fn new(eps: f64, delta: f64, diffusivity: f64, dt: f64) -> Result<Self, DynamicsError> {
        let p = ModelParams { eps, delta, diffusivity, dt, stab: 4.0 / eps };
        p.validate()?;
        Ok(p)
    }

    pub fn with_stab(mut self, stab: f64) -> Result<Self, DynamicsError> {
        self.stab = stab;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self, DynamicsError> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, DynamicsError> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_diffusivity(mut self, diffusivity: f64) -> Result<Self, DynamicsError> {
        self.diffusivity = diffusivity;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidParams(msg));
        if !(self.eps >= MIN_SCALE && self.eps.is_finite()) {
            return bad(format!("eps must be at least {MIN_SCALE:e}, got {}", self.eps));
        }
        if !(self.delta >= MIN_SCALE && self.delta.is_finite()) {
            return bad(format!("delta must be at least {MIN_SCALE:e}, got {}", self.delta));
        }
        if !(self.diffusivity > 0.0 && self.diffusivity.is_finite()) {
            return bad(format!("diffusivity must be positive, got {}", self.diffusivity));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.stab >= 0.0 && self.stab.is_finite()) {
            return bad(format!("stabilization must be non-negative, got {}", self.stab));
        }
        Ok(())
    }
}

/// Affinity variable `2 v - 1 - phi`.
pub fn affinity(phi: &SurfaceField, v: &SurfaceField) -> Result<SurfaceField, SpectralError> {
    v.zip_map(phi, |v, phi| 2.0 * v - 1.0 - phi)
}

/// Dealiased `W'(phi)`.
pub fn well_force(phi: &SurfaceField) -> SurfaceField {
    phi.map(double_well_prime).dealiased()
}

/// Chemical potentials `(mu, theta)` of the surface free energy.
///
/// `mu = -eps Lap phi + W'(phi)/eps - (2v - 1 - phi)/delta`,
/// `theta = (2/delta)(2v - 1 - phi)`.
pub fn potentials(
    phi: &SurfaceField,
    v: &SurfaceField,
    p: &ModelParams,
) -> Result<(SurfaceField, SurfaceField), SpectralError> {
    let aff = affinity(phi, v)?;
    let lap = phi.laplacian();
    let force = well_force(phi);
    let mu = SurfaceField::from_values(
        phi.geometry(),
        lap.values()
            .iter()
            .zip(force.values())
            .zip(aff.values())
            .map(|((l, f), a)| -p.eps * l + f / p.eps - a / p.delta)
            .collect(),
    )?;
    let theta = aff.scale(2.0 / p.delta);
    Ok((mu, theta))
}

/// Surface free energy
/// `F = int eps/2 |grad phi|^2 + W(phi)/eps + (2v - 1 - phi)^2 / (2 delta)`.
pub fn free_energy(phi: &SurfaceField, v: &SurfaceField, p: &ModelParams) -> Result<f64, SpectralError> {
    let area = phi.geometry().area();
    let grad = phi.gradient_norm_sq();
    let well = phi.map(double_well).mean() * area;
    let aff = affinity(phi, v)?;
    let aff_sq = aff.map(|a| a * a).mean() * area;
    Ok(0.5 * p.eps * grad + well / p.eps + aff_sq / (2.0 * p.delta))
}

/// One linearly implicit step of the membrane equations given the shared
/// exchange coefficients `q_hat`.
///
/// Per horizontal mode with `lam = |k|^2` the update solves
///
/// ```text
/// phi' = phi - dt lam mu'
/// mu'  = eps lam phi' + S (phi' - phi) + W'(phi)^/eps - (2v' - 1 - phi')/delta
/// v'   = v - dt lam theta' + dt q^
/// ```
///
/// in the unknowns `(phi', w')` with `w = 2v - phi`, so the affinity term
/// never forms a difference of nearly equal numbers at small `delta`.
pub(crate) fn surface_step(
    phi: &SurfaceField,
    v: &SurfaceField,
    q_hat: &[Complex64],
    p: &ModelParams,
) -> Result<(SurfaceField, SurfaceField), SpectralError> {
    let geom = phi.geometry();
    let force = well_force(phi);
    let (ph, vh, fh) = (phi.coeffs(), v.coeffs(), force.coeffs());
    let lam = geom.eigenvalues();
    let dt = p.dt;
    let mut phi_new = Vec::with_capacity(ph.len());
    let mut v_new = Vec::with_capacity(ph.len());
    phi_new.push(ph[0]);
    v_new.push(vh[0] + q_hat[0] * dt);
    for i in 1..ph.len() {
        let l = lam[i];
        let a11 = 1.0 + dt * l * (p.eps * l + p.stab);
        let a12 = -dt * l / p.delta;
        let b22 = 1.0 + 4.0 * dt * l / p.delta;
        let rhs1 = ph[i] + (ph[i] * p.stab - fh[i] / p.eps) * (dt * l);
        let rhs2 = vh[i] * 2.0 + q_hat[i] * (2.0 * dt);
        let det = a11 * b22 - a12;
        let phi_i = (rhs1 * b22 - rhs2 * a12) / det;
        let w_i = (rhs2 * a11 - rhs1) / det;
        phi_new.push(phi_i);
        v_new.push((w_i + phi_i) * 0.5);
    }
    Ok((SurfaceField::from_coeffs(geom, phi_new)?, SurfaceField::from_coeffs(geom, v_new)?))
}
