//! The large-diffusivity limit: membrane equations coupled to a spatially
//! constant cytosolic concentration `u(t)` obeying
//! `du/dt = -(1/|B|) int_Gamma q(u, v)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::exchange::ExchangeLaw;
use crate::model::{self, DynamicsError, ModelParams};
use crate::spectral::{SpectralError, SurfaceField};

#[derive(Clone, Debug)]
pub struct ReducedState {
    pub t: f64,
    pub u: f64,
    pub phi: SurfaceField,
    pub v: SurfaceField,
}

impl ReducedState {
    pub fn new(u: f64, phi: SurfaceField, v: SurfaceField) -> Result<Self, SpectralError> {
        phi.geometry().check(v.geometry())?;
        Ok(ReducedState { t: 0.0, u, phi, v })
    }

    pub fn check_finite(&self) -> Result<(), DynamicsError> {
        let t = self.t;
        if !self.u.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "u" });
        }
        if !self.phi.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "phi" });
        }
        if !self.v.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "v" });
        }
        Ok(())
    }
}

/// Parameters of a reduced run: the membrane model, the exchange law and
/// the bulk volume `|B|` that converts membrane flux into a rate for `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedModel {
    pub params: ModelParams,
    pub law: ExchangeLaw,
    pub volume: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedReport {
    pub lipid: f64,
    pub cholesterol: f64,
    pub free_energy: f64,
    /// `F + |B| u^2 / 2`.
    pub total: f64,
    pub grad_mu: f64,
    pub grad_theta: f64,
    pub exchange: f64,
    pub min_phi: f64,
    pub max_phi: f64,
}

impl ReducedModel {
    pub fn new(params: ModelParams, law: ExchangeLaw, volume: f64) -> Result<Self, DynamicsError> {
        params.validate()?;
        if !law.is_valid() {
            return Err(DynamicsError::InvalidParams(format!("invalid exchange law {law:?}")));
        }
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(DynamicsError::InvalidParams(format!("bulk volume must be positive, got {volume}")));
        }
        Ok(ReducedModel { params, law, volume })
    }

    pub fn with_params(self, params: ModelParams) -> Self {
        ReducedModel { params, ..self }
    }

    /// `q(u, v)` with the scalar `u`.
    pub fn exchange_flux(&self, state: &ReducedState) -> Result<SurfaceField, SpectralError> {
        let theta = model::affinity(&state.phi, &state.v)?.scale(2.0 / self.params.delta);
        self.law.eval_uniform(state.u, &state.v, &theta)
    }

    /// Same linearly implicit membrane update as the full model; `u` takes
    /// the explicit Euler increment of the same `int q`, so
    /// `|B| u + int_Gamma v` telescopes exactly.
    pub fn step(&self, state: &ReducedState) -> Result<ReducedState, DynamicsError> {
        let p = &self.params;
        let q = self.exchange_flux(state)?;
        let q_hat = q.coeffs();
        let (phi, v) = model::surface_step(&state.phi, &state.v, q_hat, p)?;
        let flux = q_hat[0].re * state.phi.geometry().area();
        let next = ReducedState { t: state.t + p.dt, u: state.u - p.dt * flux / self.volume, phi, v };
        next.check_finite()?;
        Ok(next)
    }

    /// `|B| u + int_Gamma v`.
    pub fn total_cholesterol(&self, state: &ReducedState) -> f64 {
        self.volume * state.u + state.v.integral()
    }

    pub fn report(&self, state: &ReducedState) -> Result<ReducedReport, SpectralError> {
        let p = &self.params;
        let (mu, theta) = model::potentials(&state.phi, &state.v, p)?;
        let q = self.law.eval_uniform(state.u, &state.v, &theta)?;
        let free_energy = model::free_energy(&state.phi, &state.v, p)?;
        Ok(ReducedReport {
            lipid: state.phi.integral(),
            cholesterol: self.total_cholesterol(state),
            free_energy,
            total: free_energy + 0.5 * self.volume * state.u * state.u,
            grad_mu: mu.gradient_norm_sq(),
            grad_theta: theta.gradient_norm_sq(),
            exchange: q.inner(&theta.offset(-state.u))?,
            min_phi: state.phi.min(),
            max_phi: state.phi.max(),
        })
    }
}

/// Right-hand side of the closed ODE for `U = int_B u` under the
/// non-equilibrium law:
/// `dU/dt = -(c1/|B|) U^2 + (c1 (M - |Gamma|)/|B| - c2) U + c2 M`.
pub fn u_rhs_closed_form(big_u: f64, c1: f64, c2: f64, mass: f64, volume: f64, area: f64) -> f64 {
    -(c1 / volume) * big_u * big_u + (c1 * (mass - area) / volume - c2) * big_u + c2 * mass
}

/// The nonnegative zero of [`u_rhs_closed_form`], returned as the
/// concentration `u_inf = U / |B|`, which lies in `[0, M/|B|]`.
pub fn u_fixed_point(c1: f64, c2: f64, mass: f64, volume: f64, area: f64) -> f64 {
    assert!(c1 > 0.0 && c2 > 0.0, "rates must be positive");
    assert!(mass >= 0.0, "cholesterol mass must be nonnegative");
    let a = c1 / volume;
    let b = c1 * (mass - area) / volume - c2;
    let c = c2 * mass;
    let disc = b * b + 4.0 * a * c;
    debug_assert!(disc >= 0.0);
    let root = disc.sqrt();
    // Positive root of -a U^2 + b U + c, in the cancellation-free form.
    let big_u = if b >= 0.0 {
        (b + root) / (2.0 * a)
    } else if root - b > 0.0 {
        2.0 * c / (root - b)
    } else {
        0.0
    };
    big_u / volume
}

/// Mean-value / mean-free split of a reduced state.
#[derive(Clone, Debug)]
pub struct MeanFreeView {
    pub phi: SurfaceField,
    pub v: SurfaceField,
    pub theta: SurfaceField,
    pub mu: SurfaceField,
    pub phi_mean: f64,
    pub v_mean: f64,
    pub theta_mean: f64,
    pub mu_mean: f64,
}

impl MeanFreeView {
    pub fn reconstruct(&self) -> (SurfaceField, SurfaceField) {
        (self.phi.offset(self.phi_mean), self.v.offset(self.v_mean))
    }
}

pub fn decompose_mean_free(
    phi: &SurfaceField,
    v: &SurfaceField,
    p: &ModelParams,
) -> Result<MeanFreeView, SpectralError> {
    let (mu, theta) = model::potentials(phi, v, p)?;
    let phi_mean = phi.mean();
    let v_mean = v.mean();
    let theta_mean = (2.0 / p.delta) * (2.0 * v_mean - 1.0 - phi_mean);
    let mu_mean = model::well_force(phi).mean() / p.eps - 0.5 * theta_mean;
    Ok(MeanFreeView {
        phi: phi.mean_free(),
        v: v.mean_free(),
        theta: theta.mean_free(),
        mu: mu.mean_free(),
        phi_mean,
        v_mean,
        theta_mean,
        mu_mean,
    })
}

/// One step of the non-equilibrium reduced model written for
/// `(phi_Gamma, theta_Gamma)` with `v_Gamma` eliminated through
/// `v_Gamma = (delta/4) theta_Gamma + phi_Gamma / 2`.
///
/// With `kappa = c1 u + c2` the step solves per mode
///
/// ```text
/// phi' = phi - dt lam mu'
/// mu'  = (eps lam + S) phi' - S phi + W'(phi)^/eps - theta'/2
/// (delta/4) theta' + phi'/2 = (delta/4) theta + phi/2 - dt lam theta' + dt R^
/// ```
///
/// where `R = -kappa ((delta/4) theta_Gamma + phi_Gamma/2)` is explicit.
/// `u` advances by the Euler increment of the closed quadratic ODE.
pub fn step_reduced_meanfree(
    view: &MeanFreeView,
    u: f64,
    model_: &ReducedModel,
) -> Result<(MeanFreeView, f64), DynamicsError> {
    let (c1, c2) = match model_.law {
        ExchangeLaw::NonEquilibrium { c1, c2 } => (c1, c2),
        _ => return Err(DynamicsError::UnsupportedLaw),
    };
    let p = &model_.params;
    let dt = p.dt;
    let geom = view.phi.geometry();
    let area = geom.area();
    let volume = model_.volume;
    let mass = volume * u + area * view.v_mean;
    let kappa = c1 * u + c2;

    let phi_full = view.phi.offset(view.phi_mean);
    let force = model::well_force(&phi_full);
    let reaction = view.theta.zip_map(&view.phi, |th, ph| -kappa * (0.25 * p.delta * th + 0.5 * ph))?.dealiased();
    let (ph, th, fh, rh) = (view.phi.coeffs(), view.theta.coeffs(), force.coeffs(), reaction.coeffs());
    let lam = geom.eigenvalues();
    let zero = Complex64::new(0.0, 0.0);
    let mut phi_new = vec![zero; ph.len()];
    let mut theta_new = vec![zero; ph.len()];
    for i in 1..ph.len() {
        let l = lam[i];
        let a11 = 1.0 + dt * l * (p.eps * l + p.stab);
        let a12 = -0.5 * dt * l;
        let a21 = 0.5;
        let a22 = 0.25 * p.delta + dt * l;
        let r1 = ph[i] + (ph[i] * p.stab - fh[i] / p.eps) * (dt * l);
        let r2 = th[i] * (0.25 * p.delta) + ph[i] * 0.5 + rh[i] * dt;
        let det = a11 * a22 - a12 * a21;
        phi_new[i] = (r1 * a22 - r2 * a12) / det;
        theta_new[i] = (r2 * a11 - r1 * a21) / det;
    }
    let phi_g = SurfaceField::from_coeffs(geom, phi_new)?;
    let theta_g = SurfaceField::from_coeffs(geom, theta_new)?;

    let u_new = u + dt * u_rhs_closed_form(volume * u, c1, c2, mass, volume, area) / volume;
    let v_mean = (mass - volume * u_new) / area;
    let v_g = theta_g.zip_map(&phi_g, |th, ph| 0.25 * p.delta * th + 0.5 * ph)?;
    let next = decompose_mean_free(&phi_g.offset(view.phi_mean), &v_g.offset(v_mean), p)?;
    if !(u_new.is_finite() && next.phi.is_finite() && next.theta.is_finite()) {
        return Err(DynamicsError::NonFinite { t: f64::NAN, field: "mean-free state" });
    }
    Ok((next, u_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGeometry;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    fn noneq() -> ExchangeLaw {
        ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 }
    }

    fn random_state(g: &TorusGeometry, seed: u64, u: f64) -> ReducedState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi =
            SurfaceField::from_values(g, (0..g.len()).map(|_| -0.4 + rng.random_range(-0.05..0.05)).collect()).unwrap();
        let v =
            SurfaceField::from_values(g, (0..g.len()).map(|_| 0.3 + rng.random_range(-0.05..0.05)).collect()).unwrap();
        ReducedState::new(u, phi, v).unwrap()
    }

    #[test]
    fn homogeneous_state_is_fixed() {
        let g = TorusGeometry::new(1.0, 16).unwrap();
        let m = ReducedModel::new(ModelParams::new(0.04, 0.1, 1.0, 1e-3).unwrap(), noneq(), 1.0).unwrap();
        let s = ReducedState::new(0.0, SurfaceField::constant(&g, -1.0), SurfaceField::zeros(&g)).unwrap();
        let n = m.step(&s).unwrap();
        assert!(n.u.abs() < 1e-13);
        assert!(n.phi.max_diff(&s.phi).unwrap() < 1e-13);
        assert!(n.v.max_abs() < 1e-13);
    }

    #[test]
    fn initial_u_rate_matches_closed_form() {
        let g = TorusGeometry::new(1.0, 8).unwrap();
        let dt = 1e-6;
        let m = ReducedModel::new(ModelParams::new(0.1, 0.1, 1.0, dt).unwrap(), noneq(), 1.0).unwrap();
        // M = 1 with u = 0 puts all cholesterol on the membrane; balanced v
        // keeps theta = 0 so the membrane stays put.
        let s = ReducedState::new(0.0, SurfaceField::constant(&g, 1.0), SurfaceField::constant(&g, 1.0)).unwrap();
        let n = m.step(&s).unwrap();
        assert!(((n.u - s.u) / dt - 1.0).abs() < 1e-12);
        assert!((u_rhs_closed_form(0.0, 1.0, 1.0, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_law_with_matched_theta_keeps_u() {
        let g = TorusGeometry::new(1.0, 8).unwrap();
        let p = ModelParams::new(0.1, 0.5, 1.0, 1e-3).unwrap();
        let m = ReducedModel::new(p, ExchangeLaw::Equilibrium { c: 2.0 }, 1.0).unwrap();
        // theta = (2/delta)(2v - 1 - phi) = 4 (2*0.45 - 1 + 0.2) = 0.4 = u.
        let s = ReducedState::new(0.4, SurfaceField::constant(&g, -0.2), SurfaceField::constant(&g, 0.45)).unwrap();
        let n = m.step(&s).unwrap();
        assert!((n.u - 0.4).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        assert!((u_rhs_closed_form(0.0, 1.0, 1.0, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(u_rhs_closed_form(GOLDEN, 1.0, 1.0, 1.0, 1.0, 1.0).abs() < 1e-15);
        assert!((u_rhs_closed_form(1.0, 1.0, 1.0, 1.0, 1.0, 1.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_examples() {
        assert!((u_fixed_point(1.0, 1.0, 1.0, 1.0, 1.0) - GOLDEN).abs() < 1e-15);
        assert_eq!(u_fixed_point(1.0, 1.0, 0.0, 1.0, 1.0), 0.0);
        assert!(u_fixed_point(1.0, 1e-12, 0.5, 1.0, 1.0) < 1e-10);
    }

    #[test]
    fn closed_form_matches_surface_integral() {
        let g = TorusGeometry::new(1.3, 16).unwrap();
        let p = ModelParams::new(0.1, 0.2, 1.0, 1e-3).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.7, c2: 0.6 };
        let volume = 0.8;
        let m = ReducedModel::new(p, law, volume).unwrap();
        let s = random_state(&g, 3, 0.35);
        let mass = m.total_cholesterol(&s);
        let q = m.exchange_flux(&s).unwrap();
        let rhs = u_rhs_closed_form(volume * s.u, 1.7, 0.6, mass, volume, g.area());
        assert!((rhs + q.integral()).abs() < 1e-12);
    }

    #[test]
    fn combined_mass_is_conserved() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let m = ReducedModel::new(ModelParams::new(0.05, 0.1, 1.0, 1e-4).unwrap(), noneq(), 1.0).unwrap();
        let mut s = random_state(&g, 4, 0.2);
        let total = m.total_cholesterol(&s);
        let lipid = s.phi.integral();
        for _ in 0..200 {
            s = m.step(&s).unwrap();
            assert!((m.total_cholesterol(&s) - total).abs() < 1e-10 * (1.0 + total.abs()));
            assert!((s.phi.integral() - lipid).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_is_exact() {
        let g = TorusGeometry::new(1.0, 16).unwrap();
        let p = ModelParams::new(0.05, 0.1, 1.0, 1e-4).unwrap();
        let s = random_state(&g, 5, 0.0);
        let view = decompose_mean_free(&s.phi, &s.v, &p).unwrap();
        for f in [&view.phi, &view.v, &view.theta, &view.mu] {
            assert!(f.integral().abs() < 1e-13);
        }
        let (phi, v) = view.reconstruct();
        assert!(phi.max_diff(&s.phi).unwrap() < 1e-13);
        assert!(v.max_diff(&s.v).unwrap() < 1e-13);
        let (mu, theta) = model::potentials(&s.phi, &s.v, &p).unwrap();
        assert!((view.mu_mean - mu.mean()).abs() < 1e-11);
        assert!((view.theta_mean - theta.mean()).abs() < 1e-11);

        let h = ReducedState::new(0.0, SurfaceField::constant(&g, -0.3), SurfaceField::constant(&g, 0.2)).unwrap();
        let view = decompose_mean_free(&h.phi, &h.v, &p).unwrap();
        assert!(view.phi.max_abs() < 1e-15 && view.v.max_abs() < 1e-15 && view.theta.max_abs() < 1e-13);
    }

    #[test]
    fn meanfree_step_rejects_other_laws() {
        let g = TorusGeometry::new(1.0, 8).unwrap();
        let p = ModelParams::new(0.05, 0.1, 1.0, 1e-4).unwrap();
        let m = ReducedModel::new(p, ExchangeLaw::Equilibrium { c: 1.0 }, 1.0).unwrap();
        let view = decompose_mean_free(&SurfaceField::zeros(&g), &SurfaceField::zeros(&g), &p).unwrap();
        assert!(matches!(step_reduced_meanfree(&view, 0.0, &m), Err(DynamicsError::UnsupportedLaw)));
    }

    #[test]
    fn zero_meanfree_data_follows_scalar_ode() {
        let g = TorusGeometry::new(1.0, 8).unwrap();
        let p = ModelParams::new(0.05, 0.1, 1.0, 1e-3).unwrap();
        let m = ReducedModel::new(p, noneq(), 1.0).unwrap();
        let mut view =
            decompose_mean_free(&SurfaceField::constant(&g, -0.4), &SurfaceField::constant(&g, 1.0), &p).unwrap();
        let mut u = 0.0;
        for _ in 0..100 {
            let (next, un) = step_reduced_meanfree(&view, u, &m).unwrap();
            let expect = u + p.dt * u_rhs_closed_form(u, 1.0, 1.0, 1.0, 1.0, 1.0);
            assert!((un - expect).abs() < 1e-15);
            assert!(next.phi.max_abs() < 1e-14 && next.theta.max_abs() < 1e-14);
            view = next;
            u = un;
        }
    }

    #[test]
    fn primitive_and_meanfree_steps_agree() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let p = ModelParams::new(0.04, 0.1, 1.0, 1e-4).unwrap();
        let m = ReducedModel::new(p, noneq(), 1.0).unwrap();
        let mut s = random_state(&g, 6, 0.3);
        let mut view = decompose_mean_free(&s.phi, &s.v, &p).unwrap();
        let mut u = s.u;
        for _ in 0..100 {
            s = m.step(&s).unwrap();
            (view, u) = step_reduced_meanfree(&view, u, &m).unwrap();
        }
        let (phi, v) = view.reconstruct();
        assert!(phi.max_diff(&s.phi).unwrap() < 1e-10);
        assert!(v.max_diff(&s.v).unwrap() < 1e-10);
        assert!((u - s.u).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fixed_point_is_root_in_range(
            c1 in 0.01f64..10.0, c2 in 0.01f64..10.0, mass in 0.0f64..5.0,
            volume in 0.1f64..4.0, area in 0.1f64..4.0,
        ) {
            let u = u_fixed_point(c1, c2, mass, volume, area);
            prop_assert!(u >= 0.0 && u <= mass / volume * (1.0 + 1e-12));
            let scale = 1.0 + c2 * mass + c1 * mass * mass / volume;
            prop_assert!(u_rhs_closed_form(volume * u, c1, c2, mass, volume, area).abs() < 1e-11 * scale);
        }

        #[test]
        fn u_stays_in_invariant_interval(u0 in 0.0f64..1.0, c1 in 0.1f64..5.0, c2 in 0.1f64..5.0) {
            let (mass, volume, area) = (1.0, 1.0, 1.0);
            let dt = 1e-2;
            let mut u = u0;
            for _ in 0..500 {
                u += dt * u_rhs_closed_form(volume * u, c1, c2, mass, volume, area) / volume;
                prop_assert!(u >= -1e-12 && u <= mass / volume + 1e-12);
            }
        }
    }
}
