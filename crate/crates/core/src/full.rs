//! The coupled bulk-surface system: membrane Cahn-Hilliard dynamics for
//! `phi`, membrane cholesterol `v` with exchange source `q`, and cytosolic
//! diffusion of `u` in the slab with flux boundary condition
//! `-D du/dnu = q` on the membrane face.

use num_complex::Complex64;
use serde::Serialize;

use crate::exchange::ExchangeLaw;
use crate::model::{self, DynamicsError, ModelParams};
use crate::spectral::{BulkField, SlabGeometry, SpectralError, SurfaceField};

/// Real-axis stability bound of the classical fourth-order Runge-Kutta method.
const RK4_STABILITY: f64 = 2.785;

#[derive(Clone, Debug)]
pub struct FullState {
    pub t: f64,
    pub u: BulkField,
    pub phi: SurfaceField,
    pub v: SurfaceField,
}

impl FullState {
    pub fn new(u: BulkField, phi: SurfaceField, v: SurfaceField) -> Result<Self, SpectralError> {
        let base = u.geometry().base();
        if base != phi.geometry() || base != v.geometry() {
            return Err(SpectralError::GeometryMismatch {
                left: (base.length(), base.n()),
                right: (phi.geometry().length(), phi.geometry().n()),
            });
        }
        Ok(FullState { t: 0.0, u, phi, v })
    }

    pub fn geometry(&self) -> &SlabGeometry {
        self.u.geometry()
    }

    pub fn check_finite(&self) -> Result<(), DynamicsError> {
        let t = self.t;
        if !self.phi.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "phi" });
        }
        if !self.v.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "v" });
        }
        if !self.u.is_finite() {
            return Err(DynamicsError::NonFinite { t, field: "u" });
        }
        Ok(())
    }
}

/// Conserved quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassReport {
    /// `m = int_Gamma phi`.
    pub lipid: f64,
    /// `M = int_B u + int_Gamma v`.
    pub cholesterol: f64,
}

/// Energy balance terms of a single state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub free_energy: f64,
    /// `int_B u^2 / 2`.
    pub bulk_energy: f64,
    pub total: f64,
    /// `int_Gamma |grad mu|^2`.
    pub grad_mu: f64,
    /// `int_Gamma |grad theta|^2`.
    pub grad_theta: f64,
    /// `D int_B |grad u|^2`.
    pub grad_u: f64,
    /// `int_Gamma q (theta - u)`.
    pub exchange: f64,
}

impl EnergyReport {
    pub fn dissipation(&self) -> f64 {
        self.grad_mu + self.grad_theta + self.grad_u
    }
}

pub fn masses(state: &FullState) -> MassReport {
    MassReport { lipid: state.phi.integral(), cholesterol: state.u.integral() + state.v.integral() }
}

/// `q(u|_Gamma, v, theta)` at the given state.
pub fn exchange_flux(state: &FullState, p: &ModelParams, law: &ExchangeLaw) -> Result<SurfaceField, SpectralError> {
    let theta = model::affinity(&state.phi, &state.v)?.scale(2.0 / p.delta);
    law.eval(&state.u.trace(), &state.v, &theta)
}

pub fn energy(state: &FullState, p: &ModelParams, law: &ExchangeLaw) -> Result<EnergyReport, SpectralError> {
    let (mu, theta) = model::potentials(&state.phi, &state.v, p)?;
    let trace = state.u.trace();
    let q = law.eval(&trace, &state.v, &theta)?;
    let free_energy = model::free_energy(&state.phi, &state.v, p)?;
    let bulk_energy = 0.5 * state.u.l2_norm_sq();
    Ok(EnergyReport {
        free_energy,
        bulk_energy,
        total: free_energy + bulk_energy,
        grad_mu: mu.gradient_norm_sq(),
        grad_theta: theta.gradient_norm_sq(),
        grad_u: p.diffusivity * state.u.gradient_norm_sq(),
        exchange: q.inner(&theta.sub(&trace)?)?,
    })
}

/// Galerkin weight of the membrane flux in the equation for vertical mode
/// `m`: `1 / (H w_m)` with `w_m = (1/H) int cos^2`.
fn boundary_weight(geom: &SlabGeometry, m: usize) -> f64 {
    1.0 / (geom.depth() * geom.vertical_weight(m))
}

/// One first-order linearly implicit step.
///
/// `W'(phi)` and `q` are explicit, all linear terms implicit. The same
/// coefficients `q^` feed the membrane and bulk updates, so
/// `int_B u + int_Gamma v` telescopes exactly.
pub fn step_imex(state: &FullState, p: &ModelParams, law: &ExchangeLaw) -> Result<FullState, DynamicsError> {
    let q = exchange_flux(state, p, law)?;
    let q_hat = q.coeffs();
    let (phi, v) = model::surface_step(&state.phi, &state.v, q_hat, p)?;

    let geom = state.u.geometry();
    let n2 = geom.base().len();
    let lam = geom.base().eigenvalues();
    let mut coeffs = Vec::with_capacity(geom.len());
    for m in 0..geom.modes() {
        let beta = boundary_weight(geom, m);
        let kz2 = geom.vertical_eigenvalue(m);
        for (k, a) in state.u.layer_coeffs(m).iter().enumerate() {
            let denom = 1.0 + p.dt * p.diffusivity * (lam[k] + kz2);
            coeffs.push((a - q_hat[k] * (p.dt * beta)) / denom);
        }
    }
    debug_assert_eq!(coeffs.len(), n2 * geom.modes());
    let next = FullState { t: state.t + p.dt, u: BulkField::from_coeffs(geom, coeffs)?, phi, v };
    next.check_finite()?;
    Ok(next)
}

/// Conservative bound on the spectral radius of the semi-discrete system.
pub fn stiffness_bound(geom: &SlabGeometry, p: &ModelParams, law: &ExchangeLaw) -> f64 {
    let lam_max = geom.base().eigenvalues().iter().copied().fold(0.0, f64::max);
    let membrane = lam_max * (p.eps * lam_max + 3.0 / p.delta + 8.0 / p.eps);
    let cholesterol = 6.0 * lam_max / p.delta;
    let bulk = p.diffusivity * (lam_max + geom.vertical_eigenvalue(geom.modes() - 1));
    let rate = match *law {
        ExchangeLaw::Equilibrium { c } => c * 4.0 / p.delta,
        ExchangeLaw::NonEquilibrium { c1, c2 } | ExchangeLaw::CutoffNonEquilibrium { c1, c2, .. } => c1 + c2,
    };
    membrane.max(cholesterol).max(bulk) + rate
}

struct Coefficients {
    phi: Vec<Complex64>,
    v: Vec<Complex64>,
    u: Vec<Complex64>,
}

impl Coefficients {
    fn axpy(&self, a: f64, other: &Coefficients) -> Coefficients {
        let f = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(x, y)| x + y * a).collect();
        Coefficients { phi: f(&self.phi, &other.phi), v: f(&self.v, &other.v), u: f(&self.u, &other.u) }
    }
}

fn galerkin_rhs(
    c: &Coefficients,
    geom: &SlabGeometry,
    p: &ModelParams,
    law: &ExchangeLaw,
) -> Result<Coefficients, SpectralError> {
    let base = geom.base();
    let phi = SurfaceField::from_coeffs(base, c.phi.clone())?;
    let v = SurfaceField::from_coeffs(base, c.v.clone())?;
    let u = BulkField::from_coeffs(geom, c.u.clone())?;
    let force = model::well_force(&phi);
    let theta = model::affinity(&phi, &v)?.scale(2.0 / p.delta);
    let q = law.eval(&u.trace(), &v, &theta)?;
    let (fh, th, qh) = (force.coeffs(), theta.coeffs(), q.coeffs());
    let lam = base.eigenvalues();

    let mut dphi = Vec::with_capacity(lam.len());
    let mut dv = Vec::with_capacity(lam.len());
    for i in 0..lam.len() {
        let l = lam[i];
        let aff = th[i] * (0.5 * p.delta);
        let mu = c.phi[i] * (p.eps * l) + fh[i] / p.eps - aff / p.delta;
        dphi.push(-mu * l);
        dv.push(-th[i] * l + qh[i]);
    }
    let mut du = Vec::with_capacity(c.u.len());
    for m in 0..geom.modes() {
        let beta = boundary_weight(geom, m);
        let kz2 = geom.vertical_eigenvalue(m);
        let n2 = base.len();
        for k in 0..n2 {
            let a = c.u[m * n2 + k];
            du.push(-a * (p.diffusivity * (lam[k] + kz2)) - qh[k] * beta);
        }
    }
    Ok(Coefficients { phi: dphi, v: dv, u: du })
}

/// Classical RK4 on the Galerkin ODE system for the coefficients: the
/// brute-force reference trajectory for [`step_imex`].
///
/// Only intended for small grids. Returns [`DynamicsError::StepSize`] when
/// `dt_ref` lies outside the explicit stability region.
pub fn reference_rk4(
    state: &FullState,
    p: &ModelParams,
    law: &ExchangeLaw,
    dt_ref: f64,
    steps: usize,
) -> Result<FullState, DynamicsError> {
    let geom = state.u.geometry().clone();
    let limit = RK4_STABILITY / stiffness_bound(&geom, p, law);
    if !(dt_ref > 0.0) || dt_ref > limit {
        return Err(DynamicsError::StepSize { dt: dt_ref, limit });
    }
    let mut c =
        Coefficients { phi: state.phi.coeffs().to_vec(), v: state.v.coeffs().to_vec(), u: state.u.coeffs().to_vec() };
    let mut t = state.t;
    for _ in 0..steps {
        let k1 = galerkin_rhs(&c, &geom, p, law)?;
        let k2 = galerkin_rhs(&c.axpy(0.5 * dt_ref, &k1), &geom, p, law)?;
        let k3 = galerkin_rhs(&c.axpy(0.5 * dt_ref, &k2), &geom, p, law)?;
        let k4 = galerkin_rhs(&c.axpy(dt_ref, &k3), &geom, p, law)?;
        c = c.axpy(dt_ref / 6.0, &k1).axpy(dt_ref / 3.0, &k2).axpy(dt_ref / 3.0, &k3).axpy(dt_ref / 6.0, &k4);
        t += dt_ref;
        if c.phi.iter().chain(&c.v).chain(&c.u).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(DynamicsError::NonFinite { t, field: "coefficients" });
        }
    }
    let base = geom.base();
    Ok(FullState {
        t,
        u: BulkField::from_coeffs(&geom, c.u)?,
        phi: SurfaceField::from_coeffs(base, c.phi)?,
        v: SurfaceField::from_coeffs(base, c.v)?,
    })
}

/// Discrete energy balance between two consecutive states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `(E_total(next) - E_total(prev)) / dt`.
    pub rate: f64,
    /// Midpoint average of `grad_mu + grad_theta + grad_u`.
    pub dissipation: f64,
    /// Midpoint average of `int q (theta - u)`.
    pub exchange: f64,
    /// `rate + dissipation - exchange`; vanishes in the continuous limit.
    pub residual: f64,
    /// For the equilibrium law: `-c int (theta - u)^2` at the later state.
    pub equilibrium_exchange: Option<f64>,
}

pub fn dissipation_check(
    prev: &FullState,
    next: &FullState,
    p: &ModelParams,
    law: &ExchangeLaw,
) -> Result<DissipationReport, DynamicsError> {
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidParams(format!("states must be consecutive in time, got dt = {dt}")));
    }
    let a = energy(prev, p, law)?;
    let b = energy(next, p, law)?;
    let rate = (b.total - a.total) / dt;
    let dissipation = 0.5 * (a.dissipation() + b.dissipation());
    let exchange = 0.5 * (a.exchange + b.exchange);
    let equilibrium_exchange = match law {
        ExchangeLaw::Equilibrium { .. } => Some(b.exchange),
        _ => None,
    };
    Ok(DissipationReport { rate, dissipation, exchange, residual: rate + dissipation - exchange, equilibrium_exchange })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slab(n: usize, mz: usize) -> SlabGeometry {
        SlabGeometry::new(TorusGeometry::new(1.0, n).unwrap(), 1.0, mz).unwrap()
    }

    fn smooth_state(g: &SlabGeometry, seed: u64) -> FullState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = g.base();
        let mut smooth = |mean: f64, amp: f64| {
            let coef: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.random_range(-amp..amp),
                        rng.random_range(-amp..amp),
                        rng.random_range(0.0..6.3),
                        rng.random_range(0.0..6.3),
                    )
                })
                .collect();
            SurfaceField::from_fn(base, move |x, y| {
                let tau = 2.0 * std::f64::consts::PI;
                mean + coef[0].0 * (tau * x + coef[0].2).cos()
                    + coef[1].0 * (tau * y + coef[1].3).cos()
                    + coef[2].1 * (tau * (x + y) + coef[2].2).sin()
                    + coef[3].1 * (tau * (x - y) + coef[3].3).sin()
            })
        };
        let phi = smooth(-0.3, 0.2);
        let v = smooth(0.4, 0.1);
        let u0 = smooth(0.6, 0.05);
        let u1 = smooth(0.0, 0.05);
        let u = BulkField::from_layers(g, &[u0, u1]).unwrap();
        FullState::new(u, phi, v).unwrap()
    }

    #[test]
    fn homogeneous_steady_state_is_fixed() {
        let g = slab(8, 4);
        let base = g.base();
        let state = FullState::new(BulkField::zeros(&g), SurfaceField::constant(base, -1.0), SurfaceField::zeros(base))
            .unwrap();
        let p = ModelParams::new(0.04, 0.1, 1.0, 1e-3).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let next = step_imex(&state, &p, &law).unwrap();
        assert!(next.phi.max_diff(&state.phi).unwrap() < 1e-13);
        assert!(next.v.max_diff(&state.v).unwrap() < 1e-13);
        assert!(next.u.coeffs().iter().all(|c| c.norm() < 1e-13));
        let rk = reference_rk4(&state, &p, &law, 1e-7, 50).unwrap();
        assert!(rk.phi.max_diff(&state.phi).unwrap() < 1e-12);
    }

    #[test]
    fn constant_u_is_untouched_without_exchange() {
        let g = slab(8, 4);
        let mut state = smooth_state(&g, 1);
        state.u = BulkField::constant(&g, 0.37);
        let p = ModelParams::new(0.1, 0.5, 2.0, 1e-3).unwrap();
        let law = ExchangeLaw::Equilibrium { c: 0.0 };
        let next = step_imex(&state, &p, &law).unwrap();
        assert!((next.u.coeffs()[0].re - 0.37).abs() < 1e-15);
        assert!(next.u.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn masses_examples() {
        let g = slab(8, 4);
        let base = g.base();
        let state = FullState::new(
            BulkField::constant(&g, 0.3),
            SurfaceField::constant(base, -1.0),
            SurfaceField::constant(base, 0.2),
        )
        .unwrap();
        let m = masses(&state);
        assert!((m.lipid + 1.0).abs() < 1e-15);
        assert!((m.cholesterol - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_conserves_both_masses() {
        let g = slab(16, 6);
        let mut state = smooth_state(&g, 2);
        let p = ModelParams::new(0.05, 0.1, 3.0, 1e-4).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let m0 = masses(&state);
        for _ in 0..50 {
            state = step_imex(&state, &p, &law).unwrap();
            let m = masses(&state);
            assert!((m.lipid - m0.lipid).abs() < 1e-12);
            assert!((m.cholesterol - m0.cholesterol).abs() < 1e-10 * (1.0 + m0.cholesterol.abs()));
        }
    }

    #[test]
    fn rk4_conserves_masses_and_is_fourth_order() {
        let g = slab(8, 4);
        let state = smooth_state(&g, 3);
        let p = ModelParams::new(0.1, 0.5, 1.0, 1e-4).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let m0 = masses(&state);
        let t = 2e-3;
        let run = |dt: f64| reference_rk4(&state, &p, &law, dt, (t / dt).round() as usize).unwrap();
        let coarse = run(1e-5);
        let mid = run(5e-6);
        let fine = run(2.5e-6);
        let m = masses(&fine);
        assert!((m.lipid - m0.lipid).abs() < 1e-11);
        assert!((m.cholesterol - m0.cholesterol).abs() < 1e-11);
        let e1 = coarse.phi.max_diff(&mid.phi).unwrap();
        let e2 = mid.phi.max_diff(&fine.phi).unwrap();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "Richardson ratio {ratio} (e1={e1:e}, e2={e2:e})");
    }

    #[test]
    fn rk4_rejects_unstable_step() {
        let g = slab(8, 4);
        let state = smooth_state(&g, 4);
        let p = ModelParams::new(0.04, 0.1, 1.0, 1e-4).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        assert!(matches!(reference_rk4(&state, &p, &law, 1e-3, 1), Err(DynamicsError::StepSize { .. })));
    }

    #[test]
    fn stationary_state_has_zero_residual() {
        let g = slab(8, 4);
        let base = g.base();
        let mut state =
            FullState::new(BulkField::zeros(&g), SurfaceField::constant(base, -1.0), SurfaceField::zeros(base))
                .unwrap();
        let p = ModelParams::new(0.04, 0.1, 1.0, 1e-3).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let next = step_imex(&state, &p, &law).unwrap();
        state.t = 0.0;
        let r = dissipation_check(&state, &next, &p, &law).unwrap();
        assert!(r.residual.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_exchange_is_nonpositive() {
        let g = slab(16, 4);
        let state = smooth_state(&g, 5);
        let p = ModelParams::new(0.05, 0.2, 1.0, 1e-4).unwrap();
        let law = ExchangeLaw::Equilibrium { c: 1.5 };
        let next = step_imex(&state, &p, &law).unwrap();
        let r = dissipation_check(&state, &next, &p, &law).unwrap();
        assert!(r.equilibrium_exchange.unwrap() <= 1e-12);
        let e = energy(&state, &p, &law).unwrap();
        assert!(e.exchange <= 1e-12);
        assert!(e.free_energy >= 0.0);
    }

    #[test]
    fn dissipation_residual_shrinks_with_dt() {
        let g = slab(16, 4);
        let state = smooth_state(&g, 6);
        let law = ExchangeLaw::Equilibrium { c: 1.0 };
        let residual = |dt: f64| {
            let p = ModelParams::new(0.1, 0.5, 1.0, dt).unwrap();
            let next = step_imex(&state, &p, &law).unwrap();
            dissipation_check(&state, &next, &p, &law).unwrap().residual.abs()
        };
        let r1 = residual(1e-5);
        let r2 = residual(5e-6);
        let r3 = residual(2.5e-6);
        assert!(r2 < r1 && r3 < r2, "{r1:e} {r2:e} {r3:e}");
        let order = (r1 / r3).log2() / 2.0;
        assert!(order > 0.8, "observed order {order}");
    }
}
