//! Stationary states of the reduced model.
//!
//! With all time derivatives zero, `mu_Gamma = 0` and the mean-free parts
//! satisfy
//!
//! ```text
//! 0       = -eps Lap phi_Gamma + P W'(m + phi_Gamma)/eps - theta_Gamma/2
//! 0       = Lap theta_Gamma + P q(u, v)
//! theta_Gamma = (2/delta)(2 v_Gamma - phi_Gamma)
//! ```
//!
//! while the means `(u, v_mean)` solve `int q = 0` together with the mass
//! constraint `|B| u + |Gamma| v_mean = M`. The solver alternates a mean
//! value solve, a Poisson solve for `theta_Gamma` and a monotone semilinear
//! solve for `phi_Gamma` in which the convex part `4 s^3` of `W'` is
//! implicit and the linear part `-4 s` lags.

use serde::Serialize;
use thiserror::Error;

use crate::exchange::ExchangeLaw;
use crate::model::{self, DynamicsError, ModelParams};
use crate::reduced::{ReducedModel, ReducedState};
use crate::spectral::{solve_surface_helmholtz, SpectralError, SurfaceField};

const NEWTON_MAX_ITERS: usize = 100;
const PCG_MAX_ITERS: usize = 1000;

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error("invalid stationary configuration: {0}")]
    InvalidConfig(String),
    #[error("mean-value condition violated: {0}")]
    ConditionViolated(String),
    #[error("no convergence after {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64, history: Vec<f64> },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryConfig {
    /// Lipid mass `m = int_Gamma phi`.
    pub lipid_mass: f64,
    /// Combined cholesterol mass `M = int_B u + int_Gamma v`.
    pub mass: f64,
    pub law: ExchangeLaw,
    pub params: ModelParams,
    /// Bulk volume `|B|`.
    pub volume: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Tolerance of the inner semilinear solves.
    pub newton_tol: f64,
}

impl StationaryConfig {
    pub fn new(lipid_mass: f64, mass: f64, law: ExchangeLaw, params: ModelParams, volume: f64) -> Self {
        StationaryConfig {
            lipid_mass,
            mass,
            law,
            params,
            volume,
            damping: 0.5,
            tol: 1e-9,
            max_iters: 20_000,
            newton_tol: 1e-11,
        }
    }

    pub fn validate(&self) -> Result<(), StationaryError> {
        let bad = |s: String| Err(StationaryError::InvalidConfig(s));
        self.params.validate()?;
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if !(self.tol > 0.0) || !(self.newton_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.volume > 0.0) {
            return bad(format!("bulk volume must be positive, got {}", self.volume));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return bad(format!("cholesterol mass must be nonnegative, got {}", self.mass));
        }
        if !self.law.is_valid() {
            return bad(format!("invalid exchange law {:?}", self.law));
        }
        Ok(())
    }
}

/// Sup-norm residuals of the stationary system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StationaryResiduals {
    /// `-eps Lap phi + P W'(phi)/eps - theta/2`.
    pub mu: f64,
    /// `Lap theta + P q`.
    pub v: f64,
    /// `theta - (2/delta)(2 v - phi)`.
    pub theta: f64,
    /// `|int_Gamma q|`.
    pub flux: f64,
    /// `| |B| u + |Gamma| v_mean - M |`.
    pub mass: f64,
}

impl StationaryResiduals {
    pub fn max(&self) -> f64 {
        self.mu.max(self.v).max(self.theta).max(self.flux).max(self.mass)
    }
}

#[derive(Clone, Debug)]
pub struct StationarySolution {
    pub phi: SurfaceField,
    pub v: SurfaceField,
    pub theta: SurfaceField,
    pub phi_mean: f64,
    pub u_mean: f64,
    pub v_mean: f64,
    pub iterations: usize,
    pub residuals: StationaryResiduals,
    /// Maximal residual after each iteration.
    pub history: Vec<f64>,
}

impl StationarySolution {
    /// Embeds a (possibly non-stationary) reduced state; `theta` is taken
    /// from its definition.
    pub fn from_reduced(state: &ReducedState, cfg: &StationaryConfig) -> Result<Self, StationaryError> {
        let theta = model::affinity(&state.phi, &state.v)?.scale(2.0 / cfg.params.delta);
        let mut sol = StationarySolution {
            phi: state.phi.mean_free(),
            v: state.v.mean_free(),
            theta: theta.mean_free(),
            phi_mean: state.phi.mean(),
            u_mean: state.u,
            v_mean: state.v.mean(),
            iterations: 0,
            residuals: StationaryResiduals::default(),
            history: Vec::new(),
        };
        sol.residuals = stationary_residuals(&sol, cfg)?;
        Ok(sol)
    }

    pub fn to_reduced(&self) -> ReducedState {
        ReducedState { t: 0.0, u: self.u_mean, phi: self.phi.offset(self.phi_mean), v: self.v.offset(self.v_mean) }
    }
}

fn theta_full(phi_mean: f64, v_mean: f64, theta: &SurfaceField, delta: f64) -> SurfaceField {
    theta.offset((2.0 / delta) * (2.0 * v_mean - 1.0 - phi_mean))
}

/// Means `(u, v_mean)` with `int_Gamma q(u, v_tilde + v_mean) = 0` and
/// `|B| u + |Gamma| v_mean = M`.
///
/// `phi` and `delta` enter only through `theta` for laws that depend on it.
/// The non-equilibrium law has a closed form; other laws are bracketed on
/// `u in [0, M/|B|]` and bisected.
pub fn mean_value_solve(
    law: &ExchangeLaw,
    v_tilde: &SurfaceField,
    phi: &SurfaceField,
    mass: f64,
    volume: f64,
    delta: f64,
) -> Result<(f64, f64), StationaryError> {
    let area = v_tilde.geometry().area();
    if let ExchangeLaw::NonEquilibrium { c1, c2 } = *law {
        let a = c1 * volume;
        let b = c2 * volume + c1 * area - mass * c1;
        let c = mass * c2;
        let root = (b * b + 4.0 * a * c).sqrt();
        let u = if b <= 0.0 { (root - b) / (2.0 * a) } else { 2.0 * c / (root + b) };
        return Ok((u, c1 * u / (c1 * u + c2)));
    }
    let v_tilde = v_tilde.mean_free();
    let phi_mean = phi.mean();
    let phi_tilde = phi.mean_free();
    let theta_tilde = v_tilde.scale(2.0).sub(&phi_tilde)?.scale(2.0 / delta);
    let flux = |u: f64| -> Result<f64, SpectralError> {
        let v_mean = (mass - volume * u) / area;
        let theta = theta_full(phi_mean, v_mean, &theta_tilde, delta);
        Ok(law.eval_uniform(u, &v_tilde.offset(v_mean), &theta)?.integral())
    };
    let (mut lo, mut hi) = (0.0, mass / volume);
    let (f_lo, f_hi) = (flux(lo)?, flux(hi)?);
    let finish = |u: f64| (u, (mass - volume * u) / area);
    if f_lo == 0.0 {
        return Ok(finish(lo));
    }
    if f_hi == 0.0 {
        return Ok(finish(hi));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(StationaryError::ConditionViolated(format!(
            "int q has the same sign at u = 0 ({f_lo:e}) and u = M/|B| ({f_hi:e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = flux(mid)?;
        if f == 0.0 {
            return Ok(finish(mid));
        }
        if f.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = if flux(lo)?.abs() <= flux(hi)?.abs() { lo } else { hi };
    Ok(finish(u))
}

/// Solves `-eps Lap phi + P (4 (m + phi)^3)/eps = f` for mean-free `phi`.
///
/// The operator is the gradient of the strictly convex functional
/// `eps/2 |grad phi|^2 + (m + phi)^4/eps - f phi`, so Newton's method with
/// an Armijo line search on it converges to the unique solution from any
/// start. Jacobian systems are solved by conjugate gradients preconditioned
/// with `-eps Lap + mean(12 (m + phi)^2)/eps`. The cubic is dealiased, so
/// modes beyond the two-thirds cutoff decouple and are solved directly.
pub fn newton_semilinear(
    f: &SurfaceField,
    eps: f64,
    phi_mean: f64,
    tol: f64,
    init: Option<&SurfaceField>,
) -> Result<SurfaceField, StationaryError> {
    let geom = f.geometry();
    let lam = geom.eigenvalues();
    let f = f.mean_free();
    let high = f.spectral_map(|i| if i == 0 || geom.is_resolved(i) { 0.0 } else { 1.0 / (eps * lam[i]) });
    let low = |x: &SurfaceField| x.dealiased().mean_free();
    let cube = |phi: &SurfaceField| phi.map(|s| 4.0 * (phi_mean + s).powi(3)).dealiased().mean_free();
    let residual = |phi: &SurfaceField| -> Result<SurfaceField, SpectralError> {
        phi.laplacian().scale(-eps).add(&cube(phi).scale(1.0 / eps))?.sub(&f)
    };
    let area = geom.area();
    let functional = |phi: &SurfaceField| -> Result<f64, SpectralError> {
        let quartic = phi.map(|s| (phi_mean + s).powi(4)).mean() * area;
        Ok(0.5 * eps * phi.gradient_norm_sq() + quartic / eps - f.inner(phi)?)
    };

    let mut phi = match init {
        Some(x) => low(x).add(&high)?,
        None => high.clone(),
    };
    let mut history = Vec::new();
    let mut r = residual(&phi)?;
    for _ in 0..NEWTON_MAX_ITERS {
        let res = r.max_abs();
        history.push(res);
        if res <= tol {
            return Ok(phi);
        }
        let weight = phi.map(|s| 12.0 * (phi_mean + s).powi(2) / eps);
        let shift = weight.mean();
        let jac = |h: &SurfaceField| -> Result<SurfaceField, SpectralError> {
            Ok(low(&h.laplacian().scale(-eps).add(&h.zip_map(&weight, |a, w| a * w)?)?))
        };
        let precond = |x: &SurfaceField| {
            x.spectral_map(|i| if i == 0 || !geom.is_resolved(i) { 0.0 } else { 1.0 / (eps * lam[i] + shift) })
        };
        let grad = low(&r);
        let step = pcg(&jac, &precond, &grad.scale(-1.0), 1e-10)?;

        let e0 = functional(&phi)?;
        let slope = grad.inner(&step)?;
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let trial = phi.add(&step.scale(t))?;
            let r_trial = residual(&trial)?;
            let decrease = functional(&trial)? <= e0 + 1e-4 * t * slope;
            // Near the solution energy differences drown in rounding; a
            // full step that reduces the residual is then accepted as is.
            if decrease || (t == 1.0 && r_trial.max_abs() < 0.5 * res) {
                accepted = Some((trial, r_trial));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((p, rr)) => {
                phi = p;
                r = rr;
            }
            None => break,
        }
    }
    let res = r.max_abs();
    if res <= tol {
        return Ok(phi);
    }
    Err(StationaryError::NonConvergence { iterations: history.len(), residual: res, history })
}

fn pcg(
    apply: &dyn Fn(&SurfaceField) -> Result<SurfaceField, SpectralError>,
    precond: &dyn Fn(&SurfaceField) -> SurfaceField,
    b: &SurfaceField,
    rtol: f64,
) -> Result<SurfaceField, SpectralError> {
    let b_norm = b.l2_norm();
    let mut x = SurfaceField::zeros(b.geometry());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z)?;
    for _ in 0..PCG_MAX_ITERS {
        let ap = apply(&p)?;
        let pap = p.inner(&ap)?;
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x = x.add(&p.scale(alpha))?;
        r = r.sub(&ap.scale(alpha))?;
        if r.l2_norm() <= rtol * b_norm {
            break;
        }
        z = precond(&r);
        let rz_new = r.inner(&z)?;
        p = z.add(&p.scale(rz_new / rz))?;
        rz = rz_new;
    }
    Ok(x)
}

/// Residuals of all stationary equations at `sol`.
pub fn stationary_residuals(
    sol: &StationarySolution,
    cfg: &StationaryConfig,
) -> Result<StationaryResiduals, StationaryError> {
    let p = &cfg.params;
    let area = sol.phi.geometry().area();
    let phi = sol.phi.offset(sol.phi_mean);
    let mu = sol
        .phi
        .laplacian()
        .scale(-p.eps)
        .add(&model::well_force(&phi).mean_free().scale(1.0 / p.eps))?
        .sub(&sol.theta.scale(0.5))?;
    let theta = theta_full(sol.phi_mean, sol.v_mean, &sol.theta, p.delta);
    let q = cfg.law.eval_uniform(sol.u_mean, &sol.v.offset(sol.v_mean), &theta)?;
    let v_eq = sol.theta.laplacian().add(&q.mean_free())?;
    let theta_eq = sol.theta.sub(&sol.v.scale(2.0).sub(&sol.phi)?.scale(2.0 / p.delta))?;
    Ok(StationaryResiduals {
        mu: mu.max_abs(),
        v: v_eq.max_abs(),
        theta: theta_eq.max_abs(),
        flux: q.integral().abs(),
        mass: (cfg.volume * sol.u_mean + area * sol.v_mean - cfg.mass).abs(),
    })
}

/// One application of the damped map: returns the next iterate with its
/// residuals evaluated.
pub fn fixed_point_step(
    cfg: &StationaryConfig,
    phi: &SurfaceField,
    v: &SurfaceField,
    damping: f64,
) -> Result<StationarySolution, StationaryError> {
    let p = &cfg.params;
    let geom = v.geometry();
    let phi_mean = cfg.lipid_mass / geom.area();
    let (phi, v) = (phi.mean_free(), v.mean_free());
    let phi_full = phi.offset(phi_mean);

    let (u_mean, v_mean) = mean_value_solve(&cfg.law, &v, &phi_full, cfg.mass, cfg.volume, p.delta)?;
    let theta_now = theta_full(phi_mean, v_mean, &v.scale(2.0).sub(&phi)?.scale(2.0 / p.delta), p.delta);
    let q = cfg.law.eval_uniform(u_mean, &v.offset(v_mean), &theta_now)?;
    let theta = solve_surface_helmholtz(0.0, 1.0, &q.mean_free())?;

    let rhs = phi.dealiased().scale(4.0 / p.eps).add(&theta.scale(0.5))?;
    let phi_new = newton_semilinear(&rhs, p.eps, phi_mean, cfg.newton_tol, Some(&phi))?;
    let target = theta.scale(0.25 * p.delta).add(&phi_new.scale(0.5))?;
    let v_new = v.scale(1.0 - damping).add(&target.scale(damping))?;

    let mut sol = StationarySolution {
        phi: phi_new,
        v: v_new,
        theta,
        phi_mean,
        u_mean,
        v_mean,
        iterations: 0,
        residuals: StationaryResiduals::default(),
        history: Vec::new(),
    };
    sol.residuals = stationary_residuals(&sol, cfg)?;
    Ok(sol)
}

/// Damped fixed-point iteration started from `(phi, v)`; both are
/// projected to their mean-free parts. Stops when every residual is below
/// `cfg.tol`, or reports non-convergence with the residual history.
pub fn fixed_point_iterate(
    cfg: &StationaryConfig,
    phi: &SurfaceField,
    v: &SurfaceField,
) -> Result<StationarySolution, StationaryError> {
    cfg.validate()?;
    let mut history = Vec::new();
    let (mut phi, mut v) = (phi.mean_free(), v.mean_free());
    for it in 1..=cfg.max_iters {
        let mut sol = fixed_point_step(cfg, &phi, &v, cfg.damping)?;
        let res = sol.residuals.max();
        history.push(res);
        if !res.is_finite() {
            break;
        }
        if res < cfg.tol {
            sol.iterations = it;
            sol.history = history;
            return Ok(sol);
        }
        phi = sol.phi;
        v = sol.v;
    }
    Err(StationaryError::NonConvergence {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Time-marches the reduced model from `(phi, v)` until
/// `||phi^{n+1} - phi^n||_inf / dt < rate_tol` or `max_steps` is reached;
/// a good start for [`fixed_point_iterate`] near stable patterns.
pub fn march_reduced(
    cfg: &StationaryConfig,
    phi: &SurfaceField,
    v: &SurfaceField,
    rate_tol: f64,
    max_steps: usize,
) -> Result<ReducedState, StationaryError> {
    let model = ReducedModel::new(cfg.params, cfg.law, cfg.volume)?;
    let phi_mean = cfg.lipid_mass / phi.geometry().area();
    let phi = phi.mean_free().offset(phi_mean);
    let (u, v_mean) = mean_value_solve(&cfg.law, v, &phi, cfg.mass, cfg.volume, cfg.params.delta)?;
    let mut s = ReducedState::new(u, phi, v.mean_free().offset(v_mean))?;
    for _ in 0..max_steps {
        let next = model.step(&s)?;
        let rate = next.phi.max_diff(&s.phi)? / cfg.params.dt;
        s = next;
        if rate < rate_tol {
            break;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::TorusGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    fn noise(g: &TorusGeometry, seed: u64, amp: f64) -> SurfaceField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SurfaceField::from_values(g, (0..g.len()).map(|_| rng.random_range(-amp..amp)).collect()).unwrap().mean_free()
    }

    fn smooth(g: &TorusGeometry, amp: f64) -> SurfaceField {
        use std::f64::consts::PI;
        SurfaceField::from_fn(g, |x, y| amp * ((2.0 * PI * x).cos() + 0.5 * (4.0 * PI * y).sin()))
    }

    fn unit_cfg(eps: f64) -> StationaryConfig {
        StationaryConfig::new(
            0.0,
            1.0,
            ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 },
            ModelParams::new(eps, 0.1, 1.0, 1e-4).unwrap(),
            1.0,
        )
    }

    #[test]
    fn mean_value_examples() {
        let g = TorusGeometry::new(1.0, 16).unwrap();
        let law = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let (u, v) = mean_value_solve(&law, &noise(&g, 1, 0.2), &SurfaceField::zeros(&g), 1.0, 1.0, 0.1).unwrap();
        assert!((u - GOLDEN).abs() < 1e-12);
        assert!((v - GOLDEN / (1.0 + GOLDEN)).abs() < 1e-12);
        assert!((u + v - 1.0).abs() < 1e-12);
        let (u2, v2) = mean_value_solve(&law, &noise(&g, 2, 0.4), &SurfaceField::zeros(&g), 1.0, 1.0, 0.1).unwrap();
        assert!((u - u2).abs() < 1e-13 && (v - v2).abs() < 1e-13);
        let (u0, v0) = mean_value_solve(&law, &noise(&g, 1, 0.2), &SurfaceField::zeros(&g), 0.0, 1.0, 0.1).unwrap();
        assert_eq!((u0, v0), (0.0, 0.0));
    }

    #[test]
    fn bisection_laws_satisfy_both_conditions() {
        let g = TorusGeometry::new(1.0, 16).unwrap();
        let cutoff = crate::exchange::CutoffFunction::with_default_width(1.0).unwrap();
        let phi = noise(&g, 3, 0.3).offset(-0.2);
        for law in [ExchangeLaw::CutoffNonEquilibrium { c1: 1.0, c2: 1.0, cutoff }, ExchangeLaw::Equilibrium { c: 2.0 }]
        {
            let v_tilde = noise(&g, 4, 0.1);
            let (u, v) = mean_value_solve(&law, &v_tilde, &phi, 1.0, 1.0, 0.5).unwrap();
            assert!((u + v - 1.0).abs() < 1e-12, "{law:?}");
            let theta = theta_full(phi.mean(), v, &v_tilde.scale(2.0).sub(&phi.mean_free()).unwrap().scale(4.0), 0.5);
            let flux = law.eval_uniform(u, &v_tilde.offset(v), &theta).unwrap().integral();
            assert!(flux.abs() < 1e-12, "{law:?}: {flux:e}");
        }
        // Cutoff law agrees with the closed form inside its identity region.
        let noneq = ExchangeLaw::NonEquilibrium { c1: 1.0, c2: 1.0 };
        let law = ExchangeLaw::CutoffNonEquilibrium { c1: 1.0, c2: 1.0, cutoff };
        let a = mean_value_solve(&law, &noise(&g, 5, 0.1), &phi, 1.0, 1.0, 0.5).unwrap();
        let b = mean_value_solve(&noneq, &noise(&g, 5, 0.1), &phi, 1.0, 1.0, 0.5).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn newton_zero_rhs_gives_zero() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let phi = newton_semilinear(&SurfaceField::zeros(&g), 0.04, 0.0, 1e-12, None).unwrap();
        assert!(phi.max_abs() < 1e-14);
    }

    #[test]
    fn newton_small_rhs_is_linear_response() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let eps = 0.1;
        let f = smooth(&g, 1e-4);
        let phi = newton_semilinear(&f, eps, 0.0, 1e-16, None).unwrap();
        let linear = solve_surface_helmholtz(0.0, eps, &f).unwrap();
        assert!(phi.max_diff(&linear).unwrap() < 1e-10);
    }

    #[test]
    fn newton_solution_is_unique_and_satisfies_equation() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let (eps, m, tol) = (0.04, -0.4, 1e-10);
        let f = noise(&g, 6, 30.0).dealiased();
        let a = newton_semilinear(&f, eps, m, tol, None).unwrap();
        let b = newton_semilinear(&f, eps, m, tol, Some(&smooth(&g, 2.0))).unwrap();
        assert!(a.max_diff(&b).unwrap() < 10.0 * tol);
        let lhs = a
            .laplacian()
            .scale(-eps)
            .add(&a.map(|s| 4.0 * (m + s).powi(3)).dealiased().mean_free().scale(1.0 / eps))
            .unwrap();
        assert!(lhs.max_diff(&f).unwrap() <= tol);
        assert!(a.integral().abs() < 1e-12);
    }

    #[test]
    fn homogeneous_branch() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let cfg = StationaryConfig { lipid_mass: -0.4, ..unit_cfg(0.04) };
        let z = SurfaceField::zeros(&g);
        let sol = fixed_point_iterate(&cfg, &z, &z).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.residuals.max() <= 1e-12, "{:?}", sol.residuals);
        assert!(sol.phi.max_abs() == 0.0 && sol.theta.max_abs() == 0.0 && sol.v.max_abs() == 0.0);
        assert!((sol.u_mean - GOLDEN).abs() < 1e-12);
    }

    #[test]
    fn residuals_detect_nonstationary_fields() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let cfg = unit_cfg(0.04);
        let s = ReducedState::new(0.5, noise(&g, 7, 0.5).offset(-0.4), noise(&g, 8, 0.2).offset(0.3)).unwrap();
        let sol = StationarySolution::from_reduced(&s, &cfg).unwrap();
        assert!(sol.residuals.mu > 1.0 && sol.residuals.v > 1e-3);
        assert!(sol.residuals.theta < 1e-12);
    }

    #[test]
    fn converged_pattern_is_fixed_point_and_stationary() {
        let g = TorusGeometry::new(1.0, 32).unwrap();
        let cfg = StationaryConfig { lipid_mass: 0.0, tol: 1e-9, ..unit_cfg(0.1) };
        let phi0 = smooth(&g, 0.5);
        let v0 = phi0.scale(0.5);
        let sol = fixed_point_iterate(&cfg, &phi0, &v0).unwrap();
        assert!(sol.phi.max_abs() > 0.1, "collapsed to the homogeneous branch");
        for f in [&sol.phi, &sol.v, &sol.theta] {
            assert!(f.integral().abs() < 1e-12);
        }
        let again = fixed_point_step(&cfg, &sol.phi, &sol.v, 1.0).unwrap();
        assert!(again.v.max_diff(&sol.v).unwrap() <= 10.0 * cfg.tol);

        let model = ReducedModel::new(cfg.params, cfg.law, cfg.volume).unwrap();
        let mut s = sol.to_reduced();
        let start = s.phi.clone();
        for _ in 0..100 {
            s = model.step(&s).unwrap();
        }
        assert!(s.phi.max_diff(&start).unwrap() < 1e-6);
    }

    #[test]
    fn validation() {
        let cfg = unit_cfg(0.04);
        assert!(StationaryConfig { damping: 0.0, ..cfg }.validate().is_err());
        assert!(StationaryConfig { damping: 1.5, ..cfg }.validate().is_err());
        assert!(StationaryConfig { tol: 0.0, ..cfg }.validate().is_err());
        assert!(cfg.validate().is_ok());
    }
}
