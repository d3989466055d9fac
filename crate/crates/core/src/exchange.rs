//! Constitutive laws for the cholesterol exchange between cytosol and
//! membrane.

use serde::{Deserialize, Serialize};

use crate::spectral::{SpectralError, SurfaceField};

/// Monotone bounded cutoff `eta`: the identity on `[-a, a]`, continued by a
/// `tanh` tail that saturates at `a + w`. The joint at `|s| = a` is C1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    level: f64,
    width: f64,
}

impl CutoffFunction {
    pub fn new(level: f64, width: f64) -> Option<Self> {
        (level >= 0.0 && level.is_finite() && width > 0.0 && width.is_finite())
            .then_some(CutoffFunction { level, width })
    }

    /// Blend width equal to the cutoff level.
    pub fn with_default_width(level: f64) -> Option<Self> {
        let width = if level > 0.0 { level } else { 1.0 };
        Self::new(level, width)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn eval(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.level {
            s
        } else {
            s.signum() * (self.level + self.width * ((a - self.level) / self.width).tanh())
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.level {
            1.0
        } else {
            let t = ((a - self.level) / self.width).tanh();
            1.0 - t * t
        }
    }

    pub fn bound(&self) -> f64 {
        self.level + self.width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExchangeLaw {
    /// `q = -c (theta - u)`; makes the total energy non-increasing.
    Equilibrium { c: f64 },
    /// Attachment to free membrane sites, detachment proportional to `v`:
    /// `q = c1 u (1 - v) - c2 v`.
    NonEquilibrium { c1: f64, c2: f64 },
    /// `q = c1 u - c1 eta(u) v - c2 v`, linearly bounded in `(u, v)`.
    CutoffNonEquilibrium { c1: f64, c2: f64, cutoff: CutoffFunction },
}

impl ExchangeLaw {
    pub fn is_valid(&self) -> bool {
        match *self {
            ExchangeLaw::Equilibrium { c } => c >= 0.0 && c.is_finite(),
            ExchangeLaw::NonEquilibrium { c1, c2 } | ExchangeLaw::CutoffNonEquilibrium { c1, c2, .. } => {
                c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()
            }
        }
    }

    /// Rate constants `(c1, c2)` of the attachment/detachment laws.
    pub fn rates(&self) -> Option<(f64, f64)> {
        match *self {
            ExchangeLaw::NonEquilibrium { c1, c2 } | ExchangeLaw::CutoffNonEquilibrium { c1, c2, .. } => Some((c1, c2)),
            ExchangeLaw::Equilibrium { .. } => None,
        }
    }

    #[inline]
    pub fn pointwise(&self, u: f64, v: f64, theta: f64) -> f64 {
        match *self {
            ExchangeLaw::Equilibrium { c } => -c * (theta - u),
            ExchangeLaw::NonEquilibrium { c1, c2 } => c1 * u * (1.0 - v) - c2 * v,
            ExchangeLaw::CutoffNonEquilibrium { c1, c2, cutoff } => c1 * u - c1 * cutoff.eval(u) * v - c2 * v,
        }
    }

    /// Grid evaluation followed by two-thirds dealiasing.
    pub fn eval(
        &self,
        u_trace: &SurfaceField,
        v: &SurfaceField,
        theta: &SurfaceField,
    ) -> Result<SurfaceField, SpectralError> {
        let geom = v.geometry();
        geom_check(u_trace, v)?;
        geom_check(theta, v)?;
        let values = u_trace
            .values()
            .iter()
            .zip(v.values())
            .zip(theta.values())
            .map(|((&u, &v), &th)| self.pointwise(u, v, th))
            .collect();
        Ok(SurfaceField::from_values(geom, values)?.dealiased())
    }

    /// Same as [`ExchangeLaw::eval`] with a spatially constant `u`.
    pub fn eval_uniform(&self, u: f64, v: &SurfaceField, theta: &SurfaceField) -> Result<SurfaceField, SpectralError> {
        geom_check(theta, v)?;
        let values = v.values().iter().zip(theta.values()).map(|(&v, &th)| self.pointwise(u, v, th)).collect();
        Ok(SurfaceField::from_values(v.geometry(), values)?.dealiased())
    }

    /// `int_Gamma q`.
    pub fn surface_integral(
        &self,
        u_trace: &SurfaceField,
        v: &SurfaceField,
        theta: &SurfaceField,
    ) -> Result<f64, SpectralError> {
        Ok(self.eval(u_trace, v, theta)?.integral())
    }

    /// Constant `C` in `|q| <= C (1 + |u| + |v|)` for the cutoff law.
    pub fn growth_constant(&self) -> Option<f64> {
        match *self {
            ExchangeLaw::CutoffNonEquilibrium { c1, c2, cutoff } => Some(c1.max(c1 * cutoff.bound() + c2)),
            _ => None,
        }
    }
}

fn geom_check(a: &SurfaceField, b: &SurfaceField) -> Result<(), SpectralError> {
    if a.geometry() == b.geometry() {
        Ok(())
    } else {
        Err(SpectralError::GeometryMismatch {
            left: (a.geometry().length(), a.geometry().n()),
            right: (b.geometry().length(), b.geometry().n()),
        })
    }
}
