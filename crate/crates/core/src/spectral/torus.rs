use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::fft::Plan2d;
use super::SpectralError;
use crate::exec::Execution;

/// Square periodic surface `[0, L)^2` sampled on an `N x N` grid.
///
/// Grid values are stored row-major with `x1` varying fastest:
/// `values[i2 * N + i1]` samples the point `(i1 * L / N, i2 * L / N)`.
/// Spectral arrays use the same layout over the signed mode indices
/// `n = 0, 1, .., N/2, -N/2 + 1, .., -1`.
#[derive(Clone)]
pub struct TorusGeometry {
    length: f64,
    n: usize,
    plan: Arc<Plan2d>,
    eigenvalues: Arc<Vec<f64>>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry").field("length", &self.length).field("n", &self.n).finish()
    }
}

impl PartialEq for TorusGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.n == other.n
    }
}

impl TorusGeometry {
    pub fn new(length: f64, n: usize) -> Result<Self, SpectralError> {
        Self::with_execution(length, n, Execution::default())
    }

    /// Like [`TorusGeometry::new`] with an explicit policy for the row
    /// transforms.
    pub fn with_execution(length: f64, n: usize, exec: Execution) -> Result<Self, SpectralError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGeometry(format!("side length must be positive, got {length}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(SpectralError::InvalidGeometry(format!("grid size must be even and at least 4, got {n}")));
        }
        let k0 = 2.0 * PI / length;
        let mut eigenvalues = Vec::with_capacity(n * n);
        for j2 in 0..n {
            for j1 in 0..n {
                let k1 = k0 * signed_index(j1, n) as f64;
                let k2 = k0 * signed_index(j2, n) as f64;
                eigenvalues.push(k1 * k1 + k2 * k2);
            }
        }
        Ok(TorusGeometry { length, n, plan: Arc::new(Plan2d::new(n, exec)), eigenvalues: Arc::new(eigenvalues) })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Signed mode indices `(n1, n2)` of the flat spectral index.
    pub fn mode(&self, idx: usize) -> (i64, i64) {
        (signed_index(idx % self.n, self.n), signed_index(idx / self.n, self.n))
    }

    /// Flat spectral index of the signed mode `(n1, n2)`.
    pub fn index_of(&self, n1: i64, n2: i64) -> usize {
        let wrap = |m: i64| m.rem_euclid(self.n as i64) as usize;
        wrap(n2) * self.n + wrap(n1)
    }

    /// `|k|^2` for every spectral index; the Laplace-Beltrami eigenvalue is
    /// its negative.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// True if the mode survives two-thirds dealiasing.
    pub fn is_resolved(&self, idx: usize) -> bool {
        let (n1, n2) = self.mode(idx);
        let limit = self.n as i64;
        3 * n1.abs() <= limit && 3 * n2.abs() <= limit
    }

    /// Grid coordinates of the flat grid index.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        ((idx % self.n) as f64 * h, (idx / self.n) as f64 * h)
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.plan.forward(buf);
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.plan.inverse(buf);
    }

    pub(crate) fn check(&self, other: &TorusGeometry) -> Result<(), SpectralError> {
        if self == other {
            Ok(())
        } else {
            Err(SpectralError::GeometryMismatch { left: (self.length, self.n), right: (other.length, other.n) })
        }
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Scalar field on the torus with grid samples and lazily computed Fourier
/// coefficients.
///
/// Coefficients are normalized so that the zero mode equals the mean value.
/// Fields are immutable; every operation returns a new field.
#[derive(Clone)]
pub struct SurfaceField {
    geom: TorusGeometry,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl fmt::Debug for SurfaceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceField")
            .field("geom", &self.geom)
            .field("mean", &self.mean())
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl SurfaceField {
    pub fn from_values(geom: &TorusGeometry, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != geom.len() {
            return Err(SpectralError::SizeMismatch { expected: geom.len(), found: values.len() });
        }
        Ok(SurfaceField { geom: geom.clone(), values, coeffs: OnceLock::new() })
    }

    /// Build from spectral coefficients; grid values are synthesized eagerly
    /// and imaginary residue is discarded.
    pub fn from_coeffs(geom: &TorusGeometry, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != geom.len() {
            return Err(SpectralError::SizeMismatch { expected: geom.len(), found: coeffs.len() });
        }
        let mut buf = coeffs.clone();
        geom.inverse(&mut buf);
        let values = buf.iter().map(|c| c.re).collect();
        let cell = OnceLock::new();
        let _ = cell.set(coeffs);
        Ok(SurfaceField { geom: geom.clone(), values, coeffs: cell })
    }

    pub fn from_fn(geom: &TorusGeometry, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..geom.len())
            .map(|i| {
                let (x1, x2) = geom.point(i);
                f(x1, x2)
            })
            .collect();
        SurfaceField { geom: geom.clone(), values, coeffs: OnceLock::new() }
    }

    pub fn constant(geom: &TorusGeometry, c: f64) -> Self {
        SurfaceField { geom: geom.clone(), values: vec![c; geom.len()], coeffs: OnceLock::new() }
    }

    pub fn zeros(geom: &TorusGeometry) -> Self {
        Self::constant(geom, 0.0)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fourier coefficients, computed on first access.
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let mut buf: Vec<Complex64> = self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            self.geom.forward(&mut buf);
            buf
        })
    }

    /// Return the field with its spectral representation populated.
    pub fn synced(self) -> Self {
        self.coeffs();
        self
    }

    pub fn is_synced(&self) -> bool {
        self.coeffs.get().is_some()
    }

    pub fn mean(&self) -> f64 {
        match self.coeffs.get() {
            Some(c) => c[0].re,
            None => self.values.iter().sum::<f64>() / self.values.len() as f64,
        }
    }

    /// Exact spectral quadrature: zero mode times the area.
    pub fn integral(&self) -> f64 {
        self.coeffs()[0].re * self.geom.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// `int_Gamma f g`, exact for the represented modes.
    pub fn inner(&self, other: &SurfaceField) -> Result<f64, SpectralError> {
        self.geom.check(&other.geom)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s / self.values.len() as f64 * self.geom.area())
    }

    /// `||f||_{L^2(Gamma)}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|a| a * a).sum();
        (s / self.values.len() as f64 * self.geom.area()).sqrt()
    }

    /// `||f||_{L^2(Gamma)}` evaluated from the coefficients (Parseval).
    pub fn spectral_l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs().iter().map(|c| c.norm_sqr()).sum();
        (s * self.geom.area()).sqrt()
    }

    /// Dirichlet form `int_Gamma |grad f|^2`.
    pub fn gradient_norm_sq(&self) -> f64 {
        let s: f64 = self.coeffs().iter().zip(self.geom.eigenvalues()).map(|(c, lam)| lam * c.norm_sqr()).sum();
        s * self.geom.area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SurfaceField {
        SurfaceField {
            geom: self.geom.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
            coeffs: OnceLock::new(),
        }
    }

    pub fn zip_map(&self, other: &SurfaceField, f: impl Fn(f64, f64) -> f64) -> Result<SurfaceField, SpectralError> {
        self.geom.check(&other.geom)?;
        Ok(SurfaceField {
            geom: self.geom.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            coeffs: OnceLock::new(),
        })
    }

    /// Multiply every coefficient by `multiplier(idx)`.
    pub fn spectral_map(&self, multiplier: impl Fn(usize) -> f64) -> SurfaceField {
        let coeffs = self.coeffs().iter().enumerate().map(|(i, c)| c * multiplier(i)).collect();
        SurfaceField::from_coeffs(&self.geom, coeffs).expect("same geometry")
    }

    pub fn add(&self, other: &SurfaceField) -> Result<SurfaceField, SpectralError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SurfaceField) -> Result<SurfaceField, SpectralError> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> SurfaceField {
        self.map(|x| s * x)
    }

    pub fn offset(&self, c: f64) -> SurfaceField {
        self.map(|x| x + c)
    }

    /// Laplace-Beltrami operator: every mode times `-|k|^2`.
    pub fn laplacian(&self) -> SurfaceField {
        let lam = self.geom.eigenvalues().to_vec();
        self.spectral_map(|i| -lam[i])
    }

    /// `P_Gamma f = f - mean(f)`, with the zero mode set exactly to zero.
    pub fn mean_free(&self) -> SurfaceField {
        self.spectral_map(|i| if i == 0 { 0.0 } else { 1.0 })
    }

    /// Two-thirds rule: zero every mode with `|n_i| > N/3`.
    pub fn dealiased(&self) -> SurfaceField {
        let geom = self.geom.clone();
        self.spectral_map(|i| if geom.is_resolved(i) { 1.0 } else { 0.0 })
    }

    /// `max |f - g|` over the grid.
    pub fn max_diff(&self, other: &SurfaceField) -> Result<f64, SpectralError> {
        self.geom.check(&other.geom)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Spectral interpolation to another grid of the same side length.
    /// Modes that do not exist on the target grid are dropped; Nyquist
    /// modes are dropped in both directions so the result stays real.
    pub fn resample(&self, target: &TorusGeometry) -> Result<SurfaceField, SpectralError> {
        if target.length() != self.geom.length() {
            return Err(SpectralError::GeometryMismatch {
                left: (self.geom.length, self.geom.n),
                right: (target.length(), target.n()),
            });
        }
        let src = self.coeffs();
        let half = (self.geom.n.min(target.n()) / 2) as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        for (i, c) in src.iter().enumerate() {
            let (n1, n2) = self.geom.mode(i);
            if n1.abs() < half && n2.abs() < half {
                out[target.index_of(n1, n2)] = *c;
            }
        }
        SurfaceField::from_coeffs(target, out)
    }
}

/// Solve `(a - b * Laplacian) x = rhs` mode by mode.
///
/// With `a == 0` the system is singular on constants: the right-hand side
/// must be mean-free and the returned solution is mean-free.
pub fn solve_surface_helmholtz(a: f64, b: f64, rhs: &SurfaceField) -> Result<SurfaceField, SpectralError> {
    let c = rhs.coeffs();
    if a == 0.0 {
        let scale = rhs.max_abs().max(1.0);
        let mean = c[0].re;
        if mean.abs() > 1e-10 * scale {
            return Err(SpectralError::SingularSystem { mean });
        }
    }
    let lam = rhs.geometry().eigenvalues();
    let mut out = Vec::with_capacity(c.len());
    for (i, (ci, l)) in c.iter().zip(lam).enumerate() {
        let denom = a + b * l;
        if i == 0 && a == 0.0 {
            out.push(Complex64::new(0.0, 0.0));
        } else if denom == 0.0 {
            return Err(SpectralError::SingularSystem { mean: ci.re });
        } else {
            out.push(ci / denom);
        }
    }
    SurfaceField::from_coeffs(rhs.geometry(), out)
}
