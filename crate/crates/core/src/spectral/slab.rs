use std::f64::consts::PI;

use num_complex::Complex64;

use super::torus::{SurfaceField, TorusGeometry};
use super::SpectralError;

/// Periodic slab `Gamma x (0, H)`, insulated at `z = H`.
///
/// The membrane is the face `z = 0`, whose outer normal points in `-z`.
/// Vertical structure is expanded in `cos(m pi z / H)`, `m < Mz`, which are
/// exactly the Neumann eigenfunctions of the interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabGeometry {
    base: TorusGeometry,
    depth: f64,
    modes: usize,
}

impl SlabGeometry {
    pub fn new(base: TorusGeometry, depth: f64, modes: usize) -> Result<Self, SpectralError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(SpectralError::InvalidGeometry(format!("slab depth must be positive, got {depth}")));
        }
        if modes < 2 {
            return Err(SpectralError::InvalidGeometry(format!("need at least 2 vertical modes, got {modes}")));
        }
        Ok(SlabGeometry { base, depth, modes })
    }

    pub fn base(&self) -> &TorusGeometry {
        &self.base
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn volume(&self) -> f64 {
        self.base.area() * self.depth
    }

    /// `(m pi / H)^2`.
    pub fn vertical_eigenvalue(&self, m: usize) -> f64 {
        let k = m as f64 * PI / self.depth;
        k * k
    }

    /// `(1/H) int_0^H cos^2(m pi z / H) dz`: 1 for the constant mode, 1/2 otherwise.
    pub fn vertical_weight(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            0.5
        }
    }

    /// Midpoint collocation heights `z_j = (j + 1/2) H / Mz`.
    pub fn collocation_heights(&self) -> Vec<f64> {
        let h = self.depth / self.modes as f64;
        (0..self.modes).map(|j| (j as f64 + 0.5) * h).collect()
    }

    pub fn len(&self) -> usize {
        self.base.len() * self.modes
    }
}

/// Scalar field in the slab, stored as Fourier x cosine coefficients.
///
/// `coeffs[m * N^2 + k]` multiplies `exp(i k.x) cos(m pi z / H)`; the
/// `(k, m) = (0, 0)` entry is the volume mean.
#[derive(Clone, Debug)]
pub struct BulkField {
    geom: SlabGeometry,
    coeffs: Vec<Complex64>,
}

impl BulkField {
    pub fn zeros(geom: &SlabGeometry) -> Self {
        BulkField { geom: geom.clone(), coeffs: vec![Complex64::new(0.0, 0.0); geom.len()] }
    }

    pub fn constant(geom: &SlabGeometry, c: f64) -> Self {
        let mut f = Self::zeros(geom);
        f.coeffs[0] = Complex64::new(c, 0.0);
        f
    }

    pub fn from_coeffs(geom: &SlabGeometry, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != geom.len() {
            return Err(SpectralError::SizeMismatch { expected: geom.len(), found: coeffs.len() });
        }
        Ok(BulkField { geom: geom.clone(), coeffs })
    }

    /// `u(x, z) = sum_m layers[m](x) cos(m pi z / H)`; missing layers are zero.
    pub fn from_layers(geom: &SlabGeometry, layers: &[SurfaceField]) -> Result<Self, SpectralError> {
        if layers.len() > geom.modes() {
            return Err(SpectralError::SizeMismatch { expected: geom.modes(), found: layers.len() });
        }
        let mut f = Self::zeros(geom);
        let n2 = geom.base().len();
        for (m, layer) in layers.iter().enumerate() {
            geom.base().check(layer.geometry())?;
            f.coeffs[m * n2..(m + 1) * n2].copy_from_slice(layer.coeffs());
        }
        Ok(f)
    }

    /// Inverse of [`BulkField::to_grid`]: samples on the `N x N x Mz`
    /// midpoint grid, `z` slowest.
    pub fn from_grid(geom: &SlabGeometry, values: &[f64]) -> Result<Self, SpectralError> {
        if values.len() != geom.len() {
            return Err(SpectralError::SizeMismatch { expected: geom.len(), found: values.len() });
        }
        let n2 = geom.base().len();
        let mz = geom.modes();
        let heights = geom.collocation_heights();
        let mut layers = Vec::with_capacity(mz);
        for j in 0..mz {
            let layer = SurfaceField::from_values(geom.base(), values[j * n2..(j + 1) * n2].to_vec())?;
            layers.push(layer.coeffs().to_vec());
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); geom.len()];
        for m in 0..mz {
            let w = if m == 0 { 1.0 } else { 2.0 } / mz as f64;
            let kz = m as f64 * PI / geom.depth();
            for (j, layer) in layers.iter().enumerate() {
                let c = w * (kz * heights[j]).cos();
                for (out, l) in coeffs[m * n2..(m + 1) * n2].iter_mut().zip(layer) {
                    *out += l * c;
                }
            }
        }
        Ok(BulkField { geom: geom.clone(), coeffs })
    }

    pub fn geometry(&self) -> &SlabGeometry {
        &self.geom
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Horizontal coefficients of vertical mode `m`.
    pub fn layer_coeffs(&self, m: usize) -> &[Complex64] {
        let n2 = self.geom.base().len();
        &self.coeffs[m * n2..(m + 1) * n2]
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `int_B u`, exact from the zero mode.
    pub fn integral(&self) -> f64 {
        self.coeffs[0].re * self.geom.volume()
    }

    /// Trace on the membrane face `z = 0`: sum over vertical modes.
    pub fn trace(&self) -> SurfaceField {
        let n2 = self.geom.base().len();
        let mut out = vec![Complex64::new(0.0, 0.0); n2];
        for m in 0..self.geom.modes() {
            for (o, c) in out.iter_mut().zip(self.layer_coeffs(m)) {
                *o += c;
            }
        }
        SurfaceField::from_coeffs(self.geom.base(), out).expect("same base geometry")
    }

    /// `int_B u^2` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        let n2 = self.geom.base().len();
        let mut s = 0.0;
        for m in 0..self.geom.modes() {
            let w = self.geom.vertical_weight(m);
            s += w * self.coeffs[m * n2..(m + 1) * n2].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        s * self.geom.volume()
    }

    /// Dirichlet form `int_B |grad u|^2` by Parseval.
    pub fn gradient_norm_sq(&self) -> f64 {
        let n2 = self.geom.base().len();
        let lam = self.geom.base().eigenvalues();
        let mut s = 0.0;
        for m in 0..self.geom.modes() {
            let w = self.geom.vertical_weight(m);
            let kz2 = self.geom.vertical_eigenvalue(m);
            s += w * self.coeffs[m * n2..(m + 1) * n2]
                .iter()
                .zip(lam)
                .map(|(c, l)| (l + kz2) * c.norm_sqr())
                .sum::<f64>();
        }
        s * self.geom.volume()
    }

    pub fn horizontal_laplacian(&self) -> BulkField {
        let n2 = self.geom.base().len();
        let lam = self.geom.base().eigenvalues();
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| -lam[i % n2] * c).collect();
        BulkField { geom: self.geom.clone(), coeffs }
    }

    pub fn scale(&self, s: f64) -> BulkField {
        BulkField { geom: self.geom.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Adds a constant (only the zero mode changes).
    pub fn offset(&self, c: f64) -> BulkField {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += c;
        BulkField { geom: self.geom.clone(), coeffs }
    }

    /// Same field with zero mean.
    pub fn mean_free(&self) -> BulkField {
        self.offset(-self.mean())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Samples at `z` for every horizontal grid point.
    pub fn layer_at(&self, z: f64) -> SurfaceField {
        let n2 = self.geom.base().len();
        let mut out = vec![Complex64::new(0.0, 0.0); n2];
        for m in 0..self.geom.modes() {
            let c = (m as f64 * PI * z / self.geom.depth()).cos();
            for (o, a) in out.iter_mut().zip(self.layer_coeffs(m)) {
                *o += a * c;
            }
        }
        SurfaceField::from_coeffs(self.geom.base(), out).expect("same base geometry")
    }

    /// Samples on the `N x N x Mz` midpoint grid, `z` slowest.
    pub fn to_grid(&self) -> Vec<f64> {
        self.geom.collocation_heights().into_iter().flat_map(|z| self.layer_at(z).into_values()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn slab(n: usize, mz: usize) -> SlabGeometry {
        SlabGeometry::new(TorusGeometry::new(1.0, n).unwrap(), 1.0, mz).unwrap()
    }

    fn random_bulk(g: &SlabGeometry, seed: u64) -> BulkField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<SurfaceField> = (0..g.modes())
            .map(|_| {
                let vals = (0..g.base().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                SurfaceField::from_values(g.base(), vals).unwrap().dealiased()
            })
            .collect();
        BulkField::from_layers(g, &layers).unwrap()
    }

    #[test]
    fn rejects_bad_slab() {
        let base = TorusGeometry::new(1.0, 8).unwrap();
        assert!(SlabGeometry::new(base.clone(), 1.0, 1).is_err());
        assert!(SlabGeometry::new(base, -1.0, 4).is_err());
    }

    #[test]
    fn trace_examples() {
        let g = slab(8, 4);
        let horiz = SurfaceField::from_fn(g.base(), |x, y| (2.0 * PI * x).sin() + 0.2 * (2.0 * PI * y).cos());
        let u = BulkField::from_layers(&g, std::slice::from_ref(&horiz)).unwrap();
        assert!(u.trace().max_diff(&horiz).unwrap() < 1e-14);

        let one = SurfaceField::constant(g.base(), 1.0);
        let zero = SurfaceField::zeros(g.base());
        let cz = BulkField::from_layers(&g, &[zero.clone(), one]).unwrap();
        assert!(cz.trace().max_diff(&SurfaceField::constant(g.base(), 1.0)).unwrap() < 1e-14);

        let cosx = SurfaceField::from_fn(g.base(), |x, _| (2.0 * PI * x).cos());
        let mixed = BulkField::from_layers(&g, &[zero.clone(), zero, cosx.clone()]).unwrap();
        assert!(mixed.trace().max_diff(&cosx).unwrap() < 1e-14);
    }

    #[test]
    fn integral_examples() {
        let g = slab(8, 4);
        assert!((BulkField::constant(&g, 0.7).integral() - 0.7).abs() < 1e-15);
        let one = SurfaceField::constant(g.base(), 1.0);
        let cz = BulkField::from_layers(&g, &[SurfaceField::zeros(g.base()), one]).unwrap();
        assert!(cz.integral().abs() < 1e-15);
    }

    #[test]
    fn integral_matches_dense_quadrature() {
        let base = TorusGeometry::new(1.5, 16).unwrap();
        let g = SlabGeometry::new(base, 0.8, 6).unwrap();
        let u = random_bulk(&g, 11);
        // Midpoint rule with more layers than modes integrates every cosine exactly.
        let nz = 20;
        let dz = g.depth() / nz as f64;
        let mut dense = 0.0;
        for j in 0..nz {
            let layer = u.layer_at((j as f64 + 0.5) * dz);
            let h2 = g.base().spacing().powi(2);
            dense += layer.values().iter().sum::<f64>() * h2 * dz;
        }
        assert!((u.integral() - dense).abs() < 1e-11);
    }

    #[test]
    fn gradient_norm_examples() {
        let g = slab(8, 4);
        assert!(BulkField::constant(&g, 2.0).gradient_norm_sq().abs() < 1e-15);
        let one = SurfaceField::constant(g.base(), 1.0);
        let cz = BulkField::from_layers(&g, &[SurfaceField::zeros(g.base()), one]).unwrap();
        assert!((cz.gradient_norm_sq() - PI * PI / 2.0).abs() < 1e-13);
        let u = random_bulk(&g, 12);
        let ratio = u.scale(2.0).gradient_norm_sq() / u.gradient_norm_sq();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_norm_matches_finite_differences() {
        let g = slab(16, 4);
        let u = random_bulk(&g, 13);
        // Dense quadrature of |grad u|^2 from analytic derivatives of each mode.
        let nz = 16;
        let dz = g.depth() / nz as f64;
        let h2 = g.base().spacing().powi(2);
        let mut dense = 0.0;
        for j in 0..nz {
            let z = (j as f64 + 0.5) * dz;
            let mut dx = vec![Complex64::new(0.0, 0.0); g.base().len()];
            let mut dy = dx.clone();
            let mut dzv = dx.clone();
            for m in 0..g.modes() {
                let kz = m as f64 * PI / g.depth();
                for (i, a) in u.layer_coeffs(m).iter().enumerate() {
                    let (n1, n2) = g.base().mode(i);
                    let k1 = 2.0 * PI * n1 as f64;
                    let k2 = 2.0 * PI * n2 as f64;
                    dx[i] += a * Complex64::new(0.0, k1) * (kz * z).cos();
                    dy[i] += a * Complex64::new(0.0, k2) * (kz * z).cos();
                    dzv[i] += a * (-kz * (kz * z).sin());
                }
            }
            for d in [dx, dy, dzv] {
                let f = SurfaceField::from_coeffs(g.base(), d).unwrap();
                dense += f.values().iter().map(|x| x * x).sum::<f64>() * h2 * dz;
            }
        }
        assert!((u.gradient_norm_sq() - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn grid_round_trip() {
        let g = slab(8, 5);
        let u = random_bulk(&g, 14);
        let back = BulkField::from_grid(&g, &u.to_grid()).unwrap();
        let err = u.coeffs().iter().zip(back.coeffs()).fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-13);
    }

    #[test]
    fn trace_commutes_with_horizontal_laplacian() {
        let g = slab(16, 4);
        let u = random_bulk(&g, 15);
        let lhs = u.horizontal_laplacian().trace();
        let rhs = u.trace().laplacian();
        assert!(lhs.max_diff(&rhs).unwrap() <= 1e-12 * rhs.max_abs());
    }

    #[test]
    fn parseval_for_bulk() {
        let g = slab(8, 4);
        let u = random_bulk(&g, 16);
        let grid = u.to_grid();
        let dv = g.volume() / grid.len() as f64;
        let direct: f64 = grid.iter().map(|x| x * x).sum::<f64>() * dv;
        assert!((u.l2_norm_sq() - direct).abs() <= 1e-12 * direct);
    }
}
