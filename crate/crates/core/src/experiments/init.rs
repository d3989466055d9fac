//! Initial data.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with `initial.seed`:
//! the phase field is drawn first, then the bulk perturbation of `u`. The
//! membrane cholesterol is balanced, `v = v_mean + phi_Gamma / 2`, with
//! `v_mean` fixed by the cholesterol mass, so `theta_Gamma(0) = 0`.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{InitialKind, RunConfig};
use super::ExperimentError;
use crate::spectral::snapshot::{self, Snapshot};
use crate::spectral::{BulkField, SlabGeometry, SurfaceField, TorusGeometry};

/// Membrane fields plus the cytosolic concentration, as a bulk field and
/// as its mean.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub phi: SurfaceField,
    pub v: SurfaceField,
    pub u: Option<BulkField>,
    pub u_mean: f64,
}

pub fn initial_data(cfg: &RunConfig, with_bulk: bool) -> Result<InitialData, ExperimentError> {
    let g = cfg.torus()?;
    let i = &cfg.initial;
    let phi_mean = i.lipid_mass / g.area();
    let mut rng = ChaCha8Rng::seed_from_u64(i.seed);
    let phi = match i.kind {
        InitialKind::Noise => grid_noise(&g, &mut rng, i.amplitude),
        InitialKind::Smooth => band_limited(&g, &mut rng, i.band, i.amplitude, false),
        InitialKind::Raft => raft(&g, phi_mean, cfg.params.eps),
        InitialKind::Snapshot => return from_snapshot(cfg, with_bulk),
    }
    .mean_free()
    .offset(phi_mean);

    let u_amp = i.u_amplitude.unwrap_or(i.amplitude);
    let u = if with_bulk {
        let slab = cfg.slab()?;
        Some(bulk_perturbation(&slab, &mut rng, i.band, u_amp)?.offset(i.u_mean))
    } else {
        None
    };
    let v = balanced_v(&phi, i.cholesterol_mass, cfg.volume() * i.u_mean);
    Ok(InitialData { phi, v, u, u_mean: i.u_mean })
}

/// `v = (M - int_B u) / |Gamma| + phi_Gamma / 2`.
pub fn balanced_v(phi: &SurfaceField, cholesterol_mass: f64, bulk_mass: f64) -> SurfaceField {
    let v_mean = (cholesterol_mass - bulk_mass) / phi.geometry().area();
    phi.mean_free().scale(0.5).offset(v_mean)
}

/// Mean-free uniform noise in `(-amp, amp)` at every grid point.
pub fn grid_noise(g: &TorusGeometry, rng: &mut ChaCha8Rng, amp: f64) -> SurfaceField {
    if amp == 0.0 {
        return SurfaceField::zeros(g);
    }
    let values = (0..g.len()).map(|_| rng.random_range(-amp..amp)).collect();
    SurfaceField::from_values(g, values).expect("grid-sized").mean_free()
}

fn random_modes(rng: &mut ChaCha8Rng, band: usize, amp: f64, skip_zero: bool) -> Vec<(f64, f64, f64, f64)> {
    let b = band as i64;
    let mut terms = Vec::new();
    for n1 in -b..=b {
        for n2 in -b..=b {
            if skip_zero && n1 == 0 && n2 == 0 {
                continue;
            }
            let c = if amp > 0.0 { rng.random_range(-amp..amp) } else { 0.0 };
            let phase = rng.random_range(0.0..TAU);
            terms.push((n1 as f64, n2 as f64, c, phase));
        }
    }
    terms
}

fn eval_modes(g: &TorusGeometry, terms: &[(f64, f64, f64, f64)]) -> SurfaceField {
    let l = g.length();
    SurfaceField::from_fn(g, |x, y| terms.iter().map(|&(a, b, c, ph)| c * (TAU * (a * x + b * y) / l + ph).cos()).sum())
}

/// Sum of cosines with random amplitudes and phases over wavenumbers
/// `|n1|, |n2| <= band`. The draws do not depend on the grid, so every
/// resolution samples the same smooth function.
pub fn band_limited(g: &TorusGeometry, rng: &mut ChaCha8Rng, band: usize, amp: f64, keep_mean: bool) -> SurfaceField {
    let f = eval_modes(g, &random_modes(rng, band, amp, true));
    if keep_mean {
        f
    } else {
        f.mean_free()
    }
}

/// Band-limited, mean-free bulk perturbation in the vertical modes
/// `m <= min(band, Mz - 1)`.
pub fn bulk_perturbation(
    slab: &SlabGeometry,
    rng: &mut ChaCha8Rng,
    band: usize,
    amp: f64,
) -> Result<BulkField, ExperimentError> {
    let g = slab.base();
    let layers: Vec<SurfaceField> =
        (0..=band.min(slab.modes() - 1)).map(|m| eval_modes(g, &random_modes(rng, band, amp, m == 0))).collect();
    Ok(BulkField::from_layers(slab, &layers)?.mean_free())
}

/// Centered disc of the `+1` phase with a `tanh` profile of width
/// `sqrt(2) eps`; its area fraction is `(1 + phi_mean) / 2`.
pub fn raft(g: &TorusGeometry, phi_mean: f64, eps: f64) -> SurfaceField {
    let l = g.length();
    let r0 = ((1.0 + phi_mean) / 2.0 * g.area() / std::f64::consts::PI).sqrt();
    SurfaceField::from_fn(g, |x, y| {
        let r = ((x - l / 2.0).powi(2) + (y - l / 2.0).powi(2)).sqrt();
        (-(r - r0) / (eps * SQRT_2)).tanh()
    })
}

fn from_snapshot(cfg: &RunConfig, with_bulk: bool) -> Result<InitialData, ExperimentError> {
    let dir = cfg.initial.snapshot.as_ref().expect("validated");
    let g = cfg.torus()?;
    let surface = |name: &str| -> Result<SurfaceField, ExperimentError> {
        match snapshot::read(dir.join(name))? {
            Snapshot::Surface(f) if f.geometry() == &g => Ok(f),
            Snapshot::Surface(_) => Err(ExperimentError::Config(format!("{name}: grid differs from config"))),
            Snapshot::Bulk(_) => Err(ExperimentError::Config(format!("{name}: expected a surface field"))),
        }
    };
    let phi = surface("phi.raft")?;
    let v = surface("v.raft")?;
    let bulk_path = dir.join("u.raft");
    let u = if bulk_path.exists() {
        match snapshot::read(&bulk_path)? {
            Snapshot::Bulk(u) if u.geometry() == &cfg.slab()? => Some(u),
            _ => return Err(ExperimentError::Config("u.raft: expected a bulk field on the configured slab".into())),
        }
    } else if with_bulk {
        Some(BulkField::constant(&cfg.slab()?, cfg.initial.u_mean))
    } else {
        None
    };
    let u_mean = u.as_ref().map_or(cfg.initial.u_mean, |u| u.mean());
    Ok(InitialData { phi, v, u: if with_bulk { u } else { None }, u_mean })
}
