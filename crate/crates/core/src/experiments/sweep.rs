//! Parameter sweeps and refinement studies with log-log fits.
//!
//! Members are independent simulations mapped over the execution pool;
//! results are merged in input order, so outputs do not depend on the
//! number of threads.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExchangeKind, ModelKind, RunConfig};
use super::init::initial_data;
use super::ExperimentError;
use crate::exec::Execution;
use crate::full::{self, FullState};
use crate::ok::{delta_sweep, DeltaSweepSetup};
use crate::reduced::{ReducedModel, ReducedState};
use crate::spectral::SurfaceField;

/// Least-squares line through `(ln x, ln y)`; `residual` is the RMS
/// deviation in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<Fit, ExperimentError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(ExperimentError::Config(format!(
            "a slope fit needs at least 3 points, got {}",
            x.len().min(y.len())
        )));
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ExperimentError::Config("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::Config("log-log fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(Fit { slope, intercept, residual: (sse / n).sqrt(), points: lx.len() })
}

/// Raw per-value observables plus an optional fit of `fit_column`
/// against the swept parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub columns: Vec<String>,
    /// One row per parameter value; the first entry is the value itself.
    pub rows: Vec<Vec<f64>>,
    pub fit_column: String,
    pub fit: Option<Fit>,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Writes `<stem>.csv` (raw rows) and `<stem>_fit.csv` (the fit).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let raw = dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&raw)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(f64::to_string))?;
        }
        w.flush()?;
        let fit = dir.join(format!("{stem}_fit.csv"));
        let mut w = csv::Writer::from_path(&fit)?;
        w.write_record(["x", "y", "slope", "intercept", "residual", "points"])?;
        let cells = match self.fit {
            Some(f) => vec![f.slope.to_string(), f.intercept.to_string(), f.residual.to_string(), f.points.to_string()],
            None => vec![String::new(); 4],
        };
        w.write_record([self.parameter.clone(), self.fit_column.clone()].into_iter().chain(cells))?;
        w.flush()?;
        Ok((raw, fit))
    }
}

fn fitted(parameter: &str, columns: &[&str], rows: Vec<Vec<f64>>, fit_column: &str) -> SweepResult {
    let mut r = SweepResult {
        parameter: parameter.into(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
        fit_column: fit_column.into(),
        fit: None,
    };
    if let Some(y) = r.column(fit_column) {
        r.fit = loglog_fit(&r.values(), &y).ok();
    }
    r
}

fn need_points(what: &str, n: usize, min: usize) -> Result<(), ExperimentError> {
    if n < min {
        return Err(ExperimentError::Config(format!("{what} needs at least {min} values, got {n}")));
    }
    Ok(())
}

/// Full model at each diffusivity `D` against the reduced model from the
/// same data. Observables at `T = t_end`:
///
/// - `grad_integral`: `sum_n dt int_B |grad u^{n+1}|^2`, the rectangle rule
///   at the step end points that the implicit step itself uses
/// - `e_red`: `|mean of trace u - u_reduced|`
///
/// The fit is `grad_integral` against `D`.
pub fn sweep_d(cfg: &RunConfig, d_list: &[f64], exec: Execution) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    need_points("a D-sweep", d_list.len(), 3)?;
    if d_list.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(ExperimentError::Config("diffusivities must be positive".into()));
    }
    let law = cfg.law()?;
    let base = cfg.model_params()?;
    let data = initial_data(cfg, true)?;
    let u0 = data.u.clone().expect("bulk requested");
    let steps = cfg.steps();
    let volume = cfg.volume();
    let rows = exec.map(d_list.to_vec(), |d| -> Result<Vec<f64>, ExperimentError> {
        let p = base.with_diffusivity(d)?;
        let mut s = FullState::new(u0.clone(), data.phi.clone(), data.v.clone())?;
        let model = ReducedModel::new(p, law, volume)?;
        let mut r = ReducedState::new(u0.mean(), data.phi.clone(), data.v.clone())?;
        let mut integral = 0.0;
        for _ in 0..steps {
            s = full::step_imex(&s, &p, &law)?;
            s.check_finite()?;
            r = model.step(&r)?;
            integral += p.dt * s.u.gradient_norm_sq();
        }
        Ok(vec![d, integral, (s.u.trace().mean() - r.u).abs()])
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(fitted("D", &["D", "grad_integral", "e_red"], rows, "grad_integral"))
}

/// Reduced model at each `delta` against the modified Ohta-Kawasaki limit;
/// columns `delta, error_L2, u_final`, fit of `error_L2` against `delta`.
pub fn sweep_delta(cfg: &RunConfig, deltas: &[f64], exec: Execution) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    if cfg.exchange.kind != ExchangeKind::Noneq {
        return Err(ExperimentError::Config("the delta-sweep needs the noneq exchange law".into()));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= crate::model::MIN_SCALE)) {
        return Err(ExperimentError::Config("deltas must be at least 1e-8".into()));
    }
    let data = initial_data(cfg, false)?;
    let setup = DeltaSweepSetup {
        params: cfg.model_params()?,
        c1: cfg.exchange.c1,
        c2: cfg.exchange.c2,
        volume: cfg.volume(),
        mass: cfg.initial.cholesterol_mass,
        u0: data.u_mean,
        phi0: data.phi,
        t_end: cfg.params.t_end,
    };
    let rows = delta_sweep(&setup, deltas, exec)?.into_iter().map(|r| vec![r.delta, r.error_l2, r.u_final]).collect();
    Ok(fitted("delta", &["delta", "error_L2", "u_final"], rows, "error_L2"))
}

/// Self-convergence of the full or reduced model.
///
/// `temporal`: one run per `dt` at the configured grid, with columns `dt`,
/// `error` (L2 distance of `phi(T)` to the finest run) and `increment`
/// (distance to the next finer run). For a halving sequence the
/// increments shrink like `dt^p`, so the fit of `increment` against `dt`
/// estimates the order `p`; this needs at least four step sizes.
///
/// `spatial`: one run per `N` at the configured `dt`, columns `N` and
/// `error` (L2 distance to the finest run, compared on the coarse grid).
/// Grid-independent initial data (`smooth` or `raft`) is required for the
/// errors to be meaningful.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementResult {
    pub temporal: SweepResult,
    pub spatial: SweepResult,
}

fn final_phi(cfg: &RunConfig) -> Result<SurfaceField, ExperimentError> {
    let p = cfg.model_params()?;
    let law = cfg.law()?;
    let steps = cfg.steps();
    match cfg.model {
        ModelKind::Full => {
            let d = initial_data(cfg, true)?;
            let mut s = FullState::new(d.u.expect("bulk requested"), d.phi, d.v)?;
            for _ in 0..steps {
                s = full::step_imex(&s, &p, &law)?;
                s.check_finite()?;
            }
            Ok(s.phi)
        }
        ModelKind::Reduced => {
            let d = initial_data(cfg, false)?;
            let model = ReducedModel::new(p, law, cfg.volume())?;
            let mut s = ReducedState::new(d.u_mean, d.phi, d.v)?;
            for _ in 0..steps {
                s = model.step(&s)?;
            }
            Ok(s.phi)
        }
        _ => Err(ExperimentError::Config("refinement studies support the full and reduced models".into())),
    }
}

pub fn refinement_study(
    cfg: &RunConfig,
    n_list: &[usize],
    dt_list: &[f64],
    exec: Execution,
) -> Result<RefinementResult, ExperimentError> {
    cfg.validate()?;
    need_points("the temporal study", dt_list.len(), 4)?;
    need_points("the spatial study", n_list.len(), 3)?;
    let mut dts = dt_list.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let mut ns = n_list.to_vec();
    ns.sort_unstable();

    let configs: Vec<RunConfig> = dts
        .iter()
        .map(|&dt| {
            let mut c = cfg.clone();
            c.params.t_end = cfg.params.t_end;
            c.params.dt = dt;
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
        let steps = c.steps() as f64 * c.params.dt;
        if (steps - cfg.params.t_end).abs() > 1e-9 * cfg.params.t_end.max(1.0) {
            return Err(ExperimentError::Config(format!("t_end is not a multiple of dt = {}", c.params.dt)));
        }
    }
    let phis = exec.map(configs, |c| final_phi(&c)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let finest = phis.last().expect("nonempty");
    let mut rows = Vec::new();
    for (i, dt) in dts.iter().enumerate() {
        let error = phis[i].sub(finest)?.l2_norm();
        let increment = match phis.get(i + 1) {
            Some(next) => phis[i].sub(next)?.l2_norm(),
            None => f64::NAN,
        };
        rows.push(vec![*dt, error, increment]);
    }
    let mut temporal = fitted("dt", &["dt", "error", "increment"], rows, "increment");
    let (x, y): (Vec<f64>, Vec<f64>) = temporal.rows[..dts.len() - 1].iter().map(|r| (r[0], r[2])).unzip();
    temporal.fit = Some(loglog_fit(&x, &y)?);

    let configs: Vec<RunConfig> = ns
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.geometry.n = n;
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let phis = exec.map(configs, |c| final_phi(&c)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let finest = phis.last().expect("nonempty");
    let mut rows = Vec::new();
    for (i, n) in ns.iter().enumerate() {
        let reference = finest.resample(phis[i].geometry())?;
        rows.push(vec![*n as f64, phis[i].sub(&reference)?.l2_norm()]);
    }
    let mut spatial = fitted("N", &["N", "error"], rows, "error");
    spatial.fit = None;
    Ok(RefinementResult { temporal, spatial })
}
