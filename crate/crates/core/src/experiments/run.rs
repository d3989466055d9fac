//! Single runs: time series, snapshots and final state.
//!
//! Output directory layout:
//!
//! - `config.json`: the validated configuration
//! - `timeseries.csv`: one row every `csv_every` steps and at the end
//! - `<field>_<step>.raft`: snapshots every `snapshot_every` steps and at the end
//! - `final_<field>.raft`, `final_phi.pgm`: the end state
//! - `last_finite_<field>.raft`: the state before a blow-up, if one occurs
//!
//! Stationary runs write `residuals.csv` (history) and `stationary.csv`
//! (summary) instead of a time series.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExchangeKind, ModelKind, RunConfig};
use super::init::{initial_data, InitialData};
use super::pgm::emit_pgm;
use super::ExperimentError;
use crate::full::{self, FullState};
use crate::model::DynamicsError;
use crate::ok::{OkModel, OkState};
use crate::reduced::{u_fixed_point, ReducedModel, ReducedState};
use crate::spectral::snapshot::{write_bulk, write_surface};
use crate::spectral::{BulkField, SurfaceField};
use crate::stationary::{fixed_point_iterate, StationaryError};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub csv_rows: usize,
    /// Snapshot files per field.
    pub snapshots: usize,
    pub out_dir: PathBuf,
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary, ExperimentError> {
    cfg.validate()?;
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    match cfg.model {
        ModelKind::Full => run_full(cfg),
        ModelKind::Reduced => run_reduced(cfg),
        ModelKind::Ok => run_ok(cfg),
        ModelKind::Stationary => run_stationary(cfg),
    }
}

/// Header plus rows of `f64`, written with shortest round-trip formatting.
struct Table {
    writer: csv::Writer<fs::File>,
    rows: usize,
}

impl Table {
    fn create(path: &Path, header: &[&str]) -> Result<Self, ExperimentError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(header)?;
        Ok(Table { writer, rows: 0 })
    }

    fn push(&mut self, row: &[Option<f64>]) -> Result<(), ExperimentError> {
        self.writer.write_record(row.iter().map(|x| x.map(|x| x.to_string()).unwrap_or_default()))?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<usize, ExperimentError> {
        self.writer.flush()?;
        Ok(self.rows)
    }
}

struct Schedule {
    steps: usize,
    csv_every: usize,
    snapshot_every: usize,
}

impl Schedule {
    fn new(cfg: &RunConfig) -> Self {
        Schedule { steps: cfg.steps(), csv_every: cfg.output.csv_every, snapshot_every: cfg.output.snapshot_every }
    }

    fn csv(&self, n: usize) -> bool {
        n.is_multiple_of(self.csv_every) || n == self.steps
    }

    fn snapshot(&self, n: usize) -> bool {
        self.snapshot_every > 0 && (n.is_multiple_of(self.snapshot_every) || n == self.steps)
    }
}

fn write_fields(
    dir: &Path,
    prefix: &str,
    surface: &[(&str, &SurfaceField)],
    bulk: Option<&BulkField>,
) -> Result<(), ExperimentError> {
    for (name, f) in surface {
        write_surface(dir.join(format!("{prefix}{name}.raft")), f)?;
    }
    if let Some(u) = bulk {
        write_bulk(dir.join(format!("{prefix}u.raft")), u)?;
    }
    Ok(())
}

/// Turns a non-finite state into a blow-up error after dumping the last
/// finite one.
fn guard<S>(
    next: Result<S, DynamicsError>,
    dir: &Path,
    dump: impl FnOnce(&Path) -> Result<(), ExperimentError>,
) -> Result<S, ExperimentError> {
    match next {
        Ok(s) => Ok(s),
        Err(e @ DynamicsError::NonFinite { .. }) => {
            dump(dir)?;
            Err(ExperimentError::Blowup { source: e, dump: dir.join("last_finite_phi.raft") })
        }
        Err(e) => Err(e.into()),
    }
}

const FULL_HEADER: [&str; 11] =
    ["t", "m", "M_total", "F", "E_total", "gnorm_mu", "gnorm_theta", "gnorm_u", "exch", "min_phi", "max_phi"];

fn run_full(cfg: &RunConfig) -> Result<RunSummary, ExperimentError> {
    let dir = cfg.output.dir.as_path();
    let p = cfg.model_params()?;
    let law = cfg.law()?;
    let InitialData { phi, v, u, .. } = initial_data(cfg, true)?;
    let mut s = FullState::new(u.expect("bulk requested"), phi, v)?;
    let sched = Schedule::new(cfg);
    let mut table = Table::create(&dir.join("timeseries.csv"), &FULL_HEADER)?;
    let mut snaps = 0;
    for n in 0..=sched.steps {
        if n > 0 {
            let next = full::step_imex(&s, &p, &law).and_then(|x| x.check_finite().map(|_| x));
            s = guard(next, dir, |d| write_fields(d, "last_finite_", &[("phi", &s.phi), ("v", &s.v)], Some(&s.u)))?;
        }
        if sched.csv(n) {
            let m = full::masses(&s);
            let e = full::energy(&s, &p, &law)?;
            table.push(&[
                Some(s.t),
                Some(m.lipid),
                Some(m.cholesterol),
                Some(e.free_energy),
                Some(e.total),
                Some(e.grad_mu),
                Some(e.grad_theta),
                Some(e.grad_u),
                Some(e.exchange),
                Some(s.phi.min()),
                Some(s.phi.max()),
            ])?;
        }
        if sched.snapshot(n) {
            write_fields(dir, &format!("{n:07}_"), &[("phi", &s.phi), ("v", &s.v)], Some(&s.u))?;
            snaps += 1;
        }
    }
    write_fields(dir, "final_", &[("phi", &s.phi), ("v", &s.v)], Some(&s.u))?;
    emit_pgm(&s.phi, dir.join("final_phi.pgm"))?;
    Ok(RunSummary { steps: sched.steps, csv_rows: table.finish()?, snapshots: snaps, out_dir: dir.to_path_buf() })
}

fn run_reduced(cfg: &RunConfig) -> Result<RunSummary, ExperimentError> {
    let dir = cfg.output.dir.as_path();
    let model = ReducedModel::new(cfg.model_params()?, cfg.law()?, cfg.volume())?;
    let d = initial_data(cfg, false)?;
    let mut s = ReducedState::new(d.u_mean, d.phi, d.v)?;
    let u_inf = match cfg.exchange.kind {
        ExchangeKind::Noneq
            if cfg.exchange.c1 > 0.0 && cfg.exchange.c2 > 0.0 && cfg.initial.cholesterol_mass >= 0.0 =>
        {
            Some(u_fixed_point(
                cfg.exchange.c1,
                cfg.exchange.c2,
                cfg.initial.cholesterol_mass,
                cfg.volume(),
                cfg.area(),
            ))
        }
        _ => None,
    };
    let sched = Schedule::new(cfg);
    let mut header = FULL_HEADER.to_vec();
    header.extend(["u", "u_inf_residual"]);
    let mut table = Table::create(&dir.join("timeseries.csv"), &header)?;
    let mut snaps = 0;
    for n in 0..=sched.steps {
        if n > 0 {
            let next = model.step(&s);
            s = guard(next, dir, |d| write_fields(d, "last_finite_", &[("phi", &s.phi), ("v", &s.v)], None))?;
        }
        if sched.csv(n) {
            let r = model.report(&s)?;
            table.push(&[
                Some(s.t),
                Some(r.lipid),
                Some(r.cholesterol),
                Some(r.free_energy),
                Some(r.total),
                Some(r.grad_mu),
                Some(r.grad_theta),
                Some(0.0),
                Some(r.exchange),
                Some(r.min_phi),
                Some(r.max_phi),
                Some(s.u),
                u_inf.map(|ui| (s.u - ui).abs()),
            ])?;
        }
        if sched.snapshot(n) {
            write_fields(dir, &format!("{n:07}_"), &[("phi", &s.phi), ("v", &s.v)], None)?;
            snaps += 1;
        }
    }
    write_fields(dir, "final_", &[("phi", &s.phi), ("v", &s.v)], None)?;
    emit_pgm(&s.phi, dir.join("final_phi.pgm"))?;
    Ok(RunSummary { steps: sched.steps, csv_rows: table.finish()?, snapshots: snaps, out_dir: dir.to_path_buf() })
}

fn run_ok(cfg: &RunConfig) -> Result<RunSummary, ExperimentError> {
    if cfg.exchange.kind != ExchangeKind::Noneq {
        return Err(ExperimentError::Config("the ok model needs the noneq exchange law".into()));
    }
    let dir = cfg.output.dir.as_path();
    let model = OkModel {
        params: cfg.model_params()?,
        c1: cfg.exchange.c1,
        c2: cfg.exchange.c2,
        volume: cfg.volume(),
        mass: cfg.initial.cholesterol_mass,
    };
    let d = initial_data(cfg, false)?;
    let mut s = OkState::new(&d.phi, d.u_mean);
    let sched = Schedule::new(cfg);
    let mut table = Table::create(&dir.join("timeseries.csv"), &["t", "m", "u", "norm_phi", "min_phi", "max_phi"])?;
    let mut snaps = 0;
    let area = cfg.area();
    for n in 0..=sched.steps {
        if n > 0 {
            let next = model.step(&s);
            s = guard(next, dir, |d| write_fields(d, "last_finite_", &[("phi", &s.phi.offset(s.phi_mean))], None))?;
        }
        if sched.csv(n) {
            table.push(&[
                Some(s.t),
                Some(s.phi_mean * area + s.phi.integral()),
                Some(s.u),
                Some(s.phi.l2_norm()),
                Some(s.phi_mean + s.phi.min()),
                Some(s.phi_mean + s.phi.max()),
            ])?;
        }
        if sched.snapshot(n) {
            write_fields(dir, &format!("{n:07}_"), &[("phi", &s.phi.offset(s.phi_mean))], None)?;
            snaps += 1;
        }
    }
    let phi = s.phi.offset(s.phi_mean);
    write_fields(dir, "final_", &[("phi", &phi)], None)?;
    emit_pgm(&phi, dir.join("final_phi.pgm"))?;
    Ok(RunSummary { steps: sched.steps, csv_rows: table.finish()?, snapshots: snaps, out_dir: dir.to_path_buf() })
}

fn run_stationary(cfg: &RunConfig) -> Result<RunSummary, ExperimentError> {
    let dir = cfg.output.dir.as_path();
    let sc = cfg.stationary_config()?;
    let d = initial_data(cfg, false)?;
    let result = fixed_point_iterate(&sc, &d.phi, &d.v);
    let history = match &result {
        Ok(sol) => sol.history.clone(),
        Err(StationaryError::NonConvergence { history, .. }) => history.clone(),
        Err(_) => Vec::new(),
    };
    let mut table = Table::create(&dir.join("residuals.csv"), &["iteration", "residual"])?;
    for (i, r) in history.iter().enumerate() {
        table.push(&[Some((i + 1) as f64), Some(*r)])?;
    }
    let rows = table.finish()?;
    let sol = result?;
    let mut summary = Table::create(
        &dir.join("stationary.csv"),
        &["phi_mean", "u_mean", "v_mean", "iterations", "res_mu", "res_v", "res_theta", "res_flux", "res_mass"],
    )?;
    let r = sol.residuals;
    summary.push(&[
        Some(sol.phi_mean),
        Some(sol.u_mean),
        Some(sol.v_mean),
        Some(sol.iterations as f64),
        Some(r.mu),
        Some(r.v),
        Some(r.theta),
        Some(r.flux),
        Some(r.mass),
    ])?;
    summary.finish()?;
    let state = sol.to_reduced();
    let theta = sol.theta.clone();
    write_fields(dir, "final_", &[("phi", &state.phi), ("v", &state.v), ("theta", &theta)], None)?;
    emit_pgm(&state.phi, dir.join("final_phi.pgm"))?;
    Ok(RunSummary { steps: sol.iterations, csv_rows: rows, snapshots: 0, out_dir: dir.to_path_buf() })
}
