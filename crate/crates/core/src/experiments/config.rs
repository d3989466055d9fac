//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::exchange::{CutoffFunction, ExchangeLaw};
use crate::model::{ModelParams, MIN_SCALE};
use crate::spectral::{SlabGeometry, TorusGeometry};
use crate::stationary::StationaryConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full,
    Reduced,
    Ok,
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Side length `L` of the periodic membrane.
    pub length: f64,
    /// Grid points per direction; even.
    pub n: usize,
    /// Slab depth `H`.
    pub depth: f64,
    /// Vertical cosine modes `Mz`.
    pub modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub eps: f64,
    pub delta: f64,
    /// Cytosolic diffusivity `D`.
    pub diffusivity: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Stabilization constant; `4/eps` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stab: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Equilibrium,
    Noneq,
    NoneqCutoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeConfig {
    pub kind: ExchangeKind,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    /// Width of the cutoff blend above `M/|B|`; equal to the level when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend_width: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Constant mean plus uniform grid noise.
    Noise,
    /// Random band-limited modes; the same continuous data on every grid.
    Smooth,
    /// A single tanh-profiled disc whose area matches the lipid mass.
    Raft,
    /// Fields read from `phi.raft`, `v.raft` and optionally `u.raft`.
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// Conserved lipid mass `m = int phi`.
    pub lipid_mass: f64,
    /// Conserved total cholesterol `M = int_B u + int_Gamma v`.
    pub cholesterol_mass: f64,
    /// Mean of the initial cytosolic concentration.
    pub u_mean: f64,
    /// Noise or mode amplitude for `phi` and the bulk perturbation of `u`.
    pub amplitude: f64,
    pub seed: u64,
    /// Highest wavenumber of band-limited perturbations.
    #[serde(default = "default_band")]
    pub band: usize,
    /// Amplitude of the band-limited perturbation of `u`; `amplitude` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

fn default_band() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write a CSV row every this many steps (the final step is always written).
    pub csv_every: usize,
    /// Write snapshots every this many steps; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), csv_every: 10, snapshot_every: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub newton_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { damping: 0.5, tol: 1e-9, max_iters: 20_000, newton_tol: 1e-11 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub geometry: GeometryConfig,
    pub params: ParamsConfig,
    pub exchange: ExchangeConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    /// The reference setup: unit torus on a 64 grid over a unit-depth slab,
    /// `eps = 0.04`, `delta = 0.1`, non-equilibrium exchange with unit rates.
    pub fn reference() -> Self {
        RunConfig {
            model: ModelKind::Full,
            geometry: GeometryConfig { length: 1.0, n: 64, depth: 1.0, modes: 16 },
            params: ParamsConfig { eps: 0.04, delta: 0.1, diffusivity: 1.0, dt: 1e-4, t_end: 0.2, stab: None },
            exchange: ExchangeConfig { kind: ExchangeKind::Noneq, c: 0.0, c1: 1.0, c2: 1.0, blend_width: None },
            initial: InitialConfig {
                kind: InitialKind::Noise,
                lipid_mass: -0.4,
                cholesterol_mass: 1.0,
                u_mean: 0.5,
                amplitude: 0.05,
                seed: 42,
                band: 2,
                u_amplitude: None,
                snapshot: None,
            },
            output: OutputConfig::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Collects every violated constraint into one report.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut problems = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_string());
            }
        };
        let g = &self.geometry;
        need(g.length.is_finite() && g.length > 0.0, "geometry.length must be positive");
        need(g.n >= 4 && g.n.is_multiple_of(2), "geometry.n must be even and at least 4");
        need(g.depth.is_finite() && g.depth > 0.0, "geometry.depth must be positive");
        need(g.modes >= 1, "geometry.modes must be at least 1");
        let p = &self.params;
        need(p.eps.is_finite() && p.eps >= MIN_SCALE, "params.eps must be at least 1e-8");
        need(p.delta.is_finite() && p.delta >= MIN_SCALE, "params.delta must be at least 1e-8");
        need(p.diffusivity.is_finite() && p.diffusivity > 0.0, "params.diffusivity must be positive");
        need(p.dt.is_finite() && p.dt > 0.0, "params.dt must be positive");
        need(p.t_end.is_finite() && p.t_end >= 0.0, "params.t_end must be non-negative");
        need(p.stab.is_none_or(|s| s.is_finite() && s >= 0.0), "params.stab must be non-negative");
        let x = &self.exchange;
        match x.kind {
            ExchangeKind::Equilibrium => need(x.c.is_finite() && x.c >= 0.0, "exchange.c must be non-negative"),
            _ => need(
                x.c1.is_finite() && x.c1 >= 0.0 && x.c2.is_finite() && x.c2 >= 0.0,
                "exchange.c1 and exchange.c2 must be non-negative",
            ),
        }
        if x.kind == ExchangeKind::NoneqCutoff {
            need(self.initial.cholesterol_mass > 0.0, "cutoff exchange needs positive cholesterol_mass");
            need(x.blend_width.is_none_or(|w| w.is_finite() && w > 0.0), "exchange.blend_width must be positive");
        }
        let i = &self.initial;
        need(i.lipid_mass.is_finite(), "initial.lipid_mass must be finite");
        need(i.cholesterol_mass.is_finite(), "initial.cholesterol_mass must be finite");
        need(i.u_mean.is_finite(), "initial.u_mean must be finite");
        need(i.amplitude.is_finite() && i.amplitude >= 0.0, "initial.amplitude must be non-negative");
        need(i.u_amplitude.is_none_or(|a| a.is_finite() && a >= 0.0), "initial.u_amplitude must be non-negative");
        need(i.kind != InitialKind::Snapshot || i.snapshot.is_some(), "snapshot initial data needs initial.snapshot");
        if i.kind == InitialKind::Raft {
            let mean = i.lipid_mass / (g.length * g.length);
            need(mean > -1.0 && mean < 1.0, "raft initial data needs |m/|Gamma|| < 1");
        }
        let o = &self.output;
        need(o.csv_every >= 1, "output.csv_every must be at least 1");
        let s = &self.solver;
        need(s.damping > 0.0 && s.damping <= 1.0, "solver.damping must lie in (0, 1]");
        need(s.tol > 0.0 && s.newton_tol > 0.0, "solver tolerances must be positive");
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Config(problems.join("; ")))
        }
    }

    pub fn torus(&self) -> Result<TorusGeometry, ExperimentError> {
        Ok(TorusGeometry::new(self.geometry.length, self.geometry.n)?)
    }

    pub fn slab(&self) -> Result<SlabGeometry, ExperimentError> {
        Ok(SlabGeometry::new(self.torus()?, self.geometry.depth, self.geometry.modes)?)
    }

    pub fn area(&self) -> f64 {
        self.geometry.length * self.geometry.length
    }

    pub fn volume(&self) -> f64 {
        self.area() * self.geometry.depth
    }

    pub fn steps(&self) -> usize {
        (self.params.t_end / self.params.dt).round() as usize
    }

    pub fn model_params(&self) -> Result<ModelParams, ExperimentError> {
        let p = &self.params;
        let mp = ModelParams::new(p.eps, p.delta, p.diffusivity, p.dt)?;
        Ok(match p.stab {
            Some(s) => mp.with_stab(s)?,
            None => mp,
        })
    }

    pub fn law(&self) -> Result<ExchangeLaw, ExperimentError> {
        let x = &self.exchange;
        let law = match x.kind {
            ExchangeKind::Equilibrium => ExchangeLaw::Equilibrium { c: x.c },
            ExchangeKind::Noneq => ExchangeLaw::NonEquilibrium { c1: x.c1, c2: x.c2 },
            ExchangeKind::NoneqCutoff => {
                let level = self.initial.cholesterol_mass / self.volume();
                let cutoff = match x.blend_width {
                    Some(w) => CutoffFunction::new(level, w),
                    None => CutoffFunction::with_default_width(level),
                }
                .ok_or_else(|| ExperimentError::Config("invalid cutoff level or width".into()))?;
                ExchangeLaw::CutoffNonEquilibrium { c1: x.c1, c2: x.c2, cutoff }
            }
        };
        if !law.is_valid() {
            return Err(ExperimentError::Config("invalid exchange law".into()));
        }
        Ok(law)
    }

    pub fn stationary_config(&self) -> Result<StationaryConfig, ExperimentError> {
        let mut sc = StationaryConfig::new(
            self.initial.lipid_mass,
            self.initial.cholesterol_mass,
            self.law()?,
            self.model_params()?,
            self.volume(),
        );
        sc.damping = self.solver.damping;
        sc.tol = self.solver.tol;
        sc.max_iters = self.solver.max_iters;
        sc.newton_tol = self.solver.newton_tol;
        Ok(sc)
    }
}
