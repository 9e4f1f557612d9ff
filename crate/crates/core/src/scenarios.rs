//! Built-in scenarios, run configuration, and the run driver that writes
//! snapshots, time series, heatmaps and a manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Domain, FieldSet, Grid};
use crate::io::{snapshot_file_name, write_heatmap, write_snapshot, write_timeseries};
use crate::model::{steady_state, validate_sensitivity, ModelParams, SteadyState};
use crate::stability::critical_b;
use crate::timestepper::{BoundViolation, DtPolicy, ImexConfig, Simulation, StepDiagnostics};

pub const DEFAULT_NODES_1D: usize = 401;
pub const DEFAULT_NODES_2D: usize = 101;
/// Cap of the default `auto` time-step policy.
pub const DEFAULT_DT_CAP: f64 = 0.01;
pub const DEFAULT_TIMESERIES_STRIDE: usize = 10;
/// Name given to configs that do not start from a built-in scenario.
pub const CUSTOM_SCENARIO: &str = "custom";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub nx: usize,
    /// Ignored for intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
}

impl Resolution {
    pub fn default_for(domain: &Domain) -> Self {
        match domain {
            Domain::Interval { .. } => Self {
                nx: DEFAULT_NODES_1D,
                ny: None,
            },
            Domain::Rectangle { .. } => Self {
                nx: DEFAULT_NODES_2D,
                ny: Some(DEFAULT_NODES_2D),
            },
        }
    }
}

/// Unperturbed value of a field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcBase {
    /// The homogeneous steady state of the model parameters.
    #[default]
    Steady,
    Constant { value: f64 },
}

/// Additive perturbation; `x` is the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// `amplitude · exp(−|x − center|² / width)`.
    Gaussian { amplitude: f64, center: Vec<f64>, width: f64 },
    /// `amplitude · cos(wavenumber · (x − shift))`.
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `amplitude · U`, with `U` i.i.d. uniform on (0, 1) per node.
    UniformNoise { amplitude: f64 },
    /// `amplitude · U · cos(wavenumber · (x − shift))`.
    ModulatedNoise {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        shift: f64,
    },
}

impl Perturbation {
    fn amplitude(&self) -> f64 {
        match *self {
            Perturbation::Gaussian { amplitude, .. }
            | Perturbation::Cosine { amplitude, .. }
            | Perturbation::UniformNoise { amplitude }
            | Perturbation::ModulatedNoise { amplitude, .. } => amplitude,
        }
    }

    fn uses_noise(&self) -> bool {
        matches!(self, Perturbation::UniformNoise { .. } | Perturbation::ModulatedNoise { .. })
    }

    fn validate(&self, dim: usize, key: &str) -> Result<()> {
        let bad = |message: String| Error::Parse {
            key: key.to_string(),
            message,
        };
        if !self.amplitude().is_finite() {
            return Err(bad("amplitude must be finite".into()));
        }
        match self {
            Perturbation::Gaussian { center, width, .. } => {
                if center.len() != dim || center.iter().any(|c| !c.is_finite()) {
                    return Err(bad(format!("gaussian center needs {dim} finite coordinates")));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(bad("gaussian width must be finite and positive".into()));
                }
            }
            Perturbation::Cosine { wavenumber, shift, .. } | Perturbation::ModulatedNoise { wavenumber, shift, .. } => {
                if !wavenumber.is_finite() || !shift.is_finite() {
                    return Err(bad("wavenumber and shift must be finite".into()));
                }
            }
            Perturbation::UniformNoise { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldIc {
    #[serde(default)]
    pub base: IcBase,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
}

impl FieldIc {
    pub fn steady_plus(perturbations: Vec<Perturbation>) -> Self {
        Self {
            base: IcBase::Steady,
            perturbations,
        }
    }

    fn uses_noise(&self) -> bool {
        self.perturbations.iter().any(Perturbation::uses_noise)
    }

    fn evaluate(&self, grid: &Grid, steady_value: Option<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let base = match self.base {
            IcBase::Steady => steady_value.ok_or_else(|| Error::Domain("steady-state base requires a steady state".into()))?,
            IcBase::Constant { value } => value,
        };
        let mut u = vec![base; grid.len()];
        for pert in &self.perturbations {
            match pert {
                Perturbation::Gaussian {
                    amplitude,
                    center,
                    width,
                } => {
                    let cy = center.get(1).copied().unwrap_or(0.0);
                    for (v, (x, y)) in u.iter_mut().zip(grid.coordinates()) {
                        let r2 = (x - center[0]).powi(2) + if grid.dim() == 2 { (y - cy).powi(2) } else { 0.0 };
                        *v += amplitude * (-r2 / width).exp();
                    }
                }
                Perturbation::Cosine {
                    amplitude,
                    wavenumber,
                    shift,
                } => {
                    for (v, (x, _)) in u.iter_mut().zip(grid.coordinates()) {
                        *v += amplitude * (wavenumber * (x - shift)).cos();
                    }
                }
                Perturbation::UniformNoise { amplitude } => {
                    for v in u.iter_mut() {
                        let draw: f64 = rng.sample(Open01);
                        *v += amplitude * draw;
                    }
                }
                Perturbation::ModulatedNoise {
                    amplitude,
                    wavenumber,
                    shift,
                } => {
                    for (v, (x, _)) in u.iter_mut().zip(grid.coordinates()) {
                        let draw: f64 = rng.sample(Open01);
                        *v += amplitude * draw * (wavenumber * (x - shift)).cos();
                    }
                }
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcRecipe {
    pub c1: FieldIc,
    pub c2: FieldIc,
    pub h: FieldIc,
}

impl IcRecipe {
    fn fields(&self) -> [(&'static str, &FieldIc); 3] {
        [("c1", &self.c1), ("c2", &self.c2), ("h", &self.h)]
    }

    pub fn uses_noise(&self) -> bool {
        self.fields().iter().any(|(_, f)| f.uses_noise())
    }

    fn uses_steady_base(&self) -> bool {
        self.fields().iter().any(|(_, f)| f.base == IcBase::Steady)
    }

    /// Samples the initial fields. Noise for field `i` (c1 = 0, c2 = 1,
    /// h = 2) comes from stream `i` of a ChaCha8 generator seeded with
    /// `seed`, drawn in node order.
    pub fn evaluate(&self, grid: &Grid, params: &ModelParams, seed: Option<u64>) -> Result<FieldSet> {
        if self.uses_noise() && seed.is_none() {
            return Err(Error::Parse {
                key: "seed".into(),
                message: "a seed is required when the initial condition uses noise".into(),
            });
        }
        let steady = if self.uses_steady_base() {
            Some(steady_state(params)?)
        } else {
            None
        };
        let star = [
            steady.map(|s| s.c1_star),
            steady.map(|s| s.c2_star),
            steady.map(|s| s.h_star),
        ];
        let mut out = Vec::with_capacity(3);
        for (stream, ((_, field), star)) in self.fields().into_iter().zip(star).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            rng.set_stream(stream as u64);
            out.push(field.evaluate(grid, star, &mut rng)?);
        }
        let h = out.pop().expect("three fields");
        let c2 = out.pop().expect("three fields");
        let c1 = out.pop().expect("three fields");
        Ok(FieldSet { c1, c2, h })
    }
}

/// A fully resolved simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub domain: Domain,
    pub resolution: Resolution,
    pub params: ModelParams,
    pub b: f64,
    pub ic: IcRecipe,
    pub t_end: f64,
    pub output_times: Vec<f64>,
    pub dt_policy: DtPolicy,
    pub seed: Option<u64>,
    /// PGM heatmaps at every output time (2D only).
    pub heatmaps: bool,
    /// Time-series rows are recorded every this many steps, plus at output times.
    pub timeseries_stride: usize,
}

fn default_output_times(t_end: f64) -> Vec<f64> {
    (0..=4).map(|i| t_end * i as f64 / 4.0).collect()
}

impl ScenarioSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain, self.resolution.nx, self.resolution.ny.unwrap_or(1))
    }

    pub fn initial_fields(&self, grid: &Grid) -> Result<FieldSet> {
        self.ic.evaluate(grid, &self.params, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Error::Parse {
            key: key.into(),
            message: message.into(),
        };
        self.domain.validate()?;
        self.params.validate_relaxed()?;
        validate_sensitivity(self.b)?;
        if let (Domain::Rectangle { .. }, None) = (self.domain, self.resolution.ny) {
            return Err(bad("resolution.ny", "rectangles need ny"));
        }
        self.grid()?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(bad("time.t_end", "must be finite and positive"));
        }
        if self.output_times.iter().any(|t| !(0.0..=self.t_end).contains(t)) {
            return Err(bad("output.times", "every output time must lie in [0, t_end]"));
        }
        if self.output_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("output.times", "must be strictly increasing"));
        }
        if self.timeseries_stride == 0 {
            return Err(bad("output.timeseries_stride", "must be at least 1"));
        }
        let cap = self.dt_policy.cap();
        if !(cap.is_finite() && cap > 0.0) {
            return Err(bad("time.dt_policy", "dt must be finite and positive"));
        }
        for (name, field) in self.ic.fields() {
            if let IcBase::Constant { value } = field.base {
                if !value.is_finite() {
                    return Err(bad(&format!("ic.{name}.base"), "value must be finite"));
                }
            }
            for pert in &field.perturbations {
                pert.validate(self.domain.dim(), &format!("ic.{name}.perturbations"))?;
            }
        }
        if self.ic.uses_noise() && self.seed.is_none() {
            return Err(bad("seed", "required when the initial condition uses noise"));
        }
        if self.ic.uses_steady_base() {
            steady_state(&self.params)?;
        }
        Ok(())
    }

    /// The scenario rendered in the config schema with every key explicit;
    /// [`parse_config`] maps it back to an identical spec.
    pub fn to_config(&self) -> serde_json::Value {
        let mut cfg = serde_json::json!({
            "geometry": self.domain,
            "resolution": self.resolution,
            "params": self.params,
            "b": self.b,
            "ic": self.ic,
            "time": { "t_end": self.t_end, "dt_policy": self.dt_policy },
            "output": {
                "times": self.output_times,
                "heatmaps": self.heatmaps,
                "timeseries_stride": self.timeseries_stride,
            },
        });
        if self.name != CUSTOM_SCENARIO {
            cfg["scenario"] = self.name.clone().into();
        }
        if let Some(seed) = self.seed {
            cfg["seed"] = seed.into();
        }
        cfg
    }
}

fn gaussian_bump(center: Vec<f64>, amplitude: f64) -> Perturbation {
    Perturbation::Gaussian {
        amplitude,
        center,
        width: 0.2,
    }
}

/// Default seed of the built-in noisy scenarios.
pub const BUILTIN_SEED: u64 = 1;

fn one_d(name: &str, length: f64, b: f64, ic: IcRecipe) -> ScenarioSpec {
    let t_end = 200.0;
    ScenarioSpec {
        name: name.into(),
        domain: Domain::Interval { length },
        resolution: Resolution::default_for(&Domain::Interval { length }),
        params: ModelParams::default(),
        b,
        ic,
        t_end,
        output_times: default_output_times(t_end),
        dt_policy: DtPolicy::Auto(DEFAULT_DT_CAP),
        seed: None,
        heatmaps: false,
        timeseries_stride: DEFAULT_TIMESERIES_STRIDE,
    }
}

fn two_d(name: &str, h_perturbation: Perturbation) -> ScenarioSpec {
    let domain = Domain::Rectangle { lx: 10.0, ly: 10.0 };
    let blob = |amplitude| FieldIc::steady_plus(vec![gaussian_bump(vec![5.0, 5.0], amplitude)]);
    ScenarioSpec {
        name: name.into(),
        domain,
        resolution: Resolution::default_for(&domain),
        params: ModelParams::default(),
        b: 3.7,
        ic: IcRecipe {
            c1: blob(1e-6),
            c2: blob(1e-9),
            h: FieldIc {
                base: IcBase::Constant { value: 1.0 },
                perturbations: vec![h_perturbation],
            },
        },
        t_end: 21.0,
        output_times: vec![0.0, 7.0, 14.0, 21.0],
        dt_policy: DtPolicy::Auto(DEFAULT_DT_CAP),
        seed: Some(BUILTIN_SEED),
        heatmaps: true,
        timeseries_stride: DEFAULT_TIMESERIES_STRIDE,
    }
}

/// The 1D scenarios 1-4 and the two 2D experiments.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let bump = || FieldIc::steady_plus(vec![gaussian_bump(vec![0.5], 0.1)]);
    let stripes = || {
        FieldIc::steady_plus(vec![Perturbation::Cosine {
            amplitude: 0.01,
            wavenumber: 4.0 * PI / 10.0,
            shift: 5.0,
        }])
    };
    let mut out = Vec::new();
    for b in [3.7, 1.8] {
        out.push(one_d(
            &format!("scenario1-b{b}"),
            1.0,
            b,
            IcRecipe {
                c2: bump(),
                ..IcRecipe::default()
            },
        ));
    }
    for b in [3.7, 1.8] {
        out.push(one_d(
            &format!("scenario2-b{b}"),
            1.0,
            b,
            IcRecipe {
                c1: bump(),
                ..IcRecipe::default()
            },
        ));
    }
    out.push(one_d(
        "scenario3-b3.7",
        1.0,
        3.7,
        IcRecipe {
            h: bump(),
            ..IcRecipe::default()
        },
    ));
    for b in [3.7, 1.8] {
        out.push(one_d(
            &format!("scenario4-b{b}"),
            10.0,
            b,
            IcRecipe {
                c1: stripes(),
                h: stripes(),
                ..IcRecipe::default()
            },
        ));
    }
    out.push(two_d("2d-gaussian", Perturbation::UniformNoise { amplitude: 1e-6 }));
    out.push(two_d(
        "2d-cosine",
        Perturbation::ModulatedNoise {
            amplitude: 1e-6,
            wavenumber: 4.0 * PI / 10.0,
            shift: 5.0,
        },
    ));
    out
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioSpec> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Parse {
            key: "scenario".into(),
            message: format!("unknown scenario `{name}`"),
        })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamOverrides {
    a1: Option<f64>,
    a2: Option<f64>,
    alpha: Option<f64>,
    delta: Option<f64>,
    beta: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    #[serde(rename = "Kc1", alias = "kc1")]
    kc1: Option<f64>,
    #[serde(rename = "Kc2", alias = "kc2")]
    kc2: Option<f64>,
    logistic_k2_variant: Option<bool>,
}

impl ParamOverrides {
    fn apply(&self, p: &mut ModelParams) {
        let pairs = [
            (&mut p.a1, self.a1),
            (&mut p.a2, self.a2),
            (&mut p.alpha, self.alpha),
            (&mut p.delta, self.delta),
            (&mut p.beta, self.beta),
            (&mut p.gamma1, self.gamma1),
            (&mut p.gamma2, self.gamma2),
            (&mut p.kc1, self.kc1),
            (&mut p.kc2, self.kc2),
        ];
        for (slot, value) in pairs {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(v) = self.logistic_k2_variant {
            p.logistic_k2_variant = v;
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IcOverrides {
    c1: Option<FieldIc>,
    c2: Option<FieldIc>,
    h: Option<FieldIc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t_end: Option<f64>,
    dt_policy: Option<DtPolicy>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    times: Option<Vec<f64>>,
    heatmaps: Option<bool>,
    timeseries_stride: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Option<String>,
    geometry: Option<Domain>,
    resolution: Option<Resolution>,
    params: Option<ParamOverrides>,
    b: Option<f64>,
    ic: Option<IcOverrides>,
    time: Option<TimeSection>,
    output: Option<OutputSection>,
    seed: Option<u64>,
}

fn missing(key: &str) -> Error {
    Error::Parse {
        key: key.into(),
        message: "required when no built-in `scenario` is named".into(),
    }
}

/// Parses a JSON run configuration. Keys absent from the file come from the
/// named built-in scenario, or from the defaults of a custom run.
pub fn parse_config(text: &str) -> Result<ScenarioSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        key: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let mut spec = match &cfg.scenario {
        Some(name) => builtin_scenario(name)?,
        None => {
            let domain = cfg.geometry.ok_or_else(|| missing("geometry"))?;
            let t_end = cfg.time.as_ref().and_then(|t| t.t_end).ok_or_else(|| missing("time.t_end"))?;
            ScenarioSpec {
                name: CUSTOM_SCENARIO.into(),
                domain,
                resolution: Resolution::default_for(&domain),
                params: ModelParams::default(),
                b: cfg.b.ok_or_else(|| missing("b"))?,
                ic: IcRecipe::default(),
                t_end,
                output_times: default_output_times(t_end),
                dt_policy: DtPolicy::Auto(DEFAULT_DT_CAP),
                seed: None,
                heatmaps: domain.dim() == 2,
                timeseries_stride: DEFAULT_TIMESERIES_STRIDE,
            }
        }
    };

    if let Some(domain) = cfg.geometry {
        if domain.dim() != spec.domain.dim() {
            spec.resolution = Resolution::default_for(&domain);
            spec.heatmaps = domain.dim() == 2;
        }
        spec.domain = domain;
    }
    if let Some(res) = cfg.resolution {
        spec.resolution = res;
    }
    if let Domain::Interval { .. } = spec.domain {
        spec.resolution.ny = None;
    }
    if let Some(ov) = &cfg.params {
        ov.apply(&mut spec.params);
    }
    if let Some(b) = cfg.b {
        spec.b = b;
    }
    if let Some(ic) = cfg.ic {
        spec.ic.c1 = ic.c1.unwrap_or(spec.ic.c1);
        spec.ic.c2 = ic.c2.unwrap_or(spec.ic.c2);
        spec.ic.h = ic.h.unwrap_or(spec.ic.h);
    }
    let time = cfg.time.unwrap_or_default();
    let output = cfg.output.unwrap_or_default();
    if let Some(t_end) = time.t_end {
        if t_end != spec.t_end && output.times.is_none() {
            spec.output_times = default_output_times(t_end);
        }
        spec.t_end = t_end;
    }
    if let Some(policy) = time.dt_policy {
        spec.dt_policy = policy;
    }
    if let Some(times) = output.times {
        spec.output_times = times;
    }
    if let Some(h) = output.heatmaps {
        spec.heatmaps = h;
    }
    if let Some(s) = output.timeseries_stride {
        spec.timeseries_stride = s;
    }
    if let Some(seed) = cfg.seed {
        spec.seed = Some(seed);
    }
    spec.validate()?;
    Ok(spec)
}

/// `sha256("blob <len>\0<canonical JSON>")` in hex, the object-id scheme of
/// a SHA-256 git repository.
pub fn config_hash(config: &serde_json::Value) -> String {
    let body = serde_json::to_string(config).expect("JSON values always serialize");
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()));
    hasher.update(body.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    /// Resolved config; `parse_config` on it reproduces the run.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub dt_policy: DtPolicy,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub steps: usize,
    pub t_final: f64,
    pub steady_state: Option<SteadyState>,
    pub b_c: Option<f64>,
    pub violations: Vec<BoundViolation>,
    pub cfl_warnings: usize,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub final_fields: FieldSet,
    pub timeseries: Vec<StepDiagnostics>,
}

pub fn build_simulation(spec: &ScenarioSpec) -> Result<Simulation> {
    spec.validate()?;
    let grid = spec.grid()?;
    let fields = spec.initial_fields(&grid)?;
    let cfg = ImexConfig {
        t_end: spec.t_end,
        dt: spec.dt_policy.cap(),
        ..ImexConfig::default()
    };
    Simulation::new(grid, spec.params, spec.b, fields, cfg, spec.dt_policy)
}

struct RunWriter<'a> {
    spec: &'a ScenarioSpec,
    dir: &'a Path,
    outputs: Vec<String>,
}

impl RunWriter<'_> {
    fn path(&mut self, name: String) -> PathBuf {
        let path = self.dir.join(&name);
        self.outputs.push(name);
        path
    }

    fn snapshot(&mut self, grid: &Grid, fields: &FieldSet, t: f64) -> Result<()> {
        let path = self.path(snapshot_file_name(&self.spec.name, t));
        write_snapshot(grid, fields, &path)?;
        if self.spec.heatmaps && grid.dim() == 2 {
            for (field, u) in [("c1", &fields.c1), ("c2", &fields.c2), ("h", &fields.h)] {
                let stem = format!("{}_t{t}_{field}", self.spec.name);
                let pgm = self.path(format!("{stem}.pgm"));
                write_heatmap(grid, u, field, t, &pgm)?;
                self.outputs.push(format!("{stem}.meta"));
            }
        }
        Ok(())
    }
}

/// Runs `spec`, writing snapshots at every output time, the time series,
/// the resolved config and `manifest.json` into `out_dir`. On a numerical
/// failure the time series and manifest are still written before the error
/// is returned.
pub fn run_scenario(spec: &ScenarioSpec, out_dir: &Path) -> Result<RunReport> {
    let started = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut sim = build_simulation(spec)?;
    let config = spec.to_config();
    let config_path = out_dir.join(CONFIG_FILE);
    let config_text = serde_json::to_string_pretty(&config).expect("JSON values always serialize");
    fs::write(&config_path, config_text + "\n").map_err(|e| Error::io(&config_path, e))?;

    let mut writer = RunWriter {
        spec,
        dir: out_dir,
        outputs: vec![CONFIG_FILE.into()],
    };
    let mut timeseries = vec![sim.diagnostics(0.0)?];
    let mut pending: Vec<f64> = spec.output_times.clone();
    if pending.first() == Some(&0.0) {
        writer.snapshot(&sim.grid, &sim.fields, 0.0)?;
        pending.remove(0);
    }

    let stride = spec.timeseries_stride;
    let mut step_count = 0usize;
    let mut outcome: Result<()> = Ok(());
    let targets: Vec<f64> = pending.iter().copied().chain((pending.last() != Some(&spec.t_end)).then_some(spec.t_end)).collect();
    for target in targets {
        let mut last = None;
        let step_result = sim.advance_to(target, |diag, _| {
            last = Some(*diag);
            step_count += 1;
            if step_count % stride == 0 {
                timeseries.push(*diag);
            }
        });
        if let Err(e) = step_result {
            outcome = Err(e);
            break;
        }
        if let Some(diag) = last {
            if timeseries.last().map(|d| d.t) != Some(diag.t) {
                timeseries.push(diag);
            }
        }
        if pending.contains(&target) {
            writer.snapshot(&sim.grid, &sim.fields, target)?;
        }
    }

    let ts_path = writer.path(TIMESERIES_FILE.into());
    write_timeseries(&timeseries, &ts_path)?;

    let status = match &outcome {
        Ok(()) => RunStatus::Completed,
        Err(Error::Divergence { .. }) => RunStatus::Diverged,
        Err(_) => RunStatus::Failed,
    };
    let steady = steady_state(&spec.params).ok();
    let b_c = critical_b(&spec.params, &spec.domain).ok().map(|r| r.b_c);
    let manifest = RunManifest {
        scenario: spec.name.clone(),
        config_hash: config_hash(&config),
        config,
        seed: spec.seed,
        status,
        message: outcome.as_ref().err().map(ToString::to_string),
        dt_policy: spec.dt_policy,
        dt_min: (sim.steps > 0).then_some(sim.dt_min),
        dt_max: (sim.steps > 0).then_some(sim.dt_max),
        steps: sim.steps,
        t_final: sim.t,
        steady_state: steady,
        b_c,
        violations: sim.violations.clone(),
        cfl_warnings: sim.cfl_warnings,
        outputs: {
            let mut names = writer.outputs.clone();
            names.push(MANIFEST_FILE.into());
            names
        },
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    outcome?;
    Ok(RunReport {
        manifest,
        final_fields: sim.fields,
        timeseries,
    })
}

/// Built-in scenario names with a one-line description, for listings.
pub fn describe_builtins() -> BTreeMap<String, String> {
    builtin_scenarios()
        .into_iter()
        .map(|s| {
            let geometry = match s.domain {
                Domain::Interval { length } => format!("interval [0,{length}], N={}", s.resolution.nx),
                Domain::Rectangle { lx, ly } => format!(
                    "rectangle [0,{lx}]x[0,{ly}], {}x{}",
                    s.resolution.nx,
                    s.resolution.ny.unwrap_or(1)
                ),
            };
            (s.name.clone(), format!("{geometry}, b={}, t_end={}", s.b, s.t_end))
        })
        .collect()
}
