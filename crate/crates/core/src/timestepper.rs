//! First-order IMEX time integration.
//!
//! Diffusion is backward Euler (an M-matrix solve, so it never creates
//! negative values); taxis and every source term are forward Euler, with the
//! taxis flux upwinded. `h` has no diffusion and is advanced explicitly.
//!
//! A second formulation advances `z = c1 exp(−(b/a1)(h − h_ref))` instead of
//! `c1`. There the taxis term is absorbed into a variable-coefficient
//! diffusion `a1 e^{−κh} ∇·(e^{κh} ∇z)`, which is treated implicitly with the
//! coefficients frozen at the old time level. The constant shift `h_ref` only
//! rescales `z` and keeps the exponentials in range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{max_face_speed, taxis_divergence_upwind, total_mass, FieldSet, Grid};
use crate::linalg::{FaceWeights, ImplicitDiffusion};
use crate::model::{reaction_c1, reaction_c2, reaction_h, validate_sensitivity, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImexConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Relative residual required of iterative implicit solves.
    pub linear_tol: f64,
    pub cfl_safety: f64,
    pub check_invariants: bool,
    pub max_linear_iterations: usize,
}

impl Default for ImexConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            linear_tol: 1e-10,
            cfl_safety: 0.9,
            check_invariants: true,
            max_linear_iterations: 20_000,
        }
    }
}

impl ImexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::ParamDomain {
                name: "dt",
                value: self.dt,
                reason: "time step must be positive",
            });
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::ParamDomain {
                name: "t_end",
                value: self.t_end,
                reason: "final time must be finite and nonnegative",
            });
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::ParamDomain {
                name: "cfl_safety",
                value: self.cfl_safety,
                reason: "must lie in (0, 1]",
            });
        }
        if !(self.linear_tol > 0.0 && self.linear_tol <= 1e-4) {
            return Err(Error::ParamDomain {
                name: "linear_tol",
                value: self.linear_tol,
                reason: "must lie in (0, 1e-4]",
            });
        }
        Ok(())
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }
}

fn implicit_solve(op: &ImplicitDiffusion<'_>, rhs: &[f64], guess: &[f64], cfg: &ImexConfig) -> Result<Vec<f64>> {
    let mut u = guess.to_vec();
    op.solve(rhs, &mut u, cfg.linear_tol, cfg.max_linear_iterations)?;
    Ok(u)
}

fn ensure_finite(fields: &FieldSet) -> Result<()> {
    match fields.first_nonfinite() {
        Some(field) => Err(Error::Divergence {
            field,
            context: "after IMEX step".into(),
        }),
        None => Ok(()),
    }
}

fn explicit_h(p: &ModelParams, c2: &[f64], h: &[f64], dt: f64) -> Vec<f64> {
    c2.iter().zip(h).map(|(&c2, &h)| h + dt * reaction_h(p, c2, h)).collect()
}

/// One IMEX step of the original `(c1, c2, h)` system with step `cfg.dt`.
pub fn step_imex(grid: &Grid, fields: &FieldSet, p: &ModelParams, b: f64, cfg: &ImexConfig) -> Result<FieldSet> {
    fields.check(grid)?;
    let dt = cfg.dt;
    let FieldSet { c1, c2, h } = fields;
    let taxis = taxis_divergence_upwind(grid, c1, h, b)?;

    let rhs1: Vec<f64> = (0..grid.len())
        .map(|k| c1[k] + dt * (taxis[k] + reaction_c1(p, c1[k], c2[k])))
        .collect();
    let rhs2: Vec<f64> = (0..grid.len())
        .map(|k| c2[k] + dt * reaction_c2(p, c1[k], c2[k]))
        .collect();

    let next = FieldSet {
        c1: implicit_solve(&ImplicitDiffusion::new(grid, dt * p.a1), &rhs1, c1, cfg)?,
        c2: implicit_solve(&ImplicitDiffusion::new(grid, dt * p.a2), &rhs2, c2, cfg)?,
        h: explicit_h(p, c2, h, dt),
    };
    ensure_finite(&next)?;
    Ok(next)
}

/// State of the transformed system: `z = c1 exp(−κ (h − h_ref))`, `κ = b/a1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZFieldSet {
    pub z: Vec<f64>,
    pub c2: Vec<f64>,
    pub h: Vec<f64>,
    pub kappa: f64,
    pub h_ref: f64,
}

impl ZFieldSet {
    pub fn from_fields(fields: &FieldSet, p: &ModelParams, b: f64) -> Self {
        let kappa = b / p.a1;
        let (lo, hi) = fields
            .h
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let h_ref = if kappa == 0.0 { 0.0 } else { 0.5 * (lo + hi) };
        let z = fields
            .c1
            .iter()
            .zip(&fields.h)
            .map(|(c1, h)| c1 * (-kappa * (h - h_ref)).exp())
            .collect();
        Self {
            z,
            c2: fields.c2.clone(),
            h: fields.h.clone(),
            kappa,
            h_ref,
        }
    }

    /// `exp(κ (h − h_ref))` at every node.
    fn exp_factors(&self) -> Vec<f64> {
        self.h.iter().map(|h| (self.kappa * (h - self.h_ref)).exp()).collect()
    }

    pub fn c1(&self) -> Vec<f64> {
        self.z.iter().zip(self.exp_factors()).map(|(z, e)| z * e).collect()
    }

    pub fn to_fields(&self) -> FieldSet {
        FieldSet {
            c1: self.c1(),
            c2: self.c2.clone(),
            h: self.h.clone(),
        }
    }
}

/// One IMEX step of the transformed `(z, c2, h)` system.
pub fn step_imex_z(grid: &Grid, state: &ZFieldSet, p: &ModelParams, b: f64, cfg: &ImexConfig) -> Result<ZFieldSet> {
    grid.check_shape(&state.z)?;
    grid.check_shape(&state.c2)?;
    grid.check_shape(&state.h)?;
    let kappa = state.kappa;
    if (kappa - b / p.a1).abs() > 1e-12 * kappa.abs() {
        return Err(Error::Domain("z-state was built for a different b/a1".into()));
    }
    let dt = cfg.dt;
    let (z, c2, h) = (&state.z, &state.c2, &state.h);
    let e = state.exp_factors();

    let mut rhs_z = Vec::with_capacity(grid.len());
    let mut rhs2 = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let c1 = z[k] * e[k];
        let growth = p.beta * p.logistic_factor(c1, c2[k]) - kappa * reaction_h(p, c2[k], h[k]);
        let source = -p.alpha * z[k] + p.delta * c2[k] / e[k] + z[k] * growth;
        rhs_z.push(e[k] * (z[k] + dt * source));
        rhs2.push(c2[k] + dt * reaction_c2(p, c1, c2[k]));
    }

    let z_next = if kappa == 0.0 {
        implicit_solve(&ImplicitDiffusion::new(grid, dt * p.a1), &rhs_z, z, cfg)?
    } else {
        let weights = FaceWeights::exponential(grid, h, kappa, state.h_ref);
        let op = ImplicitDiffusion::new(grid, dt * p.a1)
            .with_mass(&e)
            .with_face_weights(&weights);
        implicit_solve(&op, &rhs_z, z, cfg)?
    };

    let next = ZFieldSet {
        z: z_next,
        c2: implicit_solve(&ImplicitDiffusion::new(grid, dt * p.a2), &rhs2, c2, cfg)?,
        h: explicit_h(p, c2, h, dt),
        kappa,
        h_ref: state.h_ref,
    };
    for (name, v) in [("z", &next.z), ("c2", &next.c2), ("h", &next.h)] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                field: name,
                context: "after transformed IMEX step".into(),
            });
        }
    }
    Ok(next)
}

/// Largest stable explicit step:
/// `safety · min(d / (2·dim·max|b ∂h|), 1/(α+β+δ), 1/(γ1 max c2))`, capped at `cfg.dt`.
pub fn suggest_dt(grid: &Grid, fields: &FieldSet, p: &ModelParams, b: f64, cfg: &ImexConfig) -> f64 {
    let vmax = max_face_speed(grid, &fields.h, b);
    let taxis_limit = if vmax > 0.0 {
        grid.min_spacing() / (2.0 * grid.dim() as f64 * vmax)
    } else {
        f64::INFINITY
    };
    let rate_limit = 1.0 / (p.beta + p.alpha + p.delta);
    let c2_max = fields.c2.iter().copied().fold(0.0, f64::max);
    let uptake_limit = if c2_max > 0.0 {
        1.0 / (p.gamma1 * c2_max)
    } else {
        f64::INFINITY
    };
    (cfg.cfl_safety * taxis_limit.min(rate_limit).min(uptake_limit)).min(cfg.dt)
}

/// Per-step monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub min_c1: f64,
    pub min_c2: f64,
    pub min_h: f64,
    pub mass_c1: f64,
    pub mass_c2: f64,
    pub max_h: f64,
    pub max_taxis_speed: f64,
    /// `dt · max speed / min spacing` of the step that produced this state.
    pub cfl_ratio: f64,
}

pub fn diagnostics(grid: &Grid, fields: &FieldSet, b: f64, dt: f64, t: f64) -> Result<StepDiagnostics> {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_taxis_speed = max_face_speed(grid, &fields.h, b);
    Ok(StepDiagnostics {
        t,
        min_c1: min(&fields.c1),
        min_c2: min(&fields.c2),
        min_h: min(&fields.h),
        mass_c1: total_mass(grid, &fields.c1)?,
        mass_c2: total_mass(grid, &fields.c2)?,
        max_h: fields.h.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_taxis_speed,
        cfl_ratio: dt * max_taxis_speed / grid.min_spacing(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTolerances {
    /// Allowed negativity, relative to the field scale.
    pub negativity: f64,
    /// Relative slack on the mass and `h` bounds.
    pub slack: f64,
}

impl Default for BoundTolerances {
    fn default() -> Self {
        Self {
            negativity: 1e-10,
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundViolation {
    Negative { field: &'static str, min: f64, t: f64 },
    MassBound { mass: f64, bound: f64, t: f64 },
    HBound { max_h: f64, bound: f64, t: f64 },
}

/// Checks nonnegativity, the exponential mass bound
/// `∫c1 + ∫c2 ≤ (∫c1⁰ + ∫c2⁰) e^{βt}`, and the sup bound
/// `h ≤ max(max h₀, γ2/(γ1 Kc2))`.
pub fn check_bounds(
    diag: &StepDiagnostics,
    p: &ModelParams,
    initial_mass: f64,
    h0_max: f64,
    tol: &BoundTolerances,
) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    let h_bound = h0_max.max(p.h_ceiling());
    let scale = h_bound.max(1.0);
    for (field, min) in [("c1", diag.min_c1), ("c2", diag.min_c2), ("h", diag.min_h)] {
        if min < -tol.negativity * scale {
            out.push(BoundViolation::Negative { field, min, t: diag.t });
        }
    }
    let mass = diag.mass_c1 + diag.mass_c2;
    let bound = initial_mass * (p.beta * diag.t).exp();
    if mass > bound * (1.0 + tol.slack) {
        out.push(BoundViolation::MassBound { mass, bound, t: diag.t });
    }
    if diag.max_h > h_bound * (1.0 + tol.slack) {
        out.push(BoundViolation::HBound {
            max_h: diag.max_h,
            bound: h_bound,
            t: diag.t,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dt", rename_all = "snake_case", deny_unknown_fields)]
pub enum DtPolicy {
    Fixed(f64),
    /// `suggest_dt` each step, never above the given cap.
    Auto(f64),
}

impl DtPolicy {
    pub fn cap(&self) -> f64 {
        match *self {
            DtPolicy::Fixed(dt) | DtPolicy::Auto(dt) => dt,
        }
    }
}

/// A running simulation of the original formulation with bound monitoring.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: Grid,
    pub params: ModelParams,
    pub b: f64,
    pub fields: FieldSet,
    pub t: f64,
    pub steps: usize,
    pub cfg: ImexConfig,
    pub policy: DtPolicy,
    pub tolerances: BoundTolerances,
    initial_mass: f64,
    h0_max: f64,
    pub violations: Vec<BoundViolation>,
    pub cfl_warnings: usize,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Simulation {
    pub fn new(grid: Grid, params: ModelParams, b: f64, fields: FieldSet, cfg: ImexConfig, policy: DtPolicy) -> Result<Self> {
        params.validate_relaxed()?;
        validate_sensitivity(b)?;
        cfg.validate()?;
        cfg.with_dt(policy.cap()).validate()?;
        fields.check(&grid)?;
        if let Some(field) = fields.first_nonfinite() {
            return Err(Error::Divergence {
                field,
                context: "initial condition".into(),
            });
        }
        let initial_mass = total_mass(&grid, &fields.c1)? + total_mass(&grid, &fields.c2)?;
        let h0_max = fields.h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            grid,
            params,
            b,
            fields,
            t: 0.0,
            steps: 0,
            cfg,
            policy,
            tolerances: BoundTolerances::default(),
            initial_mass,
            h0_max,
            violations: Vec::new(),
            cfl_warnings: 0,
            dt_min: f64::INFINITY,
            dt_max: 0.0,
        })
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    pub fn h0_max(&self) -> f64 {
        self.h0_max
    }

    pub fn diagnostics(&self, dt: f64) -> Result<StepDiagnostics> {
        diagnostics(&self.grid, &self.fields, self.b, dt, self.t)
    }

    fn planned_dt(&self) -> f64 {
        match self.policy {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Auto(cap) => suggest_dt(&self.grid, &self.fields, &self.params, self.b, &self.cfg.with_dt(cap)),
        }
    }

    /// Takes one step of at most `limit`.
    pub fn step(&mut self, limit: f64) -> Result<StepDiagnostics> {
        let dt = self.planned_dt().min(limit);
        let vmax = max_face_speed(&self.grid, &self.fields.h, self.b);
        if dt * 2.0 * self.grid.dim() as f64 * vmax > self.grid.min_spacing() {
            self.cfl_warnings += 1;
        }
        let next = step_imex(&self.grid, &self.fields, &self.params, self.b, &self.cfg.with_dt(dt)).map_err(|e| match e {
            Error::Divergence { field, .. } => Error::Divergence {
                field,
                context: format!("step {}, t = {}", self.steps + 1, self.t + dt),
            },
            other => other,
        })?;
        self.fields = next;
        self.steps += 1;
        self.t += dt;
        self.dt_min = self.dt_min.min(dt);
        self.dt_max = self.dt_max.max(dt);
        let diag = self.diagnostics(dt)?;
        if self.cfg.check_invariants {
            let found = check_bounds(&diag, &self.params, self.initial_mass, self.h0_max, &self.tolerances);
            self.violations.extend(found);
        }
        Ok(diag)
    }

    /// Steps until `t_target` is reached exactly, calling `observer` after
    /// every step.
    pub fn advance_to(&mut self, t_target: f64, mut observer: impl FnMut(&StepDiagnostics, &FieldSet)) -> Result<()> {
        // guards against a sliver step from accumulated round-off
        let eps = 1e-12 * t_target.abs().max(1.0);
        while self.t < t_target - eps {
            let remaining = t_target - self.t;
            let mut diag = self.step(remaining)?;
            if (t_target - self.t).abs() <= eps {
                self.t = t_target;
                diag.t = t_target;
            }
            observer(&diag, &self.fields);
        }
        Ok(())
    }
}
