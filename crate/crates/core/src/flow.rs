//! Radial form of the flow: ∂_t γ = Ψ(Q) − Ψ(1) with Q = G(X, ν)·F(κ)^{−β},
//! integrated with explicit midpoint steps under a parabolic step bound.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::geometry::{node_curvatures, node_geometry};
use crate::speed::{PsiMode, SpeedSpec};
use crate::spheregrid::{Grid, GridSpec, ScalarField};
use crate::symfunc::{ConeSpec, CurvatureFunctionSpec};

pub const RHO_FLOOR: f64 = 1e-6;
pub const RHO_CEIL: f64 = 1e6;
/// Accepted steps over which the residual decrease is measured for stalls.
pub const STALL_WINDOW: usize = 200;
/// Initial data is rejected when u_min < MIN_SUPPORT_RATIO·ρ_max.
pub const MIN_SUPPORT_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub psi_mode: PsiMode,
    pub beta: f64,
    pub f_spec: CurvatureFunctionSpec,
    pub g_spec: SpeedSpec,
    pub grid: GridSpec,
    pub dt_safety: f64,
    pub t_max: f64,
    pub tol_residual: f64,
    /// Minimum residual decrease over STALL_WINDOW steps; ≤ 0 disables.
    pub tol_stall: f64,
    pub guard: ConeSpec,
    /// Record diagnostics every `cadence` accepted steps.
    pub cadence: usize,
    /// Damp short zonal waves of the tendency near the poles (FullS2 only).
    pub polar_filter: bool,
}

impl FlowConfig {
    pub fn new(
        psi_mode: PsiMode,
        beta: f64,
        f_spec: CurvatureFunctionSpec,
        g_spec: SpeedSpec,
        grid: GridSpec,
    ) -> Self {
        let guard = f_spec.natural_cone();
        Self {
            psi_mode,
            beta,
            f_spec,
            g_spec,
            grid,
            dt_safety: 0.2,
            t_max: 100.0,
            tol_residual: 1e-6,
            tol_stall: 0.0,
            guard,
            cadence: 10,
            polar_filter: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::Config(format!("dt_safety must lie in (0, 1], got {}", self.dt_safety)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be finite and > 0, got {}", self.t_max)));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::Config(format!("tol_residual must be > 0, got {}", self.tol_residual)));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be >= 1".into()));
        }
        if self.guard != self.f_spec.natural_cone() {
            return Err(Error::Config(format!(
                "guard cone {:?} does not match the natural cone {:?} of F",
                self.guard,
                self.f_spec.natural_cone()
            )));
        }
        self.psi_mode.validate()?;
        let n = match self.grid {
            GridSpec::Axisym { n, .. } => n,
            GridSpec::FullS2 { .. } => 2,
        };
        self.f_spec.validate(n)?;
        self.g_spec.validate(n + 1)?;
        if matches!(self.grid, GridSpec::Axisym { .. }) && !self.g_spec.is_axisymmetric() {
            return Err(Error::Config(
                "axisymmetric grid needs psi directions along the rotation axis".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub gamma: ScalarField,
    pub step_index: usize,
}

impl FlowState {
    pub fn new(gamma: ScalarField) -> Self {
        Self { t: 0.0, gamma, step_index: 0 }
    }
}

/// Why a speed evaluation could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowFault {
    ConeExit { node: usize, kappa: Vec<f64>, reason: String },
    StarShapeLost { node: usize, u: f64 },
    Diverged { reason: String },
}

impl fmt::Display for FlowFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowFault::ConeExit { node, kappa, reason } => {
                write!(f, "curvature left the cone at node {node} (kappa = {kappa:?}): {reason}")
            }
            FlowFault::StarShapeLost { node, u } => {
                write!(f, "support function u = {u:e} <= 0 at node {node}")
            }
            FlowFault::Diverged { reason } => write!(f, "diverged: {reason}"),
        }
    }
}

/// Speed and the pointwise quantities computed along the way.
#[derive(Debug, Clone)]
pub struct SpeedField {
    pub n: usize,
    /// Ψ(Q) − Ψ(1).
    pub speed: Vec<f64>,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    /// |Dγ|².
    pub grad_sq: Vec<f64>,
    /// Principal curvatures, stride n.
    pub kappa: Vec<f64>,
    /// min over nodes of Δs²/(2n·D), the step bound before the safety factor.
    pub cfl_limit: f64,
}

impl SpeedField {
    /// ‖Ψ(Q) − Ψ(1)‖_∞.
    pub fn residual(&self) -> f64 {
        self.speed.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn kappa_at(&self, node: usize) -> &[f64] {
        &self.kappa[node * self.n..(node + 1) * self.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Converged,
    Diverged,
    ConeExit,
    StarShapeLost,
    TimeCap,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "Converged",
            RunStatus::Diverged => "Diverged",
            RunStatus::ConeExit => "ConeExit",
            RunStatus::StarShapeLost => "StarShapeLost",
            RunStatus::TimeCap => "TimeCap",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub state: FlowState,
    pub history: Vec<DiagnosticsRecord>,
    pub final_residual: f64,
    pub steps: usize,
    pub wall_seconds: f64,
    /// TimeCap was reached through stall detection.
    pub stalled: bool,
    pub fault: Option<FlowFault>,
}

/// Per-ring spectral damping of the tendency: zonal wavenumber k on ring θ
/// is scaled by min(1, sin²θ / sin²(kΔφ/2)), which caps the zonal stiffness
/// at its equatorial value. Factors are positive, so zeros of the speed are
/// preserved.
struct PolarFilter {
    m: usize,
    rings: Vec<(usize, Vec<f64>)>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl PolarFilter {
    fn new(grid: &Grid) -> Option<Self> {
        if grid.is_axisym() {
            return None;
        }
        let m = grid.m_phi;
        let mut rings = Vec::new();
        for i in 0..grid.m_theta {
            let s2 = grid.sin_theta[i].powi(2);
            let factors: Vec<f64> = (0..m)
                .map(|k| {
                    let kk = k.min(m - k) as f64;
                    let w = (0.5 * kk * grid.dphi).sin().powi(2);
                    if w <= s2 {
                        1.0
                    } else {
                        s2 / w
                    }
                })
                .collect();
            if factors.iter().any(|&f| f < 1.0) {
                rings.push((i, factors));
            }
        }
        let mut planner = FftPlanner::new();
        Some(Self { m, rings, fft: planner.plan_fft_forward(m), ifft: planner.plan_fft_inverse(m) })
    }

    fn apply(&self, values: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.m];
        let scale = 1.0 / self.m as f64;
        for (i, factors) in &self.rings {
            let row = &mut values[i * self.m..(i + 1) * self.m];
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(*v, 0.0);
            }
            self.fft.process(&mut buf);
            for (b, f) in buf.iter_mut().zip(factors) {
                *b *= f * scale;
            }
            self.ifft.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re;
            }
        }
    }
}

/// A configured flow: grid, cached ψ values and filter plans.
pub struct Flow {
    pub config: FlowConfig,
    pub grid: Grid,
    log_psi: Vec<f64>,
    filter: Option<PolarFilter>,
}

impl Flow {
    pub fn new(config: FlowConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::build(config.grid)?;
        let dim = grid.ambient_dim();
        let mut xi = vec![0.0; dim];
        let log_psi = (0..grid.node_count())
            .map(|node| {
                grid.direction_into(node, &mut xi);
                config.g_spec.psi_at(&xi).ln()
            })
            .collect();
        let filter = if config.polar_filter { PolarFilter::new(&grid) } else { None };
        Ok(Self { config, grid, log_psi, filter })
    }

    pub fn filtered(&self) -> bool {
        self.filter.is_some()
    }

    /// Evaluates Ψ(Q) − Ψ(1) at every node of `gamma`.
    pub fn speed_field(&self, gamma: &[f64]) -> std::result::Result<SpeedField, FlowFault> {
        let grid = &self.grid;
        let cfg = &self.config;
        let nodes = grid.node_count();
        let n = grid.n;
        let (a, b, beta) = (cfg.g_spec.a, cfg.g_spec.b, cfg.beta);
        let log_c = cfg.g_spec.c.ln();
        let mode = cfg.psi_mode;
        let mut out = SpeedField {
            n,
            speed: Vec::with_capacity(nodes),
            q: Vec::with_capacity(nodes),
            f: Vec::with_capacity(nodes),
            rho: Vec::with_capacity(nodes),
            u: Vec::with_capacity(nodes),
            grad_sq: Vec::with_capacity(nodes),
            kappa: vec![0.0; nodes * n],
            cfl_limit: f64::INFINITY,
        };
        let mut grad = vec![0.0; n];
        for node in 0..nodes {
            let gv = gamma[node];
            if !gv.is_finite() {
                return Err(FlowFault::Diverged { reason: format!("gamma not finite at node {node}") });
            }
            let geo = node_geometry(grid, gamma, node);
            if !(geo.rho >= RHO_FLOOR && geo.rho <= RHO_CEIL) {
                return Err(FlowFault::Diverged {
                    reason: format!("rho = {:e} at node {node} left [{RHO_FLOOR:e}, {RHO_CEIL:e}]", geo.rho),
                });
            }
            if !(geo.u > 0.0) {
                return Err(FlowFault::StarShapeLost { node, u: geo.u });
            }
            let kap = &mut out.kappa[node * n..(node + 1) * n];
            if let Err(e) = node_curvatures(grid, &geo, kap) {
                return Err(FlowFault::Diverged { reason: e.to_string() });
            }
            if !cfg.guard.contains(kap) {
                let reason = cfg.guard.violation(kap).unwrap_or_default();
                return Err(FlowFault::ConeExit { node, kappa: kap.to_vec(), reason });
            }
            // the guard is the natural cone of F, so κ is admissible here
            let log_f = cfg.f_spec.log_eval_grad_unchecked(kap, &mut grad);
            let log_u = gv - geo.omega.ln();
            let q = (log_c + self.log_psi[node] + a * log_u + b * gv - beta * log_f).exp();
            let speed = mode.speed_unchecked(q);
            if !speed.is_finite() || !(q > 0.0) {
                return Err(FlowFault::Diverged { reason: format!("Q = {q:e} at node {node}") });
            }
            let dlog_max = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let diff = beta * geo.u * mode.prime_unchecked(q) * q * dlog_max;
            let i = grid.ring_of(node);
            let ds = if grid.is_axisym() {
                grid.dtheta
            } else if self.filter.is_some() {
                grid.dtheta.min(grid.dphi)
            } else {
                grid.dtheta.min(grid.sin_theta[i] * grid.dphi)
            } * geo.rho;
            if diff > 0.0 {
                out.cfl_limit = out.cfl_limit.min(ds * ds / (2.0 * n as f64 * diff));
            }
            out.speed.push(speed);
            out.q.push(q);
            out.f.push(log_f.exp());
            out.rho.push(geo.rho);
            out.u.push(geo.u);
            out.grad_sq.push(geo.grad_sq());
        }
        Ok(out)
    }

    /// The field actually added to γ per unit time: the speed, passed through
    /// the polar filter when enabled.
    pub fn tendency(&self, field: &SpeedField) -> Vec<f64> {
        let mut v = field.speed.clone();
        if let Some(filter) = &self.filter {
            filter.apply(&mut v);
        }
        v
    }

    pub fn cfl_dt_from(&self, field: &SpeedField) -> f64 {
        if field.cfl_limit.is_finite() {
            self.config.dt_safety * field.cfl_limit
        } else {
            // no diffusion anywhere; fall back to the spacing alone
            self.config.dt_safety * self.grid.dtheta.powi(2)
        }
    }

    pub fn cfl_dt(&self, state: &FlowState) -> std::result::Result<f64, FlowFault> {
        Ok(self.cfl_dt_from(&self.speed_field(&state.gamma.values)?))
    }

    /// One explicit midpoint step, reusing the speed already evaluated at `state`.
    pub fn step_from(
        &self,
        state: &FlowState,
        k1: &SpeedField,
        dt: f64,
    ) -> std::result::Result<FlowState, FlowFault> {
        let g0 = &state.gamma.values;
        let d1 = self.tendency(k1);
        let mid: Vec<f64> = g0.iter().zip(&d1).map(|(g, d)| g + 0.5 * dt * d).collect();
        let k2 = self.speed_field(&mid)?;
        let d2 = self.tendency(&k2);
        let values = g0.iter().zip(&d2).map(|(g, d)| g + dt * d).collect();
        Ok(FlowState { t: state.t + dt, gamma: ScalarField { values }, step_index: state.step_index + 1 })
    }

    pub fn step(&self, state: &FlowState, dt: f64) -> std::result::Result<FlowState, FlowFault> {
        if !(dt > 0.0) {
            return Err(FlowFault::Diverged { reason: format!("step size {dt} is not positive") });
        }
        let k1 = self.speed_field(&state.gamma.values)?;
        self.step_from(state, &k1, dt)
    }

    pub fn run(&self, initial: ScalarField) -> RunResult {
        self.run_with_observer(initial, |_, _| {})
    }

    /// Integrates until convergence, the time cap, a stall or a fault.
    /// `observer` sees every accepted state with its speed field.
    pub fn run_with_observer(
        &self,
        initial: ScalarField,
        mut observer: impl FnMut(&FlowState, &SpeedField),
    ) -> RunResult {
        let start = Instant::now();
        let cfg = &self.config;
        let mut state = FlowState::new(initial);
        let mut history = Vec::new();
        let mut residuals: Vec<f64> = Vec::new();
        let mut last_recorded = None;
        let finish = |status, state: FlowState, history, residual, stalled, fault| RunResult {
            status,
            steps: state.step_index,
            state,
            history,
            final_residual: residual,
            wall_seconds: start.elapsed().as_secs_f64(),
            stalled,
            fault,
        };
        loop {
            let field = match self.speed_field(&state.gamma.values) {
                Ok(f) => f,
                Err(fault) => {
                    history.push(crate::diagnostics::geometry_record(&self.grid, &state));
                    let status = match fault {
                        FlowFault::ConeExit { .. } => RunStatus::ConeExit,
                        FlowFault::StarShapeLost { .. } => RunStatus::StarShapeLost,
                        FlowFault::Diverged { .. } => RunStatus::Diverged,
                    };
                    return finish(status, state, history, f64::NAN, false, Some(fault));
                }
            };
            let residual = field.residual();
            observer(&state, &field);
            let converged = residual <= cfg.tol_residual;
            let capped = state.t >= cfg.t_max;
            residuals.push(residual);
            let k = state.step_index;
            let stalled = cfg.tol_stall > 0.0
                && k >= STALL_WINDOW
                && residuals[k - STALL_WINDOW] - residual < cfg.tol_stall;
            let done = converged || capped || stalled;
            if (k % cfg.cadence == 0 || done) && last_recorded != Some(k) {
                history.push(crate::diagnostics::snapshot(&state, &field));
                last_recorded = Some(k);
            }
            if converged {
                return finish(RunStatus::Converged, state, history, residual, false, None);
            }
            if capped || stalled {
                return finish(RunStatus::TimeCap, state, history, residual, stalled && !capped, None);
            }
            let mut dt = self.cfl_dt_from(&field);
            if state.t + dt >= cfg.t_max {
                dt = cfg.t_max - state.t;
            }
            let next = match self.step_from(&state, &field, dt) {
                Ok(s) => s,
                Err(fault) => {
                    // the midpoint stage failed; report at the last accepted state
                    let status = match fault {
                        FlowFault::ConeExit { .. } => RunStatus::ConeExit,
                        FlowFault::StarShapeLost { .. } => RunStatus::StarShapeLost,
                        FlowFault::Diverged { .. } => RunStatus::Diverged,
                    };
                    return finish(status, state, history, residual, false, Some(fault));
                }
            };
            state = next;
            if state.t + 1e-14 * cfg.t_max >= cfg.t_max {
                state.t = state.t.max(cfg.t_max);
            }
        }
    }
}

pub fn speed_field(config: &FlowConfig, state: &FlowState) -> Result<SpeedField> {
    Flow::new(config.clone())?
        .speed_field(&state.gamma.values)
        .map_err(|f| Error::Validation(f.to_string()))
}

pub fn cfl_dt(config: &FlowConfig, state: &FlowState) -> Result<f64> {
    Flow::new(config.clone())?.cfl_dt(state).map_err(|f| Error::Validation(f.to_string()))
}

pub fn step(config: &FlowConfig, state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be > 0, got {dt}")));
    }
    Flow::new(config.clone())?.step(state, dt).map_err(|f| Error::Validation(f.to_string()))
}

pub fn run(config: &FlowConfig, initial: ScalarField) -> Result<RunResult> {
    Ok(Flow::new(config.clone())?.run(initial))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Constant { radius: f64 },
    /// Spheroid with equatorial semi-axis `a_axis` and polar semi-axis `b_axis`.
    Spheroid { a_axis: f64, b_axis: f64 },
    /// log R + amplitude·cosθ (axisymmetric) or amplitude·sinθcosφ (full sphere).
    Perturbed { radius: f64, amplitude: f64 },
}

pub fn initial_gamma(kind: InitialKind, grid: &Grid) -> Result<ScalarField> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Argument(format!("{name} must be > 0, got {v}")))
        }
    };
    let field = match kind {
        InitialKind::Constant { radius } => {
            positive("radius", radius)?;
            ScalarField::constant(grid, radius.ln())
        }
        InitialKind::Spheroid { a_axis, b_axis } => {
            positive("a_axis", a_axis)?;
            positive("b_axis", b_axis)?;
            grid.field_from_fn(|th, _| crate::geometry::spheroid_radius(a_axis, b_axis, th).ln())
        }
        InitialKind::Perturbed { radius, amplitude } => {
            positive("radius", radius)?;
            if !amplitude.is_finite() {
                return Err(Error::Argument("amplitude must be finite".into()));
            }
            let axisym = grid.is_axisym();
            grid.field_from_fn(|th, ph| {
                let pattern = if axisym { th.cos() } else { th.sin() * ph.cos() };
                radius.ln() + amplitude * pattern
            })
        }
    };
    let mut u_min = f64::INFINITY;
    let mut rho_max = 0.0f64;
    for node in 0..grid.node_count() {
        let geo = node_geometry(grid, &field.values, node);
        u_min = u_min.min(geo.u);
        rho_max = rho_max.max(geo.rho);
    }
    if !(u_min > MIN_SUPPORT_RATIO * rho_max) {
        return Err(Error::Validation(format!(
            "initial surface is not usably star-shaped: u_min = {u_min:e}, rho_max = {rho_max:e} \
             (need u_min > {MIN_SUPPORT_RATIO:e} * rho_max)"
        )));
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeMap {
    pub tau: f64,
    pub phi: f64,
}

/// Time change between the unnormalized flow and its normalized form, with
/// e = 1 − α − β − δ: φ(t) = (C₀ + eηt)^{1/e} and
/// τ(t) = [log(eηt + C₀) − log C₀]/(eη).
pub fn normalized_time_map(alpha: f64, beta: f64, delta: f64, eta: f64, c0: f64, t: f64) -> Result<TimeMap> {
    let e = 1.0 - alpha - beta - delta;
    if e == 0.0 {
        return Err(Error::Domain("1 - alpha - beta - delta = 0; time map undefined".into()));
    }
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("C0 must be > 0, got {c0}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be > 0, got {eta}")));
    }
    let base = c0 + e * eta * t;
    if !(base > 0.0) {
        return Err(Error::Domain(format!("C0 + e*eta*t = {base} is not positive")));
    }
    Ok(TimeMap { tau: (base.ln() - c0.ln()) / (e * eta), phi: base.powf(1.0 / e) })
}
