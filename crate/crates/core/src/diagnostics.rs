//! Per-record monitors of a run and post-run analyses.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{Flow, FlowState, RunResult, RunStatus, SpeedField};
use crate::geometry::{node_curvatures, node_geometry};
use crate::spheregrid::{Grid, ScalarField};

pub const HISTORY_MAGIC: &str = "starflow-history-v1";
pub const HISTORY_COLUMNS: [&str; 14] = [
    "t",
    "rho_min",
    "rho_max",
    "u_min",
    "Q_min",
    "Q_max",
    "grad_gamma_max",
    "kappa_min",
    "kappa_max",
    "F_min",
    "F_max",
    "cone_ok",
    "residual",
    "sphere_gap",
];

/// Default tail fraction for the gradient decay fit.
pub const DECAY_TAIL_FRACTION: f64 = 0.5;
pub const DECAY_MIN_RECORDS: usize = 20;
/// Records with max |Dγ| at or below this level are roundoff and are left
/// out of the decay fit.
pub const DECAY_NOISE_FLOOR: f64 = 1e-12;
/// Barrier tolerance in units of Δθ².
pub const BARRIER_TOL_FACTOR: f64 = 10.0;
/// Constant C in the evolution-identity bound C·(dt + Δθ²). One step from
/// spheroid{1.15, 0.9} data with ψ = exp(0.2⟨ξ, e₃⟩) gives a ratio
/// residual/(dt + Δθ²) of 0.23 at 32×64, 64×128 and 128×256 with dt ∝ Δθ².
pub const EVOLUTION_IDENTITY_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub u_min: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// max |Dγ| = max |Dρ|/ρ.
    pub grad_gamma_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub cone_ok: bool,
    pub residual: f64,
    /// (ρ_max − ρ_min)/ρ_mean.
    pub sphere_gap: f64,
}

impl DiagnosticsRecord {
    fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.rho_min,
            self.rho_max,
            self.u_min,
            self.q_min,
            self.q_max,
            self.grad_gamma_max,
            self.kappa_min,
            self.kappa_max,
            self.f_min,
            self.f_max,
            if self.cone_ok { 1.0 } else { 0.0 },
            self.residual,
            self.sphere_gap,
        ]
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Record of a state whose speed field was evaluated successfully.
pub fn snapshot(state: &FlowState, field: &SpeedField) -> DiagnosticsRecord {
    let (rho_min, rho_max) = min_max(&field.rho);
    let rho_mean = field.rho.iter().sum::<f64>() / field.rho.len() as f64;
    let (q_min, q_max) = min_max(&field.q);
    let (k_min, k_max) = min_max(&field.kappa);
    let (f_min, f_max) = min_max(&field.f);
    DiagnosticsRecord {
        t: state.t,
        rho_min,
        rho_max,
        u_min: min_max(&field.u).0,
        q_min,
        q_max,
        grad_gamma_max: min_max(&field.grad_sq).1.sqrt(),
        kappa_min: k_min,
        kappa_max: k_max,
        f_min,
        f_max,
        cone_ok: true,
        residual: field.residual(),
        sphere_gap: (rho_max - rho_min) / rho_mean,
    }
}

/// Geometry-only record for a state where the speed could not be evaluated:
/// Q, F and the residual are NaN and `cone_ok` is false.
pub fn geometry_record(grid: &Grid, state: &FlowState) -> DiagnosticsRecord {
    let nodes = grid.node_count();
    let mut rho = Vec::with_capacity(nodes);
    let mut u = Vec::with_capacity(nodes);
    let mut grad = Vec::with_capacity(nodes);
    let mut kap = vec![0.0; grid.n];
    let (mut k_min, mut k_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for node in 0..nodes {
        let geo = node_geometry(grid, &state.gamma.values, node);
        rho.push(geo.rho);
        u.push(geo.u);
        grad.push(geo.grad_sq());
        if node_curvatures(grid, &geo, &mut kap).is_ok() {
            let (lo, hi) = min_max(&kap);
            k_min = k_min.min(lo);
            k_max = k_max.max(hi);
        }
    }
    let (rho_min, rho_max) = min_max(&rho);
    let rho_mean = rho.iter().sum::<f64>() / nodes as f64;
    DiagnosticsRecord {
        t: state.t,
        rho_min,
        rho_max,
        u_min: min_max(&u).0,
        q_min: f64::NAN,
        q_max: f64::NAN,
        grad_gamma_max: min_max(&grad).1.sqrt(),
        kappa_min: k_min,
        kappa_max: k_max,
        f_min: f64::NAN,
        f_max: f64::NAN,
        cone_ok: false,
        residual: f64::NAN,
        sphere_gap: (rho_max - rho_min) / rho_mean,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Fail { record: usize, detail: String },
    Skipped { reason: String },
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CheckOutcome::Pass)
    }

    pub fn label(&self) -> String {
        match self {
            CheckOutcome::Pass => "pass".into(),
            CheckOutcome::Fail { record, detail } => format!("fail at record {record}: {detail}"),
            CheckOutcome::Skipped { reason } => format!("skipped: {reason}"),
        }
    }
}

pub fn barrier_tolerance(grid: &Grid) -> f64 {
    BARRIER_TOL_FACTOR * grid.dtheta * grid.dtheta
}

/// r1 − tol ≤ ρ_min and ρ_max ≤ r2 + tol on every record. Skipped when the
/// first record already lies outside [r1 − tol, r2 + tol].
pub fn check_barriers(history: &[DiagnosticsRecord], r1: f64, r2: f64, tol: f64) -> CheckOutcome {
    let Some(first) = history.first() else {
        return CheckOutcome::Skipped { reason: "empty history".into() };
    };
    if first.rho_min < r1 - tol || first.rho_max > r2 + tol {
        return CheckOutcome::Skipped {
            reason: format!(
                "initial radii [{}, {}] not inside barrier radii [{r1}, {r2}]",
                first.rho_min, first.rho_max
            ),
        };
    }
    for (k, rec) in history.iter().enumerate() {
        if rec.rho_min < r1 - tol {
            return CheckOutcome::Fail {
                record: k,
                detail: format!("rho_min = {} < r1 - tol = {}", rec.rho_min, r1 - tol),
            };
        }
        if rec.rho_max > r2 + tol {
            return CheckOutcome::Fail {
                record: k,
                detail: format!("rho_max = {} > r2 + tol = {}", rec.rho_max, r2 + tol),
            };
        }
    }
    CheckOutcome::Pass
}

/// Q − 1 keeps the sign it has on the first record, up to `tol`. Skipped
/// when the first record has mixed signs.
pub fn check_sign_preservation(history: &[DiagnosticsRecord], tol: f64) -> CheckOutcome {
    let Some(first) = history.first() else {
        return CheckOutcome::Skipped { reason: "empty history".into() };
    };
    let below = first.q_max <= 1.0 + tol;
    let above = first.q_min >= 1.0 - tol;
    if !below && !above {
        return CheckOutcome::Skipped {
            reason: format!("Q - 1 changes sign initially (Q in [{}, {}])", first.q_min, first.q_max),
        };
    }
    for (k, rec) in history.iter().enumerate() {
        if !rec.cone_ok {
            continue;
        }
        if below && !above && rec.q_max > 1.0 + tol {
            return CheckOutcome::Fail { record: k, detail: format!("Q_max = {} > 1", rec.q_max) };
        }
        if above && !below && rec.q_min < 1.0 - tol {
            return CheckOutcome::Fail { record: k, detail: format!("Q_min = {} < 1", rec.q_min) };
        }
    }
    CheckOutcome::Pass
}

/// max |(u₁ − u₀)/dt − (uℱ − u⟨X, ∇ℱ⟩)| between two consecutive states,
/// with ℱ the tendency applied at the first state and
/// ⟨X, ∇ℱ⟩ = ⟨Dγ, Dℱ⟩/ω².
pub fn evolution_identity_check(flow: &Flow, s0: &FlowState, s1: &FlowState) -> Result<f64> {
    let dt = s1.t - s0.t;
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("states are not consecutive in time (dt = {dt})")));
    }
    let grid = &flow.grid;
    let field = flow.speed_field(&s0.gamma.values).map_err(|f| Error::Validation(f.to_string()))?;
    let tend = ScalarField { values: flow.tendency(&field) };
    let d_tend = grid.grad(&tend);
    let mut worst = 0.0f64;
    for node in 0..grid.node_count() {
        let g0 = node_geometry(grid, &s0.gamma.values, node);
        let g1 = node_geometry(grid, &s1.gamma.values, node);
        let i = grid.ring_of(node);
        let s2 = grid.sin_theta[i] * grid.sin_theta[i];
        let [gt, gp] = g0.dgamma;
        let [ft, fp] = d_tend[node];
        let x_grad = (gt * ft + gp * fp / s2) / (g0.omega * g0.omega);
        let rhs = g0.u * tend.values[node] - g0.u * x_grad;
        worst = worst.max(((g1.u - g0.u) / dt - rhs).abs());
    }
    Ok(worst)
}

pub fn evolution_identity_bound(dt: f64, dtheta: f64) -> f64 {
    EVOLUTION_IDENTITY_C * (dt + dtheta * dtheta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares fit of log(grad_gamma_max) against t over the last
/// `tail_fraction` of the time span in which max |Dγ| stays above
/// [`DECAY_NOISE_FLOOR`]; rate = −slope. A history that is round to
/// roundoff from the start gives rate = ∞.
pub fn decay_fit(history: &[DiagnosticsRecord], tail_fraction: f64) -> Result<DecayFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Argument(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    if history.is_empty() {
        return Err(Error::Argument("empty history".into()));
    }
    let resolved: Vec<&DiagnosticsRecord> =
        history.iter().filter(|r| r.grad_gamma_max > DECAY_NOISE_FLOOR).collect();
    let (Some(first), Some(last)) = (resolved.first(), resolved.last()) else {
        return Ok(DecayFit { rate: f64::INFINITY, r_squared: f64::NAN, samples: 0 });
    };
    let t_cut = last.t - tail_fraction * (last.t - first.t);
    let tail: Vec<&DiagnosticsRecord> = resolved.iter().copied().filter(|r| r.t >= t_cut).collect();
    if tail.len() < DECAY_MIN_RECORDS {
        return Err(Error::Argument(format!(
            "decay fit needs at least {DECAY_MIN_RECORDS} records above the noise floor in the tail, got {}",
            tail.len()
        )));
    }
    let m = tail.len() as f64;
    let ts: Vec<f64> = tail.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.grad_gamma_max.ln()).collect();
    let t_bar = ts.iter().sum::<f64>() / m;
    let y_bar = ys.iter().sum::<f64>() / m;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        stt += (t - t_bar) * (t - t_bar);
        sty += (t - t_bar) * (y - y_bar);
        syy += (y - y_bar) * (y - y_bar);
    }
    if stt == 0.0 {
        return Err(Error::Argument("tail records share a single time".into()));
    }
    let slope = sty / stt;
    let ss_res: f64 = ts.iter().zip(&ys).map(|(t, y)| (y - y_bar - slope * (t - t_bar)).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit { rate: -slope, r_squared, samples: tail.len() })
}

/// max over nodes of |ρ_a − ρ_b|/ρ_a between two converged runs.
pub fn uniqueness_crosscheck(a: &RunResult, b: &RunResult) -> Result<f64> {
    for (name, r) in [("first", a), ("second", b)] {
        if r.status != RunStatus::Converged {
            return Err(Error::Validation(format!("{name} run did not converge ({})", r.status.as_str())));
        }
    }
    let (ga, gb) = (&a.state.gamma.values, &b.state.gamma.values);
    if ga.len() != gb.len() {
        return Err(Error::Shape(format!("grids differ: {} vs {} nodes", ga.len(), gb.len())));
    }
    Ok(ga.iter().zip(gb).fold(0.0f64, |m, (x, y)| {
        let (ra, rb) = (x.exp(), y.exp());
        m.max((ra - rb).abs() / ra)
    }))
}

pub fn write_history_csv<W: Write>(history: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    writeln!(w, "{HISTORY_MAGIC}")?;
    writeln!(w, "{}", HISTORY_COLUMNS.join(","))?;
    for rec in history {
        let row: Vec<String> = rec
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 11 { format!("{}", *v as u8) } else { format!("{v:e}") })
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_history_csv<R: BufRead>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines.next().ok_or_else(|| Error::Shape(format!("history file ends before {what}")))?.map_err(Error::from)
    };
    if next("the version line")?.trim() != HISTORY_MAGIC {
        return Err(Error::Shape(format!("missing '{HISTORY_MAGIC}' header")));
    }
    if next("the column line")?.trim() != HISTORY_COLUMNS.join(",") {
        return Err(Error::Shape("unexpected history columns".into()));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Shape(format!("history row {k}: {e}")))?;
        if v.len() != HISTORY_COLUMNS.len() {
            return Err(Error::Shape(format!("history row {k} has {} columns", v.len())));
        }
        out.push(DiagnosticsRecord {
            t: v[0],
            rho_min: v[1],
            rho_max: v[2],
            u_min: v[3],
            q_min: v[4],
            q_max: v[5],
            grad_gamma_max: v[6],
            kappa_min: v[7],
            kappa_max: v[8],
            f_min: v[9],
            f_max: v[10],
            cone_ok: v[11] != 0.0,
            residual: v[12],
            sphere_gap: v[13],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryChecks {
    pub barriers: CheckOutcome,
    pub sign: CheckOutcome,
    pub evolution_identity: CheckOutcome,
    pub uniqueness: CheckOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub final_residual: f64,
    pub t_final: f64,
    pub steps: usize,
    pub stalled: bool,
    pub fault: Option<String>,
    pub decay_rate: Option<f64>,
    pub decay_r_squared: Option<f64>,
    pub checks: SummaryChecks,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
}
