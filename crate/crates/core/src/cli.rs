//! Command-line front end.
//!
//! Exit codes: 0 success/converged, 1 validation or selfcheck failure,
//! 2 diverged/cone exit/star shape lost, 3 time cap, 64 usage or config
//! error, 65 strict-validation failure, data mismatch or output error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{
    barrier_tolerance, check_barriers, check_sign_preservation, decay_fit, evolution_identity_bound,
    evolution_identity_check, write_history_csv, CheckOutcome, RunSummary, SummaryChecks,
    DECAY_MIN_RECORDS, DECAY_TAIL_FRACTION,
};
use crate::error::Error;
use crate::flow::{initial_gamma, Flow, FlowState, RunResult, RunStatus};
use crate::geometry::{self, assemble};
use crate::selfcheck;
use crate::speed::{radius_root, validate_barrier_radii, validate_monotonicity};
use crate::spheregrid::ScalarField;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_TIME_CAP: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

#[derive(Debug, Parser)]
#[command(name = "starflow", version, about = "Curvature flows of star-shaped hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the flow described by a config file.
    Run {
        config: PathBuf,
        /// Override [flow] t_max.
        #[arg(long)]
        t_max: Option<f64>,
        /// Override [flow] tol_residual.
        #[arg(long)]
        tol: Option<f64>,
        /// Refuse to run when no barrier radii exist.
        #[arg(long)]
        strict: bool,
        /// Output directory (default: [output] dir, else "starflow-out").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report barrier radii, monotonicity conditions and the sphere radius.
    Validate { config: PathBuf },
    /// Run a property suite: sympoly, grid, geometry or all.
    Selfcheck {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Curvatures and residual G*F^(-beta) - 1 of a gamma field.
    Curvature {
        gamma: PathBuf,
        config: PathBuf,
        /// Output CSV (default: <gamma stem>_curvature.csv next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { config, t_max, tol, strict, out } => cmd_run(&config, t_max, tol, strict, out),
        Command::Validate { config } => cmd_validate(&config),
        Command::Selfcheck { suite, seed } => cmd_selfcheck(&suite, seed),
        Command::Curvature { gamma, config, out } => cmd_curvature(&gamma, &config, out),
    }
}

fn load(path: &Path) -> Result<RunConfig, i32> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        EXIT_USAGE
    })
}

#[derive(Debug, Serialize)]
struct RunManifest {
    config: String,
    output_dir: String,
    files: Vec<String>,
    config_hash: String,
    seed: u64,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Error> {
        let f = File::create(self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }
}

pub fn cmd_run(path: &Path, t_max: Option<f64>, tol: Option<f64>, strict: bool, out: Option<PathBuf>) -> i32 {
    let mut cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Err(e) = cfg.apply_overrides(t_max, tol) {
        eprintln!("{e}");
        return EXIT_USAGE;
    }
    let flow = match Flow::new(cfg.flow.clone()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let n = flow.grid.n;
    let radii = validate_barrier_radii(&cfg.flow.g_spec, &cfg.flow.f_spec, n, cfg.flow.beta);
    if strict {
        if let Err(e) = &radii {
            eprintln!("strict: {e}");
            return EXIT_DATA;
        }
    }
    let initial = match initial_gamma(cfg.initial, &flow.grid) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{}: [initial] {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let dir = out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("starflow-out"));
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return EXIT_DATA;
    }
    let mut outputs = Outputs { dir: dir.clone(), files: Vec::new() };

    let obj_every = if flow.grid.is_axisym() { 0 } else { cfg.output.obj_every };
    let mut first_pair: Option<FlowState> = None;
    let mut second: Option<FlowState> = None;
    let mut mesh_index = 0usize;
    let mut io_error: Option<Error> = None;
    let result = flow.run_with_observer(initial, |state, _| {
        match state.step_index {
            0 => first_pair = Some(state.clone()),
            1 => second = Some(state.clone()),
            _ => {}
        }
        if obj_every > 0 && state.step_index % obj_every == 0 && io_error.is_none() {
            let name = format!("mesh_{mesh_index:03}.obj");
            mesh_index += 1;
            let written = outputs.create(&name).and_then(|mut w| {
                let geo = assemble(&flow.grid, &state.gamma)?;
                geometry::write_obj(&flow.grid, &geo, &mut w)?;
                w.flush().map_err(Error::from)
            });
            if let Err(e) = written {
                io_error = Some(e);
            }
        }
    });
    if let Some(e) = io_error {
        eprintln!("output error: {e}");
        return EXIT_DATA;
    }

    let checks = SummaryChecks {
        barriers: match &radii {
            Ok(r) => check_barriers(&result.history, r.r1, r.r2, barrier_tolerance(&flow.grid)),
            Err(e) => CheckOutcome::Skipped { reason: format!("no barrier radii: {e}") },
        },
        sign: check_sign_preservation(&result.history, cfg.flow.tol_residual),
        evolution_identity: match (&first_pair, &second) {
            (Some(s0), Some(s1)) => match evolution_identity_check(&flow, s0, s1) {
                Ok(res) => {
                    let bound = evolution_identity_bound(s1.t - s0.t, flow.grid.dtheta);
                    if res <= bound {
                        CheckOutcome::Pass
                    } else {
                        CheckOutcome::Fail { record: 0, detail: format!("residual {res:e} > bound {bound:e}") }
                    }
                }
                Err(e) => CheckOutcome::Skipped { reason: e.to_string() },
            },
            _ => CheckOutcome::Skipped { reason: "fewer than two accepted states".into() },
        },
        uniqueness: CheckOutcome::Skipped { reason: "needs a second run from other initial data".into() },
    };
    let fit = if result.history.len() >= DECAY_MIN_RECORDS {
        decay_fit(&result.history, DECAY_TAIL_FRACTION).ok()
    } else {
        None
    };

    match write_outputs(&mut outputs, &flow, &result) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("output error: {e}");
            return EXIT_DATA;
        }
    }
    let mut files = outputs.files.clone();
    files.push("summary.json".into());
    files.push("manifest.json".into());
    let summary = RunSummary {
        status: result.status.as_str().to_string(),
        final_residual: result.final_residual,
        t_final: result.state.t,
        steps: result.steps,
        stalled: result.stalled,
        fault: result.fault.as_ref().map(|f| f.to_string()),
        decay_rate: fit.map(|f| f.rate),
        decay_r_squared: fit.map(|f| f.r_squared),
        checks,
        config_hash: cfg.hash(),
        seed: cfg.output.seed,
        files: files.clone(),
    };
    let manifest = RunManifest {
        config: path.display().to_string(),
        output_dir: dir.display().to_string(),
        files,
        config_hash: cfg.hash(),
        seed: cfg.output.seed,
    };
    let written = write_json(&dir.join("summary.json"), &summary)
        .and_then(|_| write_json(&dir.join("manifest.json"), &manifest));
    if let Err(e) = written {
        eprintln!("output error: {e}");
        return EXIT_DATA;
    }
    println!(
        "status={} t={} steps={} residual={:e} out={}",
        summary.status,
        result.state.t,
        result.steps,
        result.final_residual,
        dir.display()
    );
    if let Some(f) = &result.fault {
        eprintln!("{f}");
    }
    match result.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::TimeCap => EXIT_TIME_CAP,
        RunStatus::Diverged | RunStatus::ConeExit | RunStatus::StarShapeLost => EXIT_ABORTED,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_outputs(outputs: &mut Outputs, flow: &Flow, result: &RunResult) -> Result<(), Error> {
    let mut w = outputs.create("history.csv")?;
    write_history_csv(&result.history, &mut w)?;
    w.flush()?;
    let mut w = outputs.create("final_gamma.csv")?;
    result.state.gamma.write_csv(&flow.grid, &mut w)?;
    w.flush()?;
    if let Ok(geo) = assemble(&flow.grid, &result.state.gamma) {
        let mut w = outputs.create("final_geometry.csv")?;
        geometry::write_csv(&flow.grid, &geo, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_validate(path: &Path) -> i32 {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let f = &cfg.flow;
    let n = match f.grid {
        crate::spheregrid::GridSpec::Axisym { n, .. } => n,
        crate::spheregrid::GridSpec::FullS2 { .. } => 2,
    };
    let radii = validate_barrier_radii(&f.g_spec, &f.f_spec, n, f.beta);
    match &radii {
        Ok(r) => {
            println!("barrier radii: r1 = {:.12} r2 = {:.12}", r.r1, r.r2);
            if r.equality {
                println!("barrier radii coincide (r1 = r2): only the weak inequalities hold");
            }
        }
        Err(e) => println!("barrier radii: none ({e})"),
    }
    let report = validate_monotonicity(&f.g_spec, f.beta);
    for c in &report.conditions {
        let tag = if c.holds { "holds" } else { "fails" };
        println!("{:<26} {tag:<6} margin = {:+.6}  {}", c.name, c.margin + 0.0, c.statement);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if f.g_spec.psi_is_constant() {
        match radius_root(&f.g_spec, &f.f_spec, n, f.beta, f.psi_mode) {
            Ok(r) => println!("stationary sphere radius: R = {r:.12}"),
            Err(e) => println!("stationary sphere radius: none ({e})"),
        }
    }
    if radii.is_ok() {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

pub fn cmd_selfcheck(suite: &str, seed: u64) -> i32 {
    match selfcheck::run_suite(suite, seed) {
        Ok(lines) => {
            let mut ok = true;
            for l in &lines {
                println!("{l}");
                ok &= l.passed;
            }
            if ok {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_USAGE
        }
    }
}

pub fn cmd_curvature(gamma_path: &Path, config_path: &Path, out: Option<PathBuf>) -> i32 {
    let cfg = match load(config_path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let flow = match Flow::new(cfg.flow.clone()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {e}", config_path.display());
            return EXIT_USAGE;
        }
    };
    let grid = &flow.grid;
    let gamma = match File::open(gamma_path)
        .map_err(Error::from)
        .and_then(|f| ScalarField::read_csv(grid, BufReader::new(f)))
    {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{}: {e}", gamma_path.display());
            return EXIT_DATA;
        }
    };
    let geo = match assemble(grid, &gamma) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_DATA;
        }
    };
    let field = flow.speed_field(&gamma.values).ok();
    let out = out.unwrap_or_else(|| {
        let stem = gamma_path.file_stem().and_then(|s| s.to_str()).unwrap_or("gamma");
        gamma_path.with_file_name(format!("{stem}_curvature.csv"))
    });
    let written = (|| -> Result<(), Error> {
        let mut w = BufWriter::new(File::create(&out)?);
        let mut header = String::from("theta");
        if !grid.is_axisym() {
            header.push_str(",phi");
        }
        header.push_str(",rho,u");
        for i in 1..=grid.n {
            header.push_str(&format!(",kappa_{i}"));
        }
        header.push_str(",F,Q,residual,speed");
        writeln!(w, "{header}")?;
        for node in 0..grid.node_count() {
            let mut row = vec![grid.theta[grid.ring_of(node)]];
            if !grid.is_axisym() {
                row.push(grid.phi[grid.column_of(node)]);
            }
            row.push(geo.rho[node]);
            row.push(geo.u[node]);
            row.extend_from_slice(geo.kappa_at(node));
            match &field {
                Some(f) => row.extend_from_slice(&[f.f[node], f.q[node], f.q[node] - 1.0, f.speed[node]]),
                None => row.extend_from_slice(&[f64::NAN; 4]),
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("output error: {e}");
        return EXIT_DATA;
    }
    match &field {
        Some(f) => {
            let q_res = f.q.iter().fold(0.0f64, |m, q| m.max((q - 1.0).abs()));
            println!("residual={:e} max_abs_q_minus_1={q_res:e} out={}", f.residual(), out.display());
        }
        None => {
            let reason = flow.speed_field(&gamma.values).err().map(|f| f.to_string()).unwrap_or_default();
            println!("residual=NaN out={} ({reason})", out.display());
        }
    }
    EXIT_OK
}
