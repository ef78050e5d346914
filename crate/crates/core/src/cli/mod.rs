//! The `ymbar` command-line front end: manifests, the verification suite,
//! flow runs, snapshots and trace export.

pub mod manifest;
pub mod snapshot;
pub mod suite;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::OperatorReport;
use crate::connection::Connection;
use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, FlowRun, FlowTrace};
use crate::functional::{classify, ymbar, ymbar_gradient_projected};
use crate::geometry::TorusGeometry;

pub use manifest::{Command, RunManifest};
pub use suite::{run_suite, Summary, SuiteContext};

/// Overrides given on the command line; they win over the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
}

/// Reads the manifest (defaults when `path` is `None`), applies overrides
/// and checks that it was written for `command`.
pub fn load_manifest(path: Option<&Path>, command: Command, ov: &Overrides) -> Result<RunManifest> {
    let mut m = match path {
        Some(p) => RunManifest::parse(&fs::read_to_string(p)?)?,
        None => RunManifest::default(),
    };
    if let Some(c) = m.command {
        if c != command {
            return Err(Error::Config(format!("manifest is for `{c}`, invoked as `{command}`")));
        }
    }
    m.command = Some(command);
    if let Some(out) = &ov.out {
        m.output_dir = out.clone();
    }
    if let Some(seed) = ov.seed {
        m.seed = seed;
    }
    if let Some(t) = ov.tol_scale {
        m.tol_scale = t;
    }
    m.validate()?;
    Ok(m)
}

/// Process exit status for a command result: 0 success, 1 failed checks
/// (or a flow that blew up), 2 bad configuration, 3 I/O or unreadable input.
pub fn exit_code(result: &Result<bool>) -> i32 {
    match result {
        Ok(true) => 0,
        Ok(false) | Err(Error::BlowUp { .. }) => 1,
        Err(Error::Io(_)) | Err(Error::Format(_)) => 3,
        Err(_) => 2,
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn render_report(reports: &[OperatorReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let _ = writeln!(s, "{r}");
    }
    s.push('\n');
    s + &Summary::of(reports).to_text()
}

pub struct VerifyOutcome {
    pub reports: Vec<OperatorReport>,
    pub summary: Summary,
    pub report_path: PathBuf,
}

/// Runs the identity suite and writes `report.txt`.
pub fn cmd_verify(m: &RunManifest) -> Result<VerifyOutcome> {
    let ctx = SuiteContext::new(m)?;
    let reports = run_suite(&ctx)?;
    let summary = Summary::of(&reports);
    let report_path = write_file(&m.output_dir, "report.txt", &render_report(&reports))?;
    Ok(VerifyOutcome { reports, summary, report_path })
}

fn flow_config(m: &RunManifest, geom: &TorusGeometry) -> Result<FlowConfig> {
    let mut cfg = FlowConfig::for_geometry(geom, m.flow.safety);
    if let Some(dt0) = m.flow.dt0 {
        cfg.dt0 = dt0;
    }
    cfg.max_steps = m.flow.max_steps;
    cfg.stop_grad = m.flow.stop_grad;
    cfg.stop_energy = m.flow.stop_energy;
    cfg.snapshot_every = m.flow.snapshot_every;
    cfg.validate()?;
    Ok(cfg)
}

/// The manifest's starting state: the input snapshot when given, otherwise
/// a connection drawn from the seed. Returns the state and its seed.
pub fn initial_state(m: &RunManifest) -> Result<(Connection, u64)> {
    match &m.input_snapshot {
        Some(path) => {
            let s = snapshot::read_snapshot(&mut fs::File::open(path)?, m.dealias)?;
            Ok((s.connection, s.seed))
        }
        None => {
            let geom = TorusGeometry::new(m.n, m.grid, m.period, m.dealias)?;
            let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
            Ok((suite::build_connection(&geom, m, &mut rng)?, m.seed))
        }
    }
}

pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut s = String::from("step,t,dt,energy,grad_norm,f02_norm,f11_norm,accepted\n");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.step,
            r.t,
            r.dt,
            r.energy,
            r.grad_norm,
            r.f02_norm,
            r.f11_norm,
            u8::from(r.accepted)
        );
    }
    s
}

fn save_snapshot(dir: &Path, name: &str, a: &Connection, seed: u64) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(fs::File::create(&path)?);
    snapshot::write_snapshot(&mut w, a, seed)?;
    w.flush()?;
    Ok(path)
}

pub struct FlowOutcome {
    pub run: FlowRun,
    pub summary: String,
}

/// Runs the flow; writes `trace.csv`, `flow.txt`, `final.ymb` and any
/// periodic snapshots. Success means the accepted energies never rose.
pub fn cmd_flow(m: &RunManifest) -> Result<FlowOutcome> {
    let (a0, seed) = initial_state(m)?;
    let cfg = flow_config(m, a0.geom())?;
    let run = flow::run(&a0, &cfg)?;
    let dir = &m.output_dir;
    write_file(dir, "trace.csv", &trace_csv(&run.trace))?;
    for (row, state) in &run.snapshots {
        save_snapshot(dir, &format!("snapshot_{row:06}.ymb"), state, seed)?;
    }
    save_snapshot(dir, "final.ymb", &run.final_state, seed)?;

    let first = run.trace.records.first().expect("row 0 always present");
    let last = run.trace.accepted().last().expect("row 0 is accepted");
    let c = classify(&run.final_state, 1e-8);
    let mut s = String::new();
    let _ = writeln!(s, "flow.termination = {}", run.termination);
    let _ = writeln!(s, "flow.rows = {}", run.trace.records.len());
    let _ = writeln!(s, "flow.accepted = {}", run.trace.accepted().count());
    let _ = writeln!(s, "flow.dt0 = {:e}", cfg.dt0);
    let _ = writeln!(s, "flow.t_final = {:e}", last.t);
    let _ = writeln!(s, "flow.energy_initial = {:e}", first.energy);
    let _ = writeln!(s, "flow.energy_final = {:e}", last.energy);
    let _ = writeln!(s, "flow.grad_initial = {:e}", first.grad_norm);
    let _ = writeln!(s, "flow.grad_final = {:e}", last.grad_norm);
    let _ = writeln!(s, "flow.monotone = {}", run.trace.is_monotone());
    let _ = writeln!(s, "flow.final_class = {}", c.class.label());
    write_file(dir, "flow.txt", &s)?;
    Ok(FlowOutcome { run, summary: s })
}

/// Describes a state: geometry, energy, curvature parts and holomorphy
/// residuals. Writes `inspect.txt`.
pub fn cmd_inspect(m: &RunManifest) -> Result<String> {
    let (a, seed) = initial_state(m)?;
    let geom = a.geom();
    let curv = a.curvature();
    let c = classify(&a, 1e-8);
    let mut s = String::new();
    let _ = writeln!(s, "state.n = {}", geom.n());
    let _ = writeln!(s, "state.grid = {}", geom.dims()[0]);
    let _ = writeln!(s, "state.period = {:?}", geom.period());
    let _ = writeln!(s, "state.rank = {}", a.rank());
    let _ = writeln!(s, "state.background = {}", a.background().is_some());
    let _ = writeln!(s, "state.seed = {seed}");
    let _ = writeln!(s, "state.energy = {:e}", ymbar(&a));
    let _ = writeln!(s, "state.grad_norm = {:e}", ymbar_gradient_projected(&a).norm());
    let _ = writeln!(s, "state.f20_norm = {:e}", curv.f20.norm());
    let _ = writeln!(s, "state.f11_norm = {:e}", curv.f11.norm());
    let _ = writeln!(s, "state.f02_norm = {:e}", curv.f02.norm());
    let _ = writeln!(s, "state.f02_residual = {:e}", c.f02_residual);
    let _ = writeln!(s, "state.almost_holomorphic_residual = {:e}", c.almost_residual);
    let _ = writeln!(s, "state.yangmills_bar_residual = {:e}", c.ymbar_residual);
    let _ = writeln!(s, "state.class = {}", c.class.label());
    write_file(&m.output_dir, "inspect.txt", &s)?;
    Ok(s)
}
