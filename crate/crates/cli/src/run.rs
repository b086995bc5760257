//! Executes one experiment and writes its artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use redist::field::{
    catalog_get, grid_points, normalize_phi, random_points, sample_interface, CollocationSet,
    InterfaceSample, LevelSetField, DEFAULT_CLOUD_SIZE,
};
use redist::fmm::{self, GridField, Order};
use redist::metrics::{
    audit_hard_constraints, evaluate_network, report_from_samples, write_results_csv, ErrorReport,
    Oracle, ResultRow,
};
use redist::net::{init_geometric, predict, NetworkParameters, NORM_EPS};
use redist::train::{
    self, CheckpointWriter, EikonalObjective, LogRecord, Observer, StopReason, TrainingLog,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Method, PointKind};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks do not affect the exit status.
    pub enforced: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub redist: &'static str,
    pub cli: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub decays: u32,
    pub final_lr: f64,
    pub stop: Option<StopReason>,
}

impl From<&TrainingLog> for TrainingSummary {
    fn from(log: &TrainingLog) -> Self {
        TrainingSummary {
            epochs: log.epochs,
            decays: log.decays,
            final_lr: log.final_lr,
            stop: log.stop,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub run_id: String,
    pub completed: bool,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub phi_scale: Option<f64>,
    pub report: Option<ErrorReport>,
    pub training: Option<TrainingSummary>,
    pub checks: Vec<Check>,
    /// File names relative to the run directory.
    pub artifacts: Vec<String>,
    pub wall_s: f64,
}

impl Manifest {
    /// Completed and every enforced check passed.
    pub fn ok(&self) -> bool {
        self.completed && self.checks.iter().all(|c| c.passed || !c.enforced)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub row: Option<ResultRow>,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.manifest.ok()
    }
}

struct Progress {
    checkpoints: Option<CheckpointWriter>,
    verbose: bool,
    run_id: String,
}

impl Observer for Progress {
    fn on_eval(&mut self, r: &LogRecord) {
        if self.verbose {
            eprintln!(
                "[{}] epoch {:>6}  loss {:.4e}  lr {:.3e}",
                self.run_id, r.epoch, r.total, r.lr
            );
        }
    }

    fn on_decay(&mut self, decays: u32, params: &NetworkParameters) -> redist::Result<()> {
        match &mut self.checkpoints {
            Some(c) => c.on_decay(decays, params),
            None => Ok(()),
        }
    }

    fn on_finish(&mut self, params: &NetworkParameters, log: &TrainingLog) -> redist::Result<()> {
        match &mut self.checkpoints {
            Some(c) => c.on_finish(params, log),
            None => Ok(()),
        }
    }
}

/// Everything shared by the network and marching branches.
struct Setup {
    field: LevelSetField,
    points: CollocationSet,
    eval_grid: CollocationSet,
    oracle: Oracle,
    gamma: InterfaceSample,
}

fn prepare(cfg: &ExperimentConfig, manifest: &mut Manifest) -> Result<Setup> {
    let raw = catalog_get(&cfg.field)?;
    let dim = raw.dim();
    let points = match cfg.points.kind {
        PointKind::Uniform => grid_points(dim, cfg.points.n_per_side)?,
        PointKind::Random => random_points(dim, cfg.points.count.unwrap_or(0), cfg.points.seed)?,
    };
    let field = normalize_phi(&raw, &points)?;
    manifest.phi_scale = Some(field.scale() / raw.scale());
    let n_eval = cfg
        .eval
        .n_per_side
        .unwrap_or(if dim == 2 { 256 } else { 64 });
    let eval_grid = grid_points(dim, n_eval)?;
    let oracle = Oracle::for_field(&field, cfg.eval.cloud_points.unwrap_or(DEFAULT_CLOUD_SIZE))?;
    let gamma = sample_interface(
        &field,
        cfg.eval
            .interface_points
            .unwrap_or(if dim == 2 { 2000 } else { 4000 }),
    )?;
    Ok(Setup {
        field,
        points,
        eval_grid,
        oracle,
        gamma,
    })
}

/// Runs `cfg`, writing into its run directory. Errors inside the run are
/// recorded in the manifest; only failures to write the manifest itself are
/// returned.
pub fn run(cfg: &ExperimentConfig, verbose: bool) -> Result<RunOutcome> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let start = Instant::now();
    let mut manifest = Manifest {
        run_id: cfg.run_id(),
        completed: false,
        error: None,
        config: cfg.clone(),
        versions: Versions {
            redist: redist::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        phi_scale: None,
        report: None,
        training: None,
        checks: Vec::new(),
        artifacts: Vec::new(),
        wall_s: 0.0,
    };
    let result = cfg
        .validate()
        .and_then(|_| execute(cfg, &dir, &mut manifest, verbose));
    manifest.wall_s = start.elapsed().as_secs_f64();
    let mut row = None;
    match result {
        Ok(report) => {
            manifest.completed = true;
            manifest.report = Some(report);
            let r = ResultRow::new(
                &manifest.run_id,
                &cfg.field,
                cfg.method.name(),
                n_per_side(cfg),
                cfg.net.width,
                cfg.net.depth,
                &report,
                manifest.wall_s,
            );
            write_results_csv(
                File::create(dir.join("results.csv"))?,
                std::slice::from_ref(&r),
            )?;
            manifest.artifacts.push("results.csv".into());
            row = Some(r);
        }
        Err(e) => manifest.error = Some(format!("{e:#}")),
    }
    add_checkpoints(&dir, &mut manifest.artifacts)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(RunOutcome { dir, manifest, row })
}

fn n_per_side(cfg: &ExperimentConfig) -> usize {
    match cfg.points.kind {
        PointKind::Uniform => cfg.points.n_per_side,
        PointKind::Random => {
            let dim = catalog_get(&cfg.field).map(|f| f.dim()).unwrap_or(2);
            (cfg.points.count.unwrap_or(0) as f64)
                .powf(1.0 / dim as f64)
                .round() as usize
        }
    }
}

fn add_checkpoints(dir: &Path, artifacts: &mut Vec<String>) -> Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("checkpoint_") && n.ends_with(".bin"))
        .collect();
    names.sort();
    artifacts.extend(names);
    Ok(())
}

fn execute(
    cfg: &ExperimentConfig,
    dir: &Path,
    manifest: &mut Manifest,
    verbose: bool,
) -> Result<ErrorReport> {
    let setup = prepare(cfg, manifest)?;
    if cfg.method.is_network() {
        network(cfg, &setup, dir, manifest, verbose)
    } else {
        marching(cfg, &setup, dir, manifest)
    }
}

fn network(
    cfg: &ExperimentConfig,
    s: &Setup,
    dir: &Path,
    manifest: &mut Manifest,
    verbose: bool,
) -> Result<ErrorReport> {
    let tcfg = cfg.train.to_training(cfg.method)?;
    let dim = s.field.dim();
    let mut progress = Progress {
        checkpoints: cfg.train.checkpoints.then(|| CheckpointWriter {
            dir: dir.to_path_buf(),
            phi_scale: manifest.phi_scale.unwrap_or(1.0),
        }),
        verbose,
        run_id: manifest.run_id.clone(),
    };
    let result = match cfg.method {
        Method::Resdf => train::train_resdf(
            &s.field,
            &s.points,
            cfg.net.width,
            cfg.net.depth,
            &tcfg,
            &mut progress,
        ),
        _ => {
            let params = init_geometric(
                dim,
                cfg.net.width,
                cfg.net.depth,
                tcfg.seed,
                cfg.net.pinn_init_radius,
            )?;
            let mut objective =
                EikonalObjective::new(&s.points, &s.gamma, params.shape(), cfg.train.lambda)?;
            train::train(params, &mut objective, &tcfg, &mut progress)
        }
    };
    let log_path = dir.join("train_log.csv");
    let (params, log) = match result {
        Ok(ok) => ok,
        Err(failure) => {
            failure.log.write_csv(File::create(&log_path)?)?;
            manifest.artifacts.push("train_log.csv".into());
            manifest.training = Some((&failure.log).into());
            return Err(failure.into());
        }
    };
    log.write_csv(File::create(&log_path)?)?;
    manifest.artifacts.push("train_log.csv".into());
    manifest.training = Some((&log).into());

    let report = evaluate_network(&params, &s.field, &s.eval_grid, &s.oracle, &s.gamma)?;

    let probe = grid_points(dim, if dim == 2 { 128 } else { 32 })?;
    let mut audit_points = probe.as_flat().to_vec();
    audit_points.extend_from_slice(s.gamma.as_flat());
    let audit = audit_hard_constraints(&params, &s.field, &audit_points)?;
    let hard = cfg.method == Method::Resdf;
    manifest.checks.push(Check {
        name: "unit_norm".into(),
        passed: audit.max_norm_deviation <= 1e-9,
        enforced: true,
        detail: format!(
            "max |‖V‖ - 1| = {:e} over {} points",
            audit.max_norm_deviation, audit.points
        ),
    });
    manifest.checks.push(Check {
        name: "sign".into(),
        passed: audit.sign_violations == 0,
        enforced: hard,
        detail: format!(
            "{} of {} points with sign(u) != sign(phi)",
            audit.sign_violations, audit.sign_checked
        ),
    });
    manifest.checks.push(Check {
        name: "zero_on_interface".into(),
        passed: audit.zero_violations == 0,
        enforced: hard,
        detail: format!(
            "{} of {} points with phi = 0 and u != 0",
            audit.zero_violations, audit.zero_checked
        ),
    });
    if let Some(m) = tcfg.clip_m {
        let w = params.max_hidden_weight();
        manifest.checks.push(Check {
            name: "clip_bound".into(),
            passed: w <= m,
            enforced: true,
            detail: format!("max hidden |W| = {w:e}, M = {m:e}"),
        });
    }

    let phi: Vec<f64> = s.eval_grid.iter().map(|p| s.field.eval(p)).collect();
    let pred = predict(&params, s.eval_grid.as_flat(), &phi)?;
    write_dumps(dir, &s.eval_grid, &phi, &pred.u, &pred.v, manifest)?;
    Ok(report)
}

fn unit(v: &mut [f64]) {
    let n = redist::field::norm(v);
    for c in v.iter_mut() {
        *c /= n.max(NORM_EPS);
    }
}

fn marching(
    cfg: &ExperimentConfig,
    s: &Setup,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<ErrorReport> {
    let order = if cfg.method == Method::Fmm1 {
        Order::First
    } else {
        Order::Second
    };
    let dim = s.field.dim();
    let grid = fmm::signed_redistance(&s.field, cfg.points.n_per_side, order)?;
    let mut grad = grid.gradient();
    grad.chunks_exact_mut(dim).for_each(unit);
    let mut v_gamma = vec![0.0; s.gamma.len() * dim];
    for (x, out) in s.gamma.iter().zip(v_gamma.chunks_exact_mut(dim)) {
        grid.interpolate(&grad, dim, x, out);
        unit(out);
    }
    let report = report_from_samples(
        grid.values(),
        &grad,
        &s.points,
        &s.oracle,
        &v_gamma,
        &s.gamma,
    )?;

    let mismatched = s
        .points
        .iter()
        .zip(grid.values())
        .filter(|(x, u)| {
            let p = s.field.eval(x);
            p != 0.0 && p.signum() != u.signum()
        })
        .count();
    manifest.checks.push(Check {
        name: "sign".into(),
        passed: mismatched == 0,
        enforced: true,
        detail: format!("{mismatched} nodes with sign(u) != sign(phi)"),
    });
    manifest.checks.push(Check {
        name: "all_accepted".into(),
        passed: grid.is_complete(),
        enforced: true,
        detail: format!("{} nodes", grid.len()),
    });

    fmm::write_csv(BufWriter::new(File::create(dir.join("fmm_u.csv"))?), &grid)?;
    fmm::write_raw(dir, "fmm_u", &grid)?;
    manifest
        .artifacts
        .extend(["fmm_u.csv", "fmm_u.bin", "fmm_u.json"].map(String::from));

    let phi: Vec<f64> = s.eval_grid.iter().map(|p| s.field.eval(p)).collect();
    let mut u = Vec::with_capacity(phi.len());
    let mut v = vec![0.0; phi.len() * dim];
    let mut tmp = [0.0];
    for (x, out) in s.eval_grid.iter().zip(v.chunks_exact_mut(dim)) {
        grid.interpolate(grid.values(), 1, x, &mut tmp);
        u.push(tmp[0]);
        grid.interpolate(&grad, dim, x, out);
        unit(out);
    }
    write_dumps(dir, &s.eval_grid, &phi, &u, &v, manifest)?;
    Ok(report)
}

/// `dump.csv` with `x,y[,z],phi,u,v_x,v_y[,v_z]` plus raw blocks of `phi`
/// and `u` on the visualization grid.
fn write_dumps(
    dir: &Path,
    grid: &CollocationSet,
    phi: &[f64],
    u: &[f64],
    v: &[f64],
    manifest: &mut Manifest,
) -> Result<()> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let dim = grid.dim();
    let mut out = BufWriter::new(File::create(dir.join("dump.csv"))?);
    let mut header: Vec<String> = AXES[..dim].iter().map(|s| s.to_string()).collect();
    header.push("phi".into());
    header.push("u".into());
    header.extend(AXES[..dim].iter().map(|a| format!("v_{a}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, x) in grid.iter().enumerate() {
        for c in x {
            write!(out, "{c},")?;
        }
        write!(out, "{},{}", phi[i], u[i])?;
        for c in &v[i * dim..(i + 1) * dim] {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    manifest.artifacts.push("dump.csv".into());

    let n = (grid.len() as f64).powf(1.0 / dim as f64).round() as usize;
    let h = grid.spacing().unwrap_or(2.0 / (n - 1) as f64);
    for (name, data) in [("dump_phi", phi), ("dump_u", u)] {
        let g = GridField::from_values(dim, n, h, -1.0, data.to_vec())?;
        fmm::write_raw(dir, name, &g)?;
        manifest.artifacts.push(format!("{name}.bin"));
        manifest.artifacts.push(format!("{name}.json"));
    }
    Ok(())
}

/// Runs every config in order and writes the combined `results.csv` and
/// `sweep_manifest.json` into `out`. A failed run does not stop the sweep.
pub fn sweep(configs: &[ExperimentConfig], out: &Path, verbose: bool) -> Result<Vec<RunOutcome>> {
    anyhow::ensure!(!configs.is_empty(), "invalid argument: sweep has no runs");
    std::fs::create_dir_all(out)?;
    let mut outcomes = Vec::with_capacity(configs.len());
    for cfg in configs {
        let outcome = run(cfg, verbose)?;
        if verbose || !outcome.ok() {
            eprintln!(
                "[{}] {}",
                outcome.manifest.run_id,
                match (&outcome.manifest.error, outcome.ok()) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, false) => "self-check failed".into(),
                    (None, true) => "done".into(),
                }
            );
        }
        outcomes.push(outcome);
    }
    let rows: Vec<ResultRow> = outcomes.iter().filter_map(|o| o.row.clone()).collect();
    write_results_csv(File::create(out.join("results.csv"))?, &rows)?;
    #[derive(Serialize)]
    struct Entry<'a> {
        run_id: &'a str,
        dir: String,
        ok: bool,
        error: Option<&'a str>,
    }
    let entries: Vec<Entry> = outcomes
        .iter()
        .map(|o| Entry {
            run_id: &o.manifest.run_id,
            dir: o.dir.display().to_string(),
            ok: o.ok(),
            error: o.manifest.error.as_deref(),
        })
        .collect();
    std::fs::write(
        out.join("sweep_manifest.json"),
        serde_json::to_string_pretty(&entries)?,
    )?;
    Ok(outcomes)
}
