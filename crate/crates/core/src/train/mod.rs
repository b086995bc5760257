//! Full-batch training: Adam, plateau decay of the learning rate, weight
//! clipping after every step.

mod adam;
mod schedule;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use schedule::{scheduler_step, DecayLimit, PlateauScheduler};

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::field::{CollocationSet, InterfaceSample, LevelSetField};
use crate::loss::{LossEngine, LossReport, PreparedBatch};
use crate::net::{init_params, write_checkpoint, NetworkParameters, Shape};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub patience_evals: u32,
    pub eval_every: usize,
    pub decay_limit: DecayLimit,
    /// Weight bound `M`; `None` disables clipping.
    pub clip_m: Option<f64>,
    pub clip_output: bool,
    pub eta: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    pub epoch_cap: usize,
    /// Relative decrease that counts as an improvement.
    pub improvement_tol: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lr0: 1e-3,
            decay_factor: 0.9,
            patience_evals: 30,
            eval_every: 100,
            decay_limit: DecayLimit::Events(40),
            clip_m: Some(0.1),
            clip_output: true,
            eta: 0.99,
            seed: 0,
            adam: AdamConfig::default(),
            epoch_cap: 20_000,
            improvement_tol: 1e-12,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::invalid("lr0 must be positive"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::invalid("decay_factor must lie in (0, 1)"));
        }
        if self.eval_every == 0 || self.patience_evals == 0 {
            return Err(Error::invalid(
                "eval_every and patience_evals must be positive",
            ));
        }
        if let Some(m) = self.clip_m {
            if !(m > 0.0) {
                return Err(Error::invalid("clip bound must be positive"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Something that can be minimized by [`train`].
pub trait Objective {
    /// Loss at `params`; writes `∂total/∂θ` into `grad` when given.
    fn evaluate(
        &mut self,
        params: &NetworkParameters,
        grad: Option<&mut [f64]>,
    ) -> Result<LossReport>;
}

/// The three-term ReSDF objective on a fixed batch.
#[derive(Debug)]
pub struct ResdfObjective {
    field: LevelSetField,
    batch: PreparedBatch,
    eta: f64,
    engine: LossEngine,
}

impl ResdfObjective {
    /// `field` should already be normalized.
    pub fn new(
        field: &LevelSetField,
        batch: &CollocationSet,
        shape: Shape,
        eta: f64,
    ) -> Result<Self> {
        Ok(ResdfObjective {
            field: field.clone(),
            batch: PreparedBatch::new(field, batch)?,
            eta,
            engine: LossEngine::new(shape),
        })
    }
}

impl Objective for ResdfObjective {
    fn evaluate(
        &mut self,
        params: &NetworkParameters,
        grad: Option<&mut [f64]>,
    ) -> Result<LossReport> {
        self.engine
            .resdf(params, &self.batch, &self.field, self.eta, grad)
    }
}

/// The PINN eikonal baseline on a fixed batch and interface sample.
#[derive(Debug)]
pub struct EikonalObjective {
    batch: Vec<f64>,
    interface: Vec<f64>,
    lambda: f64,
    engine: LossEngine,
}

impl EikonalObjective {
    pub fn new(
        batch: &CollocationSet,
        interface: &InterfaceSample,
        shape: Shape,
        lambda: f64,
    ) -> Result<Self> {
        if interface.is_empty() {
            return Err(Error::invalid("interface sample is empty"));
        }
        Ok(EikonalObjective {
            batch: batch.as_flat().to_vec(),
            interface: interface.as_flat().to_vec(),
            lambda,
            engine: LossEngine::new(shape),
        })
    }
}

impl Objective for EikonalObjective {
    fn evaluate(
        &mut self,
        params: &NetworkParameters,
        grad: Option<&mut [f64]>,
    ) -> Result<LossReport> {
        self.engine
            .eikonal(params, &self.batch, &self.interface, self.lambda, grad)
    }
}

/// One evaluation row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub l_gm: f64,
    pub l_sp: f64,
    pub l_rs: f64,
    pub total: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    DecayLimit,
    EpochCap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
    pub epochs: usize,
    pub decays: u32,
    pub final_lr: f64,
    pub stop: Option<StopReason>,
}

impl TrainingLog {
    fn new(lr: f64) -> Self {
        TrainingLog {
            records: Vec::new(),
            epochs: 0,
            decays: 0,
            final_lr: lr,
            stop: None,
        }
    }

    /// CSV with columns `epoch,l_gm,l_sp,l_rs,total,lr,wall_ms`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record(["epoch", "l_gm", "l_sp", "l_rs", "total", "lr", "wall_ms"])
                .map_err(csv_err)?;
        }
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Training stopped early. The log covers every evaluation before the failure.
#[derive(Debug, thiserror::Error)]
#[error("training failed at epoch {epoch}")]
pub struct TrainFailure {
    pub epoch: usize,
    #[source]
    pub source: Error,
    pub log: TrainingLog,
}

/// Hooks called by [`train`].
pub trait Observer {
    fn on_eval(&mut self, _record: &LogRecord) {}
    fn on_decay(&mut self, _decays: u32, _params: &NetworkParameters) -> Result<()> {
        Ok(())
    }
    fn on_finish(&mut self, _params: &NetworkParameters, _log: &TrainingLog) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Writes `checkpoint_decay_NN.bin` at every decay and `checkpoint_final.bin`
/// at the end.
#[derive(Clone, Debug)]
pub struct CheckpointWriter {
    pub dir: PathBuf,
    pub phi_scale: f64,
}

impl Observer for CheckpointWriter {
    fn on_decay(&mut self, decays: u32, params: &NetworkParameters) -> Result<()> {
        write_checkpoint(
            &self.dir.join(format!("checkpoint_decay_{decays:02}.bin")),
            params,
            self.phi_scale,
        )
    }

    fn on_finish(&mut self, params: &NetworkParameters, _log: &TrainingLog) -> Result<()> {
        write_checkpoint(
            &self.dir.join("checkpoint_final.bin"),
            params,
            self.phi_scale,
        )
    }
}

/// Minimizes `objective` from `params`. Every `eval_every` epochs the
/// current full-batch loss is logged and fed to the plateau scheduler.
pub fn train<O: Objective + ?Sized>(
    mut params: NetworkParameters,
    objective: &mut O,
    cfg: &TrainingConfig,
    observer: &mut dyn Observer,
) -> std::result::Result<(NetworkParameters, TrainingLog), TrainFailure> {
    let mut log = TrainingLog::new(cfg.lr0);
    let fail = |epoch: usize, source: Error, log: &TrainingLog| TrainFailure {
        epoch,
        source,
        log: log.clone(),
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(0, e, &log));
    }
    let mut sched = PlateauScheduler::new(
        cfg.lr0,
        cfg.decay_factor,
        cfg.patience_evals,
        cfg.improvement_tol,
    );
    let mut state = OptimizerState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let start = Instant::now();

    for epoch in 0..cfg.epoch_cap {
        let report = match objective.evaluate(&params, Some(&mut grad)) {
            Ok(r) if r.total.is_finite() => r,
            Ok(_) => return Err(fail(epoch, Error::non_finite("total loss", 0), &log)),
            Err(e) => return Err(fail(epoch, e, &log)),
        };
        if epoch % cfg.eval_every == 0 {
            let record = LogRecord {
                epoch,
                l_gm: report.l_gm,
                l_sp: report.l_sp,
                l_rs: report.l_rs,
                total: report.total,
                lr: sched.lr(),
                wall_ms: start.elapsed().as_millis() as u64,
            };
            log.records.push(record);
            observer.on_eval(&record);
            if sched.step(report.total) {
                log.decays = sched.decays();
                log.final_lr = sched.lr();
                if let Err(e) = observer.on_decay(sched.decays(), &params) {
                    return Err(fail(epoch, e, &log));
                }
            }
            if sched.exhausted(cfg.decay_limit) {
                log.epochs = epoch;
                log.stop = Some(StopReason::DecayLimit);
                break;
            }
        }
        if let Err(e) = adam_step(
            params.as_mut_slice(),
            &grad,
            &mut state,
            sched.lr(),
            &cfg.adam,
        ) {
            return Err(fail(epoch, e, &log));
        }
        if let Some(m) = cfg.clip_m {
            params.clip_weights(m, cfg.clip_output);
        }
        log.epochs = epoch + 1;
    }
    if log.stop.is_none() && cfg.epoch_cap > 0 {
        log.stop = Some(StopReason::EpochCap);
    }
    if cfg.epoch_cap > 0 {
        if let Err(e) = observer.on_finish(&params, &log) {
            return Err(fail(log.epochs, e, &log));
        }
    }
    Ok((params, log))
}

/// Initializes an augmented net from `cfg.seed` and trains it on the ReSDF
/// objective. `field` should already be normalized.
pub fn train_resdf(
    field: &LevelSetField,
    batch: &CollocationSet,
    width: usize,
    depth: usize,
    cfg: &TrainingConfig,
    observer: &mut dyn Observer,
) -> std::result::Result<(NetworkParameters, TrainingLog), TrainFailure> {
    let setup = || -> Result<(NetworkParameters, ResdfObjective)> {
        let params = init_params(field.dim(), width, depth, cfg.seed)?;
        let objective = ResdfObjective::new(field, batch, params.shape(), cfg.eta)?;
        Ok((params, objective))
    };
    let (params, mut objective) = setup().map_err(|e| TrainFailure {
        epoch: 0,
        source: e,
        log: TrainingLog::new(cfg.lr0),
    })?;
    train(params, &mut objective, cfg, observer)
}
