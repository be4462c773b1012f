use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::par::{map_collect, Execution};
use crate::stroke::Stroke5Row;

use super::{sequence_gradient, sequence_loss, ModelParams, Real, SketcherConfig, SketcherError};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Mixed into the seed for the batch-order generator so it differs from the
/// initialization stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4521;

/// Called after every epoch with the record and the current parameters.
pub type EpochHook<'a, T> =
    dyn FnMut(&EpochRecord, &ModelParams<T>) -> Result<(), SketcherError> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, measured before each
    /// update.
    pub train_nll: f64,
    pub val_nll: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub params: ModelParams<T>,
    pub curve: Vec<EpochRecord>,
    /// Losses of the starting parameters.
    pub initial_train_nll: Option<f64>,
    pub initial_val_nll: Option<f64>,
}

fn scored(seqs: &[&[Stroke5Row]]) -> usize {
    seqs.iter().filter(|s| s.len() >= 2).count()
}

/// Mean sequence loss over the sequences that have at least one target, or
/// `None` when there are none.
pub fn evaluate<T: Real>(
    params: &ModelParams<T>,
    seqs: &[&[Stroke5Row]],
    exec: Execution,
) -> Result<Option<f64>, SketcherError> {
    let n = scored(seqs);
    if n == 0 {
        return Ok(None);
    }
    let losses = map_collect(exec, seqs, |s| sequence_loss(params, s));
    let mut total = 0.0;
    for l in losses {
        total += l?.as_f64();
    }
    Ok(Some(total / n as f64))
}

/// Mean loss of a batch and its gradient. Per-sequence gradients may be
/// computed in parallel but are summed in batch order, so the result does not
/// depend on `exec`.
pub fn batch_gradient<T: Real>(
    params: &ModelParams<T>,
    seqs: &[&[Stroke5Row]],
    exec: Execution,
) -> Result<(f64, ModelParams<T>), SketcherError> {
    let mut grad = params.zeros_like();
    let n = scored(seqs);
    if n == 0 {
        return Ok((0.0, grad));
    }
    let parts = map_collect(exec, seqs, |s| sequence_gradient(params, s));
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l.as_f64();
        grad.add_assign(&g);
    }
    grad.scale(T::lit(1.0 / n as f64));
    Ok((loss / n as f64, grad))
}

struct Adam<T> {
    m: ModelParams<T>,
    v: ModelParams<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(params: &ModelParams<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams<T>, grad: &ModelParams<T>, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let (b1, b2) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2));
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let m_hat = m[k].as_f64() / c1;
                let v_hat = v[k].as_f64() / c2;
                p[k] -= T::lit(lr * m_hat / (v_hat.sqrt() + ADAM_EPS));
            }
        }
    }
}

fn run<T: Real>(
    mut params: ModelParams<T>,
    data: &Dataset,
    cfg: &SketcherConfig,
    lr: f64,
    on_epoch: &mut EpochHook<'_, T>,
) -> Result<TrainReport<T>, SketcherError> {
    cfg.validate()?;
    let train = data.train_sequences();
    let val = data.val_sequences();
    if scored(&train) == 0 {
        return Err(SketcherError::InvalidInput(
            "training set has no usable sequence".into(),
        ));
    }
    let exec = Execution::Parallel;
    let mut report = TrainReport {
        initial_train_nll: None,
        initial_val_nll: None,
        curve: Vec::with_capacity(cfg.epochs),
        params: params.clone(),
    };
    if cfg.epochs == 0 {
        return Ok(report);
    }
    report.initial_train_nll = evaluate(&params, &train, exec)?;
    report.initial_val_nll = evaluate(&params, &val, exec)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut weight) = (0.0, 0usize);
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[Stroke5Row]> = chunk.iter().map(|&i| train[i]).collect();
            let fail = |loss: f64| SketcherError::NonFiniteLoss {
                epoch,
                batch: batch_index,
                loss,
            };
            let (loss, mut grad) = match batch_gradient(&params, &batch, exec) {
                Ok(r) => r,
                Err(SketcherError::NonFinite(_)) => return Err(fail(f64::NAN)),
                Err(e) => return Err(e),
            };
            let norm = grad.norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(fail(loss));
            }
            if norm > cfg.grad_clip {
                grad.scale(T::lit(cfg.grad_clip / norm));
            }
            adam.step(&mut params, &grad, lr);
            let n = scored(&batch);
            loss_sum += loss * n as f64;
            weight += n;
        }
        if !params.is_finite() {
            return Err(SketcherError::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size).saturating_sub(1),
                loss: f64::NAN,
            });
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_nll: loss_sum / weight.max(1) as f64,
            val_nll: evaluate(&params, &val, exec)?,
        };
        tracing::info!(epoch = record.epoch, train = record.train_nll, val = ?record.val_nll, "epoch done");
        on_epoch(&record, &params)?;
        report.curve.push(record);
    }
    report.params = params;
    Ok(report)
}

/// Trains freshly initialized parameters (seeded by `cfg.seed`) with Adam
/// and global gradient-norm clipping. `on_epoch` runs after every epoch,
/// typically to write a checkpoint.
pub fn train<T: Real>(
    data: &Dataset,
    cfg: &SketcherConfig,
    on_epoch: &mut EpochHook<'_, T>,
) -> Result<TrainReport<T>, SketcherError> {
    cfg.validate()?;
    let params = ModelParams::init(cfg.hidden_size, cfg.num_mixtures, cfg.seed);
    run(params, data, cfg, cfg.learning_rate, on_epoch)
}

/// Continues training from `params` with the learning rate scaled by
/// `cfg.fine_tune_factor`.
pub fn fine_tune<T: Real>(
    params: &ModelParams<T>,
    data: &Dataset,
    cfg: &SketcherConfig,
    on_epoch: &mut EpochHook<'_, T>,
) -> Result<TrainReport<T>, SketcherError> {
    params.check_shapes()?;
    run(
        params.clone(),
        data,
        cfg,
        cfg.learning_rate * cfg.fine_tune_factor,
        on_epoch,
    )
}

/// Writes `epoch,train_nll,val_nll`; a missing validation loss is left empty.
pub fn write_loss_csv(path: impl AsRef<Path>, curve: &[EpochRecord]) -> Result<(), SketcherError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,train_nll,val_nll")?;
    for r in curve {
        let val = r.val_nll.map(|v| v.to_string()).unwrap_or_default();
        writeln!(f, "{},{},{}", r.epoch, r.train_nll, val)?;
    }
    f.flush()?;
    Ok(())
}
