use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{block_loss, pairwise_loss, target_block};
use super::TrainError;
use crate::datagen::{PairMatrix, SplitSpec};
use crate::model::{Model, MolInput};
use crate::tensor::{Adam, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// learning rate reached at the last epoch
    pub lr_floor: f64,
    pub max_epochs: usize,
    /// epochs without validation improvement tolerated before stopping
    pub patience: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            lr: 1e-3,
            lr_floor: 1e-4,
            max_epochs: 300,
            patience: 20,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if !(self.lr > 0.0 && self.lr_floor > 0.0 && self.lr.is_finite() && self.lr_floor.is_finite()) {
            return bad("learning rates must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        Ok(())
    }

    /// Linear decay from `lr` at epoch 0 to `lr_floor` at the last epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.max_epochs <= 1 {
            return self.lr;
        }
        let t = epoch.min(self.max_epochs - 1) as f64 / (self.max_epochs - 1) as f64;
        self.lr + (self.lr_floor - self.lr) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss_shape: f64,
    pub val_loss_color: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Model state at the best validation epoch.
    pub best: Model,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Train `model` on the pairs of `split.train`, selecting the epoch with the
/// lowest validation loss `shape + λ·color`. `inputs` is aligned with the
/// matrix rows. With an empty validation set the training loss is used.
pub fn fit(
    model: &mut Model,
    inputs: &[MolInput],
    matrix: &PairMatrix,
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<FitOutcome, TrainError> {
    cfg.validate()?;
    if inputs.len() != matrix.n() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} inputs for {} molecules",
            inputs.len(),
            matrix.n()
        )));
    }
    if split.train.len() < 2 {
        return Err(TrainError::TooFewIndices(split.train.len()));
    }
    if split.val.is_empty() {
        log::warn!("empty validation split; selecting on training loss");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::<f32>::new(cfg.lr);
    let mut order = split.train.clone();
    let mut history = Vec::new();
    let mut best: Option<(Model, usize, f64)> = None;
    let mut stale = 0;
    for epoch in 0..cfg.max_epochs {
        adam.lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        // a lone trailing molecule only contributes its trivial diagonal
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
            batches.pop();
        }
        let mut loss_sum = 0.0;
        for (b, idx) in batches.iter().enumerate() {
            let loss = train_step(model, &mut adam, inputs, matrix, idx, cfg.lambda as f32)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: b });
            }
            loss_sum += loss;
        }
        let train_loss = loss_sum / batches.len() as f64;
        let (vs, vc) = if split.val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            validation_loss(model, inputs, matrix, &split.val)?
        };
        let score = if split.val.is_empty() { train_loss } else { vs + cfg.lambda * vc };
        if !score.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, batch: batches.len() });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss_shape: vs,
            val_loss_color: vc,
        });
        log::info!("epoch {epoch}: train {train_loss:.5} val shape {vs:.5} color {vc:.5}");
        if best.as_ref().is_none_or(|(_, _, s)| score < *s) {
            best = Some((model.clone(), epoch, score));
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (best, best_epoch, best_val_loss) = best.expect("at least one epoch ran");
    Ok(FitOutcome {
        best,
        best_epoch,
        best_val_loss,
        history,
    })
}

fn train_step(
    model: &mut Model,
    adam: &mut Adam<f32>,
    inputs: &[MolInput],
    matrix: &PairMatrix,
    idx: &[usize],
    lambda: f32,
) -> Result<f64, TrainError> {
    let batch: Vec<&MolInput> = idx.iter().map(|&i| &inputs[i]).collect();
    let (ts, tc) = target_block(matrix, idx);
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let fwd = model.forward(&mut tape, &vars, &batch, true)?;
    let loss = pairwise_loss(&mut tape, fwd.z_shape, fwd.z_color, &ts, &tc, lambda)?;
    let value = tape.value(loss.total).item() as f64;
    if !value.is_finite() {
        return Ok(value);
    }
    let grads = tape.backward(loss.total)?;
    let g: Vec<Tensor<f32>> = vars
        .iter()
        .zip(&model.params)
        .map(|(&v, p): (&Var, _)| grads.get_or_zeros(v, p))
        .collect();
    adam.step(&mut model.params, &g);
    model.update_running(&fwd.batch_stats);
    Ok(value)
}

/// Inference-mode `(shape, color)` loss over all ordered pairs of `idx`.
pub fn validation_loss(
    model: &Model,
    inputs: &[MolInput],
    matrix: &PairMatrix,
    idx: &[usize],
) -> Result<(f64, f64), TrainError> {
    let refs: Vec<&MolInput> = idx.iter().map(|&i| &inputs[i]).collect();
    let emb = model.embed(&refs, 256)?;
    let zs: Vec<Vec<f64>> = emb.iter().map(|e| e.z_shape.iter().map(|&x| x as f64).collect()).collect();
    let zc: Vec<Vec<f64>> = emb.iter().map(|e| e.z_color.iter().map(|&x| x as f64).collect()).collect();
    block_loss(matrix, idx, &zs, &zc)
}

pub fn write_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,train_loss,val_loss_shape,val_loss_color")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss_shape, r.val_loss_color
        )?;
    }
    out.flush()
}
