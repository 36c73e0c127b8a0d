//! Pairwise kernel-regression training with early stopping, and the
//! evaluation metrics (Pearson r, R², MAE) for both channels.

mod fit;
mod loss;
mod metrics;

pub use fit::{fit, validation_loss, write_history_csv, EpochRecord, FitOutcome, TrainConfig};
pub use loss::{block_loss, pairwise_loss, target_block, LossParts};
pub use metrics::{
    evaluate_embeddings, null_baseline, ranks, score_pairs, spearman, EvalReport, Metrics, PairStats,
};

use thiserror::Error;

use crate::datagen::PairMatrix;
use crate::model::{Model, ModelError, MolInput};
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("every pair in the batch has a missing target")]
    AllPairsMasked,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("need at least 2 molecules, got {0}")]
    TooFewIndices(usize),
    #[error("size mismatch: {0}")]
    ShapeMismatch(String),
}

/// Embed every molecule once (inference mode) and score the kernel head on
/// the within-split pairs of `indices`.
pub fn evaluate(
    model: &Model,
    inputs: &[MolInput],
    matrix: &PairMatrix,
    indices: &[usize],
    workers: usize,
) -> Result<EvalReport, TrainError> {
    if inputs.len() != matrix.n() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} inputs for {} molecules",
            inputs.len(),
            matrix.n()
        )));
    }
    if indices.len() < 2 {
        return Err(TrainError::TooFewIndices(indices.len()));
    }
    let refs: Vec<&MolInput> = inputs.iter().collect();
    // only the split's rows are needed; the others get placeholders
    let mut embeddings = vec![crate::model::Embedding { h: vec![], z_shape: vec![], z_color: vec![] }; inputs.len()];
    let picked: Vec<&MolInput> = indices.iter().map(|&i| refs[i]).collect();
    for (e, &i) in model.embed(&picked, 256)?.into_iter().zip(indices) {
        embeddings[i] = e;
    }
    evaluate_embeddings(matrix, &embeddings, indices, workers)
}
