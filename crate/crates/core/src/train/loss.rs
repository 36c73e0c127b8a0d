use super::TrainError;
use crate::datagen::PairMatrix;
use crate::model::{tanimoto_kernel, tanimoto_kernel_matrix};
use crate::tensor::{Float, Tape, Tensor, Var};

/// Loss nodes: the total and its two unweighted terms.
#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub shape: Var,
    pub color: Var,
}

/// Mean squared error between the kernel matrices of `z_shape`/`z_color`
/// (`[N, d]`) and the `[N, N]` targets, over all ordered pairs including the
/// diagonal. NaN targets are masked out of both sum and count.
pub fn pairwise_loss<T: Float>(
    tape: &mut Tape<T>,
    z_shape: Var,
    z_color: Var,
    t_shape: &Tensor<T>,
    t_color: &Tensor<T>,
    lambda: T,
) -> Result<LossParts, TrainError> {
    let shape = masked_mse(tape, z_shape, t_shape)?;
    let color = masked_mse(tape, z_color, t_color)?;
    let weighted = tape.scale(color, lambda);
    let total = tape.add(shape, weighted)?;
    Ok(LossParts { total, shape, color })
}

fn masked_mse<T: Float>(tape: &mut Tape<T>, z: Var, targets: &Tensor<T>) -> Result<Var, TrainError> {
    let n = tape.value(z).rows();
    if targets.shape() != [n, n] {
        return Err(TrainError::ShapeMismatch(format!(
            "targets {:?} for {n} embeddings",
            targets.shape()
        )));
    }
    let mask = targets.map(|t| if t.is_nan() { T::zero() } else { T::one() });
    let count = mask.sum().as_f64();
    if count == 0.0 {
        return Err(TrainError::AllPairsMasked);
    }
    let filled = targets.map(|t| if t.is_nan() { T::zero() } else { t });
    let k = tanimoto_kernel_matrix(tape, z)?;
    let t = tape.constant(filled);
    let diff = tape.sub(k, t)?;
    let sq = tape.square(diff);
    let m = tape.constant(mask);
    let masked = tape.mul(sq, m)?;
    let total = tape.sum_all(masked);
    Ok(tape.scale(total, T::from_f64(1.0 / count)))
}

/// `[B, B]` shape and color target blocks for the molecules `idx`.
pub fn target_block(matrix: &PairMatrix, idx: &[usize]) -> (Tensor<f32>, Tensor<f32>) {
    let b = idx.len();
    (
        Tensor::from_fn(b, b, |r, c| matrix.shape_at(idx[r], idx[c])),
        Tensor::from_fn(b, b, |r, c| matrix.color_at(idx[r], idx[c])),
    )
}

/// The same masked MSE evaluated directly from embeddings, in f64.
/// Returns `(shape_term, color_term)`.
pub fn block_loss(
    matrix: &PairMatrix,
    idx: &[usize],
    z_shape: &[Vec<f64>],
    z_color: &[Vec<f64>],
) -> Result<(f64, f64), TrainError> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            for (ch, (z, t)) in [(z_shape, matrix.shape_at(i, j)), (z_color, matrix.color_at(i, j))]
                .into_iter()
                .enumerate()
            {
                if t.is_nan() {
                    continue;
                }
                let d = tanimoto_kernel(&z[a], &z[b]) - t as f64;
                sums[ch] += d * d;
                counts[ch] += 1;
            }
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(TrainError::AllPairsMasked);
    }
    Ok((sums[0] / counts[0] as f64, sums[1] / counts[1] as f64))
}
