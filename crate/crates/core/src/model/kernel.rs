use crate::tensor::{Float, Result, Tape, Tensor, Var};

/// `(x·y)/(x·x + y·y − x·y)`; 1 when both vectors are zero.
pub fn tanimoto_kernel(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "kernel arguments differ in length");
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let yy: f64 = y.iter().map(|a| a * a).sum();
    let denom = xx + yy - dot;
    if denom == 0.0 {
        1.0
    } else {
        dot / denom
    }
}

/// Kernel of two `[1, d]` nodes, differentiable in both.
pub fn tanimoto_kernel_pair<T: Float>(tape: &mut Tape<T>, x: Var, y: Var) -> Result<Var> {
    let xy = tape.mul(x, y)?;
    let dot = tape.sum_all(xy);
    let xsq = tape.square(x);
    let xx = tape.sum_all(xsq);
    let ysq = tape.square(y);
    let yy = tape.sum_all(ysq);
    let s = tape.add(xx, yy)?;
    let denom = tape.sub(s, dot)?;
    tape.safe_div(dot, denom, T::one())
}

/// All-pairs kernel of the rows of `z` (`[N, d]` → `[N, N]`).
pub fn tanimoto_kernel_matrix<T: Float>(tape: &mut Tape<T>, z: Var) -> Result<Var> {
    let n = tape.value(z).rows();
    let zt = tape.transpose(z);
    let gram = tape.matmul(z, zt)?;
    let sq = tape.square(z);
    let norms = tape.sum(sq, 1)?;
    let ones_row = tape.constant(Tensor::full(1, n, T::one()));
    let ones_col = tape.constant(Tensor::full(n, 1, T::one()));
    let ni = tape.matmul(norms, ones_row)?;
    let nt = tape.transpose(norms);
    let nj = tape.matmul(ones_col, nt)?;
    let s = tape.add(ni, nj)?;
    let denom = tape.sub(s, gram)?;
    tape.safe_div(gram, denom, T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(tanimoto_kernel(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
        assert_eq!(tanimoto_kernel(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(tanimoto_kernel(&[1.0, 1.0], &[1.0, 0.0]), 0.5);
        assert_eq!(tanimoto_kernel(&[0.0, 0.0], &[0.0, 0.0]), 1.0);
        let (a, b) = ([0.3, -1.2, 2.0], [1.1, 0.4, -0.7]);
        assert_eq!(tanimoto_kernel(&a, &b), tanimoto_kernel(&b, &a));
    }

    #[test]
    fn matrix_matches_scalar() {
        let rows = [[1.0, 1.0, 0.0], [1.0, 0.0, 0.5], [0.0, 0.0, 0.0], [-0.5, 2.0, 1.0]];
        let mut tape = Tape::<f64>::new();
        let z = tape.param(Tensor::from_fn(4, 3, |r, c| rows[r][c]));
        let kv = tanimoto_kernel_matrix(&mut tape, z).unwrap();
        let k = tape.value(kv).clone();
        for i in 0..4 {
            for j in 0..4 {
                let expected = tanimoto_kernel(&rows[i], &rows[j]);
                assert!((k.get(i, j) - expected).abs() < 1e-15, "{i},{j}");
            }
        }
        let mut tape = Tape::<f64>::new();
        let x = tape.param(Tensor::row(vec![1.0, 1.0]));
        let y = tape.param(Tensor::row(vec![1.0, 0.0]));
        let v = tanimoto_kernel_pair(&mut tape, x, y).unwrap();
        assert_eq!(tape.value(v).item(), 0.5);
    }

    #[test]
    fn zero_vectors_have_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.param(Tensor::zeros(1, 3));
        let y = tape.param(Tensor::zeros(1, 3));
        let v = tanimoto_kernel_pair(&mut tape, x, y).unwrap();
        assert_eq!(tape.value(v).item(), 1.0);
        let g = tape.backward(v).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|&d| d == 0.0));
    }
}
