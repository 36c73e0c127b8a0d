use std::rc::Rc;

use super::{Float, Result, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    /// division with a constant output where the denominator is zero
    SafeDiv(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Relu(usize),
    Square(usize),
    Sqrt(usize),
    SumAll(usize),
    SumAxis(usize, usize),
    ScatterAdd(usize, Rc<[usize]>),
    Gather(usize, Rc<[usize]>),
    Concat(Vec<usize>, usize),
    Scale(usize, T),
    MulScalar(usize, usize),
    BatchNormTrain {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Tensor<T>,
        inv_std: Vec<T>,
    },
    BatchNormEval {
        x: usize,
        gamma: usize,
        beta: usize,
        mean: Vec<T>,
        inv_std: Vec<T>,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
/// node list is already a topological order.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients from one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Float> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` received none.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor<T>) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn mismatch(op: &'static str, a: &Tensor<impl Float>, b: &Tensor<impl Float>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

/// How a binary elementwise op lines up its operands.
#[derive(Clone, Copy)]
enum Layout {
    Same,
    /// right operand is `[1, C]`
    RowB,
    /// left operand is `[1, C]`
    RowA,
}

fn layout<T: Float>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<(Layout, usize, usize)> {
    if a.shape() == b.shape() {
        Ok((Layout::Same, a.rows(), a.cols()))
    } else if b.rows() == 1 && b.cols() == a.cols() {
        Ok((Layout::RowB, a.rows(), a.cols()))
    } else if a.rows() == 1 && a.cols() == b.cols() {
        Ok((Layout::RowA, b.rows(), b.cols()))
    } else {
        Err(mismatch(op, a, b))
    }
}

fn zip_with<T: Float>(a: &Tensor<T>, b: &Tensor<T>, l: Layout, rows: usize, cols: usize, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let (ad, bd) = (a.data(), b.data());
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            let (x, y) = match l {
                Layout::Same => (ad[k], bd[k]),
                Layout::RowB => (ad[k], bd[c]),
                Layout::RowA => (ad[c], bd[k]),
            };
            out.push(f(x, y));
        }
    }
    Tensor::matrix(rows, cols, out).unwrap()
}

/// Sums an `[R, C]` gradient down to the operand's shape (`[1, C]` when broadcast).
fn reduce_to<T: Float>(g: Tensor<T>, target_rows: usize) -> Tensor<T> {
    if g.rows() == target_rows {
        return g;
    }
    let cols = g.cols();
    let mut out = vec![T::zero(); cols];
    for r in 0..g.rows() {
        for (o, &x) in out.iter_mut().zip(g.row_slice(r)) {
            *o += x;
        }
    }
    Tensor::row(out)
}

fn accumulate<T: Float>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += *x;
            }
        }
        None => *slot = Some(g),
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Trainable leaf: receives a gradient.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Constant leaf: no gradient is computed for it.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (l, rows, cols) = layout(name, va, vb)?;
        let out = zip_with(va, vb, l, rows, cols, f);
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a.0, b.0))
    }

    /// `a / b`, except `fallback` (with zero gradient) wherever `b == 0`.
    pub fn safe_div(&mut self, a: Var, b: Var, fallback: T) -> Result<Var> {
        self.binary(
            "safe_div",
            a,
            b,
            move |x, y| if y == T::zero() { fallback } else { x / y },
            Op::SafeDiv(a.0, b.0),
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(out, Op::MatMul(a.0, b.0), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Transpose(a.0), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Relu(a.0), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Square(a.0), rg)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.sqrt());
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Sqrt(a.0), rg)
    }

    /// Sum of all entries, as `[1, 1]`.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a.0]);
        self.push(out, Op::SumAll(a.0), rg)
    }

    /// Sum over rows (`axis = 0`, giving `[1, C]`) or columns (`axis = 1`, giving `[R, 1]`).
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        let v = self.value(a);
        let (r, c) = (v.rows(), v.cols());
        let out = match axis {
            0 => {
                let mut acc = vec![T::zero(); c];
                for i in 0..r {
                    for (o, &x) in acc.iter_mut().zip(v.row_slice(i)) {
                        *o += x;
                    }
                }
                Tensor::row(acc)
            }
            1 => Tensor::matrix(r, 1, (0..r).map(|i| v.row_slice(i).iter().copied().sum()).collect())?,
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op: "sum",
                    lhs: v.shape().to_vec(),
                    rhs: vec![axis],
                })
            }
        };
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::SumAxis(a.0, axis), rg))
    }

    /// `out[index[e]] += src[e]` for every row `e`; `out` has `rows` rows.
    pub fn scatter_add(&mut self, src: Var, index: Rc<[usize]>, rows: usize) -> Result<Var> {
        let v = self.value(src);
        if index.len() != v.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "scatter_add",
                lhs: v.shape().to_vec(),
                rhs: vec![index.len()],
            });
        }
        let c = v.cols();
        let mut out = Tensor::zeros(rows, c);
        for (e, &dst) in index.iter().enumerate() {
            if dst >= rows {
                return Err(TensorError::IndexOutOfRange { index: dst, len: rows });
            }
            let row = &mut out.data_mut()[dst * c..(dst + 1) * c];
            for (o, &x) in row.iter_mut().zip(v.row_slice(e)) {
                *o += x;
            }
        }
        let rg = self.rg(&[src.0]);
        Ok(self.push(out, Op::ScatterAdd(src.0, index), rg))
    }

    /// `out[e] = src[index[e]]`.
    pub fn gather(&mut self, src: Var, index: Rc<[usize]>) -> Result<Var> {
        let v = self.value(src);
        let c = v.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            if i >= v.rows() {
                return Err(TensorError::IndexOutOfRange { index: i, len: v.rows() });
            }
            data.extend_from_slice(v.row_slice(i));
        }
        let out = Tensor::matrix(index.len(), c, data)?;
        let rg = self.rg(&[src.0]);
        Ok(self.push(out, Op::Gather(src.0, index), rg))
    }

    /// Stacks along rows (`axis = 0`) or columns (`axis = 1`).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.value(parts[0]).clone();
        let out = match axis {
            0 => {
                let mut data = first.data().to_vec();
                let mut rows = first.rows();
                for &p in &parts[1..] {
                    let v = self.value(p);
                    if v.cols() != first.cols() {
                        return Err(mismatch("concat", &first, v));
                    }
                    data.extend_from_slice(v.data());
                    rows += v.rows();
                }
                Tensor::matrix(rows, first.cols(), data)?
            }
            1 => {
                let r = first.rows();
                for &p in parts {
                    if self.value(p).rows() != r {
                        return Err(mismatch("concat", &first, self.value(p)));
                    }
                }
                let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
                let mut data = Vec::with_capacity(r * cols);
                for i in 0..r {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row_slice(i));
                    }
                }
                Tensor::matrix(r, cols, data)?
            }
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: vec![axis],
                })
            }
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(out, Op::Concat(ids, axis), rg))
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Scale(a.0, c), rg)
    }

    /// Multiplication by a `[1, 1]` node.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.value(s);
        if sv.len() != 1 {
            return Err(mismatch("mul_scalar", self.value(a), sv));
        }
        let k = sv.item();
        let out = self.value(a).map(|x| x * k);
        let rg = self.rg(&[a.0, s.0]);
        Ok(self.push(out, Op::MulScalar(a.0, s.0), rg))
    }

    /// Batch normalization over rows with batch statistics (biased variance).
    /// Returns the output plus the batch mean and variance per column.
    pub fn batchnorm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Result<(Var, Vec<T>, Vec<T>)> {
        let v = self.value(x);
        let (r, c) = (v.rows(), v.cols());
        for p in [gamma, beta] {
            if self.value(p).shape() != [1, c] {
                return Err(mismatch("batchnorm", v, self.value(p)));
            }
        }
        let n = T::from_f64(r as f64);
        let mut mean = vec![T::zero(); c];
        for i in 0..r {
            for (m, &x) in mean.iter_mut().zip(v.row_slice(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); c];
        for i in 0..r {
            for ((s, &x), &m) in var.iter_mut().zip(v.row_slice(i)).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        let inv_std: Vec<T> = var.iter().map(|&s| T::one() / (s + eps).sqrt()).collect();
        let xhat = Tensor::from_fn(r, c, |i, j| (v.get(i, j) - mean[j]) * inv_std[j]);
        let (g, b) = (self.value(gamma), self.value(beta));
        let out = Tensor::from_fn(r, c, |i, j| g.data()[j] * xhat.get(i, j) + b.data()[j]);
        let rg = self.rg(&[x.0, gamma.0, beta.0]);
        let node = self.push(
            out,
            Op::BatchNormTrain {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                inv_std,
            },
            rg,
        );
        Ok((node, mean, var))
    }

    /// Batch normalization as a fixed affine map from running statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        eps: T,
    ) -> Result<Var> {
        let v = self.value(x);
        let (r, c) = (v.rows(), v.cols());
        if running_mean.len() != c || running_var.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm_eval",
                lhs: v.shape().to_vec(),
                rhs: vec![running_mean.len(), running_var.len()],
            });
        }
        for p in [gamma, beta] {
            if self.value(p).shape() != [1, c] {
                return Err(mismatch("batchnorm_eval", v, self.value(p)));
            }
        }
        let inv_std: Vec<T> = running_var.iter().map(|&s| T::one() / (s + eps).sqrt()).collect();
        let (g, b) = (self.value(gamma), self.value(beta));
        let out = Tensor::from_fn(r, c, |i, j| {
            g.data()[j] * (v.get(i, j) - running_mean[j]) * inv_std[j] + b.data()[j]
        });
        let rg = self.rg(&[x.0, gamma.0, beta.0]);
        Ok(self.push(
            out,
            Op::BatchNormEval {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                mean: running_mean.to_vec(),
                inv_std,
            },
            rg,
        ))
    }

    /// Reverse pass from a `[1, 1]` loss with upstream gradient 1.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        self.backward_with_seed(loss, T::one())
    }

    /// Reverse pass with upstream gradient `seed`; gradients are linear in it.
    pub fn backward_with_seed(&self, loss: Var, seed: T) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.rows(), lv.cols(), seed));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, id: usize) -> bool {
        self.nodes[id].requires_grad
    }

    fn propagate(&self, id: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let val = |i: usize| &self.nodes[i].value;
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let neg = matches!(self.nodes[id].op, Op::Sub(..));
                if self.wants(*a) {
                    accumulate(&mut grads[*a], reduce_to(g.clone(), val(*a).rows()));
                }
                if self.wants(*b) {
                    let gb = if neg { g.map(|x| -x) } else { g.clone() };
                    accumulate(&mut grads[*b], reduce_to(gb, val(*b).rows()));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (l, rows, cols) = layout("mul", va, vb).unwrap();
                if self.wants(*a) {
                    let ga = zip_with_grad(g, vb, l, rows, cols, Side::Right, |gx, y| gx * y);
                    accumulate(&mut grads[*a], reduce_to(ga, va.rows()));
                }
                if self.wants(*b) {
                    let gb = zip_with_grad(g, va, l, rows, cols, Side::Left, |gx, x| gx * x);
                    accumulate(&mut grads[*b], reduce_to(gb, vb.rows()));
                }
            }
            Op::Div(a, b) | Op::SafeDiv(a, b) => {
                let safe = matches!(self.nodes[id].op, Op::SafeDiv(..));
                let (va, vb) = (val(*a), val(*b));
                let (l, rows, cols) = layout("div", va, vb).unwrap();
                let mut ga = Tensor::zeros(rows, cols);
                let mut gb = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..cols {
                        let k = r * cols + c;
                        let (x, y) = match l {
                            Layout::Same => (va.data()[k], vb.data()[k]),
                            Layout::RowB => (va.data()[k], vb.data()[c]),
                            Layout::RowA => (va.data()[c], vb.data()[k]),
                        };
                        if safe && y == T::zero() {
                            continue;
                        }
                        ga.data_mut()[k] = g.data()[k] / y;
                        gb.data_mut()[k] = -g.data()[k] * x / (y * y);
                    }
                }
                if self.wants(*a) {
                    accumulate(&mut grads[*a], reduce_to(ga, va.rows()));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[*b], reduce_to(gb, vb.rows()));
                }
            }
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    let ga = g.matmul(&val(*b).transpose()).unwrap();
                    accumulate(&mut grads[*a], ga);
                }
                if self.wants(*b) {
                    let gb = val(*a).matmul_tn(g).unwrap();
                    accumulate(&mut grads[*b], gb);
                }
            }
            Op::Transpose(a) => {
                if self.wants(*a) {
                    accumulate(&mut grads[*a], g.transpose());
                }
            }
            Op::Relu(a) => {
                if self.wants(*a) {
                    let x = val(*a);
                    let ga = Tensor::from_fn(x.rows(), x.cols(), |r, c| {
                        if x.get(r, c) > T::zero() {
                            g.get(r, c)
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut grads[*a], ga);
                }
            }
            Op::Square(a) => {
                if self.wants(*a) {
                    let x = val(*a);
                    let two = T::from_f64(2.0);
                    let ga = Tensor::from_fn(x.rows(), x.cols(), |r, c| two * x.get(r, c) * g.get(r, c));
                    accumulate(&mut grads[*a], ga);
                }
            }
            Op::Sqrt(a) => {
                if self.wants(*a) {
                    let y = &self.nodes[id].value;
                    let two = T::from_f64(2.0);
                    let ga = Tensor::from_fn(y.rows(), y.cols(), |r, c| g.get(r, c) / (two * y.get(r, c)));
                    accumulate(&mut grads[*a], ga);
                }
            }
            Op::SumAll(a) => {
                if self.wants(*a) {
                    let x = val(*a);
                    accumulate(&mut grads[*a], Tensor::full(x.rows(), x.cols(), g.item()));
                }
            }
            Op::SumAxis(a, axis) => {
                if self.wants(*a) {
                    let x = val(*a);
                    let ga = if *axis == 0 {
                        Tensor::from_fn(x.rows(), x.cols(), |_, c| g.data()[c])
                    } else {
                        Tensor::from_fn(x.rows(), x.cols(), |r, _| g.data()[r])
                    };
                    accumulate(&mut grads[*a], ga);
                }
            }
            Op::ScatterAdd(src, index) => {
                if self.wants(*src) {
                    let c = g.cols();
                    let mut data = Vec::with_capacity(index.len() * c);
                    for &dst in index.iter() {
                        data.extend_from_slice(g.row_slice(dst));
                    }
                    accumulate(&mut grads[*src], Tensor::matrix(index.len(), c, data).unwrap());
                }
            }
            Op::Gather(src, index) => {
                if self.wants(*src) {
                    let x = val(*src);
                    let c = x.cols();
                    let mut ga = Tensor::zeros(x.rows(), c);
                    for (e, &i) in index.iter().enumerate() {
                        let row = &mut ga.data_mut()[i * c..(i + 1) * c];
                        for (o, &v) in row.iter_mut().zip(g.row_slice(e)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[*src], ga);
                }
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for &p in parts {
                    let x = val(p);
                    if self.wants(p) {
                        let gp = if *axis == 0 {
                            Tensor::from_fn(x.rows(), x.cols(), |r, c| g.get(offset + r, c))
                        } else {
                            Tensor::from_fn(x.rows(), x.cols(), |r, c| g.get(r, offset + c))
                        };
                        accumulate(&mut grads[p], gp);
                    }
                    offset += if *axis == 0 { x.rows() } else { x.cols() };
                }
            }
            Op::Scale(a, k) => {
                if self.wants(*a) {
                    accumulate(&mut grads[*a], g.map(|x| x * *k));
                }
            }
            Op::MulScalar(a, s) => {
                let k = val(*s).item();
                if self.wants(*a) {
                    accumulate(&mut grads[*a], g.map(|x| x * k));
                }
                if self.wants(*s) {
                    let gs: T = g.data().iter().zip(val(*a).data()).map(|(&x, &y)| x * y).sum();
                    accumulate(&mut grads[*s], Tensor::scalar(gs));
                }
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (r, c) = (xhat.rows(), xhat.cols());
                let gam = val(*gamma);
                let mut sum_g = vec![T::zero(); c];
                let mut sum_gx = vec![T::zero(); c];
                for i in 0..r {
                    for j in 0..c {
                        let gv = g.get(i, j);
                        sum_g[j] += gv;
                        sum_gx[j] += gv * xhat.get(i, j);
                    }
                }
                if self.wants(*gamma) {
                    accumulate(&mut grads[*gamma], Tensor::row(sum_gx.clone()));
                }
                if self.wants(*beta) {
                    accumulate(&mut grads[*beta], Tensor::row(sum_g.clone()));
                }
                if self.wants(*x) {
                    let n = T::from_f64(r as f64);
                    let gx = Tensor::from_fn(r, c, |i, j| {
                        let gh = gam.data()[j];
                        gh * inv_std[j] / n * (n * g.get(i, j) - sum_g[j] - xhat.get(i, j) * sum_gx[j])
                    });
                    accumulate(&mut grads[*x], gx);
                }
            }
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                mean,
                inv_std,
            } => {
                let xv = val(*x);
                let (r, c) = (xv.rows(), xv.cols());
                let gam = val(*gamma);
                if self.wants(*gamma) {
                    let mut s = vec![T::zero(); c];
                    for i in 0..r {
                        for j in 0..c {
                            s[j] += g.get(i, j) * (xv.get(i, j) - mean[j]) * inv_std[j];
                        }
                    }
                    accumulate(&mut grads[*gamma], Tensor::row(s));
                }
                if self.wants(*beta) {
                    accumulate(&mut grads[*beta], reduce_to(g.clone(), 1));
                }
                if self.wants(*x) {
                    let gx = Tensor::from_fn(r, c, |i, j| g.get(i, j) * gam.data()[j] * inv_std[j]);
                    accumulate(&mut grads[*x], gx);
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// `f(g[k], other[...])` over the output grid, reading `other` with the
/// broadcast layout of the side it was on.
fn zip_with_grad<T: Float>(
    g: &Tensor<T>,
    other: &Tensor<T>,
    l: Layout,
    rows: usize,
    cols: usize,
    side: Side,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    let od = other.data();
    let broadcast_other = matches!((l, side), (Layout::RowB, Side::Right) | (Layout::RowA, Side::Left));
    Tensor::from_fn(rows, cols, |r, c| {
        let k = r * cols + c;
        let o = if broadcast_other { od[c] } else { od[k] };
        f(g.data()[k], o)
    })
}
