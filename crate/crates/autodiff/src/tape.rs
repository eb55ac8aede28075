use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::{Scalar, Tensor, TensorError};

static TAPE_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    node: usize,
    tape: usize,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Matmul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Scale(usize, T),
    Relu(usize),
    GatherRows(usize, Vec<usize>),
    SegmentSum(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    Square(usize),
    Sqrt(usize),
    RowSum(usize),
    ReduceMean(usize),
    WeightedSumsq(usize, Vec<T>),
    MaxReduce(usize, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    shape: Vec<usize>,
    values: Vec<T>,
    op: Op<T>,
}

impl<T> Node<T> {
    fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            _ => self.values.len(),
        }
    }
}

/// Wengert list of recorded operations.
///
/// Operations append nodes in creation order; because every operation only
/// refers to earlier nodes the list is already topologically sorted and a
/// single reverse sweep in [`Tape::backward`] yields exact adjoints.
/// All reductions run in a fixed element order, so replaying a tape is
/// bitwise deterministic regardless of thread count.
pub struct Tape<T> {
    id: usize,
    nodes: Vec<Node<T>>,
}

/// Per-node adjoints produced by [`Tape::backward`].
pub struct Gradients<T> {
    tape: usize,
    grads: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Result<&[T], TensorError> {
        if var.tape != self.tape {
            return Err(TensorError::DetachedTensor);
        }
        Ok(&self.grads[var.node])
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { shape, values, op });
        Var { node: self.nodes.len() - 1, tape: self.id }
    }

    fn check(&self, var: Var) -> Result<&Node<T>, TensorError> {
        if var.tape != self.id {
            return Err(TensorError::DetachedTensor);
        }
        Ok(&self.nodes[var.node])
    }

    /// Record a leaf holding a copy of `tensor`.
    pub fn input(&mut self, tensor: &Tensor<T>) -> Var {
        self.push(tensor.shape().to_vec(), tensor.values().to_vec(), Op::Leaf)
    }

    pub fn input_vec(&mut self, shape: &[usize], values: Vec<T>) -> Result<Var, TensorError> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(TensorError::ShapeMismatch {
                op: "input_vec",
                detail: format!("shape {:?} needs {n} values, got {}", shape, values.len()),
            });
        }
        Ok(self.push(shape.to_vec(), values, Op::Leaf))
    }

    pub fn values(&self, var: Var) -> Result<&[T], TensorError> {
        Ok(&self.check(var)?.values)
    }

    pub fn shape(&self, var: Var) -> Result<&[usize], TensorError> {
        Ok(&self.check(var)?.shape)
    }

    pub fn to_tensor(&self, var: Var) -> Result<Tensor<T>, TensorError> {
        let node = self.check(var)?;
        Tensor::from_vec(&node.shape, node.values.clone())
    }

    /// `a @ b` for rank-2 operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (na, ka) = {
            let n = self.check(a)?;
            (n.rows(), n.cols())
        };
        let (kb, mb) = {
            let n = self.check(b)?;
            (n.rows(), n.cols())
        };
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                detail: format!("inner dims {ka} vs {kb}"),
            });
        }
        let mut out = vec![T::zero(); na * mb];
        {
            let av = &self.nodes[a.node].values;
            let bv = &self.nodes[b.node].values;
            matmul_into(av, bv, &mut out, na, ka, mb);
        }
        Ok(self.push(vec![na, mb], out, Op::Matmul(a.node, b.node)))
    }

    /// Element-wise add; also accepts a `(1, m)` right operand broadcast over rows.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.check(a)?.shape.clone(), self.check(b)?.shape.clone());
        if sa == sb {
            let values: Vec<T> = self.nodes[a.node]
                .values
                .iter()
                .zip(&self.nodes[b.node].values)
                .map(|(&x, &y)| x + y)
                .collect();
            return Ok(self.push(sa, values, Op::Add(a.node, b.node)));
        }
        let (rows, cols) = (self.nodes[a.node].rows(), self.nodes[a.node].cols());
        let bcols = self.nodes[b.node].values.len();
        if self.nodes[b.node].rows() == 1 && bcols == cols {
            let bv = self.nodes[b.node].values.clone();
            let values: Vec<T> = self.nodes[a.node]
                .values
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bv[i % cols])
                .collect();
            return Ok(self.push(vec![rows, cols], values, Op::AddRow(a.node, b.node)));
        }
        Err(TensorError::ShapeMismatch {
            op: "add",
            detail: format!("{sa:?} vs {sb:?}"),
        })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.check(a)?.shape.clone(), self.check(b)?.shape.clone());
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "sub",
                detail: format!("{sa:?} vs {sb:?}"),
            });
        }
        let values: Vec<T> = self.nodes[a.node]
            .values
            .iter()
            .zip(&self.nodes[b.node].values)
            .map(|(&x, &y)| x - y)
            .collect();
        Ok(self.push(sa, values, Op::Sub(a.node, b.node)))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var, TensorError> {
        let shape = self.check(a)?.shape.clone();
        let values: Vec<T> = self.nodes[a.node].values.iter().map(|&x| x * factor).collect();
        Ok(self.push(shape, values, Op::Scale(a.node, factor)))
    }

    /// `max(x, 0)` with subgradient 0 at exactly 0.
    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let shape = self.check(a)?.shape.clone();
        let values: Vec<T> = self.nodes[a.node]
            .values
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        Ok(self.push(shape, values, Op::Relu(a.node)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, TensorError> {
        let shape = self.check(a)?.shape.clone();
        let values: Vec<T> = self.nodes[a.node].values.iter().map(|&x| x * x).collect();
        Ok(self.push(shape, values, Op::Square(a.node)))
    }

    /// Element-wise square root. The subgradient at 0 is defined as 0.
    pub fn sqrt(&mut self, a: Var) -> Result<Var, TensorError> {
        let shape = self.check(a)?.shape.clone();
        let values: Vec<T> = self.nodes[a.node].values.iter().map(|&x| x.sqrt()).collect();
        Ok(self.push(shape, values, Op::Sqrt(a.node)))
    }

    /// Select rows of `a` by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let (rows, cols) = {
            let n = self.check(a)?;
            (n.rows(), n.cols())
        };
        for &i in indices {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { index: i, rows });
            }
        }
        let av = &self.nodes[a.node].values;
        let mut values = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            values.extend_from_slice(&av[i * cols..(i + 1) * cols]);
        }
        Ok(self.push(vec![indices.len(), cols], values, Op::GatherRows(a.node, indices.to_vec())))
    }

    /// Sum rows of `a` into `num_segments` buckets by segment id.
    ///
    /// Accumulation runs in row order, so the result is deterministic.
    pub fn segment_sum(
        &mut self,
        a: Var,
        segments: &[usize],
        num_segments: usize,
    ) -> Result<Var, TensorError> {
        let (rows, cols) = {
            let n = self.check(a)?;
            (n.rows(), n.cols())
        };
        if segments.len() != rows {
            return Err(TensorError::ShapeMismatch {
                op: "segment_sum",
                detail: format!("{} segment ids for {rows} rows", segments.len()),
            });
        }
        for &s in segments {
            if s >= num_segments {
                return Err(TensorError::SegmentOutOfRange { segment: s, num_segments });
            }
        }
        let av = &self.nodes[a.node].values;
        let mut values = vec![T::zero(); num_segments * cols];
        for (row, &s) in segments.iter().enumerate() {
            for j in 0..cols {
                values[s * cols + j] += av[row * cols + j];
            }
        }
        Ok(self.push(vec![num_segments, cols], values, Op::SegmentSum(a.node, segments.to_vec())))
    }

    /// Concatenate rank-2 operands along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                detail: "no operands".into(),
            });
        }
        let rows = self.check(parts[0])?.rows();
        let mut cols = 0;
        for &p in parts {
            let n = self.check(p)?;
            if n.rows() != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    detail: format!("row counts {} vs {rows}", n.rows()),
                });
            }
            cols += n.cols();
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let n = &self.nodes[p.node];
                let c = n.cols();
                values.extend_from_slice(&n.values[r * c..(r + 1) * c]);
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.node).collect();
        Ok(self.push(vec![rows, cols], values, Op::ConcatCols(ids)))
    }

    /// Per-row sum, producing an `(n, 1)` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let (rows, cols) = {
            let n = self.check(a)?;
            (n.rows(), n.cols())
        };
        let av = &self.nodes[a.node].values;
        let mut values = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut acc = T::zero();
            for j in 0..cols {
                acc += av[r * cols + j];
            }
            values.push(acc);
        }
        Ok(self.push(vec![rows, 1], values, Op::RowSum(a.node)))
    }

    /// Mean over all elements, producing a scalar.
    pub fn reduce_mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let node = self.check(a)?;
        if node.values.is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "reduce_mean",
                detail: "empty input".into(),
            });
        }
        let count = T::from_usize(node.values.len()).unwrap();
        let mut acc = T::zero();
        for &x in &self.nodes[a.node].values {
            acc += x;
        }
        Ok(self.push(vec![1], vec![acc / count], Op::ReduceMean(a.node)))
    }

    /// `Σ_i w_i · Σ_j x[i,j]²` with fixed (non-differentiated) row weights.
    pub fn weighted_sumsq(&mut self, a: Var, weights: &[T]) -> Result<Var, TensorError> {
        let (rows, cols) = {
            let n = self.check(a)?;
            (n.rows(), n.cols())
        };
        if weights.len() != rows {
            return Err(TensorError::ShapeMismatch {
                op: "weighted_sumsq",
                detail: format!("{} weights for {rows} rows", weights.len()),
            });
        }
        let av = &self.nodes[a.node].values;
        let mut acc = T::zero();
        for (r, &w) in weights.iter().enumerate() {
            let mut rowsq = T::zero();
            for j in 0..cols {
                let x = av[r * cols + j];
                rowsq += x * x;
            }
            acc += w * rowsq;
        }
        Ok(self.push(vec![1], vec![acc], Op::WeightedSumsq(a.node, weights.to_vec())))
    }

    /// Maximum over all elements; gradient flows only through the first
    /// occurrence of the maximum.
    pub fn max_reduce(&mut self, a: Var) -> Result<Var, TensorError> {
        let node = self.check(a)?;
        if node.values.is_empty() {
            return Err(TensorError::ShapeMismatch {
                op: "max_reduce",
                detail: "empty input".into(),
            });
        }
        let mut best = node.values[0];
        let mut winner = 0;
        for (i, &x) in node.values.iter().enumerate().skip(1) {
            if x > best {
                best = x;
                winner = i;
            }
        }
        Ok(self.push(vec![1], vec![best], Op::MaxReduce(a.node, winner)))
    }

    /// Reverse sweep from a scalar `loss`, producing adjoints for every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        let node = self.check(loss)?;
        if node.values.len() != 1 {
            return Err(TensorError::NotScalar { len: node.values.len() });
        }
        let mut grads: Vec<Vec<T>> = self.nodes.iter().map(|n| vec![T::zero(); n.values.len()]).collect();
        grads[loss.node][0] = T::one();

        for idx in (0..=loss.node).rev() {
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            if grads[idx].iter().all(|g| *g == T::zero()) {
                continue;
            }
            let g_out = std::mem::take(&mut grads[idx]);
            match &self.nodes[idx].op {
                Op::Leaf => unreachable!(),
                Op::Matmul(a, b) => {
                    let (n, k) = (self.nodes[*a].rows(), self.nodes[*a].cols());
                    let m = self.nodes[*b].cols();
                    let av = &self.nodes[*a].values;
                    let bv = &self.nodes[*b].values;
                    // dA[i,l] = Σ_j g[i,j] · B[l,j]
                    {
                        let ga = &mut grads[*a];
                        ga.par_chunks_mut(k).enumerate().for_each(|(i, ga_row)| {
                            for l in 0..k {
                                let mut acc = T::zero();
                                for j in 0..m {
                                    acc += g_out[i * m + j] * bv[l * m + j];
                                }
                                ga_row[l] += acc;
                            }
                        });
                    }
                    // dB[l,j] = Σ_i A[i,l] · g[i,j]
                    {
                        let gb = &mut grads[*b];
                        gb.par_chunks_mut(m).enumerate().for_each(|(l, gb_row)| {
                            for i in 0..n {
                                let a_il = av[i * k + l];
                                if a_il == T::zero() {
                                    continue;
                                }
                                for j in 0..m {
                                    gb_row[j] += a_il * g_out[i * m + j];
                                }
                            }
                        });
                    }
                }
                Op::Add(a, b) => {
                    for (g, &go) in grads[*a].iter_mut().zip(&g_out) {
                        *g += go;
                    }
                    for (g, &go) in grads[*b].iter_mut().zip(&g_out) {
                        *g += go;
                    }
                }
                Op::AddRow(a, b) => {
                    for (g, &go) in grads[*a].iter_mut().zip(&g_out) {
                        *g += go;
                    }
                    let cols = self.nodes[*b].values.len();
                    for (i, &go) in g_out.iter().enumerate() {
                        grads[*b][i % cols] += go;
                    }
                }
                Op::Sub(a, b) => {
                    for (g, &go) in grads[*a].iter_mut().zip(&g_out) {
                        *g += go;
                    }
                    for (g, &go) in grads[*b].iter_mut().zip(&g_out) {
                        *g -= go;
                    }
                }
                Op::Scale(a, factor) => {
                    let f = *factor;
                    for (g, &go) in grads[*a].iter_mut().zip(&g_out) {
                        *g += go * f;
                    }
                }
                Op::Relu(a) => {
                    let xs = &self.nodes[*a].values;
                    for ((g, &go), &x) in grads[*a].iter_mut().zip(&g_out).zip(xs) {
                        if x > T::zero() {
                            *g += go;
                        }
                    }
                }
                Op::Square(a) => {
                    let two = T::from_f64(2.0).unwrap();
                    let xs = &self.nodes[*a].values;
                    for ((g, &go), &x) in grads[*a].iter_mut().zip(&g_out).zip(xs) {
                        *g += two * x * go;
                    }
                }
                Op::Sqrt(a) => {
                    let half = T::from_f64(0.5).unwrap();
                    let ys = &self.nodes[idx].values;
                    for ((g, &go), &y) in grads[*a].iter_mut().zip(&g_out).zip(ys) {
                        if y != T::zero() {
                            *g += go * half / y;
                        }
                    }
                }
                Op::GatherRows(a, indices) => {
                    let cols = self.nodes[*a].cols();
                    for (row, &src) in indices.iter().enumerate() {
                        for j in 0..cols {
                            grads[*a][src * cols + j] += g_out[row * cols + j];
                        }
                    }
                }
                Op::SegmentSum(a, segments) => {
                    let cols = self.nodes[*a].cols();
                    for (row, &s) in segments.iter().enumerate() {
                        for j in 0..cols {
                            grads[*a][row * cols + j] += g_out[s * cols + j];
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = self.nodes[idx].rows();
                    let total_cols = self.nodes[idx].cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.nodes[p].cols();
                        for r in 0..rows {
                            for j in 0..c {
                                grads[p][r * c + j] += g_out[r * total_cols + offset + j];
                            }
                        }
                        offset += c;
                    }
                }
                Op::RowSum(a) => {
                    let cols = self.nodes[*a].cols();
                    for (r, &go) in g_out.iter().enumerate() {
                        for j in 0..cols {
                            grads[*a][r * cols + j] += go;
                        }
                    }
                }
                Op::ReduceMean(a) => {
                    let count = T::from_usize(self.nodes[*a].values.len()).unwrap();
                    let go = g_out[0] / count;
                    for g in grads[*a].iter_mut() {
                        *g += go;
                    }
                }
                Op::WeightedSumsq(a, weights) => {
                    let cols = self.nodes[*a].cols();
                    let two = T::from_f64(2.0).unwrap();
                    let xs = &self.nodes[*a].values;
                    let go = g_out[0];
                    for (r, &w) in weights.iter().enumerate() {
                        for j in 0..cols {
                            grads[*a][r * cols + j] += two * w * xs[r * cols + j] * go;
                        }
                    }
                }
                Op::MaxReduce(a, winner) => {
                    grads[*a][*winner] += g_out[0];
                }
            }
            grads[idx] = g_out;
        }
        Ok(Gradients { tape: self.id, grads })
    }
}

/// `out[i,j] = Σ_k a[i,k] b[k,j]`, rows computed in parallel with a fixed
/// inner summation order.
fn matmul_into<T: Scalar>(a: &[T], b: &[T], out: &mut [T], n: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    out.par_chunks_mut(m).enumerate().for_each(|(i, out_row)| {
        for kk in 0..k {
            let a_ik = a[i * k + kk];
            if a_ik == T::zero() {
                continue;
            }
            let b_row = &b[kk * m..(kk + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_ik * bv;
            }
        }
    });
}
