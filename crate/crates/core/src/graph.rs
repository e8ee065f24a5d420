//! Reverse-mode automatic differentiation over an append-only tape.
//!
//! Every op appends a node holding its output value and the ids of its
//! inputs. Inputs always precede outputs, so [`Graph::backward`] only needs to
//! walk the tape once in reverse append order.
//!
//! ```
//! use dualcan_core::graph::Graph;
//! use dualcan_core::tensor::Tensor;
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::column(vec![1.0, -2.0]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq).unwrap();
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[2.0, -4.0]);
//! ```

use crate::error::{Error, Result};
use crate::tensor::{matmul_raw, Tensor};

/// Handle to a node on a [`Graph`]. Only meaningful for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Concatenation axis for 2-D tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    ClampMin(Var, f64),
    SoftmaxRow(Var),
    Concat(Vec<Var>, Axis),
    Transpose(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Tensor, inputs: &[Var], name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient from the last [`Graph::backward`]. Every node that requires a
    /// gradient has one after backward, zero if it is off the loss path.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), out, &[a, b], "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("operands {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_parts(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), out, &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), out, &[a, b], "sub")
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), out, &[a, b], "mul")
    }

    /// `x [m×n] + b [m×1]`, with `b` broadcast across columns.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2("add_bias")?;
        let (bm, bn) = self.value(b).dims2("add_bias")?;
        if bm != m || bn != 1 {
            return Err(Error::shape(
                "add_bias",
                format!("bias [{bm}×{bn}] does not fit input [{m}×{n}]"),
            ));
        }
        let (xv, bv) = (self.value(x).data(), self.value(b).data());
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            out.extend(xv[i * n..(i + 1) * n].iter().map(|v| v + bv[i]));
        }
        let out = Tensor::from_parts(vec![m, n], out);
        self.push(Op::AddBias(x, b), out, &[x, b], "add_bias")
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * c);
        self.push(Op::Scale(x, c), out, &[x], "scale")
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v + c);
        self.push(Op::AddScalar(x), out, &[x], "add_scalar")
    }

    /// `1 - x`, used by the GRU update gate.
    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        let neg = self.scale(x, -1.0)?;
        self.add_scalar(neg, 1.0)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(f64::tanh);
        self.push(Op::Tanh(x), out, &[x], "tanh")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid(x), out, &[x], "sigmoid")
    }

    /// Natural log. Non-positive inputs are a numerical failure.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&v| v <= 0.0) {
            return Err(Error::NonFinite { op: "log" });
        }
        let out = self.value(x).map(f64::ln);
        self.push(Op::Log(x), out, &[x], "log")
    }

    /// `max(x, floor)`; the gradient passes only where `x > floor`.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(floor));
        self.push(Op::ClampMin(x, floor), out, &[x], "clamp_min")
    }

    /// Softmax along each row. Masked (`false`) columns get exactly zero and
    /// are excluded from the max and the normaliser.
    pub fn softmax_row(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let (r, n) = self.value(x).dims2("softmax_row")?;
        if let Some(m) = mask {
            if m.len() != n {
                return Err(Error::shape(
                    "softmax_row",
                    format!("mask of length {} for {n} columns", m.len()),
                ));
            }
            if !m.iter().any(|&keep| keep) {
                return Err(Error::DegenerateMask { op: "softmax_row" });
            }
        }
        let keep = |j: usize| mask.is_none_or(|m| m[j]);
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * n];
        for i in 0..r {
            let row = &xv[i * n..(i + 1) * n];
            let max = (0..n)
                .filter(|&j| keep(j))
                .map(|j| row[j])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in (0..n).filter(|&j| keep(j)) {
                let e = (row[j] - max).exp();
                out[i * n + j] = e;
                total += e;
            }
            for j in (0..n).filter(|&j| keep(j)) {
                out[i * n + j] /= total;
            }
        }
        let out = Tensor::from_parts(vec![r, n], out);
        self.push(Op::SoftmaxRow(x), out, &[x], "softmax_row")
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "nothing to concatenate"));
        }
        let dims = parts
            .iter()
            .map(|&p| self.value(p).dims2("concat"))
            .collect::<Result<Vec<_>>>()?;
        let out = match axis {
            Axis::Rows => {
                let cols = dims[0].1;
                if dims.iter().any(|d| d.1 != cols) {
                    return Err(Error::shape("concat", format!("row concat of {dims:?}")));
                }
                let rows = dims.iter().map(|d| d.0).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for &p in parts {
                    data.extend_from_slice(self.value(p).data());
                }
                Tensor::from_parts(vec![rows, cols], data)
            }
            Axis::Cols => {
                let rows = dims[0].0;
                if dims.iter().any(|d| d.0 != rows) {
                    return Err(Error::shape("concat", format!("column concat of {dims:?}")));
                }
                let cols: usize = dims.iter().map(|d| d.1).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for (&p, &(_, c)) in parts.iter().zip(&dims) {
                        data.extend_from_slice(&self.value(p).data()[i * c..(i + 1) * c]);
                    }
                }
                Tensor::from_parts(vec![rows, cols], data)
            }
        };
        self.push(Op::Concat(parts.to_vec(), axis), out, parts, "concat")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.value(x).dims2("transpose")?;
        let out = self.value(x).transpose();
        self.push(Op::Transpose(x), out, &[x], "transpose")
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2("slice_rows")?;
        if start >= end || end > r {
            return Err(Error::shape("slice_rows", format!("rows {start}..{end} of {r}")));
        }
        let data = self.value(x).data()[start * c..end * c].to_vec();
        let out = Tensor::from_parts(vec![end - start, c], data);
        self.push(Op::SliceRows(x, start), out, &[x], "slice_rows")
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2("slice_cols")?;
        if start >= end || end > c {
            return Err(Error::shape("slice_cols", format!("cols {start}..{end} of {c}")));
        }
        let xv = self.value(x).data();
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&xv[i * c + start..i * c + end]);
        }
        let out = Tensor::from_parts(vec![r, end - start], data);
        self.push(Op::SliceCols(x, start), out, &[x], "slice_cols")
    }

    /// Sum of all elements as a `[1×1]` scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).data().iter().sum();
        let out = Tensor::from_parts(vec![1, 1], vec![total]);
        self.push(Op::Sum(x), out, &[x], "sum")
    }

    /// Propagates `d loss / d node` to every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::ones(self.value(loss).shape()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let y = &node.value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = (av.rows(), av.cols());
                let n = bv.cols();
                if wants(*a) {
                    let bt = bv.transpose();
                    let ga = matmul_raw(g.data(), bt.data(), m, n, k);
                    accumulate(grads, *a, Tensor::from_parts(vec![m, k], ga));
                }
                if wants(*b) {
                    let at = av.transpose();
                    let gb = matmul_raw(at.data(), g.data(), k, m, n);
                    accumulate(grads, *b, Tensor::from_parts(vec![k, n], gb));
                }
            }
            Op::Add(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, hadamard(g, self.value(*b)));
                }
                if wants(*b) {
                    accumulate(grads, *b, hadamard(g, self.value(*a)));
                }
            }
            Op::AddBias(x, b) => {
                if wants(*x) {
                    accumulate(grads, *x, g.clone());
                }
                if wants(*b) {
                    let (m, n) = (g.rows(), g.cols());
                    let sums = (0..m)
                        .map(|i| g.data()[i * n..(i + 1) * n].iter().sum())
                        .collect();
                    accumulate(grads, *b, Tensor::from_parts(vec![m, 1], sums));
                }
            }
            Op::Scale(x, c) => accumulate(grads, *x, g.map(|v| v * c)),
            Op::AddScalar(x) => accumulate(grads, *x, g.clone()),
            Op::Tanh(x) => {
                let d = zip(g, y, |gv, yv| gv * (1.0 - yv * yv));
                accumulate(grads, *x, d);
            }
            Op::Sigmoid(x) => {
                let d = zip(g, y, |gv, yv| gv * yv * (1.0 - yv));
                accumulate(grads, *x, d);
            }
            Op::Log(x) => {
                let d = zip(g, self.value(*x), |gv, xv| gv / xv);
                accumulate(grads, *x, d);
            }
            Op::ClampMin(x, floor) => {
                let d = zip(g, self.value(*x), |gv, xv| if xv > *floor { gv } else { 0.0 });
                accumulate(grads, *x, d);
            }
            Op::SoftmaxRow(x) => {
                let (r, n) = (y.rows(), y.cols());
                let mut d = vec![0.0; r * n];
                for i in 0..r {
                    let yr = &y.data()[i * n..(i + 1) * n];
                    let gr = &g.data()[i * n..(i + 1) * n];
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        d[i * n + j] = yr[j] * (gr[j] - dot);
                    }
                }
                accumulate(grads, *x, Tensor::from_parts(vec![r, n], d));
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = (self.value(p).rows(), self.value(p).cols());
                    if wants(p) {
                        let piece = match axis {
                            Axis::Rows => g.data()[offset * pc..(offset + pr) * pc].to_vec(),
                            Axis::Cols => {
                                let gc = g.cols();
                                let mut piece = Vec::with_capacity(pr * pc);
                                for i in 0..pr {
                                    piece.extend_from_slice(
                                        &g.data()[i * gc + offset..i * gc + offset + pc],
                                    );
                                }
                                piece
                            }
                        };
                        accumulate(grads, p, Tensor::from_parts(vec![pr, pc], piece));
                    }
                    offset += match axis {
                        Axis::Rows => pr,
                        Axis::Cols => pc,
                    };
                }
            }
            Op::Transpose(x) => accumulate(grads, *x, g.transpose()),
            Op::SliceRows(x, start) => {
                let src = self.value(*x);
                let mut d = Tensor::zeros(src.shape());
                let c = src.cols();
                d.data_mut()[start * c..start * c + g.numel()].copy_from_slice(g.data());
                accumulate(grads, *x, d);
            }
            Op::SliceCols(x, start) => {
                let src = self.value(*x);
                let mut d = Tensor::zeros(src.shape());
                let (c, w) = (src.cols(), g.cols());
                for i in 0..src.rows() {
                    d.data_mut()[i * c + start..i * c + start + w]
                        .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                }
                accumulate(grads, *x, d);
            }
            Op::Sum(x) => {
                let gv = g.item();
                let shape = self.value(*x).shape().to_vec();
                let n = self.value(*x).numel();
                accumulate(grads, *x, Tensor::from_parts(shape, vec![gv; n]));
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip(a, b, |x, y| x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, d: &[f64]) -> Tensor {
        Tensor::matrix(r, c, d.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let mut g = Graph::new();
        let i = g.constant(Tensor::identity(2));
        let a = g.constant(m(2, 2, &[1., 2., 3., 4.]));
        let p = g.matmul(i, a).unwrap();
        assert_eq!(g.value(p).data(), &[1., 2., 3., 4.]);

        let r = g.constant(m(1, 2, &[1., 2.]));
        let c = g.constant(m(2, 1, &[3., 4.]));
        let p = g.matmul(r, c).unwrap();
        assert_eq!(g.value(p).data(), &[11.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn tanh_basics() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 3, &[0.0, 0.7, -0.7]));
        let y = g.tanh(x).unwrap();
        let v = g.value(y).data();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], -v[2]);
    }

    #[test]
    fn softmax_cases() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 3, &[0., 0., 0.]));
        let y = g.softmax_row(x, None).unwrap();
        for &v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let x = g.constant(m(1, 1, &[42.0]));
        let y = g.softmax_row(x, None).unwrap();
        assert_eq!(g.value(y).data(), &[1.0]);

        let x = g.constant(m(1, 3, &[2., 1., 1.]));
        let y = g.softmax_row(x, Some(&[false, true, true])).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.5, 0.5]);

        let err = g.softmax_row(x, Some(&[false, false, false])).unwrap_err();
        assert!(matches!(err, Error::DegenerateMask { .. }));
    }

    #[test]
    fn sum_and_square_gradients() {
        let mut g = Graph::new();
        let x = g.param(m(2, 3, &[1., -2., 3., 0.5, 0.25, -1.]));
        let s = g.sum(x).unwrap();
        g.backward(s).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 1.0));

        let mut g = Graph::new();
        let x = g.param(m(1, 1, &[1.5]));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[3.0]);
    }

    #[test]
    fn off_path_params_get_zero_and_fanout_accumulates() {
        let mut g = Graph::new();
        let x = g.param(m(1, 2, &[1., 2.]));
        let unused = g.param(m(1, 1, &[7.]));
        let a = g.add(x, x).unwrap();
        let b = g.add(a, x).unwrap();
        let s = g.sum(b).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[3., 3.]);
        assert_eq!(g.grad(unused).unwrap().data(), &[0.]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.param(Tensor::zeros(&[2, 1]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn concat_then_slice_is_bit_exact() {
        let mut g = Graph::new();
        let a = g.constant(m(2, 2, &[0.1, 0.2, 0.3, 0.4]));
        let b = g.constant(m(2, 1, &[0.5, 0.6]));
        let c = g.concat(&[a, b], Axis::Cols).unwrap();
        let a2 = g.slice_cols(c, 0, 2).unwrap();
        let b2 = g.slice_cols(c, 2, 3).unwrap();
        assert_eq!(g.value(a2), g.value(a));
        assert_eq!(g.value(b2), g.value(b));
    }

    #[cfg(debug_assertions)]
    #[test]
    fn non_finite_outputs_fail_fast() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 1, &[1e300]));
        let err = g.mul(x, x).unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "mul" }));
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 2, &[1.0, 0.0]));
        assert!(g.log(x).is_err());
    }
}
