use rand::Rng;

use super::{init_matrix, param_tree};
use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Affine map `W x + b` with `W [out×in]`, `b [out×1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<T> {
    pub w: T,
    pub b: T,
}

param_tree!(LinearParams { leaves: [w, b], groups: [] });

impl LinearParams<Tensor> {
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: init_matrix(output, input, rng),
            b: Tensor::zeros(&[output, 1]),
        }
    }
}

/// Applies the map to every column of `x [in×n]`.
pub fn linear(g: &mut Graph, x: Var, p: &LinearParams<Var>) -> Result<Var> {
    let wx = g.matmul(p.w, x)?;
    g.add_bias(wx, p.b)
}
