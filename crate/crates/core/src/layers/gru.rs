use rand::Rng;

use super::{init_matrix, param_tree};
use crate::error::{Error, Result};
use crate::graph::{Axis, Graph, Var};
use crate::tensor::Tensor;

/// One GRU direction. `w_*` are input maps `[h×in]`, `u_*` recurrent maps
/// `[h×h]`, `b_*` biases `[h×1]` for the reset, update and candidate gates.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_r: T,
    pub u_r: T,
    pub b_r: T,
    pub w_z: T,
    pub u_z: T,
    pub b_z: T,
    pub w_h: T,
    pub u_h: T,
    pub b_h: T,
}

param_tree!(GruParams { leaves: [w_r, u_r, b_r, w_z, u_z, b_z, w_h, u_h, b_h], groups: [] });

impl GruParams<Tensor> {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bias = || Tensor::zeros(&[hidden, 1]);
        Self {
            w_r: init_matrix(hidden, input, rng),
            u_r: init_matrix(hidden, hidden, rng),
            b_r: bias(),
            w_z: init_matrix(hidden, input, rng),
            u_z: init_matrix(hidden, hidden, rng),
            b_z: bias(),
            w_h: init_matrix(hidden, input, rng),
            u_h: init_matrix(hidden, hidden, rng),
            b_h: bias(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u_r.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGruParams<T> {
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
}

param_tree!(BiGruParams { leaves: [], groups: [fwd, bwd] });

impl BiGruParams<Tensor> {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            fwd: GruParams::init(input, hidden, rng),
            bwd: GruParams::init(input, hidden, rng),
        }
    }
}

/// Single GRU step on column vectors:
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// z  = σ(W_z x + U_z h + b_z)
/// h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
pub fn gru_cell(g: &mut Graph, x: Var, h_prev: Var, p: &GruParams<Var>) -> Result<Var> {
    let wx_r = g.matmul(p.w_r, x)?;
    let wx_z = g.matmul(p.w_z, x)?;
    let wx_h = g.matmul(p.w_h, x)?;
    let pre_r = g.add_bias(wx_r, p.b_r)?;
    let pre_z = g.add_bias(wx_z, p.b_z)?;
    let pre_h = g.add_bias(wx_h, p.b_h)?;
    step(g, pre_r, pre_z, pre_h, h_prev, p)
}

/// Recurrent half of a step, given the input projections with biases added.
fn step(g: &mut Graph, xr: Var, xz: Var, xh: Var, h: Var, p: &GruParams<Var>) -> Result<Var> {
    let ur = g.matmul(p.u_r, h)?;
    let r_pre = g.add(xr, ur)?;
    let r = g.sigmoid(r_pre)?;
    let uz = g.matmul(p.u_z, h)?;
    let z_pre = g.add(xz, uz)?;
    let z = g.sigmoid(z_pre)?;
    let rh = g.mul(r, h)?;
    let uh = g.matmul(p.u_h, rh)?;
    let cand_pre = g.add(xh, uh)?;
    let cand = g.tanh(cand_pre)?;
    let keep = g.one_minus(z)?;
    let old = g.mul(keep, h)?;
    let new = g.mul(z, cand)?;
    g.add(old, new)
}

fn run_direction(
    g: &mut Graph,
    seq: Var,
    p: &GruParams<Var>,
    order: impl Iterator<Item = usize>,
    len: usize,
) -> Result<Vec<Var>> {
    let hidden = g.value(p.u_r).rows();
    let wx_r = g.matmul(p.w_r, seq)?;
    let wx_z = g.matmul(p.w_z, seq)?;
    let wx_h = g.matmul(p.w_h, seq)?;
    let xr = g.add_bias(wx_r, p.b_r)?;
    let xz = g.add_bias(wx_z, p.b_z)?;
    let xh = g.add_bias(wx_h, p.b_h)?;

    let mut h = g.constant(Tensor::zeros(&[hidden, 1]));
    let mut states = vec![h; len];
    for t in order {
        let r_t = g.slice_cols(xr, t, t + 1)?;
        let z_t = g.slice_cols(xz, t, t + 1)?;
        let h_t = g.slice_cols(xh, t, t + 1)?;
        h = step(g, r_t, z_t, h_t, h, p)?;
        states[t] = h;
    }
    Ok(states)
}

/// Bidirectional GRU over the columns of `seq [in×T]`, zero initial states.
/// Column `t` of the `[2h×T]` output is the forward state after steps
/// `0..=t` stacked on the backward state after steps `T-1..=t`.
pub fn bigru(g: &mut Graph, seq: Var, p: &BiGruParams<Var>) -> Result<Var> {
    let (input, len) = g.value(seq).dims2("bigru")?;
    if len == 0 {
        return Err(Error::DegenerateInput("bigru over an empty sequence".into()));
    }
    let expected = g.value(p.fwd.w_r).cols();
    if input != expected {
        return Err(Error::shape(
            "bigru",
            format!("sequence has {input} features, GRU expects {expected}"),
        ));
    }
    let fwd = run_direction(g, seq, &p.fwd, 0..len, len)?;
    let bwd = run_direction(g, seq, &p.bwd, (0..len).rev(), len)?;
    let fwd = g.concat(&fwd, Axis::Cols)?;
    let bwd = g.concat(&bwd, Axis::Cols)?;
    g.concat(&[fwd, bwd], Axis::Rows)
}
