use rand::Rng;

use super::{init_matrix, param_tree};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Co-attention between a primary sequence `S [2h×N]` and a secondary
/// sequence `D [2h×E]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoAttentionParams<T> {
    pub w_r: T,
    pub w_s: T,
    pub w_d: T,
    pub w_hs: T,
    pub w_hd: T,
}

param_tree!(CoAttentionParams { leaves: [w_r, w_s, w_d, w_hs, w_hd], groups: [] });

impl CoAttentionParams<Tensor> {
    /// `width` is the feature size `2h` of both sequences.
    pub fn init(width: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_r: init_matrix(width, width, rng),
            w_s: init_matrix(width, width, rng),
            w_d: init_matrix(width, width, rng),
            w_hs: init_matrix(1, width, rng),
            w_hd: init_matrix(1, width, rng),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoAttentionOutput {
    /// Affinity `F [E×N]`.
    pub affinity: Var,
    /// `H_s [2h×N]`.
    pub interaction_primary: Var,
    /// `H_d [2h×E]`.
    pub interaction_secondary: Var,
    /// `a_s [1×N]`.
    pub attn_primary: Var,
    /// `a_d [1×E]`.
    pub attn_secondary: Var,
    /// `ŝ = a_s Sᵀ`, `[1×2h]`.
    pub pooled_primary: Var,
    /// `d̂ = a_d Dᵀ`, `[1×2h]`.
    pub pooled_secondary: Var,
}

/// ```text
/// F   = tanh(Dᵀ W_r S)
/// H_s = tanh(W_s S + (W_d D) F)
/// H_d = tanh(W_d D + (W_s S) Fᵀ)
/// a_s = softmax_masked(w_hs H_s),   a_d = softmax_masked(w_hd H_d)
/// ŝ   = a_s Sᵀ,                     d̂   = a_d Dᵀ
/// ```
pub fn co_attention(
    g: &mut Graph,
    primary: Var,
    secondary: Var,
    mask_primary: &[bool],
    mask_secondary: &[bool],
    p: &CoAttentionParams<Var>,
) -> Result<CoAttentionOutput> {
    let (width, n) = g.value(primary).dims2("co_attention")?;
    let (width2, e) = g.value(secondary).dims2("co_attention")?;
    let param_width = g.value(p.w_r).cols();
    if width != width2 || width != param_width {
        return Err(Error::shape(
            "co_attention",
            format!("feature sizes {width} / {width2} against parameters of width {param_width}"),
        ));
    }
    if mask_primary.len() != n || mask_secondary.len() != e {
        return Err(Error::shape(
            "co_attention",
            format!(
                "masks of length {}/{} for {n}/{e} columns",
                mask_primary.len(),
                mask_secondary.len()
            ),
        ));
    }

    let secondary_t = g.transpose(secondary)?;
    let wr_s = g.matmul(p.w_r, primary)?;
    let affinity_pre = g.matmul(secondary_t, wr_s)?;
    let affinity = g.tanh(affinity_pre)?;

    let ws_s = g.matmul(p.w_s, primary)?;
    let wd_d = g.matmul(p.w_d, secondary)?;
    let carried_to_primary = g.matmul(wd_d, affinity)?;
    let hs_pre = g.add(ws_s, carried_to_primary)?;
    let interaction_primary = g.tanh(hs_pre)?;

    let affinity_t = g.transpose(affinity)?;
    let carried_to_secondary = g.matmul(ws_s, affinity_t)?;
    let hd_pre = g.add(wd_d, carried_to_secondary)?;
    let interaction_secondary = g.tanh(hd_pre)?;

    let score_s = g.matmul(p.w_hs, interaction_primary)?;
    let attn_primary = g.softmax_row(score_s, Some(mask_primary))?;
    let score_d = g.matmul(p.w_hd, interaction_secondary)?;
    let attn_secondary = g.softmax_row(score_d, Some(mask_secondary))?;

    let primary_t = g.transpose(primary)?;
    let pooled_primary = g.matmul(attn_primary, primary_t)?;
    let pooled_secondary = g.matmul(attn_secondary, secondary_t)?;

    Ok(CoAttentionOutput {
        affinity,
        interaction_primary,
        interaction_secondary,
        attn_primary,
        attn_secondary,
        pooled_primary,
        pooled_secondary,
    })
}
