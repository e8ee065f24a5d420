use rand::Rng;

use super::{init_matrix, param_tree};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Additive word attention. `p [h×2h]` projects BiGRU states, `b [h×1]` is
/// its bias and `u [1×h]` scores the projected keys.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAttentionParams<T> {
    pub p: T,
    pub b: T,
    pub u: T,
}

param_tree!(WordAttentionParams { leaves: [p, b, u], groups: [] });

impl WordAttentionParams<Tensor> {
    pub fn init(hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            p: init_matrix(hidden, 2 * hidden, rng),
            b: Tensor::zeros(&[hidden, 1]),
            u: init_matrix(1, hidden, rng),
        }
    }
}

/// Pools the columns of `v [2h×M]` into one `[2h×1]` vector.
///
/// `k_i = tanh(P v_i + b)`, `α = softmax_masked(u k_i)`, `v' = Σ α_i v_i`.
/// Returns `(v', α)` with `α` a `[1×M]` row.
pub fn word_attention(
    g: &mut Graph,
    v: Var,
    mask: Option<&[bool]>,
    p: &WordAttentionParams<Var>,
) -> Result<(Var, Var)> {
    let (rows, _) = g.value(v).dims2("word_attention")?;
    let expected = g.value(p.p).cols();
    if rows != expected {
        return Err(Error::shape(
            "word_attention",
            format!("states have {rows} rows, projection expects {expected}"),
        ));
    }
    let proj = g.matmul(p.p, v)?;
    let pre = g.add_bias(proj, p.b)?;
    let keys = g.tanh(pre)?;
    let scores = g.matmul(p.u, keys)?;
    let alpha = g.softmax_row(scores, mask)?;
    let alpha_col = g.transpose(alpha)?;
    let pooled = g.matmul(v, alpha_col)?;
    Ok((pooled, alpha))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::layers::register;
    use crate::oracle;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn single_position_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = WordAttentionParams::init(2, &mut rng);
        let v = random(4, 1, &mut rng);
        let mut g = Graph::new();
        let pv = register(&mut g, &p);
        let vv = g.constant(v.clone());
        let (pooled, alpha) = word_attention(&mut g, vv, None, &pv).unwrap();
        assert_eq!(g.value(alpha).data(), &[1.0]);
        assert_eq!(g.value(pooled).data(), v.data());
    }

    #[test]
    fn identical_columns_give_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = WordAttentionParams::init(2, &mut rng);
        let col = [0.3, -0.2, 0.8, 0.1];
        let data: Vec<f64> = col.iter().flat_map(|&c| [c; 5]).collect();
        let mask = [true, false, true, true, false];
        let mut g = Graph::new();
        let pv = register(&mut g, &p);
        let vv = g.constant(Tensor::matrix(4, 5, data).unwrap());
        let (_, alpha) = word_attention(&mut g, vv, Some(&mask), &pv).unwrap();
        for (a, &m) in g.value(alpha).data().iter().zip(&mask) {
            if m {
                assert!((a - 1.0 / 3.0).abs() < 1e-15);
            } else {
                assert_eq!(*a, 0.0);
            }
        }
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = WordAttentionParams::init(3, &mut rng);
        let v = random(6, 4, &mut rng);
        let mask = [true, true, false, true];
        let (exp_pooled, exp_alpha) = oracle::word_attention(&p, &v, Some(&mask));
        let mut g = Graph::new();
        let pv = register(&mut g, &p);
        let vv = g.constant(v);
        let (pooled, alpha) = word_attention(&mut g, vv, Some(&mask), &pv).unwrap();
        for (a, e) in g.value(alpha).data().iter().zip(&exp_alpha) {
            assert!((a - e).abs() < 1e-12);
        }
        for (a, e) in g.value(pooled).data().iter().zip(&exp_pooled) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_masked_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = WordAttentionParams::init(2, &mut rng);
        let mut g = Graph::new();
        let pv = register(&mut g, &p);
        let vv = g.constant(random(4, 2, &mut rng));
        let err = word_attention(&mut g, vv, Some(&[false, false]), &pv).unwrap_err();
        assert!(matches!(err, Error::DegenerateMask { .. }));
    }
}
