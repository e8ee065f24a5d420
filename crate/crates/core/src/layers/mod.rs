//! Parameterised building blocks.
//!
//! Parameter groups are generic over their leaf type: `X<Tensor>` holds
//! values, `X<Var>` holds the same parameters registered on a [`Graph`].
//! [`ParamTree`] walks a group in a fixed order with dotted names, which is
//! the order used by the optimizer and the checkpoint format.

mod attention;
mod coattention;
mod gru;
mod linear;

pub use attention::{word_attention, WordAttentionParams};
pub use coattention::{co_attention, CoAttentionOutput, CoAttentionParams};
pub use gru::{bigru, gru_cell, BiGruParams, GruParams};
pub use linear::{linear, LinearParams};

use rand::Rng;

use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

pub trait ParamTree<T: 'static> {
    type With<U>;

    fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> Self::With<U>;

    fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T));

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut T));

    fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Self::With<U> {
        self.map_named("", &mut |_, t| f(t))
    }

    fn leaves(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit("", &mut |_, t| out.push(t));
        out
    }

    fn leaves_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        self.visit_mut("", &mut |_, t| out.push(t));
        out
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit("", &mut |n, _| out.push(n));
        out
    }
}

/// Registers every tensor of a group as a gradient-receiving leaf.
pub fn register<P: ParamTree<Tensor>>(g: &mut Graph, params: &P) -> P::With<Var> {
    params.map(|t| g.param(t.clone()))
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Uniform(−1/√fan_in, 1/√fan_in) matrix, fan_in = column count.
pub(crate) fn init_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_parts(vec![rows, cols], data)
}

/// Implements [`ParamTree`] for a struct whose fields are all leaves or
/// nested groups.
macro_rules! param_tree {
    ($name:ident { leaves: [$($leaf:ident),* $(,)?], groups: [$($group:ident),* $(,)?] }) => {
        impl<T: 'static> $crate::layers::ParamTree<T> for $name<T> {
            type With<U> = $name<U>;

            fn map_named<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> $name<U> {
                $name {
                    $($leaf: f(&$crate::layers::join(prefix, stringify!($leaf)), &self.$leaf),)*
                    $($group: self.$group.map_named(&$crate::layers::join(prefix, stringify!($group)), f),)*
                }
            }

            fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a T)) {
                $(f($crate::layers::join(prefix, stringify!($leaf)), &self.$leaf);)*
                $(self.$group.visit(&$crate::layers::join(prefix, stringify!($group)), f);)*
            }

            fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut T)) {
                $(f($crate::layers::join(prefix, stringify!($leaf)), &mut self.$leaf);)*
                $(self.$group.visit_mut(&$crate::layers::join(prefix, stringify!($group)), f);)*
            }
        }
    };
}
pub(crate) use param_tree;
