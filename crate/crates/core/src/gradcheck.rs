//! Central finite-difference checks for [`Graph`] gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference step, in `[1e-7, 1e-4]`.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tol: f64,
    /// Below this magnitude both gradients are compared by absolute error.
    pub abs_floor: f64,
    /// Coordinates checked per tensor when the tensor is larger than this.
    pub samples_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            tol: 1e-6,
            abs_floor: 1e-10,
            samples_per_tensor: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamReport {
    pub param: usize,
    pub coords_checked: usize,
    pub max_error: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_error <= self.tol)
    }

    pub fn worst(&self) -> Option<&ParamReport> {
        self.params
            .iter()
            .max_by(|a, b| a.max_error.total_cmp(&b.max_error))
    }
}

/// Relative error with an absolute fallback for near-zero gradients.
pub fn gradient_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < abs_floor {
        diff
    } else {
        diff / scale
    }
}

/// Compares reverse-mode gradients of `f` with central differences.
///
/// `f` must build a scalar from the supplied parameter vars; it is called once
/// for the analytic pass and twice per checked coordinate.
pub fn grad_check<F>(f: F, params: &[Tensor], cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&cfg.step) {
        return Err(Error::Contract(format!(
            "finite-difference step {} outside [1e-7, 1e-4]",
            cfg.step
        )));
    }

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    check_finite(g.value(out).item())?;
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| g.grad(v).cloned().expect("param gradient after backward"))
        .collect();

    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        let value = g.value(out).item();
        check_finite(value)?;
        Ok(value)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work: Vec<Tensor> = params.to_vec();
    let mut reports = Vec::with_capacity(params.len());
    for (pi, param) in params.iter().enumerate() {
        let n = param.numel();
        let coords: Vec<usize> = if n <= cfg.samples_per_tensor {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, cfg.samples_per_tensor).into_vec();
            c.sort_unstable();
            c
        };

        let mut report = ParamReport {
            param: pi,
            coords_checked: coords.len(),
            max_error: 0.0,
            worst_coord: coords[0],
            analytic: 0.0,
            numeric: 0.0,
        };
        for &c in &coords {
            let original = param.data()[c];
            work[pi].data_mut()[c] = original + cfg.step;
            let plus = eval(&work)?;
            work[pi].data_mut()[c] = original - cfg.step;
            let minus = eval(&work)?;
            work[pi].data_mut()[c] = original;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[pi].data()[c];
            let err = gradient_error(a, numeric, cfg.abs_floor);
            if c == coords[0] || err > report.max_error {
                report.max_error = err;
                report.worst_coord = c;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
        reports.push(report);
    }

    Ok(GradCheckReport {
        tol: cfg.tol,
        params: reports,
    })
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Evaluation(format!("objective evaluated to {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(step: f64, tol: f64) -> GradCheckConfig {
        GradCheckConfig {
            step,
            tol,
            ..Default::default()
        }
    }

    #[test]
    fn quadratic_form_is_tight() {
        // f(x) = x^T A x with A fixed; gradient (A + A^T) x.
        let a = Tensor::matrix(3, 3, vec![2., 0.5, -1., 0.3, 1., 0.2, -0.4, 0.1, 3.]).unwrap();
        let x = Tensor::column(vec![0.3, -1.2, 0.8]).unwrap();
        let report = grad_check(
            |g, v| {
                let a = g.constant(a.clone());
                let ax = g.matmul(a, v[0])?;
                let xt = g.transpose(v[0])?;
                g.matmul(xt, ax)
            },
            &[x],
            &cfg(1e-5, 1e-9),
        )
        .unwrap();
        assert!(report.passed(), "{:?}", report.worst());
    }

    #[test]
    fn tanh_chain_depth_five() {
        let x = Tensor::row(vec![0.5, -1.5, 1.9, -0.2]).unwrap();
        let report = grad_check(
            |g, v| {
                let mut h = v[0];
                for _ in 0..5 {
                    let s = g.scale(h, 1.7)?;
                    h = g.tanh(s)?;
                }
                g.sum(h)
            },
            &[x],
            &cfg(1e-6, 1e-6),
        )
        .unwrap();
        assert!(report.passed(), "{:?}", report.worst());
    }

    #[test]
    fn constant_function_uses_absolute_fallback() {
        let x = Tensor::row(vec![1.0, 2.0]).unwrap();
        let report = grad_check(
            |g, v| {
                let z = g.scale(v[0], 0.0)?;
                let s = g.sum(z)?;
                g.add_scalar(s, 4.0)
            },
            &[x],
            &cfg(1e-6, 1e-10),
        )
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.worst().unwrap().analytic, 0.0);
    }

    #[test]
    fn rejects_out_of_range_step() {
        let x = Tensor::row(vec![1.0]).unwrap();
        let r = grad_check(|g, v| g.sum(v[0]), &[x], &cfg(1e-2, 1e-6));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn samples_large_tensors() {
        let x = Tensor::ones(&[10, 10]);
        let report = grad_check(
            |g, v| {
                let sq = g.mul(v[0], v[0])?;
                g.sum(sq)
            },
            &[x],
            &cfg(1e-6, 1e-6),
        )
        .unwrap();
        assert_eq!(report.params[0].coords_checked, 32);
        assert!(report.passed());
    }
}
