//! Central-finite-difference verification of backward rules.

use super::graph::{Graph, Tensor};
use super::ndarray::NdArray;
use crate::{Error, Result};

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (input index, coordinate) of the worst disagreement.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Relative error with an absolute floor, so finite-difference noise on
/// near-zero gradients is not amplified into spurious failures.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Compare the backward gradient of a scalar-valued builder against central
/// finite differences, perturbing every coordinate of every input.
pub fn grad_check_multi(
    f: &dyn Fn(&mut Graph, &[Tensor]) -> Result<Tensor>,
    inputs: &[NdArray],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    assert!(step > 0.0, "finite-difference step must be positive");

    // Analytic pass.
    let mut graph = Graph::new();
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|x| graph.leaf_grad(x.clone()))
        .collect();
    let loss = f(&mut graph, &leaves)?;
    if graph.data(loss).len() != 1 {
        return Err(Error::NonScalarLoss {
            shape: graph.shape(loss).to_vec(),
        });
    }
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            graph
                .grad(t)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; inputs[i].len()])
        })
        .collect();

    let eval = |xs: &[NdArray]| -> Result<f64> {
        let mut g = Graph::new();
        let leaves: Vec<Tensor> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let loss = f(&mut g, &leaves)?;
        Ok(g.data(loss).item())
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        tolerance,
    };
    let mut workspace: Vec<NdArray> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let original = input.data()[j];
            workspace[i].data_mut()[j] = original + step;
            let plus = eval(&workspace)?;
            workspace[i].data_mut()[j] = original - step;
            let minus = eval(&workspace)?;
            workspace[i].data_mut()[j] = original;

            let fd = (plus - minus) / (2.0 * step);
            let ad = analytic[i][j];
            if !fd.is_finite() || !ad.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("gradient check input {i}"),
                    index: j,
                });
            }
            let err = rel_err(ad, fd);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((i, j));
            }
        }
    }
    Ok(report)
}

/// Single-input convenience wrapper around [`grad_check_multi`].
pub fn grad_check(
    f: &dyn Fn(&mut Graph, Tensor) -> Result<Tensor>,
    x: &NdArray,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    grad_check_multi(
        &|g: &mut Graph, ts: &[Tensor]| f(g, ts[0]),
        std::slice::from_ref(x),
        step,
        tolerance,
    )
}
