use crate::error::{Error, Result};

use super::{ApproximatorParams, BatchJets, Channels};

/// Value of `û` at a point with its input gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `dim × dim`, symmetric as stored.
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    pub fn set_hess(&mut self, i: usize, j: usize, v: f64) {
        let d = self.dim();
        self.hess[i * d + j] = v;
        self.hess[j * d + i] = v;
    }
}

/// Exact value, gradient and Hessian of the network at `point`.
pub fn eval_jet(params: &ApproximatorParams, point: &[f64]) -> Result<Jet> {
    let dim = params.input_dim();
    if point.len() != dim {
        return Err(Error::Input(format!(
            "point has {} coordinates, network expects {dim}",
            point.len()
        )));
    }
    let batch = BatchJets::forward(params, point, &Channels::full(dim))?;
    let mut jet = Jet::zero(dim);
    jet.value = batch.value(0);
    for i in 0..dim {
        jet.grad[i] = batch.first(0, i);
        for j in i..dim {
            jet.set_hess(i, j, batch.second(0, i, j));
        }
    }
    Ok(jet)
}
