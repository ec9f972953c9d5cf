//! First-order and quasi-Newton optimizers over flat parameter vectors.

mod adam;
mod lbfgs;

pub use adam::{Adam, AdamConfig};
pub use lbfgs::{lbfgs_run, LbfgsConfig, LbfgsReport, LbfgsStop};

use crate::error::{Error, Result};

/// `θ ← θ − η∇`.
pub fn gd_step(params: &mut [f64], grad: &[f64], eta: f64) {
    assert_eq!(params.len(), grad.len(), "gradient length");
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= eta * g;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn check_finite(values: &[f64], context: &str) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&bad) => Err(Error::numerical(context, bad)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gd_examples() {
        let mut p = vec![1.0, -2.0];
        gd_step(&mut p, &[0.0, 0.0], 0.5);
        assert_eq!(p, vec![1.0, -2.0]);
        let g = p.clone();
        gd_step(&mut p, &g, 1.0);
        assert_eq!(p, vec![0.0, 0.0]);
    }
}
