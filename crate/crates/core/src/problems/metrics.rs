use super::exact::exact_jet;
use super::ProblemSpec;
use crate::approximator::{ApproximatorParams, BatchJets, Channels};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub e_loss: f64,
    /// Euclidean norm of the error vector over the grid.
    pub e2: f64,
    /// `e2` divided by the Euclidean norm of the exact solution.
    pub rel_e2: f64,
    pub e_inf: f64,
}

/// Uniform tensor grid over the space-time box, endpoints included,
/// first axis outermost. Defaults to the benchmark resolution.
pub fn test_grid(spec: &ProblemSpec, per_axis: Option<usize>) -> Vec<f64> {
    let n = per_axis.unwrap_or_else(|| spec.defaults().grid_per_axis).max(2);
    let axes = spec.box_axes();
    let ticks: Vec<Vec<f64>> = axes
        .iter()
        .map(|ax| (0..n).map(|i| ax.lo + ax.len() * i as f64 / (n - 1) as f64).collect())
        .collect();
    let total = n.pow(axes.len() as u32);
    let mut grid = Vec::with_capacity(total * axes.len());
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0; axes.len()];
        for slot in idx.iter_mut().rev() {
            *slot = rem % n;
            rem /= n;
        }
        grid.extend(idx.iter().zip(&ticks).map(|(&i, t)| t[i]));
    }
    grid
}

/// Error statistics of `pred` against `exact`.
pub fn error_metrics(exact: &[f64], pred: &[f64], e_loss: f64) -> ErrorMetrics {
    assert_eq!(exact.len(), pred.len(), "prediction length");
    let mut sq = 0.0;
    let mut norm = 0.0;
    let mut e_inf: f64 = 0.0;
    for (&u, &v) in exact.iter().zip(pred) {
        let d = (u - v).abs();
        sq += d * d;
        norm += u * u;
        e_inf = e_inf.max(d);
    }
    let e2 = sq.sqrt();
    let u_norm = norm.sqrt();
    let rel_e2 = if u_norm > 0.0 {
        e2 / u_norm
    } else if e2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    ErrorMetrics {
        e_loss,
        e2,
        rel_e2,
        e_inf,
    }
}

/// Network predictions on `grid` compared with the exact solution.
pub fn evaluate_metrics(
    params: &ApproximatorParams,
    spec: &ProblemSpec,
    grid: &[f64],
    e_loss: f64,
) -> Result<ErrorMetrics> {
    let dim = spec.input_dim();
    if params.input_dim() != dim {
        return Err(Error::Input(format!(
            "network takes {} inputs, {} needs {dim}",
            params.input_dim(),
            spec.id
        )));
    }
    let batch = BatchJets::forward(params, grid, &Channels::value_only())?;
    let exact: Vec<f64> = grid.chunks_exact(dim).map(|p| exact_jet(spec, p).value).collect();
    Ok(error_metrics(&exact, batch.channel(0), e_loss))
}
