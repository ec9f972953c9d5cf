//! Smooth fully-connected approximator `û(x, t; θ)`.
//!
//! Parameters live in one flat vector. For every layer `l` (input side first)
//! the layout is the weight matrix `W_l` in row-major order
//! (`layer_sizes[l+1]` rows by `layer_sizes[l]` columns) followed by the bias
//! vector `b_l`. Optimizers, checkpoints and gradients all share this layout.
//!
//! Hidden layers apply `tanh`; the output layer is affine and one unit wide.

mod batch;
mod checkpoint;
mod jet;

use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub use batch::{BatchJets, Channels};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use jet::{eval_jet, Jet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Network weights plus the shape metadata needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximatorParams {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
    activation: Activation,
}

/// Number of parameters implied by `layer_sizes` under the flat layout.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "layer_sizes needs at least an input and an output width, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer widths must be positive, got {layer_sizes:?}"
        )));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "output width must be 1, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl ApproximatorParams {
    pub fn new(layer_sizes: Vec<usize>, values: Vec<f64>, activation: Activation) -> Result<Self> {
        validate_layer_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if values.len() != expected {
            return Err(Error::Config(format!(
                "layer sizes {layer_sizes:?} need {expected} parameters, got {}",
                values.len()
            )));
        }
        Ok(Self {
            layer_sizes,
            values,
            activation,
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let n = param_count(layer_sizes);
        Self::new(layer_sizes.to_vec(), vec![0.0; n], Activation::Tanh)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Returns a copy with the same shape and new parameter values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        Self::new(self.layer_sizes.clone(), values.to_vec(), self.activation)
    }

    /// Offsets of `(W_l, b_l)` inside the flat vector.
    pub(crate) fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut offset = 0;
        for w in self.layer_sizes.windows(2).take(layer) {
            offset += w[0] * w[1] + w[1];
        }
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        (offset, offset + fan_in * fan_out)
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(layer);
        &self.values[w..b]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(layer);
        &self.values[b..b + self.layer_sizes[layer + 1]]
    }
}

/// Glorot-uniform weights, zero biases, drawn from the seed's init stream.
pub fn init_network(layer_sizes: &[usize], seed: u64) -> Result<ApproximatorParams> {
    validate_layer_sizes(layer_sizes)?;
    let mut rng = rng::stream(seed, Stream::Init);
    let mut values = Vec::with_capacity(param_count(layer_sizes));
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)));
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    ApproximatorParams::new(layer_sizes.to_vec(), values, Activation::Tanh)
}

/// Scalar objective over the flat parameter vector with an exact gradient.
pub trait Objective {
    /// Writes `∇θ` into `grad` (same length as `params`) and returns the value.
    fn evaluate(&mut self, params: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn evaluate(&mut self, params: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self(params, grad))
    }
}

/// Exact gradient of `objective` at `params`, in the flat layout order.
pub fn objective_gradient<O: Objective + ?Sized>(
    params: &ApproximatorParams,
    objective: &mut O,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.len()];
    let value = objective.evaluate(params.values(), &mut grad)?;
    if !value.is_finite() {
        return Err(Error::numerical("objective value is not finite", value));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_count_for_benchmark_network() {
        // d·50+50 + 3·(50·50+50) + 50·1+1
        assert_eq!(param_count(&[1, 50, 50, 50, 50, 1]), 100 + 7650 + 51);
        assert_eq!(param_count(&[1, 50, 50, 50, 50, 1]), 7801);
        assert_eq!(param_count(&[2, 50, 50, 50, 50, 1]), 150 + 7650 + 51);
        let p = init_network(&[2, 50, 50, 50, 50, 1], 3).unwrap();
        assert_eq!(p.len(), 7851);
    }

    #[test]
    fn biases_start_at_zero() {
        for seed in [0, 1, 99] {
            let p = init_network(&[1, 1], seed).unwrap();
            assert_eq!(p.biases(0), &[0.0]);
            let p = init_network(&[2, 5, 3, 1], seed).unwrap();
            for l in 0..p.n_layers() {
                assert!(p.biases(l).iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_within_glorot_limit() {
        let a = init_network(&[1, 20, 20, 1], 42).unwrap();
        let b = init_network(&[1, 20, 20, 1], 42).unwrap();
        let c = init_network(&[1, 20, 20, 1], 43).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(a.weights(1).iter().all(|w| w.abs() < limit));
    }

    #[test]
    fn layer_offsets_follow_weights_then_bias() {
        let p = init_network(&[2, 3, 1], 0).unwrap();
        assert_eq!(p.layer_offsets(0), (0, 6));
        assert_eq!(p.layer_offsets(1), (9, 12));
        assert_eq!(p.weights(1).len(), 3);
    }

    #[test]
    fn invalid_layer_sizes_rejected() {
        assert!(matches!(init_network(&[1], 0), Err(Error::Config(_))));
        assert!(matches!(init_network(&[1, 0, 1], 0), Err(Error::Config(_))));
        assert!(matches!(init_network(&[1, 4, 2], 0), Err(Error::Config(_))));
        assert!(matches!(
            ApproximatorParams::new(vec![1, 1], vec![0.0; 3], Activation::Tanh),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn objective_gradient_of_constant_and_quadratic() {
        let p = init_network(&[1, 4, 1], 5).unwrap();
        let mut constant = |_: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            3.5
        };
        assert!(objective_gradient(&p, &mut constant)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let mut half_norm = |x: &[f64], g: &mut [f64]| {
            g.copy_from_slice(x);
            0.5 * x.iter().map(|v| v * v).sum::<f64>()
        };
        assert_eq!(objective_gradient(&p, &mut half_norm).unwrap(), p.values());
    }

    #[test]
    fn objective_gradient_rejects_non_finite_value() {
        let p = init_network(&[1, 2, 1], 5).unwrap();
        let mut bad = |_: &[f64], _: &mut [f64]| f64::NAN;
        let err = objective_gradient(&p, &mut bad).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }
}
