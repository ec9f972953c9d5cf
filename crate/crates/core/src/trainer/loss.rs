//! Batched loss assembly: PDE, boundary and initial terms with exact gradients.

use crate::approximator::{ApproximatorParams, BatchJets, Channels};
use crate::error::{Error, Result};
use crate::problems::{
    sample_points, source_and_data, BoundaryKind, DataKind, Deriv, PdeOperator, PointSets, ProblemSpec,
};

/// Sampled points with their manufactured targets, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub spec: ProblemSpec,
    pub points: PointSets,
    op: PdeOperator,
    interior_channels: Channels,
    /// `(channel, coefficient)` for every linear operator term.
    term_channels: Vec<(usize, f64)>,
    source: Vec<f64>,
    bc_target: Vec<f64>,
    ic_value: Vec<f64>,
    ic_velocity: Option<Vec<f64>>,
}

/// Unweighted component losses plus the weighted PDE loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub pde_w: f64,
    pub pde: f64,
    pub bc: f64,
    /// `None` for stationary problems.
    pub ic: Option<f64>,
}

impl LossComponents {
    /// Terms in balancing order: PDE (weighted), BC, IC when present.
    pub fn terms(&self) -> Vec<f64> {
        [self.pde_w, self.bc].into_iter().chain(self.ic).collect()
    }

    pub fn total(&self, lambdas: &[f64]) -> f64 {
        self.terms().iter().zip(lambdas).map(|(l, w)| l * w).sum()
    }
}

/// Network outputs and residual rows at one parameter vector.
pub struct ForwardPass {
    interior: BatchJets,
    boundary: BatchJets,
    initial: Option<BatchJets>,
    pub pde_residuals: Vec<f64>,
    pub bc_rows: Vec<f64>,
    pub ic_rows: Vec<f64>,
}

fn mean_square(rows: &[f64]) -> f64 {
    if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r * r).sum::<f64>() / rows.len() as f64
    }
}

fn first_bad(rows: &[f64]) -> Option<(usize, f64)> {
    rows.iter().copied().enumerate().find(|(_, r)| !r.is_finite())
}

impl TrainingData {
    pub fn new(spec: &ProblemSpec, points: PointSets) -> Result<Self> {
        if points.dim != spec.input_dim() {
            return Err(Error::Input("point dimension does not match the problem".into()));
        }
        let op = PdeOperator::for_spec(spec);
        let interior_channels = op.channels();
        let dim = spec.input_dim();
        let term_channels = op
            .terms
            .iter()
            .map(|&(d, c)| {
                let ch = match d {
                    Deriv::Value => Some(0),
                    Deriv::First(i) => interior_channels.first_index(i),
                    Deriv::Second(i, j) => interior_channels.second_index(dim, i, j),
                };
                (ch.expect("operator channels cover every term"), c)
            })
            .collect();
        let source = points
            .interior
            .chunks_exact(dim)
            .map(|p| source_and_data(spec, p, DataKind::Pde))
            .collect::<Result<_>>()?;
        let bc_target = points
            .boundary
            .chunks_exact(dim)
            .map(|p| source_and_data(spec, p, DataKind::Bc))
            .collect::<Result<_>>()?;
        let ic_value = points
            .initial
            .chunks_exact(dim)
            .map(|p| source_and_data(spec, p, DataKind::Ic))
            .collect::<Result<_>>()?;
        let ic_velocity = if spec.has_initial_velocity() {
            Some(
                points
                    .initial
                    .chunks_exact(dim)
                    .map(|p| source_and_data(spec, p, DataKind::IcVelocity))
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            spec: spec.clone(),
            points,
            op,
            interior_channels,
            term_channels,
            source,
            bc_target,
            ic_value,
            ic_velocity,
        })
    }

    /// Samples points with the given counts and prepares their targets.
    pub fn sample(spec: &ProblemSpec, n_interior: usize, n_boundary: usize, n_initial: usize, seed: u64) -> Result<Self> {
        let points = sample_points(spec, n_interior, n_boundary, n_initial, seed)?;
        Self::new(spec, points)
    }

    pub fn n_interior(&self) -> usize {
        self.points.n_interior()
    }

    /// Number of loss terms: 2 when stationary, 3 otherwise.
    pub fn n_terms(&self) -> usize {
        if self.has_ic() { 3 } else { 2 }
    }

    fn has_ic(&self) -> bool {
        self.spec.time_dependent() && !self.ic_value.is_empty()
    }

    fn periodic(&self) -> bool {
        self.spec.boundary_kind() == BoundaryKind::Periodic
    }

    pub fn forward(&self, params: &ApproximatorParams) -> Result<ForwardPass> {
        let n = self.n_interior();
        let interior = BatchJets::forward(params, &self.points.interior, &self.interior_channels)?;
        let mut pde_residuals = vec![0.0; n];
        for &(ch, c) in &self.term_channels {
            for (r, v) in pde_residuals.iter_mut().zip(interior.channel(ch)) {
                *r += c * v;
            }
        }
        if let Some(rate) = self.op.logistic_rate {
            for (r, &u) in pde_residuals.iter_mut().zip(interior.channel(0)) {
                *r -= rate * u * (1.0 - u);
            }
        }
        for (r, f) in pde_residuals.iter_mut().zip(&self.source) {
            *r -= f;
        }
        if let Some((i, v)) = first_bad(&pde_residuals) {
            return Err(Error::numerical(format!("pde residual at interior point {i}"), v));
        }

        let bc_channels = if self.periodic() { Channels::with_first() } else { Channels::value_only() };
        let boundary = BatchJets::forward(params, &self.points.boundary, &bc_channels)?;
        let bc_rows = if self.periodic() {
            let pairs = boundary.len() / 2;
            let mut rows = Vec::with_capacity(2 * pairs);
            for k in 0..pairs {
                let (lo, hi) = (2 * k, 2 * k + 1);
                rows.push(boundary.value(lo) - boundary.value(hi));
                rows.push(boundary.first(lo, 0) - boundary.first(hi, 0));
            }
            rows
        } else {
            boundary.channel(0).iter().zip(&self.bc_target).map(|(u, g)| u - g).collect()
        };
        if let Some((i, v)) = first_bad(&bc_rows) {
            return Err(Error::numerical(format!("boundary residual row {i}"), v));
        }

        let (initial, ic_rows) = if self.has_ic() {
            let ch = if self.ic_velocity.is_some() { Channels::with_first() } else { Channels::value_only() };
            let batch = BatchJets::forward(params, &self.points.initial, &ch)?;
            let mut rows: Vec<f64> = batch.channel(0).iter().zip(&self.ic_value).map(|(u, g)| u - g).collect();
            if let Some(v0) = &self.ic_velocity {
                let t = self.spec.time_index().expect("time dependent");
                let ut = batch.channel(ch.first_index(t).expect("first channel"));
                rows.extend(ut.iter().zip(v0).map(|(u, v)| u - v));
            }
            (Some(batch), rows)
        } else {
            (None, Vec::new())
        };
        if let Some((i, v)) = first_bad(&ic_rows) {
            return Err(Error::numerical(format!("initial residual row {i}"), v));
        }

        Ok(ForwardPass {
            interior,
            boundary,
            initial,
            pde_residuals,
            bc_rows,
            ic_rows,
        })
    }

    pub fn components(&self, fp: &ForwardPass, weights: &[f64]) -> LossComponents {
        assert_eq!(weights.len(), fp.pde_residuals.len(), "one weight per interior point");
        let n = fp.pde_residuals.len() as f64;
        let (mut pde_w, mut pde) = (0.0, 0.0);
        for (r, w) in fp.pde_residuals.iter().zip(weights) {
            pde += r * r;
            pde_w += w * r * r;
        }
        LossComponents {
            pde_w: pde_w / n,
            pde: pde / n,
            bc: mean_square(&fp.bc_rows),
            ic: self.has_ic().then(|| mean_square(&fp.ic_rows)),
        }
    }

    /// Adds `∇θ Σ λ_c L_c` to `grad`.
    pub fn backward(
        &self,
        params: &ApproximatorParams,
        fp: &ForwardPass,
        weights: &[f64],
        lambdas: &[f64],
        grad: &mut [f64],
    ) {
        assert_eq!(lambdas.len(), self.n_terms(), "one lambda per loss term");
        let n = fp.pde_residuals.len();
        let mut adj = vec![0.0; fp.interior.n_channels() * n];
        let scale = 2.0 * lambdas[0] / n as f64;
        let values = fp.interior.channel(0);
        for i in 0..n {
            let dr = scale * weights[i] * fp.pde_residuals[i];
            for &(ch, c) in &self.term_channels {
                adj[ch * n + i] += c * dr;
            }
            adj[i] += self.op.value_sensitivity(values[i]) * dr;
        }
        fp.interior.backward(params, &adj, grad);

        let nb = fp.boundary.len();
        let mut adj = vec![0.0; fp.boundary.n_channels() * nb];
        let scale = 2.0 * lambdas[1] / fp.bc_rows.len() as f64;
        if self.periodic() {
            let slope = fp.boundary.channels().first_index(0).expect("first channel");
            for k in 0..nb / 2 {
                let (lo, hi) = (2 * k, 2 * k + 1);
                let dv = scale * fp.bc_rows[2 * k];
                let ds = scale * fp.bc_rows[2 * k + 1];
                adj[lo] += dv;
                adj[hi] -= dv;
                adj[slope * nb + lo] += ds;
                adj[slope * nb + hi] -= ds;
            }
        } else {
            for (a, r) in adj.iter_mut().zip(&fp.bc_rows) {
                *a = scale * r;
            }
        }
        fp.boundary.backward(params, &adj, grad);

        if let Some(batch) = &fp.initial {
            let m = batch.len();
            let mut adj = vec![0.0; batch.n_channels() * m];
            let scale = 2.0 * lambdas[2] / fp.ic_rows.len() as f64;
            for (a, r) in adj.iter_mut().zip(&fp.ic_rows[..m]) {
                *a = scale * r;
            }
            if self.ic_velocity.is_some() {
                let t = self.spec.time_index().expect("time dependent");
                let ch = batch.channels().first_index(t).expect("first channel");
                for (a, r) in adj[ch * m..(ch + 1) * m].iter_mut().zip(&fp.ic_rows[m..]) {
                    *a = scale * r;
                }
            }
            batch.backward(params, &adj, grad);
        }
    }

    /// `(1/N) Σ wᵢ rᵢ²` at `params`.
    pub fn weighted_pde_loss(&self, params: &ApproximatorParams, weights: &[f64]) -> Result<f64> {
        let fp = self.forward(params)?;
        Ok(self.components(&fp, weights).pde_w)
    }

    /// `Σ λ_c L_c` and its components, optionally accumulating the gradient.
    pub fn total_loss(
        &self,
        params: &ApproximatorParams,
        weights: &[f64],
        lambdas: &[f64],
        grad: Option<&mut [f64]>,
    ) -> Result<(f64, LossComponents)> {
        if lambdas.len() != self.n_terms() {
            return Err(Error::Input(format!(
                "expected {} lambdas, got {}",
                self.n_terms(),
                lambdas.len()
            )));
        }
        if weights.len() != self.n_interior() {
            return Err(Error::Input("one weight per interior point required".into()));
        }
        let fp = self.forward(params)?;
        let comps = self.components(&fp, weights);
        if let Some(g) = grad {
            self.backward(params, &fp, weights, lambdas, g);
        }
        Ok((comps.total(lambdas), comps))
    }
}
