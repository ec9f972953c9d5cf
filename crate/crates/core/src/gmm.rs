//! One-dimensional Gaussian mixture fitted by expectation-maximization.

use std::f64::consts::PI;

use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmConfig {
    pub k: usize,
    pub reg_covar: f64,
    /// Stop once the per-sample mean log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 4,
            reg_covar: 1e-6,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub reg_covar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Total log-likelihood after initialization and after every EM step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `N × K` posterior responsibilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub k: usize,
    pub data: Vec<f64>,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            k,
            data: vec![1.0 / k as f64; n * k],
        }
    }
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn var_min(&self) -> f64 {
        self.variances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn var_max(&self) -> f64 {
        self.variances.iter().copied().fold(0.0, f64::max)
    }

    fn log_terms(&self) -> Vec<(f64, f64, f64)> {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&w, &mu), &var)| (w.ln() - 0.5 * (2.0 * PI * var).ln(), mu, 0.5 / var))
            .collect()
    }
}

fn log_densities(terms: &[(f64, f64, f64)], r: f64, out: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (o, &(c, mu, half_prec)) in out.iter_mut().zip(terms) {
        let d = r - mu;
        *o = c - d * d * half_prec;
        max = max.max(*o);
    }
    max
}

/// Posterior responsibility of every component for every sample.
pub fn responsibilities(model: &GmmModel, residuals: &[f64]) -> Responsibilities {
    let mut resp = Responsibilities {
        k: model.k(),
        data: vec![0.0; residuals.len() * model.k()],
    };
    e_step(model, residuals, &mut resp);
    resp
}

/// Fills `resp` and returns the total log-likelihood.
fn e_step(model: &GmmModel, residuals: &[f64], resp: &mut Responsibilities) -> f64 {
    let terms = model.log_terms();
    let k = model.k();
    let mut total = 0.0;
    for (row, &r) in resp.data.chunks_exact_mut(k).zip(residuals) {
        let max = log_densities(&terms, r, row);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        total += max + sum.ln();
    }
    total
}

/// `Σᵢ log Σₘ πₘ N(rᵢ | μₘ, σₘ²)`, computed in log space.
pub fn log_likelihood(model: &GmmModel, residuals: &[f64]) -> f64 {
    let terms = model.log_terms();
    let mut buf = vec![0.0; model.k()];
    residuals
        .iter()
        .map(|&r| {
            let max = log_densities(&terms, r, &mut buf);
            max + buf.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
        })
        .sum()
}

pub fn fit_gmm(residuals: &[f64], cfg: &GmmConfig, seed: u64) -> Result<GmmModel> {
    fit_gmm_with_report(residuals, cfg, seed).map(|(m, _)| m)
}

/// EM from quantile-spread means; variances are floored at `reg_covar` after
/// every M-step.
pub fn fit_gmm_with_report(residuals: &[f64], cfg: &GmmConfig, seed: u64) -> Result<(GmmModel, FitReport)> {
    let k = cfg.k;
    let n = residuals.len();
    if k == 0 {
        return Err(Error::Input("mixture needs at least one component".into()));
    }
    if !(cfg.reg_covar > 0.0) {
        return Err(Error::Input("reg_covar must be positive".into()));
    }
    if n < k {
        return Err(Error::Input(format!("{n} samples cannot support {k} components")));
    }
    if let Some(bad) = residuals.iter().find(|r| !r.is_finite()) {
        return Err(Error::numerical("gmm residuals", *bad));
    }

    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / nf;
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let degenerate = sorted[0] == sorted[n - 1];

    let mut means: Vec<f64> = (0..k)
        .map(|m| sorted[(((m as f64 + 0.5) / k as f64) * nf) as usize].min(sorted[n - 1]))
        .collect();
    if !degenerate && means.windows(2).any(|w| w[0] == w[1]) {
        let mut rng = stream(seed, Stream::Gmm);
        let spread = 0.1 * var.sqrt();
        for mu in &mut means {
            *mu += spread * rng.random_range(-1.0..1.0);
        }
    }
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![var.max(cfg.reg_covar); k],
        reg_covar: cfg.reg_covar,
    };
    if degenerate {
        let report = FitReport {
            log_likelihood: vec![log_likelihood(&model, residuals)],
            iterations: 0,
            converged: true,
        };
        return Ok((model, report));
    }

    let mut resp = Responsibilities {
        k,
        data: vec![0.0; n * k],
    };
    let mut trace = vec![e_step(&model, residuals, &mut resp)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        m_step(&mut model, residuals, &resp);
        let ll = e_step(&model, residuals, &mut resp);
        iterations += 1;
        let gain = (ll - trace[trace.len() - 1]) / nf;
        trace.push(ll);
        if !ll.is_finite() {
            return Err(Error::numerical("gmm log-likelihood", ll));
        }
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }
    let report = FitReport {
        log_likelihood: trace,
        iterations,
        converged,
    };
    Ok((model, report))
}

fn m_step(model: &mut GmmModel, residuals: &[f64], resp: &Responsibilities) {
    let k = model.k();
    let n = residuals.len() as f64;
    let mut mass = vec![0.0; k];
    let mut first = vec![0.0; k];
    for (row, &r) in resp.data.chunks_exact(k).zip(residuals) {
        for m in 0..k {
            mass[m] += row[m];
            first[m] += row[m] * r;
        }
    }
    let mut second = vec![0.0; k];
    let new_means: Vec<f64> = (0..k)
        .map(|m| if mass[m] > 0.0 { first[m] / mass[m] } else { model.means[m] })
        .collect();
    for (row, &r) in resp.data.chunks_exact(k).zip(residuals) {
        for m in 0..k {
            let d = r - new_means[m];
            second[m] += row[m] * d * d;
        }
    }
    let total: f64 = mass.iter().sum();
    for m in 0..k {
        model.weights[m] = mass[m] / total;
        if mass[m] > f64::MIN_POSITIVE * n {
            model.means[m] = new_means[m];
            model.variances[m] = (second[m] / mass[m]).max(model.reg_covar);
        }
    }
}
