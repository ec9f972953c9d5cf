//! Difficulty-driven sample weights built on top of the residual mixture.
//!
//! Per refresh: fit the mixture, score each component by its
//! responsibility-weighted mean squared residual, map the normalized score to
//! an easy/hard weight blended by `τ`, scale by a precision factor that fades
//! out as `τ → 1`, push the component weights back to samples through the
//! responsibilities and normalize to unit mean.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, responsibilities, GmmConfig, GmmModel, Responsibilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Curriculum plus precision modulation.
    Cgm,
    /// Static hard-component up-weighting, no schedule.
    GmmOnly,
    /// Curriculum on per-sample squared residuals, no mixture.
    ClOnly,
    Uniform,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cgm => "cgm",
            Variant::GmmOnly => "gmm_only",
            Variant::ClOnly => "cl_only",
            Variant::Uniform => "uniform",
        }
    }

    pub fn uses_mixture(self) -> bool {
        matches!(self, Variant::Cgm | Variant::GmmOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Variant::Cgm, Variant::GmmOnly, Variant::ClOnly, Variant::Uniform]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown curriculum variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig {
    pub beta: f64,
    pub c_sat: f64,
    pub k_max: usize,
    pub k_upd: usize,
    pub eps: f64,
    pub gmm: GmmConfig,
    pub variant: Variant,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            c_sat: 0.5,
            k_max: 5000,
            k_upd: 100,
            eps: 1e-8,
            gmm: GmmConfig::default(),
            variant: Variant::Cgm,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if !(self.c_sat > 0.0 && self.c_sat <= 1.0) {
            return bad("c_sat must lie in (0, 1]");
        }
        if self.k_max == 0 || self.k_upd == 0 {
            return bad("k_max and k_upd must be positive");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if self.gmm.k == 0 {
            return bad("k_components must be positive");
        }
        Ok(())
    }
}

/// Linear ramp reaching 1 at `k_max · c_sat`.
pub fn tau(k: usize, cfg: &CurriculumConfig) -> f64 {
    let sat = cfg.k_max as f64 * cfg.c_sat;
    if sat <= 0.0 {
        return 1.0;
    }
    (k as f64 / sat).min(1.0)
}

/// `d_m = Σᵢ γᵢₘ rᵢ² / (Σᵢ γᵢₘ + ε)`.
pub fn component_difficulty(residuals: &[f64], gamma: &Responsibilities, eps: f64) -> Vec<f64> {
    let k = gamma.k;
    let mut num = vec![0.0; k];
    let mut den = vec![0.0; k];
    for (row, &r) in gamma.data.chunks_exact(k).zip(residuals) {
        let r2 = r * r;
        for m in 0..k {
            num[m] += row[m] * r2;
            den[m] += row[m];
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / (d + eps)).collect()
}

/// Min-max scaling with an `ε` guard; a complete tie maps to zeros.
pub fn normalize_difficulty(d: &[f64], eps: f64) -> Vec<f64> {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    d.iter().map(|v| (v - lo) / (hi - lo + eps)).collect()
}

/// `(1−τ)e^{−βd̃} + τe^{−β(1−d̃)}`.
pub fn curriculum_weight(d_tilde: f64, tau: f64, beta: f64) -> f64 {
    (1.0 - tau) * (-beta * d_tilde).exp() + tau * (-beta * (1.0 - d_tilde)).exp()
}

/// Precision factors `v_m`, each in `(0, 1]` with the sharpest component at 1.
pub fn precision_factors(variances: &[f64], eps: f64) -> Vec<f64> {
    let best = variances.iter().copied().fold(f64::INFINITY, f64::min) + eps;
    variances.iter().map(|v| best / (v + eps)).collect()
}

pub fn curriculum_component_weights(
    d_tilde: &[f64],
    variances: &[f64],
    tau: f64,
    cfg: &CurriculumConfig,
) -> Vec<f64> {
    let v = precision_factors(variances, cfg.eps);
    match cfg.variant {
        Variant::GmmOnly => d_tilde
            .iter()
            .zip(&v)
            .map(|(d, v)| (cfg.beta * d).exp() * v)
            .collect(),
        _ => d_tilde
            .iter()
            .zip(&v)
            .map(|(&d, &v)| curriculum_weight(d, tau, cfg.beta) * ((1.0 - tau) * v + tau))
            .collect(),
    }
}

/// `wᵢ = n · rawᵢ / (Σⱼ rawⱼ + ε)`.
pub fn normalize_unit_mean(raw: &[f64], eps: f64) -> Vec<f64> {
    let n = raw.len() as f64;
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| n * w / (total + eps)).collect()
}

/// Normalized per-sample weights for the given variant. `gamma` and `w_comp`
/// are only read by the mixture variants.
pub fn sample_weights(
    gamma: Option<&Responsibilities>,
    w_comp: &[f64],
    residuals: &[f64],
    tau: f64,
    cfg: &CurriculumConfig,
) -> Vec<f64> {
    let n = residuals.len();
    let raw: Vec<f64> = match cfg.variant {
        Variant::Uniform => return vec![1.0; n],
        Variant::ClOnly => {
            let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
            normalize_difficulty(&sq, cfg.eps)
                .into_iter()
                .map(|d| curriculum_weight(d, tau, cfg.beta))
                .collect()
        }
        Variant::Cgm | Variant::GmmOnly => {
            let gamma = gamma.expect("mixture variants need responsibilities");
            gamma
                .data
                .chunks_exact(gamma.k)
                .map(|row| row.iter().zip(w_comp).map(|(g, w)| g * w).sum())
                .collect()
        }
    };
    normalize_unit_mean(&raw, cfg.eps)
}

/// Band `[c₋, c₊]` that holds every normalized weight of the `cgm` variant.
pub fn bound_constants(beta: f64, eps: f64, n: usize, var_min: f64, var_max: f64) -> (f64, f64) {
    let n = n as f64;
    let v_low = (var_min + eps) / (var_max + eps);
    let floor = (-beta).exp() * v_low;
    (n * floor / (n + eps), n / (n * floor + eps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    pub tau: f64,
    pub model: Option<GmmModel>,
    pub sample_weights: Vec<f64>,
    pub difficulty: Vec<f64>,
    pub d_tilde: Vec<f64>,
    pub component_weights: Vec<f64>,
    pub last_refresh_iter: Option<usize>,
}

impl CurriculumState {
    pub fn new(n_interior: usize) -> Self {
        Self {
            tau: 0.0,
            model: None,
            sample_weights: vec![1.0; n_interior],
            difficulty: Vec::new(),
            d_tilde: Vec::new(),
            component_weights: Vec::new(),
            last_refresh_iter: None,
        }
    }

    /// Recomputes every weight from a residual snapshot taken at iteration `k`.
    pub fn refresh(&mut self, snapshot: &[f64], k: usize, cfg: &CurriculumConfig, seed: u64) -> Result<()> {
        if snapshot.len() != self.sample_weights.len() {
            return Err(Error::Input(format!(
                "snapshot has {} residuals, expected {}",
                snapshot.len(),
                self.sample_weights.len()
            )));
        }
        self.tau = tau(k, cfg);
        self.last_refresh_iter = Some(k);
        if cfg.variant.uses_mixture() {
            let model = fit_gmm(snapshot, &cfg.gmm, seed.wrapping_add(k as u64))?;
            let gamma = responsibilities(&model, snapshot);
            self.difficulty = component_difficulty(snapshot, &gamma, cfg.eps);
            self.d_tilde = normalize_difficulty(&self.difficulty, cfg.eps);
            self.component_weights =
                curriculum_component_weights(&self.d_tilde, &model.variances, self.tau, cfg);
            self.sample_weights =
                sample_weights(Some(&gamma), &self.component_weights, snapshot, self.tau, cfg);
            self.model = Some(model);
        } else {
            self.sample_weights = sample_weights(None, &[], snapshot, self.tau, cfg);
        }
        Ok(())
    }

    /// `[c₋, c₊]` for the current mixture, if one has been fitted.
    pub fn bounds(&self, cfg: &CurriculumConfig) -> Option<(f64, f64)> {
        self.model.as_ref().map(|m| {
            bound_constants(cfg.beta, cfg.eps, self.sample_weights.len(), m.var_min(), m.var_max())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-8;

    #[test]
    fn tau_examples() {
        let cfg = CurriculumConfig { k_max: 1000, ..Default::default() };
        assert_eq!(tau(0, &cfg), 0.0);
        assert_eq!(tau(250, &cfg), 0.5);
        assert_eq!(tau(500, &cfg), 1.0);
        assert_eq!(tau(9000, &cfg), 1.0);
    }

    #[test]
    fn difficulty_examples() {
        let gamma = Responsibilities { k: 1, data: vec![1.0, 1.0] };
        let d = component_difficulty(&[1.0, 2.0], &gamma, EPS);
        assert_eq!(d, vec![5.0 / (2.0 + EPS)]);
        assert_eq!(normalize_difficulty(&[2.0, 2.0, 2.0], EPS), vec![0.0; 3]);
        let n = normalize_difficulty(&[0.0, 5.0, 10.0], EPS);
        assert_eq!(n[0], 0.0);
        assert_eq!((n[1], n[2]), (5.0 / (10.0 + EPS), 10.0 / (10.0 + EPS)));
    }

    #[test]
    fn component_weight_endpoints() {
        let cfg = CurriculumConfig::default();
        assert_eq!(curriculum_component_weights(&[0.0], &[1.0], 0.0, &cfg), vec![1.0]);
        let hard = curriculum_component_weights(&[0.0], &[1.0], 1.0, &cfg)[0];
        assert!((hard - (-2.0f64).exp()).abs() < 1e-15);
        let w = curriculum_component_weights(&[0.0, 1.0], &[1.0, 50.0], 1.0, &cfg);
        assert!((w[0] - (-2.0f64).exp()).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bound_constant_examples() {
        let (lo, hi) = bound_constants(0.0, EPS, 1000, 1.0, 1.0);
        assert!((lo - 1.0).abs() < 1e-8 && (hi - 1.0).abs() < 1e-8);
        let (lo, hi) = bound_constants(2f64.ln(), EPS, 1000, 1.0, 1.0);
        assert!((lo - 0.5).abs() < 1e-9 && (hi - 2.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_variant_has_unit_weights() {
        let cfg = CurriculumConfig { variant: Variant::Uniform, ..Default::default() };
        let mut st = CurriculumState::new(3);
        st.refresh(&[1.0, -4.0, 0.5], 0, &cfg, 0).unwrap();
        assert_eq!(st.sample_weights, vec![1.0; 3]);
        assert!(st.model.is_none());
    }

    #[test]
    fn variants_parse() {
        for v in ["cgm", "gmm_only", "cl_only", "uniform"] {
            assert_eq!(v.parse::<Variant>().unwrap().name(), v);
        }
        assert!("other".parse::<Variant>().is_err());
    }
}
