//! Relative loss balancing with random lookback.

use std::collections::VecDeque;

use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng::{stream, Rng64, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancerConfig {
    pub alpha: f64,
    pub rho: f64,
    pub kappa: f64,
    pub history: usize,
    pub eps: f64,
    pub enabled: bool,
}

impl Default for BalancerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.999,
            rho: 0.99,
            kappa: 0.1,
            history: 1000,
            eps: 1e-8,
            enabled: false,
        }
    }
}

impl BalancerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.alpha) || !open_unit(self.rho) {
            return Err(Error::Config("balancer alpha and rho must lie in (0, 1)".into()));
        }
        if !(self.kappa > 0.0) || !(self.eps > 0.0) || self.history == 0 {
            return Err(Error::Config("balancer kappa, eps and history must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BalancerState {
    pub cfg: BalancerConfig,
    ema: Option<Vec<f64>>,
    prev_ema: Option<Vec<f64>>,
    history: VecDeque<Vec<f64>>,
    rng: Rng64,
}

/// `C · softmax(ratios / κ)` with a max shift.
pub fn softmax_weights(ratios: &[f64], kappa: f64) -> Vec<f64> {
    let c = ratios.len() as f64;
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = ratios.iter().map(|r| ((r - max) / kappa).exp()).collect();
    let total: f64 = ex.iter().sum();
    ex.iter().map(|e| c * e / total).collect()
}

impl BalancerState {
    pub fn new(cfg: BalancerConfig, seed: u64) -> Self {
        Self {
            cfg,
            ema: None,
            prev_ema: None,
            history: VecDeque::new(),
            rng: stream(seed, Stream::Balancer),
        }
    }

    pub fn ema(&self) -> Option<&[f64]> {
        self.ema.as_deref()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Folds the current losses into the moving average and the history.
    pub fn update_ema(&mut self, losses: &[f64]) -> Result<()> {
        if let Some(bad) = losses.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::numerical("balancer loss", *bad));
        }
        let next = match &self.ema {
            None => losses.to_vec(),
            Some(prev) => prev
                .iter()
                .zip(losses)
                .map(|(e, l)| self.cfg.alpha * e + (1.0 - self.cfg.alpha) * l)
                .collect(),
        };
        self.prev_ema = self.ema.replace(next);
        self.history.push_back(losses.to_vec());
        while self.history.len() > self.cfg.history {
            self.history.pop_front();
        }
        Ok(())
    }

    /// Term weights for the current losses; all ones when disabled.
    ///
    /// One Bernoulli draw picks the previous moving average (probability `ρ`)
    /// or a single uniformly chosen earlier history entry, shared by every term.
    pub fn compute_lambdas(&mut self, losses: &[f64]) -> Vec<f64> {
        if !self.cfg.enabled {
            return vec![1.0; losses.len()];
        }
        let use_ema = self.rng.random::<f64>() < self.cfg.rho;
        let earlier = self.history.len().saturating_sub(1);
        let lookback = (earlier > 0).then(|| self.rng.random_range(0..earlier));
        let reference: &[f64] = match (use_ema, lookback) {
            (false, Some(idx)) => &self.history[idx],
            _ => self
                .prev_ema
                .as_deref()
                .or(self.ema.as_deref())
                .unwrap_or(losses),
        };
        let ratios: Vec<f64> = losses
            .iter()
            .zip(reference)
            .map(|(l, r)| l / (r + self.cfg.eps))
            .collect();
        softmax_weights(&ratios, self.cfg.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ema_examples() {
        let cfg = BalancerConfig { alpha: 0.9, ..Default::default() };
        let mut b = BalancerState::new(cfg, 0);
        b.update_ema(&[3.0, 4.0, 5.0]).unwrap();
        assert_eq!(b.ema().unwrap(), &[3.0, 4.0, 5.0]);
        let mut b = BalancerState::new(cfg, 0);
        b.update_ema(&[1.0]).unwrap();
        b.update_ema(&[2.0]).unwrap();
        assert!((b.ema().unwrap()[0] - 1.1).abs() < 1e-15);
        assert!(b.update_ema(&[f64::NAN]).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_weights(&[0.7, 0.7, 0.7], 0.1), vec![1.0; 3]);
        let e = std::f64::consts::E;
        let l = softmax_weights(&[2.0, 1.0], 1.0);
        assert!((l[0] - 2.0 * e / (e + 1.0)).abs() < 1e-12);
        assert!((l[1] - 2.0 / (e + 1.0)).abs() < 1e-12);
        let flat = softmax_weights(&[5.0, 0.1, 2.0], 1e9);
        assert!(flat.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn disabled_emits_ones() {
        let mut b = BalancerState::new(BalancerConfig::default(), 0);
        b.update_ema(&[1.0, 9.0]).unwrap();
        assert_eq!(b.compute_lambdas(&[1.0, 9.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn history_is_bounded() {
        let cfg = BalancerConfig { history: 3, enabled: true, ..Default::default() };
        let mut b = BalancerState::new(cfg, 1);
        for i in 0..10 {
            b.update_ema(&[i as f64, 1.0]).unwrap();
            let l = b.compute_lambdas(&[i as f64, 1.0]);
            assert!((l.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        }
        assert_eq!(b.history_len(), 3);
    }
}
