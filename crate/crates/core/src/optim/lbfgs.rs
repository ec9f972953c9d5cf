//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::approximator::Objective;
use crate::error::{Error, Result};

use super::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub grad_tol: f64,
    /// Objective evaluations allowed per line search.
    pub max_ls_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-10,
            max_ls_evals: 25,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config("wolfe constants need 0 < c1 < c2 < 1".into()));
        }
        if self.memory == 0 || self.max_ls_evals == 0 {
            return Err(Error::Config("lbfgs memory must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStop {
    MaxIter,
    GradTol,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub stop: LbfgsStop,
}

/// A trial point along the search direction.
#[derive(Clone)]
struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
    grad: Vec<f64>,
}

struct Search<'a, O: ?Sized> {
    obj: &'a mut O,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    evals: usize,
    buf: Vec<f64>,
}

enum Outcome {
    Accepted(Trial),
    /// Best point with sufficient decrease found before giving up, if any.
    Failed(Option<Trial>),
}

impl<O: Objective + ?Sized> Search<'_, O> {
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        for ((b, x), d) in self.buf.iter_mut().zip(self.x).zip(self.dir) {
            *b = x + alpha * d;
        }
        let mut grad = vec![0.0; self.x.len()];
        let f = self.obj.evaluate(&self.buf, &mut grad)?;
        self.evals += 1;
        let slope = dot(&grad, self.dir);
        Ok(Trial { alpha, f, slope, grad })
    }

    fn armijo_fails(&self, t: &Trial) -> bool {
        !t.f.is_finite() || t.f > self.f0 + self.cfg.c1 * t.alpha * self.slope0
    }

    fn curvature_holds(&self, t: &Trial) -> bool {
        t.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    fn run(&mut self, alpha0: f64) -> Result<Outcome> {
        let mut prev = Trial {
            alpha: 0.0,
            f: self.f0,
            slope: self.slope0,
            grad: Vec::new(),
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.cfg.max_ls_evals {
            let cur = self.eval(alpha)?;
            if self.armijo_fails(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature_holds(&cur) {
                return Ok(Outcome::Accepted(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            alpha = (2.0 * cur.alpha).min(1e10);
            prev = cur;
        }
        Ok(Outcome::Failed((prev.alpha > 0.0).then_some(prev)))
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Result<Outcome> {
        while self.evals < self.cfg.max_ls_evals {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= 1e-16 * b.max(1.0) {
                break;
            }
            let mut alpha = cubic_minimizer(&lo, &hi).unwrap_or(f64::NAN);
            if !(alpha >= a + 0.1 * width && alpha <= b - 0.1 * width) {
                alpha = 0.5 * (a + b);
            }
            let cur = self.eval(alpha)?;
            if self.armijo_fails(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature_holds(&cur) {
                    return Ok(Outcome::Accepted(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        Ok(Outcome::Failed((lo.alpha > 0.0).then_some(lo)))
    }
}

/// Minimizer of the cubic matching values and slopes at both ends.
fn cubic_minimizer(p: &Trial, q: &Trial) -> Option<f64> {
    if !(p.f.is_finite() && q.f.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let alpha = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    alpha.is_finite().then_some(alpha)
}

/// Minimizes `obj` starting from `x`, which holds the final iterate on return.
///
/// `on_iter(k, x, f, grad)` runs after every accepted step. A failed line
/// search moves to the best sufficient-decrease point it saw, if any, and stops.
pub fn lbfgs_run<O, F>(x: &mut [f64], obj: &mut O, cfg: &LbfgsConfig, mut on_iter: F) -> Result<LbfgsReport>
where
    O: Objective + ?Sized,
    F: FnMut(usize, &[f64], f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut f = obj.evaluate(x, &mut grad)?;
    if !f.is_finite() {
        return Err(Error::numerical("lbfgs objective", f));
    }
    let mut evaluations = 1;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut stop = LbfgsStop::MaxIter;
    let mut iterations = 0;

    if norm(&grad) < cfg.grad_tol {
        stop = LbfgsStop::GradTol;
    }
    while stop == LbfgsStop::MaxIter && iterations < cfg.max_iter {
        let mut dir = two_loop(&grad, &pairs);
        let mut slope0 = dot(&grad, &dir);
        if !(slope0 < 0.0) {
            pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope0 = dot(&grad, &dir);
        }
        let alpha0 = if pairs.is_empty() { (1.0 / norm(&grad)).min(1.0) } else { 1.0 };
        let mut search = Search {
            obj: &mut *obj,
            x,
            dir: &dir,
            f0: f,
            slope0,
            cfg,
            evals: 0,
            buf: vec![0.0; n],
        };
        let outcome = search.run(alpha0)?;
        evaluations += search.evals;
        let (trial, failed) = match outcome {
            Outcome::Accepted(t) => (t, false),
            Outcome::Failed(Some(t)) => (t, true),
            Outcome::Failed(None) => {
                stop = LbfgsStop::LineSearch;
                break;
            }
        };

        let s: Vec<f64> = dir.iter().map(|d| trial.alpha * d).collect();
        let y: Vec<f64> = trial.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = trial.f;
        grad = trial.grad;
        iterations += 1;
        if sy > 1e-10 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        on_iter(iterations, x, f, &grad)?;
        if failed {
            stop = LbfgsStop::LineSearch;
        } else if norm(&grad) < cfg.grad_tol {
            stop = LbfgsStop::GradTol;
        }
    }
    Ok(LbfgsReport {
        iterations,
        evaluations,
        value: f,
        grad_norm: norm(&grad),
        stop,
    })
}

/// `−H·g` from the stored curvature pairs.
fn two_loop(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = vec![0.0; pairs.len()];
    for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        for (qj, yj) in q.iter_mut().zip(y) {
            *qj -= a * yj;
        }
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qj in &mut q {
            *qj *= gamma;
        }
    }
    for (i, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * dot(y, &q);
        for (qj, sj) in q.iter_mut().zip(s) {
            *qj += (alphas[i] - b) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64], g: &mut [f64]) -> f64 {
        g.copy_from_slice(x);
        0.5 * dot(x, x)
    }

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn quadratic_in_two_iterations() {
        let mut x = vec![3.0, -4.0, 12.0];
        let cfg = LbfgsConfig { max_iter: 2, ..Default::default() };
        lbfgs_run(&mut x, &mut quadratic, &cfg, |_, _, _, _| Ok(())).unwrap();
        assert!(norm(&x) < 1e-8, "{x:?}");
    }

    #[test]
    fn rosenbrock_converges() {
        let mut x = vec![-1.2, 1.0];
        let cfg = LbfgsConfig { max_iter: 100, ..Default::default() };
        let report = lbfgs_run(&mut x, &mut rosenbrock, &cfg, |_, _, _, _| Ok(())).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?} {report:?}");
    }

    #[test]
    fn zero_gradient_stops_immediately() {
        let mut x = vec![0.0, 0.0];
        let report = lbfgs_run(&mut x, &mut quadratic, &LbfgsConfig::default(), |_, _, _, _| Ok(())).unwrap();
        assert_eq!(report.stop, LbfgsStop::GradTol);
        assert_eq!((report.iterations, x), (0, vec![0.0, 0.0]));
    }

    #[test]
    fn accepted_steps_never_increase_the_objective() {
        let mut x = vec![-1.2, 1.0];
        let mut last = f64::INFINITY;
        let cfg = LbfgsConfig { max_iter: 60, ..Default::default() };
        lbfgs_run(&mut x, &mut rosenbrock, &cfg, |_, _, f, _| {
            assert!(f <= last);
            last = f;
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn invalid_wolfe_constants() {
        let cfg = LbfgsConfig { c1: 0.9, c2: 0.1, ..Default::default() };
        assert!(lbfgs_run(&mut [1.0], &mut quadratic, &cfg, |_, _, _, _| Ok(())).is_err());
    }
}
