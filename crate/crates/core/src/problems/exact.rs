//! Closed-form solutions with analytic first and second derivatives, and the
//! manufactured data derived from them.

use std::f64::consts::PI;

use super::{BoundaryKind, Equation, ProblemSpec};
use crate::approximator::Jet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Pde,
    Bc,
    Ic,
    IcVelocity,
}

fn check_point(spec: &ProblemSpec, point: &[f64]) -> Result<()> {
    if point.len() != spec.input_dim() {
        return Err(Error::Input(format!(
            "{} expects {} coordinates, got {}",
            spec.id,
            spec.input_dim(),
            point.len()
        )));
    }
    if !spec.contains(point) {
        return Err(Error::Input(format!("point {point:?} lies outside the {} domain", spec.id)));
    }
    Ok(())
}

/// `u` at a point of the closed space-time domain.
pub fn exact_solution(spec: &ProblemSpec, point: &[f64]) -> Result<f64> {
    check_point(spec, point)?;
    Ok(exact_jet(spec, point).value)
}

/// Value, gradient and Hessian of the exact solution; no domain check.
///
/// Panics if `point` has the wrong length.
pub fn exact_jet(spec: &ProblemSpec, point: &[f64]) -> Jet {
    let dim = spec.input_dim();
    assert_eq!(point.len(), dim, "point dimension");
    let mut jet = Jet::zero(dim);
    match spec.equation {
        Equation::Poisson1d { alpha1, alpha2, s } => {
            let x = point[0];
            let (a, b) = (alpha1 * PI, alpha2 * PI);
            let (sa, ca) = (a * x).sin_cos();
            let (sb, cb) = (b * x).sin_cos();
            let th = (s * x).tanh();
            let sech2 = 1.0 - th * th;
            jet.value = sa * cb + th;
            jet.grad[0] = a * ca * cb - b * sa * sb + s * sech2;
            jet.set_hess(0, 0, -(a * a + b * b) * sa * cb - 2.0 * a * b * ca * sb - 2.0 * s * s * th * sech2);
        }
        Equation::Poisson2d { beta1, beta2 } => {
            let (x, y) = (point[0], point[1]);
            let (p, q) = (beta1 * PI, beta2 * PI);
            let (sp, cp) = (p * x).sin_cos();
            let (sq, cq) = (q * y).sin_cos();
            let e = (-x * x - y * y).exp();
            jet.value = sp * sq + e;
            jet.grad[0] = p * cp * sq - 2.0 * x * e;
            jet.grad[1] = q * sp * cq - 2.0 * y * e;
            jet.set_hess(0, 0, -p * p * sp * sq + (4.0 * x * x - 2.0) * e);
            jet.set_hess(1, 1, -q * q * sp * sq + (4.0 * y * y - 2.0) * e);
            jet.set_hess(0, 1, p * q * cp * cq + 4.0 * x * y * e);
        }
        Equation::Heat { alpha1, alpha2, s } => {
            let (x, t) = (point[0], point[1]);
            let (a, w) = (alpha1 * PI, alpha2 * PI);
            let (sa, ca) = (a * x).sin_cos();
            let th = (s * x).tanh();
            let sech2 = 1.0 - th * th;
            let sx = sa + th;
            let sx1 = a * ca + s * sech2;
            let sx2 = -a * a * sa - 2.0 * s * s * th * sech2;
            let (st, ct) = (w * t).sin_cos();
            separable(&mut jet, [sx, sx1, sx2], [st, w * ct, -w * w * st]);
        }
        Equation::DampedWave { alpha1, alpha2, gamma, .. } => {
            let (x, t) = (point[0], point[1]);
            let (a, w) = (alpha1 * PI, alpha2 * PI);
            let (sa, ca) = (a * x).sin_cos();
            let (sw, cw) = (w * t).sin_cos();
            let decay = (-gamma * t).exp();
            let tt = decay * cw;
            let tt1 = -gamma * tt - w * decay * sw;
            let tt2 = -2.0 * gamma * tt1 - (gamma * gamma + w * w) * tt;
            separable(&mut jet, [sa, a * ca, -a * a * sa], [tt, tt1, tt2]);
        }
        Equation::AdvDiff { a, nu } => {
            let (x, t) = (point[0], point[1]);
            let e = (-nu * PI * PI * t).exp();
            let (sn, cs) = (PI * (x - a * t)).sin_cos();
            let (es, ec) = (e * sn, e * cs);
            let pi2 = PI * PI;
            jet.value = es;
            jet.grad[0] = PI * ec;
            jet.grad[1] = -nu * pi2 * es - a * PI * ec;
            jet.set_hess(0, 0, -pi2 * es);
            jet.set_hess(0, 1, -nu * pi2 * PI * ec + a * pi2 * es);
            jet.set_hess(1, 1, (nu * nu * pi2 * pi2 - a * a * pi2) * es + 2.0 * a * nu * pi2 * PI * ec);
        }
        Equation::FisherKpp { lambda, c, .. } => {
            let (x, t) = (point[0], point[1]);
            let e = (lambda * (x - c * t)).exp();
            let q = 1.0 / (1.0 + e);
            let u = q * q;
            let u1 = -2.0 * e * q * u;
            let u2 = 2.0 * e * (2.0 * e - 1.0) * u * u;
            jet.value = u;
            jet.grad[0] = lambda * u1;
            jet.grad[1] = -c * lambda * u1;
            jet.set_hess(0, 0, lambda * lambda * u2);
            jet.set_hess(0, 1, -c * lambda * lambda * u2);
            jet.set_hess(1, 1, c * c * lambda * lambda * u2);
        }
    }
    jet
}

/// Fills the jet of `X(x)·T(t)` from `[X, X', X'']` and `[T, T', T'']`.
fn separable(jet: &mut Jet, xs: [f64; 3], ts: [f64; 3]) {
    jet.value = xs[0] * ts[0];
    jet.grad[0] = xs[1] * ts[0];
    jet.grad[1] = xs[0] * ts[1];
    jet.set_hess(0, 0, xs[2] * ts[0]);
    jet.set_hess(0, 1, xs[1] * ts[1]);
    jet.set_hess(1, 1, xs[0] * ts[2]);
}

/// The forcing `f`, or the boundary/initial data `g`, `u₀`, `v₀`.
///
/// Sources are written out independently of [`exact_jet`] so the residual
/// check exercises two separate derivations. A periodic boundary has no data;
/// its target gap is `0`.
pub fn source_and_data(spec: &ProblemSpec, point: &[f64], kind: DataKind) -> Result<f64> {
    check_point(spec, point)?;
    match kind {
        DataKind::Pde => Ok(source(spec, point)),
        DataKind::Bc => {
            if !spec.on_spatial_boundary(point) {
                return Err(Error::Input(format!("point {point:?} is not on the {} boundary", spec.id)));
            }
            match spec.boundary_kind() {
                BoundaryKind::Dirichlet => Ok(exact_jet(spec, point).value),
                BoundaryKind::Periodic => Ok(0.0),
            }
        }
        DataKind::Ic => {
            if !spec.time_dependent() {
                return Err(Error::Input(format!("{} has no initial condition", spec.id)));
            }
            if !spec.at_initial_time(point) {
                return Err(Error::Input(format!("point {point:?} is not at t = 0")));
            }
            Ok(exact_jet(spec, point).value)
        }
        DataKind::IcVelocity => match spec.equation {
            Equation::DampedWave { alpha1, gamma, .. } => {
                if !spec.at_initial_time(point) {
                    return Err(Error::Input(format!("point {point:?} is not at t = 0")));
                }
                Ok(-gamma * (alpha1 * PI * point[0]).sin())
            }
            _ => Err(Error::Input(format!("{} has no initial velocity", spec.id))),
        },
    }
}

fn source(spec: &ProblemSpec, point: &[f64]) -> f64 {
    match spec.equation {
        Equation::Poisson1d { alpha1, alpha2, s } => {
            let x = point[0];
            let (p, m) = ((alpha1 + alpha2) * PI, (alpha1 - alpha2) * PI);
            let sech = 1.0 / (s * x).cosh();
            -0.5 * (p * p * (p * x).sin() + m * m * (m * x).sin())
                - 2.0 * s * s * (s * x).tanh() * sech * sech
        }
        Equation::Poisson2d { beta1, beta2 } => {
            let (x, y) = (point[0], point[1]);
            let (p, q) = (beta1 * PI, beta2 * PI);
            -(p * p + q * q) * (p * x).sin() * (q * y).sin()
                + 4.0 * (x * x + y * y - 1.0) * (-x * x - y * y).exp()
        }
        Equation::Heat { alpha1, alpha2, s } => {
            let (x, t) = (point[0], point[1]);
            let (a, w) = (alpha1 * PI, alpha2 * PI);
            let th = (s * x).tanh();
            let sech = 1.0 / (s * x).cosh();
            ((a * x).sin() + th) * w * (w * t).cos()
                + (a * a * (a * x).sin() + 2.0 * s * s * th * sech * sech) * (w * t).sin()
        }
        Equation::DampedWave { .. } | Equation::AdvDiff { .. } | Equation::FisherKpp { .. } => 0.0,
    }
}
