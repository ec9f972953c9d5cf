//! Residual operators for the PDE, boundary and initial conditions.

use super::exact::{source_and_data, DataKind};
use super::{BoundaryKind, Equation, ProblemSpec};
use crate::approximator::{BatchJets, Channels, Jet};
use crate::error::{Error, Result};

/// Read access to a value/derivative bundle at one point.
pub trait JetAccess {
    fn value(&self) -> f64;
    fn first(&self, i: usize) -> f64;
    fn second(&self, i: usize, j: usize) -> f64;
}

impl JetAccess for Jet {
    fn value(&self) -> f64 {
        self.value
    }

    fn first(&self, i: usize) -> f64 {
        self.grad[i]
    }

    fn second(&self, i: usize, j: usize) -> f64 {
        self.hess(i, j)
    }
}

/// One point of a batch evaluation.
impl JetAccess for (&BatchJets, usize) {
    fn value(&self) -> f64 {
        self.0.value(self.1)
    }

    fn first(&self, i: usize) -> f64 {
        self.0.first(self.1, i)
    }

    fn second(&self, i: usize, j: usize) -> f64 {
        self.0.second(self.1, i, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    Value,
    First(usize),
    Second(usize, usize),
}

impl Deriv {
    fn read<J: JetAccess + ?Sized>(self, jet: &J) -> f64 {
        match self {
            Deriv::Value => jet.value(),
            Deriv::First(i) => jet.first(i),
            Deriv::Second(i, j) => jet.second(i, j),
        }
    }
}

/// `D[u] = Σ cₖ ∂ₖu − r·u(1−u)`, the reaction term present only for Fisher-KPP.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeOperator {
    pub terms: Vec<(Deriv, f64)>,
    pub logistic_rate: Option<f64>,
}

impl PdeOperator {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        use Deriv::{First, Second};
        let (terms, logistic_rate) = match spec.equation {
            Equation::Poisson1d { .. } => (vec![(Second(0, 0), 1.0)], None),
            Equation::Poisson2d { .. } => (vec![(Second(0, 0), 1.0), (Second(1, 1), 1.0)], None),
            Equation::Heat { .. } => (vec![(First(1), 1.0), (Second(0, 0), -1.0)], None),
            Equation::DampedWave { gamma, c, .. } => (
                vec![(Second(1, 1), 1.0), (First(1), 2.0 * gamma), (Second(0, 0), -c * c)],
                None,
            ),
            Equation::AdvDiff { a, nu } => {
                (vec![(First(1), 1.0), (First(0), a), (Second(0, 0), -nu)], None)
            }
            Equation::FisherKpp { d, r, .. } => {
                (vec![(First(1), 1.0), (Second(0, 0), -d)], Some(r))
            }
        };
        Self { terms, logistic_rate }
    }

    /// Derivative channels the operator reads.
    pub fn channels(&self) -> Channels {
        let pairs: Vec<_> = self
            .terms
            .iter()
            .filter_map(|(d, _)| match *d {
                Deriv::Second(i, j) => Some((i, j)),
                _ => None,
            })
            .collect();
        Channels::with_second(&pairs)
    }

    pub fn apply<J: JetAccess + ?Sized>(&self, jet: &J) -> f64 {
        let linear: f64 = self.terms.iter().map(|&(d, c)| c * d.read(jet)).sum();
        match self.logistic_rate {
            Some(r) => {
                let u = jet.value();
                linear - r * u * (1.0 - u)
            }
            None => linear,
        }
    }

    /// `∂D[u]/∂u` through the reaction term (zero for linear operators).
    pub fn value_sensitivity(&self, u: f64) -> f64 {
        self.logistic_rate.map_or(0.0, |r| -r * (1.0 - 2.0 * u))
    }
}

/// `D[û] − f` at `point`.
pub fn pde_residual<J: JetAccess + ?Sized>(spec: &ProblemSpec, jet: &J, point: &[f64]) -> Result<f64> {
    let f = source_and_data(spec, point, DataKind::Pde)?;
    Ok(PdeOperator::for_spec(spec).apply(jet) - f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcResidual {
    Dirichlet(f64),
    /// `û(lo) − û(hi)` and `û_x(lo) − û_x(hi)` at a shared time.
    Periodic { value_gap: f64, slope_gap: f64 },
}

impl BcResidual {
    pub fn rows(&self) -> Vec<f64> {
        match *self {
            BcResidual::Dirichlet(r) => vec![r],
            BcResidual::Periodic { value_gap, slope_gap } => vec![value_gap, slope_gap],
        }
    }
}

/// Boundary mismatch at `point`. Periodic problems also need the jet at the
/// opposite end with the same time; the gap is always taken low end minus high end.
pub fn bc_residual<J: JetAccess + ?Sized>(
    spec: &ProblemSpec,
    point: &[f64],
    jet: &J,
    partner: Option<(&[f64], &J)>,
) -> Result<BcResidual> {
    let g = source_and_data(spec, point, DataKind::Bc)?;
    match spec.boundary_kind() {
        BoundaryKind::Dirichlet => Ok(BcResidual::Dirichlet(jet.value() - g)),
        BoundaryKind::Periodic => {
            let (other, other_jet) = partner.ok_or_else(|| {
                Error::Input("periodic boundary residual needs the paired point".into())
            })?;
            source_and_data(spec, other, DataKind::Bc)?;
            let ax = spec.space[0];
            let t_idx = spec.time_index();
            let same_time = t_idx.is_none_or(|t| (point[t] - other[t]).abs() <= 1e-12);
            let at_lo = |q: &[f64]| (q[0] - ax.lo).abs() <= 1e-12;
            let at_hi = |q: &[f64]| (q[0] - ax.hi).abs() <= 1e-12;
            let (lo, hi) = if at_lo(point) && at_hi(other) {
                (jet, other_jet)
            } else if at_hi(point) && at_lo(other) {
                (other_jet, jet)
            } else {
                return Err(Error::Input("periodic pair must span both ends of the axis".into()));
            };
            if !same_time {
                return Err(Error::Input("periodic pair must share its time coordinate".into()));
            }
            Ok(BcResidual::Periodic {
                value_gap: lo.value() - hi.value(),
                slope_gap: lo.first(0) - hi.first(0),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcResidual {
    pub value: f64,
    /// `û_t − v₀`, damped wave only.
    pub velocity: Option<f64>,
}

impl IcResidual {
    pub fn rows(&self) -> Vec<f64> {
        std::iter::once(self.value).chain(self.velocity).collect()
    }
}

pub fn ic_residual<J: JetAccess + ?Sized>(spec: &ProblemSpec, point: &[f64], jet: &J) -> Result<IcResidual> {
    let u0 = source_and_data(spec, point, DataKind::Ic)?;
    let velocity = if spec.has_initial_velocity() {
        let t = spec.time_index().expect("wave problems are time dependent");
        Some(jet.first(t) - source_and_data(spec, point, DataKind::IcVelocity)?)
    } else {
        None
    };
    Ok(IcResidual {
        value: jet.value() - u0,
        velocity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{exact_jet, ProblemId};

    #[test]
    fn zero_network_gives_negative_source() {
        let spec = ProblemSpec::benchmark(ProblemId::Poisson1d);
        for x in [0.1, 0.5, 0.93] {
            let r = pde_residual(&spec, &Jet::zero(1), &[x]).unwrap();
            let f = source_and_data(&spec, &[x], DataKind::Pde).unwrap();
            assert_eq!(r, -f);
        }
    }

    #[test]
    fn fisher_carrying_capacity_is_a_fixed_point() {
        let spec = ProblemSpec::benchmark(ProblemId::FisherKpp);
        let mut jet = Jet::zero(2);
        jet.value = 1.0;
        assert_eq!(pde_residual(&spec, &jet, &[0.3, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn periodic_gap_of_even_surrogate() {
        let spec = ProblemSpec::benchmark(ProblemId::AdvDiff);
        let surrogate = |x: f64| {
            let mut j = Jet::zero(2);
            j.value = x * x;
            j.grad[0] = 2.0 * x;
            j.set_hess(0, 0, 2.0);
            j
        };
        let (lo, hi) = (surrogate(-1.0), surrogate(1.0));
        let r = bc_residual(&spec, &[-1.0, 0.4], &lo, Some((&[1.0, 0.4][..], &hi))).unwrap();
        assert_eq!(r, BcResidual::Periodic { value_gap: 0.0, slope_gap: -4.0 });
        let swapped = bc_residual(&spec, &[1.0, 0.4], &hi, Some((&[-1.0, 0.4][..], &lo))).unwrap();
        assert_eq!(swapped, r);
        assert!(bc_residual(&spec, &[-1.0, 0.4], &lo, None).is_err());
        assert!(bc_residual(&spec, &[-1.0, 0.4], &lo, Some((&[1.0, 0.5][..], &hi))).is_err());
        assert!(bc_residual(&spec, &[-1.0, 0.4], &lo, Some((&[-1.0, 0.4][..], &lo))).is_err());
    }

    #[test]
    fn wave_velocity_residual_of_static_network() {
        let spec = ProblemSpec::benchmark(ProblemId::DampedWave);
        let x = 0.37;
        let ic = ic_residual(&spec, &[x, 0.0], &Jet::zero(2)).unwrap();
        let v0 = -0.1 * (std::f64::consts::PI * x).sin();
        assert_eq!(ic.velocity, Some(-v0));
        assert_eq!(ic.rows().len(), 2);
    }

    #[test]
    fn exact_jets_satisfy_boundary_and_initial_conditions() {
        for id in ProblemId::ALL {
            let spec = ProblemSpec::benchmark(id);
            let axes = spec.box_axes();
            let mut p: Vec<f64> = axes.iter().map(|a| a.lo + 0.41 * a.len()).collect();
            if spec.boundary_kind() == BoundaryKind::Dirichlet {
                p[0] = axes[0].hi;
                let r = bc_residual(&spec, &p, &exact_jet(&spec, &p), None).unwrap();
                assert!(r.rows()[0].abs() < 1e-14, "{id}");
            }
            if let Some(t) = spec.time_index() {
                p[t] = 0.0;
                p[0] = axes[0].lo + 0.3 * axes[0].len();
                let ic = ic_residual(&spec, &p, &exact_jet(&spec, &p)).unwrap();
                assert!(ic.rows().iter().all(|r| r.abs() < 1e-14), "{id}");
            }
        }
    }

    #[test]
    fn operator_channels_cover_terms() {
        let spec = ProblemSpec::benchmark(ProblemId::DampedWave);
        let op = PdeOperator::for_spec(&spec);
        let ch = op.channels();
        assert!(ch.has_first());
        assert_eq!(ch.second_pairs(), &[(0, 0), (1, 1)]);
    }
}
