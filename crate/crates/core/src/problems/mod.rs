//! The six manufactured-solution benchmarks.
//!
//! Input coordinates are ordered `[x]` (1-D Poisson), `[x, y]` (2-D Poisson)
//! or `[x, t]` (every time-dependent problem), so time is always the last
//! coordinate when present.

mod exact;
mod metrics;
mod residual;
mod sampling;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use exact::{exact_jet, exact_solution, source_and_data, DataKind};
pub use metrics::{error_metrics, evaluate_metrics, test_grid, ErrorMetrics};
pub use residual::{
    bc_residual, ic_residual, pde_residual, BcResidual, Deriv, IcResidual, JetAccess, PdeOperator,
};
pub use sampling::{sample_points, Face, PointSets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    Poisson1d,
    Poisson2d,
    Heat,
    DampedWave,
    AdvDiff,
    FisherKpp,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] = [
        ProblemId::Poisson1d,
        ProblemId::Poisson2d,
        ProblemId::Heat,
        ProblemId::DampedWave,
        ProblemId::AdvDiff,
        ProblemId::FisherKpp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Poisson1d => "poisson1d",
            ProblemId::Poisson2d => "poisson2d",
            ProblemId::Heat => "heat",
            ProblemId::DampedWave => "damped_wave",
            ProblemId::AdvDiff => "advdiff",
            ProblemId::FisherKpp => "fisher_kpp",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem `{s}`")))
    }
}

/// Equation family together with its physical coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equation {
    /// `u_xx = f`, `u = sin(α₁πx)cos(α₂πx) + tanh(sx)`.
    Poisson1d { alpha1: f64, alpha2: f64, s: f64 },
    /// `u_xx + u_yy = f`, `u = sin(β₁πx)sin(β₂πy) + exp(−x²−y²)`.
    Poisson2d { beta1: f64, beta2: f64 },
    /// `u_t = u_xx + f`, `u = (sin(α₁πx) + tanh(sx)) sin(α₂πt)`.
    Heat { alpha1: f64, alpha2: f64, s: f64 },
    /// `u_tt + 2γu_t − c²u_xx = 0`, `u = e^{−γt} sin(α₁πx) cos(α₂πt)`.
    DampedWave { alpha1: f64, alpha2: f64, gamma: f64, c: f64 },
    /// `u_t + a u_x − ν u_xx = 0` with periodic ends, `u = e^{−νπ²t} sin(π(x − at))`.
    AdvDiff { a: f64, nu: f64 },
    /// `u_t = D u_xx + r u(1−u)`, `u = (1 + exp(λ(x − ct)))⁻²`.
    FisherKpp { d: f64, r: f64, lambda: f64, c: f64 },
}

impl Equation {
    fn with_derived(self) -> Self {
        match self {
            Equation::DampedWave { alpha1, alpha2, gamma, .. } => {
                let c = (gamma * gamma + (alpha2 * std::f64::consts::PI).powi(2)).sqrt()
                    / (alpha1 * std::f64::consts::PI);
                Equation::DampedWave { alpha1, alpha2, gamma, c }
            }
            Equation::FisherKpp { d, r, .. } => Equation::FisherKpp {
                d,
                r,
                lambda: (r / (6.0 * d)).sqrt(),
                c: 5.0 * (d * r / 6.0).sqrt(),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    /// Value and slope matching between the two ends of the single spatial axis.
    Periodic,
}

/// Collocation counts, network widths and test-grid resolution used for a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDefaults {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_initial: usize,
    pub hidden: Vec<usize>,
    /// Points per axis of the tensor test grid.
    pub grid_per_axis: usize,
}

/// A fully parameterised benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub equation: Equation,
    /// One interval per spatial axis.
    pub space: Vec<Interval>,
    /// Final time; `0.0` for stationary problems.
    pub t_final: f64,
}

const TOL_ON_DOMAIN: f64 = 1e-12;

impl ProblemSpec {
    /// The benchmark with its published coefficients.
    pub fn benchmark(id: ProblemId) -> Self {
        let (equation, space, t_final) = match id {
            ProblemId::Poisson1d => (
                Equation::Poisson1d { alpha1: 5.0, alpha2: 3.0, s: 20.0 },
                vec![Interval::new(0.0, 1.0)],
                0.0,
            ),
            ProblemId::Poisson2d => (
                Equation::Poisson2d { beta1: 3.0, beta2: 2.0 },
                vec![Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)],
                0.0,
            ),
            ProblemId::Heat => (
                Equation::Heat { alpha1: 1.0, alpha2: 2.0, s: 10.0 },
                vec![Interval::new(0.0, 1.0)],
                1.0,
            ),
            ProblemId::DampedWave => (
                Equation::DampedWave { alpha1: 1.0, alpha2: 1.0, gamma: 0.1, c: 0.0 },
                vec![Interval::new(0.0, 1.0)],
                1.0,
            ),
            ProblemId::AdvDiff => (
                Equation::AdvDiff { a: 1.0, nu: 1e-2 },
                vec![Interval::new(-1.0, 1.0)],
                1.0,
            ),
            ProblemId::FisherKpp => (
                Equation::FisherKpp { d: 0.25, r: 4.0, lambda: 0.0, c: 0.0 },
                vec![Interval::new(-5.0, 5.0)],
                2.0,
            ),
        };
        Self {
            id,
            equation: equation.with_derived(),
            space,
            t_final,
        }
    }

    pub fn defaults(&self) -> BenchmarkDefaults {
        let (n_interior, n_boundary, n_initial, width, grid) = match self.id {
            ProblemId::Poisson1d => (1500, 2, 0, 50, 200),
            ProblemId::Poisson2d => (2000, 250, 0, 50, 100),
            ProblemId::Heat => (1500, 300, 300, 50, 100),
            ProblemId::DampedWave => (2000, 300, 300, 50, 100),
            ProblemId::AdvDiff => (3000, 300, 300, 50, 100),
            ProblemId::FisherKpp => (8000, 400, 400, 80, 100),
        };
        BenchmarkDefaults {
            n_interior,
            n_boundary,
            n_initial,
            hidden: vec![width; 4],
            grid_per_axis: grid,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        self.space.len()
    }

    pub fn time_dependent(&self) -> bool {
        self.t_final > 0.0
    }

    /// Network input width: spatial axes plus time when present.
    pub fn input_dim(&self) -> usize {
        self.spatial_dim() + usize::from(self.time_dependent())
    }

    pub fn time_index(&self) -> Option<usize> {
        self.time_dependent().then(|| self.spatial_dim())
    }

    pub fn boundary_kind(&self) -> BoundaryKind {
        match self.id {
            ProblemId::AdvDiff => BoundaryKind::Periodic,
            _ => BoundaryKind::Dirichlet,
        }
    }

    pub fn has_initial_velocity(&self) -> bool {
        matches!(self.equation, Equation::DampedWave { .. })
    }

    /// Per-axis intervals of the full space-time box.
    pub fn box_axes(&self) -> Vec<Interval> {
        let mut axes = self.space.clone();
        if self.time_dependent() {
            axes.push(Interval::new(0.0, self.t_final));
        }
        axes
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.input_dim()
            && self
                .box_axes()
                .iter()
                .zip(point)
                .all(|(ax, &v)| v >= ax.lo - TOL_ON_DOMAIN && v <= ax.hi + TOL_ON_DOMAIN)
    }

    pub fn on_spatial_boundary(&self, point: &[f64]) -> bool {
        self.contains(point)
            && self
                .space
                .iter()
                .zip(point)
                .any(|(ax, &v)| (v - ax.lo).abs() <= TOL_ON_DOMAIN || (v - ax.hi).abs() <= TOL_ON_DOMAIN)
    }

    pub fn at_initial_time(&self, point: &[f64]) -> bool {
        match self.time_index() {
            Some(t) => self.contains(point) && point[t].abs() <= TOL_ON_DOMAIN,
            None => false,
        }
    }

    /// Named coefficients, including the derived wave speeds.
    pub fn coeffs(&self) -> Vec<(&'static str, f64)> {
        match self.equation {
            Equation::Poisson1d { alpha1, alpha2, s } | Equation::Heat { alpha1, alpha2, s } => {
                vec![("alpha1", alpha1), ("alpha2", alpha2), ("s", s)]
            }
            Equation::Poisson2d { beta1, beta2 } => vec![("beta1", beta1), ("beta2", beta2)],
            Equation::DampedWave { alpha1, alpha2, gamma, c } => {
                vec![("alpha1", alpha1), ("alpha2", alpha2), ("gamma", gamma), ("c", c)]
            }
            Equation::AdvDiff { a, nu } => vec![("a", a), ("nu", nu)],
            Equation::FisherKpp { d, r, lambda, c } => {
                vec![("D", d), ("r", r), ("lambda", lambda), ("c", c)]
            }
        }
    }

    /// Overrides one of the primary coefficients and recomputes derived ones.
    pub fn set_coeff(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Config(format!("coefficient `{key}` must be finite")));
        }
        let unknown = || Error::Config(format!("coefficient `{key}` does not apply to {}", self.id));
        let eq = &mut self.equation;
        let slot: &mut f64 = match (eq, key) {
            (Equation::Poisson1d { alpha1, .. } | Equation::Heat { alpha1, .. }, "alpha1") => alpha1,
            (Equation::Poisson1d { alpha2, .. } | Equation::Heat { alpha2, .. }, "alpha2") => alpha2,
            (Equation::Poisson1d { s, .. } | Equation::Heat { s, .. }, "s") => s,
            (Equation::Poisson2d { beta1, .. }, "beta1") => beta1,
            (Equation::Poisson2d { beta2, .. }, "beta2") => beta2,
            (Equation::DampedWave { alpha1, .. }, "alpha1") => alpha1,
            (Equation::DampedWave { alpha2, .. }, "alpha2") => alpha2,
            (Equation::DampedWave { gamma, .. }, "gamma") => gamma,
            (Equation::AdvDiff { a, .. }, "a") => a,
            (Equation::AdvDiff { nu, .. }, "nu") => nu,
            (Equation::FisherKpp { d, .. }, "D") => d,
            (Equation::FisherKpp { r, .. }, "r") => r,
            _ => return Err(unknown()),
        };
        *slot = value;
        self.equation = self.equation.with_derived();
        Ok(())
    }

    /// Names accepted by [`ProblemSpec::set_coeff`] across all benchmarks.
    pub const COEFF_KEYS: [&'static str; 10] =
        ["alpha1", "alpha2", "s", "beta1", "beta2", "gamma", "a", "nu", "D", "r"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_names() {
        for id in ProblemId::ALL {
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
        }
        assert!("poisson3d".parse::<ProblemId>().is_err());
    }

    #[test]
    fn derived_coefficients_follow_closed_forms() {
        let wave = ProblemSpec::benchmark(ProblemId::DampedWave);
        let pi = std::f64::consts::PI;
        let c_expected = (0.1f64 * 0.1 + pi * pi).sqrt() / pi;
        assert!(wave.coeffs().contains(&("c", c_expected)));

        let fisher = ProblemSpec::benchmark(ProblemId::FisherKpp);
        let coeffs = fisher.coeffs();
        let get = |k: &str| coeffs.iter().find(|(n, _)| *n == k).unwrap().1;
        assert!((get("lambda") - (4.0f64 / 1.5).sqrt()).abs() < 1e-15);
        assert!((get("c") - 5.0 * (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn overrides_recompute_derived_values() {
        let mut fisher = ProblemSpec::benchmark(ProblemId::FisherKpp);
        fisher.set_coeff("r", 6.0).unwrap();
        let c = fisher.coeffs().iter().find(|(k, _)| *k == "c").unwrap().1;
        assert!((c - 5.0 * (0.25f64 * 6.0 / 6.0).sqrt()).abs() < 1e-15);
        assert!(fisher.set_coeff("s", 1.0).is_err());
        assert!(fisher.set_coeff("r", f64::NAN).is_err());
    }

    #[test]
    fn domains_and_time_flags() {
        for id in ProblemId::ALL {
            let spec = ProblemSpec::benchmark(id);
            assert!(spec.box_axes().iter().all(|a| !a.is_empty()));
            assert_eq!(spec.time_dependent(), spec.t_final > 0.0);
        }
        assert_eq!(ProblemSpec::benchmark(ProblemId::Poisson2d).input_dim(), 2);
        assert_eq!(ProblemSpec::benchmark(ProblemId::Heat).time_index(), Some(1));
        assert_eq!(ProblemSpec::benchmark(ProblemId::Poisson1d).time_index(), None);
    }
}
