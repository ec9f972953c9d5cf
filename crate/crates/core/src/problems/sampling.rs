use rand::RngExt;

use super::{BoundaryKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Low(usize),
    High(usize),
}

/// Collocation points, each stored flat with `dim` coordinates per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSets {
    pub dim: usize,
    pub interior: Vec<f64>,
    /// Periodic problems store consecutive `(low end, high end)` pairs.
    pub boundary: Vec<f64>,
    pub faces: Vec<Face>,
    pub initial: Vec<f64>,
    pub seed: u64,
}

impl PointSets {
    pub fn n_interior(&self) -> usize {
        self.interior.len() / self.dim
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len() / self.dim
    }

    pub fn n_initial(&self) -> usize {
        self.initial.len() / self.dim
    }

    pub fn interior_point(&self, i: usize) -> &[f64] {
        &self.interior[i * self.dim..(i + 1) * self.dim]
    }

    pub fn boundary_point(&self, i: usize) -> &[f64] {
        &self.boundary[i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial_point(&self, i: usize) -> &[f64] {
        &self.initial[i * self.dim..(i + 1) * self.dim]
    }
}

/// Draws uniform collocation points.
///
/// Boundary faces are visited round-robin with the remaining coordinates
/// uniform. For a periodic problem `n_boundary` counts pairs. Stationary
/// problems get no initial points whatever `n_initial` says.
pub fn sample_points(
    spec: &ProblemSpec,
    n_interior: usize,
    n_boundary: usize,
    n_initial: usize,
    seed: u64,
) -> Result<PointSets> {
    if n_interior == 0 || n_boundary == 0 {
        return Err(Error::Input("interior and boundary counts must be positive".into()));
    }
    let mut rng = stream(seed, Stream::Sampling);
    let axes = spec.box_axes();
    let dim = axes.len();

    let mut interior = Vec::with_capacity(n_interior * dim);
    for _ in 0..n_interior {
        for ax in &axes {
            let v = loop {
                let v: f64 = rng.random_range(ax.lo..ax.hi);
                if v > ax.lo {
                    break v;
                }
            };
            interior.push(v);
        }
    }

    let mut boundary = Vec::new();
    let mut faces = Vec::new();
    match spec.boundary_kind() {
        BoundaryKind::Periodic => {
            let ax = spec.space[0];
            for _ in 0..n_boundary {
                let rest: Vec<f64> = axes[1..].iter().map(|a| rng.random_range(a.lo..=a.hi)).collect();
                for (x, face) in [(ax.lo, Face::Low(0)), (ax.hi, Face::High(0))] {
                    boundary.push(x);
                    boundary.extend_from_slice(&rest);
                    faces.push(face);
                }
            }
        }
        BoundaryKind::Dirichlet => {
            let n_faces = 2 * spec.spatial_dim();
            for k in 0..n_boundary {
                let f = k % n_faces;
                let (axis, face) = if f.is_multiple_of(2) {
                    (f / 2, Face::Low(f / 2))
                } else {
                    (f / 2, Face::High(f / 2))
                };
                for (i, ax) in axes.iter().enumerate() {
                    let v = if i != axis {
                        rng.random_range(ax.lo..=ax.hi)
                    } else if matches!(face, Face::Low(_)) {
                        ax.lo
                    } else {
                        ax.hi
                    };
                    boundary.push(v);
                }
                faces.push(face);
            }
        }
    }

    let mut initial = Vec::new();
    if spec.time_dependent() {
        initial.reserve(n_initial * dim);
        for _ in 0..n_initial {
            for ax in &spec.space {
                initial.push(rng.random_range(ax.lo..=ax.hi));
            }
            initial.push(0.0);
        }
    }

    Ok(PointSets {
        dim,
        interior,
        boundary,
        faces,
        initial,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemId;

    #[test]
    fn poisson1d_boundary_is_both_endpoints() {
        let spec = ProblemSpec::benchmark(ProblemId::Poisson1d);
        let pts = sample_points(&spec, 1500, 2, 0, 7).unwrap();
        assert_eq!(pts.n_interior(), 1500);
        assert_eq!(pts.boundary, vec![0.0, 1.0]);
        assert!(pts.interior.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(pts.initial.is_empty());
    }

    #[test]
    fn advdiff_boundary_is_paired() {
        let spec = ProblemSpec::benchmark(ProblemId::AdvDiff);
        let pts = sample_points(&spec, 3000, 300, 300, 3).unwrap();
        assert_eq!(pts.n_boundary(), 600);
        for k in 0..300 {
            let (a, b) = (pts.boundary_point(2 * k), pts.boundary_point(2 * k + 1));
            assert_eq!((a[0], b[0]), (-1.0, 1.0));
            assert_eq!(a[1], b[1]);
        }
        assert_eq!(pts.n_initial(), 300);
    }

    #[test]
    fn zero_counts_are_rejected() {
        let spec = ProblemSpec::benchmark(ProblemId::Heat);
        assert!(sample_points(&spec, 0, 10, 10, 1).is_err());
        assert!(sample_points(&spec, 10, 0, 10, 1).is_err());
    }
}
