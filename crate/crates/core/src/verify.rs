//! Property suites with fixed seeds, shared by the CLI and the acceptance tests.

use std::fmt;
use std::str::FromStr;

use rand::RngExt;

use crate::approximator::{eval_jet, init_network};
use crate::balancing::softmax_weights;
use crate::curriculum::{
    bound_constants, component_difficulty, curriculum_component_weights, normalize_difficulty, sample_weights,
    CurriculumConfig, CurriculumState, Variant,
};
use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, fit_gmm_with_report, responsibilities, GmmConfig, GmmModel};
use crate::optim::norm;
use crate::problems::{
    bc_residual, exact_jet, ic_residual, pde_residual, sample_points, BoundaryKind, ProblemId, ProblemSpec,
};
use crate::rng::{stream, Rng64, Stream};
use crate::trainer::{train, IterRow, Method, OptimizerKind, TrainConfig, TrainingData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Gmm,
    Bounds,
    Descent,
    Manufactured,
    Relobralo,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Gradients,
        Suite::Gmm,
        Suite::Bounds,
        Suite::Descent,
        Suite::Manufactured,
        Suite::Relobralo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::Gmm => "gmm",
            Suite::Bounds => "bounds",
            Suite::Descent => "descent",
            Suite::Manufactured => "manufactured",
            Suite::Relobralo => "relobralo",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown verify suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Gradients => gradients(),
        Suite::Gmm => gmm(),
        Suite::Bounds => bounds(),
        Suite::Descent => descent(),
        Suite::Manufactured => manufactured(),
        Suite::Relobralo => Ok(relobralo()),
    }
}

fn fuzz(tag: u64) -> Rng64 {
    stream(tag, Stream::Fuzz)
}

fn random_point(spec: &ProblemSpec, rng: &mut Rng64) -> Vec<f64> {
    spec.box_axes().iter().map(|a| rng.random_range(a.lo..=a.hi)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(1e-300)
}

/// Input gradient and Hessian of `u` by fourth-order value differences.
pub fn fd_jet(u: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let dim = x.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut q = x.to_vec();
        for &(i, d) in shifts {
            q[i] += d;
        }
        u(&q)
    };
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];
    let f0 = u(x);
    for i in 0..dim {
        let (p1, m1) = (at(&[(i, h)]), at(&[(i, -h)]));
        let (p2, m2) = (at(&[(i, 2.0 * h)]), at(&[(i, -2.0 * h)]));
        grad[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        hess[i * dim + i] = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
        for j in 0..i {
            let mixed = |s: f64| {
                (at(&[(i, s), (j, s)]) - at(&[(i, s), (j, -s)]) - at(&[(i, -s), (j, s)]) + at(&[(i, -s), (j, -s)]))
                    / (4.0 * s * s)
            };
            let v = (4.0 * mixed(h) - mixed(2.0 * h)) / 3.0;
            hess[i * dim + j] = v;
            hess[j * dim + i] = v;
        }
    }
    (grad, hess)
}

fn gradients() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = fuzz(101);
    for id in ProblemId::ALL {
        let spec = ProblemSpec::benchmark(id);
        let sizes: Vec<usize> = std::iter::once(spec.input_dim())
            .chain(spec.defaults().hidden)
            .chain([1])
            .collect();
        let mut worst: f64 = 0.0;
        for case in 0..100 {
            let params = init_network(&sizes, 1000 + case)?;
            let x = random_point(&spec, &mut rng);
            let jet = eval_jet(&params, &x)?;
            let u = |q: &[f64]| eval_jet(&params, q).map(|j| j.value).unwrap_or(f64::NAN);
            let (g, h) = fd_jet(&u, &x, 1e-3);
            worst = worst.max(rel_err(&jet.grad, &g)).max(rel_err(&jet.hess, &h));
        }
        checks.push(Check::new(
            format!("jet vs finite differences ({id}, 100 cases)"),
            worst < 1e-5,
            format!("max relative error {worst:.2e} (tolerance 1e-5)"),
        ));
    }

    for id in ProblemId::ALL {
        let spec = ProblemSpec::benchmark(id);
        let data = TrainingData::sample(&spec, 16, 8, 6, 9)?;
        let params = init_network(&[spec.input_dim(), 6, 6, 1], 21)?;
        let n = data.n_interior();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        let lambdas: Vec<f64> = (0..data.n_terms()).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut grad = vec![0.0; params.len()];
        data.total_loss(&params, &weights, &lambdas, Some(&mut grad))?;
        let h = 1e-5;
        let mut fd = vec![0.0; params.len()];
        for (j, slot) in fd.iter_mut().enumerate() {
            let mut v = params.values().to_vec();
            v[j] += h;
            let up = data.total_loss(&params.with_values(&v)?, &weights, &lambdas, None)?.0;
            v[j] -= 2.0 * h;
            let dn = data.total_loss(&params.with_values(&v)?, &weights, &lambdas, None)?.0;
            *slot = (up - dn) / (2.0 * h);
        }
        let err = rel_err(&grad, &fd);
        checks.push(Check::new(
            format!("total-loss parameter gradient vs finite differences ({id})"),
            err < 1e-4,
            format!("relative error {err:.2e} over {} parameters (tolerance 1e-4)", params.len()),
        ));
    }
    Ok(checks)
}

fn gmm() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = fuzz(202);

    let mut worst_drop: f64 = 0.0;
    for trial in 0..20 {
        let n = rng.random_range(50..400);
        let data: Vec<f64> = (0..n)
            .map(|_| {
                let c = rng.random_range(0..3) as f64;
                c * 3.0 + rng.random_range(-1.0..1.0) * (1.0 + c)
            })
            .collect();
        let cfg = GmmConfig { k: 1 + trial % 5, ..GmmConfig::default() };
        let (_, report) = fit_gmm_with_report(&data, &cfg, trial as u64)?;
        for w in report.log_likelihood.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    checks.push(Check::new(
        "EM log-likelihood is non-decreasing (20 fits)",
        worst_drop <= 1e-10,
        format!("largest decrease {worst_drop:.2e}"),
    ));

    let data: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..5.0)).collect();
    let m = fit_gmm(&data, &GmmConfig { k: 1, ..GmmConfig::default() }, 0)?;
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let var = data.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / data.len() as f64;
    let ok = (m.means[0] - mean).abs() <= 1e-12 * mean.abs().max(1.0)
        && (m.variances[0] - var.max(1e-6)).abs() <= 1e-12 * var
        && m.weights == [1.0];
    checks.push(Check::new(
        "K=1 fit equals sample mean and variance",
        ok,
        format!("mu {:.6} vs {mean:.6}, var {:.6} vs {var:.6}", m.means[0], m.variances[0]),
    ));

    let mut data: Vec<f64> = (0..500).map(|_| -5.0 + rng.random_range(-0.1..0.1)).collect();
    data.extend((0..500).map(|_| 5.0 + rng.random_range(-0.1..0.1)));
    let m = fit_gmm(&data, &GmmConfig { k: 2, ..GmmConfig::default() }, 0)?;
    let mut idx = [0, 1];
    idx.sort_by(|&a, &b| m.means[a].total_cmp(&m.means[b]));
    let ok = (m.means[idx[0]] + 5.0).abs() < 0.05
        && (m.means[idx[1]] - 5.0).abs() < 0.05
        && m.weights.iter().all(|w| (w - 0.5).abs() < 0.02);
    checks.push(Check::new(
        "two-cluster recovery",
        ok,
        format!("means {:?}, weights {:?}", m.means, m.weights),
    ));

    let mut worst: f64 = 0.0;
    let mut negative = false;
    for _ in 0..50 {
        let model = random_model(&mut rng);
        let xs: Vec<f64> = (0..100).map(|_| rng.random_range(-50.0..50.0)).collect();
        let g = responsibilities(&model, &xs);
        for i in 0..g.n() {
            worst = worst.max((g.row(i).iter().sum::<f64>() - 1.0).abs());
            negative |= g.row(i).iter().any(|&v| v < 0.0);
        }
    }
    checks.push(Check::new(
        "responsibilities are row-stochastic",
        worst <= 1e-12 && !negative,
        format!("max |row sum - 1| = {worst:.2e}"),
    ));
    Ok(checks)
}

fn random_model(rng: &mut Rng64) -> GmmModel {
    let k = rng.random_range(1..6);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    GmmModel {
        weights: raw.iter().map(|w| w / total).collect(),
        means: (0..k).map(|_| rng.random_range(-10.0..10.0)).collect(),
        variances: (0..k).map(|_| 10f64.powf(rng.random_range(-6.0..2.0))).collect(),
        reg_covar: 1e-6,
    }
}

/// Residuals with a spread of scales and a few outliers.
fn random_residuals(rng: &mut Rng64, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.random_range(-4.0..3.0));
    (0..n)
        .map(|_| {
            let r = rng.random_range(-1.0..1.0) * scale;
            if rng.random::<f64>() < 0.05 { r * 50.0 } else { r }
        })
        .collect()
}

fn bounds() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = fuzz(303);
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for trial in 0..1000 {
        let n = rng.random_range(20..300);
        let residuals = random_residuals(&mut rng, n);
        let beta = rng.random_range(0.05..6.0);
        let tau = if trial % 10 == 0 { (trial % 20 / 10) as f64 } else { rng.random_range(0.0..=1.0) };
        let cfg = CurriculumConfig { beta, variant: Variant::Cgm, ..CurriculumConfig::default() };
        let model = if trial % 2 == 0 {
            random_model(&mut rng)
        } else {
            let k = rng.random_range(1..6);
            fit_gmm(&residuals, &GmmConfig { k, ..GmmConfig::default() }, trial as u64)?
        };
        let gamma = responsibilities(&model, &residuals);
        let d = normalize_difficulty(&component_difficulty(&residuals, &gamma, cfg.eps), cfg.eps);
        let w_comp = curriculum_component_weights(&d, &model.variances, tau, &cfg);
        let w = sample_weights(Some(&gamma), &w_comp, &residuals, tau, &cfg);
        let (lo, hi) = bound_constants(beta, cfg.eps, n, model.var_min(), model.var_max());
        for &wi in &w {
            worst_excess = worst_excess.max(lo - wi).max(wi - hi);
            if wi < lo - 1e-9 || wi > hi + 1e-9 {
                violations += 1;
            }
        }
    }
    checks.push(Check::new(
        "sample weights stay in [c-, c+] (1000 fuzz trials)",
        violations == 0,
        format!("{violations} violations, worst excess {worst_excess:.2e} (slack 1e-9)"),
    ));

    let spec = ProblemSpec::benchmark(ProblemId::Poisson1d);
    let data = TrainingData::sample(&spec, 200, 2, 0, 4)?;
    let mut bad = 0;
    let mut tightest = f64::INFINITY;
    for net in 0..100 {
        let params = init_network(&[1, 20, 20, 1], 5000 + net)?;
        let fp = data.forward(&params)?;
        let beta = rng.random_range(0.1..5.0);
        let cfg = CurriculumConfig {
            beta,
            k_max: 100,
            variant: Variant::Cgm,
            ..CurriculumConfig::default()
        };
        let mut state = CurriculumState::new(data.n_interior());
        state.refresh(&fp.pde_residuals, rng.random_range(0..100), &cfg, net)?;
        let comps = data.components(&fp, &state.sample_weights);
        let (lo, hi) = state.bounds(&cfg).expect("mixture fitted");
        let ok = lo * comps.pde <= comps.pde_w * (1.0 + 1e-12) && comps.pde_w <= hi * comps.pde * (1.0 + 1e-12);
        tightest = tightest.min((comps.pde_w - lo * comps.pde).min(hi * comps.pde - comps.pde_w) / comps.pde);
        if !ok {
            bad += 1;
        }
    }
    checks.push(Check::new(
        "c- L_PDE <= L_PDE^w <= c+ L_PDE (100 random networks)",
        bad == 0,
        format!("{bad} violations, smallest relative margin {tightest:.2e}"),
    ));
    Ok(checks)
}

/// Gradient descent with weights frozen after the first refresh and no
/// loss balancing, so the objective does not drift.
fn gd_rows(lr: f64) -> Result<(Vec<IterRow>, Option<String>)> {
    let spec = ProblemSpec::benchmark(ProblemId::Poisson1d);
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Gd,
        adam_iters: 200,
        lbfgs_iters: 0,
        gd_lr: lr,
        refresh_stop: Some(0),
        relobralo: Some(false),
        ..TrainConfig::for_method(Method::Cgmpinn, 0)
    };
    let rec = train(&spec, &cfg)?;
    Ok((rec.rows, rec.summary.failure))
}

/// Largest step-to-step increase of the total loss, relative to `max(1, loss)`.
fn worst_rise(rows: &[IterRow]) -> f64 {
    rows.windows(2)
        .map(|w| (w[1].loss_total - w[0].loss_total) / w[0].loss_total.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn descent() -> Result<Vec<Check>> {
    let (rows, failure) = gd_rows(1e-4)?;
    let rise = worst_rise(&rows);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let g0 = first.grad_norm;
    let g_min = rows.iter().map(|r| r.grad_norm).fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        Check::new(
            "gd loss is monotone non-increasing (200 steps, eta 1e-4)",
            rise <= 1e-12 && failure.is_none(),
            format!(
                "largest relative rise {rise:.2e}; loss {:.6e} -> {:.6e}",
                first.loss_total, last.loss_total
            ),
        ),
        Check::new(
            "gd gradient norm decreases overall (eta 1e-4)",
            g_min < g0 && last.grad_norm < g0,
            format!("grad norm {g0:.4e} -> {:.4e}, prefix minimum {g_min:.4e}", last.grad_norm),
        ),
    ];
    // Supplementary: a step that stays below 2/L along the whole trajectory.
    let (rows, failure) = gd_rows(1e-5)?;
    let rise = worst_rise(&rows);
    checks.push(Check::new(
        "gd loss is monotone non-increasing (200 steps, eta 1e-5, supplementary)",
        rise <= 1e-12 && failure.is_none(),
        format!("largest relative rise {rise:.2e}"),
    ));
    Ok(checks)
}

fn manufactured() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = fuzz(404);
    for id in ProblemId::ALL {
        let spec = ProblemSpec::benchmark(id);
        let mut worst = [0.0f64; 3];
        for _ in 0..1000 {
            let x = random_point(&spec, &mut rng);
            worst[0] = worst[0].max(pde_residual(&spec, &exact_jet(&spec, &x), &x)?.abs());
        }
        let pts = sample_points(&spec, 1, 1000, 1000, rng.random())?;
        match spec.boundary_kind() {
            BoundaryKind::Dirichlet => {
                for i in 0..pts.n_boundary() {
                    let p = pts.boundary_point(i);
                    for r in bc_residual(&spec, p, &exact_jet(&spec, p), None)?.rows() {
                        worst[1] = worst[1].max(r.abs());
                    }
                }
            }
            BoundaryKind::Periodic => {
                for k in 0..pts.n_boundary() / 2 {
                    let (a, b) = (pts.boundary_point(2 * k), pts.boundary_point(2 * k + 1));
                    let (ja, jb) = (exact_jet(&spec, a), exact_jet(&spec, b));
                    for r in bc_residual(&spec, a, &ja, Some((b, &jb)))?.rows() {
                        worst[1] = worst[1].max(r.abs());
                    }
                }
            }
        }
        for i in 0..pts.n_initial() {
            let p = pts.initial_point(i);
            for r in ic_residual(&spec, p, &exact_jet(&spec, p))?.rows() {
                worst[2] = worst[2].max(r.abs());
            }
        }
        checks.push(Check::new(
            format!("exact solution residuals ({id}, 1000 points each)"),
            worst.iter().all(|&w| w < 1e-8),
            format!("max |r| pde {:.2e}, bc {:.2e}, ic {:.2e}", worst[0], worst[1], worst[2]),
        ));
    }
    Ok(checks)
}

fn relobralo() -> Vec<Check> {
    let mut rng = fuzz(505);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..1000 {
        let c = rng.random_range(1..6);
        let ratios: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..10.0)).collect();
        let kappa = 10f64.powf(rng.random_range(-2.0..1.0));
        let l = softmax_weights(&ratios, kappa);
        worst_sum = worst_sum.max((l.iter().sum::<f64>() - c as f64).abs());
    }
    let equal = softmax_weights(&[1.7; 3], 0.1);
    let flat = softmax_weights(&[3.0, 0.2, 9.0], 1e9);
    let flat_dev = flat.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let e = std::f64::consts::E;
    let two = softmax_weights(&[2.0, 1.0], 1.0);
    let expect = 2.0 * e / (e + 1.0);
    vec![
        Check::new(
            "lambdas sum to the term count",
            worst_sum <= 1e-9,
            format!("max |sum - C| = {worst_sum:.2e}"),
        ),
        Check::new("equal ratios give unit lambdas", equal.iter().all(|&v| v == 1.0), format!("{equal:?}")),
        Check::new("kappa = 1e9 flattens lambdas", flat_dev < 1e-6, format!("max |lambda - 1| = {flat_dev:.2e}")),
        Check::new(
            "two-term case matches 2e/(e+1)",
            (two[0] - expect).abs() <= 1e-9 && (two[1] - (2.0 - expect)).abs() <= 1e-9,
            format!("lambda = {two:?}"),
        ),
    ]
}
