//! The training loop: residual snapshots, curriculum refreshes, loss
//! balancing and the first-order → L-BFGS schedule.

mod loss;
mod record;

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::approximator::{init_network, ApproximatorParams, Objective};
use crate::balancing::{BalancerConfig, BalancerState};
use crate::curriculum::{CurriculumConfig, CurriculumState, Variant};
use crate::error::{Error, Result};
use crate::optim::{gd_step, lbfgs_run, norm, Adam, AdamConfig, LbfgsConfig};
use crate::problems::{evaluate_metrics, test_grid, ErrorMetrics, ProblemSpec};

pub use loss::{ForwardPass, LossComponents, TrainingData};
pub use record::{refresh_csv, train_csv, IterRow, RefreshRow, RunSummary, Stage, TRAIN_CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Pinn,
    Cgmpinn,
    Gmmpinn,
    Clpinn,
    PinnRelobralo,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pinn,
        Method::Cgmpinn,
        Method::Gmmpinn,
        Method::Clpinn,
        Method::PinnRelobralo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "pinn",
            Method::Cgmpinn => "cgmpinn",
            Method::Gmmpinn => "gmmpinn",
            Method::Clpinn => "clpinn",
            Method::PinnRelobralo => "pinn_relobralo",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Method::Pinn | Method::PinnRelobralo => Variant::Uniform,
            Method::Cgmpinn => Variant::Cgm,
            Method::Gmmpinn => Variant::GmmOnly,
            Method::Clpinn => Variant::ClOnly,
        }
    }

    /// Whether loss balancing is on when not overridden. Only the plain
    /// baseline runs without it.
    pub fn balancer_default(self) -> bool {
        self != Method::Pinn
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
    AdamThenLbfgs,
    Gd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Lbfgs => "lbfgs",
            OptimizerKind::AdamThenLbfgs => "adam_then_lbfgs",
            OptimizerKind::Gd => "gd",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [OptimizerKind::Adam, OptimizerKind::Lbfgs, OptimizerKind::AdamThenLbfgs, OptimizerKind::Gd]
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub optimizer: OptimizerKind,
    /// Length of the first-order stage, Adam or plain gradient descent.
    pub adam_iters: usize,
    pub lbfgs_iters: usize,
    pub adam: AdamConfig,
    pub gd_lr: f64,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
    pub curriculum: CurriculumConfig,
    pub balancer: BalancerConfig,
    /// Overrides the method's balancing default.
    pub relobralo: Option<bool>,
    /// Overrides the `k_max` used by the `τ` ramp; defaults to the first-order stage length.
    pub k_max: Option<usize>,
    /// No curriculum refresh after this iteration.
    pub refresh_stop: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub n_interior: Option<usize>,
    pub n_boundary: Option<usize>,
    pub n_initial: Option<usize>,
    pub grid_per_axis: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Cgmpinn,
            optimizer: OptimizerKind::AdamThenLbfgs,
            adam_iters: 5000,
            lbfgs_iters: 2000,
            adam: AdamConfig::default(),
            gd_lr: 1e-4,
            lbfgs: LbfgsConfig::default(),
            seed: 0,
            curriculum: CurriculumConfig::default(),
            balancer: BalancerConfig::default(),
            relobralo: None,
            k_max: None,
            refresh_stop: None,
            hidden: None,
            n_interior: None,
            n_boundary: None,
            n_initial: None,
            grid_per_axis: None,
        }
    }
}

impl TrainConfig {
    pub fn for_method(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            ..Self::default()
        }
    }

    fn first_order_iters(&self) -> usize {
        match self.optimizer {
            OptimizerKind::Lbfgs => 0,
            _ => self.adam_iters,
        }
    }

    fn lbfgs_stage_iters(&self) -> usize {
        match self.optimizer {
            OptimizerKind::Lbfgs | OptimizerKind::AdamThenLbfgs => self.lbfgs_iters,
            _ => 0,
        }
    }

    /// Fills every benchmark default and method-derived setting.
    pub fn resolved(&self, spec: &ProblemSpec) -> Self {
        let defaults = spec.defaults();
        let mut cfg = self.clone();
        cfg.curriculum.variant = self.method.variant();
        cfg.balancer.enabled = self.relobralo.unwrap_or_else(|| self.method.balancer_default());
        let stage = match self.optimizer {
            OptimizerKind::Lbfgs => self.lbfgs_iters,
            _ => self.adam_iters,
        };
        cfg.curriculum.k_max = self.k_max.unwrap_or(stage).max(1);
        cfg.lbfgs.max_iter = self.lbfgs_iters;
        cfg.hidden.get_or_insert(defaults.hidden);
        cfg.n_interior.get_or_insert(defaults.n_interior);
        cfg.n_boundary.get_or_insert(defaults.n_boundary);
        cfg.n_initial.get_or_insert(defaults.n_initial);
        cfg.grid_per_axis.get_or_insert(defaults.grid_per_axis);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.curriculum.validate()?;
        self.balancer.validate()?;
        self.lbfgs.validate()?;
        let total = self.first_order_iters() + self.lbfgs_stage_iters();
        if total == 0 {
            return Err(Error::Config("at least one training iteration is required".into()));
        }
        if !(self.adam.lr > 0.0) || !(self.gd_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if let Some(h) = &self.hidden {
            if h.is_empty() || h.contains(&0) {
                return Err(Error::Config("hidden layer widths must be positive".into()));
            }
        }
        Ok(())
    }

    /// Layer sizes including input and output.
    pub fn layer_sizes(&self, spec: &ProblemSpec) -> Vec<usize> {
        let hidden = self.hidden.clone().unwrap_or_else(|| spec.defaults().hidden);
        std::iter::once(spec.input_dim()).chain(hidden).chain([1]).collect()
    }

    /// `key = value` lines describing every resolved setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let list = |v: &Option<Vec<usize>>| {
            v.as_ref()
                .map(|h| h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                .unwrap_or_default()
        };
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        put("method", self.method.name().into());
        put("optimizer", self.optimizer.name().into());
        put("seed", self.seed.to_string());
        put("adam_iters", self.adam_iters.to_string());
        put("lbfgs_iters", self.lbfgs_iters.to_string());
        put("adam_lr", format!("{:e}", self.adam.lr));
        put("adam_beta1", format!("{:e}", self.adam.beta1));
        put("adam_beta2", format!("{:e}", self.adam.beta2));
        put("adam_eps", format!("{:e}", self.adam.eps));
        put("gd_lr", format!("{:e}", self.gd_lr));
        put("lbfgs_memory", self.lbfgs.memory.to_string());
        put("wolfe_c1", format!("{:e}", self.lbfgs.c1));
        put("wolfe_c2", format!("{:e}", self.lbfgs.c2));
        put("variant", self.curriculum.variant.name().into());
        put("beta", format!("{:e}", self.curriculum.beta));
        put("c_sat", format!("{:e}", self.curriculum.c_sat));
        put("k_max", self.curriculum.k_max.to_string());
        put("k_upd", self.curriculum.k_upd.to_string());
        put("eps", format!("{:e}", self.curriculum.eps));
        put("k_components", self.curriculum.gmm.k.to_string());
        put("reg_covar", format!("{:e}", self.curriculum.gmm.reg_covar));
        put("gmm_tol", format!("{:e}", self.curriculum.gmm.tol));
        put("gmm_max_iter", self.curriculum.gmm.max_iter.to_string());
        put("relobralo", if self.balancer.enabled { "on" } else { "off" }.into());
        put("relobralo_alpha", format!("{:e}", self.balancer.alpha));
        put("relobralo_rho", format!("{:e}", self.balancer.rho));
        put("relobralo_kappa", format!("{:e}", self.balancer.kappa));
        put("relobralo_history", self.balancer.history.to_string());
        put("refresh_stop", opt(self.refresh_stop));
        put("hidden", list(&self.hidden));
        put("n_interior", opt(self.n_interior));
        put("n_boundary", opt(self.n_boundary));
        put("n_initial", opt(self.n_initial));
        put("grid_per_axis", opt(self.grid_per_axis));
        out
    }
}

/// Everything a training run produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub spec: ProblemSpec,
    pub config: TrainConfig,
    pub rows: Vec<IterRow>,
    pub refreshes: Vec<RefreshRow>,
    pub summary: RunSummary,
    pub params: ApproximatorParams,
    pub test_grid: Vec<f64>,
}

struct Loop<'a> {
    data: &'a TrainingData,
    cfg: &'a TrainConfig,
    params: ApproximatorParams,
    curriculum: CurriculumState,
    balancer: BalancerState,
    lambdas: Vec<f64>,
    rows: Vec<IterRow>,
    refreshes: Vec<RefreshRow>,
    start: Instant,
    lbfgs_stop: Option<String>,
}

impl Loop<'_> {
    fn refresh_due(&self, k: usize) -> bool {
        k.is_multiple_of(self.cfg.curriculum.k_upd) && self.cfg.refresh_stop.is_none_or(|stop| k <= stop)
    }

    fn refresh(&mut self, residuals: &[f64], k: usize) -> Result<()> {
        self.curriculum
            .refresh(residuals, k, &self.cfg.curriculum, self.cfg.seed)?;
        let w = &self.curriculum.sample_weights;
        let n = w.len() as f64;
        self.refreshes.push(RefreshRow {
            iter: k,
            tau: self.curriculum.tau,
            model: self.curriculum.model.clone(),
            difficulty: self.curriculum.difficulty.clone(),
            d_tilde: self.curriculum.d_tilde.clone(),
            w_comp: self.curriculum.component_weights.clone(),
            bounds: self.curriculum.bounds(&self.cfg.curriculum),
            w_min: w.iter().copied().fold(f64::INFINITY, f64::min),
            w_max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            w_mean: w.iter().sum::<f64>() / n,
        });
        Ok(())
    }

    fn push_row(&mut self, k: usize, stage: Stage, comps: &LossComponents, grad_norm: f64) {
        let lam = |c: usize| self.lambdas.get(c).copied().unwrap_or(0.0);
        self.rows.push(IterRow {
            iter: k,
            stage,
            loss_total: comps.total(&self.lambdas),
            loss_pde_w: comps.pde_w,
            loss_pde: comps.pde,
            loss_bc: comps.bc,
            loss_ic: comps.ic.unwrap_or(0.0),
            lambda_pde: lam(0),
            lambda_bc: lam(1),
            lambda_ic: lam(2),
            tau: self.curriculum.tau,
            grad_norm,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }

    /// One first-order iteration at `θ_k`; returns the gradient.
    fn snapshot(&mut self, k: usize, stage: Stage, refresh: bool) -> Result<Vec<f64>> {
        let fp = self.data.forward(&self.params)?;
        if refresh {
            self.refresh(&fp.pde_residuals, k)?;
        }
        let comps = self.data.components(&fp, &self.curriculum.sample_weights);
        if self.cfg.balancer.enabled && stage != Stage::Final && stage != Stage::Lbfgs {
            let terms = comps.terms();
            self.balancer.update_ema(&terms)?;
            self.lambdas = self.balancer.compute_lambdas(&terms);
        }
        let mut grad = vec![0.0; self.params.len()];
        self.data
            .backward(&self.params, &fp, &self.curriculum.sample_weights, &self.lambdas, &mut grad);
        let total = comps.total(&self.lambdas);
        if !total.is_finite() {
            return Err(Error::numerical(format!("total loss at iteration {k}"), total));
        }
        self.push_row(k, stage, &comps, norm(&grad));
        Ok(grad)
    }

    fn first_order(&mut self, iters: usize) -> Result<()> {
        let gd = self.cfg.optimizer == OptimizerKind::Gd;
        let stage = if gd { Stage::Gd } else { Stage::Adam };
        let mut adam = Adam::new(self.params.len(), self.cfg.adam);
        for k in 0..iters {
            let due = self.refresh_due(k);
            let grad = self.snapshot(k, stage, due)?;
            if gd {
                gd_step(self.params.values_mut(), &grad, self.cfg.gd_lr);
            } else {
                adam.step(self.params.values_mut(), &grad)?;
            }
        }
        Ok(())
    }

    fn lbfgs(&mut self, k0: usize) -> Result<()> {
        let refresh = k0 == 0 && self.refresh_due(0);
        self.snapshot(k0, Stage::Lbfgs, refresh)?;
        let cache = RefCell::new(None);
        let mut obj = FrozenObjective {
            data: self.data,
            params: self.params.clone(),
            weights: &self.curriculum.sample_weights,
            lambdas: &self.lambdas,
            cache: &cache,
        };
        let mut x = self.params.values().to_vec();
        let mut rows = Vec::new();
        let tau = self.curriculum.tau;
        let start = self.start;
        let lambdas = self.lambdas.clone();
        let report = lbfgs_run(&mut x, &mut obj, &self.cfg.lbfgs, |j, xj, _, g| {
            let cached = cache.borrow().as_ref().and_then(|(cx, c): &(Vec<f64>, LossComponents)| (cx.as_slice() == xj).then_some(*c));
            let comps = match cached {
                Some(c) => c,
                None => obj_components(self.data, xj, &self.params, &self.curriculum.sample_weights)?,
            };
            let lam = |c: usize| lambdas.get(c).copied().unwrap_or(0.0);
            rows.push(IterRow {
                iter: k0 + j,
                stage: Stage::Lbfgs,
                loss_total: comps.total(&lambdas),
                loss_pde_w: comps.pde_w,
                loss_pde: comps.pde,
                loss_bc: comps.bc,
                loss_ic: comps.ic.unwrap_or(0.0),
                lambda_pde: lam(0),
                lambda_bc: lam(1),
                lambda_ic: lam(2),
                tau,
                grad_norm: norm(g),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            Ok(())
        });
        self.rows.extend(rows);
        self.params.values_mut().copy_from_slice(&x);
        let report = report?;
        self.lbfgs_stop = Some(format!("{:?}", report.stop).to_lowercase());
        Ok(())
    }
}

/// Loss components at raw parameter values.
fn obj_components(
    data: &TrainingData,
    x: &[f64],
    template: &ApproximatorParams,
    weights: &[f64],
) -> Result<LossComponents> {
    let params = template.with_values(x)?;
    let fp = data.forward(&params)?;
    Ok(data.components(&fp, weights))
}

/// Total loss with weights and `λ` held fixed.
struct FrozenObjective<'a> {
    data: &'a TrainingData,
    params: ApproximatorParams,
    weights: &'a [f64],
    lambdas: &'a [f64],
    /// Components at the most recent finite evaluation.
    cache: &'a RefCell<Option<(Vec<f64>, LossComponents)>>,
}

impl Objective for FrozenObjective<'_> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.params.values_mut().copy_from_slice(x);
        grad.iter_mut().for_each(|g| *g = 0.0);
        // A trial point whose residuals overflow reads as an infinitely bad step.
        match self.data.total_loss(&self.params, self.weights, self.lambdas, Some(grad)) {
            Ok((v, comps)) => {
                *self.cache.borrow_mut() = Some((x.to_vec(), comps));
                Ok(v)
            }
            Err(Error::Numerical { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// Samples points, initializes the network and runs the configured schedule.
///
/// A numerical failure mid-run does not discard the run: the rows recorded
/// so far and the last finite parameters are kept and `summary.failure` says why.
pub fn train(spec: &ProblemSpec, config: &TrainConfig) -> Result<RunRecord> {
    let cfg = config.resolved(spec);
    cfg.validate()?;
    let data = TrainingData::sample(
        spec,
        cfg.n_interior.unwrap_or_default(),
        cfg.n_boundary.unwrap_or_default(),
        cfg.n_initial.unwrap_or_default(),
        cfg.seed,
    )?;
    let params = init_network(&cfg.layer_sizes(spec), cfg.seed)?;
    let mut run = Loop {
        data: &data,
        cfg: &cfg,
        params,
        curriculum: CurriculumState::new(data.n_interior()),
        balancer: BalancerState::new(cfg.balancer, cfg.seed),
        lambdas: vec![1.0; data.n_terms()],
        rows: Vec::new(),
        refreshes: Vec::new(),
        start: Instant::now(),
        lbfgs_stop: None,
    };

    let first = cfg.first_order_iters();
    let lbfgs = cfg.lbfgs_stage_iters() > 0;
    let mut last_good = run.params.clone();
    let outcome = (|| -> Result<()> {
        run.first_order(first)?;
        last_good = run.params.clone();
        if lbfgs {
            run.lbfgs(first)?;
        } else {
            run.snapshot(first, Stage::Final, false)?;
        }
        Ok(())
    })();
    let failure = match outcome {
        Ok(()) => None,
        Err(e @ Error::Numerical { .. }) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let params = if failure.is_some() && !run.params.values().iter().all(|v| v.is_finite()) {
        last_good
    } else {
        run.params
    };
    let cpu_s = run.start.elapsed().as_secs_f64();

    let e_loss = run.rows.last().map_or(f64::NAN, |r| r.loss_total);
    let grid = test_grid(spec, cfg.grid_per_axis);
    let metrics = evaluate_metrics(&params, spec, &grid, e_loss).unwrap_or(ErrorMetrics {
        e_loss,
        e2: f64::NAN,
        rel_e2: f64::NAN,
        e_inf: f64::NAN,
    });
    let summary = RunSummary {
        method: cfg.method.name().to_string(),
        problem: spec.id.name().to_string(),
        seed: cfg.seed,
        metrics,
        cpu_s,
        iterations: run.rows.last().map_or(0, |r| r.iter),
        lbfgs_stop: run.lbfgs_stop.clone(),
        failure,
    };
    Ok(RunRecord {
        spec: spec.clone(),
        config: cfg.clone(),
        rows: run.rows,
        refreshes: run.refreshes,
        summary,
        params,
        test_grid: grid,
    })
}
