//! Per-iteration and per-refresh records with their CSV layouts.

use std::fmt::Write as _;

use crate::gmm::GmmModel;
use crate::problems::ErrorMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Adam,
    Gd,
    Lbfgs,
    /// Evaluation after the last first-order step when no L-BFGS stage follows.
    Final,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Adam => "adam",
            Stage::Gd => "gd",
            Stage::Lbfgs => "lbfgs",
            Stage::Final => "final",
        }
    }
}

/// Training state at `θ_iter`, before that iteration's update.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRow {
    pub iter: usize,
    pub stage: Stage,
    pub loss_total: f64,
    pub loss_pde_w: f64,
    pub loss_pde: f64,
    pub loss_bc: f64,
    /// `0` for stationary problems.
    pub loss_ic: f64,
    pub lambda_pde: f64,
    pub lambda_bc: f64,
    /// `0` for stationary problems.
    pub lambda_ic: f64,
    pub tau: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshRow {
    pub iter: usize,
    pub tau: f64,
    pub model: Option<GmmModel>,
    pub difficulty: Vec<f64>,
    pub d_tilde: Vec<f64>,
    pub w_comp: Vec<f64>,
    /// Weight band; `None` when no mixture is fitted.
    pub bounds: Option<(f64, f64)>,
    pub w_min: f64,
    pub w_max: f64,
    pub w_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: String,
    pub problem: String,
    pub seed: u64,
    pub metrics: ErrorMetrics,
    pub cpu_s: f64,
    pub iterations: usize,
    pub lbfgs_stop: Option<String>,
    /// Reason the run stopped early, if it did.
    pub failure: Option<String>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TRAIN_CSV_HEADER: &str = "iter,stage,loss_total,loss_pde_w,loss_pde_unweighted,loss_bc,loss_ic,lambda_pde,lambda_bc,lambda_ic,tau,grad_norm";

/// Training rows without wall-clock times, so equal runs give equal bytes.
pub fn train_csv(rows: &[IterRow]) -> String {
    let mut out = String::from(TRAIN_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.loss_total,
            r.loss_pde_w,
            r.loss_pde,
            r.loss_bc,
            r.loss_ic,
            r.lambda_pde,
            r.lambda_bc,
            r.lambda_ic,
            r.tau,
            r.grad_norm,
        ];
        let _ = write!(out, "{},{}", r.iter, r.stage.name());
        for f in fields {
            out.push(',');
            out.push_str(&num(f));
        }
        out.push('\n');
    }
    out
}

/// One row per refresh; per-component columns are suffixed with the component index.
pub fn refresh_csv(rows: &[RefreshRow]) -> String {
    let k = rows.iter().map(|r| r.w_comp.len()).max().unwrap_or(0);
    let mut out = String::from("iter,tau");
    for name in ["pi", "mu", "sigma2", "d", "d_tilde", "w_comp"] {
        for m in 0..k {
            let _ = write!(out, ",{name}_{m}");
        }
    }
    out.push_str(",c_minus,c_plus,w_min,w_max,w_mean\n");
    for r in rows {
        let _ = write!(out, "{},{}", r.iter, num(r.tau));
        let cols: [Vec<f64>; 6] = match &r.model {
            Some(m) => [
                m.weights.clone(),
                m.means.clone(),
                m.variances.clone(),
                r.difficulty.clone(),
                r.d_tilde.clone(),
                r.w_comp.clone(),
            ],
            None => Default::default(),
        };
        for col in &cols {
            for m in 0..k {
                out.push(',');
                out.push_str(&col.get(m).map_or_else(String::new, |&v| num(v)));
            }
        }
        let (lo, hi) = r.bounds.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
        let _ = writeln!(out, ",{lo},{hi},{},{},{}", num(r.w_min), num(r.w_max), num(r.w_mean));
    }
    out
}
