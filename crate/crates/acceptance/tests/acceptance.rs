//! Acceptance criteria, one test each. Every test prints a single
//! `[PASS]`/`[FAIL]` line to stderr (uncaptured) before asserting.
//! Tests hold a shared lock so they run one at a time and timings are meaningful.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use cgmpinn::experiment::write_run;
use cgmpinn::problems::{ProblemId, ProblemSpec};
use cgmpinn::trainer::{train, Method, RunRecord, TrainConfig};
use cgmpinn::verify::{run_suite, Check, Suite};

static SERIAL: Mutex<()> = Mutex::new(());

fn report(criterion: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let line = format!("ACCEPTANCE [{tag}] {criterion}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

/// Runs a suite, prints each check indented, then one line for the criterion.
fn suite_criterion(criterion: &str, suite: Suite, limit_s: f64, select: impl Fn(&Check) -> bool) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let checks = run_suite(suite).expect("suite runs");
    let secs = start.elapsed().as_secs_f64();
    for c in &checks {
        let _ = writeln!(std::io::stderr().lock(), "    {c}");
    }
    let gated: Vec<&Check> = checks.iter().filter(|c| select(c)).collect();
    let failed: Vec<&str> = gated.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let passed = failed.is_empty() && !gated.is_empty() && secs < limit_s;
    let detail = if failed.is_empty() {
        format!("{} checks passed in {secs:.1}s (limit {limit_s:.0}s)", gated.len())
    } else {
        format!("failed: {}; {secs:.1}s", failed.join("; "))
    };
    report(criterion, passed, &detail);
    assert!(passed, "{criterion}: {detail}");
}

#[test]
fn derivative_correctness() {
    suite_criterion("derivative correctness", Suite::Gradients, 60.0, |_| true);
}

#[test]
fn manufactured_solution_residuals() {
    suite_criterion("manufactured-solution residuals", Suite::Manufactured, 60.0, |_| true);
}

#[test]
fn gmm_suite() {
    suite_criterion("gmm suite", Suite::Gmm, 60.0, |_| true);
}

#[test]
fn weight_bounds_and_loss_sandwich() {
    suite_criterion("weight bounds and loss equivalence", Suite::Bounds, 120.0, |_| true);
}

#[test]
fn zero_drift_descent() {
    suite_criterion("zero-drift descent (eta 1e-4)", Suite::Descent, 120.0, |c| {
        !c.name.contains("supplementary")
    });
}

#[test]
fn relobralo_identities() {
    suite_criterion("relobralo identities", Suite::Relobralo, 60.0, |_| true);
}

fn defaults(method: Method, seed: u64) -> TrainConfig {
    TrainConfig::for_method(method, seed)
}

fn run(id: ProblemId, cfg: &TrainConfig) -> RunRecord {
    let rec = train(&ProblemSpec::benchmark(id), cfg).expect("training runs");
    let s = &rec.summary;
    let _ = writeln!(
        std::io::stderr().lock(),
        "    {} {} seed {}: rel_e2 {:.3e}, e2 {:.3e}, e_inf {:.3e}, e_loss {:.3e}, {:.0}s, lbfgs {}, status {}",
        s.problem,
        s.method,
        s.seed,
        s.metrics.rel_e2,
        s.metrics.e2,
        s.metrics.e_inf,
        s.metrics.e_loss,
        s.cpu_s,
        s.lbfgs_stop.as_deref().unwrap_or("-"),
        s.failure.as_deref().unwrap_or("ok")
    );
    rec
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn desk_scale_poisson1d() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let seeds = [0, 1, 2];
    let errs = |m: Method| -> Vec<f64> {
        seeds.iter().map(|&s| run(ProblemId::Poisson1d, &defaults(m, s)).summary.metrics.rel_e2).collect()
    };
    let cgm = errs(Method::Cgmpinn);
    let pinn = errs(Method::Pinn);
    let (mc, mp) = (median(cgm.clone()), median(pinn.clone()));
    let worst = cgm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let passed = worst <= 5e-3 && mc <= mp;
    let list = |v: &[f64]| v.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "cgmpinn rel_e2 [{}] (max {worst:.3e}, limit 5e-3), median {mc:.3e} vs pinn median {mp:.3e} [{}]; {:.0}s for 6 runs",
        list(&cgm),
        list(&pinn),
        start.elapsed().as_secs_f64()
    );
    report("desk-scale poisson1d", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn desk_scale_advdiff() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let rec = run(ProblemId::AdvDiff, &defaults(Method::Cgmpinn, 0));
    let e = rec.summary.metrics.rel_e2;
    let passed = e <= 5e-3 && rec.summary.failure.is_none();
    let detail = format!("cgmpinn seed 0 rel_e2 {e:.3e} (limit 5e-3) in {:.0}s", rec.summary.cpu_s);
    report("desk-scale advdiff", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn ablation_parity() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut notes = Vec::new();
    let mut passed = true;
    for m in [Method::Gmmpinn, Method::Clpinn] {
        let rec = run(ProblemId::Poisson1d, &defaults(m, 0));
        let s = &rec.summary;
        let metrics = [s.metrics.e_loss, s.metrics.e2, s.metrics.rel_e2, s.metrics.e_inf];
        let ok = metrics.iter().all(|v| v.is_finite()) || s.failure.is_some();
        passed &= ok && rec.summary.method == m.name() && !rec.rows.is_empty();
        notes.push(format!(
            "{} rel_e2 {:.3e} ({})",
            m,
            s.metrics.rel_e2,
            s.failure.as_deref().unwrap_or("completed")
        ));
    }
    let detail = notes.join(", ");
    report("ablation parity", passed, &detail);
    assert!(passed, "{detail}");
}

#[test]
fn determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let cfg = TrainConfig { adam_iters: 300, lbfgs_iters: 100, ..defaults(Method::Cgmpinn, 7) };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let bytes: Vec<Vec<u8>> = dirs
        .iter()
        .map(|d| {
            let rec = train(&ProblemSpec::benchmark(ProblemId::Heat), &cfg).unwrap();
            let run = write_run(d.path(), &rec).unwrap();
            std::fs::read(run.join("train.csv")).unwrap()
        })
        .collect();
    let passed = bytes[0] == bytes[1] && !bytes[0].is_empty();
    let detail = format!("heat cgmpinn seed 7, 300 Adam + 100 L-BFGS: train.csv {} bytes, identical = {}", bytes[0].len(), bytes[0] == bytes[1]);
    report("determinism", passed, &detail);
    assert!(passed, "{detail}");
}
