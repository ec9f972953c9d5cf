//! Runs experiments and writes each run's files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::approximator::{write_checkpoint, BatchJets, Channels};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::problems::exact_jet;
use crate::trainer::{refresh_csv, train, train_csv, RunRecord, RunSummary};

/// `<out>/<problem>_<method>_<seed>`.
pub fn run_dir(out: &Path, record: &RunRecord) -> PathBuf {
    out.join(format!(
        "{}_{}_{}",
        record.summary.problem, record.summary.method, record.summary.seed
    ))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Summary metrics plus the resolved configuration and problem coefficients.
pub fn summary_text(record: &RunRecord) -> String {
    let s = &record.summary;
    let m = &s.metrics;
    let mut out = String::from("[summary]\n");
    let _ = writeln!(out, "method = {}", s.method);
    let _ = writeln!(out, "problem = {}", s.problem);
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "e_loss = {}", num(m.e_loss));
    let _ = writeln!(out, "e2 = {}", num(m.e2));
    let _ = writeln!(out, "rel_e2 = {}", num(m.rel_e2));
    let _ = writeln!(out, "e_inf = {}", num(m.e_inf));
    let _ = writeln!(out, "cpu_s = {:.3}", s.cpu_s);
    let _ = writeln!(out, "iterations = {}", s.iterations);
    let _ = writeln!(out, "lbfgs_stop = {}", s.lbfgs_stop.as_deref().unwrap_or("none"));
    let _ = writeln!(out, "status = {}", s.failure.as_deref().map_or("ok".to_string(), |f| format!("aborted: {f}")));
    out.push_str("\n[config]\n");
    for (k, v) in record.config.echo() {
        let _ = writeln!(out, "{k} = {v}");
    }
    out.push_str("\n[problem]\n");
    for (k, v) in record.spec.coeffs() {
        let _ = writeln!(out, "{k} = {}", num(v));
    }
    out
}

/// Test-grid coordinates with exact and predicted values.
pub fn grid_csv(record: &RunRecord) -> Result<String> {
    let dim = record.spec.input_dim();
    let names: &[&str] = match (dim, record.spec.time_dependent()) {
        (1, _) => &["x"],
        (_, false) => &["x", "y"],
        _ => &["x", "t"],
    };
    let batch = BatchJets::forward(&record.params, &record.test_grid, &Channels::value_only())?;
    let mut out = names.join(",");
    out.push_str(",u_exact,u_pred,abs_err\n");
    for (p, coords) in record.test_grid.chunks_exact(dim).enumerate() {
        let u = exact_jet(&record.spec, coords).value;
        let v = batch.value(p);
        for c in coords {
            out.push_str(&num(*c));
            out.push(',');
        }
        let _ = writeln!(out, "{},{},{}", num(u), num(v), num((u - v).abs()));
    }
    Ok(out)
}

/// Writes the five per-run files and returns the directory.
pub fn write_run(out: &Path, record: &RunRecord) -> Result<PathBuf> {
    let dir = run_dir(out, record);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("train.csv"), &train_csv(&record.rows))?;
    write(&dir.join("refresh.csv"), &refresh_csv(&record.refreshes))?;
    write(&dir.join("summary.cfg"), &summary_text(record))?;
    write_checkpoint(&dir.join("checkpoint.txt"), &record.params)?;
    write(&dir.join("grid.csv"), &grid_csv(record)?)?;
    Ok(dir)
}

/// Runs every (method, seed) pair in order, writing outputs as each finishes.
pub fn run_experiment(cfg: &ExperimentConfig, mut on_done: impl FnMut(&RunRecord, &Path)) -> Result<Vec<RunSummary>> {
    let spec = cfg.spec()?;
    let mut summaries = Vec::new();
    for run in cfg.runs() {
        let record = train(&spec, &run)?;
        let dir = write_run(&cfg.out, &record)?;
        on_done(&record, &dir);
        summaries.push(record.summary);
    }
    Ok(summaries)
}

/// Fixed-width table of run summaries.
pub fn summary_table(rows: &[RunSummary]) -> String {
    let mut out = format!(
        "{:<16} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9}  status\n",
        "method", "seed", "e_loss", "e2", "rel_e2", "e_inf", "cpu_s"
    );
    for s in rows {
        let m = &s.metrics;
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9.1}  {}",
            s.method,
            s.seed,
            m.e_loss,
            m.e2,
            m.rel_e2,
            m.e_inf,
            s.cpu_s,
            if s.failure.is_some() { "aborted" } else { "ok" }
        );
    }
    out
}
