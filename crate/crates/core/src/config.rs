//! Experiment configuration: a flat `key = value` file with `[section]`
//! headers. Command-line flags are applied through the same keys.
//!
//! ```text
//! [run]
//! problem = poisson1d
//! method = pinn,cgmpinn
//! seeds = 0,1,2
//!
//! [curriculum]
//! beta = 2.0
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};
use crate::trainer::{Method, OptimizerKind, TrainConfig};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CGMPINN_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    /// Coefficient overrides in the order given.
    pub coeffs: Vec<(String, f64)>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Template for every run; `method` and `seed` are replaced per run.
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<ProblemSpec> {
        let mut spec = ProblemSpec::benchmark(self.problem);
        for (k, v) in &self.coeffs {
            spec.set_coeff(k, *v)?;
        }
        Ok(spec)
    }

    /// Training configurations for the cartesian product of methods and seeds.
    pub fn runs(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &seed in &self.seeds {
                out.push(TrainConfig {
                    method,
                    seed,
                    ..self.train.clone()
                });
            }
        }
        out
    }
}

/// Raw `section.key → value` assignments, later ones winning.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigEntries {
    entries: Vec<(String, String)>,
}

impl ConfigEntries {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::from("run");
        let mut entries = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            entries.set(&format!("{section}.{}", key.trim()), value.trim());
        }
        Ok(entries)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets `section.key`; a bare key is placed in `[run]`.
    pub fn set(&mut self, key: &str, value: &str) {
        let key = if key.contains('.') { key.to_string() } else { format!("run.{key}") };
        self.entries.retain(|(k, _)| *k != key);
        self.entries.push((key, value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Validates every key and builds the experiment.
    pub fn build(&self) -> Result<ExperimentConfig> {
        let mut train = TrainConfig::default();
        let mut problem = None;
        let mut methods = vec![Method::Cgmpinn];
        let mut seeds = vec![0];
        let mut out = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        let mut coeffs = Vec::new();

        for (key, value) in &self.entries {
            let (section, name) = key.split_once('.').expect("keys are qualified");
            let bad = |e: Error| Error::Config(format!("`{key}`: {e}"));
            match (section, name) {
                ("run", "problem") => problem = Some(parse::<ProblemId>(value).map_err(bad)?),
                ("run", "method" | "methods") => methods = list(value).map_err(bad)?,
                ("run", "seed" | "seeds") => seeds = list(value).map_err(bad)?,
                ("run", "out") => out = PathBuf::from(value),
                ("problem", k) if ProblemSpec::COEFF_KEYS.contains(&k) => {
                    coeffs.push((k.to_string(), parse::<f64>(value).map_err(bad)?));
                }
                _ => apply_train_key(&mut train, section, name, value).map_err(|e| match e {
                    Error::Config(m) if m.is_empty() => Error::Config(format!("unknown key `{key}`")),
                    other => bad(other),
                })?,
            }
        }
        let problem = problem.ok_or_else(|| Error::Config("missing required key `problem`".into()))?;
        if methods.is_empty() || seeds.is_empty() {
            return Err(Error::Config("`method` and `seed` lists must be nonempty".into()));
        }
        let cfg = ExperimentConfig {
            problem,
            coeffs,
            methods,
            seeds,
            out,
            train,
        };
        let spec = cfg.spec()?;
        cfg.train.resolved(&spec).validate()?;
        Ok(cfg)
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Config(format!("cannot parse `{value}`: {e}")))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(parse).collect()
}

fn opt_usize(value: &str) -> Result<Option<usize>> {
    if value.trim().is_empty() || value.trim() == "none" {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

fn on_off(value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(Error::Config(format!("expected on or off, got `{other}`"))),
    }
}

/// Applies one training key; an empty `Config` message means "unknown key".
fn apply_train_key(t: &mut TrainConfig, section: &str, name: &str, v: &str) -> Result<()> {
    match (section, name) {
        ("train", "optimizer") => t.optimizer = parse::<OptimizerKind>(v)?,
        ("train", "adam_iters") => t.adam_iters = parse(v)?,
        ("train", "lbfgs_iters") => t.lbfgs_iters = parse(v)?,
        ("train", "adam_lr") => t.adam.lr = parse(v)?,
        ("train", "adam_beta1") => t.adam.beta1 = parse(v)?,
        ("train", "adam_beta2") => t.adam.beta2 = parse(v)?,
        ("train", "adam_eps") => t.adam.eps = parse(v)?,
        ("train", "gd_lr") => t.gd_lr = parse(v)?,
        ("train", "lbfgs_memory") => t.lbfgs.memory = parse(v)?,
        ("train", "wolfe_c1") => t.lbfgs.c1 = parse(v)?,
        ("train", "wolfe_c2") => t.lbfgs.c2 = parse(v)?,
        ("train", "refresh_stop") => t.refresh_stop = opt_usize(v)?,
        ("train", "hidden") => t.hidden = Some(list(v)?),
        ("train", "n_interior") => t.n_interior = opt_usize(v)?,
        ("train", "n_boundary") => t.n_boundary = opt_usize(v)?,
        ("train", "n_initial") => t.n_initial = opt_usize(v)?,
        ("train", "grid_per_axis") => t.grid_per_axis = opt_usize(v)?,
        ("curriculum", "beta") => t.curriculum.beta = parse(v)?,
        ("curriculum", "c_sat") => t.curriculum.c_sat = parse(v)?,
        ("curriculum", "k_max") => t.k_max = opt_usize(v)?,
        ("curriculum", "k_upd") => t.curriculum.k_upd = parse(v)?,
        ("curriculum", "eps") => t.curriculum.eps = parse(v)?,
        ("curriculum", "k_components") => t.curriculum.gmm.k = parse(v)?,
        ("curriculum", "reg_covar") => t.curriculum.gmm.reg_covar = parse(v)?,
        ("curriculum", "gmm_tol") => t.curriculum.gmm.tol = parse(v)?,
        ("curriculum", "gmm_max_iter") => t.curriculum.gmm.max_iter = parse(v)?,
        ("relobralo", "enabled") => t.relobralo = Some(on_off(v)?),
        ("relobralo", "alpha") => t.balancer.alpha = parse(v)?,
        ("relobralo", "rho") => t.balancer.rho = parse(v)?,
        ("relobralo", "kappa") => t.balancer.kappa = parse(v)?,
        ("relobralo", "history") => t.balancer.history = parse(v)?,
        _ => return Err(Error::Config(String::new())),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let text = "# demo\n[run]\nproblem = heat\nmethod = pinn, cgmpinn\nseeds = 0,1,2\n\n[curriculum]\nbeta = 3.5 # inline\n[problem]\ns = 4\n[relobralo]\nenabled = on\n";
        let cfg = ConfigEntries::parse(text).unwrap().build().unwrap();
        assert_eq!(cfg.problem, ProblemId::Heat);
        assert_eq!(cfg.methods, vec![Method::Pinn, Method::Cgmpinn]);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.train.curriculum.beta, 3.5);
        assert_eq!(cfg.train.relobralo, Some(true));
        assert_eq!(cfg.coeffs, vec![("s".to_string(), 4.0)]);
        assert_eq!(cfg.runs().len(), 6);
    }

    #[test]
    fn missing_problem_is_named() {
        let err = ConfigEntries::parse("method = pinn").unwrap().build().unwrap_err();
        assert!(err.to_string().contains("problem"), "{err}");
    }

    #[test]
    fn unknown_and_malformed_keys_are_named() {
        let err = ConfigEntries::parse("problem = heat\n[train]\nadam_itres = 3").unwrap().build().unwrap_err();
        assert!(err.to_string().contains("train.adam_itres"), "{err}");
        let err = ConfigEntries::parse("problem = heat\n[curriculum]\nbeta = two").unwrap().build().unwrap_err();
        assert!(err.to_string().contains("curriculum.beta"), "{err}");
        let err = ConfigEntries::parse("problem = heat\n[problem]\nbeta1 = 2").unwrap().build().unwrap_err();
        assert!(err.to_string().contains("beta1"), "{err}");
        assert!(ConfigEntries::parse("[run\nproblem = heat").is_err());
    }

    #[test]
    fn later_assignments_win() {
        let mut e = ConfigEntries::parse("problem = heat").unwrap();
        e.set("problem", "advdiff");
        e.set("curriculum.k_upd", "50");
        let cfg = e.build().unwrap();
        assert_eq!(cfg.problem, ProblemId::AdvDiff);
        assert_eq!(cfg.train.curriculum.k_upd, 50);
    }
}
