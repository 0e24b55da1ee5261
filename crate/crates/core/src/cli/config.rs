//! Run configuration files (TOML).
//!
//! ```toml
//! algorithm = "cr-psgd"      # cr-psgd | cr-psgd-catalyst | psgd | local-sgd
//! run_id = "logistic-small"
//! seeds = [1, 2, 3]
//!
//! [problem]
//! family = "logistic"        # or "file" with `path = "problem.json"`
//! dim = 50
//! samples_per_worker = 1000
//! reg = 0.001
//! seed = 1
//!
//! [params]
//! workers = 10
//! budget = 10000
//! gamma = 0.1
//!
//! [output]
//! trace = "trace.csv"
//! summary = "summary.json"
//! ```
//!
//! Unknown keys are rejected everywhere. Omitted parameters take the
//! defaults of [`Params::default`]; the resolved values are embedded in
//! every run summary.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::algorithms::Algo;
use crate::error::{Error, Result};
use crate::objectives::{
    generate_logistic_instance, AdditiveGaussian, CosineRidge, FeatureMean, LogisticOptions,
    Problem, Quadratic,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algo,
    #[serde(default = "default_run_id")]
    pub run_id: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: Output,
}

fn default_run_id() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadraticKind {
    /// `A = sqrt(c) I`.
    #[default]
    Isotropic,
    /// Gaussian `A` of the given rank.
    LowRank,
    /// Gaussian perturbation of `2 I`.
    Anisotropic,
}

/// Where the problem instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A file written by `gen`; relative paths resolve against the config
    /// file's directory.
    File { path: PathBuf },
    Logistic {
        dim: usize,
        /// Defaults to `params.workers`.
        #[serde(default)]
        workers: Option<usize>,
        samples_per_worker: usize,
        reg: f64,
        seed: u64,
        #[serde(default)]
        feature_mean: FeatureMean,
    },
    Quadratic {
        #[serde(default)]
        kind: QuadraticKind,
        dim: usize,
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default = "one")]
        curvature: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        sigma2: f64,
    },
    Nonconvex {
        dim: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        frequency: f64,
        #[serde(default = "one")]
        sigma2: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl ProblemSpec {
    /// Builds (or loads) the instance for `workers` workers.
    pub fn build(&self, workers: usize, base_dir: &Path) -> Result<Problem> {
        let problem = match self {
            ProblemSpec::File { path } => Problem::load(&base_dir.join(path))?,
            ProblemSpec::Logistic {
                dim,
                workers: w,
                samples_per_worker,
                reg,
                seed,
                feature_mean,
            } => Problem::Logistic(generate_logistic_instance(
                *dim,
                w.unwrap_or(workers),
                *samples_per_worker,
                *reg,
                *seed,
                LogisticOptions {
                    feature_mean: *feature_mean,
                },
            )?),
            ProblemSpec::Quadratic {
                kind,
                dim,
                rank,
                curvature,
                seed,
                sigma2,
            } => {
                let q = match kind {
                    QuadraticKind::Isotropic => {
                        if !(*curvature > 0.0) {
                            return Err(Error::config("quadratic curvature must be > 0"));
                        }
                        Quadratic::isotropic(*dim, *curvature)
                    }
                    QuadraticKind::LowRank => {
                        Quadratic::random_low_rank(*dim, *dim, rank.unwrap_or(*dim), *seed)?
                    }
                    QuadraticKind::Anisotropic => Quadratic::random_anisotropic(*dim, *seed)?,
                };
                Problem::Quadratic(AdditiveGaussian::new(q, *sigma2)?)
            }
            ProblemSpec::Nonconvex {
                dim,
                amplitude,
                frequency,
                sigma2,
            } => Problem::Nonconvex(AdditiveGaussian::new(
                CosineRidge::new(*dim, *amplitude, *frequency)?,
                *sigma2,
            )?),
        };
        check_workers(&problem, workers)?;
        Ok(problem)
    }
}

/// Data-sharded problems fix the worker count.
pub fn check_workers(problem: &Problem, workers: usize) -> Result<()> {
    if let Problem::Logistic(p) = problem {
        if p.workers() != workers {
            return Err(Error::config(format!(
                "problem is sharded over {} workers but {workers} were requested",
                p.workers()
            )));
        }
    }
    Ok(())
}

/// Algorithm parameters. Keys irrelevant to the chosen algorithm are
/// accepted and ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub workers: usize,
    /// Per-worker sample budget `T`.
    pub budget: u64,
    pub gamma: f64,
    /// Initial batch of the growing schedule.
    pub b1: u64,
    pub rho: f64,
    /// Optional ceiling on the growing batch.
    pub cap: Option<u64>,
    /// Fixed batch of the baselines.
    pub batch: u64,
    /// Local SGD averaging period `H`.
    pub period: u64,
    /// Proximal weight; defaults to `theta_factor * L`.
    pub theta: Option<f64>,
    pub theta_factor: f64,
    /// Every coordinate of the start point.
    pub x1: f64,
    /// OS threads for the worker pool; 0 means one per worker.
    pub threads: usize,
    /// Record every `trace_every`-th round (the last is always recorded).
    pub trace_every: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            workers: 10,
            budget: 10_000,
            gamma: 0.1,
            b1: 2,
            rho: 1.1,
            cap: None,
            batch: 2,
            period: 1,
            theta: None,
            theta_factor: 2.0,
            x1: 0.0,
            threads: 0,
            trace_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub trace: PathBuf,
    pub summary: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            trace: "trace.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

/// Command-line flags that override config values.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub algorithm: Option<Algo>,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub b1: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long)]
    pub batch: Option<u64>,
    #[arg(long)]
    pub period: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub theta_factor: Option<f64>,
    #[arg(long)]
    pub x1: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub trace_every: Option<u64>,
    /// Trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary JSON path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it (problem file, outputs)
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Format {
                path: path.to_path_buf(),
                message: m,
            },
            e => e,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let ProblemSpec::File { path: p } = &mut cfg.problem {
            *p = dir.join(&*p);
        }
        cfg.output.trace = dir.join(&cfg.output.trace);
        cfg.output.summary = dir.join(&cfg.output.summary);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.algorithm => self.algorithm);
        set!(o.run_id => self.run_id);
        set!(o.seeds => self.seeds);
        let p = &mut self.params;
        set!(o.workers => p.workers);
        set!(o.budget => p.budget);
        set!(o.gamma => p.gamma);
        set!(o.b1 => p.b1);
        set!(o.rho => p.rho);
        set!(o.batch => p.batch);
        set!(o.period => p.period);
        set!(o.theta_factor => p.theta_factor);
        set!(o.x1 => p.x1);
        set!(o.threads => p.threads);
        set!(o.trace_every => p.trace_every);
        if o.cap.is_some() {
            p.cap = o.cap;
        }
        if o.theta.is_some() {
            p.theta = o.theta;
        }
        set!(o.trace => self.output.trace);
        set!(o.summary => self.output.summary);
    }

    /// Checks constraints that do not need the problem instance.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            log::warn!(
                "seed list {:?} repeats a seed; repeated runs are identical",
                self.seeds
            );
        }
        let p = &self.params;
        if p.workers == 0 {
            return Err(Error::config("params.workers must be >= 1"));
        }
        if !(p.gamma > 0.0 && p.gamma.is_finite()) {
            return Err(Error::config("params.gamma must be > 0"));
        }
        if p.trace_every == 0 {
            return Err(Error::config("params.trace_every must be >= 1"));
        }
        if !p.x1.is_finite() {
            return Err(Error::config("params.x1 must be finite"));
        }
        if !(p.theta_factor > 1.0) {
            return Err(Error::config("params.theta_factor must be > 1"));
        }
        match self.algorithm {
            Algo::CrPsgd | Algo::CrPsgdCatalyst => {
                crate::schedule::BatchSchedule::with_cap(p.b1, p.rho, p.cap)?;
            }
            Algo::Psgd | Algo::LocalSgd => {
                if p.batch == 0 {
                    return Err(Error::config("params.batch must be >= 1"));
                }
                if p.period == 0 {
                    return Err(Error::config("params.period must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn threads(&self) -> usize {
        if self.params.threads == 0 {
            self.params.workers
        } else {
            self.params.threads
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
algorithm = "psgd"
[problem]
family = "quadratic"
dim = 3
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.algorithm, Algo::Psgd);
        assert_eq!(c.params, Params::default());
        assert_eq!(c.seeds, vec![1]);
        c.validate().unwrap();
        let p = c.problem.build(10, Path::new(".")).unwrap();
        assert_eq!(p.family(), "quadratic");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            format!("{MINIMAL}\n[params]\nwokers = 3\n"),
            format!("{MINIMAL}\nextra = 1\n"),
            MINIMAL.replace("dim = 3", "dim = 3\ncolour = 2"),
            format!("{MINIMAL}\n[output]\ntrace = \"a\"\nplot = \"b\"\n"),
        ] {
            assert!(RunConfig::from_toml(&bad).unwrap_err().is_config(), "{bad}");
        }
        assert!(RunConfig::from_toml(&MINIMAL.replace("psgd", "sgd")).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.apply(&Overrides {
            workers: Some(3),
            seeds: Some(vec![4, 5]),
            theta: Some(9.0),
            ..Default::default()
        });
        assert_eq!(c.params.workers, 3);
        assert_eq!(c.seeds, vec![4, 5]);
        assert_eq!(c.params.theta, Some(9.0));
        assert_eq!(c.params.budget, 10_000);
    }

    #[test]
    fn validation_errors() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.params.batch = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::from_toml(&MINIMAL.replace("\"psgd\"", "\"cr-psgd\"")).unwrap();
        c.params.rho = 1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.seeds.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn logistic_worker_count_must_match() {
        let spec = ProblemSpec::Logistic {
            dim: 3,
            workers: Some(2),
            samples_per_worker: 4,
            reg: 0.1,
            seed: 1,
            feature_mean: FeatureMean::Ones,
        };
        assert!(spec.build(3, Path::new(".")).unwrap_err().is_config());
        assert!(spec.build(2, Path::new(".")).is_ok());
    }
}
