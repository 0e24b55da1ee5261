use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AdditiveGaussian, CosineRidge, LogisticProblem, NoiseModel, Objective, Quadratic,
    StochasticOracle,
};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::{RngStream, StreamKey};

/// A problem instance of any supported family, as stored on disk.
///
/// The JSON form is tagged by `"family"`: `"logistic"`, `"quadratic"` or
/// `"nonconvex"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Problem {
    Logistic(LogisticProblem),
    Quadratic(AdditiveGaussian<Quadratic>),
    Nonconvex(AdditiveGaussian<CosineRidge>),
}

impl Problem {
    pub fn family(&self) -> &'static str {
        match self {
            Problem::Logistic(_) => "logistic",
            Problem::Quadratic(_) => "quadratic",
            Problem::Nonconvex(_) => "nonconvex",
        }
    }

    pub fn oracle(&self) -> &dyn StochasticOracle {
        match self {
            Problem::Logistic(p) => p,
            Problem::Quadratic(p) => p,
            Problem::Nonconvex(p) => p,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Writes the instance atomically (temporary file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Logistic($p) => $e,
            Problem::Quadratic($p) => $e,
            Problem::Nonconvex($p) => $e,
        }
    };
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        dispatch!(self, p => p.dim())
    }
    fn value(&self, x: &[f64]) -> f64 {
        dispatch!(self, p => p.value(x))
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, p => p.gradient(x, out))
    }
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        dispatch!(self, p => p.value_and_gradient(x, out))
    }
    fn smoothness(&self) -> f64 {
        dispatch!(self, p => p.smoothness())
    }
    fn pl_modulus(&self) -> Option<f64> {
        dispatch!(self, p => p.pl_modulus())
    }
    fn strong_convexity(&self) -> Option<f64> {
        dispatch!(self, p => p.strong_convexity())
    }
    fn f_star(&self) -> Option<f64> {
        dispatch!(self, p => p.f_star())
    }
    fn minimizer(&self) -> Option<Point> {
        dispatch!(self, p => p.minimizer())
    }
}

impl StochasticOracle for Problem {
    fn variance_bound(&self) -> f64 {
        dispatch!(self, p => p.variance_bound())
    }
    fn noise_model(&self) -> NoiseModel {
        dispatch!(self, p => p.noise_model())
    }
    fn sample_gradient(&self, x: &[f64], worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        dispatch!(self, p => p.sample_gradient(x, worker, rng, out))
    }
    fn batch_mean(&self, x: &[f64], worker: usize, first: StreamKey, count: u64, out: &mut [f64]) {
        dispatch!(self, p => p.batch_mean(x, worker, first, count, out))
    }
}
