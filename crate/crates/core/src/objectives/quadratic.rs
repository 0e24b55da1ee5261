use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::point::{norm_sq, Point};
use crate::rng::RngStream;

/// Dense row-major matrix, as stored in problem files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument(
                "matrix must have at least one row and column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Singular values below this fraction of the largest are treated as zero.
fn rank_threshold(a: &Matrix, s_max: f64) -> f64 {
    a.rows.max(a.cols) as f64 * f64::EPSILON * s_max
}

/// P-L modulus of `f(x) = 0.5 |Ax - b|^2`: the squared smallest nonzero
/// singular value of `A`. Valid even when `A` is rank deficient.
pub fn compute_pl_modulus(a: &Matrix) -> Result<f64> {
    let svd = a.to_nalgebra().svd(false, false);
    let s_max = svd.singular_values.max();
    if s_max == 0.0 || !s_max.is_finite() {
        return Err(Error::Degenerate("matrix A is zero".into()));
    }
    let tol = rank_threshold(a, s_max);
    let s_min = svd
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > tol)
        .fold(f64::INFINITY, f64::min);
    Ok(s_min * s_min)
}

/// Least squares objective `f(x) = 0.5 |Ax - b|^2`.
///
/// `L = s_max(A)^2` and `mu = s_min+(A)^2`. The minimum and a minimizer
/// (the minimum-norm one) come from the pseudo-inverse.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "QuadraticRepr", into = "QuadraticRepr")]
pub struct Quadratic {
    a: Matrix,
    b: Vec<f64>,
    smoothness: f64,
    pl_mu: f64,
    rank: usize,
    f_star: f64,
    minimizer: Vec<f64>,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticRepr {
    a: Matrix,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    // Informational on write; recomputed on read.
    #[serde(default)]
    smoothness: Option<f64>,
    #[serde(default)]
    pl_mu: Option<f64>,
    #[serde(default)]
    rank: Option<usize>,
    #[serde(default)]
    f_star: Option<f64>,
}

impl TryFrom<QuadraticRepr> for Quadratic {
    type Error = Error;

    fn try_from(r: QuadraticRepr) -> Result<Self> {
        let mut q = Quadratic::new(r.a, r.b)?;
        q.seed = r.seed;
        Ok(q)
    }
}

impl From<Quadratic> for QuadraticRepr {
    fn from(q: Quadratic) -> Self {
        QuadraticRepr {
            smoothness: Some(q.smoothness),
            pl_mu: Some(q.pl_mu),
            rank: Some(q.rank),
            f_star: Some(q.f_star),
            seed: q.seed,
            a: q.a,
            b: q.b,
        }
    }
}

impl Quadratic {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        let a = Matrix::new(a.rows, a.cols, a.data)?;
        if b.len() != a.rows {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                got: b.len(),
            });
        }
        if a.data.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Argument("quadratic data must be finite".into()));
        }
        let pl_mu = compute_pl_modulus(&a)?;

        let svd = a.to_nalgebra().svd(true, true);
        let s_max = svd.singular_values.max();
        let tol = rank_threshold(&a, s_max);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let bvec = nalgebra::DVector::from_column_slice(&b);
        let x_star = svd
            .solve(&bvec, tol)
            .map_err(|e| Error::Degenerate(format!("pseudo-inverse failed: {e}")))?;
        let minimizer: Vec<f64> = x_star.iter().copied().collect();

        let mut q = Quadratic {
            a,
            b,
            smoothness: s_max * s_max,
            pl_mu,
            rank,
            f_star: 0.0,
            minimizer,
            seed: None,
        };
        q.f_star = q.value(&q.minimizer);
        Ok(q)
    }

    /// `f(x) = 0.5 c |x|^2`.
    pub fn isotropic(dim: usize, curvature: f64) -> Self {
        let mut a = Matrix::identity(dim);
        let s = curvature.sqrt();
        a.data.iter_mut().for_each(|v| *v *= s);
        Quadratic::new(a, vec![0.0; dim]).expect("isotropic quadratic with positive curvature")
    }

    /// `A = G1 G2` with `G1: rows x rank`, `G2: rank x cols` standard normal,
    /// so `A` has the requested rank almost surely. `b` is standard normal.
    pub fn random_low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<Self> {
        if rank == 0 || rank > rows.min(cols) {
            return Err(Error::Argument(format!(
                "rank {rank} must be in 1..={}",
                rows.min(cols)
            )));
        }
        let mut rng = RngStream::labeled(seed, "quadratic");
        let mut normal =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let g1 = normal(rows * rank);
        let g2 = normal(rank * cols);
        let b = normal(rows);
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for k in 0..rank {
                let u = g1[i * rank + k];
                for j in 0..cols {
                    data[i * cols + j] += u * g2[k * cols + j];
                }
            }
        }
        let mut q = Quadratic::new(Matrix::new(rows, cols, data)?, b)?;
        q.seed = Some(seed);
        Ok(q)
    }

    /// Square full-rank `A` with standard normal entries plus `2 I`.
    pub fn random_anisotropic(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = RngStream::labeled(seed, "anisotropic");
        let mut data: Vec<f64> = (0..dim * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / (dim as f64).sqrt())
            .collect();
        for i in 0..dim {
            data[i * dim + i] += 2.0;
        }
        let b = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut q = Quadratic::new(Matrix::new(dim, dim, data)?, b)?;
        q.seed = Some(seed);
        Ok(q)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) {
        for (i, ri) in r.iter_mut().enumerate() {
            let row = self.a.row(i);
            *ri = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b[i];
        }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.a.cols
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut r = vec![0.0; self.a.rows];
        self.residual(x, &mut r);
        0.5 * norm_sq(&r)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.value_and_gradient(x, out);
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let mut r = vec![0.0; self.a.rows];
        self.residual(x, &mut r);
        out.fill(0.0);
        for (i, ri) in r.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.a.row(i)) {
                *o += a * ri;
            }
        }
        0.5 * norm_sq(&r)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn pl_modulus(&self) -> Option<f64> {
        Some(self.pl_mu)
    }

    fn strong_convexity(&self) -> Option<f64> {
        (self.rank == self.a.cols).then_some(self.pl_mu)
    }

    fn f_star(&self) -> Option<f64> {
        Some(self.f_star)
    }

    fn minimizer(&self) -> Option<Point> {
        Some(Point::from(self.minimizer.clone()))
    }
}
