//! The simulated data-parallel round.
//!
//! Workers compute their batch averages concurrently on a rayon pool. Every
//! sample is drawn from the stream keyed `(run, worker, round, sample)`, and
//! the aggregation is a fixed pairwise tree over worker indices, so results
//! do not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::objectives::StochasticOracle;
use crate::point::Point;
use crate::rng::StreamKey;

/// `N` logical workers executed on a fixed-size thread pool.
#[derive(Clone, Debug)]
pub struct WorkerPool {
    workers: usize,
    threads: usize,
    pool: Arc<rayon::ThreadPool>,
}

impl WorkerPool {
    /// A pool of `workers` logical workers on `threads` OS threads
    /// (`0` picks rayon's default).
    pub fn new(workers: usize, threads: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::config("number of workers must be >= 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
        let threads = pool.current_num_threads();
        Ok(Self {
            workers,
            threads,
            pool: Arc::new(pool),
        })
    }

    /// One thread per worker.
    pub fn per_worker(workers: usize) -> Result<Self> {
        Self::new(workers, workers.max(1))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Runs `f(i)` for every worker `i` and returns the results in worker
    /// order.
    pub fn map_workers<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..self.workers).into_par_iter().map(&f).collect())
    }
}

/// Cumulative cost of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Stochastic gradient samples drawn by each worker.
    pub sfo_per_worker: u64,
    /// Aggregations performed.
    pub comm_rounds: u64,
}

/// Per-run state shared by the round primitives: the run identifier, the
/// counters and, in debug builds, a ledger of consumed streams.
#[derive(Debug)]
pub struct RunContext {
    run_id: u64,
    pub counters: Counters,
    #[cfg(debug_assertions)]
    used: std::collections::HashSet<(u64, u64)>,
}

impl RunContext {
    pub fn new(run_id: u64) -> Self {
        Self {
            run_id,
            counters: Counters::default(),
            #[cfg(debug_assertions)]
            used: Default::default(),
        }
    }

    pub fn run_id(&self) -> u64 {
        self.run_id
    }

    /// Records that `(worker, round)` streams are about to be consumed.
    /// Debug builds panic on reuse, which would correlate supposedly
    /// independent samples.
    pub(crate) fn claim(&mut self, _worker: u64, _round: u64) {
        #[cfg(debug_assertions)]
        assert!(
            self.used.insert((_worker, _round)),
            "random stream (run {}, worker {_worker}, round {_round}) used twice",
            self.run_id
        );
    }
}

/// Each worker's mean of `batch` fresh samples at `x`, drawn with keys
/// `(run, i, round, 0..batch)`. Adds `batch` to the per-worker SFO count.
pub fn parallel_batch_averages<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &Point,
    batch: u64,
    pool: &WorkerPool,
    round: u64,
    ctx: &mut RunContext,
) -> Result<Vec<Point>> {
    check_dim(oracle.dim(), x.dim())?;
    if batch == 0 {
        return Err(Error::Argument("batch size must be >= 1".into()));
    }
    for i in 0..pool.workers() {
        ctx.claim(i as u64, round);
    }
    let run = ctx.run_id;
    let out = pool.map_workers(|i| {
        let mut g = Point::zeros(x.dim());
        oracle.batch_mean(x, i, StreamKey::new(run, i as u64, round, 0), batch, &mut g);
        g
    });
    ctx.counters.sfo_per_worker += batch;
    Ok(out)
}

/// Average of the workers' vectors; counts one communication round.
pub fn aggregate(gs: &[Point], counters: &mut Counters) -> Result<Point> {
    let first = gs
        .first()
        .ok_or_else(|| Error::Argument("nothing to aggregate".into()))?;
    for g in gs {
        check_dim(first.dim(), g.dim())?;
    }
    counters.comm_rounds += 1;
    Ok(tree_mean(gs).0)
}

// Recursive halving by index: the mean of a range is the size-weighted
// combination of its halves' means. Identical inputs stay exact because
// `a + (a - a) * w == a`.
fn tree_mean(gs: &[Point]) -> (Point, usize) {
    if gs.len() == 1 {
        return (gs[0].clone(), 1);
    }
    let mid = gs.len() / 2;
    let (mut left, nl) = tree_mean(&gs[..mid]);
    let (right, nr) = tree_mean(&gs[mid..]);
    let w = nr as f64 / (nl + nr) as f64;
    for (a, b) in left.iter_mut().zip(right.iter()) {
        *a += (b - *a) * w;
    }
    (left, nl + nr)
}

/// `x - gamma g`.
pub fn sgd_step(x: &Point, g: &Point, gamma: f64) -> Result<Point> {
    check_dim(x.dim(), g.dim())?;
    let mut out = x.clone();
    sgd_step_in_place(&mut out, g, gamma);
    Ok(out)
}

pub(crate) fn sgd_step_in_place(x: &mut [f64], g: &[f64], gamma: f64) {
    for (xi, gi) in x.iter_mut().zip(g) {
        *xi -= gamma * gi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{sample_stochastic_gradient, AdditiveGaussian, Objective, Quadratic};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn half_norm(dim: usize, sigma2: f64) -> AdditiveGaussian<Quadratic> {
        AdditiveGaussian::new(Quadratic::isotropic(dim, 1.0), sigma2).unwrap()
    }

    #[test]
    fn zero_noise_batches_are_exact_gradients() {
        let o = half_norm(3, 0.0);
        let x = Point::from(vec![1.0, -2.0, 0.5]);
        let pool = WorkerPool::new(4, 2).unwrap();
        let mut ctx = RunContext::new(7);
        let gs = parallel_batch_averages(&o, &x, 5, &pool, 1, &mut ctx).unwrap();
        assert_eq!(gs.len(), 4);
        for g in &gs {
            assert_eq!(g.as_slice(), x.as_slice());
        }
        assert_eq!(ctx.counters.sfo_per_worker, 5);
    }

    #[test]
    fn single_sample_matches_direct_draw() {
        let o = half_norm(2, 1.0);
        let x = Point::from(vec![0.3, 0.1]);
        let pool = WorkerPool::new(1, 1).unwrap();
        let mut ctx = RunContext::new(11);
        let gs = parallel_batch_averages(&o, &x, 1, &pool, 4, &mut ctx).unwrap();
        let direct = sample_stochastic_gradient(&o, &x, 0, StreamKey::new(11, 0, 4, 0)).unwrap();
        assert_eq!(gs[0], direct);
    }

    #[test]
    fn batch_mean_variance() {
        let (sigma2, b, reps) = (2.0, 8u64, 10_000);
        let o = half_norm(1, sigma2);
        let x = Point::zeros(1);
        let pool = WorkerPool::new(1, 1).unwrap();
        let mut ctx = RunContext::new(3);
        let mut samples = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            samples.push(parallel_batch_averages(&o, &x, b, &pool, r, &mut ctx).unwrap()[0][0]);
        }
        let n = reps as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = sigma2 / b as f64;
        // The sample variance of gaussians has relative sd sqrt(2 / (n - 1)).
        assert!(
            (var / target - 1.0).abs() < 4.0 * (2.0 / (n - 1.0)).sqrt(),
            "{var} vs {target}"
        );
    }

    #[test]
    fn results_independent_of_thread_count() {
        let o = half_norm(4, 1.0);
        let x = Point::from(vec![1.0, 2.0, 3.0, 4.0]);
        let run = |threads| {
            let pool = WorkerPool::new(6, threads).unwrap();
            let mut ctx = RunContext::new(1);
            parallel_batch_averages(&o, &x, 9, &pool, 2, &mut ctx).unwrap()
        };
        assert_eq!(run(1), run(3));
        assert_eq!(run(1), run(6));
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "used twice")]
    fn stream_reuse_is_caught() {
        let o = half_norm(1, 1.0);
        let pool = WorkerPool::new(1, 1).unwrap();
        let mut ctx = RunContext::new(1);
        let x = Point::zeros(1);
        parallel_batch_averages(&o, &x, 1, &pool, 1, &mut ctx).unwrap();
        parallel_batch_averages(&o, &x, 1, &pool, 1, &mut ctx).unwrap();
    }

    #[test]
    fn aggregate_examples() {
        let mut c = Counters::default();
        let v = Point::from(vec![0.1, 1.0 / 3.0, -7.25]);
        for n in 1..=17 {
            assert_eq!(aggregate(&vec![v.clone(); n], &mut c).unwrap(), v);
        }
        let m = aggregate(
            &[Point::from(vec![1.0, 0.0]), Point::from(vec![0.0, 1.0])],
            &mut c,
        )
        .unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
        assert_eq!(c.comm_rounds, 18);
        assert!(aggregate(&[Point::zeros(1), Point::zeros(2)], &mut c).is_err());
        assert!(aggregate(&[], &mut c).is_err());
    }

    // Neumaier-compensated sum divided by N.
    fn compensated_mean(gs: &[Point], k: usize) -> f64 {
        let (mut s, mut comp) = (0.0f64, 0.0f64);
        for g in gs {
            let v = g[k];
            let t = s + v;
            comp += if s.abs() >= v.abs() {
                (s - t) + v
            } else {
                (v - t) + s
            };
            s = t;
        }
        (s + comp) / gs.len() as f64
    }

    #[test]
    fn aggregate_matches_compensated_mean() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for n in 1..=64 {
            let gs: Vec<Point> = (0..n)
                .map(|_| {
                    Point::from(
                        (0..5)
                            .map(|_| rng.random_range(0.5..10.0))
                            .collect::<Vec<f64>>(),
                    )
                })
                .collect();
            let m = aggregate(&gs, &mut Counters::default()).unwrap();
            for k in 0..5 {
                let e = compensated_mean(&gs, k);
                assert!(((m[k] - e) / e).abs() <= 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn sgd_step_examples() {
        let x = Point::from(vec![1.0]);
        assert_eq!(
            sgd_step(&x, &Point::from(vec![1.0]), 0.1)
                .unwrap()
                .as_slice(),
            &[0.9]
        );
        assert_eq!(sgd_step(&x, &Point::zeros(1), 0.1).unwrap(), x);
        let f = half_norm(1, 0.0);
        let mut y = x.clone();
        let mut g = Point::zeros(1);
        for _ in 0..3 {
            f.gradient(&y, &mut g);
            y = sgd_step(&y, &g, 0.1).unwrap();
        }
        assert!((y[0] - 0.729).abs() < 1e-15);
        assert!(sgd_step(&x, &Point::zeros(2), 0.1).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_is_linear(
            vals in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..20),
            c in -10f64..10.0,
        ) {
            let gs: Vec<Point> = vals.iter().cloned().map(Point::from).collect();
            let scaled: Vec<Point> = vals.iter().map(|v| Point::from(v.iter().map(|x| c * x).collect::<Vec<_>>())).collect();
            let a = aggregate(&gs, &mut Counters::default()).unwrap();
            let b = aggregate(&scaled, &mut Counters::default()).unwrap();
            let scale = vals.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())) * c.abs();
            for k in 0..3 {
                prop_assert!((b[k] - c * a[k]).abs() <= 1e-12 * scale.max(1e-300) * 8.0);
            }
        }
    }
}
