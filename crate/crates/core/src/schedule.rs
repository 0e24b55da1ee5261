//! Batch-size schedules and their round-count arithmetic.
//!
//! The geometric rule is `B_t = floor(rho^(t-1) * B_1)`, optionally capped.
//! A run with per-worker budget `T` executes rounds while the cumulative
//! batch total stays within `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponentially growing batch sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    b1: u64,
    rho: f64,
    cap: Option<u64>,
}

impl BatchSchedule {
    pub fn new(b1: u64, rho: f64) -> Result<Self> {
        Self::with_cap(b1, rho, None)
    }

    pub fn with_cap(b1: u64, rho: f64, cap: Option<u64>) -> Result<Self> {
        if b1 < 2 {
            return Err(Error::config(format!(
                "initial batch size must be >= 2, got {b1}"
            )));
        }
        if !(rho > 1.0 && rho.is_finite()) {
            return Err(Error::config(format!(
                "growth factor rho must be > 1, got {rho}"
            )));
        }
        if let Some(c) = cap {
            if c < b1 {
                return Err(Error::config(format!(
                    "batch cap {c} is below the initial batch {b1}"
                )));
            }
        }
        Ok(Self { b1, rho, cap })
    }

    pub fn b1(&self) -> u64 {
        self.b1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    /// `min(floor(rho^(t-1) B_1), cap)` for `t >= 1`.
    pub fn batch_size(&self, t: u64) -> Result<u64> {
        if t < 1 {
            return Err(Error::Argument(format!(
                "round index must be >= 1, got {t}"
            )));
        }
        let b = geometric_floor(self.rho, t - 1, self.b1);
        Ok(self.cap.map_or(b, |c| b.min(c)))
    }

    /// Lower bound on the round count from summing the unfloored series:
    /// `log_rho(T (rho - 1) / B_1 + 1)`.
    pub fn log_round_bound(&self, budget: u64) -> f64 {
        (budget as f64 * (self.rho - 1.0) / self.b1 as f64 + 1.0).ln() / self.rho.ln()
    }
}

/// Per-round batch sizes for any of the supported rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Geometric(BatchSchedule),
    Constant { batch: u64 },
}

impl Schedule {
    pub fn constant(batch: u64) -> Result<Self> {
        if batch == 0 {
            return Err(Error::config("fixed batch size must be >= 1"));
        }
        Ok(Schedule::Constant { batch })
    }

    pub fn batch_size(&self, t: u64) -> Result<u64> {
        match self {
            Schedule::Geometric(s) => s.batch_size(t),
            Schedule::Constant { batch } if t >= 1 => Ok(*batch),
            Schedule::Constant { .. } => Err(Error::Argument(format!(
                "round index must be >= 1, got {t}"
            ))),
        }
    }

    pub fn first_batch(&self) -> u64 {
        match self {
            Schedule::Geometric(s) => s.b1,
            Schedule::Constant { batch } => *batch,
        }
    }

    /// Batch sizes of every round executed under a per-worker budget:
    /// the longest prefix whose sum stays `<= budget`.
    pub fn plan(&self, budget: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut used = 0u64;
        for t in 1.. {
            let b = self.batch_size(t).expect("t >= 1");
            match used.checked_add(b) {
                Some(next) if next <= budget => {
                    used = next;
                    out.push(b);
                }
                _ => break,
            }
        }
        out
    }

    /// Number of executed rounds `t* = max{t : sum_{tau<=t} B_tau <= T}`.
    pub fn num_rounds(&self, budget: u64) -> u64 {
        match self {
            Schedule::Constant { batch } => budget / batch,
            Schedule::Geometric(_) => self.plan(budget).len() as u64,
        }
    }

    /// True when the budget cannot pay for even the first batch.
    pub fn is_degenerate(&self, budget: u64) -> bool {
        budget < self.first_batch()
    }
}

impl From<BatchSchedule> for Schedule {
    fn from(s: BatchSchedule) -> Self {
        Schedule::Geometric(s)
    }
}

// Double-double arithmetic for rho^k: ~106 significant bits, so the only
// error left is the binary representation of rho itself.
#[derive(Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn mul(self, other: Self) -> Self {
        let p = self.hi * other.hi;
        let e = self.hi.mul_add(other.hi, -p) + (self.hi * other.lo + self.lo * other.hi);
        let hi = p + e;
        Self {
            hi,
            lo: e - (hi - p),
        }
    }

    fn powu(self, mut k: u64) -> Self {
        let mut acc = Self::from(1.0);
        let mut base = self;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }

    fn floor(self) -> f64 {
        let f = self.hi.floor();
        if f == self.hi && self.lo < 0.0 {
            f - 1.0
        } else {
            f
        }
    }
}

/// `floor(rho^k * b1)`, where a product within half an ulp per factor of
/// `rho` below an integer is rounded up to it. That absorbs the
/// representation error of decimal `rho` values such as 1.1.
fn geometric_floor(rho: f64, k: u64, b1: u64) -> u64 {
    const SATURATED: u64 = 1 << 62;
    let z = DoubleDouble::from(rho)
        .powu(k)
        .mul(DoubleDouble::from(b1 as f64));
    if !z.hi.is_finite() || z.hi >= SATURATED as f64 {
        return SATURATED;
    }
    let guard = 0.5 * f64::EPSILON * z.hi * (k.max(1) as f64);
    let nearest = z.hi.round();
    let value = if nearest > z.hi - guard && nearest - (z.hi + z.lo) <= guard && nearest >= z.hi {
        nearest
    } else {
        z.floor()
    };
    value as u64
}

/// Convergence-rate constants of CR-PSGD under the P-L condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    /// `0.5 gamma mu (1 - L gamma)`: the per-round contraction margin.
    pub nu: f64,
    /// `log_rho(1 / (1 - nu)) - 1`.
    pub delta: f64,
    /// `(B_1 / (rho - 1))^(1 + delta) / (1 - nu)`.
    pub c1: f64,
    /// `rho^2 gamma (2 - L gamma) sigma2 / ((1 - (1 - nu) rho)(rho - 1))`.
    pub c2: f64,
    /// Whether `rho < 1 / (1 - nu)`, the condition for the rate bound.
    pub valid: bool,
}

/// Computes [`RateConstants`]. Requires `0 < gamma < 1/L`, `mu > 0`,
/// `rho > 1`; validity of `rho` is reported, not enforced.
pub fn rate_constants(
    gamma: f64,
    mu: f64,
    l: f64,
    rho: f64,
    b1: u64,
    sigma2: f64,
) -> Result<RateConstants> {
    if !(l > 0.0) || !(gamma > 0.0) || gamma * l >= 1.0 {
        return Err(Error::config(format!(
            "step size gamma = {gamma} must lie in (0, 1/L) with L = {l}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::config(format!("P-L modulus must be > 0, got {mu}")));
    }
    if !(rho > 1.0) {
        return Err(Error::config(format!("rho must be > 1, got {rho}")));
    }
    let nu = 0.5 * gamma * mu * (1.0 - l * gamma);
    let contraction = 1.0 - nu;
    let delta = (1.0 / contraction).ln() / rho.ln() - 1.0;
    let c1 = (b1 as f64 / (rho - 1.0)).powf(1.0 + delta) / contraction;
    let c2 =
        rho * rho * gamma * (2.0 - l * gamma) * sigma2 / ((1.0 - contraction * rho) * (rho - 1.0));
    Ok(RateConstants {
        nu,
        delta,
        c1,
        c2,
        valid: contraction * rho < 1.0,
    })
}

impl RateConstants {
    /// Budget threshold under which the proximal outer loop's guarantee is
    /// stated: `max{N, N (4 c1 (theta+L)^2 / (theta-L)^2)^(2/(1+delta)),
    /// N c1^(2/(1+delta))}`. Here `self` must be computed for the proximal
    /// subproblem.
    pub fn catalyst_budget_threshold(&self, workers: u64, theta: f64, l: f64) -> f64 {
        let n = workers as f64;
        let p = 2.0 / (1.0 + self.delta);
        let ratio = 4.0 * self.c1 * (theta + l).powi(2) / (theta - l).powi(2);
        n.max(n * ratio.powf(p)).max(n * self.c1.powf(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geo(b1: u64, rho: f64) -> Schedule {
        BatchSchedule::new(b1, rho).unwrap().into()
    }

    #[test]
    fn batch_size_examples() {
        assert_eq!(geo(2, 1.1).batch_size(1).unwrap(), 2);
        assert_eq!(geo(2, 2.0).batch_size(4).unwrap(), 16);
        // floor(32 * 1.02^9) = floor(38.24...) from exact rational arithmetic.
        assert_eq!(geo(32, 1.02).batch_size(10).unwrap(), 38);
        assert!(geo(2, 1.1).batch_size(0).is_err());
    }

    #[test]
    fn batch_sizes_match_exact_enumeration() {
        // floor(2 * 1.1^(t-1)), t = 1..19, evaluated with exact fractions.
        let expect = [2, 2, 2, 2, 2, 3, 3, 3, 4, 4, 5, 5, 6, 6, 7, 8, 9, 10, 11];
        let s = geo(2, 1.1);
        for (t, e) in expect.iter().enumerate() {
            assert_eq!(s.batch_size(t as u64 + 1).unwrap(), *e, "t = {}", t + 1);
        }
    }

    #[test]
    fn decimal_rho_hits_exact_integers() {
        // 1.2 * 5 = 6 and 1.5^2 * 4 = 9 exactly over the reals.
        assert_eq!(geo(5, 1.2).batch_size(2).unwrap(), 6);
        assert_eq!(geo(4, 1.5).batch_size(3).unwrap(), 9);
        assert_eq!(geo(10, 1.1).batch_size(3).unwrap(), 12); // 12.1
    }

    #[test]
    fn round_count_examples() {
        assert_eq!(geo(2, 2.0).num_rounds(30), 4);
        assert_eq!(geo(5, 1.5).num_rounds(5), 1);
        // Exact enumeration gives 65 rounds using 9755 of 10^4 samples.
        let s = geo(2, 1.1);
        assert_eq!(s.num_rounds(10_000), 65);
        assert_eq!(s.plan(10_000).iter().sum::<u64>(), 9755);
    }

    #[test]
    fn degenerate_budget() {
        let s = geo(4, 1.5);
        assert!(s.is_degenerate(3));
        assert_eq!(s.num_rounds(3), 0);
        assert!(!s.is_degenerate(4));
    }

    #[test]
    fn constant_schedule() {
        let s = Schedule::constant(2).unwrap();
        assert_eq!(s.num_rounds(10_000), 5000);
        assert_eq!(s.plan(7), vec![2, 2, 2]);
        assert!(Schedule::constant(0).is_err());
    }

    #[test]
    fn cap_limits_growth() {
        let s: Schedule = BatchSchedule::with_cap(32, 2.0, Some(100)).unwrap().into();
        assert_eq!(s.batch_size(3).unwrap(), 100);
        assert_eq!(s.num_rounds(1000), 2 + 9); // 32, 64, then 100s
        assert!(BatchSchedule::with_cap(32, 2.0, Some(10)).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(BatchSchedule::new(1, 1.1).is_err());
        assert!(BatchSchedule::new(2, 1.0).is_err());
        assert!(BatchSchedule::new(2, f64::NAN).is_err());
    }

    #[test]
    fn rate_constant_examples() {
        let r = rate_constants(0.1, 1.0, 1.0, 1.02, 2, 1.0).unwrap();
        assert!((r.nu - 0.045).abs() < 1e-15);
        // ln(1/0.955) / ln(1.02) - 1, evaluated independently.
        let expect = (1.0f64 / 0.955).ln() / 1.02f64.ln() - 1.0;
        assert!((r.delta - expect).abs() < 1e-12);
        assert!((r.delta - 1.3251).abs() < 1e-3);
        assert!(r.valid && r.c2 > 0.0);
        let r = rate_constants(0.1, 1.0, 1.0, 1.1, 2, 1.0).unwrap();
        assert!(!r.valid);
        assert!(rate_constants(1.0, 1.0, 1.0, 1.1, 2, 1.0).is_err());
        assert!(rate_constants(0.1, 0.0, 1.0, 1.1, 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn schedule_invariants(b1 in 2u64..64, rho in 1.01f64..3.0, budget in 0u64..200_000) {
            let s = geo(b1, rho);
            let plan = s.plan(budget);
            let used: u64 = plan.iter().sum();
            prop_assert!(used <= budget);
            let next = s.batch_size(plan.len() as u64 + 1).unwrap();
            prop_assert!(used + next > budget);
            prop_assert!(plan.windows(2).all(|w| w[0] <= w[1]));
            for (i, b) in plan.iter().enumerate() {
                prop_assert!(*b as f64 > 0.5 * rho.powi(i as i32) * b1 as f64);
            }
            if budget >= b1 {
                let bound = BatchSchedule::new(b1, rho).unwrap().log_round_bound(budget);
                prop_assert!(plan.len() as f64 + 1.0 >= bound);
            }
        }

        #[test]
        fn nu_in_unit_interval(l in 0.1f64..10.0, frac in 0.01f64..0.99, mu_frac in 0.01f64..1.0) {
            let gamma = frac / l;
            let r = rate_constants(gamma, mu_frac * l, l, 1.01, 2, 1.0).unwrap();
            prop_assert!(r.nu > 0.0 && r.nu < 1.0);
            if r.valid {
                prop_assert!(r.delta > 0.0 && r.c2 > 0.0 && (1.0 - r.nu) * 1.01 < 1.0);
            }
        }
    }
}
