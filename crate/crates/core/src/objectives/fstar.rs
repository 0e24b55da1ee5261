use super::Objective;

/// Upper estimate of `f*` from `budget` steps of deterministic gradient
/// descent with step `1/L`, started at the origin.
///
/// Returns the smallest loss seen, so the estimate is nonincreasing in
/// `budget` even when rounding makes a step go uphill.
pub fn estimate_fstar<O: Objective + ?Sized>(obj: &O, budget: usize) -> f64 {
    let step = 1.0 / obj.smoothness();
    let mut x = vec![0.0; obj.dim()];
    let mut g = vec![0.0; obj.dim()];
    let mut best = f64::INFINITY;
    for _ in 0..budget {
        let v = obj.value_and_gradient(&x, &mut g);
        best = best.min(v);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
    }
    best.min(obj.value(&x))
}
