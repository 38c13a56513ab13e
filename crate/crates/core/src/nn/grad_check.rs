use crate::{Error, Result};

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)`
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

/// Central-difference check of `analytic` against a scalar function `f`
/// evaluated around `point`.
pub fn grad_check<F>(mut f: F, point: &[f64], analytic: &[f64], h: f64, tol: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Config(alloc::format!("finite-difference step must be positive, got {h}")));
    }
    if point.len() != analytic.len() {
        return Err(Error::Shape(alloc::format!(
            "point has {} coordinates, gradient has {}",
            point.len(),
            analytic.len()
        )));
    }
    let mut x = point.to_vec();
    let mut worst = (0.0f64, 0usize);
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(&x);
        x[i] = orig - h;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        if !numeric.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite(alloc::format!("gradient coordinate {i}")));
        }
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let rel = (a - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    Ok(GradCheck {
        max_rel_error: worst.0,
        worst_index: worst.1,
        passed: worst.0 <= tol,
    })
}
