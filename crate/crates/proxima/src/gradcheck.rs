//! Central finite differences for validating hand-derived gradients.
//!
//! These helpers only ever call the supplied closure, so they stay
//! independent of whatever backward pass they are used to check.

use crate::nn::ParamVector;

/// Central difference gradient of `f` at `x`: (f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h.
pub fn central_diff(f: impl Fn(&ParamVector) -> f64, x: &ParamVector, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Worst relative error between two gradients, with an absolute floor so
/// near-zero entries compare absolutely.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Like [`max_rel_error`] but with the floor tied to the gradient's own
/// scale (`floor_fraction ·` the largest entry), so entries far below the
/// vector's scale are judged by absolute difference rather than a relative
/// one that only amplifies finite-difference noise.
pub fn max_rel_error_scaled(analytic: &[f64], numeric: &[f64], floor_fraction: f64) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    max_rel_error(analytic, numeric, (floor_fraction * scale).max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &ParamVector| x.iter().map(|v| v * v).sum::<f64>();
        let x = ParamVector(vec![1.0, -2.0, 0.5]);
        let g = central_diff(f, &x, 1e-6);
        let expect = [2.0, -4.0, 1.0];
        assert!(max_rel_error(&expect, &g, 1e-8) < 1e-8);
    }
}
