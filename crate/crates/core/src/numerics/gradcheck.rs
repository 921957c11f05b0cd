//! Central finite differences, used to check analytic gradients.

/// Default step for [`central_difference`].
pub const FD_STEP: f64 = 1e-6;

/// Magnitude below which gradients are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-4;

/// `(f(x + h) - f(x - h)) / 2h` with `h = FD_STEP`.
pub fn central_difference<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Numerical gradient of `f` over every entry of `params`.
///
/// `params` is restored to its original values on return.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(params: &mut [f64], mut f: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + FD_STEP;
        let plus = f(params);
        params[i] = orig - FD_STEP;
        let minus = f(params);
        params[i] = orig;
        out.push((plus - minus) / (2.0 * FD_STEP));
    }
    out
}

/// Largest [`rel_error`] across paired entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_derivative() {
        let d = central_difference(|x| x * x * x, 2.0);
        assert!(rel_error(12.0, d) < 1e-9);
    }

    #[test]
    fn numeric_gradient_restores_params() {
        let mut p = vec![1.0, -2.0];
        let g = numeric_gradient(&mut p, |p| p[0] * p[0] + 3.0 * p[1]);
        assert_eq!(p, vec![1.0, -2.0]);
        assert!(max_rel_error(&g, &[2.0, 3.0]) < 1e-8);
    }
}
