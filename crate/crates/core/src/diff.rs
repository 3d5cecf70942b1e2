//! Central finite differences — the independent oracle against which every
//! hand-written reverse-mode gradient in this crate is checked.

/// Gradient of `f` at `x` by central differences with the given step.
pub fn central_diff_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let saved = point[i];
        point[i] = saved + step;
        let fp = f(&point);
        point[i] = saved - step;
        let fm = f(&point);
        point[i] = saved;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Largest relative component error between an analytic gradient and its
/// finite-difference counterpart, with an absolute floor so near-zero
/// components do not blow up the ratio.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|v| v.abs())
        .fold(0.0_f64, f64::max)
        .max(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0_f64, f64::max)
}
