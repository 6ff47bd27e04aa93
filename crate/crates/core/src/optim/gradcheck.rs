/// Compares an analytic gradient with central finite differences.
///
/// `f` returns the loss and its analytic gradient at the given point. The
/// result is the largest `|analytic − numeric| / max(1, |numeric|)` over
/// all coordinates.
pub fn finite_difference_check<F>(mut f: F, params: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let up = f(&p).0;
        p[i] = orig - eps;
        let down = f(&p).0;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
