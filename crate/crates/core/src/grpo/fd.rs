/// Largest relative error between `analytic` and central differences of
/// `objective` at `params`: `|a - n| / max(1e-8, |n|)`.
pub fn finite_diff_check<F>(objective: F, analytic: &[f64], params: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..params.len() {
        p[k] = params[k] + h;
        let up = objective(&p);
        p[k] = params[k] - h;
        let down = objective(&p);
        p[k] = params[k];
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[k] - numeric).abs() / numeric.abs().max(1e-8);
        worst = worst.max(err);
    }
    worst
}
