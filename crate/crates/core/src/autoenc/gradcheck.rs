use alloc::vec::Vec;

use super::{Loss, Mlp};

/// Largest relative difference between the backpropagated gradient of the
/// squared reconstruction error at `x` and central finite differences.
/// Each term uses the denominator `max(|g|, |g_fd|, 1e-8)`.
pub fn grad_check(m: &Mlp, x: &[f64], eps: f64) -> f64 {
    grad_check_with(m, x, eps, |net, row| {
        net.gradient(row, Loss::Mse).map(|(_, g)| g.flatten()).unwrap_or_default()
    })
}

/// As [`grad_check`], with the analytic gradient supplied by `gradient`
/// (flattened in [`Mlp::params`] order).
pub fn grad_check_with(m: &Mlp, x: &[f64], eps: f64, gradient: impl Fn(&Mlp, &[f64]) -> Vec<f64>) -> f64 {
    let analytic = gradient(m, x);
    let base = m.params();
    let mut probe = m.clone();
    let loss = |net: &Mlp| net.forward(x).map(|y| Loss::Mse.value(x, &y)).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    let mut p = base.clone();
    for k in 0..base.len() {
        p[k] = base[k] + eps;
        probe.set_params(&p);
        let up = loss(&probe);
        p[k] = base[k] - eps;
        probe.set_params(&p);
        let down = loss(&probe);
        p[k] = base[k];
        let fd = (up - down) / (2.0 * eps);
        let g = analytic.get(k).copied().unwrap_or(f64::NAN);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
        if rel.is_nan() {
            return f64::INFINITY;
        }
        worst = worst.max(rel);
    }
    worst
}
