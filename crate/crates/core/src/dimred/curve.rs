use crate::math::{exp, powf};

const GRID_POINTS: usize = 300;
const SPREAD: f64 = 1.0;

fn sse(a: f64, b: f64, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let f = 1.0 / (1.0 + a * powf(x, 2.0 * b));
            (f - y) * (f - y)
        })
        .sum()
}

/// Minimizes `f(t)` over `[lo, hi]` by golden-section search.
fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Fits `1 / (1 + a x^(2b))` to the target similarity curve (1 up to
/// `min_dist`, then `exp(-(x - min_dist))`) by least squares on 300 points of
/// `[0, 3]`: a coarse grid search followed by alternating per-coordinate
/// line searches until both parameters move by less than 1e-6 (relative).
pub fn fit_curve(min_dist: f64) -> (f64, f64) {
    let xs: alloc::vec::Vec<f64> = (0..GRID_POINTS)
        .map(|i| 3.0 * SPREAD * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let ys: alloc::vec::Vec<f64> = xs
        .iter()
        .map(|&x| if x <= min_dist { 1.0 } else { exp(-(x - min_dist) / SPREAD) })
        .collect();

    let (mut a, mut b, mut best) = (1.0, 1.0, f64::INFINITY);
    for ia in 0..80 {
        // log-spaced over [0.01, 100]
        let ca = powf(10.0, -2.0 + 4.0 * ia as f64 / 79.0);
        for ib in 0..60 {
            let cb = 0.1 + 2.9 * ib as f64 / 59.0;
            let s = sse(ca, cb, &xs, &ys);
            if s < best {
                best = s;
                a = ca;
                b = cb;
            }
        }
    }

    for _ in 0..5000 {
        let na = golden(a * 0.5, a * 2.0, |t| sse(t, b, &xs, &ys));
        let nb = golden((b - 0.25).max(0.01), b + 0.25, |t| sse(na, t, &xs, &ys));
        let moved = ((na - a) / a).abs().max(((nb - b) / b).abs());
        a = na;
        b = nb;
        if moved < 1e-6 {
            break;
        }
    }
    (a, b)
}
