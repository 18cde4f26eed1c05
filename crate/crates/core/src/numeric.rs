//! Shared numerical helpers: monotone inversion, quadrature, least squares.

use crate::error::{Error, Result};

/// Largest `q` in `[lo, hi]` with `f(q) <= target`, for `f` nondecreasing on
/// the bracket with `f(lo) <= target < f(hi)` (`f(hi)` may be `+inf`).
///
/// Stops when the residual `|f(mid) - target|` drops below `tol_f`, when the
/// bracket width collapses to floating-point resolution, or after `max_iter`
/// halvings. Returns the lower end of the final bracket so the result always
/// satisfies the constraint from below.
pub fn invert_monotone_sup<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol_f: f64,
    max_iter: usize,
) -> f64 {
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at f64 resolution
        }
        let v = f(mid);
        if (v - target).abs() <= tol_f {
            return mid;
        }
        if v <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Inverts a continuous CDF at probability `p` via safeguarded Newton steps.
///
/// `pdf` may return 0 where the density vanishes; the solver then falls back
/// to bisection on the maintained bracket. Converges to ~1e-13 in probability,
/// well inside the 1e-10 target needed for extreme posterior quantiles.
pub fn invert_cdf<C, D>(cdf: C, pdf: D, mut lo: f64, mut hi: f64, p: f64) -> Result<f64>
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0,1]")));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let c = cdf(x);
        let err = c - p;
        if err.abs() <= 1e-13 {
            return Ok(x);
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = pdf(x);
        let newton = if d > 0.0 { x - err / d } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` with absolute tolerance
/// `tol`. Recursion depth is capped; past the cap the current estimate is
/// accepted.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Ordinary least squares fit `y ~ slope * x + intercept`; returns
/// `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain(
            "linear fit needs at least two paired points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Domain("degenerate abscissae in linear fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Sample mean and standard error (`sd / sqrt(n)`; 0 for fewer than 2 points).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
