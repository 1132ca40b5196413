//! Quadrature, interpolation and special-function helpers shared by the
//! physics modules.
//!
//! Everything here works on uniformly spaced samples. Cumulative integrals
//! use composite Simpson on node pairs with a three-point half-panel rule for
//! the odd nodes, so the cumulative array and the full integral agree.

use crate::error::{Error, Result};

/// Integral over the whole sample range by composite Simpson.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    cumulative_simpson(values, h).last().copied().unwrap_or(0.0)
}

/// Running integral `C[i] = ∫_{x_0}^{x_i} f`, exact for cubics on even nodes
/// and for quadratics on odd nodes.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    let mut i = 0;
    while i + 2 < n {
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        out[i + 1] = out[i] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        out[i + 2] = out[i] + h / 3.0 * (f0 + 4.0 * f1 + f2);
        i += 2;
    }
    if i + 1 == n - 1 {
        let (fa, fb, fc) = (values[n - 3], values[n - 2], values[n - 1]);
        out[n - 1] = out[n - 2] + h / 12.0 * (-fa + 8.0 * fb + 5.0 * fc);
    }
    out
}

/// Composite trapezoid rule.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Four-point Lagrange interpolation on a uniform grid starting at `x0`.
///
/// Returns `None` when `x` lies outside `[x0, x0 + (n-1) h]`. Near the ends the
/// stencil is shifted inwards rather than shrunk.
pub fn lagrange4(values: &[f64], x0: f64, h: f64, x: f64) -> Option<f64> {
    let n = values.len();
    let s = (x - x0) / h;
    let last = (n - 1) as f64;
    // allow a few ulps of slack at both ends
    if !(s >= -1e-9 && s <= last + 1e-9) {
        return None;
    }
    // snap to a node when the query sits on one up to round-off in (x - x0)/h
    if (s - s.round()).abs() <= 1e-12 * s.abs().max(1.0) {
        return Some(values[(s.round().max(0.0) as usize).min(n - 1)]);
    }
    if n < 4 {
        let i = (s.floor() as usize).min(n.saturating_sub(2));
        let t = s - i as f64;
        return Some(values[i] * (1.0 - t) + values[(i + 1).min(n - 1)] * t);
    }
    let i = (s.floor().max(0.0) as usize).min(n - 2);
    let start = i.saturating_sub(1).min(n - 4);
    let t = s - start as f64;
    let (f0, f1, f2, f3) = (
        values[start],
        values[start + 1],
        values[start + 2],
        values[start + 3],
    );
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    Some(f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3)
}

/// `∫_{-∞}^ξ φ₀` for the normalized Gaussian `φ₀ = e^{-ξ²/4μ}/√(4πμ)`.
pub fn gaussian_cdf(xi: f64, mu: f64) -> f64 {
    0.5 * libm::erfc(-xi / (2.0 * mu.sqrt()))
}

/// `φ₀(ξ) = e^{-ξ²/4μ}/√(4πμ)`.
pub fn gaussian(xi: f64, mu: f64) -> f64 {
    (-xi * xi / (4.0 * mu)).exp() / (4.0 * std::f64::consts::PI * mu).sqrt()
}

/// Physicists' Hermite polynomial `H_n(s)` by the three-term recurrence.
pub fn hermite(n: usize, s: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * s);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * s * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Minimize a unimodal function on `[a, b]` by golden-section search.
///
/// Returns `(argmin, min, iterations)`. Stops when the bracket is shorter
/// than `tol` or after `max_iter` iterations, whichever comes first; the
/// caller decides whether hitting the cap is an error.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    if fc <= fd {
        (c, fc, iter)
    } else {
        (d, fd, iter)
    }
}

/// Adaptive Simpson quadrature of a two-component integrand sharing one
/// set of abscissae.
///
/// `panels` is the initial partition (sorted breakpoints). Each panel is
/// refined until the Richardson estimate of both components is below
/// `abs_tol` scaled by the panel's share of the total length. Fails once more
/// than `budget` subintervals have been processed.
pub fn adaptive_simpson2<F: FnMut(f64) -> [f64; 2]>(
    mut f: F,
    panels: &[f64],
    abs_tol: f64,
    budget: usize,
) -> Result<[f64; 2]> {
    struct Seg {
        a: f64,
        b: f64,
        fa: [f64; 2],
        fm: [f64; 2],
        fb: [f64; 2],
        whole: [f64; 2],
        depth: u32,
    }
    fn simp(a: f64, b: f64, fa: [f64; 2], fm: [f64; 2], fb: [f64; 2]) -> [f64; 2] {
        let w = (b - a) / 6.0;
        [
            w * (fa[0] + 4.0 * fm[0] + fb[0]),
            w * (fa[1] + 4.0 * fm[1] + fb[1]),
        ]
    }

    let total = panels.last().copied().unwrap_or(0.0) - panels.first().copied().unwrap_or(0.0);
    if panels.len() < 2 || total <= 0.0 {
        return Ok([0.0, 0.0]);
    }
    let mut stack = Vec::with_capacity(64);
    let mut fprev = f(panels[0]);
    for w in panels.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let fb = f(b);
        stack.push(Seg {
            a,
            b,
            fa: fprev,
            fm,
            fb,
            whole: simp(a, b, fprev, fm, fb),
            depth: 0,
        });
        fprev = fb;
    }

    let mut acc = [0.0, 0.0];
    let mut err_est = 0.0;
    let mut processed = 0usize;
    while let Some(seg) = stack.pop() {
        processed += 1;
        if processed > budget {
            return Err(Error::Quadrature {
                estimate: err_est + stack.iter().map(|s| s.whole[1].abs()).sum::<f64>(),
            });
        }
        let m = 0.5 * (seg.a + seg.b);
        let lm = 0.5 * (seg.a + m);
        let rm = 0.5 * (m + seg.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simp(seg.a, m, seg.fa, flm, seg.fm);
        let right = simp(m, seg.b, seg.fm, frm, seg.fb);
        let tol = abs_tol * (seg.b - seg.a) / total;
        let e0 = (left[0] + right[0] - seg.whole[0]).abs() / 15.0;
        let e1 = (left[1] + right[1] - seg.whole[1]).abs() / 15.0;
        if (e0 <= tol && e1 <= tol) || seg.depth > 50 || (seg.b - seg.a) < 1e-14 * total {
            for k in 0..2 {
                acc[k] += left[k] + right[k] + (left[k] + right[k] - seg.whole[k]) / 15.0;
            }
            err_est += e0.max(e1);
        } else {
            stack.push(Seg {
                a: seg.a,
                b: m,
                fa: seg.fa,
                fm: flm,
                fb: seg.fm,
                whole: left,
                depth: seg.depth + 1,
            });
            stack.push(Seg {
                a: m,
                b: seg.b,
                fa: seg.fm,
                fm: frm,
                fb: seg.fb,
                whole: right,
                depth: seg.depth + 1,
            });
        }
    }
    Ok(acc)
}

/// Solve a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row `i` to `i-1` (ignored for `i = 0`), `upper[i]`
/// couples row `i` to `i+1` (ignored for the last row). `rhs` is overwritten
/// with the solution. `scratch` must have the same length as `rhs`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    if n == 0 {
        return;
    }
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}
