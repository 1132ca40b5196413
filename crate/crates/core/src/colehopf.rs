//! Cole–Hopf machinery: the transforms in both forms, exact evolution of the
//! rescaled heat equation `∂τ W = μ W'' + ½ (ξ W)'`, projections onto its two
//! slowest modes, and the closed-form Burgers solution.
//!
//! Nothing here time-steps; these routines are the reference the solver is
//! checked against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson2, golden_section, lagrange4};
use crate::similarity::{Field, Grid};

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("viscosity mu = {mu} must be > 0")));
    }
    Ok(())
}

/// `W = w e^{-(1/2μ)∫_{-∞}^ξ w}`.
pub fn cole_hopf_forward(w: &Field, mu: f64) -> Result<Field> {
    check_mu(mu)?;
    let prim = w.primitive();
    let values = w
        .values()
        .iter()
        .zip(&prim)
        .map(|(v, c)| v * (-c / (2.0 * mu)).exp())
        .collect();
    Field::new(*w.grid(), values)
}

/// `w = −2μ ∂ξ log(1 − (1/2μ)∫W) = W / (1 − (1/2μ)∫W)`.
///
/// Fails at the first node where the denominator is not positive.
pub fn cole_hopf_inverse(big_w: &Field, mu: f64) -> Result<Field> {
    check_mu(mu)?;
    let prim = big_w.primitive();
    let mut values = Vec::with_capacity(prim.len());
    for ((xi, v), c) in big_w.grid().nodes().zip(big_w.values()).zip(&prim) {
        let den = 1.0 - c / (2.0 * mu);
        if !(den > 0.0) {
            return Err(Error::Positivity { xi, margin: den });
        }
        values.push(v / den);
    }
    Field::new(*big_w.grid(), values)
}

/// Integrated form `U = e^{-(1/2μ)∫_{-∞}^ξ u}`.
pub fn cole_hopf_alt(u: &Field, mu: f64) -> Result<Field> {
    check_mu(mu)?;
    let prim = u.primitive();
    Field::new(*u.grid(), prim.iter().map(|c| (-c / (2.0 * mu)).exp()).collect())
}

/// Relative edge amplitude above which [`heat_evolve`] refuses the data.
pub const BOUNDARY_DECAY: f64 = 1e-12;

/// Exact solution of `∂τ W = L_μ W` at time `τ`.
///
/// In physical variables this is the heat equation, so
/// `W(ξ, τ) = e^{τ/2} ∫ K_t(e^{τ/2} ξ − y) W0(y) dy` with `t = e^τ − 1` and
/// `K_t` the heat kernel of variance `2μt`. The convolution is done by the
/// trapezoid rule, which converges spectrally for smooth decaying data; when
/// the kernel is narrower than a few grid cells `W0` is first resampled on a
/// finer mesh.
pub fn heat_evolve(w0: &Field, tau: f64, mu: f64) -> Result<Field> {
    check_mu(mu)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
    }
    let peak = w0.sup_norm();
    if peak == 0.0 {
        return Ok(Field::zeros(*w0.grid()));
    }
    let v = w0.values();
    let edge = v[0].abs().max(v[v.len() - 1].abs());
    if edge > BOUNDARY_DECAY * peak {
        return Err(Error::BoundaryDecay { ratio: edge / peak });
    }
    let t = tau.exp_m1();
    if t == 0.0 {
        return Ok(w0.clone());
    }

    let grid = w0.grid();
    let h = grid.spacing();
    let sigma = (2.0 * mu * t).sqrt();
    let refine = ((4.0 * h / sigma).ceil() as usize).clamp(1, 256);
    let (src, hs) = if refine == 1 {
        (v.to_vec(), h)
    } else {
        let hs = h / refine as f64;
        let n = (grid.n_points() - 1) * refine + 1;
        let src = (0..n)
            .map(|j| lagrange4(v, grid.xi_min(), h, grid.xi_min() + j as f64 * hs).unwrap_or(0.0))
            .collect();
        (src, hs)
    };
    let y0 = grid.xi_min();
    let scale = (0.5 * tau).exp();
    let norm = 1.0 / (4.0 * std::f64::consts::PI * mu * t).sqrt();
    let inv4mut = 1.0 / (4.0 * mu * t);
    let reach = 40.0 * sigma;
    let last = src.len() - 1;

    let values: Vec<f64> = grid
        .nodes()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&xi| {
            let x = scale * xi;
            let lo = (((x - reach - y0) / hs).floor().max(0.0) as usize).min(last);
            let hi = (((x + reach - y0) / hs).ceil().max(0.0) as usize).min(last);
            let centre = (((x - y0) / hs).round().max(0.0) as usize).clamp(lo, hi);
            // Walk outwards from the kernel peak, updating the Gaussian weight
            // by its ratio to the neighbour so the inner loop needs no exp.
            let step_decay = (-2.0 * inv4mut * hs * hs).exp();
            let d0 = x - (y0 + centre as f64 * hs);
            let e0 = (-d0 * d0 * inv4mut).exp();
            let mut acc = src[centre] * e0;
            let (mut e, mut r) = (e0, (inv4mut * hs * (2.0 * d0 - hs)).exp());
            for s in &src[centre + 1..=hi] {
                e *= r;
                r *= step_decay;
                if e == 0.0 {
                    break;
                }
                acc += s * e;
            }
            let (mut e, mut r) = (e0, (-inv4mut * hs * (2.0 * d0 + hs)).exp());
            for s in src[lo..centre].iter().rev() {
                e *= r;
                r *= step_decay;
                if e == 0.0 {
                    break;
                }
                acc += s * e;
            }
            // endpoint halves vanish by the decay precondition
            scale * norm * hs * acc
        })
        .collect();
    Field::new(*grid, values)
}

/// Projection onto the `n`-th slow mode using the adjoint eigenfunctions
/// `1` and `−ξ`: returns `∫W` for `n = 0` and `−∫ξW` for `n = 1`.
pub fn spectral_project(big_w: &Field, n: usize) -> Result<f64> {
    match n {
        0 => Ok(big_w.integral()),
        1 => Ok(-big_w.map(|xi, v| xi * v)?.integral()),
        _ => Err(Error::InvalidParameter(format!("projection order {n} not in {{0,1}}"))),
    }
}

/// Exact solution of the rescaled Burgers equation at `τ > 0` from initial
/// data `h`, evaluated on `grid`:
///
/// ```text
/// w(ξ, τ) = κ ∫ (ξ−η) e^{−Φ(η)/2μ} dη / ∫ e^{−Φ(η)/2μ} dη,
/// Φ(η) = κ (ξ−η)²/2 + H(e^{τ/2} η),   κ = 1/(1 − e^{−τ}),
/// ```
///
/// with `H` the primitive of `h`, extended by `0` on the left and by the
/// total mass on the right. The exponent is shifted by its minimum before
/// exponentiation; both integrals are done together by adaptive Simpson with
/// extra panels around the minimizer.
pub fn exact_solution(h: &Field, mu: f64, tau: f64, grid: &Grid) -> Result<Field> {
    check_mu(mu)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be > 0")));
    }
    let prim = h.primitive();
    let hg = *h.grid();
    let (h_lo, h_hi) = prim
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    let total = *prim.last().unwrap();
    let big_h = |y: f64| -> f64 {
        if y <= hg.xi_min() {
            0.0
        } else if y >= hg.xi_max() {
            total
        } else {
            lagrange4(&prim, hg.xi_min(), hg.spacing(), y).unwrap_or(total)
        }
    };
    let stretch = (0.5 * tau).exp();
    let kappa = 1.0 / (-(-tau).exp_m1());
    // below e^{-691} ≈ 1e-300 the integrand is dropped
    let reach = (2.0 * (2.0 * mu * 691.0 + (h_hi - h_lo)) / kappa).sqrt();
    let width = (2.0 * mu / kappa).sqrt();
    let focus = 8.0 * (2.0 * mu).sqrt();

    let eval_at = |xi: f64| -> Result<f64> {
        let phi = |eta: f64| 0.5 * kappa * (xi - eta) * (xi - eta) + big_h(stretch * eta);
        let (a, b) = (xi - reach, xi + reach);

        // coarse scan for the global minimizer, then golden-section polish
        let scan = 512;
        let step = (b - a) / scan as f64;
        let (mut best, mut best_val) = (a, f64::INFINITY);
        for k in 0..=scan {
            let e = a + k as f64 * step;
            let v = phi(e);
            if v < best_val {
                best = e;
                best_val = v;
            }
        }
        let (arg, min_val, _) =
            golden_section(phi, (best - step).max(a), (best + step).min(b), 1e-12 * reach, 200);
        let shift = min_val.min(best_val);

        let coarse = width / 2.0;
        let fine = coarse / 4.0;
        let (f_lo, f_hi) = ((arg - focus).max(a), (arg + focus).min(b));
        let mut panels = Vec::new();
        push_uniform(&mut panels, a, f_lo, coarse);
        push_uniform(&mut panels, f_lo, f_hi, fine);
        push_uniform(&mut panels, f_hi, b, coarse);

        let integrand = |eta: f64| {
            let e = (-(phi(eta) - shift) / (2.0 * mu)).exp();
            [(xi - eta) * e, e]
        };
        let [num, den] = adaptive_simpson2(integrand, &panels, 1e-11 * width, 2_000_000)?;
        Ok(kappa * num / den)
    };

    let nodes: Vec<f64> = grid.nodes().collect();
    let values = nodes
        .par_iter()
        .map(|&xi| eval_at(xi))
        .collect::<Result<Vec<f64>>>()?;
    Field::new(*grid, values)
}

fn push_uniform(panels: &mut Vec<f64>, a: f64, b: f64, max_width: f64) {
    if b <= a {
        return;
    }
    let k = ((b - a) / max_width).ceil().max(1.0) as usize;
    if panels.last().is_none_or(|&l| l < a) {
        panels.push(a);
    }
    for i in 1..=k {
        panels.push(a + (b - a) * i as f64 / k as f64);
    }
}

/// Gaussian tail `∫_z^∞ e^{-s²/2} ds` together with the classical bounds
/// `z/(1+z²) e^{-z²/2} ≤ tail ≤ e^{-z²/2}/z` for `z > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBounds {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

pub fn gaussian_tail_bounds(z: f64) -> Result<TailBounds> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!("tail bound needs z > 0, got {z}")));
    }
    let g = (-0.5 * z * z).exp();
    Ok(TailBounds {
        lower: z / (1.0 + z * z) * g,
        value: (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(z / std::f64::consts::SQRT_2),
        upper: g / z,
    })
}
