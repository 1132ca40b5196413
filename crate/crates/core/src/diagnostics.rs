//! Measurements taken on fields and trajectories: negative/positive mass,
//! the entropy functional, the remainder relative to an N-wave, distance to
//! the N-wave manifold, log-linear rate fits and the transient time.

use crate::colehopf::{cole_hopf_forward, spectral_project};
use crate::error::{Error, Result};
use crate::manifolds::{diffusive_nwave, inviscid_nwave, InviscidNWaveParams, NWaveParams};
use crate::numerics::golden_section;
use crate::similarity::{weighted_distance, weighted_norm, Field, WeightExponent};
use crate::solver::Trajectory;

/// `p = −2 inf_y ∫_{-∞}^y w` and `q = 2 sup_y ∫_y^∞ w`, with `y` restricted
/// to grid nodes.
pub fn pq_functionals(w: &Field) -> (f64, f64) {
    let prim = w.primitive();
    let total = *prim.last().expect("grid has at least 16 points");
    let inf = prim.iter().copied().fold(0.0f64, f64::min);
    (-2.0 * inf, 2.0 * (total - inf))
}

/// Relative size below which a negative Cole–Hopf image value is treated as
/// round-off and clipped to zero.
pub const IMAGE_ROUNDOFF: f64 = 1e-14;

/// Entropy `H[w] = ∫ W log(W / e^{-ξ²/4μ})` of the Cole–Hopf image
/// `W = w e^{-(1/2μ)∫w}`. Requires `W ≥ 0`.
pub fn entropy(w: &Field, mu: f64) -> Result<f64> {
    entropy_of_image(&cole_hopf_forward(w, mu)?, mu)
}

/// The same functional evaluated directly on a heat-equation field `W`.
pub fn entropy_of_image(big_w: &Field, mu: f64) -> Result<f64> {
    let peak = big_w.sup_norm();
    let cutoff = IMAGE_ROUNDOFF * peak;
    let negatives: Vec<f64> = big_w
        .grid()
        .nodes()
        .zip(big_w.values())
        .filter(|(_, &v)| v < -cutoff)
        .map(|(xi, _)| xi)
        .collect();
    if let Some(&first_xi) = negatives.first() {
        return Err(Error::NegativeImage {
            count: negatives.len(),
            first_xi,
        });
    }
    big_w
        .map(|xi, v| {
            if v <= 0.0 {
                0.0
            } else {
                v * (v.ln() + xi * xi / (4.0 * mu))
            }
        })
        .map(|f| f.integral())
}

/// Closed-form entropy of `β0 φ₀`, i.e. of the diffusion wave with that `β0`.
pub fn entropy_gaussian_line(beta0: f64, mu: f64) -> f64 {
    beta0 * (beta0 / (4.0 * std::f64::consts::PI * mu).sqrt()).ln()
}

/// Difference `φ = w − w_N` reconstructed from the Cole–Hopf images, together
/// with the smallest denominator seen.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiRemainder {
    pub phi: Field,
    /// `min_ξ min(D_{N+Ψ}, D_N)`.
    pub delta_n: f64,
}

/// Margin below which [`phi_remainder`] refuses to divide.
pub const DELTA_N_FLOOR: f64 = 1e-12;

/// `φ = −(1/2μ) [Ψ∫V_N − V_N∫Ψ − 2μΨ] / (D_{N+Ψ} D_N)` with
/// `V_N`, `W = V_N + Ψ` the Cole–Hopf images of `w_N`, `w` and
/// `D_X = 1 − (1/2μ)∫X = e^{−(1/2μ)∫x}` the integrated transform.
pub fn phi_remainder(w: &Field, w_n: &Field, mu: f64) -> Result<PhiRemainder> {
    w.check_same_grid(w_n)?;
    let grid = *w.grid();
    let d_w: Vec<f64> = w.primitive().iter().map(|c| (-c / (2.0 * mu)).exp()).collect();
    let d_n: Vec<f64> = w_n.primitive().iter().map(|c| (-c / (2.0 * mu)).exp()).collect();
    let delta_n = d_w
        .iter()
        .chain(&d_n)
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(delta_n >= DELTA_N_FLOOR) {
        let idx = d_w
            .iter()
            .zip(&d_n)
            .position(|(a, b)| a.min(*b) < DELTA_N_FLOOR)
            .unwrap_or(0);
        return Err(Error::Positivity {
            xi: grid.node(idx),
            margin: delta_n,
        });
    }
    let values = (0..grid.n_points())
        .map(|i| {
            let v_n = w_n.values()[i] * d_n[i];
            let psi = w.values()[i] * d_w[i] - v_n;
            let int_v = -2.0 * mu * (d_n[i] - 1.0);
            let int_psi = -2.0 * mu * (d_w[i] - d_n[i]);
            -(psi * int_v - v_n * int_psi - 2.0 * mu * psi) / (2.0 * mu * d_w[i] * d_n[i])
        })
        .collect();
    Ok(PhiRemainder {
        phi: Field::new(grid, values)?,
        delta_n,
    })
}

/// The N-wave whose heat-equation image carries the same first two moments
/// as `CH(w)`; the remainder `w − w_N` then decays at the fastest rate.
pub fn project_onto_nwave(w: &Field, mu: f64) -> Result<NWaveParams> {
    let big_w = cole_hopf_forward(w, mu)?;
    NWaveParams::new(mu, spectral_project(&big_w, 0)?, spectral_project(&big_w, 1)?, 0.0)
}

/// Closest point on the N-wave manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldFit {
    pub distance: f64,
    pub params: NWaveParams,
    /// Search interval for `β1` actually used.
    pub bracket: (f64, f64),
}

/// Map between `β1` and the search coordinate `u`, `β1 = s · sinh(u)`: linear
/// near zero, logarithmic for the exponentially large values of small `μ`.
fn beta1_scale(mu: f64) -> f64 {
    2.0 * mu * (4.0 * std::f64::consts::PI * mu).sqrt()
}

/// Minimize `‖w − w_N(β0, β1, 0)‖_{L²(m)}` over `β1` with `β0` pinned by the
/// mass of `w`. The search starts from the first-moment projection of the
/// Cole–Hopf image, scans a bracket around it and polishes the best cell by
/// golden section.
pub fn dist_to_nwave_manifold(w: &Field, mu: f64, m: WeightExponent) -> Result<ManifoldFit> {
    const MAX_ITER: usize = 200;
    const SCAN: usize = 64;
    const HALF_WIDTH: f64 = 6.0;
    let grid = *w.grid();
    let mass = w.mass();
    let seed = spectral_project(&cole_hopf_forward(w, mu)?, 1)?;
    let scale = beta1_scale(mu);
    let u0 = (seed / scale).asinh();
    let (lo, hi) = (u0 - HALF_WIDTH, u0 + HALF_WIDTH);

    let objective = |u: f64| -> f64 {
        let params = match NWaveParams::with_mass(mu, mass, scale * u.sinh(), 0.0) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        match diffusive_nwave(&params, &grid) {
            Ok(wn) => weighted_distance(w, &wn, m).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    };

    let step = (hi - lo) / SCAN as f64;
    let (mut best_k, mut best_val) = (0usize, f64::INFINITY);
    for k in 0..=SCAN {
        let v = objective(lo + k as f64 * step);
        if v < best_val {
            best_k = k;
            best_val = v;
        }
    }
    if !best_val.is_finite() {
        return Err(Error::NoConvergence {
            iterations: SCAN,
            what: "no admissible beta1 in the search bracket".into(),
        });
    }
    let a = lo + best_k.saturating_sub(1) as f64 * step;
    let b = (lo + (best_k + 1) as f64 * step).min(hi);
    let (u, val, iters) = golden_section(objective, a, b, 1e-13 * (1.0 + u0.abs()), MAX_ITER);
    if iters >= MAX_ITER {
        return Err(Error::NoConvergence {
            iterations: iters,
            what: "golden-section search for beta1".into(),
        });
    }
    let (u, distance) = if val <= best_val {
        (u, val)
    } else {
        (lo + best_k as f64 * step, best_val)
    };
    Ok(ManifoldFit {
        distance,
        params: NWaveParams::with_mass(mu, mass, scale * u.sinh(), 0.0)?,
        bracket: (scale * lo.sinh(), scale * hi.sinh()),
    })
}

/// Result of a log-linear fit `value ≈ C e^{rate·τ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Least-squares slope of `log(value)` against `τ` over `τ ∈ [lo, hi]`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            got: pts.len(),
            need: MIN_FIT_POINTS,
        });
    }
    if let Some(&(tau, value)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive { tau, value });
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t, v.ln())).collect();
    let (slope, intercept, r_squared) = linear_regression(&xy);
    Ok(RateFit {
        rate: slope,
        intercept,
        r_squared,
        points: xy.len(),
    })
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, a, r²)`.
pub fn linear_regression(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// How the distance threshold of [`transient_time_with`] is interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Absolute(f64),
    /// Fraction of `‖N_{p,q}‖_{L²(m)}` for the reference N-wave.
    Relative(f64),
}

/// Which `(p, q)` define the reference inviscid N-wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PqReference {
    /// Recomputed from every snapshot.
    #[default]
    Tracking,
    /// Taken once from the initial snapshot.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientTime {
    pub tau: f64,
    pub distance: f64,
    pub threshold: f64,
    pub p: f64,
    pub q: f64,
}

/// First snapshot within absolute distance `delta` of `N_{p,q}`, with `(p, q)`
/// measured on that snapshot.
pub fn transient_time(traj: &Trajectory, delta: f64, m: WeightExponent) -> Result<TransientTime> {
    transient_time_with(traj, Threshold::Absolute(delta), PqReference::Tracking, m)
}

pub fn transient_time_with(
    traj: &Trajectory,
    threshold: Threshold,
    reference: PqReference,
    m: WeightExponent,
) -> Result<TransientTime> {
    let first = traj
        .snapshots()
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let frozen = pq_functionals(&first.1);
    let mut closest = (f64::INFINITY, f64::NAN, f64::NAN);
    for (tau, field) in traj.snapshots() {
        let (p, q) = match reference {
            PqReference::Tracking => pq_functionals(field),
            PqReference::Frozen => frozen,
        };
        let n = inviscid_nwave(&InviscidNWaveParams::new(p.max(0.0), q.max(0.0))?, field.grid())?;
        let delta = match threshold {
            Threshold::Absolute(d) => d,
            Threshold::Relative(r) => r * weighted_norm(&n, m),
        };
        let dist = weighted_distance(field, &n, m)?;
        if dist <= delta {
            return Ok(TransientTime {
                tau: *tau,
                distance: dist,
                threshold: delta,
                p,
                q,
            });
        }
        let rel = dist - delta;
        if rel < closest.0 {
            closest = (rel, dist, *tau);
        }
    }
    Err(Error::NeverCrossed {
        threshold: match threshold {
            Threshold::Absolute(d) | Threshold::Relative(d) => d,
        },
        closest: closest.1,
        tau: closest.2,
    })
}
