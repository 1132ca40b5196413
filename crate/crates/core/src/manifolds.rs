//! Closed-form invariant families of the rescaled viscous Burgers equation
//!
//! ```text
//! ∂τ w = μ ∂ξ² w + ½ ∂ξ(ξ w) − w ∂ξ w
//! ```
//!
//! * eigenfunctions `φ_n = ∂ξⁿ φ₀` of the linear part, `φ₀ = e^{-ξ²/4μ}/√(4πμ)`;
//! * the diffusion waves `A_M`, a line of fixed points parameterized by mass;
//! * the diffusive N-waves `w_N(β0, β1, τ)`, the Cole–Hopf image of
//!   `β0 φ₀ + β1 e^{-τ/2} φ₁`, and their equivalent form built on `A_M`;
//! * the linearized eigenfunctions `Φ_n` and the conjugacy `U`;
//! * the inviscid N-waves `N_{p,q}` and the `(β0, β1) ↔ (p, q)` dictionary.
//!
//! Every denominator that contains `e^{±M/2μ}` is evaluated in the factored
//! form `D(ξ) = Φ(−ξ) + e^{−M/2μ} Φ(ξ)` (with `Φ` the Gaussian CDF) so no
//! cancellation happens between the two tails.

use crate::diagnostics::pq_functionals;
use crate::error::{Error, Result};
use crate::numerics::{gaussian, gaussian_cdf, hermite, ln_add_exp};
use crate::similarity::{domain_half_width, Field, Grid};

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("viscosity mu = {mu} must be > 0")));
    }
    Ok(())
}

/// One point `(μ, M)` on the line of diffusion waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionWaveParams {
    mu: f64,
    mass: f64,
    alpha0: f64,
    beta0: f64,
}

impl DiffusionWaveParams {
    /// Largest `|M|/2μ` for which `e^{|M|/2μ}` stays finite.
    const MAX_EXPONENT: f64 = 700.0;

    pub fn new(mu: f64, mass: f64) -> Result<Self> {
        check_mu(mu)?;
        if !mass.is_finite() || (mass / (2.0 * mu)).abs() > Self::MAX_EXPONENT {
            return Err(Error::InvalidParameter(format!(
                "mass {mass} out of range for mu = {mu}"
            )));
        }
        // 1 - e^{-M/2μ}
        let one_minus_tail = -(-mass / (2.0 * mu)).exp_m1();
        Ok(Self {
            mu,
            mass,
            alpha0: (mu / std::f64::consts::PI).sqrt() * one_minus_tail,
            beta0: 2.0 * mu * one_minus_tail,
        })
    }

    /// Parameterize by the amplitude `α0` instead of the mass.
    pub fn from_alpha0(mu: f64, alpha0: f64) -> Result<Self> {
        check_mu(mu)?;
        let x = alpha0 * (std::f64::consts::PI / mu).sqrt();
        if !(x < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "1 - alpha0·sqrt(pi/mu) = {} must be > 0",
                1.0 - x
            )));
        }
        Self::new(mu, -2.0 * mu * (-x).ln_1p())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `e^{-M/2μ} = 1 − α0 √(π/μ)`.
    pub fn tail_factor(&self) -> f64 {
        (-self.mass / (2.0 * self.mu)).exp()
    }

    /// `D_A(ξ) = 1 − (β0/2μ) ∫_{-∞}^ξ φ₀ = e^{-(1/2μ)∫_{-∞}^ξ A_M}`.
    pub fn denominator(&self, xi: f64) -> f64 {
        gaussian_cdf(-xi, self.mu) + self.tail_factor() * gaussian_cdf(xi, self.mu)
    }

    /// `A_M(ξ)`.
    pub fn value(&self, xi: f64) -> f64 {
        self.beta0 * gaussian(xi, self.mu) / self.denominator(xi)
    }

    /// `A_M'(ξ) = A_M (A_M − ξ) / 2μ`, from the stationary equation.
    pub fn derivative(&self, xi: f64) -> f64 {
        let a = self.value(xi);
        a * (a - xi) / (2.0 * self.mu)
    }
}

/// One point on the manifold of diffusive N-waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NWaveParams {
    pub mu: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub tau: f64,
}

impl NWaveParams {
    pub fn new(mu: f64, beta0: f64, beta1: f64, tau: f64) -> Result<Self> {
        check_mu(mu)?;
        if !(beta0.is_finite() && beta1.is_finite()) || !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need finite beta0, beta1 and tau >= 0, got ({beta0}, {beta1}, {tau})"
            )));
        }
        if beta0 / (2.0 * mu) >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "beta0/2mu = {} must be < 1 (finite mass)",
                beta0 / (2.0 * mu)
            )));
        }
        Ok(Self {
            mu,
            beta0,
            beta1,
            tau,
        })
    }

    /// N-wave whose mass is `M`; `β0` follows from the mass.
    pub fn with_mass(mu: f64, mass: f64, beta1: f64, tau: f64) -> Result<Self> {
        let dw = DiffusionWaveParams::new(mu, mass)?;
        Self::new(mu, dw.beta0(), beta1, tau)
    }

    /// Mass `M = −2μ log(1 − β0/2μ)`.
    pub fn mass(&self) -> f64 {
        -2.0 * self.mu * (-self.beta0 / (2.0 * self.mu)).ln_1p()
    }

    /// The diffusion wave this N-wave decays to.
    pub fn diffusion_wave(&self) -> Result<DiffusionWaveParams> {
        DiffusionWaveParams::new(self.mu, self.mass())
    }

    /// `β1 e^{-τ/2}`, the coefficient actually multiplying `φ₁`.
    pub fn scaled_beta1(&self) -> f64 {
        self.beta1 * (-0.5 * self.tau).exp()
    }

    /// Same point, reparameterized to `τ = 0`.
    pub fn at_time_zero(&self) -> Self {
        Self {
            beta1: self.scaled_beta1(),
            tau: 0.0,
            ..*self
        }
    }

    /// Advance along the family: `(β0, β1, τ) ↦ (β0, β1, τ + s)`.
    pub fn advanced(&self, s: f64) -> Self {
        Self {
            tau: self.tau + s,
            ..*self
        }
    }

    /// `α1 = β1/β0`, the coefficient of the equivalent `A_M`-based form.
    pub fn alpha1(&self) -> Option<f64> {
        (self.beta0 != 0.0).then(|| self.beta1 / self.beta0)
    }

    /// `1 − (β0/2μ)∫φ₀ − (β1/2μ) e^{-τ/2} φ₀`.
    pub fn denominator(&self, xi: f64) -> Result<f64> {
        let dw = self.diffusion_wave()?;
        Ok(dw.denominator(xi) - self.scaled_beta1() / (2.0 * self.mu) * gaussian(xi, self.mu))
    }
}

/// Inviscid N-wave masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InviscidNWaveParams {
    pub p: f64,
    pub q: f64,
}

impl InviscidNWaveParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p >= 0.0 && q >= 0.0) || !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "N-wave masses must be finite and >= 0, got p = {p}, q = {q}"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn mass(&self) -> f64 {
        0.5 * (self.q - self.p)
    }
}

/// `φ_n` for `n ≤ 6`, as a Hermite polynomial times the Gaussian.
pub fn eigenfunction_phi(n: usize, mu: f64, grid: &Grid) -> Result<Field> {
    if n > 6 {
        return Err(Error::InvalidParameter(format!("eigenfunction order {n} > 6")));
    }
    check_mu(mu)?;
    let c = 1.0 / (2.0 * mu.sqrt());
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pref = sign * c.powi(n as i32);
    Field::from_fn(*grid, |xi| pref * hermite(n, xi * c) * gaussian(xi, mu))
}

/// Sampled diffusion wave `A_M`.
pub fn diffusion_wave(params: &DiffusionWaveParams, grid: &Grid) -> Result<Field> {
    Field::from_fn(*grid, |xi| params.value(xi))
}

/// `A_M'` in closed form.
pub fn diffusion_wave_derivative(params: &DiffusionWaveParams, grid: &Grid) -> Result<Field> {
    Field::from_fn(*grid, |xi| params.derivative(xi))
}

/// Map `M ↦ α0 ↦ M` through the closed-form relations.
///
/// Near saturation `α0 → √(μ/π)` the map from `α0` back to `M` has condition
/// number `~e^{M/2μ}`, so `α0` travels together with its complement
/// `1 − α0 √(π/μ) = e^{−M/2μ}`, and the inverse uses whichever of the two is
/// better conditioned.
pub fn mass_alpha0_roundtrip(mass: f64, mu: f64) -> Result<f64> {
    let dw = DiffusionWaveParams::new(mu, mass)?;
    let x = dw.alpha0() * (std::f64::consts::PI / mu).sqrt();
    let complement = dw.tail_factor();
    if complement < 0.5 {
        Ok(-2.0 * mu * complement.ln())
    } else {
        Ok(-2.0 * mu * (-x).ln_1p())
    }
}

/// Diffusive N-wave in the heat-equation parameterization.
///
/// Fails with [`Error::Positivity`] at the first node where the
/// denominator is not positive.
pub fn diffusive_nwave(params: &NWaveParams, grid: &Grid) -> Result<Field> {
    let dw = params.diffusion_wave()?;
    let mu = params.mu;
    let b = params.scaled_beta1();
    let mut values = Vec::with_capacity(grid.n_points());
    for xi in grid.nodes() {
        let g = gaussian(xi, mu);
        let den = dw.denominator(xi) - b / (2.0 * mu) * g;
        if !(den > 0.0) {
            return Err(Error::Positivity { xi, margin: den });
        }
        // β0 φ₀ + b φ₁ with φ₁ = −ξ φ₀ / 2μ
        values.push(g * (params.beta0 - b * xi / (2.0 * mu)) / den);
    }
    Field::new(*grid, values)
}

/// Diffusive N-wave written as a perturbation of `A_M` along `A_M'`:
/// `A_M + a A_M' / (1 − (a/2μ) A_M)` with `a = α1 e^{-τ/2}`.
pub fn diffusive_nwave_alt(mass: f64, alpha1: f64, tau: f64, mu: f64, grid: &Grid) -> Result<Field> {
    let dw = DiffusionWaveParams::new(mu, mass)?;
    let a = alpha1 * (-0.5 * tau).exp();
    let mut values = Vec::with_capacity(grid.n_points());
    for xi in grid.nodes() {
        let am = dw.value(xi);
        let den = 1.0 - a / (2.0 * mu) * am;
        if !(den > 0.0) {
            return Err(Error::Positivity { xi, margin: den });
        }
        values.push(am + a * dw.derivative(xi) / den);
    }
    Field::new(*grid, values)
}

/// Eigenfunctions `Φ_0, Φ_1` of the linearization about `A_M`:
/// `Φ_n = ∂ξ( ∫_{-∞}^ξ φ_n / D_A )`, differentiated in closed form.
#[allow(non_snake_case)]
pub fn eigenfunction_Phi(n: usize, mass: f64, mu: f64, grid: &Grid) -> Result<Field> {
    if n > 1 {
        return Err(Error::InvalidParameter(format!("Phi_n available for n in {{0,1}}, got {n}")));
    }
    let dw = DiffusionWaveParams::new(mu, mass)?;
    let k = dw.beta0() / (2.0 * mu);
    let phi_n = eigenfunction_phi(n, mu, grid)?;
    let values = grid
        .nodes()
        .zip(phi_n.values())
        .map(|(xi, &pn)| {
            let d = dw.denominator(xi);
            let g = gaussian(xi, mu);
            // ∫φ₀ = CDF, ∫φ₁ = φ₀
            let prim = if n == 0 { gaussian_cdf(xi, mu) } else { g };
            pn / d + prim * k * g / (d * d)
        })
        .collect();
    Field::new(*grid, values)
}

/// Direction of the conjugacy between `L_μ` and its linearization about `A_M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Apply `U` (or `U⁻¹`): `f ↦ ∂ξ[(∫_{-∞}^ξ f) E]` with `E = 1/D_A` (or
/// `E = D_A`). The product rule is expanded analytically so only `∫f` is
/// computed numerically.
pub fn conjugacy_apply(f: &Field, mass: f64, mu: f64, direction: Direction) -> Result<Field> {
    let dw = DiffusionWaveParams::new(mu, mass)?;
    let k = dw.beta0() / (2.0 * mu);
    let prim = f.primitive();
    let values = f
        .grid()
        .nodes()
        .zip(f.values().iter().zip(&prim))
        .map(|(xi, (&fv, &fi))| {
            let d = dw.denominator(xi);
            // D_A' = −k φ₀
            let dprime = -k * gaussian(xi, mu);
            match direction {
                Direction::Forward => fv / d - fi * dprime / (d * d),
                Direction::Inverse => fv * d + fi * dprime,
            }
        })
        .collect();
    Field::new(*f.grid(), values)
}

/// `N_{p,q}(ξ) = ξ` on `(−√p, √q)`, zero elsewhere. Nodes sitting exactly on
/// a jump take the left limit.
pub fn inviscid_nwave(params: &InviscidNWaveParams, grid: &Grid) -> Result<Field> {
    let left = -params.p.sqrt();
    let right = params.q.sqrt();
    Field::from_fn(*grid, |xi| if xi > left && xi <= right { xi } else { 0.0 })
}

/// Leading-order `β1 e^{-τ/2}` for an N-wave with masses `0 < q < p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta1Asymptotic {
    /// `β1 e^{-τ/2}`; may be `-inf` when `e^{p/4μ}` overflows.
    pub scaled_beta1: f64,
    /// `ln |β1 e^{-τ/2}|`, always finite.
    pub ln_abs_scaled_beta1: f64,
    /// `β1` itself at the requested `τ`.
    pub beta1: f64,
    /// Maximizer `y* = 2μβ0 / (β1 e^{-τ/2})` of the N-wave denominator.
    pub y_star: f64,
    /// `β0` fixed by the mass `(q − p)/2`.
    pub beta0: f64,
}

/// `β1 e^{-τ/2} ≈ −4 μ^{3/2} √π e^{p/4μ} − √μ/√π` for `0 < q < p`, evaluated
/// in log space.
pub fn beta1_asymptotic(p: f64, q: f64, mu: f64, tau: f64) -> Result<Beta1Asymptotic> {
    check_mu(mu)?;
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "p = {p}, q = {q}: both must be > 0 (beta1 = 0 otherwise)"
        )));
    }
    if !(q < p) {
        return Err(Error::InvalidParameter(format!(
            "q = {q} >= p = {p}; use beta1_asymptotic_reflected"
        )));
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let ln_lead = (4.0 * mu.powf(1.5) * sqrt_pi).ln() + p / (4.0 * mu);
    let ln_corr = (mu.sqrt() / sqrt_pi).ln();
    let ln_abs = ln_add_exp(ln_lead, ln_corr);
    Ok(assemble_beta1(p, q, mu, tau, ln_abs))
}

/// The `q > p > 0` branch, obtained from [`beta1_asymptotic`] through the
/// reflection `w(ξ) ↦ −w(−ξ)`, which swaps `p` and `q`, flips the mass and
/// multiplies `β1 e^{-τ/2}` by `e^{M/2μ}`.
pub fn beta1_asymptotic_reflected(p: f64, q: f64, mu: f64, tau: f64) -> Result<Beta1Asymptotic> {
    if !(q > p) {
        return Err(Error::InvalidParameter(format!("reflected branch needs q > p, got p = {p}, q = {q}")));
    }
    let mirrored = beta1_asymptotic(q, p, mu, tau)?;
    let mass = 0.5 * (q - p);
    let ln_abs = mirrored.ln_abs_scaled_beta1 - mass / (2.0 * mu);
    Ok(assemble_beta1(p, q, mu, tau, ln_abs))
}

fn assemble_beta1(p: f64, q: f64, mu: f64, tau: f64, ln_abs: f64) -> Beta1Asymptotic {
    let mass = 0.5 * (q - p);
    let g = -mass / (2.0 * mu);
    let beta0 = -2.0 * mu * g.exp_m1();
    // |β0| = 2μ |e^g − 1| in log space
    let ln_abs_beta0 = (2.0 * mu).ln()
        + if g > 0.0 {
            g + (-(-g).exp_m1()).ln()
        } else {
            (-g.exp_m1()).ln()
        };
    // y* = 2μβ0/b with b < 0
    let y_star = if beta0 == 0.0 {
        0.0
    } else {
        -beta0.signum() * ((2.0 * mu).ln() + ln_abs_beta0 - ln_abs).exp()
    };
    let scaled = -ln_abs.exp();
    Beta1Asymptotic {
        scaled_beta1: scaled,
        ln_abs_scaled_beta1: ln_abs,
        beta1: -(ln_abs + 0.5 * tau).exp(),
        y_star,
        beta0,
    }
}

/// Default grid used by [`beta_from_pq_numeric`].
pub fn default_pq_grid(p: f64, q: f64, mu: f64) -> Result<Grid> {
    let half = domain_half_width(p, q, mu);
    Grid::with_spacing(half, (mu / 4.0).min(2.5e-3))
}

/// Invert the `(p, q)` functionals on [`default_pq_grid`].
pub fn beta_from_pq_numeric(p: f64, q: f64, mu: f64) -> Result<NWaveParams> {
    beta_from_pq_numeric_on(p, q, mu, &default_pq_grid(p, q, mu)?)
}

/// Find the `τ = 0` N-wave whose sampled `(p, q)` functionals on `grid`
/// equal the given values. `β0` follows from the mass `(q − p)/2`; `β1 ≤ 0`
/// is found by bisection on `ln|β1|`.
pub fn beta_from_pq_numeric_on(p: f64, q: f64, mu: f64, grid: &Grid) -> Result<NWaveParams> {
    const MAX_STEPS: usize = 200;
    InviscidNWaveParams::new(p, q)?;
    if p == 0.0 && q == 0.0 {
        return Err(Error::InvalidParameter("p and q are both zero".into()));
    }
    let mass = 0.5 * (q - p);
    if p == 0.0 || q == 0.0 {
        return NWaveParams::with_mass(mu, mass, 0.0, 0.0);
    }
    let p_of = |s: f64| -> Result<f64> {
        let params = NWaveParams::with_mass(mu, mass, -s.exp(), 0.0)?;
        Ok(pq_functionals(&diffusive_nwave(&params, grid)?).0)
    };

    // seed from the leading-order asymptotics, then widen until bracketed
    let seed = if q < p {
        beta1_asymptotic(p, q, mu, 0.0)?.ln_abs_scaled_beta1
    } else {
        beta1_asymptotic_reflected(p, q, mu, 0.0)?.ln_abs_scaled_beta1
    };
    let mut steps = 0;
    let (mut lo, mut hi) = (seed - 4.0, seed + 4.0);
    while p_of(lo)? > p {
        lo -= 8.0;
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NoConvergence {
                iterations: steps,
                what: "bracketing ln|beta1| from below".into(),
            });
        }
    }
    while p_of(hi)? < p {
        hi += 8.0;
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::NoConvergence {
                iterations: steps,
                what: "bracketing ln|beta1| from above".into(),
            });
        }
    }
    while steps < MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        let pm = p_of(mid)?;
        if (pm - p).abs() <= 1e-9 * p || hi - lo < 1e-14 * mid.abs().max(1.0) {
            return NWaveParams::with_mass(mu, mass, -mid.exp(), 0.0);
        }
        if pm < p {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Err(Error::NoConvergence {
        iterations: steps,
        what: format!("bisection for beta1 at (p, q) = ({p}, {q}), mu = {mu}"),
    })
}
