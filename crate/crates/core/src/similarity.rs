//! Scaling variables, uniform grids, sampled fields and the algebraically
//! weighted `L²(m)` norm.
//!
//! The change of variables is
//!
//! ```text
//! u(x, t) = w(ξ, τ) / √(1+t),   ξ = x / √(1+t),   τ = log(1+t)
//! ```
//!
//! and `‖f‖²_{L²(m)} = ∫ (1+ξ²)^m |f(ξ)|² dξ`, approximated by composite
//! Simpson on the grid.

use crate::error::{Error, Result};
use crate::numerics;

/// Uniform 1D mesh `xi_min = ξ_0 < ξ_1 < … < ξ_{n-1} = xi_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    xi_min: f64,
    xi_max: f64,
    n_points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(xi_min: f64, xi_max: f64, n_points: usize) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} < {}",
                Self::MIN_POINTS
            )));
        }
        if !(xi_min.is_finite() && xi_max.is_finite()) || xi_max <= xi_min {
            return Err(Error::InvalidGrid(format!(
                "need finite xi_min < xi_max, got [{xi_min}, {xi_max}]"
            )));
        }
        Ok(Self {
            xi_min,
            xi_max,
            n_points,
        })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    /// Symmetric grid with (close to) the requested spacing and an odd point
    /// count so that ξ = 0 is a node.
    pub fn with_spacing(half_width: f64, spacing: f64) -> Result<Self> {
        let cells = (2.0 * half_width / spacing).ceil() as usize;
        let cells = cells + cells % 2;
        Self::symmetric(half_width, cells + 1)
    }

    pub fn xi_min(&self) -> f64 {
        self.xi_min
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.xi_max - self.xi_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        // pin the last node exactly to xi_max
        if i + 1 == self.n_points {
            self.xi_max
        } else {
            self.xi_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Largest `|ξ|` on the grid.
    pub fn max_abs(&self) -> f64 {
        self.xi_min.abs().max(self.xi_max.abs())
    }
}

/// Truncation half-width `L` for a problem with N-wave masses `p, q` and
/// viscosity `mu`: Gaussian tails beyond `L` are far below double precision.
pub fn domain_half_width(p: f64, q: f64, mu: f64) -> f64 {
    p.max(0.0).sqrt().max(q.max(0.0).sqrt()) + 10.0 * (mu * mu.ln().abs().max(1.0)).sqrt() + 5.0
}

/// Real-valued samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every node.
    pub fn from_fn<F: FnMut(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Total mass `∫ f` by the trapezoid rule, which is the quantity the
    /// flux-form solver conserves to round-off.
    pub fn mass(&self) -> f64 {
        numerics::trapezoid(&self.values, self.grid.spacing())
    }

    /// `∫ f` by composite Simpson.
    pub fn integral(&self) -> f64 {
        numerics::simpson(&self.values, self.grid.spacing())
    }

    /// Running integral `∫_{ξ_min}^{ξ_i} f`.
    pub fn primitive(&self) -> Vec<f64> {
        numerics::cumulative_simpson(&self.values, self.grid.spacing())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |f - g|`.
    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Interpolated value; `None` outside the grid.
    pub fn eval(&self, xi: f64) -> Option<f64> {
        numerics::lagrange4(&self.values, self.grid.xi_min(), self.grid.spacing(), xi)
    }

    pub fn map<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> Result<Field> {
        let values = self
            .grid
            .nodes()
            .zip(&self.values)
            .map(|(x, &v)| f(x, v))
            .collect();
        Field::new(self.grid, values)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::new(self.grid, values)
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Weight exponent `m` of `L²(m)`; must exceed 3/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightExponent(f64);

impl WeightExponent {
    pub const DEFAULT: WeightExponent = WeightExponent(2.0);

    pub fn new(m: f64) -> Result<Self> {
        if !(m > 1.5) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight exponent m = {m} must be > 3/2"
            )));
        }
        Ok(Self(m))
    }

    /// Any finite exponent, including the unweighted `m = 0`. Only for
    /// quadrature checks; the manifold statements need `m > 3/2`.
    pub fn unchecked(m: f64) -> Self {
        Self(m)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for WeightExponent {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Map a physical snapshot `u(·, t)` onto the ξ-grid `target`.
///
/// Returns the rescaled field together with `τ = log(1+t)`.
pub fn to_similarity(u: &Field, t: f64, target: &Grid) -> Result<(Field, f64)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time t = {t} must be >= 0")));
    }
    let scale = (1.0 + t).sqrt();
    let src = u.grid();
    let need_min = target.xi_min() * scale;
    let need_max = target.xi_max() * scale;
    let slack = 1e-12 * src.max_abs().max(1.0);
    if need_min < src.xi_min() - slack || need_max > src.xi_max() + slack {
        return Err(Error::InsufficientCoverage {
            have_min: src.xi_min(),
            have_max: src.xi_max(),
            need_min,
            need_max,
        });
    }
    let values = target
        .nodes()
        .map(|xi| {
            let x = (xi * scale).clamp(src.xi_min(), src.xi_max());
            scale * u.eval(x).unwrap_or(0.0)
        })
        .collect();
    Ok((Field::new(*target, values)?, t.ln_1p()))
}

/// Inverse of [`to_similarity`]: sample `u(·, t)` with `t = e^τ - 1` on the
/// physical grid `target`. Points whose preimage falls outside the ξ-grid
/// get the value zero.
pub fn from_similarity(w: &Field, tau: f64, target: &Grid) -> Result<(Field, f64)> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
    }
    let t = tau.exp_m1();
    let scale = (1.0 + t).sqrt();
    let values = target
        .nodes()
        .map(|x| w.eval(x / scale).map_or(0.0, |v| v / scale))
        .collect();
    Ok((Field::new(*target, values)?, t))
}

/// `‖f‖_{L²(m)}` by composite Simpson.
pub fn weighted_norm(f: &Field, m: WeightExponent) -> f64 {
    let m = m.get();
    let integrand: Vec<f64> = f
        .grid()
        .nodes()
        .zip(f.values())
        .map(|(xi, v)| (1.0 + xi * xi).powf(m) * v * v)
        .collect();
    numerics::simpson(&integrand, f.grid().spacing())
        .max(0.0)
        .sqrt()
}

/// `‖f - g‖_{L²(m)}`.
pub fn weighted_distance(f: &Field, g: &Field, m: WeightExponent) -> Result<f64> {
    Ok(weighted_norm(&f.lin_comb(1.0, g, -1.0)?, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian;

    fn heat_profile(x: f64, mu: f64, t: f64) -> f64 {
        (-x * x / (4.0 * mu * (1.0 + t))).exp() / (4.0 * std::f64::consts::PI * mu * (1.0 + t)).sqrt()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(0.0, 1.0, 15).is_err());
        assert!(Grid::new(1.0, 1.0, 32).is_err());
        assert!(Grid::new(f64::NAN, 1.0, 32).is_err());
        let g = Grid::new(-2.0, 2.0, 17).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.node(16), 2.0);
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = Grid::symmetric(1.0, 16).unwrap();
        assert!(matches!(Field::new(g, vec![0.0; 15]), Err(Error::InvalidGrid(_))));
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(Field::new(g, v), Err(Error::NonFinite { index: 3 }));
    }

    #[test]
    fn weight_exponent_bound() {
        assert!(WeightExponent::new(1.5).is_err());
        assert!(WeightExponent::new(1.51).is_ok());
        assert_eq!(WeightExponent::default().get(), 2.0);
    }

    #[test]
    fn zero_field_at_positive_time() {
        let phys = Grid::symmetric(30.0, 601).unwrap();
        let xi = Grid::symmetric(10.0, 201).unwrap();
        let (w, tau) = to_similarity(&Field::zeros(phys), 5.0, &xi).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
        assert_eq!(tau, 6f64.ln());
    }

    #[test]
    fn identity_at_time_zero() {
        let g = Grid::symmetric(4.0, 161).unwrap();
        let u = Field::from_fn(g, |x| (-(x - 0.3).powi(2)).exp()).unwrap();
        let (w, tau) = to_similarity(&u, 0.0, &g).unwrap();
        assert_eq!(tau, 0.0);
        assert!(w.sup_distance(&u).unwrap() < 1e-15);
        let (back, t) = from_similarity(&w, 0.0, &g).unwrap();
        assert_eq!(t, 0.0);
        assert!(back.sup_distance(&u).unwrap() < 1e-15);
    }

    #[test]
    fn negative_times_rejected() {
        let g = Grid::symmetric(4.0, 32).unwrap();
        let f = Field::zeros(g);
        assert!(to_similarity(&f, -0.1, &g).is_err());
        assert!(from_similarity(&f, -0.1, &g).is_err());
    }

    #[test]
    fn coverage_error_reports_extent() {
        let phys = Grid::symmetric(5.0, 101).unwrap();
        let xi = Grid::symmetric(4.0, 81).unwrap();
        match to_similarity(&Field::zeros(phys), 3.0, &xi) {
            Err(Error::InsufficientCoverage { need_max, .. }) => assert!((need_max - 8.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn heat_kernel_maps_to_gaussian_eigenfunction() {
        // u(x, 3) = heat kernel of width 4μ(1+t)  ->  w = φ₀
        let mu = 0.05;
        let t = 3.0;
        let phys = Grid::symmetric(6.0, 1201).unwrap();
        let xi = Grid::symmetric(3.0, 301).unwrap();
        let u = Field::from_fn(phys, |x| heat_profile(x, mu, t)).unwrap();
        let (w, tau) = to_similarity(&u, t, &xi).unwrap();
        assert!((tau - 4f64.ln()).abs() < 1e-15);
        let exact = Field::from_fn(xi, |s| gaussian(s, mu)).unwrap();
        // interpolation error bound of 4-point Lagrange: h⁴/24·max|u⁗|·(9/16)
        let h = phys.spacing();
        let s2 = 2.0 * mu * (1.0 + t);
        let u4max = 3.0 / s2.powi(2) * heat_profile(0.0, mu, t);
        let interp = h.powi(4) / 24.0 * u4max * 2.0;
        assert!(w.sup_distance(&exact).unwrap() <= 2.0 * interp);
    }

    #[test]
    fn from_similarity_of_gaussian() {
        let mu = 0.05;
        let tau = 6f64.ln();
        let xi = Grid::symmetric(3.0, 601).unwrap();
        let phys = Grid::symmetric(5.0, 401).unwrap();
        let w = Field::from_fn(xi, |s| gaussian(s, mu)).unwrap();
        let (u, t) = from_similarity(&w, tau, &phys).unwrap();
        assert!((t - 5.0).abs() < 1e-14);
        let r6 = 6f64.sqrt();
        let exact = Field::from_fn(phys, |x| gaussian(x / r6, mu) / r6).unwrap();
        assert!(u.sup_distance(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn roundtrip_for_sampled_times() {
        let phys = Grid::symmetric(8.0, 1601).unwrap();
        let u = Field::from_fn(phys, |x| (-(x - 0.5) * (x - 0.5) * 2.0).exp() - 0.5 * (-(x + 1.0).powi(2) * 3.0).exp())
            .unwrap();
        for t in [0.0, 1.0, 10.0, 100.0] {
            let s = (1.0f64 + t).sqrt();
            // same resolution in ξ as the image of the physical grid
            let xi = Grid::symmetric(8.0 / s, 1601).unwrap();
            let (w, tau) = to_similarity(&u, t, &xi).unwrap();
            // single-interpolation error of the forward map, measured
            let exact_w = Field::from_fn(xi, |z| s * u_fn(z * s)).unwrap();
            let interp = w.sup_distance(&exact_w).unwrap().max(1e-15);
            let (back, _) = from_similarity(&w, tau, &phys).unwrap();
            let err = back.sup_distance(&u).unwrap();
            assert!(err <= 10.0 * interp + 1e-13, "t={t}: err {err:e} interp {interp:e}");
        }

        fn u_fn(x: f64) -> f64 {
            (-(x - 0.5) * (x - 0.5) * 2.0).exp() - 0.5 * (-(x + 1.0).powi(2) * 3.0).exp()
        }
    }

    #[test]
    fn norm_of_hat_is_exact_on_aligned_grid() {
        // hat: 1 - |ξ| on [-1, 1]; ∫ hat² = 2/3
        let g = Grid::symmetric(4.0, 81).unwrap();
        let f = Field::from_fn(g, |x| (1.0 - x.abs()).max(0.0)).unwrap();
        let n = weighted_norm(&f, WeightExponent::unchecked(0.0));
        assert!((n * n - 2.0 / 3.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = Grid::symmetric(4.0, 81).unwrap();
        assert_eq!(weighted_norm(&Field::zeros(g), WeightExponent::DEFAULT), 0.0);
    }

    #[test]
    fn distance_basics() {
        let g = Grid::symmetric(4.0, 81).unwrap();
        let f = Field::from_fn(g, |x| gaussian(x, 0.3)).unwrap();
        let h = Field::from_fn(g, |x| x * gaussian(x, 0.2)).unwrap();
        let m = WeightExponent::DEFAULT;
        assert_eq!(weighted_distance(&f, &f, m).unwrap(), 0.0);
        assert_eq!(weighted_distance(&f, &h, m).unwrap(), weighted_distance(&h, &f, m).unwrap());
        assert_eq!(weighted_distance(&f, &Field::zeros(g), m).unwrap(), weighted_norm(&f, m));
        let other = Field::zeros(Grid::symmetric(4.0, 82).unwrap());
        assert_eq!(weighted_distance(&f, &other, m), Err(Error::GridMismatch));
    }
}
