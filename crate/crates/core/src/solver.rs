//! Time stepper for the rescaled Burgers equation in conservation form,
//!
//! ```text
//! ∂τ w = ∂ξ( μ ∂ξ w + ξ w / 2 − w² / 2 ),
//! ```
//!
//! independent of the Cole–Hopf machinery.
//!
//! Space: midpoint fluxes on the uniform grid, with the drift flux
//! `ξ_{i+½}(w_i + w_{i+1})/4` and the skew-symmetric Burgers flux
//! `(w_i² + w_i w_{i+1} + w_{i+1}²)/6`; both ends are held at zero. Time: a
//! two-stage IMEX midpoint scheme: a half step with implicit diffusion and
//! explicit transport, then a full step with everything evaluated at the
//! stage. The diffusive part reduces to Crank–Nicolson, so the scheme is
//! second order and needs one tridiagonal solve per step.

use crate::error::{Error, Result};
use crate::numerics::solve_tridiagonal;
use crate::similarity::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    DirichletZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Second-order central fluxes, implicit diffusion, explicit transport.
    #[default]
    CentralImex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Requested step; halved automatically while it exceeds the CFL bound.
    pub dt: f64,
    pub cfl_safety: f64,
    pub boundary: Boundary,
    pub scheme: Scheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            cfl_safety: 0.4,
            boundary: Boundary::DirichletZero,
            scheme: Scheme::CentralImex,
        }
    }
}

impl SolverConfig {
    pub const MAX_HALVINGS: usize = 20;

    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    /// `safety · min(h²/2μ, h/(max|w| + max|ξ|/2))`.
    pub fn cfl_bound(&self, grid: &Grid, mu: f64, max_w: f64) -> f64 {
        let h = grid.spacing();
        let speed = max_w + 0.5 * grid.max_abs();
        self.cfl_safety * (h * h / (2.0 * mu)).min(h / speed)
    }
}

/// Snapshots of a solution with the mass of each one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    snapshots: Vec<(f64, Field)>,
    mass_ledger: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self {
            snapshots: Vec::new(),
            mass_ledger: Vec::new(),
        }
    }

    /// Append a snapshot; `tau` must exceed the last recorded time.
    pub fn push(&mut self, tau: f64, field: Field) -> Result<()> {
        if let Some((last, _)) = self.snapshots.last() {
            if !(tau > *last) {
                return Err(Error::InvalidParameter(format!(
                    "snapshot time {tau} not after {last}"
                )));
            }
        }
        self.mass_ledger.push(field.mass());
        self.snapshots.push((tau, field));
        Ok(())
    }

    pub fn snapshots(&self) -> &[(f64, Field)] {
        &self.snapshots
    }

    pub fn mass_ledger(&self) -> &[f64] {
        &self.mass_ledger
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&(f64, Field)> {
        self.snapshots.last()
    }

    /// Snapshot whose time is closest to `tau`.
    pub fn nearest(&self, tau: f64) -> Option<&(f64, Field)> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - tau).abs().total_cmp(&(b.0 - tau).abs()))
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new()
    }
}

/// Relative edge amplitude allowed in initial data.
pub const INITIAL_EDGE_DECAY: f64 = 1e-10;

struct Workspace {
    mid_xi: Vec<f64>,
    flux: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch: Vec<f64>,
    stage: Vec<f64>,
    tendency: Vec<f64>,
}

impl Workspace {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_points();
        let h = grid.spacing();
        Self {
            mid_xi: (0..n - 1).map(|i| grid.node(i) + 0.5 * h).collect(),
            flux: vec![0.0; n - 1],
            rhs: vec![0.0; n - 2],
            lower: vec![0.0; n - 2],
            diag: vec![0.0; n - 2],
            upper: vec![0.0; n - 2],
            scratch: vec![0.0; n - 2],
            stage: vec![0.0; n],
            tendency: vec![0.0; n],
        }
    }
}

/// Transport flux `ξw/2 − w²/2` at each midpoint.
fn transport_flux(w: &[f64], mid_xi: &[f64], flux: &mut [f64]) {
    for i in 0..flux.len() {
        let (a, b) = (w[i], w[i + 1]);
        flux[i] = 0.25 * mid_xi[i] * (a + b) - (a * a + a * b + b * b) / 6.0;
    }
}

/// Full flux `μ w' + ξw/2 − w²/2` at each midpoint.
fn total_flux(w: &[f64], mid_xi: &[f64], mu: f64, h: f64, flux: &mut [f64]) {
    transport_flux(w, mid_xi, flux);
    for i in 0..flux.len() {
        flux[i] += mu * (w[i + 1] - w[i]) / h;
    }
}

fn step(w: &mut [f64], mu: f64, h: f64, dt: f64, ws: &mut Workspace) {
    let n = w.len();
    let m = n - 2;
    // stage: (I − dt/2 D) w* = w + dt/2 E(w)
    transport_flux(w, &ws.mid_xi, &mut ws.flux);
    let r = 0.5 * dt * mu / (h * h);
    for k in 0..m {
        let i = k + 1;
        ws.rhs[k] = w[i] + 0.5 * dt * (ws.flux[i] - ws.flux[i - 1]) / h;
        ws.lower[k] = -r;
        ws.upper[k] = -r;
        ws.diag[k] = 1.0 + 2.0 * r;
    }
    solve_tridiagonal(&ws.lower, &ws.diag, &ws.upper, &mut ws.rhs, &mut ws.scratch);
    ws.stage[0] = 0.0;
    ws.stage[n - 1] = 0.0;
    ws.stage[1..n - 1].copy_from_slice(&ws.rhs);
    // full step with every term at the stage
    total_flux(&ws.stage, &ws.mid_xi, mu, h, &mut ws.flux);
    for i in 1..n - 1 {
        ws.tendency[i] = (ws.flux[i] - ws.flux[i - 1]) / h;
    }
    for (wi, ti) in w[1..n - 1].iter_mut().zip(&ws.tendency[1..n - 1]) {
        *wi += dt * ti;
    }
    w[0] = 0.0;
    w[n - 1] = 0.0;
}

/// Integrate from `w0` to `tau_end`, recording a snapshot at `τ = 0`, at every
/// multiple of `snapshot_every`, and at `tau_end`.
pub fn evolve(
    w0: &Field,
    mu: f64,
    tau_end: f64,
    config: &SolverConfig,
    snapshot_every: f64,
) -> Result<Trajectory> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("viscosity mu = {mu} must be > 0")));
    }
    if !(tau_end >= 0.0) || !(snapshot_every > 0.0) || !(config.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need tau_end >= 0, snapshot_every > 0, dt > 0; got {tau_end}, {snapshot_every}, {}",
            config.dt
        )));
    }
    if !(config.cfl_safety > 0.0 && config.cfl_safety <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cfl_safety = {} not in (0, 1]",
            config.cfl_safety
        )));
    }
    let grid = *w0.grid();
    let peak = w0.sup_norm();
    let v0 = w0.values();
    let edge = v0[0].abs().max(v0[v0.len() - 1].abs());
    if peak > 0.0 && edge > INITIAL_EDGE_DECAY * peak {
        return Err(Error::BoundaryDecay { ratio: edge / peak });
    }

    let h = grid.spacing();
    let mut ws = Workspace::new(&grid);
    let mut w = v0.to_vec();
    let n = w.len();
    w[0] = 0.0;
    w[n - 1] = 0.0;

    let mut traj = Trajectory::new();
    traj.push(0.0, Field::new(grid, w.clone())?)?;

    let mut dt = config.dt;
    let mut halvings = 0;
    let mut tau = 0.0;
    let mut k = 1usize;
    while tau < tau_end {
        let target = (k as f64 * snapshot_every).min(tau_end);
        k += 1;
        if target - tau <= 1e-12 * tau_end.max(1.0) {
            continue;
        }
        while tau < target {
            let max_w = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = config.cfl_bound(&grid, mu, max_w);
            while dt > bound {
                if halvings == SolverConfig::MAX_HALVINGS {
                    return Err(Error::Cfl { halvings, dt, bound });
                }
                dt *= 0.5;
                halvings += 1;
            }
            // land exactly on the snapshot time
            let remaining = target - tau;
            let substeps = (remaining / dt).ceil().max(1.0);
            let this_dt = remaining / substeps;
            step(&mut w, mu, h, this_dt, &mut ws);
            tau = if substeps <= 1.0 { target } else { tau + this_dt };
            if w.iter().any(|v| !v.is_finite()) {
                let (last_tau, last) = traj.last().cloned().expect("initial snapshot recorded");
                return Err(Error::NaN {
                    tau,
                    last_good_tau: last_tau,
                    last_good: Box::new(last),
                });
            }
        }
        traj.push(target, Field::new(grid, w.clone())?)?;
    }
    Ok(traj)
}

/// Discrete sup-norm of `∂ξ(μ w' + ξw/2 − w²/2)` over interior nodes, with the
/// same fluxes the solver uses.
pub fn stationary_residual(w: &Field, mu: f64) -> f64 {
    let grid = w.grid();
    let h = grid.spacing();
    let mid: Vec<f64> = (0..grid.n_points() - 1).map(|i| grid.node(i) + 0.5 * h).collect();
    let mut flux = vec![0.0; grid.n_points() - 1];
    total_flux(w.values(), &mid, mu, h, &mut flux);
    flux.windows(2)
        .map(|f| ((f[1] - f[0]) / h).abs())
        .fold(0.0, f64::max)
}
