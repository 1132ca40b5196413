//! Named studies, their configuration, and CSV output.
//!
//! Each study sweeps a list of viscosities. The sweep runs in parallel and the
//! per-`μ` results are merged in ascending `μ` order, so the output depends
//! only on the configuration and the seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::colehopf::{cole_hopf_forward, cole_hopf_inverse, exact_solution, heat_evolve};
use crate::diagnostics::{
    dist_to_nwave_manifold, fit_decay_rate, linear_regression, phi_remainder, pq_functionals,
    project_onto_nwave, transient_time_with, PqReference, Threshold,
};
use crate::error::{Error, Result};
use crate::manifolds::{
    beta1_asymptotic, beta1_asymptotic_reflected, beta_from_pq_numeric_on, diffusion_wave,
    diffusive_nwave, eigenfunction_phi, inviscid_nwave, DiffusionWaveParams, InviscidNWaveParams,
    NWaveParams,
};
use crate::similarity::{domain_half_width, weighted_distance, weighted_norm, Field, Grid, WeightExponent};
use crate::solver::{evolve, SolverConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Study {
    MetastabilityDemo,
    TransientScaling,
    DecayRates,
    Lemma1Convergence,
    OracleCompare,
    SpectrumCheck,
}

impl Study {
    pub const ALL: [Study; 6] = [
        Study::MetastabilityDemo,
        Study::TransientScaling,
        Study::DecayRates,
        Study::Lemma1Convergence,
        Study::OracleCompare,
        Study::SpectrumCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::MetastabilityDemo => "metastability-demo",
            Study::TransientScaling => "transient-scaling",
            Study::DecayRates => "decay-rates",
            Study::Lemma1Convergence => "lemma1-convergence",
            Study::OracleCompare => "oracle-compare",
            Study::SpectrumCheck => "spectrum-check",
        }
    }

    pub fn from_name(name: &str) -> Option<Study> {
        Study::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn description(self) -> &'static str {
        match self {
            Study::MetastabilityDemo => {
                "bump data at one viscosity: distance to the N-wave manifold at t = 2 and to the diffusion wave at t = 100"
            }
            Study::TransientScaling => {
                "time to reach a relative neighbourhood of the inviscid N-wave, fitted against |log mu|"
            }
            Study::DecayRates => {
                "decay of the remainder w - w_N and of the drift w_N - A_M near the diffusion waves"
            }
            Study::Lemma1Convergence => "distance between diffusive and inviscid N-waves as mu decreases",
            Study::OracleCompare => "solver against the exact Cole-Hopf solution, with the mass ledger",
            Study::SpectrumCheck => "decay rates of the first three eigenmodes under the exact heat flow",
        }
    }

    /// Metric names the study emits, one CSV file each.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Study::MetastabilityDemo => &[
                "manifold_rel_distance",
                "diffusion_wave_rel_distance",
                "inviscid_rel_distance",
                "fitted_beta1",
                "p",
                "q",
            ],
            Study::TransientScaling => &[
                "inviscid_rel_distance",
                "transient_time",
                "fit_slope",
                "fit_intercept",
                "fit_r_squared",
            ],
            Study::DecayRates => &[
                "remainder_norm",
                "remainder_norm_solver",
                "drift_norm",
                "remainder_rate",
                "remainder_r_squared",
                "drift_rate",
                "remainder_constant_ratio",
                "delta_n",
            ],
            Study::Lemma1Convergence => &[
                "nwave_distance",
                "nwave_rel_distance",
                "beta0",
                "beta1",
                "beta1_asymptotic",
                "beta0_over_beta1",
                "p_roundtrip",
                "q_roundtrip",
            ],
            Study::OracleCompare => &["sup_rel_error", "mass_drift"],
            Study::SpectrumCheck => &["mode_norm", "mode_rate", "mode_r_squared"],
        }
    }

    fn default_mu(self) -> Vec<f64> {
        match self {
            Study::MetastabilityDemo => vec![0.01],
            Study::TransientScaling => vec![0.05, 0.02, 0.01, 0.005],
            Study::Lemma1Convergence => vec![0.1, 0.05, 0.02, 0.01],
            Study::DecayRates | Study::OracleCompare | Study::SpectrumCheck => vec![0.05],
        }
    }

    fn default_pq(self) -> Option<(f64, f64)> {
        match self {
            Study::MetastabilityDemo => Some(METASTABILITY_PQ),
            Study::TransientScaling => Some(TRANSIENT_PQ),
            Study::Lemma1Convergence => Some((1.0, 0.5)),
            _ => None,
        }
    }

    fn default_m(self) -> f64 {
        match self {
            Study::DecayRates => 3.0,
            _ => 2.0,
        }
    }
}

impl std::fmt::Display for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `(p, q)` for the metastability demonstration. The diffusion-wave stage is
/// reached once `min(p, q)/4μ − τ/2` is of order one, so at `μ = 0.01` and
/// `t = 100` the smaller lobe has to be weak.
pub const METASTABILITY_PQ: (f64, f64) = (0.02, 0.5);
pub const TRANSIENT_PQ: (f64, f64) = (8.0, 4.0);
/// Relative size of the perturbation added to `w_N` in `decay-rates`.
pub const PERTURBATION_SIZE: f64 = 0.01;
/// `decay-rates` uses an N-wave whose `φ₁` term moves the denominator by at
/// most this fraction, i.e. a point in the neighbourhood of the diffusion
/// waves where the linear rates are visible over `τ ∈ [1, 5]`.
pub const LOCAL_NWAVE_SIZE: f64 = 0.05;
pub const RELATIVE_DELTA: f64 = 0.25;

/// Geometry of the two-Gaussian initial data, in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpShape {
    /// Centre of the negative lobe (left) and of the positive lobe (right).
    pub centres: (f64, f64),
    pub widths: (f64, f64),
}

impl BumpShape {
    pub const TRANSIENT: BumpShape = BumpShape {
        centres: (-1.0, 1.0),
        widths: (0.25, 0.25),
    };
    pub const COMPACT: BumpShape = BumpShape {
        centres: (-0.15, 0.15),
        widths: (0.05, 0.05),
    };

    /// Centres and widths each scaled by an independent factor in `[0.9, 1.1]`.
    pub fn jittered(self, rng: &mut ChaCha8Rng) -> BumpShape {
        let mut j = || rng.gen_range(0.9..=1.1);
        BumpShape {
            centres: (self.centres.0 * j(), self.centres.1 * j()),
            widths: (self.widths.0 * j(), self.widths.1 * j()),
        }
    }

    fn extent(&self) -> f64 {
        let a = self.centres.0.abs() + 10.0 * self.widths.0;
        let b = self.centres.1.abs() + 10.0 * self.widths.1;
        a.max(b)
    }
}

/// Negative Gaussian on the left plus positive Gaussian on the right, with
/// amplitudes adjusted until `pq_functionals` returns `(p, q)`.
pub fn gaussian_pair(p: f64, q: f64, shape: BumpShape, grid: &Grid) -> Result<Field> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::InvalidParameter(format!("bump data needs p, q > 0, got ({p}, {q})")));
    }
    let lobe = |c: f64, s: f64| {
        Field::from_fn(*grid, |x| {
            (-(x - c).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        })
    };
    let neg = lobe(shape.centres.0, shape.widths.0)?;
    let pos = lobe(shape.centres.1, shape.widths.1)?;
    let (mut a, mut b) = (0.5 * p, 0.5 * q);
    for _ in 0..50 {
        let w = neg.lin_comb(-a, &pos, b)?;
        let (pm, qm) = pq_functionals(&w);
        if (pm / p - 1.0).abs() < 1e-13 && (qm / q - 1.0).abs() < 1e-13 {
            return Ok(w);
        }
        a *= p / pm;
        b *= q / qm;
    }
    Err(Error::NoConvergence {
        iterations: 50,
        what: "amplitude fit of the Gaussian pair".into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub study: Study,
    pub mu_list: Vec<f64>,
    pub mass: f64,
    pub pq: Option<(f64, f64)>,
    pub m: WeightExponent,
    /// Number of grid points; derived from `μ` when absent.
    pub grid_n: Option<usize>,
    /// Half-width of the symmetric ξ-domain; derived from `μ` and `(p, q)` when absent.
    pub grid_l: Option<f64>,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(study: Study) -> Self {
        Self {
            study,
            mu_list: study.default_mu(),
            mass: 0.25,
            pq: study.default_pq(),
            m: WeightExponent::unchecked(study.default_m()),
            grid_n: None,
            grid_l: None,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_list.is_empty() {
            return Err(Error::Config("mu list is empty".into()));
        }
        if let Some(mu) = self.mu_list.iter().find(|mu| !(**mu > 0.0 && mu.is_finite())) {
            return Err(Error::Config(format!("mu = {mu} must be positive and finite")));
        }
        if !self.mass.is_finite() {
            return Err(Error::Config(format!("mass = {} must be finite", self.mass)));
        }
        if let Some((p, q)) = self.pq {
            if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite()) || p + q == 0.0 {
                return Err(Error::Config(format!("(p, q) = ({p}, {q}) must be non-negative, not both zero")));
            }
        }
        WeightExponent::new(self.m.get()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(n) = self.grid_n {
            if n < 16 {
                return Err(Error::Config(format!("grid-n = {n} must be at least 16")));
            }
        }
        if let Some(l) = self.grid_l {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("grid-l = {l} must be positive")));
            }
        }
        if !(self.solver.dt > 0.0) || !(self.solver.cfl_safety > 0.0 && self.solver.cfl_safety <= 1.0) {
            return Err(Error::Config("solver dt must be > 0 and cfl_safety in (0, 1]".into()));
        }
        Ok(())
    }

    /// Stable textual form; its SHA-256 is the config hash. The output
    /// directory is not part of it.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "study = {}", self.study);
        // a sweep is a set: order and repeats on the command line do not matter
        let mut sorted = self.mu_list.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mus: Vec<String> = sorted.iter().map(|m| fmt_f64(*m)).collect();
        let _ = writeln!(s, "mu = {}", mus.join(","));
        let _ = writeln!(s, "mass = {}", fmt_f64(self.mass));
        if let Some((p, q)) = self.pq {
            let _ = writeln!(s, "p = {}\nq = {}", fmt_f64(p), fmt_f64(q));
        }
        let _ = writeln!(s, "m = {}", fmt_f64(self.m.get()));
        if let Some(n) = self.grid_n {
            let _ = writeln!(s, "grid_n = {n}");
        }
        if let Some(l) = self.grid_l {
            let _ = writeln!(s, "grid_l = {}", fmt_f64(l));
        }
        let _ = writeln!(s, "dt = {}", fmt_f64(self.solver.dt));
        let _ = writeln!(s, "cfl_safety = {}", fmt_f64(self.solver.cfl_safety));
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Apply `key = value` overrides from a config file or the command line.
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        for (key, value) in &overrides.entries {
            let num = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))
            };
            match key.as_str() {
                "study" => {
                    self.study = Study::from_name(value)
                        .ok_or_else(|| Error::Config(format!("unknown study '{value}'")))?;
                }
                "mu" => {
                    self.mu_list = value
                        .split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::Config(format!("mu: '{v}' is not a number")))
                        })
                        .collect::<Result<_>>()?;
                }
                "mass" => self.mass = num()?,
                "p" => self.pq = Some((num()?, self.pq.map_or(0.0, |pq| pq.1))),
                "q" => self.pq = Some((self.pq.map_or(0.0, |pq| pq.0), num()?)),
                "m" => self.m = WeightExponent::unchecked(num()?),
                "grid_n" | "grid-n" => {
                    self.grid_n = Some(
                        value
                            .parse()
                            .map_err(|_| Error::Config(format!("grid_n: '{value}' is not an integer")))?,
                    )
                }
                "grid_l" | "grid-l" => self.grid_l = Some(num()?),
                "dt" => self.solver.dt = num()?,
                "cfl_safety" | "cfl-safety" => self.solver.cfl_safety = num()?,
                "out" | "output_dir" => self.output_dir = PathBuf::from(value),
                "seed" => {
                    self.seed = value
                        .parse()
                        .map_err(|_| Error::Config(format!("seed: '{value}' is not an integer")))?
                }
                _ => return Err(Error::Config(format!("unknown key '{key}'"))),
            }
        }
        Ok(())
    }

    fn grid_for(&self, mu: f64, data_extent: f64) -> Result<Grid> {
        let (p, q) = self.pq.unwrap_or((0.0, 0.0));
        let half = self
            .grid_l
            .unwrap_or_else(|| domain_half_width(p, q, mu).max(data_extent + 2.0));
        match self.grid_n {
            Some(n) => Grid::symmetric(half, n),
            None => Grid::with_spacing(half, default_spacing(mu)),
        }
    }
}

/// Mesh width resolving the viscous layers of width `~μ`.
pub fn default_spacing(mu: f64) -> f64 {
    (mu / 4.0).min(5e-3)
}

/// Ordered `key = value` pairs. Later entries win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub entries: Vec<(String, String)>,
}

impl Overrides {
    /// Parse a flat config file: one `key = value` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub mu: f64,
    pub tau: f64,
    pub metric: String,
    pub value: f64,
}

/// A per-`μ` failure. Also recorded as a `failure` row.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub mu: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: String,
    pub config_hash: String,
    pub grids: Vec<(f64, Grid)>,
    pub tolerances: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub study: Study,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub provenance: Provenance,
}

impl StudyResult {
    /// Tag written into the `experiment` column: study name and short config hash.
    pub fn tag(&self) -> String {
        format!("{}@{}", self.study, &self.provenance.config_hash[..12])
    }

    pub fn values(&self, metric: &str) -> impl Iterator<Item = &Row> + '_ {
        let metric = metric.to_string();
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    /// First value of `metric` at the given `μ` (and `τ`, when given).
    pub fn value(&self, metric: &str, mu: f64, tau: Option<f64>) -> Option<f64> {
        self.values(metric)
            .find(|r| r.mu == mu && tau.is_none_or(|t| (r.tau - t).abs() <= 1e-12 * t.abs().max(1.0)))
            .map(|r| r.value)
    }
}

/// Summary rows carry no time stamp.
const NO_TAU: f64 = f64::NAN;

/// Run a study on every `μ` of the configuration.
pub fn run(config: &ExperimentConfig) -> Result<StudyResult> {
    config.validate()?;
    let hash = config.hash();
    let tag = format!("{}@{}", config.study, &hash[..12]);
    let mut mus = config.mu_list.clone();
    mus.sort_by(f64::total_cmp);
    mus.dedup();

    let outcomes: Vec<(f64, Result<MuOutcome>)> = mus
        .par_iter()
        .map(|&mu| (mu, run_one(config, mu)))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut grids = Vec::new();
    let mut per_mu = Vec::new();
    for (mu, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                grids.push((mu, o.grid));
                per_mu.push((mu, o.summary));
                rows.extend(o.rows.into_iter().map(|(tau, metric, value)| Row {
                    experiment: tag.clone(),
                    mu,
                    tau,
                    metric: metric.to_string(),
                    value,
                }));
            }
            Err(error) => {
                rows.push(Row {
                    experiment: tag.clone(),
                    mu,
                    tau: NO_TAU,
                    metric: "failure".into(),
                    value: f64::NAN,
                });
                failures.push(Failure { mu, error });
            }
        }
    }
    if config.study == Study::TransientScaling {
        rows.extend(transient_fit_rows(&tag, &per_mu));
    }
    Ok(StudyResult {
        study: config.study,
        rows,
        failures,
        provenance: Provenance {
            config: config.canonical(),
            config_hash: hash,
            grids,
            tolerances: tolerances(config.study),
        },
    })
}

fn tolerances(study: Study) -> Vec<(String, f64)> {
    let t = |k: &str, v: f64| (k.to_string(), v);
    match study {
        Study::MetastabilityDemo => vec![t("manifold_rel_distance_max", 0.25), t("diffusion_wave_rel_distance_max", 0.1)],
        Study::TransientScaling => vec![t("relative_delta", RELATIVE_DELTA), t("r_squared_min", 0.9)],
        Study::DecayRates => vec![t("remainder_rate_band", 0.15), t("drift_rate_band", 0.02)],
        Study::Lemma1Convergence => vec![t("rel_distance_max_at_smallest_mu", 0.15)],
        Study::OracleCompare => vec![t("sup_rel_error_max", 1e-3)],
        Study::SpectrumCheck => vec![t("rate_tolerance", 1e-4)],
    }
}

type RawRow = (f64, &'static str, f64);

struct MuOutcome {
    grid: Grid,
    rows: Vec<RawRow>,
    /// Study-level scalar handed to the cross-`μ` summary (transient time).
    summary: Option<f64>,
}

fn run_one(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    match config.study {
        Study::SpectrumCheck => spectrum_check(config, mu),
        Study::OracleCompare => oracle_compare(config, mu),
        Study::Lemma1Convergence => lemma1_convergence(config, mu),
        Study::DecayRates => decay_rates(config, mu),
        Study::TransientScaling => transient_scaling(config, mu),
        Study::MetastabilityDemo => metastability_demo(config, mu),
    }
}

fn require_pq(config: &ExperimentConfig) -> Result<(f64, f64)> {
    config
        .pq
        .ok_or_else(|| Error::Config(format!("study {} needs --p and --q", config.study)))
}

/// Every μ of a sweep draws the same initial data, so the sweep isolates the
/// dependence on viscosity and stays order independent.
fn initial_rng(config: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

fn spectrum_check(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let grid = config.grid_for(mu, 14.0 * mu.sqrt() + 2.0)?;
    let mut rows = Vec::new();
    for (n, tag) in MODE_TAGS.iter().enumerate() {
        let phi = eigenfunction_phi(n, mu, &grid)?;
        let series: Vec<(f64, f64)> = (0..=16)
            .map(|k| {
                let tau = 0.25 * k as f64;
                Ok((tau, weighted_norm(&heat_evolve(&phi, tau, mu)?, config.m)))
            })
            .collect::<Result<_>>()?;
        let fit = fit_decay_rate(&series, (0.0, 4.0))?;
        rows.extend(series.iter().map(|&(tau, v)| (tau, tag.0, v)));
        rows.push((NO_TAU, tag.1, fit.rate));
        rows.push((NO_TAU, tag.2, fit.r_squared));
    }
    Ok(MuOutcome {
        grid,
        rows,
        summary: None,
    })
}

/// Metric names per mode; a study emits a fixed set of metric files, so the
/// mode index is folded into the name.
const MODE_TAGS: [(&str, &str, &str); 3] = [
    ("mode_norm", "mode_rate", "mode_r_squared"),
    ("mode1_norm", "mode1_rate", "mode1_r_squared"),
    ("mode2_norm", "mode2_rate", "mode2_r_squared"),
];

/// Gaussian-difference initial data used by `oracle-compare`.
pub fn oracle_data(grid: &Grid) -> Result<Field> {
    Field::from_fn(*grid, |x| {
        0.8 * (-(x - 0.6f64).powi(2) / 0.1).exp() - 0.5 * (-(x + 0.5f64).powi(2) / 0.1).exp()
    })
}

pub const ORACLE_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

fn oracle_compare(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let grid = config.grid_for(mu, 2.0)?;
    let w0 = oracle_data(&grid)?;
    let traj = evolve(&w0, mu, 2.0, &config.solver, 0.5)?;
    let mut rows = Vec::new();
    for tau in ORACLE_TIMES {
        let exact = exact_solution(&w0, mu, tau, &grid)?;
        let (_, w) = traj
            .nearest(tau)
            .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
        rows.push((tau, "sup_rel_error", w.sup_distance(&exact)? / exact.sup_norm()));
    }
    let m0 = traj.mass_ledger()[0];
    for ((tau, _), mass) in traj.snapshots().iter().zip(traj.mass_ledger()) {
        rows.push((*tau, "mass_drift", (mass - m0).abs()));
    }
    Ok(MuOutcome {
        grid,
        rows,
        summary: None,
    })
}

fn lemma1_convergence(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let (p, q) = require_pq(config)?;
    let grid = config.grid_for(mu, 0.0)?;
    let params = beta_from_pq_numeric_on(p, q, mu, &grid)?;
    let wn = diffusive_nwave(&params, &grid)?;
    let n = inviscid_nwave(&InviscidNWaveParams::new(p, q)?, &grid)?;
    let dist = weighted_distance(&wn, &n, config.m)?;
    let (pr, qr) = pq_functionals(&wn);
    let mut rows = vec![
        (NO_TAU, "nwave_distance", dist),
        (NO_TAU, "nwave_rel_distance", dist / weighted_norm(&n, config.m)),
        (NO_TAU, "beta0", params.beta0),
        (NO_TAU, "beta1", params.beta1),
        (NO_TAU, "p_roundtrip", pr),
        (NO_TAU, "q_roundtrip", qr),
    ];
    if params.beta1 != 0.0 {
        rows.push((NO_TAU, "beta0_over_beta1", params.beta0 / params.beta1));
    }
    let asym = if q < p {
        beta1_asymptotic(p, q, mu, 0.0)
    } else {
        beta1_asymptotic_reflected(p, q, mu, 0.0)
    };
    if let Ok(a) = asym {
        rows.push((NO_TAU, "beta1_asymptotic", a.beta1));
    }
    Ok(MuOutcome {
        grid,
        rows,
        summary: None,
    })
}

/// The τ = 0 N-wave used as the base point of `decay-rates`.
pub fn decay_base(config: &ExperimentConfig, mu: f64, grid: &Grid) -> Result<NWaveParams> {
    match config.pq {
        Some((p, q)) => beta_from_pq_numeric_on(p, q, mu, grid),
        None => {
            // |b φ₀/2μ| ≤ LOCAL_NWAVE_SIZE at τ = 0
            let beta1 = -LOCAL_NWAVE_SIZE * 2.0 * mu * (4.0 * std::f64::consts::PI * mu).sqrt();
            NWaveParams::with_mass(mu, config.mass, beta1, 0.0)
        }
    }
}

/// `w_N` plus a localized bump whose weighted norm is `PERTURBATION_SIZE·‖w_N‖`.
pub fn perturbed_nwave(base: &NWaveParams, grid: &Grid, m: WeightExponent) -> Result<Field> {
    let wn = diffusive_nwave(base, grid)?;
    let bump = Field::from_fn(*grid, |x| (-(x - 0.3f64).powi(2) / 0.2).exp() * (1.0 + x))?;
    let scale = PERTURBATION_SIZE * weighted_norm(&wn, m) / weighted_norm(&bump, m);
    wn.lin_comb(1.0, &bump, scale)
}

pub const DECAY_WINDOW: (f64, f64) = (1.0, 5.0);
pub const DECAY_TAU_END: f64 = 6.0;
pub const DECAY_SNAPSHOT: f64 = 0.25;

fn decay_rates(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let m = config.m;
    let grid = config.grid_for(mu, 4.0)?;
    let base = decay_base(config, mu, &grid)?;
    let w0 = perturbed_nwave(&base, &grid, m)?;
    let fit = project_onto_nwave(&w0, mu)?;
    let am = diffusion_wave(&fit.diffusion_wave()?, &grid)?;
    // The remainder falls to ~1e-5 of the solution by τ = 5, the size of the
    // solver's steady O(h²) truncation offset, so rates come from the exact
    // trajectory and the solver remainder is reported alongside.
    let big0 = cole_hopf_forward(&w0, mu)?;
    let solver = evolve(&w0, mu, DECAY_TAU_END, &config.solver, DECAY_SNAPSHOT)?;
    let mut rows = Vec::new();
    let mut remainder = Vec::new();
    let mut drift = Vec::new();
    let mut delta_n = f64::INFINITY;
    for (tau, w_solver) in solver.snapshots() {
        let w = if *tau == 0.0 {
            w0.clone()
        } else {
            cole_hopf_inverse(&heat_evolve(&big0, *tau, mu)?, mu)?
        };
        let wn = diffusive_nwave(&fit.advanced(*tau), &grid)?;
        let phi = phi_remainder(&w, &wn, mu)?;
        delta_n = delta_n.min(phi.delta_n);
        let r = weighted_norm(&phi.phi, m);
        let d = weighted_distance(&wn, &am, m)?;
        rows.push((*tau, "remainder_norm", r));
        rows.push((*tau, "remainder_norm_solver", weighted_distance(w_solver, &wn, m)?));
        rows.push((*tau, "drift_norm", d));
        remainder.push((*tau, r));
        drift.push((*tau, d));
    }
    let rf = fit_decay_rate(&remainder, DECAY_WINDOW)?;
    let df = fit_decay_rate(&drift, DECAY_WINDOW)?;
    rows.push((NO_TAU, "remainder_rate", rf.rate));
    rows.push((NO_TAU, "remainder_r_squared", rf.r_squared));
    rows.push((NO_TAU, "drift_rate", df.rate));
    rows.push((NO_TAU, "delta_n", delta_n));
    let r0 = remainder[0].1;
    let ratio = remainder
        .iter()
        .map(|(tau, r)| r * tau.exp() / r0)
        .fold(0.0f64, f64::max);
    rows.push((NO_TAU, "remainder_constant_ratio", ratio));
    Ok(MuOutcome {
        grid,
        rows,
        summary: None,
    })
}

pub const TRANSIENT_TAU_END: f64 = 4.0;
pub const TRANSIENT_SNAPSHOT: f64 = 0.05;

fn bump_trajectory(
    config: &ExperimentConfig,
    mu: f64,
    shape: BumpShape,
    tau_end: f64,
    every: f64,
) -> Result<(Grid, Trajectory)> {
    let (p, q) = require_pq(config)?;
    let shape = shape.jittered(&mut initial_rng(config));
    let grid = config.grid_for(mu, shape.extent())?;
    let w0 = gaussian_pair(p, q, shape, &grid)?;
    Ok((grid, evolve(&w0, mu, tau_end, &config.solver, every)?))
}

fn transient_scaling(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let (grid, traj) = bump_trajectory(config, mu, BumpShape::TRANSIENT, TRANSIENT_TAU_END, TRANSIENT_SNAPSHOT)?;
    let m = config.m;
    let mut rows = Vec::new();
    for (tau, w) in traj.snapshots() {
        let (p, q) = pq_functionals(w);
        let n = inviscid_nwave(&InviscidNWaveParams::new(p.max(0.0), q.max(0.0))?, &grid)?;
        rows.push((*tau, "inviscid_rel_distance", weighted_distance(w, &n, m)? / weighted_norm(&n, m)));
    }
    let t = transient_time_with(&traj, Threshold::Relative(RELATIVE_DELTA), PqReference::Tracking, m)?;
    rows.push((t.tau, "transient_time", t.tau));
    Ok(MuOutcome {
        grid,
        rows,
        summary: Some(t.tau),
    })
}

fn transient_fit_rows(tag: &str, per_mu: &[(f64, Option<f64>)]) -> Vec<Row> {
    let xy: Vec<(f64, f64)> = per_mu
        .iter()
        .filter_map(|(mu, t)| t.map(|t| (mu.ln().abs(), t)))
        .collect();
    if xy.len() < 2 {
        return Vec::new();
    }
    let (slope, intercept, r2) = linear_regression(&xy);
    [("fit_slope", slope), ("fit_intercept", intercept), ("fit_r_squared", r2)]
        .into_iter()
        .map(|(metric, value)| Row {
            experiment: tag.to_string(),
            mu: f64::NAN,
            tau: NO_TAU,
            metric: metric.into(),
            value,
        })
        .collect()
}

/// `τ` of physical times `t = 2` and `t = 100`.
pub fn demo_times() -> [f64; 2] {
    [3f64.ln(), 101f64.ln()]
}

fn metastability_demo(config: &ExperimentConfig, mu: f64) -> Result<MuOutcome> {
    let [t_early, t_late] = demo_times();
    let (p, q) = require_pq(config)?;
    let shape = BumpShape::COMPACT.jittered(&mut initial_rng(config));
    let grid = config.grid_for(mu, shape.extent())?;
    let w0 = gaussian_pair(p, q, shape, &grid)?;
    let early = evolve(&w0, mu, t_early, &config.solver, t_early)?;
    let w_early = &early.last().expect("snapshot at t_early").1;
    let late = evolve(w_early, mu, t_late - t_early, &config.solver, t_late - t_early)?;
    let w_late = &late.last().expect("snapshot at t_late").1;

    let m = config.m;
    let am = diffusion_wave(&DiffusionWaveParams::new(mu, w0.mass())?, &grid)?;
    let mut rows = Vec::new();
    for (tau, w) in [(t_early, w_early), (t_late, w_late)] {
        let norm = weighted_norm(w, m);
        let fit = dist_to_nwave_manifold(w, mu, m)?;
        let (pw, qw) = pq_functionals(w);
        let n = inviscid_nwave(&InviscidNWaveParams::new(pw, qw)?, &grid)?;
        rows.push((tau, "manifold_rel_distance", fit.distance / norm));
        rows.push((tau, "diffusion_wave_rel_distance", weighted_distance(w, &am, m)? / norm));
        rows.push((tau, "inviscid_rel_distance", weighted_distance(w, &n, m)? / weighted_norm(&n, m)));
        rows.push((tau, "fitted_beta1", fit.params.beta1));
        rows.push((tau, "p", pw));
        rows.push((tau, "q", qw));
    }
    Ok(MuOutcome {
        grid,
        rows,
        summary: None,
    })
}

/// 17 significant digits; re-parses to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "experiment,mu,tau,metric,value";

/// Render rows of a single metric as CSV text.
pub fn to_csv(rows: &[&Row]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.experiment,
            fmt_f64(r.mu),
            fmt_f64(r.tau),
            r.metric,
            fmt_f64(r.value)
        );
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Config(format!("bad CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Config(format!("CSV line {}: expected 5 fields", i + 2)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("CSV line {}: '{s}' is not a number", i + 2)))
            };
            Ok(Row {
                experiment: f[0].to_string(),
                mu: num(f[1])?,
                tau: num(f[2])?,
                metric: f[3].to_string(),
                value: num(f[4])?,
            })
        })
        .collect()
}

/// `git describe` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Write `<dir>/<metric>.csv` for every metric the study declares (plus
/// `failure.csv` when something failed) and `<dir>/provenance.txt`.
/// Returns the files written.
pub fn emit_csv(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut by_metric: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for metric in result.study.metrics() {
        by_metric.entry(metric).or_default();
    }
    for row in &result.rows {
        by_metric.entry(row.metric.as_str()).or_default().push(row);
    }
    let mut written = Vec::new();
    for (metric, rows) in by_metric {
        let path = dir.join(format!("{metric}.csv"));
        fs::write(&path, to_csv(&rows)).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    let path = dir.join("provenance.txt");
    fs::write(&path, provenance_text(result, &git_describe())).map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn provenance_text(result: &StudyResult, git: &str) -> String {
    let p = &result.provenance;
    let mut s = String::new();
    let _ = writeln!(s, "# config");
    s.push_str(&p.config);
    let _ = writeln!(s, "\n# provenance");
    let _ = writeln!(s, "config_hash = {}", p.config_hash);
    let _ = writeln!(s, "git_describe = {git}");
    for (mu, g) in &p.grids {
        let _ = writeln!(
            s,
            "grid[mu={}] = xi_min {} xi_max {} n_points {}",
            fmt_f64(*mu),
            fmt_f64(g.xi_min()),
            fmt_f64(g.xi_max()),
            g.n_points()
        );
    }
    for (k, v) in &p.tolerances {
        let _ = writeln!(s, "tolerance.{k} = {}", fmt_f64(*v));
    }
    for f in &result.failures {
        let _ = writeln!(s, "failure[mu={}] = {}", fmt_f64(f.mu), f.error);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names_roundtrip() {
        for s in Study::ALL {
            assert_eq!(Study::from_name(s.name()), Some(s));
        }
        assert_eq!(Study::from_name("nope"), None);
    }

    #[test]
    fn overrides_parse_and_apply() {
        let o = Overrides::parse("# comment\nmu = 0.1, 0.05\nseed=7\n\np = 1\nq = 0.5 # trailing\n").unwrap();
        let mut c = ExperimentConfig::new(Study::SpectrumCheck);
        c.apply(&o).unwrap();
        assert_eq!(c.mu_list, vec![0.1, 0.05]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.pq, Some((1.0, 0.5)));
        assert!(Overrides::parse("novalue").is_err());
        let mut bad = Overrides::default();
        bad.push("colour", "red");
        assert!(matches!(c.apply(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = ExperimentConfig::new(Study::SpectrumCheck);
        c.mu_list = vec![0.05, -1.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::new(Study::SpectrumCheck);
        c.m = WeightExponent::unchecked(1.0);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::new(Study::DecayRates);
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn gaussian_pair_hits_pq() {
        let g = Grid::with_spacing(6.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = gaussian_pair(1.0, 0.5, BumpShape::TRANSIENT.jittered(&mut rng), &g).unwrap();
        let (p, q) = pq_functionals(&w);
        assert!((p - 1.0).abs() < 1e-12 && (q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jitter_stays_within_ten_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = BumpShape::COMPACT.jittered(&mut rng);
            assert!((s.widths.0 / 0.05 - 1.0).abs() <= 0.1 + 1e-12);
            assert!((s.centres.1 / 0.15 - 1.0).abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn csv_header_only_when_empty() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv(&[])).unwrap().is_empty());
        assert!(parse_csv("a,b\n").is_err());
    }
}
