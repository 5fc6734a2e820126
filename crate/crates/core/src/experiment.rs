//! Sweep driver: perturbation families, per-row computations and checks.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{dbar_upper_bounds, simulate_pair, z_chain};
use crate::dbar::dbar_sandwich;
use crate::error::{Error, Result};
use crate::gmeasure::GFunction;
use crate::io::Source;
use crate::potential::{holder_distance, log_distance, Potential};
use crate::pressure::{closed_form_pressure, gurevich_pressure, spr_classify, Recurrence};
use crate::rpf::{normalize_to_g, normalized_potential_gap, rpf_eigendata_default};
use crate::table::CylinderTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ContinuityG,
    Lipschitz,
    ContinuityPotential,
    PressureSuite,
    CouplingSuite,
}

fn default_blocks() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_theta() -> f64 {
    0.5
}

fn default_horizon() -> usize {
    12
}

fn default_steps() -> usize {
    100_000
}

fn default_replicas() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Base g-function or potential; a built-in example when absent.
    #[serde(default)]
    pub base: Option<Source>,
    /// Direction for potential sweeps; random (from `seed`) when absent.
    #[serde(default)]
    pub perturbation: Option<Source>,
    pub schedule: Vec<f64>,
    #[serde(default = "default_blocks")]
    pub block_lengths: Vec<usize>,
    /// Eigenfunction depth; `0` selects `k − 1`.
    #[serde(default)]
    pub eigen_depth: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub state: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub mc_steps: usize,
    #[serde(default = "default_replicas")]
    pub mc_replicas: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, schedule: Vec<f64>) -> Self {
        Self {
            kind,
            base: None,
            perturbation: None,
            schedule,
            block_lengths: default_blocks(),
            eigen_depth: 0,
            theta: default_theta(),
            horizon: default_horizon(),
            state: 0,
            seed: 0,
            mc_steps: default_steps(),
            mc_replicas: default_replicas(),
            output: None,
        }
    }

    /// Reads a config; relative input paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut config: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        config.base = config.base.map(|s| s.relative_to(dir));
        config.perturbation = config.perturbation.map(|s| s.relative_to(dir));
        config.output = config.output.map(|o| if o.is_relative() { dir.join(o) } else { o });
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        validate_schedule(&self.schedule)?;
        if self.block_lengths.is_empty() || self.block_lengths.contains(&0) {
            return Err(Error::InvalidParameter("block lengths must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidTheta(self.theta));
        }
        Ok(())
    }

    fn base_g(&self) -> Result<GFunction> {
        match &self.base {
            Some(s) => s.load()?.g_function(),
            None => GFunction::memoryless(&[2.0 / 3.0, 1.0 / 3.0]),
        }
    }

    fn base_potential(&self) -> Result<Potential> {
        match &self.base {
            Some(s) => s.load()?.potential(),
            None => Potential::from_matrix(&[vec![2.0, 1.0], vec![1.0, 1.0]]),
        }
    }
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidSchedule("empty schedule".into()));
    }
    if let Some(d) = schedule.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidSchedule(format!("entry {d} is not positive")));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSchedule(format!("{} does not decrease to {}", w[0], w[1])));
    }
    Ok(())
}

/// One row per schedule entry; columns a kind does not produce are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// `d(h, g)` for g-sweeps, `d_θ(φ, τ)` for potential sweeps.
    pub input_distance: f64,
    pub mixing: Option<f64>,
    pub coupling_upper: Option<f64>,
    pub kac_bound: Option<f64>,
    pub exp_bound: Option<f64>,
    pub lipschitz: Option<f64>,
    pub lipschitz_out_of_hypothesis: Option<bool>,
    pub oracle_lower: Option<f64>,
    pub potential_gap: Option<f64>,
    pub eigen_ratio: Option<f64>,
    pub spr_margin: Option<f64>,
    pub pressure: Option<f64>,
    pub pressure_closed_form: Option<f64>,
    pub expected_return: Option<f64>,
    pub kac_product: Option<f64>,
    pub mc_return: Option<f64>,
    pub mc_return_se: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if ok { CheckStatus::Passed } else { CheckStatus::Failed },
            detail,
        }
    }

    fn not_applicable(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::NotApplicable,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    pub schedule: Vec<f64>,
    pub block_lengths: Vec<usize>,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: ExperimentKind,
    pub rows: Vec<SweepRow>,
    pub checks: Vec<CheckOutcome>,
    pub metadata: Metadata,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Failed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Failed)
    }

    /// Column extractor used by the trend checks.
    pub fn column(&self, f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<f64> {
        self.rows.iter().filter_map(f).collect()
    }

    fn new(config: &ExperimentConfig, rows: Vec<SweepRow>, checks: Vec<CheckOutcome>) -> Self {
        Self {
            kind: config.kind,
            rows,
            checks,
            metadata: Metadata {
                version: env!("CARGO_PKG_VERSION").into(),
                seed: config.seed,
                schedule: config.schedule.clone(),
                block_lengths: config.block_lengths.clone(),
                theta: config.theta,
            },
        }
    }
}

pub const MONOTONE_SLACK: f64 = 1e-9;

/// Nonincreasing up to `MONOTONE_SLACK`.
pub fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK)
}

fn trend_checks(name: &str, schedule: &[f64], column: &[f64], factor: f64, min_ratio: f64, checks: &mut Vec<CheckOutcome>) {
    checks.push(CheckOutcome::new(
        &format!("{name} nonincreasing along the schedule"),
        nonincreasing(column),
        format!("{column:?}"),
    ));
    let label = format!("{name} final below first/{factor}");
    let ratio = schedule[0] / schedule[schedule.len() - 1];
    if ratio + 1e-12 < min_ratio {
        checks.push(CheckOutcome::not_applicable(&label, format!("schedule spans only a {ratio}x reduction")));
        return;
    }
    let (first, last) = (column[0], column[column.len() - 1]);
    checks.push(CheckOutcome::new(&label, last < first / factor, format!("first {first}, final {last}")));
}

/// Log-space mixing toward the uniform kernel, renormalized on fibers.
pub fn mix_toward_uniform(g: &GFunction, s: f64) -> Result<GFunction> {
    let u = (g.alphabet() as f64).ln();
    GFunction::renormalize(g.table().map(|v| ((1.0 - s) * v.ln() - s * u).exp())?)
}

pub const MIXING_TOL: f64 = 1e-9;

/// `h` on the mixing family with `d(h, g) = δ` (within `MIXING_TOL`).
pub fn perturb_g(g: &GFunction, delta: f64) -> Result<(GFunction, f64)> {
    if delta == 0.0 {
        return Ok((g.clone(), 0.0));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("perturbation size {delta}")));
    }
    let dist = |s: f64| -> Result<f64> { log_distance(g, &mix_toward_uniform(g, s)?) };
    let mut hi = 1.0;
    while dist(hi)? < delta {
        hi *= 2.0;
        if hi > 1024.0 {
            return Err(Error::InvalidParameter(format!(
                "mixing family does not reach distance {delta} (is the base uniform?)"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = dist(mid)?;
        if (d - delta).abs() <= MIXING_TOL {
            return Ok((mix_toward_uniform(g, mid)?, mid));
        }
        if d < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence {
        iterations: 200,
        residual: (dist(0.5 * (lo + hi))? - delta).abs(),
    })
}

/// Table with `‖w‖_θ = 1`, exact tail.
pub fn unit_direction(w: CylinderTable, theta: f64) -> Result<Potential> {
    let w = Potential::exact(w)?;
    let zero = Potential::exact(CylinderTable::constant(w.alphabet(), w.depth(), 0.0)?)?;
    let norm = holder_distance(&zero, &w, theta)?.d_theta;
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter("perturbation direction has zero norm".into()));
    }
    Potential::exact(w.table().scale(1.0 / norm)?)
}

/// Seeded direction in `[−1, 1]^{N^k}`, scaled to unit norm.
pub fn random_direction(alphabet: usize, depth: usize, theta: f64, seed: u64) -> Result<Potential> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = CylinderTable::from_fn(alphabet, depth, |_| rng.gen_range(-1.0..=1.0))?;
    unit_direction(t, theta)
}

fn direction(config: &ExperimentConfig, phi: &Potential) -> Result<Potential> {
    match &config.perturbation {
        Some(s) => {
            let doc = s.load()?;
            unit_direction(doc.table()?.lift(phi.depth().max(doc.depth))?, config.theta)
        }
        None => random_direction(phi.alphabet(), phi.depth(), config.theta, config.seed),
    }
}

fn map_rows(config: &ExperimentConfig, f: impl Fn(f64) -> Result<SweepRow> + Sync) -> Result<Vec<SweepRow>> {
    config.schedule.par_iter().map(|&d| f(d)).collect()
}

fn g_row(g: &GFunction, delta: f64, blocks: &[usize]) -> Result<SweepRow> {
    let (h, s) = perturb_g(g, delta)?;
    let b = dbar_upper_bounds(g, &h)?;
    let sandwich = dbar_sandwich(g, &h, blocks)?;
    Ok(SweepRow {
        delta,
        input_distance: b.d,
        mixing: Some(s),
        coupling_upper: Some(b.coupling_value),
        kac_bound: Some(b.kac_bound),
        exp_bound: Some(b.exp_bound),
        lipschitz: Some(b.lipschitz),
        lipschitz_out_of_hypothesis: Some(b.lipschitz_out_of_hypothesis),
        oracle_lower: Some(sandwich.lower),
        expected_return: Some(b.expected_return),
        ..SweepRow::default()
    })
}

/// Row of the g-continuity sweep at `δ` (`δ = 0` gives `h = g`).
pub fn continuity_g_row(g: &GFunction, delta: f64, blocks: &[usize]) -> Result<SweepRow> {
    g_row(g, delta, blocks)
}

pub fn run_continuity_g(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let g = config.base_g()?;
    let rows = map_rows(config, |d| g_row(&g, d, &config.block_lengths))?;
    let mut checks = Vec::new();
    let upper: Vec<f64> = rows.iter().filter_map(|r| r.coupling_upper).collect();
    trend_checks("d-bar upper bound", &config.schedule, &upper, 4.0, 16.0, &mut checks);
    Ok(SweepReport::new(config, rows, checks))
}

pub fn run_lipschitz(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let g = config.base_g()?;
    let rows = map_rows(config, |d| g_row(&g, d, &config.block_lengths))?;
    let mut checks = Vec::new();
    for r in &rows {
        let (lower, upper, lip) = (r.oracle_lower.unwrap_or(0.0), r.coupling_upper.unwrap_or(0.0), r.lipschitz.unwrap_or(0.0));
        let out = r.lipschitz_out_of_hypothesis.unwrap_or(false);
        checks.push(CheckOutcome::new(
            "perturbation within the ln 2 hypothesis",
            !out,
            format!("delta {}: d = {}", r.delta, r.input_distance),
        ));
        checks.push(CheckOutcome::new(
            "oracle lower <= coupling upper <= 2 e^{L_g} d(g, h)",
            lower <= upper + 1e-8 && upper <= lip + 1e-12,
            format!("delta {}: {lower} <= {upper} <= {lip}", r.delta),
        ));
    }
    Ok(SweepReport::new(config, rows, checks))
}

fn potential_row(phi: &Potential, w: &Potential, delta: f64, config: &ExperimentConfig) -> Result<SweepRow> {
    let tau = phi.add_scaled(w, delta)?;
    let spr = spr_classify(&tau, config.state, config.horizon)?;
    if spr.classification != Recurrence::Spr {
        return Err(Error::CheckFailed {
            check: "perturbed potential strongly positive recurrent",
            detail: format!("delta {delta}: margin {}", spr.spr_margin),
        });
    }
    let d_theta = holder_distance(phi, &tau, config.theta)?.d_theta;
    let gap = normalized_potential_gap(phi, &tau, config.eigen_depth)?;
    let g_phi = normalize_to_g(phi, &rpf_eigendata_default(phi, config.eigen_depth)?)?.g;
    let g_tau = normalize_to_g(&tau, &rpf_eigendata_default(&tau, config.eigen_depth)?)?.g;
    let b = dbar_upper_bounds(&g_phi, &g_tau)?;
    let sandwich = dbar_sandwich(&g_phi, &g_tau, &config.block_lengths)?;
    Ok(SweepRow {
        delta,
        input_distance: d_theta,
        coupling_upper: Some(b.coupling_value),
        kac_bound: Some(b.kac_bound),
        exp_bound: Some(b.exp_bound),
        lipschitz: Some(b.lipschitz),
        lipschitz_out_of_hypothesis: Some(b.lipschitz_out_of_hypothesis),
        oracle_lower: Some(sandwich.lower),
        potential_gap: Some(gap.gap),
        eigen_ratio: Some(gap.eigen_ratio),
        spr_margin: Some(spr.spr_margin),
        expected_return: Some(b.expected_return),
        ..SweepRow::default()
    })
}

/// Row of the potential sweep at `δ` along direction `w`.
pub fn continuity_potential_row(phi: &Potential, w: &Potential, delta: f64, config: &ExperimentConfig) -> Result<SweepRow> {
    potential_row(phi, w, delta, config)
}

pub fn run_continuity_potential(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let phi = config.base_potential()?;
    let w = direction(config, &phi)?;
    let rows = map_rows(config, |d| potential_row(&phi, &w, d, config))?;
    let mut checks = Vec::new();
    let gap: Vec<f64> = rows.iter().filter_map(|r| r.potential_gap).collect();
    let upper: Vec<f64> = rows.iter().filter_map(|r| r.coupling_upper).collect();
    trend_checks("normalized potential gap", &config.schedule, &gap, 4.0, 16.0, &mut checks);
    trend_checks("d-bar upper bound between RPF measures", &config.schedule, &upper, 4.0, 16.0, &mut checks);
    Ok(SweepReport::new(config, rows, checks))
}

pub fn run_pressure_suite(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let phi = config.base_potential()?;
    let w = direction(config, &phi)?;
    let rows = map_rows(config, |delta| {
        let tau = phi.add_scaled(&w, delta)?;
        let est = gurevich_pressure(&tau, config.state, config.horizon)?;
        let spr = spr_classify(&tau, config.state, config.horizon)?;
        Ok(SweepRow {
            delta,
            input_distance: holder_distance(&phi, &tau, config.theta)?.d_theta,
            pressure: Some(est.extrapolated),
            pressure_closed_form: if tau.depth() <= 2 { Some(closed_form_pressure(&tau)?) } else { None },
            spr_margin: Some(spr.spr_margin),
            ..SweepRow::default()
        })
    })?;
    let mut checks = Vec::new();
    for r in &rows {
        if let (Some(p), Some(c)) = (r.pressure, r.pressure_closed_form) {
            checks.push(CheckOutcome::new(
                "extrapolated pressure matches the closed form",
                (p - c).abs() <= 1e-6,
                format!("delta {}: {p} vs {c}", r.delta),
            ));
        }
        let margin = r.spr_margin.unwrap_or(0.0);
        checks.push(CheckOutcome::new(
            "strongly positive recurrent at the horizon",
            margin > crate::pressure::SPR_THRESHOLD,
            format!("delta {}: margin {margin}", r.delta),
        ));
    }
    Ok(SweepReport::new(config, rows, checks))
}

pub fn run_coupling_suite(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let g = config.base_g()?;
    let rows = map_rows(config, |delta| {
        let (h, s) = perturb_g(&g, delta)?;
        let chain = z_chain(&g, &h)?;
        let sim = simulate_pair(&g, &h, config.mc_steps, config.seed, config.mc_replicas, 0)?;
        Ok(SweepRow {
            delta,
            input_distance: log_distance(&g, &h)?,
            mixing: Some(s),
            coupling_upper: Some(chain.mismatch_mass),
            expected_return: Some(chain.expected_return),
            kac_product: Some(chain.kac_product),
            mc_return: sim.mean_return_time.map(|e| e.mean),
            mc_return_se: sim.mean_return_time.map(|e| e.se),
            ..SweepRow::default()
        })
    })?;
    let mut checks = Vec::new();
    for r in &rows {
        let k = r.kac_product.unwrap_or(f64::NAN);
        checks.push(CheckOutcome::new(
            "stationary mismatch mass times expected return equals one",
            (k - 1.0).abs() <= 1e-10,
            format!("delta {}: {k}", r.delta),
        ));
        let (e, m, se) = (r.expected_return.unwrap_or(0.0), r.mc_return.unwrap_or(0.0), r.mc_return_se.unwrap_or(0.0));
        checks.push(CheckOutcome::new(
            "simulated return time within 3 standard errors",
            (m - e).abs() <= 3.0 * se,
            format!("delta {}: {m} ± {se} vs {e}", r.delta),
        ));
    }
    Ok(SweepReport::new(config, rows, checks))
}

pub fn run(config: &ExperimentConfig) -> Result<SweepReport> {
    match config.kind {
        ExperimentKind::ContinuityG => run_continuity_g(config),
        ExperimentKind::Lipschitz => run_lipschitz(config),
        ExperimentKind::ContinuityPotential => run_continuity_potential(config),
        ExperimentKind::PressureSuite => run_pressure_suite(config),
        ExperimentKind::CouplingSuite => run_coupling_suite(config),
    }
}
