//! Partition functions, Gurevich pressure, SPR classification, induced
//! potentials and the discriminant.
//!
//! Two independent routes compute `Z_n`: orbit enumeration over periodic
//! words, and traces of the sliding-window transfer matrix whose states are
//! words of length `max(k-1, 1)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, log_add, log_sum_exp};
use crate::potential::{birkhoff_sum, Potential};
use crate::shift::{checked_size, first_return_words, periodic_words, Alphabet};

/// Margin above which a state is reported strongly positive recurrent.
pub const SPR_THRESHOLD: f64 = 1e-3;

fn alphabet_of(phi: &Potential) -> Result<Alphabet> {
    Alphabet::new(phi.alphabet())
}

/// `ln Z_n(φ, a)` by enumerating period-`n` points with `x_0 = a`.
pub fn log_partition_function(phi: &Potential, a: usize, n: usize) -> Result<f64> {
    let words = periodic_words(&alphabet_of(phi)?, n, a)?;
    log_orbit_sum(phi, words.into_iter().map(|w| w.into_inner()).collect(), n)
}

/// `ln Z*_n(φ, a)` by enumerating first-return loops at `a`.
pub fn log_loop_partition_function(phi: &Potential, a: usize, n: usize) -> Result<f64> {
    let words = first_return_words(&alphabet_of(phi)?, n, a)?;
    log_orbit_sum(phi, words.into_iter().map(|w| w.into_inner()).collect(), n)
}

pub fn partition_function(phi: &Potential, a: usize, n: usize) -> Result<f64> {
    log_partition_function(phi, a, n).map(f64::exp)
}

pub fn loop_partition_function(phi: &Potential, a: usize, n: usize) -> Result<f64> {
    log_loop_partition_function(phi, a, n).map(f64::exp)
}

fn log_orbit_sum(phi: &Potential, words: Vec<Vec<usize>>, n: usize) -> Result<f64> {
    let chunk = phi.alphabet().max(1);
    let partials = words
        .par_chunks(words.len().div_ceil(chunk).max(1))
        .map(|block| {
            block
                .iter()
                .map(|w| birkhoff_sum(phi, w, n, true))
                .collect::<Result<Vec<_>>>()
                .map(log_sum_exp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(partials.into_iter().fold(f64::NEG_INFINITY, log_add))
}

/// Sliding-window transfer matrix of a potential.
struct WindowOperator {
    alphabet: usize,
    states: usize,
    /// `weight[u * N + j] = φ((u·j)[..k])`.
    log_weight: Vec<f64>,
}

impl WindowOperator {
    fn new(phi: &Potential) -> Result<Self> {
        let n = phi.alphabet();
        let k = phi.depth();
        let s = (k.max(2)) - 1;
        let states = checked_size(n, s)?;
        let edges = checked_size(n, s + 1)?;
        let drop = checked_size(n, s + 1 - k)?;
        let table = phi.table().values();
        let log_weight = (0..edges).map(|e| table[e / drop]).collect();
        Ok(Self {
            alphabet: n,
            states,
            log_weight,
        })
    }

    fn first_symbol(&self, u: usize) -> usize {
        u / (self.states / self.alphabet)
    }

    /// `ln Z_n` and `ln Z*_n` for `n = 1..=n_max`.
    fn log_sequences(&self, a: usize, n_max: usize) -> (Vec<f64>, Vec<f64>) {
        let block = self.states / self.alphabet;
        let starts: Vec<usize> = (a * block..(a + 1) * block).collect();
        let per_start: Vec<(Vec<f64>, Vec<f64>)> = starts
            .par_iter()
            .map(|&u0| (self.walk(u0, n_max, None), self.walk(u0, n_max, Some(a))))
            .collect();
        let mut z = vec![f64::NEG_INFINITY; n_max];
        let mut zs = vec![f64::NEG_INFINITY; n_max];
        for (full, loops) in per_start {
            for t in 0..n_max {
                z[t] = log_add(z[t], full[t]);
                zs[t] = log_add(zs[t], loops[t]);
            }
        }
        (z, zs)
    }

    /// Log weight of closed walks from `u0` of each length; with `avoid`,
    /// intermediate windows may not start with that symbol.
    fn walk(&self, u0: usize, n_max: usize, avoid: Option<usize>) -> Vec<f64> {
        let n = self.alphabet;
        let mut v = vec![0.0; self.states];
        v[u0] = 1.0;
        let mut scale = 0.0;
        let mut out = Vec::with_capacity(n_max);
        for _ in 0..n_max {
            let mut w = vec![0.0; self.states];
            for (u, &mass) in v.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let e = u * n + j;
                    w[e % self.states] += mass * self.log_weight[e].exp();
                }
            }
            out.push(if w[u0] > 0.0 { scale + w[u0].ln() } else { f64::NEG_INFINITY });
            if let Some(a) = avoid {
                for (u, slot) in w.iter_mut().enumerate() {
                    if self.first_symbol(u) == a {
                        *slot = 0.0;
                    }
                }
            }
            let norm = w.iter().copied().fold(0.0, f64::max);
            if norm == 0.0 {
                out.resize(n_max, f64::NEG_INFINITY);
                return out;
            }
            scale += norm.ln();
            v = w.into_iter().map(|x| x / norm).collect();
        }
        out
    }
}

/// `ln Z_n` and `ln Z*_n`, `n = 1..=n_max`, from the window transfer matrix.
pub fn log_partition_sequences(phi: &Potential, a: usize, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    alphabet_of(phi)?.check_symbol(a)?;
    Ok(WindowOperator::new(phi)?.log_sequences(a, n_max))
}

/// `W[i][j] = e^{φ(ij)}` (depth 2) or `e^{φ(i)}` (depth 1).
pub fn weight_matrix(phi: &Potential) -> Result<DMatrix<f64>> {
    let n = phi.alphabet();
    match phi.depth() {
        1 => Ok(DMatrix::from_fn(n, n, |i, _| phi.table().get(i).exp())),
        2 => Ok(DMatrix::from_fn(n, n, |i, j| phi.table().get(i * n + j).exp())),
        d => Err(Error::DepthTooLarge {
            requested: d,
            available: 2,
        }),
    }
}

/// `ln ρ(W)` for depth-≤2 potentials.
pub fn closed_form_pressure(phi: &Potential) -> Result<f64> {
    let w = weight_matrix(phi)?;
    Ok(linalg::perron(&w, 1e-15, 1_000_000)?.value.ln())
}

/// Aitken's Δ² on the last three terms; falls back to the last term.
pub fn aitken_limit(xs: &[f64]) -> f64 {
    match xs {
        [] => f64::NAN,
        [x] => *x,
        [.., x0, x1, x2] => {
            let denom = x2 - 2.0 * x1 + x0;
            let step = x2 - x1;
            if denom.abs() <= 1e-14 * x2.abs().max(1.0) {
                *x2
            } else {
                let v = x2 - step * step / denom;
                if v.is_finite() {
                    v
                } else {
                    *x2
                }
            }
        }
        [.., x] => *x,
    }
}

/// Successive increments `ln Z_{n+1} − ln Z_n`.
fn increments(log_z: &[f64]) -> Vec<f64> {
    log_z.windows(2).map(|w| w[1] - w[0]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub state: usize,
    pub n_max: usize,
    /// `(1/n) ln Z_n(φ, a)`, `n = 1..=n_max`.
    pub sequence: Vec<f64>,
    pub log_z: Vec<f64>,
    /// Aitken limit of the growth increments `ln Z_{n+1} − ln Z_n`.
    pub extrapolated: f64,
    /// `ln ρ(W)` when the depth is at most 2.
    pub closed_form: Option<f64>,
}

pub fn gurevich_pressure(phi: &Potential, a: usize, n_max: usize) -> Result<PressureEstimate> {
    if n_max < 4 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 4, got {n_max}")));
    }
    let (log_z, _) = log_partition_sequences(phi, a, n_max)?;
    Ok(estimate_from(phi, a, log_z))
}

fn estimate_from(phi: &Potential, a: usize, log_z: Vec<f64>) -> PressureEstimate {
    let n_max = log_z.len();
    let sequence = log_z.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).collect();
    let extrapolated = aitken_limit(&increments(&log_z));
    let closed_form = if phi.depth() <= 2 {
        closed_form_pressure(phi).ok()
    } else {
        None
    };
    PressureEstimate {
        state: a,
        n_max,
        sequence,
        log_z,
        extrapolated,
        closed_form,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    Spr,
    NotEstablishedAtHorizon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub state: usize,
    pub horizon: usize,
    pub pressure: f64,
    /// Max of `ln Z*_{n+1} − ln Z*_n` over the upper half of the window.
    pub loop_growth: f64,
    /// Max of `(1/n) ln Z*_n` over the upper half of the window.
    pub loop_growth_raw: f64,
    pub spr_margin: f64,
    pub spr_margin_raw: f64,
    pub classification: Recurrence,
}

pub fn spr_classify(phi: &Potential, a: usize, n_max: usize) -> Result<RecurrenceReport> {
    if n_max < 4 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 4, got {n_max}")));
    }
    let (log_z, log_zs) = log_partition_sequences(phi, a, n_max)?;
    let estimate = estimate_from(phi, a, log_z);
    let pressure = estimate.extrapolated;
    let half = n_max / 2;
    let loop_growth = increments(&log_zs)[half - 1..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let loop_growth_raw = (half..=n_max)
        .map(|n| log_zs[n - 1] / n as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let spr_margin = pressure - loop_growth;
    Ok(RecurrenceReport {
        state: a,
        horizon: n_max,
        pressure,
        loop_growth,
        loop_growth_raw,
        spr_margin,
        spr_margin_raw: pressure - loop_growth_raw,
        classification: if spr_margin > SPR_THRESHOLD {
            Recurrence::Spr
        } else {
            Recurrence::NotEstablishedAtHorizon
        },
    })
}

/// `S_m φ` on a first-return loop at `a`, continued by `continuation`
/// (the periodic extension of the loop when `None`).
pub fn induced_potential(phi: &Potential, a: usize, lp: &[usize], continuation: Option<&[usize]>) -> Result<f64> {
    let alphabet = alphabet_of(phi)?;
    if lp.is_empty() || lp[0] != a {
        return Err(Error::InvalidLoop(format!("loop must start with {a}")));
    }
    if let Some(pos) = lp[1..].iter().position(|&s| s == a) {
        return Err(Error::InvalidLoop(format!("interior return to {a} at index {}", pos + 1)));
    }
    for &s in lp {
        alphabet.check_symbol(s)?;
    }
    match continuation {
        None => birkhoff_sum(phi, lp, lp.len(), true),
        Some(rest) => {
            if rest.first().is_some_and(|&s| s != a) {
                return Err(Error::InvalidLoop("continuation must start with the base state".into()));
            }
            let word: Vec<usize> = lp.iter().chain(rest).copied().collect();
            birkhoff_sum(phi, &word, lp.len(), false)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantPoint {
    pub p: f64,
    /// `P_G(φ̄ + p)`; `None` where the loop series diverges.
    pub value: Option<f64>,
    /// `ln Σ_{m ≤ L_max} e^{pm} Z*_m`.
    pub truncated: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantReport {
    pub state: usize,
    pub points: Vec<DiscriminantPoint>,
    /// Divergence boundary `p*`: the series converges exactly for `p < p*`.
    pub boundary: f64,
    /// Sup of the finite values over the grid.
    pub sup: f64,
    /// The induced pressure tends to `+∞` at the boundary.
    pub unbounded_at_boundary: bool,
    /// Loop sums beyond depth 2 are truncated at `L_max`.
    pub experimental: bool,
}

/// Closed-form `Σ_m e^{pm} Z*_m` data for depth ≤ 2.
struct LoopSeries {
    w: DMatrix<f64>,
    a: usize,
    others: Vec<usize>,
    boundary: f64,
}

impl LoopSeries {
    fn new(phi: &Potential, a: usize) -> Result<Self> {
        let w = weight_matrix(phi)?;
        let others: Vec<usize> = (0..phi.alphabet()).filter(|&s| s != a).collect();
        let sub = DMatrix::from_fn(others.len(), others.len(), |i, j| w[(others[i], others[j])]);
        let rho = linalg::perron(&sub, 1e-15, 1_000_000)?.value;
        Ok(Self {
            w,
            a,
            others,
            boundary: -rho.ln(),
        })
    }

    fn log_value(&self, p: f64) -> Option<f64> {
        if p >= self.boundary {
            return None;
        }
        let b = self.others.len();
        let ep = p.exp();
        let m = DMatrix::from_fn(b, b, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - ep * self.w[(self.others[i], self.others[j])]
        });
        let rhs = nalgebra::DVector::from_fn(b, |i, _| self.w[(self.others[i], self.a)]);
        let x = linalg::solve(m, rhs).ok()?;
        let back: f64 = (0..b).map(|i| self.w[(self.a, self.others[i])] * x[i]).sum();
        let total = ep * self.w[(self.a, self.a)] + ep * ep * back;
        (total > 0.0 && total.is_finite()).then(|| total.ln())
    }
}

/// Default grid: 64 points approaching `boundary` geometrically from below.
pub fn boundary_grid(boundary: f64) -> Vec<f64> {
    let span = boundary.abs().max(1.0);
    let ratio = (1e-6f64).powf(1.0 / 63.0);
    (0..64).map(|j| boundary - span * ratio.powi(j)).collect()
}

pub fn discriminant(phi: &Potential, a: usize, p_grid: Option<&[f64]>, l_max: usize) -> Result<DiscriminantReport> {
    if l_max < 2 {
        return Err(Error::InvalidParameter("L_max must be at least 2".into()));
    }
    let (_, log_zs) = log_partition_sequences(phi, a, l_max)?;
    let series = if phi.depth() <= 2 { Some(LoopSeries::new(phi, a)?) } else { None };
    let boundary = match &series {
        Some(s) => s.boundary,
        None => -(log_zs[l_max - 1] - log_zs[l_max - 2]),
    };
    let grid = p_grid.map(<[f64]>::to_vec).unwrap_or_else(|| boundary_grid(boundary));
    let points: Vec<DiscriminantPoint> = grid
        .iter()
        .map(|&p| {
            let truncated = log_sum_exp(log_zs.iter().enumerate().map(|(m, z)| z + p * (m + 1) as f64));
            let value = match &series {
                Some(s) => s.log_value(p),
                None => (p < boundary).then_some(truncated),
            };
            DiscriminantPoint { p, value, truncated }
        })
        .collect();
    let finite: Vec<f64> = points.iter().filter_map(|pt| pt.value).collect();
    if finite.is_empty() {
        return Err(Error::DivergentGrid);
    }
    let sup = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unbounded_at_boundary = series
        .as_ref()
        .and_then(|s| s.log_value(s.boundary - 1e-12 * s.boundary.abs().max(1.0)))
        .is_some_and(|v| v > sup);
    Ok(DiscriminantReport {
        state: a,
        points,
        boundary,
        sup,
        unbounded_at_boundary,
        experimental: series.is_none(),
    })
}

/// `P_G(φ̄ + p)` for depth-≤2 potentials; `None` past the boundary.
pub fn induced_pressure(phi: &Potential, a: usize, p: f64) -> Result<Option<f64>> {
    Ok(LoopSeries::new(phi, a)?.log_value(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    pub pressure: f64,
    pub entropy: f64,
    pub energy: f64,
    /// `|P_G − (h_μ + ∫φ dμ)|` at the equilibrium Markov measure.
    pub gap: f64,
    /// Largest free energy among randomly sampled competing Markov measures.
    pub best_competitor: f64,
}

/// Free energy `h_μ + ∫ φ dμ` of the Markov measure with transition matrix `p`.
fn markov_free_energy(phi: &Potential, p: &DMatrix<f64>) -> Result<(f64, f64)> {
    let pi = linalg::stationary(p)?;
    let w = weight_matrix(phi)?;
    let n = p.nrows();
    let (mut entropy, mut energy) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let q = p[(i, j)];
            if q > 0.0 {
                entropy -= pi[i] * q * q.ln();
                energy += pi[i] * q * w[(i, j)].ln();
            }
        }
    }
    Ok((entropy, energy))
}

pub fn variational_check(phi: &Potential, n_max: usize, competitors: usize, seed: u64) -> Result<VariationalReport> {
    use rand::{Rng, SeedableRng};
    let estimate = gurevich_pressure(phi, 0, n_max)?;
    let w = weight_matrix(phi)?;
    let perron = linalg::perron(&w, 1e-15, 1_000_000)?;
    let n = w.nrows();
    let eq = DMatrix::from_fn(n, n, |i, j| w[(i, j)] * perron.right[j] / (perron.value * perron.right[i]));
    let (entropy, energy) = markov_free_energy(phi, &eq)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best_competitor = f64::NEG_INFINITY;
    for _ in 0..competitors {
        let mut p = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.05..1.0));
        for i in 0..n {
            let s: f64 = p.row(i).sum();
            for j in 0..n {
                p[(i, j)] /= s;
            }
        }
        let (h, e) = markov_free_energy(phi, &p)?;
        best_competitor = best_competitor.max(h + e);
    }
    Ok(VariationalReport {
        pressure: estimate.extrapolated,
        entropy,
        energy,
        gap: (estimate.extrapolated - (entropy + energy)).abs(),
        best_competitor,
    })
}
