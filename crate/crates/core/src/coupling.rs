//! Explicit coupling of two g-measures: floors, defects, the pair kernel,
//! the pair chain with its return-time statistics, the Cesàro joining, the
//! d̄ upper bounds and a Monte Carlo simulator of the pair process.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmeasure::{g_measure, GFunction};
use crate::linalg;
use crate::potential::log_distance;
use crate::shift::{checked_size, decode, first_disagreement};
use crate::table::CylinderTable;

/// Floors `F(i,x,y) = min(g(ix), h(iy))` and defect `Δ(x,y) = 1 − Σ_i F`.
pub fn floor_and_defect(g: &GFunction, h: &GFunction, x: &[usize], y: &[usize]) -> Result<(Vec<f64>, f64)> {
    let (g, h) = common_depth(g, h)?;
    let fibers = g.fiber_count();
    let k = g.depth();
    let ix = word_index(g.alphabet(), &x[..(k - 1).min(x.len())], k - 1)?;
    let iy = word_index(g.alphabet(), &y[..(k - 1).min(y.len())], k - 1)?;
    debug_assert!(ix < fibers && iy < fibers);
    let (f, delta) = fiber_floor(&g, &h, ix, iy);
    Ok((f, delta))
}

fn word_index(n: usize, w: &[usize], depth: usize) -> Result<usize> {
    if w.len() < depth {
        return Err(Error::WordTooShort {
            len: w.len(),
            required: depth,
        });
    }
    crate::shift::CylinderIndex::new(n, depth)?.index(w)
}

fn common_depth(g: &GFunction, h: &GFunction) -> Result<(GFunction, GFunction)> {
    if g.alphabet() != h.alphabet() {
        return Err(Error::AlphabetMismatch(g.alphabet(), h.alphabet()));
    }
    let k = g.depth().max(h.depth());
    Ok((g.lift(k)?, h.lift(k)?))
}

/// Floors and the defect, the latter averaged over both residual masses.
fn fiber_floor(g: &GFunction, h: &GFunction, x: usize, y: usize) -> (Vec<f64>, f64) {
    let n = g.alphabet();
    let mut f = Vec::with_capacity(n);
    let (mut rg, mut rh) = (0.0, 0.0);
    for i in 0..n {
        let (a, b) = (g.at(i, x), h.at(i, y));
        let m = a.min(b);
        f.push(m);
        rg += a - m;
        rh += b - m;
    }
    (f, 0.5 * (rg + rh))
}

/// Transition probabilities `G(ix, jy)` on pair fibers at a common depth `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingKernel {
    g: GFunction,
    h: GFunction,
    alphabet: usize,
    fibers: usize,
    /// `floor[(x·S + y)·N + i]`.
    floor: Vec<f64>,
    /// `defect[x·S + y]`.
    defect: Vec<f64>,
    /// `kernel[(x·S + y)·N² + i·N + j]`.
    kernel: Vec<f64>,
}

pub fn coupling_kernel(g: &GFunction, h: &GFunction) -> Result<CouplingKernel> {
    let (g, h) = common_depth(g, h)?;
    let n = g.alphabet();
    let s = g.fiber_count();
    let pairs = s.checked_mul(s).ok_or(Error::Capacity {
        requested: (s as u128) * (s as u128),
        limit: crate::shift::capacity_limit(),
    })?;
    checked_size(n, 2 * g.depth())?;
    let mut floor = Vec::with_capacity(pairs * n);
    let mut defect = Vec::with_capacity(pairs);
    let mut kernel = vec![0.0; pairs * n * n];
    for x in 0..s {
        for y in 0..s {
            let (f, delta) = fiber_floor(&g, &h, x, y);
            let base = (x * s + y) * n * n;
            for i in 0..n {
                kernel[base + i * n + i] = f[i];
                if delta > 0.0 {
                    let excess_g = (g.at(i, x) - f[i]).max(0.0);
                    if excess_g == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        if j != i {
                            let excess_h = (h.at(j, y) - f[j]).max(0.0);
                            kernel[base + i * n + j] = excess_g * excess_h / delta;
                        }
                    }
                }
            }
            floor.extend(f);
            defect.push(delta);
        }
    }
    Ok(CouplingKernel {
        g,
        h,
        alphabet: n,
        fibers: s,
        floor,
        defect,
        kernel,
    })
}

impl CouplingKernel {
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.g.depth()
    }

    pub fn fibers(&self) -> usize {
        self.fibers
    }

    pub fn g(&self) -> &GFunction {
        &self.g
    }

    pub fn h(&self) -> &GFunction {
        &self.h
    }

    pub fn defect(&self, x: usize, y: usize) -> f64 {
        self.defect[x * self.fibers + y]
    }

    pub fn floor(&self, i: usize, x: usize, y: usize) -> f64 {
        self.floor[(x * self.fibers + y) * self.alphabet + i]
    }

    /// `G(i·x, j·y)` for fiber words with indices `x`, `y`.
    pub fn prob(&self, i: usize, j: usize, x: usize, y: usize) -> f64 {
        let n = self.alphabet;
        self.kernel[(x * self.fibers + y) * n * n + i * n + j]
    }

    fn fiber(&self, x: usize, y: usize) -> &[f64] {
        let nn = self.alphabet * self.alphabet;
        let base = (x * self.fibers + y) * nn;
        &self.kernel[base..base + nn]
    }

    /// Largest deviation of the row and column sums from `g` and `h`.
    pub fn marginal_error(&self) -> (f64, f64) {
        let n = self.alphabet;
        let (mut row, mut col) = (0.0f64, 0.0f64);
        for x in 0..self.fibers {
            for y in 0..self.fibers {
                let fib = self.fiber(x, y);
                for i in 0..n {
                    let r: f64 = (0..n).map(|j| fib[i * n + j]).sum();
                    let c: f64 = (0..n).map(|j| fib[j * n + i]).sum();
                    row = row.max((r - self.g.at(i, x)).abs());
                    col = col.max((c - self.h.at(i, y)).abs());
                }
            }
        }
        (row, col)
    }

    /// `max (Δ(x,y) − (1 − e^{−(V_{j+1}(g) + d)}))` over pairs and every
    /// `j ≤ t(x,y)`; nonpositive when the defect bound holds.
    pub fn defect_bound_excess(&self) -> Result<f64> {
        let d = log_distance(&self.g, &self.h)?;
        let k = self.depth();
        let v: Vec<f64> = (0..=k).map(|j| self.g.variation(j + 1)).collect();
        let n = self.alphabet;
        let mut worst = f64::NEG_INFINITY;
        for x in 0..self.fibers {
            let xw = decode(n, k - 1, x);
            for y in 0..self.fibers {
                let yw = decode(n, k - 1, y);
                let t = first_disagreement(&xw, &yw).unwrap_or(k - 1);
                let delta = self.defect(x, y);
                for vj in v.iter().take(t + 1) {
                    worst = worst.max(delta - (1.0 - (-(vj + d)).exp()));
                }
            }
        }
        Ok(worst)
    }
}

/// Match probabilities of the agreement-length process at one agreement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementLevel {
    pub agreement: usize,
    pub match_min: f64,
    pub match_max: f64,
}

/// The pair chain on window pairs, restricted to its recurrent class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZChain {
    pub window: usize,
    pub states: Vec<(usize, usize)>,
    pub stationary: Vec<f64>,
    /// Stationary mass of `{x_0 ≠ y_0}`.
    pub mismatch_mass: f64,
    /// Mean return time to a mismatch, from hitting-time equations.
    pub expected_return: f64,
    /// `mismatch_mass · expected_return`, one by Kac's lemma.
    pub kac_product: f64,
    pub levels: Vec<AgreementLevel>,
}

/// Kernel lifted so that fiber words have length at least one.
fn chain_kernel(g: &GFunction, h: &GFunction) -> Result<CouplingKernel> {
    let k = g.depth().max(h.depth()).max(2);
    coupling_kernel(&g.lift(k)?, &h.lift(k)?)
}

pub fn z_chain(g: &GFunction, h: &GFunction) -> Result<ZChain> {
    let kernel = chain_kernel(g, h)?;
    let n = kernel.alphabet;
    let s = kernel.fibers;
    let window = kernel.depth() - 1;
    let next = |x: usize, i: usize| (i * s + x) / n;
    let encode = |x: usize, y: usize| x * s + y;

    let mut index = vec![usize::MAX; s * s];
    let mut states = Vec::new();
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    index[0] = 0;
    states.push((0, 0));
    while let Some((x, y)) = queue.pop_front() {
        let fib = kernel.fiber(x, y);
        for i in 0..n {
            for j in 0..n {
                if fib[i * n + j] > 0.0 {
                    let (nx, ny) = (next(x, i), next(y, j));
                    if index[encode(nx, ny)] == usize::MAX {
                        index[encode(nx, ny)] = states.len();
                        states.push((nx, ny));
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
    }
    let m = states.len();
    let mut p = DMatrix::zeros(m, m);
    for (u, &(x, y)) in states.iter().enumerate() {
        let fib = kernel.fiber(x, y);
        for i in 0..n {
            for j in 0..n {
                let q = fib[i * n + j];
                if q > 0.0 {
                    p[(u, index[encode(next(x, i), next(y, j))])] += q;
                }
            }
        }
    }
    let stationary = linalg::stationary(&p)?;
    let block = s / n;
    let mismatch: Vec<bool> = states.iter().map(|&(x, y)| x / block != y / block).collect();
    let mismatch_mass: f64 = stationary.iter().zip(&mismatch).filter(|(_, &b)| b).map(|(v, _)| v).sum();

    let (expected_return, kac_product) = if mismatch.iter().any(|&b| b) {
        let mut a = DMatrix::identity(m, m);
        for u in 0..m {
            for v in 0..m {
                if !mismatch[v] {
                    a[(u, v)] -= p[(u, v)];
                }
            }
        }
        let hit = linalg::solve(a, DVector::from_element(m, 1.0))?;
        let e: f64 = (0..m)
            .filter(|&u| mismatch[u])
            .map(|u| stationary[u] * hit[u])
            .sum::<f64>()
            / mismatch_mass;
        (e, mismatch_mass * e)
    } else {
        (f64::INFINITY, 1.0)
    };

    let mut levels: Vec<AgreementLevel> = (0..=window)
        .map(|agreement| AgreementLevel {
            agreement,
            match_min: f64::INFINITY,
            match_max: f64::NEG_INFINITY,
        })
        .collect();
    for &(x, y) in &states {
        let t = first_disagreement(&decode(n, window, x), &decode(n, window, y)).unwrap_or(window);
        let matched = 1.0 - kernel.defect(x, y);
        let level = &mut levels[t];
        level.match_min = level.match_min.min(matched);
        level.match_max = level.match_max.max(matched);
    }
    levels.retain(|l| l.match_min.is_finite());
    Ok(ZChain {
        window,
        states,
        stationary,
        mismatch_mass,
        expected_return,
        kac_product,
        levels,
    })
}

/// Convergence classification of a nonnegative series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "limit")]
pub enum SeriesClass {
    ConvergentTo(f64),
    Convergent,
    Divergent,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeBound {
    pub d: f64,
    /// Partial sums `Σ_{n ≤ N} Π_{i ≤ n} e^{−(V_{i+1} + d)}`, `N = 1..=n_max`.
    pub partial_sums: Vec<f64>,
    pub class: SeriesClass,
}

/// Partial sums of `Σ_n Π_{i=1}^n e^{−(V_{i+1}+d)}` for an arbitrary
/// variation sequence `v(i) = V_i`, classified by a ratio test (`d > 0`) or
/// the Raabe quantity `n (e^{V_{n+2}+d} − 1)` at `n_max` (`d = 0`).
pub fn return_time_series(v: impl Fn(usize) -> f64, d: f64, n_max: usize) -> ReturnTimeBound {
    let mut partial_sums = Vec::with_capacity(n_max);
    let (mut log_term, mut sum) = (0.0, 0.0);
    for i in 1..=n_max {
        log_term -= v(i + 1) + d;
        sum += log_term.exp();
        partial_sums.push(sum);
    }
    let class = if d > 0.0 {
        SeriesClass::Convergent
    } else {
        let nm = n_max as f64;
        let raabe = nm * (v(n_max + 2) + d).exp_m1();
        if raabe <= 1.0 {
            SeriesClass::Divergent
        } else if raabe > 1.05 {
            SeriesClass::Convergent
        } else {
            SeriesClass::Undetermined
        }
    };
    ReturnTimeBound { d, partial_sums, class }
}

/// The series for a finite-depth `g`: variations vanish beyond the depth, so
/// the limit is a partial sum plus a closed geometric tail.
pub fn return_time_lower_bound(g: &GFunction, h: &GFunction, n_max: usize) -> Result<ReturnTimeBound> {
    let d = log_distance(g, h)?;
    let mut bound = return_time_series(|n| g.variation(n), d, n_max);
    bound.class = if d > 0.0 {
        SeriesClass::ConvergentTo(series_limit(g, d))
    } else {
        SeriesClass::Divergent
    };
    Ok(bound)
}

/// `Σ_{n ≥ 1} Π_{i=1}^n e^{−(V_{i+1}+d)}` in closed form (`d > 0`).
fn series_limit(g: &GFunction, d: f64) -> f64 {
    let k = g.depth().max(1);
    let mut log_term = 0.0;
    let mut sum = 0.0;
    for i in 1..k {
        log_term -= g.variation(i + 1) + d;
        sum += log_term.exp();
    }
    // terms n ≥ k: P_{k-1} e^{-d (n-k+1)}
    sum + log_term.exp() * (-d).exp() / (-(-d).exp_m1())
}

/// Pair-cylinder measure built by iterating the dual of the pair kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joining {
    pub depth: usize,
    pub alphabet: usize,
    /// `mass[x·N^m + y]` over pairs of depth-`m` words.
    pub mass: Vec<f64>,
    /// `μ{x_0 ≠ y_0}`.
    pub mismatch: f64,
    /// `‖T μ_n − μ_n‖_1` for the plain iterates.
    pub residuals: Vec<f64>,
    /// `‖T m_n − m_n‖_1` for the Cesàro averages.
    pub cesaro_residuals: Vec<f64>,
    /// Largest marginal error seen at any iterate (plain or averaged).
    pub max_marginal_error: f64,
    pub iterations: usize,
}

pub const JOINING_STOP: f64 = 1e-10;
pub const JOINING_ACCEPT: f64 = 1e-8;
pub const MARGINAL_TOL: f64 = 1e-10;

struct PairOperator<'a> {
    kernel: &'a CouplingKernel,
    depth: usize,
    words: usize,
}

impl PairOperator<'_> {
    fn apply(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.kernel.alphabet;
        let w = self.words;
        let rest = w / n;
        let k = self.kernel.depth();
        let drop = n.pow((self.depth - k + 1) as u32 - 1);
        // marginal over the last coordinate pair
        let mut tail = vec![0.0; rest * rest];
        for x in 0..w {
            for y in 0..w {
                tail[(x / n) * rest + y / n] += mu[x * w + y];
            }
        }
        let mut out = vec![0.0; w * w];
        for x in 0..w {
            let (i, xr) = (x / rest, x % rest);
            let fx = xr / drop;
            for y in 0..w {
                let (j, yr) = (y / rest, y % rest);
                let fy = yr / drop;
                out[x * w + y] = self.kernel.prob(i, j, fx, fy) * tail[xr * rest + yr];
            }
        }
        out
    }

    fn marginal_error(&self, mu: &[f64], nu_g: &[f64], nu_h: &[f64]) -> f64 {
        let w = self.words;
        let mut err: f64 = 0.0;
        for x in 0..w {
            let row: f64 = mu[x * w..(x + 1) * w].iter().sum();
            err = err.max((row - nu_g[x]).abs());
        }
        for y in 0..w {
            let col: f64 = (0..w).map(|x| mu[x * w + y]).sum();
            err = err.max((col - nu_h[y]).abs());
        }
        err
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn cesaro_joining(g: &GFunction, h: &GFunction, m: usize, iters: usize) -> Result<Joining> {
    let kernel = coupling_kernel(g, h)?;
    let depth = m.max(kernel.depth()).max(1);
    let n = kernel.alphabet;
    let words = checked_size(n, depth)?;
    checked_size(n, 2 * depth)?;
    let nu_g = g_measure(&kernel.g, depth)?.table().values().to_vec();
    let nu_h = g_measure(&kernel.h, depth)?.table().values().to_vec();
    let op = PairOperator {
        kernel: &kernel,
        depth,
        words,
    };
    let mut mu: Vec<f64> = (0..words * words).map(|p| nu_g[p / words] * nu_h[p % words]).collect();
    let mut sum = vec![0.0; words * words];
    let mut residuals = Vec::new();
    let mut cesaro_residuals = Vec::new();
    let mut max_marginal_error: f64 = 0.0;
    let mut iterations = 0;
    for step in 1..=iters {
        iterations = step;
        for (s, v) in sum.iter_mut().zip(&mu) {
            *s += v;
        }
        let avg: Vec<f64> = sum.iter().map(|s| s / step as f64).collect();
        let next = op.apply(&mu);
        let marg = op.marginal_error(&next, &nu_g, &nu_h).max(op.marginal_error(&avg, &nu_g, &nu_h));
        max_marginal_error = max_marginal_error.max(marg);
        if marg > MARGINAL_TOL {
            return Err(Error::CheckFailed {
                check: "joining marginals preserved by the pair operator",
                detail: format!("marginal error {marg:e} at iterate {step}"),
            });
        }
        let residual = l1(&next, &mu);
        residuals.push(residual);
        cesaro_residuals.push(l1(&op.apply(&avg), &avg));
        mu = next;
        if residual <= JOINING_STOP {
            break;
        }
    }
    let last = *residuals.last().unwrap_or(&f64::INFINITY);
    if last > JOINING_ACCEPT {
        return Err(Error::NonConvergence {
            iterations,
            residual: last,
        });
    }
    let rest = words / n;
    let mismatch = (0..words * words)
        .filter(|p| (p / words) / rest != (p % words) / rest)
        .map(|p| mu[p])
        .sum();
    Ok(Joining {
        depth,
        alphabet: n,
        mass: mu,
        mismatch,
        residuals,
        cesaro_residuals,
        max_marginal_error,
        iterations,
    })
}

impl Joining {
    /// Coordinate marginals as depth-`m` tables.
    pub fn marginals(&self) -> Result<(CylinderTable, CylinderTable)> {
        let w = self.mass.len().isqrt();
        let first = (0..w).map(|x| self.mass[x * w..(x + 1) * w].iter().sum()).collect();
        let second = (0..w).map(|y| (0..w).map(|x| self.mass[x * w + y]).sum()).collect();
        Ok((
            CylinderTable::new(self.alphabet, self.depth, first)?,
            CylinderTable::new(self.alphabet, self.depth, second)?,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbarBounds {
    pub d: f64,
    pub l_g: f64,
    /// Stationary mismatch probability of the coupling: `∫ δ dμ`.
    pub coupling_value: f64,
    /// Reciprocal of the return-time series.
    pub kac_bound: f64,
    pub exp_bound: f64,
    pub lipschitz: f64,
    /// `d > ln 2`: the Lipschitz entry is outside its hypothesis.
    pub lipschitz_out_of_hypothesis: bool,
    pub expected_return: f64,
    pub return_series: f64,
}

pub fn dbar_upper_bounds(g: &GFunction, h: &GFunction) -> Result<DbarBounds> {
    let d = log_distance(g, h)?;
    let l_g = g.summed_variation();
    let chain = z_chain(g, h)?;
    let series = if d > 0.0 { series_limit(g, d) } else { f64::INFINITY };
    let kac_bound = if series.is_finite() { 1.0 / series } else { 0.0 };
    let exp_bound = l_g.exp() * d.exp_m1();
    let lipschitz = 2.0 * l_g.exp() * d;
    let out = d > 2f64.ln();
    let bounds = DbarBounds {
        d,
        l_g,
        coupling_value: chain.mismatch_mass,
        kac_bound,
        exp_bound,
        lipschitz,
        lipschitz_out_of_hypothesis: out,
        expected_return: chain.expected_return,
        return_series: series,
    };
    let slack = 1e-12;
    let ordered = bounds.coupling_value <= kac_bound + slack
        && kac_bound <= exp_bound * (1.0 + slack) + slack
        && (out || exp_bound <= lipschitz * (1.0 + slack) + slack);
    if !ordered {
        return Err(Error::CheckFailed {
            check: "coupling <= kac <= exp <= lipschitz",
            detail: format!("{bounds:?}"),
        });
    }
    Ok(bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
    pub mismatch_frequency: Estimate,
    /// Mean length of the return gaps that open within the budget (the last
    /// one is run to completion); `None` when some replica saw no return.
    pub mean_return_time: Option<Estimate>,
    pub total_mismatches: u64,
    /// Agreement-length trajectory of replica 0 (first `trace` steps).
    pub trace: Vec<usize>,
}

fn estimate(xs: &[f64]) -> Estimate {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    Estimate {
        mean,
        se: (var / r).sqrt(),
    }
}

/// Runs `replicas` independent pair chains of `steps` steps each, seeded
/// `seed + replica`.
pub fn simulate_pair(g: &GFunction, h: &GFunction, steps: usize, seed: u64, replicas: usize, trace: usize) -> Result<SimulationReport> {
    if replicas == 0 || steps == 0 {
        return Err(Error::InvalidParameter("steps and replicas must be positive".into()));
    }
    let kernel = chain_kernel(g, h)?;
    let n = kernel.alphabet;
    let s = kernel.fibers;
    let block = s / n;
    let burn_in = steps / 100;
    let runs: Vec<(f64, Option<f64>, u64, Vec<usize>)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let (mut x, mut y) = (0usize, 0usize);
            let mut agreement = 0usize;
            let mut mismatches = 0u64;
            let mut first: Option<usize> = None;
            let mut last = 0usize;
            let mut gaps = 0u64;
            let mut path = Vec::new();
            let end = burn_in + steps;
            // the gap open at `end` is completed so that gap lengths are not truncated
            let hard_end = end.saturating_add(steps.saturating_mul(100));
            let mut t = 0usize;
            loop {
                let open = first.is_some() && t >= end;
                if (t >= end && !open) || t >= hard_end {
                    break;
                }
                let fib = kernel.fiber(x, y);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = fib.len() - 1;
                for (c, &q) in fib.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                while fib[pick] == 0.0 {
                    pick -= 1;
                }
                let (i, j) = (pick / n, pick % n);
                x = (i * s + x) / n;
                y = (j * s + y) / n;
                let miss = x / block != y / block;
                agreement = if miss { 0 } else { agreement + 1 };
                if t >= burn_in {
                    if r == 0 && path.len() < trace && t < end {
                        path.push(agreement);
                    }
                    if miss {
                        if t < end {
                            mismatches += 1;
                        }
                        if first.is_some() {
                            gaps += 1;
                            last = t;
                        } else {
                            first = Some(t);
                        }
                        if t >= end {
                            break;
                        }
                    }
                }
                t += 1;
            }
            let freq = mismatches as f64 / steps as f64;
            let ret = (gaps >= 1).then(|| (last - first.unwrap_or(last)) as f64 / gaps as f64);
            (freq, ret, mismatches, path)
        })
        .collect();
    let freqs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let rets: Option<Vec<f64>> = runs.iter().map(|r| r.1).collect();
    Ok(SimulationReport {
        steps,
        replicas,
        seed,
        mismatch_frequency: estimate(&freqs),
        mean_return_time: rets.map(|v| estimate(&v)),
        total_mismatches: runs.iter().map(|r| r.2).sum(),
        trace: runs.into_iter().next().map(|r| r.3).unwrap_or_default(),
    })
}

/// Depth-`depth` binary g with `log g` oscillations of harmonic size:
/// `g(0·w) = 1/(1 + e^{s(w)})`, `s(w) = Σ_j a_j (2 w_j − 1)`, `a_j = 1/((j+2)(j+3))`,
/// so that `V_{i+1}(g) ≤ 2/(i+1)` and the unperturbed return series diverges.
pub fn harmonic_family(depth: usize) -> Result<GFunction> {
    if depth < 2 {
        return Err(Error::InvalidParameter("harmonic family needs depth >= 2".into()));
    }
    let table = CylinderTable::from_fn(2, depth, |w| {
        let s: f64 = w[1..]
            .iter()
            .enumerate()
            .map(|(j, &b)| (2.0 * b as f64 - 1.0) / ((j + 2) * (j + 3)) as f64)
            .sum();
        let p0 = 1.0 / (1.0 + s.exp());
        if w[0] == 0 {
            p0
        } else {
            1.0 - p0
        }
    })?;
    GFunction::new(table)
}
