//! g-functions, their exact finite-depth g-measures, and the sup-norm
//! contraction of the associated transfer operator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::potential::Potential;
use crate::rpf::{apply_adjoint, apply_transfer};
use crate::table::CylinderTable;

/// Tolerance on fiber sums accepted at construction.
pub const FIBER_TOLERANCE: f64 = 1e-9;

/// Positive table with `Σ_i g(i·x) = 1` for every depth-`(k-1)` word `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GFunction {
    table: CylinderTable,
}

impl GFunction {
    pub fn new(table: CylinderTable) -> Result<Self> {
        let g = Self { table };
        g.check_positive()?;
        let (fiber, deviation) = g.max_fiber_deviation();
        if deviation > FIBER_TOLERANCE {
            return Err(Error::FiberSum { fiber, deviation });
        }
        Ok(g)
    }

    /// `g(i·x) = p_i`.
    pub fn memoryless(p: &[f64]) -> Result<Self> {
        Self::new(CylinderTable::new(p.len(), 1, p.to_vec())?)
    }

    /// Depth-2 g with `g(i·j) = m[i][j]`; columns must sum to one.
    pub fn markov(m: &[Vec<f64>]) -> Result<Self> {
        let n = m.len();
        let flat: Vec<f64> = m.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(CylinderTable::new(n, 2, flat)?)
    }

    /// Divides every fiber of a positive table by its sum.
    pub fn renormalize(table: CylinderTable) -> Result<Self> {
        let g = Self { table };
        g.check_positive()?;
        let sums = g.fiber_sums();
        let rest = sums.len();
        let values = g
            .table
            .values()
            .iter()
            .enumerate()
            .map(|(idx, &v)| v / sums[idx % rest])
            .collect();
        Self::new(CylinderTable::new(g.alphabet(), g.depth(), values)?)
    }

    fn check_positive(&self) -> Result<()> {
        if self.table.depth() == 0 {
            return Err(Error::InvalidParameter("g-function depth must be at least 1".into()));
        }
        match self.table.values().iter().position(|&v| !(v > 0.0)) {
            Some(index) => Err(Error::NonPositive {
                index,
                value: self.table.get(index),
            }),
            None => Ok(()),
        }
    }

    pub fn table(&self) -> &CylinderTable {
        &self.table
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    pub fn alphabet(&self) -> usize {
        self.table.alphabet()
    }

    /// Number of fibers (depth-`(k-1)` words).
    pub fn fiber_count(&self) -> usize {
        self.table.len() / self.alphabet()
    }

    /// `g(i·x)` for the fiber word with index `x`.
    pub fn at(&self, i: usize, x: usize) -> f64 {
        self.table.get(i * self.fiber_count() + x)
    }

    pub fn fiber_sums(&self) -> Vec<f64> {
        let rest = self.fiber_count();
        (0..rest)
            .map(|x| (0..self.alphabet()).map(|i| self.table.get(i * rest + x)).sum())
            .collect()
    }

    fn max_fiber_deviation(&self) -> (usize, f64) {
        self.fiber_sums()
            .iter()
            .enumerate()
            .map(|(x, s)| (x, (s - 1.0).abs()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn lift(&self, depth: usize) -> Result<Self> {
        Ok(Self {
            table: self.table.lift(depth)?,
        })
    }

    /// `log g` as an exactly depth-`k` potential.
    pub fn log_potential(&self) -> Result<Potential> {
        Potential::exact(self.table.map(f64::ln)?)
    }

    /// `V_n(g)`: variation of `log g` (agreement on `n - 1` symbols).
    pub fn variation(&self, n: usize) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        self.table.map(f64::ln).map_or(f64::INFINITY, |t| t.oscillation_at_agreement(n - 1))
    }

    /// `L_g = Σ_{i ≥ 1} V_{i+1}(g)`.
    pub fn summed_variation(&self) -> f64 {
        (2..=self.depth()).map(|n| self.variation(n)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GValidation {
    pub max_fiber_deviation: f64,
    pub min_entry: f64,
    /// `V_1 .. V_k`; zero beyond the depth.
    pub variations: Vec<f64>,
}

pub fn validate_g(table: &CylinderTable) -> Result<GValidation> {
    let g = GFunction::new(table.clone())?;
    Ok(GValidation {
        max_fiber_deviation: g.max_fiber_deviation().1,
        min_entry: g.table.min(),
        variations: (1..=g.depth()).map(|n| g.variation(n)).collect(),
    })
}

/// Shift-invariant probability on depth-`m` cylinders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    table: CylinderTable,
}

impl CylinderMeasure {
    pub fn new(table: CylinderTable) -> Result<Self> {
        if let Some(index) = table.values().iter().position(|&v| v < 0.0) {
            return Err(Error::NonPositive {
                index,
                value: table.get(index),
            });
        }
        let total: f64 = table.values().iter().sum();
        if (total - 1.0).abs() > FIBER_TOLERANCE {
            return Err(Error::NotProbability(format!("total mass {total}")));
        }
        Ok(Self { table })
    }

    /// Bernoulli product measure at depth `m`.
    pub fn product(p: &[f64], m: usize) -> Result<Self> {
        Self::new(CylinderTable::from_fn(p.len(), m, |w| w.iter().map(|&s| p[s]).product())?)
    }

    pub fn table(&self) -> &CylinderTable {
        &self.table
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    pub fn alphabet(&self) -> usize {
        self.table.alphabet()
    }

    pub fn mass(&self, word: &[usize]) -> Result<f64> {
        let m = self.marginal(word.len())?;
        m.table.eval(word)
    }

    /// Restriction to depth `n ≤ m`.
    pub fn marginal(&self, n: usize) -> Result<Self> {
        Ok(Self {
            table: self.table.prefix_sums(n)?,
        })
    }

    /// `max |μ[w] − μ(σ^{-1}[w])|` over depth-`(m-1)` words.
    pub fn stationarity_defect(&self) -> Result<f64> {
        let head = self.table.prefix_sums(self.depth() - 1)?;
        let shifted = self.table.shift_sums()?;
        head.max_abs_diff(&shifted)
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        let d = self.table.zip_with(&other.table, |a, b| (a - b).abs())?;
        Ok(d.values().iter().sum())
    }
}

/// Stationary law of the depth-`(k-1)` window chain `x → (i·x)[..k-1]`.
fn window_stationary(g: &GFunction) -> Result<Vec<f64>> {
    let k = g.depth();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let n = g.alphabet();
    let states = g.fiber_count();
    let mut p = DMatrix::zeros(states, states);
    for x in 0..states {
        for i in 0..n {
            let y = (i * states + x) / n;
            p[(x, y)] += g.at(i, x);
        }
    }
    linalg::stationary(&p)
}

/// Exact g-measure on depth-`m` cylinders.
pub fn g_measure(g: &GFunction, m: usize) -> Result<CylinderMeasure> {
    let k = g.depth();
    let depth = m.max(k);
    let pi = window_stationary(g)?;
    let tail_len = k - 1;
    let n = g.alphabet();
    let tail_count = pi.len();
    let table = CylinderTable::from_fn(n, depth, |w| {
        let mut tail = 0;
        for &s in &w[depth - tail_len..] {
            tail = tail * n + s;
        }
        let mut mass = pi[tail % tail_count.max(1)];
        for j in 0..=depth - k {
            let mut idx = 0;
            for &s in &w[j..j + k] {
                idx = idx * n + s;
            }
            mass *= g.table.get(idx);
        }
        mass
    })?;
    let measure = CylinderMeasure::new(table)?;
    if depth == m {
        Ok(measure)
    } else {
        measure.marginal(m)
    }
}

/// `‖L*_{log g} μ − μ‖_∞` at the depth of `μ`.
pub fn adjoint_residual(g: &GFunction, mu: &CylinderMeasure) -> Result<f64> {
    let image = apply_adjoint(&g.log_potential()?, mu.table())?;
    image.max_abs_diff(mu.table())
}

/// Largest `‖L_{log g} f‖_∞ / ‖f‖_∞` over the constant function, the
/// indicator of `[0]`, and `samples` random sign tables at depth `k`.
pub fn sup_contraction_check(g: &GFunction, samples: usize, seed: u64) -> Result<f64> {
    let phi = g.log_potential()?;
    let n = g.alphabet();
    let k = g.depth();
    let mut tests = vec![
        CylinderTable::constant(n, 0, 1.0)?,
        CylinderTable::indicator(n, &[0])?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        tests.push(CylinderTable::from_fn(n, k, |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })?);
    }
    let mut worst: f64 = 0.0;
    for f in &tests {
        let norm = f.sup_norm();
        if norm > 0.0 {
            worst = worst.max(apply_transfer(&phi, f)?.sup_norm() / norm);
        }
    }
    Ok(worst)
}
