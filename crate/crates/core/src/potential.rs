//! Potentials with certified regularity: variations, Hölder distances,
//! Birkhoff sums and the log-distance between g-functions.
//!
//! Variation convention: `var_n(φ)` is the supremum of `|φ(x) - φ(y)|` over
//! points agreeing on their first `n - 1` symbols, so `var_1` is the full
//! oscillation and a depth-`k` table has `var_n = 0` for every `n > k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmeasure::GFunction;
use crate::table::CylinderTable;

/// Certificate `var_n ≤ c · theta^n` for `n` beyond the table depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    #[serde(rename = "C")]
    pub c: f64,
    pub theta: f64,
}

impl Tail {
    pub const EXACT: Tail = Tail { c: 0.0, theta: 0.5 };

    pub fn new(c: f64, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("tail constant must be finite and >= 0, got {c}")));
        }
        Ok(Self { c, theta })
    }

    pub fn is_exact(&self) -> bool {
        self.c == 0.0
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

/// Whether a variation value is computed from the table or certified by the tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationKind {
    Exact,
    Bound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub value: f64,
    pub kind: VariationKind,
}

/// Locally constant table plus a certified Hölder tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    table: CylinderTable,
    tail: Tail,
}

impl Potential {
    pub fn new(table: CylinderTable, tail: Tail) -> Result<Self> {
        check_theta(tail.theta)?;
        if table.depth() == 0 {
            return Err(Error::InvalidParameter("potential depth must be at least 1".into()));
        }
        Ok(Self { table, tail })
    }

    pub fn exact(table: CylinderTable) -> Result<Self> {
        Self::new(table, Tail::EXACT)
    }

    pub fn from_values(alphabet: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        Self::exact(CylinderTable::new(alphabet, depth, values)?)
    }

    /// `φ = ln(weights)`; weights must be positive.
    pub fn from_weights(alphabet: usize, depth: usize, weights: &[f64]) -> Result<Self> {
        if let Some(index) = weights.iter().position(|&w| !(w > 0.0)) {
            return Err(Error::NonPositive {
                index,
                value: weights[index],
            });
        }
        Self::from_values(alphabet, depth, weights.iter().map(|w| w.ln()).collect())
    }

    /// Depth-2 potential with `e^{φ(ij)} = weights[i][j]`.
    pub fn from_matrix(weights: &[Vec<f64>]) -> Result<Self> {
        let n = weights.len();
        let flat: Vec<f64> = weights.iter().flat_map(|row| row.iter().copied()).collect();
        if flat.len() != n * n {
            return Err(Error::TableLength {
                got: flat.len(),
                expected: n * n,
            });
        }
        Self::from_weights(n, 2, &flat)
    }

    pub fn constant(alphabet: usize, value: f64) -> Result<Self> {
        Self::exact(CylinderTable::constant(alphabet, 1, value)?)
    }

    pub fn table(&self) -> &CylinderTable {
        &self.table
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn with_tail(mut self, tail: Tail) -> Result<Self> {
        check_theta(tail.theta)?;
        self.tail = tail;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    pub fn alphabet(&self) -> usize {
        self.table.alphabet()
    }

    pub fn eval(&self, word: &[usize]) -> Result<f64> {
        self.table.eval(word)
    }

    /// Table oscillation over points agreeing on `t` symbols.
    pub fn variation_at_agreement(&self, t: usize) -> f64 {
        self.table.oscillation_at_agreement(t)
    }

    pub fn variation(&self, n: usize) -> Result<Variation> {
        if n == 0 {
            return Err(Error::InvalidParameter("variations are indexed from n = 1".into()));
        }
        if n <= self.depth() {
            Ok(Variation {
                value: self.variation_at_agreement(n - 1),
                kind: VariationKind::Exact,
            })
        } else if self.tail.is_exact() {
            Ok(Variation {
                value: 0.0,
                kind: VariationKind::Exact,
            })
        } else {
            Ok(Variation {
                value: self.tail.c * self.tail.theta.powi(n as i32),
                kind: VariationKind::Bound,
            })
        }
    }

    /// `Σ_{n ≥ from} var_n`, with the tail certificate summed in closed form.
    pub fn variation_sum_from(&self, from: usize) -> f64 {
        let from = from.max(1);
        let exact: f64 = (from..=self.depth()).map(|n| self.variation_at_agreement(n - 1)).sum();
        let start = from.max(self.depth() + 1) as i32;
        let tail = self.tail.c * self.tail.theta.powi(start) / (1.0 - self.tail.theta);
        exact + tail
    }

    pub fn lift(&self, depth: usize) -> Result<Self> {
        Self::new(self.table.lift(depth)?, self.tail)
    }

    pub fn add_constant(&self, c: f64) -> Result<Self> {
        Self::new(self.table.map(|v| v + c)?, self.tail)
    }

    /// `self + s · other`; tail certificates add.
    pub fn add_scaled(&self, other: &Potential, s: f64) -> Result<Self> {
        let table = self.table.zip_with(&other.table, |a, b| a + s * b)?;
        let tail = combine_tails(self.tail, other.tail, s.abs());
        Self::new(table, tail)
    }

    /// Pointwise `e^{φ}` on the table.
    pub fn weights(&self) -> Vec<f64> {
        self.table.values().iter().map(|v| v.exp()).collect()
    }
}

fn combine_tails(a: Tail, b: Tail, s: f64) -> Tail {
    match (a.is_exact(), b.is_exact() || s == 0.0) {
        (true, true) => a,
        (true, false) => Tail { c: s * b.c, theta: b.theta },
        (false, true) => a,
        (false, false) => Tail {
            c: a.c + s * b.c,
            theta: a.theta.max(b.theta),
        },
    }
}

/// `‖φ − τ‖_∞`, `|φ − τ|_θ` and their sum; `+∞` when a tail is incompatible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderMetricReport {
    pub theta: f64,
    pub sup_diff: f64,
    /// Seminorm of the tabulated difference, computed over all word pairs.
    pub seminorm_exact: f64,
    /// Contribution certified by the tails for pairs beyond the table depth.
    pub tail_bound: f64,
    pub seminorm_diff: f64,
    pub d_theta: f64,
}

pub fn holder_distance(phi: &Potential, tau: &Potential, theta: f64) -> Result<HolderMetricReport> {
    check_theta(theta)?;
    let diff = phi.table.zip_with(&tau.table, |a, b| a - b)?;
    let sup_diff = diff.sup_norm();
    if phi.tail == tau.tail && diff.values().iter().all(|&v| v == 0.0) {
        return Ok(HolderMetricReport {
            theta,
            sup_diff: 0.0,
            seminorm_exact: 0.0,
            tail_bound: 0.0,
            seminorm_diff: 0.0,
            d_theta: 0.0,
        });
    }
    let seminorm_exact = diff.holder_seminorm(theta);
    let tail_bound = tail_contribution(phi, theta) + tail_contribution(tau, theta);
    let seminorm_diff = seminorm_exact + tail_bound;
    Ok(HolderMetricReport {
        theta,
        sup_diff,
        seminorm_exact,
        tail_bound,
        seminorm_diff,
        d_theta: sup_diff + seminorm_diff,
    })
}

/// `sup_{t ≥ k} c θ_c^{t+1} / θ^t`, infinite when `θ_c > θ`.
fn tail_contribution(phi: &Potential, theta: f64) -> f64 {
    let tail = phi.tail;
    if tail.is_exact() {
        return 0.0;
    }
    if tail.theta > theta {
        return f64::INFINITY;
    }
    let k = phi.depth() as i32;
    tail.c * tail.theta.powi(k + 1) / theta.powi(k)
}

/// `S_n φ` along `word`; a periodic word is extended cyclically.
pub fn birkhoff_sum(phi: &Potential, word: &[usize], n: usize, periodic: bool) -> Result<f64> {
    let k = phi.depth();
    if periodic {
        if word.is_empty() {
            return Err(Error::WordTooShort { len: 0, required: 1 });
        }
        let len = word.len();
        let mut window = vec![0; k];
        let mut total = 0.0;
        for j in 0..n {
            for (i, slot) in window.iter_mut().enumerate() {
                *slot = word[(j + i) % len];
            }
            total += phi.eval(&window)?;
        }
        Ok(total)
    } else {
        let required = n + k - 1;
        if word.len() < required {
            return Err(Error::WordTooShort {
                len: word.len(),
                required,
            });
        }
        (0..n).map(|j| phi.eval(&word[j..])).sum()
    }
}

/// `‖log g − log h‖_∞` over the finer of the two depths.
pub fn log_distance(g: &GFunction, h: &GFunction) -> Result<f64> {
    let lg = g.table().map(f64::ln)?;
    let lh = h.table().map(f64::ln)?;
    lg.max_abs_diff(&lh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn phi1() -> Potential {
        Potential::from_weights(2, 1, &[2.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn eval_is_prefix_lookup() {
        assert_eq!(phi1().eval(&[0, 1]).unwrap(), (2.0f64 / 3.0).ln());
        let phi2 = Potential::from_values(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(phi2.eval(&[1, 0, 1]).unwrap(), 2.0);
        assert!(phi2.eval(&[1]).is_err());
    }

    #[test]
    fn variations_small_cases() {
        let v1 = phi1().variation(1).unwrap();
        assert_abs_diff_eq!(v1.value, 2f64.ln(), epsilon = 1e-15);
        assert_eq!(phi1().variation(2).unwrap().value, 0.0);
        let m = Potential::from_weights(2, 2, &[0.8, 0.4, 0.2, 0.6]).unwrap();
        assert_abs_diff_eq!(m.variation(2).unwrap().value, 3f64.ln(), epsilon = 1e-15);
        let tailed = phi1().with_tail(Tail::new(2.0, 0.5).unwrap()).unwrap();
        let v3 = tailed.variation(3).unwrap();
        assert_eq!(v3.kind, VariationKind::Bound);
        assert_abs_diff_eq!(v3.value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn holder_distance_cases() {
        let r = holder_distance(&phi1(), &phi1(), 0.5).unwrap();
        assert_eq!(r.d_theta, 0.0);
        let shifted = phi1().add_constant(0.3).unwrap();
        let r = holder_distance(&phi1(), &shifted, 0.5).unwrap();
        assert_abs_diff_eq!(r.sup_diff, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(r.seminorm_diff, 0.0, epsilon = 1e-15);
        assert!(holder_distance(&phi1(), &shifted, 1.0).is_err());
    }

    #[test]
    fn holder_distance_matches_pair_enumeration() {
        let tau = Potential::from_weights(2, 1, &[0.5, 0.5]).unwrap();
        let r = holder_distance(&phi1(), &tau, 0.5).unwrap();
        let delta = [(4.0f64 / 3.0).ln(), (2.0f64 / 3.0).ln()];
        let mut semi: f64 = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                if x != y {
                    semi = semi.max((delta[x] - delta[y]).abs());
                }
            }
        }
        assert_abs_diff_eq!(r.sup_diff, 1.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.seminorm_diff, semi, epsilon = 1e-15);
    }

    #[test]
    fn incompatible_tail_is_infinite() {
        let rough = phi1().with_tail(Tail::new(1.0, 0.9).unwrap()).unwrap();
        let r = holder_distance(&rough, &phi1(), 0.5).unwrap();
        assert!(r.d_theta.is_infinite());
    }

    #[test]
    fn birkhoff_sums() {
        let s = birkhoff_sum(&phi1(), &[0, 1], 2, true).unwrap();
        assert_abs_diff_eq!(s, (2.0f64 / 3.0).ln() + (1.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_eq!(birkhoff_sum(&phi1(), &[1, 0], 1, false).unwrap(), (1.0f64 / 3.0).ln());
        let zero = Potential::constant(2, 0.0).unwrap();
        assert_eq!(birkhoff_sum(&zero, &[0, 1, 1], 3, true).unwrap(), 0.0);
        let phi2 = Potential::from_values(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(birkhoff_sum(&phi2, &[0, 1], 2, false).is_err());
        assert_eq!(birkhoff_sum(&phi2, &[0, 1], 2, true).unwrap(), 3.0);
    }

    #[test]
    fn log_distance_cases() {
        let g = GFunction::memoryless(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let h = GFunction::memoryless(&[0.5, 0.5]).unwrap();
        assert_eq!(log_distance(&g, &g).unwrap(), 0.0);
        assert_abs_diff_eq!(log_distance(&g, &h).unwrap(), 1.5f64.ln(), epsilon = 1e-15);
        let a = GFunction::memoryless(&[0.8, 0.2]).unwrap();
        let b = GFunction::memoryless(&[0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(log_distance(&a, &b).unwrap(), 4f64.ln(), epsilon = 1e-15);
    }
}
