//! Lower bounds for d̄ from finite-block transportation problems, the
//! closed form for product measures, and the lower/upper sandwich.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::dbar_upper_bounds;
use crate::error::{Error, Result};
use crate::gmeasure::{g_measure, CylinderMeasure, GFunction};
use crate::shift::{checked_size, decode};

/// Law of the first `n` symbols of a stationary measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDistribution {
    pub n: usize,
    pub alphabet: usize,
    pub probs: Vec<f64>,
}

pub fn block_distribution(mu: &CylinderMeasure, n: usize) -> Result<BlockDistribution> {
    if n > mu.depth() {
        return Err(Error::DepthTooLarge {
            requested: n,
            available: mu.depth(),
        });
    }
    Ok(BlockDistribution {
        n,
        alphabet: mu.alphabet(),
        probs: mu.marginal(n)?.table().values().to_vec(),
    })
}

/// Optimal plan of a balanced transportation problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub n: usize,
    /// Basic cells `(row, column, amount)`; all other entries are zero.
    pub cells: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub pivots: usize,
}

/// Basic cells, total cost and pivot count.
pub type TransportSolution = (Vec<(usize, usize, f64)>, f64, usize);

const REDUCED_COST_TOL: f64 = 1e-12;
const BLAND_AFTER: usize = 50;

/// Minimises `Σ c_ij x_ij` subject to row sums `a` and column sums `b`
/// (transportation simplex: northwest-corner start, potentials, cycle pivots).
pub fn solve_transport(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportSolution> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("empty transportation problem".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(1.0) || a.iter().chain(b).any(|&v| v < 0.0) {
        return Err(Error::NotProbability(format!("unbalanced supplies {sa} vs {sb}")));
    }
    let b_scaled: Vec<f64> = b.iter().map(|v| v * sa / sb).collect();

    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    {
        let (mut ra, mut rb) = (a.to_vec(), b_scaled.clone());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]);
            basis.push((i, j, x));
            ra[i] -= x;
            rb[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0;
    for pivot in 0..max_pivots {
        // adjacency of the basis tree: rows 0..m, columns m..m+n
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
        for (e, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push((m + j, e));
            adj[m + j].push((i, e));
        }
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &adj[u] {
                if pot[v].is_nan() {
                    let (i, j, _) = basis[e];
                    pot[v] = cost(i, j) - pot[u];
                    queue.push_back(v);
                }
            }
        }
        let bland = degenerate_run >= BLAND_AFTER;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                let r = cost(i, j) - pot[i] - pot[m + j];
                if r < -REDUCED_COST_TOL && entering.is_none_or(|(_, _, best)| r < best) {
                    entering = Some((i, j, r));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            let total = basis.iter().map(|&(i, j, x)| cost(i, j) * x).sum();
            return Ok((basis, total, pivot));
        };
        // tree path from column ej to row ei
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let start = m + ej;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            if u == ei {
                break;
            }
            for &(v, e) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, e));
                    queue.push_back(v);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = ei;
        while node != start {
            let (prev, e) = parent[node].ok_or_else(|| Error::InvalidParameter("basis is not a spanning tree".into()))?;
            path.push(e);
            node = prev;
        }
        path.reverse();
        // path[0] touches column ej and is decreased; signs alternate
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let x = basis[e].2;
                let better = x < theta || (x == theta && bland && e < leave);
                if better {
                    theta = x;
                    leave = e;
                }
            }
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[e].2 -= theta;
            } else {
                basis[e].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
        for cell in &mut basis {
            if cell.2 < 0.0 {
                cell.2 = 0.0;
            }
        }
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }
    Err(Error::NonConvergence {
        iterations: max_pivots,
        residual: f64::NAN,
    })
}

/// `min_π E_π[(1/n) Ham(u, v)]` over couplings of two `n`-block laws.
pub fn hamming_ot_lower(nu1: &BlockDistribution, nu2: &BlockDistribution, n: usize) -> Result<TransportPlan> {
    if nu1.alphabet != nu2.alphabet {
        return Err(Error::AlphabetMismatch(nu1.alphabet, nu2.alphabet));
    }
    if n > nu1.n || n > nu2.n {
        return Err(Error::DepthTooLarge {
            requested: n,
            available: nu1.n.min(nu2.n),
        });
    }
    let q = nu1.alphabet;
    checked_size(q, 2 * n)?;
    let p1 = marginal_probs(nu1, n)?;
    let p2 = marginal_probs(nu2, n)?;
    let rows: Vec<usize> = (0..p1.len()).filter(|&i| p1[i] > 0.0).collect();
    let cols: Vec<usize> = (0..p2.len()).filter(|&j| p2[j] > 0.0).collect();
    let words: Vec<Vec<usize>> = (0..p1.len()).map(|i| decode(q, n, i)).collect();
    let cost = |r: usize, c: usize| -> f64 {
        let (u, v) = (&words[rows[r]], &words[cols[c]]);
        u.iter().zip(v).filter(|(x, y)| x != y).count() as f64 / n as f64
    };
    let a: Vec<f64> = rows.iter().map(|&i| p1[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| p2[j]).collect();
    let (cells, total, pivots) = solve_transport(&a, &b, cost)?;
    Ok(TransportPlan {
        n,
        cells: cells.into_iter().map(|(r, c, x)| (rows[r], cols[c], x)).collect(),
        cost: total,
        pivots,
    })
}

fn marginal_probs(nu: &BlockDistribution, n: usize) -> Result<Vec<f64>> {
    let group = checked_size(nu.alphabet, nu.n - n)?;
    Ok(nu.probs.chunks(group).map(|c| c.iter().sum()).collect())
}

fn check_probability(p: &[f64]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotProbability(format!("{p:?}")));
    }
    Ok(())
}

/// d̄ between product measures: total variation of the one-symbol laws.
pub fn iid_dbar_exact(p: &[f64], q: &[f64]) -> Result<f64> {
    check_probability(p)?;
    check_probability(q)?;
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `(n, hamming_ot_lower)` per block length.
    pub per_n: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
    pub certified: bool,
    /// Closed form when both inputs are memoryless.
    pub iid_exact: Option<f64>,
}

pub const SANDWICH_SLACK: f64 = 1e-8;

pub fn dbar_sandwich(g: &GFunction, h: &GFunction, n_list: &[usize]) -> Result<SandwichReport> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::InvalidParameter("block lengths must be positive".into()));
    }
    let depth = *n_list.iter().max().unwrap_or(&1);
    let mg = g_measure(g, depth)?;
    let mh = g_measure(h, depth)?;
    let bg = block_distribution(&mg, depth)?;
    let bh = block_distribution(&mh, depth)?;
    let per_n = n_list
        .par_iter()
        .map(|&n| Ok((n, hamming_ot_lower(&bg, &bh, n)?.cost)))
        .collect::<Result<Vec<_>>>()?;
    let lower = per_n.iter().map(|x| x.1).fold(0.0, f64::max);
    let upper = dbar_upper_bounds(g, h)?.coupling_value;
    let certified = lower <= upper + SANDWICH_SLACK;
    let iid_exact = if g.depth() == 1 && h.depth() == 1 {
        Some(iid_dbar_exact(g.table().values(), h.table().values())?)
    } else {
        None
    };
    if !certified {
        return Err(Error::CheckFailed {
            check: "block transport lower bound below coupling upper bound",
            detail: format!("lower {lower} > upper {upper}"),
        });
    }
    if let Some(exact) = iid_exact {
        if (lower - exact).abs() > SANDWICH_SLACK || (upper - exact).abs() > SANDWICH_SLACK {
            return Err(Error::CheckFailed {
                check: "product measures: lower = upper = total variation",
                detail: format!("lower {lower}, upper {upper}, exact {exact}"),
            });
        }
    }
    Ok(SandwichReport {
        per_n,
        lower,
        upper,
        certified,
        iid_exact,
    })
}

/// Convenience: block distribution of a g-measure.
pub fn g_blocks(g: &GFunction, n: usize) -> Result<BlockDistribution> {
    block_distribution(&g_measure(g, n)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p() -> GFunction {
        GFunction::memoryless(&[2.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    fn q() -> GFunction {
        GFunction::memoryless(&[0.5, 0.5]).unwrap()
    }

    #[test]
    fn block_examples() {
        let b = g_blocks(&p(), 2).unwrap();
        let expected = [4.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0];
        for (x, y) in b.probs.iter().zip(expected) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        let m = GFunction::markov(&[vec![0.8, 0.4], vec![0.2, 0.6]]).unwrap();
        let b = g_blocks(&m, 2).unwrap();
        assert_abs_diff_eq!(b.probs[0], 8.0 / 15.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.probs[3], 0.2, epsilon = 1e-14);
        assert!(block_distribution(&g_measure(&m, 2).unwrap(), 3).is_err());
    }

    #[test]
    fn transport_examples() {
        for n in 1..=3 {
            let a = g_blocks(&p(), n).unwrap();
            let b = g_blocks(&q(), n).unwrap();
            assert_abs_diff_eq!(hamming_ot_lower(&a, &a, n).unwrap().cost, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(hamming_ot_lower(&a, &b, n).unwrap().cost, 1.0 / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn iid_examples() {
        assert_abs_diff_eq!(iid_dbar_exact(&[2.0 / 3.0, 1.0 / 3.0], &[0.5, 0.5]).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
        assert_eq!(iid_dbar_exact(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(iid_dbar_exact(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(iid_dbar_exact(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let r = dbar_sandwich(&p(), &q(), &[1, 2, 3]).unwrap();
        assert_abs_diff_eq!(r.lower, 1.0 / 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.upper, 1.0 / 6.0, epsilon = 1e-10);
        let r = dbar_sandwich(&p(), &p(), &[1, 2]).unwrap();
        assert!(r.lower.abs() < 1e-15 && r.upper.abs() < 1e-15);
        let m = GFunction::markov(&[vec![0.8, 0.4], vec![0.2, 0.6]]).unwrap();
        let m2 = GFunction::markov(&[vec![0.78, 0.4], vec![0.22, 0.6]]).unwrap();
        let r = dbar_sandwich(&m, &m2, &[1, 2, 3, 4]).unwrap();
        assert!(r.certified && r.lower > 0.0);
    }

    #[test]
    fn degenerate_transport() {
        let (cells, cost, _) = solve_transport(&[0.5, 0.5], &[0.5, 0.5], |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(cells.len(), 3);
        assert_abs_diff_eq!(cost, 0.0, epsilon = 1e-15);
    }
}
