#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermo_core::{CylinderTable, GFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random g-function with entries bounded away from zero.
pub fn random_g(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> GFunction {
    let t = CylinderTable::from_fn(n, depth, |_| rng.gen_range(0.05..1.0)).unwrap();
    GFunction::renormalize(t).unwrap()
}

/// `h = g · e^u` renormalized, `u ∈ [−spread, spread]`.
pub fn perturbed_g(rng: &mut ChaCha8Rng, g: &GFunction, depth: usize, spread: f64) -> GFunction {
    let lifted = g.lift(depth.max(g.depth())).unwrap();
    let t = lifted.table();
    let values: Vec<f64> = t.values().iter().map(|v| v * rng.gen_range(-spread..=spread).exp()).collect();
    GFunction::renormalize(CylinderTable::new(t.alphabet(), t.depth(), values).unwrap()).unwrap()
}

pub fn random_probability(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Words of length `n` over `q` symbols, first symbol most significant.
pub fn word(q: usize, n: usize, mut idx: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for slot in w.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
    w
}

/// Sup of `|log g(u) − log g(v)|` over table words sharing their first `t` symbols.
pub fn brute_variation(g: &GFunction, t: usize) -> f64 {
    let n = g.alphabet();
    let k = g.depth();
    if t >= k {
        return 0.0;
    }
    let vals = g.table().values();
    let mut worst = 0.0f64;
    for a in 0..vals.len() {
        for b in 0..vals.len() {
            let (u, v) = (word(n, k, a), word(n, k, b));
            if u[..t] == v[..t] {
                worst = worst.max((vals[a].ln() - vals[b].ln()).abs());
            }
        }
    }
    worst
}

/// `sup |log g − log h|` after lifting both to a common depth.
pub fn brute_log_distance(g: &GFunction, h: &GFunction) -> f64 {
    let k = g.depth().max(h.depth());
    let (g, h) = (g.lift(k).unwrap(), h.lift(k).unwrap());
    g.table()
        .values()
        .iter()
        .zip(h.table().values())
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max)
}

/// Minimum of a transportation problem by enumerating the basic feasible
/// solutions (spanning trees of the bipartite graph).
pub fn brute_force_transport(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(size);
    subsets(&cells, size, 0, &mut chosen, &mut |basis| {
        if let Some(x) = tree_solution(m, n, a, b, basis) {
            if x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = basis.iter().zip(&x).map(|(&(i, j), v)| cost(i, j) * v).sum();
                best = best.min(c);
            }
        }
    });
    best
}

type Visit<'a> = dyn FnMut(&[(usize, usize)]) + 'a;

fn subsets(cells: &[(usize, usize)], k: usize, start: usize, chosen: &mut Vec<(usize, usize)>, f: &mut Visit) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for c in start..cells.len() {
        if cells.len() - c < k - chosen.len() {
            break;
        }
        chosen.push(cells[c]);
        subsets(cells, k, c + 1, chosen, f);
        chosen.pop();
    }
}

/// Unique solution on a spanning tree by leaf elimination; `None` if the
/// cells do not form a tree.
fn tree_solution(m: usize, n: usize, a: &[f64], b: &[f64], basis: &[(usize, usize)]) -> Option<Vec<f64>> {
    let mut supply: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in basis {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut x = vec![f64::NAN; basis.len()];
    let mut done = vec![false; basis.len()];
    for _ in 0..basis.len() {
        let leaf = (0..m + n).find(|&v| degree[v] == 1)?;
        let e = (0..basis.len()).find(|&e| !done[e] && (basis[e].0 == leaf || m + basis[e].1 == leaf))?;
        let (i, j) = basis[e];
        let other = if i == leaf { m + j } else { i };
        x[e] = supply[leaf];
        supply[other] -= supply[leaf];
        supply[leaf] = 0.0;
        done[e] = true;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    Some(x)
}
