//! The transfer operator on finite-depth cylinder functions, its Perron
//! eigendata, normalization to g-functions, the weighted norm built from a
//! shifted potential, and continuity diagnostics for the eigendata.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmeasure::{CylinderMeasure, GFunction};
use crate::potential::{check_theta, holder_distance, Potential};
use crate::pressure::{self, induced_pressure};
use crate::shift::checked_size;
use crate::table::{CylinderFunction, CylinderTable};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Largest residual accepted by downstream constructions.
pub const ACCEPT_RESIDUAL: f64 = 1e-10;

/// `(L_φ f)(x) = Σ_i e^{φ(ix)} f(ix)`, tabulated at depth `max(m, k-1)`.
pub fn apply_transfer(phi: &Potential, f: &CylinderFunction) -> Result<CylinderFunction> {
    if phi.alphabet() != f.alphabet() {
        return Err(Error::AlphabetMismatch(phi.alphabet(), f.alphabet()));
    }
    let n = phi.alphabet();
    let k = phi.depth();
    let out = f.depth().max(k - 1);
    let rest = checked_size(n, out)?;
    let phi_drop = checked_size(n, out + 1 - k)?;
    let f_drop = checked_size(n, out + 1 - f.depth())?;
    let pv = phi.table().values();
    let fv = f.values();
    let values = (0..rest)
        .map(|x| {
            (0..n)
                .map(|i| {
                    let w = i * rest + x;
                    pv[w / phi_drop].exp() * fv[w / f_drop]
                })
                .sum()
        })
        .collect();
    CylinderTable::new(n, out, values)
}

/// Adjoint action on cylinder masses: `(L*ν)[w] = e^{φ(w[..k])} ν[w[1..]]`.
pub fn apply_adjoint(phi: &Potential, nu: &CylinderTable) -> Result<CylinderTable> {
    let k = phi.depth();
    let d = nu.depth();
    if d < k {
        return Err(Error::DepthTooLarge {
            requested: k,
            available: d,
        });
    }
    let n = phi.alphabet();
    let tail = nu.prefix_sums(d - 1)?;
    let rest = tail.len();
    let drop = checked_size(n, d - k)?;
    let pv = phi.table().values();
    let values = (0..nu.len())
        .map(|w| pv[w / drop].exp() * tail.get(w % rest))
        .collect();
    CylinderTable::new(n, d, values)
}

/// Perron triple with `∫ h dν = 1` and `ν` a probability on cylinders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub lambda: f64,
    pub log_lambda: f64,
    /// Eigenfunction, depth `max(m, k-1)`.
    pub h: CylinderFunction,
    /// Conformal masses, depth `max(m, k)`.
    pub nu: CylinderTable,
    /// `‖L h − λ h‖_∞ / ‖h‖_∞`.
    pub residual: f64,
    /// `‖L* ν − λ ν‖_1`.
    pub nu_residual: f64,
    pub iterations: usize,
}

fn integrate(h: &CylinderTable, nu: &CylinderTable) -> Result<f64> {
    let lifted = h.lift(nu.depth())?;
    Ok(lifted.values().iter().zip(nu.values()).map(|(a, b)| a * b).sum())
}

pub fn rpf_eigendata(phi: &Potential, m: usize, max_iter: usize, tol: f64) -> Result<EigenData> {
    let n = phi.alphabet();
    let k = phi.depth();
    let mut h = CylinderTable::constant(n, m.max(k - 1), 1.0)?;
    let nu_depth = m.max(k);
    let count = checked_size(n, nu_depth)?;
    let mut nu = CylinderTable::constant(n, nu_depth, 1.0 / count as f64)?;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for iter in 1..=max_iter {
        let lh = apply_transfer(phi, &h)?;
        let lnu = apply_adjoint(phi, &nu)?;
        let lambda = integrate(&lh, &nu)? / integrate(&h, &nu)?;
        let residual = lh.zip_with(&h, |a, b| a - lambda * b)?.sup_norm() / h.sup_norm();
        let nu_residual: f64 = lnu
            .values()
            .iter()
            .zip(nu.values())
            .map(|(a, b)| (a - lambda * b).abs())
            .sum();
        last = (residual, nu_residual);
        if residual <= tol && nu_residual <= tol {
            let total: f64 = nu.values().iter().sum();
            let nu = nu.scale(1.0 / total)?;
            let h = h.scale(1.0 / integrate(&h, &nu)?)?;
            return Ok(EigenData {
                lambda,
                log_lambda: lambda.ln(),
                h,
                nu,
                residual,
                nu_residual,
                iterations: iter,
            });
        }
        h = lh.scale(1.0 / lh.sup_norm())?;
        let mass: f64 = lnu.values().iter().sum();
        nu = lnu.scale(1.0 / mass)?;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last.0.max(last.1),
    })
}

pub fn rpf_eigendata_default(phi: &Potential, m: usize) -> Result<EigenData> {
    rpf_eigendata(phi, m, DEFAULT_MAX_ITER, DEFAULT_TOL)
}

impl EigenData {
    /// Conformal masses extended to `depth` by `ν[iw] = e^{φ(iw)} ν[w] / λ`.
    pub fn nu_at(&self, phi: &Potential, depth: usize) -> Result<CylinderTable> {
        if depth <= self.nu.depth() {
            return self.nu.prefix_sums(depth);
        }
        let mut nu = self.nu.clone();
        while nu.depth() < depth {
            let wider = CylinderTable::constant(nu.alphabet(), nu.depth() + 1, 0.0)?;
            let rest = nu.len();
            let drop = checked_size(nu.alphabet(), nu.depth() + 1 - phi.depth())?;
            let pv = phi.table().values();
            let values = (0..wider.len())
                .map(|w| pv[w / drop].exp() * nu.get(w % rest) / self.lambda)
                .collect();
            nu = CylinderTable::new(nu.alphabet(), nu.depth() + 1, values)?;
        }
        Ok(nu)
    }

    /// The RPF measure `h dν` on depth-`depth` cylinders.
    pub fn rpf_measure(&self, phi: &Potential, depth: usize) -> Result<CylinderMeasure> {
        let d = depth.max(self.nu.depth()).max(self.h.depth());
        let nu = self.nu_at(phi, d)?;
        let h = self.h.lift(d)?;
        let table = CylinderTable::new(
            nu.alphabet(),
            d,
            h.values().iter().zip(nu.values()).map(|(a, b)| a * b).collect(),
        )?;
        let total: f64 = table.values().iter().sum();
        let measure = CylinderMeasure::new(table.scale(1.0 / total)?)?;
        measure.marginal(depth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub g: GFunction,
    /// Largest fiber-sum deviation before exact renormalization.
    pub fiber_deviation: f64,
}

/// `g_φ = e^φ h / (λ h∘σ)` at depth `max(k, depth(h) + 1)`.
pub fn normalize_to_g(phi: &Potential, eig: &EigenData) -> Result<Normalized> {
    if eig.residual > ACCEPT_RESIDUAL {
        return Err(Error::ResidualTooLarge {
            residual: eig.residual,
            tolerance: ACCEPT_RESIDUAL,
        });
    }
    let n = phi.alphabet();
    let d = eig.h.depth();
    let depth = phi.depth().max(d + 1);
    let rest = checked_size(n, depth - 1)?;
    let phi_t = phi.table().lift(depth)?;
    let h_head = eig.h.lift(depth)?;
    let h_tail = eig.h.lift(depth - 1)?;
    let raw = CylinderTable::new(
        n,
        depth,
        (0..phi_t.len())
            .map(|w| phi_t.get(w).exp() * h_head.get(w) / (eig.lambda * h_tail.get(w % rest)))
            .collect(),
    )?;
    let sums: Vec<f64> = (0..rest).map(|x| (0..n).map(|i| raw.get(i * rest + x)).sum()).collect();
    let fiber_deviation = sums.iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    Ok(Normalized {
        g: GFunction::renormalize(raw)?,
        fiber_deviation,
    })
}

/// `φ − ln λ_φ`, using eigendata at depth `m`.
pub fn pressure_normalize(phi: &Potential, m: usize) -> Result<(Potential, EigenData)> {
    let eig = rpf_eigendata_default(phi, m)?;
    Ok((phi.add_constant(-eig.log_lambda)?, eig))
}

/// `θ e^p < 1`, the admissibility condition on the shift parameter.
pub fn check_shift_condition(theta: f64, p: f64) -> Result<()> {
    let value = theta * p.exp();
    if value < 1.0 && value > 0.0 {
        Ok(())
    } else {
        Err(Error::ShiftCondition { theta, p, value })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiShift {
    /// `ψ = φ₀ + ε − p 1_[a]` with `φ₀ = φ − P_G(φ)`.
    pub psi: Potential,
    pub base: Potential,
    pub state: usize,
    pub epsilon: f64,
    pub p: f64,
    pub theta: f64,
    /// `P_G(ψ)`, zero up to numerical error.
    pub psi_pressure: f64,
}

/// Induced pressure of `φ₀ + ε` at `a`: root of `p ↦ ln λ(φ₀ + ε − p 1_[a])`.
fn induced_shift(base: &Potential, a: usize, epsilon: f64) -> Result<f64> {
    if base.depth() <= 2 {
        return induced_pressure(base, a, epsilon)?.ok_or_else(|| {
            Error::InvalidParameter(format!("loop series diverges at epsilon = {epsilon}"))
        });
    }
    let indicator = Potential::exact(CylinderTable::indicator(base.alphabet(), &[a])?)?;
    let shifted = base.add_constant(epsilon)?;
    let f = |p: f64| -> Result<f64> {
        Ok(rpf_eigendata_default(&shifted.add_scaled(&indicator, -p)?, 0)?.log_lambda)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidParameter("no induced-pressure root below 1e6".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn psi_shift(phi: &Potential, a: usize, epsilon: f64, theta: f64) -> Result<PsiShift> {
    check_theta(theta)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let (base, _) = pressure_normalize(phi, 0)?;
    let p = if epsilon == 0.0 { 0.0 } else { induced_shift(&base, a, epsilon)? };
    check_shift_condition(theta, p)?;
    let indicator = Potential::exact(CylinderTable::indicator(phi.alphabet(), &[a])?)?;
    let psi = base.add_constant(epsilon)?.add_scaled(&indicator, -p)?;
    let psi = Potential::new(psi.table().lift(base.depth())?, base.tail())?;
    let psi_pressure = rpf_eigendata_default(&psi, 0)?.log_lambda;
    Ok(PsiShift {
        psi,
        base,
        state: a,
        epsilon,
        p,
        theta,
        psi_pressure,
    })
}

/// Tries `ε = 0.05, 0.025, …` until the shift condition holds.
pub fn psi_shift_auto(phi: &Potential, a: usize, theta: f64) -> Result<PsiShift> {
    let mut epsilon = 0.05;
    let mut last = None;
    for _ in 0..40 {
        match psi_shift(phi, a, epsilon, theta) {
            Ok(s) => return Ok(s),
            Err(e @ (Error::ShiftCondition { .. } | Error::InvalidParameter(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
        epsilon /= 2.0;
    }
    Err(last.unwrap_or_else(|| Error::InvalidParameter("no admissible epsilon".into())))
}

/// Weights `h_0[b] = sup_{[b]} h_0` and parameters of the weighted norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BNormWeights {
    pub state: usize,
    pub theta: f64,
    pub h0: CylinderFunction,
    pub h0_sup: Vec<f64>,
    /// `exp(Σ_{n≥2} var_n)`, certifying `h_0(x) = c^{±1} h_0[x_0]`.
    pub c: f64,
    /// `max_b sup_{x∈[b]} h_0[b] / h_0(x)`.
    pub c_actual: f64,
    pub lambda: f64,
    pub psi: Potential,
    pub p: f64,
}

impl BNormWeights {
    /// Uniform weights: `h_0 ≡ 1`.
    pub fn unit(alphabet: usize, state: usize, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            state,
            theta,
            h0: CylinderTable::constant(alphabet, 1, 1.0)?,
            h0_sup: vec![1.0; alphabet],
            c: 1.0,
            c_actual: 1.0,
            lambda: 1.0,
            psi: Potential::constant(alphabet, 0.0)?,
            p: 0.0,
        })
    }

    pub fn from_shift(shift: &PsiShift, m: usize) -> Result<Self> {
        let eig = rpf_eigendata_default(&shift.psi, m)?;
        let h0 = eig.h.lift(eig.h.depth().max(1))?;
        let n = h0.alphabet();
        let block = h0.len() / n;
        let mut h0_sup = Vec::with_capacity(n);
        let mut c_actual: f64 = 1.0;
        for b in 0..n {
            let slice = &h0.values()[b * block..(b + 1) * block];
            let hi = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = slice.iter().copied().fold(f64::INFINITY, f64::min);
            h0_sup.push(hi);
            c_actual = c_actual.max(hi / lo);
        }
        Ok(Self {
            state: shift.state,
            theta: shift.theta,
            h0,
            h0_sup,
            c: shift.psi.variation_sum_from(2).exp(),
            c_actual,
            lambda: eig.lambda,
            psi: shift.psi.clone(),
            p: shift.p,
        })
    }
}

/// `sup_b (1/h_0[b]) [sup_{[b]} |f| + sup_{x≠y∈[b]} |f(x)−f(y)| / θ^{s_a(x,y)}]`.
///
/// For a depth-`m` table the separation term is the max over prefixes `u`
/// (length `1..m`) of `osc_{[u]} f / θ^{#a in u}`.
pub fn b_norm(f: &CylinderFunction, weights: &BNormWeights) -> Result<f64> {
    let f = f.lift(f.depth().max(1))?;
    let n = f.alphabet();
    if weights.h0_sup.len() != n {
        return Err(Error::AlphabetMismatch(n, weights.h0_sup.len()));
    }
    let m = f.depth();
    let a = weights.state;
    let block = f.len() / n;
    let mut best: f64 = 0.0;
    for b in 0..n {
        let slice = &f.values()[b * block..(b + 1) * block];
        let sup = slice.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let mut sep: f64 = 0.0;
        for t in 1..m {
            let group = n.pow((m - t) as u32);
            for (g, chunk) in slice.chunks(group).enumerate() {
                let (lo, hi) = chunk
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                if hi > lo {
                    let prefix = crate::shift::decode(n, t, b * n.pow(t as u32 - 1) + g);
                    let marks = prefix.iter().filter(|&&s| s == a).count();
                    sep = sep.max((hi - lo) / weights.theta.powi(marks as i32));
                }
            }
        }
        best = best.max((sup + sep) / weights.h0_sup[b]);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorGapReport {
    pub lower: f64,
    pub upper: f64,
    pub sup_diff: f64,
    pub holder_diff: f64,
    /// `max(φ − ψ)`, the exponent bounding `e^φ ≤ e^{p} e^ψ`.
    pub p_effective: f64,
    pub c: f64,
    pub c_actual: f64,
    pub lambda_psi: f64,
    pub local_holder: f64,
    pub constants: GapConstants,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapConstants {
    pub big_c: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// `sup_{t ≥ 1} osc_t(φ) / θ^{t−1}` over the table.
pub fn local_holder_constant(phi: &Potential, theta: f64) -> f64 {
    (1..phi.depth())
        .map(|t| phi.variation_at_agreement(t) / theta.powi(t as i32 - 1))
        .fold(0.0, f64::max)
}

/// `(e^x − 1)/x`, continuous at 0.
fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

fn transfer_difference(phi: &Potential, tau: &Potential, f: &CylinderFunction) -> Result<CylinderFunction> {
    apply_transfer(phi, f)?.zip_with(&apply_transfer(tau, f)?, |a, b| a - b)
}

pub fn operator_gap_estimate(
    phi: &Potential,
    tau: &Potential,
    weights: &BNormWeights,
    m: usize,
    samples: usize,
    seed: u64,
) -> Result<OperatorGapReport> {
    let n = phi.alphabet();
    let theta = weights.theta;
    let holder = holder_distance(phi, tau, theta)?;
    let d = holder.sup_diff;
    let p_eff = phi.table().zip_with(weights.psi.table(), |a, b| a - b)?.max();
    let ep = p_eff.exp();
    let lambda = weights.lambda;
    let c = weights.c;
    let v = phi.variation_at_agreement(1);
    let c_phi = local_holder_constant(phi, theta) + if phi.tail().is_exact() { 0.0 } else { phi.tail().c };
    let e_ratio = expm1_ratio(d);
    let constants = GapConstants {
        big_c: c * e_ratio * lambda,
        c0: lambda * d.exp(),
        c1: c * lambda * d.exp(),
        c2: e_ratio,
        c3: c * ep * lambda * expm1_ratio(v),
    };
    let upper = if d == 0.0 && holder.d_theta == 0.0 {
        0.0
    } else {
        constants.big_c * d * ep
            + constants.c1 * holder.d_theta * ep
            + constants.c2 * d * (c * ep * lambda + constants.c3 * c_phi)
    };

    let depth = m.max(phi.depth()).max(tau.depth()).max(1);
    let mut tests: Vec<CylinderFunction> = vec![CylinderTable::constant(n, 0, 1.0)?];
    let count = checked_size(n, depth)?;
    for w in 0..count.min(256) {
        let mut v = vec![0.0; count];
        v[w] = 1.0;
        tests.push(CylinderTable::new(n, depth, v)?);
    }
    let random: Vec<CylinderFunction> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            CylinderTable::from_fn(n, depth, |_| rng.gen_range(-1.0..1.0))
        })
        .collect::<Result<_>>()?;
    tests.extend(random);
    let ratios = tests
        .par_iter()
        .map(|f| {
            let norm = b_norm(f, weights)?;
            if norm == 0.0 {
                return Ok(0.0);
            }
            Ok(b_norm(&transfer_difference(phi, tau, f)?, weights)? / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lower = ratios.into_iter().fold(0.0, f64::max);
    Ok(OperatorGapReport {
        lower,
        upper,
        sup_diff: d,
        holder_diff: holder.d_theta,
        p_effective: p_eff,
        c,
        c_actual: weights.c_actual,
        lambda_psi: lambda,
        local_holder: c_phi,
        constants,
        samples: tests.len(),
    })
}

/// `‖(h_φ/h_φ∘σ)(h_τ∘σ/h_τ) − 1‖_∞` from the given eigenfunctions.
pub fn eigen_ratio_from(h_phi: &CylinderTable, h_tau: &CylinderTable) -> Result<f64> {
    let n = h_phi.alphabet();
    let depth = h_phi.depth().max(h_tau.depth()) + 1;
    let rest = checked_size(n, depth - 1)?;
    let a_head = h_phi.lift(depth)?;
    let a_tail = h_phi.lift(depth - 1)?;
    let b_head = h_tau.lift(depth)?;
    let b_tail = h_tau.lift(depth - 1)?;
    Ok((0..a_head.len())
        .map(|w| {
            let x = w % rest;
            (a_head.get(w) / a_tail.get(x) * b_tail.get(x) / b_head.get(w) - 1.0).abs()
        })
        .fold(0.0, f64::max))
}

pub fn eigen_ratio_deviation(phi: &Potential, tau: &Potential, m: usize) -> Result<f64> {
    let a = rpf_eigendata_default(phi, m)?;
    let b = rpf_eigendata_default(tau, m)?;
    eigen_ratio_from(&a.h, &b.h)
}

/// A potential recoded over the pair alphabet `S × S`.
///
/// The recoded system is the Markov shift of chained pairs; table entries on
/// non-chaining words are filled from the second coordinates and are ignored
/// by the variations and the eigenvalue computed here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecoding {
    pub base_alphabet: usize,
    pub potential: Potential,
}

pub fn recode_pairs(phi: &Potential) -> Result<PairRecoding> {
    let n = phi.alphabet();
    let pairs = n.checked_mul(n).ok_or(Error::Capacity {
        requested: u128::MAX,
        limit: crate::shift::capacity_limit(),
    })?;
    let depth = phi.depth().saturating_sub(1).max(1);
    let table = CylinderTable::from_fn(pairs, depth, |w| {
        let mut symbols = vec![w[0] / n];
        symbols.extend(w.iter().map(|p| p % n));
        phi.eval(&symbols).unwrap_or(0.0)
    })?;
    Ok(PairRecoding {
        base_alphabet: n,
        potential: Potential::new(table, phi.tail())?,
    })
}

impl PairRecoding {
    pub fn admissible(&self, word: &[usize]) -> bool {
        let n = self.base_alphabet;
        word.windows(2).all(|w| w[0] % n == w[1] / n)
    }

    /// `var_n` over chaining words only.
    pub fn variation(&self, n: usize) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        let t = n - 1;
        let table = self.potential.table();
        if t >= table.depth() {
            return 0.0;
        }
        let group = table.alphabet().pow((table.depth() - t) as u32);
        let mut best: f64 = 0.0;
        for (g, chunk) in table.values().chunks(group).enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (j, &v) in chunk.iter().enumerate() {
                if self.admissible(&table.word(g * group + j)) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi > lo {
                best = best.max(hi - lo);
            }
        }
        best
    }

    /// `ln` of the Perron root of the transfer operator on chaining pairs.
    pub fn log_lambda(&self) -> Result<f64> {
        let phi = &self.potential;
        let n = self.base_alphabet;
        let q = phi.alphabet();
        let k = phi.depth();
        let states = checked_size(q, k)?;
        let admissible: Vec<bool> = (0..states).map(|w| self.admissible(&phi.table().word(w))).collect();
        let mut h: Vec<f64> = admissible.iter().map(|&ok| if ok { 1.0 } else { 0.0 }).collect();
        let rest = states / q;
        let mut log_lambda = 0.0;
        for _ in 0..DEFAULT_MAX_ITER {
            let mut next = vec![0.0; states];
            for x in 0..states {
                if !admissible[x] {
                    continue;
                }
                let x_word = phi.table().word(x);
                for i in 0..q {
                    if i % n != x_word[0] / n {
                        continue;
                    }
                    let iw = i * states + x;
                    next[x] += phi.table().get(iw / q).exp() * h[iw / q];
                }
            }
            let _ = rest;
            let norm = next.iter().copied().fold(0.0, f64::max);
            let ratio = norm / h.iter().copied().fold(0.0, f64::max);
            let scaled: Vec<f64> = next.iter().map(|v| v / norm).collect();
            let change = scaled.iter().zip(&h).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            h = scaled;
            if change < 1e-15 {
                log_lambda = ratio.ln();
                break;
            }
            log_lambda = ratio.ln();
        }
        Ok(log_lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialGapReport {
    /// `‖log g_φ − log g_τ‖_∞`.
    pub gap: f64,
    /// `‖(φ − ln λ_φ) − (τ − ln λ_τ)‖_∞`.
    pub sup_term: f64,
    /// `‖log[(h_φ/h_φ∘σ)(h_τ∘σ/h_τ)]‖_∞`.
    pub ratio_term: f64,
    pub eigen_ratio: f64,
    pub log_lambda_phi: f64,
    pub log_lambda_tau: f64,
}

pub fn normalized_potential_gap(phi: &Potential, tau: &Potential, m: usize) -> Result<PotentialGapReport> {
    let ep = rpf_eigendata_default(phi, m)?;
    let et = rpf_eigendata_default(tau, m)?;
    let gp = normalize_to_g(phi, &ep)?.g;
    let gt = normalize_to_g(tau, &et)?.g;
    let gap = crate::potential::log_distance(&gp, &gt)?;
    let sup_term = phi
        .table()
        .zip_with(tau.table(), |a, b| (a - ep.log_lambda) - (b - et.log_lambda))?
        .sup_norm();
    let depth = ep.h.depth().max(et.h.depth()) + 1;
    let rest = checked_size(phi.alphabet(), depth - 1)?;
    let (a_head, a_tail) = (ep.h.lift(depth)?, ep.h.lift(depth - 1)?);
    let (b_head, b_tail) = (et.h.lift(depth)?, et.h.lift(depth - 1)?);
    let ratio_term = (0..a_head.len())
        .map(|w| {
            let x = w % rest;
            (a_head.get(w) / a_tail.get(x) * b_tail.get(x) / b_head.get(w)).ln().abs()
        })
        .fold(0.0, f64::max);
    if gap > sup_term + ratio_term + 1e-10 {
        return Err(Error::CheckFailed {
            check: "normalized potential gap within triangle bound",
            detail: format!("gap {gap} > {sup_term} + {ratio_term}"),
        });
    }
    Ok(PotentialGapReport {
        gap,
        sup_term,
        ratio_term,
        eigen_ratio: eigen_ratio_from(&ep.h, &et.h)?,
        log_lambda_phi: ep.log_lambda,
        log_lambda_tau: et.log_lambda,
    })
}

/// `ln λ` of a potential via its eigendata at depth `k − 1`.
pub fn log_lambda(phi: &Potential) -> Result<f64> {
    Ok(rpf_eigendata_default(phi, 0)?.log_lambda)
}

/// Pressure reference used by the potential-side experiments.
pub fn pressure_reference(phi: &Potential) -> Result<f64> {
    if phi.depth() <= 2 {
        pressure::closed_form_pressure(phi)
    } else {
        log_lambda(phi)
    }
}
