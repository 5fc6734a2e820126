//! Acceptance suite: ten criteria, one PASS/FAIL line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use thermo_core::coupling::{coupling_kernel, dbar_upper_bounds, return_time_lower_bound, simulate_pair, z_chain, SeriesClass};
use thermo_core::dbar::{g_blocks, hamming_ot_lower, iid_dbar_exact, BlockDistribution};
use thermo_core::experiment::{run_continuity_potential, ExperimentConfig, ExperimentKind};
use thermo_core::pressure::{gurevich_pressure, spr_classify, Recurrence};
use thermo_core::rpf::rpf_eigendata_default;
use thermo_core::{GFunction, Potential};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

/// Random pairs with `N ≤ 4` and depths `≤ 3`.
fn pair_family(count: usize, seed: u64) -> Vec<(GFunction, GFunction)> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let n = r.gen_range(2..=4);
            let (dg, dh) = (r.gen_range(1..=3), r.gen_range(1..=3));
            let g = random_g(&mut r, n, dg);
            let h = if r.gen_bool(0.5) {
                random_g(&mut r, n, dh)
            } else {
                perturbed_g(&mut r, &g, dh, 0.5)
            };
            (g, h)
        })
        .collect()
}

fn kernel_marginals() -> Outcome {
    let mut worst = 0.0f64;
    let mut formula = 0.0f64;
    for (g, h) in pair_family(1000, 1) {
        let kernel = coupling_kernel(&g, &h).map_err(|e| e.to_string())?;
        let k = g.depth().max(h.depth());
        let (gl, hl) = (g.lift(k).unwrap(), h.lift(k).unwrap());
        let n = g.alphabet();
        let s = gl.fiber_count();
        for x in 0..s {
            for y in 0..s {
                let f: Vec<f64> = (0..n).map(|i| gl.at(i, x).min(hl.at(i, y))).collect();
                let delta = 1.0 - f.iter().sum::<f64>();
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| kernel.prob(i, j, x, y)).sum();
                    let col: f64 = (0..n).map(|j| kernel.prob(j, i, x, y)).sum();
                    worst = worst.max((row - gl.at(i, x)).abs()).max((col - hl.at(i, y)).abs());
                    for j in 0..n {
                        let off = if delta > 0.0 { (gl.at(i, x) - f[i]) * (hl.at(j, y) - f[j]) / delta } else { 0.0 };
                        let expected = if i == j { f[i] } else { off };
                        formula = formula.max((kernel.prob(i, j, x, y) - expected).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-12, format!("marginal error {worst:e}"))?;
    ensure(formula <= 1e-12, format!("kernel deviates from the fiberwise formula by {formula:e}"))?;
    Ok(format!("1000 pairs, max marginal error {worst:.2e}"))
}

fn defect_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (g, h) in pair_family(1000, 1) {
        let k = g.depth().max(h.depth());
        let (gl, hl) = (g.lift(k).unwrap(), h.lift(k).unwrap());
        let d = brute_log_distance(&g, &h);
        let n = g.alphabet();
        let s = gl.fiber_count();
        let v: Vec<f64> = (0..=k).map(|t| brute_variation(&g, t)).collect();
        for x in 0..s {
            let xw = word(n, k - 1, x);
            for y in 0..s {
                let yw = word(n, k - 1, y);
                let agree = xw.iter().zip(&yw).take_while(|(a, b)| a == b).count();
                let delta = 1.0 - (0..n).map(|i| gl.at(i, x).min(hl.at(i, y))).sum::<f64>();
                // [x]^j = [y]^j for every j ≤ agree; V_{j+1} allows agreement j on the fiber word
                for j in 0..=agree {
                    let bound = 1.0 - (-(v[j + 1] + d)).exp();
                    worst = worst.max(delta - bound);
                }
            }
        }
        let excess = coupling_kernel(&g, &h).unwrap().defect_bound_excess().unwrap();
        ensure(excess <= 1e-12, format!("library check reports excess {excess:e}"))?;
    }
    ensure(worst <= 1e-12, format!("defect exceeds bound by {worst:e}"))?;
    Ok(format!("1000 pairs, max excess {worst:.2e}"))
}

fn lipschitz_sandwich() -> Outcome {
    let p = [2.0 / 3.0, 1.0 / 3.0];
    let q = [0.5, 0.5];
    let exact = iid_dbar_exact(&p, &q).map_err(|e| e.to_string())?;
    ensure((exact - 1.0 / 6.0).abs() <= 1e-15, format!("oracle {exact}"))?;
    let (g, h) = (GFunction::memoryless(&p).unwrap(), GFunction::memoryless(&q).unwrap());
    let b = dbar_upper_bounds(&g, &h).map_err(|e| e.to_string())?;
    ensure((b.coupling_value - 1.0 / 6.0).abs() <= 1e-8, format!("coupling {}", b.coupling_value))?;
    ensure((b.lipschitz - 2.0 * 1.5f64.ln()).abs() <= 1e-6, format!("lipschitz {}", b.lipschitz))?;
    ensure(exact <= b.lipschitz, "oracle above Lipschitz bound".into())?;
    let mut r = rng(3);
    let mut checked = 0;
    let mut largest_ratio = 0.0f64;
    while checked < 200 {
        let n = r.gen_range(2..=3);
        let (dg, dh) = (r.gen_range(1..=2), r.gen_range(1..=2));
        let g = random_g(&mut r, n, dg);
        let h = perturbed_g(&mut r, &g, dh, 0.3);
        let d = brute_log_distance(&g, &h);
        if d >= 2f64.ln() {
            continue;
        }
        checked += 1;
        let depth = g.depth().max(h.depth());
        let ns: Vec<usize> = (1..=if n == 2 { 4 } else { 3 }).collect();
        let lower = ns
            .iter()
            .map(|&m| hamming_ot_lower(&g_blocks(&g, m).unwrap(), &g_blocks(&h, m).unwrap(), m).unwrap().cost)
            .fold(0.0, f64::max);
        let b = dbar_upper_bounds(&g, &h).map_err(|e| e.to_string())?;
        let l_g: f64 = (2..=depth).map(|m| brute_variation(&g, m - 1)).sum();
        let lip = 2.0 * l_g.exp() * d;
        ensure(
            lower <= b.coupling_value + 1e-8 && b.coupling_value <= lip,
            format!("pair {checked}: {lower} <= {} <= {lip} fails", b.coupling_value),
        )?;
        largest_ratio = largest_ratio.max(b.coupling_value / lip);
    }
    Ok(format!("1/6 <= {:.6}; 200 random pairs, max upper/Lipschitz {largest_ratio:.3}", b.lipschitz))
}

fn return_time() -> Outcome {
    let g = GFunction::memoryless(&[2.0 / 3.0, 1.0 / 3.0]).unwrap();
    let h = GFunction::memoryless(&[0.5, 0.5]).unwrap();
    let bound = return_time_lower_bound(&g, &h, 64).map_err(|e| e.to_string())?;
    let SeriesClass::ConvergentTo(series) = bound.class else {
        return Err(format!("series class {:?}", bound.class));
    };
    ensure((series - 2.0).abs() <= 1e-12, format!("series {series}"))?;
    let chain = z_chain(&g, &h).map_err(|e| e.to_string())?;
    ensure((chain.expected_return - 6.0).abs() <= 1e-10, format!("E(tau) {}", chain.expected_return))?;
    ensure(series <= chain.expected_return, "bound exceeds E(tau)".into())?;
    let sim = simulate_pair(&g, &h, 100_000, 42, 10, 0).map_err(|e| e.to_string())?;
    let est = sim.mean_return_time.ok_or("too few mismatches")?;
    ensure(
        (est.mean - 6.0).abs() <= 3.0 * est.se,
        format!("Monte Carlo {} ± {}", est.mean, est.se),
    )?;
    Ok(format!("bound {series} <= E(tau) {:.10}; MC {:.4} ± {:.4} (10 x 1e5 steps)", chain.expected_return, est.mean, est.se))
}

/// Stationary law of the pair chain on first-symbol pairs by lazy power
/// iteration (test-side oracle).
fn power_stationary_mismatch(g: &GFunction, h: &GFunction) -> f64 {
    let (g, h) = (g.lift(2).unwrap(), h.lift(2).unwrap());
    let n = g.alphabet();
    let mut pi = vec![1.0 / (n * n) as f64; n * n];
    for _ in 0..200_000 {
        let mut next = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                let m = pi[x * n + y];
                if m == 0.0 {
                    continue;
                }
                let f: Vec<f64> = (0..n).map(|i| g.at(i, x).min(h.at(i, y))).collect();
                let delta = 1.0 - f.iter().sum::<f64>();
                for i in 0..n {
                    for j in 0..n {
                        let p = if i == j {
                            f[i]
                        } else if delta > 0.0 {
                            (g.at(i, x) - f[i]) * (h.at(j, y) - f[j]) / delta
                        } else {
                            0.0
                        };
                        next[i * n + j] += 0.5 * m * p;
                    }
                }
                next[x * n + y] += 0.5 * m;
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < 1e-16 {
            break;
        }
    }
    (0..n * n).filter(|s| s / n != s % n).map(|s| pi[s]).sum()
}

fn kac_identity() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut oracle = 0.0f64;
    for instance in 0..50 {
        let n = r.gen_range(2..=3);
        let depth = if instance < 25 { 1 } else { 2 };
        let g = random_g(&mut r, n, depth);
        let h = random_g(&mut r, n, depth);
        let chain = z_chain(&g, &h).map_err(|e| e.to_string())?;
        worst = worst.max((chain.mismatch_mass - 1.0 / chain.expected_return).abs());
        oracle = oracle.max((chain.mismatch_mass - power_stationary_mismatch(&g, &h)).abs());
    }
    ensure(worst <= 1e-10, format!("Kac defect {worst:e}"))?;
    ensure(oracle <= 1e-10, format!("mismatch mass differs from power iteration by {oracle:e}"))?;
    Ok(format!("50 instances, max |mass - 1/E| {worst:.2e}, oracle gap {oracle:.2e}"))
}

fn rpf_eigendata() -> Outcome {
    let p = [2.0 / 3.0, 1.0 / 3.0];
    let phi = Potential::from_weights(2, 1, &p).unwrap();
    let e = rpf_eigendata_default(&phi, 1).map_err(|e| e.to_string())?;
    ensure((e.lambda - 1.0).abs() <= 1e-14, format!("lambda {}", e.lambda))?;
    ensure(e.h.values().iter().all(|v| (v - 1.0).abs() <= 1e-14), format!("h {:?}", e.h.values()))?;
    let nu = e.nu_at(&phi, 3).unwrap();
    for (idx, &mass) in nu.values().iter().enumerate() {
        let expected: f64 = word(2, 3, idx).iter().map(|&s| p[s]).product();
        ensure((mass - expected).abs() <= 1e-14, format!("nu[{idx}] = {mass}, expected {expected}"))?;
    }
    let golden = Potential::from_matrix(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let e = rpf_eigendata_default(&golden, 1).map_err(|e| e.to_string())?;
    ensure((e.log_lambda - exact).abs() <= 1e-9, format!("ln lambda {}", e.log_lambda))?;
    let est = gurevich_pressure(&golden, 0, 16).map_err(|e| e.to_string())?;
    ensure(
        (est.extrapolated - e.log_lambda).abs() <= 1e-6,
        format!("extrapolated {} vs {}", est.extrapolated, e.log_lambda),
    )?;
    Ok(format!(
        "ln lambda error {:.2e}, extrapolation error {:.2e}",
        (e.log_lambda - exact).abs(),
        (est.extrapolated - e.log_lambda).abs()
    ))
}

fn spr_margins() -> Outcome {
    let cases = [
        (Potential::from_weights(2, 1, &[2.0 / 3.0, 1.0 / 3.0]).unwrap(), 3f64.ln()),
        (Potential::constant(2, 0.0).unwrap(), 2f64.ln()),
        (Potential::constant(3, 0.0).unwrap(), 1.5f64.ln()),
    ];
    let mut margins = Vec::new();
    for (phi, expected) in cases {
        let rep = spr_classify(&phi, 0, 16).map_err(|e| e.to_string())?;
        ensure(rep.classification == Recurrence::Spr, format!("classified {:?}", rep.classification))?;
        ensure(
            (rep.spr_margin - expected).abs() <= 1e-3,
            format!("margin {} vs {expected}", rep.spr_margin),
        )?;
        margins.push(format!("{:.6}", rep.spr_margin));
    }
    Ok(format!("margins {}", margins.join(", ")))
}

fn gap_trend() -> Outcome {
    let schedule: Vec<f64> = (0..=6).map(|i| 0.5 / f64::powi(2.0, i)).collect();
    let mut config = ExperimentConfig::new(ExperimentKind::ContinuityPotential, schedule);
    config.seed = 11;
    let report = run_continuity_potential(&config).map_err(|e| e.to_string())?;
    let gap = report.column(|r| r.potential_gap);
    let d: Vec<f64> = report.rows.iter().map(|r| r.input_distance).collect();
    for (di, si) in d.iter().zip(&config.schedule) {
        ensure((di - si).abs() <= 1e-12, format!("d_theta {di} vs {si}"))?;
    }
    ensure(gap.windows(2).all(|w| w[1] <= w[0] + 1e-9), format!("not monotone: {gap:?}"))?;
    let (first, last) = (gap[0], gap[gap.len() - 1]);
    ensure(last < first / 8.0, format!("final {last} vs first {first}"))?;
    Ok(format!("gap {first:.3e} -> {last:.3e} over 6 halvings"))
}

fn pipeline() -> Outcome {
    let mut config = ExperimentConfig::new(ExperimentKind::ContinuityPotential, vec![0.4, 0.2, 0.1, 0.05, 0.025]);
    config.seed = 11;
    let report = run_continuity_potential(&config).map_err(|e| e.to_string())?;
    let upper = report.column(|r| r.coupling_upper);
    let (first, last) = (upper[0], upper[upper.len() - 1]);
    ensure(first > 0.0, "first upper bound is zero".into())?;
    ensure(last < first / 4.0, format!("final {last} vs first {first}"))?;
    ensure(report.passed(), format!("report checks failed: {:?}", report.failures().collect::<Vec<_>>()))?;
    Ok(format!("d-bar upper {first:.3e} -> {last:.3e} over 16x"))
}

fn blocks_from(p: &[f64], n: usize) -> BlockDistribution {
    g_blocks(&GFunction::memoryless(p).unwrap(), n).unwrap()
}

fn oracle_consistency() -> Outcome {
    let mut r = rng(10);
    let mut tv_err = 0.0f64;
    let mut iid_err = 0.0f64;
    let mut brute_err = 0.0f64;
    for _ in 0..20 {
        let q = r.gen_range(2..=3);
        let (p1, p2) = (random_probability(&mut r, q), random_probability(&mut r, q));
        let tv = 0.5 * p1.iter().zip(&p2).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let ot1 = hamming_ot_lower(&blocks_from(&p1, 1), &blocks_from(&p2, 1), 1).unwrap().cost;
        tv_err = tv_err.max((ot1 - tv).abs());
        let exact = iid_dbar_exact(&p1, &p2).unwrap();
        let top = if q == 2 { 4 } else { 3 };
        let (b1, b2) = (blocks_from(&p1, top), blocks_from(&p2, top));
        for n in 1..=top {
            let v = hamming_ot_lower(&b1, &b2, n).unwrap().cost;
            iid_err = iid_err.max((v - exact).abs());
        }
        let brute_max = if q == 2 { 2 } else { 1 };
        for n in 1..=brute_max {
            let (a, b) = (blocks_from(&p1, n), blocks_from(&p2, n));
            let cost = |i: usize, j: usize| {
                word(q, n, i).iter().zip(word(q, n, j)).filter(|(x, y)| **x != *y).count() as f64 / n as f64
            };
            let brute = brute_force_transport(&a.probs, &b.probs, &cost);
            let lp = hamming_ot_lower(&a, &b, n).unwrap().cost;
            brute_err = brute_err.max((brute - lp).abs());
        }
    }
    // Four-symbol check at n = 4 as well.
    let (p1, p2) = (vec![0.1, 0.2, 0.3, 0.4], vec![0.25; 4]);
    let (b1, b2) = (blocks_from(&p1, 4), blocks_from(&p2, 4));
    let exact = iid_dbar_exact(&p1, &p2).unwrap();
    for n in 1..=4 {
        iid_err = iid_err.max((hamming_ot_lower(&b1, &b2, n).unwrap().cost - exact).abs());
    }
    ensure(tv_err <= 4.0 * f64::EPSILON, format!("n = 1 differs from TV by {tv_err:e}"))?;
    ensure(iid_err <= 1e-10, format!("i.i.d. error {iid_err:e}"))?;
    ensure(brute_err <= 1e-10, format!("vertex enumeration differs by {brute_err:e}"))?;
    Ok(format!("TV err {tv_err:.1e}, i.i.d. err {iid_err:.1e}, vertex err {brute_err:.1e}"))
}

fn main() {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("coupling kernel marginals", 10, kernel_marginals),
        ("mismatch defect bound", 10, defect_bound),
        ("Lipschitz sandwich", 60, lipschitz_sandwich),
        ("return-time bound and Monte Carlo", 30, return_time),
        ("Kac identity", 30, kac_identity),
        ("RPF eigendata", 5, rpf_eigendata),
        ("SPR margins", 5, spr_margins),
        ("normalized potential gap trend", 30, gap_trend),
        ("RPF measure d-bar pipeline", 60, pipeline),
        ("transport oracle self-consistency", 60, oracle_consistency),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > Duration::from_secs(*limit) => Err(format!("{msg}; exceeded {limit} s")),
            other => other,
        };
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        if outcome.is_err() {
            failures += 1;
        }
        println!("criterion {:>2} {tag}: {name} ({:.2} s) {msg}", i + 1, elapsed.as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
