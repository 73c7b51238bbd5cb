//! The verification battery. Every check returns `StatReport`s: residual
//! checks report the residual against its tolerance, statistical checks the
//! KS distance against its critical value.

use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{
    count_paths, endpoint_law_float, oracle_counts_dp, phi, scaled_survival, survival_probability,
    survival_probability_pfaffian, LatticeConfig,
};
use crate::densities::{
    de_bruijn_check, g_density, imhof_check, p_density, survival, survival_asymptotics, ChamberPoint, DeBruijnKernel,
    ModelSpec, Start,
};
use crate::error::{Error, Result};
use crate::harness::marginal::{marginal_tables, MarginalTable};
use crate::harness::stats::{bonferroni, ks_statistic, ks_test, ks_two_sample, sorted, StatReport, DEFAULT_ALPHA};
use crate::montecarlo::{
    endpoint_values, noncollision_mc, simulate_sde, simulate_walkers, Functional, SimConfig, SimModel, SimStart,
};
use crate::quadrature::ChamberQuadrature;
use crate::rmt::{draw_rng, eigen_density, pm_bridge_check, sample_ensemble, Ensemble};
use crate::special::{mehta_integral, mehta_integral_quadrature, psi, MehtaWeight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Combinatorics,
    Montecarlo,
    Rmt,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Suite::Identities),
            "combinatorics" => Ok(Suite::Combinatorics),
            "montecarlo" => Ok(Suite::Montecarlo),
            "rmt" => Ok(Suite::Rmt),
            "all" => Ok(Suite::All),
            other => Err(Error::UnknownSuite(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Budget {
    /// Draws per statistical check.
    pub samples: usize,
    pub seed: u64,
    /// Checks not started before this many seconds are skipped and the
    /// report is flagged incomplete.
    pub max_seconds: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { samples: 10_000, seed: 20_240_601, max_seconds: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub complete: bool,
    pub skipped: Vec<String>,
    /// Sorted by test name.
    pub reports: Vec<StatReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.complete && self.reports.iter().all(|r| r.passed())
    }
}

type Check = (&'static str, Box<dyn Fn(&Budget) -> Result<Vec<StatReport>> + Send + Sync>);

fn checks_for(suite: Suite) -> Vec<Check> {
    let mut v: Vec<Check> = Vec::new();
    let comb = matches!(suite, Suite::Combinatorics | Suite::All);
    let iden = matches!(suite, Suite::Identities | Suite::All);
    let mc = matches!(suite, Suite::Montecarlo | Suite::All);
    let rmt = matches!(suite, Suite::Rmt | Suite::All);
    if comb {
        v.push(("counts", Box::new(|_| Ok(vec![check_count_equivalence(3, 8, 4)?]))));
        v.push(("survival_exact", Box::new(|_| Ok(vec![check_pfaffian_survival_exact(3, 10)?]))));
        v.push(("survival_scaling", Box::new(|_| check_scaled_survival_trend())));
    }
    if iden {
        v.push(("survival_two", Box::new(|_| Ok(vec![check_two_walker_survival()?]))));
        v.push(("normalization", Box::new(|_| check_normalization_two_walkers())));
        v.push((
            "imhof",
            Box::new(|b| Ok(vec![check_imhof(false, 100, b.seed)?, check_imhof(true, 100, b.seed)?])),
        ));
        v.push(("de_bruijn", Box::new(|_| check_de_bruijn())));
        v.push(("asymptotics", Box::new(|_| check_asymptotics())));
        v.push(("rmt_identities", Box::new(|b| Ok(vec![check_rmt_identities(20, b.seed)?]))));
        v.push(("mehta", Box::new(|_| check_mehta())));
    }
    if mc {
        v.push(("survival_mc", Box::new(|b| check_survival_mc(b.samples, 1e-3, b.seed))));
        v.push(("dyson_sde", Box::new(|b| check_dyson_sde(2, b.samples, 1e-3, b.seed))));
        v.push(("bessel_sde", Box::new(|b| Ok(vec![check_bessel_sde(b.samples, 1e-3, b.seed)?]))));
        v.push(("walkers", Box::new(|b| check_walker_endpoints(&[16, 32], b.samples, b.seed))));
    }
    if rmt {
        v.push(("spectra", Box::new(|b| check_sampled_spectra(&[2, 3], b.samples, b.seed))));
        v.push((
            "pm_bridge",
            Box::new(|b| {
                let mut out = Vec::new();
                for t in [0.25, 0.5, 0.75] {
                    out.extend(pm_bridge_check(2, 1.0, t, b.samples, b.seed)?);
                }
                Ok(out)
            }),
        ));
        v.push(("pm_trend", Box::new(|b| check_pm_trend(b.samples, b.seed))));
    }
    v
}

/// Runs a suite. Checks run one after another (each is parallel inside);
/// the reports are sorted by name.
pub fn verify_suite(suite: Suite, budget: &Budget) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (name, check) in checks_for(suite) {
        if budget.max_seconds.is_some_and(|m| start.elapsed().as_secs_f64() > m) {
            skipped.push(name.to_string());
            continue;
        }
        reports.extend(check(budget)?);
    }
    reports.sort_by(|a, b| a.test_name.cmp(&b.test_name));
    Ok(SuiteReport { suite, complete: skipped.is_empty(), skipped, reports })
}

// ---------------------------------------------------------------------------
// Combinatorics

/// Start configurations with N walkers, first position in `firsts` and
/// every gap in {2, 4, .., max_gap}.
pub fn start_configurations(n: usize, firsts: &[i64], max_gap: i64, wall: bool) -> Vec<LatticeConfig> {
    let gaps: Vec<i64> = (1..=max_gap / 2).map(|g| 2 * g).collect();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<i64>> = firsts.iter().map(|&f| vec![f]).collect();
    while let Some(p) = stack.pop() {
        if p.len() == n {
            if let Ok(c) = LatticeConfig::new(p, wall) {
                out.push(c);
            }
            continue;
        }
        for g in &gaps {
            let mut q = p.clone();
            q.push(p[p.len() - 1] + g);
            stack.push(q);
        }
    }
    out.sort_by(|a, b| a.positions().cmp(b.positions()));
    out
}

/// Determinant counts against the dynamic-programming oracle for every
/// reachable endpoint, over `N <= max_n`, `m <= max_m`, gaps `<= max_gap`,
/// with and without the wall. Also checks that the totals agree, which
/// rules out nonzero determinants at endpoints the oracle never reaches.
pub fn check_count_equivalence(max_n: usize, max_m: i64, max_gap: i64) -> Result<StatReport> {
    let mut cases = Vec::new();
    for n in 1..=max_n {
        for wall in [false, true] {
            for u in start_configurations(n, &[0, 2], max_gap, wall) {
                for m in 0..=max_m {
                    cases.push((m, u.clone()));
                }
            }
        }
    }
    let results: Vec<Result<(u64, u64)>> = cases
        .par_iter()
        .map(|(m, u)| {
            let oracle = oracle_counts_dp(*m, u)?;
            let mut bad = 0u64;
            let mut checked = 0u64;
            let mut total = num_bigint::BigInt::from(0);
            for (v, c) in &oracle {
                let det = count_paths(*m, u, v)?.value;
                checked += 1;
                if &det != c {
                    bad += 1;
                }
                total += c;
            }
            let surv = survival_probability(*m, u)?;
            let expected = num_rational::BigRational::new(total, num_bigint::BigInt::from(1) << (*m as usize * u.len()));
            if surv.exact != expected {
                bad += 1;
            }
            Ok((bad, checked))
        })
        .collect();
    let mut bad = 0;
    let mut checked = 0;
    for r in results {
        let (b, c) = r?;
        bad += b;
        checked += c;
    }
    Ok(StatReport::new("combinatorics/det_vs_dp", bad as f64, 0.0, checked)
        .with("cases", cases.len())
        .with("max_n", max_n)
        .with("max_m", max_m)
        .with("max_gap", max_gap))
}

/// Pfaffian survival probabilities against enumeration of endpoints, exact
/// rational equality.
pub fn check_pfaffian_survival_exact(max_n: usize, max_m: i64) -> Result<StatReport> {
    let mut cases = Vec::new();
    for n in 1..=max_n {
        for wall in [false, true] {
            for u in start_configurations(n, &[0, 4], 4, wall) {
                for m in 0..=max_m {
                    cases.push((m, u.clone()));
                }
            }
        }
    }
    let bad: u64 = cases
        .par_iter()
        .map(|(m, u)| -> Result<u64> {
            Ok((survival_probability(*m, u)?.exact != survival_probability_pfaffian(*m, u)?.exact) as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(StatReport::new("combinatorics/pfaffian_vs_enumeration", bad as f64, 0.0, cases.len() as u64))
}

/// Scaled lattice survival over its Brownian asymptote at L = 8, 16, 32:
/// the error `|1 - ratio|` must shrink with L.
pub fn check_scaled_survival_trend() -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    for (p, wall) in [(vec![0i64, 2], false), (vec![0, 2, 4], false), (vec![0, 2], true)] {
        let u = LatticeConfig::new(p.clone(), wall)?;
        let errs: Vec<f64> = [8u32, 16, 32]
            .iter()
            .map(|&l| scaled_survival(l, 1.0, &u).map(|s| (s.ratio - 1.0).abs()))
            .collect::<Result<_>>()?;
        let violations = errs.windows(2).filter(|w| w[1] >= w[0]).count();
        out.push(
            StatReport::new(format!("combinatorics/scaled_survival/{p:?}/wall={wall}"), violations as f64, 0.0, 3)
                .with("errors", &errs),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Identities

/// Two-walker survival against `Psi((x2 - x1)/(2 sqrt t))`, relative
/// difference in units of machine epsilon.
pub fn check_two_walker_survival() -> Result<StatReport> {
    let mut worst = 0.0f64;
    let mut count = 0u64;
    for t in [0.01, 0.3, 1.0, 7.5] {
        for d in [1e-3, 0.2, 1.0, 3.0, 9.0] {
            for x1 in [-2.0, 0.0, 1.5] {
                let x = ChamberPoint::new(vec![x1, x1 + d], false)?;
                let v = survival(t, &x)?;
                let want = psi((x.coords()[1] - x.coords()[0]) / (2.0 * f64::sqrt(t)));
                worst = worst.max((v - want).abs() / want);
                count += 1;
            }
        }
    }
    Ok(StatReport::new("identities/survival_two_walkers", worst, 4.0 * f64::EPSILON, count))
}

fn chamber_mass(spec: &ModelSpec, t: f64) -> Result<f64> {
    let wall = spec.wall;
    let scale = t.sqrt().max(1.0);
    let q = if wall {
        ChamberQuadrature { lo: 0.0, hi: 9.0 * scale, panel_width: 0.5 * scale }
    } else {
        ChamberQuadrature { lo: -8.0 * scale, hi: 8.0 * scale, panel_width: 0.5 * scale }
    };
    let mut err = None;
    let v = q.integrate(spec.n, &mut |y: &[f64]| {
        if y.windows(2).any(|w| w[1] <= w[0]) || (wall && y[0] <= 0.0) {
            return 0.0;
        }
        let pt = match ChamberPoint::new(y.to_vec(), wall) {
            Ok(p) => p,
            Err(_) => return 0.0,
        };
        match g_density(spec, 0.0, &Start::Origin, t, &pt) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Total mass of the origin-started densities of all four families for two
/// walkers, by quadrature on the chamber.
pub fn check_normalization_two_walkers() -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    for wall in [false, true] {
        let g = ModelSpec::finite(2, 1.0, wall)?;
        let p = ModelSpec::infinite(2, wall)?;
        for (spec, t, family) in [(g, 0.6, "g"), (g, 1.0, "g"), (p, 0.7, "p")] {
            let mass = chamber_mass(&spec, t)?;
            out.push(
                StatReport::new(format!("identities/normalization/{family}/wall={wall}/t={t}"), (mass - 1.0).abs(), 1e-6, 1)
                    .with("mass", mass),
            );
        }
    }
    Ok(out)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Randomized quasi-Monte Carlo estimate of the chamber mass of an
/// origin-started density. Importance proposal: ordered independent
/// Gaussians (half-Gaussians with the wall) of variance 1.25 times the mean
/// square coordinate of the infinite-horizon law, `N t` or `(2N + 1) t`,
/// driven by a Halton point set under `shifts` independent random shifts
/// modulo 1. Each shift gives an unbiased replicate; returns the mean and
/// the standard error across replicates.
pub fn normalization_mc(spec: &ModelSpec, t: f64, points: usize, shifts: usize, seed: u64) -> Result<(f64, f64)> {
    const BASES: [u64; 3] = [2, 3, 5];
    let n = spec.n;
    let wall = spec.wall;
    if n > BASES.len() || shifts < 2 || points == 0 {
        return Err(Error::InvalidConfig(format!("need N <= 3, shifts >= 2, points > 0; got {n}, {shifts}, {points}")));
    }
    let var = 1.25 * t * if wall { 2.0 * n as f64 + 1.0 } else { n as f64 };
    let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    let ln_q_unit = -0.5 * n as f64 * (2.0 * std::f64::consts::PI * var).ln() + nfact.ln()
        + if wall { n as f64 * 2f64.ln() } else { 0.0 };
    let mut reps = Vec::with_capacity(shifts);
    for s in 0..shifts as u64 {
        let mut rng = draw_rng(seed, s);
        let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let sum = (1..=points as u64)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let mut y: Vec<f64> = (0..n)
                    .map(|d| {
                        let u = (radical_inverse(i, BASES[d]) + shift[d]).fract();
                        normal.inverse_cdf(if wall { 0.5 + 0.5 * u } else { u })
                    })
                    .collect();
                y.sort_by(f64::total_cmp);
                if y.iter().any(|v| !v.is_finite()) || y.windows(2).any(|w| w[1] <= w[0]) || (wall && y[0] <= 0.0) {
                    return Ok(0.0);
                }
                let sq: f64 = y.iter().map(|v| v * v).sum();
                let ln_q = ln_q_unit - sq / (2.0 * var);
                let d = g_density(spec, 0.0, &Start::Origin, t, &ChamberPoint::new(y, wall)?)?;
                Ok(d / ln_q.exp())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a + b))?;
        reps.push(sum / points as f64);
    }
    let mean = reps.iter().sum::<f64>() / shifts as f64;
    let var_r = reps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (shifts as f64 - 1.0);
    Ok((mean, (var_r / shifts as f64).sqrt()))
}

fn random_chamber_point<R: Rng>(rng: &mut R, n: usize, wall: bool, spread: f64) -> Result<ChamberPoint> {
    loop {
        let mut y: Vec<f64> = (0..n)
            .map(|_| if wall { rng.gen_range(0.05..spread) } else { rng.gen_range(-spread..spread) })
            .collect();
        y.sort_by(f64::total_cmp);
        if y.windows(2).all(|w| w[1] - w[0] > 0.05) {
            return ChamberPoint::new(y, wall);
        }
    }
}

/// Product relation between the finite- and infinite-horizon families on
/// random instances (`N, l <= 3`). Statistic: largest relative residual.
pub fn check_imhof(wall: bool, instances: usize, seed: u64) -> Result<StatReport> {
    let mut rng = draw_rng(seed, 0x1a40f);
    let mut worst = 0.0f64;
    for k in 0..instances {
        let n = 1 + k % 3;
        let l = 1 + (k / 3) % 3;
        let big_t = rng.gen_range(0.5..3.0);
        let mut cuts: Vec<f64> = (0..l - 1).map(|_| rng.gen_range(0.05..0.95) * big_t).collect();
        cuts.sort_by(f64::total_cmp);
        let mut times = vec![0.0];
        times.extend(cuts);
        times.push(big_t);
        if times.windows(2).any(|w| w[1] - w[0] < 1e-3 * big_t) {
            continue;
        }
        let points: Vec<ChamberPoint> =
            (0..l).map(|_| random_chamber_point(&mut rng, n, wall, 2.0)).collect::<Result<_>>()?;
        let spec = ModelSpec::finite(n, big_t, wall)?;
        worst = worst.max(imhof_check(&spec, &times, &points)?);
    }
    Ok(StatReport::new(format!("identities/imhof/wall={wall}"), worst, 1e-8, instances as u64).with("seed", seed))
}

/// De Bruijn chamber integrals against their Pfaffians.
pub fn check_de_bruijn() -> Result<Vec<StatReport>> {
    let cases = [
        (2, DeBruijnKernel::Gaussian, vec![-0.4, 0.9], false, 1e-6),
        (2, DeBruijnKernel::WallGaussian, vec![0.3, 1.1], true, 1e-6),
        (3, DeBruijnKernel::Gaussian, vec![-0.7, 0.2, 1.0], false, 1e-4),
    ];
    cases
        .into_iter()
        .map(|(n, k, x, wall, tol)| {
            let r = de_bruijn_check(n, k, &ChamberPoint::new(x, wall)?)?;
            Ok(StatReport::new(format!("identities/de_bruijn/{k:?}/n={n}"), r.residual, tol, 1)
                .with("integral", r.integral)
                .with("pfaffian", r.pfaffian))
        })
        .collect()
}

fn unit_shape(n: usize, wall: bool) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|i| if wall { (i + 1) as f64 } else { i as f64 - (n as f64 - 1.0) / 2.0 }).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Survival over its small-argument asymptote at `|x|/sqrt t` = 0.2, 0.1,
/// 0.05: error below 0.05 at the smallest radius and shrinking along the
/// sweep.
pub fn check_asymptotics() -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    let t: f64 = 1.3;
    for (n, wall) in [(2, false), (3, false), (1, true), (2, true), (3, true)] {
        let shape = unit_shape(n, wall);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|r| {
                let x: Vec<f64> = shape.iter().map(|s| s * r * t.sqrt()).collect();
                survival_asymptotics(t, &ChamberPoint::new(x, wall)?).map(|a| (a.ratio - 1.0).abs())
            })
            .collect::<Result<_>>()?;
        out.push(StatReport::new(format!("identities/asymptotics/n={n}/wall={wall}/ratio"), errs[2], 0.05, 1));
        let violations = errs.windows(2).filter(|w| w[1] >= w[0]).count();
        out.push(
            StatReport::new(format!("identities/asymptotics/n={n}/wall={wall}/trend"), violations as f64, 0.0, 3)
                .with("errors", &errs),
        );
    }
    Ok(out)
}

/// Origin-started densities at the horizon against `N! g_GOE`, and the
/// infinite-horizon family against `N! g_GUE`, at random points.
pub fn check_rmt_identities(per_n: usize, seed: u64) -> Result<StatReport> {
    let mut rng = draw_rng(seed, 0x6e7);
    let mut worst = 0.0f64;
    let mut count = 0u64;
    for n in 1..=3 {
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        for _ in 0..per_n {
            let y = random_chamber_point(&mut rng, n, false, 2.0)?;
            let big_t = rng.gen_range(0.5..2.0);
            let g = g_density(&ModelSpec::finite(n, big_t, false)?, 0.0, &Start::Origin, big_t, &y)?;
            let goe = fact * eigen_density(Ensemble::Goe, &y, big_t)?;
            let p = p_density(&ModelSpec::infinite(n, false)?, 0.0, &Start::Origin, big_t, &y)?;
            let gue = fact * eigen_density(Ensemble::Gue, &y, big_t)?;
            worst = worst.max((g - goe).abs() / g).max((p - gue).abs() / p);
            count += 2;
        }
    }
    Ok(StatReport::new("identities/rmt_pointwise", worst, 1e-10, count).with("seed", seed))
}

/// Closed-form Mehta integrals against quadrature, `gamma = 1/2`.
pub fn check_mehta() -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    for weight in [MehtaWeight::Plain, MehtaWeight::SquaredDiffAbs] {
        for n in 1..=3 {
            for a in [0.5, 1.5] {
                let cf = mehta_integral(n, 0.5, a, weight)?;
                let q = mehta_integral_quadrature(n, 0.5, a, weight)?;
                out.push(
                    StatReport::new(format!("identities/mehta/{weight:?}/n={n}/a={a}"), (cf - q).abs() / cf, 1e-6, 1)
                        .with("closed_form", cf)
                        .with("quadrature", q),
                );
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Pfaffian survival against discretized Brownian non-collision for three
/// walkers and for two and three walkers with the wall. Statistic:
/// `|estimate - exact|`; critical value: three standard errors plus the
/// discretization allowance.
pub fn check_survival_mc(samples: usize, step: f64, seed: u64) -> Result<Vec<StatReport>> {
    let cases = [
        (vec![0.0, 0.8, 1.7], false),
        (vec![0.5, 1.3], true),
        (vec![0.6, 1.4, 2.3], true),
    ];
    cases
        .into_iter()
        .map(|(x, wall)| {
            let n = x.len();
            let e = noncollision_mc(1.0, &ChamberPoint::new(x, wall)?, samples, step, seed)?;
            Ok(StatReport::new(
                format!("montecarlo/noncollision/n={n}/wall={wall}"),
                (e.estimate - e.exact).abs(),
                3.0 * e.std_error + e.bias_allowance,
                samples as u64,
            )
            .with("estimate", e.estimate)
            .with("exact", e.exact)
            .with("std_error", e.std_error)
            .with("bias_allowance", e.bias_allowance)
            .with("step", e.step)
            .with("seed", seed))
        })
        .collect()
}


/// Dyson-type SDE from the origin to t = 1 against the marginals of the
/// infinite-horizon density; also asserts that every recorded state is
/// strictly ordered.
pub fn check_dyson_sde(n: usize, samples: usize, step: f64, seed: u64) -> Result<Vec<StatReport>> {
    let spec = ModelSpec::infinite(n, false)?;
    let mut cfg = SimConfig::new(SimModel::SdeP, spec, SimStart::Origin);
    cfg.t_end = Some(1.0);
    cfg.samples = samples;
    cfg.step = step;
    cfg.seed = seed;
    cfg.grid = 10;
    cfg.stream_count = rayon::current_num_threads();
    let ens = simulate_sde(&cfg)?;
    let ordered = ens.paths.iter().flatten().all(|x| x.windows(2).all(|w| w[1] > w[0]));
    let f = |y: &[f64]| {
        if y.windows(2).any(|w| w[1] <= w[0]) {
            return 0.0;
        }
        ChamberPoint::new(y.to_vec(), false)
            .and_then(|p| p_density(&spec, 0.0, &Start::Origin, 1.0, &p))
            .unwrap_or(0.0)
    };
    let tables = marginal_tables(&f, n, -7.0, 7.0, 1.0)?;
    let level = bonferroni(DEFAULT_ALPHA, n);
    let mut out = vec![StatReport::new(format!("montecarlo/dyson/n={n}/ordering"), if ordered { 0.0 } else { 1.0 }, 0.0, samples as u64)];
    for (c, m) in tables.iter().enumerate() {
        let v = sorted(endpoint_values(&ens, Functional::Coordinate(c))?);
        out.push(
            ks_test(&format!("montecarlo/dyson/n={n}/coord{}", c + 1), &v, |x| m.cdf(x), level)?
                .with("step", step)
                .with("seed", seed)
                .with("normalization_drift", m.normalization_drift),
        );
    }
    Ok(out)
}

/// One walker with the wall from the origin: the endpoint at t = 1 against
/// the three-dimensional Bessel law.
pub fn check_bessel_sde(samples: usize, step: f64, seed: u64) -> Result<StatReport> {
    let spec = ModelSpec::infinite(1, true)?;
    let mut cfg = SimConfig::new(SimModel::SdeP, spec, SimStart::Origin);
    cfg.t_end = Some(1.0);
    cfg.samples = samples;
    cfg.step = step;
    cfg.seed = seed;
    cfg.grid = 1;
    cfg.stream_count = rayon::current_num_threads();
    let ens = simulate_sde(&cfg)?;
    let v = sorted(endpoint_values(&ens, Functional::Coordinate(0))?);
    let cdf = |y: f64| libm::erf(y / 2f64.sqrt()) - (2.0 / std::f64::consts::PI).sqrt() * y * (-y * y / 2.0).exp();
    Ok(ks_test("montecarlo/bessel3", &v, cdf, DEFAULT_ALPHA)?.with("step", step).with("seed", seed))
}

/// Functionals compared for the lattice walkers.
const WALKER_FUNCTIONALS: [Functional; 3] = [Functional::Coordinate(0), Functional::Coordinate(1), Functional::Gap(0)];

fn functional_value(f: Functional, v: &[i64]) -> i64 {
    match f {
        Functional::Coordinate(k) => v[k],
        Functional::Gap(k) => v[k + 1] - v[k],
        Functional::Max => v[v.len() - 1],
    }
}

/// KS distance between a lattice law on the even integers, scaled by `1/L`
/// and smoothed by a uniform jitter of half-width `1/L`, and a continuous
/// CDF. The smoothed CDF is linear between the cell edges, so it is
/// checked at the edges and at interior points of each cell.
pub fn jittered_lattice_ks(atoms: &[(i64, f64)], scale: u32, cdf: impl Fn(f64) -> f64) -> f64 {
    let l = scale as f64;
    let mut atoms = atoms.to_vec();
    atoms.sort_by_key(|a| a.0);
    let mut d = 0.0f64;
    let mut acc = 0.0;
    for (v, p) in atoms {
        let a = (v - 1) as f64 / l;
        for k in 0..=8 {
            let s = k as f64 / 8.0;
            let x = a + s * 2.0 / l;
            d = d.max((acc + s * p - cdf(x)).abs());
        }
        acc += p;
    }
    d
}

/// CDF at the horizon of the gap of two walkers conditioned to stay ordered
/// until T, started with gap `g0`: the gap is `sqrt 2` times a Brownian
/// motion killed at zero, normalized by its survival probability.
pub fn conditioned_gap_cdf(d: f64, g0: f64, big_t: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if g0 <= 0.0 {
        return 1.0 - (-d * d / (4.0 * big_t)).exp();
    }
    let s = (4.0 * big_t).sqrt();
    let e = |x: f64| libm::erf(x / s);
    // Phi(a) - Phi(b) = (erf(a/sqrt2) - erf(b/sqrt2))/2 with a, b in units of sqrt(2T)
    0.5 * (e(d - g0) + e(g0) - e(d + g0) + e(g0)) / e(g0)
}

/// Two walkers started at (0, 2) on the lattice, horizon T = 1: the
/// endpoint law after `phi(L^2)` steps, scaled by `1/L`, against the
/// finite-horizon law started at the scaled start `(0, 2/L)`. Lattice
/// values are smoothed by a uniform jitter of one cell.
///
/// Reports, per functional, the distance of the exact lattice law at each
/// scale (must decrease in L) and a KS test of `samples` accepted walkers
/// at the largest scale.
pub fn check_walker_endpoints(scales: &[u32], samples: usize, seed: u64) -> Result<Vec<StatReport>> {
    let big_t = 1.0;
    let u = LatticeConfig::new(vec![0, 2], false)?;
    let spec = ModelSpec::finite(2, big_t, false)?;
    let targets = |l: u32| -> Result<Vec<MarginalTable>> {
        let x = ChamberPoint::new(u.positions().iter().map(|&p| p as f64 / l as f64).collect(), false)?;
        let start = Start::At(x);
        let f = |y: &[f64]| {
            if y[1] <= y[0] {
                return 0.0;
            }
            ChamberPoint::new(y.to_vec(), false)
                .and_then(|p| g_density(&spec, 0.0, &start, big_t, &p))
                .unwrap_or(0.0)
        };
        marginal_tables(&f, 2, -7.0, 7.0, 1.0)
    };
    let target = |tables: &[MarginalTable], l: u32, k: usize, x: f64| {
        if k < 2 {
            tables[k].cdf(x)
        } else {
            conditioned_gap_cdf(x, 2.0 / l as f64, big_t)
        }
    };

    let mut exact: Vec<Vec<f64>> = vec![Vec::new(); WALKER_FUNCTIONALS.len()];
    for &l in scales {
        let tables = targets(l)?;
        let m = phi((l * l) as f64 * big_t);
        let law = endpoint_law_float(m, &u)?;
        for (k, &func) in WALKER_FUNCTIONALS.iter().enumerate() {
            let mut acc: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
            for (v, p) in &law {
                *acc.entry(functional_value(func, v)).or_insert(0.0) += p;
            }
            let atoms: Vec<(i64, f64)> = acc.into_iter().collect();
            exact[k].push(jittered_lattice_ks(&atoms, l, |x| target(&tables, l, k, x)));
        }
    }
    let mut out = Vec::new();
    let names = ["coord1", "coord2", "gap"];
    for (k, d) in exact.iter().enumerate() {
        let violations = d.windows(2).filter(|w| w[1] >= w[0]).count();
        out.push(
            StatReport::new(format!("montecarlo/walkers/{}/exact_trend", names[k]), violations as f64, 0.0, scales.len() as u64)
                .with("scales", scales)
                .with("distances", d),
        );
    }

    let l = *scales.iter().max().ok_or(Error::Empty)?;
    let mut cfg = SimConfig::new(SimModel::Walker, spec, SimStart::Lattice(u.clone()));
    cfg.scale = l;
    cfg.samples = samples;
    cfg.seed = seed;
    cfg.grid = 1;
    cfg.stream_count = rayon::current_num_threads();
    let ens = simulate_walkers(&cfg)?;
    let tables = targets(l)?;
    let level = bonferroni(DEFAULT_ALPHA, WALKER_FUNCTIONALS.len());
    for (k, &func) in WALKER_FUNCTIONALS.iter().enumerate() {
        let raw = endpoint_values(&ens, func)?;
        let jittered: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut rng = draw_rng(seed ^ 0x5eed_0f11_77e4, (i * WALKER_FUNCTIONALS.len() + k) as u64);
                x + rng.gen_range(-1.0..1.0) / l as f64
            })
            .collect();
        let v = sorted(jittered);
        let raw_distance = ks_statistic(&v, |x| target(&tables, l, k, x))?;
        out.push(
            ks_test(&format!("montecarlo/walkers/{}/sampled_L={l}", names[k]), &v, |x| target(&tables, l, k, x), level)?
                .with("scale", l)
                .with("acceptance", ens.acceptance())
                .with("proposed", ens.proposed)
                .with("distance", raw_distance)
                .with("seed", seed),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random matrices

/// Sampled GOE and GUE spectra (variance 1) against the marginals of the
/// closed-form densities, per coordinate.
pub fn check_sampled_spectra(ns: &[usize], samples: usize, seed: u64) -> Result<Vec<StatReport>> {
    let mut out = Vec::new();
    for &n in ns {
        for e in [Ensemble::Goe, Ensemble::Gue] {
            let s = sample_ensemble(e, n, 1.0, samples, seed)?;
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let f = move |y: &[f64]| {
                if y.windows(2).any(|w| w[1] <= w[0]) {
                    return 0.0;
                }
                ChamberPoint::new(y.to_vec(), false).and_then(|p| eigen_density(e, &p, 1.0)).map(|v| fact * v).unwrap_or(0.0)
            };
            let tables = marginal_tables(&f, n, -8.0, 8.0, 1.0)?;
            let level = bonferroni(DEFAULT_ALPHA, n);
            for (c, m) in tables.iter().enumerate() {
                let name = format!("rmt/{}/n={n}/coord{}", if e == Ensemble::Goe { "goe" } else { "gue" }, c + 1);
                out.push(ks_test(&name, &sorted(s.coordinate(c)), |x| m.cdf(x), level)?.with("seed", seed));
            }
        }
    }
    Ok(out)
}

/// Interpolating ensemble at alpha = 0, 0.25, .., 1 (two levels): two-sample KS
/// distances of the level spacing to GOE(1) must grow with alpha and those
/// to GUE(1/2) must shrink. The endpoints are also tested for equality in
/// law with GOE(1) and GUE(1/2).
pub fn check_pm_trend(samples: usize, seed: u64) -> Result<Vec<StatReport>> {
    let gap = |rows: &[Vec<f64>]| sorted(rows.iter().map(|r| r[1] - r[0]).collect());
    let goe = gap(&sample_ensemble(Ensemble::Goe, 2, 1.0, samples, seed ^ 1)?.eigenvalues);
    let gue = gap(&sample_ensemble(Ensemble::Gue, 2, 0.5, samples, seed ^ 2)?.eigenvalues);
    let mut to_goe = Vec::new();
    let mut to_gue = Vec::new();
    let mut out = Vec::new();
    let level = bonferroni(DEFAULT_ALPHA, 2);
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let pm = gap(&sample_ensemble(Ensemble::PandeyMehta { alpha }, 2, 1.0, samples, seed ^ 3)?.eigenvalues);
        let a = ks_two_sample("rmt/pm/goe", &pm, &goe, level)?;
        let b = ks_two_sample("rmt/pm/gue", &pm, &gue, level)?;
        if alpha == 0.0 {
            out.push(StatReport { test_name: "rmt/pm/alpha=0_vs_goe".into(), ..a.clone() }.with("seed", seed));
        }
        if alpha == 1.0 {
            out.push(StatReport { test_name: "rmt/pm/alpha=1_vs_gue".into(), ..b.clone() }.with("seed", seed));
        }
        to_goe.push(a.statistic);
        to_gue.push(b.statistic);
    }
    let v_goe = to_goe.windows(2).filter(|w| w[1] <= w[0]).count();
    let v_gue = to_gue.windows(2).filter(|w| w[1] >= w[0]).count();
    out.push(StatReport::new("rmt/pm/trend_away_from_goe", v_goe as f64, 0.0, 5).with("distances", &to_goe));
    out.push(StatReport::new("rmt/pm/trend_towards_gue", v_gue as f64, 0.0, 5).with("distances", &to_gue));
    Ok(out)
}
