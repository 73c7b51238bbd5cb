//! Gaussian random-matrix ensembles and their ordered eigenvalue densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::ChamberPoint;
use crate::error::{Error, Result};
use crate::harness::stats::{bonferroni, ks_two_sample, sorted, StatReport, DEFAULT_ALPHA};
use crate::linalg::{hermitian_eigenvalues, symmetric_eigenvalues, HermitianMatrix, Matrix};
use crate::special::{constants, ln_abs_h_poly};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    Goe,
    Gue,
    /// GUE part with variance `2 a^2 v^2` plus GOE part with `2 (1-a^2) v^2`,
    /// `v^2 = 1/(2(1+a^2))`.
    PandeyMehta { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub ensemble: Ensemble,
    pub n: usize,
    pub variance: f64,
    /// One ascending row per draw.
    pub eigenvalues: Vec<Vec<f64>>,
}

impl SpectrumSample {
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.eigenvalues.iter().map(|r| r[k]).collect()
    }
}

fn normal(rng: &mut ChaCha8Rng, var: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * var.sqrt()
}

/// Real symmetric matrix under the weight `exp(-Tr H^2/(2 var))`: diagonal
/// variance `var`, off-diagonal `var/2`.
pub fn goe_matrix(n: usize, var: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        m.set(i, i, normal(rng, var));
        for j in (i + 1)..n {
            let v = normal(rng, var / 2.0);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Hermitian matrix under the same trace weight: diagonal variance `var`,
/// real and imaginary off-diagonal parts of variance `var/2` each.
pub fn gue_matrix(n: usize, var: f64, rng: &mut ChaCha8Rng) -> (Matrix, Matrix) {
    let mut re = Matrix::zeros(n);
    let mut im = Matrix::zeros(n);
    for i in 0..n {
        re.set(i, i, normal(rng, var));
        for j in (i + 1)..n {
            let a = normal(rng, var / 2.0);
            let b = normal(rng, var / 2.0);
            re.set(i, j, a);
            re.set(j, i, a);
            im.set(i, j, b);
            im.set(j, i, -b);
        }
    }
    (re, im)
}

/// Positive eigenvalues of a Hermitian matrix `[[A, B], [B*, -A^T]]` with
/// `A` from the unitary ensemble and `B` complex symmetric. Their ordered
/// density is proportional to `exp(-|y|^2/(2 var)) h_hat(y)^2`.
pub fn class_c_positive_eigenvalues(n: usize, var: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let (ar, ai) = gue_matrix(n, var, rng);
    let mut br = Matrix::zeros(n);
    let mut bi = Matrix::zeros(n);
    for i in 0..n {
        br.set(i, i, normal(rng, var));
        bi.set(i, i, normal(rng, var));
        for j in (i + 1)..n {
            let a = normal(rng, var / 2.0);
            let b = normal(rng, var / 2.0);
            br.set(i, j, a);
            br.set(j, i, a);
            bi.set(i, j, b);
            bi.set(j, i, b);
        }
    }
    let d = 2 * n;
    let mut re = Matrix::zeros(d);
    let mut im = Matrix::zeros(d);
    for i in 0..n {
        for j in 0..n {
            re.set(i, j, ar.get(i, j));
            im.set(i, j, ai.get(i, j));
            // -A^T
            re.set(n + i, n + j, -ar.get(j, i));
            im.set(n + i, n + j, -ai.get(j, i));
            re.set(i, n + j, br.get(i, j));
            im.set(i, n + j, bi.get(i, j));
            // B* = conj(B)^T = conj(B) for symmetric B
            re.set(n + i, j, br.get(j, i));
            im.set(n + i, j, -bi.get(j, i));
        }
    }
    let ev = hermitian_eigenvalues(&HermitianMatrix::new(re, im)?)?;
    Ok(ev[n..].to_vec())
}

/// Stream for draw `k` of a run seeded with `seed`.
pub fn draw_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

pub fn sample_spectrum(ensemble: Ensemble, n: usize, variance: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match ensemble {
        Ensemble::Goe => symmetric_eigenvalues(&goe_matrix(n, variance, rng)),
        Ensemble::Gue => {
            let (re, im) = gue_matrix(n, variance, rng);
            hermitian_eigenvalues(&HermitianMatrix::new(re, im)?)
        }
        Ensemble::PandeyMehta { alpha } => {
            let a2 = alpha * alpha;
            let v2 = 1.0 / (2.0 * (1.0 + a2));
            let (re, im) = gue_matrix(n, variance * 2.0 * a2 * v2, rng);
            let g = goe_matrix(n, variance * 2.0 * (1.0 - a2) * v2, rng);
            let re = Matrix::from_fn(n, |i, j| re.get(i, j) + g.get(i, j));
            hermitian_eigenvalues(&HermitianMatrix::new(re, im)?)
        }
    }
}

/// `samples` independent spectra. For the interpolating ensemble `variance`
/// multiplies both component variances (1 gives the standard weight).
pub fn sample_ensemble(ensemble: Ensemble, n: usize, variance: f64, samples: usize, seed: u64) -> Result<SpectrumSample> {
    if n < 1 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidConfig(format!("variance must be positive, got {variance}")));
    }
    if let Ensemble::PandeyMehta { alpha } = ensemble {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0,1], got {alpha}")));
        }
    }
    let eigenvalues = (0..samples as u64)
        .into_par_iter()
        .map(|k| sample_spectrum(ensemble, n, variance, &mut draw_rng(seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSample { ensemble, n, variance, eigenvalues })
}

/// Eigenvalue density on unordered space: `(c'_N/N!) s^{-N^2} exp(-|x|^2/2s^2) h(x)^2`
/// for the unitary ensemble and `(c_N/N!) s^{-N(N+1)/2} exp(..) |h(x)|` for
/// the orthogonal one, with `s^2 = variance`. On the ordered chamber the
/// law is `N!` times this.
pub fn eigen_density(ensemble: Ensemble, x: &ChamberPoint, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidConfig("variance must be positive".into()));
    }
    if x.wall() {
        return Err(Error::WallMismatch);
    }
    let n = x.len();
    let nf = n as f64;
    let c = constants(n)?;
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let sq: f64 = x.coords().iter().map(|v| v * v).sum();
    let ln_e = -sq / (2.0 * variance);
    let lh = ln_abs_h_poly(x.coords());
    let ln = match ensemble {
        Ensemble::Gue => c.c_prime.ln() - ln_fact - 0.5 * nf * nf * variance.ln() + ln_e + 2.0 * lh,
        Ensemble::Goe => c.c.ln() - ln_fact - 0.25 * nf * (nf + 1.0) * variance.ln() + ln_e + lh,
        Ensemble::PandeyMehta { .. } => {
            return Err(Error::Domain("no closed-form density for the interpolating ensemble".into()))
        }
    };
    Ok(ln.exp())
}

/// Compares interpolating-ensemble spectra at `alpha = sqrt((T-t)/T)` with
/// origin-started finite-horizon samples at time `t` rescaled by
/// `sqrt(T/(t(2T-t)))`. A global scale between the two samples is fitted
/// by second moments and reported; the KS tests use the fitted scale.
pub fn pm_bridge_check(n: usize, big_t: f64, t: f64, samples: usize, seed: u64) -> Result<Vec<StatReport>> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidConfig(format!("bridge check supports N <= 3, got {n}")));
    }
    if !(t > 0.0 && t <= big_t) {
        return Err(Error::TimeOrder(format!("need 0 < t <= T, got t={t}, T={big_t}")));
    }
    let alpha = ((big_t - t) / big_t).sqrt();
    let pm = sample_ensemble(Ensemble::PandeyMehta { alpha }, n, 1.0, samples, seed)?;
    let walkers = crate::montecarlo::sample_g_origin_batch(n, big_t, t, false, samples, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let factor = (big_t / (t * (2.0 * big_t - t))).sqrt();
    let scaled: Vec<Vec<f64>> = walkers.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect();
    let m2 = |rows: &[Vec<f64>]| rows.iter().flatten().map(|v| v * v).sum::<f64>() / rows.len() as f64;
    let fitted = (m2(&scaled) / m2(&pm.eigenvalues)).sqrt();
    let k = n + 1;
    let level = bonferroni(DEFAULT_ALPHA, k);
    let mut reports = Vec::with_capacity(k);
    for c in 0..n {
        let a = sorted(pm.eigenvalues.iter().map(|r| r[c] * fitted).collect());
        let b = sorted(scaled.iter().map(|r| r[c]).collect());
        reports.push(ks_two_sample(&format!("rmt/pm_bridge/t={t}/coord{}", c + 1), &a, &b, level)?);
    }
    let a = sorted(pm.eigenvalues.iter().map(|r| r[n - 1] * fitted).collect());
    let b = sorted(scaled.iter().map(|r| r[n - 1]).collect());
    reports.push(ks_two_sample(&format!("rmt/pm_bridge/t={t}/max"), &a, &b, level)?);
    Ok(reports
        .into_iter()
        .map(|r| {
            r.with("alpha", alpha)
                .with("fitted_scale", fitted)
                .with("horizon", big_t)
                .with("time", t)
                .with("seed", seed)
                .with("n", n)
        })
        .collect())
}
