//! Stochastic engines: rejection-conditioned lattice walkers, Euler–Maruyama
//! integration of the conditioned SDEs, Brownian non-collision estimates and
//! exact samplers of the origin-started laws.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::combinatorics::{phi, LatticeConfig};
use crate::densities::{
    default_fd_step, dyson_drift, survival_log_gradient, survival_unchecked, ChamberPoint, Horizon, ModelSpec,
};
use crate::error::{Error, Result};
use crate::harness::stats::Histogram;
use crate::rmt::{class_c_positive_eigenvalues, draw_rng, sample_spectrum, Ensemble};
use crate::linalg::{cholesky_solve, Matrix};
use crate::special::{constants, h_hat_poly, h_poly, ln_abs_h_hat_poly, ln_abs_h_poly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Walker,
    SdeG,
    SdeP,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStart {
    Lattice(LatticeConfig),
    Point(ChamberPoint),
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: SimModel,
    pub spec: ModelSpec,
    /// Lattice scale L (walkers only).
    pub scale: u32,
    pub start: SimStart,
    /// Euler step (SDE only).
    pub step: f64,
    pub samples: usize,
    pub seed: u64,
    /// Worker threads. Results do not depend on it.
    pub stream_count: usize,
    /// Final time; defaults to the horizon for finite-horizon models.
    pub t_end: Option<f64>,
    /// Number of recorded intervals on the output grid.
    pub grid: usize,
    /// Walker runs abort when the acceptance rate falls below this.
    pub acceptance_floor: f64,
}

impl SimConfig {
    pub fn new(model: SimModel, spec: ModelSpec, start: SimStart) -> Self {
        SimConfig {
            model,
            spec,
            scale: 16,
            start,
            step: 1e-3,
            samples: 1000,
            seed: 0,
            stream_count: 1,
            t_end: None,
            grid: 10,
            acceptance_floor: 1e-6,
        }
    }

    pub fn digest(&self) -> String {
        let body = serde_json::to_string(self).unwrap_or_default();
        hex::encode(&Sha256::digest(body.as_bytes())[..16])
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::InvalidConfig("samples must be at least 1".into()));
        }
        if self.grid < 1 {
            return Err(Error::InvalidConfig("grid must have at least one interval".into()));
        }
        if self.stream_count < 1 {
            return Err(Error::InvalidConfig("stream count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sampled trajectories: `paths[sample][grid index][walker]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub time_grid: Vec<f64>,
    pub paths: Vec<Vec<Vec<f64>>>,
    pub accepted: u64,
    pub proposed: u64,
    pub config_digest: String,
}

impl PathEnsemble {
    pub fn endpoints(&self) -> Vec<Vec<f64>> {
        self.paths.iter().map(|p| p[p.len() - 1].clone()).collect()
    }

    pub fn acceptance(&self) -> f64 {
        self.accepted as f64 / self.proposed as f64
    }
}

fn run_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// Walkers

/// Proposals per parallel batch.
const WALKER_CHUNK: u64 = 8192;

/// Conditioned lattice walkers by rejection: each proposal is N independent
/// simple random walks of `m = phi(L^2 T)` steps, kept only if they stay
/// strictly ordered (and nonnegative with the wall) at every step.
///
/// Proposal `k` uses its own random stream, and the first `samples`
/// accepted proposals in index order are returned.
pub fn simulate_walkers(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    if cfg.model != SimModel::Walker {
        return Err(Error::InvalidConfig("simulate_walkers needs the walker model".into()));
    }
    let u = match &cfg.start {
        SimStart::Lattice(u) => u.clone(),
        _ => return Err(Error::InvalidConfig("walker start must be a lattice configuration".into())),
    };
    if u.len() != cfg.spec.n || u.wall() != cfg.spec.wall {
        return Err(Error::InvalidConfig("start does not match the model".into()));
    }
    if u.len() > 64 {
        return Err(Error::TooLarge("at most 64 walkers".into()));
    }
    let big_t = match cfg.spec.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => return Err(Error::InvalidConfig("walkers need a finite horizon".into())),
    };
    if cfg.scale < 1 {
        return Err(Error::InvalidConfig("scale L must be at least 1".into()));
    }
    let l = cfg.scale as f64;
    let m = phi(l * l * big_t).max(0) as u64;
    let grid_steps: Vec<u64> = (0..=cfg.grid).map(|j| (j as u64 * m) / cfg.grid as u64).collect();
    let time_grid: Vec<f64> = grid_steps.iter().map(|&k| k as f64 / (l * l)).collect();

    let result = run_pool(cfg.stream_count, || {
        let mut accepted: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.samples);
        let mut next = 0u64;
        let mut proposed = 0u64;
        while accepted.len() < cfg.samples {
            let batch: Vec<Option<Vec<Vec<f64>>>> = (next..next + WALKER_CHUNK)
                .into_par_iter()
                .map(|k| walker_proposal(&u, m, &grid_steps, l, &mut draw_rng(cfg.seed, k)))
                .collect();
            for (off, p) in batch.into_iter().enumerate() {
                if let Some(path) = p {
                    if accepted.len() < cfg.samples {
                        accepted.push(path);
                        proposed = next + off as u64 + 1;
                    }
                }
            }
            next += WALKER_CHUNK;
            if accepted.len() < cfg.samples {
                proposed = next;
                // Even counting one more success the rate is below the floor.
                if ((accepted.len() + 1) as f64) < cfg.acceptance_floor * next as f64 {
                    return Err(Error::AcceptanceFloor {
                        rate: accepted.len() as f64 / next as f64,
                        floor: cfg.acceptance_floor,
                        proposed: next,
                    });
                }
            }
        }
        Ok((accepted, proposed))
    })??;
    let (paths, proposed) = result;
    Ok(PathEnsemble { time_grid, accepted: paths.len() as u64, proposed, paths, config_digest: cfg.digest() })
}

fn walker_proposal(u: &LatticeConfig, m: u64, grid_steps: &[u64], l: f64, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let n = u.len();
    let mut pos: Vec<i64> = u.positions().to_vec();
    let mut out = Vec::with_capacity(grid_steps.len());
    let mut g = 0usize;
    let scaled = |p: &[i64]| p.iter().map(|&v| v as f64 / l).collect::<Vec<f64>>();
    while g < grid_steps.len() && grid_steps[g] == 0 {
        out.push(scaled(&pos));
        g += 1;
    }
    for step in 1..=m {
        let bits = rng.next_u64();
        for (k, p) in pos.iter_mut().enumerate() {
            *p += if bits >> k & 1 == 1 { 1 } else { -1 };
        }
        if pos.windows(2).any(|w| w[1] <= w[0]) || (u.wall() && pos[0] < 0) {
            return None;
        }
        while g < grid_steps.len() && grid_steps[g] == step {
            out.push(scaled(&pos));
            g += 1;
        }
    }
    debug_assert_eq!(out.len(), grid_steps.len());
    let _ = n;
    Some(out)
}

// ---------------------------------------------------------------------------
// Exact samplers from the origin

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Tolerated excess of a rejection weight over 1 before reporting a broken
/// envelope (covers rounding in the survival evaluation).
const ENVELOPE_SLACK: f64 = 1e-6;
const MAX_REJECTIONS: u64 = 10_000_000;

fn accept(rng: &mut ChaCha8Rng, w: f64) -> Result<bool> {
    if !(w <= 1.0 + ENVELOPE_SLACK) {
        return Err(Error::EnvelopeViolated(w));
    }
    Ok(rng.gen::<f64>() < w)
}

/// One draw from the infinite-horizon law at time `t` started at the origin:
/// unitary-ensemble eigenvalues, or the positive spectrum of the symplectic
/// class with the wall.
pub fn sample_p_origin(n: usize, t: f64, wall: bool, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::TimeOrder(format!("t must be positive, got {t}")));
    }
    if wall {
        class_c_positive_eigenvalues(n, t, rng)
    } else {
        sample_spectrum(Ensemble::Gue, n, t, rng)
    }
}

/// One draw from the horizon-`T` law at time `t` started at the origin, by
/// rejection from the infinite-horizon law (t < T/2) or from a Gaussian-type
/// envelope (t >= T/2).
pub fn sample_g_origin(n: usize, big_t: f64, t: f64, wall: bool, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= big_t) {
        return Err(Error::TimeOrder(format!("need 0 < t <= T, got t={t}, T={big_t}")));
    }
    let c = constants(n)?;
    let nf = n as f64;
    let tau = big_t - t;
    for _ in 0..MAX_REJECTIONS {
        if t < 0.5 * big_t {
            let y = sample_p_origin(n, t, wall, rng)?;
            let w = if wall {
                c.c_tilde * tau.powf(0.5 * nf * nf) * survival_unchecked(tau, &y, true) / h_hat_poly(&y)
            } else {
                c.c_bar * tau.powf(0.25 * nf * (nf - 1.0)) * survival_unchecked(tau, &y, false) / h_poly(&y)
            };
            if accept(rng, w)? {
                return Ok(y);
            }
        } else if wall {
            // Independent chi(2j) coordinates; keep ordered draws with
            // probability prod_{i<j} (1 - y_i^2/y_j^2) times survival.
            let y: Vec<f64> = (1..=n)
                .map(|j| ((0..2 * j).map(|_| normal(rng).powi(2)).sum::<f64>() * t).sqrt())
                .collect();
            if y.windows(2).any(|w| w[1] <= w[0]) {
                continue;
            }
            let mut w = 1.0;
            for j in 0..n {
                for i in 0..j {
                    w *= 1.0 - (y[i] / y[j]).powi(2);
                }
            }
            if tau > 0.0 {
                w *= survival_unchecked(tau, &y, true);
            }
            if accept(rng, w)? {
                return Ok(y);
            }
        } else {
            let y = sample_spectrum(Ensemble::Goe, n, t, rng)?;
            if tau <= 0.0 {
                return Ok(y);
            }
            if accept(rng, survival_unchecked(tau, &y, false))? {
                return Ok(y);
            }
        }
    }
    Err(Error::AcceptanceFloor { rate: 0.0, floor: 1.0 / MAX_REJECTIONS as f64, proposed: MAX_REJECTIONS })
}

pub fn sample_g_origin_batch(n: usize, big_t: f64, t: f64, wall: bool, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|k| sample_g_origin(n, big_t, t, wall, &mut draw_rng(seed, k)))
        .collect()
}

pub fn sample_p_origin_batch(n: usize, t: f64, wall: bool, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|k| sample_p_origin(n, t, wall, &mut draw_rng(seed, k)))
        .collect()
}

// ---------------------------------------------------------------------------
// SDE integration

/// Maximum number of step halvings.
pub const HALVING_BUDGET: u32 = 20;
/// Warm-start time as a fraction of the horizon (or end time).
pub const WARM_START_FRACTION: f64 = 1e-3;
/// The finite-horizon family stops at `T (1 - GUARD)`.
pub const HORIZON_GUARD: f64 = 1e-4;
/// Largest explicit drift displacement per step, relative to the boundary
/// distance.
pub const DRIFT_REACH: f64 = 0.5;

struct SdeCtx {
    n: usize,
    wall: bool,
    horizon: Option<f64>,
}

/// Newton iterations allowed for one implicit solve.
const NEWTON_ITERATIONS: usize = 60;

impl SdeCtx {
    /// Smooth part of the drift: the full drift minus the interaction
    /// `grad ln h` (zero for the infinite-horizon family).
    fn remainder(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self.horizon {
            None => vec![0.0; self.n],
            Some(big_t) => {
                let h = default_fd_step(x).min(self.boundary_distance(x) / 20.0);
                let full = survival_log_gradient(big_t - t, x, self.wall, h);
                let sing = dyson_drift(x, self.wall);
                full.iter().zip(&sing).map(|(a, b)| a - b).collect()
            }
        }
    }

    fn admissible(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite()) && !x.windows(2).any(|w| w[1] <= w[0]) && !(self.wall && x[0] <= 0.0)
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for w in x.windows(2) {
            d = d.min(w[1] - w[0]);
        }
        if self.wall {
            d = d.min(x[0]);
        }
        d
    }

    fn ln_h(&self, y: &[f64]) -> f64 {
        if self.wall {
            ln_abs_h_hat_poly(y)
        } else {
            ln_abs_h_poly(y)
        }
    }

    /// Hessian of `-ln h` at `y`, scaled by `h` and shifted by the identity.
    fn newton_matrix(&self, y: &[f64], h: f64) -> Matrix {
        let n = self.n;
        let mut m = Matrix::identity(n);
        for i in 0..n {
            if self.wall {
                m.set(i, i, m.get(i, i) + h / (y[i] * y[i]));
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = 1.0 / ((y[i] - y[j]) * (y[i] - y[j]));
                let s = if self.wall { 1.0 / ((y[i] + y[j]) * (y[i] + y[j])) } else { 0.0 };
                m.set(i, i, m.get(i, i) + h * (d + s));
                m.set(i, j, m.get(i, j) + h * (s - d));
            }
        }
        m
    }

    /// Minimizer over the chamber of `|y - z|^2/2 - h ln h(y)`, i.e. the
    /// solution of `y = z + h grad ln h(y)`. The objective is strictly
    /// convex with a barrier at the boundary; damped Newton from the better
    /// of `z` and `x` keeps every iterate inside. `None` if it stalls.
    fn implicit_solve(&self, x: &[f64], z: &[f64], h: f64) -> Option<Vec<f64>> {
        let obj = |y: &[f64]| -> f64 {
            let q: f64 = y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            0.5 * q - h * self.ln_h(y)
        };
        let mut y = x.to_vec();
        let mut fy = obj(&y);
        if self.admissible(z) {
            let fz = obj(z);
            if fz < fy {
                y = z.to_vec();
                fy = fz;
            }
        }
        let scale = 1.0 + y.iter().chain(z).fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..NEWTON_ITERATIONS {
            let b = dyson_drift(&y, self.wall);
            let grad: Vec<f64> = (0..self.n).map(|i| y[i] - z[i] - h * b[i]).collect();
            if grad.iter().all(|g| g.abs() <= 1e-13 * scale) {
                return Some(y);
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let delta = cholesky_solve(&self.newton_matrix(&y, h), &neg).ok()?;
            let slope: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
            let mut a = 1.0;
            loop {
                let cand: Vec<f64> = y.iter().zip(&delta).map(|(v, d)| v + a * d).collect();
                if self.admissible(&cand) {
                    let fc = obj(&cand);
                    if fc <= fy + 1e-4 * a * slope {
                        let moved = delta.iter().fold(0.0f64, |m, d| m.max((a * d).abs()));
                        y = cand;
                        fy = fc;
                        if moved <= 1e-15 * scale {
                            return Some(y);
                        }
                        break;
                    }
                }
                a *= 0.5;
                if a < 1e-12 {
                    // No descent at rounding level: accept if already stationary.
                    return if grad.iter().all(|g| g.abs() <= 1e-9 * scale) { Some(y) } else { None };
                }
            }
        }
        None
    }

    /// One step over [t, t+h] with Brownian increment `dw`: the interaction
    /// `grad ln h` is taken at the new point (implicit), the smooth
    /// remainder at the old one. A step is refused if the implicit solve
    /// fails or if the remainder alone would move a walker by more than
    /// `DRIFT_REACH` times the distance to the boundary; it is then replaced
    /// by two half steps whose increments come from the Brownian bridge
    /// conditioned on `dw`.
    fn step(&self, x: &[f64], t: f64, h: f64, dw: &[f64], depth: u32, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let r = self.remainder(t, x);
        let reach = DRIFT_REACH * self.boundary_distance(x);
        if r.iter().all(|v| (v * h).abs() <= reach) {
            let z: Vec<f64> = (0..self.n).map(|i| x[i] + r[i] * h + dw[i]).collect();
            if let Some(y) = self.implicit_solve(x, &z, h) {
                return Ok(y);
            }
        }
        if depth >= HALVING_BUDGET {
            return Err(Error::HalvingExhausted { t });
        }
        let sd = (h / 4.0).sqrt();
        let dw1: Vec<f64> = dw.iter().map(|d| 0.5 * d + sd * normal(rng)).collect();
        let dw2: Vec<f64> = dw.iter().zip(&dw1).map(|(d, a)| d - a).collect();
        let mid = self.step(x, t, 0.5 * h, &dw1, depth + 1, rng)?;
        self.step(&mid, t + 0.5 * h, 0.5 * h, &dw2, depth + 1, rng)
    }
}

/// Euler–Maruyama paths of the conditioned diffusions, with the singular
/// interaction treated implicitly. `SdeG` uses the finite-horizon drift
/// (gradient of the log survival probability), `SdeP` the Dyson-type
/// interaction. Origin starts draw the state at a small time
/// `t0` exactly and integrate from there; the grid then starts at `t0`.
pub fn simulate_sde(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidConfig("step must be positive".into()));
    }
    let (horizon, stop) = match (cfg.model, cfg.spec.horizon) {
        (SimModel::SdeG, Horizon::Finite(big_t)) => {
            let end = cfg.t_end.unwrap_or(big_t).min(big_t * (1.0 - HORIZON_GUARD));
            (Some(big_t), end)
        }
        (SimModel::SdeP, _) => match cfg.t_end.or(match cfg.spec.horizon {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }) {
            Some(e) => (None, e),
            None => return Err(Error::InvalidConfig("infinite horizon needs an end time".into())),
        },
        (SimModel::SdeG, Horizon::Infinite) => {
            return Err(Error::InvalidConfig("finite-horizon SDE needs a finite horizon".into()))
        }
        (SimModel::Walker, _) => return Err(Error::InvalidConfig("simulate_sde needs an SDE model".into())),
    };
    let n = cfg.spec.n;
    let wall = cfg.spec.wall;
    let t0 = match &cfg.start {
        SimStart::Origin => WARM_START_FRACTION * horizon.unwrap_or(stop),
        SimStart::Point(x) => {
            if x.len() != n || x.wall() != wall {
                return Err(Error::InvalidConfig("start does not match the model".into()));
            }
            if x.boundary_distance() <= 0.0 {
                return Err(Error::NotInChamber("open"));
            }
            0.0
        }
        SimStart::Lattice(_) => return Err(Error::InvalidConfig("SDE start must be a point or the origin".into())),
    };
    if !(stop > t0) {
        return Err(Error::TimeOrder(format!("end time {stop} must exceed start {t0}")));
    }
    let time_grid: Vec<f64> = (0..=cfg.grid).map(|j| t0 + (stop - t0) * j as f64 / cfg.grid as f64).collect();
    let ctx = SdeCtx { n, wall, horizon };
    let paths = run_pool(cfg.stream_count, || {
        (0..cfg.samples as u64)
            .into_par_iter()
            .map(|k| sde_path(&ctx, cfg, &time_grid, &mut draw_rng(cfg.seed, k)))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(PathEnsemble {
        time_grid,
        accepted: paths.len() as u64,
        proposed: paths.len() as u64,
        paths,
        config_digest: cfg.digest(),
    })
}

fn sde_path(ctx: &SdeCtx, cfg: &SimConfig, grid: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut x = match &cfg.start {
        SimStart::Origin => match ctx.horizon {
            Some(big_t) => sample_g_origin(ctx.n, big_t, grid[0], ctx.wall, rng)?,
            None => sample_p_origin(ctx.n, grid[0], ctx.wall, rng)?,
        },
        SimStart::Point(p) => p.coords().to_vec(),
        SimStart::Lattice(_) => unreachable!(),
    };
    let mut out = Vec::with_capacity(grid.len());
    out.push(x.clone());
    let mut t = grid[0];
    for &target in &grid[1..] {
        while t < target {
            let h = cfg.step.min(target - t);
            let sd = h.sqrt();
            let dw: Vec<f64> = (0..ctx.n).map(|_| sd * normal(rng)).collect();
            x = ctx.step(&x, t, h, &dw, 0, rng)?;
            t = if target - t <= cfg.step { target } else { t + h };
        }
        assert!(ctx.admissible(&x), "path left the chamber at t = {t}");
        out.push(x.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Brownian non-collision

/// Constant of the first-order correction for discretely monitored
/// barriers (`zeta(1/2)/sqrt(2 pi)` in absolute value).
pub const BARRIER_SHIFT: f64 = 0.5826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonCollisionEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub step: f64,
    /// Exact survival probability at `x`.
    pub exact: f64,
    /// First-order discretization bias predicted by shifting every barrier
    /// by `BARRIER_SHIFT * sqrt(variance per step)`, with 25% headroom.
    pub bias_allowance: f64,
}

impl NonCollisionEstimate {
    /// `|estimate - exact| <= 3 SE + bias allowance`.
    pub fn consistent(&self) -> bool {
        (self.estimate - self.exact).abs() <= 3.0 * self.std_error + self.bias_allowance
    }
}

/// Fraction of discretized Brownian N-tuples from `x` that stay ordered
/// (and positive with the wall) at all monitoring times up to `t`.
pub fn noncollision_mc(t: f64, x: &ChamberPoint, samples: usize, step: f64, seed: u64) -> Result<NonCollisionEstimate> {
    if !(t > 0.0) || !(step > 0.0) || samples == 0 {
        return Err(Error::InvalidConfig("need t > 0, step > 0, samples >= 1".into()));
    }
    let n = x.len();
    let wall = x.wall();
    let steps = (t / step).round().max(1.0) as u64;
    let h = t / steps as f64;
    let sd = h.sqrt();
    let x0 = x.coords().to_vec();
    let survived: u64 = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = draw_rng(seed, k);
            let mut y = x0.clone();
            for _ in 0..steps {
                for v in y.iter_mut() {
                    *v += sd * normal(&mut rng);
                }
                if y.windows(2).any(|w| w[1] <= w[0]) || (wall && y[0] <= 0.0) {
                    return 0u64;
                }
            }
            1u64
        })
        .sum();
    let p = survived as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    let exact = survival_unchecked(t, &x0, wall);
    let mut shifted = x0.clone();
    let gap_shift = BARRIER_SHIFT * (2.0 * h).sqrt();
    let wall_shift = if wall { BARRIER_SHIFT * h.sqrt() } else { 0.0 };
    for i in 0..n {
        shifted[i] = x0[i] + wall_shift + i as f64 * gap_shift;
    }
    let corrected = survival_unchecked(t, &shifted, wall);
    Ok(NonCollisionEstimate {
        estimate: p,
        std_error: se,
        samples: samples as u64,
        step: h,
        exact,
        bias_allowance: 1.25 * (corrected - exact).abs(),
    })
}

// ---------------------------------------------------------------------------
// Endpoint summaries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Coordinate(usize),
    /// `x_{i+1} - x_i`
    Gap(usize),
    Max,
}

pub fn endpoint_values(ens: &PathEnsemble, f: Functional) -> Result<Vec<f64>> {
    if ens.paths.is_empty() {
        return Err(Error::Empty);
    }
    let n = ens.paths[0][0].len();
    let check = |k: usize| if k < n { Ok(()) } else { Err(Error::DimensionMismatch { expected: n, got: k + 1 }) };
    match f {
        Functional::Coordinate(k) => check(k)?,
        Functional::Gap(k) => check(k + 1)?,
        Functional::Max => {}
    }
    Ok(ens
        .endpoints()
        .iter()
        .map(|e| match f {
            Functional::Coordinate(k) => e[k],
            Functional::Gap(k) => e[k + 1] - e[k],
            Functional::Max => e[n - 1],
        })
        .collect())
}

pub fn endpoint_histogram(ens: &PathEnsemble, f: Functional, bins: usize) -> Result<Histogram> {
    Histogram::from_samples(&endpoint_values(ens, f)?, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::survival_probability;
    use crate::densities::{g_density, Start};
    use crate::harness::marginal::marginalize;
    use crate::harness::stats::{ks_test, sorted};
    use std::f64::consts::PI;

    fn walker_cfg(p: &[i64], wall: bool, scale: u32, big_t: f64, samples: usize) -> SimConfig {
        let spec = ModelSpec::finite(p.len(), big_t, wall).unwrap();
        let mut c = SimConfig::new(SimModel::Walker, spec, SimStart::Lattice(LatticeConfig::new(p.to_vec(), wall).unwrap()));
        c.scale = scale;
        c.samples = samples;
        c.seed = 17;
        c.grid = 2;
        c
    }

    #[test]
    fn single_walker_always_accepted() {
        let e = simulate_walkers(&walker_cfg(&[0], false, 4, 1.0, 500)).unwrap();
        assert_eq!(e.accepted, 500);
        assert_eq!(e.proposed, 500);
    }

    #[test]
    fn acceptance_matches_exact_survival() {
        for (p, wall) in [(vec![0i64, 2], false), (vec![0, 2], true), (vec![0, 2, 4], false)] {
            // L = 1, T = 2 gives m = 2; L = 2, T = 2.5 gives m = 10
            for (l, big_t) in [(1u32, 2.0), (2, 2.5)] {
                let cfg = walker_cfg(&p, wall, l, big_t, 20_000);
                let e = simulate_walkers(&cfg).unwrap();
                let m = phi((l * l) as f64 * big_t);
                let exact = survival_probability(m, &LatticeConfig::new(p.clone(), wall).unwrap()).unwrap().value;
                let rate = e.acceptance();
                let se = (exact * (1.0 - exact) / e.proposed as f64).sqrt();
                assert!((rate - exact).abs() < 3.0 * se, "{p:?} wall={wall} m={m}: {rate} vs {exact}");
            }
        }
    }

    #[test]
    fn walker_determinism_across_streams() {
        let mut a = walker_cfg(&[0, 2], false, 4, 1.0, 300);
        let e1 = simulate_walkers(&a).unwrap();
        a.stream_count = 4;
        let e2 = simulate_walkers(&a).unwrap();
        assert_eq!(e1.paths, e2.paths);
        assert_eq!(e1.proposed, e2.proposed);
    }

    #[test]
    fn walker_floor_aborts() {
        let mut c = walker_cfg(&[0, 2, 4], false, 64, 1.0, 10);
        c.acceptance_floor = 0.5;
        assert!(matches!(simulate_walkers(&c), Err(Error::AcceptanceFloor { .. })));
    }

    #[test]
    fn walker_paths_are_ordered() {
        let e = simulate_walkers(&walker_cfg(&[0, 2, 4], true, 3, 1.0, 200)).unwrap();
        for p in &e.paths {
            for row in p {
                assert!(row.windows(2).all(|w| w[1] > w[0]) && row[0] >= 0.0);
            }
        }
        let h = endpoint_histogram(&e, Functional::Gap(0), 8).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), e.accepted);
    }

    fn ks_one(sample: Vec<f64>, cdf: impl Fn(f64) -> f64, alpha: f64) -> bool {
        ks_test("t", &sorted(sample), cdf, alpha).unwrap().passed()
    }

    #[test]
    fn origin_samplers_match_closed_forms() {
        // N=1 wall, g at t = T: Rayleigh; at t < T/2 and t >= T/2 the one-walker
        // law has CDF obtained by quadrature of the closed form.
        let big_t = 1.0;
        for t in [0.3, 0.7, 1.0] {
            let v: Vec<f64> = sample_g_origin_batch(1, big_t, t, true, 4000, 3).unwrap().into_iter().map(|r| r[0]).collect();
            let spec = ModelSpec::finite(1, big_t, true).unwrap();
            let f = |y: &[f64]| if y[0] > 0.0 { g_density(&spec, 0.0, &Start::Origin, t, &ChamberPoint::new(y.to_vec(), true).unwrap()).unwrap() } else { 0.0 };
            let m = marginalize(&f, 1, 0, 0.0, 8.0, 64, 1.0).unwrap();
            assert!(ks_one(v, |x| m.cdf(x), 0.01), "t={t}");
        }
        // N=2 no wall, both branches, gap law against quadrature marginal
        for (t, wall) in [(0.3, false), (0.8, false), (0.3, true), (0.8, true)] {
            let rows = sample_g_origin_batch(2, big_t, t, wall, 4000, 5).unwrap();
            let spec = ModelSpec::finite(2, big_t, wall).unwrap();
            let f = |y: &[f64]| {
                if y[1] > y[0] && (!wall || y[0] > 0.0) {
                    g_density(&spec, 0.0, &Start::Origin, t, &ChamberPoint::new(y.to_vec(), wall).unwrap()).unwrap()
                } else {
                    0.0
                }
            };
            let lo = if wall { 0.0 } else { -7.0 };
            let m = marginalize(&f, 2, 1, lo, 7.0, 70, 0.5).unwrap();
            assert!(m.normalization_drift.abs() < 1e-6);
            assert!(ks_one(rows.iter().map(|r| r[1]).collect(), |x| m.cdf(x), 0.01), "t={t} wall={wall}");
        }
    }

    #[test]
    fn brownian_single_walker_and_variance() {
        let spec = ModelSpec::infinite(1, false).unwrap();
        let mut c = SimConfig::new(SimModel::SdeP, spec, SimStart::Point(ChamberPoint::new(vec![0.0], false).unwrap()));
        c.t_end = Some(1.0);
        c.samples = 10_000;
        c.step = 0.01;
        c.grid = 1;
        let e = simulate_sde(&c).unwrap();
        let v = endpoint_values(&e, Functional::Coordinate(0)).unwrap();
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0f64 / 1e4).sqrt(), "{var}");
    }

    #[test]
    fn bessel_three_from_warm_start() {
        let spec = ModelSpec::infinite(1, true).unwrap();
        let mut c = SimConfig::new(SimModel::SdeP, spec, SimStart::Origin);
        c.t_end = Some(1.0);
        c.samples = 4000;
        c.seed = 2;
        let e = simulate_sde(&c).unwrap();
        let v = endpoint_values(&e, Functional::Coordinate(0)).unwrap();
        let cdf = |y: f64| libm::erf(y / 2f64.sqrt()) - (2.0 / PI).sqrt() * y * (-y * y / 2.0).exp();
        assert!(ks_one(v, cdf, 0.01));
    }

    #[test]
    fn finite_horizon_sde_two_walkers_end_near_goe() {
        let spec = ModelSpec::finite(2, 1.0, false).unwrap();
        let mut c = SimConfig::new(SimModel::SdeG, spec, SimStart::Origin);
        c.samples = 3000;
        c.seed = 9;
        c.grid = 4;
        let e = simulate_sde(&c).unwrap();
        assert!((e.time_grid[4] - (1.0 - HORIZON_GUARD)).abs() < 1e-15);
        // gap at T: density d/(2T) exp(-d^2/4T)
        let gaps = endpoint_values(&e, Functional::Gap(0)).unwrap();
        assert!(ks_one(gaps, |d| 1.0 - (-d * d / 4.0).exp(), 0.01));
    }

    #[test]
    fn sde_determinism_and_errors() {
        let spec = ModelSpec::infinite(2, false).unwrap();
        let mut c = SimConfig::new(SimModel::SdeP, spec, SimStart::Origin);
        c.t_end = Some(0.5);
        c.samples = 50;
        let a = simulate_sde(&c).unwrap();
        c.stream_count = 3;
        let b = simulate_sde(&c).unwrap();
        assert_eq!(a.paths, b.paths);
        c.t_end = None;
        assert!(simulate_sde(&c).is_err());
        let mut w = c.clone();
        w.model = SimModel::Walker;
        assert!(simulate_sde(&w).is_err());
    }

    #[test]
    fn noncollision_two_walkers() {
        let x = ChamberPoint::new(vec![0.0, 1.0], false).unwrap();
        let r = noncollision_mc(1.0, &x, 20_000, 1e-3, 7).unwrap();
        assert_eq!(r.exact, libm::erf(0.5));
        assert!(r.consistent(), "{r:?}");
        let one = noncollision_mc(1.0, &ChamberPoint::new(vec![0.3], false).unwrap(), 100, 1e-2, 1).unwrap();
        assert_eq!(one.estimate, 1.0);
    }
}
