//! Transition densities of nonintersecting Brownian motions, with and without
//! an absorbing wall at the origin, and the identities relating them.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ln_determinant, pfaffian, Matrix, SkewMatrix};
use crate::quadrature::ChamberQuadrature;
use crate::special::{constants, h_hat_poly, h_poly, ln_abs_h_hat_poly, ln_abs_h_poly, psi, psi_hat_unchecked};

/// Strictly increasing point of the Weyl chamber (nonnegative when `wall`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChamberPoint {
    coords: Vec<f64>,
    wall: bool,
}

impl ChamberPoint {
    pub fn new(coords: Vec<f64>, wall: bool) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NotInChamber(if wall { "wall" } else { "Weyl" }));
        }
        if coords.windows(2).any(|w| w[1] <= w[0]) || (wall && coords[0] < 0.0) {
            return Err(Error::NotInChamber(if wall { "wall" } else { "Weyl" }));
        }
        Ok(ChamberPoint { coords, wall })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn wall(&self) -> bool {
        self.wall
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Distance to the chamber boundary: smallest gap, and x_1 with a wall.
    pub fn boundary_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for w in self.coords.windows(2) {
            d = d.min(w[1] - w[0]);
        }
        if self.wall {
            d = d.min(self.coords[0]);
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub n: usize,
    pub horizon: Horizon,
    pub wall: bool,
}

impl ModelSpec {
    pub fn new(n: usize, horizon: Horizon, wall: bool) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        if let Horizon::Finite(t) = horizon {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidConfig(format!("horizon must be positive, got {t}")));
            }
        }
        Ok(ModelSpec { n, horizon, wall })
    }

    pub fn finite(n: usize, horizon: f64, wall: bool) -> Result<Self> {
        Self::new(n, Horizon::Finite(horizon), wall)
    }

    pub fn infinite(n: usize, wall: bool) -> Result<Self> {
        Self::new(n, Horizon::Infinite, wall)
    }
}

/// Starting state: all walkers at the origin, or an interior point.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Origin,
    At(ChamberPoint),
}

fn check_pair(x: &ChamberPoint, y: &ChamberPoint) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.wall != y.wall {
        return Err(Error::WallMismatch);
    }
    Ok(())
}

fn check_point(spec: &ModelSpec, y: &ChamberPoint) -> Result<()> {
    if y.len() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: y.len() });
    }
    if y.wall != spec.wall {
        return Err(Error::WallMismatch);
    }
    Ok(())
}

/// ln of the absorbed transition density (sign, ln|.|).
pub fn ln_km_density(t: f64, x: &ChamberPoint, y: &ChamberPoint) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::TimeOrder(format!("elapsed time must be positive, got {t}")));
    }
    check_pair(x, y)?;
    let n = x.len();
    let norm = -0.5 * (2.0 * PI * t).ln();
    // Each row is scaled by its largest exponent to keep entries in range.
    let mut shift = 0.0;
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        let expo: Vec<f64> = (0..n).map(|j| -(x.coords[i] - y.coords[j]).powi(2) / (2.0 * t)).collect();
        let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        shift += top;
        for j in 0..n {
            let mut v = (expo[j] - top).exp();
            if x.wall {
                v *= -(-2.0 * x.coords[i] * y.coords[j] / t).exp_m1();
            }
            m.set(i, j, v);
        }
    }
    let (sign, ln) = ln_determinant(&m);
    Ok((sign, ln + shift + n as f64 * norm))
}

/// `det[p_t(x_i, y_j)]`, with `p_t(x,y) - p_t(x,-y)` entries for the wall.
pub fn km_density(t: f64, x: &ChamberPoint, y: &ChamberPoint) -> Result<f64> {
    let (s, l) = ln_km_density(t, x, y)?;
    Ok(if s == 0.0 { 0.0 } else { s * l.exp() })
}

/// Probability that Brownian motions from `x` keep their order (and stay
/// positive, with the wall) for a time `t`, as a Pfaffian.
pub fn survival(t: f64, x: &ChamberPoint) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::TimeOrder(format!("remaining time must be positive, got {t}")));
    }
    Ok(survival_unchecked(t, &x.coords, x.wall))
}

pub(crate) fn survival_unchecked(t: f64, x: &[f64], wall: bool) -> f64 {
    let n = x.len();
    let dim = n + n % 2;
    let sc = 1.0 / (2.0 * t).sqrt();
    let entry = |i: usize, j: usize| -> f64 {
        if j == n {
            return if wall { psi(x[i] * sc) } else { 1.0 };
        }
        if wall {
            psi_hat_unchecked(x[i] * sc, x[j] * sc)
        } else {
            psi((x[j] - x[i]) * sc * std::f64::consts::FRAC_1_SQRT_2)
        }
    };
    if dim == 2 {
        return entry(0, 1);
    }
    let a = SkewMatrix::from_upper(dim, entry).expect("even dimension");
    pfaffian(&a)
}

fn time_checks(spec: &ModelSpec, s: f64, start: &Start, t: f64) -> Result<()> {
    if !(s >= 0.0) || !(t > s) {
        return Err(Error::TimeOrder(format!("need 0 <= s < t, got s={s}, t={t}")));
    }
    if let Horizon::Finite(big_t) = spec.horizon {
        if t > big_t {
            return Err(Error::TimeOrder(format!("t={t} exceeds horizon {big_t}")));
        }
    }
    if matches!(start, Start::Origin) && s != 0.0 {
        return Err(Error::TimeOrder(format!("origin start requires s = 0, got {s}")));
    }
    if let Start::At(x) = start {
        check_point(spec, x)?;
    }
    Ok(())
}

fn ln_h(y: &[f64], wall: bool) -> f64 {
    if wall {
        ln_abs_h_hat_poly(y)
    } else {
        ln_abs_h_poly(y)
    }
}

/// Density of the process conditioned to survive until the horizon T,
/// at `y` and time `t`, given position at time `s`.
/// An infinite horizon gives [`p_density`].
pub fn g_density(spec: &ModelSpec, s: f64, start: &Start, t: f64, y: &ChamberPoint) -> Result<f64> {
    let big_t = match spec.horizon {
        Horizon::Infinite => return p_density(spec, s, start, t, y),
        Horizon::Finite(v) => v,
    };
    time_checks(spec, s, start, t)?;
    check_point(spec, y)?;
    let n = spec.n as f64;
    let surv_y = if t < big_t { survival_unchecked(big_t - t, &y.coords, spec.wall) } else { 1.0 };
    if surv_y <= 0.0 {
        return Ok(0.0);
    }
    match start {
        Start::Origin => {
            let c = constants(spec.n)?;
            let sq: f64 = y.coords.iter().map(|v| v * v).sum();
            let ln = if spec.wall {
                c.c_hat.ln() + 0.5 * n * n * big_t.ln() - 0.5 * n * (2.0 * n + 1.0) * t.ln()
            } else {
                c.c.ln() + 0.25 * n * (n - 1.0) * big_t.ln() - 0.5 * n * n * t.ln()
            } - sq / (2.0 * t)
                + ln_h(&y.coords, spec.wall)
                + surv_y.ln();
            Ok(ln.exp())
        }
        Start::At(x) => {
            let (sign, lf) = ln_km_density(t - s, x, y)?;
            if sign <= 0.0 {
                return Ok(0.0);
            }
            let surv_x = survival_unchecked(big_t - s, &x.coords, spec.wall);
            Ok((lf + surv_y.ln() - surv_x.ln()).exp())
        }
    }
}

/// Density of the process conditioned never to collide (Dyson-type), an
/// h-transform of the absorbed density by `h_N` or `h_hat_N`.
pub fn p_density(spec: &ModelSpec, s: f64, start: &Start, t: f64, y: &ChamberPoint) -> Result<f64> {
    let spec_inf = ModelSpec { horizon: Horizon::Infinite, ..*spec };
    time_checks(&spec_inf, s, start, t)?;
    check_point(spec, y)?;
    let n = spec.n as f64;
    match start {
        Start::Origin => {
            let c = constants(spec.n)?;
            let sq: f64 = y.coords.iter().map(|v| v * v).sum();
            let ln = if spec.wall {
                c.c_hat_prime.ln() - 0.5 * n * (2.0 * n + 1.0) * t.ln()
            } else {
                c.c_prime.ln() - 0.5 * n * n * t.ln()
            } - sq / (2.0 * t)
                + 2.0 * ln_h(&y.coords, spec.wall);
            Ok(ln.exp())
        }
        Start::At(x) => {
            let (sign, lf) = ln_km_density(t - s, x, y)?;
            if sign <= 0.0 {
                return Ok(0.0);
            }
            Ok((lf + ln_h(&y.coords, spec.wall) - ln_h(&x.coords, spec.wall)).exp())
        }
    }
}

/// Transition density of the family selected by the horizon.
pub fn transition_density(spec: &ModelSpec, s: f64, start: &Start, t: f64, y: &ChamberPoint) -> Result<f64> {
    g_density(spec, s, start, t, y)
}

/// Default finite-difference step at `x`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Drift of the conditioned SDE at time `t` and position `x`.
///
/// Finite horizon: gradient of `ln N(T - t, x)` by Richardson-extrapolated
/// central differences. Infinite horizon: the closed interaction form.
pub fn drift(spec: &ModelSpec, t: f64, x: &ChamberPoint) -> Result<Vec<f64>> {
    check_point(spec, x)?;
    match spec.horizon {
        Horizon::Infinite => Ok(dyson_drift(&x.coords, spec.wall)),
        Horizon::Finite(big_t) => {
            if !(t < big_t) {
                return Err(Error::TimeOrder(format!("drift needs t < T, got t={t}, T={big_t}")));
            }
            let h = default_fd_step(&x.coords);
            let dist = x.boundary_distance();
            if dist < 10.0 * h {
                return Err(Error::NearBoundary { distance: dist, step: h });
            }
            Ok(survival_log_gradient(big_t - t, &x.coords, spec.wall, h))
        }
    }
}

/// `sum_{j != i} 1/(x_i - x_j)`, plus `1/x_i + sum_{j != i} 1/(x_i + x_j)`
/// with the wall.
pub fn dyson_drift(x: &[f64], wall: bool) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut b = 0.0;
            for j in 0..n {
                if j != i {
                    b += 1.0 / (x[i] - x[j]);
                    if wall {
                        b += 1.0 / (x[i] + x[j]);
                    }
                }
            }
            if wall {
                b += 1.0 / x[i];
            }
            b
        })
        .collect()
}

pub(crate) fn survival_log_gradient(remaining: f64, x: &[f64], wall: bool, h: f64) -> Vec<f64> {
    let n = x.len();
    let mut y = x.to_vec();
    let ln_at = |i: usize, d: f64, y: &mut Vec<f64>| -> f64 {
        let keep = y[i];
        y[i] = keep + d;
        let v = survival_unchecked(remaining, y, wall).ln();
        y[i] = keep;
        v
    };
    (0..n)
        .map(|i| {
            let d1 = (ln_at(i, h, &mut y) - ln_at(i, -h, &mut y)) / (2.0 * h);
            let d2 = (ln_at(i, 0.5 * h, &mut y) - ln_at(i, -0.5 * h, &mut y)) / h;
            (4.0 * d2 - d1) / 3.0
        })
        .collect()
}

/// Relative residual of the product identity between the finite-horizon
/// and infinite-horizon families along `0 = t_0 < t_1 < ... < t_l = T`,
/// starting from the origin.
pub fn imhof_check(spec: &ModelSpec, times: &[f64], points: &[ChamberPoint]) -> Result<f64> {
    let big_t = match spec.horizon {
        Horizon::Finite(v) => v,
        Horizon::Infinite => return Err(Error::InvalidConfig("relation needs a finite horizon".into())),
    };
    if times.len() != points.len() + 1 || points.is_empty() {
        return Err(Error::TimeOrder("need l+1 times for l points".into()));
    }
    if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) || (times[times.len() - 1] - big_t).abs() > 1e-12 * big_t {
        return Err(Error::TimeOrder(format!("times must increase from 0 to T={big_t}: {times:?}")));
    }
    let inf = ModelSpec { horizon: Horizon::Infinite, ..*spec };
    let (mut ln_g, mut ln_p) = (0.0, 0.0);
    let mut start = Start::Origin;
    for (k, y) in points.iter().enumerate() {
        let g = g_density(spec, times[k], &start, times[k + 1], y)?;
        let p = p_density(&inf, times[k], &start, times[k + 1], y)?;
        ln_g += g.ln();
        ln_p += p.ln();
        start = Start::At(y.clone());
    }
    let c = constants(spec.n)?;
    let n = spec.n as f64;
    let last = &points[points.len() - 1].coords;
    let ln_rhs = ln_p
        + if spec.wall {
            c.c_tilde.ln() + 0.5 * n * n * big_t.ln() - ln_abs_h_hat_poly(last)
        } else {
            c.c_bar.ln() + 0.25 * n * (n - 1.0) * big_t.ln() - ln_abs_h_poly(last)
        };
    Ok((ln_g - ln_rhs).exp_m1().abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRatio {
    pub exact: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Survival probability against its small-argument form
/// `h(x/sqrt t)/c_bar` (or `h_hat(x/sqrt t)/c_tilde` with the wall).
pub fn survival_asymptotics(t: f64, x: &ChamberPoint) -> Result<AsymptoticRatio> {
    let exact = survival(t, x)?;
    let c = constants(x.len())?;
    let scaled: Vec<f64> = x.coords.iter().map(|v| v / t.sqrt()).collect();
    let predicted = if x.wall { h_hat_poly(&scaled) / c.c_tilde } else { h_poly(&scaled) / c.c_bar };
    Ok(AsymptoticRatio { exact, predicted, ratio: exact / predicted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeBruijnKernel {
    /// `exp(-(x-y)^2)/sqrt(pi)`
    Gaussian,
    /// `(exp(-(x-y)^2) - exp(-(x+y)^2))/sqrt(pi)` on the positive quadrant.
    WallGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeBruijnResidual {
    pub integral: f64,
    pub pfaffian: f64,
    pub residual: f64,
}

/// Chamber integral of `det[z(x_i, y_j)]` against the Pfaffian of the
/// pairwise integrals.
pub fn de_bruijn_check(n: usize, kernel: DeBruijnKernel, x: &ChamberPoint) -> Result<DeBruijnResidual> {
    if !(1..=3).contains(&n) {
        return Err(Error::TooLarge(format!("chamber quadrature supports N <= 3, got {n}")));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let wall = kernel == DeBruijnKernel::WallGaussian;
    if wall && !x.wall {
        return Err(Error::WallMismatch);
    }
    let xs = x.coords.clone();
    let z = move |a: f64, b: f64| -> f64 {
        let g = (-(a - b) * (a - b)).exp();
        if wall {
            (g - (-(a + b) * (a + b)).exp()) / PI.sqrt()
        } else {
            g / PI.sqrt()
        }
    };
    let reach = 7.0;
    let lo = if wall { 0.0 } else { xs[0] - reach };
    let q = ChamberQuadrature { lo, hi: xs[n - 1] + reach, panel_width: 1.0 };
    let integral = q.integrate(n, &mut |y: &[f64]| {
        let m = Matrix::from_fn(n, |i, j| z(xs[i], y[j]));
        crate::linalg::determinant(&m)
    });
    let pair = |i: usize, j: usize| -> f64 {
        if j == n {
            return if wall { psi(xs[i]) } else { 1.0 };
        }
        if wall {
            psi_hat_unchecked(xs[i], xs[j])
        } else {
            psi((xs[j] - xs[i]) / 2f64.sqrt())
        }
    };
    let dim = n + n % 2;
    let pf = pfaffian(&SkewMatrix::from_upper(dim, pair)?);
    Ok(DeBruijnResidual { integral, pfaffian: pf, residual: (integral - pf).abs() / pf.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::psi_hat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64], wall: bool) -> ChamberPoint {
        ChamberPoint::new(c.to_vec(), wall).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn gauss(t: f64, d: f64) -> f64 {
        (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
    }

    #[test]
    fn chamber_point_validation() {
        assert!(ChamberPoint::new(vec![1.0, 1.0], false).is_err());
        assert!(ChamberPoint::new(vec![-0.1, 1.0], true).is_err());
        assert!(ChamberPoint::new(vec![-0.1, 1.0], false).is_ok());
        assert!(ModelSpec::finite(2, 0.0, false).is_err());
    }

    #[test]
    fn km_density_small_cases() {
        let v = km_density(0.7, &pt(&[0.3], false), &pt(&[-0.4], false)).unwrap();
        assert!(rel(v, gauss(0.7, 0.7)) < 1e-14);
        let w = km_density(0.7, &pt(&[0.3], true), &pt(&[0.0], true)).unwrap();
        assert!(w.abs() < 1e-16);
        let w = km_density(0.7, &pt(&[0.3], true), &pt(&[0.5], true)).unwrap();
        assert!(rel(w, gauss(0.7, 0.2) - gauss(0.7, 0.8)) < 1e-13);
        let (x, y) = ([0.1, 0.5], [0.2, 0.9]);
        let hand = gauss(1.0, x[0] - y[0]) * gauss(1.0, x[1] - y[1]) - gauss(1.0, x[0] - y[1]) * gauss(1.0, x[1] - y[0]);
        let v = km_density(1.0, &pt(&x, false), &pt(&y, false)).unwrap();
        assert!(rel(v, hand) < 1e-14);
        assert!(km_density(0.0, &pt(&x, false), &pt(&y, false)).is_err());
        assert_eq!(km_density(1.0, &pt(&x, false), &pt(&y, true)).unwrap_err(), Error::WallMismatch);
    }

    #[test]
    fn survival_small_cases() {
        assert_eq!(survival(1.0, &pt(&[0.3], false)).unwrap(), 1.0);
        let x = pt(&[0.2, 1.5], false);
        assert_eq!(survival(2.0, &x).unwrap(), psi(1.3 / (2.0 * 2f64.sqrt())));
        let w = pt(&[0.4], true);
        assert!(rel(survival(1.0, &w).unwrap(), psi(0.4 / 2f64.sqrt())) < 1e-15);
        assert!(survival(0.0, &x).is_err());
    }

    #[test]
    fn survival_monotone_in_gaps_and_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for wall in [false, true] {
            for _ in 0..20 {
                let mut x = vec![if wall { rng.gen_range(0.05..1.0) } else { rng.gen_range(-1.0..1.0) }];
                for _ in 0..2 {
                    x.push(x.last().unwrap() + rng.gen_range(0.05..1.5));
                }
                let t = rng.gen_range(0.2..3.0);
                let s0 = survival(t, &pt(&x, wall)).unwrap();
                assert!(s0 > 0.0 && s0 <= 1.0);
                assert!(survival(t * 1.3, &pt(&x, wall)).unwrap() < s0);
                let mut wider = x.clone();
                wider[2] += 0.2;
                assert!(survival(t, &pt(&wider, wall)).unwrap() > s0);
            }
        }
    }

    #[test]
    fn one_walker_densities_reduce_to_gaussian() {
        let spec = ModelSpec::finite(1, 2.0, false).unwrap();
        let x = pt(&[0.3], false);
        let y = pt(&[1.1], false);
        let g = g_density(&spec, 0.5, &Start::At(x.clone()), 1.5, &y).unwrap();
        assert!(rel(g, gauss(1.0, 0.8)) < 1e-14);
        let g0 = g_density(&spec, 0.0, &Start::Origin, 1.5, &y).unwrap();
        assert!(rel(g0, gauss(1.5, 1.1)) < 1e-14);
        let inf = ModelSpec::infinite(1, false).unwrap();
        assert!(rel(p_density(&inf, 0.5, &Start::At(x), 1.5, &y).unwrap(), gauss(1.0, 0.8)) < 1e-14);
        // Bessel-3 law from the origin
        let w = ModelSpec::infinite(1, true).unwrap();
        let t: f64 = 0.8;
        let yv = 0.9;
        let want = (2.0 / PI).sqrt() * t.powf(-1.5) * yv * yv * (-yv * yv / (2.0 * t)).exp();
        assert!(rel(p_density(&w, 0.0, &Start::Origin, t, &pt(&[yv], true)).unwrap(), want) < 1e-14);
    }

    #[test]
    fn time_order_errors() {
        let spec = ModelSpec::finite(2, 1.0, false).unwrap();
        let y = pt(&[0.0, 1.0], false);
        assert!(g_density(&spec, 0.5, &Start::Origin, 0.8, &y).is_err());
        assert!(g_density(&spec, 0.0, &Start::Origin, 1.5, &y).is_err());
        assert!(g_density(&spec, 0.5, &Start::At(y.clone()), 0.5, &y).is_err());
        assert!(drift(&spec, 1.0, &y).is_err());
    }

    #[test]
    fn one_walker_wall_meander_normalizes() {
        let spec = ModelSpec::finite(1, 1.0, true).unwrap();
        for t in [0.3, 1.0] {
            let q = ChamberQuadrature { lo: 0.0, hi: 12.0, panel_width: 0.25 };
            let v = q.integrate(1, &mut |y: &[f64]| g_density(&spec, 0.0, &Start::Origin, t, &pt(y, true)).unwrap_or(0.0));
            assert!((v - 1.0).abs() < 1e-8, "t={t}: {v}");
        }
    }

    #[test]
    fn two_walker_normalization_all_families() {
        let q = ChamberQuadrature { lo: -8.0, hi: 8.0, panel_width: 0.5 };
        let qw = ChamberQuadrature { lo: 0.0, hi: 9.0, panel_width: 0.5 };
        for wall in [false, true] {
            let q = if wall { qw } else { q };
            let g = ModelSpec::finite(2, 1.0, wall).unwrap();
            let p = ModelSpec::infinite(2, wall).unwrap();
            for (spec, t) in [(g, 0.6), (g, 1.0), (p, 0.7)] {
                let v = q.integrate(2, &mut |y: &[f64]| {
                    if y[1] <= y[0] || (wall && y[0] <= 0.0) {
                        return 0.0;
                    }
                    g_density(&spec, 0.0, &Start::Origin, t, &pt(y, wall)).unwrap()
                });
                assert!((v - 1.0).abs() < 1e-6, "wall={wall} {spec:?} t={t}: {v}");
            }
        }
    }

    #[test]
    fn p_semigroup_two_walkers() {
        let spec = ModelSpec::infinite(2, false).unwrap();
        let (s, t) = (0.4, 1.0);
        let y = pt(&[-0.3, 0.9], false);
        let q = ChamberQuadrature { lo: -6.0, hi: 6.0, panel_width: 0.4 };
        let v = q.integrate(2, &mut |x: &[f64]| {
            if x[1] <= x[0] {
                return 0.0;
            }
            let xp = pt(x, false);
            p_density(&spec, 0.0, &Start::Origin, s, &xp).unwrap() * p_density(&spec, s, &Start::At(xp), t, &y).unwrap()
        });
        let want = p_density(&spec, 0.0, &Start::Origin, t, &y).unwrap();
        assert!(rel(v, want) < 1e-5, "{v} vs {want}");
    }

    #[test]
    fn g_approaches_p_for_long_horizons() {
        let x = pt(&[0.0, 0.7, 1.5], false);
        let y = pt(&[-0.2, 0.9, 1.8], false);
        let p = p_density(&ModelSpec::infinite(3, false).unwrap(), 0.2, &Start::At(x.clone()), 1.0, &y).unwrap();
        let mut last = f64::INFINITY;
        for big_t in [2.0, 10.0, 100.0, 1e4] {
            let g = g_density(&ModelSpec::finite(3, big_t, false).unwrap(), 0.2, &Start::At(x.clone()), 1.0, &y).unwrap();
            let d = (g - p).abs();
            assert!(d < last);
            last = d;
        }
        assert!(last / p < 1e-2);
    }

    #[test]
    fn drift_matches_two_walker_closed_form() {
        let big_t = 1.5;
        let spec = ModelSpec::finite(2, big_t, false).unwrap();
        for (t, x) in [(0.2, [0.0, 0.8]), (1.0, [-0.4, 0.1]), (0.0, [1.0, 3.0])] {
            let b = drift(&spec, t, &pt(&x, false)).unwrap();
            let tau = big_t - t;
            let d = x[1] - x[0];
            let want = -(1.0 / (PI * tau).sqrt()) * (-d * d / (4.0 * tau)).exp() / psi(d / (2.0 * tau.sqrt()));
            assert!((b[0] - want).abs() < 1e-6 * want.abs().max(1.0), "{b:?} vs {want}");
            assert!((b[1] + want).abs() < 1e-6 * want.abs().max(1.0));
        }
        let one = ModelSpec::finite(1, 1.0, false).unwrap();
        assert_eq!(drift(&one, 0.3, &pt(&[0.5], false)).unwrap(), vec![0.0]);
        let near = pt(&[0.0, 1e-5], false);
        assert!(matches!(drift(&spec, 0.1, &near), Err(Error::NearBoundary { .. })));
    }

    #[test]
    fn drift_long_horizon_and_infinite_forms() {
        let x = pt(&[0.0, 1.0], false);
        let b = drift(&ModelSpec::finite(2, 1e6, false).unwrap(), 0.0, &x).unwrap();
        assert!((b[0] + 1.0).abs() < 1e-3 && (b[1] - 1.0).abs() < 1e-3, "{b:?}");
        let inf = drift(&ModelSpec::infinite(2, false).unwrap(), 0.0, &x).unwrap();
        assert_eq!(inf, vec![-1.0, 1.0]);
        let w = drift(&ModelSpec::infinite(2, true).unwrap(), 0.0, &pt(&[1.0, 2.0], true)).unwrap();
        assert!((w[0] - (1.0 - 1.0 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((w[1] - (0.5 + 1.0 + 1.0 / 3.0)).abs() < 1e-15);
        // wall finite-horizon drift for N=1 is d/dx ln erf(x/sqrt(2 tau))
        let one = ModelSpec::finite(1, 2.0, true).unwrap();
        let xv = 0.7;
        let tau = 1.5;
        let b = drift(&one, 0.5, &pt(&[xv], true)).unwrap();
        let want = (2.0 / (PI * tau)).sqrt() * (-xv * xv / (2.0 * tau)).exp() / psi(xv / (2.0 * tau).sqrt());
        assert!((b[0] - want).abs() < 1e-7);
    }

    #[test]
    fn imhof_residuals() {
        let spec = ModelSpec::finite(2, 1.0, false).unwrap();
        let r = imhof_check(&spec, &[0.0, 1.0], &[pt(&[-0.3, 0.8], false)]).unwrap();
        assert!(r < 1e-10, "{r}");
        let spec = ModelSpec::finite(3, 2.0, true).unwrap();
        let r = imhof_check(&spec, &[0.0, 0.7, 2.0], &[pt(&[0.2, 0.9, 1.7], true), pt(&[0.5, 1.1, 2.5], true)]).unwrap();
        assert!(r < 1e-8, "{r}");
        let one = ModelSpec::finite(1, 1.5, false).unwrap();
        let r = imhof_check(&one, &[0.0, 0.5, 1.5], &[pt(&[0.4], false), pt(&[-1.0], false)]).unwrap();
        assert!(r < 1e-14);
        assert!(imhof_check(&one, &[0.0, 0.5], &[pt(&[0.4], false)]).is_err());
    }

    #[test]
    fn asymptotic_ratios() {
        let a = survival_asymptotics(1.0, &pt(&[0.0, 0.01], false)).unwrap();
        assert!((a.ratio - 1.0).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.01] {
            let a = survival_asymptotics(1.0, &pt(&[0.0, eps, 2.0 * eps], false)).unwrap();
            let err = (a.ratio - 1.0).abs();
            assert!(err < prev, "{eps}: {a:?}");
            prev = err;
        }
        assert!(prev < 1e-3);
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.05, 0.01] {
            let a = survival_asymptotics(1.0, &pt(&[eps, 2.0 * eps], true)).unwrap();
            let err = (a.ratio - 1.0).abs();
            assert!(err < prev, "{eps}: {a:?}");
            prev = err;
        }
    }

    #[test]
    fn de_bruijn_identities() {
        let r = de_bruijn_check(1, DeBruijnKernel::Gaussian, &pt(&[0.3], false)).unwrap();
        assert!(r.residual < 1e-12);
        let r = de_bruijn_check(1, DeBruijnKernel::WallGaussian, &pt(&[0.3], true)).unwrap();
        assert!(r.residual < 1e-10, "{r:?}");
        let r = de_bruijn_check(2, DeBruijnKernel::Gaussian, &pt(&[0.1, 0.9], false)).unwrap();
        assert!(r.residual < 1e-7, "{r:?}");
        let r = de_bruijn_check(2, DeBruijnKernel::WallGaussian, &pt(&[0.4, 1.1], true)).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!(de_bruijn_check(4, DeBruijnKernel::Gaussian, &pt(&[0.0, 1.0, 2.0, 3.0], false)).is_err());
        assert!(psi_hat(0.4, 1.1).unwrap() > 0.0);
    }
}
