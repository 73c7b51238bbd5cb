//! Scalar kernels and symmetric-function evaluations: the error-function
//! kernel `psi`, the two-rectangle wall kernel `psi_hat`, the Vandermonde-type
//! products, Schur and symplectic characters, Gamma values and the model
//! normalization constants.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{determinant, Matrix};
use crate::quadrature::{adaptive, ChamberQuadrature, GAUSS_CUTOFF};

/// `(2/sqrt(pi)) * int_0^u exp(-v^2) dv`, i.e. erf.
#[inline]
pub fn psi(u: f64) -> f64 {
    libm::erf(u)
}

/// Wall kernel for the Pfaffian survival probability with an absorbing
/// wall at the origin, defined for `0 <= u1 <= u2` as `2/pi` times the
/// difference of two Gaussian integrals over rectangles.
///
/// The inner integral over `v2` is done in closed form with erf, leaving a
/// smooth one-dimensional integral evaluated by GL-32 panels with dyadic
/// refinement.
pub fn psi_hat(u1: f64, u2: f64) -> Result<f64> {
    if !(u1 >= 0.0 && u2 >= u1) || !u2.is_finite() {
        return Err(Error::Domain(format!("psi_hat needs 0 <= u1 <= u2, got ({u1}, {u2})")));
    }
    Ok(psi_hat_unchecked(u1, u2))
}

pub(crate) fn psi_hat_unchecked(u1: f64, u2: f64) -> f64 {
    // Beyond this the factor exp(-v^2) is below 1e-18 relative.
    const VMAX: f64 = 6.5;
    let d = u2 - u1;
    let s = u1 + u2;
    let tol = 1e-14;
    let a = u1.min(VMAX);
    let first = if a > 0.0 {
        adaptive(&mut |v: f64| (-v * v).exp() * (libm::erf(d - v) + libm::erf(d + v)), 0.0, a, tol)
    } else {
        0.0
    };
    let (b0, b1) = (u1.min(VMAX), u2.min(VMAX));
    let second = if b1 > b0 {
        adaptive(&mut |v: f64| (-v * v).exp() * (libm::erf(s - v) - libm::erf(d - v)), b0, b1, tol)
    } else {
        0.0
    };
    (first - second) / PI.sqrt()
}

/// `prod_{i<j} (x_j - x_i)`.
pub fn h_poly(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 0..x.len() {
        for i in 0..j {
            p *= x[j] - x[i];
        }
    }
    p
}

/// `prod_{i<j} (x_j^2 - x_i^2) * prod_i x_i`.
pub fn h_hat_poly(x: &[f64]) -> f64 {
    let mut p: f64 = x.iter().product();
    for j in 0..x.len() {
        for i in 0..j {
            p *= x[j] * x[j] - x[i] * x[i];
        }
    }
    p
}

/// ln|h_N(x)|, for densities at larger N.
pub fn ln_abs_h_poly(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..x.len() {
        for i in 0..j {
            s += (x[j] - x[i]).abs().ln();
        }
    }
    s
}

pub fn ln_abs_h_hat_poly(x: &[f64]) -> f64 {
    let mut s: f64 = x.iter().map(|v| v.abs().ln()).sum();
    for j in 0..x.len() {
        for i in 0..j {
            s += (x[j] * x[j] - x[i] * x[i]).abs().ln();
        }
    }
    s
}

/// Nonincreasing sequence of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain(format!("partition parts must be nonincreasing: {parts:?}")));
        }
        Ok(Partition { parts })
    }

    /// `xi_j(u) = u_{N-j+1} - (N-j)` for a strictly increasing integer
    /// configuration `u` (in units of two lattice sites).
    pub fn from_start(u: &[i64]) -> Result<Self> {
        let n = u.len();
        let parts: Vec<i64> = (1..=n).map(|j| u[n - j] - (n - j) as i64).collect();
        Self::from_i64(parts)
    }

    /// `xi_hat_j(u) = u_{N-j+1} - (N-j+1)`, the wall analogue.
    pub fn from_wall_start(u: &[i64]) -> Result<Self> {
        let n = u.len();
        let parts: Vec<i64> = (1..=n).map(|j| u[n - j] - (n - j + 1) as i64).collect();
        Self::from_i64(parts)
    }

    fn from_i64(parts: Vec<i64>) -> Result<Self> {
        if parts.iter().any(|&p| p < 0) {
            return Err(Error::Domain(format!("negative part in {parts:?}")));
        }
        Self::new(parts.into_iter().map(|p| p as u32).collect())
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn size(&self) -> u64 {
        self.parts.iter().map(|&p| p as u64).sum()
    }

    /// Parts padded with zeros to length `n`.
    fn padded(&self, n: usize) -> Result<Vec<i64>> {
        if self.parts.len() > n {
            return Err(Error::DimensionMismatch { expected: n, got: self.parts.len() });
        }
        let mut v: Vec<i64> = self.parts.iter().map(|&p| p as i64).collect();
        v.resize(n, 0);
        Ok(v)
    }
}

fn check_positive(z: &[f64]) -> Result<()> {
    if z.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("arguments must be positive and finite".into()));
    }
    Ok(())
}

/// Complete homogeneous symmetric polynomials h_0..=h_kmax.
fn complete_homogeneous(z: &[f64], kmax: usize) -> Vec<f64> {
    let mut h = vec![0.0; kmax + 1];
    h[0] = 1.0;
    for &zi in z {
        for k in 1..=kmax {
            h[k] += zi * h[k - 1];
        }
    }
    h
}

fn h_at(h: &[f64], k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        h[k as usize]
    }
}

/// Schur polynomial s_lambda(z) as a ratio of alternants, switching to the
/// divided-difference (Jacobi–Trudi) form near coincident arguments.
pub fn schur(lambda: &Partition, z: &[f64]) -> Result<f64> {
    check_positive(z)?;
    let n = z.len();
    let lam = lambda.padded(n)?;
    if n == 0 {
        return Ok(1.0);
    }
    let zmax = z.iter().cloned().fold(0.0, f64::max);
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_sep = min_sep.min((z[i] - z[j]).abs());
        }
    }
    if min_sep < 1e-6 * zmax {
        return Ok(schur_jacobi_trudi(&lam, z));
    }
    let num = Matrix::from_fn(n, |i, j| z[i].powi((lam[j] + (n - 1 - j) as i64) as i32));
    let den = Matrix::from_fn(n, |i, j| z[i].powi((n - 1 - j) as i32));
    Ok(determinant(&num) / determinant(&den))
}

fn schur_jacobi_trudi(lam: &[i64], z: &[f64]) -> f64 {
    let n = lam.len();
    let kmax = (lam[0] + n as i64).max(0) as usize;
    let h = complete_homogeneous(z, kmax);
    let m = Matrix::from_fn(n, |i, j| h_at(&h, lam[i] - i as i64 + j as i64));
    determinant(&m)
}

/// `s_lambda(1, ..., 1) = prod_{i<j} (lambda_i - lambda_j + j - i)/(j - i)`.
pub fn schur_at_ones(lambda: &Partition, n: usize) -> Result<f64> {
    let lam = lambda.padded(n)?;
    let mut p = 1.0;
    for i in 0..n {
        for j in (i + 1)..n {
            p *= (lam[i] - lam[j] + (j - i) as i64) as f64 / (j - i) as f64;
        }
    }
    Ok(p)
}

/// Character of the symplectic Lie algebra for `lambda`, as a ratio of
/// antisymmetrized alternants, with the symplectic Jacobi–Trudi form used
/// near the singular set of the denominator.
pub fn sp_character(lambda: &Partition, z: &[f64]) -> Result<f64> {
    check_positive(z)?;
    let n = z.len();
    let lam = lambda.padded(n)?;
    if n == 0 {
        return Ok(1.0);
    }
    let w: Vec<f64> = z.iter().map(|&v| v + 1.0 / v).collect();
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let mut min_sep = w.iter().map(|&wi| wi - 2.0).fold(f64::INFINITY, f64::min);
    for i in 0..n {
        for j in (i + 1)..n {
            min_sep = min_sep.min((w[i] - w[j]).abs());
        }
    }
    if min_sep < 1e-6 * wmax {
        return Ok(sp_jacobi_trudi(&lam, z));
    }
    let ell: Vec<i32> = (0..n).map(|j| (lam[j] + (n - j) as i64) as i32).collect();
    let num = Matrix::from_fn(n, |i, j| z[i].powi(ell[j]) - z[i].powi(-ell[j]));
    let den = Matrix::from_fn(n, |i, j| {
        let m = (n - j) as i32;
        z[i].powi(m) - z[i].powi(-m)
    });
    Ok(determinant(&num) / determinant(&den))
}

fn sp_jacobi_trudi(lam: &[i64], z: &[f64]) -> f64 {
    let n = lam.len();
    let mut vars: Vec<f64> = z.to_vec();
    vars.extend(z.iter().map(|v| 1.0 / v));
    let kmax = (lam[0] + n as i64 + 1).max(0) as usize;
    let h = complete_homogeneous(&vars, kmax);
    let m = Matrix::from_fn(n, |i, j| {
        let (i, j) = (i as i64, j as i64);
        h_at(&h, lam[i as usize] - i + j) + h_at(&h, lam[i as usize] - i - j)
    });
    0.5 * determinant(&m)
}

/// Principal specialization of the symplectic character:
/// `prod_{i<j} (l_j^2 - l_i^2)/(m_j^2 - m_i^2) * prod_j l_j/m_j`
/// with `l_j = lambda_j + N - j + 1`, `m_j = N - j + 1`.
pub fn sp_at_ones(lambda: &Partition, n: usize) -> Result<f64> {
    let lam = lambda.padded(n)?;
    let ell: Vec<f64> = (0..n).map(|j| (lam[j] + (n - j) as i64) as f64).collect();
    let m: Vec<f64> = (0..n).map(|j| (n - j) as f64).collect();
    let mut p = 1.0;
    for i in 0..n {
        for j in (i + 1)..n {
            p *= (ell[j] * ell[j] - ell[i] * ell[i]) / (m[j] * m[j] - m[i] * m[i]);
        }
        p *= ell[i] / m[i];
    }
    Ok(p)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Gamma(x) for x > 0. Integers and half-integers are summed exactly.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs x > 0");
    let twice = 2.0 * x;
    if twice.fract() == 0.0 && twice <= 400.0 {
        let k = twice as u64;
        if k.is_multiple_of(2) {
            // Gamma(n) = (n-1)!
            return (1..(k / 2)).map(|i| (i as f64).ln()).sum();
        }
        // Gamma(n + 1/2) = sqrt(pi) * prod_{i=1}^{n} (i - 1/2)
        let n = (k - 1) / 2;
        return 0.5 * PI.ln() + (1..=n).map(|i| (i as f64 - 0.5).ln()).sum::<f64>();
    }
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Normalization constants of the transition densities for N walkers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelConstants {
    pub n: usize,
    /// `2^{-N/2} / prod Gamma(j/2)`
    pub c: f64,
    /// `(2 pi)^{-N/2} / prod Gamma(j)`
    pub c_prime: f64,
    /// `c / c_prime`
    pub c_bar: f64,
    /// `1 / prod Gamma(j)`
    pub c_hat: f64,
    /// `(2/pi)^{N/2} / prod Gamma(2j)`
    pub c_hat_prime: f64,
    /// `c_hat / c_hat_prime`
    pub c_tilde: f64,
}

pub fn constants(n: usize) -> Result<ModelConstants> {
    if n < 1 {
        return Err(Error::Domain("walker count must be at least 1".into()));
    }
    let nf = n as f64;
    let js = || (1..=n).map(|j| j as f64);
    let ln_c = -0.5 * nf * 2f64.ln() - js().map(|j| ln_gamma(j / 2.0)).sum::<f64>();
    let ln_cp = -0.5 * nf * (2.0 * PI).ln() - js().map(ln_gamma).sum::<f64>();
    let ln_ch = -js().map(ln_gamma).sum::<f64>();
    let ln_chp = 0.5 * nf * (2.0 / PI).ln() - js().map(|j| ln_gamma(2.0 * j)).sum::<f64>();
    Ok(ModelConstants {
        n,
        c: ln_c.exp(),
        c_prime: ln_cp.exp(),
        c_bar: (ln_c - ln_cp).exp(),
        c_hat: ln_ch.exp(),
        c_hat_prime: ln_chp.exp(),
        c_tilde: (ln_ch - ln_chp).exp(),
    })
}

/// `pi^{N/2} prod Gamma(j)/Gamma(j/2)`, the closed form of `c_bar`.
pub fn c_bar_product_form(n: usize) -> f64 {
    let ln = 0.5 * n as f64 * PI.ln() + (1..=n).map(|j| ln_gamma(j as f64) - ln_gamma(j as f64 / 2.0)).sum::<f64>();
    ln.exp()
}

/// `(pi/2)^{N/2} prod Gamma(2j)/Gamma(j)`, the closed form of `c_tilde`.
pub fn c_tilde_product_form(n: usize) -> f64 {
    let ln = 0.5 * n as f64 * (PI / 2.0).ln()
        + (1..=n).map(|j| ln_gamma(2.0 * j as f64) - ln_gamma(j as f64)).sum::<f64>();
    ln.exp()
}

/// Weight family of the Gaussian (Mehta) integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MehtaWeight {
    /// `int exp(-a|u|^2) prod |u_j - u_i|^{2 gamma}`
    Plain,
    /// `int exp(-|u|^2/2) prod |u_j^2 - u_i^2|^{2 gamma} prod |u_j|^{2a - 1}`
    SquaredDiffAbs,
}

/// Closed-form value of the Mehta integral.
pub fn mehta_integral(n: usize, gamma_exp: f64, a: f64, weight: MehtaWeight) -> Result<f64> {
    if n < 1 || !(gamma_exp > 0.0) || !(a > 0.0) {
        return Err(Error::Domain(format!("unsupported Mehta parameters N={n}, gamma={gamma_exp}, a={a}")));
    }
    let nf = n as f64;
    let g = gamma_exp;
    let ln = match weight {
        MehtaWeight::Plain => {
            0.5 * nf * (2.0 * PI).ln() - 0.5 * nf * (g * (nf - 1.0) + 1.0) * (2.0 * a).ln()
                + (1..=n).map(|i| ln_gamma(1.0 + i as f64 * g) - ln_gamma(1.0 + g)).sum::<f64>()
        }
        MehtaWeight::SquaredDiffAbs => {
            (a * nf + g * nf * (nf - 1.0)) * 2f64.ln()
                + (1..=n)
                    .map(|j| {
                        let j = j as f64;
                        ln_gamma(1.0 + j * g) + ln_gamma(a + g * (j - 1.0)) - ln_gamma(1.0 + g)
                    })
                    .sum::<f64>()
        }
    };
    Ok(ln.exp())
}

/// Numerical evaluation of the same integral by nested quadrature over the
/// ordered region (and the positive orthant for the squared-difference
/// weight), multiplied by the symmetry factor.
pub fn mehta_integral_quadrature(n: usize, gamma_exp: f64, a: f64, weight: MehtaWeight) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::TooLarge(format!("Mehta quadrature supports N <= 3, got {n}")));
    }
    if !(gamma_exp > 0.0) || !(a > 0.0) {
        return Err(Error::Domain("gamma and a must be positive".into()));
    }
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    match weight {
        MehtaWeight::Plain => {
            let sigma = (1.0 / (2.0 * a)).sqrt();
            let r = sigma * (GAUSS_CUTOFF + 2.0 * n as f64);
            let q = ChamberQuadrature { lo: -r, hi: r, panel_width: sigma };
            let v = q.integrate(n, &mut |u: &[f64]| {
                let sq: f64 = u.iter().map(|v| v * v).sum();
                let mut p = (-a * sq).exp();
                for j in 0..n {
                    for i in 0..j {
                        p *= (u[j] - u[i]).abs().powf(2.0 * gamma_exp);
                    }
                }
                p
            });
            Ok(nfact * v)
        }
        MehtaWeight::SquaredDiffAbs => {
            let hi = GAUSS_CUTOFF + 3.0 * n as f64 + 2.0 * a;
            let q = ChamberQuadrature { lo: 0.0, hi, panel_width: 1.0 };
            let v = q.integrate(n, &mut |u: &[f64]| {
                let sq: f64 = u.iter().map(|v| v * v).sum();
                let mut p = (-0.5 * sq).exp();
                for j in 0..n {
                    for i in 0..j {
                        p *= (u[j] * u[j] - u[i] * u[i]).abs().powf(2.0 * gamma_exp);
                    }
                    p *= u[j].abs().powf(2.0 * a - 1.0);
                }
                p
            });
            Ok(2f64.powi(n as i32) * nfact * v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn psi_basic_values() {
        assert_eq!(psi(0.0), 0.0);
        assert!((psi(8.0) - 1.0).abs() < 1e-15);
        let q = adaptive(&mut |v: f64| (-v * v).exp(), 0.0, 0.5, 1e-15) * 2.0 / PI.sqrt();
        assert!((psi(0.5) - q).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn psi_odd_monotone_bounded(a in -6.0f64..6.0, b in -6.0f64..6.0) {
            prop_assert!((psi(a) + psi(-a)).abs() < 1e-15);
            prop_assert!(psi(a).abs() <= 1.0);
            if a < b { prop_assert!(psi(a) <= psi(b)); }
        }
    }

    // Independent route: G((a1,a2],(b1,b2]) as a tensor GL double integral
    // of exp(-y1^2 - (y1 - y2)^2)/pi, combined over the three rectangles.
    fn g_rect(a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
        let rule = crate::quadrature::GaussLegendre::new(48);
        let panels = 16;
        crate::quadrature::composite(&rule, a1, a2, panels, |y1| {
            crate::quadrature::composite(&rule, b1, b2, panels, |y2| {
                (-y1 * y1 - (y1 - y2) * (y1 - y2)).exp() / PI
            })
        })
    }

    fn g_combination(xi: f64, xj: f64) -> f64 {
        g_rect(-xi, xi, xi - xj, xj - xi) - g_rect(xi, xj, xj - xi, xi + xj) - g_rect(-xj, -xi, -xi - xj, xi - xj)
    }

    #[test]
    fn psi_hat_degenerate_domains() {
        assert_eq!(psi_hat(0.0, 0.0).unwrap(), 0.0);
        assert!(psi_hat(0.0, 1.3).unwrap().abs() < 1e-15);
        assert!(psi_hat(0.8, 0.8).unwrap().abs() < 1e-15);
        assert!(psi_hat(1.0, 0.5).is_err());
        assert!(psi_hat(-0.1, 0.5).is_err());
        assert!((psi_hat(8.0, 20.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_hat_matches_g_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..12 {
            let a: f64 = rng.gen_range(0.0..2.5);
            let b: f64 = a + rng.gen_range(0.0..2.5);
            let want = g_combination(a, b);
            let got = psi_hat(a, b).unwrap();
            assert!((got - want).abs() < 1e-8, "({a},{b}): {got} vs {want}");
        }
    }

    #[test]
    fn psi_hat_matches_monte_carlo() {
        let (u1, u2) = (0.7f64, 1.3f64);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 1_000_000;
        // Uniform sampling over the two rectangles with signed areas.
        let area1 = u1 * 2.0 * (u2 - u1);
        let area2 = (u2 - u1) * 2.0 * u1;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v1 = rng.gen_range(0.0..u1);
            let v2 = rng.gen_range((u1 - u2)..(u2 - u1));
            let w1 = rng.gen_range(u1..u2);
            let w2 = rng.gen_range((u2 - u1)..(u1 + u2));
            let f = |a: f64, b: f64| (-a * a - (a - b) * (a - b)).exp();
            let x = 2.0 / PI * (area1 * f(v1, v2) - area2 * f(w1, w2));
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = psi_hat(u1, u2).unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn vandermonde_products() {
        assert_eq!(h_poly(&[1.0, 3.0]), 2.0);
        assert_eq!(h_hat_poly(&[1.0, 2.0]), 6.0);
        assert_eq!(h_poly(&[4.2]), 1.0);
        assert!((ln_abs_h_poly(&[0.0, 1.0, 3.0]) - (6.0f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn schur_small_cases() {
        let l = Partition::new(vec![1, 0]).unwrap();
        assert!((schur(&l, &[2.0, 5.0]).unwrap() - 7.0).abs() < 1e-12);
        let l = Partition::new(vec![2, 1]).unwrap();
        // x^2 y + x y^2 at (1,1) is 2, and matches the hook-content product.
        assert!((schur(&l, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((schur_at_ones(&l, 2).unwrap() - 2.0).abs() < 1e-15);
        let (x, y) = (1.3, 0.4);
        assert!((schur(&l, &[x, y]).unwrap() - (x * x * y + x * y * y)).abs() < 1e-12);
        assert!(schur(&l, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn schur_principal_specialization() {
        for parts in [vec![3, 1, 0], vec![4, 4, 2], vec![5, 2, 1, 0], vec![0, 0, 0]] {
            let n = parts.len();
            let l = Partition::new(parts).unwrap();
            let ones = vec![1.0; n];
            let got = schur(&l, &ones).unwrap();
            let want = schur_at_ones(&l, n).unwrap();
            assert!(rel(got, want) < 1e-10, "{got} vs {want}");
            // near-confluent ratio path agrees with the limit
            let near: Vec<f64> = (0..n).map(|i| 1.0 + 1e-4 * i as f64).collect();
            assert!(rel(schur(&l, &near).unwrap(), want) < 1e-2);
        }
    }

    proptest! {
        #[test]
        fn schur_symmetric_and_homogeneous(
            a in 0.2f64..2.0, b in 0.2f64..2.0, c in 0.2f64..2.0, t in 0.3f64..3.0,
            l1 in 0u32..5, l2 in 0u32..5, l3 in 0u32..5,
        ) {
            let mut parts = vec![l1, l2, l3];
            parts.sort_unstable_by(|x, y| y.cmp(x));
            let l = Partition::new(parts).unwrap();
            let s1 = schur(&l, &[a, b, c]).unwrap();
            let s2 = schur(&l, &[c, a, b]).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-8 * s1.abs().max(1e-12));
            let st = schur(&l, &[t, t, t]).unwrap();
            let want = t.powi(l.size() as i32) * schur_at_ones(&l, 3).unwrap();
            prop_assert!((st - want).abs() <= 1e-10 * want.abs());
        }

        #[test]
        fn sp_inversion_invariance(a in 0.3f64..2.5, b in 0.3f64..2.5, l1 in 0u32..4, l2 in 0u32..4) {
            let mut parts = vec![l1, l2];
            parts.sort_unstable_by(|x, y| y.cmp(x));
            let l = Partition::new(parts).unwrap();
            let s1 = sp_character(&l, &[a, b]).unwrap();
            let s2 = sp_character(&l, &[1.0 / a, b]).unwrap();
            let s3 = sp_character(&l, &[a, 1.0 / b]).unwrap();
            prop_assert!((s1 - s2).abs() <= 1e-8 * s1.abs().max(1e-12));
            prop_assert!((s1 - s3).abs() <= 1e-8 * s1.abs().max(1e-12));
        }
    }

    #[test]
    fn sp_small_cases() {
        let l = Partition::new(vec![1]).unwrap();
        let z = 1.7;
        assert!((sp_character(&l, &[z]).unwrap() - (z + 1.0 / z)).abs() < 1e-12);
        assert!((sp_character(&l, &[1.0]).unwrap() - 2.0).abs() < 1e-12);
        // Jacobi–Trudi form agrees with the alternant ratio at generic points.
        for parts in [vec![2, 1], vec![3, 0], vec![1, 1], vec![4, 2]] {
            let l = Partition::new(parts).unwrap();
            let lam: Vec<i64> = l.padded(2).unwrap();
            let z = [1.4, 0.6];
            let a = sp_character(&l, &z).unwrap();
            let b = sp_jacobi_trudi(&lam, &z);
            assert!(rel(a, b) < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn sp_principal_specialization_and_confluent_limit() {
        for parts in [vec![1, 0], vec![2, 1, 0], vec![3, 3, 1], vec![0, 0]] {
            let n = parts.len();
            let l = Partition::new(parts).unwrap();
            let want = sp_at_ones(&l, n).unwrap();
            let got = sp_character(&l, &vec![1.0; n]).unwrap();
            assert!(rel(got, want) < 1e-10, "{got} vs {want}");
        }
        let l = Partition::new(vec![1, 0]).unwrap();
        let z = 1.3;
        let limit = sp_character(&l, &[z, z]).unwrap();
        let perturbed = sp_character(&l, &[z, z * (1.0 + 1e-3)]).unwrap();
        let perturbed2 = sp_character(&l, &[z, z * (1.0 - 1e-3)]).unwrap();
        assert!((limit - 0.5 * (perturbed + perturbed2)).abs() < 1e-5);
    }

    #[test]
    fn wall_partition_specialization_gives_h_hat() {
        // sp_{xi_hat(u)}(1..1) = h_hat(u) / prod Gamma(2j)
        let u = [1i64, 3, 4];
        let l = Partition::from_wall_start(&u).unwrap();
        let uf: Vec<f64> = u.iter().map(|&v| v as f64).collect();
        let denom: f64 = (1..=3).map(|j| gamma(2.0 * j as f64)).product();
        assert!(rel(sp_at_ones(&l, 3).unwrap(), h_hat_poly(&uf) / denom) < 1e-12);
        let l = Partition::from_start(&u).unwrap();
        let denom: f64 = (1..=3).map(|j| gamma(j as f64)).product();
        assert!(rel(schur_at_ones(&l, 3).unwrap(), h_poly(&uf) / denom) < 1e-12);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-15);
        assert!(rel(gamma(3.5), 15.0 / 8.0 * PI.sqrt()) < 1e-14);
        // Lanczos branch
        assert!(rel(gamma(0.3), 2.991_568_987_687_590_6) < 1e-13);
        assert!(rel(gamma(4.7), 15.431_411_600_047_436) < 1e-13);
    }

    #[test]
    fn constants_small_n() {
        let c1 = constants(1).unwrap();
        let inv = 1.0 / (2.0 * PI).sqrt();
        assert!(rel(c1.c, inv) < 1e-15);
        assert!(rel(c1.c_prime, inv) < 1e-15);
        assert!(rel(c1.c_bar, 1.0) < 1e-15);
        assert!(rel(c1.c_hat_prime, (2.0 / PI).sqrt()) < 1e-15);
        assert!(rel(c1.c_tilde, (PI / 2.0).sqrt()) < 1e-15);
        let c2 = constants(2).unwrap();
        assert!(rel(c2.c_bar, PI.sqrt()) < 1e-14);
        assert!(constants(0).is_err());
    }

    #[test]
    fn constants_consistency() {
        for n in 1..=8 {
            let c = constants(n).unwrap();
            assert!(rel(c.c_bar, c.c / c.c_prime) < 1e-12);
            assert!(rel(c.c_bar, c_bar_product_form(n)) < 1e-12);
            assert!(rel(c.c_tilde, c.c_hat / c.c_hat_prime) < 1e-12);
            assert!(rel(c.c_tilde, c_tilde_product_form(n)) < 1e-12);
        }
    }

    #[test]
    fn mehta_one_dimensional() {
        let a = 0.7;
        let cf = mehta_integral(1, 0.5, a, MehtaWeight::Plain).unwrap();
        assert!(rel(cf, (PI / a).sqrt()) < 1e-14);
        let cf = mehta_integral(1, 0.9, 1.5, MehtaWeight::SquaredDiffAbs).unwrap();
        assert!(rel(cf, (2.0 * PI).sqrt()) < 1e-14);
        let q = mehta_integral_quadrature(1, 0.9, 1.5, MehtaWeight::SquaredDiffAbs).unwrap();
        assert!(rel(q, cf) < 1e-10);
    }

    #[test]
    fn mehta_two_dimensional_quadrature() {
        let cf = mehta_integral(2, 0.5, 0.5, MehtaWeight::Plain).unwrap();
        let q = mehta_integral_quadrature(2, 0.5, 0.5, MehtaWeight::Plain).unwrap();
        assert!(rel(q, cf) < 1e-6, "{q} vs {cf}");
        assert!(mehta_integral(2, -1.0, 0.5, MehtaWeight::Plain).is_err());
        assert!(mehta_integral_quadrature(4, 0.5, 0.5, MehtaWeight::Plain).is_err());
    }
}
