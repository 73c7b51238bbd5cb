//! Exact counts and probabilities of vicious walks.
//!
//! Counts come from binomial determinants evaluated with Bareiss elimination
//! over big integers. A dynamic program over joint configurations serves as
//! an independent oracle for small instances.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{bareiss_determinant, pfaffian, pfaffian_exact, SkewMatrix};
use crate::special::{constants, h_hat_poly, h_poly, ln_gamma};

/// Walker positions on the even sublattice, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LatticeConfig {
    positions: Vec<i64>,
    wall: bool,
}

impl LatticeConfig {
    pub fn new(positions: Vec<i64>, wall: bool) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidConfig("need at least one walker".into()));
        }
        if positions.iter().any(|p| p.rem_euclid(2) != 0) {
            return Err(Error::InvalidConfig(format!("positions must be even: {positions:?}")));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(format!("positions must be strictly increasing: {positions:?}")));
        }
        if wall && positions[0] < 0 {
            return Err(Error::InvalidConfig("wall configuration must be nonnegative".into()));
        }
        Ok(LatticeConfig { positions, wall })
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn wall(&self) -> bool {
        self.wall
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCount {
    pub value: BigInt,
    pub steps: u64,
    pub n_walkers: usize,
}

impl Serialize for WalkCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("WalkCount", 3)?;
        st.serialize_field("count", &self.value.to_string())?;
        st.serialize_field("steps", &self.steps)?;
        st.serialize_field("n_walkers", &self.n_walkers)?;
        st.end()
    }
}

/// Exact rational probability together with its nearest float.
#[derive(Debug, Clone, PartialEq)]
pub struct Probability {
    pub exact: BigRational,
    pub value: f64,
}

impl Probability {
    fn from_count(count: BigInt, steps: u64, n: usize) -> Self {
        let den = BigInt::one() << (steps as usize * n);
        let exact = BigRational::new(count, den);
        let value = ratio_to_f64(&exact);
        Probability { exact, value }
    }
}

impl Serialize for Probability {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Probability", 3)?;
        st.serialize_field("num", &self.exact.numer().to_string())?;
        st.serialize_field("den", &self.exact.denom().to_string())?;
        st.serialize_field("float", &self.value)?;
        st.end()
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Row m of Pascal's triangle.
fn binomial_row(m: u64) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(m as usize + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 1..=m {
        c = c * BigInt::from(m - k + 1) / BigInt::from(k);
        row.push(c.clone());
    }
    row
}

fn binom_at(row: &[BigInt], twice_k: i64) -> BigInt {
    // twice_k = m + a - b; only even values in [0, 2m] contribute.
    if twice_k.rem_euclid(2) != 0 {
        return BigInt::zero();
    }
    let k = twice_k / 2;
    if k < 0 || k as usize >= row.len() {
        BigInt::zero()
    } else {
        row[k as usize].clone()
    }
}

/// Number of single-walker paths from `a` to `b` in m steps, absorbed at -1
/// when `wall` is set.
fn kernel(row: &[BigInt], m: i64, a: i64, b: i64, wall: bool) -> BigInt {
    if wall {
        if b < 0 {
            return BigInt::zero();
        }
        binom_at(row, m + a - b) - binom_at(row, m + a + b + 2)
    } else {
        binom_at(row, m + a - b)
    }
}

fn check_steps(m: i64) -> Result<u64> {
    if m < 0 {
        Err(Error::NegativeSteps(m))
    } else {
        Ok(m as u64)
    }
}

fn count_with_row(row: &[BigInt], m: u64, u: &LatticeConfig, v: &[i64]) -> BigInt {
    let n = u.len();
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return BigInt::zero();
    }
    let mi = m as i64;
    let rows: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| kernel(row, mi, u.positions[j], v[i], u.wall)).collect())
        .collect();
    bareiss_determinant(&rows)
}

/// Number of N-tuples of nonintersecting m-step paths from `u` to `v`.
///
/// `v` is an arbitrary integer tuple; infeasible endpoints (wrong parity,
/// out of reach, not strictly increasing, or below the wall) give 0.
pub fn count_paths(m: i64, u: &LatticeConfig, v: &[i64]) -> Result<WalkCount> {
    let m = check_steps(m)?;
    if v.len() != u.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    let row = binomial_row(m);
    let value = count_with_row(&row, m, u, v);
    debug_assert!(!value.is_negative());
    Ok(WalkCount { value, steps: m, n_walkers: u.len() })
}

/// As [`count_paths`] with both endpoints validated configurations.
pub fn count_paths_between(m: i64, u: &LatticeConfig, v: &LatticeConfig) -> Result<WalkCount> {
    if u.wall != v.wall {
        return Err(Error::WallMismatch);
    }
    count_paths(m, u, &v.positions)
}

/// `count_paths / 2^{mN}`.
pub fn walk_probability(m: i64, u: &LatticeConfig, v: &[i64]) -> Result<Probability> {
    let c = count_paths(m, u, v)?;
    Ok(Probability::from_count(c.value, c.steps, c.n_walkers))
}

/// Visits every strictly increasing, parity-consistent endpoint tuple
/// inside the reachability box of `u` after m steps.
fn for_each_endpoint(m: u64, u: &LatticeConfig, mut f: impl FnMut(&[i64])) {
    let n = u.len();
    let mi = m as i64;
    let lo: Vec<i64> = u.positions.iter().map(|&p| if u.wall { (p - mi).max(mi & 1) } else { p - mi }).collect();
    let hi: Vec<i64> = u.positions.iter().map(|&p| p + mi).collect();
    let mut v = vec![0i64; n];
    fn rec(k: usize, prev: Option<i64>, lo: &[i64], hi: &[i64], v: &mut Vec<i64>, f: &mut impl FnMut(&[i64])) {
        if k == v.len() {
            f(v);
            return;
        }
        let mut start = lo[k];
        if let Some(p) = prev {
            start = start.max(p + 2);
        }
        let mut x = start;
        while x <= hi[k] {
            v[k] = x;
            rec(k + 1, Some(x), lo, hi, v, f);
            x += 2;
        }
    }
    rec(0, None, &lo, &hi, &mut v, &mut f);
}

/// Probability that no two walkers meet (and none crosses the wall) in m
/// steps, by summing the determinant over all reachable endpoints.
pub fn survival_probability(m: i64, u: &LatticeConfig) -> Result<Probability> {
    let m = check_steps(m)?;
    let row = binomial_row(m);
    let mut total = BigInt::zero();
    for_each_endpoint(m, u, |v| total += count_with_row(&row, m, u, v));
    Ok(Probability::from_count(total, m, u.len()))
}

/// Same value as [`survival_probability`], computed as the Pfaffian of the
/// summed pair matrix `Q_ij = sum_{y<z} a_i(y) a_j(z) - a_i(z) a_j(y)`
/// (bordered by `sum_y a_i(y)` for odd N). Cost is O(N^2 m).
pub fn survival_probability_pfaffian(m: i64, u: &LatticeConfig) -> Result<Probability> {
    let m = check_steps(m)?;
    let row = binomial_row(m);
    let (ys, a) = endpoint_kernels(m, u, |y, x| kernel(&row, m as i64, x, y, u.wall));
    let q = pair_matrix(&ys, &a, BigInt::zero(), |x, y| x * y);
    Ok(Probability::from_count(pfaffian_exact(&q), m, u.len()))
}

/// Endpoint support (one parity class) and kernel values a_i(y).
fn endpoint_kernels<T>(m: u64, u: &LatticeConfig, f: impl Fn(i64, i64) -> T) -> (Vec<i64>, Vec<Vec<T>>) {
    let mi = m as i64;
    let first = u.positions[0] - mi;
    let mut lo = first;
    if u.wall && lo < 0 {
        lo = first.rem_euclid(2);
    }
    let hi = u.positions[u.len() - 1] + mi;
    let ys: Vec<i64> = (0..).map(|k| lo + 2 * k).take_while(|&y| y <= hi).collect();
    let a = u.positions.iter().map(|&x| ys.iter().map(|&y| f(y, x)).collect()).collect();
    (ys, a)
}

fn pair_matrix<T>(ys: &[i64], a: &[Vec<T>], zero: T, mul: impl Fn(&T, &T) -> T) -> Vec<Vec<T>>
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Neg<Output = T>,
{
    let n = a.len();
    let dim = n + n % 2;
    let mut q = vec![vec![zero.clone(); dim]; dim];
    for i in 0..n {
        for j in (i + 1)..n {
            // sum_{y<z} a_i(y) a_j(z) - a_i(z) a_j(y) via running prefix sums
            let (mut pi, mut pj) = (zero.clone(), zero.clone());
            let mut acc = zero.clone();
            for k in 0..ys.len() {
                acc = acc + mul(&pi, &a[j][k]) - mul(&pj, &a[i][k]);
                pi = pi + a[i][k].clone();
                pj = pj + a[j][k].clone();
            }
            q[j][i] = -acc.clone();
            q[i][j] = acc;
        }
    }
    if n % 2 == 1 {
        for i in 0..n {
            let s = a[i].iter().fold(zero.clone(), |s, v| s + v.clone());
            q[n][i] = -s.clone();
            q[i][n] = s;
        }
    }
    q
}

/// All endpoint counts by dynamic programming over joint configurations.
pub fn oracle_counts_dp(m: i64, u: &LatticeConfig) -> Result<BTreeMap<Vec<i64>, BigInt>> {
    let m = check_steps(m)?;
    if u.len() > 4 || m > 12 {
        return Err(Error::TooLarge(format!("oracle supports N <= 4, m <= 12 (got N={}, m={m})", u.len())));
    }
    let n = u.len();
    let mut states: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
    states.insert(u.positions.clone(), 1);
    for _ in 0..m {
        let mut next: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
        for (cfg, &c) in &states {
            for mask in 0u32..(1 << n) {
                let moved: Vec<i64> = (0..n).map(|k| cfg[k] + if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
                if moved.windows(2).any(|w| w[1] <= w[0]) || (u.wall && moved[0] < 0) {
                    continue;
                }
                *next.entry(moved).or_insert(0) += c;
            }
        }
        states = next;
    }
    Ok(states.into_iter().map(|(k, v)| (k, BigInt::from(v))).collect())
}

pub fn oracle_count_dp(m: i64, u: &LatticeConfig, v: &[i64]) -> Result<WalkCount> {
    let all = oracle_counts_dp(m, u)?;
    Ok(WalkCount { value: all.get(v).cloned().unwrap_or_default(), steps: m as u64, n_walkers: u.len() })
}

/// `2 floor(x/2)`, the even lattice point below x.
pub fn phi(x: f64) -> i64 {
    2 * (x / 2.0).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SurvivalMode {
    Exact { probability: Probability },
    /// Float Pfaffian; `condition` is the largest entry of the pair matrix
    /// over the result, a cancellation indicator.
    Float { condition: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledSurvival {
    pub scale: u32,
    pub time: f64,
    pub steps: u64,
    pub value: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub mode: SurvivalMode,
}

/// Largest m evaluated in exact arithmetic by default.
pub const EXACT_STEP_BUDGET: u64 = 1 << 14;

pub fn scaled_survival(scale: u32, t: f64, u: &LatticeConfig) -> Result<ScaledSurvival> {
    scaled_survival_with_budget(scale, t, u, EXACT_STEP_BUDGET)
}

/// Survival after `m = phi(L^2 t)` steps together with the small-argument
/// Brownian prediction `h(u/(L sqrt t))/c_bar`. For the wall the walkers are
/// absorbed at -1, so the prediction uses the distance `u + 1` to it.
pub fn scaled_survival_with_budget(scale: u32, t: f64, u: &LatticeConfig, budget: u64) -> Result<ScaledSurvival> {
    if scale < 1 {
        return Err(Error::InvalidConfig("scale L must be at least 1".into()));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::TimeOrder(format!("t must be positive, got {t}")));
    }
    let l = scale as f64;
    let m = phi(l * l * t);
    let n = u.len();
    let (value, mode) = if (m as u64) <= budget {
        let p = survival_probability_pfaffian(m, u)?;
        (p.value, SurvivalMode::Exact { probability: p })
    } else {
        let (v, condition) = survival_float(m as u64, u)?;
        (v, SurvivalMode::Float { condition })
    };
    let c = constants(n)?;
    let s = l * t.sqrt();
    let predicted = if u.wall {
        let x: Vec<f64> = u.positions.iter().map(|&p| (p + 1) as f64 / s).collect();
        h_hat_poly(&x) / c.c_tilde
    } else {
        let x: Vec<f64> = u.positions.iter().map(|&p| p as f64 / s).collect();
        h_poly(&x) / c.c_bar
    };
    Ok(ScaledSurvival { scale, time: t, steps: m as u64, value, predicted, ratio: value / predicted, mode })
}

fn survival_float(m: u64, u: &LatticeConfig) -> Result<(f64, f64)> {
    let mf = m as f64;
    let ln_pow = mf * 2f64.ln();
    let ln_m1 = ln_gamma(mf + 1.0);
    let binom_prob = |twice_k: i64| -> f64 {
        if twice_k.rem_euclid(2) != 0 {
            return 0.0;
        }
        let k = twice_k / 2;
        if k < 0 || k > m as i64 {
            return 0.0;
        }
        let k = k as f64;
        (ln_m1 - ln_gamma(k + 1.0) - ln_gamma(mf - k + 1.0) - ln_pow).exp()
    };
    let mi = m as i64;
    let wall = u.wall;
    let (ys, a) = endpoint_kernels(m, u, |y, x| {
        if wall {
            binom_prob(mi + x - y) - binom_prob(mi + x + y + 2)
        } else {
            binom_prob(mi + x - y)
        }
    });
    let q = pair_matrix(&ys, &a, 0.0, |x, y| x * y);
    let dim = q.len();
    let skew = SkewMatrix::from_upper(dim, |i, j| q[i][j])?;
    let v = pfaffian(&skew);
    let qmax = q.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    Ok((v, qmax / v.abs().max(f64::MIN_POSITIVE)))
}

/// Largest number of endpoint tuples [`endpoint_law_float`] will visit.
pub const ENDPOINT_LAW_BUDGET: u64 = 5_000_000;

/// Law of the endpoint tuple after m steps conditioned on survival, in
/// floating point: each reachable ordered tuple with its conditional
/// probability. Single-walker probabilities come from `ln_gamma`.
pub fn endpoint_law_float(m: i64, u: &LatticeConfig) -> Result<Vec<(Vec<i64>, f64)>> {
    let m = check_steps(m)?;
    let n = u.len();
    let reach = (m + 1) as f64;
    let estimate = reach.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
    if estimate > ENDPOINT_LAW_BUDGET as f64 {
        return Err(Error::TooLarge(format!("about {estimate:.0} endpoint tuples (N={n}, m={m})")));
    }
    let mf = m as f64;
    let probs: Vec<f64> = (0..=m)
        .map(|k| {
            let k = k as f64;
            (ln_gamma(mf + 1.0) - ln_gamma(k + 1.0) - ln_gamma(mf - k + 1.0) - mf * 2f64.ln()).exp()
        })
        .collect();
    let mi = m as i64;
    let at = |twice_k: i64| -> f64 {
        if twice_k.rem_euclid(2) != 0 || twice_k < 0 || twice_k / 2 > mi {
            0.0
        } else {
            probs[(twice_k / 2) as usize]
        }
    };
    let single = |a: i64, b: i64| -> f64 {
        if u.wall {
            if b < 0 {
                0.0
            } else {
                at(mi + a - b) - at(mi + a + b + 2)
            }
        } else {
            at(mi + a - b)
        }
    };
    let mut out = Vec::new();
    let mut total = 0.0;
    for_each_endpoint(m, u, |v| {
        let mat = crate::linalg::Matrix::from_fn(n, |i, j| single(u.positions[j], v[i]));
        let d = crate::linalg::determinant(&mat);
        if d > 0.0 {
            total += d;
            out.push((v.to_vec(), d));
        }
    });
    if !(total > 0.0) {
        return Err(Error::Domain("walkers cannot survive m steps".into()));
    }
    for (_, p) in out.iter_mut() {
        *p /= total;
    }
    Ok(out)
}
