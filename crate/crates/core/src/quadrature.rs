//! Gauss–Legendre rules, adaptive panel refinement, and nested integration
//! over ordered (Weyl chamber) domains.

use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Single-panel rule on [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Dyadic subdivision with a GL-32 rule per panel until the refined sum
/// changes by less than `tol` (absolute).
pub fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gl32();
    let whole = rule.integrate(a, b, &mut *f);
    refine(f, rule, a, b, whole, tol, 0)
}

fn refine(
    f: &mut impl FnMut(f64) -> f64,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, &mut *f);
    let right = rule.integrate(m, b, &mut *f);
    if (left + right - whole).abs() < tol || depth >= 30 {
        return left + right;
    }
    refine(f, rule, a, m, left, 0.5 * tol, depth + 1) + refine(f, rule, m, b, right, 0.5 * tol, depth + 1)
}

/// Composite fixed-order rule with `panels` equal panels.
pub fn composite(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    (0..panels).map(|k| rule.integrate(a + k as f64 * w, a + (k + 1) as f64 * w, &mut f)).sum()
}

/// Nested integral over the ordered region `lo <= y_1 < y_2 < ... < y_n <= hi`.
///
/// Each level uses a composite GL-20 rule with panels no wider than
/// `panel_width`; the integrand is smooth on the ordered region for every
/// density in this crate, so fixed panels converge spectrally.
#[derive(Debug, Clone, Copy)]
pub struct ChamberQuadrature {
    pub lo: f64,
    pub hi: f64,
    pub panel_width: f64,
}

impl ChamberQuadrature {
    pub fn integrate(&self, n: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
        let mut y = vec![0.0; n];
        self.level(0, self.lo, &mut y, f)
    }

    /// Integrates with coordinates in `fixed` (index, value) held constant and
    /// the remaining coordinates running over the ordered region compatible
    /// with them.
    pub fn integrate_with_fixed(&self, n: usize, fixed: (usize, f64), f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
        let mut y = vec![0.0; n];
        self.level_fixed(0, self.lo, fixed, &mut y, f)
    }

    fn panels(&self, a: f64, b: f64) -> usize {
        (((b - a) / self.panel_width).ceil() as usize).max(1)
    }

    fn level(&self, k: usize, start: f64, y: &mut Vec<f64>, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
        let n = y.len();
        if k == n {
            return f(y);
        }
        let rule = gl20();
        let panels = self.panels(start, self.hi);
        composite(rule, start, self.hi, panels, |v| {
            y[k] = v;
            self.level(k + 1, v, y, f)
        })
    }

    fn level_fixed(
        &self,
        k: usize,
        start: f64,
        fixed: (usize, f64),
        y: &mut Vec<f64>,
        f: &mut impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let n = y.len();
        if k == n {
            return f(y);
        }
        if k == fixed.0 {
            if fixed.1 < start {
                return 0.0;
            }
            y[k] = fixed.1;
            return self.level_fixed(k + 1, fixed.1, fixed, y, f);
        }
        // Coordinates below the fixed one are capped by its value.
        let end = if k < fixed.0 { fixed.1 } else { self.hi };
        if end <= start {
            return 0.0;
        }
        let rule = gl20();
        let panels = self.panels(start, end);
        composite(rule, start, end, panels, |v| {
            y[k] = v;
            self.level_fixed(k + 1, v, fixed, y, f)
        })
    }
}

/// Truncation radius beyond which a unit-variance Gaussian factor drops
/// below 1e-18.
pub const GAUSS_CUTOFF: f64 = 9.1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let r = GaussLegendre::new(10);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^18 is degree 18 <= 2*10-1
        let v = r.integrate(-1.0, 1.0, |x| x.powi(18));
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let r32 = gl32();
        let v = r32.integrate(0.0, 2.0, |x| x.powi(40));
        assert!((v - 2f64.powi(41) / 41.0).abs() / (2f64.powi(41) / 41.0) < 1e-13);
    }

    #[test]
    fn adaptive_gaussian() {
        let v = adaptive(&mut |x: f64| (-x * x).exp(), -10.0, 10.0, 1e-13);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chamber_volume_of_simplex() {
        // Volume of {0 <= y1 < y2 < y3 <= 1} is 1/6.
        let q = ChamberQuadrature { lo: 0.0, hi: 1.0, panel_width: 1.0 };
        let v = q.integrate(3, &mut |_| 1.0);
        assert!((v - 1.0 / 6.0).abs() < 1e-13);
        let m = q.integrate_with_fixed(3, (1, 0.5), &mut |_| 1.0);
        // y1 in [0, .5], y3 in [.5, 1] -> .25
        assert!((m - 0.25).abs() < 1e-13);
    }
}
