//! One-dimensional marginals of chamber densities by nested quadrature.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{ChamberQuadrature, GaussLegendre};

const NODES: usize = 8;

/// Marginal density sampled at Gauss nodes of equal panels, with the CDF at
/// panel edges. Between edges the CDF integrates the panel's interpolating
/// polynomial.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalTable {
    pub coordinate: usize,
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf_at_edges: Vec<f64>,
    /// Total mass minus one.
    pub normalization_drift: f64,
}

/// Marginals of every coordinate of a density whose natural length is
/// `scale`, with panel widths proportional to it.
pub fn marginal_tables(
    density: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    lo: f64,
    hi: f64,
    scale: f64,
) -> Result<Vec<MarginalTable>> {
    let panels = ((hi - lo) / (0.5 * scale)).ceil() as usize;
    let inner = if n >= 3 { 1.0 } else { 0.5 } * scale;
    (0..n).map(|c| marginalize(density, n, c, lo, hi, panels, inner)).collect()
}

/// Integrates all coordinates but `coordinate` of a density on the ordered
/// region `lo < y_1 < ... < y_n < hi`.
pub fn marginalize(
    density: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    coordinate: usize,
    lo: f64,
    hi: f64,
    panels: usize,
    inner_width: f64,
) -> Result<MarginalTable> {
    if !(1..=3).contains(&n) {
        return Err(Error::TooLarge(format!("marginalization supports N <= 3, got {n}")));
    }
    if coordinate >= n || !(hi > lo) || panels == 0 {
        return Err(Error::Domain("bad marginalization arguments".into()));
    }
    let rule = GaussLegendre::new(NODES);
    let w = (hi - lo) / panels as f64;
    let edges: Vec<f64> = (0..=panels).map(|k| lo + k as f64 * w).collect();
    let nodes: Vec<f64> = (0..panels)
        .flat_map(|p| {
            let mid = lo + (p as f64 + 0.5) * w;
            rule.nodes.iter().map(move |x| mid + 0.5 * w * x).collect::<Vec<_>>()
        })
        .collect();
    let q = ChamberQuadrature { lo, hi, panel_width: inner_width };
    let dens: Vec<f64> = nodes
        .par_iter()
        .map(|&v| {
            if n == 1 {
                density(&[v])
            } else {
                q.integrate_with_fixed(n, (coordinate, v), &mut |y: &[f64]| density(y))
            }
        })
        .collect();
    let mut cdf = vec![0.0; panels + 1];
    for p in 0..panels {
        let mass: f64 = (0..NODES).map(|k| rule.weights[k] * dens[p * NODES + k]).sum::<f64>() * 0.5 * w;
        cdf[p + 1] = cdf[p] + mass;
    }
    let drift = cdf[panels] - 1.0;
    Ok(MarginalTable { coordinate, edges, nodes, density: dens, cdf_at_edges: cdf, normalization_drift: drift })
}

impl MarginalTable {
    fn panel_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Interpolated marginal density.
    pub fn density_at(&self, x: f64) -> f64 {
        let panels = self.edges.len() - 1;
        if x < self.edges[0] || x > self.edges[panels] {
            return 0.0;
        }
        let p = (((x - self.edges[0]) / self.panel_width()) as usize).min(panels - 1);
        let xs = &self.nodes[p * NODES..(p + 1) * NODES];
        let fs = &self.density[p * NODES..(p + 1) * NODES];
        lagrange(xs, fs, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let panels = self.edges.len() - 1;
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[panels] {
            return self.cdf_at_edges[panels];
        }
        let p = (((x - self.edges[0]) / self.panel_width()) as usize).min(panels - 1);
        let a = self.edges[p];
        let xs = &self.nodes[p * NODES..(p + 1) * NODES];
        let fs = &self.density[p * NODES..(p + 1) * NODES];
        let rule = crate::quadrature::gl20();
        self.cdf_at_edges[p] + rule.integrate(a, x, |v| lagrange(xs, fs, v))
    }
}

fn lagrange(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        let mut l = 1.0;
        for j in 0..xs.len() {
            if j != i {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += l * fs[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn one_dimensional_identity() {
        let f = |y: &[f64]| (-y[0] * y[0] / 2.0).exp() / (2.0 * PI).sqrt();
        let m = marginalize(&f, 1, 0, -9.0, 9.0, 36, 1.0).unwrap();
        assert!(m.normalization_drift.abs() < 1e-12);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((m.density_at(0.3) - f(&[0.3])).abs() < 1e-10);
    }

    #[test]
    fn two_iid_gaussians_ordered() {
        // Ordered pair of iid N(0,1): max has CDF Phi(x)^2.
        let f = |y: &[f64]| 2.0 * (-(y[0] * y[0] + y[1] * y[1]) / 2.0).exp() / (2.0 * PI);
        let m = marginalize(&f, 2, 1, -9.0, 9.0, 36, 0.5).unwrap();
        assert!(m.normalization_drift.abs() < 1e-10);
        let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / 2f64.sqrt()));
        for x in [-1.0, 0.2, 1.7] {
            assert!((m.cdf(x) - phi(x).powi(2)).abs() < 1e-10);
        }
        assert!(marginalize(&f, 4, 0, -1.0, 1.0, 4, 1.0).is_err());
    }
}
