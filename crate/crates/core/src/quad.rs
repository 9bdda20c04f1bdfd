//! Quadrature rules: Gauss-Legendre on intervals, product rules on
//! coordinate spheres, hemispheres, and equators.
//!
//! Sphere rules are tensor products of Gauss-Legendre nodes in the polar
//! angles and uniform nodes in the azimuth; the hemisphere restricts the
//! outermost polar range to `[0, pi/2]` (polar axis = last coordinate), and
//! the equator is an (n-2)-sphere rule in the wall plane. Each rule reports
//! a conservative certified polynomial degree; accuracy for smooth
//! integrands beyond that degree is spectral.

use crate::domain::Dimension;
use crate::error::{CoreError, Result};
use crate::par;
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Integration surface at radius lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    Sphere,
    Hemisphere,
    /// The (n-2)-sphere in the wall plane `x_n = 0`.
    Equator,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// A quadrature rule on a unit surface: points on the unit sphere (or
/// hemisphere/equator) and weights summing to its area. Coordinates are
/// stored packed, `point_len` doubles per node.
#[derive(Debug, Clone)]
pub struct SurfaceRule {
    coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub point_len: usize,
    /// Monomials of total degree up to this integrate to < 1e-12 relative
    /// (full-accuracy defaults, n <= 5).
    pub certified_degree: usize,
    pub polar_nodes: usize,
    pub azimuth_nodes: usize,
}

impl SurfaceRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.point_len..(i + 1) * self.point_len]
    }
}

/// Default per-angle node counts, reduced in higher dimensions to keep the
/// tensor product tractable.
pub fn default_nodes(dim: Dimension) -> (usize, usize) {
    match dim.n() {
        3 | 4 => (32, 64),
        5 => (24, 48),
        6 => (12, 24),
        _ => (8, 16),
    }
}

fn certified_degree(polar: usize, azimuth: usize) -> usize {
    10usize.min(polar.saturating_sub(2)).min(azimuth / 2)
}

/// Recursive product rule on the unit m-sphere in `R^{m+1}`, polar axis
/// last: `x = (sin(theta) * omega, cos(theta))`.
fn unit_sphere(m: usize, polar: usize, azimuth: usize, top_half_only: bool) -> SurfaceRule {
    match m {
        0 => {
            let coords = if top_half_only {
                vec![1.0]
            } else {
                vec![1.0, -1.0]
            };
            let weights = vec![1.0; coords.len()];
            SurfaceRule {
                coords,
                weights,
                point_len: 1,
                certified_degree: usize::MAX,
                polar_nodes: polar,
                azimuth_nodes: azimuth,
            }
        }
        1 => {
            if top_half_only {
                // Half circle x_2 >= 0, via GL in the angle.
                let (ts, ws) = gauss_legendre_on(0.0, std::f64::consts::PI, azimuth);
                let mut coords = Vec::with_capacity(2 * ts.len());
                for t in &ts {
                    coords.push(t.cos());
                    coords.push(t.sin());
                }
                SurfaceRule {
                    coords,
                    weights: ws,
                    point_len: 2,
                    certified_degree: certified_degree(azimuth, azimuth),
                    polar_nodes: polar,
                    azimuth_nodes: azimuth,
                }
            } else {
                let mm = azimuth.max(4);
                let w = 2.0 * std::f64::consts::PI / mm as f64;
                let mut coords = Vec::with_capacity(2 * mm);
                for j in 0..mm {
                    let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / mm as f64;
                    coords.push(phi.cos());
                    coords.push(phi.sin());
                }
                SurfaceRule {
                    coords,
                    weights: vec![w; mm],
                    point_len: 2,
                    certified_degree: mm - 1,
                    polar_nodes: polar,
                    azimuth_nodes: azimuth,
                }
            }
        }
        _ => {
            let base = unit_sphere(m - 1, polar, azimuth, false);
            let theta_max = if top_half_only {
                0.5 * std::f64::consts::PI
            } else {
                std::f64::consts::PI
            };
            let (ts, ws) = gauss_legendre_on(0.0, theta_max, polar);
            let count = ts.len() * base.len();
            let mut coords = Vec::with_capacity(count * (m + 1));
            let mut weights = Vec::with_capacity(count);
            for (t, wt) in ts.iter().zip(&ws) {
                let (st, ct) = (t.sin(), t.cos());
                let polar_weight = wt * st.powi(m as i32 - 1);
                for i in 0..base.len() {
                    coords.extend(base.point(i).iter().map(|c| c * st));
                    coords.push(ct);
                    weights.push(polar_weight * base.weights[i]);
                }
            }
            SurfaceRule {
                coords,
                weights,
                point_len: m + 1,
                certified_degree: certified_degree(polar, azimuth).min(base.certified_degree),
                polar_nodes: polar,
                azimuth_nodes: azimuth,
            }
        }
    }
}

static RULE_CACHE: Lazy<Mutex<HashMap<(usize, Surface, usize, usize), Arc<SurfaceRule>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Rule on the unit surface of kind `surface` for ambient dimension n.
/// Points lie in `R^n` (equator points carry `x_n = 0`).
pub fn unit_rule(dim: Dimension, surface: Surface, polar: usize, azimuth: usize) -> Arc<SurfaceRule> {
    let key = (dim.n(), surface, polar, azimuth);
    if let Some(r) = RULE_CACHE.lock().unwrap().get(&key) {
        return r.clone();
    }
    let n = dim.n();
    let rule = match surface {
        Surface::Sphere => unit_sphere(n - 1, polar, azimuth, false),
        Surface::Hemisphere => unit_sphere(n - 1, polar, azimuth, true),
        Surface::Equator => {
            let base = unit_sphere(n - 2, polar, azimuth, false);
            let mut coords = Vec::with_capacity(base.len() * n);
            for i in 0..base.len() {
                coords.extend_from_slice(base.point(i));
                coords.push(0.0);
            }
            SurfaceRule {
                coords,
                point_len: n,
                ..base
            }
        }
    };
    let arc = Arc::new(rule);
    RULE_CACHE.lock().unwrap().insert(key, arc.clone());
    arc
}

/// Intrinsic dimension of the surface (for the radius scaling of weights).
fn surface_dim(dim: Dimension, surface: Surface) -> usize {
    match surface {
        Surface::Sphere | Surface::Hemisphere => dim.n() - 1,
        Surface::Equator => dim.n() - 2,
    }
}

/// Integrates `f` over the surface of radius `lambda` with the Euclidean
/// area measure, using the default node counts.
pub fn sphere_quadrature<F>(dim: Dimension, lambda: f64, f: F, surface: Surface) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let (p, a) = default_nodes(dim);
    sphere_quadrature_with(dim, lambda, f, surface, p, a)
}

pub fn sphere_quadrature_with<F>(
    dim: Dimension,
    lambda: f64,
    f: F,
    surface: Surface,
    polar: usize,
    azimuth: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CoreError::Quadrature(format!(
            "surface radius must be positive and finite, got {lambda}"
        )));
    }
    let rule = unit_rule(dim, surface, polar, azimuth);
    let scale = lambda.powi(surface_dim(dim, surface) as i32);
    let vals = par::map_range(rule.len(), |i| {
        let x: Vec<f64> = rule.point(i).iter().map(|c| c * lambda).collect();
        f(&x) * rule.weights[i]
    });
    Ok(par::ordered_sum(&vals) * scale)
}
