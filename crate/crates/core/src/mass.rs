//! Mass flux integrals and their large-radius extrapolation.
//!
//! The full-space mass evaluates
//! `1/(2(n-1)omega_{n-1}) * lambda^{-1} * sum_{ij} \oint x^i [d_j g(e_i,e_j) - d_i g(e_j,e_j)] dmu`
//! over coordinate spheres; the half-space mass adds the equatorial line
//! integral `sum_{i<n} \oint x^i g(e_i, e_n) dl` over the wall circle and
//! integrates over hemispheres instead. Sweeps over lambda are fitted with
//! a two-term power law `c0 + c1 lambda^{-p}` (p free, three radii minimum)
//! and the extrapolated constant is reported together with the fit residual.

use crate::domain::Dimension;
use crate::error::{CoreError, Result};
use crate::fields::ScalarField;
use crate::metric::MetricField;
use crate::par;
use crate::quad::{default_nodes, sphere_quadrature_with, unit_rule, Surface};

#[derive(Debug, Clone)]
pub struct MassEstimate {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub extrapolated: f64,
    pub fit_exponent: f64,
    pub residual: f64,
}

impl MassEstimate {
    /// Deviations `|value(lambda) - extrapolated|`, the CSV error column.
    pub fn deviations(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| (v - self.extrapolated).abs())
            .collect()
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 3 {
        return Err(CoreError::Quadrature(format!(
            "need at least 3 radii for extrapolation, got {}",
            lambdas.len()
        )));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) || lambdas[0] <= 0.0 {
        return Err(CoreError::Quadrature(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Least-squares fit of `c0 + c1 * lambda^{-p}` with free exponent `p`.
/// Returns `(c0, p, rms_residual)`.
pub fn fit_power_law(lambdas: &[f64], values: &[f64]) -> (f64, f64, f64) {
    let m = lambdas.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    let spread = values
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0_f64, f64::max);
    if spread < 1e-13 * mean.abs().max(1e-8) {
        return (mean, 0.0, spread);
    }

    let sse_for = |p: f64| -> (f64, f64) {
        // Linear LS in (c0, c1) with basis [1, lambda^{-p}].
        let (mut s1, mut sb, mut sbb, mut sv, mut sbv) = (m as f64, 0.0, 0.0, 0.0, 0.0);
        for (l, v) in lambdas.iter().zip(values) {
            let b = l.powf(-p);
            sb += b;
            sbb += b * b;
            sv += v;
            sbv += b * v;
        }
        let det = s1 * sbb - sb * sb;
        if det.abs() < 1e-300 {
            return (f64::INFINITY, mean);
        }
        let c0 = (sbb * sv - sb * sbv) / det;
        let c1 = (s1 * sbv - sb * sv) / det;
        let sse: f64 = lambdas
            .iter()
            .zip(values)
            .map(|(l, v)| {
                let r = v - c0 - c1 * l.powf(-p);
                r * r
            })
            .sum();
        s1 = sse; // reuse binding to silence unused warnings
        (s1, c0)
    };

    // Coarse grid in log p, then golden-section refinement.
    let (mut best_p, mut best_sse, mut best_c0) = (1.0, f64::INFINITY, mean);
    for i in 0..240 {
        let p = 0.05 * (10.0_f64 / 0.05).powf(i as f64 / 239.0);
        let (sse, c0) = sse_for(p);
        if sse < best_sse {
            best_sse = sse;
            best_p = p;
            best_c0 = c0;
        }
    }
    let (mut a, mut b) = (best_p / 1.3, best_p * 1.3);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (sse_for(x1).0, sse_for(x2).0);
    for _ in 0..60 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse_for(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse_for(x2).0;
        }
    }
    let p = 0.5 * (a + b);
    let (sse, c0) = sse_for(p);
    if sse < best_sse {
        best_p = p;
        best_sse = sse;
        best_c0 = c0;
    }
    (best_c0, best_p, (best_sse / m as f64).sqrt())
}

fn flux_integrand(g: &MetricField, x: &[f64]) -> f64 {
    let n = g.dim().n();
    let dg = g.first_derivs(x);
    let mut s = 0.0;
    for i in 0..n {
        let mut term = 0.0;
        for j in 0..n {
            term += dg[j][(i, j)] - dg[i][(j, j)];
        }
        s += x[i] * term;
    }
    s
}

fn mass_value_at(g: &MetricField, lambda: f64, surface: Surface, polar: usize, azimuth: usize) -> Result<f64> {
    let dim = g.dim();
    let n = dim.n();
    let norm = 2.0 * (n as f64 - 1.0) * dim.unit_sphere_area();

    let rule = unit_rule(dim, surface, polar, azimuth);
    let scale = lambda.powi(n as i32 - 1);
    let vals = par::map_range(rule.len(), |i| {
        let x: Vec<f64> = rule.point(i).iter().map(|c| c * lambda).collect();
        flux_integrand(g, &x) * rule.weights[i]
    });
    let mut total = par::ordered_sum(&vals) * scale;

    if surface == Surface::Hemisphere {
        // Equatorial boundary term: sum_{i<n} x^i g(e_i, e_n) over the wall circle.
        let erule = unit_rule(dim, Surface::Equator, polar, azimuth);
        let escale = lambda.powi(n as i32 - 2);
        let evals = par::map_range(erule.len(), |i| {
            let x: Vec<f64> = erule.point(i).iter().map(|c| c * lambda).collect();
            let m = g.eval_raw(&x);
            let mut s = 0.0;
            for k in 0..n - 1 {
                s += x[k] * m[(k, n - 1)];
            }
            s * erule.weights[i]
        });
        total += par::ordered_sum(&evals) * escale;
    }

    Ok(total / (lambda * norm))
}

fn sweep_and_fit(
    g: &MetricField,
    lambdas: &[f64],
    surface: Surface,
    nodes: Option<(usize, usize)>,
) -> Result<MassEstimate> {
    check_lambdas(lambdas)?;
    let max_l = *lambdas.last().unwrap();
    if g.domain().outer_radius < max_l {
        return Err(CoreError::OutsideDomain {
            point: vec![max_l],
            reason: format!(
                "metric domain ends at {}, sweep needs {max_l}",
                g.domain().outer_radius
            ),
        });
    }
    let (p, a) = nodes.unwrap_or_else(|| default_nodes(g.dim()));
    let values: Result<Vec<f64>> = lambdas
        .iter()
        .map(|&l| mass_value_at(g, l, surface, p, a))
        .collect();
    let values = values?;
    let (c0, pexp, residual) = fit_power_law(lambdas, &values);
    if !c0.is_finite() {
        return Err(CoreError::NonConvergence("mass extrapolation".into()));
    }
    let spread = values
        .iter()
        .map(|v| (v - c0).abs())
        .fold(0.0_f64, f64::max);
    if spread > 1e-8 && residual > 0.5 * spread {
        return Err(CoreError::NonConvergence(format!(
            "flux values do not follow a power-law decay (residual {residual:.3e} vs spread {spread:.3e})"
        )));
    }
    Ok(MassEstimate {
        lambdas: lambdas.to_vec(),
        values,
        extrapolated: c0,
        fit_exponent: pexp,
        residual,
    })
}

/// Mass of an asymptotically flat metric on a full-space chart.
pub fn adm_mass(g: &MetricField, lambdas: &[f64]) -> Result<MassEstimate> {
    if g.domain().is_half_space() {
        return Err(CoreError::InvalidDomain(
            "adm_mass expects a full-space chart; use halfspace_mass".into(),
        ));
    }
    sweep_and_fit(g, lambdas, Surface::Sphere, None)
}

/// Half-space mass: hemisphere flux plus the equatorial boundary term.
pub fn halfspace_mass(g: &MetricField, lambdas: &[f64]) -> Result<MassEstimate> {
    if !g.domain().is_half_space() {
        return Err(CoreError::InvalidDomain(
            "halfspace_mass expects a half-space chart".into(),
        ));
    }
    sweep_and_fit(g, lambdas, Surface::Hemisphere, None)
}

pub fn adm_mass_with_nodes(g: &MetricField, lambdas: &[f64], nodes: (usize, usize)) -> Result<MassEstimate> {
    sweep_and_fit(g, lambdas, Surface::Sphere, Some(nodes))
}

pub fn halfspace_mass_with_nodes(
    g: &MetricField,
    lambdas: &[f64],
    nodes: (usize, usize),
) -> Result<MassEstimate> {
    sweep_and_fit(g, lambdas, Surface::Hemisphere, Some(nodes))
}

/// Radial flux `lambda^{-1} \oint sum_i x^i d_i u dmu(flat)` of a scalar
/// field over the sphere or hemisphere of radius `lambda`.
pub fn flux_integral(dim: Dimension, u: &ScalarField, lambda: f64, surface: Surface) -> Result<f64> {
    let (p, a) = default_nodes(dim);
    let v = sphere_quadrature_with(
        dim,
        lambda,
        |x| {
            let grad = u.gradient(x);
            x.iter().zip(grad.iter()).map(|(xi, gi)| xi * gi).sum()
        },
        surface,
        p,
        a,
    )?;
    Ok(v / lambda)
}
