//! Pointwise tensor calculus in chart coordinates: Christoffel symbols,
//! Ricci and scalar curvature, Laplace-Beltrami, and the linearization of
//! scalar curvature
//! `DR_g(sigma) = div_g div_g sigma - Lap_g tr_g sigma - <Ric(g), sigma>_g`.
//!
//! The double divergence keeps every Christoffel term of the coordinate
//! expansion; nothing is specialized to flat backgrounds.

use crate::error::Result;
use crate::fields::{ScalarField, SymTensorField};
use crate::metric::MetricField;
use nalgebra::DMatrix;

/// Dense (n,n,n) array with `get(k, a, b) = T^k_{ab}`.
#[derive(Debug, Clone)]
pub struct Tensor3 {
    n: usize,
    v: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            v: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.v[(k * self.n + a) * self.n + b]
    }

    #[inline]
    pub fn set(&mut self, k: usize, a: usize, b: usize, val: f64) {
        self.v[(k * self.n + a) * self.n + b] = val;
    }

    pub fn amax(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Curvature data of a metric at one point.
#[derive(Debug, Clone)]
pub struct CurvaturePoint {
    pub x: Vec<f64>,
    pub gamma: Tensor3,
    pub ric: DMatrix<f64>,
    pub scalar: f64,
}

struct MetricJet {
    ginv: DMatrix<f64>,
    dg: Vec<DMatrix<f64>>,
    dginv: Vec<DMatrix<f64>>,
    gamma: Tensor3,
}

fn metric_jet(g: &MetricField, x: &[f64]) -> Result<MetricJet> {
    let n = g.dim().n();
    let ginv = g.inverse_at(x)?;
    let dg = g.first_derivs(x);
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|c| -(&ginv * &dg[c] * &ginv)).collect();
    let mut gamma = Tensor3::zeros(n);
    for k in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[(k, l)] * (dg[a][(l, b)] + dg[b][(l, a)] - dg[l][(a, b)]);
                }
                gamma.set(k, a, b, 0.5 * s);
                gamma.set(k, b, a, 0.5 * s);
            }
        }
    }
    Ok(MetricJet {
        ginv,
        dg,
        dginv,
        gamma,
    })
}

/// `dgamma[c]` with entries `d_c Gamma^k_{ab}`; requires second derivatives
/// of the metric.
fn christoffel_derivs(g: &MetricField, x: &[f64], jet: &MetricJet) -> Vec<Tensor3> {
    let n = g.dim().n();
    let d2g = g.second_derivs(x);
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let mut t = Tensor3::zeros(n);
        for k in 0..n {
            for a in 0..n {
                for b in a..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += jet.dginv[c][(k, l)]
                            * (jet.dg[a][(l, b)] + jet.dg[b][(l, a)] - jet.dg[l][(a, b)]);
                        s += jet.ginv[(k, l)]
                            * (d2g[c][a][(l, b)] + d2g[c][b][(l, a)] - d2g[c][l][(a, b)]);
                    }
                    t.set(k, a, b, 0.5 * s);
                    t.set(k, b, a, 0.5 * s);
                }
            }
        }
        out.push(t);
    }
    out
}

/// Christoffel symbols `Gamma^k_{ab}` at `x`.
pub fn christoffel(g: &MetricField, x: &[f64]) -> Result<Tensor3> {
    Ok(metric_jet(g, x)?.gamma)
}

/// Christoffel symbols, Ricci tensor, and scalar curvature at `x`.
pub fn curvature_point(g: &MetricField, x: &[f64]) -> Result<CurvaturePoint> {
    let n = g.dim().n();
    let jet = metric_jet(g, x)?;
    let dgamma = christoffel_derivs(g, x, &jet);
    let mut ric = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut s = 0.0;
            for k in 0..n {
                s += dgamma[k].get(k, a, b) - dgamma[a].get(k, k, b);
                for l in 0..n {
                    s += jet.gamma.get(k, k, l) * jet.gamma.get(l, a, b)
                        - jet.gamma.get(k, a, l) * jet.gamma.get(l, k, b);
                }
            }
            ric[(a, b)] = s;
            ric[(b, a)] = s;
        }
    }
    let mut scalar = 0.0;
    for a in 0..n {
        for b in 0..n {
            scalar += jet.ginv[(a, b)] * ric[(a, b)];
        }
    }
    Ok(CurvaturePoint {
        x: x.to_vec(),
        gamma: jet.gamma,
        ric,
        scalar,
    })
}

pub fn ricci(g: &MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    Ok(curvature_point(g, x)?.ric)
}

pub fn scalar_curvature(g: &MetricField, x: &[f64]) -> Result<f64> {
    Ok(curvature_point(g, x)?.scalar)
}

/// `Lap_g f = g^{ab} (d_a d_b f - Gamma^l_{ab} d_l f)`.
pub fn laplace_beltrami(g: &MetricField, f: &ScalarField, x: &[f64]) -> Result<f64> {
    let n = g.dim().n();
    let jet = metric_jet(g, x)?;
    let grad = f.gradient(x);
    let hess = f.hessian(x);
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut t = hess[(a, b)];
            for l in 0..n {
                t -= jet.gamma.get(l, a, b) * grad[l];
            }
            s += jet.ginv[(a, b)] * t;
        }
    }
    Ok(s)
}

/// Linearization of scalar curvature in the direction `sigma`:
/// `div_g div_g sigma - Lap_g tr_g sigma - <Ric, sigma>_g`.
pub fn linearized_scalar_curvature(
    g: &MetricField,
    sigma: &SymTensorField,
    x: &[f64],
) -> Result<f64> {
    let n = g.dim().n();
    let jet = metric_jet(g, x)?;
    let dgamma = christoffel_derivs(g, x, &jet);
    let d2g = g.second_derivs(x);
    let sig = sigma.value(x);
    let dsig = sigma.first_derivs(x);
    let d2sig = sigma.second_derivs(x);

    // d_a d_b g^{ij}
    let d2ginv = |a: usize, b: usize| -> DMatrix<f64> {
        -(&jet.dginv[b] * &jet.dg[a] * &jet.ginv)
            - (&jet.ginv * &d2g[a][b] * &jet.ginv)
            - (&jet.ginv * &jet.dg[a] * &jet.dginv[b])
    };

    // First covariant divergence: (div sigma)_b = g^{ij} (d_i sig_jb
    //   - Gamma^l_{ij} sig_lb - Gamma^l_{ib} sig_jl).
    let div1 = |b: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut t = dsig[i][(j, b)];
                for l in 0..n {
                    t -= jet.gamma.get(l, i, j) * sig[(l, b)];
                    t -= jet.gamma.get(l, i, b) * sig[(j, l)];
                }
                s += jet.ginv[(i, j)] * t;
            }
        }
        s
    };
    // d_a of the expression above, by the product rule.
    let ddiv1 = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut t = dsig[i][(j, b)];
                let mut dt = d2sig[a][i][(j, b)];
                for l in 0..n {
                    t -= jet.gamma.get(l, i, j) * sig[(l, b)];
                    t -= jet.gamma.get(l, i, b) * sig[(j, l)];
                    dt -= dgamma[a].get(l, i, j) * sig[(l, b)]
                        + jet.gamma.get(l, i, j) * dsig[a][(l, b)];
                    dt -= dgamma[a].get(l, i, b) * sig[(j, l)]
                        + jet.gamma.get(l, i, b) * dsig[a][(j, l)];
                }
                s += jet.dginv[a][(i, j)] * t + jet.ginv[(i, j)] * dt;
            }
        }
        s
    };

    let mut divdiv = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut t = ddiv1(a, b);
            for l in 0..n {
                t -= jet.gamma.get(l, a, b) * div1(l);
            }
            divdiv += jet.ginv[(a, b)] * t;
        }
    }

    // Laplacian of tr_g sigma = g^{ij} sig_ij.
    let dtr = |a: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += jet.dginv[a][(i, j)] * sig[(i, j)] + jet.ginv[(i, j)] * dsig[a][(i, j)];
            }
        }
        s
    };
    let mut lap_tr = 0.0;
    for a in 0..n {
        for b in 0..n {
            let dd = d2ginv(a, b);
            let mut hess_tr = 0.0;
            for i in 0..n {
                for j in 0..n {
                    hess_tr += dd[(i, j)] * sig[(i, j)]
                        + jet.dginv[a][(i, j)] * dsig[b][(i, j)]
                        + jet.dginv[b][(i, j)] * dsig[a][(i, j)]
                        + jet.ginv[(i, j)] * d2sig[a][b][(i, j)];
                }
            }
            let mut t = hess_tr;
            for l in 0..n {
                t -= jet.gamma.get(l, a, b) * dtr(l);
            }
            lap_tr += jet.ginv[(a, b)] * t;
        }
    }

    // <Ric, sigma>_g with both indices raised by g^{-1}.
    let ric = {
        let mut ric = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dgamma[k].get(k, a, b) - dgamma[a].get(k, k, b);
                    for l in 0..n {
                        s += jet.gamma.get(k, k, l) * jet.gamma.get(l, a, b)
                            - jet.gamma.get(k, a, l) * jet.gamma.get(l, k, b);
                    }
                }
                ric[(a, b)] = s;
                ric[(b, a)] = s;
            }
        }
        ric
    };
    let raised = &jet.ginv * &ric * &jet.ginv;
    let mut ric_dot_sig = 0.0;
    for k in 0..n {
        for l in 0..n {
            ric_dot_sig += raised[(k, l)] * sig[(k, l)];
        }
    }

    Ok(divdiv - lap_tr - ric_dot_sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Dimension, DomainSpec};
    use crate::fields::{ConformalFactor, FdOrder, FdRule};
    use crate::metric::{
        conformal_scale, make_conformally_flat, make_flat, make_schwarzschild,
        make_schwarzschild_halfspace,
    };
    use nalgebra::DVector;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn full(inner: f64, outer: f64) -> DomainSpec {
        DomainSpec::full_annulus(inner, outer).unwrap()
    }

    #[test]
    fn flat_christoffel_and_curvature_vanish() {
        let g = make_flat(dim(3), full(1.0, 10.0));
        let x = [2.0, 0.5, -1.0];
        assert_eq!(christoffel(&g, &x).unwrap().amax(), 0.0);
        let cp = curvature_point(&g, &x).unwrap();
        assert_eq!(cp.scalar, 0.0);
        assert_eq!(cp.ric.amax(), 0.0);
    }

    /// Conformally flat Christoffel symbols in closed form:
    /// for g = e^{2 phi} delta, Gamma^k_{ab} = d_a phi delta_kb
    ///   + d_b phi delta_ka - d_k phi delta_ab.
    #[test]
    fn schwarzschild_christoffel_matches_symbolic() {
        let n = 3;
        let g = make_schwarzschild(dim(n), 2.0, 100.0).unwrap();
        let x = [3.0, 0.0, 0.0];
        let got = christoffel(&g, &x).unwrap();
        // phi = (2/(n-2)) ln u, u = 1 + (mtilde/2) r^{2-n}
        let r = 3.0_f64;
        let u = 1.0 + 1.0 / r;
        let dphi = |k: usize| -> f64 {
            let du = -1.0 / (r * r) * x[k] / r;
            2.0 / (n as f64 - 2.0) * du / u
        };
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut want = 0.0;
                    if k == b {
                        want += dphi(a);
                    }
                    if k == a {
                        want += dphi(b);
                    }
                    if a == b {
                        want -= dphi(k);
                    }
                    assert!(
                        (got.get(k, a, b) - want).abs() < 1e-8,
                        "Gamma^{k}_{a}{b}: {} vs {}",
                        got.get(k, a, b),
                        want
                    );
                }
            }
        }
    }

    #[test]
    fn schwarzschild_scalar_flat_analytic() {
        for n in 3..=7 {
            let d = dim(n);
            let g = make_schwarzschild(d, 2.0, 100.0).unwrap();
            let mut x = vec![0.0; n];
            x[0] = 3.0;
            x[1] = 0.7;
            let r = scalar_curvature(&g, &x).unwrap();
            assert!(r.abs() < 1e-10, "n={n}: R = {r}");
            let gh = make_schwarzschild_halfspace(d, 1.0, 100.0).unwrap();
            let rh = scalar_curvature(&gh, &x).unwrap();
            assert!(rh.abs() < 1e-10, "half-space n={n}: R = {rh}");
        }
    }

    #[test]
    fn schwarzschild_scalar_flat_finite_differences() {
        for n in [3usize, 5, 7] {
            let d = dim(n);
            let g = make_schwarzschild(d, 2.0, 100.0).unwrap();
            // Strip the analytic derivatives to force the FD path.
            let gfd = MetricField::from_parts(d, g.domain().clone(), {
                let g = g.clone();
                move |x| g.eval_raw(x)
            });
            let mut x = vec![0.1; n];
            x[0] = 4.0;
            let r = scalar_curvature(&gfd, &x).unwrap();
            assert!(r.abs() < 1e-6, "n={n}: FD R = {r}");
        }
    }

    #[test]
    fn ricci_trace_consistency() {
        let g = make_schwarzschild(dim(3), 2.0, 100.0).unwrap();
        let x = [2.5, 1.0, -0.3];
        let cp = curvature_point(&g, &x).unwrap();
        let ginv = g.inverse_at(&x).unwrap();
        let tr = (ginv * &cp.ric).trace();
        assert!((tr - cp.scalar).abs() < 1e-10);
    }

    #[test]
    fn conformal_scalar_curvature_formula() {
        // R(u^{4/(n-2)} flat) = u^{-(n+2)/(n-2)} * (-(4(n-1))/(n-2) Lap u)
        // with u = 1 + |x|^2 locally.
        let n = 3;
        let d = dim(n);
        let u = ScalarField::new(n, |x| 1.0 + x.iter().map(|v| v * v).sum::<f64>())
            .with_gradient(|x| DVector::from_iterator(3, x.iter().map(|v| 2.0 * v)))
            .with_hessian(|_| DMatrix::identity(3, 3) * 2.0);
        let cf = ConformalFactor::new(u.clone());
        let g = make_conformally_flat(d, full(0.5, 10.0), &cf);
        let flat = make_flat(d, full(0.5, 10.0));
        let x = [0.8, -0.2, 0.6];
        let got = scalar_curvature(&g, &x).unwrap();
        let nf = n as f64;
        let lap = laplace_beltrami(&flat, &u, &x).unwrap();
        let uv = u.value(&x);
        let want = uv.powf(-(nf + 2.0) / (nf - 2.0)) * (-4.0 * (nf - 1.0) / (nf - 2.0) * lap);
        assert!(
            (got - want).abs() < 1e-6 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }

    #[test]
    fn conformal_consistency_on_general_base() {
        // R(u^{4/(n-2)} g) from the formula vs direct computation, on a
        // Schwarzschild base with a polynomial factor.
        let n = 3;
        let d = dim(n);
        let base = make_schwarzschild(d, 2.0, 100.0).unwrap();
        let u = ScalarField::new(n, |x| 1.0 + 0.01 * x[0] * x[1])
            .with_gradient(|x| DVector::from_vec(vec![0.01 * x[1], 0.01 * x[0], 0.0]))
            .with_hessian(|_| {
                let mut m = DMatrix::zeros(3, 3);
                m[(0, 1)] = 0.01;
                m[(1, 0)] = 0.01;
                m
            });
        let cf = ConformalFactor::new(u.clone());
        let gu = conformal_scale(&base, &cf);
        let x = [2.0, 1.5, -0.5];
        let direct = scalar_curvature(&gu, &x).unwrap();
        let nf = n as f64;
        let lap = laplace_beltrami(&base, &u, &x).unwrap();
        let rbase = scalar_curvature(&base, &x).unwrap();
        let uv = u.value(&x);
        let formula = uv.powf(-(nf + 2.0) / (nf - 2.0))
            * (-4.0 * (nf - 1.0) / (nf - 2.0) * lap + rbase * uv);
        assert!(
            (direct - formula).abs() < 1e-6 * formula.abs().max(1.0),
            "{direct} vs {formula}"
        );
    }

    #[test]
    fn laplacian_closed_forms() {
        let flat = make_flat(dim(3), full(0.5, 50.0));
        // harmonic: |x|^{-1} away from the origin
        let h = ScalarField::radial(3, |r| 1.0 / r, |r| -1.0 / (r * r), |r| 2.0 / r.powi(3));
        assert!(laplace_beltrami(&flat, &h, &[1.0, 2.0, -0.5]).unwrap().abs() < 1e-12);
        // |x|^2 -> 2n
        let q = ScalarField::radial(3, |r| r * r, |r| 2.0 * r, |_| 2.0);
        let v = laplace_beltrami(&flat, &q, &[1.0, 0.3, 0.2]).unwrap();
        assert!((v - 6.0).abs() < 1e-12);
        // Radial reduction on Schwarzschild: Lap_g f = u^{-p}[f'' + 2 f'/r
        //   + 2 (u'/u) f'] for n=3, f radial.
        let g = make_schwarzschild(dim(3), 2.0, 100.0).unwrap();
        let f = ScalarField::radial(3, |r| r, |_| 1.0, |_| 0.0);
        let x = [2.0, 1.0, 1.5];
        let r = crate::domain::norm(&x);
        let u = 1.0 + 1.0 / r;
        let du = -1.0 / (r * r);
        let p = 4.0;
        let want = u.powf(-p) * (2.0 / r + 2.0 * du / u);
        let got = laplace_beltrami(&g, &f, &x).unwrap();
        assert!((got - want).abs() < 1e-6 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn linearization_flat_conformal_direction() {
        // sigma = v * flat metric: DR = -(n-1) Lap v on flat background.
        let n = 3;
        let flat = make_flat(dim(n), full(0.5, 50.0));
        let v = ScalarField::new(n, |x| x[0] * x[0] - 2.0 * x[1] * x[2])
            .with_gradient(|x| DVector::from_vec(vec![2.0 * x[0], -2.0 * x[2], -2.0 * x[1]]))
            .with_hessian(|_| {
                let mut m = DMatrix::zeros(3, 3);
                m[(0, 0)] = 2.0;
                m[(1, 2)] = -2.0;
                m[(2, 1)] = -2.0;
                m
            });
        let v1 = v.clone();
        let v2 = v.clone();
        let v3 = v.clone();
        let sigma = SymTensorField::new(n, move |x| DMatrix::identity(n, n) * v1.value(x))
            .with_first(move |x| {
                let g = v2.gradient(x);
                (0..n).map(|k| DMatrix::identity(n, n) * g[k]).collect()
            })
            .with_second(move |x| {
                let h = v3.hessian(x);
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|l| DMatrix::identity(n, n) * h[(k, l)])
                            .collect()
                    })
                    .collect()
            });
        let x = [1.0, 0.4, -0.8];
        let dr = linearized_scalar_curvature(&flat, &sigma, &x).unwrap();
        let lap_v = v.hessian(&x).trace();
        let want = -(n as f64 - 1.0) * lap_v;
        assert!((dr - want).abs() < 1e-9, "{dr} vs {want}");
        // sigma = 0 -> 0
        let zero = SymTensorField::new(n, move |_| DMatrix::zeros(n, n));
        assert_eq!(
            linearized_scalar_curvature(&flat, &zero, &x).unwrap(),
            0.0
        );
    }

    #[test]
    fn linearization_matches_difference_quotient() {
        // |DR(sigma) - (R(g + t sigma) - R(g))/t| decays linearly in t.
        let n = 3;
        let g = make_schwarzschild(dim(n), 2.0, 100.0).unwrap();
        let bump = ScalarField::radial(
            n,
            |r| (-(r - 3.0) * (r - 3.0)).exp(),
            |r| -2.0 * (r - 3.0) * (-(r - 3.0) * (r - 3.0)).exp(),
            |r| (4.0 * (r - 3.0) * (r - 3.0) - 2.0) * (-(r - 3.0) * (r - 3.0)).exp(),
        );
        let b1 = bump.clone();
        let b2 = bump.clone();
        let b3 = bump.clone();
        let coef = DMatrix::from_fn(n, n, |i, j| if i <= j { (i + j) as f64 * 0.3 + 0.5 } else { 0.0 });
        let sym = (&coef + coef.transpose()) * 0.5;
        let s1 = sym.clone();
        let s2 = sym.clone();
        let s3 = sym.clone();
        let sigma = SymTensorField::new(n, move |x| &s1 * b1.value(x))
            .with_first(move |x| {
                let gr = b2.gradient(x);
                (0..n).map(|k| &s2 * gr[k]).collect()
            })
            .with_second(move |x| {
                let h = b3.hessian(x);
                (0..n)
                    .map(|k| (0..n).map(|l| &s3 * h[(k, l)]).collect())
                    .collect()
            });
        let x = [3.2, 0.5, 0.1];
        let dr = linearized_scalar_curvature(&g, &sigma, &x).unwrap();
        let r0 = scalar_curvature(&g, &x).unwrap();
        let diff_quot = |t: f64| {
            let gt = g.add_tensor(&sigma, t);
            (scalar_curvature(&gt, &x).unwrap() - r0) / t
        };
        let e1 = (diff_quot(1e-3) - dr).abs();
        let e2 = (diff_quot(5e-4) - dr).abs();
        let ratio = e1 / e2;
        assert!(
            (1.7..=2.3).contains(&ratio),
            "first-order convergence ratio {ratio} (errors {e1:.3e}, {e2:.3e})"
        );
    }

    #[test]
    fn fd_fallback_with_fourth_order_stencil() {
        let d = dim(3);
        let g = make_schwarzschild(d, 2.0, 100.0).unwrap();
        let gfd = MetricField::from_parts(d, g.domain().clone(), {
            let g = g.clone();
            move |x| g.eval_raw(x)
        })
        .with_fd_order(FdOrder::Four);
        let x = [3.0, 1.0, 0.5];
        let r4 = scalar_curvature(&gfd, &x).unwrap();
        assert!(r4.abs() < 1e-8, "4th-order FD R = {r4}");
        let _ = FdRule::default();
    }
}
