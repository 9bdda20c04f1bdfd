//! Closure-backed scalar and symmetric-tensor fields on a chart.
//!
//! Fields carry optional analytic first and second derivatives. When a
//! derivative is missing, central finite differences with the step rule
//! `h = max(floor, rel * |x|)` fill in; a fourth-order stencil is selectable
//! per field. Stencils may sample just outside the declared domain where the
//! defining formula still extends.

use crate::domain::norm;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub type DynScalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DynGrad = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type DynHess = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type DynMat = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type DynMatGrad = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
pub type DynMatHess = Arc<dyn Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    Two,
    Four,
}

/// Finite-difference step policy: `h = max(floor, rel * |x|)`.
#[derive(Debug, Clone, Copy)]
pub struct FdRule {
    pub floor: f64,
    pub rel: f64,
    pub order: FdOrder,
}

impl Default for FdRule {
    fn default() -> Self {
        FdRule {
            floor: 1e-4,
            rel: 1e-3,
            order: FdOrder::Two,
        }
    }
}

impl FdRule {
    pub fn step(&self, x: &[f64]) -> f64 {
        self.floor.max(self.rel * norm(x))
    }

    pub fn with_order(self, order: FdOrder) -> Self {
        FdRule { order, ..self }
    }
}

fn shifted(x: &[f64], k: usize, dh: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += dh;
    y
}

pub(crate) fn fd_partial<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], k: usize, rule: &FdRule) -> f64 {
    let h = rule.step(x);
    match rule.order {
        FdOrder::Two => (f(&shifted(x, k, h)) - f(&shifted(x, k, -h))) / (2.0 * h),
        FdOrder::Four => {
            (-f(&shifted(x, k, 2.0 * h)) + 8.0 * f(&shifted(x, k, h))
                - 8.0 * f(&shifted(x, k, -h))
                + f(&shifted(x, k, -2.0 * h)))
                / (12.0 * h)
        }
    }
}

pub(crate) fn fd_second<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x: &[f64],
    k: usize,
    l: usize,
    rule: &FdRule,
) -> f64 {
    let h = rule.step(x);
    if k == l {
        match rule.order {
            FdOrder::Two => {
                (f(&shifted(x, k, h)) - 2.0 * f(x) + f(&shifted(x, k, -h))) / (h * h)
            }
            FdOrder::Four => {
                (-f(&shifted(x, k, 2.0 * h)) + 16.0 * f(&shifted(x, k, h)) - 30.0 * f(x)
                    + 16.0 * f(&shifted(x, k, -h))
                    - f(&shifted(x, k, -2.0 * h)))
                    / (12.0 * h * h)
            }
        }
    } else {
        match rule.order {
            FdOrder::Two => {
                let pp = f(&shifted(&shifted(x, k, h), l, h));
                let pm = f(&shifted(&shifted(x, k, h), l, -h));
                let mp = f(&shifted(&shifted(x, k, -h), l, h));
                let mm = f(&shifted(&shifted(x, k, -h), l, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            }
            FdOrder::Four => {
                // Nested fourth-order first-derivative stencils.
                let g = |y: &[f64]| fd_partial(f, y, l, rule);
                let h2 = rule.step(x);
                (-g(&shifted(x, k, 2.0 * h2)) + 8.0 * g(&shifted(x, k, h2))
                    - 8.0 * g(&shifted(x, k, -h2))
                    + g(&shifted(x, k, -2.0 * h2)))
                    / (12.0 * h2)
            }
        }
    }
}

/// A scalar field with optional analytic derivatives.
#[derive(Clone)]
pub struct ScalarField {
    pub n: usize,
    f: DynScalar,
    grad: Option<DynGrad>,
    hess: Option<DynHess>,
    pub fd: FdRule,
}

impl ScalarField {
    pub fn new(n: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            n,
            f: Arc::new(f),
            grad: None,
            hess: None,
            fd: FdRule::default(),
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn with_fd(mut self, fd: FdRule) -> Self {
        self.fd = fd;
        self
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.grad.is_some() && self.hess.is_some()
    }

    /// Constant field.
    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField::new(n, move |_| c)
            .with_gradient(move |_| DVector::zeros(n))
            .with_hessian(move |_| DMatrix::zeros(n, n))
    }

    /// Radial field `x -> f(|x|)` from 1-d profile closures.
    pub fn radial(
        n: usize,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let f = Arc::new(f);
        let df = Arc::new(df);
        let d2f = Arc::new(d2f);
        let fv = f.clone();
        let dfg = df.clone();
        let dfh = df.clone();
        ScalarField::new(n, move |x| fv(norm(x)))
            .with_gradient(move |x| {
                let r = norm(x);
                if r < 1e-12 {
                    // smooth radial profiles have vanishing gradient at 0
                    return DVector::zeros(n);
                }
                let c = dfg(r) / r;
                DVector::from_iterator(n, x.iter().map(|xi| c * xi))
            })
            .with_hessian(move |x| {
                let r = norm(x);
                if r < 1e-12 {
                    return DMatrix::identity(n, n) * d2f(r);
                }
                let d1 = dfh(r);
                let d2 = d2f(r);
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut v = (d2 - d1 / r) * x[i] * x[j] / (r * r);
                        if i == j {
                            v += d1 / r;
                        }
                        m[(i, j)] = v;
                    }
                }
                m
            })
    }

    /// The field composed with a linear map, `x -> f(R x)`. Derivatives are
    /// pulled back with the chain rule when analytic ones are present.
    pub fn pullback_linear(&self, r: DMatrix<f64>) -> Self {
        let n = self.n;
        let rt = r.transpose();
        let f = self.f.clone();
        let r0 = r.clone();
        let mut out = ScalarField::new(n, move |x| {
            let y = &r0 * DVector::from_column_slice(x);
            f(y.as_slice())
        })
        .with_fd(self.fd);
        if let Some(g) = self.grad.clone() {
            let r1 = r.clone();
            let rt1 = rt.clone();
            out = out.with_gradient(move |x| {
                let y = &r1 * DVector::from_column_slice(x);
                &rt1 * g(y.as_slice())
            });
        }
        if let Some(h) = self.hess.clone() {
            let r2 = r.clone();
            let rt2 = rt.clone();
            out = out.with_hessian(move |x| {
                let y = &r2 * DVector::from_column_slice(x);
                &rt2 * h(y.as_slice()) * &r2
            });
        }
        out
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        if let Some(g) = &self.grad {
            g(x)
        } else {
            DVector::from_iterator(self.n, (0..self.n).map(|k| fd_partial(&*self.f, x, k, &self.fd)))
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(h) = &self.hess {
            h(x)
        } else {
            let mut m = DMatrix::zeros(self.n, self.n);
            for k in 0..self.n {
                for l in k..self.n {
                    let v = fd_second(&*self.f, x, k, l, &self.fd);
                    m[(k, l)] = v;
                    m[(l, k)] = v;
                }
            }
            m
        }
    }
}

/// A positive scalar field used as a conformal factor.
#[derive(Clone)]
pub struct ConformalFactor(pub ScalarField);

impl ConformalFactor {
    pub fn new(field: ScalarField) -> Self {
        ConformalFactor(field)
    }

    pub fn checked_value(&self, x: &[f64]) -> crate::error::Result<f64> {
        let v = self.0.value(x);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(crate::error::CoreError::NonPositiveFactor {
                point: x.to_vec(),
                value: v,
            })
        }
    }
}

/// A symmetric (0,2)-tensor field with optional analytic derivatives.
#[derive(Clone)]
pub struct SymTensorField {
    pub n: usize,
    t: DynMat,
    dt: Option<DynMatGrad>,
    d2t: Option<DynMatHess>,
    pub fd: FdRule,
}

impl SymTensorField {
    pub fn new(n: usize, t: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        SymTensorField {
            n,
            t: Arc::new(t),
            dt: None,
            d2t: None,
            fd: FdRule::default(),
        }
    }

    pub fn with_first(mut self, dt: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(dt));
        self
    }

    pub fn with_second(
        mut self,
        d2t: impl Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync + 'static,
    ) -> Self {
        self.d2t = Some(Arc::new(d2t));
        self
    }

    pub fn with_fd(mut self, fd: FdRule) -> Self {
        self.fd = fd;
        self
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.dt.is_some() && self.d2t.is_some()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        (self.t)(x)
    }

    /// `[k] -> d_k sigma` as a matrix.
    pub fn first_derivs(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        if let Some(dt) = &self.dt {
            dt(x)
        } else {
            (0..self.n)
                .map(|k| self.fd_component_partial(x, k))
                .collect()
        }
    }

    /// `[k][l] -> d_k d_l sigma` as matrices, symmetric in `(k, l)`.
    pub fn second_derivs(&self, x: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        if let Some(d2t) = &self.d2t {
            d2t(x)
        } else {
            let n = self.n;
            let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
            for k in 0..n {
                for l in k..n {
                    let m = self.fd_component_second(x, k, l);
                    out[k][l] = m.clone();
                    out[l][k] = m;
                }
            }
            out
        }
    }

    fn fd_component_partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        let h = self.fd.step(x);
        match self.fd.order {
            FdOrder::Two => {
                let p = (self.t)(&shifted(x, k, h));
                let m = (self.t)(&shifted(x, k, -h));
                (p - m) / (2.0 * h)
            }
            FdOrder::Four => {
                let p2 = (self.t)(&shifted(x, k, 2.0 * h));
                let p1 = (self.t)(&shifted(x, k, h));
                let m1 = (self.t)(&shifted(x, k, -h));
                let m2 = (self.t)(&shifted(x, k, -2.0 * h));
                (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
            }
        }
    }

    fn fd_component_second(&self, x: &[f64], k: usize, l: usize) -> DMatrix<f64> {
        let h = self.fd.step(x);
        if k == l {
            match self.fd.order {
                FdOrder::Two => {
                    let p = (self.t)(&shifted(x, k, h));
                    let c = (self.t)(x);
                    let m = (self.t)(&shifted(x, k, -h));
                    (p - 2.0 * c + m) / (h * h)
                }
                FdOrder::Four => {
                    let p2 = (self.t)(&shifted(x, k, 2.0 * h));
                    let p1 = (self.t)(&shifted(x, k, h));
                    let c = (self.t)(x);
                    let m1 = (self.t)(&shifted(x, k, -h));
                    let m2 = (self.t)(&shifted(x, k, -2.0 * h));
                    (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h)
                }
            }
        } else {
            match self.fd.order {
                FdOrder::Two => {
                    let pp = (self.t)(&shifted(&shifted(x, k, h), l, h));
                    let pm = (self.t)(&shifted(&shifted(x, k, h), l, -h));
                    let mp = (self.t)(&shifted(&shifted(x, k, -h), l, h));
                    let mm = (self.t)(&shifted(&shifted(x, k, -h), l, -h));
                    (pp - pm - mp + mm) / (4.0 * h * h)
                }
                FdOrder::Four => {
                    let g = |y: &[f64]| -> DMatrix<f64> { self.fd_component_partial(y, l) };
                    let p2 = g(&shifted(x, k, 2.0 * h));
                    let p1 = g(&shifted(x, k, h));
                    let m1 = g(&shifted(x, k, -h));
                    let m2 = g(&shifted(x, k, -2.0 * h));
                    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_analytic_gradient() {
        // f = x0^2 x1 + x2
        let f = ScalarField::new(3, |x| x[0] * x[0] * x[1] + x[2]);
        let x = [1.2, -0.7, 0.4];
        let g = f.gradient(&x);
        assert!((g[0] - 2.0 * x[0] * x[1]).abs() < 1e-6);
        assert!((g[1] - x[0] * x[0]).abs() < 1e-6);
        assert!((g[2] - 1.0).abs() < 1e-8);
        let h = f.hessian(&x);
        assert!((h[(0, 1)] - 2.0 * x[0]).abs() < 1e-5);
        assert!((h[(0, 0)] - 2.0 * x[1]).abs() < 1e-5);
    }

    #[test]
    fn fourth_order_is_sharper() {
        let f2 = ScalarField::new(2, |x| (x[0] * 1.3).sin() * (x[1] * 0.7).cos());
        let f4 = f2.clone().with_fd(FdRule::default().with_order(FdOrder::Four));
        let x = [0.9_f64, 0.3];
        let exact = 1.3 * (x[0] * 1.3).cos() * (x[1] * 0.7).cos();
        let e2 = (f2.gradient(&x)[0] - exact).abs();
        let e4 = (f4.gradient(&x)[0] - exact).abs();
        assert!(e4 < e2);
    }

    #[test]
    fn radial_field_derivatives() {
        // f(r) = r^2: gradient = 2x, hessian = 2I.
        let f = ScalarField::radial(3, |r| r * r, |r| 2.0 * r, |_| 2.0);
        let x = [0.3, -1.1, 2.0];
        let g = f.gradient(&x);
        for i in 0..3 {
            assert!((g[i] - 2.0 * x[i]).abs() < 1e-12);
        }
        let h = f.hessian(&x);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((h[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conformal_factor_positivity() {
        let u = ConformalFactor::new(ScalarField::constant(3, -1.0));
        assert!(u.checked_value(&[1.0, 0.0, 0.0]).is_err());
    }
}
