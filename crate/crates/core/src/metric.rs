//! Chart-based Riemannian metric fields and the reference metrics.
//!
//! A [`MetricField`] is a map `x -> g(x)` (symmetric positive definite)
//! over a single chart domain, with optional analytic first and second
//! derivatives and a finite-difference fallback. Reference constructors
//! cover the flat metric, conformally flat metrics, the two Schwarzschild
//! families, and collar models with prescribed boundary second fundamental
//! form.

use crate::domain::{Dimension, DomainSpec};
use crate::error::{CoreError, Result};
use crate::fields::{ConformalFactor, FdOrder, FdRule, ScalarField, SymTensorField};
use nalgebra::DMatrix;
use std::sync::Arc;

type MatFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type MatGradFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;
type MatHessFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync>;

#[derive(Clone)]
pub struct MetricField {
    dim: Dimension,
    domain: DomainSpec,
    g: MatFn,
    dg: Option<MatGradFn>,
    d2g: Option<MatHessFn>,
    /// Decay exponent tau of `|g - flat|` when known; must exceed (n-2)/2.
    pub decay_rate: Option<f64>,
    pub fd: FdRule,
}

impl MetricField {
    pub fn from_parts(
        dim: Dimension,
        domain: DomainSpec,
        g: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        MetricField {
            dim,
            domain,
            g: Arc::new(g),
            dg: None,
            d2g: None,
            decay_rate: None,
            fd: FdRule::default(),
        }
    }

    pub fn with_first(mut self, dg: impl Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static) -> Self {
        self.dg = Some(Arc::new(dg));
        self
    }

    pub fn with_second(
        mut self,
        d2g: impl Fn(&[f64]) -> Vec<Vec<DMatrix<f64>>> + Send + Sync + 'static,
    ) -> Self {
        self.d2g = Some(Arc::new(d2g));
        self
    }

    pub fn with_decay(mut self, tau: f64) -> Result<Self> {
        let n = self.dim.n() as f64;
        if tau <= (n - 2.0) / 2.0 {
            return Err(CoreError::InvalidDomain(format!(
                "decay rate tau = {tau} must exceed (n-2)/2 = {}",
                (n - 2.0) / 2.0
            )));
        }
        self.decay_rate = Some(tau);
        Ok(self)
    }

    /// Switches the finite-difference fallback to a fourth-order stencil
    /// (or back); analytic derivatives are unaffected.
    pub fn with_fd_order(mut self, order: FdOrder) -> Self {
        self.fd = self.fd.with_order(order);
        self
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.dg.is_some() && self.d2g.is_some()
    }

    /// Metric matrix without domain or definiteness checks.
    #[inline]
    pub fn eval_raw(&self, x: &[f64]) -> DMatrix<f64> {
        (self.g)(x)
    }

    /// Metric matrix at a point of the domain; positive definiteness is
    /// asserted with a Cholesky factorization.
    pub fn at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check_point(x)?;
        let g = self.eval_raw(x);
        if g.clone().cholesky().is_none() {
            return Err(CoreError::NotPositiveDefinite { point: x.to_vec() });
        }
        Ok(g)
    }

    pub fn inverse_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.eval_raw(x);
        g.clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(CoreError::NotPositiveDefinite { point: x.to_vec() })
    }

    /// `[k] -> d_k g`, analytic when available, else central differences.
    pub fn first_derivs(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        if let Some(dg) = &self.dg {
            dg(x)
        } else {
            self.fd_tensor().first_derivs(x)
        }
    }

    /// `[k][l] -> d_k d_l g`.
    pub fn second_derivs(&self, x: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        if let Some(d2g) = &self.d2g {
            d2g(x)
        } else {
            self.fd_tensor().second_derivs(x)
        }
    }

    fn fd_tensor(&self) -> SymTensorField {
        let g = self.g.clone();
        SymTensorField::new(self.dim.n(), move |x| g(x)).with_fd(self.fd)
    }

    /// The metric `g + t * sigma`; derivatives combine when both sides carry
    /// analytic ones.
    pub fn add_tensor(&self, sigma: &SymTensorField, t: f64) -> MetricField {
        let g = self.g.clone();
        let s = sigma.clone();
        let mut out = MetricField::from_parts(self.dim, self.domain.clone(), move |x| {
            g(x) + s.value(x) * t
        });
        out.fd = self.fd;
        if self.has_analytic_derivatives() && sigma.has_analytic_derivatives() {
            let dg = self.dg.clone().unwrap();
            let s1 = sigma.clone();
            out = out.with_first(move |x| {
                let mut d = dg(x);
                let ds = s1.first_derivs(x);
                for (m, a) in d.iter_mut().zip(ds) {
                    *m += a * t;
                }
                d
            });
            let d2g = self.d2g.clone().unwrap();
            let s2 = sigma.clone();
            out = out.with_second(move |x| {
                let mut d = d2g(x);
                let ds = s2.second_derivs(x);
                for (row, arow) in d.iter_mut().zip(ds) {
                    for (m, a) in row.iter_mut().zip(arow) {
                        *m += a * t;
                    }
                }
                d
            });
        }
        out
    }
}

/// Flat reference metric, identity matrix with vanishing derivatives.
pub fn make_flat(dim: Dimension, domain: DomainSpec) -> MetricField {
    let n = dim.n();
    MetricField::from_parts(dim, domain, move |_| DMatrix::identity(n, n))
        .with_first(move |_| vec![DMatrix::zeros(n, n); n])
        .with_second(move |_| vec![vec![DMatrix::zeros(n, n); n]; n])
        .with_decay(n as f64)
        .expect("n > (n-2)/2")
}

/// `u^{4/(n-2)} g` for a conformal factor `u` over an arbitrary base.
pub fn conformal_scale(base: &MetricField, u: &ConformalFactor) -> MetricField {
    let n = base.dim.n();
    let p = 4.0 / (n as f64 - 2.0);
    let uf = u.0.clone();
    let b = base.clone();
    let mut out = MetricField::from_parts(base.dim, base.domain.clone(), {
        let uf = uf.clone();
        let b = b.clone();
        move |x| {
            let uv = uf.value(x);
            b.eval_raw(x) * uv.powf(p)
        }
    });
    out.fd = base.fd;
    if base.has_analytic_derivatives() && u.0.has_analytic_derivatives() {
        let uf1 = uf.clone();
        let b1 = b.clone();
        out = out.with_first(move |x| {
            let uv = uf1.value(x);
            let du = uf1.gradient(x);
            let g = b1.eval_raw(x);
            let dg = b1.first_derivs(x);
            let up = uv.powf(p);
            let upm1 = p * uv.powf(p - 1.0);
            (0..n)
                .map(|k| &g * (upm1 * du[k]) + &dg[k] * up)
                .collect()
        });
        let b2 = b.clone();
        out = out.with_second(move |x| {
            let uv = uf.value(x);
            let du = uf.gradient(x);
            let d2u = uf.hessian(x);
            let g = b2.eval_raw(x);
            let dg = b2.first_derivs(x);
            let d2g = b2.second_derivs(x);
            let up = uv.powf(p);
            let upm1 = p * uv.powf(p - 1.0);
            let upm2 = p * (p - 1.0) * uv.powf(p - 2.0);
            let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
            for k in 0..n {
                for l in 0..n {
                    let scal = upm2 * du[k] * du[l] + upm1 * d2u[(k, l)];
                    out[k][l] = &g * scal
                        + &dg[l] * (upm1 * du[k])
                        + &dg[k] * (upm1 * du[l])
                        + &d2g[k][l] * up;
                }
            }
            out
        });
    }
    out
}

/// Conformally flat metric `u^{4/(n-2)} * delta` on the given domain.
pub fn make_conformally_flat(dim: Dimension, domain: DomainSpec, u: &ConformalFactor) -> MetricField {
    conformal_scale(&make_flat(dim, domain), u)
}

/// Radial conformal factor `1 + c r^{2-n}` with analytic derivatives.
pub fn harmonic_factor(dim: Dimension, c: f64) -> ConformalFactor {
    let n = dim.n() as f64;
    ConformalFactor::new(ScalarField::radial(
        dim.n(),
        move |r| 1.0 + c * r.powf(2.0 - n),
        move |r| c * (2.0 - n) * r.powf(1.0 - n),
        move |r| c * (2.0 - n) * (1.0 - n) * r.powf(-n),
    ))
}

/// Schwarzschild space of mass `mtilde`: `(1 + mtilde/2 |x|^{2-n})^{4/(n-2)} * delta`
/// on the exterior annulus `[(mtilde/2)^{1/(n-2)}, outer]`.
pub fn make_schwarzschild(dim: Dimension, mtilde: f64, outer: f64) -> Result<MetricField> {
    if mtilde <= 0.0 {
        return Err(CoreError::NonPositiveMass(mtilde));
    }
    let n = dim.n() as f64;
    let c = mtilde / 2.0;
    let r_h = c.powf(1.0 / (n - 2.0));
    let domain = DomainSpec::full_annulus(r_h, outer)?;
    Ok(make_conformally_flat(dim, domain, &harmonic_factor(dim, c))
        .with_decay(n - 2.0)?)
}

/// Schwarzschild half-space of mass `m`: `(1 + m |x|^{2-n})^{4/(n-2)} * delta`
/// on `{x_n >= 0, m^{1/(n-2)} <= |x| <= outer}`.
pub fn make_schwarzschild_halfspace(dim: Dimension, m: f64, outer: f64) -> Result<MetricField> {
    if m <= 0.0 {
        return Err(CoreError::NonPositiveMass(m));
    }
    let n = dim.n() as f64;
    let r_h = m.powf(1.0 / (n - 2.0));
    let domain = DomainSpec::half_annulus(r_h, outer)?;
    Ok(make_conformally_flat(dim, domain, &harmonic_factor(dim, m))
        .with_decay(n - 2.0)?)
}

/// Horizon radius of the reference families: `(mtilde/2)^{1/(n-2)}` for the
/// full space, `m^{1/(n-2)}` for the half-space.
pub fn schwarzschild_horizon_radius(dim: Dimension, coeff: f64) -> f64 {
    coeff.powf(1.0 / (dim.n() as f64 - 2.0))
}

/// Model second fundamental form of the boundary at a point, with the collar
/// family it induces.
#[derive(Clone, Debug)]
pub struct BoundaryShapeModel {
    /// Prescribed `h(boundary)` in a principal basis, an (n-1)x(n-1) matrix.
    pub h0: DMatrix<f64>,
    pub profile: CollarProfile,
}

/// Second-order term of the collar family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollarProfile {
    /// `gamma_t = (I - t h0)^2 = I - 2 t h0 + t^2 h0^2`.
    Squared,
    /// `gamma_t = I - 2 t h0`.
    Linear,
}

impl BoundaryShapeModel {
    pub fn new(h0: DMatrix<f64>) -> Self {
        BoundaryShapeModel {
            h0,
            profile: CollarProfile::Squared,
        }
    }

    pub fn boundary_dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn gamma(&self, t: f64) -> DMatrix<f64> {
        let d = self.boundary_dim();
        let id = DMatrix::identity(d, d);
        match self.profile {
            CollarProfile::Squared => {
                let a = &id - &self.h0 * t;
                &a * &a
            }
            CollarProfile::Linear => &id - &self.h0 * (2.0 * t),
        }
    }

    pub fn dgamma(&self, t: f64) -> DMatrix<f64> {
        let d = self.boundary_dim();
        match self.profile {
            CollarProfile::Squared => {
                let a = DMatrix::identity(d, d) - &self.h0 * t;
                -(&self.h0 * &a + &a * &self.h0)
            }
            CollarProfile::Linear => -(&self.h0 * 2.0),
        }
    }

    pub fn d2gamma(&self, _t: f64) -> DMatrix<f64> {
        match self.profile {
            CollarProfile::Squared => &self.h0 * &self.h0 * 2.0,
            CollarProfile::Linear => DMatrix::zeros(self.boundary_dim(), self.boundary_dim()),
        }
    }

    /// Largest `t` with `gamma_t` positive definite (infinite for h0 <= 0).
    pub fn t_max_positive(&self) -> f64 {
        let eig = self.h0.clone().symmetric_eigen();
        let lam_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        if lam_max <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / lam_max
        }
    }
}

/// Collar model metric `gamma_t + dt^2` on the box
/// `[-halfwidth, halfwidth]^{n-1} x [0, t_max]`, with analytic derivatives.
pub fn make_fermi_model(
    dim: Dimension,
    model: &BoundaryShapeModel,
    t_max: f64,
    halfwidth: f64,
) -> Result<MetricField> {
    let n = dim.n();
    if model.boundary_dim() != n - 1 {
        return Err(CoreError::InvalidDomain(format!(
            "model h0 is {}x{} but n-1 = {}",
            model.h0.nrows(),
            model.h0.ncols(),
            n - 1
        )));
    }
    if t_max >= model.t_max_positive() {
        return Err(CoreError::NotPositiveDefinite {
            point: vec![0.0; n],
        });
    }
    let mut lo = vec![-halfwidth; n];
    let mut hi = vec![halfwidth; n];
    lo[n - 1] = 0.0;
    hi[n - 1] = t_max;
    let domain = DomainSpec::cuboid(lo, hi)?;

    let embed = |m: &DMatrix<f64>, n: usize| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((0, 0), (n - 1, n - 1)).copy_from(m);
        g
    };

    let m0 = model.clone();
    let m1 = model.clone();
    let m2 = model.clone();
    Ok(MetricField::from_parts(dim, domain, move |x| {
        let mut g = embed(&m0.gamma(x[n - 1]), n);
        g[(n - 1, n - 1)] = 1.0;
        g
    })
    .with_first(move |x| {
        let mut d = vec![DMatrix::zeros(n, n); n];
        d[n - 1] = embed(&m1.dgamma(x[n - 1]), n);
        d
    })
    .with_second(move |x| {
        let mut d = vec![vec![DMatrix::zeros(n, n); n]; n];
        d[n - 1][n - 1] = embed(&m2.d2gamma(x[n - 1]), n);
        d
    }))
}

/// Even reflection of a half-space metric across the wall `x_n = 0`,
/// defined on the full annulus. Components `g_{in}` (i < n) flip sign in the
/// lower copy; the result is continuous across the wall and smooth wherever
/// the boundary is totally geodesic.
pub fn reflect_across_wall(g: &MetricField) -> Result<MetricField> {
    if !g.domain().is_half_space() {
        return Err(CoreError::InvalidDomain(
            "reflection requires a half-space domain".into(),
        ));
    }
    let n = g.dim().n();
    let domain = DomainSpec::full_annulus(g.domain().inner_radius, g.domain().outer_radius)?;

    fn mirror(x: &[f64], n: usize) -> (Vec<f64>, bool) {
        let lower = x[n - 1] < 0.0;
        let mut y = x.to_vec();
        if lower {
            y[n - 1] = -y[n - 1];
        }
        (y, lower)
    }
    fn conjugate(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
        // S m S with S = diag(1, .., 1, -1).
        let mut out = m.clone();
        for i in 0..n - 1 {
            out[(i, n - 1)] = -out[(i, n - 1)];
            out[(n - 1, i)] = -out[(n - 1, i)];
        }
        out
    }

    let base = g.clone();
    let mut out = MetricField::from_parts(g.dim(), domain, {
        let base = base.clone();
        move |x| {
            let (y, lower) = mirror(x, n);
            let m = base.eval_raw(&y);
            if lower {
                conjugate(&m, n)
            } else {
                m
            }
        }
    });
    out.fd = g.fd;
    out.decay_rate = g.decay_rate;
    if g.has_analytic_derivatives() {
        let b1 = base.clone();
        out = out.with_first(move |x| {
            let (y, lower) = mirror(x, n);
            let d = b1.first_derivs(&y);
            if !lower {
                return d;
            }
            d.into_iter()
                .enumerate()
                .map(|(k, m)| {
                    let s = if k == n - 1 { -1.0 } else { 1.0 };
                    conjugate(&m, n) * s
                })
                .collect()
        });
        let b2 = base.clone();
        out = out.with_second(move |x| {
            let (y, lower) = mirror(x, n);
            let d = b2.second_derivs(&y);
            if !lower {
                return d;
            }
            d.into_iter()
                .enumerate()
                .map(|(k, row)| {
                    row.into_iter()
                        .enumerate()
                        .map(|(l, m)| {
                            let s = if k == n - 1 { -1.0 } else { 1.0 }
                                * if l == n - 1 { -1.0 } else { 1.0 };
                            conjugate(&m, n) * s
                        })
                        .collect()
                })
                .collect()
        });
    }
    Ok(out)
}

/// Max-norm deviation of `g` from the flat metric at `x`; the decay checks
/// track `|g - flat| * |x|^{n-2}`.
pub fn flat_deviation(g: &MetricField, x: &[f64]) -> f64 {
    let n = g.dim().n();
    let m = g.eval_raw(x);
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((m[(i, j)] - id).abs());
        }
    }
    dev
}
