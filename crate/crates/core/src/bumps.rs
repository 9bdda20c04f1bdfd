//! Explicit bump and cutoff constructions with their defining inequalities:
//! smooth steps, collar cutoffs `psi_i` (inward-tilted near a minimal
//! sphere and the wall), the subharmonic boundary bump `f_eps`, and the
//! balance bump `rho` whose Laplacian dominates its own C^2 size on the
//! outer shell.
//!
//! Support discipline: every construction here is exactly zero outside its
//! declared support set, not merely small.

use crate::domain::{norm, Dimension};
use crate::elliptic::RadialProfile;
use crate::error::{CoreError, Result};
use crate::fields::ScalarField;
use nalgebra::{DMatrix, DVector};

/// `exp(-1/x)` for x > 0, else 0, with two derivatives.
#[inline]
fn bexp(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let b = (-1.0 / x).exp();
    let b1 = b / (x * x);
    let b2 = b * (1.0 - 2.0 * x) / (x * x * x * x);
    (b, b1, b2)
}

/// Smooth step: 0 for x <= 0, 1 for x >= 1, flat to all orders at the ends.
#[derive(Debug, Clone, Copy)]
pub struct SmoothStep;

impl SmoothStep {
    pub fn value(x: f64) -> f64 {
        Self::jet(x).0
    }

    /// (S, S', S'').
    pub fn jet(x: f64) -> (f64, f64, f64) {
        if x <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if x >= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        let (a, a1, a2) = bexp(x);
        let (b, b1n, b2n) = bexp(1.0 - x);
        // d/dx B(1-x) = -B'(1-x), d2/dx2 B(1-x) = B''(1-x)
        let b1 = -b1n;
        let b2 = b2n;
        let s = a + b;
        let v = a / s;
        let ds = a1 + b1;
        let d2s = a2 + b2;
        let d1 = (a1 * s - a * ds) / (s * s);
        let d2 = (a2 * s - a * d2s) / (s * s) - 2.0 * ds * (a1 * s - a * ds) / (s * s * s);
        (v, d1, d2)
    }
}

/// 1-d plateau profile in t: `height` on |t| <= inner, 0 for |t| >= outer,
/// smooth monotone joins.
pub fn plateau_profile(height: f64, inner: f64, outer: f64) -> RadialProfile {
    let w = outer - inner;
    assert!(w > 0.0 && inner > 0.0);
    RadialProfile::new(
        move |t| {
            let a = (outer - t.abs()) / w;
            height * SmoothStep::value(a)
        },
        move |t| {
            let a = (outer - t.abs()) / w;
            let (_, d1, _) = SmoothStep::jet(a);
            -height * d1 / w * t.signum()
        },
        move |t| {
            let a = (outer - t.abs()) / w;
            let (_, _, d2) = SmoothStep::jet(a);
            height * d2 / (w * w)
        },
    )
}

// ---------------------------------------------------------------------------
// psi_i collar cutoffs
// ---------------------------------------------------------------------------

/// `alpha`: alpha(0) = 0, alpha'(0) = -1, supported in (-1, 1).
fn alpha_fn(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        -t * (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// `beta`: 1 on |t| <= 1, 0 on |t| >= 2, values in [0, 1].
fn beta_fn(t: f64) -> f64 {
    SmoothStep::value(2.0 - t.abs())
}

/// Model geometry for the collar cutoffs: the minimal sphere `|x| = r0`
/// meeting the wall `x_n = 0` orthogonally. The signed distances grow along
/// the outward normal of the sphere and into the upper half-space.
#[derive(Debug, Clone, Copy)]
pub struct PsiModel {
    pub sphere_radius: f64,
}

/// `psi_i = i^{-3} [alpha(i a) + beta(i a) alpha(i b)]` with
/// `a = |x| - r0`, `b = x_n`.
pub fn make_psi_collar(dim: Dimension, model: PsiModel, i: u32) -> Result<ScalarField> {
    if i == 0 {
        return Err(CoreError::Precondition("psi index must be positive".into()));
    }
    let n = dim.n();
    let r0 = model.sphere_radius;
    let ii = i as f64;
    Ok(ScalarField::new(n, move |x| {
        let a = norm(x) - r0;
        let b = x[n - 1];
        (alpha_fn(ii * a) + beta_fn(ii * a) * alpha_fn(ii * b)) / (ii * ii * ii)
    }))
}

#[derive(Debug, Clone)]
pub struct PsiReport {
    pub i: u32,
    /// max over sphere samples of i^2 * d_nu psi (wants <= -1/2).
    pub sphere_slope_max: f64,
    /// max over wall samples of i^2 * d_nu psi (wants <= 0).
    pub wall_slope_max: f64,
    /// sup over collar samples of |psi| + |D psi| + |D^2 psi|.
    pub c2_size: f64,
    /// true when psi vanished identically outside the 2/i collar.
    pub supported: bool,
}

/// Samples the defining inequalities of `psi_i`.
pub fn verify_psi_collar(dim: Dimension, model: PsiModel, i: u32) -> Result<PsiReport> {
    let n = dim.n();
    let psi = make_psi_collar(dim, model, i)?;
    let r0 = model.sphere_radius;
    let ii = i as f64;

    // Points on the sphere with x_n >= 0; nu(Sigma) is radial there.
    let mut sphere_slope_max = f64::NEG_INFINITY;
    for k in 0..32 {
        let t = k as f64 / 31.0 * std::f64::consts::FRAC_PI_2;
        let mut x = vec![0.0; n];
        x[0] = r0 * t.cos();
        x[n - 1] = r0 * t.sin();
        let g = psi.gradient(&x);
        let dn: f64 = x.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / r0;
        sphere_slope_max = sphere_slope_max.max(ii * ii * dn);
    }

    let mut wall_slope_max = f64::NEG_INFINITY;
    for k in 0..32 {
        let r = r0 * (0.2 + 1.8 * k as f64 / 31.0);
        let mut x = vec![0.0; n];
        x[0] = r;
        let g = psi.gradient(&x);
        wall_slope_max = wall_slope_max.max(ii * ii * g[n - 1]);
    }

    let mut c2_size: f64 = 0.0;
    let mut supported = true;
    for k in 0..64 {
        let t = k as f64 / 63.0;
        let mut x = vec![0.0; n];
        x[0] = (r0 - 3.0 / ii) + t * 6.0 / ii;
        x[n - 1] = t * 3.0 / ii;
        if x[0] <= 0.0 {
            continue;
        }
        let size = psi.value(&x).abs() + psi.gradient(&x).norm() + psi.hessian(&x).norm();
        c2_size = c2_size.max(size);
        let a = norm(&x) - r0;
        if a.abs() >= 2.0 / ii && x[n - 1] >= 2.0 / ii && psi.value(&x) != 0.0 {
            supported = false;
        }
    }
    let mut far = vec![0.0; n];
    far[0] = r0 + 3.0 / ii;
    far[n - 1] = 3.0 / ii;
    if psi.value(&far) != 0.0 {
        supported = false;
    }

    Ok(PsiReport {
        i,
        sphere_slope_max,
        wall_slope_max,
        c2_size,
        supported,
    })
}

// ---------------------------------------------------------------------------
// f_eps: the subharmonic boundary bump
// ---------------------------------------------------------------------------

/// `f_eps(x) = exp(-(n+2)/(2 eps - |x + eps e_n|))` where
/// `|x + eps e_n| < 2 eps`, else 0. On the upper half-space its flat
/// Laplacian satisfies `Lap f >= (n+2)(2 eps - rho)^{-4} f`.
pub fn make_f_subharmonic(dim: Dimension, eps: f64) -> Result<ScalarField> {
    if eps <= 0.0 {
        return Err(CoreError::Precondition("eps must be positive".into()));
    }
    let n = dim.n();
    let nf = n as f64;
    let prof = move |rho: f64| -> (f64, f64, f64) {
        let gap = 2.0 * eps - rho;
        if gap <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let f = (-(nf + 2.0) / gap).exp();
        let x2 = 1.0 / (gap * gap);
        let d1 = -(nf + 2.0) * x2 * f;
        let d2 = ((nf + 2.0) * (nf + 2.0) * x2 * x2 - 2.0 * (nf + 2.0) * x2 / gap) * f;
        (f, d1, d2)
    };
    Ok(ScalarField::new(n, move |x| {
        let mut rho2 = 0.0;
        for (k, xi) in x.iter().enumerate() {
            let c = if k == n - 1 { xi + eps } else { *xi };
            rho2 += c * c;
        }
        prof(rho2.sqrt()).0
    })
    .with_gradient(move |x| {
        let mut sh = x.to_vec();
        sh[n - 1] += eps;
        let rho = norm(&sh);
        let (_, d1, _) = prof(rho);
        DVector::from_iterator(n, sh.iter().map(|c| d1 * c / rho))
    })
    .with_hessian(move |x| {
        let mut sh = x.to_vec();
        sh[n - 1] += eps;
        let rho = norm(&sh);
        let (_, d1, d2) = prof(rho);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = (d2 - d1 / rho) * sh[i] * sh[j] / (rho * rho);
                if i == j {
                    v += d1 / rho;
                }
                m[(i, j)] = v;
            }
        }
        m
    }))
}

#[derive(Debug, Clone)]
pub struct SubharmonicBumpReport {
    pub eps: f64,
    /// min over upper-half-space samples of Lap f - (n+2)(2eps-rho)^{-4} f.
    pub laplacian_margin_min: f64,
    pub positive_at_origin: bool,
    /// max of |Df| - (n+2) eps^2 (2eps-rho)^{-4} f (wants <= 0).
    pub gradient_bound_excess: f64,
    pub supported: bool,
}

pub fn verify_f_subharmonic(dim: Dimension, eps: f64) -> Result<SubharmonicBumpReport> {
    let n = dim.n();
    let nf = n as f64;
    let f = make_f_subharmonic(dim, eps)?;
    let mut margin = f64::INFINITY;
    let mut grad_excess = f64::NEG_INFINITY;
    let mut supported = true;
    for k in 0..200 {
        let t = k as f64 / 199.0;
        let ang = t * std::f64::consts::FRAC_PI_2;
        for frac in [0.15, 0.5, 0.85] {
            // points at distance rho in (eps, 2 eps) from the shifted center
            let rr = eps * (1.0 + frac);
            let mut x = vec![0.0; n];
            x[0] = rr * ang.sin();
            x[n - 1] = rr * ang.cos() - eps;
            if x[n - 1] < 0.0 {
                continue;
            }
            let mut sh = x.clone();
            sh[n - 1] += eps;
            let rho = norm(&sh);
            if rho >= 2.0 * eps * 0.999 {
                continue;
            }
            let fv = f.value(&x);
            let lap = f.hessian(&x).trace();
            let bound = (nf + 2.0) * (2.0 * eps - rho).powi(-4) * fv;
            margin = margin.min(lap - bound);
            let gb = (nf + 2.0) * eps * eps * (2.0 * eps - rho).powi(-4) * fv;
            grad_excess = grad_excess.max(f.gradient(&x).norm() - gb);
        }
    }
    let mut far = vec![0.0; n];
    far[0] = 3.0 * eps;
    if f.value(&far) != 0.0 {
        supported = false;
    }
    let origin = vec![0.0; n];
    let lap0 = f.hessian(&origin).trace();
    Ok(SubharmonicBumpReport {
        eps,
        laplacian_margin_min: margin,
        positive_at_origin: lap0 > 0.0,
        gradient_bound_excess: grad_excess,
        supported,
    })
}

// ---------------------------------------------------------------------------
// rho: the balance bump
// ---------------------------------------------------------------------------

/// 1-d profile of the balance bump: 1 on [0, 1/4], a smooth positive bridge
/// on (1/4, 1/2), `exp(-(n+1)/(1-s))` on [1/2, 1), 0 beyond.
pub fn balance_eta(n: usize) -> RadialProfile {
    let nf = n as f64;
    let e_jet = move |s: f64| -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let g = 1.0 - s;
        let e = (-(nf + 1.0) / g).exp();
        let d1 = -(nf + 1.0) / (g * g) * e * (-1.0);
        // d/ds (1-s)^{-1} = (1-s)^{-2}: the exponent -(n+1)/(1-s) has
        // derivative -(n+1)/(1-s)^2, so E' = -(n+1)(1-s)^{-2} E.
        let d1 = -d1;
        let _ = d1;
        let e1 = -(nf + 1.0) / (g * g) * e;
        let e2 = ((nf + 1.0) * (nf + 1.0) / (g * g * g * g)
            - 2.0 * (nf + 1.0) / (g * g * g))
            * e;
        (e, e1, e2)
    };
    let jet = move |s: f64| -> (f64, f64, f64) {
        let s = s.abs();
        if s <= 0.25 {
            (1.0, 0.0, 0.0)
        } else if s < 0.5 {
            // W * 1 + (1 - W) * E with W a flat-ended step in (1/2 - s)/(1/4)
            let u = (0.5 - s) / 0.25;
            let (w, w1u, w2u) = SmoothStep::jet(u);
            let w1 = -w1u / 0.25;
            let w2 = w2u / (0.25 * 0.25);
            let (e, e1, e2) = e_jet(s);
            (
                w + (1.0 - w) * e,
                w1 + e1 - (w1 * e + w * e1),
                w2 + e2 - (w2 * e + 2.0 * w1 * e1 + w * e2),
            )
        } else {
            e_jet(s)
        }
    };
    RadialProfile::new(move |s| jet(s).0, move |s| jet(s).1, move |s| jet(s).2)
}

/// The balance bump on the wall directions: `rho(y) = eta(|y|)` as a field
/// in n-1 variables.
pub fn make_rho_balance(dim: Dimension) -> ScalarField {
    let d = dim.n() - 1;
    let eta = balance_eta(dim.n());
    let (f, df, d2f) = (eta.f.clone(), eta.df.clone(), eta.d2f.clone());
    ScalarField::radial(d, move |r| f(r), move |r| df(r), move |r| d2f(r))
}

#[derive(Debug, Clone)]
pub struct BalanceReport {
    /// Measured dominance constant: sup over the shell of
    /// (|rho| + |D rho| + |D^2 rho|) / Lap rho.
    pub dominance_constant: f64,
    /// min of Lap rho over the shell (wants > 0).
    pub shell_laplacian_min: f64,
    pub plateau_ok: bool,
    pub supported: bool,
    pub positive_inside: bool,
}

pub fn verify_rho_balance(dim: Dimension) -> BalanceReport {
    let d = dim.n() - 1;
    let rho = make_rho_balance(dim);
    let mut dominance: f64 = 0.0;
    let mut lap_min = f64::INFINITY;
    for k in 0..400 {
        // stay below the f64 underflow radius of the exponential tail
        let r = 0.5 + 0.485 * k as f64 / 399.0;
        let mut y = vec![0.0; d];
        y[0] = r / 2.0_f64.sqrt();
        y[d - 1] += r / 2.0_f64.sqrt();
        let lap = rho.hessian(&y).trace();
        lap_min = lap_min.min(lap);
        let size = rho.value(&y).abs() + rho.gradient(&y).norm() + rho.hessian(&y).norm();
        if lap > 0.0 {
            dominance = dominance.max(size / lap);
        } else {
            dominance = f64::INFINITY;
        }
    }
    let mut plateau_ok = true;
    let mut positive_inside = true;
    // The exponential tail underflows f64 past r ~ 0.99; sample below that.
    for k in 0..100 {
        let r = 0.985 * k as f64 / 99.0;
        let mut y = vec![0.0; d];
        y[0] = r;
        let v = rho.value(&y);
        if r <= 0.25 && (v - 1.0).abs() > 1e-14 {
            plateau_ok = false;
        }
        if v <= 0.0 {
            positive_inside = false;
        }
    }
    let mut far = vec![0.0; d];
    far[0] = 1.0;
    let supported = rho.value(&far) == 0.0 && {
        far[0] = 1.7;
        rho.value(&far) == 0.0
    };
    BalanceReport {
        dominance_constant: dominance,
        shell_laplacian_min: lap_min,
        plateau_ok,
        supported,
        positive_inside,
    }
}

/// Collar bump of the perturbation construction:
/// `exp(-(1 - s/delta)^{-1})` on `0 <= s < delta`, 0 beyond, with two
/// derivatives. It decays to zero with all derivatives at `s = delta` and
/// starts at `e^{-1}` with slope `-e^{-1}/delta`.
pub fn collar_bump(delta: f64) -> RadialProfile {
    RadialProfile::new(
        move |s| {
            if !(0.0..delta).contains(&s) {
                0.0
            } else {
                (-1.0 / (1.0 - s / delta)).exp()
            }
        },
        move |s| {
            if !(0.0..delta).contains(&s) {
                0.0
            } else {
                let g = 1.0 - s / delta;
                -(-1.0 / g).exp() / (delta * g * g)
            }
        },
        move |s| {
            if !(0.0..delta).contains(&s) {
                0.0
            } else {
                let g = 1.0 - s / delta;
                (-1.0 / g).exp() * (1.0 - 2.0 * g) / (delta * delta * g * g * g * g)
            }
        },
    )
}
