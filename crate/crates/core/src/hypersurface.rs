//! Hypersurface geometry: unit normal, second fundamental form, and mean
//! curvature of level sets.
//!
//! Sign convention: `H = div(nu)` along the surface for the declared unit
//! normal `nu`, which is explicit in every result. Flipping the orientation
//! negates `H` and `h` and leaves `|h|` unchanged; "minimal" (H = 0) and
//! "totally geodesic" (h = 0) are orientation-free statements.

use crate::error::{CoreError, Result};
use crate::fields::ScalarField;
use crate::metric::MetricField;
use crate::tensor::christoffel;
use nalgebra::{DMatrix, DVector};

/// Orientation of the unit normal relative to the level function gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `nu = +grad F / |grad F|`. For coordinate spheres (`F = |x| - r`)
    /// this points toward infinity; for the wall (`F = x_n`) it points into
    /// the upper half-space.
    TowardInfinity,
    /// `nu = -grad F / |grad F|`, the opposite of `TowardInfinity`.
    Inward,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::TowardInfinity => 1.0,
            Orientation::Inward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::TowardInfinity => Orientation::Inward,
            Orientation::Inward => Orientation::TowardInfinity,
        }
    }
}

/// A hypersurface described as the zero set of a level function.
#[derive(Clone)]
pub enum Hypersurface {
    LevelSet(ScalarField),
    /// `{ |x| = radius }`.
    CoordinateSphere { radius: f64 },
    /// The wall `{ x_n = 0 }`.
    BoundaryPlane,
}

impl Hypersurface {
    pub fn level_field(&self, n: usize) -> ScalarField {
        match self {
            Hypersurface::LevelSet(f) => f.clone(),
            Hypersurface::CoordinateSphere { radius } => {
                let r0 = *radius;
                ScalarField::radial(n, move |r| r - r0, |_| 1.0, |_| 0.0)
            }
            Hypersurface::BoundaryPlane => ScalarField::new(n, move |x| x[n - 1])
                .with_gradient(move |_| {
                    let mut v = DVector::zeros(n);
                    v[n - 1] = 1.0;
                    v
                })
                .with_hessian(move |_| DMatrix::zeros(n, n)),
        }
    }
}

/// Normal, second fundamental form (ambient components, tangentially
/// supported), and mean curvature at a point of the hypersurface.
#[derive(Debug, Clone)]
pub struct HypersurfaceFrame {
    pub x: Vec<f64>,
    /// Contravariant components of the unit normal.
    pub nu: DVector<f64>,
    /// Second fundamental form `h(X, Y) = g(D_X nu, Y)` projected to the
    /// tangent space, as an ambient n x n matrix.
    pub h: DMatrix<f64>,
    /// `H = div(nu)` along the surface.
    pub mean_curvature: f64,
    /// `|h|_g`, orientation-free.
    pub h_norm: f64,
}

/// Computes the frame of the level set through `x` (which should satisfy
/// `F(x) = 0` up to tolerance; the normal field extends off the surface).
pub fn hypersurface_geometry(
    g: &MetricField,
    surface: &Hypersurface,
    x: &[f64],
    orientation: Orientation,
) -> Result<HypersurfaceFrame> {
    let n = g.dim().n();
    let f = surface.level_field(n);
    let sign = orientation.sign();

    let ginv = g.inverse_at(x)?;
    let dg = g.first_derivs(x);
    let gamma = christoffel(g, x)?;
    let df = f.gradient(x);
    let d2f = f.hessian(x);

    let norm2 = (df.transpose() * &ginv * &df)[(0, 0)];
    if norm2 < 1e-24 {
        return Err(CoreError::DegenerateGradient { point: x.to_vec() });
    }
    let norm = norm2.sqrt();

    // Covariant unit conormal w_j = dF_j / |dF|, and its partials.
    // d_i |dF| = (d_i g^{ab} dF_a dF_b + 2 g^{ab} d_i dF_a dF_b) / (2 |dF|).
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|c| -(&ginv * &dg[c] * &ginv)).collect();
    let mut dnorm = vec![0.0; n];
    for (i, dn) in dnorm.iter_mut().enumerate() {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += dginv[i][(a, b)] * df[a] * df[b] + 2.0 * ginv[(a, b)] * d2f[(i, a)] * df[b];
            }
        }
        *dn = s / (2.0 * norm);
    }

    let w = &df / norm;
    let nu = (&ginv * &w) * sign;

    // K_ij = cov. derivative of the covariant normal: d_i w_j - Gamma^l_ij w_l.
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let dwij = d2f[(i, j)] / norm - df[j] * dnorm[i] / norm2;
            let mut v = dwij;
            for l in 0..n {
                v -= gamma.get(l, i, j) * w[l];
            }
            k[(i, j)] = sign * v;
        }
    }

    // H = div(nu) = g^{ij} K_ij  (the nu-nu component of K vanishes for a
    // unit normal, so this equals the tangential trace).
    let mut hmean = 0.0;
    for i in 0..n {
        for j in 0..n {
            hmean += ginv[(i, j)] * k[(i, j)];
        }
    }

    // Tangential projection P^a_b = delta^a_b - nu^a w_b (w = covariant nu).
    let w_cov = w * sign;
    let mut p = DMatrix::identity(n, n);
    for a in 0..n {
        for b in 0..n {
            p[(a, b)] -= nu[a] * w_cov[b];
        }
    }
    let h_full = p.transpose() * &k * &p;
    let h = (&h_full + h_full.transpose()) * 0.5;

    let hup = &ginv * &h * &ginv;
    let mut h_norm2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            h_norm2 += hup[(i, j)] * h[(i, j)];
        }
    }

    Ok(HypersurfaceFrame {
        x: x.to_vec(),
        nu,
        h,
        mean_curvature: hmean,
        h_norm: h_norm2.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Dimension, DomainSpec};
    use crate::metric::{make_flat, make_schwarzschild, make_schwarzschild_halfspace};

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn euclidean_sphere_mean_curvature() {
        // Flat metric, sphere of radius r, nu toward infinity: H = (n-1)/r.
        for n in [3usize, 5] {
            let g = make_flat(dim(n), DomainSpec::full_annulus(0.5, 10.0).unwrap());
            let r = 2.0;
            let mut x = vec![0.0; n];
            x[0] = r / (2.0_f64).sqrt();
            x[1] = r / (2.0_f64).sqrt();
            let fr = hypersurface_geometry(
                &g,
                &Hypersurface::CoordinateSphere { radius: r },
                &x,
                Orientation::TowardInfinity,
            )
            .unwrap();
            let want = (n as f64 - 1.0) / r;
            assert!(
                (fr.mean_curvature - want).abs() < 1e-10,
                "n={n}: H = {} vs {want}",
                fr.mean_curvature
            );
        }
    }

    #[test]
    fn orientation_flip_negates() {
        let g = make_schwarzschild(dim(3), 2.0, 50.0).unwrap();
        let x = [1.5, 0.5, 0.2];
        let r = crate::domain::norm(&x);
        let surf = Hypersurface::CoordinateSphere { radius: r };
        let a = hypersurface_geometry(&g, &surf, &x, Orientation::TowardInfinity).unwrap();
        let b = hypersurface_geometry(&g, &surf, &x, Orientation::Inward).unwrap();
        assert!((a.mean_curvature + b.mean_curvature).abs() < 1e-12);
        assert!((&a.h + &b.h).amax() < 1e-12);
        assert!((a.h_norm - b.h_norm).abs() < 1e-12);
    }

    #[test]
    fn schwarzschild_horizon_is_minimal() {
        // n=3, mtilde=2: the sphere r=1 has H = 0.
        let g = make_schwarzschild(dim(3), 2.0, 50.0).unwrap();
        let x = [0.6, 0.8, 0.0];
        let fr = hypersurface_geometry(
            &g,
            &Hypersurface::CoordinateSphere { radius: 1.0 },
            &x,
            Orientation::TowardInfinity,
        )
        .unwrap();
        assert!(fr.mean_curvature.abs() < 1e-8, "H = {}", fr.mean_curvature);
    }

    #[test]
    fn halfspace_boundary_totally_geodesic() {
        let g = make_schwarzschild_halfspace(dim(3), 1.0, 50.0).unwrap();
        let x = [2.0, 1.0, 0.0];
        let fr = hypersurface_geometry(
            &g,
            &Hypersurface::BoundaryPlane,
            &x,
            Orientation::TowardInfinity,
        )
        .unwrap();
        assert!(fr.h.amax() < 1e-8, "h = {:?}", fr.h);
        assert!(fr.h_norm < 1e-8);
    }

    #[test]
    fn unit_normal_is_unit() {
        let g = make_schwarzschild(dim(3), 2.0, 50.0).unwrap();
        let x = [2.0, 0.0, 1.0];
        let r = crate::domain::norm(&x);
        let fr = hypersurface_geometry(
            &g,
            &Hypersurface::CoordinateSphere { radius: r },
            &x,
            Orientation::TowardInfinity,
        )
        .unwrap();
        let gm = g.at(&x).unwrap();
        let len2 = (fr.nu.transpose() * gm * &fr.nu)[(0, 0)];
        assert!((len2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_gradient_rejected() {
        let g = make_flat(dim(3), DomainSpec::full_annulus(0.5, 10.0).unwrap());
        let f = ScalarField::constant(3, 0.0);
        assert!(matches!(
            hypersurface_geometry(&g, &Hypersurface::LevelSet(f), &[1.0, 0.0, 0.0], Orientation::TowardInfinity),
            Err(CoreError::DegenerateGradient { .. })
        ));
    }
}
