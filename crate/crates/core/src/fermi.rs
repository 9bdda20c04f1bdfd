//! Collar families `t -> gamma_t` of boundary metrics with `g = gamma_t + dt^2`,
//! built either from closed-form models or by integrating geodesics that
//! leave the wall orthogonally, plus the even reflection across `t = 0`.

use crate::domain::{norm, Dimension};
use crate::error::{CoreError, Result};
use crate::metric::MetricField;
use crate::tensor::christoffel;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

type GammaFn = Arc<dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync>;

/// A sampled family of boundary metrics over a collar. `gamma(y, t)` is an
/// (n-1)x(n-1) matrix for a boundary point `y` (the first n-1 chart
/// coordinates) and collar parameter `t` in `[0, delta0)`, or
/// `(-delta0, delta0)` after doubling.
#[derive(Clone)]
pub struct FermiFamily {
    pub dim: Dimension,
    pub delta0: f64,
    pub boundary_grid: Vec<Vec<f64>>,
    pub doubled: bool,
    eval: GammaFn,
}

impl FermiFamily {
    /// Family from a closed-form collar model.
    pub fn analytic(
        dim: Dimension,
        delta0: f64,
        boundary_grid: Vec<Vec<f64>>,
        eval: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        FermiFamily {
            dim,
            delta0,
            boundary_grid,
            doubled: false,
            eval: Arc::new(eval),
        }
    }

    pub fn gamma(&self, y: &[f64], t: f64) -> Result<DMatrix<f64>> {
        let lim = self.delta0 * (1.0 + 1e-12);
        let ok = if self.doubled {
            t.abs() < lim
        } else {
            (-1e-12..lim).contains(&t)
        };
        if !ok {
            return Err(CoreError::Collar(format!(
                "collar parameter {t} outside range (delta0 = {})",
                self.delta0
            )));
        }
        Ok((self.eval)(y, t))
    }

    /// Raw closure access without the range check (mollification samples
    /// slightly shifted arguments).
    #[inline]
    pub fn gamma_unchecked(&self, y: &[f64], t: f64) -> DMatrix<f64> {
        (self.eval)(y, t)
    }

    /// One-sided first-derivative jump of `gamma` across `t = 0`,
    /// max over components; zero for a C^1 family.
    pub fn slope_jump_at_seam(&self, y: &[f64], h: f64) -> f64 {
        let gp = (self.gamma_unchecked(y, 2.0 * h) - self.gamma_unchecked(y, h)) / h;
        let gm = (self.gamma_unchecked(y, -h) - self.gamma_unchecked(y, -2.0 * h)) / h;
        (gp - gm).amax()
    }

    /// dgamma/dt at `t` by central differences.
    pub fn dgamma_dt(&self, y: &[f64], t: f64, h: f64) -> DMatrix<f64> {
        (self.gamma_unchecked(y, t + h) - self.gamma_unchecked(y, t - h)) / (2.0 * h)
    }
}

/// Even extension `gamma_{-t} = gamma_t`. The symmetry is bit-exact because
/// both signs evaluate the same closure at `|t|`.
pub fn reflect_double(f: &FermiFamily) -> FermiFamily {
    let inner = f.eval.clone();
    FermiFamily {
        dim: f.dim,
        delta0: f.delta0,
        boundary_grid: f.boundary_grid.clone(),
        doubled: true,
        eval: Arc::new(move |y, t| inner(y, t.abs())),
    }
}

/// One step of the classical fourth-order integrator for the geodesic
/// system x' = v, v' = -Gamma(x)(v, v).
fn geodesic_rk4_step(g: &MetricField, x: &mut DVector<f64>, v: &mut DVector<f64>, h: f64) -> Result<()> {
    let n = x.len();
    let accel = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        let gam = christoffel(g, x.as_slice())?;
        let mut a = DVector::zeros(n);
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gam.get(k, i, j) * v[i] * v[j];
                }
            }
            a[k] = -s;
        }
        Ok(a)
    };
    let k1x = v.clone();
    let k1v = accel(x, v)?;
    let k2x = v.clone() + &k1v * (h / 2.0);
    let k2v = accel(&(x.clone() + &k1x * (h / 2.0)), &k2x)?;
    let k3x = v.clone() + &k2v * (h / 2.0);
    let k3v = accel(&(x.clone() + &k2x * (h / 2.0)), &k3x)?;
    let k4x = v.clone() + &k3v * h;
    let k4v = accel(&(x.clone() + &k3x * h), &k4x)?;
    *x += (k1x + &k2x * 2.0 + &k3x * 2.0 + k4x) * (h / 6.0);
    *v += (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (h / 6.0);
    Ok(())
}

/// Unit normal of the wall pointing into the upper half-space:
/// `nu = g^{.n} / sqrt(g^{nn})`.
fn wall_normal(g: &MetricField, x: &[f64]) -> Result<DVector<f64>> {
    let n = g.dim().n();
    let ginv = g.inverse_at(x)?;
    let gnn = ginv[(n - 1, n - 1)];
    if gnn <= 0.0 {
        return Err(CoreError::NotPositiveDefinite { point: x.to_vec() });
    }
    Ok(ginv.column(n - 1) / gnn.sqrt())
}

/// Integrates the normal geodesic from the boundary point `y` (given by its
/// first n-1 coordinates) up to collar parameter `delta0`, returning sampled
/// positions and the max drift of `|v|_g` from 1.
fn normal_geodesic(
    g: &MetricField,
    y: &[f64],
    delta0: f64,
    samples: usize,
    steps_per_sample: usize,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let n = g.dim().n();
    let mut x = DVector::zeros(n);
    for (i, yi) in y.iter().enumerate() {
        x[i] = *yi;
    }
    let mut v = wall_normal(g, x.as_slice())?;
    let h = delta0 / (samples as f64 * steps_per_sample as f64);
    let mut positions = Vec::with_capacity(samples + 1);
    positions.push(x.clone());
    let mut drift: f64 = 0.0;
    for _ in 0..samples {
        for _ in 0..steps_per_sample {
            geodesic_rk4_step(g, &mut x, &mut v, h)?;
        }
        let gm = g.eval_raw(x.as_slice());
        let speed = (v.transpose() * gm * &v)[(0, 0)].sqrt();
        drift = drift.max((speed - 1.0).abs());
        positions.push(x.clone());
    }
    Ok((positions, drift))
}

/// Builds the collar family by integrating normal geodesics from each
/// boundary grid point and pulling the metric back through a finite
/// difference of neighboring geodesics. The family evaluates continuously
/// in `t` (componentwise Hermite interpolation); in `y` it snaps to the
/// nearest grid point.
pub fn build_fermi(
    g: &MetricField,
    delta0: f64,
    boundary_grid: &[Vec<f64>],
) -> Result<FermiFamily> {
    let n = g.dim().n();
    if boundary_grid.is_empty() {
        return Err(CoreError::Collar("empty boundary grid".into()));
    }
    let samples = 32usize;
    let steps = 2usize; // 64 RK4 steps per collar crossing
    let hy = 1e-4;

    struct PointData {
        y: Vec<f64>,
        gammas: Vec<DMatrix<f64>>, // at t_j = j delta0 / samples
        slopes: Vec<DMatrix<f64>>,
    }

    let data: Result<Vec<PointData>> = crate::par::map_slice(boundary_grid, |y| {
        if y.len() != n - 1 {
            return Err(CoreError::Collar(format!(
                "boundary point {y:?} must have n-1 = {} coordinates",
                n - 1
            )));
        }
        let (center, drift) = normal_geodesic(g, y, delta0, samples, steps)?;
        if drift > 1e-8 {
            return Err(CoreError::Collar(format!(
                "geodesic speed drift {drift:.3e} exceeds 1e-8"
            )));
        }
        // Neighbor geodesics for the Jacobian in each tangent direction.
        let mut plus = Vec::with_capacity(n - 1);
        let mut minus = Vec::with_capacity(n - 1);
        for d in 0..n - 1 {
            let mut yp = y.to_vec();
            yp[d] += hy;
            let mut ym = y.to_vec();
            ym[d] -= hy;
            plus.push(normal_geodesic(g, &yp, delta0, samples, steps)?.0);
            minus.push(normal_geodesic(g, &ym, delta0, samples, steps)?.0);
        }
        let mut gammas = Vec::with_capacity(samples + 1);
        for j in 0..=samples {
            let gm = g.eval_raw(center[j].as_slice());
            let mut jac = DMatrix::zeros(n, n - 1);
            for d in 0..n - 1 {
                let col = (&plus[d][j] - &minus[d][j]) / (2.0 * hy);
                jac.set_column(d, &col);
            }
            let gamma = jac.transpose() * gm * jac;
            if gamma.clone().cholesky().is_none() {
                return Err(CoreError::NotPositiveDefinite {
                    point: center[j].as_slice().to_vec(),
                });
            }
            gammas.push(gamma);
        }
        // Hermite slopes in t by fourth-order differences.
        let ht = delta0 / samples as f64;
        let m = samples + 1;
        let mut slopes = Vec::with_capacity(m);
        for j in 0..m {
            let sl = if j >= 2 && j + 2 < m {
                (-&gammas[j + 2] + &gammas[j + 1] * 8.0 - &gammas[j - 1] * 8.0 + &gammas[j - 2])
                    / (12.0 * ht)
            } else if j == 0 {
                (&gammas[0] * -3.0 + &gammas[1] * 4.0 - &gammas[2]) / (2.0 * ht)
            } else if j == m - 1 {
                (&gammas[m - 1] * 3.0 - &gammas[m - 2] * 4.0 + &gammas[m - 3]) / (2.0 * ht)
            } else if j == 1 {
                (&gammas[2] - &gammas[0]) / (2.0 * ht)
            } else {
                (&gammas[m - 1] - &gammas[m - 3]) / (2.0 * ht)
            };
            slopes.push(sl);
        }
        Ok(PointData {
            y: y.clone(),
            gammas,
            slopes,
        })
    })
    .into_iter()
    .collect();
    let data = data?;

    // Injectivity spot-check: neighboring geodesics stay separated by at
    // least half their initial distance across the collar.
    for a in 0..data.len().min(12) {
        for b in (a + 1)..data.len().min(12) {
            let ya = &data[a].y;
            let yb = &data[b].y;
            let d0: f64 = ya
                .iter()
                .zip(yb)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            if d0 > delta0 {
                continue;
            }
            let (ga, _) = normal_geodesic(g, ya, delta0, 8, 4)?;
            let (gb, _) = normal_geodesic(g, yb, delta0, 8, 4)?;
            for (pa, pb) in ga.iter().zip(&gb) {
                let d = (pa - pb).norm();
                if d < 0.5 * d0 {
                    return Err(CoreError::Collar(format!(
                        "geodesics from {ya:?} and {yb:?} approach within {d:.3e} \
                         of each other (initial separation {d0:.3e}); delta0 too large"
                    )));
                }
            }
        }
    }

    let ht = delta0 / samples as f64;
    let grid: Vec<Vec<f64>> = data.iter().map(|p| p.y.clone()).collect();
    let grid2 = grid.clone();
    let eval = move |y: &[f64], t: f64| -> DMatrix<f64> {
        // nearest grid point in y
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in grid2.iter().enumerate() {
            let d: f64 = p
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let pd = &data[best];
        let m = pd.gammas.len();
        let tt = t.clamp(0.0, delta0);
        let mut j = (tt / ht).floor() as usize;
        if j >= m - 1 {
            j = m - 2;
        }
        let s = (tt - j as f64 * ht) / ht;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        &pd.gammas[j] * h00
            + &pd.slopes[j] * (h10 * ht)
            + &pd.gammas[j + 1] * h01
            + &pd.slopes[j + 1] * (h11 * ht)
    };

    Ok(FermiFamily {
        dim: g.dim(),
        delta0,
        boundary_grid: grid,
        doubled: false,
        eval: Arc::new(eval),
    })
}

/// Boundary grid helper: points along the first axis of the wall.
pub fn axis_boundary_grid(n: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    radii
        .iter()
        .map(|r| {
            let mut y = vec![0.0; n - 1];
            y[0] = *r;
            y
        })
        .collect()
}

/// Collar family of a Fermi-model metric (`gamma_t + dt^2` with `gamma`
/// independent of `y`).
pub fn model_family(
    dim: Dimension,
    delta0: f64,
    gamma: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
) -> FermiFamily {
    FermiFamily::analytic(dim, delta0, vec![vec![0.0; dim.n() - 1]], move |_, t| gamma(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::metric::{
        make_fermi_model, make_flat, make_schwarzschild_halfspace, BoundaryShapeModel,
    };

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn flat_collar_is_identity() {
        let g = make_flat(dim(3), DomainSpec::half_annulus(1.0, 50.0).unwrap());
        let grid = axis_boundary_grid(3, &[2.0, 3.0, 5.0]);
        let fam = build_fermi(&g, 0.5, &grid).unwrap();
        for t in [0.0, 0.1, 0.37, 0.5] {
            let gm = fam.gamma(&grid[1], t).unwrap();
            assert!(
                (gm - DMatrix::identity(2, 2)).amax() < 1e-10,
                "gamma at t={t} not identity"
            );
        }
    }

    #[test]
    fn totally_geodesic_boundary_slope_vanishes() {
        // Schwarzschild half-space: the wall is totally geodesic, so
        // dgamma/dt|_0 = 0.
        let g = make_schwarzschild_halfspace(dim(3), 1.0, 50.0).unwrap();
        let grid = axis_boundary_grid(3, &[2.0, 4.0]);
        let fam = build_fermi(&g, 0.3, &grid).unwrap();
        for y in &grid {
            // extrapolate the one-sided derivative to t = 0
            let h = 0.02;
            let d = fam.dgamma_dt(y, h, h) * 2.0 - fam.dgamma_dt(y, 2.0 * h, 2.0 * h);
            assert!(d.amax() < 1e-5, "dgamma/dt at 0: {:?}", d);
            let g0 = fam.gamma(y, 0.0).unwrap();
            let g1 = fam.gamma(y, 0.2).unwrap();
            // away from 0 the family is genuinely curved but still close
            assert!((g1 - g0).amax() < 0.1);
        }
    }

    #[test]
    fn model_collar_matches_prescribed_shape() {
        // In the collar chart of gamma_t + dt^2 the normal geodesics are
        // straight t-lines, so the built family reproduces gamma_t.
        let h0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let model = BoundaryShapeModel::new(h0.clone());
        let g = make_fermi_model(dim(3), &model, 0.4, 2.0).unwrap();
        let grid = axis_boundary_grid(3, &[0.0, 0.5]);
        let fam = build_fermi(&g, 0.3, &grid).unwrap();
        // dgamma/dt|_0 = -2 h0 within 1e-6
        let d0 = fam.dgamma_dt(&grid[0], 0.005, 0.005);
        assert!(
            (&d0 + &h0 * 2.0).amax() < 1e-5,
            "dgamma/dt(0) = {d0:?} vs -2 h0"
        );
        for t in [0.05, 0.2] {
            let want = model.gamma(t);
            let got = fam.gamma(&grid[0], t).unwrap();
            assert!((want - got).amax() < 1e-6, "gamma mismatch at t={t}");
        }
    }

    #[test]
    fn reflection_is_bit_exact_even() {
        let fam = model_family(dim(3), 0.5, |t| {
            DMatrix::identity(2, 2) * (1.0 + t + 0.3 * t * t)
        });
        let doubled = reflect_double(&fam);
        let y = vec![0.0, 0.0];
        for t in [0.01, 0.17, 0.4999] {
            let a = doubled.gamma(&y, t).unwrap();
            let b = doubled.gamma(&y, -t).unwrap();
            assert!(a == b, "evenness must be bit-exact");
        }
        // flat family doubles to flat
        let flat = model_family(dim(3), 0.5, |_| DMatrix::identity(2, 2));
        let dflat = reflect_double(&flat);
        assert_eq!(dflat.gamma(&y, -0.3).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn range_checks() {
        let fam = model_family(dim(3), 0.5, |_| DMatrix::identity(2, 2));
        assert!(fam.gamma(&[0.0, 0.0], 0.6).is_err());
        assert!(fam.gamma(&[0.0, 0.0], -0.1).is_err());
        let doubled = reflect_double(&fam);
        assert!(doubled.gamma(&[0.0, 0.0], -0.3).is_ok());
    }

    #[test]
    fn geodesic_crossing_detected() {
        // A strongly curved conformal metric bends the normals toward each
        // other; with a large collar the separation check trips.
        let n = 3;
        let u = crate::fields::ScalarField::new(n, |x: &[f64]| {
            1.0 + 2.0 / (1.0 + norm(x) * norm(x))
        });
        let g = crate::metric::make_conformally_flat(
            dim(n),
            DomainSpec::half_annulus(0.5, 60.0).unwrap(),
            &crate::fields::ConformalFactor::new(u),
        );
        let grid = axis_boundary_grid(n, &[1.0, 1.002]);
        // Either the crossing is detected or the collar stays injective;
        // with this metric and collar depth the bend is strong enough.
        let r = build_fermi(&g, 8.0, &grid);
        assert!(r.is_err(), "expected a collar failure for deep collars");
    }
}
