//! Ambient dimension and chart domains.
//!
//! All fields in this crate live on a single chart: either an annulus in
//! `R^n`, the upper-half-space portion of such an annulus (`x_n >= 0`), or
//! an axis-aligned box (used for collar models). Points outside the domain
//! are reported as errors, never extrapolated.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Ambient dimension, restricted to `3..=7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if (3..=7).contains(&n) {
            Ok(Dimension(n))
        } else {
            Err(CoreError::InvalidDimension(n))
        }
    }

    #[inline]
    pub fn n(self) -> usize {
        self.0
    }

    /// Euclidean area of the unit `(n-1)`-sphere, `omega_{n-1}`.
    pub fn unit_sphere_area(self) -> f64 {
        let n = self.0 as f64;
        2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma_half_integer(self.0)
    }
}

/// Gamma(n/2) for integer n, via the recurrence from Gamma(1/2) and Gamma(1).
fn gamma_half_integer(n: usize) -> f64 {
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.0 + 1e-9 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 1.0).abs() < 1e-9 {
        acc
    } else {
        acc * std::f64::consts::PI.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Annulus `inner <= |x| <= outer` in full space.
    FullAnnulus,
    /// Annulus intersected with the upper half-space `x_n >= 0`.
    HalfAnnulus,
    /// Axis-aligned box, lower and upper corners.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl DomainSpec {
    pub fn full_annulus(inner: f64, outer: f64) -> Result<Self> {
        Self::check_radii(inner, outer)?;
        Ok(DomainSpec {
            kind: DomainKind::FullAnnulus,
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    pub fn half_annulus(inner: f64, outer: f64) -> Result<Self> {
        Self::check_radii(inner, outer)?;
        Ok(DomainSpec {
            kind: DomainKind::HalfAnnulus,
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(CoreError::InvalidDomain(format!(
                "box corners must satisfy lo < hi componentwise, got {lo:?}, {hi:?}"
            )));
        }
        let inner = 0.0;
        let outer = hi
            .iter()
            .zip(&lo)
            .map(|(h, l)| (h - l).abs())
            .fold(0.0_f64, f64::max);
        Ok(DomainSpec {
            kind: DomainKind::Box { lo, hi },
            inner_radius: inner,
            outer_radius: outer,
        })
    }

    fn check_radii(inner: f64, outer: f64) -> Result<()> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(CoreError::InvalidDomain(format!(
                "need 0 < inner < outer, got inner = {inner}, outer = {outer}"
            )));
        }
        Ok(())
    }

    pub fn is_half_space(&self) -> bool {
        matches!(self.kind, DomainKind::HalfAnnulus)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::FullAnnulus => {
                let r = norm(x);
                r >= self.inner_radius - 1e-12 && r <= self.outer_radius + 1e-12
            }
            DomainKind::HalfAnnulus => {
                let r = norm(x);
                let n = x.len();
                x[n - 1] >= -1e-12
                    && r >= self.inner_radius - 1e-12
                    && r <= self.outer_radius + 1e-12
            }
            DomainKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| *xi >= l - 1e-12 && *xi <= h + 1e-12),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(CoreError::OutsideDomain {
                point: x.to_vec(),
                reason: format!("{:?}", self.kind),
            })
        }
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_range() {
        assert!(Dimension::new(3).is_ok());
        assert!(Dimension::new(7).is_ok());
        assert!(Dimension::new(2).is_err());
        assert!(Dimension::new(8).is_err());
    }

    #[test]
    fn unit_sphere_areas() {
        // omega_2 = 4 pi, omega_3 = 2 pi^2, omega_4 = 8 pi^2 / 3.
        let pi = std::f64::consts::PI;
        assert!((Dimension::new(3).unwrap().unit_sphere_area() - 4.0 * pi).abs() < 1e-12);
        assert!((Dimension::new(4).unwrap().unit_sphere_area() - 2.0 * pi * pi).abs() < 1e-12);
        assert!(
            (Dimension::new(5).unwrap().unit_sphere_area() - 8.0 * pi * pi / 3.0).abs() < 1e-12
        );
    }

    #[test]
    fn half_annulus_membership() {
        let d = DomainSpec::half_annulus(1.0, 10.0).unwrap();
        assert!(d.contains(&[2.0, 0.0, 1.0]));
        assert!(!d.contains(&[2.0, 0.0, -1.0]));
        assert!(!d.contains(&[0.5, 0.0, 0.5]));
        assert!(d.check_point(&[0.5, 0.0, 0.5]).is_err());
    }

    #[test]
    fn radii_validated() {
        assert!(DomainSpec::full_annulus(2.0, 1.0).is_err());
        assert!(DomainSpec::full_annulus(-1.0, 1.0).is_err());
    }
}
