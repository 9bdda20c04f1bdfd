//! Desk-scale numerical toolkit for mass, gluing, and Penrose-ratio
//! computations on asymptotically flat half-spaces.
//!
//! The crate provides chart-based metric fields and reference geometries
//! ([`metric`]), pointwise tensor calculus ([`tensor`], [`hypersurface`]),
//! surface quadrature and mass extrapolation ([`quad`], [`mass`]), the
//! reflection double with collar mollification ([`fermi`], [`mollify`]),
//! radial and grid elliptic solves with conformal repair ([`elliptic`]),
//! explicit bump functions and scalar-curvature-increasing perturbations
//! ([`bumps`], [`perturb`]), and horizon/ratio reporting ([`penrose`]).
//!
//! Heavy sweeps run data-parallel on rayon when the default `parallel`
//! feature is enabled and sequentially otherwise; all reductions use a fixed
//! order so results are identical either way.

pub mod bumps;
pub mod config;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod fermi;
pub mod fields;
pub mod hypersurface;
pub mod mass;
pub mod metric;
pub mod mollify;
pub mod par;
pub mod penrose;
pub mod perturb;
pub mod quad;
pub mod report;
pub mod tensor;

pub use domain::{Dimension, DomainKind, DomainSpec};
pub use error::{CoreError, Result};
pub use fields::{ConformalFactor, FdOrder, FdRule, ScalarField, SymTensorField};
pub use metric::MetricField;
