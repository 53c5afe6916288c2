//! Moran eigenvector spatial filtering.
//!
//! The pipeline runs from planar coordinates to a spatial proximity matrix,
//! its doubly-centered eigenvectors, and regression models that use those
//! eigenvectors to absorb spatial dependence:
//!
//! * [`geometry`]: distances, spanning-tree range, nearest-neighbour graphs.
//! * [`connectivity`]: kernel and graph proximity matrices, double centering.
//! * [`eigen`]: exact and Nyström-approximated Moran eigenvectors.
//! * [`esf`]: least-squares eigenvector spatial filtering with stepwise selection.
//! * [`mixed`]: random-effects filtering (ML/REML) and spatially varying coefficients.
//! * [`quantile`]: spatially filtered unconditional quantile regression.
//! * [`io`]: CSV ingestion, CSV/JSON reports and quantile plots.
//!
//! Numeric code is generic over [`Real`] (`f32`/`f64`); `f64` aliases are
//! exported at the crate root.

pub mod connectivity;
pub mod design;
pub mod eigen;
pub mod error;
pub mod esf;
pub mod geometry;
pub mod io;
mod linalg;
pub mod mixed;
pub mod quantile;
pub mod scalar;
mod stats;

pub use error::{Error, Result};
pub use linalg::quantile_sorted;
pub use scalar::Real;

pub use connectivity::{CenteredMatrix, ConnectivityKind, ConnectivityMatrix};
pub use eigen::{EigenBasis, EigenMode, MeigenOptions, NystromOptions};
pub use design::{CoefRow, CoefTable, Covariates};
pub use esf::{ErrorStats, LinearFit, SelectionCriterion};
pub use geometry::{CoordinateSet, DistanceMatrix};
pub use mixed::{Method, ResfFit, ShrinkageParams, SvcFit};
pub use quantile::{QrFit, RifVector};

pub type Coords = CoordinateSet<f64>;
pub type Connectivity = ConnectivityMatrix<f64>;
pub type Basis = EigenBasis<f64>;
pub type Distances = DistanceMatrix<f64>;
pub type Linear = LinearFit<f64>;
pub type Resf = ResfFit<f64>;
pub type Svc = SvcFit<f64>;
pub type Qr = QrFit<f64>;
pub type Rif = RifVector<f64>;
