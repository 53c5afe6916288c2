//! Moran eigenvectors: exact extraction from the doubly-centered connectivity
//! matrix and a Nyström approximation for large samples.

mod nystrom;

pub use nystrom::{kmeans_centers, meigen_f, NystromOptions, DEFAULT_ENUM, DEFAULT_KMEANS_SEED};

use nalgebra::{DMatrix, DVector};

use crate::connectivity::{center_in_place, exp_kernel_from_coords, ConnectivityKind, ConnectivityMatrix};
use crate::error::{Error, Result};
use crate::geometry::CoordinateSet;
use crate::linalg::{normalize_signs, order_degenerate_clusters, sorted_symmetric_eigen};
use crate::scalar::Real;

const MODULE: &str = "eigen";

/// Relative cut that stands in for "positive" when the threshold is zero.
pub const POSITIVE_EPS: f64 = 1e-8;

/// Relative gap under which eigenvalues are treated as one degenerate cluster.
pub const DEGENERATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMode {
    Exact,
    Nystrom,
}

/// Retained Moran eigenvectors (columns, mean-zero and orthonormal) and their
/// eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis<T: Real> {
    vectors: DMatrix<T>,
    values: DVector<T>,
    mode: EigenMode,
    source: ConnectivityKind<T>,
    other_eigenvalues_sum: Option<T>,
}

impl<T: Real> EigenBasis<T> {
    /// Assembles a basis from precomputed parts. Eigenvalues must be positive
    /// and non-increasing, one per column.
    pub fn from_parts(
        vectors: DMatrix<T>,
        values: DVector<T>,
        mode: EigenMode,
        source: ConnectivityKind<T>,
    ) -> Result<Self> {
        if vectors.ncols() != values.len() {
            return Err(Error::input(
                MODULE,
                format!(
                    "{} eigenvector columns but {} eigenvalues",
                    vectors.ncols(),
                    values.len()
                ),
            ));
        }
        if values.is_empty() {
            return Err(Error::input(MODULE, "eigen basis is empty"));
        }
        if values.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::input(MODULE, "eigenvalues must be positive"));
        }
        if values.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::input(MODULE, "eigenvalues must be in descending order"));
        }
        Ok(Self {
            vectors,
            values,
            mode,
            source,
            other_eigenvalues_sum: None,
        })
    }

    /// Number of sites.
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of retained eigenpairs.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vectors(&self) -> &DMatrix<T> {
        &self.vectors
    }

    pub fn values(&self) -> &DVector<T> {
        &self.values
    }

    pub fn mode(&self) -> EigenMode {
        self.mode
    }

    pub fn source(&self) -> ConnectivityKind<T> {
        self.source
    }

    /// Sum of the discarded eigenvalues (exact mode only).
    pub fn other_eigenvalues_sum(&self) -> Option<T> {
        self.other_eigenvalues_sum
    }

    /// Keeps the leading `l` eigenpairs.
    pub fn truncated(&self, l: usize) -> Self {
        let l = l.min(self.len()).max(1);
        let dropped: T = self.values.rows(l, self.len() - l).sum();
        Self {
            vectors: self.vectors.columns(0, l).into_owned(),
            values: self.values.rows(0, l).into_owned(),
            mode: self.mode,
            source: self.source,
            other_eigenvalues_sum: self.other_eigenvalues_sum.map(|s| s + dropped),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeigenOptions {
    /// Retain eigenpairs with `lambda_l / lambda_1 > threshold`; `0` keeps every
    /// positive eigenvalue.
    pub threshold: f64,
    /// Optional cap on the number of retained eigenpairs.
    pub enum_max: Option<usize>,
}

impl Default for MeigenOptions {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            enum_max: None,
        }
    }
}

impl MeigenOptions {
    pub fn threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }
}

/// Exact Moran eigenvectors of `M C M`. Asymmetric `C` is symmetrized first.
pub fn meigen<T: Real>(c: &ConnectivityMatrix<T>, opts: MeigenOptions) -> Result<EigenBasis<T>> {
    meigen_owned(c.clone(), opts)
}

/// Exact eigenvectors for the default exponential-kernel connectivity over
/// `coords`.
pub fn meigen_coords<T: Real>(coords: &CoordinateSet<T>, opts: MeigenOptions) -> Result<EigenBasis<T>> {
    check_sites(coords.len())?;
    meigen_owned(exp_kernel_from_coords(coords)?, opts)
}

pub(crate) fn check_sites(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::input(
            MODULE,
            format!("at least 3 sites are required, got {n}"),
        ));
    }
    Ok(())
}

fn meigen_owned<T: Real>(c: ConnectivityMatrix<T>, opts: MeigenOptions) -> Result<EigenBasis<T>> {
    let n = c.n();
    check_sites(n)?;
    if !(0.0..1.0).contains(&opts.threshold) {
        return Err(Error::input(
            MODULE,
            format!("threshold must lie in [0, 1), got {}", opts.threshold),
        ));
    }
    if opts.enum_max == Some(0) {
        return Err(Error::input(MODULE, "enum must be positive"));
    }
    let c = if c.is_symmetric() { c } else { c.symmetrize() };
    let source = c.kind();
    let mcm = center_in_place(c.into_matrix());
    let total = mcm.trace();
    let (values, vectors) = sorted_symmetric_eigen(mcm.into_matrix());

    let lambda1 = values[0];
    let spectral = lambda1.abs().max(values[values.len() - 1].abs());
    if !(lambda1 > spectral * T::lit(1e-10).max(T::eps() * T::lit(100.0))) {
        return Err(Error::degenerate(
            MODULE,
            "the centered connectivity has no positive eigenvalue",
        ));
    }
    let rel = if opts.threshold > 0.0 {
        opts.threshold
    } else {
        POSITIVE_EPS
    };
    let cut = lambda1 * T::lit(rel);
    let mut keep = values.iter().take_while(|&&v| v > cut).count();
    if let Some(cap) = opts.enum_max {
        keep = keep.min(cap);
    }
    let retained = values.rows(0, keep).into_owned();
    let mut vecs = vectors.columns(0, keep).into_owned();
    normalize_signs(&mut vecs);
    order_degenerate_clusters(&retained, &mut vecs, lambda1 * T::lit(DEGENERATE_TOL));

    Ok(EigenBasis {
        vectors: vecs,
        other_eigenvalues_sum: Some(total - retained.sum()),
        values: retained,
        mode: EigenMode::Exact,
        source,
    })
}

/// `MC(e) = N / (1'C1) * e'Ce / e'e` for a mean-zero, nonzero `e`.
pub fn moran_coefficient<T: Real>(e: &DVector<T>, c: &ConnectivityMatrix<T>) -> Result<T> {
    let n = c.n();
    if e.len() != n {
        return Err(Error::input(
            MODULE,
            format!("vector has length {} but connectivity is {n}x{n}", e.len()),
        ));
    }
    let ee = e.norm_squared();
    if !(ee > T::zero()) {
        return Err(Error::input(MODULE, "Moran coefficient of a zero vector"));
    }
    let nf = T::from_count(n);
    if e.sum().abs() > T::lit(1e-8) * nf.sqrt() * ee.sqrt() {
        return Err(Error::input(MODULE, "Moran coefficient requires a mean-zero vector"));
    }
    let w = c.total_weight();
    if !(w > T::zero()) {
        return Err(Error::degenerate(MODULE, "connectivity has zero total weight"));
    }
    let ece = e.dot(&(c.matrix() * e));
    Ok(nf / w * ece / ee)
}
