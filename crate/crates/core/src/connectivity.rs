//! Spatial proximity matrices and their double centering.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{mst_max_edge_coords, pairwise_distances, CoordinateSet, DistanceMatrix};
use crate::scalar::Real;

const MODULE: &str = "connectivity";

/// How a connectivity matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConnectivityKind<T: Real> {
    /// `exp(-d / range)` distance decay.
    ExpKernel { range: T },
    /// Binary k-nearest-neighbour graph.
    Knn { k: usize },
    UserSupplied,
}

/// Nonnegative `N x N` proximity matrix with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix<T: Real> {
    c: DMatrix<T>,
    kind: ConnectivityKind<T>,
}

impl<T: Real> ConnectivityMatrix<T> {
    pub(crate) fn from_parts(c: DMatrix<T>, kind: ConnectivityKind<T>) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::input(
                MODULE,
                format!("connectivity must be square, got {}x{}", c.nrows(), c.ncols()),
            ));
        }
        Ok(Self { c, kind })
    }

    /// Accepts a user-built matrix. Entries must be finite and nonnegative with a
    /// zero diagonal; asymmetric input is symmetrized.
    pub fn from_user(c: DMatrix<T>) -> Result<Self> {
        let m = Self::from_parts(c, ConnectivityKind::UserSupplied)?;
        let n = m.n();
        for j in 0..n {
            for i in 0..n {
                let v = m.c[(i, j)];
                if !v.is_finite() {
                    return Err(Error::input(
                        MODULE,
                        format!("entry ({}, {}) is not finite", i + 1, j + 1),
                    ));
                }
                if v < T::zero() {
                    return Err(Error::input(
                        MODULE,
                        format!("entry ({}, {}) is negative ({v})", i + 1, j + 1),
                    ));
                }
            }
            if m.c[(j, j)] != T::zero() {
                return Err(Error::input(
                    MODULE,
                    format!("diagonal entry {} is nonzero", j + 1),
                ));
            }
        }
        Ok(m.symmetrize())
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn kind(&self) -> ConnectivityKind<T> {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.c
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (j + 1..n).all(|i| self.c[(i, j)] == self.c[(j, i)]))
    }

    /// `1' C 1`.
    pub fn total_weight(&self) -> T {
        self.c.sum()
    }

    /// `(C + C') / 2`. Bitwise idempotent.
    pub fn symmetrize(mut self) -> Self {
        let n = self.n();
        let half = T::lit(0.5);
        for j in 0..n {
            for i in (j + 1)..n {
                let v = (self.c[(i, j)] + self.c[(j, i)]) * half;
                self.c[(i, j)] = v;
                self.c[(j, i)] = v;
            }
        }
        self
    }
}

/// Distance-decay kernel `exp(-d_ij / r)` with the diagonal forced to zero.
pub fn exp_kernel<T: Real>(d: &DistanceMatrix<T>, r: T) -> Result<ConnectivityMatrix<T>> {
    exp_kernel_owned(d.clone(), r)
}

fn exp_kernel_owned<T: Real>(d: DistanceMatrix<T>, r: T) -> Result<ConnectivityMatrix<T>> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::input(
            MODULE,
            format!("kernel range must be positive and finite, got {r}"),
        ));
    }
    let n = d.n();
    let mut c = d.into_matrix();
    c.apply(|v| *v = (-*v / r).exp());
    for i in 0..n {
        c[(i, i)] = T::zero();
    }
    ConnectivityMatrix::from_parts(c, ConnectivityKind::ExpKernel { range: r })
}

/// The default proximity: exponential kernel whose range is the longest edge
/// of the minimum spanning tree over the sites.
pub fn exp_kernel_from_coords<T: Real>(coords: &CoordinateSet<T>) -> Result<ConnectivityMatrix<T>> {
    let r = mst_max_edge_coords(coords)?;
    if r <= T::zero() {
        return Err(Error::degenerate(
            MODULE,
            "all sites coincide; the spanning-tree range is zero",
        ));
    }
    exp_kernel_owned(pairwise_distances(coords), r)
}

pub fn symmetrize<T: Real>(c: ConnectivityMatrix<T>) -> ConnectivityMatrix<T> {
    c.symmetrize()
}

/// Doubly-centered connectivity `M C M`, `M = I - 11'/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix<T: Real> {
    mcm: DMatrix<T>,
}

impl<T: Real> CenteredMatrix<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mcm
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.mcm
    }

    pub fn trace(&self) -> T {
        self.mcm.trace()
    }
}

pub fn double_center<T: Real>(c: &ConnectivityMatrix<T>) -> CenteredMatrix<T> {
    center_in_place(c.matrix().clone())
}

pub(crate) fn center_in_place<T: Real>(mut m: DMatrix<T>) -> CenteredMatrix<T> {
    let n = m.nrows();
    let nf = T::from_count(n);
    let row_means: DVector<T> = DVector::from_iterator(n, m.row_iter().map(|r| r.sum() / nf));
    let col_means: DVector<T> = DVector::from_iterator(n, m.column_iter().map(|c| c.sum() / nf));
    let grand = row_means.sum() / nf;
    for j in 0..n {
        let cj = col_means[j];
        for i in 0..n {
            m[(i, j)] = m[(i, j)] - row_means[i] - cj + grand;
        }
    }
    CenteredMatrix { mcm: m }
}
