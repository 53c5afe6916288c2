//! Planar distances, minimum-spanning-tree range and k-nearest-neighbour graphs.

use nalgebra::DMatrix;

use crate::connectivity::{ConnectivityKind, ConnectivityMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MODULE: &str = "geometry";

/// Ordered planar sample sites.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSet<T: Real> {
    points: Vec<[T; 2]>,
}

impl<T: Real> CoordinateSet<T> {
    /// Builds a coordinate set, rejecting empty input and non-finite coordinates.
    ///
    /// Duplicate sites are allowed.
    pub fn new(points: Vec<[T; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input(MODULE, "coordinate set is empty"));
        }
        if let Some(i) = points
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::input(
                MODULE,
                format!("coordinate {} is not finite", i + 1),
            ));
        }
        Ok(Self { points })
    }

    pub fn from_columns(px: &[T], py: &[T]) -> Result<Self> {
        if px.len() != py.len() {
            return Err(Error::input(
                MODULE,
                format!("px has {} entries but py has {}", px.len(), py.len()),
            ));
        }
        Self::new(px.iter().zip(py).map(|(&x, &y)| [x, y]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> T {
        euclid(&self.points[i], &self.points[j])
    }
}

#[inline]
pub(crate) fn euclid<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Symmetric Euclidean distance matrix with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T: Real>(DMatrix<T>);

impl<T: Real> DistanceMatrix<T> {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0[(i, j)]
    }
}

pub fn pairwise_distances<T: Real>(coords: &CoordinateSet<T>) -> DistanceMatrix<T> {
    let n = coords.len();
    let pts = coords.points();
    let mut d = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = euclid(&pts[i], &pts[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix(d)
}

/// Longest edge of a minimum spanning tree of the complete graph weighted by `d`.
pub fn mst_max_edge<T: Real>(d: &DistanceMatrix<T>) -> Result<T> {
    prim_max_edge(d.n(), |i, j| d.get(i, j))
}

/// Same as [`mst_max_edge`] but evaluates distances on the fly, so no `N x N`
/// matrix is allocated.
pub fn mst_max_edge_coords<T: Real>(coords: &CoordinateSet<T>) -> Result<T> {
    prim_max_edge(coords.len(), |i, j| coords.distance(i, j))
}

// Dense Prim, O(N^2).
fn prim_max_edge<T: Real>(n: usize, dist: impl Fn(usize, usize) -> T) -> Result<T> {
    if n < 2 {
        return Err(Error::input(
            MODULE,
            format!("minimum spanning tree needs at least 2 sites, got {n}"),
        ));
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![T::max_value().unwrap(); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = dist(0, j);
    }
    let mut longest = T::zero();
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = T::max_value().unwrap();
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < next_w) {
                next = j;
                next_w = best[j];
            }
        }
        in_tree[next] = true;
        if next_w > longest {
            longest = next_w;
        }
        for j in 0..n {
            if !in_tree[j] {
                let w = dist(next, j);
                if w < best[j] {
                    best[j] = w;
                }
            }
        }
    }
    Ok(longest)
}

/// Binary k-nearest-neighbour graph. Row `i` marks the `k` sites closest to
/// site `i` (itself excluded); equal distances go to the smaller index. The
/// result is generally asymmetric.
pub fn knn_graph<T: Real>(coords: &CoordinateSet<T>, k: usize) -> Result<ConnectivityMatrix<T>> {
    let n = coords.len();
    if k == 0 || k >= n {
        return Err(Error::input(
            MODULE,
            format!("k must satisfy 1 <= k < n = {n}, got {k}"),
        ));
    }
    let mut c = DMatrix::<T>::zeros(n, n);
    let mut order: Vec<(T, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i).map(|j| (coords.distance(i, j), j)));
        order.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        });
        for &(_, j) in order.iter().take(k) {
            c[(i, j)] = T::one();
        }
    }
    ConnectivityMatrix::from_parts(c, ConnectivityKind::Knn { k })
}
