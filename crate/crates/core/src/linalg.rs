//! Small dense linear-algebra helpers on top of nalgebra.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::scalar::Real;

/// Symmetric eigen-decomposition with eigenpairs sorted by descending eigenvalue.
pub(crate) fn sorted_symmetric_eigen<T: Real>(m: DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Flips each column so that its largest-magnitude entry is positive. The
/// first entry wins among equal magnitudes.
pub(crate) fn normalize_signs<T: Real>(v: &mut DMatrix<T>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = T::zero();
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < T::zero() {
            col.neg_mut();
        }
    }
}

/// Within runs of (near-)equal eigenvalues, orders the columns by descending
/// lexicographic comparison. Eigenvalues stay in place.
pub(crate) fn order_degenerate_clusters<T: Real>(values: &DVector<T>, vectors: &mut DMatrix<T>, tol: T) {
    let l = values.len();
    let mut start = 0;
    while start < l {
        let mut end = start + 1;
        while end < l && (values[start] - values[end]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            let mut idx: Vec<usize> = (start..end).collect();
            idx.sort_by(|&a, &b| lexicographic(vectors, b, a));
            let block = vectors.select_columns(&idx);
            for (k, c) in (start..end).enumerate() {
                vectors.set_column(c, &block.column(k));
            }
        }
        start = end;
    }
}

fn lexicographic<T: Real>(v: &DMatrix<T>, a: usize, b: usize) -> Ordering {
    for i in 0..v.nrows() {
        match v[(i, a)].partial_cmp(&v[(i, b)]) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.cmp(&b)
}

/// Cholesky factorization that also reports `log det`.
pub(crate) struct Chol<T: Real> {
    pub chol: Cholesky<T, Dyn>,
}

impl<T: Real> Chol<T> {
    pub fn new(m: DMatrix<T>) -> Option<Self> {
        let chol = Cholesky::new(m)?;
        let l = chol.l_dirty();
        if (0..l.nrows()).any(|i| !(l[(i, i)] > T::zero()) || !l[(i, i)].is_finite()) {
            return None;
        }
        Some(Self { chol })
    }

    pub fn log_det(&self) -> T {
        let l = self.chol.l_dirty();
        let two = T::lit(2.0);
        (0..l.nrows()).map(|i| l[(i, i)].ln()).fold(T::zero(), |a, b| a + b) * two
    }

    /// `log det` of the leading `k x k` principal block.
    pub fn log_det_leading(&self, k: usize) -> T {
        let l = self.chol.l_dirty();
        let two = T::lit(2.0);
        (0..k).map(|i| l[(i, i)].ln()).fold(T::zero(), |a, b| a + b) * two
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and nonempty.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
