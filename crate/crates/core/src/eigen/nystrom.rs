//! Nyström approximation of the leading Moran eigenpairs for the
//! exponential-kernel connectivity.
//!
//! With `K = C + I` (unit diagonal), `M C M = M K M - M`, and `M` acts as the
//! identity on mean-zero vectors. The kernel is approximated from `m` knot
//! points as `K ~ K_nm K_mm^+ K_mn`, so the eigenpairs of `M C M` on the
//! mean-zero subspace follow from a factor `F = M K_nm V S^(-1/2)` with
//! `F F' ~ M K M`. Nothing of size `N x N` is formed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_sites, EigenBasis, EigenMode, POSITIVE_EPS};
use crate::connectivity::ConnectivityKind;
use crate::error::{Error, Result};
use crate::geometry::{euclid, mst_max_edge_coords, CoordinateSet};
use crate::linalg::{normalize_signs, sorted_symmetric_eigen, Chol};
use crate::scalar::Real;

const MODULE: &str = "eigen";

pub const DEFAULT_ENUM: usize = 200;
pub const DEFAULT_KMEANS_SEED: u64 = 123_456_789;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NystromOptions {
    /// Number of eigenpairs to approximate.
    pub enum_count: usize,
    /// Seed of the k-means knot placement.
    pub seed: u64,
}

impl Default for NystromOptions {
    fn default() -> Self {
        Self {
            enum_count: DEFAULT_ENUM,
            seed: DEFAULT_KMEANS_SEED,
        }
    }
}

impl NystromOptions {
    pub fn with_enum(enum_count: usize) -> Self {
        Self {
            enum_count,
            ..Self::default()
        }
    }
}

/// Approximate leading eigenpairs of `M C M` for `C_ij = exp(-d_ij / r)`,
/// `r` the longest minimum-spanning-tree edge.
pub fn meigen_f<T: Real>(coords: &CoordinateSet<T>, opts: NystromOptions) -> Result<EigenBasis<T>> {
    let n = coords.len();
    check_sites(n)?;
    if opts.enum_count == 0 || opts.enum_count > n {
        return Err(Error::input(
            MODULE,
            format!("enum must satisfy 1 <= enum <= N = {n}, got {}", opts.enum_count),
        ));
    }
    let r = mst_max_edge_coords(coords)?;
    if !(r > T::zero()) {
        return Err(Error::degenerate(
            MODULE,
            "all sites coincide; the spanning-tree range is zero",
        ));
    }
    let want = opts.enum_count.min(n - 1);
    let m = (opts.enum_count + 1).min(n);
    let knots = if m == n {
        coords.points().to_vec()
    } else {
        kmeans_centers(coords.points(), m, opts.seed)
    };

    let kmm = DMatrix::from_fn(m, m, |a, b| (-euclid(&knots[a], &knots[b]) / r).exp());
    let pts = coords.points();
    let mut knm = DMatrix::from_fn(n, m, |i, a| (-euclid(&pts[i], &knots[a]) / r).exp());
    center_columns(&mut knm);

    // pseudo-inverse square root of the knot kernel
    let (s, v) = sorted_symmetric_eigen(kmm);
    let floor = s[0] * T::lit(1e-10).max(T::eps() * T::lit(100.0));
    let rank = s.iter().take_while(|&&x| x > floor).count();
    let scale = DVector::from_iterator(rank, s.iter().take(rank).map(|&x| T::one() / x.sqrt()));
    let mut vs = v.columns(0, rank).into_owned();
    for (j, mut col) in vs.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    // Nystrom extension of the knot eigenvectors to every site
    let mut f = &knm * &vs;
    center_columns(&mut f);

    // eigenpairs of F F' via the small Gram matrix; only Theta > 1 maps to a
    // positive Moran eigenvalue
    let gram = f.transpose() * &f;
    let (theta, u) = sorted_symmetric_eigen(gram);
    let top = theta[0];
    let keep = theta
        .iter()
        .take_while(|&&t| t - T::one() > (top - T::one()) * T::lit(POSITIVE_EPS))
        .count()
        .min(want);
    if keep == 0 {
        return Err(Error::degenerate(
            MODULE,
            "the approximated connectivity has no positive eigenvalue",
        ));
    }
    let mut ul = u.columns(0, keep).into_owned();
    for (j, mut col) in ul.column_iter_mut().enumerate() {
        col /= theta[j].sqrt();
    }
    let mut e = &f * &ul;

    // re-center and re-orthonormalize (Cholesky-QR, twice)
    center_columns(&mut e);
    for _ in 0..2 {
        e = orthonormalize(e)?;
    }

    // Rayleigh-Ritz on the approximated operator F F' - M within span(E)
    let fe = f.transpose() * &e;
    let ritz = fe.transpose() * &fe - DMatrix::identity(keep, keep);
    let (lambda, w) = sorted_symmetric_eigen(ritz);
    let mut vectors = &e * &w;
    let lambda1 = lambda[0];
    let l = lambda
        .iter()
        .take_while(|&&x| x > lambda1 * T::lit(POSITIVE_EPS))
        .count();
    if l == 0 || !(lambda1 > T::zero()) {
        return Err(Error::degenerate(
            MODULE,
            "the approximated connectivity has no positive eigenvalue",
        ));
    }
    vectors = vectors.columns(0, l).into_owned();
    normalize_signs(&mut vectors);

    EigenBasis::from_parts(
        vectors,
        lambda.rows(0, l).into_owned(),
        EigenMode::Nystrom,
        ConnectivityKind::ExpKernel { range: r },
    )
}

fn center_columns<T: Real>(a: &mut DMatrix<T>) {
    let nf = T::from_count(a.nrows());
    for mut col in a.column_iter_mut() {
        let mean = col.sum() / nf;
        col.add_scalar_mut(-mean);
    }
}

fn orthonormalize<T: Real>(e: DMatrix<T>) -> Result<DMatrix<T>> {
    let g = e.transpose() * &e;
    let chol = Chol::new(g).ok_or_else(|| {
        Error::degenerate(MODULE, "approximate eigenvectors are numerically dependent")
    })?;
    let l = chol.chol.l();
    let l_inv_t = l
        .try_inverse()
        .ok_or_else(|| Error::degenerate(MODULE, "singular orthonormalization factor"))?
        .transpose();
    // E R^-1 with R = L'
    Ok(e * l_inv_t)
}

/// k-means centers (k-means++ seeding followed by Lloyd iterations),
/// deterministic for a fixed seed.
pub fn kmeans_centers<T: Real>(points: &[[T; 2]], k: usize, seed: u64) -> Vec<[T; 2]> {
    let n = points.len();
    assert!(k >= 1 && k <= n, "k-means needs 1 <= k <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d2 = |a: &[T; 2], b: &[T; 2]| {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        (dx * dx + dy * dy).as_f64()
    };

    let mut centers: Vec<[T; 2]> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut nearest: Vec<f64> = points.iter().map(|p| d2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick];
        centers.push(c);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(d2(p, &c));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = d2(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        for (i, p) in points.iter().enumerate() {
            let s = &mut sums[assign[i]];
            s[0] += p[0].as_f64();
            s[1] += p[1].as_f64();
            s[2] += 1.0;
        }
        for (j, s) in sums.iter().enumerate() {
            if s[2] > 0.0 {
                centers[j] = [T::lit(s[0] / s[2]), T::lit(s[1] / s[2])];
            } else {
                // empty cluster: move it onto the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        d2(&points[a], &centers[assign[a]])
                            .partial_cmp(&d2(&points[b], &centers[assign[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[j] = points[far];
            }
        }
    }
    centers
}
