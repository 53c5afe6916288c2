use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MODULE: &str = "esf";

pub(crate) fn rank_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::eps() * T::lit(100.0))
}

/// Ordinary least squares on a full design (intercept column included by the
/// caller).
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T: Real> {
    pub coefficients: DVector<T>,
    pub se: DVector<T>,
    pub t_values: DVector<T>,
    pub p_values: DVector<T>,
    pub residuals: DVector<T>,
    pub rss: T,
    /// Residual degrees of freedom `N - P`.
    pub df: usize,
}

/// Least squares via Householder QR. A column whose component orthogonal to
/// the preceding columns vanishes is reported as singular.
pub fn ols_fit<T: Real>(y: &DVector<T>, design: &DMatrix<T>) -> Result<OlsFit<T>> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::input(
            MODULE,
            format!("response has {} rows but design has {n}", y.len()),
        ));
    }
    if p >= n {
        return Err(Error::SingularDesign {
            module: MODULE,
            column: p.saturating_sub(1).min(n),
            name: format!("{p} columns for {n} observations"),
        });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    check_rank(design, &r)?;
    let q = qr.q();
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign {
            module: MODULE,
            column: 0,
            name: String::new(),
        })?;
    let fitted = design * &beta;
    let residuals = y - fitted;
    let rss = residuals.norm_squared();
    let df = n - p;
    let sigma2 = rss / T::from_count(df);
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("triangular factor checked nonsingular");
    // (D'D)^-1 = R^-1 R^-T
    let se = DVector::from_iterator(
        p,
        (0..p).map(|j| (r_inv.row(j).norm_squared() * sigma2).sqrt()),
    );
    let t_values = beta.component_div(&se);
    let p_values = t_values.map(|t| T::lit(crate::stats::t_pvalue(t.as_f64(), df as f64)));
    Ok(OlsFit {
        coefficients: beta,
        se,
        t_values,
        p_values,
        residuals,
        rss,
        df,
    })
}

fn check_rank<T: Real>(design: &DMatrix<T>, r: &DMatrix<T>) -> Result<()> {
    let tol = rank_tol::<T>();
    for j in 0..design.ncols() {
        let norm = design.column(j).norm();
        if !(r[(j, j)].abs() > tol * norm.max(T::tiny())) {
            return Err(Error::SingularDesign {
                module: MODULE,
                column: j,
                name: String::new(),
            });
        }
    }
    Ok(())
}

/// Variance inflation factors of the columns of `x` (no intercept column):
/// `1 / (1 - R²_j)` from regressing column `j` on the others plus an
/// intercept. Perfect collinearity gives `+inf`.
pub fn vif<T: Real>(x: &DMatrix<T>) -> Vec<T> {
    let (n, p) = x.shape();
    if p == 1 {
        return vec![T::one()];
    }
    (0..p)
        .map(|j| {
            let target = x.column(j).into_owned();
            let mean = target.mean();
            let tss: T = target.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b);
            if !(tss > T::zero()) {
                return infinity();
            }
            let mut others = DMatrix::from_element(n, p, T::one());
            let mut c = 1;
            for k in (0..p).filter(|&k| k != j) {
                others.set_column(c, &x.column(k));
                c += 1;
            }
            let q = others.qr().q();
            let resid = &target - &q * (q.transpose() * &target);
            let one_minus_r2 = resid.norm_squared() / tss;
            if one_minus_r2 <= rank_tol::<T>() {
                infinity()
            } else {
                T::one() / one_minus_r2
            }
        })
        .collect()
}

pub(crate) fn infinity<T: Real>() -> T {
    T::one() / T::zero()
}
