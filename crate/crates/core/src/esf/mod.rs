//! Eigenvector spatial filtering by ordinary least squares.
//!
//! The design `[1, X]` is augmented with Moran eigenvectors chosen by forward
//! stepwise selection (adjusted R², AIC or BIC), optionally constrained so that
//! no variance inflation factor exceeds a cap.

mod ols;
mod stepwise;

pub use ols::{ols_fit, vif, OlsFit};
pub use stepwise::esf;

use crate::design::CoefTable;
use crate::scalar::Real;

/// Eigenvector selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    /// Maximize adjusted R² (the default).
    R2,
    Aic,
    Bic,
    /// Keep every eigenvector, no selection.
    All,
}

impl std::str::FromStr for SelectionCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r2" => Ok(Self::R2),
            "aic" => Ok(Self::Aic),
            "bic" => Ok(Self::Bic),
            "all" => Ok(Self::All),
            other => Err(format!("unknown selection criterion `{other}` (expected r2, aic, bic or all)")),
        }
    }
}

/// Goodness-of-fit summary of a least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats<T: Real> {
    pub resid_se: T,
    pub adj_r2: T,
    pub log_lik: T,
    pub aic: T,
    pub bic: T,
}

impl<T: Real> ErrorStats<T> {
    /// Statistics of a fit with `p` coefficients (intercept included) and
    /// residual sum of squares `rss`. AIC and BIC count `p + 1` parameters.
    pub fn from_rss(rss: T, tss: T, n: usize, p: usize) -> Self {
        let nf = T::from_count(n);
        let df = T::from_count(n - p);
        let log_lik = gaussian_loglik(rss, n);
        let k = T::from_count(p + 1);
        Self {
            resid_se: (rss / df).sqrt(),
            adj_r2: T::one() - (rss / df) / (tss / (nf - T::one())),
            log_lik,
            aic: -T::lit(2.0) * log_lik + T::lit(2.0) * k,
            bic: -T::lit(2.0) * log_lik + nf.ln() * k,
        }
    }
}

/// Maximized Gaussian log-likelihood with variance `rss / n`.
pub(crate) fn gaussian_loglik<T: Real>(rss: T, n: usize) -> T {
    let nf = T::from_count(n);
    -nf / T::lit(2.0) * ((T::two_pi() * rss / nf).ln() + T::one())
}

/// Statistics of a fitted linear model against its response.
pub fn error_stats<T: Real>(fit: &LinearFit<T>, y: &nalgebra::DVector<T>) -> ErrorStats<T> {
    let rss = fit.residuals.norm_squared();
    ErrorStats::from_rss(rss, total_ss(y), y.len(), fit.coef_table.len())
}

pub(crate) fn total_ss<T: Real>(y: &nalgebra::DVector<T>) -> T {
    let mean = y.mean();
    y.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b)
}

/// Result of [`esf`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit<T: Real> {
    /// Intercept, covariates, then selected eigenvectors (`sf<l>`, 1-based).
    pub coef_table: CoefTable<T>,
    /// Selected eigenvector indices (0-based, in order of selection).
    pub selected_eigs: Vec<usize>,
    /// VIF for every non-intercept column of the final design.
    pub vif_table: Vec<(String, T)>,
    pub residuals: nalgebra::DVector<T>,
    pub stats: ErrorStats<T>,
    /// Criterion value of the base model followed by each accepted step, in
    /// natural units (adjusted R², AIC or BIC). Empty for [`SelectionCriterion::All`].
    pub criterion_path: Vec<T>,
}
