//! Random-effects eigenvector spatial filtering (RE-ESF) and spatially varying
//! coefficients (SVC).
//!
//! The eigenvector coefficients are Gaussian random effects,
//! `gamma ~ N(0, sigma_gamma^2 diag(lambda^alpha))`. The variance parameters
//! are estimated by maximizing the profiled ML or REML likelihood over
//! `(log tau, alpha)`, where `tau` is the variance ratio to the residual
//! variance and `alpha` lies in `[0, ALPHA_MAX]`.

mod optim;
mod profile;
mod svc;

pub use svc::{resf_vc, SvcFit};

pub(crate) use optim::{minimize_multistart, Bounds, NmOptions};
pub(crate) use profile::{Gram, Profile, Solution, Structure};

use nalgebra::{DMatrix, DVector};

use crate::design::{CoefTable, Covariates};
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::esf::{ols_fit, total_ss};
use crate::linalg::Chol;
use crate::scalar::Real;

/// Upper end of the `alpha` search interval.
pub const ALPHA_MAX: f64 = 4.0;
/// Search interval of the variance ratio `tau`.
pub const TAU_BOUNDS: (f64, f64) = (1e-8, 1e8);
/// Optimizer starting points `(tau, alpha)`.
pub const STARTS: [(f64, f64); 3] = [(0.1, 1.0), (1.0, 0.5), (1.0, 2.0)];

/// Variance-parameter estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Restricted maximum likelihood (the default).
    #[default]
    Reml,
    Ml,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reml" => Ok(Self::Reml),
            "ml" => Ok(Self::Ml),
            other => Err(format!("unknown method `{other}` (expected reml or ml)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reml => "reml",
            Self::Ml => "ml",
        })
    }
}

/// Standard deviation and scale of one random-effect block, on the scale of
/// the unnormalized eigenvalues: `Var(gamma_l) = sigma_gamma^2 lambda_l^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageParams<T: Real> {
    pub sigma_gamma: T,
    pub alpha: T,
}

/// Conditional goodness-of-fit summary of a mixed model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedStats<T: Real> {
    pub resid_se: T,
    pub adj_r2_cond: T,
    /// Restricted log-likelihood under REML, log-likelihood under ML.
    pub log_lik: T,
    pub aic: T,
    pub bic: T,
    pub method: Method,
}

/// Result of [`resf`].
#[derive(Debug, Clone)]
pub struct ResfFit<T: Real> {
    pub coef_table: CoefTable<T>,
    /// Predicted eigenvector coefficients, one per basis vector.
    pub gamma_hat: DVector<T>,
    pub shrinkage: ShrinkageParams<T>,
    pub stats: MixedStats<T>,
    /// Residual variance estimate.
    pub sigma2: T,
    /// Variance ratio on the normalized eigenvalue scale.
    pub tau: T,
    /// Effective number of parameters (trace of the hat operator).
    pub p_eff: T,
    /// `X beta + E gamma`.
    pub fitted: DVector<T>,
    /// Number of estimated parameters behind AIC/BIC.
    pub n_params: usize,
    /// Nelder-Mead iterations summed over restarts.
    pub iterations: usize,
}

/// `diag(lambda^alpha)` as a vector.
pub fn lambda_alpha<T: Real>(values: &DVector<T>, alpha: T) -> Result<DVector<T>> {
    if values.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::input("mixed", "eigenvalues must be positive"));
    }
    if !(alpha >= T::zero() && alpha <= T::lit(ALPHA_MAX)) {
        return Err(Error::input("mixed", format!("alpha = {alpha} outside [0, {ALPHA_MAX}]")));
    }
    Ok(values.map(|v| v.powf(alpha)))
}

/// Profiled log-likelihood of `y = X beta + E gamma + e` at `(log tau, alpha)`.
///
/// `x` is the full fixed-effect design (include the intercept column) and
/// `tau` multiplies the normalized weights `(lambda / lambda_1)^alpha`.
/// Numerically singular systems and non-finite values give `-inf`.
pub fn reml_profile_loglik<T: Real>(
    y: &DVector<T>,
    x: &DMatrix<T>,
    e: &DMatrix<T>,
    values: &DVector<T>,
    log_tau: f64,
    alpha: f64,
    method: Method,
) -> Result<T> {
    if x.nrows() != y.len() || e.nrows() != y.len() || e.ncols() != values.len() {
        return Err(Error::input("mixed", "y, X, E and eigenvalues are not conformable"));
    }
    lambda_alpha(values, T::lit(alpha))?;
    let profile = Profile::new(Gram::new(y, x, e), Structure::new(values, 1));
    Ok(profile.loglik(&[log_tau, alpha], method).unwrap_or_else(|| -T::one() / T::zero()))
}

pub(crate) fn bounds(blocks: usize) -> Bounds {
    let mut lo = Vec::with_capacity(2 * blocks);
    let mut hi = Vec::with_capacity(2 * blocks);
    for _ in 0..blocks {
        lo.extend([TAU_BOUNDS.0.ln(), 0.0]);
        hi.extend([TAU_BOUNDS.1.ln(), ALPHA_MAX]);
    }
    Bounds { lo, hi }
}

pub(crate) fn start_points() -> Vec<Vec<f64>> {
    STARTS.iter().map(|&(t, a)| vec![t.ln(), a]).collect()
}

pub(crate) const STEP: [f64; 2] = [1.0, 0.5];

pub(crate) fn nm_options<T: Real>() -> NmOptions {
    NmOptions {
        ftol: 1e-8f64.max(1e3 * T::eps().as_f64()),
        xtol: 1e-6f64.max(T::eps().as_f64().sqrt()),
        max_iter: 2000,
    }
}

/// Maximum of a single-block profile likelihood.
pub(crate) struct Optimum<T: Real> {
    pub params: Vec<f64>,
    pub solution: Solution<T>,
    pub iterations: usize,
}

pub(crate) fn optimize<T: Real>(profile: &Profile<T>, method: Method) -> Result<Optimum<T>> {
    optimize_starts(profile, method, &start_points())
}

/// Single start followed by a polishing restart.
pub(crate) fn optimize_from<T: Real>(profile: &Profile<T>, method: Method, start: &[f64]) -> Result<Optimum<T>> {
    optimize_starts(profile, method, &[start.to_vec()])
}

fn optimize_starts<T: Real>(profile: &Profile<T>, method: Method, starts: &[Vec<f64>]) -> Result<Optimum<T>> {
    let mut objective = |p: &[f64]| profile.loglik(p, method).map_or(f64::INFINITY, |l| -l.as_f64());
    let r = minimize_multistart(&mut objective, starts, &STEP, &bounds(1), nm_options::<T>());
    let solution = profile.solve(&r.x, method);
    match solution {
        Some(solution) if r.converged => Ok(Optimum {
            params: r.x,
            solution,
            iterations: r.iterations,
        }),
        _ => Err(Error::Convergence {
            module: "mixed",
            iterations: r.iterations,
            best_value: -r.f,
            best_params: vec![r.x[0].exp(), r.x[1]],
        }),
    }
}

pub(crate) fn check_response<T: Real>(y: &DVector<T>, n: usize, module: &'static str) -> Result<()> {
    if y.len() != n {
        return Err(Error::input(module, format!("response has {} values but the basis has {n} sites", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(module, "response contains non-finite values"));
    }
    Ok(())
}

/// Inverse of the Henderson system at the solution, after a positive
/// definiteness check.
pub(crate) fn system_inverse<T: Real>(profile: &Profile<T>, sol: &Solution<T>) -> Result<DMatrix<T>> {
    let m = profile.system_matrix(&sol.scales);
    let chol = Chol::new(m).ok_or_else(|| Error::degenerate("mixed", "mixed-model equations are not positive definite"))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * T::lit(0.5))
}

/// Fits the RE-ESF model `y = [1, X] beta + E gamma + e`.
pub fn resf<T: Real>(y: &DVector<T>, x: &Covariates<T>, basis: &EigenBasis<T>, method: Method) -> Result<ResfFit<T>> {
    check_response(y, basis.n(), "mixed")?;
    if x.n() != basis.n() {
        return Err(Error::input("mixed", format!("covariates have {} rows but the basis has {} sites", x.n(), basis.n())));
    }
    if basis.is_empty() {
        return Err(Error::input("mixed", "the eigenvector basis is empty"));
    }
    let (design, names) = x.with_intercept();
    let n = y.len();
    let p = design.ncols();
    if n <= p {
        return Err(Error::input("mixed", format!("{n} observations for {p} fixed effects")));
    }
    if let Err(Error::SingularDesign { column, name, .. }) = ols_fit(y, &design) {
        let name = names.get(column).cloned().unwrap_or(name);
        return Err(Error::SingularDesign { module: "mixed", column, name });
    }
    let profile = Profile::new(Gram::new(y, &design, basis.vectors()), Structure::new(basis.values(), 1));
    let opt = optimize(&profile, method)?;
    let sol = &opt.solution;
    let inv = system_inverse(&profile, sol)?;
    let q = profile.gram.q();

    let cov = inv.view((q, q), (p, p)).into_owned() * sol.sigma2;
    let se = standard_errors(&cov)?;
    let coef_table = CoefTable::student(&names, sol.beta.as_slice(), &se, (n - p) as f64);

    let p_eff = T::from_count(p + q) - (0..q).map(|i| inv[(i, i)]).fold(T::zero(), |a, b| a + b);
    let fitted = &design * &sol.beta + basis.vectors() * &sol.gamma;
    let tau = T::lit(opt.params[0].exp());
    let alpha = T::lit(opt.params[1]);
    let lambda1 = basis.values()[0];
    let shrinkage = ShrinkageParams {
        sigma_gamma: (sol.sigma2 * tau / lambda1.powf(alpha)).sqrt(),
        alpha,
    };
    let mut fit = ResfFit {
        coef_table,
        gamma_hat: sol.gamma.clone(),
        shrinkage,
        stats: MixedStats {
            resid_se: sol.sigma2.sqrt(),
            adj_r2_cond: T::zero(),
            log_lik: sol.loglik,
            aic: T::zero(),
            bic: T::zero(),
            method,
        },
        sigma2: sol.sigma2,
        tau,
        p_eff,
        fitted,
        n_params: p + 2,
        iterations: opt.iterations,
    };
    fit.stats = conditional_stats(&fit, y);
    Ok(fit)
}

/// Residual SE, conditional adjusted R² (effective degrees of freedom
/// `p_eff`), likelihood and information criteria of a fitted model.
pub fn conditional_stats<T: Real>(fit: &ResfFit<T>, y: &DVector<T>) -> MixedStats<T> {
    stats_from(y, &fit.fitted, fit.p_eff, fit.sigma2, fit.stats.log_lik, fit.n_params, fit.stats.method)
}

pub(crate) fn stats_from<T: Real>(
    y: &DVector<T>,
    fitted: &DVector<T>,
    p_eff: T,
    sigma2: T,
    log_lik: T,
    n_params: usize,
    method: Method,
) -> MixedStats<T> {
    let n = T::from_count(y.len());
    let rss = (y - fitted).norm_squared();
    let tss = total_ss(y);
    let two = T::lit(2.0);
    let k = T::from_count(n_params);
    MixedStats {
        resid_se: sigma2.sqrt(),
        adj_r2_cond: T::one() - (rss / (n - p_eff)) / (tss / (n - T::one())),
        log_lik,
        aic: -two * log_lik + two * k,
        bic: -two * log_lik + n.ln() * k,
        method,
    }
}

pub(crate) fn standard_errors<T: Real>(cov: &DMatrix<T>) -> Result<Vec<T>> {
    if Chol::new(cov.clone()).is_none() {
        return Err(Error::degenerate("mixed", "fixed-effect covariance is not positive definite"));
    }
    Ok((0..cov.nrows()).map(|i| cov[(i, i)].sqrt()).collect())
}
