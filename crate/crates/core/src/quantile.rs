//! Spatially filtered unconditional quantile regression.
//!
//! The response is replaced by its recentered influence function at each
//! quantile `tau` and fitted with the RE-ESF model. Confidence intervals come
//! from a semiparametric bootstrap that works on the `(P + L)`-dimensional
//! Gram statistics only, so its per-iteration cost does not depend on `N`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;

use crate::design::{CoefTable, Covariates};
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::{quantile_sorted, Chol};
use crate::mixed::{self, Gram, Method, Profile, ResfFit, ShrinkageParams, Structure};
use crate::scalar::Real;

const MODULE: &str = "quantile";

/// Share of failed bootstrap iterations above which the bootstrap is rejected.
pub const MAX_FAILURE_SHARE: f64 = 0.2;
pub const DEFAULT_N_BOOT: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Recentered influence function of the `tau`-quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct RifVector<T: Real> {
    pub r_tau: DVector<T>,
    pub tau: f64,
    pub q_tau: T,
    pub f_hat: T,
    pub bandwidth: T,
}

/// Silverman's rule of thumb `0.9 min(sd, IQR / 1.34) N^(-1/5)`. Falls back to
/// the standard deviation when the interquartile range vanishes.
pub fn silverman_bandwidth<T: Real>(y: &[T]) -> T {
    let n = y.len();
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let nf = T::from_count(n);
    let mean = y.iter().fold(T::zero(), |a, &b| a + b) / nf;
    let sd = (y.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / (nf - T::one())).sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut spread = sd.min(iqr / T::lit(1.34));
    if !(spread > T::zero()) {
        spread = sd;
    }
    T::lit(0.9) * spread * nf.powf(T::lit(-0.2))
}

/// Gaussian kernel density estimate at `at` with bandwidth `h`.
pub fn gaussian_kde<T: Real>(y: &[T], at: T, h: T) -> T {
    let norm = T::one() / (T::two_pi().sqrt() * h * T::from_count(y.len()));
    y.iter()
        .map(|&v| {
            let u = (at - v) / h;
            (-u * u * T::lit(0.5)).exp()
        })
        .fold(T::zero(), |a, b| a + b)
        * norm
}

/// `RIF_i = q + (tau - 1{y_i <= q}) / f(q)` with the type-7 empirical quantile
/// `q` and a Gaussian kernel density estimate `f`.
pub fn rif<T: Real>(y: &DVector<T>, tau: f64) -> Result<RifVector<T>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::input(MODULE, format!("tau = {tau} outside (0, 1)")));
    }
    if y.len() < 10 {
        return Err(Error::input(MODULE, format!("{} observations; at least 10 are needed", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(MODULE, "response contains non-finite values"));
    }
    let mut sorted: Vec<T> = y.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::degenerate(MODULE, "response is constant"));
    }
    let q = quantile_sorted(&sorted, tau);
    let h = silverman_bandwidth(&sorted);
    let f = gaussian_kde(&sorted, q, h);
    let scale = sorted[sorted.len() - 1] - sorted[0];
    if !(f * scale > T::eps()) {
        return Err(Error::degenerate(MODULE, format!("density estimate vanishes at the {tau} quantile")));
    }
    let t = T::lit(tau);
    let below = q + (t - T::one()) / f;
    let above = q + t / f;
    let r_tau = y.map(|v| if v <= q { below } else { above });
    Ok(RifVector {
        r_tau,
        tau,
        q_tau: q,
        f_hat: f,
        bandwidth: h,
    })
}

/// Bootstrap summary of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BootRow<T: Real> {
    pub name: String,
    pub estimate: T,
    pub lo95: T,
    pub hi95: T,
    pub p_value: T,
}

/// Bootstrap tables: fixed effects (`b`) and shrinkage parameters (`s`).
#[derive(Debug, Clone, PartialEq)]
pub struct BootTables<T: Real> {
    pub b: Vec<BootRow<T>>,
    pub s: Vec<BootRow<T>>,
    /// Iterations whose refit failed.
    pub failed: usize,
}

/// Instrumentation of one bootstrap run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootProbe {
    /// Length of the vectors drawn and refitted per iteration (`P + L`).
    pub working_dim: usize,
    pub iterations: usize,
    /// Seconds spent in the one-time `N`-dependent precomputation.
    pub setup_seconds: f64,
    /// Mean wall-clock seconds per iteration.
    pub seconds_per_iteration: f64,
}

/// Quasi goodness of fit on the RIF scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrStats<T: Real> {
    pub resid_se: T,
    /// Conditional adjusted R² of the RIF regression.
    pub quasi_adj_r2_cond: T,
}

/// Fit at a single quantile.
#[derive(Debug, Clone)]
pub struct TauFit<T: Real> {
    pub tau: f64,
    pub b: CoefTable<T>,
    pub s: ShrinkageParams<T>,
    pub e: QrStats<T>,
    pub boot: Option<BootTables<T>>,
    pub probe: Option<BootProbe>,
}

/// Result of [`resf_qr`].
#[derive(Debug, Clone)]
pub struct QrFit<T: Real> {
    pub taus: Vec<f64>,
    pub per_tau: Vec<TauFit<T>>,
}

impl<T: Real> QrFit<T> {
    pub fn has_boot(&self) -> bool {
        self.per_tau.iter().all(|t| t.boot.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrOptions {
    pub taus: Vec<f64>,
    pub boot: bool,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for QrOptions {
    fn default() -> Self {
        Self {
            taus: default_taus(),
            boot: false,
            n_boot: DEFAULT_N_BOOT,
            seed: DEFAULT_SEED,
        }
    }
}

/// `0.1, 0.2, ..., 0.9`.
pub fn default_taus() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Fits the RE-ESF model (REML) to the RIF at every quantile. The quantiles
/// are sorted and deduplicated. Errors are annotated with the offending `tau`.
pub fn resf_qr<T: Real>(y: &DVector<T>, x: &Covariates<T>, basis: &EigenBasis<T>, opts: &QrOptions) -> Result<QrFit<T>> {
    let mut taus = opts.taus.clone();
    if taus.is_empty() {
        return Err(Error::input(MODULE, "no quantiles requested"));
    }
    if let Some(bad) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::input(MODULE, format!("tau = {bad} outside (0, 1)")));
    }
    if opts.boot && opts.n_boot == 0 {
        return Err(Error::input(MODULE, "n_boot must be positive"));
    }
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    let mut per_tau = Vec::with_capacity(taus.len());
    for (index, &tau) in taus.iter().enumerate() {
        let at = |source: Error| Error::AtQuantile {
            tau,
            source: Box::new(source),
        };
        let r = rif(y, tau).map_err(at)?;
        let fit = mixed::resf(&r.r_tau, x, basis, Method::Reml).map_err(at)?;
        let (boot, probe) = if opts.boot {
            let seed = mix_seed(opts.seed, index as u64);
            let (tables, probe) = semiparametric_bootstrap(&r.r_tau, x, basis, &fit, opts.n_boot, seed).map_err(at)?;
            (Some(tables), Some(probe))
        } else {
            (None, None)
        };
        per_tau.push(TauFit {
            tau,
            b: fit.coef_table.clone(),
            s: fit.shrinkage,
            e: QrStats {
                resid_se: fit.stats.resid_se,
                quasi_adj_r2_cond: fit.stats.adj_r2_cond,
            },
            boot,
            probe,
        });
    }
    Ok(QrFit { taus, per_tau })
}

/// SplitMix64 finalizer over `root + counter`.
fn mix_seed(root: u64, counter: u64) -> u64 {
    let mut z = root.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One bootstrap draw: fixed effects, then `sigma_gamma` and `alpha`.
type Draw = Vec<f64>;

/// Semiparametric bootstrap of a fitted RE-ESF model.
///
/// Each iteration draws `gamma* ~ N(0, s2 tau W(alpha))` at the estimates and
/// Gaussian noise, forms the Gram statistics of the implied response exactly
/// in distribution (projected noise through the Cholesky factor of the Gram
/// matrix of `[X, E]`, remaining noise energy as a scaled chi-square), and
/// refits `(tau, alpha)` from those statistics. Intervals are percentile
/// intervals; p-values are `2 min(P(b* <= 0), P(b* >= 0))` floored at
/// `1 / (n_boot + 1)`. Iterations run in parallel with per-iteration seeds, so
/// the result does not depend on the thread count.
pub fn semiparametric_bootstrap<T: Real>(
    y: &DVector<T>,
    x: &Covariates<T>,
    basis: &EigenBasis<T>,
    fit: &ResfFit<T>,
    n_boot: usize,
    seed: u64,
) -> Result<(BootTables<T>, BootProbe)> {
    if n_boot == 0 {
        return Err(Error::input(MODULE, "n_boot must be positive"));
    }
    let setup = Instant::now();
    let (design, names) = x.with_intercept();
    let n = y.len();
    let p = design.ncols();
    let l = basis.len();
    let dim = p + l;
    let e = basis.vectors();
    let gram = Gram::new(y, &design, e);
    let mut g = DMatrix::zeros(dim, dim);
    g.view_mut((0, 0), (p, p)).copy_from(&gram.xx);
    g.view_mut((p, 0), (l, p)).copy_from(&gram.zx);
    g.view_mut((0, p), (p, l)).copy_from(&gram.zx.transpose());
    g.view_mut((p, p), (l, l)).copy_from(&gram.zz);
    let factor = Chol::new(g.clone())
        .ok_or_else(|| Error::degenerate(MODULE, "[X, E] is rank deficient; bootstrap needs N > P + L"))?
        .chol
        .l();
    let resid_df = n.checked_sub(dim).filter(|d| *d > 0);
    let structure = Structure::new(basis.values(), 1);
    let method = fit.stats.method;
    let beta: DVector<T> = DVector::from_vec(fit.coef_table.estimates());
    let alpha = fit.shrinkage.alpha;
    let prior_sd = structure.lambda_rel.map(|w| (fit.sigma2 * fit.tau * w.powf(alpha)).sqrt());
    let sigma = fit.sigma2.sqrt();
    let lambda1 = basis.values()[0].as_f64();
    let start = vec![fit.tau.as_f64().max(mixed::TAU_BOUNDS.0).ln(), alpha.as_f64()];
    let setup_seconds = setup.elapsed().as_secs_f64();

    let iterate = |iter: usize| -> Option<Draw> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, iter as u64));
        let mut c = DVector::zeros(dim);
        c.rows_mut(0, p).copy_from(&beta);
        for j in 0..l {
            c[p + j] = prior_sd[j] * T::lit(rng.sample(StandardNormal));
        }
        let z = DVector::from_fn(dim, |_, _| sigma * T::lit(rng.sample(StandardNormal)));
        let w = &factor * &z;
        let gc = &g * &c;
        let rest = match resid_df {
            Some(df) => fit.sigma2 * T::lit(rng.sample(ChiSquared::new(df as f64).expect("positive df"))),
            None => T::zero(),
        };
        let yy = c.dot(&gc) + T::lit(2.0) * c.dot(&w) + z.dot(&z) + rest;
        let xy = gc.rows(0, p) + w.rows(0, p);
        let zy = gc.rows(p, l) + w.rows(p, l);
        let profile = Profile::new(gram.with_response(xy, zy, yy), structure.clone());
        let opt = mixed::optimize_from(&profile, method, &start).ok()?;
        let sol = opt.solution;
        let tau = opt.params[0].exp();
        let a = opt.params[1];
        let mut draw: Draw = sol.beta.iter().map(|v| v.as_f64()).collect();
        draw.push((sol.sigma2.as_f64() * tau / lambda1.powf(a)).sqrt());
        draw.push(a);
        draw.iter().all(|v| v.is_finite()).then_some(draw)
    };

    let started = Instant::now();
    let draws: Vec<Option<Draw>> = (0..n_boot).into_par_iter().map(iterate).collect();
    let seconds_per_iteration = started.elapsed().as_secs_f64() / n_boot as f64;
    let ok: Vec<Draw> = draws.into_iter().flatten().collect();
    let failed = n_boot - ok.len();
    if failed as f64 > MAX_FAILURE_SHARE * n_boot as f64 || ok.is_empty() {
        return Err(Error::BootstrapUnstable { failed, total: n_boot });
    }

    let summarize = |name: &str, j: usize, estimate: T| {
        let mut v: Vec<f64> = ok.iter().map(|d| d[j]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = v.len() as f64;
        let le = v.iter().filter(|&&b| b <= 0.0).count() as f64 / m;
        let ge = v.iter().filter(|&&b| b >= 0.0).count() as f64 / m;
        let p = (2.0 * le.min(ge)).max(1.0 / (n_boot as f64 + 1.0)).min(1.0);
        let est = estimate.as_f64();
        BootRow {
            name: name.to_string(),
            estimate,
            lo95: T::lit(quantile_sorted(&v, 0.025).min(est)),
            hi95: T::lit(quantile_sorted(&v, 0.975).max(est)),
            p_value: T::lit(p),
        }
    };
    let b = names.iter().enumerate().map(|(j, name)| summarize(name, j, beta[j])).collect();
    let s = vec![
        summarize(SHRINK_SE, p, fit.shrinkage.sigma_gamma),
        summarize(SHRINK_ALPHA, p + 1, fit.shrinkage.alpha),
    ];
    Ok((
        BootTables { b, s, failed },
        BootProbe {
            working_dim: dim,
            iterations: n_boot,
            setup_seconds,
            seconds_per_iteration,
        },
    ))
}

/// Row names of the shrinkage parameters in reports.
pub const SHRINK_SE: &str = "shrink_sf_SE";
pub const SHRINK_ALPHA: &str = "shrink_sf_alpha";
