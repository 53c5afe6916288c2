//! Spatially varying coefficients: `beta_k = beta_k0 1 + E gamma_k`.

use nalgebra::{DMatrix, DVector};

use crate::design::{CoefTable, Covariates};
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::esf::ols_fit;
use crate::scalar::Real;
use crate::stats::z_pvalue;

use super::{
    bounds, check_response, minimize_multistart, nm_options, standard_errors, start_points, stats_from, system_inverse,
    Gram, Method, MixedStats, Profile, ShrinkageParams, Structure, STEP,
};

/// Varying coefficients beyond which a warning is emitted.
pub const MAX_ADVISED_VARYING: usize = 4;
const CYCLE_TOL: f64 = 1e-6;
const MAX_CYCLES: usize = 50;

/// Result of [`resf_vc`].
#[derive(Debug, Clone)]
pub struct SvcFit<T: Real> {
    /// Names of the varying coefficients: the intercept, then each varying covariate.
    pub vc_names: Vec<String>,
    /// Per-site coefficients, `N x (K_v + 1)`.
    pub b_vc: DMatrix<T>,
    /// Pointwise standard errors of `b_vc`.
    pub se_vc: DMatrix<T>,
    /// Pointwise two-sided normal p-values of `b_vc`.
    pub p_vc: DMatrix<T>,
    /// Constant components `beta_k0` of the varying coefficients.
    pub b_vc_mean: CoefTable<T>,
    /// Coefficients of the constant-coefficient covariates.
    pub b_const: CoefTable<T>,
    pub shrinkage_per_coef: Vec<ShrinkageParams<T>>,
    pub stats: MixedStats<T>,
    pub sigma2: T,
    pub p_eff: T,
    pub fitted: DVector<T>,
    pub n_params: usize,
    /// Coordinate-descent cycles used.
    pub cycles: usize,
    pub warnings: Vec<String>,
}

/// Fits `y = sum_k x_k .* (beta_k0 + E gamma_k) + X_c beta_c + e` with an
/// always-varying intercept (`x_0 = 1`) and one `(tau_k, alpha_k)` pair per
/// varying coefficient, estimated by cyclic block-coordinate ascent.
pub fn resf_vc<T: Real>(
    y: &DVector<T>,
    xv: &Covariates<T>,
    xconst: &Covariates<T>,
    basis: &EigenBasis<T>,
    method: Method,
) -> Result<SvcFit<T>> {
    let n = basis.n();
    check_response(y, n, "mixed")?;
    if xv.n() != n || xconst.n() != n {
        return Err(Error::input("mixed", "covariates and basis have different numbers of sites"));
    }
    if basis.is_empty() {
        return Err(Error::input("mixed", "the eigenvector basis is empty"));
    }
    let kv = xv.k();
    let mut warnings = Vec::new();
    if kv > MAX_ADVISED_VARYING {
        let msg = format!("{kv} varying coefficients; estimates may be unstable beyond {MAX_ADVISED_VARYING}");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let (vdesign, vc_names) = xv.with_intercept();
    let blocks = kv + 1;
    let p = blocks + xconst.k();
    if n <= p {
        return Err(Error::input("mixed", format!("{n} observations for {p} fixed effects")));
    }
    let mut design = DMatrix::zeros(n, p);
    design.columns_mut(0, blocks).copy_from(&vdesign);
    design.columns_mut(blocks, xconst.k()).copy_from(xconst.matrix());
    let mut names = vc_names.clone();
    names.extend(xconst.names().iter().cloned());
    if let Err(Error::SingularDesign { column, .. }) = ols_fit(y, &design) {
        return Err(Error::SingularDesign {
            module: "mixed",
            column,
            name: names[column].clone(),
        });
    }

    let e = basis.vectors();
    let l = basis.len();
    let mut z = DMatrix::zeros(n, blocks * l);
    for k in 0..blocks {
        let mut zk = e.clone();
        for (i, mut row) in zk.row_iter_mut().enumerate() {
            row *= vdesign[(i, k)];
        }
        z.columns_mut(k * l, l).copy_from(&zk);
    }
    let profile = Profile::new(Gram::new(y, &design, &z), Structure::new(basis.values(), blocks));

    let (params, cycles) = coordinate_ascent(&profile, method, blocks)?;
    let sol = profile
        .solve(&params, method)
        .ok_or_else(|| Error::degenerate("mixed", "mixed-model equations are singular at the optimum"))?;
    let inv = system_inverse(&profile, &sol)?;
    let q = blocks * l;
    let cov = inv.map(|v| v * sol.sigma2);

    let beta_cov = cov.view((q, q), (p, p)).into_owned();
    let se = standard_errors(&beta_cov)?;
    let df = (n - p) as f64;
    let b_vc_mean = CoefTable::student(&names[..blocks], &sol.beta.as_slice()[..blocks], &se[..blocks], df);
    let b_const = CoefTable::student(&names[blocks..], &sol.beta.as_slice()[blocks..], &se[blocks..], df);

    let mut b_vc = DMatrix::zeros(n, blocks);
    let mut se_vc = DMatrix::zeros(n, blocks);
    let mut p_vc = DMatrix::zeros(n, blocks);
    for k in 0..blocks {
        let gk = sol.gamma.rows(k * l, l);
        let surface = e * gk;
        // loadings of the site coefficient on the standardized effects v_k
        let mut a = e.clone();
        for mut row in a.row_iter_mut() {
            row.component_mul_assign(&sol.scales.rows(k * l, l).transpose());
        }
        let c_vv = cov.view((k * l, k * l), (l, l));
        let c_vb = cov.view((k * l, q + k), (l, 1));
        let c_bb = cov[(q + k, q + k)];
        let a_cvv = &a * c_vv;
        let a_cvb = &a * c_vb;
        for i in 0..n {
            let b = sol.beta[k] + surface[i];
            let var = c_bb + T::lit(2.0) * a_cvb[i] + a_cvv.row(i).dot(&a.row(i));
            let s = var.max(T::zero()).sqrt();
            b_vc[(i, k)] = b;
            se_vc[(i, k)] = s;
            p_vc[(i, k)] = T::lit(z_pvalue((b / s).as_f64()));
        }
    }

    let lambda1 = basis.values()[0];
    let shrinkage_per_coef = (0..blocks)
        .map(|k| {
            let tau = T::lit(params[2 * k].exp());
            let alpha = T::lit(params[2 * k + 1]);
            ShrinkageParams {
                sigma_gamma: (sol.sigma2 * tau / lambda1.powf(alpha)).sqrt(),
                alpha,
            }
        })
        .collect();

    let p_eff = T::from_count(p + q) - (0..q).map(|i| inv[(i, i)]).fold(T::zero(), |a, b| a + b);
    let fitted = &design * &sol.beta + &z * &sol.gamma;
    let n_params = p + 2 + kv;
    let stats = stats_from(y, &fitted, p_eff, sol.sigma2, sol.loglik, n_params, method);
    Ok(SvcFit {
        vc_names,
        b_vc,
        se_vc,
        p_vc,
        b_vc_mean,
        b_const,
        shrinkage_per_coef,
        stats,
        sigma2: sol.sigma2,
        p_eff,
        fitted,
        n_params,
        cycles,
        warnings,
    })
}

/// Maximizes over each `(log tau_k, alpha_k)` pair in turn until a full cycle
/// changes the objective by less than [`CYCLE_TOL`].
fn coordinate_ascent<T: Real>(profile: &Profile<T>, method: Method, blocks: usize) -> Result<(Vec<f64>, usize)> {
    let pair_bounds = bounds(1);
    let mut params: Vec<f64> = (0..blocks).flat_map(|_| start_points()[0].clone()).collect();
    let value = |p: &[f64]| profile.loglik(p, method).map_or(f64::INFINITY, |l| -l.as_f64());
    let mut current = value(&params);
    let mut iterations = 0;
    for cycle in 1..=MAX_CYCLES {
        let before = current;
        for k in 0..blocks {
            let starts = if cycle == 1 {
                start_points()
            } else {
                vec![params[2 * k..2 * k + 2].to_vec()]
            };
            let mut trial = params.clone();
            let mut objective = |pair: &[f64]| {
                trial[2 * k] = pair[0];
                trial[2 * k + 1] = pair[1];
                value(&trial)
            };
            let r = minimize_multistart(&mut objective, &starts, &STEP, &pair_bounds, nm_options::<T>());
            iterations += r.iterations;
            if r.f <= current {
                params[2 * k] = r.x[0];
                params[2 * k + 1] = r.x[1];
                current = r.f;
            }
        }
        if current.is_finite() && (before - current).abs() < CYCLE_TOL {
            return Ok((params, cycle));
        }
    }
    Err(Error::Convergence {
        module: "mixed",
        iterations,
        best_value: -current,
        best_params: params
            .chunks(2)
            .flat_map(|c| [c[0].exp(), c[1]])
            .collect(),
    })
}
