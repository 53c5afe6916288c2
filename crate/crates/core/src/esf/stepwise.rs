use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use super::ols::{infinity, ols_fit, rank_tol, vif};
use super::{gaussian_loglik, total_ss, ErrorStats, LinearFit, SelectionCriterion};
use crate::design::{CoefTable, Covariates};
use crate::eigen::EigenBasis;
use crate::error::{Error, Result};
use crate::linalg::Chol;
use crate::scalar::Real;

const MODULE: &str = "esf";

/// Fits `y = [1, X] beta + E_S gamma + e` by least squares, choosing the
/// eigenvector subset `S` by forward stepwise selection.
///
/// At each step every unselected eigenvector is scored; candidates whose
/// inclusion would push any VIF above `vif_max` are skipped, and the best
/// remaining candidate is accepted if it strictly improves the criterion.
/// Equal scores go to the smaller eigenvector index.
pub fn esf<T: Real>(
    y: &DVector<T>,
    x: &Covariates<T>,
    basis: &EigenBasis<T>,
    criterion: SelectionCriterion,
    vif_max: Option<f64>,
) -> Result<LinearFit<T>> {
    let n = y.len();
    if x.n() != n || basis.n() != n {
        return Err(Error::input(
            MODULE,
            format!(
                "sample sizes differ: y has {n}, covariates {}, eigenvectors {}",
                x.n(),
                basis.n()
            ),
        ));
    }
    if let Some(v) = vif_max {
        if !(v > 0.0) {
            return Err(Error::input(MODULE, format!("vif cap must be positive, got {v}")));
        }
    }
    let (base, base_names) = x.with_intercept();
    let (selected, path) = match criterion {
        SelectionCriterion::All => {
            let p = base.ncols() + basis.len();
            if p >= n {
                return Err(Error::SingularDesign {
                    module: MODULE,
                    column: p - 1,
                    name: format!("{p} columns (intercept, covariates, all eigenvectors) for {n} observations"),
                });
            }
            ((0..basis.len()).collect(), Vec::new())
        }
        _ => forward_select(y, &base, &base_names, basis, criterion, vif_max.map(T::lit))?,
    };

    let (design, names) = assemble(&base, &base_names, basis, &selected);
    let fit = ols_fit(y, &design).map_err(|e| name_column(e, &names))?;
    let p = design.ncols();
    let coef_table = CoefTable::student(
        &names,
        fit.coefficients.as_slice(),
        fit.se.as_slice(),
        fit.df as f64,
    );
    let stats = ErrorStats::from_rss(fit.rss, total_ss(y), n, p);
    let vifs = if p > 1 {
        vif(&design.columns(1, p - 1).into_owned())
    } else {
        Vec::new()
    };
    Ok(LinearFit {
        coef_table,
        vif_table: names[1..].iter().cloned().zip(vifs).collect(),
        selected_eigs: selected,
        residuals: fit.residuals,
        stats,
        criterion_path: path,
    })
}

fn name_column(e: Error, names: &[String]) -> Error {
    match e {
        Error::SingularDesign { module, column, name } if name.is_empty() => Error::SingularDesign {
            module,
            column,
            name: names.get(column).cloned().unwrap_or_default(),
        },
        other => other,
    }
}

fn sf_name(l: usize) -> String {
    format!("sf{}", l + 1)
}

fn assemble<T: Real>(
    base: &DMatrix<T>,
    base_names: &[String],
    basis: &EigenBasis<T>,
    selected: &[usize],
) -> (DMatrix<T>, Vec<String>) {
    let n = base.nrows();
    let p0 = base.ncols();
    let mut d = DMatrix::zeros(n, p0 + selected.len());
    d.columns_mut(0, p0).copy_from(base);
    let mut names = base_names.to_vec();
    for (k, &l) in selected.iter().enumerate() {
        d.set_column(p0 + k, &basis.vectors().column(l));
        names.push(sf_name(l));
    }
    (d, names)
}

/// Lower is better.
fn score<T: Real>(criterion: SelectionCriterion, rss: T, tss: T, n: usize, p: usize) -> T {
    let nf = T::from_count(n);
    match criterion {
        SelectionCriterion::R2 | SelectionCriterion::All => {
            (rss / T::from_count(n - p)) / (tss / (nf - T::one())) - T::one()
        }
        SelectionCriterion::Aic => {
            -T::lit(2.0) * gaussian_loglik(rss, n) + T::lit(2.0) * T::from_count(p + 1)
        }
        SelectionCriterion::Bic => {
            -T::lit(2.0) * gaussian_loglik(rss, n) + nf.ln() * T::from_count(p + 1)
        }
    }
}

fn natural<T: Real>(criterion: SelectionCriterion, score: T) -> T {
    match criterion {
        SelectionCriterion::R2 | SelectionCriterion::All => -score,
        _ => score,
    }
}

/// Incrementally maintained orthonormal basis of the current design, the
/// current residual, and each candidate's projection onto the basis.
struct Selector<'a, T: Real> {
    q: Vec<DVector<T>>,
    resid: DVector<T>,
    rss: T,
    eig: &'a DMatrix<T>,
    /// `||proj of e_j onto span(Q)||^2`
    proj_sq: Vec<T>,
    /// `r' e_j`
    r_dot: Vec<T>,
    /// Centered cross-products of the non-intercept columns, for VIFs.
    centered: Vec<DVector<T>>,
}

fn forward_select<T: Real>(
    y: &DVector<T>,
    base: &DMatrix<T>,
    base_names: &[String],
    basis: &EigenBasis<T>,
    criterion: SelectionCriterion,
    vif_max: Option<T>,
) -> Result<(Vec<usize>, Vec<T>)> {
    let n = y.len();
    let p0 = base.ncols();
    if p0 >= n {
        return Err(Error::SingularDesign {
            module: MODULE,
            column: p0 - 1,
            name: base_names[p0 - 1].clone(),
        });
    }
    let tss = total_ss(y);
    let eig = basis.vectors();
    let l = basis.len();

    // orthonormalize [1, X] with modified Gram-Schmidt (two passes)
    let mut q: Vec<DVector<T>> = Vec::with_capacity(p0 + l);
    for j in 0..p0 {
        let col = base.column(j).into_owned();
        let norm = col.norm();
        let v = orthogonalize(col, &q);
        let vn = v.norm();
        if !(vn > rank_tol::<T>() * norm.max(T::tiny())) {
            return Err(Error::SingularDesign {
                module: MODULE,
                column: j,
                name: base_names[j].clone(),
            });
        }
        q.push(v / vn);
    }
    let mut resid = y.clone();
    for qi in &q {
        let c = qi.dot(&resid);
        resid.axpy(-c, qi, T::one());
    }
    let rss = resid.norm_squared();
    let proj_sq = (0..l)
        .map(|j| {
            let e = eig.column(j);
            q.iter().map(|qi| {
                let c = qi.dot(&e);
                c * c
            }).fold(T::zero(), |a, b| a + b)
        })
        .collect();
    let r_dot = (0..l).map(|j| resid.dot(&eig.column(j))).collect();
    let centered = (1..p0).map(|j| center(base.column(j).into_owned())).collect();
    let mut sel = Selector {
        q,
        resid,
        rss,
        eig,
        proj_sq,
        r_dot,
        centered,
    };

    let mut selected: Vec<usize> = Vec::new();
    let mut current = score(criterion, sel.rss, tss, n, p0);
    let mut path = vec![natural(criterion, current)];
    let mut available = vec![true; l];

    loop {
        let p_new = p0 + selected.len() + 1;
        if p_new >= n {
            break;
        }
        let mut candidates: Vec<(T, usize)> = Vec::new();
        for j in 0..l {
            if !available[j] {
                continue;
            }
            let e_sq = sel.eig.column(j).norm_squared();
            let perp = e_sq - sel.proj_sq[j];
            if !(perp > rank_tol::<T>() * e_sq) {
                available[j] = false;
                continue;
            }
            let gain = sel.r_dot[j] * sel.r_dot[j] / perp;
            let rss = (sel.rss - gain).max(T::zero());
            let s = score(criterion, rss, tss, n, p_new);
            if s < current {
                candidates.push((s, j));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let chosen = candidates.into_iter().find(|&(_, j)| match vif_max {
            None => true,
            Some(cap) => max_vif_with(&sel.centered, &center(sel.eig.column(j).into_owned())) <= cap,
        });
        let Some((s, j)) = chosen else { break };
        sel.accept(j);
        available[j] = false;
        selected.push(j);
        current = s;
        path.push(natural(criterion, s));
    }
    Ok((selected, path))
}

impl<T: Real> Selector<'_, T> {
    fn accept(&mut self, j: usize) {
        let e = self.eig.column(j).into_owned();
        let v = orthogonalize(e.clone(), &self.q);
        let qn = &v / v.norm();
        let rq = self.resid.dot(&qn);
        self.resid.axpy(-rq, &qn, T::one());
        self.rss = self.resid.norm_squared();
        for k in 0..self.eig.ncols() {
            let c = qn.dot(&self.eig.column(k));
            self.proj_sq[k] += c * c;
            self.r_dot[k] -= rq * c;
        }
        self.q.push(qn);
        self.centered.push(center(e));
    }
}

fn orthogonalize<T: Real>(mut v: DVector<T>, q: &[DVector<T>]) -> DVector<T> {
    for _ in 0..2 {
        for qi in q {
            let c = qi.dot(&v);
            v.axpy(-c, qi, T::one());
        }
    }
    v
}

fn center<T: Real>(mut v: DVector<T>) -> DVector<T> {
    let m = v.mean();
    v.add_scalar_mut(-m);
    v
}

/// Largest VIF of the columns `cols ∪ {extra}` (all already centered), from
/// `VIF_j = G_jj (G^-1)_jj` with `G` the centered cross-product matrix.
fn max_vif_with<T: Real>(cols: &[DVector<T>], extra: &DVector<T>) -> T {
    let p = cols.len() + 1;
    if p < 2 {
        return T::one();
    }
    let col = |i: usize| if i < cols.len() { &cols[i] } else { extra };
    let g = DMatrix::from_fn(p, p, |a, b| col(a).dot(col(b)));
    let Some(chol) = Chol::new(g.clone()) else {
        return infinity();
    };
    let inv = chol.inverse();
    (0..p)
        .map(|j| g[(j, j)] * inv[(j, j)])
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}
