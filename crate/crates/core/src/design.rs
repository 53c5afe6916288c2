//! Covariate matrices and coefficient tables shared by the estimators.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Named explanatory variables (`N x K`, no intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates<T: Real> {
    matrix: DMatrix<T>,
    names: Vec<String>,
}

impl<T: Real> Covariates<T> {
    pub fn new(matrix: DMatrix<T>, names: Vec<String>) -> Result<Self> {
        if matrix.ncols() != names.len() {
            return Err(Error::input(
                "design",
                format!("{} covariate columns but {} names", matrix.ncols(), names.len()),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("design", "covariates contain non-finite values"));
        }
        Ok(Self { matrix, names })
    }

    /// Columns named `V1`, `V2`, ...
    pub fn unnamed(matrix: DMatrix<T>) -> Self {
        let names = (1..=matrix.ncols()).map(|j| format!("V{j}")).collect();
        Self { matrix, names }
    }

    /// No covariates for `n` sites.
    pub fn empty(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, 0),
            names: Vec::new(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    /// `[1, X]` and the matching column names.
    pub fn with_intercept(&self) -> (DMatrix<T>, Vec<String>) {
        let n = self.n();
        let mut d = DMatrix::from_element(n, self.k() + 1, T::one());
        d.columns_mut(1, self.k()).copy_from(&self.matrix);
        let mut names = Vec::with_capacity(self.k() + 1);
        names.push(INTERCEPT.to_string());
        names.extend(self.names.iter().cloned());
        (d, names)
    }
}

pub const INTERCEPT: &str = "(Intercept)";

/// One coefficient: estimate, standard error, t statistic and two-sided p-value.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefRow<T: Real> {
    pub name: String,
    pub estimate: T,
    pub se: T,
    pub t_value: T,
    pub p_value: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefTable<T: Real> {
    pub rows: Vec<CoefRow<T>>,
}

impl<T: Real> CoefTable<T> {
    /// Builds rows with Student-t p-values on `df` degrees of freedom.
    pub(crate) fn student(names: &[String], estimate: &[T], se: &[T], df: f64) -> Self {
        let rows = names
            .iter()
            .zip(estimate.iter().zip(se))
            .map(|(name, (&b, &s))| {
                let t = b / s;
                CoefRow {
                    name: name.clone(),
                    estimate: b,
                    se: s,
                    t_value: t,
                    p_value: T::lit(crate::stats::t_pvalue(t.as_f64(), df)),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn estimates(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.estimate).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CoefRow<T>> {
        self.rows.iter().find(|r| r.name == name)
    }
}
