//! Profiled ML/REML likelihood of the eigenvector random-effects model.
//!
//! Model: `y = X b + Z u* + e`, `e ~ N(0, s2 I)`, `u*_b ~ N(0, s2 tau_b W_b(alpha_b))`
//! for each random block `b`, with `W(alpha) = diag((lambda / lambda_1)^alpha)`.
//! Everything is evaluated from the Gram statistics of `[X, Z, y]`, so the
//! cost per evaluation depends on the number of columns only.

use nalgebra::{DMatrix, DVector};

use crate::linalg::Chol;
use crate::scalar::Real;

use super::Method;

/// Gram statistics of a fixed design `X` (`N x P`), a random design `Z`
/// (`N x Q`) and a response `y`.
#[derive(Debug, Clone)]
pub(crate) struct Gram<T: Real> {
    pub n: usize,
    pub xx: DMatrix<T>,
    pub zx: DMatrix<T>,
    pub zz: DMatrix<T>,
    pub xy: DVector<T>,
    pub zy: DVector<T>,
    pub yy: T,
}

impl<T: Real> Gram<T> {
    pub fn new(y: &DVector<T>, x: &DMatrix<T>, z: &DMatrix<T>) -> Self {
        Self {
            n: y.len(),
            xx: x.tr_mul(x),
            zx: z.tr_mul(x),
            zz: z.tr_mul(z),
            xy: x.tr_mul(y),
            zy: z.tr_mul(y),
            yy: y.dot(y),
        }
    }

    pub fn p(&self) -> usize {
        self.xx.nrows()
    }

    pub fn q(&self) -> usize {
        self.zz.nrows()
    }

    /// Same designs, different response.
    pub fn with_response(&self, xy: DVector<T>, zy: DVector<T>, yy: T) -> Self {
        Self {
            xy,
            zy,
            yy,
            ..self.clone()
        }
    }
}

/// Random-effect structure: `blocks` consecutive groups of `L` columns sharing
/// the normalized eigenvalues `lambda_rel`.
#[derive(Debug, Clone)]
pub(crate) struct Structure<T: Real> {
    pub lambda_rel: DVector<T>,
    pub blocks: usize,
}

impl<T: Real> Structure<T> {
    pub fn new(values: &DVector<T>, blocks: usize) -> Self {
        let top = values.max();
        Self {
            lambda_rel: values.map(|v| v / top),
            blocks,
        }
    }

    pub fn l(&self) -> usize {
        self.lambda_rel.len()
    }

    /// Square roots of the prior variance ratios `tau_b (lambda/lambda_1)^alpha_b`.
    pub fn scales(&self, params: &[f64]) -> DVector<T> {
        let l = self.l();
        let mut s = DVector::zeros(l * self.blocks);
        for b in 0..self.blocks {
            let tau = T::lit(params[2 * b].exp());
            let alpha = T::lit(params[2 * b + 1]);
            for j in 0..l {
                s[b * l + j] = (tau * self.lambda_rel[j].powf(alpha)).sqrt();
            }
        }
        s
    }
}

/// Solution of the mixed-model equations at fixed variance parameters.
#[derive(Debug, Clone)]
pub(crate) struct Solution<T: Real> {
    pub loglik: T,
    pub sigma2: T,
    pub beta: DVector<T>,
    /// Random coefficients on the `Z` scale (`gamma = s .* v`).
    pub gamma: DVector<T>,
    pub scales: DVector<T>,
}

/// Profiled likelihood over a fixed [`Gram`] and [`Structure`].
#[derive(Debug, Clone)]
pub(crate) struct Profile<T: Real> {
    pub gram: Gram<T>,
    pub structure: Structure<T>,
    /// `Z'Z` is the identity, enabling the diagonal path.
    orthonormal: bool,
}

impl<T: Real> Profile<T> {
    pub fn new(gram: Gram<T>, structure: Structure<T>) -> Self {
        let q = gram.q();
        let tol = T::lit(1e-8).max(T::eps() * T::lit(1e3));
        let orthonormal = structure.blocks == 1
            && (0..q).all(|i| (0..q).all(|j| {
                let target = if i == j { T::one() } else { T::zero() };
                (gram.zz[(i, j)] - target).abs() <= tol
            }));
        Self {
            gram,
            structure,
            orthonormal,
        }
    }

    /// Log-likelihood; `None` when the system is numerically singular or the
    /// value is not finite.
    pub fn loglik(&self, params: &[f64], method: Method) -> Option<T> {
        self.solve(params, method).map(|s| s.loglik)
    }

    pub fn solve(&self, params: &[f64], method: Method) -> Option<Solution<T>> {
        let s = self.structure.scales(params);
        if s.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let (beta, v, logdet_h, logdet_xhx) = if self.orthonormal {
            self.solve_diagonal(&s)?
        } else {
            self.solve_dense(&s)?
        };
        let g = &self.gram;
        let sz = s.component_mul(&g.zy);
        let rss_star = g.yy - beta.dot(&g.xy) - v.dot(&sz);
        let (n, p) = (g.n, g.p());
        let two_pi = T::two_pi();
        let half = T::lit(0.5);
        let (loglik, sigma2) = match method {
            Method::Reml => {
                let df = T::from_count(n - p);
                let s2 = rss_star / df;
                (-half * (df * ((two_pi * s2).ln() + T::one()) + logdet_h + logdet_xhx), s2)
            }
            Method::Ml => {
                let nf = T::from_count(n);
                let s2 = rss_star / nf;
                (-half * (nf * ((two_pi * s2).ln() + T::one()) + logdet_h), s2)
            }
        };
        if !loglik.is_finite() || !(sigma2 > T::zero()) {
            return None;
        }
        Some(Solution {
            loglik,
            sigma2,
            beta,
            gamma: v.component_mul(&s),
            scales: s,
        })
    }

    /// `Z'Z = I`: the random block of the system matrix is diagonal and the
    /// fixed effects follow from a `P x P` Schur complement.
    fn solve_diagonal(&self, s: &DVector<T>) -> Option<(DVector<T>, DVector<T>, T, T)> {
        let g = &self.gram;
        let d = s.component_mul(s);
        let shrink = d.map(|di| di / (T::one() + di));
        let mut weighted = g.zx.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= shrink[i];
        }
        let schur = &g.xx - g.zx.tr_mul(&weighted);
        let rhs = &g.xy - weighted.tr_mul(&g.zy);
        let chol = Chol::new(schur)?;
        let beta = chol.solve(&rhs);
        let resid = &g.zy - &g.zx * &beta;
        let v = DVector::from_iterator(d.len(), (0..d.len()).map(|i| s[i] * resid[i] / (T::one() + d[i])));
        let logdet_h = d.iter().map(|&di| di.ln_1p()).fold(T::zero(), |a, b| a + b);
        Some((beta, v, logdet_h, chol.log_det()))
    }

    fn solve_dense(&self, s: &DVector<T>) -> Option<(DVector<T>, DVector<T>, T, T)> {
        let g = &self.gram;
        let (p, q) = (g.p(), g.q());
        let m = self.system_matrix(s);
        let mut rhs = DVector::zeros(q + p);
        rhs.rows_mut(0, q).copy_from(&s.component_mul(&g.zy));
        rhs.rows_mut(q, p).copy_from(&g.xy);
        let chol = Chol::new(m)?;
        let sol = chol.solve(&rhs);
        let logdet_h = chol.log_det_leading(q);
        let logdet_xhx = chol.log_det() - logdet_h;
        Some((sol.rows(q, p).into_owned(), sol.rows(0, q).into_owned(), logdet_h, logdet_xhx))
    }

    /// Henderson system in the standardized random effects, ordered `[v; beta]`:
    /// `[[S Z'Z S + I, S Z'X], [X'Z S, X'X]]`.
    pub fn system_matrix(&self, s: &DVector<T>) -> DMatrix<T> {
        let g = &self.gram;
        let (p, q) = (g.p(), g.q());
        let mut m = DMatrix::zeros(q + p, q + p);
        for i in 0..q {
            for j in 0..q {
                m[(i, j)] = s[i] * g.zz[(i, j)] * s[j];
            }
            m[(i, i)] += T::one();
            for j in 0..p {
                let v = s[i] * g.zx[(i, j)];
                m[(i, q + j)] = v;
                m[(q + j, i)] = v;
            }
        }
        m.view_mut((q, q), (p, p)).copy_from(&g.xx);
        m
    }
}
