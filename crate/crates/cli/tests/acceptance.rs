//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 5 6`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use moran_esf::connectivity::{exp_kernel_from_coords, ConnectivityMatrix};
use moran_esf::eigen::{meigen, meigen_coords, meigen_f, moran_coefficient, EigenMode, MeigenOptions, NystromOptions};
use moran_esf::esf::{esf, SelectionCriterion};
use moran_esf::geometry::knn_graph;
use moran_esf::mixed::{reml_profile_loglik, resf, resf_vc, Method};
use moran_esf::quantile::{resf_qr, rif, semiparametric_bootstrap, QrOptions};
use moran_esf::{Basis, ConnectivityKind, Coords, Covariates, EigenBasis};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "eigen invariants", c01_eigen_invariants),
        (2, "Moran coefficient identity", c02_moran_identity),
        (3, "ESF fn=all equals least squares", c03_esf_all),
        (4, "stepwise monotonicity and VIF cap", c04_stepwise_vif),
        (5, "profile likelihood vs dense oracle", c05_likelihood_oracle),
        (6, "RE-ESF recovery", c06_resf_recovery),
        (7, "SVC recovery", c07_svc_recovery),
        (8, "Nystrom fidelity", c08_nystrom_fidelity),
        (9, "Nystrom speed", c09_nystrom_speed),
        (10, "RIF identity", c10_rif_identity),
        (11, "bootstrap N-independence", c11_bootstrap_n_independence),
        (12, "bootstrap coverage", c12_bootstrap_coverage),
        (13, "CLI determinism", c13_cli_determinism),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail}; {secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} {name}: FAIL ({detail}; {secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample(StandardNormal))
}

fn uniform_coords(r: &mut ChaCha8Rng, n: usize) -> Coords {
    Coords::new((0..n).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect()).unwrap()
}

fn covariates(cols: &[&DVector<f64>]) -> Covariates<f64> {
    let n = cols[0].len();
    Covariates::unnamed(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (a.iter().sum::<f64>() / a.len() as f64, b.iter().sum::<f64>() / b.len() as f64);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least squares through the SVD, independent of the library's QR path.
fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(y, 1e-12).unwrap()
}

/// The 20 configurations shared by criteria 1 and 2.
fn configurations() -> Vec<(String, ConnectivityMatrix<f64>)> {
    let sizes = [10, 50, 200];
    (0..20)
        .map(|k| {
            let n = sizes[k % 3];
            let mut r = rng(1000 + k as u64);
            let coords = uniform_coords(&mut r, n);
            if k % 2 == 0 {
                (format!("kernel N={n}"), exp_kernel_from_coords(&coords).unwrap())
            } else {
                (format!("knn4 N={n}"), knn_graph(&coords, 4).unwrap())
            }
        })
        .collect()
}

fn c01_eigen_invariants() -> Outcome {
    let start = Instant::now();
    let (mut orth, mut mean, mut resid, mut trace) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, c) in configurations() {
        let n = c.n();
        let basis = meigen(&c, MeigenOptions::default()).map_err(|e| e.to_string())?;
        let e = basis.vectors();
        let lam = basis.values();
        let m = centering(n);
        let sym = c.clone().symmetrize();
        let mcm = &m * sym.matrix() * &m;
        orth = orth.max((e.transpose() * e - DMatrix::identity(basis.len(), basis.len())).amax());
        mean = mean.max(e.row_mean().amax());
        resid = resid.max((&mcm * e - e * DMatrix::from_diagonal(lam)).amax() / lam[0]);
        // every eigenvalue of MCM, from an independent decomposition
        let all: f64 = SymmetricEigen::new(mcm).eigenvalues.sum();
        let total = c.matrix().sum();
        let lib = lam.sum() + basis.other_eigenvalues_sum().unwrap();
        let want = -total / n as f64;
        trace = trace.max(((all - want) / want).abs()).max(((lib - want) / want).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        orth <= 1e-8 && mean <= 1e-8 && resid <= 1e-6 && trace <= 1e-8 && secs < 10.0,
        format!("orthonormality {orth:.1e}, column mean {mean:.1e}, residual/lambda1 {resid:.1e}, trace rel {trace:.1e}, {secs:.2} s"),
    )
}

fn c02_moran_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, c) in configurations() {
        let n = c.n() as f64;
        let basis = meigen(&c, MeigenOptions::default()).map_err(|e| e.to_string())?;
        let total = c.matrix().sum();
        for (l, col) in basis.vectors().column_iter().enumerate() {
            let e = col.into_owned();
            // direct definition of the index on the centered vector
            let ec = e.add_scalar(-e.mean());
            let direct = n / total * (ec.transpose() * c.matrix() * &ec)[(0, 0)] / ec.norm_squared();
            let want = n / total * basis.values()[l];
            let lib = moran_coefficient(&e, &c).map_err(|e| e.to_string())?;
            worst = worst.max(((direct - want) / want).abs()).max(((lib - want) / want).abs());
            count += 1;
        }
    }
    check(worst <= 1e-8, format!("{count} eigenvectors, max relative deviation {worst:.1e}"))
}

fn c03_esf_all() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..10 {
        let mut r = rng(300 + k);
        let n = 60 + 10 * k as usize;
        let coords = uniform_coords(&mut r, n);
        let basis = meigen_coords(&coords, MeigenOptions::threshold(0.25)).map_err(|e| e.to_string())?;
        let x1 = normal(&mut r, n);
        let x2 = normal(&mut r, n);
        let y = x1.map(|v| 1.0 + 0.5 * v) - &x2 + normal(&mut r, n);
        let fit = esf(&y, &covariates(&[&x1, &x2]), &basis, SelectionCriterion::All, None).map_err(|e| e.to_string())?;
        let l = basis.len();
        let design = DMatrix::from_fn(n, 3 + l, |i, j| match j {
            0 => 1.0,
            1 => x1[i],
            2 => x2[i],
            _ => basis.vectors()[(i, j - 3)],
        });
        let want = lstsq(&design, &y);
        let got = DVector::from_vec(fit.coef_table.estimates());
        worst = worst.max((&got - &want).amax() / want.amax());
    }
    check(worst <= 1e-8, format!("10 instances, max relative deviation {worst:.1e}"))
}

/// VIF of every column of `x` (no intercept column) against the others plus an intercept.
fn vif_oracle(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, k) = x.shape();
    (0..k)
        .map(|j| {
            let target = x.column(j).into_owned();
            let others = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else if c <= j { x[(i, c - 1)] } else { x[(i, c)] });
            let fitted = &others * lstsq(&others, &target);
            let tss = target.add_scalar(-target.mean()).norm_squared();
            let rss = (&target - fitted).norm_squared();
            tss / rss
        })
        .collect()
}

fn c04_stepwise_vif() -> Outcome {
    let mut max_vif = 0.0f64;
    let mut rejected_any = 0;
    for k in 0..10 {
        let mut r = rng(400 + k);
        let n = 120;
        let coords = uniform_coords(&mut r, n);
        let basis = meigen_coords(&coords, MeigenOptions::default()).map_err(|e| e.to_string())?;
        // covariates that share spatial patterns with the leading eigenvectors
        let e = basis.vectors();
        let x1 = e.column(0) * 6.0 + e.column(1) * 4.0 + normal(&mut r, n) * 0.05;
        let x2 = &x1 * 0.6 + e.column(2) * 5.0 + normal(&mut r, n) * 0.1;
        let y = &x1 - &x2 * 0.5 + e.column(0) * 3.0 + e.column(3) * 4.0 + e.column(5) * 3.0 + normal(&mut r, n) * 0.5;
        let fit = esf(&y, &covariates(&[&x1, &x2]), &basis, SelectionCriterion::R2, Some(10.0)).map_err(|e| e.to_string())?;
        let path = &fit.criterion_path;
        if path.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("instance {k}: criterion path not increasing: {path:?}"));
        }
        let mut cols: Vec<DVector<f64>> = vec![x1.clone(), x2.clone()];
        cols.extend(fit.selected_eigs.iter().map(|&l| e.column(l).into_owned()));
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let v = vif_oracle(&x).into_iter().fold(0.0, f64::max);
        max_vif = max_vif.max(v);
        let unconstrained = esf(&y, &covariates(&[&x1, &x2]), &basis, SelectionCriterion::R2, None).map_err(|e| e.to_string())?;
        if unconstrained.selected_eigs != fit.selected_eigs {
            rejected_any += 1;
        }
    }
    check(
        max_vif <= 10.0,
        format!("10 instances, paths increasing, final max VIF {max_vif:.2}, cap binding in {rejected_any}"),
    )
}

/// Dense multivariate-normal profile likelihood with `V = s2 (I + E D E')`.
fn dense_loglik(y: &DVector<f64>, x: &DMatrix<f64>, e: &DMatrix<f64>, d: &DVector<f64>, method: Method) -> f64 {
    let n = y.len();
    let p = x.ncols();
    let h = DMatrix::identity(n, n) + e * DMatrix::from_diagonal(d) * e.transpose();
    let h_inv = h.clone().try_inverse().unwrap();
    let xhx = x.transpose() * &h_inv * x;
    let beta = xhx.clone().try_inverse().unwrap() * x.transpose() * &h_inv * y;
    let resid = y - x * beta;
    let q = (resid.transpose() * &h_inv * &resid)[(0, 0)];
    let s2 = match method {
        Method::Ml => q / n as f64,
        Method::Reml => q / (n - p) as f64,
    };
    let v = &h * s2;
    let v_inv = &h_inv / s2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let quad = (resid.transpose() * &v_inv * &resid)[(0, 0)];
    match method {
        Method::Ml => -0.5 * (n as f64 * two_pi.ln() + v.determinant().ln() + quad),
        Method::Reml => {
            let xvx = x.transpose() * &v_inv * x;
            -0.5 * ((n - p) as f64 * two_pi.ln() + v.determinant().ln() + xvx.determinant().ln() + quad)
        }
    }
}

fn c05_likelihood_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng(500);
    let mut points = 0;
    for case in 0..5 {
        let n = [12, 20, 30, 40, 50][case];
        let l = 1 + case;
        let coords = uniform_coords(&mut r, n);
        let basis = meigen_coords(&coords, MeigenOptions::default()).map_err(|e| e.to_string())?.truncated(l);
        let mut x = DMatrix::from_fn(n, 3, |_, _| r.sample(StandardNormal));
        x.column_mut(0).fill(1.0);
        let y = &x * DVector::from_vec(vec![1.0, -0.5, 2.0]) + basis.vectors() * normal(&mut r, l) + normal(&mut r, n);
        let lam1 = basis.values()[0];
        for _ in 0..10 {
            let log_tau = r.random_range(-5.0..5.0);
            let alpha = r.random_range(0.0..4.0);
            let d = basis.values().map(|v| f64::exp(log_tau) * (v / lam1).powf(alpha));
            for method in [Method::Reml, Method::Ml] {
                let got = reml_profile_loglik(&y, &x, basis.vectors(), basis.values(), log_tau, alpha, method)
                    .map_err(|e| e.to_string())?;
                let want = dense_loglik(&y, &x, basis.vectors(), &d, method);
                worst = worst.max((got - want).abs());
            }
            points += 1;
        }
    }
    check(worst <= 1e-8, format!("{points} (tau, alpha) points x 2 methods, max abs deviation {worst:.1e}"))
}

fn c06_resf_recovery() -> Outcome {
    let start = Instant::now();
    let n = 400;
    let mut r = rng(600);
    let coords = uniform_coords(&mut r, n);
    let basis = meigen_coords(&coords, MeigenOptions::default()).map_err(|e| e.to_string())?;
    let lam1 = basis.values()[0];
    let beta = [2.0, -1.0];
    // sigma_gamma^2 lambda_l^alpha with alpha = 1, scaled so lambda_1 carries unit variance
    let sigma_gamma = 1.0 / lam1.sqrt();
    let (mut covered, mut total) = (0, 0);
    let mut alpha_err = Vec::new();
    for rep in 0..100 {
        let mut r = rng(6000 + rep);
        let x = normal(&mut r, n);
        let gamma = DVector::from_fn(basis.len(), |l, _| sigma_gamma * basis.values()[l].sqrt() * r.sample::<f64, _>(StandardNormal));
        let y = x.map(|v| beta[0] + beta[1] * v) + basis.vectors() * gamma + normal(&mut r, n) * 0.5;
        let fit = resf(&y, &covariates(&[&x]), &basis, Method::Reml).map_err(|e| format!("replicate {rep}: {e}"))?;
        let df = (n - 2) as f64;
        let t = students_t_975(df);
        for (row, b) in fit.coef_table.rows.iter().zip(beta) {
            total += 1;
            if (row.estimate - b).abs() <= t * row.se {
                covered += 1;
            }
        }
        alpha_err.push((fit.shrinkage.alpha - 1.0).abs());
    }
    let coverage = covered as f64 / total as f64;
    let med = median(alpha_err);
    let secs = start.elapsed().as_secs_f64();
    check(
        (0.88..=0.99).contains(&coverage) && med <= 0.5 && secs < 300.0,
        format!("L = {}, beta coverage {:.1}% of {total}, median |alpha - 1| {med:.3}", basis.len(), 100.0 * coverage),
    )
}

/// 97.5% point of Student's t from the Cornish-Fisher expansion (ample for df > 30).
fn students_t_975(df: f64) -> f64 {
    let z: f64 = 1.959_963_984_540_054;
    let g1 = (z.powi(3) + z) / 4.0;
    let g2 = (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / 96.0;
    let g3 = (3.0 * z.powi(7) + 19.0 * z.powi(5) + 17.0 * z.powi(3) - 15.0 * z) / 384.0;
    z + g1 / df + g2 / df.powi(2) + g3 / df.powi(3)
}

fn c07_svc_recovery() -> Outcome {
    let n = 500;
    let mut r = rng(700);
    let coords = uniform_coords(&mut r, n);
    let basis = meigen_coords(&coords, MeigenOptions { threshold: 0.0, enum_max: Some(20) }).map_err(|e| e.to_string())?;
    let e10 = basis.vectors().columns(0, 10).into_owned();
    let (mut good_corr, mut separated) = (0, 0);
    let mut corrs = Vec::new();
    for rep in 0..100 {
        let mut r = rng(7000 + rep);
        let c = normal(&mut r, 10) * (n as f64 / 10.0).sqrt();
        let surface = (&e10 * c).add_scalar(1.0);
        let x1 = normal(&mut r, n);
        let x2 = normal(&mut r, n);
        let y = DVector::from_fn(n, |i, _| 0.5 + surface[i] * x1[i] - 0.7 * x2[i]) + normal(&mut r, n);
        let xv = covariates(&[&x1, &x2]);
        let fit = resf_vc(&y, &xv, &Covariates::empty(n), &basis, Method::Reml).map_err(|e| format!("replicate {rep}: {e}"))?;
        let est: Vec<f64> = fit.b_vc.column(1).iter().copied().collect();
        let cr = corr(&est, surface.as_slice());
        corrs.push(cr);
        if cr >= 0.7 {
            good_corr += 1;
        }
        let sd_vary = sd(&est);
        let sd_int = sd(&fit.b_vc.column(0).iter().copied().collect::<Vec<_>>());
        let sd_x2 = sd(&fit.b_vc.column(2).iter().copied().collect::<Vec<_>>());
        if sd_int < 0.25 * sd_vary && sd_x2 < 0.25 * sd_vary {
            separated += 1;
        }
    }
    check(
        good_corr >= 80 && separated >= 80,
        format!(
            "corr >= 0.7 in {good_corr}/100 (median {:.3}), constant columns below 25% of varying sd in {separated}/100",
            median(corrs)
        ),
    )
}

fn c08_nystrom_fidelity() -> Outcome {
    let n = 1000;
    let mut r = rng(800);
    let coords = uniform_coords(&mut r, n);
    let x1 = normal(&mut r, n);
    let x2 = normal(&mut r, n);
    let smooth = DVector::from_fn(n, |i, _| {
        let [u, v] = coords.points()[i];
        (3.0 * u).sin() + (4.0 * v).cos() + 0.5 * (5.0 * u * v).sin()
    });
    let y = DVector::from_fn(n, |i, _| 1.0 + 2.0 * x1[i] - x2[i]) + smooth + normal(&mut r, n) * 0.5;
    let x = covariates(&[&x1, &x2]);
    let exact = meigen_coords(&coords, MeigenOptions::default()).map_err(|e| e.to_string())?;
    let approx = meigen_f(&coords, NystromOptions::with_enum(200)).map_err(|e| e.to_string())?;
    let a = resf(&y, &x, &exact, Method::Reml).map_err(|e| e.to_string())?.coef_table.estimates();
    let b = resf(&y, &x, &approx, Method::Reml).map_err(|e| e.to_string())?.coef_table.estimates();
    let worst = a.iter().zip(&b).map(|(u, v)| ((u - v) / u).abs()).fold(0.0, f64::max);
    check(
        worst <= 0.05,
        format!("exact L = {}, approximate L = {}, max relative coefficient gap {:.2}%", exact.len(), approx.len(), 100.0 * worst),
    )
}

fn best_of<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn c09_nystrom_speed() -> Outcome {
    let n = 5000;
    let mut r = rng(900);
    let coords = uniform_coords(&mut r, n);
    let t50 = best_of(3, || drop(meigen_f(&coords, NystromOptions::with_enum(50)).unwrap()));
    let t100 = best_of(3, || drop(meigen_f(&coords, NystromOptions::with_enum(100)).unwrap()));
    let t200 = best_of(3, || drop(meigen_f(&coords, NystromOptions::with_enum(200)).unwrap()));
    let exact = best_of(1, || drop(meigen_coords(&coords, MeigenOptions::default()).unwrap()));
    let ratio = exact / t200;
    check(
        ratio >= 50.0 && t50 < t100 && t100 < t200,
        format!("exact {exact:.1} s, enum=200 {t200:.3} s ({ratio:.0}x), enum=100 {t100:.3} s, enum=50 {t50:.3} s"),
    )
}

fn c10_rif_identity() -> Outcome {
    let mut worst_mean = 0.0f64;
    let mut two_point = true;
    for k in 0..10 {
        let mut r = rng(1000 + k);
        let n = 50 * (k as usize + 1);
        let y = normal(&mut r, n).map(|v| 3.0 + v.exp());
        for tau in [0.1, 0.5, 0.9] {
            let rv = rif(&y, tau).map_err(|e| e.to_string())?;
            worst_mean = worst_mean.max(((rv.r_tau.mean() - rv.q_tau) / rv.q_tau).abs());
            let mut vals: Vec<f64> = rv.r_tau.iter().copied().collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let lo = rv.q_tau - (1.0 - tau) / rv.f_hat;
            let hi = rv.q_tau + tau / rv.f_hat;
            two_point &= vals.len() == 2 && (vals[0] - lo).abs() <= 1e-12 * lo.abs() && (vals[1] - hi).abs() <= 1e-12 * hi.abs();
        }
    }
    check(
        worst_mean <= 1e-6 && two_point,
        format!("30 transforms, max relative |mean - q| {worst_mean:.1e}, two-point structure {two_point}"),
    )
}

/// Orthonormal, centered columns with decreasing positive eigenvalues.
fn synthetic_basis(n: usize, l: usize, r: &mut ChaCha8Rng) -> Basis {
    let raw = DMatrix::from_fn(n, l, |_, _| r.sample::<f64, _>(StandardNormal));
    let centered = centering(n) * raw;
    let q = centered.qr().q();
    let values = DVector::from_fn(l, |j, _| 1.0 / (j + 1) as f64);
    EigenBasis::from_parts(q, values, EigenMode::Exact, ConnectivityKind::UserSupplied).unwrap()
}

fn c11_bootstrap_n_independence() -> Outcome {
    let l = 200;
    let mut dims = Vec::new();
    let mut per_iter = Vec::new();
    for (k, n) in [500usize, 5000].into_iter().enumerate() {
        let mut r = rng(1100 + k as u64);
        let basis = synthetic_basis(n, l, &mut r);
        let x = normal(&mut r, n);
        let gamma = DVector::from_fn(l, |j, _| (basis.values()[j]).sqrt() * 3.0 * r.sample::<f64, _>(StandardNormal));
        let y = x.map(|v| 1.0 + v) + basis.vectors() * gamma + normal(&mut r, n);
        let cov = covariates(&[&x]);
        let rv = rif(&y, 0.5).map_err(|e| e.to_string())?;
        let fit = resf(&rv.r_tau, &cov, &basis, Method::Reml).map_err(|e| e.to_string())?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let mut best = f64::INFINITY;
        let mut dim = 0;
        for _ in 0..3 {
            let (_, probe) = pool
                .install(|| semiparametric_bootstrap(&rv.r_tau, &cov, &basis, &fit, 100, 11))
                .map_err(|e| e.to_string())?;
            best = best.min(probe.seconds_per_iteration);
            dim = probe.working_dim;
        }
        dims.push(dim);
        per_iter.push(best);
    }
    let ratio = per_iter[1] / per_iter[0];
    check(
        dims == vec![2 + l, 2 + l] && ratio <= 2.0 && ratio >= 0.5,
        format!(
            "working dimension {dims:?}, per-iteration {:.2} ms (N=500) vs {:.2} ms (N=5000), ratio {ratio:.2}",
            per_iter[0] * 1e3,
            per_iter[1] * 1e3
        ),
    )
}

fn c12_bootstrap_coverage() -> Outcome {
    let n = 400;
    let mut r = rng(1200);
    let coords = uniform_coords(&mut r, n);
    let basis = meigen_coords(&coords, MeigenOptions::threshold(0.25)).map_err(|e| e.to_string())?;
    let beta = [0.3, -0.2];
    let lam1 = basis.values()[0];
    let (mut covered, mut total) = (0, 0);
    for rep in 0..100 {
        let mut r = rng(12_000 + rep);
        let x1 = normal(&mut r, n);
        let x2 = normal(&mut r, n);
        let gamma = DVector::from_fn(basis.len(), |l, _| 0.5 * (basis.values()[l] / lam1).sqrt() * r.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| 1.0 + beta[0] * x1[i] + beta[1] * x2[i]) + basis.vectors() * gamma + normal(&mut r, n);
        let opts = QrOptions { taus: vec![0.5], boot: true, n_boot: 200, seed: 77 + rep };
        let fit = resf_qr(&y, &covariates(&[&x1, &x2]), &basis, &opts).map_err(|e| format!("replicate {rep}: {e}"))?;
        let boot = fit.per_tau[0].boot.as_ref().unwrap();
        for (row, b) in boot.b[1..].iter().zip(beta) {
            total += 1;
            if row.lo95 <= b && b <= row.hi95 {
                covered += 1;
            }
        }
    }
    let coverage = covered as f64 / total as f64;
    check(
        (0.85..=0.99).contains(&coverage),
        format!("L = {}, slope coverage {:.1}% of {total} intervals", basis.len(), 100.0 * coverage),
    )
}

fn write_cli_data(dir: &Path, n: usize) -> PathBuf {
    let mut r = rng(1300);
    let mut s = String::from("px,py,y,x1,x2\n");
    for _ in 0..n {
        let (px, py): (f64, f64) = (r.random(), r.random());
        let (x1, x2): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
        let e: f64 = r.sample(StandardNormal);
        let y = 1.0 + (1.0 + px) * x1 - 0.5 * x2 + (4.0 * py).sin() + 0.3 * e;
        s.push_str(&format!("{px},{py},{y},{x1},{x2}\n"));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c13_cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = write_cli_data(tmp.path(), 120);
    let data = data.to_str().unwrap();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("meigen", vec!["meigen", "--threshold", "0.25"]),
        ("meigen --fast", vec!["meigen", "--fast", "--enum", "30"]),
        ("esf", vec!["esf", "--y", "y", "--x", "x1,x2", "--vif", "10"]),
        ("resf", vec!["resf", "--y", "y", "--x", "x1,x2", "--method", "ml"]),
        ("resf-vc", vec!["resf-vc", "--y", "y", "--x", "x1", "--xconst", "x2", "--enum", "15"]),
        ("resf-qr", vec!["resf-qr", "--y", "y", "--x", "x1,x2", "--tau", "0.22,0.5", "--boot", "--n-boot", "50", "--seed", "7", "--enum", "20"]),
    ];
    let mut files = 0;
    for (label, args) in &runs {
        let mut snaps = Vec::new();
        let mut stdouts = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{}-{k}", label.replace([' ', '-'], "_")));
            let o = Command::new(env!("CARGO_BIN_EXE_moran-esf"))
                .args(args)
                .args(["--input", data, "--out", out.to_str().unwrap()])
                .output()
                .map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!("{label}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
            }
            snaps.push(snapshot(&out));
            stdouts.push(o.stdout);
        }
        if snaps[0] != snaps[1] || stdouts[0] != stdouts[1] {
            return Err(format!("{label}: artifacts differ between runs"));
        }
        files += snaps[0].len();
    }
    Ok(format!("{} subcommand runs, {files} artifacts byte-identical", runs.len()))
}
