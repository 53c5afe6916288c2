use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use moran_esf::eigen::{meigen, meigen_coords, MeigenOptions};
use moran_esf::esf::ols_fit;
use moran_esf::geometry::knn_graph;
use moran_esf::io::{load_table, read_json, Report, Schema};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moran-esf"))
}

/// Deterministic pseudo-random value in [0, 1).
fn unit(i: usize, salt: usize) -> f64 {
    let v = ((i * 7919 + salt * 104_729) as f64 * 0.618_033_988_75).sin() * 43_758.545_3;
    v - v.floor()
}

fn write_data(dir: &Path, n: usize) -> PathBuf {
    let mut s = String::from("px,py,y,x1,x2,dup\n");
    for i in 0..n {
        let (px, py) = (unit(i, 1) * 10.0, unit(i, 2) * 10.0);
        let (x1, x2) = (unit(i, 3) * 2.0 - 1.0, unit(i, 4));
        let y = 1.0 + 2.0 * x1 - x2 + (px / 3.0).sin() + 0.3 * (unit(i, 5) - 0.5);
        s.push_str(&format!("{px},{py},{y},{x1},{x2},{x1}\n"));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("MORAN_ESF_THREADS").output().unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().display().to_string();
        out.insert(rel, std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

#[test]
fn esf_fn_all_matches_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 40);
    let out = dir.path().join("out");
    let o = run(&["esf", "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--y", "y", "--x", "x1,x2", "--fn", "all"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let Report::Esf(report) = read_json(out.join("fit.json")).unwrap() else { panic!("wrong report kind") };

    let schema = Schema { y: Some("y".into()), x: vec!["x1".into(), "x2".into()], ..Schema::coords_only() };
    let d = load_table(&data, &schema).unwrap();
    let basis = meigen_coords(&d.coords().unwrap(), MeigenOptions::default()).unwrap();
    let (x, _) = d.covariates().unwrap().with_intercept();
    let design = nalgebra::DMatrix::from_fn(40, 3 + basis.len(), |i, j| if j < 3 { x[(i, j)] } else { basis.vectors()[(i, j - 3)] });
    let ols = ols_fit(&d.response().unwrap(), &design).unwrap();
    assert_eq!(report.b.len(), ols.coefficients.len());
    for (row, want) in report.b.iter().zip(ols.coefficients.iter()) {
        assert!((row.estimate.0 - want).abs() <= 1e-8 * want.abs().max(1.0), "{} {}", row.estimate.0, want);
    }
}

#[test]
fn meigen_knn_count_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 50);
    let out = dir.path().join("out");
    let o = run(&["meigen", "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--knn", "4", "--threshold", "0.25"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let Report::Meigen(report) = read_json(out.join("fit.json")).unwrap() else { panic!("wrong report kind") };
    let d = load_table(&data, &Schema::coords_only()).unwrap();
    let lib = meigen(&knn_graph(&d.coords().unwrap(), 4).unwrap(), MeigenOptions::threshold(0.25)).unwrap();
    assert_eq!(report.values.len(), lib.len());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with(&format!("{} eigenvectors", lib.len())));
}

#[test]
fn resf_qr_bootstrap_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 60);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let o = run(&[
            "resf-qr", "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--y", "y", "--x", "x1",
            "--tau", "0.22", "--boot", "--n-boot", "30", "--seed", "7", "--enum", "15",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(files(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<&String> = outputs[0].keys().collect();
    for want in ["fit.json", "b.csv", "s.csv", "e.csv", "B_tau=0.22.csv", "S_tau=0.22.csv", "plots/b1.svg", "plots/b2.csv", "plots/s2.svg"] {
        assert!(names.iter().any(|n| n.as_str() == want), "missing {want} in {names:?}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 50);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = bin()
            .args(["resf-qr", "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--y", "y", "--x", "x1"])
            .args(["--tau", "0.5", "--boot", "--n-boot", "20", "--enum", "10"])
            .env("MORAN_ESF_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(files(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), 30);
    let out = dir.path().join("out");
    let (d, o) = (data.to_str().unwrap(), out.to_str().unwrap());
    let missing = run(&["resf", "--input", d, "--out", o, "--y", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("io: invalid input: missing column `nope`"));
    let singular = run(&["resf", "--input", d, "--out", o, "--y", "y", "--x", "x1,dup"]);
    assert_eq!(singular.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&singular.stderr).contains("dup"));
    let fast_knn = run(&["meigen", "--input", d, "--out", o, "--knn", "3", "--fast"]);
    assert_eq!(fast_knn.status.code(), Some(2));
    let both = run(&["meigen", "--input", d, "--out", o, "--knn", "3", "--cmat", d]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn user_matrix_and_svc_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let n = 40;
    let data = write_data(dir.path(), n);
    let d = load_table(&data, &Schema::coords_only()).unwrap();
    let c = knn_graph(&d.coords().unwrap(), 5).unwrap();
    let mut text = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| c.matrix()[(i, j)].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let cmat = dir.path().join("c.csv");
    std::fs::write(&cmat, text).unwrap();
    let out = dir.path().join("vc");
    let o = run(&[
        "resf-vc", "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--cmat", cmat.to_str().unwrap(),
        "--y", "y", "--x", "x1", "--xconst", "x2", "--enum", "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b_vc = std::fs::read_to_string(out.join("b_vc.csv")).unwrap();
    assert_eq!(b_vc.lines().next().unwrap(), "(Intercept),x1");
    assert_eq!(b_vc.lines().count(), n + 1);
    let s = std::fs::read_to_string(out.join("s.csv")).unwrap();
    assert!(s.starts_with(",(Intercept),x1\nshrink_sf_SE,"));
}
