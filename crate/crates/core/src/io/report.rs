//! Serializable reports and their JSON/CSV writers.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::design::CoefTable;
use crate::eigen::{EigenBasis, EigenMode};
use crate::error::Result;
use crate::esf::{LinearFit, SelectionCriterion};
use crate::mixed::{Method, MixedStats, ResfFit, ShrinkageParams, SvcFit};
use crate::quantile::{BootRow, QrFit, SHRINK_ALPHA, SHRINK_SE};

/// A float that survives JSON: non-finite values are written as the strings
/// `"NaN"`, `"Inf"` and `"-Inf"`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits() || (self.0.is_nan() && other.0.is_nan())
    }
}

impl Num {
    fn text(self) -> String {
        match self.0 {
            v if v.is_nan() => "NaN".into(),
            v if v == f64::INFINITY => "Inf".into(),
            v if v == f64::NEG_INFINITY => "-Inf".into(),
            v => format!("{v:?}"),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.text())
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Num(v)),
            Raw::S(s) => match s.as_str() {
                "NaN" => Ok(Num(f64::NAN)),
                "Inf" => Ok(Num(f64::INFINITY)),
                "-Inf" => Ok(Num(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

fn nums<'a>(v: impl IntoIterator<Item = &'a f64>) -> Vec<Num> {
    v.into_iter().map(|&x| Num(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: Num,
}

fn named(name: &str, value: f64) -> NamedValue {
    NamedValue {
        name: name.into(),
        value: Num(value),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefOut {
    pub name: String,
    #[serde(rename = "Estimate")]
    pub estimate: Num,
    #[serde(rename = "SE")]
    pub se: Num,
    pub t_value: Num,
    pub p_value: Num,
}

fn coefs(t: &CoefTable<f64>) -> Vec<CoefOut> {
    t.rows
        .iter()
        .map(|r| CoefOut {
            name: r.name.clone(),
            estimate: Num(r.estimate),
            se: Num(r.se),
            t_value: Num(r.t_value),
            p_value: Num(r.p_value),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeigenReport {
    pub n: usize,
    pub mode: String,
    pub values: Vec<Num>,
    pub other_eigenvalues_sum: Option<Num>,
    /// One row per site, one column per eigenvector.
    pub vectors: Vec<Vec<Num>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsfReport {
    pub criterion: String,
    pub selected: Vec<String>,
    pub b: Vec<CoefOut>,
    pub vif: Vec<NamedValue>,
    pub e: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResfReport {
    pub method: String,
    pub b: Vec<CoefOut>,
    pub s: Vec<NamedValue>,
    pub e: Vec<NamedValue>,
    pub gamma_hat: Vec<Num>,
}

/// A row of a table with one column per varying coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideRow {
    pub name: String,
    pub values: Vec<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcReport {
    pub method: String,
    pub vc_names: Vec<String>,
    /// Per-site rows of `b_vc`, `se_vc` and `p_vc`.
    pub b_vc: Vec<Vec<Num>>,
    pub se_vc: Vec<Vec<Num>>,
    pub p_vc: Vec<Vec<Num>>,
    pub b_vc_mean: Vec<CoefOut>,
    pub b_const: Vec<CoefOut>,
    pub s: Vec<WideRow>,
    pub e: Vec<NamedValue>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootOut {
    pub name: String,
    pub estimate: Num,
    pub lo95: Num,
    pub hi95: Num,
    pub p: Num,
}

fn boot_rows(rows: &[BootRow<f64>]) -> Vec<BootOut> {
    rows.iter()
        .map(|r| BootOut {
            name: r.name.clone(),
            estimate: Num(r.estimate),
            lo95: Num(r.lo95),
            hi95: Num(r.hi95),
            p: Num(r.p_value),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrTauReport {
    pub tau: Num,
    pub b: Vec<CoefOut>,
    pub s: Vec<NamedValue>,
    pub e: Vec<NamedValue>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub boot_b: Option<Vec<BootOut>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub boot_s: Option<Vec<BootOut>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrReport {
    pub taus: Vec<Num>,
    pub per_tau: Vec<QrTauReport>,
}

/// Any result that can be written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Meigen(MeigenReport),
    Esf(EsfReport),
    Resf(ResfReport),
    ResfVc(SvcReport),
    ResfQr(QrReport),
}

fn shrinkage(s: &ShrinkageParams<f64>) -> Vec<NamedValue> {
    vec![named(SHRINK_SE, s.sigma_gamma), named(SHRINK_ALPHA, s.alpha)]
}

fn mixed_stats(s: &MixedStats<f64>) -> Vec<NamedValue> {
    let ll = match s.method {
        Method::Reml => "rlogLik",
        Method::Ml => "logLik",
    };
    vec![
        named("resid_SE", s.resid_se),
        named("adjR2(cond)", s.adj_r2_cond),
        named(ll, s.log_lik),
        named("AIC", s.aic),
        named("BIC", s.bic),
    ]
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<Num>> {
    m.row_iter().map(|r| nums(r.iter())).collect()
}

impl Report {
    pub fn meigen(basis: &EigenBasis<f64>) -> Self {
        Report::Meigen(MeigenReport {
            n: basis.n(),
            mode: match basis.mode() {
                EigenMode::Exact => "exact".into(),
                EigenMode::Nystrom => "nystrom".into(),
            },
            values: nums(basis.values().iter()),
            other_eigenvalues_sum: basis.other_eigenvalues_sum().map(Num),
            vectors: rows(basis.vectors()),
        })
    }

    pub fn esf(fit: &LinearFit<f64>, criterion: SelectionCriterion) -> Self {
        Report::Esf(EsfReport {
            criterion: match criterion {
                SelectionCriterion::R2 => "r2",
                SelectionCriterion::Aic => "aic",
                SelectionCriterion::Bic => "bic",
                SelectionCriterion::All => "all",
            }
            .into(),
            selected: fit.selected_eigs.iter().map(|l| format!("sf{}", l + 1)).collect(),
            b: coefs(&fit.coef_table),
            vif: fit.vif_table.iter().map(|(n, v)| named(n, *v)).collect(),
            e: vec![
                named("resid_SE", fit.stats.resid_se),
                named("adjR2", fit.stats.adj_r2),
                named("logLik", fit.stats.log_lik),
                named("AIC", fit.stats.aic),
                named("BIC", fit.stats.bic),
            ],
        })
    }

    pub fn resf(fit: &ResfFit<f64>) -> Self {
        Report::Resf(ResfReport {
            method: fit.stats.method.to_string(),
            b: coefs(&fit.coef_table),
            s: shrinkage(&fit.shrinkage),
            e: mixed_stats(&fit.stats),
            gamma_hat: nums(fit.gamma_hat.iter()),
        })
    }

    pub fn resf_vc(fit: &SvcFit<f64>) -> Self {
        Report::ResfVc(SvcReport {
            method: fit.stats.method.to_string(),
            vc_names: fit.vc_names.clone(),
            b_vc: rows(&fit.b_vc),
            se_vc: rows(&fit.se_vc),
            p_vc: rows(&fit.p_vc),
            b_vc_mean: coefs(&fit.b_vc_mean),
            b_const: coefs(&fit.b_const),
            s: vec![
                WideRow {
                    name: SHRINK_SE.into(),
                    values: fit.shrinkage_per_coef.iter().map(|s| Num(s.sigma_gamma)).collect(),
                },
                WideRow {
                    name: SHRINK_ALPHA.into(),
                    values: fit.shrinkage_per_coef.iter().map(|s| Num(s.alpha)).collect(),
                },
            ],
            e: mixed_stats(&fit.stats),
            warnings: fit.warnings.clone(),
        })
    }

    pub fn resf_qr(fit: &QrFit<f64>) -> Self {
        Report::ResfQr(QrReport {
            taus: nums(fit.taus.iter()),
            per_tau: fit
                .per_tau
                .iter()
                .map(|t| QrTauReport {
                    tau: Num(t.tau),
                    b: coefs(&t.b),
                    s: shrinkage(&t.s),
                    e: vec![named("resid_SE", t.e.resid_se), named("quasi_adjR2(cond)", t.e.quasi_adj_r2_cond)],
                    boot_b: t.boot.as_ref().map(|b| boot_rows(&b.b)),
                    boot_s: t.boot.as_ref().map(|b| boot_rows(&b.s)),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Writes a report. JSON goes to the file `path`; CSV writes one file per
/// table into the directory `path`.
pub fn write_fit(report: &Report, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format {
        Format::Json => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            std::fs::write(path, text)?;
        }
        Format::Csv => {
            std::fs::create_dir_all(path)?;
            for (name, table) in csv_tables(report) {
                std::fs::write(path.join(name), table)?;
            }
        }
    }
    Ok(())
}

/// Parses a JSON report.
pub fn read_json(path: impl AsRef<Path>) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn table(header: &[String], body: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in body {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn coef_csv(rows: &[CoefOut]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.name.clone(), r.estimate.text(), r.se.text(), r.t_value.text(), r.p_value.text()])
        .collect();
    table(&header(&["", "Estimate", "SE", "t_value", "p_value"]), &body)
}

fn named_csv(rows: &[NamedValue], col: &str) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| vec![r.name.clone(), r.value.text()]).collect();
    table(&header(&["", col]), &body)
}

fn matrix_csv(names: &[String], rows: &[Vec<Num>]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|v| v.text()).collect()).collect();
    table(names, &body)
}

fn boot_csv(rows: &[BootOut]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.name.clone(), r.estimate.text(), r.lo95.text(), r.hi95.text(), r.p.text()])
        .collect();
    table(&header(&["", "estimate", "lo95", "hi95", "p"]), &body)
}

fn tau_label(t: Num) -> String {
    format!("tau={}", t.text())
}

/// File name and contents of every CSV table of a report.
pub fn csv_tables(report: &Report) -> Vec<(String, String)> {
    match report {
        Report::Meigen(r) => {
            let names: Vec<String> = (1..=r.values.len()).map(|l| format!("sf{l}")).collect();
            let values: Vec<NamedValue> = names.iter().zip(&r.values).map(|(n, v)| named(n, v.0)).collect();
            let mut out = vec![
                ("values.csv".into(), named_csv(&values, "value")),
                ("vectors.csv".into(), matrix_csv(&names, &r.vectors)),
            ];
            if let Some(other) = r.other_eigenvalues_sum {
                out.push(("other.csv".into(), named_csv(&[named("other_eigenvalues_sum", other.0)], "value")));
            }
            out
        }
        Report::Esf(r) => vec![
            ("b.csv".into(), coef_csv(&r.b)),
            ("vif.csv".into(), named_csv(&r.vif, "VIF")),
            ("e.csv".into(), named_csv(&r.e, "stat")),
        ],
        Report::Resf(r) => vec![
            ("b.csv".into(), coef_csv(&r.b)),
            ("s.csv".into(), named_csv(&r.s, "par")),
            ("e.csv".into(), named_csv(&r.e, "stat")),
        ],
        Report::ResfVc(r) => {
            let mut s_header = vec![String::new()];
            s_header.extend(r.vc_names.iter().cloned());
            let s_body: Vec<Vec<String>> = r
                .s
                .iter()
                .map(|row| std::iter::once(row.name.clone()).chain(row.values.iter().map(|v| v.text())).collect())
                .collect();
            vec![
                ("b_vc.csv".into(), matrix_csv(&r.vc_names, &r.b_vc)),
                ("se_vc.csv".into(), matrix_csv(&r.vc_names, &r.se_vc)),
                ("p_vc.csv".into(), matrix_csv(&r.vc_names, &r.p_vc)),
                ("b_vc_mean.csv".into(), coef_csv(&r.b_vc_mean)),
                ("b_const.csv".into(), coef_csv(&r.b_const)),
                ("s.csv".into(), table(&s_header, &s_body)),
                ("e.csv".into(), named_csv(&r.e, "stat")),
            ]
        }
        Report::ResfQr(r) => {
            let mut out = Vec::new();
            let mut head = vec![String::new()];
            head.extend(r.per_tau.iter().map(|t| tau_label(t.tau)));
            let wide = |pick: &dyn Fn(&QrTauReport) -> Vec<(String, Num)>| {
                let first = r.per_tau.first().map(pick).unwrap_or_default();
                let body: Vec<Vec<String>> = (0..first.len())
                    .map(|i| {
                        std::iter::once(first[i].0.clone())
                            .chain(r.per_tau.iter().map(|t| pick(t)[i].1.text()))
                            .collect()
                    })
                    .collect();
                table(&head, &body)
            };
            out.push(("b.csv".into(), wide(&|t| t.b.iter().map(|c| (c.name.clone(), c.estimate)).collect())));
            out.push(("s.csv".into(), wide(&|t| t.s.iter().map(|c| (c.name.clone(), c.value)).collect())));
            out.push(("e.csv".into(), wide(&|t| t.e.iter().map(|c| (c.name.clone(), c.value)).collect())));
            for t in &r.per_tau {
                if let (Some(b), Some(s)) = (&t.boot_b, &t.boot_s) {
                    out.push((format!("B_{}.csv", tau_label(t.tau)), boot_csv(b)));
                    out.push((format!("S_{}.csv", tau_label(t.tau)), boot_csv(s)));
                }
            }
            out
        }
    }
}

impl std::fmt::Display for Report {
    /// Plain-text rendering of every table, as written to CSV.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        for (name, body) in csv_tables(self) {
            let _ = writeln!(s, "# {name}");
            s.push_str(&body);
        }
        f.write_str(&s)
    }
}
