use std::fmt::Write as _;
use std::path::Path;

use moran_esf::connectivity::ConnectivityMatrix;
use moran_esf::eigen::{meigen, meigen_coords, meigen_f, MeigenOptions, NystromOptions};
use moran_esf::geometry::knn_graph;
use moran_esf::io::{self, Dataset, Format, Par, Report, Schema};
use moran_esf::quantile::QrOptions;
use moran_esf::{esf, mixed, quantile, Basis, Error, Result};

use crate::args::{Command, Common, Model};

/// Process exit status of an error.
pub fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::SingularDesign { .. } => 3,
        Error::Convergence { .. } => 4,
        Error::BootstrapUnstable { .. } => 5,
        _ => 2,
    }
}

/// Runs one subcommand and returns the text printed on success.
pub fn run(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Meigen(common) => {
            let data = load(common, None, &[], &[])?;
            let basis = basis(common, &data)?;
            let report = Report::meigen(&basis);
            write(&report, &common.out)?;
            Ok(format!("{} eigenvectors retained for {} sites\n", basis.len(), basis.n()))
        }
        Command::Esf { common, model, criterion, vif } => {
            let data = load(common, Some(model), &model.x, &[])?;
            let basis = basis(common, &data)?;
            let fit = esf::esf(&data.response()?, &data.covariates()?, &basis, *criterion, *vif)?;
            finish(Report::esf(&fit, *criterion), &common.out)
        }
        Command::Resf { common, model, method } => {
            let data = load(common, Some(model), &model.x, &[])?;
            let basis = basis(common, &data)?;
            let fit = mixed::resf(&data.response()?, &data.covariates()?, &basis, *method)?;
            finish(Report::resf(&fit), &common.out)
        }
        Command::ResfVc { common, model, xconst, method } => {
            let data = load(common, Some(model), &model.x, xconst)?;
            let basis = basis(common, &data)?;
            let fit = mixed::resf_vc(
                &data.response()?,
                &data.covariates()?,
                &data.constant_covariates()?,
                &basis,
                *method,
            )?;
            for w in &fit.warnings {
                eprintln!("moran-esf: warning: {w}");
            }
            finish(Report::resf_vc(&fit), &common.out)
        }
        Command::ResfQr { common, model, tau, boot, n_boot } => {
            let data = load(common, Some(model), &model.x, &[])?;
            let basis = basis(common, &data)?;
            let opts = QrOptions {
                taus: if tau.is_empty() { quantile::default_taus() } else { tau.clone() },
                boot: *boot,
                n_boot: *n_boot,
                seed: common.seed,
            };
            let fit = quantile::resf_qr(&data.response()?, &data.covariates()?, &basis, &opts)?;
            let plots = common.out.join("plots");
            for p in 1..=fit.per_tau[0].b.len() {
                let (spec, svg) = io::plot_qr(&fit, p, Par::B)?;
                io::write_plot(&spec, &svg, &plots, &format!("b{p}"))?;
            }
            for p in 1..=2 {
                let (spec, svg) = io::plot_qr(&fit, p, Par::S)?;
                io::write_plot(&spec, &svg, &plots, &format!("s{p}"))?;
            }
            finish(Report::resf_qr(&fit), &common.out)
        }
    }
}

fn load(common: &Common, model: Option<&Model>, x: &[String], xconst: &[String]) -> Result<Dataset> {
    let schema = Schema {
        coords: common.cmat.is_none().then(|| (common.px.clone(), common.py.clone())),
        y: model.map(|m| m.y.clone()),
        x: x.to_vec(),
        xconst: xconst.to_vec(),
    };
    io::load_table(&common.input, &schema)
}

fn basis(common: &Common, data: &Dataset) -> Result<Basis> {
    let opts = MeigenOptions {
        threshold: common.threshold,
        enum_max: common.enum_count,
    };
    if common.fast {
        if common.knn.is_some() || common.cmat.is_some() {
            return Err(Error::Input {
                module: "eigen",
                message: "--fast requires the default kernel connectivity".into(),
            });
        }
        let nopts = common.enum_count.map(NystromOptions::with_enum).unwrap_or_default();
        return meigen_f(&data.coords()?, nopts);
    }
    if let Some(path) = &common.cmat {
        let c = ConnectivityMatrix::from_user(io::load_matrix(path)?)?;
        if c.n() != data.n() {
            return Err(Error::Input {
                module: "io",
                message: format!("connectivity matrix has {} rows but the table has {}", c.n(), data.n()),
            });
        }
        return meigen(&c, opts);
    }
    if let Some(k) = common.knn {
        return meigen(&knn_graph(&data.coords()?, k)?, opts);
    }
    meigen_coords(&data.coords()?, opts)
}

fn write(report: &Report, out: &Path) -> Result<()> {
    io::write_fit(report, Format::Json, out.join("fit.json"))?;
    io::write_fit(report, Format::Csv, out)
}

const QUIET_TABLES: [&str; 4] = ["vectors.csv", "b_vc.csv", "se_vc.csv", "p_vc.csv"];

fn finish(report: Report, out: &Path) -> Result<String> {
    write(&report, out)?;
    let mut s = String::new();
    for (name, body) in io::csv_tables(&report) {
        if !QUIET_TABLES.contains(&name.as_str()) {
            let _ = writeln!(s, "# {name}");
            s.push_str(&body);
        }
    }
    Ok(s)
}
