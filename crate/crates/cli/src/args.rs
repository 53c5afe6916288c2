use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use moran_esf::esf::SelectionCriterion;
use moran_esf::mixed::Method;

/// Moran eigenvector spatial regression.
#[derive(Debug, Parser)]
#[command(name = "moran-esf", version, about)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "MORAN_ESF_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract Moran eigenvectors.
    Meigen(Common),
    /// Eigenvector spatial filtering with stepwise selection.
    Esf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Selection criterion: r2, aic, bic or all.
        #[arg(long = "fn", default_value = "r2")]
        criterion: SelectionCriterion,
        /// Reject eigenvectors that would push any VIF above this value.
        #[arg(long)]
        vif: Option<f64>,
    },
    /// Random-effects eigenvector spatial filtering.
    Resf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "reml")]
        method: Method,
    },
    /// Spatially varying coefficients (intercept always varying).
    ResfVc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Covariates with constant coefficients.
        #[arg(long, value_delimiter = ',')]
        xconst: Vec<String>,
        #[arg(long, default_value = "reml")]
        method: Method,
    },
    /// Spatially filtered unconditional quantile regression.
    ResfQr {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Quantiles (repeatable or comma separated; default 0.1, ..., 0.9).
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        /// Run the semiparametric bootstrap.
        #[arg(long)]
        boot: bool,
        #[arg(long, default_value_t = moran_esf::quantile::DEFAULT_N_BOOT)]
        n_boot: usize,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "px")]
    pub px: String,
    #[arg(long, default_value = "py")]
    pub py: String,
    /// k-nearest-neighbour connectivity instead of the exponential kernel.
    #[arg(long, conflicts_with = "cmat")]
    pub knn: Option<usize>,
    /// Headerless CSV with a user connectivity matrix.
    #[arg(long)]
    pub cmat: Option<PathBuf>,
    /// Keep eigenvectors with lambda / lambda_1 above this value.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Number of eigenvectors (cap for exact extraction, rank for --fast).
    #[arg(long = "enum")]
    pub enum_count: Option<usize>,
    /// Nystrom approximation (kernel connectivity only).
    #[arg(long)]
    pub fast: bool,
    /// Random seed for the bootstrap.
    #[arg(long, default_value_t = moran_esf::quantile::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Model {
    /// Response column.
    #[arg(long)]
    pub y: String,
    /// Covariate columns (varying ones for resf-vc).
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
}
