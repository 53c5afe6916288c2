//! Input tables, result reports and plots.

mod dataset;
mod plot;
mod report;

pub use dataset::{load_matrix, load_table, parse_matrix, parse_table, Dataset, Schema};
pub use plot::{plot_qr, render_svg, write_plot, Par, PlotPoint, PlotSpec};
pub use report::{
    csv_tables, read_json, write_fit, BootOut, CoefOut, EsfReport, Format, MeigenReport, NamedValue, Num,
    QrReport, QrTauReport, Report, ResfReport, SvcReport, WideRow,
};
