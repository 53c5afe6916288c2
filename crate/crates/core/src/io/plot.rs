//! Quantile-process plots: coefficient estimates across `tau` with a shaded
//! 95% band when bootstrap bounds are available.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::quantile_sorted;
use crate::quantile::{QrFit, SHRINK_ALPHA, SHRINK_SE};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 56.0;

/// Which parameter table to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Par {
    /// Regression coefficients (`pnum` 1 is the intercept).
    B,
    /// Shrinkage parameters (`pnum` 1 is `shrink_sf_SE`, 2 is `shrink_sf_alpha`).
    S,
}

impl std::str::FromStr for Par {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "b" => Ok(Self::B),
            "s" => Ok(Self::S),
            other => Err(format!("unknown parameter table `{other}` (expected b or s)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub tau: f64,
    pub estimate: f64,
    pub lo95: Option<f64>,
    pub hi95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub pnum: usize,
    pub par: Par,
    pub label: String,
    pub series: Vec<PlotPoint>,
}

impl PlotSpec {
    pub fn has_band(&self) -> bool {
        self.series.iter().all(|p| p.lo95.is_some() && p.hi95.is_some())
    }

    /// Series as CSV: `tau,estimate,lo95,hi95` (bounds empty without bootstrap).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,estimate,lo95,hi95\n");
        for p in &self.series {
            let b = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            let _ = writeln!(s, "{:?},{:?},{},{}", p.tau, p.estimate, b(p.lo95), b(p.hi95));
        }
        s
    }
}

/// Series of one parameter across the fitted quantiles.
pub fn plot_qr(fit: &QrFit<f64>, pnum: usize, par: Par) -> Result<(PlotSpec, String)> {
    let first = fit
        .per_tau
        .first()
        .ok_or_else(|| Error::input("io", "quantile fit has no quantiles"))?;
    let count = match par {
        Par::B => first.b.len(),
        Par::S => 2,
    };
    if pnum == 0 || pnum > count {
        return Err(Error::input("io", format!("pnum = {pnum} outside 1..={count}")));
    }
    let j = pnum - 1;
    let label = match par {
        Par::B => first.b.rows[j].name.clone(),
        Par::S => [SHRINK_SE, SHRINK_ALPHA][j].to_string(),
    };
    let series = fit
        .per_tau
        .iter()
        .map(|t| {
            let estimate = match par {
                Par::B => t.b.rows[j].estimate,
                Par::S => [t.s.sigma_gamma, t.s.alpha][j],
            };
            let bounds = t.boot.as_ref().map(|b| match par {
                Par::B => (b.b[j].lo95, b.b[j].hi95),
                Par::S => (b.s[j].lo95, b.s[j].hi95),
            });
            PlotPoint {
                tau: t.tau,
                estimate,
                lo95: bounds.map(|b| b.0),
                hi95: bounds.map(|b| b.1),
            }
        })
        .collect();
    let spec = PlotSpec { pnum, par, label, series };
    let svg = render_svg(&spec);
    Ok((spec, svg))
}

/// Writes `<stem>.svg` and `<stem>.csv` into `dir`.
pub fn write_plot(spec: &PlotSpec, svg: &str, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    std::fs::write(dir.join(format!("{stem}.csv")), spec.to_csv())?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Deterministic SVG 1.1 document, 640 x 480.
pub fn render_svg(spec: &PlotSpec) -> String {
    let taus: Vec<f64> = spec.series.iter().map(|p| p.tau).collect();
    let mut ys: Vec<f64> = spec.series.iter().map(|p| p.estimate).collect();
    let band = spec.has_band();
    if band {
        ys.extend(spec.series.iter().filter_map(|p| p.lo95));
        ys.extend(spec.series.iter().filter_map(|p| p.hi95));
    }
    ys.retain(|v| v.is_finite());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (ylo, yhi) = match (ys.first(), ys.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.5, a + 0.5),
        _ => (-0.5, 0.5),
    };
    let pad = 0.05 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let (xlo, xhi) = match (taus.first(), taus.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.05, a + 0.05),
        _ => (0.0, 1.0),
    };
    let px = |t: f64| LEFT + (t - xlo) / (xhi - xlo) * (WIDTH - LEFT - RIGHT);
    let py = |v: f64| HEIGHT - BOTTOM - (v - ylo) / (yhi - ylo) * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.label)
    );
    if band {
        let mut pts: Vec<String> = spec
            .series
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.tau), py(p.lo95.unwrap())))
            .collect();
        pts.extend(
            spec.series
                .iter()
                .rev()
                .map(|p| format!("{:.2},{:.2}", px(p.tau), py(p.hi95.unwrap()))),
        );
        let _ = writeln!(s, r##"<polygon class="band" points="{}" fill="#bebebe" stroke="none"/>"##, pts.join(" "));
    }
    if ylo < 0.0 && yhi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#808080" stroke-dasharray="4 4"/>"##,
            LEFT,
            WIDTH - RIGHT,
            y = py(0.0)
        );
    }
    let line: Vec<String> = spec
        .series
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.tau), py(p.estimate)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="estimate" points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        line.join(" ")
    );

    // axes
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#);
    for &t in &taus {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(t)
        );
    }
    if !ys.is_empty() {
        let mut ticks: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&q| quantile_sorted(&ys, q)).collect();
        ticks.dedup();
        for v in ticks {
            let y = py(v);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                x0 - 8.0,
                y + 4.0,
                tick_label(v)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">tau</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}
