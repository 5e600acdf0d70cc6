//! Report files: `rmise.csv`, `lepski_hist.csv`, per-replication records and
//! SVG line plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{CellReport, ExperimentReport, PlotSample};
use crate::basis::{csv_err, parse_field, CoefficientVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    SvgPlots,
}

/// One parsed row of `rmise.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmiseRow {
    pub eps: f64,
    pub delta: f64,
    pub rmise_post: f64,
    pub rmise_galerkin: f64,
    pub rmse_theta: f64,
    pub n_mc: usize,
}

impl From<&CellReport> for RmiseRow {
    fn from(c: &CellReport) -> Self {
        RmiseRow {
            eps: c.eps,
            delta: c.delta,
            rmise_post: c.rmise_post,
            rmise_galerkin: c.rmise_galerkin,
            rmse_theta: c.rmse_theta,
            n_mc: c.n_mc,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the requested artefacts into `dir`, creating it if needed, and
/// returns the paths written.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        ReportFormat::Csv => emit_csv(report, dir),
        ReportFormat::SvgPlots => emit_svg(report, dir),
    }
}

fn emit_csv(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let path = dir.join("rmise.csv");
    let mut w = create(&path)?;
    write_rmise_csv(report, &mut w)?;
    finish(&path, w)?;
    written.push(path);

    let mut pooled: BTreeMap<usize, usize> = BTreeMap::new();
    for cell in &report.cells {
        for (l, c) in &cell.level_hist {
            *pooled.entry(*l).or_insert(0) += c;
        }
    }
    let path = dir.join("lepski_hist.csv");
    let mut w = create(&path)?;
    write_hist(&pooled, &mut w).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    written.push(path);

    for (i, cell) in report.cells.iter().enumerate() {
        let path = dir.join(format!("lepski_hist_cell{i}.csv"));
        let mut w = create(&path)?;
        write_hist(&cell.level_hist, &mut w).map_err(|e| Error::io(&path, e))?;
        finish(&path, w)?;
        written.push(path);
    }

    let path = dir.join("records.csv");
    let mut w = create(&path)?;
    write_records(report, &mut w).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    written.push(path);

    let path = dir.join("config.txt");
    fs::write(&path, &report.config_echo).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    // the only non-deterministic output lives in its own file
    let path = dir.join("run_info.txt");
    let mut info = format!(
        "status = {}\nwall_clock_secs = {:.3}\n",
        if report.partial {
            "partial"
        } else {
            "complete"
        },
        report.wall_clock_secs
    );
    for c in &report.cells {
        if let Some(r) = c.reference_rmise {
            let _ = writeln!(
                info,
                "eps={:e} delta={:e} rmise_post={:.4} published={r:.4}{}",
                c.eps,
                c.delta,
                c.rmise_post,
                if c.deviates_from_reference() {
                    " DEVIATES>50%"
                } else {
                    ""
                }
            );
        }
    }
    fs::write(&path, info).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// `rmise.csv` with 17 significant digits per value.
pub fn write_rmise_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "eps",
        "delta",
        "rmise_post",
        "rmise_galerkin",
        "rmse_theta",
        "n_mc",
    ])
    .map_err(csv_err)?;
    for c in &report.cells {
        let r = RmiseRow::from(c);
        w.write_record([
            format!("{:.16e}", r.eps),
            format!("{:.16e}", r.delta),
            format!("{:.16e}", r.rmise_post),
            format!("{:.16e}", r.rmise_galerkin),
            format!("{:.16e}", r.rmse_theta),
            r.n_mc.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_rmise_csv<R: Read>(reader: R) -> Result<Vec<RmiseRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>()
        != [
            "eps",
            "delta",
            "rmise_post",
            "rmise_galerkin",
            "rmse_theta",
            "n_mc",
        ]
    {
        return Err(Error::Parse(format!(
            "unexpected rmise.csv header {headers:?}"
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(RmiseRow {
                eps: parse_field(&rec, 0)?,
                delta: parse_field(&rec, 1)?,
                rmise_post: parse_field(&rec, 2)?,
                rmise_galerkin: parse_field(&rec, 3)?,
                rmse_theta: parse_field(&rec, 4)?,
                n_mc: parse_field(&rec, 5)?,
            })
        })
        .collect()
}

fn write_hist<W: Write>(hist: &BTreeMap<usize, usize>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "level,count")?;
    for (l, c) in hist {
        writeln!(w, "{l},{c}")?;
    }
    Ok(())
}

fn write_records<W: Write>(report: &ExperimentReport, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "eps,delta,rep,seed,level,sq_err_post,sq_err_galerkin,sq_err_theta,acceptance,cutoff_zeroed"
    )?;
    for c in &report.cells {
        for r in &c.records {
            let acc = r
                .acceptance_rate
                .map(|a| format!("{a:?}"))
                .unwrap_or_default();
            writeln!(
                w,
                "{:e},{:e},{},{},{},{:?},{:?},{:?},{},{}",
                c.eps,
                c.delta,
                r.rep,
                r.seed,
                r.level,
                r.sq_err_post,
                r.sq_err_galerkin,
                r.sq_err_theta,
                acc,
                r.cutoff_zeroed
            )?;
        }
    }
    Ok(())
}

/// Points, stroke colour, width and opacity.
type Curve<'a> = (Vec<(f64, f64)>, &'a str, f64, f64);

fn emit_svg(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, cell) in report.cells.iter().enumerate() {
        let Some(plot) = &cell.plot else { continue };
        let title = format!("eps = {:e}, delta = {:e}", cell.eps, cell.delta);
        let svg = render_svg(plot, &title, 512)?;
        let path = dir.join(format!("cell{i}.svg"));
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Line plot of truth, Galerkin estimate, posterior mean and draws.
pub fn render_svg(plot: &PlotSample, title: &str, n_points: usize) -> Result<String> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;

    let curves: Vec<Curve> = {
        let mut c = Vec::new();
        for d in &plot.draws {
            c.push((d.evaluate_on_grid(n_points)?, "#9ecae1", 0.8, 0.5));
        }
        let main: [(&CoefficientVector, &str, f64); 3] = [
            (&plot.truth, "#000000", 2.0),
            (&plot.galerkin, "#d62728", 1.5),
            (&plot.posterior_mean, "#1f77b4", 2.0),
        ];
        for (v, color, width) in main {
            c.push((v.evaluate_on_grid(n_points)?, color, width, 1.0));
        }
        c
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (pts, ..) in &curves {
        for &(_, y) in pts {
            if y.is_finite() {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
    }
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let sx = |x: f64| PAD + x * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" x2="{}" y1="{y}" y2="{y}" stroke="#ccc"/>"##,
            W - PAD,
            y = sy(0.0)
        );
    }
    for (pts, color, width, opacity) in &curves {
        let mut d = String::new();
        for &(x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}" points="{}"/>"##,
            d.trim_end()
        );
    }
    let legend = [
        ("truth", "#000000"),
        ("galerkin", "#d62728"),
        ("posterior mean", "#1f77b4"),
        ("draws", "#9ecae1"),
    ];
    for (i, (name, color)) in legend.iter().enumerate() {
        let y = PAD + 15.0 + 15.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" x2="{x1}" y1="{y}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{xt}" y="{yt}" font-family="sans-serif" font-size="11">{name}</text>"##,
            x0 = W - PAD - 120.0,
            x1 = W - PAD - 100.0,
            xt = W - PAD - 95.0,
            yt = y + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
