use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentError, Histogram};

/// A per-trial row with a fixed header.
pub trait CsvRecord {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

/// Header plus one row per record, in the order given.
pub fn write_records_csv<W: Write, R: CsvRecord>(out: W, records: &[R]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::header())?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Errors if `path` exists and `force` is off.
pub fn refuse_existing(path: &Path, force: bool) -> Result<(), ExperimentError> {
    if path.exists() && !force {
        return Err(ExperimentError::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", path.display()),
        )));
    }
    Ok(())
}

/// Static SVG bar chart of a histogram.
pub fn histogram_svg(hist: &Histogram, title: &str, x_label: &str) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bins = hist.counts.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let bar_w = plot_w / bins;
    for (i, &c) in hist.counts.iter().enumerate() {
        let bh = plot_h * c as f64 / max;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a78b0" stroke="white" stroke-width="0.5"/>"##,
            left + bar_w * i as f64,
            top + plot_h - bh,
            bar_w,
            bh
        );
    }
    let axis_y = top + plot_h;
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        left + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}" stroke="black"/>"#
    );
    if let (Some(lo), Some(hi)) = (hist.edges.first(), hist.edges.last()) {
        for k in 0..=4 {
            let frac = k as f64 / 4.0;
            let x = left + plot_w * frac;
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
                axis_y + 16.0,
                lo + (hi - lo) * frac
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        left - 6.0,
        top + 4.0,
        max as usize
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">0</text>"#,
        left - 6.0,
        axis_y
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">count</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
