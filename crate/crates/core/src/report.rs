//! Deterministic SVG scatter and line charts from CSV tables.
//!
//! Output depends only on the data and options: coordinates are printed
//! with two decimals and elements are emitted in input order.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("BadCSV: line {line}: {reason}")]
    BadCsv { line: usize, reason: String },
    #[error("MissingColumn: {0}")]
    MissingColumn(String),
    #[error("EmptyData: nothing to plot")]
    EmptyData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ReportError::BadCsv {
                line: 1,
                reason: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(ReportError::BadCsv {
                line: 1,
                reason: "no header".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| ReportError::BadCsv {
                line: i + 2,
                reason: e.to_string(),
            })?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, ReportError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::MissingColumn(name.to_string()))
    }

    /// One series per `y` column against `x`, optionally split by the values
    /// of `group` (series named `y:group`).
    pub fn series(&self, x: &str, ys: &[&str], group: Option<&str>) -> Result<Vec<Series>, ReportError> {
        let xi = self.column(x)?;
        let gi = group.map(|g| self.column(g)).transpose()?;
        let mut out: Vec<Series> = Vec::new();
        for y in ys {
            let yi = self.column(y)?;
            for (r, row) in self.rows.iter().enumerate() {
                let num = |c: usize| -> Result<f64, ReportError> {
                    row[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ReportError::BadCsv {
                        line: r + 2,
                        reason: format!("{:?} in column {} is not a finite number", row[c], self.header[c]),
                    })
                };
                let name = match gi {
                    Some(g) => format!("{y}:{}", row[g]),
                    None => y.to_string(),
                };
                let p = (num(xi)?, num(yi)?);
                match out.iter_mut().find(|s| s.name == name) {
                    Some(s) => s.points.push(p),
                    None => out.push(Series { name, points: vec![p] }),
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    /// Draw the `y = x` reference line (useful for proxy-vs-reference plots).
    pub diagonal: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            width: 480.0,
            height: 360.0,
            diagonal: false,
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MARGIN: (f64, f64, f64, f64) = (56.0, 16.0, 32.0, 48.0); // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly five round tick values covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    w: f64,
    h: f64,
}

impl Frame {
    fn new(series: &[Series], opts: &PlotOptions) -> Result<Self, ReportError> {
        let pts: Vec<&(f64, f64)> = series.iter().flat_map(|s| &s.points).collect();
        if pts.is_empty() {
            return Err(ReportError::EmptyData);
        }
        let range = |f: fn(&(f64, f64)) -> f64| {
            let lo = pts.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { (hi - lo) * 0.05 } else { 0.5 };
            (lo - pad, hi + pad)
        };
        Ok(Self {
            x: range(|p| p.0),
            y: range(|p| p.1),
            w: opts.width,
            h: opts.height,
        })
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (self.w - MARGIN.0 - MARGIN.1)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - MARGIN.3 - (y - self.y.0) / (self.y.1 - self.y.0) * (self.h - MARGIN.2 - MARGIN.3)
    }
}

fn chart(series: &[Series], opts: &PlotOptions, lines: bool) -> Result<String, ReportError> {
    let f = Frame::new(series, opts)?;
    let mut s = String::new();
    let (l, b) = (MARGIN.0, f.h - MARGIN.3);
    let (r, t) = (f.w - MARGIN.1, MARGIN.2);
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}" font-family="sans-serif" font-size="11">"#,
        f.w, f.h, f.w, f.h
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#, f.w / 2.0, escape(&opts.title)).unwrap();
    writeln!(s, r#"<path d="M{l:.2},{t:.2} V{b:.2} H{r:.2}" fill="none" stroke="black"/>"#).unwrap();
    for v in nice_ticks(f.x.0, f.x.1) {
        let x = f.px(v);
        writeln!(s, r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, b + 4.0, b + 16.0, fmt_tick(v)).unwrap();
    }
    for v in nice_ticks(f.y.0, f.y.1) {
        let y = f.py(v);
        writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 4.0, l - 6.0, y + 4.0, fmt_tick(v)).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, f.h - 10.0, escape(&opts.x_label)).unwrap();
    writeln!(s, r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#, (t + b) / 2.0, (t + b) / 2.0, escape(&opts.y_label)).unwrap();
    if opts.diagonal {
        let lo = f.x.0.max(f.y.0);
        let hi = f.x.1.min(f.y.1);
        if hi > lo {
            writeln!(s, r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##, f.px(lo), f.py(lo), f.px(hi), f.py(hi)).unwrap();
        }
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if lines {
            let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
            writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
        } else {
            for &(x, y) in &ser.points {
                writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.7"/>"#, f.px(x), f.py(y)).unwrap();
            }
        }
        let ly = t + 14.0 * i as f64 + 8.0;
        writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#, l + 10.0, ly - 8.0, l + 24.0, ly + 1.0, escape(&ser.name)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() {
        format!("{r:.0}")
    } else {
        format!("{r}")
    }
}

pub fn scatter_svg(series: &[Series], opts: &PlotOptions) -> Result<String, ReportError> {
    chart(series, opts, false)
}

/// Points of each series are joined in input order.
pub fn line_svg(series: &[Series], opts: &PlotOptions) -> Result<String, ReportError> {
    chart(series, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "seed,full,fast,direct\n0,40,40.5,37\n0,42,41.8,44\n1,39,39.2,38\n";

    #[test]
    fn table_series() {
        let t = Table::parse(CSV).unwrap();
        let s = t.series("full", &["fast", "direct"], None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].points, vec![(40.0, 37.0), (42.0, 44.0), (39.0, 38.0)]);
        let g = t.series("full", &["fast"], Some("seed")).unwrap();
        assert_eq!(g.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), vec!["fast:0", "fast:1"]);
        assert_eq!(t.series("full", &["nope"], None), Err(ReportError::MissingColumn("nope".into())));
    }

    #[test]
    fn bad_csv() {
        assert!(matches!(Table::parse("a,b\n1,2\n3\n"), Err(ReportError::BadCsv { line: 3, .. })));
        let t = Table::parse("a,b\n1,x\n").unwrap();
        assert!(matches!(t.series("a", &["b"], None), Err(ReportError::BadCsv { line: 2, .. })));
        assert!(matches!(Table::parse(""), Err(ReportError::BadCsv { line: 1, .. })));
    }

    #[test]
    fn svg_is_deterministic() {
        let t = Table::parse(CSV).unwrap();
        let s = t.series("full", &["fast", "direct"], None).unwrap();
        let opts = PlotOptions {
            title: "proxy <vs> full".into(),
            diagonal: true,
            ..PlotOptions::default()
        };
        let a = scatter_svg(&s, &opts).unwrap();
        assert_eq!(a, scatter_svg(&s, &opts).unwrap());
        assert_eq!(a.matches("<circle").count(), 6);
        assert!(a.contains("proxy &lt;vs&gt; full"));
        assert!(a.contains("stroke-dasharray"));
        let l = line_svg(&s, &PlotOptions::default()).unwrap();
        assert_eq!(l.matches("<polyline").count(), 2);
        assert_eq!(scatter_svg(&[], &opts), Err(ReportError::EmptyData));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(nice_ticks(37.3, 44.9), vec![38.0, 40.0, 42.0, 44.0]);
    }
}
