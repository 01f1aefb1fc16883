//! Result files: curve and trace CSVs, summary JSON, run manifests and
//! plot-ready tables. Every float is written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bcd::pareto::{
    verify_region_properties, CurvePoint, ParetoCurve, RegionReport, VerifySettings,
};
use crate::bcd::{cost_model, BcdRun, TraceRow};
use crate::config::SceneConfig;
use crate::error::{Error, Result};
use crate::problem::Mode;
use crate::scene::Scene;

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        fmt12(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

pub fn fmt12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// One row of a curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub scheme: String,
    pub mode: Mode,
    pub constraint_level: f64,
    #[serde(rename = "I_r")]
    pub smi: f64,
    #[serde(rename = "C_d")]
    pub rate: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub seed: u64,
    pub wall_ms: f64,
}

impl CurveRecord {
    pub fn from_run(run: &BcdRun) -> Self {
        Self {
            scheme: run.scheme.clone(),
            mode: run.problem.mode,
            constraint_level: run.problem.level,
            smi: run.smi,
            rate: run.rate,
            converged: run.converged,
            outer_iters: run.outer_iters,
            seed: run.seed,
            wall_ms: run.wall_ms,
        }
    }

    pub fn from_point(p: &CurvePoint) -> Self {
        Self {
            scheme: p.scheme.clone(),
            mode: p.mode,
            constraint_level: p.constraint_level,
            smi: p.smi,
            rate: p.rate,
            converged: p.converged,
            outer_iters: p.outer_iters,
            seed: p.seed,
            wall_ms: p.wall_ms,
        }
    }

    /// The record as it reads back from disk.
    pub fn rounded(&self) -> Self {
        Self {
            constraint_level: round12(self.constraint_level),
            smi: round12(self.smi),
            rate: round12(self.rate),
            wall_ms: round12(self.wall_ms),
            ..self.clone()
        }
    }
}

pub const CURVE_HEADER: [&str; 9] = [
    "scheme",
    "mode",
    "constraint_level",
    "I_r",
    "C_d",
    "converged",
    "outer_iters",
    "seed",
    "wall_ms",
];

pub const TRACE_HEADER: [&str; 6] = ["outer_iter", "block", "I_r", "C_d", "lambda", "rho"];

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_curve_csv(path: &Path, records: &[CurveRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for r in records {
        w.write_record([
            r.scheme.clone(),
            r.mode.as_str().to_string(),
            fmt12(r.constraint_level),
            fmt12(r.smi),
            fmt12(r.rate),
            r.converged.to_string(),
            r.outer_iters.to_string(),
            r.seed.to_string(),
            fmt12(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CURVE_HEADER {
        return Err(Error::Parse(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            CURVE_HEADER.join(","),
            header.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for t in trace {
        w.write_record([
            t.outer_iter.to_string(),
            t.block.as_str().to_string(),
            fmt12(t.smi),
            fmt12(t.rate),
            fmt12(t.lambda),
            fmt12(t.rho),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub constraint_level: f64,
    #[serde(rename = "I_r")]
    pub smi: f64,
    #[serde(rename = "C_d")]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub scheme: String,
    pub mode: Mode,
    pub levels: usize,
    pub feasible: usize,
    pub boundary: Vec<BoundaryPoint>,
    pub failures: Vec<String>,
    pub region: Option<RegionReport>,
}

impl CurveSummary {
    pub fn new(curve: &ParetoCurve, region: Option<RegionReport>) -> Self {
        Self {
            scheme: curve.scheme.clone(),
            mode: curve.mode,
            levels: curve.points.len(),
            feasible: curve.points.iter().filter(|p| p.feasible).count(),
            boundary: curve
                .boundary()
                .into_iter()
                .map(|p| BoundaryPoint {
                    constraint_level: round12(p.constraint_level),
                    smi: round12(p.smi),
                    rate: round12(p.rate),
                })
                .collect(),
            failures: curve
                .points
                .iter()
                .filter_map(|p| {
                    p.error
                        .as_ref()
                        .map(|e| format!("level {}: {e}", fmt12(p.constraint_level)))
                })
                .collect(),
            region: region.map(round_report),
        }
    }

    /// Summary whose boundary keeps only the points that pass
    /// [`verify_region_properties`]; the full report is attached.
    pub fn validated(
        curve: &ParetoCurve,
        scene: &Scene,
        settings: &VerifySettings,
    ) -> Result<Self> {
        let report = verify_region_properties(curve, scene, settings)?;
        let bad: Vec<f64> = report
            .violations
            .iter()
            .map(|v| round12(v.constraint_level))
            .collect();
        let mut summary = Self::new(curve, Some(report));
        summary
            .boundary
            .retain(|b| !bad.contains(&b.constraint_level));
        Ok(summary)
    }
}

fn round_report(mut r: RegionReport) -> RegionReport {
    r.smi_bound = round12(r.smi_bound);
    r.rate_bound = round12(r.rate_bound);
    for v in &mut r.violations {
        v.constraint_level = round12(v.constraint_level);
        v.smi = round12(v.smi);
        v.rate = round12(v.rate);
    }
    r
}

/// Serialize with every float rounded to 12 significant digits.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let v = round_json(serde_json::to_value(value)?);
    fs::write(path, serde_json::to_string_pretty(&v)? + "\n")?;
    Ok(())
}

fn round_json(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round12(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub schemes: Vec<String>,
    pub levels: Option<Vec<f64>>,
    pub args: Vec<String>,
    pub version: String,
}

/// Write `manifest.json` and the fully resolved `config.toml` into `dir`.
pub fn write_manifest(dir: &Path, manifest: &RunManifest, config: &SceneConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("manifest.json"), manifest)?;
    fs::write(dir.join("config.toml"), config.to_toml_string())?;
    Ok(())
}

/// A long-format `(series, x, y)` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotTable {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub rows: Vec<(String, f64, f64)>,
}

impl PlotTable {
    pub fn series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (s, _, _) in &self.rows {
            if !out.contains(&s.as_str()) {
                out.push(s);
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["series", "x", "y"])?;
        for (s, x, y) in &self.rows {
            w.write_record([s.clone(), fmt12(*x), fmt12(*y)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// A plain line chart, one polyline per series.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 56.0);
        let finite: Vec<&(String, f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.1.is_finite() && r.2.is_finite())
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for r in &finite {
            x0 = x0.min(r.1);
            x1 = x1.max(r.1);
            y0 = y0.min(r.2);
            y1 = y1.max(r.2);
        }
        if finite.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 <= 0.0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let colors = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
        ];
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<path d="M{pad} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
            t = pad,
            b = h - pad,
            r = w - pad
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
            w / 2.0,
            xml(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 12.0,
            xml(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            xml(&self.y_label)
        );
        for (v, anchor, x, y) in [
            (x0, "start", pad, h - pad + 16.0),
            (x1, "end", w - pad, h - pad + 16.0),
        ] {
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#
            );
        }
        for (v, y) in [(y0, h - pad), (y1, pad + 4.0)] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" text-anchor="end">{v:.3}</text>"#,
                pad - 4.0
            );
        }
        for (i, name) in self.series().into_iter().enumerate() {
            let color = colors[i % colors.len()];
            let pts: Vec<String> = finite
                .iter()
                .filter(|r| r.0 == name)
                .map(|r| format!("{:.2},{:.2}", px(r.1), py(r.2)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                w - pad - 120.0,
                pad + 14.0 * (i as f64 + 1.0),
                xml(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Boundary table `(C_d, I_r)` with one series per label, in the given order.
pub fn boundary_table(title: &str, series: &[(String, Vec<CurveRecord>)]) -> PlotTable {
    let mut rows = Vec::new();
    for (label, records) in series {
        let mut pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.smi.is_finite() && r.rate.is_finite())
            .map(|r| (r.rate, r.smi))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        rows.extend(pts.into_iter().map(|(x, y)| (label.clone(), x, y)));
    }
    PlotTable {
        title: title.to_string(),
        x_label: "C_d (bps/Hz)".into(),
        y_label: "I_r (bps/Hz)".into(),
        rows,
    }
}

/// Cost of RIS, BD-SPP and BD-SP for every integer `N` in `[n_lo, n_hi]`.
pub fn cost_table(n_lo: usize, n_hi: usize, c: f64, c0: f64) -> Result<PlotTable> {
    let mut rows = Vec::new();
    for n in n_lo..=n_hi {
        let t = cost_model(n as f64, c, c0)?;
        rows.push(("RIS".to_string(), n as f64, t.ris));
        rows.push(("BD-SPP".to_string(), n as f64, t.bd_spp));
        rows.push(("BD-SP".to_string(), n as f64, t.bd_sp));
    }
    rows.sort_by(|a, b| {
        series_rank(&a.0)
            .cmp(&series_rank(&b.0))
            .then(a.1.total_cmp(&b.1))
    });
    Ok(PlotTable {
        title: format!("Hardware cost, c = {c}"),
        x_label: "N".into(),
        y_label: "cost (C0 units)".into(),
        rows,
    })
}

fn series_rank(s: &str) -> usize {
    ["RIS", "BD-SPP", "BD-SP"]
        .iter()
        .position(|&n| n == s)
        .unwrap_or(usize::MAX)
}

/// What a plot table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `(C_d, I_r)` boundary, one series per file.
    Boundary,
    /// Largest `I_r` and `C_d` of each file against the number in its label.
    /// A label `k50@10` puts `x = 10` into series `k50 I_r` and `k50 C_d`.
    Extremes,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "boundary" => Ok(PlotKind::Boundary),
            "extremes" => Ok(PlotKind::Extremes),
            other => Err(format!(
                "unknown plot kind `{other}` (expected boundary or extremes)"
            )),
        }
    }
}

/// First number in `s`, used to order series such as `k0`, `k50`, `k200`.
pub fn label_number(s: &str) -> Option<f64> {
    let start = s.find(|c: char| c.is_ascii_digit())?;
    let neg = start > 0 && s.as_bytes()[start - 1] == b'-';
    let tail = &s[start..];
    let end = tail
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(tail.len());
    let v: f64 = tail[..end].trim_end_matches('.').parse().ok()?;
    Some(if neg { -v } else { v })
}

fn label_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (label_number(a), label_number(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Largest metrics of each labelled record set against its label's number.
pub fn extremes_table(
    title: &str,
    x_label: &str,
    series: &[(String, Vec<CurveRecord>)],
) -> PlotTable {
    let mut rows = Vec::new();
    for (label, records) in series {
        let (name, x) = match label.split_once('@') {
            Some((name, x)) => (format!("{name} "), label_number(x)),
            None => (String::new(), label_number(label)),
        };
        let Some(x) = x else {
            continue;
        };
        let best = |f: fn(&CurveRecord) -> f64| {
            records
                .iter()
                .map(f)
                .filter(|v| v.is_finite())
                .fold(f64::NAN, f64::max)
        };
        rows.push((format!("{name}I_r"), x, best(|r| r.smi)));
        rows.push((format!("{name}C_d"), x, best(|r| r.rate)));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    PlotTable {
        title: title.to_string(),
        x_label: x_label.to_string(),
        y_label: "bps/Hz".into(),
        rows,
    }
}

/// A curve file and the series name it plots under.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotInput {
    pub label: String,
    pub path: PathBuf,
}

impl PlotInput {
    /// `label=path`, or a bare path labelled by its file stem.
    pub fn parse(arg: &str) -> Self {
        match arg.split_once('=') {
            Some((label, path)) if !label.is_empty() => Self {
                label: label.to_string(),
                path: PathBuf::from(path),
            },
            _ => {
                let path = PathBuf::from(arg);
                let label = path
                    .file_stem()
                    .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
                Self { label, path }
            }
        }
    }
}

/// Read curve files into a table, ordering series by the first number in
/// each label. Files that are missing or hold no rows are skipped and
/// reported as warnings.
pub fn plot_data(kind: PlotKind, title: &str, inputs: &[PlotInput]) -> (PlotTable, Vec<String>) {
    let mut series = Vec::new();
    let mut warnings = Vec::new();
    for PlotInput { label, path: f } in inputs {
        let label = label.clone();
        match read_curve_csv(f) {
            Ok(records) if records.is_empty() => {
                warnings.push(format!("{}: no rows, series skipped", f.display()))
            }
            Ok(records) => series.push((label, records)),
            Err(e) => warnings.push(format!("{}: {e}, series skipped", f.display())),
        }
    }
    series.sort_by(|a, b| label_order(&a.0, &b.0));
    let table = match kind {
        PlotKind::Boundary => boundary_table(title, &series),
        PlotKind::Extremes => {
            if series
                .iter()
                .any(|(l, _)| label_number(l.rsplit('@').next().unwrap_or(l)).is_none())
            {
                warnings.push("labels without a number are left out of an extremes table".into());
            }
            extremes_table(title, "parameter", &series)
        }
    };
    (table, warnings)
}

/// Write `<stem>.csv` and, when asked, `<stem>.svg`.
pub fn emit_table(dir: &Path, stem: &str, table: &PlotTable, svg: bool) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{stem}.csv"));
    table.write_csv(&csv_path)?;
    let mut out = vec![csv_path];
    if svg {
        let svg_path = dir.join(format!("{stem}.svg"));
        fs::write(&svg_path, table.to_svg())?;
        out.push(svg_path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(1.0), "1.00000000000e0");
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(2.0 / 3.0), 0.666666666667);
    }

    #[test]
    fn json_floats_rounded() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_json(
            &p,
            &serde_json::json!({"a": [std::f64::consts::E, 1], "b": "s"}),
        )
        .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("2.71828182846"), "{text}");
    }

    #[test]
    fn label_numbers() {
        assert_eq!(label_number("k50"), Some(50.0));
        assert_eq!(label_number("pt-10dbm"), Some(-10.0));
        assert_eq!(label_number("range0.25m"), Some(0.25));
        assert_eq!(label_number("spp"), None);
        let mut v = vec!["k200", "k0", "k50"];
        v.sort_by(|a, b| label_order(a, b));
        assert_eq!(v, ["k0", "k50", "k200"]);
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let t = PlotTable {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            rows: vec![
                ("a".into(), 0.0, 1.0),
                ("a".into(), 1.0, 0.5),
                ("b".into(), 0.0, 2.0),
            ],
        };
        assert_eq!(t.to_svg().matches("<polyline").count(), 2);
    }
}
