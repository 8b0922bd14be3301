//! Data ingestion, the versioned result-document schema, and static SVG
//! rendering of monotonicity maps.

use crate::error::{Error, Result};
use crate::geometry::{Point, Sample};
use crate::harness::{DetectionStudy, RejectionSummary};
use crate::inference::{ModeDetection, ModeTestResult, MonotonicityMap, Verdict};
use crate::nullsim::NullQuantile;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const SCHEMA_VERSION: &str = "modescope/1";

/// Reads delimiter-separated numeric rows (comma or whitespace). An
/// optional single header line is skipped; all rows must share one
/// dimension.
pub fn parse_points(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path)?;
    parse_points_str(&text)
}

/// As [`parse_points`], from an in-memory string.
pub fn parse_points_str(text: &str) -> Result<Sample> {
    let mut points: Vec<Point> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut data_rows_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            tokens.iter().map(|t| t.parse::<f64>()).collect();
        let coords = match parsed {
            Ok(c) => c,
            Err(_) if !data_rows_seen => continue, // header line
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-numeric cell in row '{trimmed}'"),
                });
            }
        };
        if coords.is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row has {} columns, expected {d}", coords.len()),
                });
            }
            _ => {}
        }
        data_rows_seen = true;
        points.push(Point::new(coords).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?);
    }
    if points.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows found".into() });
    }
    Sample::new(points)
}

/// Echo of the run configuration, sufficient to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub procedure: String,
    pub seed: u64,
    /// Free-form flag echo; a sorted map so serialization is deterministic.
    pub parameters: BTreeMap<String, String>,
}

/// The result of one run, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultPayload {
    ModeTest(ModeTestResult),
    Map(MonotonicityMap),
    Detection(ModeDetection),
    Quantile(NullQuantile),
    LevelPower(RejectionSummary),
    DetectionStudy(DetectionStudy),
    UnivariateQuantile { n: usize, alpha: f64, reps: usize, kappa: f64 },
}

/// Versioned top-level result document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDoc {
    pub schema: String,
    pub config: RunEcho,
    pub payload: ResultPayload,
}

impl ResultsDoc {
    pub fn new(config: RunEcho, payload: ResultPayload) -> Self {
        ResultsDoc { schema: SCHEMA_VERSION.to_string(), config, payload }
    }
}

/// Serializes a document; key order is fixed by the struct definitions and
/// the sorted parameter map, so output bytes are deterministic.
pub fn results_to_string(doc: &ResultsDoc) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn write_results(doc: &ResultsDoc, path: &Path) -> Result<()> {
    std::fs::write(path, results_to_string(doc)?)?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<ResultsDoc> {
    let text = std::fs::read_to_string(path)?;
    let doc: ResultsDoc = serde_json::from_str(&text)?;
    if doc.schema != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported schema '{}', expected '{SCHEMA_VERSION}'",
            doc.schema
        )));
    }
    Ok(doc)
}

/// Aggregate rendering verdict of one (vertex, direction) cell of a map.
#[derive(PartialEq, Clone, Copy)]
enum CellMark {
    Dotted,     // some scale rejected "decreasing"
    Hatched,    // some scale rejected "increasing"
    Both,
    None,
}

fn fmt_num(v: f64) -> String {
    format!("{v:.4}")
}

/// Renders a monotonicity map as SVG 1.1: each wedge is a triangle at its
/// grid vertex, dotted fill where a decrease was rejected, cross-hatched
/// where an increase was rejected, plain outline otherwise. Output bytes
/// are deterministic for a given map. Only two-dimensional maps render.
pub fn render_map_to_string(map: &MonotonicityMap) -> Result<String> {
    let d = map.grid.dim();
    if d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    // collect the aggregate verdict per (vertex, direction)
    let mut cells: BTreeMap<(usize, usize), CellMark> = BTreeMap::new();
    for m in &map.decisions {
        let key = (m.vertex, m.direction);
        let entry = cells.entry(key).or_insert(CellMark::None);
        let new = match m.decision.verdict {
            Verdict::DecreaseRejected => CellMark::Dotted,
            Verdict::IncreaseRejected => CellMark::Hatched,
            _ => continue,
        };
        *entry = match (*entry, new) {
            (CellMark::None, n) => n,
            (c, n) if c == n => c,
            _ => CellMark::Both,
        };
    }
    // world box: grid extent padded by the wedge reach
    let reach = map.family.length * (1.0 + map.family.angle.tan());
    let (wx0, wy0) = (map.grid.lower.coords[0] - reach, map.grid.lower.coords[1] - reach);
    let (wx1, wy1) = (map.grid.upper.coords[0] + reach, map.grid.upper.coords[1] + reach);
    let scale = 640.0 / (wx1 - wx0);
    let width = 640.0;
    let height = (wy1 - wy0) * scale;
    let legend_h = 40.0;
    let tx = |x: f64| (x - wx0) * scale;
    let ty = |y: f64| (wy1 - y) * scale; // flip y for screen coordinates
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        fmt_num(width),
        fmt_num(height + legend_h),
        fmt_num(width),
        fmt_num(height + legend_h)
    );
    svg.push_str(concat!(
        "<defs>\n",
        "<pattern id=\"dots\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">",
        "<circle cx=\"3\" cy=\"3\" r=\"1.4\" fill=\"#1f77b4\"/></pattern>\n",
        "<pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">",
        "<path d=\"M0,0 l6,6 M6,0 l-6,6\" stroke=\"#d62728\" stroke-width=\"1\"/></pattern>\n",
        "</defs>\n"
    ));
    let vertices = map.grid.vertices();
    // wedge triangles from the map's own family geometry
    for ((v, dir), mark) in &cells {
        let vertex = &vertices[*v];
        let (fill, extra) = match mark {
            CellMark::Dotted => ("url(#dots)", None),
            CellMark::Hatched => ("url(#hatch)", None),
            CellMark::Both => ("url(#dots)", Some("url(#hatch)")),
            CellMark::None => ("none", None),
        };
        let e_raw = &map.family.directions[*dir];
        let l = map.family.length;
        let spread = map.family.angle.tan() * l;
        // axis endpoint offset and half-width vector (perpendicular)
        let e = (e_raw[0] * l, e_raw[1] * l);
        let half = (-e_raw[1] * spread, e_raw[0] * spread);
        let apex = (tx(vertex.coords[0]), ty(vertex.coords[1]));
        let a = (
            tx(vertex.coords[0] + e.0 - half.0),
            ty(vertex.coords[1] + e.1 - half.1),
        );
        let b = (
            tx(vertex.coords[0] + e.0 + half.0),
            ty(vertex.coords[1] + e.1 + half.1),
        );
        let points = format!(
            "{},{} {},{} {},{}",
            fmt_num(apex.0),
            fmt_num(apex.1),
            fmt_num(a.0),
            fmt_num(a.1),
            fmt_num(b.0),
            fmt_num(b.1)
        );
        let _ = writeln!(
            svg,
            "<polygon points=\"{points}\" fill=\"{fill}\" stroke=\"#555555\" stroke-width=\"0.6\"/>"
        );
        if let Some(overlay) = extra {
            let _ = writeln!(svg, "<polygon points=\"{points}\" fill=\"{overlay}\" stroke=\"none\"/>");
        }
    }
    // legend
    let ly = height + 10.0;
    let _ = writeln!(
        svg,
        "<rect x=\"10\" y=\"{0}\" width=\"18\" height=\"18\" fill=\"url(#dots)\" stroke=\"#555555\"/>\
<text x=\"34\" y=\"{1}\" font-size=\"12\" font-family=\"sans-serif\">decrease rejected</text>\
<rect x=\"180\" y=\"{0}\" width=\"18\" height=\"18\" fill=\"url(#hatch)\" stroke=\"#555555\"/>\
<text x=\"204\" y=\"{1}\" font-size=\"12\" font-family=\"sans-serif\">increase rejected</text>\
<rect x=\"350\" y=\"{0}\" width=\"18\" height=\"18\" fill=\"none\" stroke=\"#555555\"/>\
<text x=\"374\" y=\"{1}\" font-size=\"12\" font-family=\"sans-serif\">no rejection</text>",
        fmt_num(ly),
        fmt_num(ly + 14.0)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_map(map: &MonotonicityMap, path: &Path) -> Result<()> {
    std::fs::write(path, render_map_to_string(map)?)?;
    Ok(())
}
