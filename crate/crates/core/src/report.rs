//! Deterministic output writers: JSON reports with fixed float formatting,
//! CSV field dumps, and dependency-free SVG line plots.
//!
//! Reports must be byte-identical across runs for identical inputs, so the
//! JSON writer keeps insertion order, formats every float with 17 significant
//! digits, and holds no timestamps. Wall-clock timing belongs on stderr or in
//! sidecar files, never in a report.

use std::fmt::Write as _;

/// JSON value with deterministic serialization.
#[derive(Clone, Debug, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Array(Vec<Json>),
    /// Insertion-ordered object.
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        match self {
            Json::Object(entries) => entries.push((key.to_string(), value)),
            _ => panic!("push on non-object Json"),
        }
        self
    }

    pub fn str(s: impl Into<String>) -> Json {
        Json::Str(s.into())
    }

    pub fn array_of_nums(values: &[f64]) -> Json {
        Json::Array(values.iter().map(|&v| Json::Num(v)).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Json> {
        match self {
            Json::Object(entries) => entries.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    /// Serialize with stable key order and 17-significant-digit floats.
    pub fn to_string_pretty(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Num(v) => out.push_str(&format_float(*v)),
            Json::Str(s) => write_json_string(out, s),
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Object(entries) => {
                if entries.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_json_string(out, k);
                    out.push_str(": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn write_json_string(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// 17-significant-digit scientific formatting; round-trip exact for f64,
/// byte-stable, with `-0` normalized and non-finite values mapped to null.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    let v = if v == 0.0 { 0.0 } else { v }; // normalize -0.0
    format!("{v:.16e}")
}

/// CSV table with `#`-prefixed metadata lines and 17-digit floats.
pub fn csv_table(metadata: &[(&str, String)], header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Minimal SVG polyline plot of one or more series sharing an x-axis.
pub fn svg_line_plot(
    title: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
    width: u32,
    height: u32,
) -> String {
    let (w, h) = (width as f64, height as f64);
    let margin = 40.0;
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &xv in x {
        x_min = x_min.min(xv);
        x_max = x_max.max(xv);
    }
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, ys) in series {
        for &yv in ys.iter() {
            y_min = y_min.min(yv);
            y_max = y_max.max(yv);
        }
    }
    if !(x_min.is_finite() && y_min.is_finite()) || x_max == x_min {
        x_min = 0.0;
        x_max = 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let sx = (w - 2.0 * margin) / (x_max - x_min);
    let sy = (h - 2.0 * margin) / (y_max - y_min);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="monospace" font-size="13">{}</text>"#,
        w / 2.0,
        title
    );
    // axes
    let _ = writeln!(
        out,
        r#"<path d="M {m} {m} L {m} {yb} L {xr} {yb}" stroke="black" fill="none"/>"#,
        m = margin,
        yb = h - margin,
        xr = w - margin
    );
    for (idx, (name, ys)) in series.iter().enumerate() {
        let color = colors[idx % colors.len()];
        let mut d = String::new();
        for (k, (&xv, &yv)) in x.iter().zip(ys.iter()).enumerate() {
            let px = margin + (xv - x_min) * sx;
            let py = h - margin - (yv - y_min) * sy;
            let _ = write!(d, "{}{px:.2} {py:.2}", if k == 0 { "M " } else { " L " });
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.2"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="11" fill="{color}">{name}</text>"#,
            w - margin + 4.0,
            margin + 14.0 * idx as f64
        );
    }
    out.push_str("</svg>\n");
    out
}
