//! Line-oriented text format for point clouds.
//!
//! ```text
//! cfs3d-points v1 n=<N> cols=<comma-separated column names>
//! <one point per line, space-separated values in column order>
//! ```
//!
//! Columns come from {x,y,z,r,g,b,sem,inst}; x,y,z are mandatory and r,g,b
//! travel together. Coordinates are written with nine decimal places, so a
//! round-trip preserves them to well under 1e-6.

use super::PointCloud;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const ALLOWED: [&str; 8] = ["x", "y", "z", "r", "g", "b", "sem", "inst"];

fn render(cloud: &PointCloud) -> String {
    let mut cols = vec!["x", "y", "z"];
    if cloud.rgb.is_some() {
        cols.extend(["r", "g", "b"]);
    }
    if cloud.sem.is_some() {
        cols.push("sem");
    }
    if cloud.inst.is_some() {
        cols.push("inst");
    }
    let mut out = format!(
        "cfs3d-points v1 n={} cols={}\n",
        cloud.len(),
        cols.join(",")
    );
    for i in 0..cloud.len() {
        let [x, y, z] = cloud.xyz[i];
        write!(out, "{x:.9} {y:.9} {z:.9}").unwrap();
        if let Some(rgb) = &cloud.rgb {
            let [r, g, b] = rgb[i];
            write!(out, " {r:.9} {g:.9} {b:.9}").unwrap();
        }
        if let Some(sem) = &cloud.sem {
            write!(out, " {}", sem[i]).unwrap();
        }
        if let Some(inst) = &cloud.inst {
            write!(out, " {}", inst[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_points(cloud: &PointCloud, path: &Path) -> Result<()> {
    std::fs::write(path, render(cloud)).map_err(|e| Error::io(path, e))
}

struct Header {
    n: usize,
    cols: Vec<String>,
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let fail = |msg: String| Error::parse(path, 1, msg);
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 {
        return Err(fail(format!(
            "header needs 4 fields 'cfs3d-points v1 n=<N> cols=<list>', found {}",
            tokens.len()
        )));
    }
    if tokens[0] != "cfs3d-points" {
        return Err(fail(format!("not a points file (leading token {:?})", tokens[0])));
    }
    if tokens[1] != "v1" {
        return Err(fail(format!("unsupported format version {:?} (reader supports v1)", tokens[1])));
    }
    let n = tokens[2]
        .strip_prefix("n=")
        .ok_or_else(|| fail(format!("expected n=<count>, found {:?}", tokens[2])))?
        .parse::<usize>()
        .map_err(|e| fail(format!("bad point count: {e}")))?;
    let cols: Vec<String> = tokens[3]
        .strip_prefix("cols=")
        .ok_or_else(|| fail(format!("expected cols=<list>, found {:?}", tokens[3])))?
        .split(',')
        .map(str::to_string)
        .collect();
    for c in &cols {
        if !ALLOWED.contains(&c.as_str()) {
            return Err(fail(format!("unknown column {c:?}")));
        }
    }
    for (i, c) in cols.iter().enumerate() {
        if cols[..i].contains(c) {
            return Err(fail(format!("duplicate column {c:?}")));
        }
    }
    for required in ["x", "y", "z"] {
        if !cols.iter().any(|c| c == required) {
            return Err(fail(format!("missing mandatory column {required:?}")));
        }
    }
    let rgb_count = ["r", "g", "b"]
        .iter()
        .filter(|r| cols.iter().any(|c| c == *r))
        .count();
    if rgb_count != 0 && rgb_count != 3 {
        return Err(fail("columns r,g,b must appear together".into()));
    }
    Ok(Header { n, cols })
}

pub fn load_points(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = parse_header(
        path,
        lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file".to_string()))?,
    )?;

    let has = |name: &str| header.cols.iter().any(|c| c == name);
    let mut xyz = Vec::with_capacity(header.n);
    let mut rgb = has("r").then(|| Vec::with_capacity(header.n));
    let mut sem = has("sem").then(|| Vec::with_capacity(header.n));
    let mut inst = has("inst").then(|| Vec::with_capacity(header.n));

    for row in 0..header.n {
        let line_no = row + 2;
        let line = lines.next().ok_or_else(|| {
            Error::parse(path, line_no, format!("expected {} rows, found {row}", header.n))
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != header.cols.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("{} values for {} columns", fields.len(), header.cols.len()),
            ));
        }
        let mut point = [0.0f64; 3];
        let mut color = [0.0f64; 3];
        for (col, field) in header.cols.iter().zip(&fields) {
            let float = |what: &str| -> Result<f64> {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, line_no, format!("bad {what} value {field:?}: {e}")))
            };
            match col.as_str() {
                "x" => point[0] = float("x")?,
                "y" => point[1] = float("y")?,
                "z" => point[2] = float("z")?,
                "r" => color[0] = float("r")?,
                "g" => color[1] = float("g")?,
                "b" => color[2] = float("b")?,
                label => {
                    let v = field.parse::<usize>().map_err(|e| {
                        Error::parse(path, line_no, format!("bad {label} label {field:?}: {e}"))
                    })?;
                    if label == "sem" {
                        sem.as_mut().expect("sem column").push(v);
                    } else {
                        inst.as_mut().expect("inst column").push(v);
                    }
                }
            }
        }
        xyz.push(point);
        if let Some(rgb) = rgb.as_mut() {
            rgb.push(color);
        }
    }
    if let Some(extra) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(Error::parse(
                path,
                header.n + 2,
                format!("header announced {} rows but more data follows", header.n),
            ));
        }
    }
    Ok(PointCloud { xyz, rgb, sem, inst })
}
