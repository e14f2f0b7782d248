//! Plain-text point files: one point per line, whitespace-separated fields,
//! `#` lines and blank lines ignored, dimension taken from the first data line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use acpd_core::PointSet;
use anyhow::{bail, Context, Result};
use serde::Serialize;

pub fn parse_points(text: &str) -> Result<PointSet> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let start = coords.len();
        for field in line.split_whitespace() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("line {lineno}: cannot parse '{field}' as a number"))?;
            if !v.is_finite() {
                bail!("line {lineno}: non-finite value '{field}'");
            }
            coords.push(v);
        }
        let n = coords.len() - start;
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => bail!("line {lineno}: expected {d} fields, found {n}"),
            Some(_) => {}
        }
    }
    let dim = dim.context("no points found")?;
    Ok(PointSet::new(dim, coords)?)
}

pub fn format_points(points: &PointSet) -> String {
    let mut s = String::with_capacity(points.coords().len() * 24);
    for p in points.iter() {
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            // Display of f64 is the shortest string that round-trips.
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_points(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_points(path: &Path, points: &PointSet) -> Result<()> {
    fs::write(path, format_points(points)).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
