//! Plain-text polygon files.
//!
//! One polygon per line, `x1 y1 x2 y2 ...` in counter-clockwise order, each
//! coordinate printed with 17 significant digits. Lines starting with `#`
//! carry provenance and are skipped on read; the polygon id is the zero-based
//! index among the non-comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point2, Polygon};
use crate::error::{Error, Result};

pub fn format_polygon(p: &Polygon) -> String {
    let mut line = String::new();
    for (k, v) in p.vertices().iter().enumerate() {
        if k > 0 {
            line.push(' ');
        }
        write!(line, "{:.16e} {:.16e}", v.x, v.y).unwrap();
    }
    line
}

pub fn write_polygons(path: &Path, polygons: &[Polygon], header: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    for (key, value) in header {
        writeln!(out, "# {key}={value}").unwrap();
    }
    for p in polygons {
        out.push_str(&format_polygon(p));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn parse_polygons(text: &str, path: &Path) -> Result<Vec<Polygon>> {
    let mut polygons = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let coords = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        if coords.len() % 2 != 0 {
            return Err(Error::parse(path, lineno + 1, "odd number of coordinates"));
        }
        let vertices = coords.chunks(2).map(|c| Point2::new(c[0], c[1])).collect();
        let polygon = Polygon::new(vertices).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        polygons.push(polygon);
    }
    Ok(polygons)
}

pub fn read_polygons(path: &Path) -> Result<Vec<Polygon>> {
    let text = fs::read_to_string(path)?;
    parse_polygons(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_points, voronoi_cells};

    #[test]
    fn round_trip_is_bit_exact() {
        let cells = voronoi_cells(&sample_points(40, 1.0, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cells.txt");
        write_polygons(&path, &cells, &[("seed", "1".into())]).unwrap();
        assert_eq!(read_polygons(&path).unwrap(), cells);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_polygons("# x\n0 0 1 0 0 1\n0 0 1 zero 0 1\n", Path::new("p.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_polygons("0 0 1 0 0\n", Path::new("p.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn seventeen_significant_digits() {
        let p = Polygon::rectangle(0.0, 0.0, 1.0 / 3.0, 1.0).unwrap();
        let line = format_polygon(&p);
        assert!(line.contains("3.3333333333333331e-1"), "{line}");
    }
}
