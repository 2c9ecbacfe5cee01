//! Bounded Voronoi cells by per-site half-plane intersection.
//!
//! A site's cell is bounded exactly when the site lies strictly inside the
//! convex hull of all sites, so hull sites are skipped up front. Each
//! remaining cell is cut out of a box by the perpendicular bisectors to every
//! other site; if the result still touches the box, the box was too small and
//! the cut is repeated with a larger one.

use super::{Point2, Polygon};
use crate::error::{Error, Result};

/// Vertices closer than this fraction of the cell diameter are merged.
const MERGE_TOL: f64 = 1e-10;
/// A vertex whose adjacent edges turn by less than this (sine of the turn
/// angle) is dropped as collinear.
const COLLINEAR_TOL: f64 = 1e-12;
const MAX_BOX_GROWTH: usize = 60;

/// The bounded Voronoi cells of `points`, in site order.
pub fn voronoi_cells(points: &[Point2]) -> Result<Vec<Polygon>> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 sites, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite site {p:?}")));
    }
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateInput("all sites are collinear".into()));
    }
    let (lo, hi) = bounding_box(points);
    let span = (hi.x - lo.x).max(hi.y - lo.y);
    for (i, a) in points.iter().enumerate() {
        if points[i + 1..].iter().any(|b| a.distance(*b) <= 1e-14 * span) {
            return Err(Error::DegenerateInput(format!("site {i} is duplicated")));
        }
    }

    let mut cells = Vec::new();
    for (i, &site) in points.iter().enumerate() {
        if !strictly_inside_hull(&hull, site, span) {
            continue;
        }
        if let Some(cell) = bounded_cell(points, i, lo, hi, span) {
            cells.push(cell);
        }
    }
    Ok(cells)
}

fn bounded_cell(points: &[Point2], i: usize, lo: Point2, hi: Point2, span: f64) -> Option<Polygon> {
    let site = points[i];
    let mut margin = span;
    for _ in 0..MAX_BOX_GROWTH {
        let bx = [
            Point2::new(lo.x - margin, lo.y - margin),
            Point2::new(hi.x + margin, lo.y - margin),
            Point2::new(hi.x + margin, hi.y + margin),
            Point2::new(lo.x - margin, hi.y + margin),
        ];
        let mut cell = bx.to_vec();
        for (j, &other) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let normal = other - site;
            let offset = normal.dot(site.midpoint(other));
            cell = clip(&cell, normal, offset);
            if cell.is_empty() {
                return None;
            }
        }
        let limit = margin * (1.0 - 1e-9);
        let touches_box = cell.iter().any(|p| {
            p.x <= lo.x - limit || p.x >= hi.x + limit || p.y <= lo.y - limit || p.y >= hi.y + limit
        });
        if !touches_box {
            return Polygon::new(clean(cell)).ok();
        }
        margin *= 4.0;
    }
    None
}

/// Sutherland-Hodgman clip of a convex polygon to `normal · x <= offset`.
pub(crate) fn clip(poly: &[Point2], normal: Point2, offset: f64) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let fa = normal.dot(a) - offset;
        let fb = normal.dot(b) - offset;
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Merge near-coincident vertices and drop collinear ones.
fn clean(mut v: Vec<Point2>) -> Vec<Point2> {
    let diam = v
        .iter()
        .flat_map(|a| v.iter().map(move |b| a.distance(*b)))
        .fold(0.0, f64::max);
    let tol = MERGE_TOL * diam;
    loop {
        let n = v.len();
        if n < 3 {
            return v;
        }
        if let Some(k) = (0..n).find(|&k| v[k].distance(v[(k + 1) % n]) <= tol) {
            let merged = v[k].midpoint(v[(k + 1) % n]);
            v[k] = merged;
            v.remove((k + 1) % n);
            continue;
        }
        let flat = (0..n).find(|&k| {
            let a = v[(k + n - 1) % n];
            let b = v[k];
            let c = v[(k + 1) % n];
            let (e0, e1) = (b - a, c - b);
            e0.cross(e1) <= COLLINEAR_TOL * e0.norm() * e1.norm()
        });
        match flat {
            Some(k) => {
                v.remove(k);
            }
            None => return v,
        }
    }
}

fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub(crate) fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - b) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn strictly_inside_hull(hull: &[Point2], p: Point2, span: f64) -> bool {
    let n = hull.len();
    (0..n).all(|k| {
        let a = hull[k];
        let b = hull[(k + 1) % n];
        (b - a).cross(p - a) > 1e-12 * span * span
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::geometry::{area, sample_points};

    #[test]
    fn square_corners_have_no_bounded_cell() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(x, y)| Point2::new(x, y));
        assert!(voronoi_cells(&pts).unwrap().is_empty());
    }

    #[test]
    fn centre_of_square_gets_a_diamond() {
        let pts = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (0.0, 0.0)]
            .map(|(x, y)| Point2::new(x, y));
        let cells = voronoi_cells(&pts).unwrap();
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        assert_eq!(cell.len(), 4);
        for target in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
            let t = Point2::new(target.0, target.1);
            assert!(cell.vertices().iter().any(|v| v.distance(t) < 1e-12), "missing {t:?}");
        }
        assert_relative_eq!(area(cell), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_sites_rejected() {
        let pts: Vec<_> = (0..6).map(|k| Point2::new(k as f64, 2.0 * k as f64)).collect();
        assert!(matches!(voronoi_cells(&pts), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn random_cells_are_valid_and_fewer_than_sites() {
        let pts = sample_points(100, 1.0, 42).unwrap();
        let cells = voronoi_cells(&pts).unwrap();
        assert!(cells.len() < pts.len());
        assert!((75..=95).contains(&cells.len()), "{} cells", cells.len());
        for c in &cells {
            assert!(Polygon::new(c.vertices().to_vec()).is_ok());
        }
    }

    #[test]
    fn cell_vertices_are_equidistant_to_three_sites() {
        let pts = sample_points(60, 1.0, 5).unwrap();
        for cell in voronoi_cells(&pts).unwrap() {
            for v in cell.vertices() {
                let mut d: Vec<f64> = pts.iter().map(|p| p.distance(*v)).collect();
                d.sort_by(f64::total_cmp);
                assert_relative_eq!(d[0], d[2], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn determinism() {
        let pts = sample_points(80, 1.0, 9).unwrap();
        assert_eq!(voronoi_cells(&pts).unwrap(), voronoi_cells(&pts).unwrap());
    }
}
