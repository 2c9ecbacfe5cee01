use rand::seq::SliceRandom;

use super::voronoi::clip;
use super::{Circle, Point2, Polygon};
use crate::seed;

/// Relative slack used when testing whether a point is inside a candidate
/// circle during Welzl's recursion.
const CONTAINS_SLACK: f64 = 1e-12;
const WELZL_SHUFFLE_SEED: u64 = 0x5765_6c7a_6c00;

/// Minimal enclosing circle of the polygon's vertices (Welzl's algorithm).
///
/// The vertex order is shuffled with a fixed seed, which keeps the expected
/// linear running time while making the result reproducible.
pub fn smallest_enclosing_circle(p: &Polygon) -> Circle {
    let mut pts = p.vertices().to_vec();
    pts.shuffle(&mut seed::rng(WELZL_SHUFFLE_SEED));
    welzl(&pts)
}

fn welzl(pts: &[Point2]) -> Circle {
    let mut c = Circle {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if !c.contains(pts[i], CONTAINS_SLACK) {
            c = with_one_boundary(&pts[..i], pts[i]);
        }
    }
    c
}

fn with_one_boundary(pts: &[Point2], q: Point2) -> Circle {
    let mut c = Circle { center: q, radius: 0.0 };
    for j in 0..pts.len() {
        if !c.contains(pts[j], CONTAINS_SLACK) {
            c = with_two_boundary(&pts[..j], q, pts[j]);
        }
    }
    c
}

fn with_two_boundary(pts: &[Point2], q1: Point2, q2: Point2) -> Circle {
    let mut c = diametral(q1, q2);
    for &p in pts {
        if !c.contains(p, CONTAINS_SLACK) {
            c = circumcircle(q1, q2, p);
        }
    }
    c
}

fn diametral(a: Point2, b: Point2) -> Circle {
    Circle {
        center: a.midpoint(b),
        radius: 0.5 * a.distance(b),
    }
}

fn circumcircle(a: Point2, b: Point2, c: Point2) -> Circle {
    let (ab, ac) = (b - a, c - a);
    let d = 2.0 * ab.cross(ac);
    if d.abs() <= f64::EPSILON * ab.norm() * ac.norm() {
        // collinear: the widest pair spans the circle
        return [diametral(a, b), diametral(a, c), diametral(b, c)]
            .into_iter()
            .max_by(|x, y| x.radius.total_cmp(&y.radius))
            .unwrap();
    }
    let (b2, c2) = (ab.dot(ab), ac.dot(ac));
    let offset = Point2::new(ac.y * b2 - ab.y * c2, ab.x * c2 - ac.x * b2) * (1.0 / d);
    Circle {
        center: a + offset,
        radius: offset.norm(),
    }
}

/// Largest inscribed circle (Chebyshev centre) of a convex polygon.
///
/// Bisects on the radius `r`: the centres of circles of radius `r` that fit
/// inside the polygon form the polygon shrunk inward by `r` along every edge
/// line, so `r` is feasible exactly when that shrunken polygon is non-empty.
/// The returned centre is the centroid of the last non-empty region and the
/// radius is that centre's distance to the nearest edge line.
pub fn inscribed_circle(p: &Polygon) -> Circle {
    // inward unit normal and offset: n · x >= c on the polygon
    let lines: Vec<(Point2, f64)> = p
        .edges()
        .map(|(a, b)| {
            let e = b - a;
            let n = Point2::new(-e.y, e.x) * (1.0 / e.norm());
            (n, n.dot(a))
        })
        .collect();
    let shrink = |r: f64| -> Vec<Point2> {
        let mut region = p.vertices().to_vec();
        for &(n, c) in &lines {
            // n · x >= c + r  <=>  (-n) · x <= -(c + r)
            region = clip(&region, n * -1.0, -(c + r));
            if region.is_empty() {
                break;
            }
        }
        region
    };
    let dist = |x: Point2| lines.iter().map(|&(n, c)| n.dot(x) - c).fold(f64::INFINITY, f64::min);

    let mut lo = 0.0;
    let mut hi = 0.5 * super::diameter(p);
    let mut best = p.vertices().to_vec();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let region = shrink(mid);
        if region.is_empty() {
            hi = mid;
        } else {
            lo = mid;
            best = region;
        }
    }
    let inv = 1.0 / best.len() as f64;
    let center = best.iter().fold(Point2::default(), |acc, &v| acc + v) * inv;
    Circle {
        center,
        radius: dist(center).max(0.0),
    }
}
