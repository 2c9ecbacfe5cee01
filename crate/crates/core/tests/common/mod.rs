//! Brute-force geometry oracles shared by the integration tests.

#![allow(dead_code)]

use poincare::geometry::{Point2, Polygon};
use poincare::seed;
use rand::Rng;

/// Convex hull of up to 10 random points, rejecting slivers the polygon
/// constructor refuses.
pub fn random_convex_polygons(count: usize, seed_value: u64) -> Vec<Polygon> {
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.random_range(3..=10);
        let pts: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        if let Ok(p) = Polygon::new(hull(&pts)) {
            out.push(p);
        }
    }
    out
}

/// Monotone-chain hull, counter-clockwise, collinear points dropped.
pub fn hull(points: &[Point2]) -> Vec<Point2> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: Point2, a: Point2, b: Point2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Point2> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Smallest circle through two or three vertices that covers all of them.
pub fn brute_enclosing_radius(v: &[Point2]) -> f64 {
    let covers = |c: Point2, r: f64| v.iter().all(|p| (p.x - c.x).hypot(p.y - c.y) <= r * (1.0 + 1e-12));
    let mut best = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let c = Point2::new((v[i].x + v[j].x) / 2.0, (v[i].y + v[j].y) / 2.0);
            let r = (v[i].x - c.x).hypot(v[i].y - c.y);
            if r < best && covers(c, r) {
                best = r;
            }
            for k in j + 1..v.len() {
                let (a, b, cc) = (v[i], v[j], v[k]);
                let d = 2.0 * (a.x * (b.y - cc.y) + b.x * (cc.y - a.y) + cc.x * (a.y - b.y));
                if d.abs() < 1e-14 {
                    continue;
                }
                let sa = a.x * a.x + a.y * a.y;
                let sb = b.x * b.x + b.y * b.y;
                let sc = cc.x * cc.x + cc.y * cc.y;
                let c = Point2::new(
                    (sa * (b.y - cc.y) + sb * (cc.y - a.y) + sc * (a.y - b.y)) / d,
                    (sa * (cc.x - b.x) + sb * (a.x - cc.x) + sc * (b.x - a.x)) / d,
                );
                let r = (a.x - c.x).hypot(a.y - c.y);
                if r < best && covers(c, r) {
                    best = r;
                }
            }
        }
    }
    best
}

/// Largest inscribed radius by enumerating medial-axis vertices: points
/// equidistant from three edge lines that lie inside every half-plane.
pub fn brute_inscribed_radius(v: &[Point2]) -> f64 {
    let n = v.len();
    // outward unit normal and offset of each edge line: n·x <= c inside
    let lines: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len = dx.hypot(dy);
            let (nx, ny) = (dy / len, -dx / len);
            (nx, ny, nx * a.x + ny * a.y)
        })
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let m = nalgebra::Matrix3::new(
                    lines[i].0, lines[i].1, 1.0, lines[j].0, lines[j].1, 1.0, lines[k].0, lines[k].1, 1.0,
                );
                let Some(sol) = m.lu().solve(&nalgebra::Vector3::new(lines[i].2, lines[j].2, lines[k].2)) else {
                    continue;
                };
                let (x, y, r) = (sol[0], sol[1], sol[2]);
                let inside = lines.iter().all(|l| l.0 * x + l.1 * y + r <= l.2 + 1e-12);
                if inside && r > best {
                    best = r;
                }
            }
        }
    }
    best
}

pub fn brute_diameter(v: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for a in v {
        for b in v {
            d = d.max((a.x - b.x).hypot(a.y - b.y));
        }
    }
    d
}
