//! Planar geometry: points, convex polygons, Voronoi cells and the shape
//! metrics the surrogate model is trained on.

mod circles;
pub mod io;
mod metrics;
mod sampling;
mod voronoi;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use circles::{inscribed_circle, smallest_enclosing_circle};
pub use metrics::{compute_metrics, isotropy, MetricVector, METRIC_NAMES};
pub use sampling::sample_points;
pub use voronoi::voronoi_cells;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

impl Circle {
    /// Whether `p` lies inside, allowing a relative `slack` on the radius.
    pub fn contains(&self, p: Point2, slack: f64) -> bool {
        self.center.distance(p) <= self.radius * (1.0 + slack)
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
///
/// Construction validates the invariants, so every `Polygon` in the program
/// has at least three vertices, no repeated consecutive vertex and a strictly
/// positive turn at every corner.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("{n} vertices, need at least 3")));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidPolygon(format!("non-finite vertex {p:?}")));
        }
        let diam = max_pairwise_distance(&vertices);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if a.distance(b) <= 1e-12 * diam {
                return Err(Error::InvalidPolygon(format!("vertices {i} and {} coincide", (i + 1) % n)));
            }
            if (b - a).cross(c - b) <= 0.0 {
                return Err(Error::InvalidPolygon(format!(
                    "not strictly convex counter-clockwise at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        // A locally convex CCW loop can still wind more than once.
        let turning: f64 = (0..n)
            .map(|i| {
                let e0 = vertices[(i + 1) % n] - vertices[i];
                let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (turning - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::InvalidPolygon("self-intersecting vertex loop".into()));
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterator over the directed edges `(v_i, v_{i+1})`.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let mut area2 = 0.0;
        let mut acc = Point2::default();
        for w in self.vertices[1..].windows(2) {
            let (a, b) = (w[0] - o, w[1] - o);
            let cr = a.cross(b);
            area2 += cr;
            acc = acc + (a + b) * cr;
        }
        o + acc * (1.0 / (3.0 * area2))
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().copied().map(f).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Polygon> {
        self.map(|p| p * s)
    }

    pub fn translated(&self, t: Point2) -> Result<Polygon> {
        self.map(|p| p + t)
    }

    pub fn rotated(&self, angle: f64) -> Result<Polygon> {
        self.map(|p| p.rotated(angle))
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Polygon> {
        Polygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// Regular `n`-gon with circumradius `r` centred at the origin.
    pub fn regular(n: usize, r: f64) -> Result<Polygon> {
        Polygon::new(
            (0..n)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / n as f64;
                    Point2::new(r * t.cos(), r * t.sin())
                })
                .collect(),
        )
    }
}

fn max_pairwise_distance(points: &[Point2]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(a.distance(*b));
        }
    }
    best
}

/// Shoelace area.
pub fn area(p: &Polygon) -> f64 {
    let v = p.vertices();
    let o = v[0];
    0.5 * v[1..].windows(2).map(|w| (w[0] - o).cross(w[1] - o)).sum::<f64>()
}

/// Largest distance between two vertices.
pub fn diameter(p: &Polygon) -> f64 {
    max_pairwise_distance(p.vertices())
}

/// Minimum and maximum inner angle, in radians.
pub fn inner_angles(p: &Polygon) -> (f64, f64) {
    let v = p.vertices();
    let n = v.len();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        let e_in = v[i] - v[(i + n - 1) % n];
        let e_out = v[(i + 1) % n] - v[i];
        // exterior turn in (0, pi); inner angle is its supplement
        let turn = e_in.cross(e_out).atan2(e_in.dot(e_out));
        let inner = std::f64::consts::PI - turn;
        min = min.min(inner);
        max = max.max(inner);
    }
    (min, max)
}

/// All inner angles, in vertex order.
pub fn all_inner_angles(p: &Polygon) -> Vec<f64> {
    let v = p.vertices();
    let n = v.len();
    (0..n)
        .map(|i| {
            let e_in = v[i] - v[(i + n - 1) % n];
            let e_out = v[(i + 1) % n] - v[i];
            std::f64::consts::PI - e_in.cross(e_out).atan2(e_in.dot(e_out))
        })
        .collect()
}
