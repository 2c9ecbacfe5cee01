//! Shape metrics of a convex polygon.
//!
//! For convex polygons the kernel is the polygon itself, so kernel area,
//! kernel-area ratio and shape regularity collapse onto AR, 1 and CR and are
//! not stored.

use serde::{Deserialize, Serialize};

use super::{area, inner_angles, smallest_enclosing_circle, inscribed_circle, Polygon};

/// Column labels, in the order of [`MetricVector::to_array`].
pub const METRIC_NAMES: [&str; 13] = [
    "IC", "CC", "CR", "AR", "APR", "SE", "sSE", "ER", "MPD", "sMPD", "MA", "MX", "ISO",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    /// Circumscribed (minimal enclosing) circle radius.
    pub cc: f64,
    /// Inscribed circle radius.
    pub ic: f64,
    /// `ic / cc`.
    pub cr: f64,
    /// Area.
    pub ar: f64,
    /// Area over squared perimeter; at most `1 / (4π)`.
    pub apr: f64,
    /// Shortest edge.
    pub se: f64,
    /// Shortest edge over the enclosing-circle diameter `2 cc`.
    pub sse: f64,
    /// Shortest edge over longest edge.
    pub er: f64,
    /// Minimum distance between any two vertices.
    pub mpd: f64,
    /// `mpd` over the enclosing-circle diameter `2 cc`.
    pub smpd: f64,
    /// Minimum inner angle (radians).
    pub ma: f64,
    /// Maximum inner angle (radians).
    pub mx: f64,
    /// Ratio of the smallest to the largest eigenvalue of the covariance matrix.
    pub iso: f64,
}

impl MetricVector {
    pub fn to_array(&self) -> [f64; 13] {
        [
            self.ic, self.cc, self.cr, self.ar, self.apr, self.se, self.sse, self.er, self.mpd,
            self.smpd, self.ma, self.mx, self.iso,
        ]
    }

    /// Dimensionless fields that must lie in `[0, 1]`.
    pub fn ratios(&self) -> [(&'static str, f64); 6] {
        [
            ("CR", self.cr),
            ("APR", self.apr),
            ("sSE", self.sse),
            ("ER", self.er),
            ("sMPD", self.smpd),
            ("ISO", self.iso),
        ]
    }
}

/// Isotropy: `λ_min / λ_max` of `(1/AR) ∫_P (x - x̄)(x - x̄)ᵀ dx`.
///
/// The second moments are integrated exactly over a fan triangulation from
/// the first vertex, with coordinates taken relative to that vertex.
pub fn isotropy(p: &Polygon) -> f64 {
    let (cxx, cxy, cyy) = covariance(p);
    let mean = 0.5 * (cxx + cyy);
    let rad = (0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy).sqrt();
    let (lo, hi) = (mean - rad, mean + rad);
    (lo / hi).clamp(0.0, 1.0)
}

fn covariance(p: &Polygon) -> (f64, f64, f64) {
    let v = p.vertices();
    let o = v[0];
    let (mut a, mut mx, mut my, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for w in v[1..].windows(2) {
        // triangle (0, b, c) in shifted coordinates
        let (b, c) = (w[0] - o, w[1] - o);
        let t = 0.5 * b.cross(c);
        let (sx, sy) = (b.x + c.x, b.y + c.y);
        a += t;
        mx += t * sx / 3.0;
        my += t * sy / 3.0;
        // ∫ x xᵀ over a triangle = A/12 (Σ p pᵀ + s sᵀ); the origin vertex adds nothing
        sxx += t / 12.0 * (b.x * b.x + c.x * c.x + sx * sx);
        sxy += t / 12.0 * (b.x * b.y + c.x * c.y + sx * sy);
        syy += t / 12.0 * (b.y * b.y + c.y * c.y + sy * sy);
    }
    let (xb, yb) = (mx / a, my / a);
    (sxx / a - xb * xb, sxy / a - xb * yb, syy / a - yb * yb)
}

/// All stored metrics of `p`.
pub fn compute_metrics(p: &Polygon) -> MetricVector {
    let cc = smallest_enclosing_circle(p).radius;
    let ic = inscribed_circle(p).radius;
    let ar = area(p);
    let perimeter = p.perimeter();
    let (se, le) = p
        .edges()
        .map(|(a, b)| a.distance(b))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));
    let v = p.vertices();
    let mpd = v
        .iter()
        .enumerate()
        .flat_map(|(i, a)| v[i + 1..].iter().map(move |b| a.distance(*b)))
        .fold(f64::INFINITY, f64::min);
    let (ma, mx) = inner_angles(p);
    MetricVector {
        cc,
        ic,
        cr: ic / cc,
        ar,
        apr: ar / (perimeter * perimeter),
        se,
        sse: se / (2.0 * cc),
        er: se / le,
        mpd,
        smpd: mpd / (2.0 * cc),
        ma,
        mx,
        iso: isotropy(p),
    }
}
