use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point2, Polygon};

/// Triangulation with quadratic (P2) degrees of freedom.
///
/// `nodes` holds the triangle corners first, followed by one midpoint node
/// per mesh edge; `edge_midpoints` maps the sorted corner pair of each edge to
/// its midpoint node.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub edge_midpoints: HashMap<(usize, usize), usize>,
    /// Number of corner nodes; midpoint nodes follow them in `nodes`.
    pub corner_count: usize,
}

impl TriMesh {
    pub fn dof_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn midpoint(&self, a: usize, b: usize) -> usize {
        self.edge_midpoints[&edge_key(a, b)]
    }

    /// The six P2 degrees of freedom of triangle `t`: corners, then the
    /// midpoints of edges (0,1), (1,2), (2,0).
    pub fn element_dofs(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        [a, b, c, self.midpoint(a, b), self.midpoint(b, c), self.midpoint(c, a)]
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|i| self.nodes[i])
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_diameter(self.corners(t)))
            .fold(0.0, f64::max)
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_min_angle(self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| signed_area(self.corners(t))).sum()
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area([a, b, c]: [Point2; 3]) -> f64 {
    0.5 * (b - a).cross(c - a)
}

fn triangle_diameter([a, b, c]: [Point2; 3]) -> f64 {
    a.distance(b).max(b.distance(c)).max(c.distance(a))
}

fn triangle_min_angle([a, b, c]: [Point2; 3]) -> f64 {
    let angle = |p: Point2, q: Point2, r: Point2| {
        let (u, v) = (q - p, r - p);
        u.cross(v).abs().atan2(u.dot(v))
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}

/// Fan triangulation from the area centroid, refined by uniform 4-way
/// midpoint subdivision until every triangle diameter is at most `h_target`.
///
/// Subdivision produces similar triangles, so the minimum angle of the result
/// is the minimum angle of the initial fan.
pub fn triangulate(p: &Polygon, h_target: f64) -> Result<TriMesh> {
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h_target}")));
    }
    let mut nodes: Vec<Point2> = p.vertices().to_vec();
    let n = nodes.len();
    nodes.push(p.centroid());
    let mut triangles: Vec<[usize; 3]> = (0..n).map(|i| [n, i, (i + 1) % n]).collect();

    let fan_diameter = triangles
        .iter()
        .map(|t| triangle_diameter(t.map(|i| nodes[i])))
        .fold(0.0, f64::max);
    let mut levels = 0;
    while fan_diameter / f64::from(1u32 << levels) > h_target {
        levels += 1;
    }

    for _ in 0..levels {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point2>| -> usize {
            *mids.entry(edge_key(a, b)).or_insert_with(|| {
                nodes.push(nodes[a].midpoint(nodes[b]));
                nodes.len() - 1
            })
        };
        let mut refined = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            refined.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        triangles = refined;
    }

    let corner_count = nodes.len();
    let mut edge_midpoints = HashMap::with_capacity(3 * triangles.len());
    for &[a, b, c] in &triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edge_midpoints.entry(edge_key(u, v)).or_insert_with(|| {
                nodes.push(nodes[u].midpoint(nodes[v]));
                nodes.len() - 1
            });
        }
    }

    Ok(TriMesh {
        nodes,
        triangles,
        edge_midpoints,
        corner_count,
    })
}
