//! Quadratic Lagrange element on a straight-sided triangle.
//!
//! Local degrees of freedom: the three corners, then the midpoints of edges
//! (0,1), (1,2), (2,0). In barycentric coordinates `l` the basis is
//! `l_i (2 l_i - 1)` at corners and `4 l_i l_j` at midpoints.

use super::mesh::signed_area;
use crate::geometry::Point2;

pub type ElementMatrix = [[f64; 6]; 6];

/// Edge midpoint dofs as (first corner, second corner).
const EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Degree-2 rule: edge midpoints, equal weights.
const DEGREE2: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Six-point degree-4 symmetric rule.
const DEGREE4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_9;
    const B1: f64 = 0.108_103_018_168_070_23;
    const W1: f64 = 0.223_381_589_678_011_47;
    const A2: f64 = 0.091_576_213_509_770_74;
    const B2: f64 = 0.816_847_572_980_458_5;
    const W2: f64 = 0.109_951_743_655_321_87;
    [
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

fn shape_values(l: [f64; 3]) -> [f64; 6] {
    let mut phi = [0.0; 6];
    for i in 0..3 {
        phi[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, &(i, j)) in EDGES.iter().enumerate() {
        phi[3 + k] = 4.0 * l[i] * l[j];
    }
    phi
}

fn shape_gradients(l: [f64; 3], grad_l: &[Point2; 3]) -> [Point2; 6] {
    let mut g = [Point2::default(); 6];
    for i in 0..3 {
        g[i] = grad_l[i] * (4.0 * l[i] - 1.0);
    }
    for (k, &(i, j)) in EDGES.iter().enumerate() {
        g[3 + k] = (grad_l[i] * l[j] + grad_l[j] * l[i]) * 4.0;
    }
    g
}

/// Stiffness `∫ ∇φ_a · ∇φ_b` and mass `∫ φ_a φ_b` on the triangle `corners`
/// (counter-clockwise).
pub fn element_matrices(corners: [Point2; 3]) -> (ElementMatrix, ElementMatrix) {
    let area = signed_area(corners);
    let [p0, p1, p2] = corners;
    let inv2a = 1.0 / (2.0 * area);
    // gradient of barycentric l_i: inward normal of the opposite edge over its height
    let perp = |e: Point2| Point2::new(-e.y, e.x) * inv2a;
    let grad_l = [perp(p2 - p1), perp(p0 - p2), perp(p1 - p0)];

    let mut stiffness = [[0.0; 6]; 6];
    for &(l, w) in &DEGREE2 {
        let g = shape_gradients(l, &grad_l);
        for a in 0..6 {
            for b in a..6 {
                stiffness[a][b] += w * area * g[a].dot(g[b]);
            }
        }
    }
    let mut mass = [[0.0; 6]; 6];
    for &(l, w) in &DEGREE4 {
        let phi = shape_values(l);
        for a in 0..6 {
            for b in a..6 {
                mass[a][b] += w * area * phi[a] * phi[b];
            }
        }
    }
    for a in 0..6 {
        for b in 0..a {
            stiffness[a][b] = stiffness[b][a];
            mass[a][b] = mass[b][a];
        }
    }
    (stiffness, mass)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn rules_integrate_constants() {
        assert_relative_eq!(DEGREE2.iter().map(|q| q.1).sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(DEGREE4.iter().map(|q| q.1).sum::<f64>(), 1.0, epsilon = 1e-15);
        for (l, _) in DEGREE4 {
            assert_relative_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn basis_is_nodal() {
        let nodes: [[f64; 3]; 6] = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for (k, l) in nodes.iter().enumerate() {
            let phi = shape_values(*l);
            for (j, v) in phi.iter().enumerate() {
                assert_relative_eq!(*v, if j == k { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rows_of_stiffness_sum_to_zero() {
        let tri = [Point2::new(0.3, -0.2), Point2::new(2.0, 0.4), Point2::new(0.7, 1.9)];
        let (k, m) = element_matrices(tri);
        for row in &k {
            assert!(row.iter().sum::<f64>().abs() < 1e-13);
        }
        let total: f64 = m.iter().flatten().sum();
        assert_relative_eq!(total, signed_area(tri), max_relative = 1e-14);
    }
}
