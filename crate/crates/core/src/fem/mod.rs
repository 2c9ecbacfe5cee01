//! Poincaré constants of convex polygons from the Neumann Laplace
//! eigenproblem `-Δu = λu`, `∂u/∂n = 0`.
//!
//! For a zero-mean function on a convex domain the best constant in
//! `‖u‖ ≤ C ‖∇u‖` is `C = 1/√λ₁`, with `λ₁` the smallest positive Neumann
//! eigenvalue. It is approximated with quadratic Lagrange elements on a mesh
//! whose triangles are at most one twentieth of the polygon diameter.

mod eigen;
mod element;
mod mesh;
mod sparse;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{diameter, Polygon};

pub use eigen::{smallest_positive_eigenpair, smallest_positive_eigenvalue, EigenOptions, Eigenpair};
pub use element::{element_matrices, ElementMatrix};
pub use mesh::{triangulate, TriMesh};
pub use sparse::{reverse_cuthill_mckee, SkylineCholesky, SparseSymmetric};

/// Default ratio between polygon diameter and mesh size.
pub const MESH_DIVISOR: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda1: f64,
    /// `1 / √λ₁`.
    pub c_p: f64,
    pub dof_count: usize,
    pub h_used: f64,
    /// Relative eigen-residual of the returned pair.
    pub residual: f64,
    /// Rounding floor of `residual`; see [`Eigenpair::residual_floor`].
    pub residual_floor: f64,
}

/// Global stiffness and mass matrices over the P2 space of `mesh`, with
/// natural (Neumann) boundary conditions.
pub fn assemble(mesh: &TriMesh) -> (SparseSymmetric, SparseSymmetric) {
    let n = mesh.dof_count();
    let cap = 21 * mesh.triangles.len();
    let mut kt = Vec::with_capacity(cap);
    let mut mt = Vec::with_capacity(cap);
    for t in 0..mesh.triangles.len() {
        let dofs = mesh.element_dofs(t);
        let (ke, me) = element_matrices(mesh.corners(t));
        for a in 0..6 {
            for b in 0..6 {
                let (i, j) = (dofs[a], dofs[b]);
                if i <= j {
                    kt.push((i, j, ke[a][b]));
                    mt.push((i, j, me[a][b]));
                }
            }
        }
    }
    // Every dof index comes from the mesh, so the triplets are in range.
    let k = SparseSymmetric::from_upper_triplets(n, &kt).expect("mesh dofs in range");
    let m = SparseSymmetric::from_upper_triplets(n, &mt).expect("mesh dofs in range");
    (k, m)
}

/// Poincaré constant of `p` on a mesh of size `diameter / MESH_DIVISOR`.
pub fn poincare_constant(p: &Polygon) -> Result<EigenResult> {
    poincare_constant_with(p, MESH_DIVISOR)
}

pub fn poincare_constant_with(p: &Polygon, mesh_divisor: f64) -> Result<EigenResult> {
    let h = diameter(p) / mesh_divisor;
    let mesh = triangulate(p, h)?;
    let (k, m) = assemble(&mesh);
    let pair = smallest_positive_eigenpair(&k, &m, &EigenOptions::default())?;
    Ok(EigenResult {
        lambda1: pair.lambda,
        c_p: 1.0 / pair.lambda.sqrt(),
        dof_count: mesh.dof_count(),
        h_used: h,
        residual: pair.residual,
        residual_floor: pair.residual_floor,
    })
}

/// One row of the labels file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub polygon_id: usize,
    pub lambda1: f64,
    pub c_p: f64,
    pub dof_count: usize,
    pub h_used: f64,
}

impl LabelRow {
    pub fn new(polygon_id: usize, r: &EigenResult) -> Self {
        LabelRow {
            polygon_id,
            lambda1: r.lambda1,
            c_p: r.c_p,
            dof_count: r.dof_count,
            h_used: r.h_used,
        }
    }
}

pub const LABEL_HEADER: [&str; 5] = ["polygon_id", "lambda1", "c_p", "dof_count", "h_used"];

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    crate::csvio::write_rows(path, &LABEL_HEADER, rows)
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    crate::csvio::read_rows(path, &LABEL_HEADER)
}
