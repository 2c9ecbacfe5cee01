use std::collections::BTreeMap;
use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;

use poincare::fem::{
    assemble, element_matrices, poincare_constant, poincare_constant_with, smallest_positive_eigenpair,
    smallest_positive_eigenvalue, triangulate, EigenOptions, SparseSymmetric,
};
use poincare::geometry::{diameter, Point2, Polygon};

/// First positive zero of the Bessel function J₁.
const J11: f64 = 3.831_705_970_207_512;

/// Polynomial in barycentric coordinates: exponents -> coefficient.
type Bary = BTreeMap<[u32; 3], f64>;

fn mono(e: [u32; 3], c: f64) -> Bary {
    BTreeMap::from([(e, c)])
}

fn add(a: &Bary, b: &Bary) -> Bary {
    let mut out = a.clone();
    for (e, c) in b {
        *out.entry(*e).or_default() += c;
    }
    out
}

fn mul(a: &Bary, b: &Bary) -> Bary {
    let mut out = Bary::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            *out.entry([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]]).or_default() += ca * cb;
        }
    }
    out
}

fn derivative(p: &Bary, i: usize) -> Bary {
    let mut out = Bary::new();
    for (e, c) in p {
        if e[i] > 0 {
            let mut d = *e;
            d[i] -= 1;
            *out.entry(d).or_default() += c * f64::from(e[i]);
        }
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ∫_T l1^a l2^b l3^c = 2|T| a! b! c! / (a + b + c + 2)!
fn integrate(p: &Bary, area: f64) -> f64 {
    p.iter()
        .map(|(e, c)| c * 2.0 * area * factorial(e[0]) * factorial(e[1]) * factorial(e[2]) / factorial(e[0] + e[1] + e[2] + 2))
        .sum()
}

fn unit(i: usize) -> [u32; 3] {
    let mut e = [0; 3];
    e[i] = 1;
    e
}

/// Corner basis l_i(2 l_i − 1), then 4 l_i l_j on edges (0,1), (1,2), (2,0).
fn basis() -> Vec<Bary> {
    let mut b: Vec<Bary> = (0..3)
        .map(|i| {
            let mut sq = [0; 3];
            sq[i] = 2;
            add(&mono(sq, 2.0), &mono(unit(i), -1.0))
        })
        .collect();
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        let mut e = [0; 3];
        e[i] = 1;
        e[j] = 1;
        b.push(mono(e, 4.0));
    }
    b
}

/// Exact element matrices: gradients of the barycentric coordinates come from
/// inverting the affine map.
fn exact_matrices(c: [Point2; 3]) -> ([[f64; 6]; 6], [[f64; 6]; 6]) {
    let a = Matrix3::new(c[0].x, c[1].x, c[2].x, c[0].y, c[1].y, c[2].y, 1.0, 1.0, 1.0);
    let area = a.determinant().abs() / 2.0;
    let inv = a.try_inverse().unwrap();
    let grad = |i: usize| Vector3::new(inv[(i, 0)], inv[(i, 1)], 0.0);
    let phi = basis();
    let mut k = [[0.0; 6]; 6];
    let mut m = [[0.0; 6]; 6];
    for p in 0..6 {
        for q in 0..6 {
            m[p][q] = integrate(&mul(&phi[p], &phi[q]), area);
            for i in 0..3 {
                for j in 0..3 {
                    let g = grad(i).dot(&grad(j));
                    k[p][q] += g * integrate(&mul(&derivative(&phi[p], i), &derivative(&phi[q], j)), area);
                }
            }
        }
    }
    (k, m)
}

fn assert_matrices_match(c: [Point2; 3]) {
    let (k, m) = element_matrices(c);
    let (ke, me) = exact_matrices(c);
    let scale_k = ke.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let scale_m = me.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for p in 0..6 {
        for q in 0..6 {
            assert!((k[p][q] - ke[p][q]).abs() <= 1e-12 * scale_k, "K[{p}][{q}] {} vs {}", k[p][q], ke[p][q]);
            assert!((m[p][q] - me[p][q]).abs() <= 1e-12 * scale_m, "M[{p}][{q}] {} vs {}", m[p][q], me[p][q]);
        }
    }
}

#[test]
fn reference_element_matches_symbolic_integration() {
    let c = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    assert_matrices_match(c);
    // hand values on the reference triangle
    let (k, m) = element_matrices(c);
    assert_relative_eq!(k[0][0], 1.0, max_relative = 1e-13);
    assert_relative_eq!(m[0][0], 1.0 / 60.0, max_relative = 1e-13);
    assert_relative_eq!(m[3][3], 4.0 / 45.0, max_relative = 1e-13);
    assert_relative_eq!(m[0][1], -1.0 / 360.0, max_relative = 1e-13);
}

proptest! {
    #[test]
    fn element_matrices_are_exact(
        xs in prop::array::uniform3(-3.0f64..3.0),
        ys in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let c = [Point2::new(xs[0], ys[0]), Point2::new(xs[1], ys[1]), Point2::new(xs[2], ys[2])];
        let twice_area = (c[1] - c[0]).cross(c[2] - c[0]);
        prop_assume!(twice_area.abs() > 0.05);
        let c = if twice_area > 0.0 { c } else { [c[0], c[2], c[1]] };
        assert_matrices_match(c);
    }
}

/// Smallest positive generalized eigenvalue by a dense solve: reduce with the
/// Cholesky factor of M and take the second smallest eigenvalue.
fn dense_lambda1(k: &SparseSymmetric, m: &SparseSymmetric) -> f64 {
    let n = k.dim();
    let kd = DMatrix::from_fn(n, n, |r, c| k.get(r, c));
    let md = DMatrix::from_fn(n, n, |r, c| m.get(r, c));
    let l_inv = md.cholesky().unwrap().l().try_inverse().unwrap();
    let c = &l_inv * kd * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    assert!(ev[0].abs() < 1e-8 * ev[n - 1], "constant mode missing: {}", ev[0]);
    ev[1]
}

#[test]
fn lanczos_agrees_with_dense_solve() {
    let shapes = [
        Polygon::regular(5, 1.0).unwrap(),
        Polygon::rectangle(0.0, 0.0, 3.0, 1.0).unwrap(),
        Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.3), Point2::new(0.4, 1.1)]).unwrap(),
        Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, -0.2),
            Point2::new(1.6, 0.5),
            Point2::new(0.9, 1.4),
            Point2::new(-0.3, 0.8),
        ])
        .unwrap(),
    ];
    for p in &shapes {
        let mesh = triangulate(p, diameter(p) / 6.0).unwrap();
        let (k, m) = assemble(&mesh);
        assert!(k.dim() <= 1500, "oracle too large: {}", k.dim());
        let lanczos = smallest_positive_eigenvalue(&k, &m).unwrap();
        assert_relative_eq!(lanczos, dense_lambda1(&k, &m), max_relative = 1e-8);
    }
}

#[test]
fn identity_like_pencil() {
    // K = Q diag(0, 1, ..., 5) Qᵀ with Q's first column constant, M = I
    let n = 6;
    let seedmat = DMatrix::from_fn(n, n, |r, c| if c == 0 { 1.0 } else { ((r * 7 + c * 3) % 11) as f64 - 5.0 });
    let q = seedmat.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| i as f64));
    let kd = &q * d * q.transpose();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for r in 0..n {
        for c in r..n {
            kt.push((r, c, kd[(r, c)]));
            // same pattern as K, explicit zeros off the diagonal
            mt.push((r, c, if r == c { 1.0 } else { 0.0 }));
        }
    }
    let k = SparseSymmetric::from_upper_triplets(n, &kt).unwrap();
    let m = SparseSymmetric::from_upper_triplets(n, &mt).unwrap();
    let pair = smallest_positive_eigenpair(&k, &m, &EigenOptions::default()).unwrap();
    assert_relative_eq!(pair.lambda, 1.0, max_relative = 1e-10);
    assert_relative_eq!(dense_lambda1(&k, &m), 1.0, max_relative = 1e-10);
}

#[test]
fn scaling_law() {
    let unit = poincare_constant(&Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
    let big = poincare_constant(&Polygon::rectangle(0.0, 0.0, 2.0, 2.0).unwrap()).unwrap();
    assert_relative_eq!(big.lambda1, PI * PI / 4.0, max_relative = 1e-3);
    // h scales with the domain, so the discrete problem scales exactly
    assert_relative_eq!(big.lambda1 * 4.0, unit.lambda1, max_relative = 1e-9);
}

#[test]
fn rectangle_constant() {
    let r = poincare_constant(&Polygon::rectangle(0.0, 0.0, 2.0, 1.0).unwrap()).unwrap();
    assert_relative_eq!(r.c_p, 2.0 / PI, max_relative = 5e-3);
}

#[test]
fn quartic_convergence_on_the_square() {
    let sq = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
    let err = |div: f64| (poincare_constant_with(&sq, div).unwrap().lambda1 - PI * PI).abs();
    let ratio = err(10.0) / err(20.0);
    assert!(ratio >= 8.0, "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn triangles_obey_the_bessel_bound(
        b in (0.3f64..2.0, -0.5f64..0.5),
        c in (-0.5f64..1.5, 0.3f64..1.5),
    ) {
        let t = Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(b.0, b.1), Point2::new(c.0, c.1)]);
        prop_assume!(t.is_ok());
        let t = t.unwrap();
        let r = poincare_constant(&t).unwrap();
        prop_assert!(r.c_p <= diameter(&t) / J11 * (1.0 + 1e-2), "c_p {} bound {}", r.c_p, diameter(&t) / J11);
        prop_assert!(r.c_p <= diameter(&t) / PI);
    }
}
