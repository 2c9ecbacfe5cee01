//! Smallest positive eigenvalue of the pencil `K u = λ M u` whose stiffness
//! kernel is the constant vector.
//!
//! Shift-invert Lanczos: the operator `T = (K + σM)⁻¹ M` is self-adjoint in
//! the `M` inner product and maps the eigenvalue `λ` to `1 / (λ + σ)`, so the
//! wanted eigenvalue becomes the dominant one once the constant mode
//! (`1 / σ`) is projected out. Every Lanczos vector is kept `M`-orthogonal to
//! the constants and fully reorthogonalised; when the Krylov space fills up
//! without meeting the residual target, the method restarts from the best
//! Ritz vector.

use nalgebra::{DMatrix, SymmetricEigen};

use super::sparse::{SkylineCholesky, SparseSymmetric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Target for `‖K u − λ M u‖ / (λ ‖M u‖)`, raised to the rounding floor
    /// of that quantity when the floor is higher.
    pub tolerance: f64,
    /// Cap on operator applications, as a multiple of the dimension.
    pub iteration_factor: usize,
    /// Krylov dimension between restarts.
    pub krylov_dim: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-8,
            iteration_factor: 10,
            krylov_dim: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    /// `M`-normalised eigenvector, `M`-orthogonal to the constants.
    pub vector: Vec<f64>,
    /// `‖K u − λ M u‖ / (λ ‖M u‖)`.
    pub residual: f64,
    /// Rounding error bound of `residual` in double precision. Exceeds the
    /// tolerance only on badly conditioned meshes.
    pub residual_floor: f64,
    pub iterations: usize,
}

/// Smallest positive eigenvalue of `K u = λ M u`.
pub fn smallest_positive_eigenvalue(k: &SparseSymmetric, m: &SparseSymmetric) -> Result<f64> {
    smallest_positive_eigenpair(k, m, &EigenOptions::default()).map(|e| e.lambda)
}

pub fn smallest_positive_eigenpair(
    k: &SparseSymmetric,
    m: &SparseSymmetric,
    opts: &EigenOptions,
) -> Result<Eigenpair> {
    let n = k.dim();
    if n < 6 || m.dim() != n {
        return Err(Error::InvalidArgument(format!(
            "need matching matrices of dimension >= 6, got {n} and {}",
            m.dim()
        )));
    }

    let ones = vec![1.0; n];
    let m_ones = m.mul_vec(&ones);
    let total_mass: f64 = m_ones.iter().sum();
    if !(total_mass > 0.0) {
        return Err(Error::InvalidArgument("mass matrix is not positive on constants".into()));
    }
    // Removes the constant component: x -= (1ᵀ M x / 1ᵀ M 1) 1.
    let deflate = |x: &mut [f64]| {
        let c = dot(&m_ones, x) / total_mass;
        x.iter_mut().for_each(|v| *v -= c);
    };

    // 1ᵀM1 is the domain area, and for compact shapes λ₁ is of order
    // 10 / area, so this shift sits roughly a hundred times below λ₁.
    let sigma = 0.1 / total_mass;
    let shifted = k.add_scaled(sigma, m)?;
    let factor = SkylineCholesky::factor(&shifted)?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = factor.solve(&m.mul_vec(x));
        deflate(&mut y);
        y
    };

    let cap = opts.iteration_factor * n;
    let krylov = opts.krylov_dim.min(n - 1).max(2);
    let mut start: Vec<f64> = (0..n).map(start_component).collect();
    let mut applications = 0;
    let mut best: Option<Eigenpair> = None;

    while applications < cap {
        deflate(&mut start);
        let (basis, alpha, beta) = lanczos(m, &apply, &deflate, &start, krylov, &mut applications);
        let steps = alpha.len();
        let mut t = DMatrix::<f64>::zeros(steps, steps);
        for j in 0..steps {
            t[(j, j)] = alpha[j];
            if j + 1 < steps {
                t[(j, j + 1)] = beta[j];
                t[(j + 1, j)] = beta[j];
            }
        }
        let eig = SymmetricEigen::new(t);
        let top = eig.eigenvalues.imax();
        let s = eig.eigenvectors.column(top);

        let mut u = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            let sj = s[j];
            u.iter_mut().zip(q).for_each(|(ui, qi)| *ui += sj * qi);
        }
        deflate(&mut u);
        let norm = m.bilinear(&u, &u).sqrt();
        u.iter_mut().for_each(|v| *v /= norm);

        // Rayleigh quotient of the Ritz vector is more accurate than 1/θ - σ.
        let lambda = k.bilinear(&u, &u) / m.bilinear(&u, &u);
        let residual = relative_residual(k, m, &u, lambda);
        let floor = residual_floor(k, m, &u, lambda);
        let candidate = Eigenpair {
            lambda,
            vector: u,
            residual,
            residual_floor: floor,
            iterations: applications,
        };
        // below the rounding floor the residual is noise and cannot shrink further
        if residual <= opts.tolerance.max(floor) && lambda > 0.0 {
            return Ok(candidate);
        }
        start = candidate.vector.clone();
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(candidate);
        }
        if steps < krylov {
            // invariant subspace found but residual still large: nothing more to gain
            break;
        }
    }
    let best = best.expect("at least one Lanczos cycle");
    Err(Error::NumericalFailure {
        iterations: applications,
        lambda: best.lambda,
        residual: best.residual,
    })
}

/// Deterministic, non-smooth start vector with components in [-1, 1].
fn start_component(i: usize) -> f64 {
    let x = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 11;
    2.0 * (x as f64 / (1u64 << 53) as f64) - 1.0
}

fn lanczos(
    m: &SparseSymmetric,
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    deflate: &dyn Fn(&mut [f64]),
    start: &[f64],
    steps: usize,
    applications: &mut usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut q = start.to_vec();
    let norm = m.bilinear(&q, &q).sqrt();
    q.iter_mut().for_each(|v| *v /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut m_basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);

    for j in 0..steps {
        let mq = m.mul_vec(&q);
        let mut w = apply(&q);
        *applications += 1;
        let a = dot(&w, &mq);
        basis.push(q);
        m_basis.push(mq);
        alpha.push(a);
        // full reorthogonalisation, twice
        for _ in 0..2 {
            for (b, mb) in basis.iter().zip(&m_basis) {
                let c = dot(&w, mb);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
            deflate(&mut w);
        }
        let b = m.bilinear(&w, &w).sqrt();
        if j + 1 == steps || b <= 1e-14 * a.abs() {
            break;
        }
        beta.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    (basis, alpha, beta)
}

pub(crate) fn relative_residual(k: &SparseSymmetric, m: &SparseSymmetric, u: &[f64], lambda: f64) -> f64 {
    let ku = k.mul_vec(u);
    let mu = m.mul_vec(u);
    let r: f64 = ku.iter().zip(&mu).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    let scale = lambda.abs() * mu.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / scale
}

/// Rounding floor of `relative_residual`: `ε ‖|K||u| + λ|M||u|‖ / (λ ‖M u‖)`.
pub(crate) fn residual_floor(k: &SparseSymmetric, m: &SparseSymmetric, u: &[f64], lambda: f64) -> f64 {
    let abs_mul = |a: &SparseSymmetric, r: usize| a.row(r).map(|(c, v)| (v * u[c]).abs()).sum::<f64>();
    let bound: f64 = (0..u.len())
        .map(|r| (abs_mul(k, r) + lambda.abs() * abs_mul(m, r)).powi(2))
        .sum::<f64>()
        .sqrt();
    let mu = m.mul_vec(u);
    f64::EPSILON * bound / (lambda.abs() * mu.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
