//! Frechet distance between Gaussian fits of two window populations:
//! ||mu_a - mu_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^(1/2)).

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SstError};
use crate::signal::WindowSet;

/// Frechet distance between the Gaussian fits of two window sets. Each
/// window is one point in `window_length`-dimensional space; sample
/// covariance (divide by count - 1) is used.
pub fn fid(set_a: &WindowSet, set_b: &WindowSet) -> Result<f64> {
    if set_a.window_length != set_b.window_length {
        return Err(SstError::DimensionMismatch {
            left: set_a.window_length,
            right: set_b.window_length,
        });
    }
    for s in [set_a, set_b] {
        if s.len() < 2 {
            return Err(SstError::TooFewWindows {
                count: s.len(),
                needed: 2,
            });
        }
    }
    Ok(frechet_gaussian(set_a.windows(), set_b.windows()))
}

/// Frechet distance over raw point sets (rows are points).
pub fn frechet_gaussian(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a[0].len();
    // The covariances have rank < point count; when the ambient dimension
    // is large the d x d eigendecomposition is replaced by an equivalent
    // Gram-matrix computation.
    if d <= a.len().max(b.len()).max(32) {
        frechet_direct(a, b, d)
    } else {
        frechet_gram(a, b, d)
    }
}

fn mean_vec(points: &[Vec<f64>], d: usize) -> DVector<f64> {
    let mut mu = DVector::zeros(d);
    for p in points {
        for i in 0..d {
            mu[i] += p[i];
        }
    }
    mu / points.len() as f64
}

fn centered(points: &[Vec<f64>], mu: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, d, |r, c| points[r][c] - mu[c])
}

fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    (x.transpose() * x) / (n - 1.0)
}

/// Symmetric matrix square root via eigendecomposition, negative
/// eigenvalues clipped at zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

fn frechet_direct(a: &[Vec<f64>], b: &[Vec<f64>], d: usize) -> f64 {
    let mu_a = mean_vec(a, d);
    let mu_b = mean_vec(b, d);
    let ca = covariance(&centered(a, &mu_a, d));
    let cb = covariance(&centered(b, &mu_b, d));
    let sqrt_a = symmetric_sqrt(&ca);
    // (C_a^(1/2) C_b C_a^(1/2))^(1/2) is the stable form of (C_a C_b)^(1/2)
    let inner = &sqrt_a * &cb * &sqrt_a;
    let sym = (&inner + inner.transpose()) * 0.5;
    let trace_sqrt: f64 = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let mean_term = (&mu_a - &mu_b).norm_squared();
    (mean_term + ca.trace() + cb.trace() - 2.0 * trace_sqrt).max(0.0)
}

/// Same quantity computed from Gram matrices: the nonzero eigenvalues of
/// C_a C_b equal those of (B_c A_c^T)^T (B_c A_c^T) / ((n_a-1)(n_b-1)),
/// which is point-count sized rather than dimension sized.
fn frechet_gram(a: &[Vec<f64>], b: &[Vec<f64>], d: usize) -> f64 {
    let mu_a = mean_vec(a, d);
    let mu_b = mean_vec(b, d);
    let ac = centered(a, &mu_a, d);
    let bc = centered(b, &mu_b, d);
    let na = (a.len() - 1) as f64;
    let nb = (b.len() - 1) as f64;
    let tr_a = ac.iter().map(|v| v * v).sum::<f64>() / na;
    let tr_b = bc.iter().map(|v| v * v).sum::<f64>() / nb;
    let p = (&bc * ac.transpose()) / (na * nb).sqrt();
    let s = p.transpose() * &p;
    let sym = (&s + s.transpose()) * 0.5;
    let trace_sqrt: f64 = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let mean_term = (&mu_a - &mu_b).norm_squared();
    (mean_term + tr_a + tr_b - 2.0 * trace_sqrt).max(0.0)
}
