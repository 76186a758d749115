use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex64};

/// Eigenpairs of a Hermitian matrix, sorted by ascending eigenvalue.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

const HERMITIAN_TOL: f64 = 1e-10;
const PHASE_EPS: f64 = 1e-12;

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending with a stable sort, so exact ties keep
/// the order produced by the tridiagonal QR pipeline. Each eigenvector is
/// phase-fixed: its first entry with modulus above `1e-12` is made real and
/// positive.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEig> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::dim(format!(
            "expected a non-empty square matrix, got {:?}",
            m.shape()
        )));
    }
    let asym = (m - m.adjoint()).norm();
    if asym > HERMITIAN_TOL * m.norm() {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian: |M - M^H|_F = {asym:.3e}"
        )));
    }
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut v: CVector = eig.eigenvectors.column(i).into_owned();
        v /= Complex64::from(v.norm());
        fix_phase(&mut v);
        vectors.set_column(k, &v);
    }
    Ok(HermitianEig { values, vectors })
}

/// Orthonormal eigenvectors for the `d` smallest eigenvalues of a Hermitian
/// matrix, as the columns of an `n x d` matrix. The corresponding
/// eigenvalues are returned alongside.
pub fn hermitian_smallest_eigvecs(m: &CMatrix, d: usize) -> Result<HermitianEig> {
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::param("d", format!("must be in 1..={n}, got {d}")));
    }
    let full = hermitian_eig(m)?;
    Ok(HermitianEig {
        values: full.values[..d].to_vec(),
        vectors: full.vectors.columns(0, d).into_owned(),
    })
}

fn fix_phase(v: &mut CVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > PHASE_EPS).copied() {
        let rot = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= rot);
        // the pivot is exactly real after rotation up to roundoff
        if let Some(p) = v.iter_mut().find(|z| z.norm() > PHASE_EPS) {
            p.im = 0.0;
        }
    }
}

/// Largest eigenvalue of `A^H A` (squared spectral norm) by power iteration
/// from the all-ones vector.
pub fn spectral_norm_sq(a: &CMatrix, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = CVector::from_element(n, Complex64::from(1.0 / (n as f64).sqrt()));
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let w = a.adjoint() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.dotc(&w).re;
        v = w / Complex64::from(norm);
    }
    let av = a * &v;
    estimate.max(av.norm_squared())
}
