//! Complex linear-algebra primitives shared by the rest of the crate:
//! unitary Fourier transforms, projections, prox operators and a dense
//! Hermitian eigensolver.

mod cube;
mod eigen;
mod fft;
mod prox;

pub use cube::ComplexCube;
pub use eigen::{hermitian_eig, hermitian_smallest_eigvecs, spectral_norm_sq, HermitianEig};
pub use fft::{dft2, dft_time, idft2, idft_time, Dft2Plan, DftTimePlan};
pub use prox::{
    project_colsum_one, project_column_ball, project_columns_ball, project_columns_colsum_one,
    soft, soft_threshold,
};

use crate::CMatrix;

/// Real part of the Frobenius inner product `<a, b> = Re tr(a^H b)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Entrywise l1 norm (sum of moduli).
pub fn l1_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
pub(crate) fn c(re: f64, im: f64) -> crate::Complex64 {
    crate::Complex64::new(re, im)
}
