//! Complex-valued reproducing kernels and the landmark Gram matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::{CMatrix, Complex64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// `exp(-gamma * ||x - conj(y)||^2)`, real-valued.
    GaussianModulus,
    /// `exp(-gamma * sum_i (x_i - conj(y_i))^2)`, complex-valued.
    GaussianHolomorphic,
    /// `(x^H y + c)^r`.
    Polynomial,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::GaussianModulus => "gaussian_modulus",
            KernelKind::GaussianHolomorphic => "gaussian_holomorphic",
            KernelKind::Polynomial => "polynomial",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_modulus" => Ok(KernelKind::GaussianModulus),
            "gaussian_holomorphic" => Ok(KernelKind::GaussianHolomorphic),
            "polynomial" => Ok(KernelKind::Polynomial),
            other => Err(Error::param(
                "kernel.kind",
                format!("unknown kernel `{other}` (expected gaussian_modulus, gaussian_holomorphic or polynomial)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Gaussian width; ignored by the polynomial kernel.
    pub gamma: f64,
    /// Polynomial offset, real so that the kernel stays Hermitian.
    pub c: f64,
    /// Polynomial degree.
    pub r: u32,
}

impl KernelSpec {
    pub fn gaussian_modulus(gamma: f64) -> Self {
        Self {
            kind: KernelKind::GaussianModulus,
            gamma,
            c: 0.0,
            r: 1,
        }
    }

    pub fn gaussian_holomorphic(gamma: f64) -> Self {
        Self {
            kind: KernelKind::GaussianHolomorphic,
            ..Self::gaussian_modulus(gamma)
        }
    }

    pub fn polynomial(c: f64, r: u32) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            gamma: 1.0,
            c,
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::GaussianModulus | KernelKind::GaussianHolomorphic => {
                if !(self.gamma > 0.0) || !self.gamma.is_finite() {
                    return Err(Error::param(
                        "kernel.gamma",
                        format!("must be positive, got {}", self.gamma),
                    ));
                }
            }
            KernelKind::Polynomial => {
                if !(self.c >= 0.0) || !self.c.is_finite() {
                    return Err(Error::param(
                        "kernel.c",
                        format!("must be >= 0, got {}", self.c),
                    ));
                }
                if self.r == 0 {
                    return Err(Error::param("kernel.r", "degree must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// The landmark Gram matrix `K_ij = kappa(l_i, l_j)`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub entries: CMatrix,
    pub spec: KernelSpec,
}

impl KernelMatrix {
    pub fn n_l(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    if x.len() != y.len() {
        return Err(Error::dim(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(eval_unchecked(spec, x, y))
}

fn eval_unchecked(spec: &KernelSpec, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    match spec.kind {
        KernelKind::GaussianModulus => {
            let d: f64 = x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b.conj()).norm_sqr())
                .sum();
            Complex64::new((-spec.gamma * d).exp(), 0.0)
        }
        KernelKind::GaussianHolomorphic => {
            let s: Complex64 = x.iter().zip(y).map(|(a, b)| (a - b.conj()).powu(2)).sum();
            (-s * spec.gamma).exp()
        }
        KernelKind::Polynomial => {
            let ip: Complex64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
            (ip + spec.c).powu(spec.r)
        }
    }
}

/// Gram matrix over the columns of `landmarks`. Only the upper triangle is
/// evaluated; the lower one is its conjugate mirror and the diagonal is
/// real, so the result is exactly Hermitian.
pub fn kernel_matrix(spec: &KernelSpec, landmarks: &CMatrix) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = landmarks.ncols();
    if n < 2 {
        return Err(Error::param(
            "n_l",
            format!("need at least 2 landmarks, got {n}"),
        ));
    }
    let cols: Vec<&[Complex64]> = (0..n)
        .map(|j| &landmarks.as_slice()[j * landmarks.nrows()..(j + 1) * landmarks.nrows()])
        .collect();
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        let diag = eval_unchecked(spec, cols[i], cols[i]);
        k[(i, i)] = Complex64::new(diag.re, 0.0);
        for j in i + 1..n {
            let v = eval_unchecked(spec, cols[i], cols[j]);
            k[(i, j)] = v;
            k[(j, i)] = v.conj();
        }
    }
    if !crate::numerics::all_finite(&k) {
        return Err(Error::Validation(format!(
            "{} kernel matrix has non-finite entries; reduce kernel.gamma",
            spec.kind
        )));
    }
    Ok(KernelMatrix {
        entries: k,
        spec: *spec,
    })
}

/// `1 / median` of the pairwise squared Euclidean distances between the
/// columns of `landmarks`. Zero distances (duplicate landmarks) are skipped;
/// falls back to `1.0` when every pair coincides.
pub fn median_heuristic_gamma(landmarks: &CMatrix) -> f64 {
    let n = landmarks.ncols();
    let mut d2: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = (landmarks.column(i) - landmarks.column(j)).norm_squared();
            if d > 0.0 {
                d2.push(d);
            }
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    d2.sort_by(f64::total_cmp);
    let m = d2.len();
    let median = if m % 2 == 1 {
        d2[m / 2]
    } else {
        0.5 * (d2[m / 2 - 1] + d2[m / 2])
    };
    1.0 / median
}
