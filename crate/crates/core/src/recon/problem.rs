//! Operators of the recovery task and direct (transform-based) evaluations
//! of its objectives and gradients.

use crate::acquisition::SamplingMask;
use crate::datamodel::{KSpaceTransform, KTDataset};
use crate::error::{Error, Result};
use crate::manifold::ReducedKernel;
use crate::numerics::{l1_norm, DftTimePlan};
use crate::{CMatrix, Complex64};

/// Fixed inputs of the bi-linear recovery task: the sampled k-space
/// `S(Y)`, the mask and the compressed kernel.
#[derive(Clone)]
pub struct ReconProblem {
    n_p: usize,
    n_f: usize,
    /// `S(Y)` as an `n_k x n_fr` matrix (centered k-space).
    sampled: CMatrix,
    mask: SamplingMask,
    /// `K_check`, `d x n_l`.
    k_check: CMatrix,
    transform: KSpaceTransform,
    time: DftTimePlan,
}

/// Resolved weights of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c_d: f64,
    pub tau_d: f64,
    pub tau_b: f64,
}

/// Iterates of the successive convex approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconState {
    /// Image-domain dictionary `D`, `n_k x d`.
    pub dictionary: CMatrix,
    /// Affine coefficients `B`, `n_l x n_fr`; columns sum to one.
    pub coeffs: CMatrix,
    /// Temporal-sparsity auxiliary `Z`, `n_k x n_fr`.
    pub aux: CMatrix,
    pub gamma: f64,
    pub n: usize,
}

impl ReconProblem {
    /// `sampled` must already be `S(Y)`; entries off the mask are ignored.
    pub fn new(sampled: &KTDataset, mask: &SamplingMask, k_check: &ReducedKernel) -> Result<Self> {
        Self::from_parts(sampled, mask, k_check.entries.clone())
    }

    pub fn from_parts(sampled: &KTDataset, mask: &SamplingMask, k_check: CMatrix) -> Result<Self> {
        let (n_p, n_f, n_fr) = sampled.cube.shape();
        if mask.n_p() != n_p || mask.n_fr() != n_fr {
            return Err(Error::dim(format!(
                "mask is {}x{} but data has n_p = {n_p}, n_fr = {n_fr}",
                mask.n_p(),
                mask.n_fr()
            )));
        }
        if k_check.nrows() == 0 || k_check.ncols() == 0 {
            return Err(Error::dim("reduced kernel is empty"));
        }
        let mut y = sampled.matrix();
        let mut problem = Self {
            n_p,
            n_f,
            sampled: CMatrix::zeros(0, 0),
            mask: mask.clone(),
            k_check,
            transform: KSpaceTransform::new(n_p, n_f)?,
            time: DftTimePlan::new(n_fr)?,
        };
        problem.apply_mask(&mut y);
        problem.sampled = y;
        Ok(problem)
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_k(&self) -> usize {
        self.n_p * self.n_f
    }

    pub fn n_fr(&self) -> usize {
        self.sampled.ncols()
    }

    pub fn d(&self) -> usize {
        self.k_check.nrows()
    }

    pub fn n_l(&self) -> usize {
        self.k_check.ncols()
    }

    pub fn sampled(&self) -> &CMatrix {
        &self.sampled
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn k_check(&self) -> &CMatrix {
        &self.k_check
    }

    /// `S` on an `n_k x n_fr` k-space matrix, in place.
    pub fn apply_mask(&self, m: &mut CMatrix) {
        let n_p = self.n_p;
        for (j, mut col) in m.column_iter_mut().enumerate() {
            let lines = self.mask.frame_lines(j);
            for (r, z) in col.iter_mut().enumerate() {
                if !lines[r % n_p] {
                    *z = Complex64::default();
                }
            }
        }
    }

    /// `F` column-wise: image domain to centered k-space.
    pub fn fourier(&self, x: &CMatrix) -> CMatrix {
        self.transform.forward_columns(x)
    }

    pub fn inverse_fourier(&self, y: &CMatrix) -> CMatrix {
        self.transform.inverse_columns(y)
    }

    /// `F_t`: unitary DFT of each voxel's time profile.
    pub fn time_fourier(&self, x: &CMatrix) -> CMatrix {
        self.time.forward(x)
    }

    pub fn inverse_time_fourier(&self, x: &CMatrix) -> CMatrix {
        self.time.inverse(x)
    }

    /// `D K_check B`.
    pub fn reconstruction(&self, dictionary: &CMatrix, coeffs: &CMatrix) -> CMatrix {
        dictionary * (&self.k_check * coeffs)
    }

    pub fn check_state(&self, s: &ReconState) -> Result<()> {
        let (n_k, d, n_l, n_fr) = (self.n_k(), self.d(), self.n_l(), self.n_fr());
        let shapes = [
            ("dictionary", s.dictionary.shape(), (n_k, d)),
            ("coeffs", s.coeffs.shape(), (n_l, n_fr)),
            ("aux", s.aux.shape(), (n_k, n_fr)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::dim(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        Ok(())
    }

    /// `0.5 ||S(Y) - S F(X)||_F^2` for an image-domain series `X`.
    pub fn data_misfit(&self, x: &CMatrix) -> f64 {
        let mut r = self.fourier(x);
        self.apply_mask(&mut r);
        0.5 * (r - &self.sampled).norm_squared()
    }

    /// Full objective `T1 + T2 + T3 + T4` evaluated through the transforms.
    pub fn objective(&self, s: &ReconState, w: &Weights) -> Result<f64> {
        self.check_state(s)?;
        let x = self.reconstruction(&s.dictionary, &s.coeffs);
        let t1 = self.data_misfit(&x);
        let t2 = 0.5 * w.lambda1 * (&s.aux - self.time_fourier(&x)).norm_squared();
        let t3 = w.lambda2 * l1_norm(&s.coeffs);
        let t4 = w.lambda3 * l1_norm(&s.aux);
        Ok(t1 + t2 + t3 + t4)
    }

    /// Objective of the `D` subproblem at `dictionary`, incumbent `s`.
    pub fn d_objective(&self, dictionary: &CMatrix, s: &ReconState, w: &Weights) -> f64 {
        let x = self.reconstruction(dictionary, &s.coeffs);
        self.data_misfit(&x)
            + 0.5 * w.tau_d * (dictionary - &s.dictionary).norm_squared()
            + 0.5 * w.lambda1 * (&s.aux - self.time_fourier(&x)).norm_squared()
    }

    /// Gradient of [`Self::d_objective`]:
    /// `F^-1(S F(DM) - S(Y)) M^H + lambda1 F_t^-1(F_t(DM) - Z_n) M^H + tau_D (D - D_n)`.
    pub fn d_gradient(&self, dictionary: &CMatrix, s: &ReconState, w: &Weights) -> CMatrix {
        let m = &self.k_check * &s.coeffs;
        let x = dictionary * &m;
        let mut r = self.fourier(&x);
        self.apply_mask(&mut r);
        r -= &self.sampled;
        let data = self.inverse_fourier(&r) * m.adjoint();
        let temporal = self.inverse_time_fourier(&(self.time_fourier(&x) - &s.aux)) * m.adjoint();
        data + temporal * Complex64::from(w.lambda1)
            + (dictionary - &s.dictionary) * Complex64::from(w.tau_d)
    }

    /// Objective of the `B` subproblem (including `lambda2 ||B||_1`).
    pub fn b_objective(&self, coeffs: &CMatrix, s: &ReconState, w: &Weights) -> f64 {
        self.b_smooth_objective(coeffs, s, w) + w.lambda2 * l1_norm(coeffs)
    }

    pub fn b_smooth_objective(&self, coeffs: &CMatrix, s: &ReconState, w: &Weights) -> f64 {
        let x = self.reconstruction(&s.dictionary, coeffs);
        self.data_misfit(&x)
            + 0.5 * w.tau_b * (coeffs - &s.coeffs).norm_squared()
            + 0.5 * w.lambda1 * (&s.aux - self.time_fourier(&x)).norm_squared()
    }

    /// Gradient of the smooth part of the `B` subproblem.
    pub fn b_smooth_gradient(&self, coeffs: &CMatrix, s: &ReconState, w: &Weights) -> CMatrix {
        let x = self.reconstruction(&s.dictionary, coeffs);
        let mut r = self.fourier(&x);
        self.apply_mask(&mut r);
        r -= &self.sampled;
        let image_residual = self.inverse_fourier(&r)
            + self.inverse_time_fourier(&(self.time_fourier(&x) - &s.aux))
                * Complex64::from(w.lambda1);
        let dk = &s.dictionary * &self.k_check;
        dk.adjoint() * image_residual + (coeffs - &s.coeffs) * Complex64::from(w.tau_b)
    }
}
