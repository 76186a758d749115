//! Bi-linear recovery of the image series `X = D K_check B` from
//! undersampled (k,t)-space data by successive convex approximation.

mod problem;
mod sca;
mod subproblems;

pub use problem::{ReconProblem, ReconState, Weights};
pub use sca::{
    default_c_d, fit_dictionary, init_state, nearest_landmark_coeffs, next_gamma, run_sca,
    sca_step, uniform_coeffs, Diagnostics, StepReport,
};
pub use subproblems::{solve_b_subproblem, solve_d_subproblem, update_z, InnerReport};

use std::fmt;
use std::str::FromStr;

use log::info;

use crate::acquisition::SamplingMask;
use crate::datamodel::{ImageSeries, KTDataset, NavigatorMatrix};
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, median_heuristic_gamma, KernelKind, KernelSpec};
use crate::landmarks::{select_landmarks_minmax, LandmarkSet};
use crate::manifold::{
    compute_reduced_kernel, solve_weights, ReducedKernel, WeightMatrix, WeightSolverOptions,
};
use crate::CMatrix;

/// Solver settings. `None` entries are derived from the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconConfig {
    pub lambda1: f64,
    /// Defaults to `1e-3 ||S(Y)||_F / sqrt(n_l n_fr)`.
    pub lambda2: Option<f64>,
    /// Defaults to `0.1 ||S(Y)||_F / sqrt(n_k n_fr)`.
    pub lambda3: Option<f64>,
    /// Defaults to ten times the largest column of the initial dictionary fit.
    pub c_d: Option<f64>,
    pub tau_d: f64,
    pub tau_b: f64,
    pub zeta: f64,
    pub gamma0: f64,
    pub outer_max_iter: usize,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: None,
            lambda3: None,
            c_d: None,
            tau_d: 1e-2,
            tau_b: 1e-2,
            zeta: 0.05,
            gamma0: 1.0,
            outer_max_iter: 300,
            inner_max_iter: 200,
            outer_tol: 1e-4,
            inner_tol: 1e-5,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        positive("recon.lambda1", self.lambda1)?;
        for (name, v) in [
            ("recon.lambda2", self.lambda2),
            ("recon.lambda3", self.lambda3),
            ("recon.c_d", self.c_d),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        positive("recon.tau_d", self.tau_d)?;
        positive("recon.tau_b", self.tau_b)?;
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::param(
                "recon.zeta",
                format!("must lie in (0, 1), got {}", self.zeta),
            ));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::param(
                "recon.gamma0",
                format!("must lie in (0, 1], got {}", self.gamma0),
            ));
        }
        if self.outer_max_iter == 0 {
            return Err(Error::param("recon.outer_max_iter", "must be at least 1"));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::param("recon.inner_max_iter", "must be at least 1"));
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::param("recon.outer_tol", "must be non-negative"));
        }
        if !(self.inner_tol >= 0.0) {
            return Err(Error::param("recon.inner_tol", "must be non-negative"));
        }
        Ok(())
    }

    /// Resolves the data-dependent weights. `initial_fit` is the dictionary
    /// fitted to the initial coefficients before any projection.
    pub fn weights(&self, problem: &ReconProblem, initial_fit: &CMatrix) -> Result<Weights> {
        self.validate()?;
        let norm = problem.sampled().norm();
        let (n_l, n_fr, n_k) = (
            problem.n_l() as f64,
            problem.n_fr() as f64,
            problem.n_k() as f64,
        );
        let floor = |v: f64| if v > 0.0 { v } else { f64::EPSILON };
        Ok(Weights {
            lambda1: self.lambda1,
            lambda2: self
                .lambda2
                .unwrap_or_else(|| floor(1e-3 * norm / (n_l * n_fr).sqrt())),
            lambda3: self
                .lambda3
                .unwrap_or_else(|| floor(0.1 * norm / (n_k * n_fr).sqrt())),
            c_d: self.c_d.unwrap_or_else(|| default_c_d(initial_fit)),
            tau_d: self.tau_d,
            tau_b: self.tau_b,
        })
    }
}

/// How the coefficients are initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// One-hot on the nearest landmark in navigator space.
    NearestLandmark,
    /// Every entry `1 / n_l`.
    Uniform,
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::NearestLandmark => "nearest_landmark",
            InitStrategy::Uniform => "uniform",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest_landmark" => Ok(InitStrategy::NearestLandmark),
            "uniform" => Ok(InitStrategy::Uniform),
            other => Err(Error::param(
                "model.init",
                format!("unknown initialization `{other}` (expected nearest_landmark or uniform)"),
            )),
        }
    }
}

/// Settings of the manifold model built from the navigators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub kernel: KernelKind,
    /// Gaussian width; `None` uses the median heuristic on the landmarks.
    pub kernel_gamma: Option<f64>,
    pub kernel_c: f64,
    pub kernel_r: u32,
    /// Number of landmarks; `None` uses `min(50, ceil(n_fr / 3))`.
    pub n_l: Option<usize>,
    /// Manifold dimension; `None` uses `min(4, n_l - 1)`.
    pub d: Option<usize>,
    /// Defaults to `0.1 ||K||_F / n_l`.
    pub lambda_w: Option<f64>,
    pub weight_tol: f64,
    pub weight_max_iter: usize,
    pub init: InitStrategy,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::GaussianModulus,
            kernel_gamma: None,
            kernel_c: 1.0,
            kernel_r: 2,
            n_l: None,
            d: None,
            lambda_w: None,
            weight_tol: 1e-6,
            weight_max_iter: 20000,
            init: InitStrategy::NearestLandmark,
        }
    }
}

impl ModelConfig {
    pub fn landmark_count(&self, n_fr: usize) -> usize {
        self.n_l.unwrap_or_else(|| 50.min(n_fr.div_ceil(3)).max(2))
    }

    pub fn dimension(&self, n_fr: usize) -> usize {
        self.d
            .unwrap_or_else(|| 4.min(self.landmark_count(n_fr).saturating_sub(1)).max(1))
    }

    pub fn validate(&self, n_fr: usize) -> Result<()> {
        let n_l = self.landmark_count(n_fr);
        let d = self.dimension(n_fr);
        if n_l < 2 || n_l > n_fr {
            return Err(Error::param(
                "model.n_l",
                format!("must lie in 2..={n_fr}, got {n_l}"),
            ));
        }
        if d == 0 || d >= n_l {
            return Err(Error::param(
                "model.d",
                format!("must lie in 1..{n_l}, got {d}"),
            ));
        }
        if let Some(l) = self.lambda_w {
            positive("model.lambda_w", l)?;
        }
        positive("model.weight_tol", self.weight_tol)?;
        if self.weight_max_iter == 0 {
            return Err(Error::param("model.weight_max_iter", "must be at least 1"));
        }
        if let Some(g) = self.kernel_gamma {
            positive("kernel.gamma", g)?;
        }
        self.kernel_spec(1.0).validate()
    }

    fn kernel_spec(&self, gamma: f64) -> KernelSpec {
        KernelSpec {
            kind: self.kernel,
            gamma: self.kernel_gamma.unwrap_or(gamma),
            c: self.kernel_c,
            r: self.kernel_r,
        }
    }
}

/// Result of a full reconstruction.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub images: ImageSeries,
    pub state: ReconState,
    pub diagnostics: Diagnostics,
    pub landmarks: LandmarkSet,
    pub kernel: KernelSpec,
    pub weights: WeightMatrix,
    pub reduced: ReducedKernel,
    /// Largest column norm of `D` minus `c_d` (non-positive when feasible).
    pub ball_residual: f64,
    /// Largest deviation of a column sum of `B` from one.
    pub colsum_residual: f64,
}

/// Landmarks, kernel, tangent weights and `K_check` from the navigators.
pub fn build_manifold_model(
    nav: &NavigatorMatrix,
    model: &ModelConfig,
) -> Result<(LandmarkSet, KernelSpec, WeightMatrix, ReducedKernel)> {
    let n_fr = nav.entries.ncols();
    model.validate(n_fr)?;
    let landmarks = select_landmarks_minmax(nav, model.landmark_count(n_fr))?;
    let spec = model.kernel_spec(median_heuristic_gamma(&landmarks.matrix));
    spec.validate()?;
    let k = kernel_matrix(&spec, &landmarks.matrix)?;
    let lambda_w = model
        .lambda_w
        .unwrap_or(WeightSolverOptions::defaults_for(&k).lambda_w);
    let weights = solve_weights(&k, lambda_w, model.weight_tol, model.weight_max_iter)?;
    let reduced = compute_reduced_kernel(&weights, model.dimension(n_fr))?;
    Ok((landmarks, spec, weights, reduced))
}

/// Runs the whole pipeline: navigator landmarks, kernel, tangent weights,
/// compressed kernel and the approximation loop.
pub fn run_reconstruction(
    sampled: &KTDataset,
    mask: &SamplingMask,
    nav: &NavigatorMatrix,
    model: &ModelConfig,
    cfg: &ReconConfig,
) -> Result<Reconstruction> {
    cfg.validate()?;
    if nav.entries.ncols() != sampled.cube.n_fr() {
        return Err(Error::dim(format!(
            "navigator has {} frames, data has {}",
            nav.entries.ncols(),
            sampled.cube.n_fr()
        )));
    }
    mask.check_every_frame_sampled()?;
    let (landmarks, kernel, weights, reduced) = build_manifold_model(nav, model)?;
    let problem = ReconProblem::new(sampled, mask, &reduced)?;
    let b0 = match model.init {
        InitStrategy::NearestLandmark => nearest_landmark_coeffs(&nav.entries, &landmarks.indices)?,
        InitStrategy::Uniform => uniform_coeffs(problem.n_l(), problem.n_fr()),
    };
    let w = cfg.weights(&problem, &fit_dictionary(&problem, &b0)?)?;
    info!(
        "model: n_l = {}, d = {}, kernel {} (gamma {:.3e}); weights lambda2 = {:.3e}, lambda3 = {:.3e}, c_d = {:.3e}",
        problem.n_l(),
        problem.d(),
        kernel.kind,
        kernel.gamma,
        w.lambda2,
        w.lambda3,
        w.c_d
    );
    let state = init_state(&problem, &w, &b0, cfg.gamma0)?;
    let (state, diagnostics) = run_sca(&problem, state, &w, cfg)?;
    let x = problem.reconstruction(&state.dictionary, &state.coeffs);
    let images = ImageSeries::from_matrix(&x, problem.n_p(), problem.n_f())?;
    let (ball_residual, colsum_residual) = feasibility_residuals(&state, w.c_d);
    Ok(Reconstruction {
        images,
        state,
        diagnostics,
        landmarks,
        kernel,
        weights,
        reduced,
        ball_residual,
        colsum_residual,
    })
}

/// `(max_i ||D e_i|| - c_d, max_j |1^T B e_j - 1|)`.
pub fn feasibility_residuals(s: &ReconState, c_d: f64) -> (f64, f64) {
    let ball = s
        .dictionary
        .column_iter()
        .map(|c| c.norm() - c_d)
        .fold(f64::NEG_INFINITY, f64::max);
    let colsum = s
        .coeffs
        .column_iter()
        .map(|c| (c.iter().sum::<crate::Complex64>() - crate::Complex64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    (ball, colsum)
}

#[cfg(test)]
mod testutil;
