//! Initialization and the successive convex approximation loop.

use log::{debug, warn};

use super::problem::{ReconProblem, ReconState, Weights};
use super::subproblems::{solve_b_with, solve_d_with, update_z, Incumbent, InnerReport};
use super::ReconConfig;
use crate::error::{Error, Result};
use crate::numerics::project_columns_ball;
use crate::{CMatrix, Complex64};

/// Ridge added to `M M^H` in the least-squares dictionary fit.
const FIT_RIDGE: f64 = 1e-8;

/// Coefficients with every column equal to `1 / n_l`.
pub fn uniform_coeffs(n_l: usize, n_fr: usize) -> CMatrix {
    CMatrix::from_element(n_l, n_fr, Complex64::new(1.0 / n_l as f64, 0.0))
}

/// One-hot coefficients selecting, for each frame, the landmark whose
/// navigator column is closest in Euclidean distance (ties: lowest index).
pub fn nearest_landmark_coeffs(
    navigators: &CMatrix,
    landmark_indices: &[usize],
) -> Result<CMatrix> {
    if landmark_indices.is_empty() {
        return Err(Error::dim("no landmarks"));
    }
    let n_fr = navigators.ncols();
    if let Some(&bad) = landmark_indices.iter().find(|&&i| i >= n_fr) {
        return Err(Error::dim(format!(
            "landmark index {bad} out of range for {n_fr} frames"
        )));
    }
    let mut b = CMatrix::zeros(landmark_indices.len(), n_fr);
    for j in 0..n_fr {
        let mut best = (f64::INFINITY, 0);
        for (k, &l) in landmark_indices.iter().enumerate() {
            let dist = (navigators.column(j) - navigators.column(l)).norm_squared();
            if dist < best.0 {
                best = (dist, k);
            }
        }
        b[(best.1, j)] = Complex64::new(1.0, 0.0);
    }
    Ok(b)
}

/// Least-squares dictionary for the zero-filled series given coefficients:
/// `X_zf M^H (M M^H + eps I)^-1` with `M = K_check B`.
pub fn fit_dictionary(problem: &ReconProblem, coeffs: &CMatrix) -> Result<CMatrix> {
    let m = problem.k_check() * coeffs;
    let x_zf = problem.inverse_fourier(problem.sampled());
    let d = problem.d();
    let gram = &m * m.adjoint() + CMatrix::identity(d, d) * Complex64::new(FIT_RIDGE, 0.0);
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Validation("coefficient Gram matrix is not positive definite".into())
    })?;
    let rhs = &m * x_zf.adjoint();
    Ok(chol.solve(&rhs).adjoint())
}

/// Default column-norm bound: ten times the largest column of the fitted
/// dictionary (one if that dictionary vanishes).
pub fn default_c_d(dictionary: &CMatrix) -> f64 {
    let max = dictionary
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if max > 0.0 {
        10.0 * max
    } else {
        1.0
    }
}

/// Builds the starting iterate from initial coefficients `b0` (columns
/// must sum to one).
pub fn init_state(
    problem: &ReconProblem,
    w: &Weights,
    b0: &CMatrix,
    gamma0: f64,
) -> Result<ReconState> {
    if b0.shape() != (problem.n_l(), problem.n_fr()) {
        return Err(Error::dim(format!(
            "initial coefficients are {:?}, expected {:?}",
            b0.shape(),
            (problem.n_l(), problem.n_fr())
        )));
    }
    for (j, col) in b0.column_iter().enumerate() {
        let s: Complex64 = col.iter().sum();
        if (s - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::Validation(format!(
                "initial coefficient column {j} sums to {s}"
            )));
        }
    }
    let mut dictionary = fit_dictionary(problem, b0)?;
    project_columns_ball(&mut dictionary, w.c_d)?;
    let aux = problem.time_fourier(&problem.reconstruction(&dictionary, b0));
    Ok(ReconState {
        dictionary,
        coeffs: b0.clone(),
        aux,
        gamma: gamma0,
        n: 0,
    })
}

/// `gamma_{n+1} = gamma_n (1 - zeta gamma_n)`.
pub fn next_gamma(gamma: f64, zeta: f64) -> f64 {
    gamma * (1.0 - zeta * gamma)
}

/// Diagnostics of one approximation step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub d: InnerReport,
    pub b: InnerReport,
    /// Step size used for the convex combination.
    pub gamma: f64,
}

/// One Jacobi step: all three block solutions are computed from the
/// incumbent, then combined with step `gamma_{n+1}`.
pub fn sca_step(
    problem: &ReconProblem,
    s: &ReconState,
    w: &Weights,
    cfg: &ReconConfig,
) -> Result<(ReconState, StepReport)> {
    problem.check_state(s)?;
    let inc = Incumbent::new(problem, s);
    let (d_hat, d_rep) = solve_d_with(problem, s, w, &inc, cfg.inner_tol, cfg.inner_max_iter)?;
    let (b_hat, b_rep) = solve_b_with(problem, s, w, &inc, cfg.inner_tol, cfg.inner_max_iter)?;
    let z_hat = update_z(problem, s, w)?;
    let g = next_gamma(s.gamma, cfg.zeta);
    let (keep, take) = (Complex64::new(1.0 - g, 0.0), Complex64::new(g, 0.0));
    let next = ReconState {
        dictionary: &s.dictionary * keep + d_hat * take,
        coeffs: &s.coeffs * keep + b_hat * take,
        aux: &s.aux * keep + z_hat * take,
        gamma: g,
        n: s.n + 1,
    };
    Ok((
        next,
        StepReport {
            d: d_rep,
            b: b_rep,
            gamma: g,
        },
    ))
}

/// Trace of a reconstruction run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Full objective at the initial iterate and after every step.
    pub objective: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Relative change of `D K_check B` per step.
    pub relative_change: Vec<f64>,
    pub steps: Vec<StepReport>,
    pub iterations: usize,
    pub converged: bool,
    pub weights: Option<Weights>,
}

/// Runs the approximation loop from `state` until the relative change of
/// the reconstruction drops below `outer_tol` or `outer_max_iter` steps.
pub fn run_sca(
    problem: &ReconProblem,
    state: ReconState,
    w: &Weights,
    cfg: &ReconConfig,
) -> Result<(ReconState, Diagnostics)> {
    let mut diag = Diagnostics {
        weights: Some(*w),
        ..Diagnostics::default()
    };
    let mut s = state;
    diag.objective.push(problem.objective(&s, w)?);
    let mut x = problem.reconstruction(&s.dictionary, &s.coeffs);
    while s.n < cfg.outer_max_iter {
        let (next, rep) = sca_step(problem, &s, w, cfg)?;
        let x_next = problem.reconstruction(&next.dictionary, &next.coeffs);
        let change = (&x_next - &x).norm() / x.norm().max(f64::MIN_POSITIVE);
        s = next;
        x = x_next;
        let obj = problem.objective(&s, w)?;
        if !obj.is_finite() {
            return Err(Error::Validation(format!(
                "objective became non-finite at step {}",
                s.n
            )));
        }
        debug!(
            "step {}: objective {obj:.6e}, change {change:.3e}, gamma {:.4}",
            s.n, rep.gamma
        );
        diag.objective.push(obj);
        diag.gammas.push(rep.gamma);
        diag.relative_change.push(change);
        diag.steps.push(rep);
        if change <= cfg.outer_tol {
            diag.converged = true;
            break;
        }
    }
    diag.iterations = s.n;
    if !diag.converged {
        warn!(
            "reconstruction stopped after {} steps without reaching tolerance",
            s.n
        );
    }
    Ok((s, diag))
}
