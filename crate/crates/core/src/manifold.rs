//! Affine tangent-space weights `W` for the landmark features and the
//! compressed kernel `K_check` built from the smallest eigenvectors of
//! `(I - W)(I - W)^H`.

use log::warn;

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::numerics::{hermitian_smallest_eigvecs, l1_norm, soft, spectral_norm_sq};
use crate::{CMatrix, Complex64};

#[derive(Clone, Debug)]
pub struct WeightMatrix {
    /// `n_l x n_l`, zero diagonal, every column sums to one.
    pub entries: CMatrix,
    pub lambda_w: f64,
    pub iterations: usize,
    /// Relative change of the last accepted step.
    pub final_change: f64,
    pub converged: bool,
    /// Objective `||K - KW||_F^2 + lambda_w ||W||_1` after every iteration,
    /// starting with the initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ReducedKernel {
    /// `d x n_l` with orthonormal rows.
    pub entries: CMatrix,
    /// Eigenvalues of `(I - W)(I - W)^H` belonging to the rows, ascending.
    pub eigenvalues: Vec<f64>,
}

impl ReducedKernel {
    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_l(&self) -> usize {
        self.entries.ncols()
    }
}

/// Options for [`solve_weights`].
#[derive(Clone, Copy, Debug)]
pub struct WeightSolverOptions {
    pub lambda_w: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl WeightSolverOptions {
    /// `lambda_w = 0.1 * ||K||_F / n_l`, `tol = 1e-6`, `max_iter = 20000`.
    pub fn defaults_for(k: &KernelMatrix) -> Self {
        Self {
            lambda_w: 0.1 * k.entries.norm() / k.n_l() as f64,
            tol: 1e-6,
            max_iter: 20000,
        }
    }
}

/// Objective of the weight problem.
pub fn weight_objective(k: &CMatrix, w: &CMatrix, lambda_w: f64) -> f64 {
    (k - k * w).norm_squared() + lambda_w * l1_norm(w)
}

/// Solves `min_W ||K - KW||_F^2 + lambda_w ||W||_1` subject to
/// `1^T W = 1^T` and `diag(W) = 0`.
///
/// Proximal gradient with backtracking. The prox of `t * lambda_w ||.||_1`
/// restricted to the feasible set is evaluated exactly, column by column, so
/// every iterate is feasible and the objective never increases.
pub fn solve_weights(
    k: &KernelMatrix,
    lambda_w: f64,
    tol: f64,
    max_iter: usize,
) -> Result<WeightMatrix> {
    let kk = &k.entries;
    let n = kk.nrows();
    if n < 2 || kk.ncols() != n {
        return Err(Error::dim(format!(
            "kernel matrix must be square with n_l >= 2, got {:?}",
            kk.shape()
        )));
    }
    if (kk - kk.adjoint()).norm() > 1e-10 * kk.norm() {
        return Err(Error::Validation("kernel matrix is not Hermitian".into()));
    }
    if !(lambda_w > 0.0) || !lambda_w.is_finite() {
        return Err(Error::param(
            "lambda_w",
            format!("must be positive, got {lambda_w}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }

    let gram = kk.adjoint() * kk;
    let lipschitz = 2.0 * spectral_norm_sq(kk, 50);
    let mut step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        1.0
    };

    let mut w = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::default()
        } else {
            Complex64::new(1.0 / (n - 1) as f64, 0.0)
        }
    });
    let smooth = |w: &CMatrix| (kk - kk * w).norm_squared();
    let mut f_w = smooth(&w);
    let mut trace = vec![f_w + lambda_w * l1_norm(&w)];
    let mut final_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let grad = (&gram * &w - &gram) * Complex64::from(2.0);
        let (next, f_next) = loop {
            let mut cand = &w - &grad * Complex64::from(step);
            for i in 0..n {
                prox_column(&mut cand, i, step * lambda_w);
            }
            let diff = &cand - &w;
            let f_cand = smooth(&cand);
            let model = f_w
                + crate::numerics::real_inner(&grad, &diff)
                + diff.norm_squared() / (2.0 * step);
            if f_cand <= model + 1e-12 * f_w.abs().max(1e-300) || step < 1e-300 {
                break (cand, f_cand);
            }
            step *= 0.5;
        };
        final_change = (&next - &w).norm() / w.norm().max(1e-12);
        let obj_next = f_next + lambda_w * l1_norm(&next);
        // sufficient decrease holds up to roundoff; never accept an increase
        if obj_next <= *trace.last().unwrap() {
            w = next;
            f_w = f_next;
            trace.push(obj_next);
        } else {
            trace.push(*trace.last().unwrap());
            converged = true;
            break;
        }
        if final_change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("weight solver stopped after {iterations} iterations (relative change {final_change:.2e})");
    }
    Ok(WeightMatrix {
        entries: w,
        lambda_w,
        iterations,
        final_change,
        converged,
        objective_trace: trace,
    })
}

/// Exact prox of `tau ||w||_1` over `{w : w_i = 0, sum(w) = 1}` applied to
/// column `i` of `m` in place.
///
/// The minimizer is `w_k = soft(v_k - mu, tau)` for a complex shift `mu`
/// making the entries sum to one; `mu` solves a smooth convex 2-D problem
/// and is found by damped Newton iterations.
fn prox_column(m: &mut CMatrix, i: usize, tau: f64) {
    let n = m.nrows();
    let u: Vec<Complex64> = (0..n).filter(|&k| k != i).map(|k| m[(k, i)]).collect();
    let cnt = u.len() as f64;
    let one = Complex64::new(1.0, 0.0);

    // merit psi(mu) = sum_k 0.5 (|u_k - mu| - tau)_+^2 + Re(mu); grad = 1 - sum soft(u_k - mu)
    let psi = |mu: Complex64| -> f64 {
        u.iter()
            .map(|&x| {
                let r = (x - mu).norm() - tau;
                if r > 0.0 {
                    0.5 * r * r
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            + mu.re
    };
    let residual = |mu: Complex64| -> Complex64 {
        u.iter().map(|&x| soft(x - mu, tau)).sum::<Complex64>() - one
    };

    let mut mu = (u.iter().sum::<Complex64>() - one) / cnt;
    for _ in 0..100 {
        let r = residual(mu);
        if r.norm() <= 1e-15 * (1.0 + cnt) {
            break;
        }
        // Jacobian of sum soft(u_k - mu) with respect to -mu, as a real 2x2
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for &x in &u {
            let z = x - mu;
            let r_z = z.norm();
            if r_z > tau {
                let s = tau / r_z;
                let (ex, ey) = (z.re / r_z, z.im / r_z);
                a += (1.0 - s) + s * ex * ex;
                b += s * ex * ey;
                d += (1.0 - s) + s * ey * ey;
            }
        }
        let det = a * d - b * b;
        let dir = if det > 1e-14 * (a + d).powi(2).max(1e-300) {
            Complex64::new((d * r.re - b * r.im) / det, (a * r.im - b * r.re) / det)
        } else {
            r / cnt
        };
        let base = psi(mu);
        let slope = -(r.re * dir.re + r.im * dir.im);
        let mut t = 1.0;
        while t > 1e-12 && psi(mu + dir * t) > base + 1e-4 * t * slope {
            t *= 0.5;
        }
        mu += dir * t;
    }

    let mut w: Vec<Complex64> = u.iter().map(|&x| soft(x - mu, tau)).collect();
    // remove the leftover roundoff in the column sum over the support
    let support: Vec<usize> = (0..w.len())
        .filter(|&k| w[k] != Complex64::default())
        .collect();
    let err = w.iter().sum::<Complex64>() - one;
    if support.is_empty() {
        w.iter_mut().for_each(|z| *z = one / cnt);
    } else {
        let share = err / support.len() as f64;
        support.iter().for_each(|&k| w[k] -= share);
    }

    let mut it = w.into_iter();
    for k in 0..n {
        m[(k, i)] = if k == i {
            Complex64::default()
        } else {
            it.next().unwrap()
        };
    }
}

/// `K_check` = Hermitian transpose of the `d` minimal eigenvectors of
/// `(I - W)(I - W)^H`.
pub fn compute_reduced_kernel(w: &WeightMatrix, d: usize) -> Result<ReducedKernel> {
    reduced_kernel_from(&w.entries, d)
}

pub fn reduced_kernel_from(w: &CMatrix, d: usize) -> Result<ReducedKernel> {
    let n = w.nrows();
    if d == 0 || d >= n {
        return Err(Error::param("d", format!("must be in 1..{n}, got {d}")));
    }
    let i_w = CMatrix::identity(n, n) - w;
    let m = &i_w * i_w.adjoint();
    let eig = hermitian_smallest_eigvecs(&m, d)?;
    Ok(ReducedKernel {
        entries: eig.vectors.adjoint(),
        eigenvalues: eig.values,
    })
}
