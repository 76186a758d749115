//! Strongly convex subproblems of one approximation step.
//!
//! Both block solvers work on small `d x d` Gram blocks grouped by phase
//! encoding line, so inner iterations need no transforms. The `D` block is
//! solved in k-space coordinates `A = F(D)`; `F` is unitary and preserves
//! column norms, so the ball constraint carries over unchanged.

use super::problem::{ReconProblem, ReconState, Weights};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, l1_norm, project_columns_ball, real_inner, soft};
use crate::{CMatrix, Complex64};

/// Outcome of one inner solve.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    pub converged: bool,
    /// Subproblem objective at the incumbent.
    pub initial_objective: f64,
    /// Subproblem objective at the returned point.
    pub final_objective: f64,
}

/// Quantities of the incumbent shared by both block solvers.
pub(crate) struct Incumbent {
    /// `M = K_check B_n`, `d x n_fr`.
    pub m: CMatrix,
    /// `A_n = F(D_n)`, `n_k x d`.
    pub a: CMatrix,
    /// `F_t^-1(Z_n)` (image domain).
    pub z_image: CMatrix,
}

impl Incumbent {
    pub(crate) fn new(problem: &ReconProblem, s: &ReconState) -> Self {
        Self {
            m: problem.k_check() * &s.coeffs,
            a: problem.fourier(&s.dictionary),
            z_image: problem.inverse_time_fourier(&s.aux),
        }
    }
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `out[r, :] = a[r, :] * blocks[r % n_p]`.
fn rowwise_apply(a: &CMatrix, blocks: &[CMatrix]) -> CMatrix {
    let (n_k, d) = a.shape();
    let n_p = blocks.len();
    let mut out = CMatrix::zeros(n_k, d);
    let mut row = vec![Complex64::default(); d];
    for r in 0..n_k {
        let g = &blocks[r % n_p];
        for (l, v) in row.iter_mut().enumerate() {
            *v = a[(r, l)];
        }
        for k in 0..d {
            let mut acc = Complex64::default();
            for (l, v) in row.iter().enumerate() {
                acc += v * g[(l, k)];
            }
            out[(r, k)] = acc;
        }
    }
    out
}

fn lambda_max(h: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.values.iter().copied().fold(0.0, f64::max))
}

/// Objective and gradient of the `D` subproblem in k-space coordinates.
struct DModel<'a> {
    /// `G_p = sum_{j: p sampled} m_j m_j^H`, one per phase line.
    g: Vec<CMatrix>,
    /// `S(Y) M^H`.
    c: CMatrix,
    /// `M M^H`.
    p: CMatrix,
    /// `F(F_t^-1(Z_n) M^H)`.
    q: CMatrix,
    a_n: &'a CMatrix,
    constant: f64,
    lambda1: f64,
    tau: f64,
}

impl<'a> DModel<'a> {
    fn new(problem: &ReconProblem, inc: &'a Incumbent, w: &Weights) -> Self {
        let (n_p, d) = (problem.n_p(), problem.d());
        let m = &inc.m;
        let mut g = vec![CMatrix::zeros(d, d); n_p];
        for j in 0..problem.n_fr() {
            let mj = m.column(j);
            let outer = mj * mj.adjoint();
            for (p, on) in problem.mask().frame_lines(j).iter().enumerate() {
                if *on {
                    g[p] += &outer;
                }
            }
        }
        let mh = m.adjoint();
        let c = problem.sampled() * &mh;
        let p = m * &mh;
        let q = problem.fourier(&(&inc.z_image * &mh));
        let constant =
            0.5 * problem.sampled().norm_squared() + 0.5 * w.lambda1 * inc.z_image.norm_squared();
        Self {
            g,
            c,
            p,
            q,
            a_n: &inc.a,
            constant,
            lambda1: w.lambda1,
            tau: w.tau_d,
        }
    }

    fn lipschitz(&self) -> Result<f64> {
        Ok((1.0 + self.lambda1) * lambda_max(&self.p)? + self.tau)
    }

    fn value_and_gradient(&self, a: &CMatrix) -> (f64, CMatrix) {
        let ag = rowwise_apply(a, &self.g);
        let ap = a * &self.p;
        let diff = a - self.a_n;
        let value = self.constant + 0.5 * real_inner(a, &ag) - real_inner(a, &self.c)
            + self.lambda1 * (0.5 * real_inner(a, &ap) - real_inner(a, &self.q))
            + 0.5 * self.tau * diff.norm_squared();
        let grad = ag - &self.c + (ap - &self.q) * cr(self.lambda1) + diff * cr(self.tau);
        (value, grad)
    }

    fn value(&self, a: &CMatrix) -> f64 {
        self.value_and_gradient(a).0
    }
}

/// Minimizes the `D` subproblem over the column balls of radius `c_d` with
/// a monotone accelerated projected gradient method. The returned point
/// never has a larger subproblem objective than the incumbent.
pub fn solve_d_subproblem(
    problem: &ReconProblem,
    s: &ReconState,
    w: &Weights,
    tol: f64,
    max_iter: usize,
) -> Result<(CMatrix, InnerReport)> {
    problem.check_state(s)?;
    let inc = Incumbent::new(problem, s);
    solve_d_with(problem, s, w, &inc, tol, max_iter)
}

pub(crate) fn solve_d_with(
    problem: &ReconProblem,
    s: &ReconState,
    w: &Weights,
    inc: &Incumbent,
    tol: f64,
    max_iter: usize,
) -> Result<(CMatrix, InnerReport)> {
    if !(w.c_d > 0.0) {
        return Err(Error::param("c_d", "must be positive"));
    }
    let model = DModel::new(problem, inc, w);
    let step = 1.0 / model.lipschitz()?.max(f64::MIN_POSITIVE);
    let f0 = model.value(&inc.a);

    let mut x = inc.a.clone();
    let mut fx = f0;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (_, grad) = model.value_and_gradient(&y);
        let mut z = &y - grad * cr(step);
        project_columns_ball(&mut z, w.c_d)?;
        let fz = model.value(&z);
        let gap = (&z - &y).norm();
        let scale = z.norm().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x.clone();
        if fz <= fx {
            x = z.clone();
            fx = fz;
        }
        y = &x + (&z - &x) * cr(t / t_next) + (&x - &x_prev) * cr((t - 1.0) / t_next);
        t = t_next;
        if gap <= tol * scale {
            converged = true;
            break;
        }
    }

    let report = InnerReport {
        iterations,
        converged,
        initial_objective: f0,
        final_objective: fx,
    };
    if fx >= f0 {
        return Ok((
            s.dictionary.clone(),
            InnerReport {
                final_objective: f0,
                ..report
            },
        ));
    }
    let mut d = problem.inverse_fourier(&x);
    project_columns_ball(&mut d, w.c_d)?;
    Ok((d, report))
}

/// Per-frame quadratic model of the `B` subproblem:
/// smooth part `sum_j 0.5 v_j^H H_j v_j - Re(v_j^H h_j)` with `v_j = K_check b_j`.
struct BModel<'a> {
    /// `H_j`, one `d x d` block per frame.
    h: Vec<CMatrix>,
    /// `h_j` as the columns of a `d x n_fr` matrix.
    lin: CMatrix,
    k_check: &'a CMatrix,
    b_n: &'a CMatrix,
    constant: f64,
    lambda2: f64,
    tau: f64,
}

impl<'a> BModel<'a> {
    fn new(problem: &'a ReconProblem, s: &'a ReconState, inc: &Incumbent, w: &Weights) -> Self {
        let (n_p, d, n_k) = (problem.n_p(), problem.d(), problem.n_k());
        let a = &inc.a;
        let mut rp = vec![CMatrix::zeros(d, d); n_p];
        for r in 0..n_k {
            let row = a.row(r);
            rp[r % n_p] += row.adjoint() * row;
        }
        let e = a.adjoint() * a * cr(w.lambda1);
        let h = (0..problem.n_fr())
            .map(|j| {
                let mut hj = e.clone();
                for (p, on) in problem.mask().frame_lines(j).iter().enumerate() {
                    if *on {
                        hj += &rp[p];
                    }
                }
                hj
            })
            .collect();
        let lin =
            a.adjoint() * problem.sampled() + s.dictionary.adjoint() * &inc.z_image * cr(w.lambda1);
        let constant =
            0.5 * problem.sampled().norm_squared() + 0.5 * w.lambda1 * inc.z_image.norm_squared();
        Self {
            h,
            lin,
            k_check: problem.k_check(),
            b_n: &s.coeffs,
            constant,
            lambda2: w.lambda2,
            tau: w.tau_b,
        }
    }

    fn lipschitz(&self) -> Result<f64> {
        let mut l: f64 = 0.0;
        for hj in &self.h {
            l = l.max(lambda_max(hj)?);
        }
        Ok(l + self.tau)
    }

    /// Smooth value and gradient.
    fn smooth(&self, b: &CMatrix) -> (f64, CMatrix) {
        let v = self.k_check * b;
        let mut hv = CMatrix::zeros(v.nrows(), v.ncols());
        for (j, hj) in self.h.iter().enumerate() {
            hv.set_column(j, &(hj * v.column(j)));
        }
        let diff = b - self.b_n;
        let value = self.constant + 0.5 * real_inner(&v, &hv) - real_inner(&v, &self.lin)
            + 0.5 * self.tau * diff.norm_squared();
        let grad = self.k_check.adjoint() * (hv - &self.lin) + diff * cr(self.tau);
        (value, grad)
    }

    fn value(&self, b: &CMatrix) -> f64 {
        self.smooth(b).0 + self.lambda2 * l1_norm(b)
    }
}

fn colsum_project(b: &mut CMatrix) {
    crate::numerics::project_columns_colsum_one(b);
}

/// Minimizes the `B` subproblem over `{1^T B = 1^T}` with three-operator
/// splitting (projection, soft threshold, gradient step). Returns the best
/// feasible iterate, never worse than the incumbent.
pub fn solve_b_subproblem(
    problem: &ReconProblem,
    s: &ReconState,
    w: &Weights,
    tol: f64,
    max_iter: usize,
) -> Result<(CMatrix, InnerReport)> {
    problem.check_state(s)?;
    let inc = Incumbent::new(problem, s);
    solve_b_with(problem, s, w, &inc, tol, max_iter)
}

pub(crate) fn solve_b_with(
    problem: &ReconProblem,
    s: &ReconState,
    w: &Weights,
    inc: &Incumbent,
    tol: f64,
    max_iter: usize,
) -> Result<(CMatrix, InnerReport)> {
    let model = BModel::new(problem, s, inc, w);
    let step = 1.0 / model.lipschitz()?.max(f64::MIN_POSITIVE);
    let threshold = step * w.lambda2;
    let f0 = model.value(&s.coeffs);

    let mut best: Option<(CMatrix, f64)> = None;
    let mut z = s.coeffs.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut xg = z.clone();
        colsum_project(&mut xg);
        let (smooth, grad) = model.smooth(&xg);
        let fg = smooth + w.lambda2 * l1_norm(&xg);
        let better = match &best {
            Some((_, fb)) => fg < *fb,
            None => fg < f0,
        };
        if better {
            best = Some((xg.clone(), fg));
        }
        let mut xf = &xg * cr(2.0) - &z - grad * cr(step);
        xf.apply(|v| *v = soft(*v, threshold));
        let delta = &xf - &xg;
        let gap = delta.norm();
        z += delta;
        if gap <= tol * xg.norm().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let report = InnerReport {
        iterations,
        converged,
        initial_objective: f0,
        final_objective: f0,
    };
    Ok(match best {
        Some((b, fb)) => (
            b,
            InnerReport {
                final_objective: fb,
                ..report
            },
        ),
        None => (s.coeffs.clone(), report),
    })
}

/// Closed-form `Z` update: `soft(F_t(D_n K_check B_n), lambda3 / lambda1)`.
pub fn update_z(problem: &ReconProblem, s: &ReconState, w: &Weights) -> Result<CMatrix> {
    if !(w.lambda1 > 0.0) {
        return Err(Error::param("lambda1", "must be positive for the Z update"));
    }
    problem.check_state(s)?;
    let x = problem.reconstruction(&s.dictionary, &s.coeffs);
    let mut z = problem.time_fourier(&x);
    let t = w.lambda3 / w.lambda1;
    z.apply(|v| *v = soft(*v, t));
    Ok(z)
}
