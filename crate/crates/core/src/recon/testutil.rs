//! Small random instances shared by the solver tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem::{ReconProblem, ReconState, Weights};
use crate::acquisition::SamplingMask;
use crate::datamodel::KTDataset;
use crate::manifold::reduced_kernel_from;
use crate::numerics::project_columns_colsum_one;
use crate::{CMatrix, Complex64};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Orthonormal-row kernel from a random column-sum-one weight matrix with
/// zero diagonal.
pub(crate) fn random_k_check(rng: &mut ChaCha8Rng, n_l: usize, d: usize) -> CMatrix {
    let mut w = random_matrix(rng, n_l, n_l);
    for i in 0..n_l {
        w[(i, i)] = Complex64::default();
    }
    for (j, mut col) in w.column_iter_mut().enumerate() {
        let s: Complex64 = col.iter().sum();
        let off = (s - Complex64::new(1.0, 0.0)) / (n_l - 1) as f64;
        for (i, v) in col.iter_mut().enumerate() {
            if i != j {
                *v -= off;
            }
        }
    }
    reduced_kernel_from(&w, d).unwrap().entries
}

pub(crate) fn random_mask(rng: &mut ChaCha8Rng, n_p: usize, n_fr: usize) -> SamplingMask {
    let mut lines: Vec<bool> = (0..n_p * n_fr).map(|_| rng.gen_bool(0.5)).collect();
    for j in 0..n_fr {
        lines[j * n_p + rng.gen_range(0..n_p)] = true;
    }
    SamplingMask::new(n_p, n_fr, 0, lines).unwrap()
}

pub(crate) struct Instance {
    pub problem: ReconProblem,
    pub state: ReconState,
    pub weights: Weights,
}

/// Random instance of geometry `n_p x n_f x n_fr` with `n_l` landmarks and
/// `d` kernel rows; the state is feasible.
pub(crate) fn instance(
    seed: u64,
    (n_p, n_f, n_fr): (usize, usize, usize),
    n_l: usize,
    d: usize,
) -> Instance {
    let mut r = rng(seed);
    let k_check = random_k_check(&mut r, n_l, d);
    let mask = random_mask(&mut r, n_p, n_fr);
    let y = random_matrix(&mut r, n_p * n_f, n_fr);
    let data = KTDataset::from_matrix(&y, n_p, n_f).unwrap();
    let problem = ReconProblem::from_parts(&data, &mask, k_check).unwrap();
    let dictionary = random_matrix(&mut r, n_p * n_f, d) * Complex64::new(0.5, 0.0);
    let mut coeffs = random_matrix(&mut r, n_l, n_fr);
    project_columns_colsum_one(&mut coeffs);
    let aux = random_matrix(&mut r, n_p * n_f, n_fr);
    let weights = Weights {
        lambda1: 0.7,
        lambda2: 0.05,
        lambda3: 0.03,
        c_d: 3.0,
        tau_d: 0.1,
        tau_b: 0.2,
    };
    let state = ReconState {
        dictionary,
        coeffs,
        aux,
        gamma: 1.0,
        n: 0,
    };
    Instance {
        problem,
        state,
        weights,
    }
}
