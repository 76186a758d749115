use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::{CMatrix, Complex64};

/// Planned unitary 2-D DFT for `n_p x n_f` frames. No shifting is applied;
/// the DC term lives at index `(0, 0)`.
#[derive(Clone)]
pub struct Dft2Plan {
    n_p: usize,
    n_f: usize,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
}

impl Dft2Plan {
    pub fn new(n_p: usize, n_f: usize) -> Result<Self> {
        if n_p == 0 || n_f == 0 {
            return Err(Error::dim("dft2 of an empty frame"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_p,
            n_f,
            col_fwd: planner.plan_fft_forward(n_p),
            col_inv: planner.plan_fft_inverse(n_p),
            row_fwd: planner.plan_fft_forward(n_f),
            row_inv: planner.plan_fft_inverse(n_f),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_p, self.n_f)
    }

    pub fn forward(&self, frame: &mut CMatrix) {
        self.apply(frame, &*self.col_fwd, &*self.row_fwd);
    }

    pub fn inverse(&self, frame: &mut CMatrix) {
        self.apply(frame, &*self.col_inv, &*self.row_inv);
    }

    /// Transforms a column-major `n_p * n_f` buffer in place.
    pub fn forward_slice(&self, data: &mut [Complex64]) {
        self.apply_slice(data, &*self.col_fwd, &*self.row_fwd);
    }

    pub fn inverse_slice(&self, data: &mut [Complex64]) {
        self.apply_slice(data, &*self.col_inv, &*self.row_inv);
    }

    fn apply(&self, frame: &mut CMatrix, col: &dyn Fft<f64>, row: &dyn Fft<f64>) {
        assert_eq!(
            frame.shape(),
            (self.n_p, self.n_f),
            "dft2 plan shape mismatch"
        );
        self.apply_slice(frame.as_mut_slice(), col, row);
    }

    fn apply_slice(&self, data: &mut [Complex64], col: &dyn Fft<f64>, row: &dyn Fft<f64>) {
        let (n_p, n_f) = (self.n_p, self.n_f);
        assert_eq!(data.len(), n_p * n_f, "dft2 plan shape mismatch");
        // columns are contiguous in column-major storage
        col.process(data);
        let mut rows = vec![Complex64::default(); n_p * n_f];
        for f in 0..n_f {
            for p in 0..n_p {
                rows[p * n_f + f] = data[f * n_p + p];
            }
        }
        row.process(&mut rows);
        let scale = 1.0 / ((n_p * n_f) as f64).sqrt();
        for f in 0..n_f {
            for p in 0..n_p {
                data[f * n_p + p] = rows[p * n_f + f] * scale;
            }
        }
    }
}

/// Planned unitary 1-D DFT applied independently along each row of an
/// `n_k x n_fr` matrix (the temporal profile of every voxel).
#[derive(Clone)]
pub struct DftTimePlan {
    n_fr: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl DftTimePlan {
    pub fn new(n_fr: usize) -> Result<Self> {
        if n_fr == 0 {
            return Err(Error::dim("temporal DFT needs at least one frame"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_fr,
            fwd: planner.plan_fft_forward(n_fr),
            inv: planner.plan_fft_inverse(n_fr),
        })
    }

    pub fn forward(&self, series: &CMatrix) -> CMatrix {
        self.apply(series, &*self.fwd)
    }

    pub fn inverse(&self, series: &CMatrix) -> CMatrix {
        self.apply(series, &*self.inv)
    }

    fn apply(&self, series: &CMatrix, plan: &dyn Fft<f64>) -> CMatrix {
        let (n_k, n_fr) = series.shape();
        assert_eq!(n_fr, self.n_fr, "temporal DFT plan length mismatch");
        // nalgebra stores column-major, so the transpose holds each voxel's
        // time profile contiguously
        let mut t = series.transpose();
        let scale = 1.0 / (n_fr as f64).sqrt();
        t.as_mut_slice()
            .par_chunks_mut(n_fr * 64)
            .for_each(|chunk| {
                plan.process(chunk);
                chunk.iter_mut().for_each(|z| *z *= scale);
            });
        debug_assert_eq!(t.shape(), (n_fr, n_k));
        t.transpose()
    }
}

/// Unitary 2-D DFT of a single frame.
pub fn dft2(frame: &CMatrix) -> Result<CMatrix> {
    let plan = Dft2Plan::new(frame.nrows(), frame.ncols())?;
    let mut out = frame.clone();
    plan.forward(&mut out);
    Ok(out)
}

/// Unitary inverse 2-D DFT of a single frame.
pub fn idft2(frame: &CMatrix) -> Result<CMatrix> {
    let plan = Dft2Plan::new(frame.nrows(), frame.ncols())?;
    let mut out = frame.clone();
    plan.inverse(&mut out);
    Ok(out)
}

/// Unitary DFT along every row of an `n_k x n_fr` series.
pub fn dft_time(series: &CMatrix) -> Result<CMatrix> {
    if series.nrows() == 0 {
        return Err(Error::dim("temporal DFT of an empty series"));
    }
    Ok(DftTimePlan::new(series.ncols())?.forward(series))
}

pub fn idft_time(series: &CMatrix) -> Result<CMatrix> {
    if series.nrows() == 0 {
        return Err(Error::dim("temporal DFT of an empty series"));
    }
    Ok(DftTimePlan::new(series.ncols())?.inverse(series))
}
