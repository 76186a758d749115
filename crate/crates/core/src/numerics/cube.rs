use crate::error::{Error, Result};
use crate::CMatrix;

/// A stack of equally shaped `n_p x n_f` complex frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCube {
    n_p: usize,
    n_f: usize,
    frames: Vec<CMatrix>,
}

impl ComplexCube {
    pub fn new(frames: Vec<CMatrix>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::dim("cube needs at least one frame"))?;
        let (n_p, n_f) = first.shape();
        if n_p == 0 || n_f == 0 {
            return Err(Error::dim("cube frames must be non-empty"));
        }
        if let Some((j, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.shape() != (n_p, n_f))
        {
            return Err(Error::dim(format!(
                "frame {j} has shape {:?}, expected ({n_p}, {n_f})",
                f.shape()
            )));
        }
        Ok(Self { n_p, n_f, frames })
    }

    pub fn zeros(n_p: usize, n_f: usize, n_fr: usize) -> Result<Self> {
        if n_p == 0 || n_f == 0 || n_fr == 0 {
            return Err(Error::dim("zero-sized cube geometry"));
        }
        Ok(Self {
            n_p,
            n_f,
            frames: vec![CMatrix::zeros(n_p, n_f); n_fr],
        })
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_fr(&self) -> usize {
        self.frames.len()
    }

    /// Number of voxels per frame, `n_p * n_f`.
    pub fn n_k(&self) -> usize {
        self.n_p * self.n_f
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_p, self.n_f, self.frames.len())
    }

    pub fn frames(&self) -> &[CMatrix] {
        &self.frames
    }

    pub fn frame(&self, j: usize) -> &CMatrix {
        &self.frames[j]
    }

    pub fn frames_mut(&mut self) -> &mut [CMatrix] {
        &mut self.frames
    }

    pub fn into_frames(self) -> Vec<CMatrix> {
        self.frames
    }

    /// The `n_k x n_fr` matrix whose column `j` is the column-major
    /// vectorization of frame `j`.
    pub fn to_matrix(&self) -> CMatrix {
        let n_k = self.n_k();
        let mut out = CMatrix::zeros(n_k, self.n_fr());
        for (j, f) in self.frames.iter().enumerate() {
            out.column_mut(j).copy_from_slice(f.as_slice());
        }
        out
    }

    pub fn from_matrix(m: &CMatrix, n_p: usize, n_f: usize) -> Result<Self> {
        if m.nrows() != n_p * n_f {
            return Err(Error::dim(format!(
                "matrix has {} rows, expected n_p*n_f = {}",
                m.nrows(),
                n_p * n_f
            )));
        }
        let frames = (0..m.ncols())
            .map(|j| CMatrix::from_column_slice(n_p, n_f, m.column(j).as_slice()))
            .collect();
        Self::new(frames)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frames
            .iter()
            .map(|f| f.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn map_frames(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self {
            n_p: self.n_p,
            n_f: self.n_f,
            frames: self.frames.iter().map(f).collect(),
        }
    }
}
