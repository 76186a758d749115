//! (k,t)-space containers, the column-major Vec convention, navigator
//! extraction and the KBLM cube file format.
//!
//! k-space is stored *centered*: the DC coefficient of an `n_p x n_f` frame
//! lives at `(n_p / 2, n_f / 2)` (integer division). [`to_kspace`] and
//! [`to_image`] apply the unitary 2-D DFT plus the corresponding circular
//! shift, so the navigator lines are a contiguous slice of central rows.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{ComplexCube, Dft2Plan};
use crate::{CMatrix, CVector, Complex64};

/// Measured (k,t)-space data, centered per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct KTDataset {
    pub cube: ComplexCube,
}

/// Image-domain series.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSeries {
    pub cube: ComplexCube,
}

/// Navigator matrix `Y_nav` of size `(nu * n_f) x n_fr`.
#[derive(Clone, Debug, PartialEq)]
pub struct NavigatorMatrix {
    pub nu: usize,
    pub n_f: usize,
    pub entries: CMatrix,
}

impl KTDataset {
    pub fn new(cube: ComplexCube) -> Self {
        Self { cube }
    }

    /// The `n_k x n_fr` matrix `Y`.
    pub fn matrix(&self) -> CMatrix {
        self.cube.to_matrix()
    }

    pub fn from_matrix(y: &CMatrix, n_p: usize, n_f: usize) -> Result<Self> {
        Ok(Self::new(ComplexCube::from_matrix(y, n_p, n_f)?))
    }
}

impl ImageSeries {
    pub fn new(cube: ComplexCube) -> Self {
        Self { cube }
    }

    pub fn matrix(&self) -> CMatrix {
        self.cube.to_matrix()
    }

    pub fn from_matrix(x: &CMatrix, n_p: usize, n_f: usize) -> Result<Self> {
        Ok(Self::new(ComplexCube::from_matrix(x, n_p, n_f)?))
    }
}

impl NavigatorMatrix {
    pub fn n_fr(&self) -> usize {
        self.entries.ncols()
    }
}

/// Stacks the columns of `frame` one below the other.
pub fn vectorize(frame: &CMatrix) -> CVector {
    CVector::from_column_slice(frame.as_slice())
}

pub fn devectorize(v: &[Complex64], n_p: usize, n_f: usize) -> Result<CMatrix> {
    if v.len() != n_p * n_f {
        return Err(Error::dim(format!(
            "vector of length {} cannot be reshaped to {n_p}x{n_f}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(n_p, n_f, v))
}

/// Zero-based phase-line rows holding the `nu` navigator lines.
pub fn navigator_rows(n_p: usize, nu: usize) -> Range<usize> {
    let start = n_p.saturating_sub(nu) / 2;
    start..start + nu
}

pub fn extract_navigator(data: &KTDataset, nu: usize) -> Result<NavigatorMatrix> {
    let (n_p, n_f, n_fr) = data.cube.shape();
    if nu == 0 || nu > n_p {
        return Err(Error::param(
            "nu",
            format!("must be in 1..={n_p}, got {nu}"),
        ));
    }
    let rows = navigator_rows(n_p, nu);
    let mut entries = CMatrix::zeros(nu * n_f, n_fr);
    for (j, frame) in data.cube.frames().iter().enumerate() {
        let block = frame.rows(rows.start, nu);
        for f in 0..n_f {
            for (i, p) in rows.clone().enumerate() {
                entries[(f * nu + i, j)] = block[(p - rows.start, f)];
            }
        }
    }
    Ok(NavigatorMatrix { nu, n_f, entries })
}

/// Centered unitary 2-D Fourier transform between image frames and
/// k-space frames.
#[derive(Clone)]
pub struct KSpaceTransform {
    plan: Dft2Plan,
}

impl KSpaceTransform {
    pub fn new(n_p: usize, n_f: usize) -> Result<Self> {
        Ok(Self {
            plan: Dft2Plan::new(n_p, n_f)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.plan.shape()
    }

    /// Image buffer (column-major `n_p * n_f`) to centered k-space, in place.
    pub fn forward_slice(&self, data: &mut [Complex64]) {
        self.plan.forward_slice(data);
        let (n_p, n_f) = self.plan.shape();
        shift(data, n_p, n_f, true);
    }

    pub fn inverse_slice(&self, data: &mut [Complex64]) {
        let (n_p, n_f) = self.plan.shape();
        shift(data, n_p, n_f, false);
        self.plan.inverse_slice(data);
    }

    pub fn forward(&self, frame: &CMatrix) -> CMatrix {
        let mut out = frame.clone();
        self.forward_slice(out.as_mut_slice());
        out
    }

    pub fn inverse(&self, frame: &CMatrix) -> CMatrix {
        let mut out = frame.clone();
        self.inverse_slice(out.as_mut_slice());
        out
    }

    /// Applies the forward transform to every column of an `n_k x m` matrix.
    pub fn forward_columns(&self, m: &CMatrix) -> CMatrix {
        self.columns(m, true)
    }

    pub fn inverse_columns(&self, m: &CMatrix) -> CMatrix {
        self.columns(m, false)
    }

    fn columns(&self, m: &CMatrix, forward: bool) -> CMatrix {
        let (n_p, n_f) = self.plan.shape();
        assert_eq!(m.nrows(), n_p * n_f, "column length must equal n_p * n_f");
        let mut out = m.clone();
        out.as_mut_slice()
            .par_chunks_mut(n_p * n_f)
            .for_each(|col| {
                if forward {
                    self.forward_slice(col)
                } else {
                    self.inverse_slice(col)
                }
            });
        out
    }
}

/// Circular shift moving index 0 to `n / 2` along both axes (or back).
fn shift(data: &mut [Complex64], n_p: usize, n_f: usize, forward: bool) {
    let (sp, sf) = if forward {
        (n_p / 2, n_f / 2)
    } else {
        (n_p - n_p / 2, n_f - n_f / 2)
    };
    if sp % n_p == 0 && sf % n_f == 0 {
        return;
    }
    let src = data.to_vec();
    for f in 0..n_f {
        let tf = (f + sf) % n_f;
        for p in 0..n_p {
            data[tf * n_p + (p + sp) % n_p] = src[f * n_p + p];
        }
    }
}

pub fn to_kspace(images: &ImageSeries) -> KTDataset {
    let (n_p, n_f, _) = images.cube.shape();
    let t = KSpaceTransform::new(n_p, n_f).expect("cube geometry is non-empty");
    KTDataset::new(transform_cube(&images.cube, |buf| t.forward_slice(buf)))
}

pub fn to_image(data: &KTDataset) -> ImageSeries {
    let (n_p, n_f, _) = data.cube.shape();
    let t = KSpaceTransform::new(n_p, n_f).expect("cube geometry is non-empty");
    ImageSeries::new(transform_cube(&data.cube, |buf| t.inverse_slice(buf)))
}

fn transform_cube(cube: &ComplexCube, op: impl Fn(&mut [Complex64]) + Sync) -> ComplexCube {
    let mut frames = cube.frames().to_vec();
    frames.par_iter_mut().for_each(|f| op(f.as_mut_slice()));
    ComplexCube::new(frames).expect("shape preserved")
}

// ---------------------------------------------------------------------------
// KBLM cube files

const CUBE_MAGIC: &[u8; 4] = b"KBLM";
const CUBE_VERSION: u32 = 1;
const CUBE_HEADER_LEN: u64 = 24;

/// Domain tag stored in a cube file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeKind {
    KSpace = 0,
    Image = 1,
}

/// Writes a cube as little-endian float32 `(re, im)` pairs, column-major
/// within each frame, frames consecutive.
pub fn write_cube(path: impl AsRef<Path>, cube: &ComplexCube, kind: CubeKind) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let (n_p, n_f, n_fr) = cube.shape();
    let dims = [n_p, n_f, n_fr]
        .iter()
        .map(|&n| u32::try_from(n).map_err(|_| Error::DimensionOverflow { path: path.into() }))
        .collect::<Result<Vec<_>>>()?;

    let mut header = Vec::with_capacity(CUBE_HEADER_LEN as usize);
    header.extend_from_slice(CUBE_MAGIC);
    header.extend_from_slice(&CUBE_VERSION.to_le_bytes());
    header.extend_from_slice(&[kind as u8, 0, 0, 0]);
    for d in dims {
        header.extend_from_slice(&d.to_le_bytes());
    }
    let mut payload = Vec::with_capacity(cube.n_k() * n_fr * 8);
    for frame in cube.frames() {
        for z in frame.iter() {
            payload.extend_from_slice(&(z.re as f32).to_le_bytes());
            payload.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
    w.write_all(&header)
        .and_then(|_| w.write_all(&payload))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<(ComplexCube, CubeKind)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes, path)
}

fn decode_cube(bytes: &[u8], path: &Path) -> Result<(ComplexCube, CubeKind)> {
    if bytes.len() < 4 || &bytes[..4] != CUBE_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if (bytes.len() as u64) < CUBE_HEADER_LEN {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!(
                "header needs {CUBE_HEADER_LEN} bytes, file has {}",
                bytes.len()
            ),
        });
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CUBE_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let kind = match bytes[8] {
        0 => CubeKind::KSpace,
        1 => CubeKind::Image,
        k => {
            return Err(Error::MalformedHeader {
                path: path.into(),
                reason: format!("unknown kind byte {k}"),
            })
        }
    };
    let (n_p, n_f, n_fr) = (u32_at(12) as u64, u32_at(16) as u64, u32_at(20) as u64);
    if n_p == 0 || n_f == 0 || n_fr == 0 {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!("zero dimension in {n_p}x{n_f}x{n_fr}"),
        });
    }
    let expected = n_p
        .checked_mul(n_f)
        .and_then(|v| v.checked_mul(n_fr))
        .and_then(|v| v.checked_mul(8))
        .filter(|&v| usize::try_from(v).is_ok())
        .ok_or_else(|| Error::DimensionOverflow { path: path.into() })?;
    let found = bytes.len() as u64 - CUBE_HEADER_LEN;
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::MalformedHeader {
            path: path.into(),
            reason: format!("{} trailing bytes after payload", found - expected),
        });
    }

    let (n_p, n_f) = (n_p as usize, n_f as usize);
    let f32_at = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let frame_bytes = n_p * n_f * 8;
    let frames = (0..n_fr as usize)
        .map(|j| {
            let base = CUBE_HEADER_LEN as usize + j * frame_bytes;
            CMatrix::from_iterator(
                n_p,
                n_f,
                (0..n_p * n_f)
                    .map(|i| Complex64::new(f32_at(base + 8 * i), f32_at(base + 8 * i + 4))),
            )
        })
        .collect();
    Ok((ComplexCube::new(frames)?, kind))
}
