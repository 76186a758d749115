//! Python bindings: phantoms, masks, sampling, reconstruction and metrics.
//!
//! Cubes cross the boundary as nested lists `[frame][row][col]` of complex
//! numbers; masks as `[frame][line]` booleans.

use kbilmdm::acquisition::{
    acceleration_rate, apply_sampling, generate_cartesian_mask, generate_phantom, read_mask,
    write_mask, SamplingMask,
};
use kbilmdm::config::PipelineConfig;
use kbilmdm::datamodel::{
    extract_navigator, read_cube, to_image, to_kspace, write_cube, CubeKind, ImageSeries, KTDataset,
};
use kbilmdm::metrics::{framewise_nrmse, nrmse, zero_filled_baseline};
use kbilmdm::numerics::ComplexCube;
use kbilmdm::recon::run_reconstruction;
use kbilmdm::{CMatrix, Complex64};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: kbilmdm::Error) -> PyErr {
    match e {
        kbilmdm::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Frames = Vec<Vec<Vec<Complex64>>>;

fn cube_to_lists(cube: &ComplexCube) -> Frames {
    cube.frames()
        .iter()
        .map(|f| {
            (0..f.nrows())
                .map(|r| f.row(r).iter().copied().collect())
                .collect()
        })
        .collect()
}

fn cube_from_lists(frames: Frames) -> PyResult<ComplexCube> {
    let mats = frames
        .into_iter()
        .enumerate()
        .map(|(j, rows)| {
            let n_f = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != n_f) {
                return Err(PyValueError::new_err(format!("frame {j}: ragged rows")));
            }
            Ok(CMatrix::from_fn(rows.len(), n_f, |r, c| rows[r][c]))
        })
        .collect::<PyResult<Vec<_>>>()?;
    ComplexCube::new(mats).map_err(err)
}

/// Image-domain series.
#[pyclass(
    name = "ImageSeries",
    module = "pykbilmdm",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyImageSeries(ImageSeries);

#[pymethods]
impl PyImageSeries {
    #[new]
    fn new(frames: Frames) -> PyResult<Self> {
        Ok(Self(ImageSeries::new(cube_from_lists(frames)?)))
    }

    /// `(n_p, n_f, n_fr)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.0.cube.shape()
    }

    fn frames(&self) -> Frames {
        cube_to_lists(&self.0.cube)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_cube(path, &self.0.cube, CubeKind::Image).map_err(err)
    }

    fn __repr__(&self) -> String {
        let (p, f, n) = self.0.cube.shape();
        format!("ImageSeries(n_p={p}, n_f={f}, n_fr={n})")
    }
}

/// Centered (k,t)-space data.
#[pyclass(name = "KSpace", module = "pykbilmdm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKSpace(KTDataset);

#[pymethods]
impl PyKSpace {
    #[new]
    fn new(frames: Frames) -> PyResult<Self> {
        Ok(Self(KTDataset::new(cube_from_lists(frames)?)))
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.0.cube.shape()
    }

    fn frames(&self) -> Frames {
        cube_to_lists(&self.0.cube)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_cube(path, &self.0.cube, CubeKind::KSpace).map_err(err)
    }

    fn __repr__(&self) -> String {
        let (p, f, n) = self.0.cube.shape();
        format!("KSpace(n_p={p}, n_f={f}, n_fr={n})")
    }
}

/// Cartesian line mask with `nu` central navigator lines per frame.
#[pyclass(
    name = "SamplingMask",
    module = "pykbilmdm",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyMask(SamplingMask);

#[pymethods]
impl PyMask {
    #[new]
    fn new(lines: Vec<Vec<bool>>, nu: usize) -> PyResult<Self> {
        let n_p = lines.first().map_or(0, Vec::len);
        let n_fr = lines.len();
        if lines.iter().any(|l| l.len() != n_p) {
            return Err(PyValueError::new_err(
                "every frame needs the same number of lines",
            ));
        }
        let flat = lines.into_iter().flatten().collect();
        Ok(Self(SamplingMask::new(n_p, n_fr, nu, flat).map_err(err)?))
    }

    /// Every line of every frame.
    #[staticmethod]
    fn full(n_p: usize, n_fr: usize, nu: usize) -> PyResult<Self> {
        Ok(Self(SamplingMask::full(n_p, n_fr, nu).map_err(err)?))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self(read_mask(path).map_err(err)?))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_mask(path, &self.0).map_err(err)
    }

    #[getter]
    fn n_p(&self) -> usize {
        self.0.n_p()
    }

    #[getter]
    fn n_fr(&self) -> usize {
        self.0.n_fr()
    }

    #[getter]
    fn nu(&self) -> usize {
        self.0.nu()
    }

    fn lines(&self) -> Vec<Vec<bool>> {
        (0..self.0.n_fr())
            .map(|j| self.0.frame_lines(j).to_vec())
            .collect()
    }

    fn acceleration(&self) -> PyResult<f64> {
        acceleration_rate(&self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SamplingMask(n_p={}, n_fr={}, nu={})",
            self.0.n_p(),
            self.0.n_fr(),
            self.0.nu()
        )
    }
}

/// Reconstructed images plus solver diagnostics.
#[pyclass(name = "Reconstruction", module = "pykbilmdm", frozen, get_all)]
struct PyReconstruction {
    images: PyImageSeries,
    objective: Vec<f64>,
    gammas: Vec<f64>,
    iterations: usize,
    converged: bool,
    landmarks: Vec<usize>,
}

/// Synthetic periodic phantom.
#[pyfunction]
#[pyo3(signature = (n_p=64, n_f=64, n_fr=48, n_cycles=4, seed=7, noise_std=0.0))]
fn phantom(
    n_p: usize,
    n_f: usize,
    n_fr: usize,
    n_cycles: usize,
    seed: u64,
    noise_std: f64,
) -> PyResult<PyImageSeries> {
    let mut spec = kbilmdm::acquisition::PhantomSpec::new(n_p, n_f, n_fr, n_cycles, seed);
    spec.noise_std = noise_std;
    Ok(PyImageSeries(generate_phantom(&spec).map_err(err)?))
}

/// Random Cartesian mask at the given acceleration rate.
#[pyfunction]
#[pyo3(signature = (n_p, n_fr, nu=4, rate=8.0, seed=7))]
fn cartesian_mask(n_p: usize, n_fr: usize, nu: usize, rate: f64, seed: u64) -> PyResult<PyMask> {
    Ok(PyMask(
        generate_cartesian_mask(n_p, n_fr, nu, rate, seed).map_err(err)?,
    ))
}

#[pyfunction(name = "to_kspace")]
fn py_to_kspace(images: &PyImageSeries) -> PyKSpace {
    PyKSpace(to_kspace(&images.0))
}

#[pyfunction(name = "to_image")]
fn py_to_image(data: &PyKSpace) -> PyImageSeries {
    PyImageSeries(to_image(&data.0))
}

/// Zeroes the unsampled lines.
#[pyfunction]
fn sample(mask: &PyMask, data: &PyKSpace) -> PyResult<PyKSpace> {
    Ok(PyKSpace(apply_sampling(&mask.0, &data.0).map_err(err)?))
}

#[pyfunction]
fn zero_filled(sampled: &PyKSpace) -> PyImageSeries {
    PyImageSeries(zero_filled_baseline(&sampled.0))
}

/// Reconstructs from sampled k-space. `options` maps configuration keys
/// such as `"recon.lambda1"` or `"model.d"` to values.
#[pyfunction]
#[pyo3(signature = (sampled, mask, options=None))]
fn reconstruct(
    py: Python<'_>,
    sampled: &PyKSpace,
    mask: &PyMask,
    options: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyReconstruction> {
    let mut c = PipelineConfig::default();
    if let Some(opts) = options {
        for (k, v) in opts.iter() {
            let key: String = k.extract()?;
            c.set(&key, &v.str()?.to_cow()?).map_err(err)?;
        }
    }
    let (data, m) = (sampled.0.clone(), mask.0.clone());
    let r = py
        .detach(move || {
            let nav = extract_navigator(&data, m.nu())?;
            run_reconstruction(&data, &m, &nav, &c.model, &c.recon)
        })
        .map_err(err)?;
    Ok(PyReconstruction {
        images: PyImageSeries(r.images),
        objective: r.diagnostics.objective,
        gammas: r.diagnostics.gammas,
        iterations: r.diagnostics.iterations,
        converged: r.diagnostics.converged,
        landmarks: r.landmarks.indices,
    })
}

/// Global normalized RMSE of `estimate` against `reference`.
#[pyfunction(name = "nrmse")]
fn py_nrmse(reference: &PyImageSeries, estimate: &PyImageSeries) -> PyResult<f64> {
    nrmse(&reference.0, &estimate.0).map_err(err)
}

/// Per-frame NRMSE as `[(frame, value)]`; all-zero reference frames are left out.
#[pyfunction(name = "framewise_nrmse")]
fn py_framewise_nrmse(
    reference: &PyImageSeries,
    estimate: &PyImageSeries,
) -> PyResult<Vec<(usize, f64)>> {
    Ok(framewise_nrmse(&reference.0, &estimate.0)
        .map_err(err)?
        .framewise)
}

/// Reads a cube file, returning an `ImageSeries` or `KSpace`.
#[pyfunction]
fn load(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let (cube, kind) = read_cube(path).map_err(err)?;
    Ok(match kind {
        CubeKind::Image => Py::new(py, PyImageSeries(ImageSeries::new(cube)))?.into_any(),
        CubeKind::KSpace => Py::new(py, PyKSpace(KTDataset::new(cube)))?.into_any(),
    })
}

#[pymodule]
fn pykbilmdm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImageSeries>()?;
    m.add_class::<PyKSpace>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(cartesian_mask, m)?)?;
    m.add_function(wrap_pyfunction!(py_to_kspace, m)?)?;
    m.add_function(wrap_pyfunction!(py_to_image, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(zero_filled, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(py_nrmse, m)?)?;
    m.add_function(wrap_pyfunction!(py_framewise_nrmse, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    Ok(())
}
