//! Reconstruction quality: NRMSE over the whole series and per frame,
//! magnitude error maps, and the zero-filled baseline.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::datamodel::{to_image, ImageSeries, KTDataset};
use crate::error::{Error, Result};
use crate::CMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub global_nrmse: f64,
    /// `(frame, nrmse)` for every frame with a non-zero reference.
    pub framewise: Vec<(usize, f64)>,
    pub mean: f64,
    /// Population standard deviation of the frame-wise values.
    pub std: f64,
    /// Frames whose reference vanishes; excluded from the aggregates.
    pub excluded: Vec<usize>,
}

fn check_same_shape(reference: &ImageSeries, estimate: &ImageSeries) -> Result<()> {
    if reference.cube.shape() != estimate.cube.shape() {
        return Err(Error::dim(format!(
            "reference is {:?} but estimate is {:?}",
            reference.cube.shape(),
            estimate.cube.shape()
        )));
    }
    Ok(())
}

fn ratio(diff: f64, reference: f64, what: &str) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::DivisionByZero(format!("{what} has zero norm")));
    }
    Ok(diff / reference)
}

fn frame_nrmse(reference: &CMatrix, estimate: &CMatrix) -> Result<f64> {
    ratio(
        (reference - estimate).norm(),
        reference.norm(),
        "reference frame",
    )
}

/// `||X - X_hat||_F / ||X||_F` over the full series.
pub fn nrmse(reference: &ImageSeries, estimate: &ImageSeries) -> Result<f64> {
    check_same_shape(reference, estimate)?;
    let (mut diff, mut norm) = (0.0, 0.0);
    for (x, y) in reference.cube.frames().iter().zip(estimate.cube.frames()) {
        diff += (x - y).norm_squared();
        norm += x.norm_squared();
    }
    ratio(diff.sqrt(), norm.sqrt(), "reference series")
}

/// Per-frame NRMSE, each frame normalized by its own reference norm.
pub fn framewise_nrmse(reference: &ImageSeries, estimate: &ImageSeries) -> Result<EvalReport> {
    let global_nrmse = nrmse(reference, estimate)?;
    let mut framewise = Vec::new();
    let mut excluded = Vec::new();
    for (j, (x, y)) in reference
        .cube
        .frames()
        .iter()
        .zip(estimate.cube.frames())
        .enumerate()
    {
        match frame_nrmse(x, y) {
            Ok(v) => framewise.push((j, v)),
            Err(_) => excluded.push(j),
        }
    }
    let n = framewise.len() as f64;
    let (mean, std) = if framewise.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = framewise.iter().map(|(_, v)| v).sum::<f64>() / n;
        let var = framewise
            .iter()
            .map(|(_, v)| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    };
    Ok(EvalReport {
        global_nrmse,
        framewise,
        mean,
        std,
        excluded,
    })
}

/// Pixelwise `|X - X_hat|`.
pub fn error_map(reference: &CMatrix, estimate: &CMatrix) -> Result<DMatrix<f64>> {
    if reference.shape() != estimate.shape() {
        return Err(Error::dim(format!(
            "frames differ in shape: {:?} vs {:?}",
            reference.shape(),
            estimate.shape()
        )));
    }
    Ok(reference.zip_map(estimate, |a, b| (a - b).norm()))
}

/// Inverse transform of the zero-filled k-space, frame by frame.
pub fn zero_filled_baseline(sampled: &KTDataset) -> ImageSeries {
    to_image(sampled)
}

/// CSV text: `frame,nrmse` header, one row per frame, then
/// `# mean=<v> std=<v>` (and `# excluded=...` when frames were dropped).
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("frame,nrmse\n");
    for (j, v) in &report.framewise {
        let _ = writeln!(out, "{j},{v:.10e}");
    }
    let _ = writeln!(out, "# mean={:.10e} std={:.10e}", report.mean, report.std);
    if !report.excluded.is_empty() {
        let list: Vec<String> = report.excluded.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(out, "# excluded={}", list.join(","));
    }
    out
}

pub fn write_report_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_csv(report)).map_err(|e| Error::io(path, e))
}
