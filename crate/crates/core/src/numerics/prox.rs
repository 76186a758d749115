use crate::error::{Error, Result};
use crate::{CMatrix, Complex64};

/// Complex soft-thresholding without argument checks; callers guarantee
/// `threshold >= 0`.
#[inline]
pub fn soft(value: Complex64, threshold: f64) -> Complex64 {
    let mag = value.norm();
    if mag <= threshold {
        Complex64::default()
    } else {
        value * (1.0 - threshold / mag)
    }
}

/// Prox of `t |.|` on the complex plane: shrinks the modulus by `t` and
/// keeps the phase.
pub fn soft_threshold(value: Complex64, threshold: f64) -> Result<Complex64> {
    if !(threshold >= 0.0) {
        return Err(Error::param(
            "threshold",
            format!("must be >= 0, got {threshold}"),
        ));
    }
    Ok(soft(value, threshold))
}

/// Euclidean projection onto the ball of the given radius.
pub fn project_column_ball(column: &[Complex64], radius: f64) -> Result<Vec<Complex64>> {
    check_radius(radius)?;
    let mut out = column.to_vec();
    ball_in_place(&mut out, radius);
    Ok(out)
}

/// Euclidean projection onto `{b : sum(b) = 1}`.
pub fn project_colsum_one(column: &[Complex64]) -> Vec<Complex64> {
    let mut out = column.to_vec();
    colsum_one_in_place(&mut out);
    out
}

/// Projects every column of `m` onto the ball of radius `radius`.
pub fn project_columns_ball(m: &mut CMatrix, radius: f64) -> Result<()> {
    check_radius(radius)?;
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > radius {
            col *= Complex64::from(radius / norm);
        }
    }
    Ok(())
}

/// Projects every column of `m` onto the hyperplane `1^T b = 1`.
pub fn project_columns_colsum_one(m: &mut CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return;
    }
    for mut col in m.column_iter_mut() {
        let shift = (col.sum() - Complex64::from(1.0)) / n as f64;
        col.iter_mut().for_each(|z| *z -= shift);
    }
}

pub(crate) fn colsum_one_in_place(b: &mut [Complex64]) {
    if b.is_empty() {
        return;
    }
    let shift = (b.iter().sum::<Complex64>() - Complex64::from(1.0)) / b.len() as f64;
    b.iter_mut().for_each(|z| *z -= shift);
}

fn ball_in_place(v: &mut [Complex64], radius: f64) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        v.iter_mut().for_each(|z| *z *= s);
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param(
            "radius",
            format!("must be positive, got {radius}"),
        ));
    }
    Ok(())
}
