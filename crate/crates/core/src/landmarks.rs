//! Min-max (farthest-first) landmark selection over navigator columns.

use crate::datamodel::NavigatorMatrix;
use crate::error::{Error, Result};
use crate::CMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    /// Selected column indices, strictly increasing.
    pub indices: Vec<usize>,
    /// Indices in the order the traversal picked them.
    pub selection_order: Vec<usize>,
    /// Selected columns, in the order of `indices`.
    pub matrix: CMatrix,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn select_landmarks_minmax(y_nav: &NavigatorMatrix, n_l: usize) -> Result<LandmarkSet> {
    select_columns_minmax(&y_nav.entries, n_l)
}

/// Farthest-first traversal over the columns of `data`.
///
/// Starts from the column of largest norm, then repeatedly adds the column
/// whose distance to the selected set is largest. Ties go to the lowest
/// column index.
pub fn select_columns_minmax(data: &CMatrix, n_l: usize) -> Result<LandmarkSet> {
    let n = data.ncols();
    if n_l == 0 || n_l > n {
        return Err(Error::param(
            "n_l",
            format!("must be in 1..={n}, got {n_l}"),
        ));
    }
    let dist2 = |a: usize, b: usize| (data.column(a) - data.column(b)).norm_squared();

    let norms: Vec<f64> = data.column_iter().map(|c| c.norm_squared()).collect();
    let seed = argmax(norms.iter().copied().enumerate()).expect("at least one column");

    let mut selected = vec![false; n];
    let mut order = vec![seed];
    selected[seed] = true;
    let mut min_d: Vec<f64> = (0..n).map(|j| dist2(j, seed)).collect();

    while order.len() < n_l {
        let next = argmax((0..n).filter(|&j| !selected[j]).map(|j| (j, min_d[j])))
            .expect("unselected column remains");
        selected[next] = true;
        order.push(next);
        for j in 0..n {
            if !selected[j] {
                min_d[j] = min_d[j].min(dist2(j, next));
            }
        }
    }

    let mut indices = order.clone();
    indices.sort_unstable();
    let matrix = CMatrix::from_fn(data.nrows(), n_l, |i, k| data[(i, indices[k])]);
    Ok(LandmarkSet {
        indices,
        selection_order: order,
        matrix,
    })
}

/// First index attaining the maximum value.
fn argmax(it: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in it {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Largest distance from any column of `data` to its nearest selected column.
pub fn covering_radius(data: &CMatrix, indices: &[usize]) -> f64 {
    data.column_iter()
        .map(|col| {
            indices
                .iter()
                .map(|&k| (col - data.column(k)).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
