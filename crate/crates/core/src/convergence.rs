//! Stop criteria shared by the stages.

use crate::{Error, Result};

/// Window length of [`convergence_variance`].
pub const VARIANCE_WINDOW: usize = 5;

/// Rows with a Euclidean norm at or below this count as void.
pub const VOID_ROW_NORM: f64 = 1e-9;

/// Population variance of the last five compliance values.
pub fn convergence_variance(history: &[f64]) -> Result<f64> {
    if history.len() < VARIANCE_WINDOW {
        return Err(Error::InsufficientHistory {
            needed: VARIANCE_WINDOW,
            have: history.len(),
        });
    }
    let tail = &history[history.len() - VARIANCE_WINDOW..];
    let mean = tail.iter().sum::<f64>() / VARIANCE_WINDOW as f64;
    Ok(tail.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / VARIANCE_WINDOW as f64)
}

/// Whether one design row is dominated by a single entry:
/// `max_j x_j >= eta * |x|_2`. Near-zero rows are converged (void).
pub fn row_converged(row: &[f64], eta: f64) -> bool {
    let norm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
    if norm <= VOID_ROW_NORM {
        return true;
    }
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max >= eta * norm
}

/// Fraction of converged rows of a row-major matrix with `columns` columns.
pub fn fibre_convergence(values: &[f64], columns: usize, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config("eta", "must lie in (0, 1]"));
    }
    if columns == 0 || !values.len().is_multiple_of(columns) {
        return Err(Error::LengthMismatch {
            what: "design matrix",
            expected: columns * (values.len() / columns.max(1)),
            actual: values.len(),
        });
    }
    let rows = values.len() / columns;
    if rows == 0 {
        return Ok(1.0);
    }
    let converged = values
        .chunks_exact(columns)
        .filter(|row| row_converged(row, eta))
        .count();
    Ok(converged as f64 / rows as f64)
}
