//! Small dense 3x3 algebra and a profile (skyline) Cholesky factorisation.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Sub};

/// Dense 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    #[inline]
    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    /// Frobenius inner product `sum_ij a_ij b_ij`.
    #[inline]
    pub fn dot(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Mul for Mat3 {
    type Output = Mat3;

    #[inline]
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j] + self.0[i][2] * rhs.0[2][j];
            }
        }
        Mat3(out)
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;

    #[inline]
    fn mul(self, s: f64) -> Mat3 {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(out)
    }
}

impl Add for Mat3 {
    type Output = Mat3;

    #[inline]
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        out += rhs;
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;

    #[inline]
    fn sub(self, rhs: Mat3) -> Mat3 {
        self + rhs * -1.0
    }
}

impl AddAssign for Mat3 {
    #[inline]
    fn add_assign(&mut self, rhs: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

/// Pivot failure reported by [`SkylineMatrix::factorize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub row: usize,
    pub pivot: f64,
}

/// Symmetric matrix stored by its lower-triangular row envelope.
///
/// Row `i` holds columns `first[i]..=i` contiguously, so both the
/// factorisation and the triangular solves run over contiguous slices.
#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
    factored: bool,
}

impl SkylineMatrix {
    /// Creates a zero matrix whose row `i` starts at column `first[i]`.
    ///
    /// # Panics
    ///
    /// Panics if `first[i] > i` for some row.
    pub fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut offset = 0;
        start.push(0);
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope row {i} starts right of the diagonal");
            offset += i - f + 1;
            start.push(offset);
        }
        SkylineMatrix {
            first,
            start,
            values: vec![0.0; offset],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Number of stored entries.
    pub fn stored(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        self.factored = false;
    }

    #[inline]
    fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(col <= row && col >= self.first[row]);
        self.start[row] + col - self.first[row]
    }

    /// Adds `value` at `(row, col)`; `(col, row)` is implied by symmetry.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let k = self.index(r, c);
        self.values[k] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        if c < self.first[r] {
            0.0
        } else {
            self.values[self.index(r, c)]
        }
    }

    /// In-place `L L^T` factorisation.
    ///
    /// A pivot is rejected when it falls below `rel_tol` times the original
    /// diagonal entry of its row, which is how rigid-body modes show up.
    pub fn factorize(&mut self, rel_tol: f64) -> Result<(), PivotFailure> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let len = j - k0;
                let ri = si + (k0 - fi);
                let rj = sj + (k0 - fj);
                let mut s = self.values[si + (j - fi)];
                s -= dot(&self.values[ri..ri + len], &self.values[rj..rj + len]);
                let diag_j = self.values[sj + (j - fj)];
                self.values[si + (j - fi)] = s / diag_j;
            }
            let diag_index = si + (i - fi);
            let original = self.values[diag_index];
            let row = &self.values[si..diag_index];
            let d = original - dot(row, row);
            if !(d > rel_tol * original.abs()) || !d.is_finite() {
                return Err(PivotFailure { row: i, pivot: d });
            }
            self.values[diag_index] = libm::sqrt(d);
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place using the factor.
    ///
    /// # Panics
    ///
    /// Panics if the matrix has not been factorised.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "solve before factorize");
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.values[si..si + (i - fi)];
            let s = b[i] - dot(row, &b[fi..i]);
            b[i] = s / self.values[si + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            let xi = b[i] / self.values[si + (i - fi)];
            b[i] = xi;
            let row = &self.values[si..si + (i - fi)];
            for (bk, l) in b[fi..i].iter_mut().zip(row) {
                *bk -= l * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise without reassociating.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}
