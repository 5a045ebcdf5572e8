//! Cone-kernel neighbourhood filters over element centroids.

use alloc::vec;
use alloc::vec::Vec;

use crate::fem::Mesh;
use crate::{Error, Result};

/// Density floor used in the sensitivity filter denominator.
pub const SENSITIVITY_FILTER_FLOOR: f64 = 1e-3;

/// Per-element neighbour lists with weights `H_ij = max(0, r - |x_i - x_j|)`,
/// restricted to active elements. Stored in compressed rows; neighbours are
/// listed in ascending element order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    radius: f64,
    offsets: Vec<usize>,
    neighbours: Vec<usize>,
    weights: Vec<f64>,
    weight_sums: Vec<f64>,
}

impl FilterKernel {
    pub fn new(mesh: &Mesh, radius: f64) -> Result<FilterKernel> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::config("r_min", "filter radius must be positive and finite"));
        }
        let reach = libm::ceil(radius) as isize;
        let (nx, ny) = (mesh.nx() as isize, mesh.ny() as isize);
        let mut offsets = Vec::with_capacity(mesh.element_count() + 1);
        let mut neighbours = Vec::new();
        let mut weights = Vec::new();
        let mut weight_sums = vec![0.0; mesh.element_count()];
        offsets.push(0);
        for e in 0..mesh.element_count() {
            if mesh.is_active(e) {
                let (i, j) = mesh.element_position(e);
                let (i, j) = (i as isize, j as isize);
                for jj in (j - reach).max(0)..=(j + reach).min(ny - 1) {
                    for ii in (i - reach).max(0)..=(i + reach).min(nx - 1) {
                        let k = (jj * nx + ii) as usize;
                        if !mesh.is_active(k) {
                            continue;
                        }
                        let (di, dj) = ((ii - i) as f64, (jj - j) as f64);
                        let w = radius - libm::sqrt(di * di + dj * dj);
                        if w > 0.0 {
                            neighbours.push(k);
                            weights.push(w);
                            weight_sums[e] += w;
                        }
                    }
                }
            }
            offsets.push(neighbours.len());
        }
        Ok(FilterKernel {
            radius,
            offsets,
            neighbours,
            weights,
            weight_sums,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn element_count(&self) -> usize {
        self.weight_sums.len()
    }

    /// `(neighbour, weight)` pairs of element `e`, itself included.
    pub fn neighbours(&self, e: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[e]..self.offsets[e + 1];
        self.neighbours[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn neighbour_count(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    /// `sum_j H_ej`; zero for inactive elements.
    pub fn weight_sum(&self, e: usize) -> f64 {
        self.weight_sums[e]
    }

    fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.element_count() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.element_count(),
                actual: len,
            });
        }
        Ok(())
    }

    /// `s~_i = sum_j H_ij rho_j s_j / (max(rho_i, 1e-3) sum_j H_ij)`.
    /// Inactive elements map to zero.
    pub fn filter_sensitivities(&self, densities: &[f64], sensitivities: &[f64]) -> Result<Vec<f64>> {
        self.check_len("densities", densities.len())?;
        self.check_len("sensitivities", sensitivities.len())?;
        let mut out = vec![0.0; self.element_count()];
        for (i, slot) in out.iter_mut().enumerate() {
            let hs = self.weight_sums[i];
            if hs == 0.0 {
                continue;
            }
            let num: f64 = self
                .neighbours(i)
                .map(|(j, h)| h * densities[j] * sensitivities[j])
                .sum();
            *slot = num / (densities[i].max(SENSITIVITY_FILTER_FLOOR) * hs);
        }
        Ok(out)
    }

    /// Density filter `x~_i = sum_j H_ij x_j / sum_j H_ij`.
    pub fn filter_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("densities", x.len())?;
        let mut out = vec![0.0; self.element_count()];
        for (i, slot) in out.iter_mut().enumerate() {
            let hs = self.weight_sums[i];
            if hs > 0.0 {
                *slot = self.neighbours(i).map(|(j, h)| h * x[j]).sum::<f64>() / hs;
            }
        }
        Ok(out)
    }

    /// Chain rule through [`filter_densities`](Self::filter_densities):
    /// maps `d/dx~` to `d/dx`.
    pub fn density_filter_adjoint(&self, gradient: &[f64]) -> Result<Vec<f64>> {
        self.check_len("gradient", gradient.len())?;
        let mut out = vec![0.0; self.element_count()];
        for i in 0..self.element_count() {
            let hs = self.weight_sums[i];
            if hs == 0.0 {
                continue;
            }
            let g = gradient[i] / hs;
            for (j, h) in self.neighbours(i) {
                out[j] += h * g;
            }
        }
        Ok(out)
    }
}
