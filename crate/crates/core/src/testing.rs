use alloc::vec;
use alloc::vec::Vec;

use crate::fem::{Axis, BoundaryConditions, FeModel, Mesh, PointLoad};
use crate::material::ConstitutiveMatrix;
use crate::problem::DesignProblem;

pub(crate) fn fibre() -> ConstitutiveMatrix {
    ConstitutiveMatrix::orthotropic(0.5448, 0.0383, 0.1277, 0.0456)
}

/// Clamped left edge, unit downward load at the middle of the right edge.
pub(crate) fn cantilever(nx: usize, ny: usize, f: f64) -> DesignProblem {
    let mesh = Mesh::new(nx, ny).unwrap();
    let mut fixed = Vec::new();
    for j in 0..=ny {
        let n = mesh.node_index(0, j);
        fixed.extend([2 * n, 2 * n + 1]);
    }
    let bc = BoundaryConditions::new(
        fixed,
        vec![PointLoad {
            node: mesh.node_index(nx, ny / 2),
            axis: Axis::Y,
            magnitude: -1.0,
        }],
    );
    DesignProblem::new(FeModel::new(mesh, bc).unwrap(), fibre(), f, 1.5, 1.5).unwrap()
}

/// Deterministic pseudo-random values in `[lo, hi)`.
pub(crate) fn spread(count: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..count)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            lo + (hi - lo) * ((state >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}
