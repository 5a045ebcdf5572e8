use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Structured grid of `nx` by `ny` unit squares.
///
/// Numbering is row-major from the bottom-left corner:
///
/// * node `(i, j)` (column `i`, row `j`) has index `j * (nx + 1) + i` and
///   sits at `(i, j)`;
/// * element `(i, j)` has index `j * nx + i`, centroid `(i + 0.5, j + 0.5)`
///   and nodes `[(i, j), (i+1, j), (i+1, j+1), (i, j+1)]` (counter-clockwise);
/// * node `n` owns DOFs `2n` (x) and `2n + 1` (y).
///
/// Elements can be marked inactive to carve non-rectangular domains out of
/// the grid. Inactive elements carry no stiffness and are not designable.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    active: Vec<bool>,
}

impl Mesh {
    pub fn new(nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMeshSize { nx, ny });
        }
        Ok(Mesh {
            nx,
            ny,
            active: vec![true; nx * ny],
        })
    }

    /// Deactivates every element whose centroid lies inside the closed box
    /// `[x0, x1] x [y0, y1]`.
    pub fn without_region(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Mesh {
        for e in 0..self.element_count() {
            let (cx, cy) = self.element_centroid(e);
            if cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1 {
                self.active[e] = false;
            }
        }
        self
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    pub fn is_active(&self, element: usize) -> bool {
        self.active[element]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(e, &a)| a.then_some(e))
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let i = node % (self.nx + 1);
        let j = node / (self.nx + 1);
        (i as f64, j as f64)
    }

    /// Grid position `(i, j)` of an element.
    pub fn element_position(&self, element: usize) -> (usize, usize) {
        (element % self.nx, element / self.nx)
    }

    pub fn element_centroid(&self, element: usize) -> (f64, f64) {
        let (i, j) = self.element_position(element);
        (i as f64 + 0.5, j as f64 + 0.5)
    }

    /// Counter-clockwise node indices, starting bottom-left.
    pub fn element_nodes(&self, element: usize) -> [usize; 4] {
        let (i, j) = self.element_position(element);
        let n0 = self.node_index(i, j);
        let n3 = self.node_index(i, j + 1);
        [n0, n0 + 1, n3 + 1, n3]
    }

    pub fn element_dofs(&self, element: usize) -> [usize; 8] {
        let n = self.element_nodes(element);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Node closest to `(x, y)` after clamping into the grid. Ties round
    /// half away from the origin.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let i = libm::round(x.clamp(0.0, self.nx as f64)) as usize;
        let j = libm::round(y.clamp(0.0, self.ny as f64)) as usize;
        self.node_index(i, j)
    }

    /// Whether at least one active element touches each node.
    pub fn node_in_use(&self) -> Vec<bool> {
        let mut used = vec![false; self.node_count()];
        for e in self.active_elements() {
            for n in self.element_nodes(e) {
                used[n] = true;
            }
        }
        used
    }
}
