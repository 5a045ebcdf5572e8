use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::element::{ElementKernel, ElementMatrix};
use super::mesh::Mesh;
use crate::linalg::{Mat3, SkylineMatrix};
use crate::material::ConstitutiveMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn offset(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLoad {
    pub node: usize,
    pub axis: Axis,
    pub magnitude: f64,
}

impl PointLoad {
    pub fn dof(&self) -> usize {
        2 * self.node + self.axis.offset()
    }
}

/// Homogeneous Dirichlet supports and nodal point loads, grouped into one
/// or more independent load cases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    fixed_dofs: Vec<usize>,
    load_cases: Vec<Vec<PointLoad>>,
}

impl BoundaryConditions {
    /// A single load case.
    pub fn new(fixed_dofs: Vec<usize>, point_loads: Vec<PointLoad>) -> Self {
        Self::with_load_cases(fixed_dofs, vec![point_loads])
    }

    /// Several load cases; the compliance of a design is the sum over
    /// cases.
    pub fn with_load_cases(mut fixed_dofs: Vec<usize>, load_cases: Vec<Vec<PointLoad>>) -> Self {
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        BoundaryConditions {
            fixed_dofs,
            load_cases,
        }
    }

    /// Sorted, deduplicated fixed DOFs.
    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed_dofs
    }

    pub fn load_cases(&self) -> &[Vec<PointLoad>] {
        &self.load_cases
    }

    /// Loads of every case.
    pub fn point_loads(&self) -> impl Iterator<Item = &PointLoad> + '_ {
        self.load_cases.iter().flatten()
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed_dofs.binary_search(&dof).is_ok()
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.fixed_dofs.is_empty() {
            return Err(Error::BoundaryConditions("no fixed dofs".into()));
        }
        if let Some(&d) = self.fixed_dofs.iter().find(|&&d| d >= mesh.dof_count()) {
            return Err(Error::BoundaryConditions(format!(
                "fixed dof {d} out of range ({} dofs)",
                mesh.dof_count()
            )));
        }
        if self.load_cases.is_empty() {
            return Err(Error::BoundaryConditions("no load case".into()));
        }
        for load in self.point_loads() {
            if load.node >= mesh.node_count() {
                return Err(Error::NodeOutOfRange {
                    index: load.node,
                    count: mesh.node_count(),
                });
            }
            if !load.magnitude.is_finite() {
                return Err(Error::NonFinite { what: "point load" });
            }
            if self.is_fixed(load.dof()) {
                return Err(Error::BoundaryConditions(format!(
                    "load applied on fixed dof {} (node {})",
                    load.dof(),
                    load.node
                )));
            }
        }
        Ok(())
    }

    /// Global load vector of each case; loads on the same DOF add up.
    pub fn load_vectors(&self, mesh: &Mesh) -> Vec<Vec<f64>> {
        self.load_cases
            .iter()
            .map(|case| {
                let mut f = vec![0.0; mesh.dof_count()];
                for load in case {
                    f[load.dof()] += load.magnitude;
                }
                f
            })
            .collect()
    }
}

/// Solution of `K U = F` for every load case.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemResult {
    /// First load case; one entry per global DOF, zero on fixed and unused
    /// DOFs.
    pub displacements: Vec<f64>,
    /// Remaining load cases, in order.
    pub other_cases: Vec<Vec<f64>>,
    /// `sum F^T U` over the load cases.
    pub compliance: f64,
    /// Largest `||K U - F|| / ||F||` over the load cases (free DOFs only).
    pub relative_residual: f64,
}

impl LinearSystemResult {
    /// Displacements of every load case.
    pub fn cases(&self) -> impl Iterator<Item = &[f64]> + '_ {
        core::iter::once(self.displacements.as_slice()).chain(self.other_cases.iter().map(|u| u.as_slice()))
    }
}

/// Mesh and supports with a precomputed equation numbering and skyline
/// profile, reused across the many solves of an optimisation run.
///
/// Free DOFs are the unsupported DOFs of nodes touched by at least one
/// active element. They are numbered by reverse Cuthill-McKee over the node
/// graph to keep the profile small.
#[derive(Debug, Clone)]
pub struct FeModel {
    mesh: Mesh,
    bc: BoundaryConditions,
    kernel: ElementKernel,
    /// Global DOF -> equation number.
    equation: Vec<Option<usize>>,
    /// Equation number -> global DOF.
    dof_of_equation: Vec<usize>,
    first: Vec<usize>,
    loads: Vec<Vec<f64>>,
}

const PIVOT_TOLERANCE: f64 = 1e-12;

impl FeModel {
    pub fn new(mesh: Mesh, bc: BoundaryConditions) -> Result<FeModel> {
        bc.validate(&mesh)?;
        let used = mesh.node_in_use();
        for load in bc.point_loads() {
            if !used[load.node] && load.magnitude != 0.0 {
                return Err(Error::BoundaryConditions(format!(
                    "load on node {} which belongs to no active element",
                    load.node
                )));
            }
        }

        let order = reverse_cuthill_mckee(&mesh, &used);
        let mut equation = vec![None; mesh.dof_count()];
        let mut dof_of_equation = Vec::new();
        for &node in &order {
            for axis in 0..2 {
                let dof = 2 * node + axis;
                if !bc.is_fixed(dof) {
                    equation[dof] = Some(dof_of_equation.len());
                    dof_of_equation.push(dof);
                }
            }
        }

        let mut first: Vec<usize> = (0..dof_of_equation.len()).collect();
        for e in mesh.active_elements() {
            let eqs = mesh.element_dofs(e).map(|d| equation[d]);
            let lo = eqs.iter().flatten().copied().min();
            if let Some(lo) = lo {
                for r in eqs.iter().flatten() {
                    first[*r] = first[*r].min(lo);
                }
            }
        }

        let loads = bc.load_vectors(&mesh);
        Ok(FeModel {
            mesh,
            bc,
            kernel: ElementKernel::new(),
            equation,
            dof_of_equation,
            first,
            loads,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn kernel(&self) -> &ElementKernel {
        &self.kernel
    }

    /// Global load vector of each load case.
    pub fn load_vectors(&self) -> &[Vec<f64>] {
        &self.loads
    }

    /// Number of free equations.
    pub fn equation_count(&self) -> usize {
        self.dof_of_equation.len()
    }

    /// Stored entries of the skyline profile.
    pub fn profile_size(&self) -> usize {
        self.first
            .iter()
            .enumerate()
            .map(|(i, &f)| i - f + 1)
            .sum()
    }

    fn check_materials(&self, materials: &[ConstitutiveMatrix]) -> Result<()> {
        if materials.len() != self.mesh.element_count() {
            return Err(Error::LengthMismatch {
                what: "per-element constitutive matrices",
                expected: self.mesh.element_count(),
                actual: materials.len(),
            });
        }
        for e in self.mesh.active_elements() {
            let d = &materials[e];
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    what: "constitutive matrix",
                });
            }
            d.check_symmetric(1e-10)?;
        }
        Ok(())
    }

    /// Assembles and solves with one constitutive matrix per element.
    /// Entries for inactive elements are ignored.
    pub fn solve(&self, materials: &[ConstitutiveMatrix]) -> Result<LinearSystemResult> {
        self.check_materials(materials)?;
        let mut k = SkylineMatrix::new(self.first.clone());
        for e in self.mesh.active_elements() {
            let ke = self.kernel.stiffness(&materials[e]);
            let eqs = self.mesh.element_dofs(e).map(|d| self.equation[d]);
            for i in 0..8 {
                let Some(ri) = eqs[i] else { continue };
                for j in 0..8 {
                    match eqs[j] {
                        Some(rj) if rj <= ri => k.add(ri, rj, ke[i][j]),
                        _ => {}
                    }
                }
            }
        }

        k.factorize(PIVOT_TOLERANCE).map_err(|failure| {
            let dof = self.dof_of_equation[failure.row];
            Error::Singular {
                dof,
                node: dof / 2,
                axis: if dof.is_multiple_of(2) { 'x' } else { 'y' },
                pivot: failure.pivot,
            }
        })?;

        let mut compliance = 0.0;
        let mut relative_residual: f64 = 0.0;
        let mut cases = Vec::with_capacity(self.loads.len());
        for load in &self.loads {
            let mut rhs: Vec<f64> = self.dof_of_equation.iter().map(|&d| load[d]).collect();
            k.solve_in_place(&mut rhs);
            let mut u = vec![0.0; self.mesh.dof_count()];
            for (eq, &dof) in self.dof_of_equation.iter().enumerate() {
                u[dof] = rhs[eq];
            }
            compliance += load.iter().zip(&u).map(|(f, u)| f * u).sum::<f64>();
            relative_residual = relative_residual.max(self.relative_residual(materials, load, &u));
            cases.push(u);
        }
        let mut cases = cases.into_iter();
        let displacements = cases.next().unwrap_or_default();
        Ok(LinearSystemResult {
            displacements,
            other_cases: cases.collect(),
            compliance,
            relative_residual,
        })
    }

    /// `K u` assembled element by element (full DOF vector).
    pub fn apply_stiffness(&self, materials: &[ConstitutiveMatrix], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.dof_count()];
        for e in self.mesh.active_elements() {
            let ke = self.kernel.stiffness(&materials[e]);
            let dofs = self.mesh.element_dofs(e);
            for i in 0..8 {
                out[dofs[i]] += (0..8).map(|j| ke[i][j] * u[dofs[j]]).sum::<f64>();
            }
        }
        out
    }

    fn relative_residual(&self, materials: &[ConstitutiveMatrix], load: &[f64], u: &[f64]) -> f64 {
        let ku = self.apply_stiffness(materials, u);
        let mut r2 = 0.0;
        let mut f2 = 0.0;
        for &dof in &self.dof_of_equation {
            let r = ku[dof] - load[dof];
            r2 += r * r;
            f2 += load[dof] * load[dof];
        }
        if f2 == 0.0 {
            libm::sqrt(r2)
        } else {
            libm::sqrt(r2 / f2)
        }
    }

    pub fn element_displacements(&self, u: &[f64], element: usize) -> [f64; 8] {
        self.mesh.element_dofs(element).map(|d| u[d])
    }

    /// Per-element strain-energy tensors (zero for inactive elements).
    pub fn strain_energy_tensors(&self, u: &[f64]) -> Vec<Mat3> {
        let mut out = vec![Mat3::ZERO; self.mesh.element_count()];
        for e in self.mesh.active_elements() {
            out[e] = self
                .kernel
                .strain_energy_tensor(&self.element_displacements(u, e));
        }
        out
    }

    /// Strain-energy tensors summed over the load cases of a solution, so
    /// that `dc = -sum_e <dD_e, S_e>` for the summed compliance.
    pub fn strain_energy(&self, result: &LinearSystemResult) -> Vec<Mat3> {
        let mut out = self.strain_energy_tensors(&result.displacements);
        for u in &result.other_cases {
            for (acc, s) in out.iter_mut().zip(self.strain_energy_tensors(u)) {
                *acc += s;
            }
        }
        out
    }
}

/// One-shot assemble and solve.
pub fn assemble_and_solve(
    mesh: &Mesh,
    materials: &[ConstitutiveMatrix],
    bc: &BoundaryConditions,
) -> Result<LinearSystemResult> {
    FeModel::new(mesh.clone(), bc.clone())?.solve(materials)
}

/// `-ue^T dK ue` for the element's slice of the global displacements.
pub fn element_compliance_sensitivity(
    u: &[f64],
    mesh: &Mesh,
    element: usize,
    dk: &ElementMatrix,
) -> Result<f64> {
    if element >= mesh.element_count() {
        return Err(Error::ElementOutOfRange {
            index: element,
            count: mesh.element_count(),
        });
    }
    if u.len() != mesh.dof_count() {
        return Err(Error::LengthMismatch {
            what: "displacements",
            expected: mesh.dof_count(),
            actual: u.len(),
        });
    }
    let ue = mesh.element_dofs(element).map(|d| u[d]);
    let mut s = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            s += ue[i] * dk[i][j] * ue[j];
        }
    }
    Ok(-s)
}

fn node_neighbours(mesh: &Mesh, used: &[bool]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); mesh.node_count()];
    for e in mesh.active_elements() {
        let nodes = mesh.element_nodes(e);
        for &a in &nodes {
            for &b in &nodes {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for (n, list) in adj.iter_mut().enumerate() {
        debug_assert!(used[n] || list.is_empty());
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Breadth-first level structure from `start`; returns (order, depth of last node).
fn bfs_levels(adj: &[Vec<usize>], start: usize, seen: &mut [bool]) -> (Vec<usize>, Vec<usize>) {
    let mut order = vec![start];
    let mut level = vec![0usize; adj.len()];
    seen[start] = true;
    let mut head = 0;
    while head < order.len() {
        let n = order[head];
        head += 1;
        for &m in &adj[n] {
            if !seen[m] {
                seen[m] = true;
                level[m] = level[n] + 1;
                order.push(m);
            }
        }
    }
    (order, level)
}

fn reverse_cuthill_mckee(mesh: &Mesh, used: &[bool]) -> Vec<usize> {
    let adj = node_neighbours(mesh, used);
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; adj.len()];
    let mut result = Vec::with_capacity(adj.len());

    for seed in 0..adj.len() {
        if placed[seed] || !used[seed] {
            continue;
        }
        // Pseudo-peripheral start node: repeatedly jump to a minimum-degree
        // node of the deepest level until the depth stops growing.
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..8 {
            let mut seen = placed.clone();
            let (order, level) = bfs_levels(&adj, start, &mut seen);
            let last = order.iter().map(|&n| level[n]).max().unwrap_or(0);
            let candidate = order
                .iter()
                .copied()
                .filter(|&n| level[n] == last)
                .min_by_key(|&n| (degree[n], n))
                .unwrap_or(start);
            if last <= depth && start != seed {
                break;
            }
            depth = last;
            if candidate == start {
                break;
            }
            start = candidate;
        }

        let mut component = Vec::new();
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(n) = queue.pop_front() {
            component.push(n);
            let mut next: Vec<usize> = adj[n].iter().copied().filter(|&m| !placed[m]).collect();
            next.sort_unstable_by_key(|&m| (degree[m], m));
            for m in next {
                placed[m] = true;
                queue.push_back(m);
            }
        }
        result.extend(component);
    }
    result.reverse();
    result
}
