//! Problem description shared by the library and the command line driver.
//!
//! Every numeric parameter has a named key; anything not given takes the
//! default listed on the field. Node positions are integer grid
//! coordinates `[i, j]` with the origin at the bottom-left corner.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cfao::CfaoSettings;
use crate::dmo::DmoSettings;
use crate::fem::{Axis, BoundaryConditions, FeModel, Mesh, PointLoad};
use crate::material::{CandidateAngleSet, MaterialSpec};
use crate::mma::MmaSettings;
use crate::problem::{CommonSettings, DesignProblem};
use crate::sbpto::SbptoSettings;
use crate::{Error, Result};

/// Which stages run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Discrete selection, binary-phase clean-up, then continuous angles.
    #[default]
    Dsco,
    /// Continuous angles only, from a uniform start.
    CfaoOnly,
}

/// Axis-aligned rectangle in element-size units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    /// Elements whose centroid falls inside any of these are removed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cutouts: Vec<Region>,
}

/// Displacement components held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fix {
    X,
    Y,
    Both,
}

impl Fix {
    fn dofs(self, node: usize) -> impl Iterator<Item = usize> {
        let (x, y) = match self {
            Fix::X => (true, false),
            Fix::Y => (false, true),
            Fix::Both => (true, true),
        };
        [(x, 2 * node), (y, 2 * node + 1)]
            .into_iter()
            .filter_map(|(on, dof)| on.then_some(dof))
    }
}

/// Supported nodes: a single node or every node on a horizontal or
/// vertical segment (ends included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportSpec {
    Node { at: [usize; 2], fix: Fix },
    Segment { from: [usize; 2], to: [usize; 2], fix: Fix },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub at: [usize; 2],
    pub axis: Axis,
    pub magnitude: f64,
}

fn default_r_min() -> f64 {
    1.5
}

fn default_eps0() -> f64 {
    1e-2
}

fn default_eta() -> f64 {
    0.95
}

fn default_move_limit() -> f64 {
    0.2
}

fn default_name() -> String {
    String::from("custom")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub mode: Mode,
    pub mesh: MeshConfig,
    pub material: MaterialSpec,
    pub supports: Vec<SupportSpec>,
    /// Loads applied together as one load case.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadSpec>,
    /// Independent load cases whose compliances are summed; used instead of
    /// `loads`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub load_cases: Vec<Vec<LoadSpec>>,
    pub volume_fraction: f64,
    /// Topology filter radius.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// Angle filter radius; `r_min` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    /// Candidate fibre angles in degrees (DSCO mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates_deg: Vec<f64>,
    /// Uniform start angle in degrees (CFAO-only mode).
    #[serde(default)]
    pub initial_angle_deg: f64,
    /// Variance stop tolerance for DMO and CFAO.
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Fibre-convergence threshold.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_move_limit")]
    pub move_limit: f64,
    #[serde(default)]
    pub mma: MmaSettings,
    #[serde(default)]
    pub dmo: DmoSettings,
    #[serde(default)]
    pub sbpto: SbptoSettings,
    #[serde(default)]
    pub cfao: CfaoSettings,
}

impl ProblemConfig {
    /// Checks every range and cross-field rule; the error names the key.
    pub fn validate(&self) -> Result<()> {
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return Err(Error::config("mesh", format!("needs nx, ny >= 1, got {}x{}", self.mesh.nx, self.mesh.ny)));
        }
        for (k, r) in self.mesh.cutouts.iter().enumerate() {
            let finite = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| v.is_finite());
            if !finite || r.x0 >= r.x1 || r.y0 >= r.y1 {
                return Err(Error::config(format!("mesh.cutouts[{k}]"), "needs x0 < x1 and y0 < y1"));
            }
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction <= 1.0) {
            return Err(Error::config(
                "volume_fraction",
                format!("must lie in (0, 1], got {}", self.volume_fraction),
            ));
        }
        if !(self.r_min.is_finite() && self.r_min >= 1.0) {
            return Err(Error::config("r_min", format!("must be >= 1, got {}", self.r_min)));
        }
        if let Some(r) = self.r_c {
            if !(r.is_finite() && r >= 1.0) {
                return Err(Error::config("r_c", format!("must be >= 1, got {r}")));
            }
        }
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(Error::config("eps0", "must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config("eta", "must lie in (0, 1]"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::config("move_limit", "must lie in (0, 1]"));
        }
        self.mma.validate("mma")?;
        self.dmo.validate()?;
        self.sbpto.validate()?;
        self.cfao.validate()?;
        self.material.constitutive()?;
        match self.mode {
            Mode::Dsco => {
                CandidateAngleSet::from_degrees(&self.candidates_deg)?;
            }
            Mode::CfaoOnly => {
                if !(-90.0..=90.0).contains(&self.initial_angle_deg) {
                    return Err(Error::config("initial_angle_deg", "must lie in [-90, 90]"));
                }
            }
        }
        if self.supports.is_empty() {
            return Err(Error::config("supports", "at least one support is required"));
        }
        match (self.loads.is_empty(), self.load_cases.is_empty()) {
            (true, true) => return Err(Error::config("loads", "at least one load is required")),
            (false, false) => return Err(Error::config("load_cases", "cannot be combined with loads")),
            _ => {}
        }
        if let Some(k) = self.load_cases.iter().position(|c| c.is_empty()) {
            return Err(Error::config(format!("load_cases[{k}]"), "at least one load is required"));
        }
        self.boundary_conditions(&self.mesh()?)?;
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let mut mesh = Mesh::new(self.mesh.nx, self.mesh.ny)?;
        for r in &self.mesh.cutouts {
            mesh = mesh.without_region(r.x0, r.y0, r.x1, r.y1);
        }
        if mesh.active_count() == 0 {
            return Err(Error::config("mesh.cutouts", "remove every element"));
        }
        Ok(mesh)
    }

    pub fn boundary_conditions(&self, mesh: &Mesh) -> Result<BoundaryConditions> {
        let node = |key: String, [i, j]: [usize; 2]| -> Result<usize> {
            if i > mesh.nx() || j > mesh.ny() {
                return Err(Error::config(
                    key,
                    format!("node [{i}, {j}] is outside the {}x{} grid", mesh.nx(), mesh.ny()),
                ));
            }
            Ok(mesh.node_index(i, j))
        };
        let mut fixed = Vec::new();
        for (k, s) in self.supports.iter().enumerate() {
            match *s {
                SupportSpec::Node { at, fix } => {
                    fixed.extend(fix.dofs(node(format!("supports[{k}].at"), at)?));
                }
                SupportSpec::Segment { from, to, fix } => {
                    node(format!("supports[{k}].from"), from)?;
                    node(format!("supports[{k}].to"), to)?;
                    if from[0] != to[0] && from[1] != to[1] {
                        return Err(Error::config(format!("supports[{k}]"), "segment must be horizontal or vertical"));
                    }
                    for i in from[0].min(to[0])..=from[0].max(to[0]) {
                        for j in from[1].min(to[1])..=from[1].max(to[1]) {
                            fixed.extend(fix.dofs(mesh.node_index(i, j)));
                        }
                    }
                }
            }
        }
        let mut cases = Vec::new();
        let named: Vec<(String, &[LoadSpec])> = if self.load_cases.is_empty() {
            vec![(String::from("loads"), self.loads.as_slice())]
        } else {
            self.load_cases
                .iter()
                .enumerate()
                .map(|(c, l)| (format!("load_cases[{c}]"), l.as_slice()))
                .collect()
        };
        for (prefix, specs) in named {
            let mut loads = Vec::with_capacity(specs.len());
            for (k, l) in specs.iter().enumerate() {
                if !l.magnitude.is_finite() {
                    return Err(Error::config(format!("{prefix}[{k}].magnitude"), "must be finite"));
                }
                loads.push(PointLoad {
                    node: node(format!("{prefix}[{k}].at"), l.at)?,
                    axis: l.axis,
                    magnitude: l.magnitude,
                });
            }
            cases.push(loads);
        }
        let bc = BoundaryConditions::with_load_cases(fixed, cases);
        bc.validate(mesh)?;
        Ok(bc)
    }

    /// Candidate set in DSCO mode, `None` in CFAO-only mode.
    pub fn candidates(&self) -> Result<Option<CandidateAngleSet>> {
        match self.mode {
            Mode::Dsco => CandidateAngleSet::from_degrees(&self.candidates_deg).map(Some),
            Mode::CfaoOnly => Ok(None),
        }
    }

    pub fn common(&self) -> CommonSettings {
        CommonSettings {
            eps0: self.eps0,
            eta: self.eta,
            move_limit: self.move_limit,
            mma: self.mma,
        }
    }

    /// Validates and assembles the finite-element model and filters.
    pub fn design_problem(&self) -> Result<DesignProblem> {
        self.validate()?;
        let mesh = self.mesh()?;
        let bc = self.boundary_conditions(&mesh)?;
        let model = FeModel::new(mesh, bc)?;
        DesignProblem::new(
            model,
            self.material.constitutive()?,
            self.volume_fraction,
            self.r_min,
            self.r_c.unwrap_or(self.r_min),
        )
    }
}
