//! Discrete material optimisation: every element holds one density per
//! candidate fibre angle, blended with penalised, unnormalised weights and
//! updated by MMA under `sum chi <= f N`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::convergence::{convergence_variance, row_converged, VARIANCE_WINDOW};
use crate::fem::Mesh;
use crate::material::{blend, dmo_weight_gradient_into, dmo_weights_into, CandidateAngleSet, ConstitutiveMatrix};
use crate::mma::{mma_update, AsymptoteState, BoxConstrainedProblem, LinearConstraint, MmaSettings};
use crate::problem::{CommonSettings, DesignProblem, History, IterationExtra, StageKind};
use crate::{Error, Result};

/// How topology-type variables are regularised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopologyFilter {
    /// Filter the compliance sensitivities.
    #[default]
    Sensitivity,
    /// Filter the design field and use the result as physical densities.
    Density,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmoSettings {
    /// Penalty continuation schedule; the last entry is the final exponent.
    pub penalties: Vec<f64>,
    pub max_iterations: usize,
    /// Weight floor `eps` of the interpolation.
    pub eps: f64,
    pub filter: TopologyFilter,
}

impl Default for DmoSettings {
    fn default() -> Self {
        DmoSettings {
            penalties: vec![1.0, 2.0, 3.0],
            max_iterations: 300,
            eps: 1e-9,
            filter: TopologyFilter::Sensitivity,
        }
    }
}

impl DmoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.penalties.is_empty() || self.penalties.iter().any(|&p| !(p.is_finite() && p >= 1.0)) {
            return Err(Error::config("dmo.penalties", "need at least one exponent, each >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("dmo.max_iterations", "must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1e-2) {
            return Err(Error::config("eps", "must lie in (0, 1e-2)"));
        }
        Ok(())
    }
}

/// Row-major `N x n` candidate densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DmoDesign {
    chi: Vec<f64>,
    candidates: usize,
}

impl DmoDesign {
    pub fn from_values(chi: Vec<f64>, candidates: usize) -> Result<DmoDesign> {
        if candidates == 0 || !chi.len().is_multiple_of(candidates) {
            return Err(Error::LengthMismatch {
                what: "candidate densities",
                expected: candidates * (chi.len() / candidates.max(1)),
                actual: chi.len(),
            });
        }
        if let Some((index, &value)) = chi.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval { index, value });
        }
        Ok(DmoDesign { chi, candidates })
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    pub fn element_count(&self) -> usize {
        self.chi.len() / self.candidates
    }

    pub fn values(&self) -> &[f64] {
        &self.chi
    }

    pub fn row(&self, e: usize) -> &[f64] {
        &self.chi[e * self.candidates..(e + 1) * self.candidates]
    }

    /// `sum_{e,j} chi_ej`.
    pub fn volume(&self) -> f64 {
        self.chi.iter().sum()
    }
}

/// Uniform start `chi = f / n` on active elements, zero elsewhere.
pub fn init_dmo(mesh: &Mesh, candidates: usize, volume_fraction: f64) -> Result<DmoDesign> {
    if !(volume_fraction > 0.0 && volume_fraction <= 1.0) {
        return Err(Error::config("volume_fraction", "must lie in (0, 1]"));
    }
    if candidates == 0 {
        return Err(Error::config("candidates_deg", "need at least one candidate"));
    }
    let v = volume_fraction / candidates as f64;
    let mut chi = vec![0.0; mesh.element_count() * candidates];
    for e in mesh.active_elements() {
        chi[e * candidates..(e + 1) * candidates].fill(v);
    }
    Ok(DmoDesign { chi, candidates })
}

/// Fibre convergence over active elements, with each row extended by its
/// void share `max(0, 1 - sum chi)` so that nearly empty elements count
/// as converged to void.
pub fn dmo_fibre_convergence(mesh: &Mesh, design: &DmoDesign, eta: f64) -> f64 {
    let n = design.candidates;
    let mut row = vec![0.0; n + 1];
    let mut converged = 0usize;
    let mut total = 0usize;
    for e in mesh.active_elements() {
        let chi = design.row(e);
        row[..n].copy_from_slice(chi);
        row[n] = (1.0 - chi.iter().sum::<f64>()).max(0.0);
        total += 1;
        if row_converged(&row, eta) {
            converged += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        converged as f64 / total as f64
    }
}

/// Compliance and `dc/dchi` (row-major like the design) for penalty `p`.
pub fn dmo_compliance_and_gradient(
    problem: &DesignProblem,
    design: &DmoDesign,
    rotated: &[ConstitutiveMatrix],
    p: f64,
    eps: f64,
) -> Result<(f64, Vec<f64>)> {
    let n = design.candidates;
    let mesh = problem.model.mesh();
    if rotated.len() != n {
        return Err(Error::LengthMismatch {
            what: "rotated candidate stiffnesses",
            expected: n,
            actual: rotated.len(),
        });
    }
    if design.element_count() != mesh.element_count() {
        return Err(Error::LengthMismatch {
            what: "design rows",
            expected: mesh.element_count(),
            actual: design.element_count(),
        });
    }
    let mut w = vec![0.0; n];
    let mut mats = vec![ConstitutiveMatrix::ZERO; mesh.element_count()];
    for e in mesh.active_elements() {
        dmo_weights_into(design.row(e), p, eps, &mut w);
        mats[e] = blend(&w, rotated);
    }
    let res = problem.model.solve(&mats)?;
    let energy = problem.model.strain_energy(&res);

    let mut grad = vec![0.0; design.chi.len()];
    let mut jac = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for e in mesh.active_elements() {
        dmo_weight_gradient_into(design.row(e), p, eps, &mut jac);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = rotated[k].0.dot(&energy[e]);
        }
        for j in 0..n {
            grad[e * n + j] = -(0..n).map(|k| jac[k * n + j] * g[k]).sum::<f64>();
        }
    }
    Ok((res.compliance, grad))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DmoDiagnostics {
    pub compliance: Vec<f64>,
    pub h_eta: Vec<f64>,
    /// Volume fraction `sum chi / N_active` per evaluation.
    pub volume: Vec<f64>,
    pub penalty: Vec<f64>,
    /// Whether the variance criterion was met at the final penalty.
    pub converged: bool,
}

impl DmoDiagnostics {
    pub fn iterations(&self) -> usize {
        self.compliance.len()
    }

    pub fn final_h_eta(&self) -> f64 {
        self.h_eta.last().copied().unwrap_or(0.0)
    }
}

fn filter_columns(
    problem: &DesignProblem,
    n: usize,
    mut apply: impl FnMut(&[f64], usize) -> Result<Vec<f64>>,
    out: &mut [f64],
) -> Result<()> {
    let count = problem.element_count();
    for j in 0..n {
        let filtered = apply(out, j)?;
        for e in 0..count {
            out[e * n + j] = filtered[e];
        }
    }
    Ok(())
}

fn column(values: &[f64], n: usize, j: usize) -> Vec<f64> {
    values.iter().skip(j).step_by(n).copied().collect()
}

/// Runs the stage from `start` and returns the last evaluated (physical)
/// design.
pub fn run_dmo(
    problem: &DesignProblem,
    candidates: &CandidateAngleSet,
    start: DmoDesign,
    settings: &DmoSettings,
    common: &CommonSettings,
    history: &mut History,
) -> Result<(DmoDesign, DmoDiagnostics)> {
    settings.validate()?;
    let mesh = problem.model.mesh();
    let n = candidates.len();
    if start.candidates != n || start.element_count() != mesh.element_count() {
        return Err(Error::LengthMismatch {
            what: "initial design",
            expected: mesh.element_count() * n,
            actual: start.chi.len(),
        });
    }
    let rotated = candidates.rotated(&problem.material);
    let active: Vec<usize> = mesh.active_elements().collect();
    let nvar = active.len() * n;
    let budget = problem.volume_budget();
    let ones = vec![1.0; nvar];
    let lower = vec![0.0; nvar];
    let upper = vec![1.0; nvar];
    let mma = MmaSettings {
        move_limit: common.move_limit,
        ..common.mma
    };

    let mut x = start;
    let mut state = AsymptoteState::new();
    let mut diag = DmoDiagnostics::default();
    let mut stage = 0usize;
    let mut at_penalty: Vec<f64> = Vec::new();
    let mut physical;

    loop {
        let p = settings.penalties[stage];
        physical = match settings.filter {
            TopologyFilter::Density => {
                let mut chi = x.chi.clone();
                filter_columns(problem, n, |v, j| problem.filter.filter_densities(&column(v, n, j)), &mut chi)?;
                DmoDesign { chi, candidates: n }
            }
            _ => x.clone(),
        };
        let (c, mut grad) = dmo_compliance_and_gradient(problem, &physical, &rotated, p, settings.eps)?;
        let h = dmo_fibre_convergence(mesh, &physical, common.eta);
        let vol = physical.volume() / active.len().max(1) as f64;
        history.push(StageKind::Dmo, c, Some(h), vol, IterationExtra::Penalty(p));
        diag.compliance.push(c);
        diag.h_eta.push(h);
        diag.volume.push(vol);
        diag.penalty.push(p);
        at_penalty.push(c);

        if at_penalty.len() >= VARIANCE_WINDOW && convergence_variance(&at_penalty)? <= common.eps0 {
            if stage + 1 == settings.penalties.len() {
                diag.converged = true;
                break;
            }
            stage += 1;
            at_penalty.clear();
            log::info!("DMO: penalty raised to {} after {} iterations", settings.penalties[stage], diag.iterations());
            continue;
        }
        if diag.iterations() >= settings.max_iterations {
            history.warn(alloc::format!(
                "DMO stopped at the iteration cap ({}) without meeting the variance criterion",
                settings.max_iterations
            ));
            break;
        }

        match settings.filter {
            TopologyFilter::Sensitivity => {
                let dens = physical.chi.clone();
                filter_columns(
                    problem,
                    n,
                    |g, j| problem.filter.filter_sensitivities(&column(&dens, n, j), &column(g, n, j)),
                    &mut grad,
                )?;
            }
            TopologyFilter::Density => {
                filter_columns(problem, n, |g, j| problem.filter.density_filter_adjoint(&column(g, n, j)), &mut grad)?;
            }
            TopologyFilter::None => {}
        }

        let xv: Vec<f64> = active.iter().flat_map(|&e| x.row(e).iter().copied()).collect();
        let gv: Vec<f64> = active.iter().flat_map(|&e| grad[e * n..(e + 1) * n].iter().copied()).collect();
        let step = BoxConstrainedProblem {
            x: &xv,
            lower: &lower,
            upper: &upper,
            gradient: &gv,
            constraint: Some(LinearConstraint {
                coefficients: &ones,
                bound: budget,
            }),
        };
        let (next, next_state) = mma_update(&step, &state, &mma)?;
        state = next_state;
        for (a, &e) in active.iter().enumerate() {
            x.chi[e * n..(e + 1) * n].copy_from_slice(&next[a * n..(a + 1) * n]);
        }
    }
    Ok((physical, diag))
}
