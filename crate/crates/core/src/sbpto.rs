//! Sequential binary-phase topology optimisation.
//!
//! Each element carries `n + 1` phase fractions (the candidate angles plus
//! void, last) summing to one. A sweep visits every pair of phases `(a, b)`;
//! for each pair the other phases are held fixed, elements already
//! committed are frozen, and the budget `r = alpha_a + alpha_b` is
//! redistributed between the two active phases for a few iterations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::convergence::row_converged;
use crate::dmo::DmoDesign;
use crate::fem::Mesh;
use crate::material::{CandidateAngleSet, ConstitutiveMatrix};
use crate::oc::oc_update;
use crate::problem::{CommonSettings, DesignProblem, History, IterationExtra, PhaseLabel, StageKind};
use crate::{Error, Result};

/// Fractions at or below this count as absent.
pub const ZERO_FRACTION: f64 = 1e-9;

/// Per-element round-off allowed before an unreachable void-pair volume
/// target is reported.
const TARGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbptoSettings {
    /// SIMP exponent on the phase fractions.
    pub penalty: f64,
    /// Stiffness of the void phase relative to the base material.
    pub void_stiffness: f64,
    /// Evaluations per binary subproblem.
    pub inner_iterations: usize,
    /// Upper limit on outer sweeps over all pairs.
    pub max_sweeps: usize,
    /// Visit both `(a, b)` and `(b, a)`; otherwise only `a < b`.
    pub ordered_pairs: bool,
    /// Fibre-convergence level at which the stage stops.
    pub target_h_eta: f64,
    /// Active-phase fraction above which an element is frozen.
    pub lambda_thresh: f64,
}

impl Default for SbptoSettings {
    fn default() -> Self {
        SbptoSettings {
            penalty: 3.0,
            void_stiffness: 1e-9,
            inner_iterations: 5,
            max_sweeps: 10,
            ordered_pairs: true,
            target_h_eta: 0.99,
            lambda_thresh: 0.99,
        }
    }
}

impl SbptoSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty.is_finite() && self.penalty >= 1.0) {
            return Err(Error::config("sbpto.penalty", "must be >= 1"));
        }
        if !(self.void_stiffness > 0.0 && self.void_stiffness < 1e-2) {
            return Err(Error::config("sbpto.void_stiffness", "must lie in (0, 1e-2)"));
        }
        if self.inner_iterations == 0 {
            return Err(Error::config("sbpto.inner_iterations", "must be at least 1"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::config("sbpto.max_sweeps", "must be at least 1"));
        }
        if !(self.lambda_thresh > 0.5 && self.lambda_thresh < 1.0) {
            return Err(Error::config("lambda_thresh", "must lie in (0.5, 1)"));
        }
        if !(self.target_h_eta > 0.0 && self.target_h_eta <= 1.0) {
            return Err(Error::config("sbpto.target_h_eta", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Row-major `N x (n + 1)` phase fractions; the last column is void.
#[derive(Debug, Clone, PartialEq)]
pub struct SbptoDesign {
    alpha: Vec<f64>,
    phases: usize,
}

impl SbptoDesign {
    /// Validates row sums (within 1e-9) and bounds.
    pub fn from_values(alpha: Vec<f64>, phases: usize) -> Result<SbptoDesign> {
        if phases < 2 || !alpha.len().is_multiple_of(phases) {
            return Err(Error::LengthMismatch {
                what: "phase fractions",
                expected: phases * (alpha.len() / phases.max(1)),
                actual: alpha.len(),
            });
        }
        if let Some((index, &value)) = alpha.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval { index, value });
        }
        for (e, row) in alpha.chunks_exact(phases).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    format!("alpha[{e}]"),
                    format!("phase fractions sum to {sum}, expected 1"),
                ));
            }
        }
        Ok(SbptoDesign { alpha, phases })
    }

    /// Number of phases including void.
    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn void_index(&self) -> usize {
        self.phases - 1
    }

    pub fn element_count(&self) -> usize {
        self.alpha.len() / self.phases
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    pub fn row(&self, e: usize) -> &[f64] {
        &self.alpha[e * self.phases..(e + 1) * self.phases]
    }

    pub fn solid_fraction(&self, e: usize) -> f64 {
        1.0 - self.row(e)[self.void_index()]
    }

    /// `sum_e (1 - alpha_void)` over the given elements.
    pub fn solid_volume(&self, mesh: &Mesh) -> f64 {
        mesh.active_elements().map(|e| self.solid_fraction(e)).sum()
    }

    /// Largest `|sum_i alpha_ei - 1|` over all rows.
    pub fn partition_error(&self) -> f64 {
        self.alpha
            .chunks_exact(self.phases)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Index of the dominant phase of each element (ties go to the lowest
    /// index; the last index is void).
    pub fn argmax_labels(&self) -> Vec<usize> {
        self.alpha
            .chunks_exact(self.phases)
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// Copies the DMO densities and appends the void share. Rows with
/// `sum chi > 1 + 1e-9` are rescaled to sum to one; their count is returned.
pub fn init_from_dmo(dmo: &DmoDesign) -> (SbptoDesign, usize) {
    let n = dmo.candidates();
    let phases = n + 1;
    let mut alpha = vec![0.0; dmo.element_count() * phases];
    let mut clipped = 0;
    for e in 0..dmo.element_count() {
        let chi = dmo.row(e);
        let row = &mut alpha[e * phases..(e + 1) * phases];
        let sum: f64 = chi.iter().sum();
        if sum > 1.0 + 1e-9 {
            clipped += 1;
            for (dst, &c) in row.iter_mut().zip(chi) {
                *dst = c / sum;
            }
            row[n] = 0.0;
        } else {
            row[..n].copy_from_slice(chi);
            row[n] = (1.0 - sum).max(0.0);
        }
    }
    if clipped > 0 {
        log::warn!("{clipped} element(s) had candidate densities summing above 1 and were rescaled");
    }
    (SbptoDesign { alpha, phases }, clipped)
}

/// Freeze mask for the pair `(a, b)`: an element is frozen when either
/// active phase exceeds `lambda_thresh`, when both are absent, or when it
/// is not part of the design domain.
pub fn freeze_elements(mesh: &Mesh, design: &SbptoDesign, a: usize, b: usize, lambda_thresh: f64) -> Vec<bool> {
    (0..design.element_count())
        .map(|e| {
            if !mesh.is_active(e) {
                return true;
            }
            let row = design.row(e);
            row[a] > lambda_thresh || row[b] > lambda_thresh || (row[a] <= ZERO_FRACTION && row[b] <= ZERO_FRACTION)
        })
        .collect()
}

/// Fibre convergence over active elements measured on the angle columns;
/// rows with no angle content count as converged.
pub fn sbpto_fibre_convergence(mesh: &Mesh, design: &SbptoDesign, eta: f64) -> f64 {
    let void = design.void_index();
    let mut total = 0usize;
    let mut converged = 0usize;
    for e in mesh.active_elements() {
        total += 1;
        if row_converged(&design.row(e)[..void], eta) {
            converged += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        converged as f64 / total as f64
    }
}

/// Stiffness of the candidate angle phases followed by the void phase.
pub fn phase_stiffnesses(
    candidates: &CandidateAngleSet,
    material: &ConstitutiveMatrix,
    void_stiffness: f64,
) -> Vec<ConstitutiveMatrix> {
    let mut out = candidates.rotated(material);
    out.push(*material * void_stiffness);
    out
}

/// Compliance and `dc/dalpha` for the penalised interpolation
/// `D_e = sum_i alpha_i^p D_i`, with `D_void = eps_void * D_base`.
pub fn sbpto_compliance_and_gradient(
    problem: &DesignProblem,
    design: &SbptoDesign,
    stiffness: &[ConstitutiveMatrix],
    penalty: f64,
) -> Result<(f64, Vec<f64>)> {
    let eval = evaluate(problem, design, stiffness, penalty)?;
    let grad = design
        .alpha
        .iter()
        .zip(&eval.products)
        .map(|(&x, &e)| -penalty * libm::pow(x, penalty - 1.0) * e)
        .collect();
    Ok((eval.compliance, grad))
}

struct Evaluation {
    compliance: f64,
    /// `<D_i, S_e>` laid out like the design.
    products: Vec<f64>,
}

fn evaluate(
    problem: &DesignProblem,
    design: &SbptoDesign,
    stiffness: &[ConstitutiveMatrix],
    penalty: f64,
) -> Result<Evaluation> {
    let mesh = problem.model.mesh();
    let k = design.phases;
    if stiffness.len() != k {
        return Err(Error::LengthMismatch {
            what: "phase stiffnesses",
            expected: k,
            actual: stiffness.len(),
        });
    }
    if design.element_count() != mesh.element_count() {
        return Err(Error::LengthMismatch {
            what: "design rows",
            expected: mesh.element_count(),
            actual: design.element_count(),
        });
    }
    let mut mats = vec![ConstitutiveMatrix::ZERO; mesh.element_count()];
    for e in mesh.active_elements() {
        let row = design.row(e);
        let mut d = ConstitutiveMatrix::ZERO;
        for (i, s) in stiffness.iter().enumerate() {
            if row[i] > 0.0 {
                d += *s * libm::pow(row[i], penalty);
            }
        }
        mats[e] = d;
    }
    let res = problem.model.solve(&mats)?;
    let energy = problem.model.strain_energy(&res);
    let mut products = vec![0.0; design.alpha.len()];
    for e in mesh.active_elements() {
        for (i, s) in stiffness.iter().enumerate() {
            products[e * k + i] = s.0.dot(&energy[e]);
        }
    }
    Ok(Evaluation {
        compliance: res.compliance,
        products,
    })
}

/// Per-sweep diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SbptoDiagnostics {
    /// Fibre convergence at the end of each sweep.
    pub sweep_h_eta: Vec<f64>,
    /// Solid volume fraction at the end of each sweep.
    pub sweep_volume: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Elements whose dominant phase is below the freezing threshold.
    pub mixed_elements: usize,
    pub rescaled_rows: usize,
}

struct PairContext<'a> {
    problem: &'a DesignProblem,
    stiffness: &'a [ConstitutiveMatrix],
    labels: &'a [PhaseLabel],
    settings: &'a SbptoSettings,
    common: &'a CommonSettings,
}

fn phase_labels(candidates: &CandidateAngleSet) -> Vec<PhaseLabel> {
    let mut labels: Vec<PhaseLabel> = candidates.degrees().iter().map(|&d| PhaseLabel::Angle(d)).collect();
    labels.push(PhaseLabel::Void);
    labels
}

/// One binary subproblem on the phase pair `(a, b)`. Returns the number of
/// finite-element evaluations performed (zero if every element is frozen).
pub fn binary_phase_subproblem(
    problem: &DesignProblem,
    candidates: &CandidateAngleSet,
    design: &mut SbptoDesign,
    pair: (usize, usize),
    settings: &SbptoSettings,
    common: &CommonSettings,
    history: &mut History,
) -> Result<usize> {
    settings.validate()?;
    check_shape(problem, candidates, design)?;
    let stiffness = phase_stiffnesses(candidates, &problem.material, settings.void_stiffness);
    let labels = phase_labels(candidates);
    let ctx = PairContext {
        problem,
        stiffness: &stiffness,
        labels: &labels,
        settings,
        common,
    };
    solve_pair(&ctx, design, pair, history)
}

fn check_shape(problem: &DesignProblem, candidates: &CandidateAngleSet, design: &SbptoDesign) -> Result<()> {
    let expected = problem.element_count() * (candidates.len() + 1);
    if design.phases != candidates.len() + 1 || design.alpha.len() != expected {
        return Err(Error::LengthMismatch {
            what: "phase fractions",
            expected,
            actual: design.alpha.len(),
        });
    }
    Ok(())
}

fn solve_pair(ctx: &PairContext<'_>, design: &mut SbptoDesign, (a, b): (usize, usize), history: &mut History) -> Result<usize> {
    let problem = ctx.problem;
    let mesh = problem.model.mesh();
    let k = design.phases;
    let void = design.void_index();
    if a == b || a >= k || b >= k {
        return Err(Error::config("sbpto pair", format!("invalid phase pair ({a}, {b})")));
    }
    let frozen = freeze_elements(mesh, design, a, b, ctx.settings.lambda_thresh);
    let free: Vec<usize> = (0..design.element_count()).filter(|&e| !frozen[e]).collect();
    if free.is_empty() {
        return Ok(0);
    }
    let budget: Vec<f64> = (0..design.element_count())
        .map(|e| design.row(e)[a] + design.row(e)[b])
        .collect();
    // With void in the pair the solid phase is the design variable.
    let solid = if b == void {
        Some(a)
    } else if a == void {
        Some(b)
    } else {
        None
    };
    let active_count = mesh.active_count().max(1) as f64;
    let p = ctx.settings.penalty;
    let m = ctx.common.move_limit;
    let extra = IterationExtra::Pair(ctx.labels[a], ctx.labels[b]);
    let mut evaluations = 0;

    for _ in 0..ctx.settings.inner_iterations {
        let eval = evaluate(problem, design, ctx.stiffness, p)?;
        let c = eval.compliance;
        evaluations += 1;
        // Penalised sensitivity of phase `i`, with the fraction floored so
        // that an absent phase can still enter.
        let sensitivity = |i: usize, floor: f64| -> Vec<f64> {
            (0..design.element_count())
                .map(|e| {
                    let x = design.row(e)[i].max(floor);
                    -p * libm::pow(x, p - 1.0) * eval.products[e * k + i]
                })
                .collect()
        };
        let h = sbpto_fibre_convergence(mesh, design, ctx.common.eta);
        history.push(StageKind::Sbpto, c, Some(h), design.solid_volume(mesh) / active_count, extra);

        match solid {
            Some(s) => {
                // d c / d alpha_s with alpha_void = r - alpha_s.
                let x: Vec<f64> = (0..design.element_count()).map(|e| design.row(e)[s]).collect();
                let gs = sensitivity(s, 0.0);
                let gv = sensitivity(void, 0.0);
                let sens: Vec<f64> = gs.iter().zip(&gv).map(|(a, b)| a - b).collect();
                let sens = problem.filter.filter_sensitivities(&x, &sens)?;
                let xs: Vec<f64> = free.iter().map(|&e| x[e]).collect();
                let ss: Vec<f64> = free.iter().map(|&e| sens[e]).collect();
                let lo = vec![0.0; free.len()];
                let hi: Vec<f64> = free.iter().map(|&e| budget[e]).collect();
                let fixed_solid: f64 = mesh
                    .active_elements()
                    .filter(|&e| frozen[e])
                    .map(|e| design.solid_fraction(e))
                    .sum::<f64>()
                    + free.iter().map(|&e| 1.0 - budget[e]).sum::<f64>();
                let mut target = problem.volume_budget() - fixed_solid;
                let floor: f64 = xs.iter().zip(&lo).map(|(x, l)| (x - m).max(*l)).sum();
                if target < floor - TARGET_SLACK * mesh.active_count() as f64 {
                    history.warn(format!(
                        "SBPTO pair ({a}, {b}): volume target {target:.6} below reachable {floor:.6}; clipped"
                    ));
                }
                target = target.max(floor);
                let next = oc_update(&xs, &ss, target, m, &lo, &hi)?;
                for (i, &e) in free.iter().enumerate() {
                    let row = &mut design.alpha[e * k..(e + 1) * k];
                    row[s] = next[i];
                    row[void] = budget[e] - next[i];
                }
            }
            None => {
                // Both phases are solid, so the volume is unaffected. Step
                // the pair towards the stiffer phase by the move limit,
                // using the cone-averaged derivative of the pair variable.
                let ga = sensitivity(a, 0.0);
                let gb = sensitivity(b, 0.0);
                let g: Vec<f64> = ga.iter().zip(&gb).map(|(a, b)| a - b).collect();
                let g = problem.filter.filter_densities(&g)?;
                for &e in &free {
                    let r = budget[e];
                    let current = design.row(e)[a];
                    let next = if g[e] < 0.0 {
                        (current + m).min(r)
                    } else if g[e] > 0.0 {
                        (current - m).max(0.0)
                    } else {
                        current
                    };
                    let row = &mut design.alpha[e * k..(e + 1) * k];
                    row[a] = next;
                    row[b] = r - next;
                }
            }
        }
    }
    Ok(evaluations)
}

/// Sweeps over all phase pairs until the fibre convergence reaches the
/// target, a sweep makes no evaluation, or the sweep limit is hit.
pub fn run_sbpto(
    problem: &DesignProblem,
    candidates: &CandidateAngleSet,
    start: SbptoDesign,
    settings: &SbptoSettings,
    common: &CommonSettings,
    history: &mut History,
) -> Result<(SbptoDesign, SbptoDiagnostics)> {
    settings.validate()?;
    check_shape(problem, candidates, &start)?;
    let mesh = problem.model.mesh();
    let stiffness = phase_stiffnesses(candidates, &problem.material, settings.void_stiffness);
    let labels = phase_labels(candidates);
    let ctx = PairContext {
        problem,
        stiffness: &stiffness,
        labels: &labels,
        settings,
        common,
    };
    let k = start.phases;
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b && (settings.ordered_pairs || a < b) {
                pairs.push((a, b));
            }
        }
    }

    let mut design = start;
    let mut diag = SbptoDiagnostics::default();
    let active = mesh.active_count().max(1) as f64;
    if sbpto_fibre_convergence(mesh, &design, common.eta) >= settings.target_h_eta {
        log::info!("SBPTO: start design already meets the fibre-convergence target");
    }
    for sweep in 0..settings.max_sweeps {
        let mut evaluations = 0;
        for &pair in &pairs {
            evaluations += solve_pair(&ctx, &mut design, pair, history)?;
        }
        diag.iterations += evaluations;
        let h = sbpto_fibre_convergence(mesh, &design, common.eta);
        diag.sweep_h_eta.push(h);
        diag.sweep_volume.push(design.solid_volume(mesh) / active);
        log::info!("SBPTO sweep {}: h = {h:.4}, {evaluations} evaluations", sweep + 1);
        if h >= settings.target_h_eta {
            diag.converged = true;
            break;
        }
        if evaluations == 0 {
            history.warn(format!(
                "SBPTO: every element frozen for every pair at h = {h:.4}, below the target {}",
                settings.target_h_eta
            ));
            break;
        }
    }
    if !diag.converged && diag.sweep_h_eta.len() == settings.max_sweeps {
        history.warn(format!(
            "SBPTO stopped at the sweep limit ({}) with h = {:.4}",
            settings.max_sweeps,
            diag.sweep_h_eta.last().copied().unwrap_or(0.0)
        ));
    }
    diag.mixed_elements = mesh
        .active_elements()
        .filter(|&e| design.row(e).iter().all(|&v| v <= settings.lambda_thresh))
        .count();
    if diag.mixed_elements > 0 {
        log::info!(
            "SBPTO: {} element(s) still mixed; labelled by their dominant phase",
            diag.mixed_elements
        );
    }
    Ok((design, diag))
}
