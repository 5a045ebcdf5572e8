//! Continuous fibre angle optimisation.
//!
//! Each element carries a density `rho` and an angle `theta`. The angle the
//! element is analysed with is the filtered angle
//!
//! ```text
//! Theta_e = sum_i H_ei rho_i theta_i / sum_i H_ei rho_i
//! ```
//!
//! over the cone neighbourhood of radius `R_c`, which keeps the fibre field
//! smooth. The element stiffness is `rho^p D(Theta) + eps D`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::convergence::{convergence_variance, VARIANCE_WINDOW};
use crate::dmo::TopologyFilter;
use crate::filter::FilterKernel;
use crate::material::{rotate_constitutive, rotate_constitutive_derivative, CandidateAngleSet, ConstitutiveMatrix};
use crate::mma::{mma_update, AsymptoteState, BoxConstrainedProblem, LinearConstraint, MmaSettings};
use crate::problem::{CommonSettings, DesignProblem, History, IterationExtra, StageKind};
use crate::sbpto::SbptoDesign;
use crate::{Error, Result};

/// Neighbourhoods with `sum H rho` at or below this keep their own angle.
pub const PASS_THROUGH_WEIGHT: f64 = 1e-9;

/// Normalisation of the angle filter weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleWeights {
    /// `H rho / sum H rho`: the weights sum to one.
    #[default]
    Normalized,
    /// `H rho / sum H`: shrinks angles towards zero where `rho < 1`.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfaoSettings {
    /// SIMP exponent on the density.
    pub penalty: f64,
    pub max_iterations: usize,
    /// Stiffness floor relative to the base material.
    pub void_stiffness: f64,
    /// Optimise densities as well as angles.
    pub optimize_density: bool,
    pub angle_weights: AngleWeights,
    /// Include the dependence of the angle filter weights on the densities
    /// in the density gradient.
    pub exact_density_coupling: bool,
    pub filter: TopologyFilter,
}

impl Default for CfaoSettings {
    fn default() -> Self {
        CfaoSettings {
            penalty: 3.0,
            max_iterations: 200,
            void_stiffness: 1e-9,
            optimize_density: true,
            angle_weights: AngleWeights::Normalized,
            exact_density_coupling: true,
            filter: TopologyFilter::Sensitivity,
        }
    }
}

impl CfaoSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty.is_finite() && self.penalty >= 1.0) {
            return Err(Error::config("cfao.penalty", "must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("cfao.max_iterations", "must be at least 1"));
        }
        if !(self.void_stiffness > 0.0 && self.void_stiffness < 1e-2) {
            return Err(Error::config("cfao.void_stiffness", "must lie in (0, 1e-2)"));
        }
        if self.filter == TopologyFilter::Density {
            return Err(Error::config("cfao.filter", "density filtering is not supported in this stage"));
        }
        Ok(())
    }
}

/// Densities and unfiltered angles (radians), one per element.
#[derive(Debug, Clone, PartialEq)]
pub struct CfaoDesign {
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
}

impl CfaoDesign {
    /// Checks lengths, `rho` in `[0, 1]` and `theta` in `[-pi/2, pi/2]`.
    pub fn new(rho: Vec<f64>, theta: Vec<f64>) -> Result<CfaoDesign> {
        if rho.len() != theta.len() {
            return Err(Error::LengthMismatch {
                what: "angles",
                expected: rho.len(),
                actual: theta.len(),
            });
        }
        if let Some((index, &value)) = rho.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitInterval { index, value });
        }
        if let Some((e, t)) = theta.iter().enumerate().find(|(_, t)| !(t.abs() <= FRAC_PI_2)) {
            return Err(Error::config(format!("theta[{e}]"), format!("{t} rad is outside [-pi/2, pi/2]")));
        }
        Ok(CfaoDesign { rho, theta })
    }

    /// Uniform density and angle.
    pub fn uniform(elements: usize, rho: f64, theta: f64) -> Result<CfaoDesign> {
        CfaoDesign::new(vec![rho; elements], vec![theta; elements])
    }

    pub fn element_count(&self) -> usize {
        self.rho.len()
    }
}

/// Dominant angle and solid fraction of every element. Void-dominated rows
/// take the dominant angle phase; rows without any angle get 0.
pub fn init_from_sbpto(design: &SbptoDesign, candidates: &CandidateAngleSet) -> Result<CfaoDesign> {
    let n = candidates.len();
    if design.phases() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "phases",
            expected: n + 1,
            actual: design.phases(),
        });
    }
    let mut rho = Vec::with_capacity(design.element_count());
    let mut theta = Vec::with_capacity(design.element_count());
    for e in 0..design.element_count() {
        let row = design.row(e);
        let mut best = 0;
        for i in 1..n {
            if row[i] > row[best] {
                best = i;
            }
        }
        theta.push(if row[best] > 0.0 { candidates.radians()[best] } else { 0.0 });
        rho.push(design.solid_fraction(e).clamp(0.0, 1.0));
    }
    CfaoDesign::new(rho, theta)
}

/// Filtered angles, clamped to `[-pi/2, pi/2]`.
pub fn apply_angle_filter(kernel: &FilterKernel, design: &CfaoDesign, weights: AngleWeights) -> Result<Vec<f64>> {
    check_len(kernel, design)?;
    Ok((0..design.element_count())
        .map(|e| filtered_angle(kernel, design, weights, e).0)
        .collect())
}

/// `(Theta_e, denominator)`; a zero denominator marks a pass-through.
fn filtered_angle(kernel: &FilterKernel, design: &CfaoDesign, weights: AngleWeights, e: usize) -> (f64, f64) {
    let mut num = 0.0;
    let mut hrho = 0.0;
    for (i, h) in kernel.neighbours(e) {
        num += h * design.rho[i] * design.theta[i];
        hrho += h * design.rho[i];
    }
    if hrho <= PASS_THROUGH_WEIGHT {
        return (design.theta[e], 0.0);
    }
    let den = match weights {
        AngleWeights::Normalized => hrho,
        AngleWeights::Printed => kernel.weight_sum(e),
    };
    ((num / den).clamp(-FRAC_PI_2, FRAC_PI_2), den)
}

fn check_len(kernel: &FilterKernel, design: &CfaoDesign) -> Result<()> {
    if design.element_count() != kernel.element_count() || design.theta.len() != design.rho.len() {
        return Err(Error::LengthMismatch {
            what: "design",
            expected: kernel.element_count(),
            actual: design.element_count(),
        });
    }
    Ok(())
}

/// Compliance, its gradients with respect to `rho` and `theta`, and the
/// filtered angles used for the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct CfaoEvaluation {
    pub compliance: f64,
    pub d_rho: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub filtered_theta: Vec<f64>,
}

pub fn cfao_compliance_and_gradients(
    problem: &DesignProblem,
    design: &CfaoDesign,
    settings: &CfaoSettings,
) -> Result<CfaoEvaluation> {
    let kernel = &problem.angle_filter;
    check_len(kernel, design)?;
    let mesh = problem.model.mesh();
    let count = design.element_count();
    let p = settings.penalty;
    let base = problem.material;
    let floor = base * settings.void_stiffness;

    let mut filtered = vec![0.0; count];
    let mut den = vec![0.0; count];
    for e in 0..count {
        (filtered[e], den[e]) = filtered_angle(kernel, design, settings.angle_weights, e);
    }
    let mut mats = vec![ConstitutiveMatrix::ZERO; count];
    for e in mesh.active_elements() {
        mats[e] = rotate_constitutive(&base, filtered[e]) * libm::pow(design.rho[e], p) + floor;
    }
    let res = problem.model.solve(&mats)?;
    let energy = problem.model.strain_energy(&res);

    let mut d_rho = vec![0.0; count];
    let mut d_theta = vec![0.0; count];
    // dc/dTheta_e, pushed back through the filter below.
    let mut d_filtered = vec![0.0; count];
    for e in mesh.active_elements() {
        let rho = design.rho[e];
        let rotated = rotate_constitutive(&base, filtered[e]);
        d_rho[e] = -p * libm::pow(rho, p - 1.0) * rotated.0.dot(&energy[e]);
        d_filtered[e] = -libm::pow(rho, p) * rotate_constitutive_derivative(&base, filtered[e]).0.dot(&energy[e]);
    }
    for e in mesh.active_elements() {
        let g = d_filtered[e];
        if den[e] == 0.0 {
            d_theta[e] += g;
            continue;
        }
        // Inside the box the clamp is inactive; at the boundary it is only
        // reached by a convex combination of bounded angles.
        let printed = settings.angle_weights == AngleWeights::Printed;
        for (i, h) in kernel.neighbours(e) {
            d_theta[i] += g * h * design.rho[i] / den[e];
            if settings.exact_density_coupling {
                let shift = if printed { design.theta[i] } else { design.theta[i] - filtered[e] };
                d_rho[i] += g * h * shift / den[e];
            }
        }
    }
    Ok(CfaoEvaluation {
        compliance: res.compliance,
        d_rho,
        d_theta,
        filtered_theta: filtered,
    })
}

/// Elements whose neighbourhood spans more than `pi/2` of angle among
/// elements carrying material. Averaging there ignores that `theta` and
/// `theta + pi` describe the same fibre.
pub fn wrap_hazard_elements(kernel: &FilterKernel, design: &CfaoDesign) -> Vec<usize> {
    (0..design.element_count())
        .filter(|&e| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (i, _) in kernel.neighbours(e) {
                if design.rho[i] > PASS_THROUGH_WEIGHT {
                    lo = lo.min(design.theta[i]);
                    hi = hi.max(design.theta[i]);
                }
            }
            hi - lo > FRAC_PI_2
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CfaoDiagnostics {
    pub compliance: Vec<f64>,
    /// `sum rho / N_active` per evaluation.
    pub volume: Vec<f64>,
    pub converged: bool,
    /// 1-based evaluation index of the returned design.
    pub best_iteration: usize,
    pub best_compliance: f64,
    /// Filtered angles of the returned design.
    pub filtered_theta: Vec<f64>,
    /// Elements flagged by [`wrap_hazard_elements`] on the returned design.
    pub wrap_hazard: Vec<usize>,
}

impl CfaoDiagnostics {
    pub fn iterations(&self) -> usize {
        self.compliance.len()
    }
}

/// Runs the stage and returns the lowest-compliance evaluated design that
/// satisfies the volume budget (the start design if none improves on it).
pub fn run_cfao(
    problem: &DesignProblem,
    start: CfaoDesign,
    settings: &CfaoSettings,
    common: &CommonSettings,
    history: &mut History,
) -> Result<(CfaoDesign, CfaoDiagnostics)> {
    settings.validate()?;
    check_len(&problem.angle_filter, &start)?;
    let mesh = problem.model.mesh();
    let active: Vec<usize> = mesh.active_elements().collect();
    let n_active = active.len().max(1) as f64;
    let budget = problem.volume_budget();
    let slack = 1e-6 * n_active;
    let mma = MmaSettings {
        move_limit: common.move_limit,
        ..common.mma
    };
    let ones = vec![1.0; active.len()];
    let rho_lower = vec![0.0; active.len()];
    let rho_upper = vec![1.0; active.len()];
    let theta_lower = vec![-FRAC_PI_2; active.len()];
    let theta_upper = vec![FRAC_PI_2; active.len()];

    let mut x = start;
    let mut rho_state = AsymptoteState::new();
    let mut theta_state = AsymptoteState::new();
    let mut diag = CfaoDiagnostics::default();
    let mut best: Option<(CfaoDesign, f64, Vec<f64>)> = None;

    loop {
        let eval = cfao_compliance_and_gradients(problem, &x, settings)?;
        let c = eval.compliance;
        let volume: f64 = active.iter().map(|&e| x.rho[e]).sum();
        history.push(StageKind::Cfao, c, None, volume / n_active, IterationExtra::None);
        diag.compliance.push(c);
        diag.volume.push(volume / n_active);
        let feasible = volume <= budget + slack;
        if feasible && best.as_ref().is_none_or(|(_, bc, _)| c < *bc) {
            diag.best_iteration = diag.iterations();
            best = Some((x.clone(), c, eval.filtered_theta.clone()));
        }

        if diag.iterations() >= VARIANCE_WINDOW && convergence_variance(&diag.compliance)? <= common.eps0 {
            diag.converged = true;
            break;
        }
        if diag.iterations() >= settings.max_iterations {
            history.warn(format!(
                "CFAO stopped at the iteration cap ({}) without meeting the variance criterion",
                settings.max_iterations
            ));
            break;
        }

        if settings.optimize_density {
            let grad = match settings.filter {
                TopologyFilter::Sensitivity => problem.filter.filter_sensitivities(&x.rho, &eval.d_rho)?,
                _ => eval.d_rho.clone(),
            };
            let xv: Vec<f64> = active.iter().map(|&e| x.rho[e]).collect();
            let gv: Vec<f64> = active.iter().map(|&e| grad[e]).collect();
            let step = BoxConstrainedProblem {
                x: &xv,
                lower: &rho_lower,
                upper: &rho_upper,
                gradient: &gv,
                constraint: Some(LinearConstraint {
                    coefficients: &ones,
                    bound: budget,
                }),
            };
            let (next, state) = mma_update(&step, &rho_state, &mma)?;
            rho_state = state;
            for (k, &e) in active.iter().enumerate() {
                x.rho[e] = next[k];
            }
        }
        let tv: Vec<f64> = active.iter().map(|&e| x.theta[e]).collect();
        let gv: Vec<f64> = active.iter().map(|&e| eval.d_theta[e]).collect();
        let step = BoxConstrainedProblem {
            x: &tv,
            lower: &theta_lower,
            upper: &theta_upper,
            gradient: &gv,
            constraint: None,
        };
        let (next, state) = mma_update(&step, &theta_state, &mma)?;
        theta_state = state;
        for (k, &e) in active.iter().enumerate() {
            x.theta[e] = next[k];
        }
    }

    let (design, compliance, filtered) = match best {
        Some(b) => b,
        None => {
            history.warn("CFAO: no evaluated design met the volume budget; returning the last iterate");
            diag.best_iteration = diag.iterations();
            let eval = cfao_compliance_and_gradients(problem, &x, settings)?;
            (x, eval.compliance, eval.filtered_theta)
        }
    };
    diag.best_compliance = compliance;
    diag.filtered_theta = filtered;
    diag.wrap_hazard = wrap_hazard_elements(&problem.angle_filter, &design);
    if !diag.wrap_hazard.is_empty() {
        log::info!(
            "CFAO: {} element(s) average angles spanning more than 90 degrees",
            diag.wrap_hazard.len()
        );
    }
    Ok((design, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Axis, BoundaryConditions, FeModel, Mesh, PointLoad};
    use crate::testing::{cantilever, spread};
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn kernel(nx: usize, ny: usize, r: f64) -> FilterKernel {
        FilterKernel::new(&Mesh::new(nx, ny).unwrap(), r).unwrap()
    }

    fn random_design(count: usize, seed: u64) -> CfaoDesign {
        CfaoDesign::new(spread(count, seed, 0.1, 1.0), spread(count, seed + 1, -1.4, 1.4)).unwrap()
    }

    #[test]
    fn filter_examples() {
        let k = kernel(4, 3, 1.5);
        let uniform = CfaoDesign::uniform(12, 1.0, 0.3).unwrap();
        for t in apply_angle_filter(&k, &uniform, AngleWeights::Normalized).unwrap() {
            assert!((t - 0.3).abs() <= 1e-12);
        }
        let d = random_design(12, 5);
        let self_only = apply_angle_filter(&kernel(4, 3, 1.0), &d, AngleWeights::Normalized).unwrap();
        for (t, theta) in self_only.iter().zip(&d.theta) {
            assert!((t - theta).abs() <= 1e-15);
        }

        let pair = CfaoDesign::new(vec![1.0, 1.0], vec![0.0, PI / 3.0]).unwrap();
        let t = apply_angle_filter(&kernel(2, 1, 1.5), &pair, AngleWeights::Normalized).unwrap();
        assert!((t[0] - PI / 12.0).abs() < 1e-15, "{}", t[0]);
    }

    #[test]
    fn void_neighbourhood_passes_through() {
        let d = CfaoDesign::new(vec![0.0, 0.0, 0.0], vec![0.2, -0.4, 0.9]).unwrap();
        let t = apply_angle_filter(&kernel(3, 1, 1.5), &d, AngleWeights::Normalized).unwrap();
        assert_eq!(t, d.theta);
    }

    #[test]
    fn printed_weights_shrink_partial_density() {
        let d = CfaoDesign::uniform(2, 0.5, 0.8).unwrap();
        let k = kernel(2, 1, 1.5);
        let printed = apply_angle_filter(&k, &d, AngleWeights::Printed).unwrap();
        assert!((printed[0] - 0.4).abs() < 1e-15);
        let normalized = apply_angle_filter(&k, &d, AngleWeights::Normalized).unwrap();
        assert!((normalized[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn init_examples() {
        let cands = CandidateAngleSet::from_degrees(&[0.0, 45.0]).unwrap();
        let alpha = vec![
            0.0, 1.0, 0.0, // solid 45
            0.0, 0.0, 1.0, // void
            0.1, 0.3, 0.6, // mixed
        ];
        let d = init_from_sbpto(&SbptoDesign::from_values(alpha, 3).unwrap(), &cands).unwrap();
        assert_eq!(d.rho[0], 1.0);
        assert!((d.theta[0] - PI / 4.0).abs() < 1e-15);
        assert_eq!((d.rho[1], d.theta[1]), (0.0, 0.0));
        assert!((d.rho[2] - 0.4).abs() < 1e-15);
        assert!((d.theta[2] - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_design() {
        assert!(CfaoDesign::new(vec![1.2], vec![0.0]).is_err());
        assert!(CfaoDesign::new(vec![1.0], vec![2.0]).is_err());
        assert!(CfaoDesign::new(vec![1.0, 1.0], vec![0.0]).is_err());
    }

    fn check_gradients(settings: &CfaoSettings, seed: u64) {
        let problem = cantilever(4, 3, 0.5);
        let design = random_design(12, seed);
        let eval = cfao_compliance_and_gradients(&problem, &design, settings).unwrap();
        let c = eval.compliance;
        let at = |rho: Vec<f64>, theta: Vec<f64>| {
            cfao_compliance_and_gradients(&problem, &CfaoDesign { rho, theta }, settings)
                .unwrap()
                .compliance
        };
        let h = 1e-6;
        for i in 0..12 {
            let mut plus = design.rho.clone();
            plus[i] += h;
            let mut minus = design.rho.clone();
            minus[i] -= h;
            let fd = (at(plus, design.theta.clone()) - at(minus, design.theta.clone())) / (2.0 * h);
            let tol = 1e-4 * fd.abs() + 1e-12 * c / h;
            assert!((eval.d_rho[i] - fd).abs() <= tol, "rho {i}: {} vs {fd}", eval.d_rho[i]);
        }
        let h = 1e-5;
        for i in 0..12 {
            let mut plus = design.theta.clone();
            plus[i] += h;
            let mut minus = design.theta.clone();
            minus[i] -= h;
            let fd = (at(design.rho.clone(), plus) - at(design.rho.clone(), minus)) / (2.0 * h);
            let tol = 1e-4 * fd.abs() + 1e-12 * c / h;
            assert!((eval.d_theta[i] - fd).abs() <= tol, "theta {i}: {} vs {fd}", eval.d_theta[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(&CfaoSettings::default(), 11);
        let printed = CfaoSettings {
            angle_weights: AngleWeights::Printed,
            ..CfaoSettings::default()
        };
        check_gradients(&printed, 12);
    }

    #[test]
    fn frozen_weights_drop_only_the_coupling_term() {
        let problem = cantilever(4, 3, 0.5);
        let design = random_design(12, 4);
        let exact = cfao_compliance_and_gradients(&problem, &design, &CfaoSettings::default()).unwrap();
        let frozen = CfaoSettings {
            exact_density_coupling: false,
            ..CfaoSettings::default()
        };
        let approx = cfao_compliance_and_gradients(&problem, &design, &frozen).unwrap();
        assert_eq!(exact.d_theta, approx.d_theta);
        assert_eq!(exact.compliance, approx.compliance);
        assert_ne!(exact.d_rho, approx.d_rho);
    }

    #[test]
    fn isotropic_material_has_no_angle_gradient() {
        let mut problem = cantilever(4, 3, 0.5);
        problem.material = ConstitutiveMatrix::isotropic(1.0, 0.3);
        let design = random_design(12, 9);
        let eval = cfao_compliance_and_gradients(&problem, &design, &CfaoSettings::default()).unwrap();
        for g in &eval.d_theta {
            assert!(g.abs() <= 1e-12 * eval.compliance, "{g}");
        }
    }

    #[test]
    fn empty_element_adds_no_angle_gradient() {
        let problem = cantilever(3, 1, 0.5);
        let settings = CfaoSettings::default();
        let design = CfaoDesign::new(vec![1.0, 1.0, 0.0], vec![0.3, -0.2, 0.7]).unwrap();
        let k1 = FilterKernel::new(problem.model.mesh(), 1.0).unwrap();
        let problem = DesignProblem {
            angle_filter: k1,
            ..problem
        };
        let eval = cfao_compliance_and_gradients(&problem, &design, &settings).unwrap();
        assert!(eval.d_theta[2].abs() <= 1e-12 * eval.compliance.abs());
    }

    #[test]
    fn single_element_at_optimum_stays() {
        let mesh = Mesh::new(1, 1).unwrap();
        let bc = BoundaryConditions::new(
            vec![0, 1, 6, 7],
            vec![
                PointLoad { node: 1, axis: Axis::X, magnitude: 1.0 },
                PointLoad { node: 2, axis: Axis::X, magnitude: 1.0 },
            ],
        );
        let problem = DesignProblem::new(
            FeModel::new(mesh, bc).unwrap(),
            crate::testing::fibre(),
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        // Axial pull along x: full density with fibres along x is optimal.
        let start = CfaoDesign::uniform(1, 1.0, 0.0).unwrap();
        let mut history = History::new();
        let (design, diag) =
            run_cfao(&problem, start, &CfaoSettings::default(), &CommonSettings::default(), &mut history).unwrap();
        assert!(diag.converged);
        assert_eq!(design.rho, vec![1.0]);
        assert!(design.theta[0].abs() <= 1e-9, "{}", design.theta[0]);
        assert_eq!(history.stage_count(StageKind::Cfao), diag.iterations());
    }

    #[test]
    fn run_improves_and_keeps_budget() {
        let problem = cantilever(12, 8, 0.5);
        let start = CfaoDesign::uniform(96, 0.5, PI / 4.0).unwrap();
        let mut history = History::new();
        let settings = CfaoSettings {
            max_iterations: 60,
            ..CfaoSettings::default()
        };
        let (design, diag) = run_cfao(&problem, start, &settings, &CommonSettings::default(), &mut history).unwrap();
        assert!(diag.best_compliance <= diag.compliance[0]);
        assert!(design.rho.iter().sum::<f64>() <= 0.5 * 96.0 + 1e-6 * 96.0);
        assert!(design.theta.iter().all(|t| t.abs() <= FRAC_PI_2));
        assert_eq!(diag.compliance[diag.best_iteration - 1], diag.best_compliance);
        let t = apply_angle_filter(&problem.angle_filter, &design, AngleWeights::Normalized).unwrap();
        assert_eq!(t, diag.filtered_theta);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn filtered_angles_stay_in_range(seed in 0u64..100_000, r in 1.0f64..3.0) {
            let d = random_design(20, seed);
            let d = CfaoDesign {
                theta: d.theta.iter().map(|t| t * FRAC_PI_2 / 1.4).collect(),
                ..d
            };
            for weights in [AngleWeights::Normalized, AngleWeights::Printed] {
                let t = apply_angle_filter(&kernel(5, 4, r), &d, weights).unwrap();
                let lo = d.theta.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = d.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for v in t {
                    prop_assert!(v.abs() <= FRAC_PI_2);
                    if weights == AngleWeights::Normalized {
                        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn constant_field_is_a_fixed_point(seed in 0u64..100_000, theta in -1.5f64..1.5) {
            let d = CfaoDesign::new(spread(20, seed, 0.0, 1.0), vec![theta; 20]).unwrap();
            for t in apply_angle_filter(&kernel(5, 4, 2.2), &d, AngleWeights::Normalized).unwrap() {
                prop_assert!((t - theta).abs() <= 1e-12);
            }
        }
    }
}
