//! Runs the stages selected by a [`ProblemConfig`] in order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cfao::{init_from_sbpto, run_cfao, CfaoDesign, CfaoDiagnostics};
use crate::config::{Mode, ProblemConfig};
use crate::dmo::{init_dmo, run_dmo, DmoDiagnostics};
use crate::problem::{DesignProblem, History, PhaseLabel, StageKind};
use crate::sbpto::{init_from_dmo, run_sbpto, SbptoDesign, SbptoDiagnostics};
use crate::Result;

/// Evaluations per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub dmo: usize,
    pub sbpto: usize,
    pub cfao: usize,
}

impl StageCounts {
    pub fn total(&self) -> usize {
        self.dmo + self.sbpto + self.cfao
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Compliance of the returned design.
    pub compliance: f64,
    pub iterations: usize,
    pub stages: StageCounts,
    /// Fibre convergence at the end of the binary-phase stage; `None` when
    /// only the continuous stage ran.
    pub h_eta: Option<f64>,
    /// `sum rho / N_active` of the returned design.
    pub volume_fraction: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub problem: DesignProblem,
    pub design: CfaoDesign,
    /// Angles the returned design is analysed with.
    pub filtered_theta: Vec<f64>,
    /// Dominant discrete phase per element, when the discrete stages ran.
    pub labels: Option<Vec<PhaseLabel>>,
    /// Phase fractions handed from the binary-phase stage to the continuous
    /// stage.
    pub phases: Option<SbptoDesign>,
    pub history: History,
    pub summary: RunSummary,
    pub dmo: Option<DmoDiagnostics>,
    pub sbpto: Option<SbptoDiagnostics>,
    pub cfao: CfaoDiagnostics,
}

impl PipelineOutcome {
    /// Last compliance recorded by a stage.
    pub fn stage_endpoint(&self, stage: StageKind) -> Option<f64> {
        self.history.stage_records(stage).last().map(|r| r.compliance)
    }
}

/// Validates `config` and runs it. Stage failures carry the stage name.
pub fn run_pipeline(config: &ProblemConfig) -> Result<PipelineOutcome> {
    run_pipeline_recorded(config, &mut History::new())
}

/// Like [`run_pipeline`], but evaluations are appended to `history` as they
/// happen, so they remain available when a stage fails.
pub fn run_pipeline_recorded(config: &ProblemConfig, history: &mut History) -> Result<PipelineOutcome> {
    let problem = config.design_problem()?;
    let common = config.common();
    let mesh = problem.model.mesh().clone();

    let (start, labels, phases, dmo_diag, sbpto_diag) = match config.mode {
        Mode::Dsco => {
            let candidates = config.candidates()?.expect("DSCO mode has candidates");
            let n = candidates.len();
            let chi = init_dmo(&mesh, n, config.volume_fraction)?;
            let (dmo, dmo_diag) =
                run_dmo(&problem, &candidates, chi, &config.dmo, &common, history).map_err(|e| e.in_stage("DMO"))?;
            let (alpha, rescaled) = init_from_dmo(&dmo);
            if rescaled > 0 {
                history.warn(format!(
                    "{rescaled} element(s) had candidate densities summing above 1 and were rescaled"
                ));
            }
            let (alpha, mut sbpto_diag) = run_sbpto(&problem, &candidates, alpha, &config.sbpto, &common, history)
                .map_err(|e| e.in_stage("SBPTO"))?;
            sbpto_diag.rescaled_rows = rescaled;
            let mut phase_names: Vec<PhaseLabel> = candidates.degrees().iter().map(|&d| PhaseLabel::Angle(d)).collect();
            phase_names.push(PhaseLabel::Void);
            let labels: Vec<PhaseLabel> = alpha.argmax_labels().into_iter().map(|i| phase_names[i]).collect();
            for e in mesh.active_elements() {
                let row = alpha.row(e);
                if row.iter().all(|&v| v <= config.sbpto.lambda_thresh) {
                    log::debug!("element {e}: mixed phases {row:?} labelled {}", labels[e]);
                }
            }
            let start = init_from_sbpto(&alpha, &candidates)?;
            (start, Some(labels), Some(alpha), Some(dmo_diag), Some(sbpto_diag))
        }
        Mode::CfaoOnly => {
            let theta = config.initial_angle_deg.to_radians();
            let start = CfaoDesign::uniform(mesh.element_count(), config.volume_fraction, theta)?;
            (start, None, None, None, None)
        }
    };

    let (design, cfao_diag) =
        run_cfao(&problem, start, &config.cfao, &common, history).map_err(|e| e.in_stage("CFAO"))?;

    let stages = StageCounts {
        dmo: history.stage_count(StageKind::Dmo),
        sbpto: history.stage_count(StageKind::Sbpto),
        cfao: history.stage_count(StageKind::Cfao),
    };
    let active = mesh.active_count().max(1) as f64;
    let summary = RunSummary {
        compliance: cfao_diag.best_compliance,
        iterations: stages.total(),
        stages,
        h_eta: sbpto_diag.as_ref().and_then(|d| d.sweep_h_eta.last().copied()),
        volume_fraction: mesh.active_elements().map(|e| design.rho[e]).sum::<f64>() / active,
        warnings: history.warnings().to_vec(),
    };
    Ok(PipelineOutcome {
        filtered_theta: cfao_diag.filtered_theta.clone(),
        problem,
        design,
        labels,
        phases,
        history: history.clone(),
        summary,
        dmo: dmo_diag,
        sbpto: sbpto_diag,
        cfao: cfao_diag,
    })
}
