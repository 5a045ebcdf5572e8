//! Shared problem data and the per-iteration history written by every stage.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::fem::FeModel;
use crate::filter::FilterKernel;
use crate::material::ConstitutiveMatrix;
use crate::mma::MmaSettings;
use crate::{Error, Result};

/// Mesh, supports, loads, base material and filters for one optimisation.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub model: FeModel,
    /// Fibre-frame stiffness of the solid material.
    pub material: ConstitutiveMatrix,
    pub volume_fraction: f64,
    /// Sensitivity/density filter for topology variables.
    pub filter: FilterKernel,
    /// Neighbourhood of the spatial angle filter.
    pub angle_filter: FilterKernel,
}

impl DesignProblem {
    pub fn new(
        model: FeModel,
        material: ConstitutiveMatrix,
        volume_fraction: f64,
        r_min: f64,
        r_c: f64,
    ) -> Result<DesignProblem> {
        if !(volume_fraction > 0.0 && volume_fraction <= 1.0) {
            return Err(Error::config(
                "volume_fraction",
                alloc::format!("must lie in (0, 1], got {volume_fraction}"),
            ));
        }
        let filter = FilterKernel::new(model.mesh(), r_min)?;
        let angle_filter = FilterKernel::new(model.mesh(), r_c)
            .map_err(|_| Error::config("r_c", "angle filter radius must be positive and finite"))?;
        Ok(DesignProblem {
            model,
            material,
            volume_fraction,
            filter,
            angle_filter,
        })
    }

    pub fn element_count(&self) -> usize {
        self.model.mesh().element_count()
    }

    /// Number of designable (active) elements.
    pub fn active_count(&self) -> usize {
        self.model.mesh().active_count()
    }

    /// Material budget `f * N` over the active elements.
    pub fn volume_budget(&self) -> f64 {
        self.volume_fraction * self.active_count() as f64
    }
}

/// Settings shared by all stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommonSettings {
    /// Stop tolerance on the compliance variance.
    pub eps0: f64,
    /// Fibre-convergence tolerance.
    pub eta: f64,
    pub move_limit: f64,
    pub mma: MmaSettings,
}

impl Default for CommonSettings {
    fn default() -> Self {
        CommonSettings {
            eps0: 1e-2,
            eta: 0.95,
            move_limit: 0.2,
            mma: MmaSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageKind {
    Dmo,
    Sbpto,
    Cfao,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Dmo => "DMO",
            StageKind::Sbpto => "SBPTO",
            StageKind::Cfao => "CFAO",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stage-specific detail attached to an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationExtra {
    None,
    /// DMO penalty exponent.
    Penalty(f64),
    /// SBPTO active phase pair.
    Pair(PhaseLabel, PhaseLabel),
}

/// A phase of the binary-phase stage: a candidate angle in degrees or void.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseLabel {
    Angle(f64),
    Void,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::Angle(a) => write!(f, "{a}"),
            PhaseLabel::Void => f.write_str("void"),
        }
    }
}

impl fmt::Display for IterationExtra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterationExtra::None => Ok(()),
            IterationExtra::Penalty(p) => write!(f, "p={p}"),
            IterationExtra::Pair(a, b) => write!(f, "{a}|{b}"),
        }
    }
}

/// One finite-element evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub stage: StageKind,
    /// 1-based, counted across all stages.
    pub iteration: usize,
    pub compliance: f64,
    /// Fibre convergence of the evaluated design, when defined.
    pub h_eta: Option<f64>,
    /// Material volume fraction of the evaluated design.
    pub volume: f64,
    pub extra: IterationExtra,
}

/// Append-only log of evaluations and warnings for a whole run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    records: Vec<IterationRecord>,
    warnings: Vec<String>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        stage: StageKind,
        compliance: f64,
        h_eta: Option<f64>,
        volume: f64,
        extra: IterationExtra,
    ) -> IterationRecord {
        let record = IterationRecord {
            stage,
            iteration: self.records.len() + 1,
            compliance,
            h_eta,
            volume,
            extra,
        };
        log::debug!(
            "{stage} iter {}: c = {compliance:.6}, volume = {volume:.6}, {extra}",
            record.iteration
        );
        self.records.push(record);
        record
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn stage_records(&self, stage: StageKind) -> impl Iterator<Item = &IterationRecord> + '_ {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn stage_count(&self, stage: StageKind) -> usize {
        self.stage_records(stage).count()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}
