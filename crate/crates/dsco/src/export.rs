//! Result files: convergence history, per-element design, fibre layout and
//! run summary.

use std::fmt::Write as _;
use std::io::Write;

use dsco_core::cfao::CfaoDesign;
use dsco_core::fem::Mesh;
use dsco_core::pipeline::RunSummary;
use dsco_core::problem::{History, PhaseLabel};
use serde::Serialize;

use crate::Result;

pub const CONVERGENCE_HEADER: [&str; 6] = ["stage", "iter", "compliance", "h_eta", "volume", "extra"];
pub const DESIGN_HEADER: [&str; 7] = ["element", "cx", "cy", "rho", "theta_deg", "theta_filtered_deg", "label"];

/// Side of one element in the layout, in SVG user units.
const CELL: f64 = 10.0;
/// Elements at or above this density get a fibre line.
const SOLID_RHO: f64 = 0.5;

pub fn write_convergence_csv<W: Write>(history: &History, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for r in history.records() {
        w.write_record([
            r.stage.name().to_string(),
            r.iteration.to_string(),
            r.compliance.to_string(),
            r.h_eta.map(|h| h.to_string()).unwrap_or_default(),
            r.volume.to_string(),
            r.extra.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_design_csv<W: Write>(
    mesh: &Mesh,
    design: &CfaoDesign,
    filtered_theta: &[f64],
    labels: Option<&[PhaseLabel]>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DESIGN_HEADER)?;
    for e in mesh.active_elements() {
        let (cx, cy) = mesh.element_centroid(e);
        w.write_record([
            e.to_string(),
            cx.to_string(),
            cy.to_string(),
            design.rho[e].to_string(),
            design.theta[e].to_degrees().to_string(),
            filtered_theta[e].to_degrees().to_string(),
            labels.map(|l| l[e].to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Fibre layout: grey cells shaded by density (white is void) and a red
/// line through each solid element's centre along its filtered angle. The
/// mesh y axis points up.
pub fn layout_svg(mesh: &Mesh, design: &CfaoDesign, filtered_theta: &[f64]) -> String {
    let (w, h) = (mesh.nx() as f64 * CELL, mesh.ny() as f64 * CELL);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let half = 0.4 * CELL;
    for e in mesh.active_elements() {
        let (i, j) = mesh.element_position(e);
        let x = i as f64 * CELL;
        let y = (mesh.ny() - 1 - j) as f64 * CELL;
        let rho = design.rho[e].clamp(0.0, 1.0);
        let grey = (255.0 * (1.0 - 0.8 * rho)).round() as u8;
        let _ = write!(
            s,
            r#"<g id="e{e}"><rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({grey},{grey},{grey})"/>"#
        );
        if rho >= SOLID_RHO {
            let (sin, cos) = filtered_theta[e].sin_cos();
            let (cx, cy) = (x + 0.5 * CELL, y + 0.5 * CELL);
            let _ = write!(
                s,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="red" stroke-width="1"/>"#,
                cx - half * cos,
                cy + half * sin,
                cx + half * cos,
                cy - half * sin,
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct StagesJson {
    pub dmo: usize,
    pub sbpto: usize,
    pub cfao: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct SummaryJson {
    pub compliance: f64,
    pub iterations: usize,
    pub stages: StagesJson,
    pub h_eta: Option<f64>,
    pub volume_fraction: f64,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

impl SummaryJson {
    pub fn new(summary: &RunSummary, wall_seconds: f64) -> Self {
        SummaryJson {
            compliance: summary.compliance,
            iterations: summary.iterations,
            stages: StagesJson {
                dmo: summary.stages.dmo,
                sbpto: summary.stages.sbpto,
                cfao: summary.stages.cfao,
            },
            h_eta: summary.h_eta,
            volume_fraction: summary.volume_fraction,
            warnings: summary.warnings.clone(),
            wall_seconds,
        }
    }
}
