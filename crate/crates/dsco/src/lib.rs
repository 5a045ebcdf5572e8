//! Configuration files, result exporters and batch drivers around
//! [`dsco_core`].
//!
//! A run writes four files into its output directory:
//!
//! * `convergence.csv`: `stage,iter,compliance,h_eta,volume,extra`, one row
//!   per finite-element evaluation. `h_eta` is empty where undefined; `extra`
//!   is `p=<penalty>` for the discrete stage and `<a>|<b>` for the
//!   binary-phase stage, each phase being an angle in degrees or `void`.
//! * `design.csv`: `element,cx,cy,rho,theta_deg,theta_filtered_deg,label`,
//!   one row per active element in index order. `label` is the dominant
//!   discrete phase (`void` or the angle in degrees) and empty when only the
//!   continuous stage ran.
//! * `layout.svg`: one `<g id="e<k>">` per active element holding a cell
//!   shaded by `rho` and, for `rho >= 0.5`, a line at the filtered angle.
//! * `summary.json`: `compliance`, `iterations`, `stages{dmo,sbpto,cfao}`,
//!   `h_eta`, `volume_fraction`, `warnings`, `wall_seconds`.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! identical designs give identical bytes.

pub mod config;
pub mod export;
pub mod run;

use std::path::PathBuf;

pub use config::{load_config, parse_config, to_json};
pub use run::{parse_cases, run_to_dir, sweep, thread_count, RunReport, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dsco_core::Error),

    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("writing json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{source} (partial history written to {})", flushed.display())]
    Partial {
        source: dsco_core::Error,
        flushed: PathBuf,
    },

    #[error("invalid case list `{0}`")]
    CaseList(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
