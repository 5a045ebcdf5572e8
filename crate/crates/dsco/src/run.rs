//! Runs a configuration into an output directory, and case sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use dsco_core::benchmark::benchmark;
use dsco_core::config::ProblemConfig;
use dsco_core::pipeline::{run_pipeline_recorded, PipelineOutcome};
use dsco_core::problem::History;

use crate::export::{layout_svg, write_convergence_csv, write_design_csv, SummaryJson};
use crate::{Error, Result};

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const DESIGN_FILE: &str = "design.csv";
pub const LAYOUT_FILE: &str = "layout.svg";
pub const SUMMARY_FILE: &str = "summary.json";

/// Environment variable holding the number of sweep worker threads.
pub const THREADS_VAR: &str = "DSCO_THREADS";

#[derive(Debug)]
pub struct RunReport {
    pub outcome: PipelineOutcome,
    pub summary: SummaryJson,
    pub out_dir: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::io(path))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(Error::io(path))
}

/// Runs `config` and writes the four result files into `out_dir`. When a
/// stage fails, the evaluations made so far are still written to
/// `convergence.csv`.
pub fn run_to_dir(config: &ProblemConfig, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    let start = Instant::now();
    let mut history = History::new();
    let result = run_pipeline_recorded(config, &mut history);
    let wall_seconds = start.elapsed().as_secs_f64();

    let path = out_dir.join(CONVERGENCE_FILE);
    let mut w = create(&path)?;
    write_convergence_csv(&history, &mut w)?;
    finish(w, &path)?;
    let outcome = result.map_err(|source| Error::Partial {
        source,
        flushed: path.clone(),
    })?;

    let mesh = outcome.problem.model.mesh();
    let path = out_dir.join(DESIGN_FILE);
    let mut w = create(&path)?;
    write_design_csv(
        mesh,
        &outcome.design,
        &outcome.filtered_theta,
        outcome.labels.as_deref(),
        &mut w,
    )?;
    finish(w, &path)?;

    let path = out_dir.join(LAYOUT_FILE);
    let mut w = create(&path)?;
    w.write_all(layout_svg(mesh, &outcome.design, &outcome.filtered_theta).as_bytes())
        .map_err(Error::io(&path))?;
    finish(w, &path)?;

    let summary = SummaryJson::new(&outcome.summary, wall_seconds);
    let path = out_dir.join(SUMMARY_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n").map_err(Error::io(&path))?;
    finish(w, &path)?;

    log::info!(
        "{}: compliance {:.6} after {} evaluations ({:.1} s)",
        config.name,
        summary.compliance,
        summary.iterations,
        wall_seconds
    );
    Ok(RunReport {
        outcome,
        summary,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Expands a case list such as `a..n`, `a,b,c` or `a..d,h`.
pub fn parse_cases(spec: &str) -> Result<Vec<char>> {
    let bad = || Error::CaseList(spec.to_string());
    let single = |s: &str| -> Result<char> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if c.is_ascii_lowercase() => Ok(c),
            _ => Err(bad()),
        }
    };
    let mut cases = Vec::new();
    for part in spec.split(',').map(str::trim) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (single(a)?, single(b)?);
                if a > b {
                    return Err(bad());
                }
                cases.extend(a..=b);
            }
            None => cases.push(single(part)?),
        }
    }
    if cases.is_empty() {
        return Err(bad());
    }
    cases.dedup();
    Ok(cases)
}

/// Worker threads for sweeps: `DSCO_THREADS` when set to a positive
/// integer, otherwise the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: char,
    pub compliance: f64,
    pub iterations: usize,
}

/// Runs the listed cases of one benchmark on `threads` workers. With
/// `out_dir`, each case writes its files into `<out_dir>/<name>_<case>`.
pub fn sweep(name: &str, cases: &[char], threads: usize, out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    let configs = cases
        .iter()
        .map(|&c| Ok(benchmark(name, c)?.config))
        .collect::<Result<Vec<_>>>()?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..cases.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, cases.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(k) else { break };
                let row = run_case(config, out_dir).map(|(compliance, iterations)| SweepRow {
                    case: cases[k],
                    compliance,
                    iterations,
                });
                results.lock().expect("no worker panics while holding the lock")[k] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every case ran"))
        .collect()
}

fn run_case(config: &ProblemConfig, out_dir: Option<&Path>) -> Result<(f64, usize)> {
    match out_dir {
        Some(dir) => {
            let report = run_to_dir(config, &dir.join(&config.name))?;
            Ok((report.summary.compliance, report.summary.iterations))
        }
        None => {
            let out = dsco_core::pipeline::run_pipeline(config)?;
            Ok((out.summary.compliance, out.summary.iterations))
        }
    }
}

/// `case,compliance,iterations`, one row per case.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "compliance", "iterations"])?;
    for r in rows {
        w.write_record([r.case.to_string(), r.compliance.to_string(), r.iterations.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
