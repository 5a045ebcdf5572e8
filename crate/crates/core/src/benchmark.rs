//! The four standard problems and their case letters.
//!
//! Cases `a`-`d` start the continuous stage alone from a uniform angle
//! (0, 90, 45 and -45 degrees). Later letters run all three stages with a
//! candidate angle set.
//!
//! Geometry not fixed by the problem statements:
//!
//! * MBB beam: both bottom corners pinned.
//! * L-bracket: arms 50 wide, top edge of the vertical arm clamped, unit
//!   downward load at the top corner of the horizontal arm's free end.
//! * Two-load cantilever: the single-load cantilever's mid-edge load plus
//!   a unit downward load at the middle of the top edge, applied together.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::cfao::CfaoSettings;
use crate::config::{Fix, LoadSpec, MeshConfig, Mode, ProblemConfig, Region, SupportSpec};
use crate::dmo::DmoSettings;
use crate::fem::Axis;
use crate::material::MaterialSpec;
use crate::mma::MmaSettings;
use crate::sbpto::SbptoSettings;
use crate::{Error, Result};

pub const BENCHMARK_NAMES: [&str; 4] = ["mbb", "lshape", "cantilever", "cantilever_multi"];

/// Uniform start angles of the continuous-only cases `a`-`d`.
const CFAO_START_DEG: [f64; 4] = [0.0, 90.0, 45.0, -45.0];

const BASE4: [f64; 4] = [0.0, -45.0, 45.0, 90.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub name: String,
    pub case: char,
    pub config: ProblemConfig,
}

/// Case letters defined for a benchmark.
pub fn case_letters(name: &str) -> Result<Vec<char>> {
    let last = match name {
        "mbb" => 'n',
        "lshape" | "cantilever" => 'j',
        "cantilever_multi" => 'h',
        _ => return Err(Error::UnknownBenchmark(name.to_string())),
    };
    Ok(('a'..=last).collect())
}

fn six(extra: [f64; 2]) -> Vec<f64> {
    let mut v = BASE4.to_vec();
    v.extend(extra);
    v
}

/// Candidate angles (degrees) for the three-stage cases.
fn candidate_set(name: &str, case: char) -> Option<Vec<f64>> {
    let set = match (name, case) {
        (_, 'e') => vec![0.0, 90.0],
        // Case (f) of the two-load problem uses [0, -45, 45, 90].
        ("cantilever_multi", 'f') => BASE4.to_vec(),
        ("cantilever_multi", 'h') => vec![0.0, -30.0, 30.0, 90.0],
        (_, 'f') => vec![0.0, -30.0, 30.0, 90.0],
        (_, 'g') => vec![0.0, -60.0, 60.0, 90.0],
        (_, 'h') => BASE4.to_vec(),
        (_, 'i') => six([-30.0, 30.0]),
        (_, 'j') => six([-60.0, 60.0]),
        (_, 'k') => six([-30.0, 60.0]),
        (_, 'l') => six([30.0, 60.0]),
        (_, 'm') => six([30.0, -60.0]),
        (_, 'n') => six([-30.0, -60.0]),
        _ => return None,
    };
    Some(set)
}

fn stiffness_fibre() -> MaterialSpec {
    MaterialSpec::Stiffness {
        d11: 0.5448,
        d12: 0.0383,
        d22: 0.1277,
        d33: 0.0456,
    }
}

fn engineering_fibre() -> MaterialSpec {
    MaterialSpec::Engineering {
        ex: 2.0,
        ey: 1.0,
        gxy: 0.25,
        nu_xy: 0.3,
    }
}

fn load(i: usize, j: usize, magnitude: f64) -> LoadSpec {
    LoadSpec {
        at: [i, j],
        axis: Axis::Y,
        magnitude,
    }
}

fn clamped_left(ny: usize) -> Vec<SupportSpec> {
    vec![SupportSpec::Segment {
        from: [0, 0],
        to: [0, ny],
        fix: Fix::Both,
    }]
}

fn base_config(name: &str) -> ProblemConfig {
    let (mesh, material, supports, loads, f) = match name {
        "mbb" => (
            MeshConfig {
                nx: 120,
                ny: 40,
                cutouts: Vec::new(),
            },
            stiffness_fibre(),
            vec![
                SupportSpec::Node { at: [0, 0], fix: Fix::Both },
                SupportSpec::Node { at: [120, 0], fix: Fix::Both },
            ],
            vec![load(30, 40, -1.0), load(90, 40, -1.0), load(60, 0, -2.0)],
            0.5,
        ),
        "lshape" => (
            MeshConfig {
                nx: 100,
                ny: 100,
                cutouts: vec![Region {
                    x0: 50.0,
                    y0: 50.0,
                    x1: 100.0,
                    y1: 100.0,
                }],
            },
            stiffness_fibre(),
            vec![SupportSpec::Segment {
                from: [0, 100],
                to: [50, 100],
                fix: Fix::Both,
            }],
            vec![load(100, 50, -1.0)],
            0.6,
        ),
        "cantilever" => (
            MeshConfig {
                nx: 50,
                ny: 40,
                cutouts: Vec::new(),
            },
            engineering_fibre(),
            clamped_left(40),
            vec![load(50, 20, -1.0)],
            0.5,
        ),
        _ => (
            MeshConfig {
                nx: 60,
                ny: 40,
                cutouts: Vec::new(),
            },
            engineering_fibre(),
            clamped_left(40),
            vec![load(30, 40, -1.0), load(60, 20, -1.0)],
            0.5,
        ),
    };
    ProblemConfig {
        name: name.to_string(),
        mode: Mode::Dsco,
        mesh,
        material,
        supports,
        loads,
        load_cases: Vec::new(),
        volume_fraction: f,
        r_min: 1.5,
        r_c: None,
        candidates_deg: Vec::new(),
        initial_angle_deg: 0.0,
        eps0: 1e-2,
        eta: 0.95,
        move_limit: 0.2,
        mma: MmaSettings::default(),
        dmo: DmoSettings::default(),
        sbpto: SbptoSettings::default(),
        cfao: CfaoSettings::default(),
    }
}

/// Fully resolved configuration of one benchmark case.
pub fn benchmark(name: &str, case: char) -> Result<BenchmarkCase> {
    let letters = case_letters(name)?;
    if !letters.contains(&case) {
        return Err(Error::UnknownCase {
            name: name.to_string(),
            case,
        });
    }
    let mut config = base_config(name);
    config.name = alloc::format!("{name}_{case}");
    match case {
        'a'..='d' => {
            config.mode = Mode::CfaoOnly;
            config.initial_angle_deg = CFAO_START_DEG[case as usize - 'a' as usize];
        }
        _ => {
            config.candidates_deg = candidate_set(name, case).ok_or(Error::UnknownCase {
                name: name.to_string(),
                case,
            })?;
        }
    }
    Ok(BenchmarkCase {
        name: name.to_string(),
        case,
        config,
    })
}
