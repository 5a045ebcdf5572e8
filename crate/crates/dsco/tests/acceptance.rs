//! Acceptance suite: one test per criterion.
//!
//! The full-size benchmark runs are shared between criteria through [`references`]
//! and written to `CARGO_TARGET_TMPDIR/acceptance`.

use std::cell::Cell;
use std::path::PathBuf;
use std::sync::OnceLock;

use dsco::export::SummaryJson;
use dsco::run::DESIGN_FILE;
use dsco::{run_to_dir, RunReport};
use dsco_core::benchmark::{benchmark, BENCHMARK_NAMES};
use dsco_core::cfao::{cfao_compliance_and_gradients, CfaoDesign, CfaoSettings};
use dsco_core::config::{Fix, LoadSpec, MeshConfig, Mode, ProblemConfig, SupportSpec};
use dsco_core::convergence::{convergence_variance, fibre_convergence};
use dsco_core::dmo::{dmo_compliance_and_gradient, DmoDesign};
use dsco_core::fem::{element_stiffness, Axis, Mesh};
use dsco_core::material::{
    rotate_constitutive, rotation_matrix, rotation_matrix_derivative, CandidateAngleSet, ConstitutiveMatrix,
};
use dsco_core::pipeline::run_pipeline;
use dsco_core::problem::{CommonSettings, History, PhaseLabel, StageKind};
use dsco_core::sbpto::{
    binary_phase_subproblem, freeze_elements, phase_stiffnesses, sbpto_compliance_and_gradient, SbptoDesign,
    SbptoSettings,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

/// Full-size DSCO runs: (benchmark, case).
const REFERENCE_CASES: [(&str, char); 5] = [
    ("mbb", 'h'),
    ("lshape", 'h'),
    ("cantilever", 'h'),
    ("cantilever", 'f'),
    ("cantilever_multi", 'f'),
];

struct Reference {
    name: &'static str,
    case: char,
    report: RunReport,
    design_csv: Vec<u8>,
}

fn out_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn references() -> &'static [Reference] {
    static RUNS: OnceLock<Vec<Reference>> = OnceLock::new();
    RUNS.get_or_init(|| {
        REFERENCE_CASES
            .iter()
            .map(|&(name, case)| {
                let config = benchmark(name, case).unwrap().config;
                let dir = out_root().join("first").join(&config.name);
                let report = run_to_dir(&config, &dir).unwrap_or_else(|e| panic!("{name} {case}: {e}"));
                let s = &report.summary;
                eprintln!(
                    "{name}({case}): c = {:.4}, evaluations {} (DMO {}, SBPTO {}, CFAO {}), h = {:?}, {:.1} s",
                    s.compliance, s.iterations, s.stages.dmo, s.stages.sbpto, s.stages.cfao, s.h_eta, s.wall_seconds
                );
                let design_csv = std::fs::read(dir.join(DESIGN_FILE)).unwrap();
                Reference {
                    name,
                    case,
                    report,
                    design_csv,
                }
            })
            .collect()
    })
}

fn reference(name: &str, case: char) -> &'static Reference {
    references().iter().find(|r| r.name == name && r.case == case).unwrap()
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target
}

/// Clamped-left cantilever with a mid-edge downward load, fibre material
/// of the MBB problem.
fn small_cantilever(nx: usize, ny: usize, volume_fraction: f64, candidates: &[f64]) -> ProblemConfig {
    let mut c = benchmark("mbb", 'h').unwrap().config;
    c.name = format!("cantilever_{nx}x{ny}");
    c.mesh = MeshConfig {
        nx,
        ny,
        cutouts: Vec::new(),
    };
    c.supports = vec![SupportSpec::Segment {
        from: [0, 0],
        to: [0, ny],
        fix: Fix::Both,
    }];
    c.loads = vec![LoadSpec {
        at: [nx, ny / 2],
        axis: Axis::Y,
        magnitude: -1.0,
    }];
    c.volume_fraction = volume_fraction;
    c.candidates_deg = candidates.to_vec();
    c
}

/// Fraction of entries with `|fd - g| <= tol * max(|g|, floor)`, where the
/// floor keeps entries that are zero up to round-off from counting as
/// failures.
fn agreement(analytic: &[f64], fd: &[f64], tol: f64) -> f64 {
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = 1e-7 * scale;
    let ok = analytic
        .iter()
        .zip(fd)
        .filter(|(g, f)| (*f - *g).abs() <= tol * g.abs().max(floor))
        .count();
    ok as f64 / analytic.len() as f64
}

fn central_difference(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + step;
            let up = f(&x);
            x[i] = v - step;
            let down = f(&x);
            x[i] = v;
            (up - down) / (2.0 * step)
        })
        .collect()
}

const GRADIENT_TOL: f64 = 1e-4;
const GRADIENT_SHARE: f64 = 0.99;
/// Compliance on the sampled designs reaches ~1e3, where solver round-off
/// swamps smaller steps.
const FD_STEP: f64 = 1e-4;

#[test]
fn criterion_1_gradients_match_finite_differences() {
    let start = std::time::Instant::now();
    let config = small_cantilever(6, 4, 0.5, &[0.0, -45.0, 45.0, 90.0]);
    let problem = config.design_problem().unwrap();
    let candidates = config.candidates().unwrap().unwrap();
    let rotated = candidates.rotated(&problem.material);
    let n = candidates.len();
    let elements = problem.element_count();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut runner = TestRunner::new(Config {
        cases: 12,
        failure_persistence: None,
        ..Config::default()
    });

    // Discrete-material interpolation, all penalties of the continuation.
    let dmo_worst = Cell::new(1.0f64);
    runner
        .run(
            &(prop::collection::vec(0.05f64..0.95, elements * n), 1usize..=3),
            |(chi, p)| {
                let p = p as f64;
                let design = DmoDesign::from_values(chi.clone(), n).unwrap();
                let (_, g) = dmo_compliance_and_gradient(&problem, &design, &rotated, p, 1e-9).unwrap();
                let fd = central_difference(&chi, FD_STEP, |x| {
                    let d = DmoDesign::from_values(x.to_vec(), n).unwrap();
                    dmo_compliance_and_gradient(&problem, &d, &rotated, p, 1e-9).unwrap().0
                });
                let share = agreement(&g, &fd, GRADIENT_TOL);
                dmo_worst.set(dmo_worst.get().min(share));
                prop_assert!(share >= GRADIENT_SHARE, "DMO agreement {share}");
                Ok(())
            },
        )
        .unwrap();
    worst.push(("DMO", dmo_worst.get()));

    // Binary-phase interpolation: the exchange derivative dc/da - dc/db
    // each pair subproblem steps along (alpha_b = r - alpha_a), for every
    // phase pair including void.
    let settings = SbptoSettings::default();
    let stiffness = phase_stiffnesses(&candidates, &problem.material, settings.void_stiffness);
    let k = n + 1;
    let sbpto_worst = Cell::new(1.0f64);
    runner
        .run(&prop::collection::vec(0.05f64..1.0, elements * k), |raw| {
            let mut alpha = raw;
            for row in alpha.chunks_mut(k) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
            let compliance = |x: &[f64]| {
                let d = SbptoDesign::from_values(x.to_vec(), k).unwrap();
                sbpto_compliance_and_gradient(&problem, &d, &stiffness, settings.penalty).unwrap().0
            };
            let design = SbptoDesign::from_values(alpha.clone(), k).unwrap();
            let (_, g) = sbpto_compliance_and_gradient(&problem, &design, &stiffness, settings.penalty).unwrap();
            let mut x = alpha.clone();
            for a in 0..k {
                for b in a + 1..k {
                    let exchange: Vec<f64> = (0..elements).map(|e| g[e * k + a] - g[e * k + b]).collect();
                    let fd: Vec<f64> = (0..elements)
                        .map(|e| {
                            let (ia, ib) = (e * k + a, e * k + b);
                            let (va, vb) = (x[ia], x[ib]);
                            x[ia] = va + FD_STEP;
                            x[ib] = vb - FD_STEP;
                            let up = compliance(&x);
                            x[ia] = va - FD_STEP;
                            x[ib] = vb + FD_STEP;
                            let down = compliance(&x);
                            x[ia] = va;
                            x[ib] = vb;
                            (up - down) / (2.0 * FD_STEP)
                        })
                        .collect();
                    let share = agreement(&exchange, &fd, GRADIENT_TOL);
                    sbpto_worst.set(sbpto_worst.get().min(share));
                    prop_assert!(share >= GRADIENT_SHARE, "SBPTO pair ({a}, {b}) agreement {share}");
                }
            }
            Ok(())
        })
        .unwrap();
    worst.push(("SBPTO", sbpto_worst.get()));

    // Continuous stage, through the density-weighted angle filter.
    let cfao = CfaoSettings::default();
    let cfao_worst = Cell::new(1.0f64);
    let half_pi = std::f64::consts::FRAC_PI_2;
    runner
        .run(
            &(
                prop::collection::vec(0.1f64..0.99, elements),
                prop::collection::vec(-half_pi + 0.01..half_pi - 0.01, elements),
            ),
            |(rho, theta)| {
                let design = CfaoDesign::new(rho.clone(), theta.clone()).unwrap();
                let eval = cfao_compliance_and_gradients(&problem, &design, &cfao).unwrap();
                let fd_rho = central_difference(&rho, FD_STEP, |x| {
                    let d = CfaoDesign::new(x.to_vec(), theta.clone()).unwrap();
                    cfao_compliance_and_gradients(&problem, &d, &cfao).unwrap().compliance
                });
                let fd_theta = central_difference(&theta, FD_STEP, |x| {
                    let d = CfaoDesign::new(rho.clone(), x.to_vec()).unwrap();
                    cfao_compliance_and_gradients(&problem, &d, &cfao).unwrap().compliance
                });
                let share = agreement(&eval.d_rho, &fd_rho, GRADIENT_TOL)
                    .min(agreement(&eval.d_theta, &fd_theta, GRADIENT_TOL));
                cfao_worst.set(cfao_worst.get().min(share));
                prop_assert!(share >= GRADIENT_SHARE, "CFAO agreement {share}");
                Ok(())
            },
        )
        .unwrap();
    worst.push(("CFAO", cfao_worst.get()));

    let elapsed = start.elapsed().as_secs_f64();
    eprintln!("gradient agreement (worst case share within 1e-4): {worst:?}, {elapsed:.1} s");
    assert!(elapsed < 30.0, "gradient suite took {elapsed:.1} s");
}

#[test]
fn criterion_2_rotation_identities() {
    let start = std::time::Instant::now();
    let identity = rotation_matrix(0.0);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(identity.0[i][j], if i == j { 1.0 } else { 0.0 });
        }
    }
    let iso = ConstitutiveMatrix::isotropic(1.0, 0.3);
    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(-10.0f64..10.0), |theta| {
            let r = rotate_constitutive(&iso, theta);
            let err = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (r.entry(i, j) - iso.entry(i, j)).abs())
                .fold(0.0, f64::max);
            prop_assert!(err <= 1e-12, "isotropic invariance error {err:e} at {theta}");

            let h = 1e-5;
            let (up, down, d) = (
                rotation_matrix(theta + h),
                rotation_matrix(theta - h),
                rotation_matrix_derivative(theta),
            );
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (up.0[i][j] - down.0[i][j]) / (2.0 * h);
                    prop_assert!((fd - d.0[i][j]).abs() <= 1e-8, "d lambda [{i}][{j}] at {theta}");
                }
            }
            Ok(())
        })
        .unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn criterion_3_convergence_metrics() {
    let start = std::time::Instant::now();
    assert_eq!(convergence_variance(&[7.0; 5]).unwrap(), 0.0);
    assert!((convergence_variance(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap() - 2.0).abs() <= 1e-15);
    let v = convergence_variance(&[302.7, 302.8, 302.7, 302.6, 302.7]).unwrap();
    assert!((v - 0.004).abs() <= 1e-9, "{v}");
    assert!(convergence_variance(&[1.0, 2.0, 3.0, 4.0]).is_err());

    let one_hot = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    assert_eq!(fibre_convergence(&one_hot, 3, 0.95).unwrap(), 1.0);
    assert_eq!(fibre_convergence(&[0.5; 8], 2, 0.95).unwrap(), 0.0);
    let mut rows = Vec::new();
    for k in 0..9 {
        let mut row = [0.0; 4];
        row[k % 4] = 1.0;
        rows.extend(row);
    }
    rows.extend([0.25; 4]);
    assert!((fibre_convergence(&rows, 4, 0.95).unwrap() - 0.9).abs() <= 1e-15);
    assert_eq!(fibre_convergence(&[0.0, 0.0, 1.0, 0.0], 2, 0.95).unwrap(), 1.0);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn criterion_4_binary_phase_invariants() {
    // Partition of unity and frozen rows on random designs.
    let config = small_cantilever(6, 4, 0.5, &[0.0, -45.0, 45.0, 90.0]);
    let problem = config.design_problem().unwrap();
    let candidates = config.candidates().unwrap().unwrap();
    let k = candidates.len() + 1;
    let elements = problem.element_count();
    let mut runner = TestRunner::new(Config {
        cases: 16,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(
            &(
                prop::collection::vec(0.0f64..1.0, elements * k),
                prop::collection::vec(0usize..k, elements),
                prop::collection::vec(any::<bool>(), elements),
                0usize..k,
                1usize..k,
            ),
            |(raw, dominant, commit, a, offset)| {
                let b = (a + offset) % k;
                let mut alpha = raw;
                for (e, row) in alpha.chunks_mut(k).enumerate() {
                    if commit[e] {
                        row.fill(0.0);
                        row[dominant[e]] = 1.0;
                    } else {
                        let s: f64 = row.iter().sum::<f64>().max(1e-12);
                        row.iter_mut().for_each(|v| *v /= s);
                    }
                }
                let mut design = SbptoDesign::from_values(alpha, k).unwrap();
                let settings = SbptoSettings::default();
                let frozen = freeze_elements(problem.model.mesh(), &design, a, b, settings.lambda_thresh);
                let before = design.clone();
                binary_phase_subproblem(
                    &problem,
                    &candidates,
                    &mut design,
                    (a, b),
                    &settings,
                    &CommonSettings::default(),
                    &mut History::new(),
                )
                .unwrap();
                prop_assert!(design.partition_error() <= 1e-9);
                for e in (0..elements).filter(|&e| frozen[e]) {
                    prop_assert_eq!(design.row(e), before.row(e));
                }
                Ok(())
            },
        )
        .unwrap();

    for r in references() {
        let out = &r.report.outcome;
        let h = out.summary.h_eta.unwrap();
        let partition = out.phases.as_ref().unwrap().partition_error();
        eprintln!("{}({}): final h = {h:.4}, partition error {partition:e}", r.name, r.case);
        assert!(h >= 0.99, "{}({}): h = {h}", r.name, r.case);
        assert!(partition <= 1e-9, "{}({}): partition error {partition:e}", r.name, r.case);
    }
}

/// Dense reference solver for a 4x4 clamped-left cantilever: compliance of
/// a per-element stiffness assignment.
struct SmallOracle {
    /// Element matrices for void, then each candidate.
    stiffness: Vec<[[f64; 8]; 8]>,
    /// Global DOF to free equation, `None` for clamped DOFs.
    equation: Vec<Option<usize>>,
    free: usize,
    mesh: Mesh,
    load_dof: usize,
    load: f64,
}

impl SmallOracle {
    fn new(config: &ProblemConfig, candidates: &CandidateAngleSet, void_stiffness: f64) -> Self {
        let problem = config.design_problem().unwrap();
        let mesh = problem.model.mesh().clone();
        let bc = problem.model.boundary_conditions();
        let mut stiffness = vec![element_stiffness(&(problem.material * void_stiffness)).unwrap()];
        for d in candidates.rotated(&problem.material) {
            stiffness.push(element_stiffness(&d).unwrap());
        }
        let mut equation = vec![None; mesh.dof_count()];
        let mut free = 0;
        for (dof, eq) in equation.iter_mut().enumerate() {
            if !bc.is_fixed(dof) {
                *eq = Some(free);
                free += 1;
            }
        }
        let load = bc.load_cases()[0][0];
        SmallOracle {
            stiffness,
            equation,
            free,
            load_dof: load.dof(),
            load: load.magnitude,
            mesh,
        }
    }

    /// `phase[e]`: 0 for void, `1 + i` for candidate `i`.
    fn compliance(&self, phase: &[usize], k: &mut Vec<f64>) -> f64 {
        let n = self.free;
        k.clear();
        k.resize(n * n, 0.0);
        for (e, &ph) in phase.iter().enumerate() {
            let ke = &self.stiffness[ph];
            let dofs = self.mesh.element_dofs(e);
            for (a, &da) in dofs.iter().enumerate() {
                let Some(i) = self.equation[da] else { continue };
                for (b, &db) in dofs.iter().enumerate() {
                    if let Some(j) = self.equation[db] {
                        k[i * n + j] += ke[a][b];
                    }
                }
            }
        }
        // In-place Cholesky, lower triangle.
        for j in 0..n {
            let mut d = k[j * n + j];
            for p in 0..j {
                d -= k[j * n + p] * k[j * n + p];
            }
            let d = d.sqrt();
            k[j * n + j] = d;
            for i in j + 1..n {
                let mut s = k[i * n + j];
                for p in 0..j {
                    s -= k[i * n + p] * k[j * n + p];
                }
                k[i * n + j] = s / d;
            }
        }
        let mut f = vec![0.0; n];
        let l = self.equation[self.load_dof].unwrap();
        f[l] = self.load;
        for i in 0..n {
            let mut s = f[i];
            for p in 0..i {
                s -= k[i * n + p] * f[p];
            }
            f[i] = s / k[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = f[i];
            for p in i + 1..n {
                s -= k[p * n + i] * f[p];
            }
            f[i] = s / k[i * n + i];
        }
        self.load * f[l]
    }
}

#[test]
fn criterion_5_small_instance_oracle() {
    let start = std::time::Instant::now();
    let config = small_cantilever(4, 4, 0.5, &[0.0, 90.0]);
    let candidates = config.candidates().unwrap().unwrap();
    let void_stiffness = config.cfao.void_stiffness;
    let oracle = SmallOracle::new(&config, &candidates, void_stiffness);
    let elements = 16;
    let budget = (config.volume_fraction * elements as f64).round() as u32;

    let out = run_pipeline(&config).unwrap();
    let labels = out.labels.as_ref().unwrap();
    let phase: Vec<usize> = labels
        .iter()
        .map(|l| match *l {
            PhaseLabel::Void => 0,
            PhaseLabel::Angle(d) => 1 + candidates.degrees().iter().position(|&c| c == d).unwrap(),
        })
        .collect();
    let solid = phase.iter().filter(|&&p| p != 0).count() as u32;
    let mut scratch = Vec::new();
    let selected = oracle.compliance(&phase, &mut scratch);

    // Every labelling with `budget` solid elements; adding material never
    // raises compliance, so smaller solid counts cannot do better.
    let masks: Vec<u32> = (0u32..1 << elements).filter(|m| m.count_ones() == budget).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let best = std::thread::scope(|scope| {
        let handles: Vec<_> = masks
            .chunks(masks.len().div_ceil(threads))
            .map(|chunk| {
                let oracle = &oracle;
                scope.spawn(move || {
                    let mut k = Vec::new();
                    let mut phase = vec![0usize; elements];
                    let mut best = (f64::INFINITY, 0u32, 0u32);
                    for &mask in chunk {
                        let solids: Vec<usize> = (0..elements).filter(|e| mask >> e & 1 == 1).collect();
                        for orient in 0u32..1 << solids.len() {
                            phase.fill(0);
                            for (bit, &e) in solids.iter().enumerate() {
                                phase[e] = 1 + (orient >> bit & 1) as usize;
                            }
                            let c = oracle.compliance(&phase, &mut k);
                            if c < best.0 {
                                best = (c, mask, orient);
                            }
                        }
                    }
                    best
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    });
    let gap = selected / best.0 - 1.0;
    eprintln!(
        "4x4 oracle: selected labelling c = {selected:.6} ({solid} solid), exhaustive optimum c = {:.6} over {} states, gap {:.2}%, {:.1} s",
        best.0,
        masks.len() << budget,
        100.0 * gap,
        start.elapsed().as_secs_f64()
    );
    assert!(solid <= budget, "selected labelling uses {solid} solid elements, budget {budget}");
    assert!(gap <= 0.05, "selected labelling is {:.2}% above the optimum", 100.0 * gap);
    assert!(start.elapsed().as_secs_f64() < 600.0);
}

#[test]
fn criterion_6_benchmark_regressions() {
    let mut failures = Vec::new();
    let mut check = |label: String, ok: bool| {
        eprintln!("{} {label}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures.push(label);
        }
    };

    let mbb = reference("mbb", 'h');
    let c = mbb.report.summary.compliance;
    check(format!("mbb(h) c = {c:.3}, target 302.70 +-15%"), within(c, 302.70, 0.15));
    let dmo_h = mbb.report.outcome.dmo.as_ref().unwrap().final_h_eta();
    check(format!("mbb(h) h at end of DMO = {dmo_h:.4}, need >= 0.90"), dmo_h >= 0.90);

    let ch = reference("cantilever", 'h').report.summary.compliance;
    let cf = reference("cantilever", 'f').report.summary.compliance;
    check(format!("cantilever(h) c = {ch:.4}, target 13.24 +-15%"), within(ch, 13.24, 0.15));
    check(format!("cantilever(f) c = {cf:.4}, target 13.25 +-15%"), within(cf, 13.25, 0.15));
    let spread = (cf - ch).abs() / ch;
    check(format!("cantilever |c(f) - c(h)| / c(h) = {spread:.4}, need <= 0.05"), spread <= 0.05);

    let c = reference("cantilever_multi", 'f').report.summary.compliance;
    check(format!("cantilever_multi(f) c = {c:.4}, target 36.91 +-15%"), within(c, 36.91, 0.15));

    let c = reference("lshape", 'h').report.summary.compliance;
    check(format!("lshape(h) c = {c:.3}, target 170.58 +-25%"), within(c, 170.58, 0.25));

    for r in references() {
        let t = r.report.summary.wall_seconds;
        check(format!("{}({}) wall time {t:.1} s, limit 600 s", r.name, r.case), t <= 600.0);
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn criterion_7_dsco_beats_continuous_only() {
    let mut failures = Vec::new();
    for name in BENCHMARK_NAMES {
        let dsco = references()
            .iter()
            .filter(|r| r.name == name)
            .map(|r| (r.case, r.report.summary.compliance))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let cfao: Vec<(char, f64)> = ('a'..='d')
            .map(|case| {
                let config = benchmark(name, case).unwrap().config;
                assert_eq!(config.mode, Mode::CfaoOnly);
                (case, run_pipeline(&config).unwrap().summary.compliance)
            })
            .collect();
        let best = cfao.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let improvement = 1.0 - dsco.1 / best.1;
        eprintln!(
            "{name}: DSCO({}) {:.4} vs best continuous-only ({}) {:.4} of {cfao:?}: improvement {:.1}%",
            dsco.0,
            dsco.1,
            best.0,
            best.1,
            100.0 * improvement
        );
        if improvement < 0.0 {
            failures.push(name);
        }
    }
    assert!(failures.is_empty(), "DSCO worse than continuous-only on {failures:?}");
}

#[test]
fn criterion_8_repeated_runs_are_bit_identical() {
    for r in references() {
        let config = benchmark(r.name, r.case).unwrap().config;
        let dir = out_root().join("second").join(&config.name);
        let again = run_to_dir(&config, &dir).unwrap();
        let csv = std::fs::read(dir.join(DESIGN_FILE)).unwrap();
        assert!(csv == r.design_csv, "{}({}): design.csv differs between runs", r.name, r.case);
        let strip = |s: &SummaryJson| SummaryJson {
            wall_seconds: 0.0,
            ..s.clone()
        };
        assert_eq!(strip(&again.summary), strip(&r.report.summary), "{}({})", r.name, r.case);
    }
}

#[test]
fn criterion_9_stage_ordering() {
    for r in references() {
        let out = &r.report.outcome;
        for stage in [StageKind::Dmo, StageKind::Sbpto, StageKind::Cfao] {
            let mut envelope = f64::INFINITY;
            let mut last = f64::INFINITY;
            for rec in out.history.stage_records(stage) {
                envelope = envelope.min(rec.compliance);
                assert!(envelope <= last, "{}({}) {stage}: envelope rose", r.name, r.case);
                last = envelope;
            }
            assert!(envelope.is_finite(), "{}({}) {stage}: no evaluations", r.name, r.case);
        }
        let sbpto_end = out.stage_endpoint(StageKind::Sbpto).unwrap();
        let cfao_end = out.summary.compliance;
        eprintln!("{}({}): SBPTO endpoint {sbpto_end:.4}, CFAO endpoint {cfao_end:.4}", r.name, r.case);
        assert!(
            cfao_end <= sbpto_end,
            "{}({}): CFAO endpoint {cfao_end} above SBPTO endpoint {sbpto_end}",
            r.name,
            r.case
        );
    }
}

#[test]
fn benchmark_volume_at_termination() {
    for r in references() {
        let out = &r.report.outcome;
        let mesh = out.problem.model.mesh();
        let n = mesh.active_count() as f64;
        let used: f64 = mesh.active_elements().map(|e| out.design.rho[e]).sum();
        let target = out.problem.volume_fraction * n;
        assert!(
            (used - target).abs() <= 1e-3 * n,
            "{}({}): volume {used} vs target {target}",
            r.name,
            r.case
        );
    }
}
