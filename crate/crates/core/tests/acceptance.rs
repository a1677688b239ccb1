//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line and then asserts it.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;

use spdnn::harness::commands::{run_lowerbound, LowerBoundConfig};
use spdnn::harness::process::TruthConfig;
use spdnn::harness::sweep::{ClassConfig, PenaltyConfig};
use spdnn::harness::{a4_probe, rate_sweep, ProbeConfig, ProcessConfig, SweepConfig, Task};
use spdnn::penalty::n_alpha;
use spdnn::processes::{
    gexpar_stability, roots_inside_unit_circle, BinaryArSpec, GexparParams, LabelLink, Noise,
    TargetSpec,
};
use spdnn::rng::rng_from_seed;
use spdnn::theory::{effective_smoothness, phi, CalibrationConstants, HypercubeOptions};
use spdnn::trainer::BatchSize;
use spdnn::{
    Architecture, Dataset, LossSpec, Network, PenaltyFamily, PenaltySpec, PointLoss, Regime,
    TrainConfig,
};

fn report(id: usize, pass: bool, detail: String) {
    println!(
        "criterion {id}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn random_family(rng: &mut impl rand::Rng) -> PenaltyFamily {
    match rng.random_range(0..3) {
        0 => PenaltyFamily::ClippedL1,
        1 => PenaltyFamily::Scad {
            a: rng.random_range(2.1..6.0),
        },
        _ => PenaltyFamily::Mcp {
            gamma: rng.random_range(1.1..6.0),
        },
    }
}

#[test]
fn criterion_01_prox_against_grid() {
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let family = random_family(&mut rng);
        let lambda = rng.random_range(0.01..10.0);
        let tau = rng.random_range(1e-4..1.0);
        let eta = rng.random_range(1e-3..1.0);
        let x: f64 = rng.random_range(-5.0..5.0);
        let spec = PenaltySpec::new(family, lambda, tau).unwrap();
        let obj = |z: f64| 0.5 * (z - x) * (z - x) + eta * spec.pi(z.abs()).unwrap();
        let z = spec.prox(x, eta);
        let r = x.abs() + 0.5;
        let steps = (2.0 * r / 1e-5).ceil() as usize;
        let grid = (0..=steps)
            .map(|k| obj(-r + k as f64 * 1e-5))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(obj(z) - grid);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-8 && elapsed < Duration::from_secs(30);
    report(1, pass, format!("max(prox - grid) = {worst:.3e}, {elapsed:.1?}"));
    assert!(pass);
}

/// Mean loss of `net` with parameters `theta`, without output clamping.
fn risk(net: &Network, theta: &[f64], loss: &LossSpec, data: &Dataset) -> f64 {
    let mut n = net.clone();
    n.set_params(spdnn::ParameterVector::new(theta.to_vec())).unwrap();
    data.iter()
        .map(|(x, y)| loss.value(n.forward(x, false).unwrap(), y))
        .sum::<f64>()
        / data.len() as f64
}

#[test]
fn criterion_02_gradient_fidelity() {
    let start = Instant::now();
    let mut rng = rng_from_seed(202);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut kinks = 0usize;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let depth = rng.random_range(1..=3);
        let width = rng.random_range(1..=8);
        let arch = Architecture::uniform(d, depth, width, 1e6, 1e6).unwrap();
        let theta: Vec<f64> = (0..arch.num_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let net = Network::new(arch, spdnn::ParameterVector::new(theta.clone())).unwrap();
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        for loss in [LossSpec::L1, LossSpec::Huber { delta: 0.5 }, LossSpec::Logistic] {
            let mut data = Dataset::new(d);
            for x in &xs {
                let y = match loss {
                    LossSpec::Logistic => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    _ => rng.random_range(-2.0..2.0),
                };
                data.push(x, y).unwrap();
            }
            let g = net.gradient(&loss, &data, None).unwrap().grad;
            let f0 = risk(&net, &theta, &loss, &data);
            for j in 0..theta.len() {
                let mut tp = theta.clone();
                tp[j] += h;
                let mut tm = theta.clone();
                tm[j] -= h;
                let (fp, fm) = (risk(&net, &tp, &loss, &data), risk(&net, &tm, &loss, &data));
                let fd = (fp - fm) / (2.0 * h);
                // One-sided slopes disagree when a relu or loss kink lies
                // within the stencil.
                let (right, left) = ((fp - f0) / h, (f0 - fm) / h);
                if (right - left).abs() > 1e-3 * (1.0 + fd.abs()) {
                    kinks += 1;
                    continue;
                }
                let denom = g[j].abs().max(fd.abs()).max(1e-4);
                worst = worst.max((g[j] - fd).abs() / denom);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-5 && elapsed < Duration::from_secs(60) && checked > 1000;
    report(
        2,
        pass,
        format!("max rel err {worst:.3e} over {checked} components, {kinks} at kinks, {elapsed:.1?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_penalty_conditions() {
    let mut rng = rng_from_seed(303);
    let mut failures = 0;
    let mut total = 0;
    for which in 0..3 {
        for _ in 0..100 {
            let family = match which {
                0 => PenaltyFamily::ClippedL1,
                1 => PenaltyFamily::Scad {
                    a: rng.random_range(2.01..10.0),
                },
                _ => PenaltyFamily::Mcp {
                    gamma: rng.random_range(1.01..10.0),
                },
            };
            let spec =
                PenaltySpec::new(family, rng.random_range(1e-3..10.0), rng.random_range(1e-5..2.0))
                    .unwrap();
            total += 1;
            if !spec.conditions_hold() {
                failures += 1;
            }
        }
    }
    let pass = failures == 0;
    report(3, pass, format!("{failures} of {total} specs violate the conditions"));
    assert!(pass);
}

#[test]
fn criterion_04_sample_size_and_rate_formulas() {
    let a = n_alpha(100, 1.0, 1.0).unwrap();
    let b = n_alpha(1000, 8.0, 1.0).unwrap();
    let holder = effective_smoothness(&[2.0], &[1]).unwrap();
    let p = phi(1024.0, &holder);
    let mut gexpar_ok = true;
    let mut detail = String::new();
    for beta in [0.5, 1.0, 2.0] {
        let TargetSpec::Composition { t, beta: b, .. } = TargetSpec::gexpar_composition(3, beta) else {
            unreachable!()
        };
        let e = effective_smoothness(&b, &t).unwrap().rate_exponent();
        let want = 2.0 * beta / (2.0 * beta + 1.0);
        gexpar_ok &= (e - want).abs() < 1e-12;
        detail.push_str(&format!(" beta={beta}: {e:.6}"));
    }
    let pass = a == 3 && b == 31 && p == 2f64.powi(-8) && gexpar_ok;
    report(4, pass, format!("n_alpha = {a}, {b}; phi = {p};{detail}"));
    assert!(pass);
}

#[test]
fn criterion_05_lower_bound_construction() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = LowerBoundConfig {
        beta: vec![1.0],
        t: vec![1],
        n: 10_000,
        hypercube: HypercubeOptions::default(),
    };
    let outcome = run_lowerbound(&cfg, None, dir.path()).unwrap();
    let r = &outcome.summary;
    let num = |k: &str| r[k].as_f64().unwrap();
    let quadrature_ok = num("bump_norm_rel_err") < 1e-6 && num("hamming_identity_rel_err") < 1e-6;
    let elapsed = start.elapsed();
    let pass = r["pass_i"] == true
        && r["pass_ii"] == true
        && quadrature_ok
        && elapsed < Duration::from_secs(120);
    report(
        5,
        pass,
        format!(
            "M = {}, min L2 {:.4e} vs kappa*sqrt(phi) {:.4e}, KL budget {:.4e} vs log(M)/9 {:.4e}, \
             quadrature rel err {:.2e}/{:.2e}, rho condition met: {}, {elapsed:.1?}",
            r["num_alternatives"],
            num("min_pair_l2"),
            num("separation_required"),
            num("kl_budget"),
            num("log_M_over_9"),
            num("bump_norm_rel_err"),
            num("hamming_identity_rel_err"),
            r["rho_condition_met"],
        ),
    );
    assert!(pass);
}

fn companion_radius(phis: &[f64]) -> f64 {
    let d = phis.len();
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == 0 {
            phis[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_06_gexpar_stability() {
    let mut rng = rng_from_seed(606);
    let mut disagreements = 0;
    let mut stable_count = 0;
    let mut draws = 0;
    while draws < 100 {
        let d = rng.random_range(1..=5);
        let params = GexparParams {
            c0: 0.0,
            c: (0..d).map(|_| rng.random_range(-0.5..0.5)).collect(),
            pi: (0..d).map(|_| rng.random_range(-0.3..0.3)).collect(),
            lambda: -1.0,
            z: vec![0.0; d],
        };
        let phis = params.phis();
        let radius = companion_radius(&phis);
        if (radius - 1.0).abs() < 1e-3 {
            continue;
        }
        draws += 1;
        let report = gexpar_stability(&params);
        let oracle = radius < 1.0;
        let inside = roots_inside_unit_circle(&phis, 8192);
        stable_count += oracle as usize;
        if report.stable != oracle
            || (report.spectral_radius - radius).abs() > 1e-9
            || (inside == d) != oracle
        {
            disagreements += 1;
        }
    }
    let worked = gexpar_stability(&GexparParams {
        c0: 0.0,
        c: vec![0.3, 0.2],
        pi: vec![0.1, 0.1],
        lambda: -1.0,
        z: vec![0.0, 0.0],
    });
    let mut roots: Vec<f64> = worked.roots.iter().map(|r| r.0).collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    let worked_ok = worked.stable
        && worked.roots.iter().all(|r| r.1.abs() < 1e-12)
        && (roots[0] - 0.783).abs() < 1e-3
        && (roots[1] + 0.383).abs() < 1e-3;
    let pass = disagreements == 0 && worked_ok;
    report(
        6,
        pass,
        format!(
            "{disagreements} disagreements over 100 draws ({stable_count} stable); worked roots {:.4}, {:.4}",
            roots[0], roots[1]
        ),
    );
    assert!(pass);
}

/// The regression rate-band scenario.
pub fn rate_band_config() -> SweepConfig {
    SweepConfig {
        process: ProcessConfig::Ar {
            truth: TruthConfig::Target {
                spec: TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 },
            },
            noise: Noise::Gaussian,
            burn_in: 1000,
            certificate: None,
        },
        loss: LossSpec::Huber { delta: 10.0 },
        penalty: PenaltyConfig {
            family: PenaltyFamily::ClippedL1,
            lambda_scale: 1e-4,
            nu3: 5.0,
            regime: Regime::Exponential,
            c: 1.0,
            gamma: 1.0,
        },
        class: ClassConfig::Holder {
            s: 2.0,
            d: 1,
            kappa: 2.0,
        },
        constants: CalibrationConstants {
            c_l: 0.3,
            ..CalibrationConstants::default()
        },
        train: TrainConfig {
            epochs: 300,
            batch_size: BatchSize::Full,
            step_size: 0.5,
            restarts: 1,
            ..TrainConfig::default()
        },
        n_grid: vec![512, 1024, 2048, 4096, 8192],
        replications: 20,
        m_test: 50_000,
        seed: 1,
        bootstrap: 1000,
        synthetic: None,
        poison_cells: vec![],
    }
}

#[test]
fn criterion_07_regression_rate_band() {
    let start = Instant::now();
    let cfg = rate_band_config();
    let r = rate_sweep(&cfg, 1).unwrap();
    let slope = r.slope.as_ref().map(|s| s.slope).unwrap_or(f64::NAN);
    let inversions = r.median_inversions();
    let elapsed = start.elapsed();
    let pass = r.failed_cells == 0
        && inversions <= 1
        && (-1.2..=-0.35).contains(&slope)
        && elapsed < Duration::from_secs(1800);
    let medians: Vec<String> = r.medians().iter().map(|(n, m)| format!("{n}:{m:.3e}")).collect();
    report(
        7,
        pass,
        format!(
            "slope {slope:.3} (theory {:.3}), {inversions} inversions, medians [{}], {elapsed:.1?}",
            r.theoretical_slope,
            medians.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_classification_sanity() {
    let cfg = SweepConfig {
        process: ProcessConfig::Binary(BinaryArSpec::new(1, LabelLink::Linear { coefs: vec![0.4] })),
        loss: LossSpec::Logistic,
        n_grid: vec![4096],
        replications: 10,
        m_test: 20_000,
        seed: 3,
        train: TrainConfig {
            epochs: 200,
            ..rate_band_config().train
        },
        ..rate_band_config()
    };
    let r = rate_sweep(&cfg, 1).unwrap();
    assert_eq!(r.task, Task::Classification);
    let mut ratios: Vec<f64> = r
        .rows
        .iter()
        .filter(|row| row.ok)
        .map(|row| row.error.unwrap() / row.baseline.unwrap())
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = spdnn::harness::quantile_sorted(&ratios, 0.5);
    let s = &r.summary[0];
    let pass = r.failed_cells == 0 && median_ratio < 0.5;
    report(
        8,
        pass,
        format!(
            "median excess {:.3e}, median ratio to best constant {median_ratio:.3e}",
            s.median.unwrap_or(f64::NAN)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_curvature_probe() {
    let huber = a4_probe(&ProbeConfig {
        process: ProcessConfig::Ar {
            truth: TruthConfig::Target {
                spec: TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 },
            },
            noise: Noise::Gaussian,
            burn_in: 1000,
            certificate: None,
        },
        loss: LossSpec::Huber { delta: 10.0 },
        shifts: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        draws: 1_000_000,
        seed: 9,
    })
    .unwrap();
    let logistic = a4_probe(&ProbeConfig {
        process: ProcessConfig::Binary(BinaryArSpec::new(1, LabelLink::Linear { coefs: vec![0.6] })),
        loss: LossSpec::Logistic,
        shifts: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        draws: 1_000_000,
        seed: 9,
    })
    .unwrap();
    let pass = (1.8..=2.2).contains(&huber.kappa) && (1.8..=2.2).contains(&logistic.kappa);
    report(
        9,
        pass,
        format!("huber kappa {:.4}, logistic kappa {:.4}", huber.kappa, logistic.kappa),
    );
    assert!(pass);
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_spdnn"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn files_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn small_sweep() -> SweepConfig {
    SweepConfig {
        n_grid: vec![128, 256],
        replications: 3,
        m_test: 2000,
        bootstrap: 100,
        train: TrainConfig {
            epochs: 20,
            ..rate_band_config().train
        },
        ..rate_band_config()
    }
}

#[test]
fn criterion_10_determinism_and_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let write = |name: &str, value: serde_json::Value| {
        let p = root.join(name);
        fs::write(&p, value.to_string()).unwrap();
        p
    };
    let ar = serde_json::to_value(ProcessConfig::Ar {
        truth: TruthConfig::Target {
            spec: TargetSpec::Holder { s: 2.0, k: 1.0, d: 1 },
        },
        noise: Noise::Gaussian,
        burn_in: 100,
        certificate: None,
    })
    .unwrap();
    let configs = [
        ("simulate", write("sim.json", serde_json::json!({"process": ar, "n": 300}))),
        (
            "train",
            write(
                "train.json",
                serde_json::json!({
                    "process": ar, "n": 256, "loss": "huber:10", "m_test": 1000,
                    "penalty": {"family": "clipped_l1", "lambda_scale": 1e-4, "nu3": 5.0, "regime": "exponential"},
                    "class": {"class": "holder", "s": 2.0, "d": 1, "kappa": 2.0},
                    "constants": {"c_l": 0.3},
                    "train": {"epochs": 20, "batch_size": 32},
                }),
            ),
        ),
        ("rate-sweep", write("sweep.json", serde_json::to_value(small_sweep()).unwrap())),
        (
            "verify-lowerbound",
            write("lb.json", serde_json::json!({"beta": [1.0], "t": [1], "n": 2000})),
        ),
        (
            "a4-probe",
            write(
                "probe.json",
                serde_json::json!({"process": ar, "loss": "huber:10", "draws": 20000}),
            ),
        ),
        ("stability", write("stab.json", serde_json::json!({"phis": [0.5, 0.3]}))),
    ];
    let mut mismatched = Vec::new();
    for (cmd, cfg) in &configs {
        let mut outputs = Vec::new();
        for (k, workers) in ["1", "2"].iter().enumerate() {
            let out = root.join(format!("{cmd}-{k}"));
            let code = run_cli(&[
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "17",
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(code == 0 || (code == 4 && *cmd == "verify-lowerbound"), "{cmd} exited {code}");
            outputs.push(files_of(&out));
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            mismatched.push(cmd.to_string());
        }
    }

    let clean = rate_sweep(&small_sweep(), 1).unwrap();
    let poisoned_cfg = SweepConfig {
        poison_cells: vec![spdnn::harness::sweep::CellId {
            n: 256,
            replication: 1,
        }],
        ..small_sweep()
    };
    let poisoned = rate_sweep(&poisoned_cfg, 2).unwrap();
    let mut isolated = poisoned.failed_cells == 1;
    for (a, b) in clean.rows.iter().zip(&poisoned.rows) {
        if a.n == 256 && a.replication == 1 {
            isolated &= !b.ok;
        } else {
            isolated &= a == b;
        }
    }
    let pass = mismatched.is_empty() && isolated;
    report(
        10,
        pass,
        format!(
            "{} subcommands byte-identical, mismatched {mismatched:?}, poisoned cell isolated: {isolated}",
            configs.len()
        ),
    );
    assert!(pass);
}
