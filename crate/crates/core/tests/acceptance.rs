//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::fs;
use std::time::Instant;

use common::*;
use oscstab::brockett::{self, brockett_vi, default_law, stability_gain_range, Preset};
use oscstab::cli::{self, RunConfig};
use oscstab::controller::{synthesize_gains, Role};
use oscstab::integrator::{self, integrate_classical, SolutionMode, Trajectory};
use oscstab::lyapunov::certificate_scan;
use oscstab::sampling::{Region, Sampler, DEFAULT_R_MIN};
use oscstab::stats::decay_rates;
use oscstab::vecfield::{assemble_f, lie_bracket};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const T: f64 = 50.0;
const SUBSTEPS: usize = 400;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn preset_run(preset: Preset, substeps: usize) -> Trajectory {
    let law = default_law(preset.exponent(), 0.5, 0.1).unwrap();
    integrate_classical(&law, &preset.initial_state(), T, substeps).unwrap()
}

fn exponential_case(run: &Trajectory, seconds: f64) -> Outcome {
    let times: Vec<f64> = run.windows.iter().map(|w| w.t).collect();
    let fit = decay_rates(&times, &run.boundary_norms()).exponential;
    let mono = run.monotone_decrease(1e-8);
    let ratio = run.terminal_norm() / run.initial_norm();
    let passed = mono
        && fit.slope < 0.0
        && fit.r_squared >= 0.9
        && ratio < 1e-2
        && seconds < 10.0
        && !run.diverged;
    outcome(
        passed,
        format!(
            "monotone={mono} slope={:.4} R2={:.4} terminal/initial={ratio:.3e} runtime={seconds:.2}s",
            fit.slope, fit.r_squared
        ),
    )
}

fn slower_case(run: &Trajectory, left: &Trajectory) -> Outcome {
    let mono = run.monotone_decrease(1e-8);
    let passed = mono && run.terminal_norm() > left.terminal_norm() && !run.diverged;
    outcome(
        passed,
        format!(
            "monotone={mono} terminal={:.4e} vs p=1 terminal={:.4e}",
            run.terminal_norm(),
            left.terminal_norm()
        ),
    )
}

fn cf_order() -> Outcome {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let mut x0 = vec![0.0; 10];
    x0[4] = 1.0;
    x0[0] = 0.5;
    let probe = integrator::cf_order_probe(&law, &x0, &[0.1, 0.05, 0.025]).unwrap();
    let q = probe.exponent;
    outcome(
        (1.3..=1.8).contains(&q),
        format!("fitted exponent q={q:.4}"),
    )
}

fn oscillator_identities() -> Outcome {
    let osc = oscstab::controller::OscillatorAssignment::new(&brockett::pair_set(), 0.1).unwrap();
    let eps = 0.1;
    let mut same = 0.0_f64;
    let mut cross = 0.0_f64;
    for i in 0..6 {
        for j in 0..6 {
            let a = integrator::iterated_integral_check(&osc, i, j, 10_000).unwrap();
            if i == j {
                same = same.max(((a + 2.0 * eps) / (2.0 * eps)).abs());
            } else {
                cross = cross.max(a.abs());
            }
        }
    }
    let mut mean = 0.0_f64;
    let mut l2 = 0.0_f64;
    for i in 0..6 {
        for role in [Role::First, Role::Second] {
            let (m, sq) = integrator::oscillator_moments(&osc, i, role, 10_000);
            let kappa = osc.multiplier(i) as f64;
            let expected = 4.0 * kappa * std::f64::consts::PI / eps * 0.5;
            mean = mean.max(m.abs() / (osc.amplitude(i) * eps));
            l2 = l2.max(((sq - expected) / expected).abs());
        }
    }
    let cross_tol = cli::cross_coefficient_tolerance(eps);
    let passed = same <= 1e-6 && cross <= cross_tol && mean <= 1e-8 && l2 <= 1e-8;
    outcome(
        passed,
        format!("same-pair rel err={same:.2e} cross max={cross:.2e} (tol {cross_tol:.0e}) mean={mean:.2e} L2 rel err={l2:.2e}"),
    )
}

fn synthesis() -> Outcome {
    let sys = brockett::brockett_system();
    let sampler = Sampler::new(Region::ball(10, 2.0), 5).unwrap();
    let mut worst_residual = 0.0_f64;
    let mut worst_closed = 0.0_f64;
    for p in [1.0, 1.5] {
        let lyap = brockett::brockett_lyapunov(p).unwrap();
        for x in sampler.points(100) {
            let s = synthesize_gains(&sys, &lyap, &x).unwrap();
            let f = assemble_f(&sys, &x);
            let sol: Vec<f64> = s.v0.iter().chain(&s.vtilde).copied().collect();
            let grad = brockett_grad_v(p, &x);
            let r: Vec<f64> = (0..10)
                .map(|row| (0..10).map(|c| f.get(row, c) * sol[c]).sum::<f64>() + grad[row])
                .collect();
            worst_residual = worst_residual.max(norm(&r) / norm(&grad).max(1.0));
            if p == 1.0 {
                for (a, b) in s.vtilde.iter().zip(brockett_vi(1.0, &x)) {
                    worst_closed = worst_closed.max((a - b).abs());
                }
            }
        }
    }
    outcome(
        worst_residual <= 1e-10 && worst_closed <= 1e-10,
        format!("max residual/max(1,|gradV|)={worst_residual:.2e} max |vtilde - closed form|={worst_closed:.2e}"),
    )
}

fn certificate() -> Outcome {
    let law = default_law(1.0, 0.5, 0.1).unwrap();
    let region = Region::Ball {
        dim: 10,
        radius: 2.0,
        r_min: DEFAULT_R_MIN,
    };
    let report = certificate_scan(&law, 0.5, &region, 10_000, 2024).unwrap();
    let g1 = stability_gain_range(1.0, 1.0).unwrap();
    let g15 = stability_gain_range(1.5, 1.0).unwrap();
    let passed = report.violations == 0
        && g1.lower == 0.0
        && (g1.upper - 2f64.sqrt()).abs() < 1e-15
        && g15.lower == 0.0
        && (g15.upper - 1.0).abs() < 1e-15;
    outcome(
        passed,
        format!(
            "violations={} worst W={:.4e} p=1 -> ({}, {:.8}) p=3/2,H=1 -> ({}, {})",
            report.violations, report.worst_value, g1.lower, g1.upper, g15.lower, g15.upper
        ),
    )
}

fn bracket_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        let poly = PolySystem::random(seed);
        let sys = poly.system();
        let f0 = |y: &[f64]| poly.eval(0, y);
        let f1 = |y: &[f64]| poly.eval(1, y);
        for _ in 0..4 {
            let x = random_point(&mut rng, 3, 2.0);
            let oracle = fd_bracket(&f0, &f1, &x, 1e-5);
            let got = lie_bracket(&sys, 0, 1, &x).unwrap();
            worst = worst.max(dist(&got, &oracle) / norm(&oracle).max(1.0));
        }
    }
    let sys = brockett::brockett_system();
    let mut brockett_err = 0.0_f64;
    for _ in 0..100 {
        let x = random_point(&mut rng, 10, 3.0);
        for (idx, &(i, j)) in brockett::PAIRS.iter().enumerate() {
            let b = lie_bracket(&sys, i, j, &x).unwrap();
            let mut e = vec![0.0; 10];
            e[4 + idx] = 2.0;
            brockett_err = brockett_err.max(dist(&b, &e));
        }
    }
    outcome(
        worst <= 1e-6 && brockett_err <= 1e-12,
        format!("random systems max rel err={worst:.2e} Brockett max |[f_i,f_j] - 2e|={brockett_err:.2e}"),
    )
}

fn compare_runs(root: &std::path::Path) -> (Outcome, Vec<Vec<f64>>) {
    let mut cfg = RunConfig::default();
    let files = [
        "compare.csv",
        "summary.json",
        "trajectory_classical.csv",
        "trajectory_sampled.csv",
        "windows_classical.json",
        "windows_sampled.json",
    ];
    let mut outputs = Vec::new();
    let mut terminal = Vec::new();
    let mut norms_ok = true;
    for out in ["first", "second"] {
        cfg.out = Some(root.join(out));
        let o = cli::compare(&cfg).unwrap();
        let runs = o.report["runs"].as_array().unwrap();
        for r in runs {
            norms_ok &= r["terminal_norm"].as_f64().unwrap() < 0.05;
        }
        terminal = runs
            .iter()
            .map(|r| {
                r["terminal_state"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_f64().unwrap())
                    .collect()
            })
            .collect();
        outputs.push(
            files
                .iter()
                .map(|f| fs::read(o.dir.join(f)).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    let identical = outputs[0] == outputs[1];
    let summary: serde_json::Value = serde_json::from_slice(&outputs[0][1]).unwrap();
    let detail = format!(
        "norms below 0.05 at t=50: {norms_ok}; byte-identical: {identical}; sup |diff|={:.4e}",
        summary["sup_abs_diff"].as_f64().unwrap()
    );
    (outcome(norms_ok && identical, detail), terminal)
}

fn self_convergence(runs: &[(&str, Vec<f64>, SolutionMode, Preset)]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for (name, terminal, mode, preset) in runs {
        let law = default_law(preset.exponent(), 0.5, 0.1).unwrap();
        let fine =
            integrator::integrate(&law, &preset.initial_state(), T, 2 * SUBSTEPS, *mode).unwrap();
        let d = terminal
            .iter()
            .zip(fine.terminal_state())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(d);
        parts.push(format!("{name}={d:.1e}"));
    }
    outcome(
        worst <= 1e-6,
        format!("max |x_400(T) - x_800(T)|: {}", parts.join(" ")),
    )
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    let start = Instant::now();
    let left = preset_run(Preset::Fig1Left, SUBSTEPS);
    let seconds = start.elapsed().as_secs_f64();
    results.push((
        1,
        "p = 1 exponential convergence",
        exponential_case(&left, seconds),
    ));
    let right = preset_run(Preset::Fig1Right, SUBSTEPS);
    results.push((2, "p = 3/2 slower convergence", slower_case(&right, &left)));
    results.push((3, "expansion order", cf_order()));
    results.push((4, "oscillator identities", oscillator_identities()));
    results.push((5, "synthesis correctness", synthesis()));
    results.push((
        6,
        "certificate negativity and gain intervals",
        certificate(),
    ));
    results.push((7, "bracket oracle", bracket_oracle()));
    let (cmp, terminals) = compare_runs(root.path());
    results.push((8, "classical vs sampled", cmp));
    let runs = vec![
        (
            "fig1-left",
            left.terminal_state().to_vec(),
            SolutionMode::Classical,
            Preset::Fig1Left,
        ),
        (
            "fig1-right",
            right.terminal_state().to_vec(),
            SolutionMode::Classical,
            Preset::Fig1Right,
        ),
        (
            "compare-classical",
            terminals[0].clone(),
            SolutionMode::Classical,
            Preset::Fig1Left,
        ),
        (
            "compare-sampled",
            terminals[1].clone(),
            SolutionMode::Sampled,
            Preset::Fig1Left,
        ),
    ];
    results.push((9, "solver self-convergence", self_convergence(&runs)));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("acceptance {n} [{tag}] {name}: {}", o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
