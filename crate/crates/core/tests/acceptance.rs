//! End-to-end acceptance checks, one test per criterion.
//!
//! Each test prints a single `criterion N ...: PASS|FAIL` line before
//! asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! readable scorecard. The RL criterion trains three full runs and
//! dominates the runtime (several minutes on one core).

use std::path::Path;
use std::process::Command;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qctrl::dynamics::{evolve, DensityMatrix, Level, PulseSchedule, SystemParams};
use qctrl::harness::{self, ExperimentConfig, GridPoint, Mode, OctOptions, RlOptions, StirapOptions};
use qctrl::oct::{self, numeric_gradient_with_step, Budget, FdStep, OctMethod, ParamVector};
use qctrl::rl::{
    compute_returns, log_prob_gradient, rollout, surrogate_cost, surrogate_gradient, EpisodeTrace, PolicyNetwork,
};
use qctrl::stirap::{self, StirapShape};

fn verdict(n: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {n} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn point(t_gamma: f64, t_omega_max: f64) -> GridPoint {
    GridPoint { t_gamma, t_omega_max }
}

#[derive(Debug, Clone)]
struct Case {
    delta_p: f64,
    gamma: f64,
    t_final: f64,
    omega_max: f64,
    linear: bool,
    pump: Vec<f64>,
    stokes: Vec<f64>,
    psi: [(f64, f64); 4],
}

fn cases() -> impl Strategy<Value = Case> {
    (1usize..=6, -20.0..20.0f64, 0.0..10.0f64, 0.2..3.0f64, 1.0..40.0f64, any::<bool>()).prop_flat_map(
        |(n, delta_p, gamma, t_final, omega_max, linear)| {
            let knots = if linear { n + 1 } else { n };
            (
                prop::collection::vec(0.0..=omega_max, knots),
                prop::collection::vec(0.0..=omega_max, knots),
                prop::array::uniform4((-1.0..1.0f64, -1.0..1.0f64)),
            )
                .prop_map(move |(pump, stokes, psi)| Case {
                    delta_p,
                    gamma,
                    t_final,
                    omega_max,
                    linear,
                    pump,
                    stokes,
                    psi,
                })
        },
    )
}

fn check_case(case: &Case) -> Result<(), TestCaseError> {
    let params = SystemParams::new(case.delta_p, 0.0, case.gamma, case.t_final, case.omega_max).unwrap();
    let schedule = if case.linear {
        PulseSchedule::piecewise_linear(case.t_final, case.pump.clone(), case.stokes.clone())
    } else {
        PulseSchedule::piecewise_constant(case.t_final, case.pump.clone(), case.stokes.clone())
    }
    .unwrap();
    let psi = case.psi.map(|(re, im)| Complex64::new(re, im));
    let initial = DensityMatrix::from_amplitudes(psi).unwrap_or_else(|_| DensityMatrix::pure(Level::G));
    for rho in evolve(&initial, &schedule, &params).unwrap() {
        prop_assert!((rho.trace() - 1.0).norm() <= 1e-9);
        prop_assert!(rho.hermiticity_error() <= 1e-12);
        prop_assert!(rho.min_eigenvalue() >= -1e-9);
    }

    // Two-level limit: resonant pump alone on g-e, no decay.
    let omega = case.pump[0];
    let closed = SystemParams::new(0.0, 0.0, 0.0, case.t_final, case.omega_max).unwrap();
    let n = case.pump.len();
    let rabi = PulseSchedule::piecewise_constant(case.t_final, vec![omega; n], vec![0.0; n]).unwrap();
    let trajectory = evolve(&DensityMatrix::pure(Level::G), &rabi, &closed).unwrap();
    for (j, rho) in trajectory.iter().enumerate() {
        let t = rabi.dt() * j as f64;
        prop_assert!((rho.population(Level::E) - (omega * t / 2.0).sin().powi(2)).abs() <= 1e-8);
    }

    // Pure decay from e into the sink.
    let dark = PulseSchedule::zeros(case.t_final, n).unwrap();
    let trajectory = evolve(&DensityMatrix::pure(Level::E), &dark, &params).unwrap();
    for (j, rho) in trajectory.iter().enumerate() {
        let t = dark.dt() * j as f64;
        prop_assert!((rho.population(Level::E) - (-case.gamma * t).exp()).abs() <= 1e-10);
        prop_assert!((rho.population(Level::S) - (1.0 - (-case.gamma * t).exp())).abs() <= 1e-10);
    }
    Ok(())
}

#[test]
fn criterion_1_physics_kernel() {
    let mut runner = TestRunner::new(PropConfig {
        cases: 100,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let outcome = runner.run(&cases(), |case| check_case(&case));
    let detail = match &outcome {
        Ok(()) => "100 random configurations".to_string(),
        Err(e) => e.to_string(),
    };
    verdict(1, "physics kernel", outcome.is_ok(), &detail);
}

#[test]
fn criterion_2_eigensystem() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut dark_exact = true;
    for _ in 0..1000 {
        let (op, os, dp) = loop {
            let op: f64 = rng.random_range(0.0..10.0);
            let os: f64 = rng.random_range(0.0..10.0);
            if op.hypot(os) > 0.1 {
                break (op, os, rng.random_range(-10.0..10.0));
            }
        };
        let closed = stirap::eigensystem(op, os, dp).unwrap();
        dark_exact &= closed.lambda_0 == 0.0 && closed.a_0[1] == 0.0;

        let h = Matrix3::new(0.0, op / 2.0, 0.0, op / 2.0, dp, os / 2.0, 0.0, os / 2.0, 0.0);
        let numeric = SymmetricEigen::new(h);
        for (lambda, a) in closed.pairs() {
            let a = Vector3::from(a);
            let k = (0..3)
                .min_by(|&i, &j| {
                    let di = (numeric.eigenvalues[i] - lambda).abs();
                    let dj = (numeric.eigenvalues[j] - lambda).abs();
                    di.total_cmp(&dj)
                })
                .unwrap();
            let v = numeric.eigenvectors.column(k);
            worst = worst
                .max((numeric.eigenvalues[k] - lambda).abs())
                .max((1.0 - v.dot(&a).abs()).abs())
                .max((h * a - a * lambda).norm());
        }
    }
    let ok = worst < 1e-10 && dark_exact;
    verdict(2, "eigensystem", ok, &format!("1000 points, worst deviation {worst:.2e}, dark state exact: {dark_exact}"));
}

#[test]
fn criterion_3_stirap_baseline() {
    let closed = harness::run_stirap(point(0.0, 100.0), &StirapOptions::default()).unwrap();
    let lossy = harness::run_stirap(point(5.0, 100.0), &StirapOptions::default()).unwrap();
    let area = closed.shape.omega_peak * closed.shape.tau;
    let f0 = closed.diagnostics.fidelity;
    let f5 = lossy.diagnostics.fidelity;
    let ok = (area - 10.0).abs() < 1e-9 && f0 >= 0.99 && f5 >= 0.90;
    verdict(3, "STIRAP baseline", ok, &format!("Ωmax·τ = {area}, F(γ=0) = {f0:.5}, F(Tγ=5) = {f5:.5}"));
}

#[test]
fn criterion_4_scaling_invariance() {
    let params = SystemParams::dimensionless(5.0, 100.0).unwrap();
    let gaussian = stirap::gaussian_schedule(&StirapShape::default_for(&params), &params, 30).unwrap();
    let smooth = stirap::analytic_schedule(&StirapShape::default_for(&params), &params, 30).unwrap();

    let lossy = SystemParams::dimensionless(5.0, 20.0).unwrap();
    let optimized = oct::multistart(&lossy, 10, OctMethod::Lbfgsb, 2, 4, Budget::evaluations(4000)).unwrap();
    let optimized = optimized.schedule(&lossy).unwrap();

    let mut worst = 0.0f64;
    for (p, s) in [(&params, &gaussian), (&params, &smooth), (&lossy, &optimized)] {
        for alpha in [0.5, 2.0, 10.0] {
            let (f, g) = harness::verify_scaling(p, s, alpha).unwrap();
            worst = worst.max((f - g).abs());
        }
    }
    verdict(4, "scaling invariance", worst < 1e-8, &format!("worst |ΔF| = {worst:.2e} over α ∈ {{0.5, 2, 10}}"));
}

#[test]
fn criterion_5_oct_reproduction() {
    let mut config = ExperimentConfig::new(Mode::Sweep, 1);
    config.grid = vec![point(5.0, 7.4), point(5.0, 13.8), point(5.0, 100.0)];
    config.oct = OctOptions {
        segments: 30,
        method: OctMethod::Lbfgsb,
        restarts: 4,
        ..OctOptions::default()
    };
    let output = harness::run_sweep(&config).unwrap();
    assert_eq!(output.records.len(), 3);

    let inefficiency: Vec<f64> = output.records.iter().map(|r| r.inefficiency.unwrap()).collect();
    let trend = inefficiency.windows(2).all(|w| w[1] <= w[0] + 0.02);

    let last = output.points[2].result.as_ref().unwrap();
    let params = SystemParams::dimensionless(5.0, 100.0).unwrap();
    let counter_intuitive = last.schedule(&params).unwrap().is_counter_intuitive();

    let mut beats_stirap = true;
    let mut baseline = Vec::new();
    for (record, p) in output.records.iter().zip(&config.grid) {
        let stirap_cost = 1.0 - harness::run_stirap(*p, &StirapOptions::default()).unwrap().diagnostics.fidelity;
        beats_stirap &= record.inefficiency.unwrap() <= stirap_cost;
        baseline.push(stirap_cost);
    }
    let ok = trend && counter_intuitive && beats_stirap;
    verdict(
        5,
        "OCT reproduction",
        ok,
        &format!(
            "1-F = {inefficiency:.4?} at TΩ = [7.4, 13.8, 100], STIRAP 1-F = {baseline:.4?}, counter-intuitive at 100: {counter_intuitive}"
        ),
    );
}

#[test]
fn criterion_6_rl_reproduction() {
    let mut passing = 0;
    let mut lines = Vec::new();
    for seed in [1, 2, 3] {
        let run = harness::run_rl(point(5.0, 20.0), &RlOptions::default(), seed, |_| {}).unwrap();
        let e = &run.evaluation;
        let best = e.best_reward.unwrap_or(0.0);
        let closed = e.closed_system_fidelity.unwrap_or(0.0);
        let ordered = e.counter_intuitive.unwrap_or(false);
        let replay_gap = (e.replay_fidelity.unwrap_or(f64::NAN) - best).abs();
        let ok = best >= 0.85 && closed >= 0.98 && ordered && replay_gap <= 1e-9;
        passing += usize::from(ok);
        lines.push(format!(
            "seed {seed}: best {best:.4} at episode {:?}, γ=0 replay {closed:.5}, counter-intuitive {ordered}",
            e.best_episode
        ));
    }
    verdict(6, "RL reproduction", passing >= 2, &format!("{passing}/3 seeds; {}", lines.join("; ")));
}

fn toy_batch() -> (PolicyNetwork, Vec<EpisodeTrace>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = PolicyNetwork::xavier(&[9, 4, 2], &mut rng).unwrap();
    let params = SystemParams::dimensionless(5.0, 20.0).unwrap();
    let batch = (0..4).map(|_| rollout(&net, 0.5, 8, &params, &mut rng).unwrap()).collect();
    (net, batch)
}

#[test]
fn criterion_7_gradient_oracles() {
    let (mut net, batch) = toy_batch();
    let analytic = surrogate_gradient(&net, &batch, 0.5, 1.0).unwrap().flatten();
    let theta = net.flatten();
    let h = 1e-5;
    let mut worst_fd = 0.0f64;
    for i in 0..theta.len() {
        let mut p = theta.clone();
        p[i] += h;
        net.set_flat(&p).unwrap();
        let up = surrogate_cost(&net, &batch, 0.5, 1.0).unwrap();
        p[i] -= 2.0 * h;
        net.set_flat(&p).unwrap();
        let down = surrogate_cost(&net, &batch, 0.5, 1.0).unwrap();
        let fd = (up - down) / (2.0 * h);
        worst_fd = worst_fd.max((fd - analytic[i]).abs() / analytic[i].abs().max(1e-6));
    }
    net.set_flat(&theta).unwrap();

    let mut worst_identity = 0.0f64;
    for trace in &batch {
        let returns = compute_returns(trace, 1.0);
        for j in 0..trace.len() {
            let single = EpisodeTrace {
                observations: vec![trace.observations[j]],
                actions: vec![trace.actions[j]],
                rewards: vec![returns[j]],
            };
            let c = surrogate_gradient(&net, &[single], 0.5, 1.0).unwrap().flatten();
            let s = log_prob_gradient(&net, &trace.observations[j], trace.actions[j], 0.5).flatten();
            for (ci, si) in c.iter().zip(&s) {
                worst_identity = worst_identity.max((ci + returns[j] * si).abs());
            }
        }
    }

    // Richardson: halving a central step should cut the error fourfold.
    let params = SystemParams::dimensionless(5.0, 20.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let alpha: Vec<f64> = (0..12).map(|_| rng.random_range(4.0..16.0)).collect();
    let alpha = ParamVector::new(alpha, 6).unwrap();
    let grad = |h: f64| {
        numeric_gradient_with_step(&alpha, &params, FdStep { absolute: h, relative: 0.0 }).unwrap()
    };
    let (g1, g2, g4) = (grad(0.2), grad(0.1), grad(0.05));
    let mut ratios = Vec::new();
    for i in 0..g1.len() {
        let coarse = g1[i] - g2[i];
        let fine = g2[i] - g4[i];
        if fine.abs() > 1e-9 {
            ratios.push(coarse / fine);
        }
    }
    let second_order = !ratios.is_empty() && ratios.iter().all(|r| (3.5..4.5).contains(r));
    let extrapolated: Vec<f64> = g2.iter().zip(&g1).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
    let fine = grad(1e-6);
    let agreement = fine.iter().zip(&extrapolated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let ok = worst_fd < 1e-4 && worst_identity < 1e-10 && second_order && agreement < 1e-3;
    verdict(
        7,
        "gradient oracles",
        ok,
        &format!(
            "surrogate FD rel {worst_fd:.1e}, identity {worst_identity:.1e}, Richardson ratios in [{:.3}, {:.3}], default step vs extrapolation {agreement:.1e}",
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        ),
    );
}

fn qctrl(workers: usize, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_qctrl"))
        .args(args)
        .arg("--quiet")
        .env("QCTRL_WORKERS", workers.to_string())
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn snapshot(path: &Path) -> Vec<(String, Vec<u8>)> {
    if path.is_file() {
        return vec![(String::new(), std::fs::read(path).unwrap())];
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.toml");
    std::fs::write(
        &config,
        "mode = \"sweep\"\nseed = 11\ngrid = [[0.0, 10.0], [5.0, 20.0], [5.0, 40.0]]\n\n[oct]\nsegments = 6\nrestarts = 2\nbudget = 3000\n",
    )
    .unwrap();
    let config = config.to_str().unwrap().to_string();

    let commands: Vec<(&str, Vec<&str>, bool)> = vec![
        ("simulate", vec!["simulate", "--seed", "3"], false),
        ("stirap", vec!["stirap", "--seed", "3", "--t-gamma", "5"], true),
        ("oct", vec!["oct", "--seed", "3", "--segments", "6", "--restarts", "3", "--budget", "3000"], true),
        ("oct nelder-mead", vec!["oct", "--seed", "3", "--segments", "4", "--method", "nelder-mead", "--budget", "2000"], true),
        ("rl", vec!["rl", "--seed", "3", "--episodes", "4", "--steps", "10"], true),
        ("sweep", vec!["sweep", "--config", &config], true),
    ];

    let mut mismatches = Vec::new();
    for (i, (name, args, uses_out)) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for (k, workers) in [1, 2, 1].into_iter().enumerate() {
            let target = tmp.path().join(format!("{i}-{k}"));
            let mut full = args.clone();
            let target_str = target.to_str().unwrap().to_string();
            if *uses_out {
                if matches!(*name, "rl" | "sweep") {
                    std::fs::create_dir(&target).unwrap();
                }
                full.push("--out");
                full.push(&target_str);
            }
            let stdout = qctrl(workers, &full);
            let files = if *uses_out { snapshot(&target) } else { Vec::new() };
            runs.push((stdout, files));
        }
        if runs.windows(2).any(|w| w[0] != w[1]) {
            mismatches.push(*name);
        }
    }
    let ok = mismatches.is_empty();
    let detail = if ok {
        format!("{} commands byte-identical across repeats and QCTRL_WORKERS = 1, 2", commands.len())
    } else {
        format!("differing outputs: {mismatches:?}")
    };
    verdict(8, "determinism", ok, &detail);
}
