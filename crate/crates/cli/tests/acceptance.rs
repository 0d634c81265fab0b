//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mfgait_core::calibration::{calibrate, capture_reference, replay_volts, CalibWeights, FitOptions, SensorParams};
use mfgait_core::cost::CostWeights;
use mfgait_core::gait_plan::{
    build_cycle, mirror_joint_trajectory, mirror_transition, GaitCycle, GaitParams, JointTrajectory, TransitionObjective,
};
use mfgait_core::geometry::{FootPose, Side};
use mfgait_core::joints::{JointLimits, JointVector};
use mfgait_core::optimizer::{
    estimate_gradient, measure, objective_for, optimize_cycle, OptimizerConfig, RawSensorWorld, SensorWorld,
    TrajectoryLog,
};
use mfgait_core::sensing::{cop_from_forces, sensor_positions_in_base, support_polygon, ShoeLayout, DEFAULT_MIN_TOTAL};
use mfgait_simbot::{corrupted_params, distribute_forces, ContactState, RobotSpec, SimWorld};
use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn solved_cycle() -> (GaitCycle, TrajectoryLog, Duration) {
    let start = Instant::now();
    let cycle = build_cycle(GaitParams::default(), true, None).unwrap();
    let mut world = SimWorld::default_robot();
    let res = optimize_cycle(&mut world, &cycle, &CostWeights::default(), &OptimizerConfig::default())
        .map_err(|f| f.error)
        .expect("default cycle solves");
    (cycle, res.log, start.elapsed())
}

/// Every probe used below stays inside the limits and keeps the contact
/// state the objective expects, so the cost is smooth over the stencil.
fn smooth_here(world: &SimWorld, q: &JointVector, obj: &TransitionObjective, limits: &JointLimits) -> bool {
    let expected = obj.support.contacts();
    let mut probe = world.clone();
    for j in &obj.active_joints {
        for d in [-0.04, -0.001, 0.0, 0.001, 0.04] {
            let v = q.angle(*j) + d;
            if !limits.range(*j).contains(v) {
                return false;
            }
            if probe.set_joints(&q.clone().with(*j, v)).is_err() {
                return false;
            }
            match probe.state(obj.base_side) {
                Ok(st) if st.contacts.as_array() == expected => {}
                _ => return false,
            }
        }
    }
    true
}

fn gradient(world: &mut SimWorld, q: &JointVector, obj: &TransitionObjective, delta: f64, limits: &JointLimits) -> DVector<f64> {
    let est = estimate_gradient(world, q, obj, &CostWeights::default(), delta, limits).unwrap();
    assert!(est.probes.iter().all(|p| !p.clipped));
    est.grad
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (cycle, log, _) = solved_cycle();
    let limits = JointLimits::nao();
    let mut world = SimWorld::default_robot();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let deltas = [0.04, 0.02, 0.01];
    // Samples scatter around every configuration the solved cycle visits.
    // Anchoring on a transition's own records alone would pile samples onto
    // its optimum, where the gradient vanishes but truncation error does not.
    let anchors: Vec<JointVector> = log.records.iter().map(|r| r.q.clone()).collect();
    let (mut worst_rel, mut slope_lo, mut slope_hi, mut total) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY, 0);
    let mut short = Vec::new();
    for obj in &cycle.objectives {
        let mut found = 0;
        for _ in 0..5000 {
            if found == 20 {
                break;
            }
            let mut q = anchors[rng.random_range(0..anchors.len())].clone();
            for j in &obj.active_joints {
                q.set(*j, q.angle(*j) + rng.random_range(-0.05..0.05));
            }
            if !smooth_here(&world, &q, obj, &limits) {
                continue;
            }
            let oracle = gradient(&mut world, &q, obj, 0.001, &limits);
            let errs: Vec<f64> = deltas.iter().map(|d| (gradient(&mut world, &q, obj, *d, &limits) - &oracle).norm()).collect();
            worst_rel = worst_rel.max(errs[1] / oracle.norm());
            // Least-squares slope of log(err) against log(delta).
            let xs: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
            let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
            let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
            slope_lo = slope_lo.min(slope);
            slope_hi = slope_hi.max(slope);
            found += 1;
        }
        if found < 20 {
            short.push(obj.label());
        }
        total += found;
    }
    let elapsed = start.elapsed();
    let pass = short.is_empty() && worst_rel <= 1e-3 && slope_lo >= 1.7 && slope_hi <= 2.3 && elapsed < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "{total} configurations over {} transitions, worst relative error {worst_rel:.2e}, slopes [{slope_lo:.3}, {slope_hi:.3}], {:.2} s{}",
            cycle.objectives.len(),
            elapsed.as_secs_f64(),
            if short.is_empty() { String::new() } else { format!(", too few samples for {short:?}") }
        ),
    )
}

fn criterion_2() -> Outcome {
    let (cycle, log, elapsed) = solved_cycle();
    let counts = log.update_counts();
    let mut finals = Vec::new();
    let mut pass = counts[0] <= 20 && counts.iter().all(|n| *n <= 50) && elapsed < Duration::from_secs(10);
    for t in 1..=cycle.objectives.len() {
        let c = log.transition(t, false).last().unwrap().cost;
        pass &= c < 1.0;
        finals.push(format!("{c:.3}"));
    }
    outcome(
        pass,
        format!("updates {counts:?}, final costs [{}] mm^2, {:.2} s", finals.join(", "), elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let (cycle, log, _) = solved_cycle();
    let mut world = SimWorld::default_robot();
    let mut worst = f64::INFINITY;
    let mut culprit = String::new();
    for rec in &log.records {
        let obj = objective_for(&cycle, rec).unwrap();
        world.set_joints(&rec.q).unwrap();
        let raw = world.raw(rec.base).unwrap();
        let obs = world.observe(rec.base).unwrap();
        let m = support_polygon(&raw.positions, obj.support.contacts()).margin(&obs.cop.cop);
        if m < worst {
            worst = m;
            culprit = format!("{} update {}", obj.label(), rec.update);
        }
    }
    outcome(
        worst >= 1.0,
        format!("{} records, smallest margin {worst:.2} mm at {culprit}", log.records.len()),
    )
}

fn brute_force_cop(pairs: &[(f64, Vector2<f64>)]) -> (f64, f64, f64) {
    // Compression only, accumulated back to front.
    let (mut n, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (f, p) in pairs.iter().rev() {
        if *f > 0.0 {
            n += f;
            mx += f * p.x;
            my += f * p.y;
        }
    }
    (mx / n, my / n, n)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_eq = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(4..=8);
        let pairs: Vec<(f64, Vector2<f64>)> = (0..k)
            .map(|_| {
                let f = if rng.random_bool(0.1) { -rng.random_range(0.0..5.0) } else { rng.random_range(0.5..60.0) };
                (f, Vector2::new(rng.random_range(-150.0..150.0), rng.random_range(-150.0..250.0)))
            })
            .collect();
        let (x, y, n) = brute_force_cop(&pairs);
        if n < DEFAULT_MIN_TOTAL {
            continue;
        }
        let r = cop_from_forces(&pairs, DEFAULT_MIN_TOTAL).unwrap();
        worst_eq = worst_eq.max((r.cop.x - x).abs()).max((r.cop.y - y).abs()).max((r.grf - n).abs() / n);
    }

    let layout = ShoeLayout::default();
    let mut worst_rt = 0.0f64;
    for i in 0..1000 {
        let pose = FootPose::new(
            rng.random_range(-40.0..40.0),
            rng.random_range(70.0..140.0),
            0.0,
            0.0,
            0.0,
            rng.random_range(-0.2..0.2),
        );
        let pos = sensor_positions_in_base(&layout, Side::Right, &pose);
        let cr = pos[4..].iter().sum::<Vector2<f64>>() / 4.0;
        let cl = pos[..4].iter().sum::<Vector2<f64>>() / 4.0;
        let (u, v) = (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
        let offset = Vector2::new(50.0 * u, 25.0 * v);
        let grf = rng.random_range(5.0..80.0);
        let (cop, contacts) = if i % 2 == 0 {
            let t = rng.random_range(0.0..1.0);
            (cr + offset + t * (cl - cr), ContactState { left: true, right: true })
        } else {
            (cr + offset, ContactState { left: false, right: true })
        };
        let f = distribute_forces(&cop, grf, contacts, &pos).unwrap();
        let pairs: Vec<_> = f.into_iter().zip(pos).collect();
        let r = cop_from_forces(&pairs, DEFAULT_MIN_TOTAL).unwrap();
        worst_rt = worst_rt.max((r.cop - cop).norm()).max((r.grf - grf).abs());
    }
    outcome(
        worst_eq <= 1e-12 && worst_rt <= 1e-9,
        format!("centroid vs brute force {worst_eq:.1e}, distribute round trip {worst_rt:.1e}"),
    )
}

fn criterion_5() -> Outcome {
    let (cycle, log, _) = solved_cycle();
    let obj = &cycle.objectives[0];
    let mobj = mirror_transition(obj);
    let qs: Vec<JointVector> = log.transition(1, false).map(|r| r.q.clone()).collect();
    let mirrored = mirror_joint_trajectory(&JointTrajectory::from_vectors(&qs).unwrap())
        .unwrap()
        .to_vectors()
        .unwrap();
    let mut world = SimWorld::default_robot();
    let wts = CostWeights::default();
    let mut worst = 0.0f64;
    for (q, qm) in qs.iter().zip(&mirrored) {
        let a = measure(&mut world, q, obj, &wts).unwrap();
        let b = measure(&mut world, qm, &mobj, &wts).unwrap();
        worst = worst.max((a.obs.cop.cop.y + b.obs.cop.cop.y).abs()).max((a.obs.cop.cop.x - b.obs.cop.cop.x).abs());
    }
    let fa = measure(&mut world, qs.last().unwrap(), obj, &wts).unwrap().cost;
    let fb = measure(&mut world, mirrored.last().unwrap(), &mobj, &wts).unwrap().cost;
    outcome(
        worst <= 1e-9 && (fa - fb).abs() <= 1e-9,
        format!("{} configurations, CoP mismatch {worst:.1e} mm, final cost {fa:.6} vs {fb:.6}", qs.len()),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (_, log, _) = solved_cycle();
    let mut accurate = SimWorld::default_robot();
    let installed = SensorParams(accurate.installed());
    let reference = capture_reference(&mut accurate, &log, &installed).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    let (mut worst_param, mut worst_ratio) = (0.0f64, 0.0f64);
    for seed in 1..=5u64 {
        let truth = corrupted_params(&installed.0, seed);
        let mut broken = SimWorld::default_robot().with_truth(truth);
        let data = reference.with_volts(&replay_volts(&mut broken, &log).unwrap()).unwrap();
        let res = calibrate(&data, &CalibWeights::default(), 0.7, &FitOptions::default()).unwrap();
        let err = res.params.max_relative_error(&SensorParams(truth));
        let (g, c) = (res.mae.grf, res.mae.cop);
        let ratio = (g.post.test / g.pre.test).max(c.post.test / c.pre.test);
        worst_param = worst_param.max(err);
        worst_ratio = worst_ratio.max(ratio);
        pass &= err <= 0.01 && ratio <= 0.05;
        if seed == 1 {
            lines.push(format!(
                "seed 1 test MAE GRF {:.3} -> {:.1e} N, CoP {:.3} -> {:.1e} mm (hardware: 3.5 -> 0.09 N, 4.5 -> 0.8 mm)",
                g.pre.test, g.post.test, c.pre.test, c.post.test
            ));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "5 corruptions, worst parameter error {worst_param:.1e}, worst post/pre MAE {worst_ratio:.1e}, {:.2} s; {}",
            elapsed.as_secs_f64(),
            lines.join("")
        ),
    )
}

fn criterion_7() -> Outcome {
    let root = workspace();
    let manifest: toml::Table = toml::from_str(&fs::read_to_string(root.join("crates/core/Cargo.toml")).unwrap()).unwrap();
    let mut deps = Vec::new();
    for section in ["dependencies", "dev-dependencies", "build-dependencies"] {
        if let Some(t) = manifest.get(section).and_then(|v| v.as_table()) {
            deps.extend(t.keys().cloned());
        }
    }
    let clean_manifest = !deps.iter().any(|d| d.contains("simbot") || d.contains("cli"));
    let mut mentions = Vec::new();
    let mut stack = vec![root.join("crates/core/src")];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if fs::read_to_string(&p).unwrap().contains("mfgait_simbot") {
                mentions.push(p.display().to_string());
            }
        }
    }
    let stub = fs::read_to_string(root.join("crates/core/src/optimizer/tests.rs")).unwrap();
    let has_stub = stub.contains("impl SensorWorld for StubWorld");
    // Build and run the optimizer unit suite on its own, with a private
    // target directory so nothing else in the workspace is linked.
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let run = Command::new(cargo)
        .current_dir(&root)
        .env("CARGO_TARGET_DIR", root.join("target/firewall"))
        .args(["test", "--offline", "-p", "mfgait-core", "--lib", "optimizer::"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&run.stdout);
    let summary = text
        .lines()
        .find(|l| l.starts_with("test result:"))
        .unwrap_or("no test summary")
        .to_string();
    let linked: Vec<String> = text
        .lines()
        .chain(String::from_utf8_lossy(&run.stderr).lines())
        .filter(|l| l.contains("Compiling mfgait-"))
        .map(|l| l.trim().to_string())
        .collect();
    let only_core = linked.iter().all(|l| l.contains("mfgait-core"));
    outcome(
        clean_manifest && mentions.is_empty() && has_stub && run.status.success() && only_core,
        format!(
            "core deps {deps:?}, simbot mentions {}, stub world {has_stub}, optimizer suite: {summary}",
            mentions.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = RobotSpec::default();
    spec.noise.volts = 1e-3;
    spec.noise.tag_mm = 0.01;
    let robot = tmp.path().join("noisy.json");
    fs::write(&robot, spec.to_json()).unwrap();
    let run = |name: &str, noisy: bool| -> (Option<i32>, Vec<u8>) {
        let out = tmp.path().join(name);
        let mut args = vec!["optimize".to_string(), "--seed".into(), "7".into(), "--out".into(), out.display().to_string()];
        if noisy {
            args.extend(["--robot".to_string(), robot.display().to_string()]);
        }
        let o = Command::new(env!("CARGO_BIN_EXE_mfgait")).args(&args).output().unwrap();
        (o.status.code(), fs::read(out.join("trajectory.jsonl")).unwrap())
    };
    let (ca, a) = run("a", false);
    let (cb, b) = run("b", false);
    let (cn, n1) = run("n1", true);
    let (cn2, n2) = run("n2", true);
    let pass = [ca, cb, cn, cn2].iter().all(|c| *c == Some(0)) && a == b && n1 == n2 && !a.is_empty();
    outcome(
        pass,
        format!("clean logs identical {} ({} bytes); noisy logs identical {} ({} bytes)", a == b, a.len(), n1 == n2, n1.len()),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient fidelity", criterion_1),
        ("convergence", criterion_2),
        ("stability margin", criterion_3),
        ("CoP oracle equivalence", criterion_4),
        ("mirror symmetry", criterion_5),
        ("calibration recovery", criterion_6),
        ("optimizer firewall", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
