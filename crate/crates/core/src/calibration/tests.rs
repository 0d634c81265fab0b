use nalgebra::Vector2;
use proptest::prelude::*;

use super::*;
use crate::geometry::{FootPose, Side};
use crate::sensing::{sensor_positions_in_base, ShoeLayout};

/// Noise-free samples: smooth pseudo-random forces, left shoe wandering
/// around, voltages from `truth`.
fn synthetic(n: usize, truth: &SensorParams, moving_shoe: bool) -> ReferenceLog {
    let layout = ShoeLayout::default();
    let samples = (0..n)
        .map(|k| {
            let t = k as f64;
            let pose = if moving_shoe {
                FootPose::new(40.0 * (0.3 * t).sin(), 100.0 + 10.0 * (0.7 * t).cos(), 0.0, 0.0, 0.0, 0.05 * (0.2 * t).sin())
            } else {
                FootPose::from_position([0.0, 100.0, 0.0])
            };
            let positions = sensor_positions_in_base(&layout, Side::Right, &pose);
            let forces: [f64; 8] = std::array::from_fn(|i| 6.0 + 5.0 * (0.37 * t * (i as f64 + 1.0) + i as f64).sin());
            let volts = std::array::from_fn(|i| truth.0[i].voltage(forces[i]));
            let grf: f64 = forces.iter().sum();
            let cop = forces.iter().zip(&positions).map(|(f, p)| p * *f).sum::<Vector2<f64>>() / grf;
            ReferenceSample {
                volts,
                grf_ref: grf,
                cop_ref: cop,
                forces_ref: forces,
                positions,
            }
        })
        .collect();
    ReferenceLog { samples }
}

fn perturbed(g: [f64; 8], o: [f64; 8]) -> SensorParams {
    SensorParams(std::array::from_fn(|i| CellParams {
        a: 10.0 * g[i],
        b: 1.0 + o[i],
    }))
}

fn skewed() -> SensorParams {
    perturbed(
        [0.82, 1.19, 1.05, 0.9, 1.12, 0.97, 0.85, 1.16],
        [0.4, -0.45, 0.1, -0.2, 0.33, -0.05, 0.25, -0.38],
    )
}

#[test]
fn initial_guess_recovers_uniform_params() {
    let truth = SensorParams::uniform(1.5, 0.2);
    let g = initial_guess(&synthetic(25, &truth, true), false).unwrap();
    assert!((g.a0 - 1.5).abs() < 1e-6);
    assert!((g.b0 - 0.2).abs() < 1e-6);
    let with_grf = initial_guess(&synthetic(25, &truth, true), true).unwrap();
    assert!((with_grf.a0 - 1.5).abs() < 1e-6 && (with_grf.b0 - 0.2).abs() < 1e-6);
}

#[test]
fn identical_samples_are_degenerate() {
    let log = synthetic(1, &SensorParams::uniform(1.5, 0.2), true);
    let same = ReferenceLog {
        samples: vec![log.samples[0]; 6],
    };
    assert!(matches!(initial_guess(&same, false), Err(CalibError::DegenerateData(_))));
    assert!(matches!(initial_guess(&log, false), Err(CalibError::DegenerateData(_))));
}

#[test]
fn heterogeneous_params_leave_a_residual() {
    let log = synthetic(25, &skewed(), true);
    let g = initial_guess(&log, false).unwrap();
    // Recompute the stacked residual independently.
    let mut sq = 0.0;
    for s in &log.samples {
        let model: Vector2<f64> = s.volts.iter().zip(&s.positions).map(|(v, p)| p * (g.a0 * v + g.b0)).sum();
        sq += (model - s.cop_ref * s.grf_ref).norm_squared();
    }
    assert!((sq.sqrt() - g.residual).abs() < 1e-9 * g.residual);
    assert!(g.residual > 1.0);
}

#[test]
fn fit_from_truth_stays_put() {
    let truth = skewed();
    let log = synthetic(20, &truth, true);
    let rep = nls_fit(&log, &truth, &CalibWeights::default(), &FitOptions::default()).unwrap();
    assert!(rep.objective_init < 1e-20);
    assert!(rep.iters.len() <= 2);
    assert!(rep.params.max_relative_error(&truth) < 1e-9);
}

#[test]
fn fit_recovers_skewed_cells() {
    let truth = skewed();
    let log = synthetic(30, &truth, true);
    let g = initial_guess(&log, false).unwrap();
    let rep = nls_fit(&log, &SensorParams::uniform(g.a0, g.b0), &CalibWeights::default(), &FitOptions::default()).unwrap();
    assert!(rep.params.max_relative_error(&truth) < 0.01);
    assert!(rep.objective <= rep.objective_init);
    assert_eq!(rep.rank, 16);
    for w in rep.iters.windows(2) {
        assert!(w[1].objective <= w[0].objective);
    }
}

#[test]
fn grf_and_cop_alone_leave_directions_unseen() {
    let truth = skewed();
    let log = synthetic(30, &truth, false);
    let wts = CalibWeights {
        w_n: 1.0,
        w_c: 1.0,
        w_f: 0.0,
    };
    let rep = nls_fit(&log, &truth, &wts, &FitOptions::default()).unwrap();
    assert!(rep.rank < 16);
    assert_eq!(rep.degenerate_directions.len(), 16 - rep.rank);
    // With fixed cell positions each offset enters only through sum(b) and
    // sum(b p), so the offsets alone span a 3-dimensional image.
    assert!(rep.rank <= 8 + 3);
}

#[test]
fn bad_inputs_are_rejected() {
    let log = synthetic(10, &skewed(), true);
    let mut dead = skewed();
    dead.0[3].a = 0.0;
    assert!(matches!(nls_fit(&log, &dead, &CalibWeights::default(), &FitOptions::default()), Err(CalibError::BadParams(_))));
    let none = CalibWeights {
        w_n: 0.0,
        w_c: 0.0,
        w_f: 0.0,
    };
    assert!(matches!(nls_fit(&log, &skewed(), &none, &FitOptions::default()), Err(CalibError::BadWeights(_))));
    let short = ReferenceLog {
        samples: log.samples[..1].to_vec(),
    };
    assert!(nls_fit(&short, &skewed(), &CalibWeights::default(), &FitOptions::default()).is_err());
}

#[test]
fn mae_examples() {
    let a = [1.0, 2.0, 3.0];
    assert_eq!(mae_grf(&a, &a).unwrap(), 0.0);
    assert_eq!(mae_grf(&[3.0, 4.0, 5.0], &a).unwrap(), 2.0);
    assert!(matches!(mae_grf(&a, &a[..2]), Err(CalibError::LengthMismatch(3, 2))));
    let c = [Vector2::new(1.0, 1.0), Vector2::new(-2.0, 0.5)];
    assert_eq!(mae_cop(&c, &c).unwrap(), 0.0);
    let shifted: Vec<_> = c.iter().map(|p| p + Vector2::new(3.0, 4.0)).collect();
    assert!((mae_cop(&shifted, &c).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn split_sizes() {
    let log = synthetic(10, &skewed(), true);
    let (a, b) = split_train_test(&log, 0.7).unwrap();
    assert_eq!((a.len(), b.len()), (7, 3));
    assert_eq!(a.samples[6], log.samples[6]);
    let two = synthetic(2, &skewed(), true);
    assert!(split_train_test(&two, 0.5).is_err());
    assert!(split_train_test(&log, 1.0).is_err());
}

#[test]
fn calibrate_generalizes_on_clean_data() {
    let truth = skewed();
    let log = synthetic(40, &truth, true);
    let res = calibrate(&log, &CalibWeights::default(), 0.7, &FitOptions::default()).unwrap();
    assert!(res.params.max_relative_error(&truth) < 0.01);
    assert!(res.objective_fit <= res.objective_init);
    for m in [res.mae.grf, res.mae.cop] {
        assert!(m.post.test <= m.pre.test);
        assert!(m.post.test <= 0.05 * m.pre.test);
        let gap = (m.pre.train - m.pre.test).abs() / m.pre.train.max(m.pre.test);
        assert!(gap < 0.1, "pre-fit train/test gap {gap}");
    }
}

#[test]
fn reference_log_jsonl_round_trip() {
    let log = synthetic(3, &skewed(), true);
    let back = ReferenceLog::read_jsonl(log.to_jsonl().as_bytes()).unwrap();
    assert_eq!(back, log);
    let swapped = log.with_volts(&[[0.0; 8]; 3]).unwrap();
    assert_eq!(swapped.samples[1].grf_ref, log.samples[1].grf_ref);
    assert!(log.with_volts(&[[0.0; 8]; 2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fit_never_worse_than_start(g in prop::array::uniform8(0.8..1.2f64), o in prop::array::uniform8(-0.5..0.5f64)) {
        let truth = perturbed(g, o);
        let log = synthetic(24, &truth, true);
        let guess = initial_guess(&log, false).unwrap();
        let start = SensorParams::uniform(guess.a0, guess.b0);
        let rep = nls_fit(&log, &start, &CalibWeights::default(), &FitOptions::default()).unwrap();
        prop_assert!(rep.objective <= objective(&log, &start, &CalibWeights::default()));
        prop_assert!(rep.params.max_relative_error(&truth) < 0.01);
    }

    #[test]
    fn mae_cop_detects_translation(v in prop::array::uniform2(-10.0..10.0f64), pts in prop::collection::vec(prop::array::uniform2(-50.0..50.0f64), 1..20)) {
        let cur: Vec<Vector2<f64>> = pts.iter().map(|p| Vector2::from(*p)).collect();
        let shift = Vector2::from(v);
        let moved: Vec<_> = cur.iter().map(|p| p + shift).collect();
        prop_assert!((mae_cop(&moved, &cur).unwrap() - shift.norm()).abs() < 1e-9);
        let reference: Vec<_> = cur.iter().map(|p| p * 0.5).collect();
        let before = mae_cop(&cur, &reference).unwrap();
        let after = mae_cop(&moved, &reference).unwrap();
        prop_assert!((after - before).abs() <= shift.norm() + 1e-9);
    }
}
