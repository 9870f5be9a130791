//! Invariants of balls, covers, spanning and separating sets.

use proptest::prelude::*;

use rescaled_pressure::ergodic::uniform_measure;
use rescaled_pressure::flow_core::integrate_orbit;
use rescaled_pressure::pressure_metric::metric_cover_value;
use rescaled_pressure::pressure_topo::{build_compact_sample, lattice_points, InsertionOrder, TopoInstance};
use rescaled_pressure::systems::benchmark;
use rescaled_pressure::warp::in_ball;
use rescaled_pressure::{BallVariant, BandF64, CoverMode, PointF64, PotentialF64, SystemF64};

const DT: f64 = 0.01;

fn sine() -> SystemF64 {
    benchmark::<f64>("sine-grid", None).unwrap().system
}

fn torus() -> SystemF64 {
    benchmark::<f64>("linear-torus", None).unwrap().system
}

fn band() -> BandF64 {
    BandF64::default_for(DT)
}

fn orbit(sys: &SystemF64, p: &PointF64, t: f64) -> rescaled_pressure::TrajectoryF64 {
    let steps = (t / DT).round() as usize;
    let extra = band().overhang_steps(steps, DT);
    integrate_orbit(sys, p, (steps + extra) as f64 * DT, DT).unwrap()
}

fn away_from_sinks(a: f64, b: f64) -> bool {
    let d = |v: f64| (v - (v * 2.0).round() / 2.0).abs();
    d(a).max(d(b)) > 0.06
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn r1_balls_sit_inside_warped_balls(
        a in 0.0f64..1.0, b in 0.0f64..1.0,
        da in -0.02f64..0.02, db in -0.02f64..0.02,
        eps in 0.05f64..0.5, t in 1usize..5,
    ) {
        prop_assume!(away_from_sinks(a, b));
        let sys = sine();
        let t = t as f64 * 0.25;
        let x = orbit(&sys, &PointF64::from_f64(&[a, b]), t);
        let y = orbit(&sys, &PointF64::from_f64(&[a + da, b + db]), t);
        if in_ball(BallVariant::R1, &sys, &x, &y, t, eps, &band()).unwrap() {
            prop_assert!(in_ball(BallVariant::R2, &sys, &x, &y, t, eps, &band()).unwrap());
            prop_assert!(in_ball(BallVariant::R3, &sys, &x, &y, t, eps, &band()).unwrap());
        }
        if in_ball(BallVariant::Plain, &sys, &x, &y, t, eps, &band()).unwrap() {
            prop_assert!(in_ball(BallVariant::PlainReparam, &sys, &x, &y, t, eps, &band()).unwrap());
        }
    }

    #[test]
    fn warped_balls_shrink_with_time(
        a in 0.0f64..1.0, b in 0.0f64..1.0,
        da in -0.02f64..0.02, db in -0.02f64..0.02,
        eps in 0.05f64..0.5,
    ) {
        prop_assume!(away_from_sinks(a, b));
        let sys = sine();
        let x = orbit(&sys, &PointF64::from_f64(&[a, b]), 2.0);
        let y = orbit(&sys, &PointF64::from_f64(&[a + da, b + db]), 2.0);
        for v in [BallVariant::R1, BallVariant::R2, BallVariant::R3] {
            let inside: Vec<bool> = [0.5, 1.0, 1.5, 2.0]
                .iter()
                .map(|&t| in_ball(v, &sys, &x, &y, t, eps, &band()).unwrap())
                .collect();
            prop_assert!(inside.windows(2).all(|w| w[0] || !w[1]), "{v:?} {inside:?}");
        }
    }
}

fn small_measure(sys: &SystemF64, seed: u64) -> (rescaled_pressure::MeasureF64, Vec<PointF64>) {
    let mu = uniform_measure(sys, 40, 0.08, seed).unwrap();
    let candidates = uniform_measure(sys, 15, 0.08, seed + 1).unwrap().points();
    (mu, candidates)
}

#[test]
fn constant_shift_moves_metric_covers_by_c_times_t() {
    for sys in [torus(), sine()] {
        let (mu, cand) = small_measure(&sys, 3);
        let f = PotentialF64::coordinate_sine(0);
        for v in [BallVariant::R1, BallVariant::R2] {
            for mode in [CoverMode::Greedy, CoverMode::Exact] {
                let t = 1.0;
                let base = metric_cover_value(&sys, &mu, &f, v, t, 0.2, 0.2, DT, &cand, mode, &band()).unwrap();
                for c in [-1.0, 0.5, 3.0] {
                    let g = f.shifted(c);
                    let moved = metric_cover_value(&sys, &mu, &g, v, t, 0.2, 0.2, DT, &cand, mode, &band()).unwrap();
                    assert_eq!(moved.center_ids, base.center_ids);
                    assert!((moved.log_weight - base.log_weight - c * t).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn exact_covers_are_monotone_in_t_and_eps() {
    let sys = sine();
    let f = PotentialF64::zero();
    for seed in [1, 2, 3] {
        let (mu, cand) = small_measure(&sys, seed * 10);
        for v in [BallVariant::R1, BallVariant::R2, BallVariant::R3] {
            let value = |t: f64, eps: f64| {
                metric_cover_value(&sys, &mu, &f, v, t, eps, 0.3, DT, &cand, CoverMode::Exact, &band())
                    .map(|s| s.log_weight)
            };
            for eps in [0.1, 0.2, 0.4] {
                let row: Vec<f64> = [0.5, 1.0, 1.5]
                    .iter()
                    .map(|&t| value(t, eps).unwrap_or(f64::INFINITY))
                    .collect();
                assert!(row.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{v:?} eps {eps}: {row:?}");
            }
            for t in [0.5, 1.5] {
                let col: Vec<f64> = [0.1, 0.2, 0.4]
                    .iter()
                    .map(|&e| value(t, e).unwrap_or(f64::INFINITY))
                    .collect();
                assert!(col.windows(2).all(|w| w[0] + 1e-12 >= w[1]), "{v:?} t {t}: {col:?}");
            }
        }
    }
}

#[test]
fn spanning_and_separating_sets_hold_up_pointwise() {
    let sys = sine();
    let f = PotentialF64::coordinate_sine(1);
    let lattice = lattice_points(&sys, 12).unwrap();
    let k = build_compact_sample(&sys, &lattice, 0.1, 18).unwrap();
    let t = 1.0;
    let inst = TopoInstance::new(&sys, &k, &f, t, DT, band()).unwrap();
    let traj = |i: usize| inst.bank().trajectory(i);
    for v in [BallVariant::R1, BallVariant::R2, BallVariant::R3] {
        for eps in [0.1, 0.3] {
            let life = inst.lifetimes(&sys, v, eps).unwrap();
            for mode in [CoverMode::Greedy, CoverMode::Exact] {
                let span = inst.spanning(&life, t, mode, &[]).unwrap();
                for y in 0..k.len() {
                    let covered = span
                        .members
                        .iter()
                        .any(|&m| in_ball(v, &sys, traj(m), traj(y), t, eps, &band()).unwrap());
                    assert!(covered, "{v:?} eps {eps}: point {y} uncovered");
                }
                let lw = inst.log_weight_of(&span.members, t).unwrap();
                assert!((lw - span.log_weight).abs() < 1e-9);
            }
            for order in [InsertionOrder::WeightDesc, InsertionOrder::Input] {
                let sep = inst.separating(&life, t, order).unwrap();
                let close = |a: usize, b: usize| {
                    in_ball(v, &sys, traj(a), traj(b), t, eps, &band()).unwrap()
                        || in_ball(v, &sys, traj(b), traj(a), t, eps, &band()).unwrap()
                };
                for &a in &sep.members {
                    for &b in &sep.members {
                        assert!(a == b || !close(a, b), "{v:?}: {a} and {b} not separated");
                    }
                }
                for p in 0..k.len() {
                    if !sep.members.contains(&p) {
                        assert!(sep.members.iter().any(|&m| close(p, m)), "{v:?}: {p} could be added");
                    }
                }
            }
        }
    }
}
