use modcap::exec::{ThreadedExecutor, WallClock};
use modcap::highs::HighsBackend;
use modcap_core::formulation::FormulationOptions;
use modcap_core::generate::{generate_synthetic_instance, SyntheticConfig};
use modcap_core::metrics::{oracle_value, out_of_sample_eval};
use modcap_core::scenario::{build_tree, TreeParams};
use modcap_core::sddip::{run, CutPreset, NoClock, RunStatus, Sddip, SddipConfig};

fn backend() -> HighsBackend {
    HighsBackend::with_gap(1e-9)
}

#[test]
fn lower_bound_never_exceeds_the_optimum() {
    let be = backend();
    for seed in 1..=3 {
        for preset in ["B", "SB+I", "PT+L", "IM", "SPT+I"] {
            let inst = generate_synthetic_instance(&SyntheticConfig {
                seed,
                ..SyntheticConfig::default()
            });
            let tree = build_tree(
                &inst,
                &TreeParams {
                    seed,
                    ..TreeParams::default()
                },
            )
            .unwrap();
            let z =
                oracle_value(&be, &inst, &tree, &FormulationOptions::for_instance(&inst)).unwrap();
            let cfg = SddipConfig {
                preset: preset.parse::<CutPreset>().unwrap(),
                max_iterations: 4,
                seed,
                ..SddipConfig::default()
            };
            let r = run(&inst, &tree, &be, cfg).unwrap();
            assert!(
                r.lower_bound <= z * (1.0 + 1e-9),
                "seed {seed} {preset}: {} > {z}",
                r.lower_bound
            );
            assert!(r
                .history
                .windows(2)
                .all(|w| w[1].lower_bound >= w[0].lower_bound));
        }
    }
}

#[test]
fn single_scenario_converges_to_the_optimum() {
    let be = backend();
    let inst = generate_synthetic_instance(&SyntheticConfig {
        horizon: 4,
        ..SyntheticConfig::default()
    });
    let p = TreeParams {
        branching: 1,
        ..TreeParams::default()
    };
    let tree = build_tree(&inst, &p).unwrap();
    let z = oracle_value(&be, &inst, &tree, &FormulationOptions::for_instance(&inst)).unwrap();
    let r = run(
        &inst,
        &tree,
        &be,
        SddipConfig {
            preset: "SB+I".parse().unwrap(),
            ..SddipConfig::default()
        },
    )
    .unwrap();
    assert_eq!(r.status, RunStatus::Converged);
    assert!((r.lower_bound - z).abs() <= 1e-6 * z);
    // One path, so the sample spread vanishes and the bound is the path cost.
    assert!((r.upper_bound - z).abs() <= 1e-6 * z);
}

#[test]
fn repeated_runs_are_identical() {
    let be = backend();
    let inst = generate_synthetic_instance(&SyntheticConfig {
        seed: 2,
        ..SyntheticConfig::default()
    });
    let tree = build_tree(&inst, &TreeParams::default()).unwrap();
    let cfg = SddipConfig {
        forward_samples: 40,
        max_iterations: 5,
        ..SddipConfig::default()
    };
    let a = run(&inst, &tree, &be, cfg.clone()).unwrap();
    let mut s = Sddip::new(&inst, &tree, &be, SddipConfig { workers: 3, ..cfg }).unwrap();
    let b = s
        .run(&ThreadedExecutor::new(3), &NoClock, &mut |_| {})
        .unwrap();
    assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
    assert_eq!(a.upper_bound.to_bits(), b.upper_bound.to_bits());
    assert_eq!(a.census, b.census);
    assert_eq!(a.first_stage_plan, b.first_stage_plan);
}

#[test]
fn zero_time_limit_stops_after_one_iteration() {
    let be = backend();
    let inst = generate_synthetic_instance(&SyntheticConfig::default());
    let tree = build_tree(&inst, &TreeParams::default()).unwrap();
    let cfg = SddipConfig {
        time_limit_ms: Some(0),
        gap_tolerance: 1e-12,
        ..SddipConfig::default()
    };
    let mut s = Sddip::new(&inst, &tree, &be, cfg).unwrap();
    let r = s
        .run(&ThreadedExecutor::new(1), &WallClock::start(), &mut |_| {})
        .unwrap();
    assert_eq!(r.iterations, 1);
    assert!(matches!(
        r.status,
        RunStatus::TimeLimit | RunStatus::Converged
    ));
    assert!(r.lower_bound.is_finite() && r.upper_bound.is_finite());
}

#[test]
fn converged_policy_evaluates_near_the_optimum() {
    let be = backend();
    let inst = generate_synthetic_instance(&SyntheticConfig {
        seed: 5,
        ..SyntheticConfig::default()
    });
    let tree = build_tree(
        &inst,
        &TreeParams {
            seed: 5,
            ..TreeParams::default()
        },
    )
    .unwrap();
    let opts = FormulationOptions::for_instance(&inst);
    let z = oracle_value(&be, &inst, &tree, &opts).unwrap();
    let cfg = SddipConfig {
        forward_samples: 2000,
        ..SddipConfig::default()
    };
    let r = run(&inst, &tree, &be, cfg).unwrap();
    let exec = ThreadedExecutor::new(2);
    let rep =
        out_of_sample_eval(&exec, &be, &inst, &tree, &opts, &r.pools, 5000, 0.05, 11).unwrap();
    assert!(rep.upper >= z * (1.0 - 1e-9));
    assert!(
        (rep.mean - z).abs() <= 0.02 * z,
        "mean {} oracle {z}",
        rep.mean
    );
}
