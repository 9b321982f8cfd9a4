//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use modcap::exec::ThreadedExecutor;
use modcap::highs::HighsBackend;
use modcap_core::formulation::{
    build_cost_to_go, enumerate_states, FormulationOptions, MovePolicy,
};
use modcap_core::generate::{generate_synthetic_instance, SyntheticConfig};
use modcap_core::instance::RevisionSchedule;
use modcap_core::metrics::{
    mobility_suite, oracle_value, out_of_sample_eval, schedules_of_size, solve_form, vpamsp,
    vss_suite, RpSource,
};
use modcap_core::scenario::{build_tree, ScenarioTree, TreeParams};
use modcap_core::sddip::exec::partition_ranges;
use modcap_core::sddip::{
    CutFamily, CutPreset, NoClock, RunStatus, Sddip, SddipConfig, SddipResult, Sequential,
};
use modcap_core::Instance;
use rand::{Rng, SeedableRng};

/// Relative optimality gap and distance of LB to the optimum.
const GAP_TOL: f64 = 0.01;
const RUN_TIME_LIMIT: Duration = Duration::from_secs(60);
/// Forward samples per iteration. The tiny trees have a wide cost spread,
/// so the confidence half-width needs many paths to fall under 1%.
const FORWARD_SAMPLES: usize = 10_000;
/// Cut validity, relative to the oracle value.
const CUT_TOL: f64 = 1e-6;
const DOMINANCE_TOL: f64 = 1e-6;
const STRICT_DOMINANCE: f64 = 1e-4;
const TIGHTNESS_TOL: f64 = 1e-4;
const MIN_TIGHTNESS_EVENTS: usize = 20;
const MONOTONE_TOL: f64 = 1e-6;
/// Sign checks on metric values, relative to the reference cost.
const SIGN_TOL: f64 = 1e-6;
const RELOCATION_SCALE: f64 = 1e6;
const PARALLEL_TOL: f64 = 1e-6;
const PARTITION_CASES: usize = 1000;
const CALIBRATION_SEEDS: u64 = 100;
const CALIBRATION_PATHS: usize = 100;
const CALIBRATION_MIN_COVER: usize = 93;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn backend() -> HighsBackend {
    HighsBackend::with_gap(1e-9)
}

struct Tiny {
    seed: u64,
    inst: Instance,
    tree: ScenarioTree,
    oracle: f64,
}

fn tiny(seed: u64) -> Tiny {
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
    let oracle = oracle_value(
        &backend(),
        &inst,
        &tree,
        &FormulationOptions::for_instance(&inst),
    )
    .unwrap();
    Tiny {
        seed,
        inst,
        tree,
        oracle,
    }
}

fn config(seed: u64, preset: &str) -> SddipConfig {
    SddipConfig {
        forward_samples: FORWARD_SAMPLES,
        gap_tolerance: GAP_TOL,
        preset: preset.parse::<CutPreset>().unwrap(),
        seed,
        ..SddipConfig::default()
    }
}

fn solve(t: &Tiny, cfg: SddipConfig) -> (SddipResult, Duration) {
    let be = backend();
    let workers = cfg.workers;
    let t0 = Instant::now();
    let mut s = Sddip::new(&t.inst, &t.tree, &be, cfg).unwrap();
    let r = s
        .run(&ThreadedExecutor::new(workers), &NoClock, &mut |_| {})
        .unwrap();
    (r, t0.elapsed())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

struct Shared {
    tiny: Vec<Tiny>,
    /// Default alternating SIM+I runs.
    runs: Vec<(SddipResult, Duration)>,
}

type Verdict = (bool, String);

fn c1(s: &Shared) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (t, (r, d)) in s.tiny.iter().zip(&s.runs) {
        let lb_err = (t.oracle - r.lower_bound) / t.oracle;
        let pass = r.status == RunStatus::Converged
            && r.gap <= GAP_TOL
            && lb_err.abs() <= GAP_TOL
            && *d < RUN_TIME_LIMIT;
        ok &= pass;
        parts.push(format!(
            "seed {} gap {:.3}% lb-err {:.2e} {:.1}s",
            t.seed,
            100.0 * r.gap,
            lb_err,
            d.as_secs_f64()
        ));
    }
    (ok, parts.join("; "))
}

fn c2() -> Verdict {
    let be = backend();
    let t = tiny(2);
    let opts = FormulationOptions::for_instance(&t.inst);
    let states = enumerate_states(&t.inst);
    let horizon = t.inst.horizon;
    // Oracle cost-to-go for every stage and binary state.
    let ctg: Vec<Vec<f64>> = (1..horizon)
        .map(|stage| {
            states
                .iter()
                .map(|y| {
                    let f = build_cost_to_go(&t.inst, &t.tree, stage, y, &opts).unwrap();
                    solve_form(&be, &f).unwrap().objective
                })
                .collect()
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for family in CutFamily::ALL {
        let cfg = SddipConfig {
            forward_samples: 5,
            preset: CutPreset::single(family),
            alternating: false,
            seed: 7,
            ..SddipConfig::default()
        };
        let mut sd = Sddip::new(&t.inst, &t.tree, &be, cfg).unwrap();
        for _ in 0..3 {
            sd.iterate(&Sequential, &NoClock).unwrap();
        }
        let mut cuts = 0;
        let mut worst = f64::NEG_INFINITY;
        for pool in &sd.pools {
            for cut in &pool.cuts {
                cuts += 1;
                for (k, y) in states.iter().enumerate() {
                    let q = ctg[pool.stage - 1][k];
                    worst = worst.max((cut.evaluate(y) - q) / q.abs().max(1.0));
                }
            }
        }
        let pass = cuts > 0 && worst <= CUT_TOL;
        ok &= pass;
        parts.push(format!(
            "{} {cuts} cuts max-excess {worst:.1e}",
            family.label()
        ));
    }
    (ok, format!("{} states; {}", states.len(), parts.join(", ")))
}

fn c3(s: &Shared) -> Verdict {
    let mut events = Vec::new();
    for (t, (r, _)) in s.tiny.iter().zip(&s.runs) {
        events.extend(
            r.events
                .iter()
                .filter(|e| e.family == CutFamily::StrengthenedIndependentMw)
                .cloned(),
        );
        let (spt, _) = solve(t, config(t.seed, "SPT+I"));
        events.extend(
            spt.events
                .into_iter()
                .filter(|e| e.family == CutFamily::StrengthenedPareto),
        );
    }
    let mut checked = 0;
    let mut violations = 0;
    let mut strict = 0;
    let mut fractional = 0;
    for e in &events {
        let (Some(c), Some(v)) = (e.classical, e.strengthened) else {
            continue;
        };
        checked += 1;
        if v < c - DOMINANCE_TOL * c.abs().max(1.0) {
            violations += 1;
        }
        if e.fractional {
            fractional += 1;
            if v - c > STRICT_DOMINANCE {
                strict += 1;
            }
        }
    }
    let ok = checked > 0 && violations == 0 && strict > 0;
    (
        ok,
        format!(
            "{checked} events, {violations} violations, {fractional} fractional, {strict} strictly dominating"
        ),
    )
}

fn c4(s: &Shared) -> Verdict {
    let mut events = Vec::new();
    for t in &s.tiny {
        let cfg = SddipConfig {
            forward_samples: 50,
            alternating: false,
            ..config(t.seed, "B+L")
        };
        let (r, _) = solve(t, cfg);
        events.extend(
            r.events
                .into_iter()
                .filter(|e| e.family == CutFamily::Lagrangian),
        );
    }
    let mut worst: f64 = 0.0;
    let mut fallbacks = 0;
    let mut bad = 0;
    for e in &events {
        let mip = e
            .child_mip
            .expect("lagrangian events carry the child value");
        let err = (e.value_at_state - mip).abs() / mip.abs().max(1.0);
        worst = worst.max(err);
        fallbacks += usize::from(e.fallback);
        bad += usize::from(err > TIGHTNESS_TOL);
    }
    let ok = events.len() >= MIN_TIGHTNESS_EVENTS && bad == 0;
    (
        ok,
        format!(
            "{} events, {bad} loose, worst rel {worst:.1e}, {fallbacks} below target",
            events.len()
        ),
    )
}

fn c5() -> Verdict {
    let be = backend();
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in [1u64, 2, 5] {
        let inst = generate_synthetic_instance(&SyntheticConfig {
            seed,
            horizon: 4,
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
        let value = |rev: RevisionSchedule| {
            oracle_value(
                &be,
                &inst,
                &tree,
                &FormulationOptions {
                    revision: rev,
                    moves: MovePolicy::Full,
                },
            )
            .unwrap()
        };
        let z_tssp = value(RevisionSchedule::first_only(4));
        let z_mssp = value(RevisionSchedule::full(4));
        let best: Vec<f64> = (1..=4)
            .map(|a| {
                schedules_of_size(4, a)
                    .into_iter()
                    .map(&value)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let monotone = best
            .windows(2)
            .all(|w| w[1] <= w[0] + MONOTONE_TOL * w[0].abs());
        let lo = vpamsp(z_tssp, best[0], z_mssp);
        let hi = vpamsp(z_tssp, best[3], z_mssp);
        let pass = monotone && lo == Some(0.0) && hi == Some(100.0);
        ok &= pass;
        let pct: Vec<String> = best
            .iter()
            .map(|&z| vpamsp(z_tssp, z, z_mssp).map_or("n/a".into(), |v| format!("{v:.1}")))
            .collect();
        parts.push(format!("seed {seed} VPAMSP% [{}]", pct.join(", ")));
    }
    (ok, parts.join("; "))
}

fn c6() -> Verdict {
    let be = backend();
    let mut ok = true;
    let mut means = Vec::new();
    let mut negative = 0;
    for lambda in [0.5, 1.0, 2.0] {
        let mut sum = 0.0;
        for seed in SEEDS {
            let inst = generate_synthetic_instance(&SyntheticConfig {
                seed,
                ..SyntheticConfig::default()
            });
            let tree = build_tree(
                &inst,
                &TreeParams {
                    seed,
                    disruption_rate: lambda,
                    ..TreeParams::default()
                },
            )
            .unwrap();
            let v = vss_suite(
                &be,
                &inst,
                &tree,
                &FormulationOptions::for_instance(&inst),
                RpSource::Oracle,
            )
            .unwrap();
            if v.vss_t < -SIGN_TOL * v.rp {
                negative += 1;
            }
            sum += v.vss_t;
        }
        means.push((lambda, sum / SEEDS.len() as f64));
    }
    ok &= negative == 0;
    ok &= means[2].1 > 0.0;
    let trend = if means.windows(2).all(|w| w[1].1 >= w[0].1) {
        "nondecreasing"
    } else {
        "not monotone"
    };
    let shown: Vec<String> = means
        .iter()
        .map(|(l, m)| format!("lambda {l}: {m:.0}"))
        .collect();
    (
        ok,
        format!(
            "{negative} negative; mean VSS_T {} ({trend})",
            shown.join(", ")
        ),
    )
}

fn c7() -> Verdict {
    let be = backend();
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in SEEDS {
        let mut inst = generate_synthetic_instance(&SyntheticConfig {
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
        let m = mobility_suite(&be, &inst, &tree).unwrap();
        let base = m.z_static.abs();
        let signs = m.vmod >= -SIGN_TOL * base && m.vmob >= -SIGN_TOL * base;
        let additive = m.vmm == m.vmod + m.vmob;
        inst.costs.unit_rent *= RELOCATION_SCALE;
        inst.costs.unit_return *= RELOCATION_SCALE;
        inst.costs.unit_move_per_hour *= RELOCATION_SCALE;
        let h = mobility_suite(&be, &inst, &tree).unwrap();
        let damped = h.vmob <= SIGN_TOL * h.z_static.abs();
        ok &= signs && additive && damped;
        parts.push(format!(
            "seed {seed} VMoD {:.0} VMoB {:.1e} costly-VMoB {:.1e}",
            m.vmod, m.vmob, h.vmob
        ));
    }
    (ok, parts.join("; "))
}

fn c8(s: &Shared) -> Verdict {
    let mut ok = true;
    let mut families = BTreeSet::new();
    let mut parts = Vec::new();
    for (t, (r, _)) in s.tiny.iter().zip(&s.runs) {
        let monotone = r
            .history
            .windows(2)
            .all(|w| w[1].lower_bound >= w[0].lower_bound);
        let (plain, _) = solve(
            t,
            SddipConfig {
                alternating: false,
                ..config(t.seed, "SIM+I")
            },
        );
        let diff = rel(r.lower_bound, plain.lower_bound);
        ok &= monotone && diff <= GAP_TOL;
        let mut mine = BTreeSet::new();
        for rec in &r.history {
            mine.extend(rec.cuts.keys().cloned());
        }
        parts.push(format!(
            "seed {} lb-diff {diff:.1e} families {:?}",
            t.seed, mine
        ));
        families.extend(mine);
    }
    let both = families.contains("SIM") && families.contains("I");
    ok &= both;
    (ok, parts.join("; "))
}

fn c9(s: &Shared) -> Verdict {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (t, (r, _)) in s.tiny.iter().zip(&s.runs) {
        for p in [2, 4] {
            let (q, _) = solve(
                t,
                SddipConfig {
                    workers: p,
                    ..config(t.seed, "SIM+I")
                },
            );
            let d = rel(q.lower_bound, r.lower_bound).max(rel(q.upper_bound, r.upper_bound));
            worst = worst.max(d);
            ok &= d <= PARALLEL_TOL;
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut partition_ok = 0;
    for _ in 0..PARTITION_CASES {
        let n = rng.random_range(0..5000usize);
        let w = rng.random_range(1..64usize);
        let parts = partition_ranges(n, w);
        let mut next = 0;
        let mut cover = true;
        for r in &parts {
            cover &= r.start == next;
            next = r.end;
        }
        cover &= next == n;
        let lens: Vec<usize> = parts.iter().map(|r| r.len()).collect();
        let spread = lens.iter().max().unwrap() - lens.iter().min().unwrap();
        partition_ok += usize::from(cover && spread <= 1);
    }
    ok &= partition_ok == PARTITION_CASES;
    (ok, format!("max bound diff {worst:.1e} over P in {{1,2,4}}; partition {partition_ok}/{PARTITION_CASES}"))
}

fn c10(s: &Shared) -> Verdict {
    let be = backend();
    let t = &s.tiny[0];
    let (r, _) = &s.runs[0];
    let opts = FormulationOptions::for_instance(&t.inst);
    let mut covered = 0;
    for seed in 0..CALIBRATION_SEEDS {
        let rep = out_of_sample_eval(
            &Sequential,
            &be,
            &t.inst,
            &t.tree,
            &opts,
            &r.pools,
            CALIBRATION_PATHS,
            0.05,
            1000 + seed,
        )
        .unwrap();
        covered += usize::from(rep.upper >= t.oracle * (1.0 - 1e-9));
    }
    (
        covered >= CALIBRATION_MIN_COVER,
        format!(
            "{covered}/{CALIBRATION_SEEDS} intervals reach the optimum (seed {})",
            t.seed
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn main() {
    let t0 = Instant::now();
    let tiny: Vec<Tiny> = SEEDS.iter().map(|&s| tiny(s)).collect();
    let runs = tiny
        .iter()
        .map(|t| solve(t, config(t.seed, "SIM+I")))
        .collect();
    let shared = Shared { tiny, runs };

    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(|| c1(&shared))),
        ("cut validity", Box::new(c2)),
        ("strengthened cut dominance", Box::new(|| c3(&shared))),
        ("lagrangian tightness", Box::new(|| c4(&shared))),
        ("revision monotonicity", Box::new(c5)),
        ("value of the stochastic solution", Box::new(c6)),
        ("mobility decomposition", Box::new(c7)),
        ("alternation and bounds", Box::new(|| c8(&shared))),
        ("parallel contract", Box::new(|| c9(&shared))),
        ("upper bound calibration", Box::new(|| c10(&shared))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) =
            catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| (false, "panicked".to_string()));
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!(
        "acceptance: {} of {} passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
