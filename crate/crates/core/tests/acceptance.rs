//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! The method comparison runs every method on the five background vehicles
//! nearest the ego in the cross-turn scene and averages per-target metrics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cadre_core::baselines::{run_baseline, sample_uniform};
use cadre_core::qd::{sample_restart, MeasureAxis};
use cadre_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BUDGET: usize = 20_000;
const SEEDS: u64 = 5;
const TARGETS: usize = 5;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn check(&mut self, name: &'static str, passed: bool, elapsed: Duration, detail: String) {
        let status = if passed { "PASS" } else { "FAIL" };
        println!("{status} {name} ({:.1?}): {detail}", elapsed);
        if !passed {
            self.failed.push(name);
        }
    }
}

fn kinematics_round_trip(report: &mut Report) {
    let start = Instant::now();
    let bounds = PerturbationBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut pos_err, mut act_err) = (0.0f64, 0.0f64);
    let mut sequences = 0;
    let mut redrawn = 0;
    for kind in SceneKind::ALL {
        let scene = make_synthetic_scene(kind, 0).unwrap();
        let wheelbase = scene.geometries[0].wheelbase;
        // Recorded trajectories themselves.
        for i in 0..scene.vehicle_count() {
            let traj = scene.trajectory(i);
            let actions = recover_actions(&traj, wheelbase, scene.dt).unwrap();
            for (a, b) in rollout(traj[0], &actions, wheelbase, scene.dt)
                .iter()
                .zip(&traj)
            {
                pos_err = pos_err.max(a.distance_to(b));
            }
        }
        while sequences < 1000 * (kind as usize + 1) {
            let vehicle = 1 + sequences % scene.background_count();
            let traj = scene.trajectory(vehicle);
            let base = recover_actions(&traj, wheelbase, scene.dt).unwrap();
            let theta = sample_uniform(2 * base.len(), &bounds, &mut rng);
            let actions =
                apply_perturbation(&base, &Perturbation::from_flat(&theta, vehicle), &bounds)
                    .unwrap();
            let states = rollout(traj[0], &actions, wheelbase, scene.dt);
            // Steering is unobservable below the recovery speed threshold.
            if states.iter().any(|s| s.v.abs() < 0.1) {
                redrawn += 1;
                continue;
            }
            sequences += 1;
            let recovered = recover_actions(&states, wheelbase, scene.dt).unwrap();
            for (a, b) in recovered.iter().zip(&actions) {
                act_err = act_err
                    .max((a.accel - b.accel).abs())
                    .max((a.steer - b.steer).abs());
            }
            for (a, b) in rollout(traj[0], &recovered, wheelbase, scene.dt)
                .iter()
                .zip(&states)
            {
                pos_err = pos_err.max(a.distance_to(b));
            }
        }
    }
    let elapsed = start.elapsed();
    report.check(
        "kinematics-round-trip",
        pos_err <= 1e-6 && act_err <= 1e-9 && elapsed < Duration::from_secs(10),
        elapsed,
        format!("{sequences} sequences ({redrawn} redrawn), max position error {pos_err:.2e} m, max action error {act_err:.2e}"),
    );
}

fn objective_measure_ranges(report: &mut Report) {
    let start = Instant::now();
    let bounds = PerturbationBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = true;
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for kind in SceneKind::ALL {
        let scene = make_synthetic_scene(kind, 0).unwrap();
        let targets = select_targets(&scene, TARGETS);
        let sims: Vec<Simulator> = targets
            .iter()
            .map(|&t| Simulator::new(&scene, t, EgoPolicyConfig::default(), bounds).unwrap())
            .collect();
        for i in 0..1000 {
            let sim = &sims[i % sims.len()];
            let theta = sample_uniform(sim.dimension(), &bounds, &mut rng);
            let e = sim.evaluate(&theta);
            let m = e.measures;
            ok &= (0.0..=1.0).contains(&e.objective)
                && (0.0..=PI / 8.0).contains(&m.m1)
                && (0.0..=1.0).contains(&m.m2)
                && (-PI..=PI).contains(&m.m3)
                && (e.objective == 1.0) == (e.kind == OutcomeKind::EgoCollision)
                && (e.objective == 0.0) == (e.kind == OutcomeKind::BackgroundCollision);
            *tally.entry(format!("{:?}", e.kind)).or_default() += 1;
        }
    }
    let elapsed = start.elapsed();
    report.check(
        "objective-measure-ranges",
        ok && elapsed < Duration::from_secs(60),
        elapsed,
        format!("3000 perturbations, outcomes {tally:?}"),
    );
}

fn scan_index(value: f64, axis: &MeasureAxis) -> usize {
    let v = value.max(axis.lower).min(axis.upper);
    let width = (axis.upper - axis.lower) / axis.cells as f64;
    (0..axis.cells)
        .rfind(|&i| v >= axis.lower + i as f64 * width)
        .unwrap_or(0)
}

fn archive_oracle(report: &mut Report) {
    let start = Instant::now();
    let spec = MeasureSpec::default();
    let scan = |m: &MeasureValues| [0, 1, 2].map(|d| scan_index(m.as_array()[d], &spec.axes[d]));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random_m = |rng: &mut ChaCha8Rng| {
        MeasureValues::new(
            rng.random_range(-0.05..0.45),
            rng.random_range(-0.05..1.05),
            rng.random_range(-3.3..3.3),
        )
    };

    let mut archive = GridArchive::new(spec).unwrap();
    let mut naive: BTreeMap<[usize; 3], (f64, Vec<f64>)> = BTreeMap::new();
    let mut results_match = true;
    for i in 0..10_000 {
        // Half the inserts revisit a small region so replacements happen.
        let m = if i % 2 == 0 {
            random_m(&mut rng)
        } else {
            MeasureValues::new(
                rng.random_range(0.0..0.1),
                rng.random_range(0.0..0.15),
                rng.random_range(0.0..0.9),
            )
        };
        let f: f64 = (rng.random_range(0..1000) as f64) / 1000.0;
        let theta = vec![i as f64, f];
        let cell = scan(&m);
        let expected = match naive.get(&cell) {
            None => InsertResult::NewCell { delta: f },
            Some((old, _)) if f > *old => InsertResult::Improved { delta: f - old },
            Some(_) => InsertResult::Rejected,
        };
        if expected.is_accepted() {
            naive.insert(cell, (f, theta.clone()));
        }
        results_match &= archive.insert(&theta, f, m) == expected;
    }
    let fast: Vec<([usize; 3], f64, Vec<f64>)> = archive
        .elites()
        .map(|e| (e.cell, e.objective, e.theta.clone()))
        .collect();
    let slow: Vec<([usize; 3], f64, Vec<f64>)> =
        naive.into_iter().map(|(c, (f, t))| (c, f, t)).collect();
    let contents_match = fast == slow;

    let mut index_mismatches = 0;
    for _ in 0..10_000 {
        let m = random_m(&mut rng);
        if archive_index(&m, &spec) != scan(&m) {
            index_mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    report.check(
        "archive-oracle",
        results_match && contents_match && index_mismatches == 0 && elapsed < Duration::from_secs(5),
        elapsed,
        format!(
            "{} elites, insert results match: {results_match}, contents match: {contents_match}, index mismatches: {index_mismatches}",
            archive.len()
        ),
    );
}

fn oar_distribution(report: &mut Report) {
    let start = Instant::now();
    let spec = MeasureSpec::default();
    let mut archive = GridArchive::new(spec).unwrap();
    let centre = |c: [usize; 3]| {
        let m = [0, 1, 2].map(|d| {
            spec.axes[d].lower
                + (c[d] as f64 + 0.5) / spec.axes[d].cells as f64
                    * (spec.axes[d].upper - spec.axes[d].lower)
        });
        MeasureValues::new(m[0], m[1], m[2])
    };
    // Isolated interior, corner, an adjacent pair and an edge cell: rates 1, 1, 25/26, 25/26, 1.
    for cell in [[4, 10, 10], [0, 0, 0], [7, 3, 15], [7, 4, 15], [9, 19, 5]] {
        archive.insert(&[0.0], 0.5, centre(cell));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = 10_000;
    let flat_config = OarConfig {
        temperature: 1e6,
        radius: 1,
    };
    let mut counts: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    for _ in 0..draws {
        let elite = cadre_core::qd::oar_restart(&archive, &flat_config, &mut rng).unwrap();
        *counts.entry(elite.cell).or_default() += 1;
    }
    let k = archive.len() as f64;
    let tv: f64 = archive
        .elites()
        .map(|e| (counts.get(&e.cell).copied().unwrap_or(0) as f64 / draws as f64 - 1.0 / k).abs())
        .sum::<f64>()
        / 2.0;

    let first = (0..draws)
        .filter(|_| sample_restart(&[1.0, 0.5], 0.1, &mut rng) == 0)
        .count() as f64
        / draws as f64;
    let elapsed = start.elapsed();
    report.check(
        "oar-distribution",
        tv <= 0.05 && (0.98..=1.0).contains(&first) && elapsed < Duration::from_secs(5),
        elapsed,
        format!("TV from uniform at tau=1e6: {tv:.4}; first-elite frequency at tau=0.1: {first:.4} (analytic 0.9933)"),
    );
}

fn determinism(report: &mut Report) {
    let start = Instant::now();
    let scene = make_synthetic_scene(SceneKind::CrossTurn, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for method in [Method::Cadre, Method::Random, Method::Cmaes] {
        let config = RunConfig {
            scenario: "cross-turn.json".into(),
            method,
            budget: 1500,
            seed: 11,
            ..RunConfig::default()
        };
        let target = config.targets(&scene).unwrap()[0];
        let mut bytes = Vec::new();
        for run in 0..2 {
            let out = config.run(&scene, target).unwrap();
            let path = dir.path().join(format!("{method}-{run}.cadre.json"));
            save_archive(&out.archive, &config.archive_meta(&scene, target), &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        identical &= bytes[0] == bytes[1];
    }
    let elapsed = start.elapsed();
    report.check(
        "determinism",
        identical,
        elapsed,
        format!("cadre/random/cmaes archives byte-identical across repeated runs: {identical}"),
    );
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Arm {
    Cadre,
    UniformRestart,
    Random,
    CmaEs,
}

fn run_arm(arm: Arm, scene: &Scenario, target: usize, seed: u64) -> RunOutput {
    match arm {
        Arm::Cadre | Arm::UniformRestart => {
            let oar = if arm == Arm::Cadre {
                OarConfig::default()
            } else {
                OarConfig::uniform()
            };
            run_cadre(
                scene,
                target,
                &CadreConfig {
                    budget: BUDGET,
                    seed,
                    oar,
                    ..Default::default()
                },
            )
            .unwrap()
        }
        Arm::Random | Arm::CmaEs => {
            let method = if arm == Arm::Random {
                BaselineMethod::Random
            } else {
                BaselineMethod::CmaEs
            };
            run_baseline(
                scene,
                target,
                &BaselineConfig {
                    budget: BUDGET,
                    seed,
                    ..BaselineConfig::new(method)
                },
            )
            .unwrap()
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn method_comparison(report: &mut Report) {
    let start = Instant::now();
    let scene = make_synthetic_scene(SceneKind::CrossTurn, 0).unwrap();
    let targets = select_targets(&scene, TARGETS);
    let arms = [Arm::Cadre, Arm::UniformRestart, Arm::Random, Arm::CmaEs];
    // Per arm and seed: mean coverage and mean QD score over targets.
    let mut results: BTreeMap<Arm, Vec<(f64, f64)>> = BTreeMap::new();
    let mut arm_time: BTreeMap<Arm, Duration> = BTreeMap::new();
    let mut monotone = true;
    let mut max_qd = 0.0f64;
    let mut logs = 0;
    for arm in arms {
        let arm_start = Instant::now();
        for seed in 0..SEEDS {
            let (mut cov, mut qd) = (0.0, 0.0);
            for &target in &targets {
                let out = run_arm(arm, &scene, target, seed);
                logs += 1;
                monotone &= out
                    .log
                    .windows(2)
                    .all(|w| w[1].coverage >= w[0].coverage && w[1].qd_score >= w[0].qd_score);
                max_qd = out.log.iter().map(|r| r.qd_score).fold(max_qd, f64::max);
                cov += coverage(&out.archive) / targets.len() as f64;
                qd += qd_score(&out.archive) / targets.len() as f64;
            }
            results.entry(arm).or_default().push((cov, qd));
        }
        arm_time.insert(arm, arm_start.elapsed());
    }
    let med =
        |arm: Arm, pick: fn(&(f64, f64)) -> f64| median(results[&arm].iter().map(pick).collect());
    let cov = |p: &(f64, f64)| p.0;
    let qd = |p: &(f64, f64)| p.1;
    for arm in arms {
        println!(
            "     {arm:?}: per-seed (coverage, QD) {:?}, {:.1?}",
            results[&arm]
                .iter()
                .map(|(c, q)| (format!("{c:.4}"), format!("{q:.1}")))
                .collect::<Vec<_>>(),
            arm_time[&arm]
        );
    }
    let per_method_limit = Duration::from_secs(600);

    report.check(
        "monotonicity",
        monotone && max_qd <= 4000.0,
        start.elapsed(),
        format!("{logs} run logs nondecreasing in coverage and QD: {monotone}; max QD {max_qd:.1} <= 4000"),
    );

    let coverage_ratio = med(Arm::Cadre, cov) / med(Arm::Random, cov);
    let qd_ratio = med(Arm::Cadre, qd) / med(Arm::CmaEs, qd);
    let within_time = [Arm::Cadre, Arm::Random, Arm::CmaEs]
        .iter()
        .all(|a| arm_time[a] < per_method_limit);
    report.check(
        "method-comparison",
        coverage_ratio >= 1.5 && qd_ratio >= 1.5 && within_time,
        start.elapsed(),
        format!(
            "median coverage CaDRE/Random = {:.4}/{:.4} = {coverage_ratio:.2}x; median QD CaDRE/CMA-ES = {:.1}/{:.1} = {qd_ratio:.2}x (need >= 1.5x)",
            med(Arm::Cadre, cov),
            med(Arm::Random, cov),
            med(Arm::Cadre, qd),
            med(Arm::CmaEs, qd)
        ),
    );

    let oar_ratio = med(Arm::Cadre, qd) / med(Arm::UniformRestart, qd);
    report.check(
        "oar-ablation",
        oar_ratio >= 0.95,
        start.elapsed(),
        format!(
            "median QD tau=0.1 / tau=inf = {:.1}/{:.1} = {oar_ratio:.3}x (need >= 0.95x)",
            med(Arm::Cadre, qd),
            med(Arm::UniformRestart, qd)
        ),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: Vec::new() };
    kinematics_round_trip(&mut report);
    objective_measure_ranges(&mut report);
    archive_oracle(&mut report);
    oar_distribution(&mut report);
    determinism(&mut report);
    method_comparison(&mut report);
    if report.failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {:?}", report.failed);
        ExitCode::FAILURE
    }
}
