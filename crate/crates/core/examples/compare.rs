//! Compare every optimizer on one synthetic scene and target.
//!
//! Usage: `cargo run --release -p cadre-core --example compare -- [KIND] [BUDGET] [SEEDS] [RANK]`
//! where RANK picks among the five background vehicles nearest the ego.

use std::time::Instant;

use cadre_core::baselines::run_baseline;
use cadre_core::*;

/// A deferred optimizer run.
type Run<'a> = Box<dyn Fn() -> Result<RunOutput> + 'a>;

fn arg<T: std::str::FromStr>(n: usize, default: T) -> T {
    std::env::args()
        .nth(n)
        .map(|s| {
            s.parse()
                .unwrap_or_else(|_| panic!("cannot parse argument {n}: {s:?}"))
        })
        .unwrap_or(default)
}

fn main() {
    let kind = arg(1, SceneKind::CrossTurn);
    let budget = arg(2, 20_000usize);
    let seeds = arg(3, 1u64);
    let rank = arg(4, 0usize);

    let scene = make_synthetic_scene(kind, 0).expect("scene builds");
    let targets = select_targets(&scene, 5);
    let target = targets[rank];
    println!(
        "{}: {} vehicles, nearest {targets:?}, perturbing {target}",
        scene.id,
        scene.vehicle_count()
    );

    for seed in 0..seeds {
        let cadre = |oar| CadreConfig {
            budget,
            seed,
            oar,
            ..Default::default()
        };
        let baseline = |method| BaselineConfig {
            budget,
            seed,
            ..BaselineConfig::new(method)
        };
        let runs: [(&str, Run); 4] = [
            (
                "cadre",
                Box::new(|| run_cadre(&scene, target, &cadre(OarConfig::default()))),
            ),
            (
                "uniform",
                Box::new(|| run_cadre(&scene, target, &cadre(OarConfig::uniform()))),
            ),
            (
                "random",
                Box::new(|| run_baseline(&scene, target, &baseline(BaselineMethod::Random))),
            ),
            (
                "cmaes",
                Box::new(|| run_baseline(&scene, target, &baseline(BaselineMethod::CmaEs))),
            ),
        ];
        for (name, run) in runs {
            let start = Instant::now();
            let out = run().expect("run succeeds");
            let row = MetricRow::from_archive(&out.archive);
            println!(
                "seed {seed} {name:8} coverage {:.4} qd {:8.2} mean {:.3} restarts {:4} in {:.1?}",
                row.coverage,
                row.qd_score,
                row.mean_objective,
                out.restarts,
                start.elapsed()
            );
        }
    }
}
