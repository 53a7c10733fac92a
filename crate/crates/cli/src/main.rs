//! `cadre` command-line tool: generate archives, query them, and export them
//! for plotting.
//!
//! Exit status is 0 on success, 1 for usage or validation errors and 2 for
//! filesystem errors. Every subcommand finishes all validation and computation
//! before it creates a file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cadre_core::qd::oar::parse_temperature;
use cadre_core::{
    load_archive, load_scenario, make_synthetic_scene, retrieve, save_archive, save_scenario,
    select_targets, write_archive_export, write_metrics_csv, write_trajectory_export, CadreError,
    Elite, GridArchive, MeasureValues, Method, MetricRow, Perturbation, RetrieveMode, RunConfig,
    SceneKind, Simulator, TargetSelection,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "cadre",
    version,
    about = "Quality-diversity generation of safety-critical driving scenarios"
)]
struct Cli {
    /// Worker threads for batch evaluation; 0 uses every available core.
    #[arg(long, global = true, env = "CADRE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one optimizer per configured target and write its archive and metric log.
    Generate(GenerateArgs),
    /// Look up the elite matching a behaviour query.
    Retrieve(RetrieveArgs),
    /// Print the metric row of a saved archive.
    Metrics {
        /// Archive file (`.cadre.json`).
        archive: PathBuf,
    },
    /// Write CSV files for plotting: every elite, and optionally one replayed scenario.
    Export(ExportArgs),
    /// Build a synthetic scenario and write it as JSON.
    MakeScene {
        #[arg(long, value_enum)]
        kind: SceneKindArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `<kind>-<seed>.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the background vehicles nearest the ego on average, nearest first.
    SelectTargets {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Number of vehicles to list.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Run configuration (JSON); the flags below override its values.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Restart temperature; `inf` gives uniform restarts.
    #[arg(long, value_parser = parse_tau)]
    tau: Option<f64>,
    /// Target vehicle index or `auto-top-K`.
    #[arg(long)]
    target: Option<String>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct Query {
    /// Mean steering perturbation magnitude, radians.
    #[arg(long, allow_negative_numbers = true)]
    m1: f64,
    /// Impact time as a fraction of the horizon.
    #[arg(long, allow_negative_numbers = true)]
    m2: f64,
    /// Bearing of the target from the ego at impact, radians.
    #[arg(long, allow_negative_numbers = true)]
    m3: f64,
    /// `exact` looks in the query's cell only; `nearest` falls back to the closest occupied cell.
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
}

impl Query {
    fn measures(&self) -> MeasureValues {
        MeasureValues::new(self.m1, self.m2, self.m3)
    }
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Archive file (`.cadre.json`).
    archive: PathBuf,
    #[command(flatten)]
    query: Query,
    /// Directory for `retrieved.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Archive file (`.cadre.json`).
    archive: PathBuf,
    /// Directory for the CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Scenario the archive was generated from; needed for the trajectory replay.
    #[arg(long, requires = "m1")]
    scenario: Option<PathBuf>,
    /// Query for the elite to replay; see `retrieve`.
    #[arg(long, allow_negative_numbers = true, requires_all = ["m2", "m3", "scenario"])]
    m1: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "m1")]
    m2: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "m1")]
    m3: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    Cadre,
    Random,
    Cmaes,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cadre => Method::Cadre,
            MethodArg::Random => Method::Random,
            MethodArg::Cmaes => Method::Cmaes,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Exact,
    Nearest,
}

impl From<ModeArg> for RetrieveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => RetrieveMode::Exact,
            ModeArg::Nearest => RetrieveMode::Nearest,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SceneKindArg {
    CrossTurn,
    LaneChange,
    UTurn,
}

impl From<SceneKindArg> for SceneKind {
    fn from(k: SceneKindArg) -> Self {
        match k {
            SceneKindArg::CrossTurn => SceneKind::CrossTurn,
            SceneKindArg::LaneChange => SceneKind::LaneChange,
            SceneKindArg::UTurn => SceneKind::UTurn,
        }
    }
}

fn parse_tau(text: &str) -> Result<f64, String> {
    parse_temperature(text).ok_or_else(|| format!("invalid temperature {text:?}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<(), CadreError> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Retrieve(args) => retrieve_cmd(args),
        Command::Metrics { archive } => {
            let (archive, _) = load_archive(&archive, None)?;
            println!("{}", json!(MetricRow::from_archive(&archive)));
            Ok(())
        }
        Command::Export(args) => export(args),
        Command::MakeScene { kind, seed, out } => {
            let scene = make_synthetic_scene(kind.into(), seed)?;
            let path = out.join(format!("{}.json", scene.id));
            create_dir(&out)?;
            save_scenario(&scene, &path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::SelectTargets { scenario, k } => {
            if k == 0 {
                return Err(CadreError::InvalidConfig("k must be at least 1".into()));
            }
            let scenario = load_scenario(&scenario)?;
            let targets: Vec<String> = select_targets(&scenario, k)
                .iter()
                .map(usize::to_string)
                .collect();
            println!("{}", targets.join(" "));
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CadreError> {
    fs::create_dir_all(dir).map_err(|source| CadreError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn generate(args: GenerateArgs) -> Result<(), CadreError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    if let Some(method) = args.method {
        config.method = method.into();
    }
    if let Some(tau) = args.tau {
        config.oar.temperature = tau;
    }
    if let Some(target) = &args.target {
        config.target = target.parse()?;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    config.validate()?;
    let scenario = load_scenario(&config.scenario)?;
    let targets = config.targets(&scenario)?;
    if targets.is_empty() {
        return Err(CadreError::InvalidConfig(
            "scenario has no background vehicles".into(),
        ));
    }

    // A single explicit target writes straight into the output directory.
    let nested = matches!(config.target, TargetSelection::AutoTop(_));
    for target in targets {
        let output = config.run(&scenario, target)?;
        let dir = if nested {
            config.output_dir.join(format!("target_{target}"))
        } else {
            config.output_dir.clone()
        };
        create_dir(&dir)?;
        save_archive(
            &output.archive,
            &config.archive_meta(&scenario, target),
            dir.join("archive.cadre.json"),
        )?;
        write_metrics_csv(&output.log, dir.join("metrics.csv"))?;
        let row = MetricRow::from_archive(&output.archive);
        eprintln!(
            "target {target}: {} evaluations, coverage {:.4}, QD score {:.2}, {} restarts -> {}",
            row.evaluations,
            row.coverage,
            row.qd_score,
            output.restarts,
            dir.display()
        );
    }
    Ok(())
}

fn retrieve_cmd(args: RetrieveArgs) -> Result<(), CadreError> {
    let (archive, meta) = load_archive(&args.archive, None)?;
    let Some(elite) = retrieve(&archive, &args.query.measures(), args.query.mode.into()) else {
        println!("no elite");
        return Ok(());
    };
    let record = json!({
        "scenario_id": meta.scenario_id,
        "target": meta.target,
        "elite": elite,
    });
    create_dir(&args.out)?;
    let path = args.out.join("retrieved.json");
    let text = serde_json::to_string_pretty(&record).expect("elite serialises") + "\n";
    fs::write(&path, text).map_err(|source| CadreError::Io {
        path: path.clone(),
        source,
    })?;
    println!(
        "{}",
        json!({"cell": elite.cell, "f": elite.objective, "m": elite.measures})
    );
    Ok(())
}

/// Replay an elite with the settings recorded in the archive header.
fn replay(
    archive_path: &Path,
    scenario_path: &Path,
    elite: &Elite,
    target: usize,
    meta: &cadre_core::ArchiveMeta,
) -> Result<Vec<Vec<cadre_core::VehicleState>>, CadreError> {
    let scenario = load_scenario(scenario_path)?;
    if scenario.id != meta.scenario_id {
        return Err(CadreError::InvalidConfig(format!(
            "{} was generated from scenario {:?} but {} holds {:?}",
            archive_path.display(),
            meta.scenario_id,
            scenario_path.display(),
            scenario.id
        )));
    }
    let sim = Simulator::new(&scenario, target, meta.ego, meta.bounds)?
        .with_steering_measure(meta.steering_measure);
    if elite.theta.len() != sim.dimension() {
        return Err(CadreError::InvalidConfig(format!(
            "elite has {} coordinates but the scenario needs {}",
            elite.theta.len(),
            sim.dimension()
        )));
    }
    let result = sim.run(&Perturbation::from_flat(&elite.theta, target))?;
    Ok(sim.replay_states(&result.outcome))
}

fn export(args: ExportArgs) -> Result<(), CadreError> {
    let (archive, meta): (GridArchive, _) = load_archive(&args.archive, None)?;
    let states = match (&args.scenario, args.m1, args.m2, args.m3) {
        (Some(scenario), Some(m1), Some(m2), Some(m3)) => {
            let query = MeasureValues::new(m1, m2, m3);
            match retrieve(&archive, &query, args.mode.into()) {
                Some(elite) => Some(replay(&args.archive, scenario, elite, meta.target, &meta)?),
                None => {
                    eprintln!("no elite for the query; writing the archive export only");
                    None
                }
            }
        }
        _ => None,
    };
    create_dir(&args.out)?;
    write_archive_export(&archive, args.out.join("archive_export.csv"))?;
    if let Some(states) = states {
        write_trajectory_export(&states, args.out.join("trajectory_export.csv"))?;
    }
    Ok(())
}
