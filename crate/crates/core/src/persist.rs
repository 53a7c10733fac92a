//! File formats: scenario JSON, `.cadre.json` archives, and the CSV exports
//! consumed by plotting tools.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CadreError, Result};
use crate::metrics::MetricRow;
use crate::qd::archive::{Elite, GridArchive, MeasureSpec};
use crate::scenario::{PerturbationBounds, Scenario, VehicleState};
use crate::sim::{EgoPolicyConfig, SteeringMeasure};

pub const ARCHIVE_FORMAT: &str = "cadre-archive";
pub const ARCHIVE_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 4] = ["evaluations", "coverage", "mean_objective", "qd_score"];
pub const ARCHIVE_EXPORT_HEADER: [&str; 7] = ["i1", "i2", "i3", "m1", "m2", "m3", "f"];
pub const TRAJECTORY_EXPORT_HEADER: [&str; 6] = ["t", "vehicle", "x", "y", "psi", "v"];

fn parse_error(path: &Path, message: impl ToString) -> CadreError {
    CadreError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CadreError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CadreError::io(path, e))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let mut scenario: Scenario =
        serde_json::from_str(&read_text(path)?).map_err(|e| parse_error(path, e))?;
    scenario.fill_default_geometry();
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario).expect("scenario serialises");
    write_text(path.as_ref(), &(text + "\n"))
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Provenance stored alongside an archive; enough to replay any elite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub method: String,
    pub scenario_id: String,
    pub target: usize,
    pub bounds: PerturbationBounds,
    pub ego: EgoPolicyConfig,
    pub steering_measure: SteeringMeasure,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    spec: MeasureSpec,
    evaluations: u64,
    insertions: u64,
    occupied: usize,
    #[serde(flatten)]
    meta: ArchiveMeta,
}

#[derive(Serialize, Deserialize)]
struct ArchiveFile {
    header: Header,
    elites: Vec<Elite>,
}

pub fn save_archive(
    archive: &GridArchive,
    meta: &ArchiveMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = ArchiveFile {
        header: Header {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            spec: *archive.spec(),
            evaluations: archive.evaluations(),
            insertions: archive.insertions(),
            occupied: archive.len(),
            meta: meta.clone(),
        },
        elites: archive.elites().cloned().collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("archive serialises");
    write_text(path.as_ref(), &(text + "\n"))
}

/// Load an archive, optionally requiring a particular measure spec.
pub fn load_archive(
    path: impl AsRef<Path>,
    expected: Option<&MeasureSpec>,
) -> Result<(GridArchive, ArchiveMeta)> {
    let path = path.as_ref();
    let file: ArchiveFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| parse_error(path, e))?;
    let header = file.header;
    if header.format != ARCHIVE_FORMAT || header.version != ARCHIVE_VERSION {
        return Err(parse_error(
            path,
            format!(
                "unsupported archive format {} v{}",
                header.format, header.version
            ),
        ));
    }
    if let Some(expected) = expected {
        if header.spec != *expected {
            return Err(CadreError::SpecMismatch {
                found: header.spec.to_string(),
                expected: expected.to_string(),
            });
        }
    }
    if header.occupied != file.elites.len() {
        return Err(parse_error(
            path,
            format!(
                "header lists {} elites but file has {}",
                header.occupied,
                file.elites.len()
            ),
        ));
    }
    let archive = GridArchive::from_parts(
        header.spec,
        file.elites,
        header.evaluations,
        header.insertions,
    )
    .map_err(|e| parse_error(path, e))?;
    Ok((archive, header.meta))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| CadreError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file)))
}

fn csv_error(path: &Path, e: csv::Error) -> CadreError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CadreError::io(path, io),
        other => parse_error(path, format!("{other:?}")),
    }
}

fn finish<W: Write>(path: &Path, mut writer: csv::Writer<W>) -> Result<()> {
    writer.flush().map_err(|e| CadreError::io(path, e))
}

pub fn write_metrics_csv(rows: &[MetricRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(parse_error(
            path,
            format!("unexpected metrics header {header:?}"),
        ));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// One row per elite: cell index, measures, objective.
pub fn write_archive_export(archive: &GridArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(ARCHIVE_EXPORT_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for e in archive.elites() {
        let [i1, i2, i3] = e.cell;
        let m = e.measures;
        w.serialize((i1, i2, i3, m.m1, m.m2, m.m3, e.objective))
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `states[t][vehicle]` as long-format rows.
pub fn write_trajectory_export(states: &[Vec<VehicleState>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_EXPORT_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (t, row) in states.iter().enumerate() {
        for (vehicle, s) in row.iter().enumerate() {
            w.serialize((t, vehicle, s.x, s.y, s.psi, s.v))
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}
