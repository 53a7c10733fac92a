//! Archive metrics, measure-based retrieval, and target selection.

use serde::{Deserialize, Serialize};

use crate::qd::archive::{archive_index, Elite, GridArchive};
use crate::scenario::Scenario;
use crate::sim::MeasureValues;

/// Fraction of cells holding an elite.
pub fn coverage(archive: &GridArchive) -> f64 {
    archive.len() as f64 / archive.spec().total_cells() as f64
}

/// Sum of elite objectives.
pub fn qd_score(archive: &GridArchive) -> f64 {
    archive.elites().map(|e| e.objective).sum()
}

/// Mean elite objective. `empty` flags the zero returned for an empty archive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanObjective {
    pub value: f64,
    pub empty: bool,
}

pub fn mean_objective(archive: &GridArchive) -> MeanObjective {
    if archive.is_empty() {
        MeanObjective {
            value: 0.0,
            empty: true,
        }
    } else {
        MeanObjective {
            value: qd_score(archive) / archive.len() as f64,
            empty: false,
        }
    }
}

/// One line of a metric log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub evaluations: u64,
    pub coverage: f64,
    pub mean_objective: f64,
    pub qd_score: f64,
}

impl MetricRow {
    pub fn from_archive(archive: &GridArchive) -> Self {
        Self {
            evaluations: archive.evaluations(),
            coverage: coverage(archive),
            mean_objective: mean_objective(archive).value,
            qd_score: qd_score(archive),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieveMode {
    /// The elite in the query's own cell, if any.
    Exact,
    /// The elite whose cell centre is closest in normalised measure space.
    Nearest,
}

/// Look up a scenario by behaviour.
pub fn retrieve<'a>(
    archive: &'a GridArchive,
    query: &MeasureValues,
    mode: RetrieveMode,
) -> Option<&'a Elite> {
    let spec = archive.spec();
    let cell = archive_index(query, spec);
    match mode {
        RetrieveMode::Exact => archive.get(cell),
        RetrieveMode::Nearest => {
            let centre = spec.cell_center(cell);
            let mut best: Option<(f64, &Elite)> = None;
            // Lexicographic iteration plus strict `<` keeps the smallest index on ties.
            for elite in archive.elites() {
                let other = spec.cell_center(elite.cell);
                let d: f64 = centre
                    .iter()
                    .zip(&other)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, elite));
                }
            }
            best.map(|(_, e)| e)
        }
    }
}

/// Background vehicles closest to the ego on average, nearest first.
pub fn select_targets(scenario: &Scenario, k: usize) -> Vec<usize> {
    let steps = scenario.states.len() as f64;
    let mut means: Vec<(usize, f64)> = (1..scenario.vehicle_count())
        .map(|i| {
            let total: f64 = scenario
                .states
                .iter()
                .map(|row| row[0].distance_to(&row[i]))
                .sum();
            (i, total / steps)
        })
        .collect();
    // Stable sort keeps lower indices first on ties.
    means.sort_by(|a, b| a.1.total_cmp(&b.1));
    means.into_iter().take(k).map(|(i, _)| i).collect()
}
