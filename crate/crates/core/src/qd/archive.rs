//! Grid archive over the three-dimensional measure space.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CadreError, Result};
use crate::sim::MeasureValues;

pub type CellIndex = [usize; 3];

/// Range and resolution of one measure axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureAxis {
    pub lower: f64,
    pub upper: f64,
    pub cells: usize,
}

impl MeasureAxis {
    pub fn new(lower: f64, upper: f64, cells: usize) -> Self {
        Self {
            lower,
            upper,
            cells,
        }
    }

    pub fn index(&self, value: f64) -> usize {
        let clipped = value.clamp(self.lower, self.upper);
        let scaled = (clipped - self.lower) / (self.upper - self.lower) * self.cells as f64;
        // NaN casts to 0.
        (scaled.floor() as usize).min(self.cells - 1)
    }

    /// Position of `value` scaled to `[0, 1]` after clipping.
    pub fn normalize(&self, value: f64) -> f64 {
        (value.clamp(self.lower, self.upper) - self.lower) / (self.upper - self.lower)
    }

    pub fn cell_center(&self, index: usize) -> f64 {
        (index as f64 + 0.5) / self.cells as f64
    }
}

/// Discretisation of (m1, m2, m3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub axes: [MeasureAxis; 3],
}

impl Default for MeasureSpec {
    /// 10 × 20 × 20 cells over m1 ∈ [0, π/8], m2 ∈ [0, 1], m3 ∈ [-π, π].
    fn default() -> Self {
        Self {
            axes: [
                MeasureAxis::new(0.0, PI / 8.0, 10),
                MeasureAxis::new(0.0, 1.0, 20),
                MeasureAxis::new(-PI, PI, 20),
            ],
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("[{}, {}]x{}", a.lower, a.upper, a.cells))
            .collect();
        write!(f, "{}", parts.join(" * "))
    }
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        for axis in &self.axes {
            let ordered =
                axis.lower.is_finite() && axis.upper.is_finite() && axis.lower < axis.upper;
            if !ordered || axis.cells == 0 {
                return Err(CadreError::InvalidConfig(format!(
                    "invalid measure axis {axis:?}: need lower < upper and at least one cell"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.axes.map(|a| a.cells)
    }

    /// Total number of cells.
    pub fn total_cells(&self) -> usize {
        self.dims().iter().product()
    }

    /// Row-major flat index; flat order equals lexicographic cell order.
    pub fn flat(&self, cell: CellIndex) -> usize {
        let [_, d2, d3] = self.dims();
        (cell[0] * d2 + cell[1]) * d3 + cell[2]
    }

    pub fn unflat(&self, flat: usize) -> CellIndex {
        let [_, d2, d3] = self.dims();
        [flat / (d2 * d3), (flat / d3) % d2, flat % d3]
    }

    pub fn normalize(&self, m: &MeasureValues) -> [f64; 3] {
        let v = m.as_array();
        [0, 1, 2].map(|k| self.axes[k].normalize(v[k]))
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 3] {
        [0, 1, 2].map(|k| self.axes[k].cell_center(cell[k]))
    }
}

/// Cell of a measure triple; out-of-range values are clipped into bounds.
pub fn archive_index(m: &MeasureValues, spec: &MeasureSpec) -> CellIndex {
    let v = m.as_array();
    [0, 1, 2].map(|k| spec.axes[k].index(v[k]))
}

/// Best solution found for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub theta: Vec<f64>,
    #[serde(rename = "f")]
    pub objective: f64,
    #[serde(rename = "m")]
    pub measures: MeasureValues,
    pub cell: CellIndex,
    /// Value of the archive's evaluation counter when this elite was inserted.
    pub discovered_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InsertResult {
    NewCell { delta: f64 },
    Improved { delta: f64 },
    Rejected,
}

impl InsertResult {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, InsertResult::Rejected)
    }
}

/// Dense MAP-Elites grid. Cells only ever gain or improve elites.
#[derive(Debug, Clone, PartialEq)]
pub struct GridArchive {
    spec: MeasureSpec,
    cells: Vec<Option<Elite>>,
    occupied: usize,
    evaluations: u64,
    insertions: u64,
}

impl GridArchive {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            cells: vec![None; spec.total_cells()],
            occupied: 0,
            evaluations: 0,
            insertions: 0,
        })
    }

    /// Rebuild from stored elites, checking each sits in the cell its measures map to.
    pub fn from_parts(
        spec: MeasureSpec,
        elites: Vec<Elite>,
        evaluations: u64,
        insertions: u64,
    ) -> Result<Self> {
        let mut archive = Self::new(spec)?;
        for elite in elites {
            let expected = archive_index(&elite.measures, &spec);
            if elite.cell != expected {
                return Err(CadreError::InvalidConfig(format!(
                    "elite stored in cell {:?} but its measures map to {:?}",
                    elite.cell, expected
                )));
            }
            let flat = spec.flat(expected);
            if archive.cells[flat].is_some() {
                return Err(CadreError::InvalidConfig(format!(
                    "duplicate elite for cell {expected:?}"
                )));
            }
            archive.cells[flat] = Some(elite);
            archive.occupied += 1;
        }
        archive.evaluations = evaluations;
        archive.insertions = insertions;
        Ok(archive)
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    /// Offer a solution. Ties with the stored objective are rejected.
    pub fn insert(
        &mut self,
        theta: &[f64],
        objective: f64,
        measures: MeasureValues,
    ) -> InsertResult {
        self.evaluations += 1;
        let cell = archive_index(&measures, &self.spec);
        let slot = &mut self.cells[self.spec.flat(cell)];
        let result = match slot {
            None => InsertResult::NewCell { delta: objective },
            Some(current) if objective > current.objective => InsertResult::Improved {
                delta: objective - current.objective,
            },
            Some(_) => return InsertResult::Rejected,
        };
        if slot.is_none() {
            self.occupied += 1;
        }
        *slot = Some(Elite {
            theta: theta.to_vec(),
            objective,
            measures,
            cell,
            discovered_at: self.evaluations,
        });
        self.insertions += 1;
        result
    }

    pub fn get(&self, cell: CellIndex) -> Option<&Elite> {
        if cell.iter().zip(self.spec.dims()).any(|(&i, d)| i >= d) {
            return None;
        }
        self.cells[self.spec.flat(cell)].as_ref()
    }

    pub fn get_flat(&self, flat: usize) -> Option<&Elite> {
        self.cells.get(flat).and_then(Option::as_ref)
    }

    pub fn is_occupied_flat(&self, flat: usize) -> bool {
        self.cells[flat].is_some()
    }

    /// Elites in lexicographic cell order.
    pub fn elites(&self) -> impl Iterator<Item = &Elite> {
        self.cells.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// Number of insert attempts.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Number of accepted inserts (new cells plus improvements).
    pub fn insertions(&self) -> u64 {
        self.insertions
    }
}
