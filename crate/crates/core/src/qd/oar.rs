//! Occupancy-aware restart: pick the restart elite by a softmax over how empty
//! its grid neighbourhood is.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CadreError, Result};
use crate::qd::archive::{Elite, GridArchive};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OarConfig {
    /// Softmax temperature; `f64::INFINITY` means uniform restarts.
    #[serde(
        serialize_with = "ser_temperature",
        deserialize_with = "de_temperature"
    )]
    pub temperature: f64,
    /// Neighbourhood half-width in cells.
    pub radius: usize,
}

impl Default for OarConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            radius: 1,
        }
    }
}

impl OarConfig {
    pub fn uniform() -> Self {
        Self {
            temperature: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature > 0.0 {
            Ok(())
        } else {
            Err(CadreError::InvalidConfig(format!(
                "restart temperature must be positive, got {}",
                self.temperature
            )))
        }
    }
}

/// Parse a temperature, accepting `inf`/`infinity` for uniform restarts.
pub fn parse_temperature(text: &str) -> Option<f64> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}

fn ser_temperature<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*t)
    }
}

fn de_temperature<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Number(v) => Ok(v),
        Repr::Text(s) => parse_temperature(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid temperature {s:?}"))),
    }
}

/// Fraction of empty in-bounds cells around each occupied cell, excluding the
/// cell itself. Returned as `(flat index, rate)` in lexicographic cell order.
///
/// Equivalent to convolving the emptiness grid with an all-ones
/// `(2r+1)³` kernel with a zero centre, normalised by the same kernel applied
/// to the in-bounds mask.
pub fn neighbor_empty_rates(archive: &GridArchive, radius: usize) -> Vec<(usize, f64)> {
    let spec = archive.spec();
    let dims = spec.dims();
    let r = radius as isize;
    let mut rates = Vec::with_capacity(archive.len());
    for elite in archive.elites() {
        let [i, j, k] = elite.cell.map(|c| c as isize);
        let mut empty = 0usize;
        let mut in_bounds = 0usize;
        for di in -r..=r {
            for dj in -r..=r {
                for dk in -r..=r {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let cell = [i + di, j + dj, k + dk];
                    if cell
                        .iter()
                        .zip(dims)
                        .any(|(&c, d)| c < 0 || c >= d as isize)
                    {
                        continue;
                    }
                    in_bounds += 1;
                    let flat = spec.flat(cell.map(|c| c as usize));
                    if !archive.is_occupied_flat(flat) {
                        empty += 1;
                    }
                }
            }
        }
        let rate = if in_bounds == 0 {
            0.0
        } else {
            empty as f64 / in_bounds as f64
        };
        rates.push((spec.flat(elite.cell), rate));
    }
    rates
}

/// Softmax of `rates / temperature`, computed with max-subtraction.
pub fn restart_probabilities(rates: &[f64], temperature: f64) -> Vec<f64> {
    if rates.is_empty() {
        return Vec::new();
    }
    if temperature.is_infinite() {
        return vec![1.0 / rates.len() as f64; rates.len()];
    }
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = rates
        .iter()
        .map(|r| ((r - max) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draw an index from a discrete distribution.
fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}

/// Draw a restart position from neighbour-empty rates.
pub fn sample_restart<R: Rng + ?Sized>(rates: &[f64], temperature: f64, rng: &mut R) -> usize {
    sample_index(&restart_probabilities(rates, temperature), rng)
}

/// Choose the elite to restart from; `None` when the archive is empty.
pub fn oar_restart<'a, R: Rng + ?Sized>(
    archive: &'a GridArchive,
    config: &OarConfig,
    rng: &mut R,
) -> Option<&'a Elite> {
    if archive.is_empty() {
        return None;
    }
    let rates = neighbor_empty_rates(archive, config.radius);
    let values: Vec<f64> = rates.iter().map(|(_, r)| *r).collect();
    let (flat, _) = rates[sample_restart(&values, config.temperature, rng)];
    archive.get_flat(flat)
}
