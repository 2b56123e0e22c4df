//! Rescaling of coordinates onto the infection-time scale for clustering.

use crate::epidemic::EpidemicRecord;
use crate::error::{Error, Result};
use crate::population::Population;

/// Per-individual (x, y, t) with coordinates affinely mapped onto
/// [t_min, t_max] and infection days hurdle-coded: 0 means never infected,
/// day-0 entries are recorded as 1.
#[derive(Debug, Clone)]
pub struct StandardizedData {
    coords: Vec<(f64, f64)>,
    t: Vec<u32>,
    t_min: f64,
    t_max: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl StandardizedData {
    /// `range` overrides the temporal interval; the default is the study
    /// window [0, record.t_max].
    pub fn standardize(
        pop: &Population,
        record: &EpidemicRecord,
        range: Option<(f64, f64)>,
    ) -> Result<Self> {
        if record.len() != pop.len() {
            return Err(Error::Clustering(format!(
                "record covers {} individuals, population has {}",
                record.len(),
                pop.len()
            )));
        }
        let (t_min, t_max) = range.unwrap_or((0.0, record.t_max() as f64));
        if !(t_max > t_min) {
            return Err(Error::Clustering(format!(
                "temporal range ({t_min}, {t_max}) is empty"
            )));
        }
        let xs: Vec<f64> = (0..pop.len()).map(|i| pop.coord(i).0).collect();
        let ys: Vec<f64> = (0..pop.len()).map(|i| pop.coord(i).1).collect();
        let x_range = min_max(&xs)?;
        let y_range = min_max(&ys)?;
        let scale = |v: f64, (lo, hi): (f64, f64)| t_min + (t_max - t_min) * (v - lo) / (hi - lo);
        let coords = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (scale(x, x_range), scale(y, y_range)))
            .collect();
        let t = (0..pop.len())
            .map(|i| match record.infection_time(i) {
                None => 0,
                Some(0) => 1,
                Some(day) => day,
            })
            .collect();
        Ok(Self { coords, t, t_min, t_max, x_range, y_range })
    }

    /// Assemble pre-scaled values directly; `x_range`/`y_range` define the
    /// inverse map used by `to_original`.
    pub fn from_parts(
        coords: Vec<(f64, f64)>,
        t: Vec<u32>,
        bounds: (f64, f64),
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Result<Self> {
        if coords.len() != t.len() || coords.is_empty() {
            return Err(Error::Clustering("coordinate and time lengths differ".into()));
        }
        if !(bounds.1 > bounds.0) || !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(Error::Clustering("empty standardization range".into()));
        }
        Ok(Self { coords, t, t_min: bounds.0, t_max: bounds.1, x_range, y_range })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, i: usize) -> (f64, f64) {
        self.coords[i]
    }

    pub fn t_code(&self, i: usize) -> u32 {
        self.t[i]
    }

    pub fn t_bounds(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    /// Map a standardized point back to original coordinate units.
    pub fn to_original(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let span = self.t_max - self.t_min;
        (
            self.x_range.0 + (x - self.t_min) / span * (self.x_range.1 - self.x_range.0),
            self.y_range.0 + (y - self.t_min) / span * (self.y_range.1 - self.y_range.0),
        )
    }
}

fn min_max(vs: &[f64]) -> Result<(f64, f64)> {
    let lo = vs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Clustering(format!(
            "degenerate coordinate range [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}
