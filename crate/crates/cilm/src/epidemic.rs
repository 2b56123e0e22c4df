//! Epidemic event records and the per-day compartment timeline derived from them.

use crate::error::{Error, Result};

/// Compartmental frame of a model. Transition periods are supplied where a
/// timeline or simulation is built, not stored in the frame itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Sir,
    Seir,
}

/// Compartment of one individual at one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Susceptible,
    Exposed,
    Infectious,
    Removed,
}

/// Per-individual event times over a fixed observation window 0..=t_max.
///
/// `infection_time` is the day the individual leaves S: the I-entry day under
/// SIR and the E-entry (exposure) day under SEIR. `None` means never infected
/// within the window. `removal_time` is the observed removal day (a cull date
/// counts as removal); absent when removal falls outside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicRecord {
    infection_time: Vec<Option<u32>>,
    removal_time: Vec<Option<u32>>,
    t_max: u32,
}

impl EpidemicRecord {
    pub fn new(
        infection_time: Vec<Option<u32>>,
        removal_time: Vec<Option<u32>>,
        t_max: u32,
    ) -> Result<Self> {
        if infection_time.len() != removal_time.len() {
            return Err(Error::InvalidPopulation(format!(
                "{} infection times vs {} removal times",
                infection_time.len(),
                removal_time.len()
            )));
        }
        for id in 0..infection_time.len() {
            match (infection_time[id], removal_time[id]) {
                (None, Some(_)) => {
                    return Err(Error::InvalidRecord {
                        id,
                        msg: "removal time without infection time".into(),
                    })
                }
                (Some(inf), Some(rem)) if rem <= inf => {
                    return Err(Error::InvalidRecord {
                        id,
                        msg: format!("removal at {rem} not after infection at {inf}"),
                    })
                }
                _ => {}
            }
            for (label, t) in [("infection", infection_time[id]), ("removal", removal_time[id])] {
                if let Some(t) = t {
                    if t > t_max {
                        return Err(Error::InvalidRecord {
                            id,
                            msg: format!("{label} time {t} beyond window end {t_max}"),
                        });
                    }
                }
            }
        }
        Ok(Self { infection_time, removal_time, t_max })
    }

    pub fn len(&self) -> usize {
        self.infection_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infection_time.is_empty()
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn infection_time(&self, id: usize) -> Option<u32> {
        self.infection_time[id]
    }

    pub fn removal_time(&self, id: usize) -> Option<u32> {
        self.removal_time[id]
    }

    /// Same events truncated to the window 0..=t_cut; events after t_cut drop out.
    pub fn truncate(&self, t_cut: u32) -> Result<Self> {
        let keep = |t: Option<u32>| t.filter(|&v| v <= t_cut);
        let inf: Vec<_> = self.infection_time.iter().map(|&t| keep(t)).collect();
        let rem: Vec<_> = self
            .removal_time
            .iter()
            .zip(&inf)
            .map(|(&r, &i)| if i.is_some() { keep(r) } else { None })
            .collect();
        Self::new(inf, rem, t_cut)
    }
}

/// Compartment membership for every individual at every day of the window.
///
/// Entry days are resolved once from the record (applying latent and
/// infectious periods for SEIR); per-day id lists are kept sorted ascending so
/// downstream sums have a fixed order.
#[derive(Debug, Clone)]
pub struct CompartmentTimeline {
    frame: Frame,
    n: usize,
    t_max: u32,
    e_entry: Vec<Option<u32>>,
    i_entry: Vec<Option<u32>>,
    r_entry: Vec<Option<u32>>,
    susceptible: Vec<Vec<usize>>,
    exposed: Vec<Vec<usize>>,
    infectious: Vec<Vec<usize>>,
    removed: Vec<Vec<usize>>,
    newly_infectious: Vec<Vec<usize>>,
}

/// Resolve compartment entry days from an event record.
///
/// SIR ignores both periods: I-entry is the recorded infection time and
/// R-entry the recorded removal. SEIR reads the record's infection time as the
/// exposure day, enters I after `latent_period` days (required), and leaves I
/// at the earlier of exposure + latent + `infectious_period` and the recorded
/// removal; a removal during latency skips I entirely.
pub fn build_timeline(
    record: &EpidemicRecord,
    frame: Frame,
    latent_period: Option<u32>,
    infectious_period: Option<u32>,
) -> Result<CompartmentTimeline> {
    let n = record.len();
    let t_max = record.t_max();
    let mut e_entry = vec![None; n];
    let mut i_entry = vec![None; n];
    let mut r_entry = vec![None; n];

    match frame {
        Frame::Sir => {
            for id in 0..n {
                i_entry[id] = record.infection_time(id);
                r_entry[id] = record.removal_time(id);
            }
        }
        Frame::Seir => {
            let latent = latent_period.ok_or_else(|| {
                Error::InvalidSpec("SEIR timeline requires a latent period".into())
            })?;
            for id in 0..n {
                let Some(exposure) = record.infection_time(id) else { continue };
                e_entry[id] = Some(exposure);
                let i_day = exposure.saturating_add(latent);
                let scheduled = infectious_period.map(|p| i_day.saturating_add(p));
                let removal = match (scheduled, record.removal_time(id)) {
                    (Some(s), Some(r)) => Some(s.min(r)),
                    (Some(s), None) => Some(s),
                    (None, r) => r,
                };
                if removal.map_or(true, |r| i_day < r) {
                    i_entry[id] = Some(i_day);
                }
                r_entry[id] = removal;
            }
        }
    }

    let steps = t_max as usize + 1;
    let mut susceptible = vec![Vec::new(); steps];
    let mut exposed = vec![Vec::new(); steps];
    let mut infectious = vec![Vec::new(); steps];
    let mut removed = vec![Vec::new(); steps];
    let mut newly_infectious = vec![Vec::new(); steps];

    for t in 0..=t_max {
        for id in 0..n {
            match state_of(t, e_entry[id], i_entry[id], r_entry[id]) {
                State::Susceptible => susceptible[t as usize].push(id),
                State::Exposed => exposed[t as usize].push(id),
                State::Infectious => infectious[t as usize].push(id),
                State::Removed => removed[t as usize].push(id),
            }
        }
        for id in 0..n {
            if i_entry[id] == Some(t) {
                newly_infectious[t as usize].push(id);
            }
        }
    }

    Ok(CompartmentTimeline {
        frame,
        n,
        t_max,
        e_entry,
        i_entry,
        r_entry,
        susceptible,
        exposed,
        infectious,
        removed,
        newly_infectious,
    })
}

fn state_of(t: u32, e: Option<u32>, i: Option<u32>, r: Option<u32>) -> State {
    let first = e.or(i);
    match first {
        None => State::Susceptible,
        Some(entry) if t < entry => State::Susceptible,
        Some(_) => {
            if let Some(r) = r {
                if t >= r {
                    return State::Removed;
                }
            }
            match i {
                Some(i_day) if t >= i_day => State::Infectious,
                _ => State::Exposed,
            }
        }
    }
}

impl CompartmentTimeline {
    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn state(&self, id: usize, t: u32) -> State {
        state_of(t, self.e_entry[id], self.i_entry[id], self.r_entry[id])
    }

    pub fn susceptible_at(&self, t: u32) -> &[usize] {
        &self.susceptible[t as usize]
    }

    pub fn exposed_at(&self, t: u32) -> &[usize] {
        &self.exposed[t as usize]
    }

    pub fn infectious_at(&self, t: u32) -> &[usize] {
        &self.infectious[t as usize]
    }

    pub fn removed_at(&self, t: u32) -> &[usize] {
        &self.removed[t as usize]
    }

    /// Ids entering I exactly at day t.
    pub fn newly_infectious_at(&self, t: u32) -> &[usize] {
        &self.newly_infectious[t as usize]
    }

    pub fn i_entry(&self, id: usize) -> Option<u32> {
        self.i_entry[id]
    }

    pub fn e_entry(&self, id: usize) -> Option<u32> {
        self.e_entry[id]
    }

    pub fn r_entry(&self, id: usize) -> Option<u32> {
        self.r_entry[id]
    }

    /// Earliest I-entry day over the population, if anyone became infectious.
    pub fn first_infectious_day(&self) -> Option<u32> {
        self.i_entry.iter().flatten().copied().min()
    }
}

/// Daily counts of new infectious individuals: entry `t` counts I-entries at
/// day `t + 1`, so infections seeded at day 0 are excluded and the curve has
/// length t_max.
pub fn incidence_curve(timeline: &CompartmentTimeline) -> Vec<u32> {
    (1..=timeline.t_max())
        .map(|t| timeline.newly_infectious_at(t).len() as u32)
        .collect()
}
