//! Convert a raw outbreak table (id,x,y,infection_day,removal_day in source
//! time) into the population and events files the other commands consume,
//! restricted to an observation window and shifted to start at day zero.

use std::fs;

use anyhow::{bail, Result};
use cilm::io;

use super::{require_file, Ctx};
use crate::config::IngestSection;

pub fn run(section: &IngestSection, ctx: &Ctx) -> Result<()> {
    require_file(&section.input, "raw outbreak file")?;
    let [start, end] = section.window;
    if end <= start {
        bail!("window end {end} must be after start {start}");
    }
    let (pop, record) = io::read_raw_outbreak(&section.input, start, end)?;
    fs::create_dir_all(&ctx.out)?;
    io::write_population(&ctx.out.join("population.csv"), &pop)?;
    io::write_events(&ctx.out.join("events.csv"), &record)?;
    let infections = (0..record.len()).filter(|&i| record.infection_time(i).is_some()).count();
    let meta = vec![
        ("command".into(), "ingest-fmd".into()),
        ("window_start".into(), start.to_string()),
        ("window_end".into(), end.to_string()),
        ("t_max".into(), record.t_max().to_string()),
        ("n".into(), pop.len().to_string()),
        ("infections".into(), infections.to_string()),
        // Fit settings used for this outbreak in the source analysis.
        ("suggested_frame".into(), "seir".into()),
        ("suggested_latent".into(), "5".into()),
        ("suggested_period".into(), "4".into()),
    ];
    io::write_meta(&ctx.out.join("meta.csv"), &meta)?;
    println!(
        "ingest: {} individuals, {} infections over days 0..={}",
        pop.len(),
        infections,
        record.t_max()
    );
    Ok(())
}
