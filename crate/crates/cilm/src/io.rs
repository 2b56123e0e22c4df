//! CSV persistence for every artifact the pipeline exchanges: populations,
//! event records, cluster assignments, posterior traces, predictive curves
//! and assessment reports, plus ingestion of the raw outbreak format.
//!
//! Floats are written with the shortest round-trip formatting, so a file is
//! byte-identical across reruns of the same seeded command.

use std::path::Path;
use std::str::FromStr;

use csv::{Reader, ReaderBuilder, StringRecord, Writer};

use crate::assess::{CurveEnsemble, WaicResult};
use crate::epidemic::EpidemicRecord;
use crate::error::{Error, Result};
use crate::kernel::ClusterAssignment;
use crate::mcmc::McmcTrace;
use crate::population::Population;

fn fmt_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), msg: msg.into() }
}

fn open(path: &Path) -> Result<Reader<std::fs::File>> {
    Ok(ReaderBuilder::new().has_headers(true).from_path(path)?)
}

fn check_header(path: &Path, reader: &mut Reader<std::fs::File>, expect: &[&str]) -> Result<()> {
    let got: Vec<&str> = reader.headers()?.iter().collect();
    if got != expect {
        return Err(fmt_err(
            path,
            format!("expected header {}, found {}", expect.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn field<'r>(path: &Path, row: &'r StringRecord, idx: usize, line: usize) -> Result<&'r str> {
    row.get(idx)
        .ok_or_else(|| fmt_err(path, format!("row {line}: missing field {}", idx + 1)))
}

fn parse<T: FromStr>(path: &Path, s: &str, what: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| fmt_err(path, format!("row {line}: cannot parse {what} from {s:?}")))
}

fn parse_opt<T: FromStr>(path: &Path, s: &str, what: &str, line: usize) -> Result<Option<T>> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    parse(path, s, what, line).map(Some)
}

/// Sequential ids are part of every format; gaps or reordering are rejected.
fn check_id(path: &Path, s: &str, expect: usize, line: usize) -> Result<()> {
    let id: usize = parse(path, s, "id", line)?;
    if id != expect {
        return Err(fmt_err(path, format!("row {line}: id {id} where {expect} was expected")));
    }
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_population(path: &Path, pop: &Population) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["id", "x", "y"])?;
    for i in 0..pop.len() {
        let (x, y) = pop.coord(i);
        w.write_record([i.to_string(), num(x), num(y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_population(path: &Path) -> Result<Population> {
    let mut r = open(path)?;
    check_header(path, &mut r, &["id", "x", "y"])?;
    let mut coords = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        check_id(path, field(path, &row, 0, line + 2)?, coords.len(), line + 2)?;
        let x = parse(path, field(path, &row, 1, line + 2)?, "x", line + 2)?;
        let y = parse(path, field(path, &row, 2, line + 2)?, "y", line + 2)?;
        coords.push((x, y));
    }
    Population::new(coords)
}

pub fn write_events(path: &Path, record: &EpidemicRecord) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["id", "infection_time", "removal_time"])?;
    let opt = |t: Option<u32>| t.map_or_else(String::new, |v| v.to_string());
    for i in 0..record.len() {
        w.write_record([i.to_string(), opt(record.infection_time(i)), opt(record.removal_time(i))])?;
    }
    w.flush()?;
    Ok(())
}

/// The events file stores days only; the window length comes from the caller.
pub fn read_events(path: &Path, t_max: u32) -> Result<EpidemicRecord> {
    let mut r = open(path)?;
    check_header(path, &mut r, &["id", "infection_time", "removal_time"])?;
    let mut infection = Vec::new();
    let mut removal = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        check_id(path, field(path, &row, 0, line + 2)?, infection.len(), line + 2)?;
        infection.push(parse_opt(path, field(path, &row, 1, line + 2)?, "infection_time", line + 2)?);
        removal.push(parse_opt(path, field(path, &row, 2, line + 2)?, "removal_time", line + 2)?);
    }
    EpidemicRecord::new(infection, removal, t_max)
}

pub fn write_assignment(path: &Path, clusters: &ClusterAssignment) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["id", "cluster"])?;
    for (i, &k) in clusters.membership().iter().enumerate() {
        w.write_record([i.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Raw membership labels; the caller pairs them with a population to rebuild
/// a full assignment.
pub fn read_assignment(path: &Path) -> Result<Vec<usize>> {
    let mut r = open(path)?;
    check_header(path, &mut r, &["id", "cluster"])?;
    let mut membership = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        check_id(path, field(path, &row, 0, line + 2)?, membership.len(), line + 2)?;
        membership.push(parse(path, field(path, &row, 1, line + 2)?, "cluster", line + 2)?);
    }
    Ok(membership)
}

pub fn write_centroids(path: &Path, clusters: &ClusterAssignment) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["cluster", "x", "y"])?;
    for (k, &(x, y)) in clusters.centroids().iter().enumerate() {
        w.write_record([k.to_string(), num(x), num(y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_centroids(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = open(path)?;
    check_header(path, &mut r, &["cluster", "x", "y"])?;
    let mut centroids = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        check_id(path, field(path, &row, 0, line + 2)?, centroids.len(), line + 2)?;
        let x = parse(path, field(path, &row, 1, line + 2)?, "x", line + 2)?;
        let y = parse(path, field(path, &row, 2, line + 2)?, "y", line + 2)?;
        centroids.push((x, y));
    }
    Ok(centroids)
}

/// Trace columns are `iter`, the parameters the variant carries in their
/// fitting order, then `log_post`.
pub fn write_trace(path: &Path, trace: &McmcTrace) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    let mut header = vec!["iter".to_string()];
    header.extend(trace.names().iter().cloned());
    header.push("log_post".into());
    w.write_record(&header)?;
    for (i, row) in trace.draws().iter().enumerate() {
        let mut out = vec![i.to_string()];
        out.extend(row.iter().map(|&v| num(v)));
        out.push(num(trace.log_post()[i]));
        w.write_record(&out)?;
    }
    w.flush()?;
    Ok(())
}

/// Seed and burn-in live in the run metadata, not the trace file, so the
/// caller supplies them. Acceptance rates are not persisted.
pub fn read_trace(path: &Path, seed: u64, burn_in: usize) -> Result<McmcTrace> {
    let mut r = open(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header[0] != "iter" || header[header.len() - 1] != "log_post" {
        return Err(fmt_err(path, "trace header must be iter,<parameters...>,log_post"));
    }
    let names = header[1..header.len() - 1].to_vec();
    let mut draws = Vec::new();
    let mut log_post = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let mut values = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            values.push(parse(path, field(path, &row, j + 1, line + 2)?, name, line + 2)?);
        }
        log_post.push(parse(
            path,
            field(path, &row, names.len() + 1, line + 2)?,
            "log_post",
            line + 2,
        )?);
        draws.push(values);
    }
    McmcTrace::from_parts(names, draws, log_post, seed, burn_in)
}

/// Predictive envelope, one row per day starting at day 1.
pub fn write_curves(path: &Path, ensemble: &CurveEnsemble) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["t", "lower", "median", "upper"])?;
    for t in 0..ensemble.len() {
        w.write_record([
            (t + 1).to_string(),
            num(ensemble.lower()[t]),
            num(ensemble.median()[t]),
            num(ensemble.upper()[t]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Model comparison report, one row per fitted variant.
pub fn write_report(path: &Path, rows: &[(String, WaicResult)]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["model", "waic", "lppd", "p_waic"])?;
    for (model, r) in rows {
        w.write_record([model.clone(), num(r.waic), num(r.lppd), num(r.p_waic)])?;
    }
    w.flush()?;
    Ok(())
}

/// Free-form run metadata as key,value rows.
pub fn write_meta(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in pairs {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>> {
    let mut r = open(path)?;
    check_header(path, &mut r, &["key", "value"])?;
    let mut pairs = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        pairs.push((
            field(path, &row, 0, line + 2)?.to_string(),
            field(path, &row, 1, line + 2)?.to_string(),
        ));
    }
    Ok(pairs)
}

/// Ingest the raw outbreak format `id,x,y,infection_day,removal_day` into a
/// study window running from `window_start` to `window_end` in source days.
///
/// Rows removed at or before the window start never overlap it and are
/// dropped; the rest are renumbered in file order. Infections after the
/// window end count as susceptible, infections before the start clamp to
/// relative day 0, and removals past the end are open. The returned record
/// spans `window_end - window_start` days.
pub fn read_raw_outbreak(
    path: &Path,
    window_start: u32,
    window_end: u32,
) -> Result<(Population, EpidemicRecord)> {
    if window_end <= window_start {
        return Err(fmt_err(
            path,
            format!("window end {window_end} must be after start {window_start}"),
        ));
    }
    let mut r = open(path)?;
    check_header(path, &mut r, &["id", "x", "y", "infection_day", "removal_day"])?;
    let t_max = window_end - window_start;
    let mut coords = Vec::new();
    let mut infection = Vec::new();
    let mut removal = Vec::new();
    for (line, row) in r.records().enumerate() {
        let line = line + 2;
        let row = row?;
        let x = parse(path, field(path, &row, 1, line)?, "x", line)?;
        let y = parse(path, field(path, &row, 2, line)?, "y", line)?;
        let inf: Option<u32> = parse_opt(path, field(path, &row, 3, line)?, "infection_day", line)?;
        let rem: Option<u32> = parse_opt(path, field(path, &row, 4, line)?, "removal_day", line)?;
        let (inf, rem) = match (inf, rem) {
            (None, Some(_)) => {
                return Err(fmt_err(path, format!("row {line}: removal without infection")))
            }
            (Some(i), Some(r)) if r <= i => {
                return Err(fmt_err(
                    path,
                    format!("row {line}: removal day {r} not after infection day {i}"),
                ))
            }
            (Some(_), Some(r)) if r <= window_start => continue,
            (Some(i), _) if i > window_end => (None, None),
            (Some(i), r) => (
                Some(i.max(window_start) - window_start),
                r.filter(|&r| r <= window_end).map(|r| r - window_start),
            ),
            (None, None) => (None, None),
        };
        coords.push((x, y));
        infection.push(inf);
        removal.push(rem);
    }
    let pop = Population::new(coords)?;
    let record = EpidemicRecord::new(infection, removal, t_max)?;
    Ok((pop, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ModelParams, ModelSpec, SparkSpec};
    use crate::population::DistanceMatrix;
    use crate::seeds::seeded_rng;
    use crate::sim::{generate_population, simulate_epidemic, SimConfig, SpatialScenario};
    use std::fs;
    use tempfile::TempDir;

    fn outbreak(seed: u64) -> (Population, EpidemicRecord) {
        let mut rng = seeded_rng(seed);
        let (pop, _) = generate_population(SpatialScenario::csr(), 15, &mut rng).unwrap();
        let dist = DistanceMatrix::compute(&pop).unwrap();
        let spec = ModelSpec::sir(SparkSpec::Zero).with_infectious_period(3);
        let cfg = SimConfig {
            spec,
            params: ModelParams::basic(1.0, 1.5),
            t_max: 10,
            initial_count: 2,
            seed,
        };
        let record = simulate_epidemic(&pop, &dist, &cfg).unwrap();
        (pop, record)
    }

    #[test]
    fn population_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("population.csv");
        let (pop, _) = outbreak(1);
        write_population(&path, &pop).unwrap();
        let back = read_population(&path).unwrap();
        assert_eq!(back.coords(), pop.coords());
    }

    #[test]
    fn events_round_trip_keeps_missing_fields() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("events.csv");
        let (_, record) = outbreak(2);
        write_events(&path, &record).unwrap();
        let back = read_events(&path, record.t_max()).unwrap();
        assert_eq!(back, record);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().skip(1).any(|l| l.ends_with(",,")), "no susceptible row in fixture");
    }

    #[test]
    fn assignment_and_centroid_round_trip() {
        let dir = TempDir::new().unwrap();
        let (pop, _) = outbreak(3);
        let membership: Vec<usize> = (0..pop.len()).map(|i| i % 3).collect();
        let clusters = ClusterAssignment::from_membership(&pop, membership.clone()).unwrap();
        let a_path = dir.path().join("assignment.csv");
        let c_path = dir.path().join("centroids.csv");
        write_assignment(&a_path, &clusters).unwrap();
        write_centroids(&c_path, &clusters).unwrap();
        assert_eq!(read_assignment(&a_path).unwrap(), membership);
        let cents = read_centroids(&c_path).unwrap();
        assert_eq!(cents.len(), 3);
        assert_eq!(cents, clusters.centroids());
    }

    #[test]
    fn trace_round_trip_preserves_draws_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("trace.csv");
        let names = vec!["alpha".to_string(), "beta".to_string(), "epsilon".to_string()];
        let draws = vec![
            vec![0.1234567890123456, 2.0, 1e-9],
            vec![0.5, 1.7976931348623157e308, 3.3333333333333335],
        ];
        let log_post = vec![-12.5, -11.25];
        let trace = McmcTrace::from_parts(names, draws.clone(), log_post.clone(), 9, 1).unwrap();
        write_trace(&path, &trace).unwrap();
        let back = read_trace(&path, 9, 1).unwrap();
        assert_eq!(back.draws(), &draws);
        assert_eq!(back.log_post(), &log_post);
        assert_eq!(back.names(), trace.names());
        assert_eq!(back.burn_in(), 1);
        let header = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "iter,alpha,beta,epsilon,log_post");
    }

    #[test]
    fn header_mismatch_is_reported_with_the_path() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("population.csv");
        fs::write(&path, "id,lon,lat\n0,1.0,2.0\n").unwrap();
        let err = read_population(&path).unwrap_err().to_string();
        assert!(err.contains("population.csv"), "{err}");
        assert!(err.contains("id,lon,lat"), "{err}");
    }

    #[test]
    fn out_of_order_ids_are_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("events.csv");
        fs::write(&path, "id,infection_time,removal_time\n1,,\n0,,\n").unwrap();
        assert!(read_events(&path, 5).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("meta.csv");
        let pairs = vec![
            ("seed".to_string(), "42".to_string()),
            ("spark".to_string(), "m2".to_string()),
        ];
        write_meta(&path, &pairs).unwrap();
        assert_eq!(read_meta(&path).unwrap(), pairs);
    }

    #[test]
    fn raw_outbreak_window_rules() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("raw.csv");
        // Window 30..50. Row a: removed before the window, dropped. Row b:
        // infected before the window, still present, clamps to day 0 with
        // removal at relative day 2. Row c: events inside the window. Row d:
        // infected after the window end, susceptible. Row e: never infected.
        // Row f: removal beyond the window end stays open.
        fs::write(
            &path,
            "id,x,y,infection_day,removal_day\n\
             7,0,0,10,20\n\
             8,1,0,25,32\n\
             9,2,0,35,40\n\
             10,3,0,55,60\n\
             11,4,0,,\n\
             12,5,0,45,70\n",
        )
        .unwrap();
        let (pop, record) = read_raw_outbreak(&path, 30, 50).unwrap();
        assert_eq!(pop.len(), 5);
        assert_eq!(record.t_max(), 20);
        assert_eq!(pop.coord(0), (1.0, 0.0));
        assert_eq!((record.infection_time(0), record.removal_time(0)), (Some(0), Some(2)));
        assert_eq!((record.infection_time(1), record.removal_time(1)), (Some(5), Some(10)));
        assert_eq!((record.infection_time(2), record.removal_time(2)), (None, None));
        assert_eq!((record.infection_time(3), record.removal_time(3)), (None, None));
        assert_eq!((record.infection_time(4), record.removal_time(4)), (Some(15), None));
    }

    #[test]
    fn raw_outbreak_rejects_inconsistent_rows() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("raw.csv");
        fs::write(&path, "id,x,y,infection_day,removal_day\n0,0,0,,20\n").unwrap();
        assert!(read_raw_outbreak(&path, 0, 30).is_err());
        fs::write(&path, "id,x,y,infection_day,removal_day\n0,0,0,20,20\n").unwrap();
        assert!(read_raw_outbreak(&path, 0, 30).is_err());
        fs::write(&path, "id,x,y,infection_day,removal_day\n0,0,0,5,6\n").unwrap();
        assert!(read_raw_outbreak(&path, 10, 5).is_err());
    }
}
