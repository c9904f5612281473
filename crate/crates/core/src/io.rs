//! CSV ingestion and export.
//!
//! Events file: header `subject_id,event_time[,resolution_time]`, one row per
//! event. Subjects file: header `subject_id,tau[,covariate columns...]`, one
//! row per subject. Subjects without event rows are kept with no events.
//! An empty `resolution_time` cell means the subject is at risk again
//! immediately.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Dataset, EventHistory};

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(r)
}

fn csv_err(source: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    parse_err(source, line, e.to_string())
}

fn number(source: &str, line: usize, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_err(source, line, format!("{column}: `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(source, line, format!("{column}: `{cell}` is not finite")));
    }
    Ok(v)
}

struct EventRow {
    line: usize,
    time: f64,
    resolution: Option<f64>,
}

/// Reads a dataset from an events table (optional) and a subjects table.
pub fn read_dataset<E: Read, S: Read>(events: Option<(E, &str)>, subjects: (S, &str)) -> Result<Dataset> {
    let (subjects, s_name) = subjects;
    let mut rdr = reader(subjects);
    let header = rdr.headers().map_err(|e| csv_err(s_name, e))?.clone();
    if header.len() < 2 || &header[0] != "subject_id" || &header[1] != "tau" {
        return Err(parse_err(s_name, 1, "header must start with `subject_id,tau`"));
    }
    let cov_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut order: Vec<(String, f64, BTreeMap<String, f64>, usize)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(s_name, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(s_name, line, "empty subject_id"));
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(parse_err(s_name, line, format!("subject {id} already listed on line {prev}")));
        }
        let tau = number(s_name, line, "tau", &rec[1])?;
        let mut covs = BTreeMap::new();
        for (name, cell) in cov_names.iter().zip(rec.iter().skip(2)) {
            if !cell.is_empty() {
                covs.insert(name.clone(), number(s_name, line, name, cell)?);
            }
        }
        order.push((id, tau, covs, line));
    }

    let mut by_subject: HashMap<String, Vec<EventRow>> = HashMap::new();
    let mut e_name = "";
    if let Some((events, name)) = events {
        e_name = name;
        let mut rdr = reader(events);
        let header = rdr.headers().map_err(|e| csv_err(name, e))?.clone();
        let has_res = match header.iter().collect::<Vec<_>>().as_slice() {
            ["subject_id", "event_time"] => false,
            ["subject_id", "event_time", "resolution_time"] => true,
            _ => return Err(parse_err(name, 1, "header must be `subject_id,event_time[,resolution_time]`")),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(name, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let id = rec[0].to_string();
            let time = number(name, line, "event_time", &rec[1])?;
            let resolution = if has_res && !rec[2].is_empty() {
                Some(number(name, line, "resolution_time", &rec[2])?)
            } else {
                None
            };
            if !seen.contains_key(&id) {
                return Err(parse_err(name, line, format!("subject {id} has events but no tau row")));
            }
            by_subject.entry(id).or_default().push(EventRow { line, time, resolution });
        }
    }

    let mut out = Vec::with_capacity(order.len());
    for (id, tau, covs, _) in order {
        let mut rows = by_subject.remove(&id).unwrap_or_default();
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        for (k, r) in rows.iter().enumerate() {
            if r.time <= 0.0 {
                return Err(parse_err(e_name, r.line, format!("subject {id}: event time {} must be > 0", r.time)));
            }
            if r.time > tau {
                return Err(parse_err(e_name, r.line, format!("subject {id}: event time {} after tau = {tau}", r.time)));
            }
            if k > 0 && rows[k - 1].time == r.time {
                return Err(parse_err(e_name, r.line, format!("subject {id}: duplicate event time {}", r.time)));
            }
        }
        let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
        let mut h = EventHistory::new(id, times, tau).with_covariates(covs);
        if rows.iter().any(|r| r.resolution.is_some()) {
            h = h.with_resolutions(rows.iter().map(|r| r.resolution.unwrap_or(r.time)).collect());
        }
        if let Some(v) = h.validate().first() {
            let line = rows.first().map_or(0, |r| r.line);
            return Err(parse_err(e_name, line, v.to_string()));
        }
        out.push(h);
    }
    Dataset::try_new(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a dataset from files; `events` may be omitted when every subject
/// has zero events.
pub fn ingest_csv(events: Option<&Path>, subjects: &Path) -> Result<Dataset> {
    let s_name = subjects.display().to_string();
    let s = open(subjects)?;
    match events {
        Some(p) => {
            let e_name = p.display().to_string();
            read_dataset(Some((open(p)?, e_name.as_str())), (s, s_name.as_str()))
        }
        None => read_dataset(None::<(File, &str)>, (s, s_name.as_str())),
    }
}

/// Writes the events table. The resolution column appears only when some
/// subject has resolution times.
pub fn write_events<W: Write>(d: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let res = d.has_resolutions();
    let io = |e: csv::Error| Error::Io(e.into());
    if res {
        wtr.write_record(["subject_id", "event_time", "resolution_time"]).map_err(io)?;
    } else {
        wtr.write_record(["subject_id", "event_time"]).map_err(io)?;
    }
    for h in d.subjects() {
        for (j, t) in h.event_times().iter().enumerate() {
            let mut row = vec![h.subject_id().to_string(), t.to_string()];
            if res {
                row.push(h.resolution_times().map_or(*t, |r| r[j]).to_string());
            }
            wtr.write_record(&row).map_err(io)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the subjects table with the union of covariate names as columns
/// (sorted; empty cells where a subject lacks one).
pub fn write_subjects<W: Write>(d: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.into());
    let names: BTreeSet<&str> = d
        .subjects()
        .iter()
        .flat_map(|h| h.covariates().keys().map(String::as_str))
        .collect();
    let mut header = vec!["subject_id", "tau"];
    header.extend(names.iter().copied());
    wtr.write_record(&header).map_err(io)?;
    for h in d.subjects() {
        let mut row = vec![h.subject_id().to_string(), h.tau().to_string()];
        row.extend(names.iter().map(|n| h.covariate(n).map_or(String::new(), |v| v.to_string())));
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `events.csv` and `subjects.csv` under `dir`.
pub fn write_dataset_dir(d: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_events(d, File::create(dir.join("events.csv"))?)?;
    write_subjects(d, File::create(dir.join("subjects.csv"))?)
}
