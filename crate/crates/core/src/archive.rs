//! On-disk run archives and plot exports. All files are comma-separated
//! text with one header line; floats are written in their shortest exact
//! form so that reading an archive back gives bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostics::{Check, CheckRecord, DiagnosticsReport, TraceRecord};
use crate::run::{oscillation, RunArchive, Snapshot};
use crate::scenario::{parse_scenario, ParseError};

pub const SCENARIO_FILE: &str = "scenario.lwr";
pub const INDEX_FILE: &str = "snapshots.csv";
pub const FINAL_FILE: &str = "final.csv";
pub const OVERLAY_FILE: &str = "overlay.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";

const CELLS_HEADER: &str = "x_left,x_right,rho";
const INDEX_HEADER: &str = "index,step,time";
const OVERLAY_HEADER: &str = "step,time,members,y,s,q,f_int,left,right,class";
const DIAGNOSTICS_HEADER: &str = "check,step,value,bound,status";

/// Cells within this many mesh sizes of a crossing are inspected for
/// artifacts.
pub const ARTIFACT_CELLS: f64 = 10.0;
/// Excess variation above which an artifact region is flagged.
pub const ARTIFACT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },
    #[error("scenario in archive: {0}")]
    Scenario(#[from] ParseError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(file: &str, line: usize, message: impl Into<String>) -> ArchiveError {
    ArchiveError::Format {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), ArchiveError> {
    fs::write(path, text).map_err(io(path))
}

fn read_file(path: &Path) -> Result<String, ArchiveError> {
    fs::read_to_string(path).map_err(io(path))
}

/// Splits a CSV body after checking its header; yields `(line, fields)`.
fn rows<'a>(
    file: &str,
    text: &'a str,
    header: &str,
    arity: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, ArchiveError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        _ => return Err(format_err(file, 1, format!("expected header `{header}`"))),
    }
    let mut out = Vec::new();
    for (i, l) in lines.enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != arity {
            return Err(format_err(
                file,
                i + 2,
                format!("expected {arity} fields, found {}", fields.len()),
            ));
        }
        out.push((i + 2, fields));
    }
    Ok(out)
}

fn num(file: &str, line: usize, s: &str) -> Result<f64, ArchiveError> {
    s.parse::<f64>()
        .map_err(|_| format_err(file, line, format!("bad number `{s}`")))
}

fn int(file: &str, line: usize, s: &str) -> Result<usize, ArchiveError> {
    s.parse::<usize>()
        .map_err(|_| format_err(file, line, format!("bad integer `{s}`")))
}

pub fn write_cells(edges: &[f64], values: &[f64]) -> String {
    let mut out = format!("{CELLS_HEADER}\n");
    for (v, w) in values.iter().zip(edges.windows(2)) {
        let _ = writeln!(out, "{:?},{:?},{:?}", w[0], w[1], v);
    }
    out
}

/// Reads a cell file back into `(edges, values)`. Cells must be contiguous.
pub fn parse_cells(text: &str) -> Result<(Vec<f64>, Vec<f64>), ArchiveError> {
    const FILE: &str = "cells";
    let mut edges = Vec::new();
    let mut values = Vec::new();
    for (line, f) in rows(FILE, text, CELLS_HEADER, 3)? {
        let (a, b, v) = (num(FILE, line, f[0])?, num(FILE, line, f[1])?, num(FILE, line, f[2])?);
        match edges.last() {
            None => edges.push(a),
            Some(&prev) if prev == a => {}
            Some(_) => return Err(format_err(FILE, line, "cells are not contiguous")),
        }
        if !(b > a) {
            return Err(format_err(FILE, line, "empty or reversed cell"));
        }
        edges.push(b);
        values.push(v);
    }
    if values.is_empty() {
        return Err(format_err(FILE, 1, "no cells"));
    }
    Ok((edges, values))
}

pub fn write_overlay(records: &[TraceRecord]) -> String {
    let mut out = format!("{OVERLAY_HEADER}\n");
    for r in records {
        let members: Vec<String> = r.members.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.n,
            r.t,
            members.join("+"),
            r.y,
            r.s,
            r.q,
            r.f_int,
            r.left,
            r.right,
            r.class
        );
    }
    out
}

pub fn parse_overlay(text: &str) -> Result<Vec<TraceRecord>, ArchiveError> {
    const FILE: &str = OVERLAY_FILE;
    let mut out = Vec::new();
    for (line, f) in rows(FILE, text, OVERLAY_HEADER, 10)? {
        let members = f[2]
            .split('+')
            .map(|m| {
                m.parse::<u32>()
                    .map_err(|_| format_err(FILE, line, format!("bad member `{m}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = int(FILE, line, f[0])?;
        if out.last().is_some_and(|p: &TraceRecord| p.n > n) {
            return Err(format_err(FILE, line, "steps must be nondecreasing"));
        }
        out.push(TraceRecord {
            n,
            t: num(FILE, line, f[1])?,
            members,
            y: num(FILE, line, f[3])?,
            s: num(FILE, line, f[4])?,
            q: num(FILE, line, f[5])?,
            f_int: num(FILE, line, f[6])?,
            left: num(FILE, line, f[7])?,
            right: num(FILE, line, f[8])?,
            class: f[9].parse().map_err(|e: String| format_err(FILE, line, e))?,
        });
    }
    Ok(out)
}

pub fn write_diagnostics(report: &DiagnosticsReport) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in &report.records {
        let status = if r.passed() { "pass" } else { "fail" };
        let _ = writeln!(out, "{},{},{:?},{:?},{}", r.check, r.step, r.value, r.bound, status);
    }
    out
}

pub fn parse_diagnostics(text: &str) -> Result<DiagnosticsReport, ArchiveError> {
    const FILE: &str = DIAGNOSTICS_FILE;
    let mut report = DiagnosticsReport::default();
    for (line, f) in rows(FILE, text, DIAGNOSTICS_HEADER, 5)? {
        let check = Check::from_name(f[0])
            .ok_or_else(|| format_err(FILE, line, format!("unknown check `{}`", f[0])))?;
        let rec = CheckRecord {
            check,
            step: int(FILE, line, f[1])?,
            value: num(FILE, line, f[2])?,
            bound: num(FILE, line, f[3])?,
        };
        let status = if rec.passed() { "pass" } else { "fail" };
        if f[4] != status {
            return Err(format_err(FILE, line, "status does not match value and bound"));
        }
        report.records.push(rec);
    }
    Ok(report)
}

fn snapshot_file(index: usize) -> String {
    format!("cells_{index}.csv")
}

/// Writes the archive into `dir`, creating it if needed.
pub fn write_archive(archive: &RunArchive, dir: &Path) -> Result<(), ArchiveError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_file(
        &dir.join(SCENARIO_FILE),
        &crate::scenario::serialize_scenario(&archive.scenario),
    )?;
    let mut index = format!("{INDEX_HEADER}\n");
    for (k, s) in archive.snapshots.iter().enumerate() {
        let _ = writeln!(index, "{k},{},{:?}", s.step, s.time);
        write_file(&dir.join(snapshot_file(k)), &write_cells(&s.edges, &s.values))?;
    }
    write_file(&dir.join(INDEX_FILE), &index)?;
    let f = &archive.final_state;
    write_file(&dir.join(FINAL_FILE), &write_cells(&f.edges, &f.values))?;
    write_file(&dir.join(OVERLAY_FILE), &write_overlay(&archive.overlay))?;
    write_file(&dir.join(DIAGNOSTICS_FILE), &write_diagnostics(&archive.report))?;
    Ok(())
}

pub fn read_archive(dir: &Path) -> Result<RunArchive, ArchiveError> {
    let scenario = parse_scenario(&read_file(&dir.join(SCENARIO_FILE))?)?;
    let dt = scenario.domain.dx * scenario.domain.lambda;
    let n_steps = crate::trajectory::step_count(dt, scenario.domain.horizon);
    let index = read_file(&dir.join(INDEX_FILE))?;
    let mut snapshots = Vec::new();
    for (line, f) in rows(INDEX_FILE, &index, INDEX_HEADER, 3)? {
        let k = int(INDEX_FILE, line, f[0])?;
        if k != snapshots.len() {
            return Err(format_err(INDEX_FILE, line, "snapshot indices must count from 0"));
        }
        let (edges, values) = parse_cells(&read_file(&dir.join(snapshot_file(k)))?)?;
        snapshots.push(Snapshot {
            step: int(INDEX_FILE, line, f[1])?,
            time: num(INDEX_FILE, line, f[2])?,
            edges,
            values,
        });
    }
    let (edges, values) = parse_cells(&read_file(&dir.join(FINAL_FILE))?)?;
    Ok(RunArchive {
        scenario,
        dt,
        n_steps,
        snapshots,
        final_state: Snapshot {
            step: n_steps,
            time: n_steps as f64 * dt,
            edges,
            values,
        },
        overlay: parse_overlay(&read_file(&dir.join(OVERLAY_FILE))?)?,
        report: parse_diagnostics(&read_file(&dir.join(DIAGNOSTICS_FILE))?)?,
    })
}

/// Near-crossing windows inspected at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactRegion {
    pub snapshot: usize,
    pub time: f64,
    pub crossing: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub oscillation: f64,
    pub flagged: bool,
}

/// For every snapshot taken after a declared crossing, the window of
/// `±10Δx` around the crossing position and its excess variation.
pub fn artifact_regions(archive: &RunArchive) -> Vec<ArtifactRegion> {
    let dx = archive.scenario.domain.dx;
    let mut out = Vec::new();
    for (k, s) in archive.snapshots.iter().enumerate() {
        for (c, crossing) in archive.scenario.crossings.iter().enumerate() {
            if s.time < crossing.time {
                continue;
            }
            let half = ARTIFACT_CELLS * dx;
            let (x_lo, x_hi) = (crossing.position - half, crossing.position + half);
            let split = archive
                .overlay
                .iter()
                .filter(|r| r.n + 1 == s.step || (s.step == 0 && r.n == 0))
                .map(|r| r.y)
                .min_by(|a, b| {
                    (a - crossing.position)
                        .abs()
                        .total_cmp(&(b - crossing.position).abs())
                })
                .unwrap_or(crossing.position);
            let osc = oscillation(&s.edges, &s.values, x_lo, x_hi, split);
            out.push(ArtifactRegion {
                snapshot: k,
                time: s.time,
                crossing: c,
                x_lo,
                x_hi,
                oscillation: osc,
                flagged: osc > ARTIFACT_THRESHOLD,
            });
        }
    }
    out
}

/// Plot-ready files: `snapshot_<k>.csv` (`x_center,rho`), the interface
/// overlay and `artifact_regions.csv`. Returns the written paths.
pub fn export_plot_data(archive: &RunArchive, dir: &Path) -> Result<Vec<PathBuf>, ArchiveError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (k, s) in archive.snapshots.iter().enumerate() {
        let mut text = String::from("x_center,rho\n");
        for (x, v) in s.centers().iter().zip(&s.values) {
            let _ = writeln!(text, "{x:?},{v:?}");
        }
        let path = dir.join(format!("snapshot_{k}.csv"));
        write_file(&path, &text)?;
        written.push(path);
    }
    let path = dir.join(OVERLAY_FILE);
    write_file(&path, &write_overlay(&archive.overlay))?;
    written.push(path);
    let mut text = String::from("snapshot,time,crossing,x_lo,x_hi,oscillation,flagged\n");
    for r in artifact_regions(archive) {
        let _ = writeln!(
            text,
            "{},{:?},{},{:?},{:?},{:?},{}",
            r.snapshot, r.time, r.crossing, r.x_lo, r.x_hi, r.oscillation, r.flagged
        );
    }
    let path = dir.join("artifact_regions.csv");
    write_file(&path, &text)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_round_trip() {
        let edges = [0.0, 0.1, 0.25, 0.3];
        let values = [0.1, 1.0 / 3.0, 0.7];
        let (e, v) = parse_cells(&write_cells(&edges, &values)).unwrap();
        assert_eq!(e, edges);
        assert_eq!(v, values);
        assert!(parse_cells("x_left,x_right,rho\n0,1,0.5\n2,3,0.5\n").is_err());
        assert!(parse_cells("x,rho\n").is_err());
    }

    #[test]
    fn diagnostics_round_trip() {
        let mut r = DiagnosticsReport::default();
        r.push(Check::Mass, 3, 1e-13, 1e-10);
        r.push(Check::Entropy, 4, 0.2, 1e-10);
        let text = write_diagnostics(&r);
        assert!(text.contains("entropy,4,0.2,1e-10,fail"));
        assert_eq!(parse_diagnostics(&text).unwrap(), r);
    }
}
