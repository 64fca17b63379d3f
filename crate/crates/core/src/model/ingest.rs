//! Raw GPS ingestion for the Geolife and T-Drive folder layouts.
//!
//! Both parsers share the same tolerance policy: a malformed line is counted,
//! a bounded sample of warnings is kept for display, and parsing continues; an
//! unreadable file is a fatal error naming the file. Files are visited in
//! sorted path order and records keep (file, line) order, so output is
//! deterministic regardless of parallelism.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use rayon::prelude::*;

use super::ModelError;

/// One GPS fix as read from disk, before grid discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    /// Trajectory grouping key: `user/file` for Geolife, the taxi id for T-Drive.
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
}

/// Parsed records plus the skip accounting.
#[derive(Clone, Debug, Default)]
pub struct IngestOutcome {
    pub records: Vec<RawRecord>,
    pub malformed_lines: usize,
    /// First few skip reasons, for display; `malformed_lines` has the full count.
    pub warnings: Vec<String>,
}

const MAX_WARNINGS: usize = 8;

/// Geolife `.plt` files have 6 header lines, then
/// `lat,lon,flag,altitude,serial_date,date,time` records.
const GEOLIFE_HEADER_LINES: usize = 6;

struct FilePart {
    records: Vec<RawRecord>,
    malformed: usize,
    warnings: Vec<String>,
}

fn merge_parts(parts: Vec<FilePart>) -> IngestOutcome {
    let mut out = IngestOutcome::default();
    for part in parts {
        out.records.extend(part.records);
        out.malformed_lines += part.malformed;
        for w in part.warnings {
            if out.warnings.len() < MAX_WARNINGS {
                out.warnings.push(w);
            }
        }
    }
    out
}

fn read_lossy(path: &Path) -> Result<String, ModelError> {
    let bytes = std::fs::read(path)
        .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, ModelError> {
    let iter = std::fs::read_dir(dir)
        .map_err(|source| ModelError::Io { path: dir.to_path_buf(), source })?;
    let mut entries = Vec::new();
    for entry in iter {
        let entry = entry.map_err(|source| ModelError::Io { path: dir.to_path_buf(), source })?;
        entries.push(entry.path());
    }
    entries.sort();
    Ok(entries)
}

fn parse_coordinate(field: &str, low: f64, high: f64) -> Option<f64> {
    let v: f64 = field.trim().parse().ok()?;
    (v.is_finite() && (low..=high).contains(&v)).then_some(v)
}

fn parse_datetime(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

/// Ingest a Geolife-layout tree: `<root>/<user>/Trajectory/*.plt`.
///
/// Each `.plt` file becomes its own trajectory id (`user/file-stem`), matching
/// the usual treatment of Geolife where one file is one recorded outing.
pub fn ingest_geolife(root: &Path) -> Result<IngestOutcome, ModelError> {
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    for user_dir in sorted_entries(root)? {
        if !user_dir.is_dir() {
            continue;
        }
        let traj_dir = user_dir.join("Trajectory");
        if !traj_dir.is_dir() {
            continue;
        }
        let user = user_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for file in sorted_entries(&traj_dir)? {
            if file.extension().is_some_and(|e| e.eq_ignore_ascii_case("plt")) {
                files.push((user.clone(), file));
            }
        }
    }
    if files.is_empty() {
        return Err(ModelError::NoInputFiles(root.to_path_buf()));
    }
    let parts: Result<Vec<FilePart>, ModelError> = files
        .par_iter()
        .map(|(user, path)| parse_geolife_file(user, path))
        .collect();
    Ok(merge_parts(parts?))
}

fn parse_geolife_file(user: &str, path: &Path) -> Result<FilePart, ModelError> {
    let text = read_lossy(path)?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let id = format!("{user}/{stem}");
    let mut part = FilePart { records: Vec::new(), malformed: 0, warnings: Vec::new() };
    for (line_no, line) in text.lines().enumerate().skip(GEOLIFE_HEADER_LINES) {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = if fields.len() >= 7 {
            match (
                parse_coordinate(fields[0], -90.0, 90.0),
                parse_coordinate(fields[1], -180.0, 180.0),
                parse_datetime(&format!("{} {}", fields[5].trim(), fields[6].trim())),
            ) {
                (Some(lat), Some(lon), Some(timestamp)) => {
                    Some(RawRecord { id: id.clone(), lat, lon, timestamp })
                }
                _ => None,
            }
        } else {
            None
        };
        match parsed {
            Some(r) => part.records.push(r),
            None => {
                part.malformed += 1;
                if part.warnings.len() < MAX_WARNINGS {
                    part.warnings.push(format!(
                        "{}:{line_no}: skipping malformed record",
                        path.display()
                    ));
                }
            }
        }
    }
    if part.records.is_empty() {
        part.warnings.insert(0, format!("{}: no records", path.display()));
    }
    Ok(part)
}

/// Ingest a T-Drive-layout directory: `<root>/*.txt`, lines of
/// `taxi_id,datetime,longitude,latitude` (longitude first).
pub fn ingest_tdrive(root: &Path) -> Result<IngestOutcome, ModelError> {
    let files: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt")))
        .collect();
    if files.is_empty() {
        return Err(ModelError::NoInputFiles(root.to_path_buf()));
    }
    let parts: Result<Vec<FilePart>, ModelError> =
        files.par_iter().map(|path| parse_tdrive_file(path)).collect();
    Ok(merge_parts(parts?))
}

fn parse_tdrive_file(path: &Path) -> Result<FilePart, ModelError> {
    let text = read_lossy(path)?;
    let mut part = FilePart { records: Vec::new(), malformed: 0, warnings: Vec::new() };
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = if fields.len() == 4 && !fields[0].trim().is_empty() {
            match (
                parse_datetime(fields[1]),
                parse_coordinate(fields[2], -180.0, 180.0),
                parse_coordinate(fields[3], -90.0, 90.0),
            ) {
                (Some(timestamp), Some(lon), Some(lat)) => {
                    Some(RawRecord { id: fields[0].trim().to_string(), lat, lon, timestamp })
                }
                _ => None,
            }
        } else {
            None
        };
        match parsed {
            Some(r) => part.records.push(r),
            None => {
                part.malformed += 1;
                if part.warnings.len() < MAX_WARNINGS {
                    part.warnings.push(format!(
                        "{}:{line_no}: skipping malformed record",
                        path.display()
                    ));
                }
            }
        }
    }
    if part.records.is_empty() {
        part.warnings.insert(0, format!("{}: no records", path.display()));
    }
    Ok(part)
}
