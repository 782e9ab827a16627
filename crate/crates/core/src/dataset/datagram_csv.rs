//! Datagram CSV: header `r,theta,phi,v,rss`, one signal per row, angles in
//! radians. A missing signal strength is an empty field. Numbers are written
//! in Rust's shortest round-trip form, so a write/read pair is exact.

use std::path::Path;

use super::{RadarDatagram, RadarSignal};
use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["r", "theta", "phi", "v", "rss"];

pub fn datagram_to_csv(d: &RadarDatagram) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for s in &d.signals {
        let rss = s.rss.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", s.r, s.theta, s.phi, s.v, rss));
    }
    out
}

pub fn write_datagram_csv(path: &Path, d: &RadarDatagram) -> Result<()> {
    std::fs::write(path, datagram_to_csv(d)).map_err(|e| Error::io(path, e))
}

/// Parses a datagram. Line numbers in errors are 1-based file lines (the
/// header is line 1). Every row violating a signal invariant is listed.
pub fn parse_datagram_csv(text: &str, frame_id: &str, origin: &Path) -> Result<RadarDatagram> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(origin, 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::parse(origin, 1, format!("expected header {:?}", HEADER.join(","))));
    }
    let mut signals = Vec::new();
    let mut violations: Vec<(usize, String)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(origin, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 5 {
            return Err(Error::parse(origin, line, format!("expected 5 fields, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(origin, line, format!("{} = {:?} is not a number", HEADER[i], &rec[i])))
        };
        let rss = if rec[4].is_empty() { None } else { Some(num(4)?) };
        let s = RadarSignal {
            r: num(0)?,
            theta: num(1)?,
            phi: num(2)?,
            v: num(3)?,
            rss,
        };
        if let Some(msg) = s.violation() {
            violations.push((line, msg));
        }
        signals.push(s);
    }
    if let Some((first, _)) = violations.first() {
        let all: Vec<String> = violations.iter().map(|(l, m)| format!("line {l}: {m}")).collect();
        return Err(Error::parse(origin, *first, format!("range violation(s): {}", all.join("; "))));
    }
    Ok(RadarDatagram::new(frame_id, signals))
}

/// Reads a datagram; the frame id is the file stem.
pub fn read_datagram_csv(path: &Path) -> Result<RadarDatagram> {
    let text = super::read_to_string(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_datagram_csv(&text, &id, path)
}
