//! Plain-text file formats.
//!
//! Trace CSV:
//!
//! ```text
//! # unit=microsiemens rate_hz=4
//! t_s,value
//! 0,2.01
//! 0.25,2.02
//! ```
//!
//! Acceleration CSV carries both channels:
//!
//! ```text
//! # unit_l=m_per_s2 unit_r=rad_per_s2 rate_hz=4
//! t_s,a_l,a_r
//! ```
//!
//! A dataset directory holds `manifest.csv` plus one sub-directory per
//! session with `accel.csv` and `eda.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scr::ScrEvent;
use crate::signal::{Trace, Unit};
use crate::simulate::SessionRecord;
use crate::surrogate::parse_scalar;

fn meta_line(text: &str) -> Result<BTreeMap<String, String>> {
    let first = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::Parse("missing `# key=value` metadata line".into()))?;
    first
        .split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("metadata token `{kv}`")))
        })
        .collect()
}

fn meta_get<'a>(meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Parse(format!("metadata: missing `{key}`")))
}

/// Parses the data rows below `header`, checking column count and that the
/// time column is uniform at `rate_hz`.
fn parse_rows<T: Scalar>(text: &str, header: &str, rate_hz: T) -> Result<Vec<Vec<T>>> {
    let mut lines = text.lines().skip(1).filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("expected header `{header}`, got {other:?}"))),
    }
    let cols = header.split(',').count();
    let tol = T::lit(1e-6);
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = line.split(',').map(parse_scalar::<T>).collect::<Result<Vec<T>>>()?;
            if row.len() != cols {
                return Err(Error::Parse(format!("row {}: expected {cols} columns", i + 1)));
            }
            let expect = T::from_count(i) / rate_hz;
            if (row[0] - expect).abs() > tol * expect.abs().max(T::one()) {
                return Err(Error::Parse(format!(
                    "row {}: timestamp {} not on the {} Hz grid",
                    i + 1,
                    row[0],
                    rate_hz
                )));
            }
            Ok(row)
        })
        .collect()
}

pub fn trace_to_csv<T: Scalar>(t: &Trace<T>) -> String {
    let mut s = format!("# unit={} rate_hz={}\nt_s,value\n", t.unit(), t.rate_hz());
    for (i, v) in t.samples().iter().enumerate() {
        s += &format!("{},{}\n", T::from_count(i) / t.rate_hz(), v);
    }
    s
}

pub fn trace_from_csv<T: Scalar>(text: &str) -> Result<Trace<T>> {
    let meta = meta_line(text)?;
    let unit: Unit = meta_get(&meta, "unit")?.parse()?;
    let rate: T = parse_scalar(meta_get(&meta, "rate_hz")?)?;
    let rows = parse_rows(text, "t_s,value", rate)?;
    Trace::new(rows.into_iter().map(|r| r[1]).collect(), rate, unit)
}

pub fn accel_to_csv<T: Scalar>(a_l: &Trace<T>, a_r: &Trace<T>) -> String {
    let mut s = format!(
        "# unit_l={} unit_r={} rate_hz={}\nt_s,a_l,a_r\n",
        a_l.unit(),
        a_r.unit(),
        a_l.rate_hz()
    );
    for (i, (l, r)) in a_l.samples().iter().zip(a_r.samples()).enumerate() {
        s += &format!("{},{},{}\n", T::from_count(i) / a_l.rate_hz(), l, r);
    }
    s
}

pub fn accel_from_csv<T: Scalar>(text: &str) -> Result<(Trace<T>, Trace<T>)> {
    let meta = meta_line(text)?;
    let unit_l: Unit = meta_get(&meta, "unit_l")?.parse()?;
    let unit_r: Unit = meta_get(&meta, "unit_r")?.parse()?;
    let rate: T = parse_scalar(meta_get(&meta, "rate_hz")?)?;
    let rows = parse_rows(text, "t_s,a_l,a_r", rate)?;
    let (l, r): (Vec<T>, Vec<T>) = rows.into_iter().map(|row| (row[1], row[2])).unzip();
    Ok((Trace::new(l, rate, unit_l)?, Trace::new(r, rate, unit_r)?))
}

/// `onset_s,peak_s,amplitude`
pub fn events_to_csv<T: Scalar>(events: &[ScrEvent<T>], rate_hz: T) -> String {
    let mut s = String::from("onset_s,peak_s,amplitude\n");
    for e in events {
        s += &format!(
            "{},{},{}\n",
            T::from_count(e.onset_idx) / rate_hz,
            T::from_count(e.peak_idx) / rate_hz,
            e.amplitude
        );
    }
    s
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_session<T: Scalar>(dir: &Path, rec: &SessionRecord<T>) -> Result<()> {
    let sdir = dir.join(&rec.id);
    write_atomic(&sdir.join("accel.csv"), &accel_to_csv(&rec.a_l, &rec.a_r))?;
    write_atomic(&sdir.join("eda.csv"), &trace_to_csv(&rec.eda))
}

pub fn read_session<T: Scalar>(dir: &Path, id: &str) -> Result<SessionRecord<T>> {
    let sdir = dir.join(id);
    let (a_l, a_r) = accel_from_csv(&fs::read_to_string(sdir.join("accel.csv"))?)?;
    let eda = trace_from_csv(&fs::read_to_string(sdir.join("eda.csv"))?)?;
    SessionRecord::new(id, a_l, a_r, eda)
}

pub fn write_dataset<T: Scalar>(dir: &Path, records: &[SessionRecord<T>], manifest: &Manifest) -> Result<()> {
    for rec in records {
        write_session(dir, rec)?;
    }
    write_atomic(&dir.join("manifest.csv"), &manifest.to_csv())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Manifest::from_csv(&fs::read_to_string(dir.join("manifest.csv"))?)
}
