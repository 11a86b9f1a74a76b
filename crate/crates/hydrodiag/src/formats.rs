//! CSV and JSON file formats.
//!
//! Input data is one CSV file: a `timestamp` column in ISO-8601 (UTC when no
//! offset is given) followed by one column per signal, headed `name` or
//! `name:unit`. An empty cell or `NaN` marks a missing value. Every export
//! writes floats in shortest round-trip form, so reading a file back yields
//! the same bits.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use hydrodiag_core::cluster::ClusterAssignment;
use hydrodiag_core::ingest::{FeatureMatrix, Signal, Timestamp};
use hydrodiag_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parses RFC 3339 (`2018-09-01T00:00:00Z`, `...+02:00`), or a naive
/// `YYYY-MM-DD[T ]HH:MM[:SS]` / `YYYY-MM-DD` read as UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp(t.timestamp()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(t.and_utc().timestamp()));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| Timestamp(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()))
}

pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(t.0, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| t.0.to_string())
}

/// Shortest representation that parses back to the same value; infinities
/// are `inf` / `-inf`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn parse_header(cell: &str) -> Signal {
    match cell.trim().split_once(':') {
        Some((name, unit)) if !unit.trim().is_empty() => Signal::new(name.trim(), Some(unit.trim())),
        Some((name, _)) => Signal::new(name.trim(), None),
        None => Signal::new(cell.trim(), None),
    }
}

fn header_cell(s: &Signal) -> String {
    match &s.unit {
        Some(u) => format!("{}:{u}", s.name),
        None => s.name.clone(),
    }
}

fn reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    read_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// Reads a signal CSV. Cells stay NaN where values are missing; the rows must
/// already be in strictly increasing time order.
pub fn read_csv(r: impl Read) -> Result<FeatureMatrix> {
    let mut rdr = reader(r);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::parse(1, "empty file")),
    };
    if header.get(0).map(str::to_ascii_lowercase).as_deref() != Some("timestamp") {
        return Err(Error::parse(1, "first column must be `timestamp`"));
    }
    let signals: Vec<Signal> = header.iter().skip(1).map(parse_header).collect();
    if signals.is_empty() {
        return Err(Error::parse(1, "no signal columns"));
    }
    for (j, s) in signals.iter().enumerate() {
        if s.name.is_empty() {
            return Err(Error::parse(1, format!("signal column {} has no name", j + 2)));
        }
        if signals[..j].iter().any(|o| o.name == s.name) {
            return Err(Error::parse(1, format!("duplicate signal `{}`", s.name)));
        }
    }
    let width = header.len();
    let mut timestamps: Vec<Timestamp> = Vec::new();
    let mut data = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let raw = rec.get(0).unwrap_or("");
        let t = parse_timestamp(raw)
            .ok_or_else(|| Error::parse(line, format!("malformed timestamp `{raw}`")))?;
        if let Some(&prev) = timestamps.last() {
            if t == prev {
                return Err(Error::parse(line, format!("duplicate timestamp {raw}")));
            }
            if t < prev {
                return Err(Error::parse(
                    line,
                    format!("timestamp {raw} is earlier than the previous row"),
                ));
            }
        }
        timestamps.push(t);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::parse(
                            line,
                            format!("invalid value `{cell}` for signal `{}`", signals[j].name),
                        ))
                    }
                }
            };
            data.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::parse(2, "no data rows"));
    }
    let n = timestamps.len();
    let d = signals.len();
    Ok(FeatureMatrix::new(signals, timestamps, Matrix::from_vec(n, d, data)?)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

/// Writes a signal CSV readable by [`read_csv`]; missing values become empty
/// cells.
pub fn write_features_csv(m: &FeatureMatrix, w: impl Write) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["timestamp".to_string()];
    header.extend(m.signals().iter().map(header_cell));
    out.write_record(&header)?;
    for (i, t) in m.timestamps().iter().enumerate() {
        let mut rec = vec![format_timestamp(*t)];
        rec.extend(m.data().row(i).iter().map(|&v| if v.is_nan() { String::new() } else { format_f64(v) }));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_features_csv(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_features_csv(m, create(path.as_ref())?)
}

/// One embedded datapoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub row_id: usize,
    pub timestamp: Timestamp,
    pub coords: Vec<f64>,
}

/// `timestamp,x,y[,z],row_id`
pub fn write_embedding_csv(points: &[EmbeddedPoint], w: impl Write) -> Result<()> {
    let dims = points.first().map_or(2, |p| p.coords.len());
    let mut out = writer(w);
    let mut header = vec!["timestamp", "x", "y"];
    if dims == 3 {
        header.push("z");
    }
    header.push("row_id");
    out.write_record(&header)?;
    for p in points {
        let mut rec = vec![format_timestamp(p.timestamp)];
        rec.extend(p.coords.iter().map(|&v| format_f64(v)));
        rec.push(p.row_id.to_string());
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Parameters written next to an assignment CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSidecar {
    pub algorithm: String,
    pub params: std::collections::BTreeMap<String, String>,
    pub n_clusters: usize,
    pub noise: usize,
    pub rows: usize,
}

impl AssignmentSidecar {
    pub fn of(a: &ClusterAssignment) -> Self {
        Self {
            algorithm: a.algorithm.clone(),
            params: a.params.clone(),
            n_clusters: a.n_clusters,
            noise: a.noise_count(),
            rows: a.len(),
        }
    }
}

/// `row_id,timestamp,label`; `row_ids[i]` and `timestamps[i]` belong to
/// `a.labels[i]`.
pub fn write_assignment_csv(a: &ClusterAssignment, row_ids: &[usize], timestamps: &[Timestamp], w: impl Write) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["row_id", "timestamp", "label"])?;
    for ((id, t), l) in row_ids.iter().zip(timestamps).zip(&a.labels) {
        out.write_record([id.to_string(), format_timestamp(*t), l.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes the assignment CSV at `path` and its JSON sidecar at
/// `path` with the extension replaced by `.json`.
pub fn save_assignment(a: &ClusterAssignment, row_ids: &[usize], timestamps: &[Timestamp], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_assignment_csv(a, row_ids, timestamps, create(path)?)?;
    let sidecar = path.with_extension("json");
    let mut w = create(&sidecar)?;
    serde_json::to_writer_pretty(&mut w, &AssignmentSidecar::of(a))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&sidecar, e))
}

/// `row_id,label`
pub fn write_reference_csv(labels: &[usize], w: impl Write) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["row_id", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        out.write_record([i.to_string(), l.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_reference_csv(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    write_reference_csv(labels, create(path.as_ref())?)
}

/// Reads `row_id,label`; row ids must be `0..n` in order.
pub fn read_reference_csv(r: impl Read) -> Result<Vec<usize>> {
    let mut rdr = reader(r);
    let mut labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if k == 0 {
            if rec.get(0) != Some("row_id") || rec.get(1) != Some("label") {
                return Err(Error::parse(line, "expected header `row_id,label`"));
            }
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::parse(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid row id `{}`", &rec[0])))?;
        if id != labels.len() {
            return Err(Error::parse(line, format!("row id {id} out of order")));
        }
        labels.push(
            rec[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid label `{}`", &rec[1])))?,
        );
    }
    Ok(labels)
}

pub fn load_reference_csv(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    read_reference_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

/// One line of the score export: a datapoint scored by one state model (or
/// the global model, state `global`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub row_id: usize,
    pub timestamp: Timestamp,
    pub state: String,
    #[serde(with = "json_f64")]
    pub mae: f64,
    #[serde(with = "json_f64")]
    pub dev: f64,
    pub nearest_state: String,
}

/// JSON has no infinities; they travel as the strings `inf` / `-inf` / `NaN`.
pub mod json_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_f64(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `timestamp,state,mae,dev,nearest_state`
pub fn write_scores_csv(rows: &[ScoreRow], w: impl Write) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["timestamp", "state", "mae", "dev", "nearest_state"])?;
    for r in rows {
        out.write_record([
            format_timestamp(r.timestamp),
            r.state.clone(),
            format_f64(r.mae),
            format_f64(r.dev),
            r.nearest_state.clone(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn scores_csv_bytes(rows: &[ScoreRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_scores_csv(rows, &mut buf)?;
    Ok(buf)
}

pub fn save_scores_csv(rows: &[ScoreRow], path: impl AsRef<Path>) -> Result<()> {
    write_scores_csv(rows, create(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<FeatureMatrix> {
        read_csv(s.as_bytes())
    }

    #[test]
    fn three_rows_two_signals() {
        let m = load("timestamp,power:MW,speed:RPM\n2018-09-01T00:00:00Z,1,2\n2018-09-01T00:10:00Z,3,4\n2018-09-01T00:20:00Z,5,6\n").unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.signal_names(), vec!["power", "speed"]);
        assert_eq!(m.signals()[0].unit.as_deref(), Some("MW"));
        assert_eq!(m.data().row(2), &[5.0, 6.0]);
        assert_eq!(m.timestamps()[1].0 - m.timestamps()[0].0, 600);
    }

    #[test]
    fn empty_cell_and_nan_are_missing() {
        let m = load("timestamp,a,b\n2018-01-01,1,\n2018-01-02,NaN,4\n").unwrap();
        assert!(m.is_missing(0, 1));
        assert!(m.is_missing(1, 0));
        assert_eq!(m.data().get(0, 0), 1.0);
        assert_eq!(m.data().get(1, 1), 4.0);
    }

    #[test]
    fn decreasing_timestamp_names_the_line() {
        let e = load("timestamp,a\n2018-01-02,1\n2018-01-03,2\n2018-01-01,3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        assert!(e.to_string().contains("earlier"));
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let e = load("timestamp,a\n2018-01-02,1\n2018-01-02,2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(e.to_string().contains("duplicate"));
    }

    #[test]
    fn ragged_row_rejected() {
        let e = load("timestamp,a,b\n2018-01-02,1,2\n2018-01-03,2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn malformed_timestamp_has_line_number() {
        let e = load("timestamp,a\n2018-01-02,1\nyesterday,2\n").unwrap_err();
        assert_eq!(e.to_string(), "line 3: malformed timestamp `yesterday`");
    }

    #[test]
    fn bad_value_and_header() {
        assert!(load("timestamp,a\n2018-01-02,abc\n").is_err());
        assert!(load("time,a\n2018-01-02,1\n").is_err());
        assert!(load("timestamp,a,a\n2018-01-02,1,2\n").is_err());
        assert!(load("timestamp\n2018-01-02\n").is_err());
        assert!(load("timestamp,a\n").is_err());
    }

    #[test]
    fn timestamp_forms() {
        let z = parse_timestamp("2018-09-01T00:00:00Z").unwrap();
        assert_eq!(z, Timestamp(1_535_760_000));
        assert_eq!(parse_timestamp("2018-09-01T02:00:00+02:00"), Some(z));
        assert_eq!(parse_timestamp("2018-09-01 00:00:00"), Some(z));
        assert_eq!(parse_timestamp("2018-09-01"), Some(z));
        assert_eq!(format_timestamp(z), "2018-09-01T00:00:00Z");
        assert_eq!(parse_timestamp("2018-13-01"), None);
    }

    #[test]
    fn features_round_trip_bit_exact() {
        let m = load("timestamp,a:MW,b\n2018-01-01T00:00:00Z,0.1,\n2018-01-01T00:10:00Z,1e-300,3.141592653589793\n").unwrap();
        let mut buf = Vec::new();
        write_features_csv(&m, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.signals(), m.signals());
        assert_eq!(back.timestamps(), m.timestamps());
        let bits = |x: &FeatureMatrix| x.data().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn score_csv_layout() {
        let rows = vec![ScoreRow {
            row_id: 0,
            timestamp: Timestamp(0),
            state: "operating".into(),
            mae: 0.25,
            dev: f64::INFINITY,
            nearest_state: "operating".into(),
        }];
        let s = String::from_utf8(scores_csv_bytes(&rows).unwrap()).unwrap();
        assert_eq!(s, "timestamp,state,mae,dev,nearest_state\n1970-01-01T00:00:00Z,operating,0.25,inf,operating\n");
    }

    #[test]
    fn infinite_scores_survive_json() {
        let row = ScoreRow {
            row_id: 1,
            timestamp: Timestamp(0),
            state: "a".into(),
            mae: 0.1 + 0.2,
            dev: f64::INFINITY,
            nearest_state: "a".into(),
        };
        let json = serde_json::to_string(&row).unwrap();
        assert!(json.contains("\"inf\""));
        let back: ScoreRow = serde_json::from_str(&json).unwrap();
        assert_eq!(back, row);
    }

    #[test]
    fn reference_round_trip() {
        let mut buf = Vec::new();
        write_reference_csv(&[0, 1, 1], &mut buf).unwrap();
        assert_eq!(read_reference_csv(buf.as_slice()).unwrap(), vec![0, 1, 1]);
        assert!(read_reference_csv("row_id,label\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn embedding_header_follows_dims() {
        let p = |c: Vec<f64>| EmbeddedPoint {
            row_id: 3,
            timestamp: Timestamp(60),
            coords: c,
        };
        let mut buf = Vec::new();
        write_embedding_csv(&[p(vec![1.0, -2.5])], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "timestamp,x,y,row_id\n1970-01-01T00:01:00Z,1,-2.5,3\n");
        let mut buf = Vec::new();
        write_embedding_csv(&[p(vec![1.0, 2.0, 3.0])], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("timestamp,x,y,z,row_id\n"));
    }
}
