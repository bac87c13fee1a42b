//! Native CSV layout.
//!
//! Database: a `# ap_count=P grid_size=G` metadata line, then header
//! `x,y,scan_id,f1..fN` and one row per scan. Tracks: `# initial_known=B`,
//! then `point_id,x,y,scan_id,f1..fN`. Missing readings are written `NA`.
//! Floats use the shortest representation that parses back bit-exactly.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Fingerprint, FingerprintDatabase, ReferencePoint, TestTrack, TrackPoint};
use crate::error::{Error, Result};
use crate::location::Location;

const NA: &str = "NA";

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn feature_header(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|j| format!("f{j}"))
}

pub fn write_database(db: &FingerprintDatabase, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# ap_count={} grid_size={}", db.ap_count(), db.grid_size())?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = vec!["x".to_string(), "y".into(), "scan_id".into()];
        header.extend(feature_header(db.feature_count()));
        w.write_record(&header)?;
        for rp in db.rps() {
            for (s, scan) in rp.scans.iter().enumerate() {
                let mut rec = vec![rp.location.x.to_string(), rp.location.y.to_string(), s.to_string()];
                rec.extend(scan.values().iter().map(|&v| fmt_value(v)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_track(track: &TestTrack, path: impl AsRef<Path>) -> Result<()> {
    let n = track
        .points
        .first()
        .and_then(|p| p.scans.first())
        .map_or(0, Fingerprint::len);
    let mut out = Vec::new();
    writeln!(out, "# initial_known={}", track.initial_known)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = vec!["point_id".to_string(), "x".into(), "y".into(), "scan_id".into()];
        header.extend(feature_header(n));
        w.write_record(&header)?;
        for (k, p) in track.points.iter().enumerate() {
            for (s, scan) in p.scans.iter().enumerate() {
                let mut rec = vec![
                    k.to_string(),
                    p.location.x.to_string(),
                    p.location.y.to_string(),
                    s.to_string(),
                ];
                rec.extend(scan.values().iter().map(|&v| fmt_value(v)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Splits off the metadata line and parses its `key=value` pairs.
fn split_meta(text: &str) -> Result<(HashMap<String, String>, &str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let meta = first.strip_prefix('#').ok_or_else(|| Error::Parse {
        row: 1,
        msg: "missing '#' metadata line".into(),
    })?;
    let map = meta
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    Ok((map, rest))
}

fn meta_value<T: std::str::FromStr>(meta: &HashMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            row: 1,
            msg: format!("metadata key '{key}' missing or invalid"),
        })
}

fn parse_f64(s: &str, row: usize, what: &str) -> Result<f64> {
    s.parse().map_err(|e| Error::Parse {
        row,
        msg: format!("{what}: {e}"),
    })
}

fn parse_scan(fields: &csv::StringRecord, from: usize, row: usize) -> Result<Fingerprint> {
    let values = fields
        .iter()
        .skip(from)
        .map(|f| {
            if f == NA {
                Ok(None)
            } else {
                parse_f64(f, row, "feature").map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Fingerprint::new(values).map_err(|e| Error::Parse {
        row,
        msg: e.to_string(),
    })
}

pub fn read_database(path: impl AsRef<Path>) -> Result<FingerprintDatabase> {
    let text = fs::read_to_string(path)?;
    let (meta, body) = split_meta(&text)?;
    let ap_count: usize = meta_value(&meta, "ap_count")?;
    let grid_size: f64 = meta_value(&meta, "grid_size")?;
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut rps: Vec<ReferencePoint> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 3;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() < 4 {
            return Err(Error::Parse {
                row,
                msg: "too few columns".into(),
            });
        }
        let loc = Location::new(parse_f64(&rec[0], row, "x")?, parse_f64(&rec[1], row, "y")?);
        let scan = parse_scan(&rec, 3, row)?;
        let k = *index.entry((loc.x.to_bits(), loc.y.to_bits())).or_insert_with(|| {
            rps.push(ReferencePoint {
                location: loc,
                scans: Vec::new(),
            });
            rps.len() - 1
        });
        rps[k].scans.push(scan);
    }
    FingerprintDatabase::new(rps, ap_count, grid_size)
}

pub fn read_track(path: impl AsRef<Path>) -> Result<TestTrack> {
    let text = fs::read_to_string(path)?;
    let (meta, body) = split_meta(&text)?;
    let initial_known: bool = meta_value(&meta, "initial_known")?;
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let mut points: Vec<TrackPoint> = Vec::new();
    let mut last_id: Option<String> = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 3;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() < 5 {
            return Err(Error::Parse {
                row,
                msg: "too few columns".into(),
            });
        }
        let scan = parse_scan(&rec, 4, row)?;
        if last_id.as_deref() == Some(&rec[0]) {
            points.last_mut().unwrap().scans.push(scan);
        } else {
            let loc = Location::new(parse_f64(&rec[1], row, "x")?, parse_f64(&rec[2], row, "y")?);
            points.push(TrackPoint {
                location: loc,
                scans: vec![scan],
            });
            last_id = Some(rec[0].to_string());
        }
    }
    TestTrack::new(points, initial_known)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticEnvironment};

    #[test]
    fn database_and_track_round_trip() {
        let env = SyntheticEnvironment {
            detection_floor_dbm: -65.0,
            track: crate::dataset::TrackSpec {
                scans_per_point: 2,
                points: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let (db, track) = generate_synthetic(&env, 3).unwrap();
        assert!(db.rps().iter().any(|rp| rp.scans.iter().any(|s| !s.is_detected(0))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.csv");
        write_database(&db, &p).unwrap();
        assert_eq!(read_database(&p).unwrap(), db);
        let t = dir.path().join("track.csv");
        write_track(&track, &t).unwrap();
        assert_eq!(read_track(&t).unwrap(), track);
    }

    #[test]
    fn missing_metadata_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.csv");
        fs::write(&p, "x,y,scan_id,f1\n0,0,0,-50\n").unwrap();
        assert!(matches!(read_database(&p), Err(Error::Parse { row: 1, .. })));
    }
}
