//! Reader for the published UJIIndoorLoc CSV layout.
//!
//! Columns: `WAP001..WAP520`, then LONGITUDE, LATITUDE, FLOOR, BUILDINGID,
//! SPACEID, RELATIVEPOSITION, USERID, PHONEID, TIMESTAMP. A WAP value of
//! 100 means the AP was not detected.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Fingerprint, FingerprintDatabase, ReferencePoint};
use crate::error::{Error, Result};
use crate::location::Location;

pub const UJI_WAP_COLUMNS: usize = 520;
pub const UJI_NOT_DETECTED: f64 = 100.0;
const TRAILING_COLUMNS: usize = 9;

/// Row selection. `None` keeps every value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UjiFilter {
    pub buildings: Option<Vec<i64>>,
    pub floors: Option<Vec<i64>>,
    pub phones: Option<Vec<i64>>,
    /// Drop WAP columns never detected in the selected rows.
    pub drop_undetected_waps: bool,
}

impl UjiFilter {
    fn keep(&self, building: i64, floor: i64, phone: i64) -> bool {
        let ok = |set: &Option<Vec<i64>>, v| set.as_ref().is_none_or(|s| s.contains(&v));
        ok(&self.buildings, building) && ok(&self.floors, floor) && ok(&self.phones, phone)
    }
}

#[derive(Clone, Debug)]
pub struct UjiLoad {
    pub db: FingerprintDatabase,
    /// Projected coordinates of the local frame's origin.
    pub origin: Location,
    /// Original WAP column index (0-based) of each retained feature.
    pub wap_columns: Vec<usize>,
    pub rows_used: usize,
}

struct Row {
    lon: f64,
    lat: f64,
    waps: Vec<Option<f64>>,
}

pub fn load_ujiindoorloc(path: impl AsRef<Path>, filter: &UjiFilter) -> Result<UjiLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())?;
    parse(&mut reader, filter)
}

fn parse<R: std::io::Read>(reader: &mut csv::Reader<R>, filter: &UjiFilter) -> Result<UjiLoad> {
    let width = UJI_WAP_COLUMNS + TRAILING_COLUMNS;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Header is line 1; data rows start at 2.
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                msg: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let num = |col: usize| -> Result<f64> {
            record[col].trim().parse::<f64>().map_err(|e| Error::Parse {
                row,
                msg: format!("column {}: {e}", col + 1),
            })
        };
        let int = |col: usize| -> Result<i64> {
            let v = num(col)?;
            if v.fract() != 0.0 {
                return Err(Error::Parse {
                    row,
                    msg: format!("column {} must be an integer, got {v}", col + 1),
                });
            }
            Ok(v as i64)
        };
        let base = UJI_WAP_COLUMNS;
        let (floor, building, phone) = (int(base + 2)?, int(base + 3)?, int(base + 7)?);
        if !filter.keep(building, floor, phone) {
            continue;
        }
        let mut waps = Vec::with_capacity(UJI_WAP_COLUMNS);
        for col in 0..UJI_WAP_COLUMNS {
            let v = num(col)?;
            if v == UJI_NOT_DETECTED {
                waps.push(None);
            } else if (super::NOT_DETECTED_DBM..=super::MAX_DBM).contains(&v) {
                waps.push(Some(v));
            } else {
                return Err(Error::Parse {
                    row,
                    msg: format!("WAP{:03} value {v} is neither dBm nor {UJI_NOT_DETECTED}", col + 1),
                });
            }
        }
        rows.push(Row {
            lon: num(base)?,
            lat: num(base + 1)?,
            waps,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no UJIIndoorLoc rows match {filter:?}"
        )));
    }

    let wap_columns: Vec<usize> = if filter.drop_undetected_waps {
        (0..UJI_WAP_COLUMNS)
            .filter(|&c| rows.iter().any(|r| r.waps[c].is_some()))
            .collect()
    } else {
        (0..UJI_WAP_COLUMNS).collect()
    };
    if wap_columns.is_empty() {
        return Err(Error::EmptySelection("no WAP detected in the selected rows".into()));
    }

    let origin = Location::new(
        rows.iter().map(|r| r.lon).fold(f64::INFINITY, f64::min),
        rows.iter().map(|r| r.lat).fold(f64::INFINITY, f64::min),
    );
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut rps: Vec<ReferencePoint> = Vec::new();
    for r in &rows {
        let scan = Fingerprint::new(wap_columns.iter().map(|&c| r.waps[c]).collect())?;
        let key = (r.lon.to_bits(), r.lat.to_bits());
        let i = *index.entry(key).or_insert_with(|| {
            rps.push(ReferencePoint {
                location: Location::new(r.lon - origin.x, r.lat - origin.y),
                scans: Vec::new(),
            });
            rps.len() - 1
        });
        rps[i].scans.push(scan);
    }
    let grid = median_nearest_spacing(&rps).unwrap_or(1.0);
    let n = wap_columns.len();
    Ok(UjiLoad {
        db: FingerprintDatabase::new(rps, n, grid)?,
        origin,
        wap_columns,
        rows_used: rows.len(),
    })
}

/// Median distance from each RP to its nearest other RP.
fn median_nearest_spacing(rps: &[ReferencePoint]) -> Option<f64> {
    if rps.len() < 2 {
        return None;
    }
    let mut d: Vec<f64> = rps
        .iter()
        .enumerate()
        .map(|(i, a)| {
            rps.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| a.location.distance(&b.location))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    (m > 0.0).then_some(m)
}
