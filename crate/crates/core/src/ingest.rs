//! CSV loaders and writers.
//!
//! Regression files carry `RSSI1..RSSIk` feature columns plus `X_Actual` and
//! `Y_Actual`. iBeacon files carry a `location` label and beacon columns
//! `b3001..b3013`; labels are mapped to zones through a sidecar file of
//! `label=zone` lines.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so every write/load round trip is exact. All writers go through a
//! temporary file in the target directory that is renamed on success.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::learners::{ClassificationDataset, RegressionDataset, Zone};

pub const RSSI_PREFIX: &str = "RSSI";
pub const X_COLUMN: &str = "X_Actual";
pub const Y_COLUMN: &str = "Y_Actual";
pub const LOCATION_COLUMN: &str = "location";
pub const BEACON_COLUMNS: [&str; 13] = [
    "b3001", "b3002", "b3003", "b3004", "b3005", "b3006", "b3007", "b3008", "b3009", "b3010", "b3011", "b3012",
    "b3013",
];

/// Writes `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// A plain table of string cells with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Parses cell `(row, col)`; `row` is the zero-based data row.
    pub fn number(&self, row: usize, col: usize) -> Result<f64> {
        let cell = self.rows[row][col].trim();
        cell.parse::<f64>().map_err(|_| Error::MalformedNumber {
            row: row + 1,
            column: self.headers[col].clone(),
            value: cell.to_string(),
        })
    }
}

pub fn read_table(path: &Path) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(CsvTable { headers, rows })
}

pub fn write_table(path: &Path, table: &CsvTable) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Indices of the `RSSI*` columns ordered by their numeric suffix.
pub fn rssi_columns(headers: &[String]) -> Vec<usize> {
    let mut cols: Vec<(u64, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(RSSI_PREFIX).and_then(|s| s.parse().ok()).map(|k| (k, i)))
        .collect();
    cols.sort();
    cols.into_iter().map(|(_, i)| i).collect()
}

pub fn load_regression_csv(path: &Path) -> Result<RegressionDataset> {
    regression_from_table(&read_table(path)?)
}

pub fn regression_from_table(t: &CsvTable) -> Result<RegressionDataset> {
    let feats = rssi_columns(&t.headers);
    if feats.is_empty() {
        return Err(Error::MissingColumn(format!("{RSSI_PREFIX}1")));
    }
    let (xc, yc) = (t.column(X_COLUMN)?, t.column(Y_COLUMN)?);
    let mut features = Vec::with_capacity(t.rows.len());
    let mut targets = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        features.push(feats.iter().map(|&c| t.number(r, c)).collect::<Result<Vec<_>>>()?);
        targets.push([t.number(r, xc)?, t.number(r, yc)?]);
    }
    let ds = RegressionDataset { features, targets };
    ds.validate()?;
    Ok(ds)
}

pub fn write_regression_csv(path: &Path, ds: &RegressionDataset) -> Result<()> {
    let f = ds.n_features();
    let mut headers: Vec<String> = (1..=f).map(|i| format!("{RSSI_PREFIX}{i}")).collect();
    headers.push(X_COLUMN.into());
    headers.push(Y_COLUMN.into());
    let rows = ds
        .features
        .iter()
        .zip(&ds.targets)
        .map(|(row, t)| row.iter().chain(t.iter()).map(|v| fmt_f64(*v)).collect())
        .collect();
    write_table(path, &CsvTable { headers, rows })
}

/// Location label to zone.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ZoneMapping {
    pub zones: BTreeMap<String, Zone>,
}

impl ZoneMapping {
    /// Parses `label=zone` lines; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut zones = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (label, zone) = line.split_once('=').ok_or_else(|| Error::MalformedZoneMapping {
                line: i + 1,
                reason: "expected `label=zone`".into(),
            })?;
            let zone: Zone = zone.parse().map_err(|_| Error::MalformedZoneMapping {
                line: i + 1,
                reason: format!("unknown zone `{}`", zone.trim()),
            })?;
            zones.insert(label.trim().to_string(), zone);
        }
        Ok(Self { zones })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, label: &str) -> Result<Zone> {
        self.zones.get(label).copied().ok_or_else(|| Error::UnmappedLocation(label.to_string()))
    }
}

/// Loads labeled iBeacon rows. `-200` readings are kept as feature values.
/// Rows with an empty location label (the unlabeled portion) are rejected.
pub fn load_ibeacon_csv(path: &Path, mapping: &ZoneMapping) -> Result<ClassificationDataset> {
    ibeacon_from_table(&read_table(path)?, mapping)
}

pub fn ibeacon_from_table(t: &CsvTable, mapping: &ZoneMapping) -> Result<ClassificationDataset> {
    let loc = t.column(LOCATION_COLUMN)?;
    let cols = BEACON_COLUMNS.iter().map(|c| t.column(c)).collect::<Result<Vec<_>>>()?;
    let mut ds = ClassificationDataset::default();
    for r in 0..t.rows.len() {
        let label = t.rows[r][loc].trim().to_string();
        ds.zones.push(mapping.get(&label)?);
        ds.features.push(cols.iter().map(|&c| t.number(r, c)).collect::<Result<Vec<_>>>()?);
        ds.locations.push(label);
    }
    Ok(ds)
}

/// Writes the iBeacon layout followed by one-hot `zone_A..zone_D` columns.
/// The loader ignores the one-hot columns and re-derives zones from labels.
pub fn write_ibeacon_csv(path: &Path, ds: &ClassificationDataset) -> Result<()> {
    let mut headers = vec![LOCATION_COLUMN.to_string()];
    headers.extend(BEACON_COLUMNS.iter().map(|s| s.to_string()));
    headers.extend(Zone::ALL.iter().map(|z| format!("zone_{z}")));
    let rows = (0..ds.len())
        .map(|i| {
            let mut row = vec![ds.locations[i].clone()];
            row.extend(ds.features[i].iter().map(|v| fmt_f64(*v)));
            row.extend(ds.zones[i].one_hot().iter().map(|v| v.to_string()));
            row
        })
        .collect();
    write_table(path, &CsvTable { headers, rows })
}
