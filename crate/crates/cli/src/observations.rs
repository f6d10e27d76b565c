//! Station observation tables (`station,x,y,t,value`).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;
use xdep_core::sim::SiteSet;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
struct Row {
    station: String,
    x: f64,
    y: f64,
    t: i64,
    value: Option<String>,
}

/// Observations aligned on a common time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    /// Station ids in order of first appearance.
    pub stations: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Sorted union of all time indices.
    pub times: Vec<i64>,
    /// `times × stations`; NaN marks a missing cell.
    pub values: Array2<f64>,
}

fn parse_value(raw: Option<&str>) -> Result<f64, String> {
    match raw.map(str::trim) {
        None | Some("") => Ok(f64::NAN),
        Some(s) if s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") => Ok(f64::NAN),
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("value {s:?} is not a finite number")),
        },
    }
}

impl ObservationTable {
    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["station", "x", "y", "t", "value"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(CliError::Config(format!(
                "{source}: header must be `station,x,y,t,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut stations: Vec<String> = Vec::new();
        let mut coords: Vec<[f64; 2]> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, i64), f64> = HashMap::new();
        let mut times = BTreeSet::new();
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let line = line + 2;
            let row = row.map_err(|e| CliError::Config(format!("{source}:{line}: {e}")))?;
            if !(row.x.is_finite() && row.y.is_finite()) {
                return Err(CliError::Config(format!("{source}:{line}: station coordinates must be finite")));
            }
            let s = *index.entry(row.station.clone()).or_insert_with(|| {
                stations.push(row.station.clone());
                coords.push([row.x, row.y]);
                stations.len() - 1
            });
            if coords[s] != [row.x, row.y] {
                return Err(CliError::Config(format!("{source}:{line}: station {} changes coordinates", row.station)));
            }
            let v = parse_value(row.value.as_deref()).map_err(|e| CliError::Config(format!("{source}:{line}: {e}")))?;
            if cells.insert((s, row.t), v).is_some() {
                return Err(CliError::Config(format!("{source}:{line}: duplicate observation for station {} at t={}", row.station, row.t)));
            }
            times.insert(row.t);
        }
        if stations.is_empty() {
            return Err(CliError::Config(format!("{source}: no observations")));
        }
        let times: Vec<i64> = times.into_iter().collect();
        let values = Array2::from_shape_fn((times.len(), stations.len()), |(r, s)| {
            cells.get(&(s, times[r])).copied().unwrap_or(f64::NAN)
        });
        Ok(Self {
            stations,
            coords,
            times,
            values,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(crate::error::io_at(path))?;
        Self::from_reader(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// Missing `(station, t)` cells, including those created by alignment.
    pub fn missing_cells(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Station coordinates min-max rescaled into the unit square.
    pub fn sites(&self) -> CliResult<SiteSet> {
        SiteSet::rescaled(&self.coords).map_err(CliError::from)
    }
}
