//! Time-series data model, Yahoo-S5-layout CSV ingestion and the small
//! windowing/standardization helpers the detectors share.
//!
//! The on-disk layout is a UTF-8 CSV with a header row of either
//! `timestamp,value` or `timestamp,value,is_anomaly`. Timestamps are integer
//! epoch seconds, values are decimal reals and the ground-truth column, when
//! present, holds `0` or `1`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub timestamp: i64,
    pub value: f64,
}

/// An ordered series with optional per-point anomaly flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    id: String,
    points: Vec<TimePoint>,
    truth: Option<Vec<bool>>,
}

impl LabeledSeries {
    /// Builds a series, sorting points by timestamp.
    ///
    /// Rejects duplicate timestamps, non-finite values and truth vectors
    /// whose length differs from the number of points.
    pub fn new(
        id: impl Into<String>,
        points: Vec<TimePoint>,
        truth: Option<Vec<bool>>,
    ) -> Result<Self> {
        if let Some(t) = &truth {
            if t.len() != points.len() {
                return Err(Error::Shape(format!(
                    "truth has {} entries but series has {} points",
                    t.len(),
                    points.len()
                )));
            }
        }
        // Positions here are 0-based rows; report them as file lines (header = 1).
        if let Some(pos) = points.iter().position(|p| !p.value.is_finite()) {
            return Err(Error::NonFinite { line: pos + 2 });
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by_key(|&i| (points[i].timestamp, i));
        for w in order.windows(2) {
            if points[w[0]].timestamp == points[w[1]].timestamp {
                return Err(Error::DuplicateTimestamp {
                    timestamp: points[w[1]].timestamp,
                    line: w[0].max(w[1]) + 2,
                });
            }
        }
        let sorted_points = order.iter().map(|&i| points[i]).collect();
        let sorted_truth = truth.map(|t| order.iter().map(|&i| t[i]).collect());
        Ok(Self {
            id: id.into(),
            points: sorted_points,
            truth: sorted_truth,
        })
    }

    /// Convenience constructor from bare values; timestamps are `0..n`.
    pub fn from_values(id: impl Into<String>, values: &[f64]) -> Result<Self> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &value)| TimePoint {
                timestamp: i as i64,
                value,
            })
            .collect();
        Self::new(id, points, None)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn truth(&self) -> Option<&[bool]> {
        self.truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.points.iter().map(|p| p.timestamp).collect()
    }

    /// Writes the series back out in the same CSV layout it was read from.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io_err = |e: csv::Error| Error::Io {
            path: self.id.clone(),
            message: e.to_string(),
        };
        match &self.truth {
            Some(_) => w.write_record(["timestamp", "value", "is_anomaly"]),
            None => w.write_record(["timestamp", "value"]),
        }
        .map_err(io_err)?;
        for (i, p) in self.points.iter().enumerate() {
            let ts = p.timestamp.to_string();
            let v = p.value.to_string();
            match &self.truth {
                Some(t) => w.write_record([ts.as_str(), v.as_str(), if t[i] { "1" } else { "0" }]),
                None => w.write_record([ts.as_str(), v.as_str()]),
            }
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: self.id.clone(),
            message: e.to_string(),
        })
    }
}

/// Supported input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesFormat {
    #[default]
    YahooS5Csv,
}

/// Loads a series from disk. The series id is the file stem.
pub fn load_series(path: impl AsRef<Path>, format: SeriesFormat) -> Result<LabeledSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    read_series(file, id, format)
}

/// Parses a series from any reader.
pub fn read_series<R: Read>(
    reader: R,
    id: impl Into<String>,
    format: SeriesFormat,
) -> Result<LabeledSeries> {
    let SeriesFormat::YahooS5Csv = format;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?,
        None => return Err(Error::EmptyInput("file has no header row".into())),
    };
    let cols: Vec<&str> = header.iter().collect();
    let labeled = match cols.as_slice() {
        ["timestamp", "value"] => false,
        ["timestamp", "value", "is_anomaly"] => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `timestamp,value[,is_anomaly]`, found `{}`",
                    cols.join(",")
                ),
            })
        }
    };
    let width = if labeled { 3 } else { 2 };

    let mut points = Vec::new();
    let mut truth = labeled.then(Vec::new);
    for (row, record) in records.enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let timestamp: i64 = record[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid integer timestamp `{}`", &record[0]),
        })?;
        let value: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid value `{}`", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite { line });
        }
        if let Some(t) = truth.as_mut() {
            t.push(match &record[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("is_anomaly must be 0 or 1, found `{other}`"),
                    })
                }
            });
        }
        points.push(TimePoint { timestamp, value });
    }
    LabeledSeries::new(id, points, truth)
}

/// A contiguous run of values inside a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub start: usize,
    pub values: &'a [f64],
}

impl Window<'_> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// All stride-1 windows of length `n`, in order.
pub fn sliding_windows(values: &[f64], n: usize) -> Result<Vec<Window<'_>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    if n > values.len() {
        return Err(Error::EmptyInput(format!(
            "window length {n} exceeds series length {}",
            values.len()
        )));
    }
    Ok(values
        .windows(n)
        .enumerate()
        .map(|(start, values)| Window { start, values })
        .collect())
}

/// z-scores together with the moments used to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub z: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Sample (n-1) mean and standard deviation.
pub fn mean_and_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(
            "standardization needs at least two values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Centers and scales `values` with the sample standard deviation.
///
/// A standard deviation that is zero, or indistinguishable from rounding
/// noise relative to the magnitude of the data, is reported as
/// [`Error::DegenerateScale`].
pub fn standardize(values: &[f64]) -> Result<Standardized> {
    let (mean, std_dev) = mean_and_std(values)?;
    let magnitude = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(std_dev > 64.0 * f64::EPSILON * magnitude) {
        return Err(Error::DegenerateScale(format!(
            "standard deviation {std_dev} is zero at data magnitude {magnitude}"
        )));
    }
    let z = values.iter().map(|v| (v - mean) / std_dev).collect();
    Ok(Standardized { z, mean, std_dev })
}
