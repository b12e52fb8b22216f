//! CSV datasets described by a manifest.

use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use tslab_core::{AnomalyLabelSeries, TimeSeries, Timestamp, UnivariateTimeSeries};

/// Environment variable that replaces the manifest root.
pub const DATA_ROOT_ENV: &str = "BENCH_DATA_ROOT";
/// Step of the grid synthesised for files without timestamps.
pub const DEFAULT_STEP: i64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: missing column '{column}'")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{line}: column '{column}': cannot parse '{value}'")]
    Parse {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{file}: {message}")]
    Invalid { file: String, message: String },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Directory holding the files; relative paths are resolved against the
    /// config file's directory.
    pub root: PathBuf,
    pub files: Vec<String>,
    /// Without one, points are placed on a grid of `granularity` seconds.
    #[serde(default)]
    pub timestamp_column: Option<String>,
    /// Defaults to every column other than the timestamp and label.
    #[serde(default)]
    pub value_columns: Option<Vec<String>>,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "half")]
    pub train_fraction: f64,
    /// Sampling step in seconds, used for synthesised grids.
    #[serde(default)]
    pub granularity: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub name: String,
    pub ts: TimeSeries,
    pub labels: Option<AnomalyLabelSeries>,
}

impl DatasetManifest {
    /// Root after applying [`DATA_ROOT_ENV`] and resolving against `base`.
    pub fn resolved_root(&self, base: &Path) -> PathBuf {
        let root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| self.root.clone());
        if root.is_absolute() {
            root
        } else {
            base.join(root)
        }
    }
}

/// Loads every file of the manifest, in manifest order.
pub fn load_dataset(manifest: &DatasetManifest, base: &Path) -> Result<Vec<LoadedSeries>, LoadError> {
    let root = manifest.resolved_root(base);
    manifest.files.iter().map(|f| load_file(manifest, &root.join(f))).collect()
}

enum TimeFormat {
    Epoch,
    Iso,
}

/// Seconds since the epoch for an ISO-8601 timestamp, with or without zone.
pub fn parse_iso(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim() {
        "0" | "0.0" | "false" | "False" => Some(false),
        "1" | "1.0" | "true" | "True" => Some(true),
        _ => None,
    }
}

fn load_file(manifest: &DatasetManifest, path: &Path) -> Result<LoadedSeries, LoadError> {
    let file = path.display().to_string();
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| file.clone());
    let mut reader = csv::Reader::from_path(path).map_err(|source| LoadError::Csv { file: file.clone(), source })?;
    let headers = reader.headers().map_err(|source| LoadError::Csv { file: file.clone(), source })?.clone();
    let find = |column: &str| {
        headers.iter().position(|h| h.trim() == column).ok_or_else(|| LoadError::MissingColumn {
            file: file.clone(),
            column: column.to_string(),
        })
    };
    let ts_col = manifest.timestamp_column.as_deref().map(find).transpose()?;
    let label_col = manifest.label_column.as_deref().map(find).transpose()?;
    let value_names: Vec<String> = match &manifest.value_columns {
        Some(v) => v.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != ts_col && Some(*i) != label_col)
            .map(|(_, h)| h.trim().to_string())
            .collect(),
    };
    if value_names.is_empty() {
        return Err(LoadError::Invalid {
            file,
            message: "no value columns".into(),
        });
    }
    let value_cols = value_names.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let mut raw_times: Vec<(u64, String)> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| LoadError::Csv { file: file.clone(), source })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        if let Some(i) = ts_col {
            raw_times.push((line, field(i)));
        }
        for (slot, (&c, cname)) in values.iter_mut().zip(value_cols.iter().zip(&value_names)) {
            let s = field(c);
            let v: f64 = s.trim().parse().map_err(|_| LoadError::Parse {
                file: file.clone(),
                line,
                column: cname.clone(),
                value: s.clone(),
            })?;
            slot.push(v);
        }
        if let Some(i) = label_col {
            let s = field(i);
            labels.push(parse_label(&s).ok_or_else(|| LoadError::Parse {
                file: file.clone(),
                line,
                column: manifest.label_column.clone().unwrap_or_default(),
                value: s.clone(),
            })?);
        }
    }
    if values[0].is_empty() {
        return Err(LoadError::Invalid {
            file,
            message: "no data rows".into(),
        });
    }

    let timestamps: Vec<Timestamp> = match ts_col {
        None => {
            let step = manifest.granularity.unwrap_or(DEFAULT_STEP);
            (0..values[0].len() as i64).map(|i| i * step).collect()
        }
        Some(_) => {
            let format = if raw_times.iter().all(|(_, s)| s.trim().parse::<i64>().is_ok()) {
                TimeFormat::Epoch
            } else {
                TimeFormat::Iso
            };
            let column = manifest.timestamp_column.clone().unwrap_or_default();
            raw_times
                .iter()
                .map(|(line, s)| {
                    let t = match format {
                        TimeFormat::Epoch => s.trim().parse().ok(),
                        TimeFormat::Iso => parse_iso(s),
                    };
                    t.ok_or_else(|| LoadError::Parse {
                        file: file.clone(),
                        line: *line,
                        column: column.clone(),
                        value: s.clone(),
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    let invalid = |e: tslab_core::Error| LoadError::Invalid {
        file: file.clone(),
        message: e.to_string(),
    };
    let univariates = value_names
        .iter()
        .zip(values)
        .map(|(n, v)| UnivariateTimeSeries::new(n.clone(), timestamps.clone(), v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let ts = TimeSeries::new(univariates).map_err(invalid)?;
    let labels = match label_col {
        Some(_) => Some(AnomalyLabelSeries::new(timestamps, labels).map_err(invalid)?),
        None => None,
    };
    Ok(LoadedSeries { name, ts, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_and_epoch() {
        assert_eq!(parse_iso("1970-01-02 00:00:00"), Some(86_400));
        assert_eq!(parse_iso("1970-01-01T00:01:00Z"), Some(60));
        assert_eq!(parse_iso("1970-01-01T02:00:00+02:00"), Some(0));
        assert_eq!(parse_iso("1970-01-03"), Some(172_800));
        assert_eq!(parse_iso("yesterday"), None);
    }

    #[test]
    fn labels() {
        assert_eq!(parse_label("1"), Some(true));
        assert_eq!(parse_label(" 0 "), Some(false));
        assert_eq!(parse_label("2"), None);
    }
}
