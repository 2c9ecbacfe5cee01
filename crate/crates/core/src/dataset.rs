//! Learning tables: raw metric rows, the six-feature projection, outlier
//! filtering and the train/validation split.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::LabelRow;
use crate::geometry::{compute_metrics, MetricVector, Polygon, METRIC_NAMES};
use crate::seed;

/// Input features, in input-neuron order.
pub const FEATURE_NAMES: [&str; 6] = ["ic", "cc", "apr", "er", "mx", "iso"];
pub const FEATURE_HEADER: [&str; 8] = ["polygon_id", "ic", "cc", "apr", "er", "mx", "iso", "label_c"];
pub const CORRELATION_THRESHOLD: f64 = 0.8;
pub const DEFAULT_Z_THRESHOLD: f64 = 2.0;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub polygon_id: usize,
    pub metrics: MetricVector,
    pub label_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub polygon_id: usize,
    pub ic: f64,
    pub cc: f64,
    pub apr: f64,
    pub er: f64,
    pub mx: f64,
    pub iso: f64,
    pub label_c: f64,
}

impl FeatureRow {
    pub fn features(&self) -> [f64; 6] {
        [self.ic, self.cc, self.apr, self.er, self.mx, self.iso]
    }

    pub fn from_metrics(polygon_id: usize, m: &MetricVector, label_c: f64) -> Self {
        FeatureRow {
            polygon_id,
            ic: m.ic,
            cc: m.cc,
            apr: m.apr,
            er: m.er,
            mx: m.mx,
            iso: m.iso,
            label_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<FeatureRow>,
    pub validation: Vec<FeatureRow>,
    pub split_seed: u64,
}

/// Pairs each polygon with its label; ids must match position by position.
pub fn build_raw(polygons: &[(usize, Polygon)], labels: &[LabelRow]) -> Result<Vec<RawRow>> {
    if polygons.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} polygons but {} labels",
            polygons.len(),
            labels.len()
        )));
    }
    polygons
        .iter()
        .zip(labels)
        .map(|((id, p), label)| {
            if *id != label.polygon_id {
                return Err(Error::InvalidArgument(format!(
                    "polygon id {id} paired with label for polygon {}",
                    label.polygon_id
                )));
            }
            Ok(RawRow {
                polygon_id: *id,
                metrics: compute_metrics(p),
                label_c: label.c_p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    /// Pairs with `|r| >= threshold`, upper triangle only.
    pub fn strongly_correlated(&self, threshold: f64) -> Vec<(String, String, f64)> {
        let n = self.names.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.values[i][j].abs() >= threshold {
                    out.push((self.names[i].clone(), self.names[j].clone(), self.values[i][j]));
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("metric");
        for n in &self.names {
            write!(out, ",{n}").unwrap();
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Pearson correlation between the named metric columns (names from
/// [`METRIC_NAMES`]).
pub fn pearson_correlation(rows: &[RawRow], columns: &[&str]) -> Result<CorrelationMatrix> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 rows, got {}", rows.len())));
    }
    let mut data = Vec::with_capacity(columns.len());
    for &name in columns {
        let idx = METRIC_NAMES
            .iter()
            .position(|&m| m == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{name}`")))?;
        data.push(rows.iter().map(|r| r.metrics.to_array()[idx]).collect::<Vec<_>>());
    }
    let named: Vec<(&str, &[f64])> = columns.iter().copied().zip(data.iter().map(Vec::as_slice)).collect();
    correlation_of_columns(&named)
}

/// Pearson correlation of arbitrary named columns of equal length.
pub fn correlation_of_columns(columns: &[(&str, &[f64])]) -> Result<CorrelationMatrix> {
    let mut centred = Vec::with_capacity(columns.len());
    for &(name, col) in columns {
        let (mean, std) = mean_std(col);
        if !(std > 0.0) {
            return Err(Error::DegenerateColumn(name.to_string()));
        }
        centred.push(col.iter().map(|v| (v - mean) / std).collect::<Vec<_>>());
    }
    let n = columns.len();
    let len = columns.first().map_or(0, |c| c.1.len()) as f64;
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in i + 1..n {
            let r = (centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>() / len).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|c| c.0.to_string()).collect(),
        values,
    })
}

/// Population mean and standard deviation.
fn mean_std(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Projects each row onto IC, CC, APR, ER, MX, ISO.
pub fn select_features(rows: &[RawRow]) -> Vec<FeatureRow> {
    rows.iter()
        .map(|r| FeatureRow::from_metrics(r.polygon_id, &r.metrics, r.label_c))
        .collect()
}

/// Drops every row with some feature at `|z| >= z_threshold`.
///
/// Means and standard deviations are computed once on the whole input. A
/// second call can remove further rows, since the survivors have new
/// statistics; one call is the intended use.
pub fn remove_outliers(rows: &[FeatureRow], z_threshold: f64) -> Result<Vec<FeatureRow>> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 rows, got {}", rows.len())));
    }
    let stats: Vec<(f64, f64)> = (0..6)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r.features()[k]).collect();
            let (mean, std) = mean_std(&col);
            if std > 0.0 {
                Ok((mean, std))
            } else {
                Err(Error::DegenerateColumn(FEATURE_NAMES[k].to_string()))
            }
        })
        .collect::<Result<_>>()?;
    Ok(rows
        .iter()
        .filter(|r| {
            r.features()
                .iter()
                .zip(&stats)
                .all(|(v, (mean, std))| ((v - mean) / std).abs() < z_threshold)
        })
        .cloned()
        .collect())
}

/// Seeded random partition; `round(fraction * len)` rows go to validation.
/// Both halves keep the input order.
pub fn split(rows: &[FeatureRow], validation_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    if rows.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 rows, got {}", rows.len())));
    }
    let n_val = (validation_fraction * rows.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let mut is_val = vec![false; rows.len()];
    for &i in &idx[..n_val] {
        is_val[i] = true;
    }
    let (validation, train): (Vec<_>, Vec<_>) = rows.iter().zip(&is_val).partition(|(_, &v)| v);
    Ok(SplitDataset {
        train: train.into_iter().map(|(r, _)| r.clone()).collect(),
        validation: validation.into_iter().map(|(r, _)| r.clone()).collect(),
        split_seed: seed,
    })
}

pub fn save_csv(rows: &[FeatureRow], path: &Path) -> Result<()> {
    crate::csvio::write_rows(path, &FEATURE_HEADER, rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    crate::csvio::read_rows(path, &FEATURE_HEADER)
}
