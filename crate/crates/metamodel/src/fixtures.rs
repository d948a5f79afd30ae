//! Bundled data fixtures and the CSV loaders that read them.
//!
//! Two files ship inside the crate so every demo and test runs offline:
//! the classic 150-row iris table and a 12-point synthetic cloud used by
//! the kernel convergence check. Both load into the labeled point lists
//! the stochastic layer consumes.

use crate::error::{Error, Result};

/// The iris table: four numeric feature columns and a species label,
/// 50 rows per species.
pub fn iris_csv() -> &'static str {
    include_str!("../fixtures/iris.csv")
}

/// Twelve synthetic points in three datasets of four; `wa` and `wb` share
/// one coordinate so the discrete reference has a cross-membership.
pub fn convergence_csv() -> &'static str {
    include_str!("../fixtures/convergence.csv")
}

/// Parse a headered CSV into labeled 2-D point datasets. `x_col` and
/// `y_col` pick the coordinate columns, `label_col` the grouping column;
/// all are zero-based. Dataset order follows first appearance.
pub fn labeled_points_from_csv(
    text: &str,
    x_col: usize,
    y_col: usize,
    label_col: usize,
) -> Result<Vec<(String, Vec<[f64; 2]>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut datasets: Vec<(String, Vec<[f64; 2]>)> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::domain(format!("csv row {}: {e}", row + 2)))?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| {
                Error::domain(format!("csv row {}: missing column {col}", row + 2))
            })
        };
        let number = |col: usize| -> Result<f64> {
            let raw = field(col)?;
            raw.trim().parse().map_err(|_| {
                Error::domain(format!(
                    "csv row {}: column {col} value `{raw}` is not a number",
                    row + 2
                ))
            })
        };
        let point = [number(x_col)?, number(y_col)?];
        let label = field(label_col)?.trim().to_string();
        match datasets.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => datasets.push((label, vec![point])),
        }
    }
    if datasets.is_empty() {
        return Err(Error::domain("csv contains no data rows"));
    }
    Ok(datasets)
}

/// Iris grouped by species over a chosen pair of feature columns, numbered
/// one-based in file order: 1 sepal length, 2 sepal width, 3 petal length,
/// 4 petal width.
pub fn iris_datasets_for_features(
    feature_a: usize,
    feature_b: usize,
) -> Result<Vec<(String, Vec<[f64; 2]>)>> {
    for f in [feature_a, feature_b] {
        if !(1..=4).contains(&f) {
            return Err(Error::domain(format!(
                "iris feature numbers run from 1 to 4, got {f}"
            )));
        }
    }
    labeled_points_from_csv(iris_csv(), feature_a - 1, feature_b - 1, 4)
}

/// The default iris view: features 2 and 3, sepal width against petal
/// length.
pub fn iris_datasets() -> Result<Vec<(String, Vec<[f64; 2]>)>> {
    iris_datasets_for_features(2, 3)
}

/// The bundled convergence cloud as labeled point datasets.
pub fn convergence_datasets() -> Result<Vec<(String, Vec<[f64; 2]>)>> {
    labeled_points_from_csv(convergence_csv(), 0, 1, 2)
}
