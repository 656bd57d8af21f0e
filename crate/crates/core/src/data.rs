//! CSV ingestion into grouped datasets: schema-driven column roles, row
//! filters, missing-value dropping, one-hot encoding with first-appearance
//! category order, z-scoring with training statistics, and a stratified
//! deterministic split.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    /// Raw values mapped to +1.
    pub positive: Vec<String>,
    /// Raw values mapped to -1.
    pub negative: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    /// Raw values mapped into this group.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub column: String,
    pub groups: Vec<GroupSpec>,
}

/// Row filters applied to raw string values before any encoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Filter {
    /// Keep rows whose numeric value lies in `[min, max]`.
    Range { column: String, min: f64, max: f64 },
    /// Keep rows whose value is one of `values`.
    OneOf { column: String, values: Vec<String> },
    /// Keep rows whose value is none of `values`.
    NoneOf { column: String, values: Vec<String> },
}

impl Filter {
    fn column(&self) -> &str {
        match self {
            Filter::Range { column, .. }
            | Filter::OneOf { column, .. }
            | Filter::NoneOf { column, .. } => column,
        }
    }

    fn keeps(&self, value: &str) -> bool {
        match self {
            Filter::Range { min, max, .. } => match value.trim().parse::<f64>() {
                Ok(v) => v >= *min && v <= *max,
                Err(_) => false,
            },
            Filter::OneOf { values, .. } => values.iter().any(|v| v == value),
            Filter::NoneOf { values, .. } => !values.iter().any(|v| v == value),
        }
    }
}

/// Column roles and mappings for one dataset, normally loaded from a TOML
/// file bundled with the repository (`schemas/*.toml`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    /// Tokens treated as a missing value; rows with one in a used column
    /// are dropped and counted.
    #[serde(default)]
    pub missing: Vec<String>,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Columns present in the file but ignored.
    #[serde(default)]
    pub drop: Vec<String>,
    /// Include the sensitive column itself among predictive features.
    #[serde(default)]
    pub include_sensitive: bool,
    pub label: LabelSpec,
    pub sensitive: SensitiveSpec,
    #[serde(default)]
    pub filters: Vec<Filter>,
}

impl DatasetSchema {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read schema {}: {e}", path.display())))?;
        let schema: DatasetSchema = toml::from_str(&text)
            .map_err(|e| Error::usage(format!("invalid schema {}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensitive.groups.len() < 2 {
            return Err(Error::usage(
                "schema must map the sensitive column to at least two groups",
            ));
        }
        if self.label.positive.is_empty() || self.label.negative.is_empty() {
            return Err(Error::usage("label mapping must cover both classes"));
        }
        Ok(())
    }

    /// Stable fingerprint of the schema, recorded in dataset provenance.
    pub fn fingerprint(&self) -> String {
        let canonical = toml::to_string(self).expect("schema serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encoding state fitted on a training file and reused verbatim on test
/// files: category vocabularies in first-appearance order and z-scoring
/// statistics per continuous column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedEncoder {
    pub schema: DatasetSchema,
    /// Categories per categorical column, first-appearance order.
    pub categories: Vec<Vec<String>>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub schema_hash: String,
    pub rows_dropped_missing: usize,
    pub rows_filtered: usize,
}

/// Encoded dataset: standardized features with a trailing intercept column,
/// labels in {-1, +1}, and per-row group ids.
#[derive(Debug, Clone)]
pub struct GroupedDataset {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
    /// 0-based group index per row.
    pub groups: Vec<usize>,
    pub group_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl GroupedDataset {
    pub fn num_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.group_names.len()
    }

    /// (positives, negatives) per group; the meta-table the ingestion
    /// checks compare against.
    pub fn cell_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0usize, 0usize); self.num_groups()];
        for (row, &g) in self.groups.iter().enumerate() {
            if self.labels[row] > 0.0 {
                counts[g].0 += 1;
            } else {
                counts[g].1 += 1;
            }
        }
        counts
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
    rows_filtered: usize,
    rows_dropped_missing: usize,
    /// 1-based file row number per kept row, for error messages.
    file_rows: Vec<usize>,
}

fn read_raw(path: &Path, schema: &DatasetSchema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read header of {}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let mut col_index = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        col_index.insert(name.clone(), i);
    }
    let mut used: Vec<&String> = vec![&schema.label.column, &schema.sensitive.column];
    used.extend(schema.continuous.iter());
    used.extend(schema.categorical.iter());
    for name in &used {
        if !col_index.contains_key(*name) {
            return Err(Error::data(format!(
                "{}: column '{name}' required by schema '{}' not in header",
                path.display(),
                schema.name
            )));
        }
    }
    for f in &schema.filters {
        if !col_index.contains_key(f.column()) {
            return Err(Error::data(format!(
                "{}: filter column '{}' not in header",
                path.display(),
                f.column()
            )));
        }
    }

    let mut rows = Vec::new();
    let mut file_rows = Vec::new();
    let mut rows_filtered = 0;
    let mut rows_dropped_missing = 0;
    for (row_no, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::data(format!("{}: row {}: {e}", path.display(), row_no + 2)))?;
        let keep = schema
            .filters
            .iter()
            .all(|f| f.keeps(record.get(col_index[f.column()]).unwrap_or("")));
        if !keep {
            rows_filtered += 1;
            continue;
        }
        let has_missing = used.iter().any(|name| {
            let v = record.get(col_index[name.as_str()]).unwrap_or("");
            schema.missing.iter().any(|token| token == v)
        });
        if has_missing {
            rows_dropped_missing += 1;
            continue;
        }
        rows.push(record);
        file_rows.push(row_no + 2);
    }
    if rows.is_empty() {
        return Err(Error::data(format!(
            "{}: no rows left after filters and missing-value drops",
            path.display()
        )));
    }
    Ok(RawTable {
        header,
        rows,
        rows_filtered,
        rows_dropped_missing,
        file_rows,
    })
}

fn column_lookup(header: &[String]) -> HashMap<&str, usize> {
    header
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect()
}

/// Load a training CSV: fits the encoder and returns the encoded dataset.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<(GroupedDataset, FittedEncoder)> {
    schema.validate()?;
    let mut effective = schema.clone();
    if schema.include_sensitive && !schema.categorical.contains(&schema.sensitive.column) {
        effective.categorical.push(schema.sensitive.column.clone());
    }
    let raw = read_raw(path, &effective)?;
    let lookup = column_lookup(&raw.header);

    // first-appearance category vocabularies
    let mut categories: Vec<Vec<String>> = vec![Vec::new(); effective.categorical.len()];
    for record in &raw.rows {
        for (ci, col) in effective.categorical.iter().enumerate() {
            let v = record.get(lookup[col.as_str()]).unwrap_or("");
            if !categories[ci].iter().any(|c| c == v) {
                categories[ci].push(v.to_string());
            }
        }
    }

    // training statistics for continuous columns
    let n = raw.rows.len();
    let mut means = vec![0.0; effective.continuous.len()];
    let mut stds = vec![0.0; effective.continuous.len()];
    for (ci, col) in effective.continuous.iter().enumerate() {
        let idx = lookup[col.as_str()];
        let mut sum = 0.0;
        for (ri, record) in raw.rows.iter().enumerate() {
            let v: f64 = record.get(idx).unwrap_or("").trim().parse().map_err(|_| {
                Error::data(format!(
                    "{}: row {}: column '{col}' is not numeric",
                    path.display(),
                    raw.file_rows[ri]
                ))
            })?;
            sum += v;
        }
        let mean = sum / n as f64;
        let mut ss = 0.0;
        for record in &raw.rows {
            let v: f64 = record.get(idx).unwrap().trim().parse().unwrap();
            ss += (v - mean) * (v - mean);
        }
        means[ci] = mean;
        let std = (ss / n as f64).sqrt();
        stds[ci] = if std > 0.0 { std } else { 1.0 };
    }

    let mut feature_names: Vec<String> = effective.continuous.clone();
    for (ci, col) in effective.categorical.iter().enumerate() {
        for cat in &categories[ci] {
            feature_names.push(format!("{col}={cat}"));
        }
    }
    feature_names.push("(intercept)".to_string());

    let encoder = FittedEncoder {
        schema: effective,
        categories,
        means,
        stds,
        feature_names,
    };
    let dataset = encode(path, &raw, &encoder)?;
    Ok((dataset, encoder))
}

/// Encode a test CSV with an encoder fitted on training data. Unseen
/// categories map to an all-zero one-hot block with a logged warning.
pub fn apply_schema_to_test(path: &Path, encoder: &FittedEncoder) -> Result<GroupedDataset> {
    let raw = read_raw(path, &encoder.schema)?;
    encode(path, &raw, encoder)
}

fn encode(path: &Path, raw: &RawTable, encoder: &FittedEncoder) -> Result<GroupedDataset> {
    let schema = &encoder.schema;
    let lookup = column_lookup(&raw.header);
    let n = raw.rows.len();
    let d: usize =
        schema.continuous.len() + encoder.categories.iter().map(|c| c.len()).sum::<usize>() + 1;

    let mut features = Array2::zeros((n, d));
    let mut labels = Array1::zeros(n);
    let mut groups = vec![0usize; n];
    let mut group_seen = vec![false; schema.sensitive.groups.len()];
    let mut unseen_warned = false;

    for (ri, record) in raw.rows.iter().enumerate() {
        let file_row = raw.file_rows[ri];

        let label_raw = record
            .get(lookup[schema.label.column.as_str()])
            .unwrap_or("");
        labels[ri] = if schema.label.positive.iter().any(|v| v == label_raw) {
            1.0
        } else if schema.label.negative.iter().any(|v| v == label_raw) {
            -1.0
        } else {
            return Err(Error::data(format!(
                "{}: row {file_row}: unmapped label value '{label_raw}'",
                path.display()
            )));
        };

        let sens_raw = record
            .get(lookup[schema.sensitive.column.as_str()])
            .unwrap_or("");
        let gid = schema
            .sensitive
            .groups
            .iter()
            .position(|g| g.values.iter().any(|v| v == sens_raw))
            .ok_or_else(|| {
                Error::data(format!(
                    "{}: row {file_row}: unmapped sensitive value '{sens_raw}'",
                    path.display()
                ))
            })?;
        groups[ri] = gid;
        group_seen[gid] = true;

        let mut col = 0;
        for (ci, name) in schema.continuous.iter().enumerate() {
            let v: f64 = record
                .get(lookup[name.as_str()])
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| {
                    Error::data(format!(
                        "{}: row {file_row}: column '{name}' is not numeric",
                        path.display()
                    ))
                })?;
            features[[ri, col]] = (v - encoder.means[ci]) / encoder.stds[ci];
            col += 1;
        }
        for (ci, name) in schema.categorical.iter().enumerate() {
            let v = record.get(lookup[name.as_str()]).unwrap_or("");
            match encoder.categories[ci].iter().position(|c| c == v) {
                Some(k) => features[[ri, col + k]] = 1.0,
                None => {
                    if !unseen_warned {
                        log::warn!(
                            "{}: unseen category '{v}' in column '{name}' maps to a zero block",
                            path.display()
                        );
                        unseen_warned = true;
                    }
                }
            }
            col += encoder.categories[ci].len();
        }
        features[[ri, col]] = 1.0; // intercept
    }

    for (gid, seen) in group_seen.iter().enumerate() {
        if !seen {
            log::warn!(
                "{}: group '{}' has no rows",
                path.display(),
                schema.sensitive.groups[gid].name
            );
        }
    }

    Ok(GroupedDataset {
        features,
        labels,
        groups,
        group_names: schema
            .sensitive
            .groups
            .iter()
            .map(|g| g.name.clone())
            .collect(),
        feature_names: encoder.feature_names.clone(),
        provenance: Provenance {
            source: path.display().to_string(),
            schema_hash: schema.fingerprint(),
            rows_dropped_missing: raw.rows_dropped_missing,
            rows_filtered: raw.rows_filtered,
        },
    })
}

fn take_rows(dataset: &GroupedDataset, rows: &[usize]) -> GroupedDataset {
    let d = dataset.num_features();
    let mut features = Array2::zeros((rows.len(), d));
    let mut labels = Array1::zeros(rows.len());
    let mut groups = Vec::with_capacity(rows.len());
    for (out, &row) in rows.iter().enumerate() {
        features.row_mut(out).assign(&dataset.features.row(row));
        labels[out] = dataset.labels[row];
        groups.push(dataset.groups[row]);
    }
    GroupedDataset {
        features,
        labels,
        groups,
        group_names: dataset.group_names.clone(),
        feature_names: dataset.feature_names.clone(),
        provenance: dataset.provenance.clone(),
    }
}

/// Deterministic stratified split: every (label, group) cell is divided so
/// its test share is `test_fraction`, keeping both sides non-empty when the
/// cell allows it. Singleton cells go to train with a warning.
pub fn split(
    dataset: &GroupedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(GroupedDataset, GroupedDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::usage(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for g in 0..dataset.num_groups() {
        for label in [1.0, -1.0] {
            let mut cell: Vec<usize> = (0..dataset.num_rows())
                .filter(|&i| dataset.groups[i] == g && dataset.labels[i] == label)
                .collect();
            if cell.is_empty() {
                continue;
            }
            if cell.len() == 1 {
                log::warn!(
                    "split: singleton cell (group '{}', label {label}) assigned to train",
                    dataset.group_names[g]
                );
                train_rows.push(cell[0]);
                continue;
            }
            cell.shuffle(&mut rng);
            let mut n_test = ((cell.len() as f64) * test_fraction).round() as usize;
            n_test = n_test.clamp(1, cell.len() - 1);
            test_rows.extend_from_slice(&cell[..n_test]);
            train_rows.extend_from_slice(&cell[n_test..]);
        }
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((take_rows(dataset, &train_rows), take_rows(dataset, &test_rows)))
}
