use std::sync::Arc;

use super::schema::{NormalizedProfile, ProfileSchema, RawProfile};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::Rand;

/// Labelled profiles in raw and normalized form sharing one fitted schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<ProfileSchema>,
    raw: Matrix,
    rows: Matrix,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from raw rows. Stats are fitted on these rows when the
    /// schema has none yet.
    pub fn from_raw(schema: ProfileSchema, raw: Matrix, labels: Vec<u8>) -> Result<Self> {
        if raw.rows() != labels.len() {
            return Err(Error::spec(format!(
                "{} rows but {} labels",
                raw.rows(),
                labels.len()
            )));
        }
        if raw.cols() != schema.len() {
            return Err(Error::schema(format!(
                "{} columns against a {}-feature schema",
                raw.cols(),
                schema.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::spec(format!("label {bad} is not binary")));
        }
        let mut schema = schema;
        if !schema.is_fitted() {
            schema.fit_stats(&raw)?;
        }
        let rows = schema.normalize_matrix(&raw)?;
        Ok(Self {
            schema: Arc::new(schema),
            raw,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &Arc<ProfileSchema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Normalized rows.
    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.len(),
            1,
            self.labels.iter().map(|&l| f64::from(l)).collect(),
        )
        .expect("one label per row")
    }

    pub fn raw_profile(&self, i: usize) -> RawProfile {
        RawProfile(self.raw.row(i).to_vec())
    }

    pub fn normalized_profile(&self, i: usize) -> NormalizedProfile {
        NormalizedProfile(self.rows.row(i).to_vec())
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len() as f64
    }

    /// Rows at `indices`, keeping this dataset's schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            raw: self.raw.select_rows(indices),
            rows: self.rows.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Re-normalizes the raw rows under another fitted schema.
    pub fn with_schema(&self, schema: Arc<ProfileSchema>) -> Result<Dataset> {
        let rows = schema.normalize_matrix(&self.raw)?;
        Ok(Dataset {
            schema,
            raw: self.raw.clone(),
            rows,
            labels: self.labels.clone(),
        })
    }
}

/// Random train/test partition. Normalization stats are refitted on the
/// train rows and applied to both sides.
pub fn split(dataset: &Dataset, train_fraction: f64, rng: &mut Rand) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::spec(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = dataset.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::spec(format!(
            "split of {n} rows at {train_fraction} leaves an empty partition"
        )));
    }
    let perm = rng.permutation(n);
    let (train_idx, test_idx) = perm.split_at(n_train);
    let train_raw = dataset.raw.select_rows(train_idx);
    let mut schema = (*dataset.schema).clone();
    schema.fit_stats(&train_raw)?;
    let schema = Arc::new(schema);
    let train = dataset.subset(train_idx).with_schema(Arc::clone(&schema))?;
    let test = dataset.subset(test_idx).with_schema(schema)?;
    Ok((train, test))
}
