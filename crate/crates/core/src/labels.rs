//! Label files and train/dev/test splits aligned to activation rows.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// `token<TAB>label` per line, blank lines between sentences.
    TokenLabeling,
    /// `label<TAB>text` per line, one row per line.
    SequenceClassification,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" | "token_labeling" => Ok(TaskKind::TokenLabeling),
            "sequence" | "sequence_classification" => Ok(TaskKind::SequenceClassification),
            other => Err(Error::InvalidArgument(format!(
                "unknown task kind '{other}'"
            ))),
        }
    }
}

pub const TRAIN: &str = "train";
pub const DEV: &str = "dev";
pub const TEST: &str = "test";

/// Labels for every activation row plus named row subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    labels: Vec<usize>,
    label_names: Vec<String>,
    task_kind: TaskKind,
    splits: BTreeMap<String, Vec<usize>>,
}

impl LabeledDataset {
    /// Interns `labels` in order of first appearance. All rows start in the
    /// train split.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], task_kind: TaskKind) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let ids = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *index.entry(l.to_string()).or_insert_with(|| {
                    names.push(l.to_string());
                    names.len() - 1
                })
            })
            .collect();
        Self::from_indices(ids, names, task_kind)
    }

    pub fn from_indices(
        labels: Vec<usize>,
        label_names: Vec<String>,
        task_kind: TaskKind,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label index {bad} outside label table of size {}",
                label_names.len()
            )));
        }
        let mut splits = BTreeMap::new();
        splits.insert(TRAIN.to_string(), (0..labels.len()).collect());
        Ok(LabeledDataset {
            labels,
            label_names,
            task_kind,
            splits,
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn splits(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.splits
    }

    pub fn split(&self, name: &str) -> Result<&[usize]> {
        self.splits
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSplit(name.to_string()))
    }

    /// Replaces the split table. Splits must be disjoint and in range.
    pub fn with_splits(mut self, splits: BTreeMap<String, Vec<usize>>) -> Result<Self> {
        let mut owner = vec![None::<&str>; self.rows()];
        for (name, rows) in &splits {
            for &r in rows {
                if r >= owner.len() {
                    return Err(Error::InvalidSplit(format!(
                        "row {r} in '{name}' out of range"
                    )));
                }
                if let Some(prev) = owner[r] {
                    return Err(Error::InvalidSplit(format!(
                        "row {r} in both '{prev}' and '{name}'"
                    )));
                }
                owner[r] = Some(name);
            }
        }
        self.splits = splits;
        Ok(self)
    }

    /// Contiguous train/dev/test blocks in row order. Contiguity keeps
    /// sentences of a token file inside one split except at the two cut
    /// points.
    pub fn with_fraction_split(self, train: f64, dev: f64, test: f64) -> Result<Self> {
        let fracs = [train, dev, test];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) || fracs.iter().sum::<f64>() > 1.0 + 1e-9
        {
            return Err(Error::InvalidSplit(format!(
                "fractions {fracs:?} must be in [0,1] and sum to at most 1"
            )));
        }
        let n = self.rows();
        let n_train = (train * n as f64).round() as usize;
        let n_dev = ((dev * n as f64).round() as usize).min(n - n_train);
        let n_test = ((test * n as f64).round() as usize).min(n - n_train - n_dev);
        let mut splits = BTreeMap::new();
        splits.insert(TRAIN.to_string(), (0..n_train).collect());
        splits.insert(DEV.to_string(), (n_train..n_train + n_dev).collect());
        splits.insert(
            TEST.to_string(),
            (n_train + n_dev..n_train + n_dev + n_test).collect(),
        );
        self.with_splits(splits)
    }

    /// Numeric targets, for regression tasks whose labels are numbers.
    pub fn targets(&self) -> Result<Vec<f64>> {
        let values: Vec<f64> = self
            .label_names
            .iter()
            .map(|n| {
                n.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidTarget(n.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(self.labels.iter().map(|&l| values[l]).collect())
    }

    /// Errors unless `rows` equals the dataset's row count.
    pub fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.rows() {
            return Err(Error::RowMismatch {
                left: rows,
                right: self.rows(),
            });
        }
        Ok(())
    }
}

pub fn load_labels(path: impl AsRef<Path>, kind: TaskKind) -> Result<LabeledDataset> {
    parse_labels(&fs::read_to_string(path)?, kind)
}

pub fn parse_labels(text: &str, kind: TaskKind) -> Result<LabeledDataset> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let line_no = i + 1;
        match kind {
            TaskKind::TokenLabeling => {
                if line.trim().is_empty() {
                    continue;
                }
                let (_, label) = line
                    .rsplit_once('\t')
                    .ok_or(Error::MalformedLine { line: line_no })?;
                if label.is_empty() {
                    return Err(Error::MalformedLine { line: line_no });
                }
                labels.push(label);
            }
            TaskKind::SequenceClassification => {
                let (label, _) = line
                    .split_once('\t')
                    .ok_or(Error::MalformedLine { line: line_no })?;
                if label.is_empty() {
                    return Err(Error::MalformedLine { line: line_no });
                }
                labels.push(label);
            }
        }
    }
    LabeledDataset::from_labels(&labels, kind)
}
