//! JSON-lines dataset container: line 0 carries a versioned header (the
//! full generating [`NetworkConfig`], seed, and example count), every
//! following line one example — the flattened rate features plus the
//! matching assignment instance. serde emits shortest round-trip float
//! literals and parses them exactly, so write → read → write is
//! byte-stable.

use crate::error::{Error, Result};
use crate::gap::GapInstance;
use crate::wireless::NetworkConfig;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub config: NetworkConfig,
    pub seed: u64,
    pub n: usize,
}

/// One training/test example: the feature vector is the row-major flattened
/// profit (rate) matrix of `instance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub instance: GapInstance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.header.config.n_users
    }

    pub fn n_knapsacks(&self) -> usize {
        self.header.config.n_bs
    }

    /// Shape and count invariants: the header count matches, every example
    /// shares the header's (I, J), and features are finite with width I·J.
    pub fn validate(&self) -> Result<()> {
        if self.header.version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {}, expected {DATASET_VERSION}",
                self.header.version
            )));
        }
        if self.examples.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        if self.header.n != self.examples.len() {
            return Err(Error::Format(format!(
                "header says {} examples, file holds {}",
                self.header.n,
                self.examples.len()
            )));
        }
        let (items, knapsacks) = (self.n_items(), self.n_knapsacks());
        for (k, ex) in self.examples.iter().enumerate() {
            if ex.instance.n_items() != items || ex.instance.n_knapsacks() != knapsacks {
                return Err(Error::DimensionMismatch(format!(
                    "example {k} is {}×{}, dataset is {items}×{knapsacks}",
                    ex.instance.n_items(),
                    ex.instance.n_knapsacks()
                )));
            }
            if ex.features.len() != items * knapsacks {
                return Err(Error::DimensionMismatch(format!(
                    "example {k} has {} features, expected {}",
                    ex.features.len(),
                    items * knapsacks
                )));
            }
            if ex.features.iter().any(|f| !f.is_finite()) {
                return Err(Error::NonFinite(format!("features of example {k}")));
            }
        }
        Ok(())
    }

    /// All feature vectors stacked into an n × (I·J) matrix.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let width = self.n_items() * self.n_knapsacks();
        let mut m = Array2::zeros((self.examples.len(), width));
        for (k, ex) in self.examples.iter().enumerate() {
            for (j, f) in ex.features.iter().enumerate() {
                m[[k, j]] = *f;
            }
        }
        m
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = serde_json::to_string(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
        for ex in &self.examples {
            let mut line = serde_json::to_string(ex).map_err(|e| Error::Format(e.to_string()))?;
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{}: empty file", path.as_ref().display())))?
            .map_err(|e| Error::io(&path, e))?;
        let header: DatasetHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Format(format!("{} header: {e}", path.as_ref().display())))?;
        let mut examples = Vec::with_capacity(header.n);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: Example = serde_json::from_str(&line).map_err(|e| {
                Error::Format(format!("{} example {k}: {e}", path.as_ref().display()))
            })?;
            examples.push(ex);
        }
        let ds = Dataset { header, examples };
        ds.validate()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wireless::generate_dataset;

    fn small_dataset() -> Dataset {
        generate_dataset(&NetworkConfig::default(), 6, 77).unwrap()
    }

    #[test]
    fn jsonl_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let ds = small_dataset();
        ds.write_jsonl(&path).unwrap();
        let back = Dataset::read_jsonl(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn jsonl_write_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let ds = small_dataset();
        ds.write_jsonl(&a).unwrap();
        // Re-writing, and writing a re-read copy, both reproduce the bytes.
        Dataset::read_jsonl(&a).unwrap().write_jsonl(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn header_line_leads_with_version_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        small_dataset().write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("{\"version\":1,\"config\":{\"n_users\":4,\"n_bs\":4"));
        assert!(first.contains("\"seed\":77"));
        assert!(first.contains("\"n\":6"));
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().starts_with("{\"features\":["));
    }

    #[test]
    fn read_rejects_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let ds = small_dataset();
        ds.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = text.lines().take(4).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        assert!(matches!(Dataset::read_jsonl(&path), Err(Error::Format(_))));
    }

    #[test]
    fn read_rejects_empty_and_garbage_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(Dataset::read_jsonl(&path).is_err());
        std::fs::write(&path, "not json\n").unwrap();
        assert!(Dataset::read_jsonl(&path).is_err());
    }

    #[test]
    fn validate_rejects_shape_drift() {
        let mut ds = small_dataset();
        ds.examples[2].features.pop();
        assert!(matches!(ds.validate(), Err(Error::DimensionMismatch(_))));

        let mut ds = small_dataset();
        ds.examples[0].features[3] = f64::NAN;
        assert!(matches!(ds.validate(), Err(Error::NonFinite(_))));
    }

    #[test]
    fn feature_matrix_stacks_examples_in_order() {
        let ds = small_dataset();
        let m = ds.feature_matrix();
        assert_eq!(m.dim(), (6, 16));
        for (k, ex) in ds.examples.iter().enumerate() {
            for (j, f) in ex.features.iter().enumerate() {
                assert_eq!(m[[k, j]], *f);
            }
        }
    }
}
