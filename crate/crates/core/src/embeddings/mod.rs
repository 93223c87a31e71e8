//! Keyword embedding vectors and their similarity.

mod glove;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use glove::{weighting, EpochLoss, GloveConfig, GloveModel, Gradient, TrainingReport};

/// Components per embedding vector.
pub const DIMENSION: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != DIMENSION {
            return Err(Error::InvalidInput(format!(
                "embedding has {} components, expected {DIMENSION}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding has non-finite components".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    /// `|v_a · v_b| / (‖v_a‖ ‖v_b‖)`.
    #[default]
    AbsoluteCosine,
    SignedCosine,
}

/// Cosine-style similarity, or None if either vector has zero norm.
pub fn similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
    measure: SimilarityMeasure,
) -> Option<f64> {
    let denom = a.norm() * b.norm();
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let cos = a.dot(b) / denom;
    let value = match measure {
        SimilarityMeasure::AbsoluteCosine => cos.abs().min(1.0),
        SimilarityMeasure::SignedCosine => cos.clamp(-1.0, 1.0),
    };
    Some(value)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub randomized: usize,
    pub skipped_lines: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, keyword: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(keyword)
    }

    pub fn insert(&mut self, keyword: &str, vector: EmbeddingVector) {
        self.vectors.insert(keyword.to_owned(), vector);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `ρ(a, b)`; errors if either keyword lacks a usable vector.
    pub fn similarity(&self, a: &str, b: &str, measure: SimilarityMeasure) -> Result<f64> {
        let va = self
            .get(a)
            .ok_or_else(|| Error::NoEmbedding(a.to_owned()))?;
        let vb = self
            .get(b)
            .ok_or_else(|| Error::NoEmbedding(b.to_owned()))?;
        similarity(va, vb, measure)
            .ok_or_else(|| Error::NoEmbedding(format!("{a} or {b} (zero norm)")))
    }

    /// Replaces the table with vectors for `keywords`, taken from a plain-text
    /// vector file where possible and random otherwise.
    ///
    /// A vector word matching a keyword exactly wins; otherwise the first word
    /// whose `normalize` image is the keyword is used. Missing keywords get
    /// components drawn uniformly from `[-0.5/768, 0.5/768]`.
    pub fn load_pretrained<R: BufRead>(
        &mut self,
        source: R,
        keywords: &[&str],
        normalize: impl Fn(&str) -> Option<String>,
        seed: u64,
    ) -> Result<LoadReport> {
        let wanted: HashSet<&str> = keywords.iter().copied().collect();
        let mut exact: HashMap<String, EmbeddingVector> = HashMap::new();
        let mut derived: HashMap<String, EmbeddingVector> = HashMap::new();
        let mut report = LoadReport::default();

        for (idx, line) in source.lines().enumerate() {
            let line = line.map_err(|source| Error::LoadFailure {
                what: "vector file".into(),
                source,
            })?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let vector = match values
                .map_err(|e| e.to_string())
                .and_then(|v| EmbeddingVector::new(v).map_err(|e| e.to_string()))
            {
                Ok(v) => v,
                Err(reason) => {
                    // word2vec-style "count dim" header line
                    if idx == 0 && word.parse::<u64>().is_ok() {
                        continue;
                    }
                    tracing::warn!(line = idx + 1, %reason, "skipping vector line");
                    report.skipped_lines += 1;
                    continue;
                }
            };
            let lower = word.to_lowercase();
            if wanted.contains(lower.as_str()) {
                exact.entry(lower).or_insert(vector);
            } else if let Some(key) = normalize(&lower).filter(|k| wanted.contains(k.as_str())) {
                derived.entry(key).or_insert(vector);
            }
        }

        let mut sorted: Vec<&str> = wanted.into_iter().collect();
        sorted.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = BTreeMap::new();
        for keyword in sorted {
            let vector = match exact.remove(keyword).or_else(|| derived.remove(keyword)) {
                Some(v) => {
                    report.loaded += 1;
                    v
                }
                None => {
                    report.randomized += 1;
                    random_vector(&mut rng)
                }
            };
            vectors.insert(keyword.to_owned(), vector);
        }
        if report.loaded == 0 {
            tracing::warn!("no pretrained vectors matched; all keywords randomly initialized");
        }
        self.vectors = vectors;
        Ok(report)
    }

    /// Gives every keyword in `keywords` lacking a vector a random one.
    /// Returns how many were added.
    pub fn fill_missing(&mut self, keywords: &[&str], seed: u64) -> usize {
        let mut missing: Vec<&str> = keywords
            .iter()
            .copied()
            .filter(|k| !self.vectors.contains_key(*k))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for keyword in &missing {
            self.vectors
                .insert((*keyword).to_owned(), random_vector(&mut rng));
        }
        missing.len()
    }

    /// Writes `word v1 ... v768` lines, sorted by word.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        for (word, vector) in &self.vectors {
            out.write_all(word.as_bytes())?;
            for v in vector.values() {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a file produced by [`EmbeddingTable::save`]; malformed lines are errors.
    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut table = Self::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("vector line {}: {e}", idx + 1)))?;
            table.insert(word, EmbeddingVector::new(values)?);
        }
        Ok(table)
    }
}

fn random_vector(rng: &mut impl Rng) -> EmbeddingVector {
    let half = 0.5 / DIMENSION as f64;
    EmbeddingVector(
        (0..DIMENSION)
            .map(|_| rng.random_range(-half..=half))
            .collect(),
    )
}
