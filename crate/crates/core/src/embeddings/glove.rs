//! GloVe fine-tuning of keyword vectors on domain co-occurrence counts.
//!
//! Minimizes `J = Σ f(X_ab) (w_a·w̃_b + c_a + c̃_b − ln X_ab)²` with AdaGrad
//! over the nonzero entries, in a seeded shuffled order each epoch. Word and
//! context vectors both start at half the current keyword vector, so their
//! sum reproduces it before the first step.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, EmbeddingVector, DIMENSION};
use crate::error::{Error, Result};
use crate::index::CooccurrenceTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GloveConfig {
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for GloveConfig {
    fn default() -> Self {
        Self {
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
            epochs: 25,
        }
    }
}

impl GloveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_max > 0.0
            && self.alpha > 0.0
            && self.alpha <= 1.0
            && self.learning_rate > 0.0
            && self.epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("{self:?}")))
        }
    }

    pub const fn dimension(&self) -> usize {
        DIMENSION
    }
}

/// `f(x) = (x / x_max)^α` below `x_max`, 1 at and above it.
pub fn weighting(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingReport {
    pub keywords: usize,
    pub entries: usize,
    pub epochs: Vec<EpochLoss>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    row: usize,
    col: usize,
    log_x: f64,
    weight: f64,
}

/// Full gradient of `J`, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub word: Vec<f64>,
    pub context: Vec<f64>,
    pub word_bias: Vec<f64>,
    pub context_bias: Vec<f64>,
}

/// Training state for the keywords taking part in a co-occurrence table.
#[derive(Debug, Clone)]
pub struct GloveModel {
    keywords: Vec<String>,
    dim: usize,
    word: Vec<f64>,
    context: Vec<f64>,
    word_bias: Vec<f64>,
    context_bias: Vec<f64>,
    entries: Vec<Entry>,
    grad_sq_word: Vec<f64>,
    grad_sq_context: Vec<f64>,
    grad_sq_word_bias: Vec<f64>,
    grad_sq_context_bias: Vec<f64>,
}

impl GloveModel {
    /// Initializes from the current vectors of every keyword in `cooc`.
    pub fn new(
        table: &EmbeddingTable,
        cooc: &CooccurrenceTable,
        config: &GloveConfig,
    ) -> Result<Self> {
        config.validate()?;
        if cooc.is_empty() {
            return Err(Error::InvalidInput("co-occurrence table is empty".into()));
        }
        let active = cooc.active_ids();
        let mut local = vec![usize::MAX; cooc.keyword_count()];
        let mut keywords = Vec::with_capacity(active.len());
        let mut word = Vec::with_capacity(active.len() * DIMENSION);
        for (i, &id) in active.iter().enumerate() {
            local[id as usize] = i;
            let name = cooc.name(id);
            let vector = table
                .get(name)
                .ok_or_else(|| Error::NoEmbedding(name.to_owned()))?;
            word.extend(vector.values().iter().map(|v| v * 0.5));
            keywords.push(name.to_owned());
        }
        let entries = cooc
            .entries()
            .into_iter()
            .map(|e| Entry {
                row: local[e.row as usize],
                col: local[e.col as usize],
                log_x: e.value.ln(),
                weight: weighting(e.value, config.x_max, config.alpha),
            })
            .collect();
        let n = keywords.len();
        Ok(Self {
            keywords,
            dim: DIMENSION,
            context: word.clone(),
            grad_sq_word: vec![1.0; word.len()],
            grad_sq_context: vec![1.0; word.len()],
            word,
            word_bias: vec![0.0; n],
            context_bias: vec![0.0; n],
            grad_sq_word_bias: vec![1.0; n],
            grad_sq_context_bias: vec![1.0; n],
            entries,
        })
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    fn residual(&self, e: &Entry) -> f64 {
        let w = &self.word[e.row * self.dim..(e.row + 1) * self.dim];
        let c = &self.context[e.col * self.dim..(e.col + 1) * self.dim];
        let dot: f64 = w.iter().zip(c).map(|(a, b)| a * b).sum();
        dot + self.word_bias[e.row] + self.context_bias[e.col] - e.log_x
    }

    /// Evaluates `J` at the current parameters.
    pub fn loss(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let r = self.residual(e);
                e.weight * r * r
            })
            .sum()
    }

    pub fn gradient(&self) -> Gradient {
        let mut g = Gradient {
            word: vec![0.0; self.word.len()],
            context: vec![0.0; self.context.len()],
            word_bias: vec![0.0; self.word_bias.len()],
            context_bias: vec![0.0; self.context_bias.len()],
        };
        let d = self.dim;
        for e in &self.entries {
            let scale = 2.0 * e.weight * self.residual(e);
            for k in 0..d {
                g.word[e.row * d + k] += scale * self.context[e.col * d + k];
                g.context[e.col * d + k] += scale * self.word[e.row * d + k];
            }
            g.word_bias[e.row] += scale;
            g.context_bias[e.col] += scale;
        }
        g
    }

    /// Mutable access to every parameter as `(word, context, word_bias, context_bias)`.
    pub fn parameters_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        (
            &mut self.word,
            &mut self.context,
            &mut self.word_bias,
            &mut self.context_bias,
        )
    }

    /// One AdaGrad pass over the entries in `order`.
    fn epoch(&mut self, order: &[usize], learning_rate: f64) {
        let d = self.dim;
        for &idx in order {
            let e = self.entries[idx];
            let scale = 2.0 * e.weight * self.residual(&e);
            let (w0, c0) = (e.row * d, e.col * d);
            for k in 0..d {
                let gw = scale * self.context[c0 + k];
                let gc = scale * self.word[w0 + k];
                self.word[w0 + k] -= learning_rate * gw / self.grad_sq_word[w0 + k].sqrt();
                self.context[c0 + k] -= learning_rate * gc / self.grad_sq_context[c0 + k].sqrt();
                self.grad_sq_word[w0 + k] += gw * gw;
                self.grad_sq_context[c0 + k] += gc * gc;
            }
            self.word_bias[e.row] -= learning_rate * scale / self.grad_sq_word_bias[e.row].sqrt();
            self.context_bias[e.col] -=
                learning_rate * scale / self.grad_sq_context_bias[e.col].sqrt();
            self.grad_sq_word_bias[e.row] += scale * scale;
            self.grad_sq_context_bias[e.col] += scale * scale;
        }
    }

    /// Runs `config.epochs` epochs, reporting `J` after each.
    pub fn train(&mut self, config: &GloveConfig, seed: u64) -> Result<Vec<EpochLoss>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        let mut losses = Vec::with_capacity(config.epochs);
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            self.epoch(&order, config.learning_rate);
            let loss = self.loss();
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            tracing::debug!(epoch, loss, "glove epoch");
            losses.push(EpochLoss { epoch, loss });
        }
        Ok(losses)
    }

    /// `w_a + w̃_a` for the i-th keyword.
    pub fn combined(&self, i: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|k| self.word[i * d + k] + self.context[i * d + k])
            .collect()
    }
}

/// Fine-tunes the vectors of every keyword in `cooc`. On divergence the
/// table is left exactly as it was.
pub(crate) fn fine_tune(
    table: &mut EmbeddingTable,
    cooc: &CooccurrenceTable,
    config: &GloveConfig,
    seed: u64,
) -> Result<TrainingReport> {
    let mut model = GloveModel::new(table, cooc, config)?;
    let epochs = model.train(config, seed)?;
    let mut updated = Vec::with_capacity(model.keywords.len());
    for i in 0..model.keywords.len() {
        let vector =
            EmbeddingVector::new(model.combined(i)).map_err(|_| Error::TrainingDiverged {
                epoch: config.epochs,
            })?;
        updated.push(vector);
    }
    for (keyword, vector) in model.keywords.iter().zip(updated) {
        table.insert(keyword, vector);
    }
    Ok(TrainingReport {
        keywords: model.keywords.len(),
        entries: model.entries.len(),
        epochs,
    })
}

impl EmbeddingTable {
    /// GloVe fine-tuning on `cooc`; keywords absent from it keep their vectors.
    pub fn fine_tune(
        &mut self,
        cooc: &CooccurrenceTable,
        config: &GloveConfig,
        seed: u64,
    ) -> Result<TrainingReport> {
        fine_tune(self, cooc, config, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_table() -> (EmbeddingTable, CooccurrenceTable) {
        // 5 keywords, 8 ordered nonzero entries (4 symmetric pairs).
        let cooc = CooccurrenceTable::from_weights([
            ("k0", "k1", 3.0),
            ("k1", "k2", 1.5),
            ("k2", "k3", 0.5),
            ("k3", "k4", 2.0),
        ]);
        let mut table = EmbeddingTable::new();
        table.fill_missing(&["k0", "k1", "k2", "k3", "k4"], 5);
        (table, cooc)
    }

    #[test]
    fn weighting_boundaries() {
        assert_eq!(weighting(100.0, 100.0, 0.75), 1.0);
        assert_eq!(weighting(250.0, 100.0, 0.75), 1.0);
        assert!((weighting(10.0, 100.0, 0.75) - 0.1f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn toy_loss_decreases() {
        let (mut table, cooc) = toy_table();
        assert_eq!(cooc.entries().len(), 8);
        let config = GloveConfig {
            epochs: 10,
            ..GloveConfig::default()
        };
        let report = table.fine_tune(&cooc, &config, 1).unwrap();
        assert_eq!(report.epochs.len(), 10);
        assert!(report.epochs[9].loss < report.epochs[0].loss);
    }

    #[test]
    fn initial_vectors_are_preserved() {
        let (table, cooc) = toy_table();
        let model = GloveModel::new(&table, &cooc, &GloveConfig::default()).unwrap();
        for (i, k) in model.keywords().iter().enumerate() {
            assert_eq!(model.combined(i), table.get(k).unwrap().values());
        }
    }

    #[test]
    fn missing_vector_is_an_error() {
        let cooc = CooccurrenceTable::from_weights([("a1", "b1", 1.0)]);
        let err =
            GloveModel::new(&EmbeddingTable::new(), &cooc, &GloveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoEmbedding(_)));
    }

    #[test]
    fn divergence_rolls_back() {
        let (mut table, cooc) = toy_table();
        let before = table.clone();
        let config = GloveConfig {
            learning_rate: 1e300,
            epochs: 3,
            ..GloveConfig::default()
        };
        let err = table.fine_tune(&cooc, &config, 1).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { .. }));
        assert_eq!(table, before);
    }

    #[test]
    fn untouched_keywords_keep_vectors() {
        let (mut table, cooc) = toy_table();
        table.fill_missing(&["outsider"], 9);
        let before = table.get("outsider").cloned();
        table
            .fine_tune(
                &cooc,
                &GloveConfig {
                    epochs: 2,
                    ..Default::default()
                },
                1,
            )
            .unwrap();
        assert_eq!(table.get("outsider").cloned(), before);
        assert_ne!(table.get("k0"), toy_table().0.get("k0"));
    }

    #[test]
    fn rejects_bad_config() {
        let (mut table, cooc) = toy_table();
        let config = GloveConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            table.fine_tune(&cooc, &config, 1),
            Err(Error::InvalidConfig(_))
        ));
    }
}
