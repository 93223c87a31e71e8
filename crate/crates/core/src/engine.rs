//! The tracking engine: one store directory holding documents, dictionary,
//! index, embeddings and topics, with the user-facing workflow on top.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, CorpusStore, Document, ImportReport};
use crate::embeddings::{
    EmbeddingTable, GloveConfig, LoadReport, SimilarityMeasure, TrainingReport,
};
use crate::error::{Error, Result};
use crate::index::{InvertedIndex, DEFAULT_WINDOW};
use crate::store::{self, Manifest, ServeLock};
use crate::text::{self, CorrectionMap, KeywordDictionary, KeywordKind};
use crate::topics::{
    self, Expansion, MatchedKeyword, RankedResult, ResultOrder, Topic, TopicStore,
};
use crate::trend::{self, Granularity, Spike, SpikeConfig, TrendSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Where the store lives; not persisted.
    #[serde(skip)]
    pub store_path: Option<PathBuf>,
    pub theta_default: f64,
    pub expansion_limit: usize,
    pub cooccurrence_window: usize,
    pub similarity: SimilarityMeasure,
    pub glove: GloveConfig,
    pub spike: SpikeConfig,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            store_path: None,
            theta_default: topics::DEFAULT_THETA,
            expansion_limit: topics::DEFAULT_LIMIT,
            cooccurrence_window: DEFAULT_WINDOW,
            similarity: SimilarityMeasure::default(),
            glove: GloveConfig::default(),
            spike: SpikeConfig::default(),
            seed: 42,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_default > 0.0 && self.theta_default < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta_default {} outside (0, 1)",
                self.theta_default
            )));
        }
        if self.expansion_limit == 0 || self.cooccurrence_window == 0 {
            return Err(Error::InvalidConfig(
                "expansion_limit and cooccurrence_window must be positive".into(),
            ));
        }
        self.glove.validate()?;
        self.spike.validate()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Dirty {
    config: bool,
    documents: bool,
    dictionary: bool,
    corrections: bool,
    index: bool,
    vectors: bool,
    topics: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RebuildReport {
    pub documents: usize,
    pub keywords: usize,
    pub cooccurrence_pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DictionaryCounts {
    pub english: usize,
    pub domain: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeywordStat {
    pub keyword: String,
    pub occurrence_total: usize,
    pub document_frequency: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    #[serde(flatten)]
    pub corpus: CorpusStats,
    pub dictionary_size: usize,
    pub dictionary: DictionaryCounts,
    pub indexed_keywords: usize,
    pub total_occurrences: usize,
    pub cooccurrence_pairs: usize,
    pub embeddings: usize,
    pub topics: usize,
    pub top_keywords: Vec<KeywordStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentView {
    pub doc_id: String,
    pub created_date: NaiveDate,
    pub raw_text: String,
    pub token_count: usize,
    pub matched: Vec<MatchedKeyword>,
}

#[derive(Debug)]
pub struct Engine {
    root: Option<PathBuf>,
    config: EngineConfig,
    corpus: CorpusStore,
    dictionary: KeywordDictionary,
    corrections: CorrectionMap,
    index: InvertedIndex,
    embeddings: OnceLock<EmbeddingTable>,
    topics: TopicStore,
    dirty: Dirty,
}

impl Engine {
    /// An engine with no backing directory.
    pub fn in_memory(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            root: None,
            index: InvertedIndex::with_window(config.cooccurrence_window),
            config,
            corpus: CorpusStore::new(),
            dictionary: KeywordDictionary::new(),
            corrections: CorrectionMap::new(),
            embeddings: OnceLock::from(EmbeddingTable::new()),
            topics: TopicStore::new(),
            dirty: Dirty::default(),
        })
    }

    /// Creates a new store at `root`, which must not already hold one.
    pub fn create(root: &Path, config: EngineConfig) -> Result<Self> {
        if root.join(store::MANIFEST).exists() {
            return Err(Error::InvalidInput(format!(
                "{} already holds a store",
                root.display()
            )));
        }
        fs::create_dir_all(root)?;
        let mut engine = Self::in_memory(config)?;
        engine.root = Some(root.to_owned());
        engine.config.store_path = Some(root.to_owned());
        engine.dirty = Dirty {
            config: true,
            documents: true,
            dictionary: true,
            corrections: true,
            index: true,
            vectors: true,
            topics: true,
        };
        engine.save()?;
        Ok(engine)
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.join(store::MANIFEST).exists() {
            return Err(Error::not_found("store", root.display().to_string()));
        }
        store::check_manifest(root)?;
        let mut config: EngineConfig = store::read_json(&root.join(store::CONFIG))?;
        config.store_path = Some(root.to_owned());
        config.validate()?;
        Ok(Self {
            root: Some(root.to_owned()),
            corpus: store::read_documents(&root.join(store::DOCUMENTS))?,
            dictionary: store::read_dictionary(&root.join(store::DICTIONARY))?,
            corrections: store::read_corrections(&root.join(store::CORRECTIONS))?,
            index: store::read_json(&root.join(store::INDEX))?,
            embeddings: OnceLock::new(),
            topics: store::read_json(&root.join(store::TOPICS))?,
            config,
            dirty: Dirty::default(),
        })
    }

    pub fn open_or_create(root: &Path) -> Result<Self> {
        if root.join(store::MANIFEST).exists() {
            Self::open(root)
        } else {
            Self::create(root, EngineConfig::default())
        }
    }

    /// Writes every modified component, then the manifest.
    pub fn save(&mut self) -> Result<()> {
        let Some(root) = self.root.clone() else {
            self.dirty = Dirty::default();
            return Ok(());
        };
        let d = self.dirty;
        if d.config {
            store::write_json(&root.join(store::CONFIG), &self.config)?;
        }
        if d.documents {
            store::write_documents(&root.join(store::DOCUMENTS), &self.corpus)?;
        }
        if d.dictionary {
            store::write_dictionary(&root.join(store::DICTIONARY), &self.dictionary)?;
        }
        if d.corrections {
            store::write_corrections(&root.join(store::CORRECTIONS), &self.corrections)?;
        }
        if d.index {
            store::write_json(&root.join(store::INDEX), &self.index)?;
        }
        if d.vectors {
            let empty = EmbeddingTable::new();
            let table = self.embeddings.get().unwrap_or(&empty);
            store::write_atomic(&root.join(store::VECTORS), |out| table.save(out))?;
        }
        if d.topics {
            store::write_json(&root.join(store::TOPICS), &self.topics)?;
        }
        store::write_json(&root.join(store::MANIFEST), &Manifest::default())?;
        self.dirty = Dirty::default();
        Ok(())
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EngineConfig) -> Result<()> {
        config.validate()?;
        if config.cooccurrence_window != self.config.cooccurrence_window {
            return Err(Error::InvalidConfig(
                "the co-occurrence window is fixed when the store is created".into(),
            ));
        }
        self.config = EngineConfig {
            store_path: self.config.store_path.clone(),
            ..config
        };
        self.dirty.config = true;
        Ok(())
    }

    pub fn corpus(&self) -> &CorpusStore {
        &self.corpus
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn dictionary(&self) -> &KeywordDictionary {
        &self.dictionary
    }

    pub fn corrections(&self) -> &CorrectionMap {
        &self.corrections
    }

    pub fn embeddings(&self) -> Result<&EmbeddingTable> {
        if let Some(table) = self.embeddings.get() {
            return Ok(table);
        }
        let table = match &self.root {
            Some(root) => {
                let path = root.join(store::VECTORS);
                if path.exists() {
                    EmbeddingTable::read(BufReader::new(File::open(path)?))?
                } else {
                    EmbeddingTable::new()
                }
            }
            None => EmbeddingTable::new(),
        };
        let _ = self.embeddings.set(table);
        Ok(self.embeddings.get().expect("just set"))
    }

    /// Imports corpus JSONL and indexes every accepted document.
    pub fn import_documents<R: BufRead>(&mut self, source: R) -> Result<ImportReport> {
        let report = self.corpus.import_documents(source)?;
        let mut ids = report.doc_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        self.index_ids(&ids)?;
        self.dirty.documents = true;
        Ok(report)
    }

    /// Adds or replaces a single document and indexes it.
    pub fn upsert_document(&mut self, doc: Document) -> Result<()> {
        let id = doc.doc_id.clone();
        self.corpus.insert(doc);
        self.index_ids(&[id])?;
        self.dirty.documents = true;
        Ok(())
    }

    fn index_ids(&mut self, ids: &[String]) -> Result<()> {
        let docs = ids
            .iter()
            .map(|id| self.corpus.get_document(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        let summaries = self
            .index
            .index_documents(&docs, &self.corrections, &mut self.dictionary);
        for s in summaries {
            if let Some(doc) = self.corpus.get_mut(&s.doc_id) {
                doc.token_count = s.token_count;
            }
        }
        self.dirty.index = true;
        self.dirty.dictionary = true;
        Ok(())
    }

    /// Re-runs the pipeline over every document with the current dictionary
    /// and correction map. Previously discovered unknown keywords are dropped
    /// first and rediscovered.
    pub fn rebuild_index(&mut self) -> Result<RebuildReport> {
        self.index.clear();
        self.dictionary.remove_kind(KeywordKind::Unknown);
        let mut ids: Vec<String> = self.corpus.documents().map(|d| d.doc_id.clone()).collect();
        ids.sort_unstable();
        self.index_ids(&ids)?;
        self.dirty.documents = true;
        Ok(RebuildReport {
            documents: self.index.total_documents(),
            keywords: self.index.keyword_count(),
            cooccurrence_pairs: self.index.cooccurrence().pair_count(),
        })
    }

    /// Adds a word list. Existing documents keep their current normalization
    /// until the index is rebuilt.
    pub fn load_dictionary<R: BufRead>(&mut self, source: R, kind: KeywordKind) -> Result<usize> {
        if kind == KeywordKind::Unknown {
            return Err(Error::InvalidInput(
                "word lists must be english or domain".into(),
            ));
        }
        let n = self.dictionary.load_word_list(source, kind)?;
        self.dirty.dictionary = true;
        Ok(n)
    }

    pub fn load_corrections<R: BufRead>(&mut self, source: R) -> Result<usize> {
        let mut map = self.corrections.clone();
        let n = map.load_tsv(source)?;
        self.corrections = map;
        self.dirty.corrections = true;
        Ok(n)
    }

    /// Normalizes user-supplied keywords. Entries that already are indexed
    /// keywords are kept verbatim; anything else goes through the pipeline and
    /// may yield several keywords ("cross-site" gives cross and site).
    pub fn normalize_keywords<S: AsRef<str>>(&self, raw: &[S]) -> Vec<String> {
        let mut out = Vec::new();
        for word in raw {
            let lower = word.as_ref().trim().to_lowercase();
            if self.index.document_frequency(&lower) > 0 {
                out.push(lower);
                continue;
            }
            for token in text::tokenize(&lower) {
                let token = text::correct(token, &self.corrections);
                out.push(text::resolve(&token.surface, &self.dictionary).surface);
            }
        }
        out
    }

    fn normalize_vector_word(&self, word: &str) -> Option<String> {
        text::normalize_keyword(word, &self.corrections, &self.dictionary)
    }

    /// Replaces the embedding table with vectors for every indexed keyword.
    pub fn load_vectors<R: BufRead>(&mut self, source: R) -> Result<LoadReport> {
        let keywords: Vec<String> = self
            .index
            .keywords()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let refs: Vec<&str> = keywords.iter().map(String::as_str).collect();
        let mut table = EmbeddingTable::new();
        let report = table.load_pretrained(
            source,
            &refs,
            |w| self.normalize_vector_word(w),
            self.config.seed,
        )?;
        self.embeddings = OnceLock::from(table);
        self.dirty.vectors = true;
        Ok(report)
    }

    /// GloVe fine-tuning on the index's co-occurrence table. Indexed keywords
    /// without a vector are randomly initialized first.
    pub fn finetune(&mut self, glove: Option<GloveConfig>) -> Result<TrainingReport> {
        if let Some(root) = &self.root {
            if ServeLock::is_held(root) {
                return Err(Error::StoreLocked(root.clone()));
            }
        }
        let config = glove.unwrap_or(self.config.glove);
        config.validate()?;
        let seed = self.config.seed;
        let keywords: Vec<String> = self
            .index
            .keywords()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let refs: Vec<&str> = keywords.iter().map(String::as_str).collect();
        let mut table = self.embeddings()?.clone();
        table.fill_missing(&refs, seed);
        let report = table.fine_tune(self.index.cooccurrence(), &config, seed)?;
        self.embeddings = OnceLock::from(table);
        self.dirty.vectors = true;
        Ok(report)
    }

    pub fn save_vectors<W: Write>(&self, out: W) -> Result<()> {
        self.embeddings()?.save(out)
    }

    pub fn topics(&self) -> Vec<&Topic> {
        self.topics.list().collect()
    }

    pub fn topic(&self, name: &str) -> Result<&Topic> {
        self.topics.get(name)
    }

    pub fn create_topic<S: AsRef<str>>(&mut self, name: &str, keywords: &[S]) -> Result<Topic> {
        let topic = Topic::new(name, self.normalize_keywords(keywords));
        let created = self.topics.create(topic)?.clone();
        self.dirty.topics = true;
        Ok(created)
    }

    /// Stores an exported topic, normalizing its keywords; replaces any
    /// topic of the same name.
    pub fn import_topic(&mut self, topic: Topic) -> Result<Topic> {
        if topic.name.trim().is_empty() {
            return Err(Error::InvalidInput("topic name is empty".into()));
        }
        let normalized = Topic::new(topic.name, self.normalize_keywords(&topic.keywords));
        self.topics.put(normalized.clone());
        self.dirty.topics = true;
        Ok(normalized)
    }

    pub fn add_keywords<S: AsRef<str>>(&mut self, name: &str, keywords: &[S]) -> Result<Topic> {
        let normalized = self.normalize_keywords(keywords);
        let topic = self.topics.get_mut(name)?;
        topic.add_keywords(normalized);
        let topic = topic.clone();
        self.dirty.topics = true;
        Ok(topic)
    }

    pub fn expand(
        &self,
        name: &str,
        theta: Option<f64>,
        limit: Option<usize>,
    ) -> Result<Expansion> {
        let topic = self.topics.get(name)?;
        topics::expand(
            topic,
            theta.unwrap_or(self.config.theta_default),
            limit.unwrap_or(self.config.expansion_limit),
            &self.index,
            self.embeddings()?,
            self.config.similarity,
        )
    }

    pub fn query(
        &self,
        name: &str,
        order: ResultOrder,
        limit: Option<usize>,
    ) -> Result<Vec<RankedResult>> {
        let topic = self.topics.get(name)?;
        topics::retrieve(
            topic,
            order,
            limit.unwrap_or(usize::MAX),
            &self.index,
            &self.corpus,
        )
    }

    pub fn relevance(&self, name: &str, doc_id: &str) -> Result<f64> {
        topics::relevance(self.topics.get(name)?, doc_id, &self.index)
    }

    /// Per-period counts of documents retrieved for the topic. The range
    /// defaults to the corpus date span.
    pub fn trend(
        &self,
        name: &str,
        granularity: Granularity,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<TrendSeries> {
        let topic = self.topics.get(name)?;
        let stats = self.corpus.stats();
        let (Some(from), Some(to)) = (from.or(stats.date_min), to.or(stats.date_max)) else {
            return Ok(TrendSeries {
                topic_name: topic.name.clone(),
                granularity,
                buckets: Vec::new(),
            });
        };
        let hits = topics::retrieve(
            topic,
            ResultOrder::Date,
            usize::MAX,
            &self.index,
            &self.corpus,
        )?;
        trend::bucket_counts(
            &topic.name,
            hits.iter().map(|r| r.created_date),
            granularity,
            from,
            to,
        )
    }

    pub fn spikes(
        &self,
        name: &str,
        granularity: Granularity,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
        config: Option<SpikeConfig>,
    ) -> Result<Vec<Spike>> {
        let series = self.trend(name, granularity, from, to)?;
        trend::detect_spikes(&series, &config.unwrap_or(self.config.spike))
    }

    pub fn document_view(&self, doc_id: &str, topic: Option<&str>) -> Result<DocumentView> {
        let doc = self.corpus.get_document(doc_id)?;
        let matched = match topic {
            Some(name) => topics::matched_spans(self.topics.get(name)?, doc_id, &self.index),
            None => Vec::new(),
        };
        Ok(DocumentView {
            doc_id: doc.doc_id.clone(),
            created_date: doc.created_date,
            raw_text: doc.raw_text.clone(),
            token_count: doc.token_count,
            matched,
        })
    }

    pub fn stats(&self, top_k: usize) -> Result<StatsReport> {
        Ok(StatsReport {
            corpus: self.corpus.stats(),
            dictionary_size: self.dictionary.len(),
            dictionary: DictionaryCounts {
                english: self.dictionary.count_kind(KeywordKind::English),
                domain: self.dictionary.count_kind(KeywordKind::Domain),
                unknown: self.dictionary.count_kind(KeywordKind::Unknown),
            },
            indexed_keywords: self.index.keyword_count(),
            total_occurrences: self.index.total_occurrences(),
            cooccurrence_pairs: self.index.cooccurrence().pair_count(),
            embeddings: self.embeddings()?.len(),
            topics: self.topics.len(),
            top_keywords: self
                .index
                .top_keywords(top_k)
                .into_iter()
                .map(|(k, n)| KeywordStat {
                    keyword: k.to_owned(),
                    occurrence_total: n,
                    document_frequency: self.index.document_frequency(k),
                })
                .collect(),
        })
    }
}
