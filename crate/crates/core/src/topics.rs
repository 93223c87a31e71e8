//! Keyword topics: expansion recommendations, relevance scoring, retrieval.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStore;
use crate::embeddings::{similarity, EmbeddingTable, SimilarityMeasure};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;

pub const DEFAULT_THETA: f64 = 0.9;
pub const DEFAULT_LIMIT: usize = 50;

/// A named ordered set of normalized keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub name: String,
    pub keywords: Vec<String>,
}

impl Topic {
    /// Builds a topic, dropping duplicate keywords while keeping first-seen order.
    pub fn new(name: impl Into<String>, keywords: impl IntoIterator<Item = String>) -> Self {
        let mut topic = Topic {
            name: name.into(),
            keywords: Vec::new(),
        };
        topic.add_keywords(keywords);
        topic
    }

    /// Appends keywords not already present. Returns how many were added.
    pub fn add_keywords(&mut self, keywords: impl IntoIterator<Item = String>) -> usize {
        let before = self.keywords.len();
        for k in keywords {
            if !k.is_empty() && !self.keywords.contains(&k) {
                self.keywords.push(k);
            }
        }
        self.keywords.len() - before
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.keywords.iter().any(|k| k == keyword)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCandidate {
    pub keyword: String,
    /// idf of the candidate; the ranking key.
    pub score: f64,
    pub max_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expansion {
    pub candidates: Vec<ExpansionCandidate>,
    /// Topic keywords without a usable embedding.
    pub unexpandable: Vec<String>,
}

/// Recommends keywords `b ∉ Q` with defined idf and `ρ(a, b) > θ` for some
/// `a ∈ Q`, by idf descending then surface, truncated to `limit`.
pub fn expand(
    topic: &Topic,
    theta: f64,
    limit: usize,
    index: &InvertedIndex,
    embeddings: &EmbeddingTable,
    measure: SimilarityMeasure,
) -> Result<Expansion> {
    if topic.keywords.is_empty() {
        return Err(Error::EmptyTopic);
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let mut seeds = Vec::new();
    let mut unexpandable = Vec::new();
    for k in &topic.keywords {
        match embeddings.get(k).filter(|v| v.norm() > 0.0) {
            Some(v) => seeds.push(v),
            None => unexpandable.push(k.clone()),
        }
    }
    if seeds.is_empty() {
        return Err(Error::NoEmbedding(format!(
            "every keyword of topic {:?}",
            topic.name
        )));
    }

    let mut candidates: Vec<ExpansionCandidate> = index
        .keywords()
        .into_iter()
        .filter(|k| !topic.contains(k))
        .filter_map(|k| {
            let vector = embeddings.get(k)?;
            let best = seeds
                .iter()
                .filter_map(|s| similarity(s, vector, measure))
                .fold(f64::NEG_INFINITY, f64::max);
            if best <= theta {
                return None;
            }
            let score = index.idf(k).ok()?;
            Some(ExpansionCandidate {
                keyword: k.to_owned(),
                score,
                max_similarity: best,
            })
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.keyword.cmp(&b.keyword))
    });
    candidates.truncate(limit);
    Ok(Expansion {
        candidates,
        unexpandable,
    })
}

/// `Γ(Q, S) = Σ_{a∈Q} t(a, S) · d(a)`; keywords without idf contribute 0.
pub fn relevance(topic: &Topic, doc_id: &str, index: &InvertedIndex) -> Result<f64> {
    let mut total = 0.0;
    for k in &topic.keywords {
        let tf = index.term_frequency(k, doc_id)?;
        if tf > 0.0 {
            if let Ok(idf) = index.idf(k) {
                total += tf * idf;
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultOrder {
    #[default]
    Relevance,
    Date,
}

impl FromStr for ResultOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevance" => Ok(ResultOrder::Relevance),
            "date" => Ok(ResultOrder::Date),
            other => Err(Error::InvalidInput(format!("unknown order {other:?}"))),
        }
    }
}

impl fmt::Display for ResultOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResultOrder::Relevance => "relevance",
            ResultOrder::Date => "date",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub byte_start: usize,
    pub byte_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedKeyword {
    pub keyword: String,
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub doc_id: String,
    pub relevance: f64,
    pub created_date: NaiveDate,
    pub matched: Vec<MatchedKeyword>,
}

/// Spans of every topic keyword in a document, in topic order.
pub fn matched_spans(topic: &Topic, doc_id: &str, index: &InvertedIndex) -> Vec<MatchedKeyword> {
    topic
        .keywords
        .iter()
        .filter_map(|k| {
            let posting = index.posting(k, doc_id)?;
            Some(MatchedKeyword {
                keyword: k.clone(),
                spans: posting
                    .positions
                    .iter()
                    .map(|p| Span {
                        byte_start: p.byte_start,
                        byte_end: p.byte_end,
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Every document containing at least one topic keyword, ranked.
///
/// By relevance: Γ descending, then newer first, then id. By date: newer
/// first, then Γ descending, then id.
pub fn retrieve(
    topic: &Topic,
    order: ResultOrder,
    limit: usize,
    index: &InvertedIndex,
    corpus: &CorpusStore,
) -> Result<Vec<RankedResult>> {
    if topic.keywords.is_empty() {
        return Err(Error::EmptyTopic);
    }
    let hits: BTreeSet<String> = topic
        .keywords
        .iter()
        .flat_map(|k| index.docs_containing(k))
        .collect();
    let mut results = hits
        .into_iter()
        .map(|doc_id| {
            let doc = corpus.get_document(&doc_id)?;
            Ok(RankedResult {
                relevance: relevance(topic, &doc_id, index)?,
                created_date: doc.created_date,
                matched: matched_spans(topic, &doc_id, index),
                doc_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| compare(a, b, order));
    results.truncate(limit);
    Ok(results)
}

fn compare(a: &RankedResult, b: &RankedResult, order: ResultOrder) -> Ordering {
    let by_relevance = b.relevance.total_cmp(&a.relevance);
    let by_date = b.created_date.cmp(&a.created_date);
    let primary = match order {
        ResultOrder::Relevance => by_relevance.then(by_date),
        ResultOrder::Date => by_date.then(by_relevance),
    };
    primary.then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Named topics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicStore {
    topics: BTreeMap<String, Topic>,
}

impl TopicStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create(&mut self, topic: Topic) -> Result<&Topic> {
        if topic.name.trim().is_empty() {
            return Err(Error::InvalidInput("topic name is empty".into()));
        }
        if self.topics.contains_key(&topic.name) {
            return Err(Error::TopicExists(topic.name));
        }
        let name = topic.name.clone();
        Ok(self.topics.entry(name).or_insert(topic))
    }

    /// Inserts or replaces a topic.
    pub fn put(&mut self, topic: Topic) {
        self.topics.insert(topic.name.clone(), topic);
    }

    pub fn get(&self, name: &str) -> Result<&Topic> {
        self.topics
            .get(name)
            .ok_or_else(|| Error::not_found("topic", name))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Topic> {
        self.topics
            .get_mut(name)
            .ok_or_else(|| Error::not_found("topic", name))
    }

    pub fn list(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}
