//! Positional inverted index, keyword statistics and co-occurrence counts.
//!
//! Co-occurrence weights use a symmetric window of `W` tokens with `1/d`
//! weighting. They are kept as integer multiples of `1 / lcm(1..=W)`, which
//! makes every update exact: retracting a document restores the table
//! bit-for-bit and merges are order independent.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::text::{self, CorrectionMap, KeywordDictionary, KeywordKind, Token};

pub const DEFAULT_WINDOW: usize = 10;
const MAX_WINDOW: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub ordinal: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: String,
    pub positions: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostingList {
    pub keyword: String,
    pub postings: BTreeMap<String, Posting>,
    pub occurrence_total: usize,
}

impl PostingList {
    fn new(keyword: &str) -> Self {
        Self {
            keyword: keyword.to_owned(),
            postings: BTreeMap::new(),
            occurrence_total: 0,
        }
    }

    /// N_a, the number of documents containing the keyword.
    pub fn document_frequency(&self) -> usize {
        self.postings.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordEntry {
    pub surface: String,
    pub kind: Option<KeywordKind>,
    pub document_frequency: usize,
    pub occurrence_total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSummary {
    pub doc_id: String,
    pub distinct_keywords: usize,
    pub token_count: usize,
}

fn lcm_up_to(window: usize) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=window as u64).fold(1, |acc, d| acc / gcd(acc, d) * d)
}

/// Sparse symmetric keyword co-occurrence weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    window: usize,
    scale: u64,
    names: Vec<String>,
    ids: HashMap<String, u32>,
    /// Keyed by `(min_id, max_id)`; values in units of `1/scale`.
    units: HashMap<(u32, u32), u64>,
}

/// One ordered nonzero entry `X_ab`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooccurrenceEntry {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

impl Default for CooccurrenceTable {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl CooccurrenceTable {
    pub fn new(window: usize) -> Self {
        let window = window.clamp(1, MAX_WINDOW);
        Self {
            window,
            scale: lcm_up_to(window),
            names: Vec::new(),
            ids: HashMap::new(),
            units: HashMap::new(),
        }
    }

    /// Builds a table from explicit weights, rounded to the table's unit.
    /// Repeated pairs accumulate.
    pub fn from_weights<'a>(weights: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut table = Self::default();
        for (a, b, w) in weights {
            let (a, b) = (table.intern(a), table.intern(b));
            let units = (w * table.scale as f64).round().max(0.0) as u64;
            table.add_units(a, b, units);
        }
        table
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn intern(&mut self, surface: &str) -> u32 {
        if let Some(&id) = self.ids.get(surface) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(surface.to_owned());
        self.ids.insert(surface.to_owned(), id);
        id
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.ids.get(surface).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    fn key(a: u32, b: u32) -> (u32, u32) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn add_units(&mut self, a: u32, b: u32, units: u64) {
        if units > 0 {
            *self.units.entry(Self::key(a, b)).or_insert(0) += units;
        }
    }

    fn sub_units(&mut self, a: u32, b: u32, units: u64) {
        let key = Self::key(a, b);
        if let Some(v) = self.units.get_mut(&key) {
            *v = v.saturating_sub(units);
            if *v == 0 {
                self.units.remove(&key);
            }
        }
    }

    /// Visits every token pair within the window of a keyword stream.
    fn window_pairs(&self, stream: &[u32], mut f: impl FnMut(u32, u32, u64)) {
        for (i, &a) in stream.iter().enumerate() {
            for d in 1..=self.window {
                let Some(&b) = stream.get(i + d) else { break };
                f(a, b, self.scale / d as u64);
            }
        }
    }

    fn accumulate(&mut self, stream: &[u32]) {
        let mut adds = Vec::new();
        self.window_pairs(stream, |a, b, u| adds.push((a, b, u)));
        for (a, b, u) in adds {
            self.add_units(a, b, u);
        }
    }

    fn retract(&mut self, stream: &[u32]) {
        let mut subs = Vec::new();
        self.window_pairs(stream, |a, b, u| subs.push((a, b, u)));
        for (a, b, u) in subs {
            self.sub_units(a, b, u);
        }
    }

    /// `X_ab`; zero for unknown keywords.
    pub fn weight(&self, a: &str, b: &str) -> f64 {
        match (self.id(a), self.id(b)) {
            (Some(a), Some(b)) => {
                self.units.get(&Self::key(a, b)).copied().unwrap_or(0) as f64 / self.scale as f64
            }
            _ => 0.0,
        }
    }

    /// Number of stored unordered pairs.
    pub fn pair_count(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Ordered nonzero entries: both `(a, b)` and `(b, a)` for distinct keywords,
    /// sorted by `(row, col)`.
    pub fn entries(&self) -> Vec<CooccurrenceEntry> {
        let scale = self.scale as f64;
        let mut out = Vec::with_capacity(self.units.len() * 2);
        for (&(a, b), &u) in &self.units {
            let value = u as f64 / scale;
            out.push(CooccurrenceEntry {
                row: a,
                col: b,
                value,
            });
            if a != b {
                out.push(CooccurrenceEntry {
                    row: b,
                    col: a,
                    value,
                });
            }
        }
        out.sort_by_key(|e| (e.row, e.col));
        out
    }

    /// Ids of keywords taking part in at least one nonzero pair.
    pub fn active_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.units.keys().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn keyword_count(&self) -> usize {
        self.names.len()
    }
}

#[derive(Serialize, Deserialize)]
struct CooccurrenceData {
    window: usize,
    names: Vec<String>,
    pairs: Vec<(u32, u32, u64)>,
}

impl Serialize for CooccurrenceTable {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let mut pairs: Vec<(u32, u32, u64)> =
            self.units.iter().map(|(&(a, b), &u)| (a, b, u)).collect();
        pairs.sort_unstable();
        CooccurrenceData {
            window: self.window,
            names: self.names.clone(),
            pairs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CooccurrenceTable {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let data = CooccurrenceData::deserialize(deserializer)?;
        let mut table = CooccurrenceTable::new(data.window);
        for name in &data.names {
            table.intern(name);
        }
        for (a, b, u) in data.pairs {
            if a as usize >= table.names.len() || b as usize >= table.names.len() {
                return Err(serde::de::Error::custom("co-occurrence id out of range"));
            }
            table.add_units(a, b, u);
        }
        Ok(table)
    }
}

/// The keyword index: positional postings, per-document keyword streams and
/// the co-occurrence table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InvertedIndex {
    lists: HashMap<String, PostingList>,
    /// Normalized keyword stream of each indexed document, as table ids.
    streams: HashMap<String, Vec<u32>>,
    cooccurrence: CooccurrenceTable,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_window(window: usize) -> Self {
        Self {
            cooccurrence: CooccurrenceTable::new(window),
            ..Self::default()
        }
    }

    /// Runs the text pipeline over `doc` and indexes the result, replacing
    /// any earlier version of the same document.
    pub fn index_document(
        &mut self,
        doc: &Document,
        corrections: &CorrectionMap,
        dictionary: &mut KeywordDictionary,
    ) -> IndexSummary {
        let (tokens, inserts) = text::analyze(&doc.raw_text, corrections, dictionary);
        for (surface, kind) in inserts {
            dictionary.insert(&surface, kind);
        }
        self.index_tokens(&doc.doc_id, &tokens)
    }

    /// Indexes many documents, running the pipeline in parallel against one
    /// dictionary snapshot. Produces the same index and dictionary as indexing
    /// them one at a time.
    pub fn index_documents<'a>(
        &mut self,
        docs: impl IntoIterator<Item = &'a Document>,
        corrections: &CorrectionMap,
        dictionary: &mut KeywordDictionary,
    ) -> Vec<IndexSummary> {
        let docs: Vec<&Document> = docs.into_iter().collect();
        let snapshot: &KeywordDictionary = dictionary;
        let analyzed: Vec<_> = docs
            .par_iter()
            .map(|doc| text::analyze(&doc.raw_text, corrections, snapshot))
            .collect();
        let mut summaries = Vec::with_capacity(docs.len());
        for (doc, (tokens, inserts)) in docs.iter().zip(analyzed) {
            for (surface, kind) in inserts {
                dictionary.insert(&surface, kind);
            }
            summaries.push(self.index_tokens(&doc.doc_id, &tokens));
        }
        summaries
    }

    /// Indexes an already normalized token stream.
    pub fn index_tokens(&mut self, doc_id: &str, tokens: &[Token]) -> IndexSummary {
        self.remove_document(doc_id);
        let mut stream = Vec::with_capacity(tokens.len());
        for (ordinal, token) in tokens.iter().enumerate() {
            let id = self.cooccurrence.intern(&token.surface);
            stream.push(id);
            let list = self
                .lists
                .entry(token.surface.clone())
                .or_insert_with(|| PostingList::new(&token.surface));
            list.occurrence_total += 1;
            list.postings
                .entry(doc_id.to_owned())
                .or_insert_with(|| Posting {
                    doc_id: doc_id.to_owned(),
                    positions: Vec::new(),
                })
                .positions
                .push(Position {
                    ordinal: ordinal as u32,
                    byte_start: token.byte_start,
                    byte_end: token.byte_end,
                });
        }
        self.cooccurrence.accumulate(&stream);
        let mut distinct = stream.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let summary = IndexSummary {
            doc_id: doc_id.to_owned(),
            distinct_keywords: distinct.len(),
            token_count: stream.len(),
        };
        self.streams.insert(doc_id.to_owned(), stream);
        summary
    }

    /// Retracts every contribution of `doc_id`. Returns false if it was not indexed.
    pub fn remove_document(&mut self, doc_id: &str) -> bool {
        let Some(stream) = self.streams.remove(doc_id) else {
            return false;
        };
        self.cooccurrence.retract(&stream);
        let mut seen = stream.clone();
        seen.sort_unstable();
        seen.dedup();
        for id in seen {
            let surface = self.cooccurrence.name(id).to_owned();
            if let Some(list) = self.lists.get_mut(&surface) {
                if let Some(posting) = list.postings.remove(doc_id) {
                    list.occurrence_total -= posting.positions.len();
                }
                if list.postings.is_empty() {
                    self.lists.remove(&surface);
                }
            }
        }
        true
    }

    pub fn clear(&mut self) {
        let window = self.cooccurrence.window();
        *self = Self::with_window(window);
    }

    /// N, the number of indexed documents.
    pub fn total_documents(&self) -> usize {
        self.streams.len()
    }

    pub fn is_indexed(&self, doc_id: &str) -> bool {
        self.streams.contains_key(doc_id)
    }

    /// n_S for an indexed document.
    pub fn token_count(&self, doc_id: &str) -> Result<usize> {
        self.streams
            .get(doc_id)
            .map(Vec::len)
            .ok_or_else(|| Error::not_found("indexed document", doc_id))
    }

    pub fn document_frequency(&self, keyword: &str) -> usize {
        self.lists
            .get(keyword)
            .map_or(0, PostingList::document_frequency)
    }

    /// `d(a) = ln(N / N_a)`.
    pub fn idf(&self, keyword: &str) -> Result<f64> {
        let df = self.document_frequency(keyword);
        if df == 0 {
            return Err(Error::UndefinedScore(keyword.to_owned()));
        }
        Ok((self.total_documents() as f64 / df as f64).ln())
    }

    /// `t(a, S) = n_{a,S} / n_S`, zero when the keyword is absent or the
    /// document has no tokens.
    pub fn term_frequency(&self, keyword: &str, doc_id: &str) -> Result<f64> {
        let n_s = self.token_count(doc_id)?;
        if n_s == 0 {
            return Ok(0.0);
        }
        Ok(self.occurrences(keyword, doc_id) as f64 / n_s as f64)
    }

    /// n_{a,S}.
    pub fn occurrences(&self, keyword: &str, doc_id: &str) -> usize {
        self.posting(keyword, doc_id)
            .map_or(0, |p| p.positions.len())
    }

    pub fn posting(&self, keyword: &str, doc_id: &str) -> Option<&Posting> {
        self.lists.get(keyword)?.postings.get(doc_id)
    }

    pub fn posting_list(&self, keyword: &str) -> Option<&PostingList> {
        self.lists.get(keyword)
    }

    /// Ids of documents containing `keyword`, sorted.
    pub fn docs_containing(&self, keyword: &str) -> Vec<String> {
        self.lists
            .get(keyword)
            .map(|l| l.postings.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Keywords occurring in at least one document, sorted.
    pub fn keywords(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.lists.keys().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    pub fn keyword_count(&self) -> usize {
        self.lists.len()
    }

    pub fn keyword_entry(&self, surface: &str, dictionary: &KeywordDictionary) -> KeywordEntry {
        let list = self.lists.get(surface);
        KeywordEntry {
            surface: surface.to_owned(),
            kind: dictionary.kind(surface),
            document_frequency: list.map_or(0, PostingList::document_frequency),
            occurrence_total: list.map_or(0, |l| l.occurrence_total),
        }
    }

    /// Keywords by occurrence total, descending, ties by surface.
    pub fn top_keywords(&self, k: usize) -> Vec<(&str, usize)> {
        let mut all: Vec<(&str, usize)> = self
            .lists
            .values()
            .map(|l| (l.keyword.as_str(), l.occurrence_total))
            .collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        all.truncate(k);
        all
    }

    pub fn total_occurrences(&self) -> usize {
        self.lists.values().map(|l| l.occurrence_total).sum()
    }

    pub fn cooccurrence(&self) -> &CooccurrenceTable {
        &self.cooccurrence
    }
}
