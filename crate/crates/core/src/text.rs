//! Report text to keyword stream: tokenize, spell-correct, stem.
//!
//! Every [`Token`] keeps the byte range of its original text so matches can be
//! highlighted in the stored report. Stemming uses Snowball English (Porter2),
//! except for surfaces registered as domain terms in the [`KeywordDictionary`].

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Normalized keyword text.
    pub surface: String,
    pub byte_start: usize,
    pub byte_end: usize,
    /// Text as it appears in the report.
    pub original: String,
}

/// Splits `raw_text` into maximal runs of Unicode letters and digits.
///
/// Runs consisting only of digits and runs of a single character are dropped.
pub fn tokenize(raw_text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in raw_text.char_indices() {
        match (ch.is_alphanumeric(), start) {
            (true, None) => start = Some(idx),
            (false, Some(s)) => {
                push_run(raw_text, s, idx, &mut tokens);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push_run(raw_text, s, raw_text.len(), &mut tokens);
    }
    tokens
}

fn push_run(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let run = &text[start..end];
    let mut chars = run.chars();
    if chars.next().is_none() || chars.next().is_none() {
        return;
    }
    if run.chars().all(char::is_numeric) {
        return;
    }
    out.push(Token {
        surface: run.to_lowercase(),
        byte_start: start,
        byte_end: end,
        original: run.to_owned(),
    });
}

/// Misspelling to correction mapping. Never contains chains: no corrected
/// surface is itself a key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionMap {
    entries: HashMap<String, String>,
}

impl CorrectionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&str> {
        self.entries.get(surface).map(String::as_str)
    }

    /// Inserts `wrong → right`, flattening any chain the new pair would create.
    /// Returns false when the pair is a no-op (identity or cycle).
    pub fn insert(&mut self, wrong: &str, right: &str) -> bool {
        let wrong = wrong.trim().to_lowercase();
        let mut right = right.trim().to_lowercase();
        if wrong.is_empty() || right.is_empty() {
            return false;
        }
        if let Some(target) = self.entries.get(&right) {
            right = target.clone();
        }
        if wrong == right {
            return false;
        }
        for target in self.entries.values_mut() {
            if *target == wrong {
                *target = right.clone();
            }
        }
        self.entries.insert(wrong, right);
        true
    }

    /// Reads tab-separated `misspelled<TAB>correct` lines. Blank lines and
    /// lines starting with `#` are ignored. Returns pairs inserted.
    pub fn load_tsv<R: BufRead>(&mut self, reader: R) -> Result<usize> {
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::LoadFailure {
                what: "correction map".into(),
                source,
            })?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((wrong, right)) => pairs.push((wrong.to_owned(), right.to_owned())),
                None => tracing::warn!(
                    line = lineno + 1,
                    "correction map line without tab, skipped"
                ),
            }
        }
        Ok(pairs
            .iter()
            .filter(|(wrong, right)| self.insert(wrong, right))
            .count())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Replaces the token's surface by its correction, leaving offsets intact.
pub fn correct(mut token: Token, map: &CorrectionMap) -> Token {
    if let Some(fixed) = map.get(&token.surface) {
        token.surface = fixed.to_owned();
    }
    token
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordKind {
    Unknown,
    English,
    Domain,
}

impl fmt::Display for KeywordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeywordKind::Unknown => "unknown",
            KeywordKind::English => "english",
            KeywordKind::Domain => "domain",
        })
    }
}

impl FromStr for KeywordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "english" => Ok(KeywordKind::English),
            "domain" => Ok(KeywordKind::Domain),
            "unknown" => Ok(KeywordKind::Unknown),
            other => Err(Error::InvalidInput(format!(
                "unknown keyword kind {other:?}"
            ))),
        }
    }
}

/// The keyword dictionary: every known surface and its kind.
///
/// Kinds only ever move upward (unknown → english → domain), so a curated
/// domain term is never demoted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordDictionary {
    entries: HashMap<String, KeywordKind>,
}

impl KeywordDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kind(&self, surface: &str) -> Option<KeywordKind> {
        self.entries.get(surface).copied()
    }

    /// Inserts or upgrades `surface`. Returns true if the dictionary changed.
    pub fn insert(&mut self, surface: &str, kind: KeywordKind) -> bool {
        let surface = surface.to_lowercase();
        match self.entries.get_mut(&surface) {
            Some(existing) if *existing >= kind => false,
            Some(existing) => {
                *existing = kind;
                true
            }
            None => {
                self.entries.insert(surface, kind);
                true
            }
        }
    }

    /// Loads one surface per line with the given kind. The stream is read in
    /// full before anything is inserted, so a read failure changes nothing.
    pub fn load_word_list<R: BufRead>(&mut self, reader: R, kind: KeywordKind) -> Result<usize> {
        let words = reader
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|source| Error::LoadFailure {
                what: format!("{kind} word list"),
                source,
            })?;
        Ok(words
            .iter()
            .map(|w| w.trim())
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .filter(|w| self.insert(w, kind))
            .count())
    }

    /// Drops every entry of the given kind.
    pub fn remove_kind(&mut self, kind: KeywordKind) {
        self.entries.retain(|_, k| *k != kind);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, KeywordKind)> {
        self.entries.iter().map(|(s, k)| (s.as_str(), *k))
    }

    pub fn count_kind(&self, kind: KeywordKind) -> usize {
        self.entries.values().filter(|k| **k == kind).count()
    }
}

fn english_stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Snowball English (Porter2) stem.
pub fn stem(word: &str) -> Cow<'_, str> {
    english_stemmer().stem(word)
}

/// Outcome of normalizing one surface against a dictionary snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub surface: String,
    /// Entry the dictionary must gain so the keyword is known.
    pub insert: Option<(String, KeywordKind)>,
}

/// Read-only normalization: domain terms pass through, everything else is
/// stemmed. The stemmed surface is reported for insertion, as english if it
/// came from an english word and unknown otherwise, whenever the dictionary
/// does not already hold it at that kind or higher. Insertions only raise
/// kinds, so applying them in any order gives the same dictionary.
pub fn resolve(surface: &str, dictionary: &KeywordDictionary) -> Normalized {
    match dictionary.kind(surface) {
        Some(KeywordKind::Domain) => Normalized {
            surface: surface.to_owned(),
            insert: None,
        },
        source => {
            let stemmed = stem(surface).into_owned();
            let kind = match source {
                Some(KeywordKind::English) => KeywordKind::English,
                _ => KeywordKind::Unknown,
            };
            let insert = (dictionary.kind(&stemmed) < Some(kind)).then(|| (stemmed.clone(), kind));
            Normalized {
                surface: stemmed,
                insert,
            }
        }
    }
}

/// Normalizes a corrected token, registering new keywords in `dictionary`.
pub fn normalize(mut token: Token, dictionary: &mut KeywordDictionary) -> Token {
    let normalized = resolve(&token.surface, dictionary);
    if let Some((surface, kind)) = normalized.insert {
        dictionary.insert(&surface, kind);
    }
    token.surface = normalized.surface;
    token
}

/// Full pipeline against a dictionary snapshot. Returns the tokens and the
/// dictionary insertions they require, deduplicated, in first-seen order.
pub fn analyze(
    raw_text: &str,
    corrections: &CorrectionMap,
    dictionary: &KeywordDictionary,
) -> (Vec<Token>, Vec<(String, KeywordKind)>) {
    let mut inserts: Vec<(String, KeywordKind)> = Vec::new();
    let tokens = tokenize(raw_text)
        .into_iter()
        .map(|token| {
            let mut token = correct(token, corrections);
            let normalized = resolve(&token.surface, dictionary);
            if let Some(ins) = normalized.insert {
                if !inserts.contains(&ins) {
                    inserts.push(ins);
                }
            }
            token.surface = normalized.surface;
            token
        })
        .collect();
    (tokens, inserts)
}

/// Normalizes a user-supplied keyword (topic seeds, vector file words)
/// without touching the dictionary. Returns None if nothing survives
/// tokenization.
pub fn normalize_keyword(
    word: &str,
    corrections: &CorrectionMap,
    dictionary: &KeywordDictionary,
) -> Option<String> {
    let token = tokenize(word).into_iter().next()?;
    let token = correct(token, corrections);
    Some(resolve(&token.surface, dictionary).surface)
}
