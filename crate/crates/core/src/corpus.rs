//! Document store: imported reports keyed by identifier.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub created_date: NaiveDate,
    pub raw_text: String,
    /// Keyword occurrences produced by the text pipeline (n_S). Zero until indexed.
    pub token_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_documents: usize,
    pub date_min: Option<NaiveDate>,
    pub date_max: Option<NaiveDate>,
}

/// One line of a corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub date: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportWarning {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ImportReport {
    pub imported: usize,
    /// Identifiers accepted, in input order (may repeat on duplicates).
    #[serde(skip)]
    pub doc_ids: Vec<String>,
    pub warnings: Vec<ImportWarning>,
}

/// Accepts `YYYY-MM-DD` or an RFC 3339 / ISO-8601 timestamp, keeping the date.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.date_naive());
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S%.f",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
    .map(|dt| dt.date())
}

#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    documents: BTreeMap<String, Document>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Imports JSONL records. Invalid lines are skipped with a warning; a
    /// duplicate id replaces the stored document.
    pub fn import_documents<R: BufRead>(&mut self, source: R) -> Result<ImportReport> {
        let mut report = ImportReport::default();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(&line) {
                Ok(doc) => {
                    report.doc_ids.push(doc.doc_id.clone());
                    self.documents.insert(doc.doc_id.clone(), doc);
                    report.imported += 1;
                }
                Err(reason) => {
                    tracing::warn!(line = lineno, %reason, "skipping corpus record");
                    report.warnings.push(ImportWarning {
                        line: lineno,
                        reason,
                    });
                }
            }
        }
        Ok(report)
    }

    pub fn insert(&mut self, doc: Document) {
        self.documents.insert(doc.doc_id.clone(), doc);
    }

    pub fn get_document(&self, doc_id: &str) -> Result<&Document> {
        self.documents
            .get(doc_id)
            .ok_or_else(|| Error::not_found("document", doc_id))
    }

    pub(crate) fn get_mut(&mut self, doc_id: &str) -> Option<&mut Document> {
        self.documents.get_mut(doc_id)
    }

    /// Ids with `from <= created_date <= to`, by date then id.
    pub fn list_by_date_range(&self, from: NaiveDate, to: NaiveDate) -> Result<Vec<String>> {
        if from > to {
            return Err(Error::InvalidRange {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        let mut hits: Vec<&Document> = self
            .documents
            .values()
            .filter(|d| d.created_date >= from && d.created_date <= to)
            .collect();
        hits.sort_by(|a, b| {
            a.created_date
                .cmp(&b.created_date)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        Ok(hits.into_iter().map(|d| d.doc_id.clone()).collect())
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            total_documents: self.documents.len(),
            date_min: self.documents.values().map(|d| d.created_date).min(),
            date_max: self.documents.values().map(|d| d.created_date).max(),
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }
}

fn parse_record(line: &str) -> std::result::Result<Document, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let field = |name: &str| -> std::result::Result<&str, String> {
        value
            .get(name)
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| format!("missing or non-text field {name:?}"))
    };
    let id = field("id")?.trim();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let date_text = field("date")?;
    let created_date =
        parse_date(date_text).ok_or_else(|| format!("unparseable date {date_text:?}"))?;
    let description = field("description")?;
    Ok(Document {
        doc_id: id.to_owned(),
        created_date,
        raw_text: description.to_owned(),
        token_count: 0,
    })
}

/// Zero-based column positions in a CVE CSV export.
#[derive(Debug, Clone, Copy)]
pub struct CsvColumns {
    pub id: usize,
    pub date: usize,
    pub description: usize,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            id: 0,
            date: 1,
            description: 2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvertReport {
    pub written: usize,
    pub skipped: Vec<ImportWarning>,
}

/// Converts a CVE CSV export into corpus JSONL.
pub fn convert_cve_csv<R: Read, W: Write>(
    input: R,
    mut output: W,
    columns: CsvColumns,
    has_header: bool,
) -> Result<ConvertReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(input);
    let mut report = ConvertReport::default();
    for (idx, row) in reader.records().enumerate() {
        let row = row?;
        let line = row
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 1 + usize::from(has_header));
        let get = |col: usize| row.get(col).map(str::trim).filter(|s| !s.is_empty());
        let (Some(id), Some(date), Some(description)) =
            (get(columns.id), get(columns.date), get(columns.description))
        else {
            report.skipped.push(ImportWarning {
                line,
                reason: "missing column".into(),
            });
            continue;
        };
        let Some(date) = parse_date(date) else {
            report.skipped.push(ImportWarning {
                line,
                reason: format!("unparseable date {date:?}"),
            });
            continue;
        };
        let record = CorpusRecord {
            id: id.to_owned(),
            date: date.to_string(),
            description: description.to_owned(),
        };
        serde_json::to_writer(&mut output, &record)?;
        output.write_all(b"\n")?;
        report.written += 1;
    }
    output.flush()?;
    Ok(report)
}
