//! On-disk store layout.
//!
//! ```text
//! <store>/manifest.json     {"format": "vulntrack-store", "version": 1}
//! <store>/config.json       engine configuration
//! <store>/documents.jsonl   one Document per line
//! <store>/dictionary.tsv    surface<TAB>kind
//! <store>/corrections.tsv   misspelled<TAB>correct
//! <store>/index.json        postings, keyword streams, co-occurrence
//! <store>/vectors.txt       word v1 ... v768
//! <store>/topics.json       named topics
//! <store>/serve.lock        present while a service holds the store
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so an
//! interrupted write leaves the previous version intact.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStore, Document};
use crate::error::{Error, Result};
use crate::text::{CorrectionMap, KeywordDictionary, KeywordKind};

pub const FORMAT_NAME: &str = "vulntrack-store";
pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
pub const DOCUMENTS: &str = "documents.jsonl";
pub const DICTIONARY: &str = "dictionary.tsv";
pub const CORRECTIONS: &str = "corrections.tsv";
pub const INDEX: &str = "index.json";
pub const VECTORS: &str = "vectors.txt";
pub const TOPICS: &str = "topics.json";
pub const SERVE_LOCK: &str = "serve.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
        }
    }
}

/// Writes `path` through a temporary file and an atomic rename.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write(&mut out)?;
        out.flush()?;
        out.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |out| {
        serde_json::to_writer(&mut *out, value)?;
        Ok(())
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

pub fn check_manifest(root: &Path) -> Result<()> {
    let path = root.join(MANIFEST);
    let manifest: Manifest = read_json(&path)?;
    if manifest.format != FORMAT_NAME || manifest.version != FORMAT_VERSION {
        return Err(Error::StoreFormat {
            path,
            found: format!("{} v{}", manifest.format, manifest.version),
        });
    }
    Ok(())
}

pub fn write_documents(path: &Path, corpus: &CorpusStore) -> Result<()> {
    write_atomic(path, |out| {
        for doc in corpus.documents() {
            serde_json::to_writer(&mut *out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_documents(path: &Path) -> Result<CorpusStore> {
    let mut corpus = CorpusStore::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.is_empty() {
            let doc: Document = serde_json::from_str(&line)?;
            corpus.insert(doc);
        }
    }
    Ok(corpus)
}

pub fn write_dictionary(path: &Path, dictionary: &KeywordDictionary) -> Result<()> {
    let mut entries: Vec<(&str, KeywordKind)> = dictionary.iter().collect();
    entries.sort_unstable();
    write_atomic(path, |out| {
        for (surface, kind) in entries {
            writeln!(out, "{surface}\t{kind}")?;
        }
        Ok(())
    })
}

pub fn read_dictionary(path: &Path) -> Result<KeywordDictionary> {
    let mut dictionary = KeywordDictionary::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let (surface, kind) = line.split_once('\t').ok_or_else(|| {
            Error::InvalidInput(format!("{}:{}: missing tab", path.display(), idx + 1))
        })?;
        dictionary.insert(surface, kind.parse()?);
    }
    Ok(dictionary)
}

pub fn write_corrections(path: &Path, map: &CorrectionMap) -> Result<()> {
    let mut pairs: Vec<(&str, &str)> = map.iter().collect();
    pairs.sort_unstable();
    write_atomic(path, |out| {
        for (wrong, right) in pairs {
            writeln!(out, "{wrong}\t{right}")?;
        }
        Ok(())
    })
}

pub fn read_corrections(path: &Path) -> Result<CorrectionMap> {
    let mut map = CorrectionMap::new();
    map.load_tsv(BufReader::new(File::open(path)?))?;
    Ok(map)
}

/// Marker file held by a running service.
#[derive(Debug)]
pub struct ServeLock {
    path: PathBuf,
}

impl ServeLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(SERVE_LOCK);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::StoreLocked(root.to_owned()))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn is_held(root: &Path) -> bool {
        root.join(SERVE_LOCK).exists()
    }
}

impl Drop for ServeLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
