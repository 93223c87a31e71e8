//! Independent oracles and fixtures shared by integration and acceptance
//! tests. Nothing here calls into the scoring code it checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vulntrack_core::embeddings::GloveModel;
use vulntrack_core::text::{self, tokenize};
use vulntrack_core::topics::{self, Topic};
use vulntrack_core::{
    Document, EmbeddingTable, EmbeddingVector, Engine, EngineConfig, KeywordKind, ResultOrder,
    SimilarityMeasure, DIMENSION,
};

pub const VOCABULARY: &[&str] = &[
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango",
    "uniform", "victor", "whiskey", "xray", "yankee", "zulu",
];

pub fn sample_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

/// An engine over the bundled sample with its word lists and corrections.
pub fn sample_engine() -> Engine {
    let dir = sample_dir();
    let mut engine = Engine::in_memory(EngineConfig::default()).unwrap();
    let open = |name: &str| std::io::BufReader::new(std::fs::File::open(dir.join(name)).unwrap());
    engine
        .load_dictionary(open("english.txt"), KeywordKind::English)
        .unwrap();
    engine
        .load_dictionary(open("domain.txt"), KeywordKind::Domain)
        .unwrap();
    engine.load_corrections(open("corrections.tsv")).unwrap();
    engine.import_documents(open("corpus.jsonl")).unwrap();
    engine
}

#[derive(Debug, Clone)]
pub struct SyntheticDoc {
    pub id: String,
    pub date: NaiveDate,
    pub text: String,
}

/// Random documents over [`VOCABULARY`] with mixed case and punctuation.
pub fn synthetic_corpus(seed: u64, docs: usize, max_tokens: usize) -> Vec<SyntheticDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let separators = [" ", " ", " ", ", ", ". ", "-", " (", ") ", "; "];
    // A small vocabulary slice per corpus so keywords repeat across documents.
    let vocab: Vec<&str> = VOCABULARY.choose_multiple(&mut rng, 12).copied().collect();
    (0..docs)
        .map(|i| {
            let n = rng.random_range(1..=max_tokens);
            let mut text = String::new();
            for t in 0..n {
                if t > 0 {
                    text.push_str(separators.choose(&mut rng).unwrap());
                }
                let word = *vocab.choose(&mut rng).unwrap();
                if rng.random_bool(0.2) {
                    text.push_str(&word.to_uppercase());
                } else {
                    text.push_str(word);
                }
            }
            let date = NaiveDate::from_ymd_opt(
                rng.random_range(2000..2004),
                rng.random_range(1..=12),
                rng.random_range(1..=28),
            )
            .unwrap();
            SyntheticDoc {
                id: format!("doc-{i:03}"),
                date,
                text,
            }
        })
        .collect()
}

/// Indexes synthetic documents with every vocabulary word registered as a
/// domain keyword, so surfaces are exactly the lowercased words.
pub fn synthetic_engine(docs: &[SyntheticDoc]) -> Engine {
    let mut engine = Engine::in_memory(EngineConfig::default()).unwrap();
    engine
        .load_dictionary(VOCABULARY.join("\n").as_bytes(), KeywordKind::Domain)
        .unwrap();
    for d in docs {
        engine
            .upsert_document(Document {
                doc_id: d.id.clone(),
                created_date: d.date,
                raw_text: d.text.clone(),
                token_count: 0,
            })
            .unwrap();
    }
    engine
}

/// Full-rescan scoring straight from the raw texts.
#[derive(Debug)]
pub struct RescanOracle {
    counts: BTreeMap<String, BTreeMap<String, usize>>,
    lengths: BTreeMap<String, usize>,
    dates: BTreeMap<String, NaiveDate>,
}

impl RescanOracle {
    pub fn new(docs: &[SyntheticDoc]) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut lengths = BTreeMap::new();
        let mut dates = BTreeMap::new();
        for d in docs {
            let words: Vec<String> = d
                .text
                .split(|c: char| !c.is_ascii_alphabetic())
                .filter(|w| !w.is_empty())
                .map(str::to_ascii_lowercase)
                .collect();
            lengths.insert(d.id.clone(), words.len());
            dates.insert(d.id.clone(), d.date);
            for w in words {
                *counts
                    .entry(w)
                    .or_default()
                    .entry(d.id.clone())
                    .or_default() += 1;
            }
        }
        Self {
            counts,
            lengths,
            dates,
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.lengths.keys().map(String::as_str)
    }

    pub fn length(&self, doc: &str) -> usize {
        self.lengths[doc]
    }

    pub fn count(&self, keyword: &str, doc: &str) -> usize {
        self.counts
            .get(keyword)
            .and_then(|m| m.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn docs_containing(&self, keyword: &str) -> Vec<String> {
        self.counts
            .get(keyword)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn tf(&self, keyword: &str, doc: &str) -> f64 {
        let n = self.length(doc);
        if n == 0 {
            0.0
        } else {
            self.count(keyword, doc) as f64 / n as f64
        }
    }

    pub fn idf(&self, keyword: &str) -> Option<f64> {
        let df = self.docs_containing(keyword).len();
        (df > 0).then(|| (self.lengths.len() as f64 / df as f64).ln())
    }

    pub fn relevance(&self, topic: &[&str], doc: &str) -> f64 {
        let mut total = 0.0;
        for k in topic {
            let tf = self.tf(k, doc);
            if tf > 0.0 {
                if let Some(idf) = self.idf(k) {
                    total += tf * idf;
                }
            }
        }
        total
    }

    /// Matching documents by relevance descending, newer first, then id.
    pub fn retrieve(&self, topic: &[&str]) -> Vec<(String, f64)> {
        let hits: BTreeSet<String> = topic.iter().flat_map(|k| self.docs_containing(k)).collect();
        let mut scored: Vec<(String, f64)> = hits
            .into_iter()
            .map(|d| {
                let g = self.relevance(topic, &d);
                (d, g)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(self.dates[&b.0].cmp(&self.dates[&a.0]))
                .then(a.0.cmp(&b.0))
        });
        scored
    }
}

/// Cosine magnitude by the textbook formula.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Vectors clustered around a few random centers with per-keyword noise, so
/// pairwise similarities spread across (0, 1).
pub fn clustered_vectors(seed: u64, names: &[String]) -> BTreeMap<String, Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..8)
        .map(|_| {
            (0..DIMENSION)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let noise_levels = [0.02, 0.05, 0.1, 0.3, 0.6, 1.0, 2.0];
    names
        .iter()
        .map(|name| {
            let c = centers.choose(&mut rng).unwrap();
            let eps = *noise_levels.choose(&mut rng).unwrap();
            let sign = if rng.random_bool(0.3) { -1.0 } else { 1.0 };
            let v = c
                .iter()
                .map(|x| sign * (x + eps * rng.random_range(-1.0..1.0)))
                .collect();
            (name.clone(), v)
        })
        .collect()
}

pub fn table_from(vectors: &BTreeMap<String, Vec<f64>>) -> EmbeddingTable {
    let mut table = EmbeddingTable::new();
    for (k, v) in vectors {
        table.insert(k, EmbeddingVector::new(v.clone()).unwrap());
    }
    table
}

/// Brute-force expansion: every keyword with a document outside the seeds
/// whose best seed similarity exceeds `theta`, by idf descending then name.
pub fn brute_force_expand(
    seeds: &[&str],
    theta: f64,
    vectors: &BTreeMap<String, Vec<f64>>,
    doc_freq: &BTreeMap<String, usize>,
    total_docs: usize,
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (b, vb) in vectors {
        if seeds.contains(&b.as_str()) {
            continue;
        }
        let Some(&df) = doc_freq.get(b).filter(|&&df| df > 0) else {
            continue;
        };
        let hit = seeds
            .iter()
            .filter_map(|a| vectors.get(*a))
            .any(|va| abs_cosine(va, vb) > theta);
        if hit {
            out.push((b.clone(), (total_docs as f64 / df as f64).ln()));
        }
    }
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    out
}

/// Largest relative error between the analytic gradient and central
/// differences of the loss over every parameter of `model`.
pub fn gradient_check(model: &mut GloveModel, step: f64) -> f64 {
    let analytic = model.gradient();
    let groups = [
        analytic.word,
        analytic.context,
        analytic.word_bias,
        analytic.context_bias,
    ];
    let mut worst: f64 = 0.0;
    for (g, grads) in groups.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = param(model, g, i);
            *param_mut(model, g, i) = original + step;
            let plus = model.loss();
            *param_mut(model, g, i) = original - step;
            let minus = model.loss();
            *param_mut(model, g, i) = original;
            let numeric = (plus - minus) / (2.0 * step);
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    worst
}

fn param(model: &mut GloveModel, group: usize, i: usize) -> f64 {
    *param_mut(model, group, i)
}

fn param_mut(model: &mut GloveModel, group: usize, i: usize) -> &mut f64 {
    let (w, c, wb, cb) = model.parameters_mut();
    match group {
        0 => &mut w[i],
        1 => &mut c[i],
        2 => &mut wb[i],
        _ => &mut cb[i],
    }
}

/// Random UTF-8 text mixing ASCII words, digits, punctuation, accented and
/// non-Latin letters, case-changing characters, combining marks and emoji.
pub fn random_utf8(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "sql",
        "Inject",
        "PHP",
        "overflow",
        "x",
        "win32",
        "2016",
        "CVE",
        "-",
        " ",
        " ",
        " ",
        ", ",
        ".",
        "\t",
        "\n",
        "é",
        "Ünïcödé",
        "straße",
        "İstanbul",
        "ΣΊΣΥΦΟΣ",
        "中文",
        "漏洞",
        "日本語",
        "🙂",
        "e\u{301}",
        "Ⅻ",
        "ǅ",
        "ﬁle",
        "K",
        "Ω",
        "٣٤",
        "naïve",
        "Cross-Site",
        "x86_64",
        "_",
        "'",
        "\"",
        "a",
        "bb",
    ];
    let n = rng.random_range(0..40);
    let mut s = String::new();
    for _ in 0..n {
        if rng.random_bool(0.1) {
            // Arbitrary scalar values, including unassigned and rare ones.
            let c = loop {
                if let Some(c) = char::from_u32(rng.random_range(0x20..0x2_FFFF)) {
                    break c;
                }
            };
            s.push(c);
        } else {
            s.push_str(PIECES.choose(rng).unwrap());
        }
    }
    s
}

/// Compares every score and the retrieval order against [`RescanOracle`].
pub fn check_retrieval(seed: u64, docs: usize) {
    let corpus = synthetic_corpus(seed, docs, 30);
    let engine = synthetic_engine(&corpus);
    let oracle = RescanOracle::new(&corpus);
    let index = engine.index();

    for doc in oracle.doc_ids() {
        assert_eq!(
            index.token_count(doc).unwrap(),
            oracle.length(doc),
            "n_S of {doc}"
        );
    }
    for k in VOCABULARY {
        assert_eq!(
            index.docs_containing(k),
            oracle.docs_containing(k),
            "docs_containing({k})"
        );
        match oracle.idf(k) {
            Some(d) => assert!((index.idf(k).unwrap() - d).abs() <= 1e-12, "idf({k})"),
            None => assert!(index.idf(k).is_err(), "idf({k}) should be undefined"),
        }
        for doc in oracle.doc_ids() {
            let t = index.term_frequency(k, doc).unwrap();
            assert!((t - oracle.tf(k, doc)).abs() <= 1e-12, "tf({k}, {doc})");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..10 {
        let size = rng.random_range(1..=4);
        let q: Vec<&str> = VOCABULARY
            .choose_multiple(&mut rng, size)
            .copied()
            .collect();
        let topic = Topic::new("t", q.iter().map(|s| s.to_string()));
        let expected = oracle.retrieve(&q);
        let got = topics::retrieve(
            &topic,
            ResultOrder::Relevance,
            usize::MAX,
            index,
            engine.corpus(),
        )
        .unwrap();
        let got_ids: Vec<&str> = got.iter().map(|r| r.doc_id.as_str()).collect();
        let want_ids: Vec<&str> = expected.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(got_ids, want_ids, "ordering for {q:?}");
        for (r, (_, g)) in got.iter().zip(&expected) {
            assert!(
                (r.relevance - g).abs() <= 1e-12,
                "relevance of {} for {q:?}",
                r.doc_id
            );
        }
        for doc in oracle.doc_ids() {
            let g = topics::relevance(&topic, doc, index).unwrap();
            assert!((g - oracle.relevance(&q, doc)).abs() <= 1e-12);
        }
    }
}

pub struct ExpansionFixture {
    pub engine: Engine,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub doc_freq: BTreeMap<String, usize>,
}

/// `keywords` named keywords, about 90% of them used in documents; every one
/// gets a clustered vector.
pub fn expansion_fixture(seed: u64, keywords: usize) -> ExpansionFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..keywords).map(|i| format!("kw{i:04}")).collect();
    let mut engine = Engine::in_memory(EngineConfig::default()).unwrap();
    engine
        .load_dictionary(names.join("\n").as_bytes(), KeywordKind::Domain)
        .unwrap();
    let used: Vec<&String> = names.iter().filter(|_| rng.random_bool(0.9)).collect();
    let mut doc_freq = BTreeMap::new();
    let docs = 60;
    let mut texts = vec![Vec::new(); docs];
    for name in &used {
        let spread = rng.random_range(1..=docs / 2);
        for d in rand::seq::index::sample(&mut rng, docs, spread) {
            texts[d].push(name.as_str());
        }
        doc_freq.insert((*name).clone(), spread);
    }
    for (i, words) in texts.iter().enumerate() {
        engine
            .upsert_document(Document {
                doc_id: format!("d{i:02}"),
                created_date: chrono::NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
                raw_text: if words.is_empty() {
                    "filler".into()
                } else {
                    words.join(" ")
                },
                token_count: 0,
            })
            .unwrap();
    }
    ExpansionFixture {
        engine,
        vectors: clustered_vectors(seed, &names),
        doc_freq,
    }
}

/// Compares `expand` against [`brute_force_expand`] for θ ∈ {0.5, 0.9, 0.99}.
pub fn check_expansion(seed: u64, keywords: usize) {
    let fx = expansion_fixture(seed, keywords);
    let table = table_from(&fx.vectors);
    let total = fx.engine.index().total_documents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let used: Vec<&String> = fx.doc_freq.keys().collect();
    for theta in [0.5, 0.9, 0.99] {
        let mut found = 0;
        for _ in 0..3 {
            let size = rng.random_range(1..=3);
            let seeds: Vec<&str> = used
                .choose_multiple(&mut rng, size)
                .map(|s| s.as_str())
                .collect();
            let topic = Topic::new("t", seeds.iter().map(|s| s.to_string()));
            let got = topics::expand(
                &topic,
                theta,
                usize::MAX,
                fx.engine.index(),
                &table,
                SimilarityMeasure::AbsoluteCosine,
            )
            .unwrap();
            let want = brute_force_expand(&seeds, theta, &fx.vectors, &fx.doc_freq, total);
            let got_names: Vec<&str> = got.candidates.iter().map(|c| c.keyword.as_str()).collect();
            let want_names: Vec<&str> = want.iter().map(|(k, _)| k.as_str()).collect();
            assert_eq!(got_names, want_names, "theta {theta}, seeds {seeds:?}");
            for (c, (_, d)) in got.candidates.iter().zip(&want) {
                assert!((c.score - d).abs() <= 1e-12);
                assert!(c.max_similarity > theta);
            }
            let limited = topics::expand(
                &topic,
                theta,
                5,
                fx.engine.index(),
                &table,
                SimilarityMeasure::AbsoluteCosine,
            )
            .unwrap();
            assert_eq!(
                limited.candidates.as_slice(),
                &got.candidates[..got.candidates.len().min(5)]
            );
            found += got.candidates.len();
        }
        if keywords >= 200 {
            assert!(found > 0, "no candidates at theta {theta}");
        }
    }
}

/// Indexes `docs` random UTF-8 texts and counts tokens or highlight spans
/// whose byte range does not slice back to the token they came from.
pub fn position_failures(seed: u64, docs: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = Engine::in_memory(EngineConfig::default()).unwrap();
    let mut failures = 0;
    for i in 0..docs {
        let raw = random_utf8(&mut rng);
        for t in tokenize(&raw) {
            if raw.get(t.byte_start..t.byte_end) != Some(t.original.as_str()) {
                failures += 1;
            }
        }
        let doc_id = format!("u{i:04}");
        engine
            .upsert_document(Document {
                doc_id: doc_id.clone(),
                created_date: chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
                raw_text: raw.clone(),
                token_count: 0,
            })
            .unwrap();
        let keywords: Vec<String> = engine
            .index()
            .keywords()
            .into_iter()
            .filter(|k| engine.index().occurrences(k, &doc_id) > 0)
            .map(str::to_owned)
            .collect();
        let topic = Topic::new("all", keywords);
        for m in topics::matched_spans(&topic, &doc_id, engine.index()) {
            for s in m.spans {
                let normalized = raw.get(s.byte_start..s.byte_end).and_then(|slice| {
                    text::normalize_keyword(slice, engine.corrections(), engine.dictionary())
                });
                if normalized.as_deref() != Some(m.keyword.as_str()) {
                    failures += 1;
                }
            }
        }
    }
    failures
}
