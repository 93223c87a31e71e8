mod support;

use vulntrack_core::{Granularity, ResultOrder};

#[test]
fn occurrences_sum_to_token_counts() {
    let engine = support::sample_engine();
    assert_eq!(engine.corpus().len(), 200);
    let tokens: usize = engine.corpus().documents().map(|d| d.token_count).sum();
    assert!(tokens > 0);
    let occurrences: usize = engine
        .index()
        .keywords()
        .into_iter()
        .map(|k| engine.index().posting_list(k).unwrap().occurrence_total)
        .sum();
    assert_eq!(occurrences, tokens);
    assert_eq!(engine.index().total_occurrences(), tokens);
}

#[test]
fn trend_totals_equal_retrieval_counts() {
    let mut engine = support::sample_engine();
    let topics: [(&str, &[&str]); 4] = [
        ("sqli", &["sql", "injection", "vulnerability", "php"]),
        ("xss", &["vulnerability", "script", "cross", "site", "xss"]),
        ("overflow", &["overflow", "buffer", "stack", "function"]),
        ("mobile", &["iphone", "android", "whatsapp"]),
    ];
    for (name, keywords) in topics {
        engine.create_topic(name, keywords).unwrap();
        let hits = engine.query(name, ResultOrder::Date, None).unwrap().len();
        assert!(hits > 0, "{name} retrieves nothing");
        for g in [Granularity::Year, Granularity::Month] {
            let series = engine.trend(name, g, None, None).unwrap();
            assert_eq!(series.total(), hits, "{name} {g:?}");
        }
    }
}

#[test]
fn misspelling_is_corrected_in_the_sample() {
    let engine = support::sample_engine();
    assert!(engine
        .corpus()
        .documents()
        .any(|d| d.raw_text.contains("Watsapp")));
    assert_eq!(engine.index().document_frequency("watsapp"), 0);
    assert!(engine.index().document_frequency("whatsapp") > 0);
}

#[test]
fn highlight_spans_slice_back_to_tokens() {
    assert_eq!(support::position_failures(2016, 1000), 0);
}
