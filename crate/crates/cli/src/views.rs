//! JSON bodies shared by the CLI and the HTTP service. Both frontends print
//! exactly these strings.

use chrono::NaiveDate;
use serde::Serialize;
use vulntrack_core::corpus::parse_date;
use vulntrack_core::{Engine, Error, Granularity, Result, ResultOrder, SpikeConfig};

pub const DEFAULT_TOP: usize = 20;

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)?)
}

pub fn parse_day(text: &str) -> Result<NaiveDate> {
    parse_date(text).ok_or_else(|| Error::InvalidInput(format!("not a date: {text:?}")))
}

pub fn parse_opt_day(text: Option<&str>) -> Result<Option<NaiveDate>> {
    text.map(parse_day).transpose()
}

pub fn stats(engine: &Engine, top: usize) -> Result<String> {
    to_json(&engine.stats(top)?)
}

pub fn topics(engine: &Engine) -> Result<String> {
    to_json(&engine.topics())
}

pub fn topic(engine: &Engine, name: &str) -> Result<String> {
    to_json(engine.topic(name)?)
}

pub fn expand(
    engine: &Engine,
    name: &str,
    theta: Option<f64>,
    limit: Option<usize>,
) -> Result<String> {
    to_json(&engine.expand(name, theta, limit)?.candidates)
}

pub fn results(
    engine: &Engine,
    name: &str,
    order: ResultOrder,
    limit: Option<usize>,
) -> Result<String> {
    to_json(&engine.query(name, order, limit)?)
}

pub fn trend(
    engine: &Engine,
    name: &str,
    granularity: Granularity,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<String> {
    to_json(&engine.trend(name, granularity, from, to)?)
}

pub fn spikes(
    engine: &Engine,
    name: &str,
    granularity: Granularity,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    config: Option<SpikeConfig>,
) -> Result<String> {
    to_json(&engine.spikes(name, granularity, from, to, config)?)
}

pub fn document(engine: &Engine, doc_id: &str, topic: Option<&str>) -> Result<String> {
    to_json(&engine.document_view(doc_id, topic)?)
}
