//! Client side of an external index advisor (typically an LLM service).
//!
//! A prompt is submitted `n` times with no shared state between calls. Each
//! reply is mined for a JSON recommendation array, and every entry is checked
//! against the catalog before it is accepted.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{Catalog, IndexDefinition};
use crate::error::{Error, Result};
use crate::prompt::PromptBundle;

pub const ENV_URL: &str = "ADVISOR_URL";
pub const ENV_KEY: &str = "ADVISOR_KEY";
pub const ENV_FIXTURES: &str = "ADVISOR_FIXTURES";

/// Something that answers a prompt with free text.
pub trait AdvisorService: Send + Sync {
    /// `invocation_id` lets stubs vary their answer per call; real services ignore it.
    fn complete(&self, prompt: &PromptBundle, invocation_id: u32) -> Result<String>;
}

impl<F> AdvisorService for F
where
    F: Fn(&PromptBundle, u32) -> Result<String> + Send + Sync,
{
    fn complete(&self, prompt: &PromptBundle, invocation_id: u32) -> Result<String> {
        self(prompt, invocation_id)
    }
}

#[derive(Serialize)]
struct ServiceRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct ServiceReply {
    text: String,
}

/// `POST {"prompt": ...}` to a URL that answers `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct HttpAdvisor {
    pub url: String,
    pub key: Option<String>,
    pub timeout: Duration,
}

impl HttpAdvisor {
    pub fn new(url: impl Into<String>, key: Option<String>) -> Self {
        HttpAdvisor {
            url: url.into(),
            key,
            timeout: Duration::from_secs(600),
        }
    }
}

impl AdvisorService for HttpAdvisor {
    fn complete(&self, prompt: &PromptBundle, _invocation_id: u32) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut request = agent.post(&self.url);
        if let Some(key) = &self.key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(ServiceRequest {
                prompt: &prompt.text,
            })
            .map_err(|e| Error::Service(format!("{}: {e}", self.url)))?;
        let reply: ServiceReply = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Service(format!("{}: bad reply body: {e}", self.url)))?;
        Ok(reply.text)
    }
}

/// Offline stub answering from files keyed by prompt digest.
///
/// Lookup order: `<digest>.<invocation>.txt`, `<digest>.txt`,
/// `default.<invocation>.txt`, `default.txt`.
#[derive(Debug, Clone)]
pub struct FixtureAdvisor {
    pub dir: PathBuf,
}

impl FixtureAdvisor {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureAdvisor { dir: dir.into() }
    }
}

impl AdvisorService for FixtureAdvisor {
    fn complete(&self, prompt: &PromptBundle, invocation_id: u32) -> Result<String> {
        let digest = prompt.digest();
        let candidates = [
            format!("{digest}.{invocation_id}.txt"),
            format!("{digest}.txt"),
            format!("default.{invocation_id}.txt"),
            "default.txt".to_string(),
        ];
        for name in &candidates {
            let path = self.dir.join(name);
            if path.is_file() {
                return std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source });
            }
        }
        Err(Error::Service(format!(
            "no fixture for prompt {digest} in {}",
            self.dir.display()
        )))
    }
}

/// Service configured by `ADVISOR_FIXTURES` (preferred) or `ADVISOR_URL`/`ADVISOR_KEY`.
pub fn service_from_env() -> Result<Box<dyn AdvisorService>> {
    if let Ok(dir) = std::env::var(ENV_FIXTURES) {
        return Ok(Box::new(FixtureAdvisor::new(dir)));
    }
    match std::env::var(ENV_URL) {
        Ok(url) => Ok(Box::new(HttpAdvisor::new(url, std::env::var(ENV_KEY).ok()))),
        Err(_) => Err(Error::Service(format!(
            "neither {ENV_FIXTURES} nor {ENV_URL} is set"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvocationErrorKind {
    Transport,
    Parse,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationError {
    pub kind: InvocationErrorKind,
    pub message: String,
}

/// A recommendation entry that was rejected, with the reasons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEntry {
    pub entry: Value,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub indexes: Vec<IndexDefinition>,
    pub dropped: Vec<DroppedEntry>,
    /// Prose surrounding the JSON payload, if any.
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorResponse {
    pub invocation_id: u32,
    pub raw_text: String,
    pub parsed: Vec<IndexDefinition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<DroppedEntry>,
    pub rationale: Option<String>,
    #[serde(with = "crate::serde_duration::secs", rename = "latency_s")]
    pub latency: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<InvocationError>,
}

impl AdvisorResponse {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Deserialize)]
struct RawEntry {
    table: String,
    #[serde(default)]
    name: Option<String>,
    key_columns: Vec<String>,
    #[serde(default)]
    included_columns: Vec<String>,
}

/// Recommendation entries from a JSON value, or `None` if it is not shaped like one.
fn entries_of(value: Value) -> Option<Vec<Value>> {
    match value {
        Value::Array(items) if items.iter().all(Value::is_object) => Some(items),
        Value::Object(mut map) => {
            for key in ["indexes", "recommendations"] {
                if let Some(Value::Array(items)) = map.remove(key) {
                    return items.iter().all(Value::is_object).then_some(items);
                }
            }
            map.contains_key("table")
                .then(|| vec![Value::Object(map)])
        }
        _ => None,
    }
}

/// Finds the first complete JSON array or object shaped like a recommendation
/// list, returning its entries and byte span.
fn locate_payload(raw: &str) -> Option<(Vec<Value>, usize, usize)> {
    for (start, ch) in raw.char_indices() {
        if ch != '[' && ch != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            let end = start + stream.byte_offset();
            if let Some(entries) = entries_of(value) {
                return Some((entries, start, end));
            }
        }
    }
    None
}

/// Extracts and validates recommendations from an advisor reply.
pub fn parse_response(raw: &str, catalog: &Catalog) -> Result<ParsedResponse> {
    let (entries, start, end) = locate_payload(raw)
        .ok_or_else(|| Error::parse("advisor response", "no JSON recommendation list found"))?;

    let mut parsed = ParsedResponse::default();
    for entry in entries {
        let raw_entry: RawEntry = match serde_json::from_value(entry.clone()) {
            Ok(e) => e,
            Err(e) => {
                parsed.dropped.push(DroppedEntry {
                    entry,
                    reasons: vec![format!("malformed entry: {e}")],
                });
                continue;
            }
        };
        let mut index = IndexDefinition::new(
            raw_entry.table.as_str(),
            raw_entry.key_columns.iter().map(String::as_str),
            raw_entry.included_columns.iter().map(String::as_str),
        );
        if let Some(name) = raw_entry.name.filter(|n| !n.trim().is_empty()) {
            index.name = name;
        }
        let violations = catalog.validate_index(&index);
        if violations.is_empty() {
            parsed.indexes.push(index);
        } else {
            parsed.dropped.push(DroppedEntry {
                entry,
                reasons: violations.iter().map(ToString::to_string).collect(),
            });
        }
    }

    let prose = format!("{}\n{}", raw[..start].trim(), raw[end..].trim());
    let prose = prose.trim();
    parsed.rationale = (!prose.is_empty()).then(|| prose.to_string());
    Ok(parsed)
}

/// Structural dedup, then reject (never truncate) more than `k` indexes.
pub fn enforce_constraints(
    parsed: &[IndexDefinition],
    k: Option<usize>,
) -> Result<Vec<IndexDefinition>> {
    let mut distinct: Vec<IndexDefinition> = Vec::new();
    for index in parsed {
        if !distinct.iter().any(|d| d.same_structure(index)) {
            distinct.push(index.clone());
        }
    }
    match k {
        Some(k) if distinct.len() > k => Err(Error::ConstraintViolation {
            count: distinct.len(),
            k,
        }),
        _ => Ok(distinct),
    }
}

fn invoke(
    service: &dyn AdvisorService,
    prompt: &PromptBundle,
    invocation_id: u32,
    catalog: &Catalog,
) -> AdvisorResponse {
    let started = Instant::now();
    let reply = service.complete(prompt, invocation_id);
    let latency = started.elapsed();
    let mut response = AdvisorResponse {
        invocation_id,
        raw_text: String::new(),
        parsed: Vec::new(),
        dropped: Vec::new(),
        rationale: None,
        latency,
        error: None,
    };
    let text = match reply {
        Ok(text) => text,
        Err(e) => {
            response.error = Some(InvocationError {
                kind: InvocationErrorKind::Transport,
                message: e.to_string(),
            });
            return response;
        }
    };
    response.raw_text = text;
    match parse_response(&response.raw_text, catalog) {
        Ok(parsed) => {
            response.dropped = parsed.dropped;
            response.rationale = parsed.rationale;
            match enforce_constraints(&parsed.indexes, prompt.k_constraint) {
                Ok(indexes) => response.parsed = indexes,
                Err(e) => {
                    response.parsed = parsed.indexes;
                    response.error = Some(InvocationError {
                        kind: InvocationErrorKind::Constraint,
                        message: e.to_string(),
                    });
                }
            }
        }
        Err(e) => {
            response.error = Some(InvocationError {
                kind: InvocationErrorKind::Parse,
                message: e.to_string(),
            });
        }
    }
    response
}

/// Submits `prompt` `n` times concurrently. Failures are recorded per
/// invocation; responses come back ordered by invocation id (1-based).
pub fn request_recommendations(
    service: &dyn AdvisorService,
    prompt: &PromptBundle,
    n: usize,
    catalog: &Catalog,
) -> Result<Vec<AdvisorResponse>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let ids = 1..=u32::try_from(n).map_err(|_| Error::InvalidParameter("n is too large".into()))?;
    let mut responses: Vec<AdvisorResponse> = std::thread::scope(|scope| {
        let handles: Vec<_> = ids
            .map(|id| scope.spawn(move || invoke(service, prompt, id, catalog)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("advisor invocation panicked"))
            .collect()
    });
    responses.sort_by_key(|r| r.invocation_id);
    Ok(responses)
}
