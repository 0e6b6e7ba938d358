//! LLM strategy elicitation over an OpenAI-style chat endpoint: strict
//! response validation, transport retries with exponential backoff, and
//! seeded replacement sampling to fill a fixed-size pool.
//!
//! Malformed model output is never repaired — reliability in producing an
//! admissible strategy is itself a measured quantity, so a record is either
//! valid exactly as sent or rejected with the reason preserved.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use chrono::{DateTime, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompts::{PromptSet, PromptVariant};
use crate::game::{validate_allocation, Allocation, ValidationError};
use crate::tournament::{AgentType, Submission};

/// Environment variable holding the bearer token for the chat endpoint.
pub const API_KEY_ENV: &str = "BLOTTO_LLM_API_KEY";

// --- time ---

/// Source of submission timestamps, injectable so pool construction can be
/// replayed bit-for-bit.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

/// Wall-clock time.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock frozen at one instant, for reproducible runs and tests.
#[derive(Debug, Clone)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

// --- transport ---

/// One chat call: a model id, the two prompt messages, and pass-through
/// sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// The assistant message content of a successful chat call.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub content: String,
}

/// A failed chat call (network, HTTP status, or malformed provider
/// envelope). Distinct from invalid model *content*, which is a valid
/// transport outcome.
#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct TransportFailure {
    pub message: String,
}

impl TransportFailure {
    pub fn new(message: impl Into<String>) -> Self {
        TransportFailure {
            message: message.into(),
        }
    }
}

/// Anything that can answer a chat request: the HTTP client in production,
/// scripted stubs in tests.
pub trait ChatTransport: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure>;
}

/// Assembles the JSON body of a chat call: model, the system/user message
/// pair, and the sampling parameters merged at the top level.
pub fn build_chat_body(request: &ChatRequest) -> serde_json::Value {
    let mut body = serde_json::Map::new();
    body.insert("model".into(), request.model.clone().into());
    body.insert(
        "messages".into(),
        serde_json::json!([
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ]),
    );
    for (k, v) in &request.params {
        body.insert(k.clone(), v.clone());
    }
    serde_json::Value::Object(body)
}

#[derive(Debug, Deserialize)]
struct ProviderResponse {
    choices: Vec<ProviderChoice>,
}

#[derive(Debug, Deserialize)]
struct ProviderChoice {
    message: ProviderMessage,
}

#[derive(Debug, Deserialize)]
struct ProviderMessage {
    content: String,
}

/// Blocking HTTP transport posting to `<base>/chat/completions`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    /// Reads the API key from [`API_KEY_ENV`] if present.
    pub fn new(base_url: impl Into<String>) -> Self {
        let api_key = std::env::var(API_KEY_ENV).ok();
        Self::with_api_key(base_url, api_key)
    }

    pub fn with_api_key(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        HttpTransport {
            client: reqwest::blocking::Client::new(),
            base_url: base_url.into(),
            api_key,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, TransportFailure> {
        let url = format!(
            "{}/chat/completions",
            self.base_url.trim_end_matches('/')
        );
        let mut call = self.client.post(&url).json(&build_chat_body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| TransportFailure::new(format!("request to {url} failed: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(TransportFailure::new(format!(
                "{url} returned {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        let envelope: ProviderResponse = response
            .json()
            .map_err(|e| TransportFailure::new(format!("malformed provider envelope: {e}")))?;
        let content = envelope
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportFailure::new("provider returned no choices"))?;
        Ok(ChatResponse { content })
    }
}

// --- strict content validation ---

/// Why a model's reply was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvalidReason {
    /// Content is not exactly one JSON object of the required shape.
    SchemaViolation { detail: String },
    /// The declared total disagrees with the sum of the entries.
    TotalMismatch { declared: i64, computed: i64 },
    /// Entries are well-formed but spend more than the budget.
    BudgetExceeded { total: i64 },
    /// An entry is negative or above the per-state cap.
    InvalidEntry { state: char, value: i64 },
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::SchemaViolation { detail } => write!(f, "schema violation: {detail}"),
            InvalidReason::TotalMismatch { declared, computed } => {
                write!(f, "declared total {declared} but entries sum to {computed}")
            }
            InvalidReason::BudgetExceeded { total } => write!(f, "budget exceeded: {total}"),
            InvalidReason::InvalidEntry { state, value } => {
                write!(f, "invalid entry for state {state}: {value}")
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireStrategy {
    #[serde(rename = "A")]
    a: i64,
    #[serde(rename = "B")]
    b: i64,
    #[serde(rename = "C")]
    c: i64,
    #[serde(rename = "D")]
    d: i64,
    #[serde(rename = "E")]
    e: i64,
    #[serde(rename = "F")]
    f: i64,
    #[serde(rename = "G")]
    g: i64,
    #[serde(rename = "H")]
    h: i64,
    #[serde(rename = "I")]
    i: i64,
    total: i64,
    explanation: String,
}

/// A reply that passed every check.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedStrategy {
    pub allocation: Allocation,
    pub explanation: String,
}

/// Validates reply content strictly: surrounding whitespace is tolerated,
/// anything else — fences, prose, extra or missing keys, non-integer
/// values — rejects, as do a lying `total` field and out-of-range entries.
pub fn parse_strategy_response(raw: &str) -> Result<ParsedStrategy, InvalidReason> {
    let wire: WireStrategy = serde_json::from_str(raw.trim()).map_err(|e| {
        InvalidReason::SchemaViolation {
            detail: e.to_string(),
        }
    })?;
    let entries = [
        wire.a, wire.b, wire.c, wire.d, wire.e, wire.f, wire.g, wire.h, wire.i,
    ];
    let computed: i64 = entries.iter().sum();
    if computed != wire.total {
        return Err(InvalidReason::TotalMismatch {
            declared: wire.total,
            computed,
        });
    }
    let allocation = validate_allocation(&entries).map_err(|e| match e {
        ValidationError::BudgetExceeded { total } => InvalidReason::BudgetExceeded { total },
        ValidationError::NegativeEntry { state, value }
        | ValidationError::EntryAbove100 { state, value } => InvalidReason::InvalidEntry {
            state: state.letter(),
            value,
        },
        ValidationError::WrongArity { .. } => unreachable!("wire schema fixes the arity"),
    })?;
    Ok(ParsedStrategy {
        allocation,
        explanation: wire.explanation,
    })
}

// --- elicitation ---

/// Parameters of one strategy request.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequestSpec {
    pub model: String,
    pub variant: PromptVariant,
    /// Sampling parameters passed through to the provider verbatim (the
    /// provider's defaults apply when empty).
    pub params: serde_json::Map<String, serde_json::Value>,
    /// Transport attempts before giving up on the request.
    pub max_attempts: u32,
    /// First retry delay; doubles per attempt. Zero disables sleeping.
    pub backoff_base_ms: u64,
}

impl LlmRequestSpec {
    pub fn new(model: impl Into<String>, variant: PromptVariant) -> Self {
        LlmRequestSpec {
            model: model.into(),
            variant,
            params: serde_json::Map::new(),
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

/// Outcome of one strategy request, valid or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmStrategyRecord {
    pub submission_id: String,
    pub model: String,
    pub variant: PromptVariant,
    pub timestamp: DateTime<Utc>,
    /// Present exactly when `valid`.
    pub allocation: Option<Allocation>,
    /// Present whenever the wire schema parsed, even if a later check
    /// failed.
    pub explanation: Option<String>,
    pub raw_response: String,
    /// Transport attempt that produced the content.
    pub attempt: u32,
    pub valid: bool,
    pub invalid_reason: Option<InvalidReason>,
}

impl LlmStrategyRecord {
    /// Converts a valid record into a tournament submission. Each instance
    /// is its own participant.
    pub fn to_submission(&self) -> Option<Submission> {
        let allocation = self.allocation?;
        Some(Submission {
            submission_id: self.submission_id.clone(),
            participant_id: self.submission_id.clone(),
            tournament: self.variant.tournament(),
            agent_type: AgentType::Llm,
            model: Some(self.model.clone()),
            timestamp: self.timestamp,
            allocation,
        })
    }
}

/// One line of the elicitation audit log (JSON-lines on disk): one record
/// per transport attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub submission_id: String,
    pub model: String,
    pub attempt: u32,
    pub latency_ms: u64,
    pub valid: bool,
    pub invalid_reason: Option<String>,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failed for model {model} after {attempts} attempts: {last_error}")]
    Transport {
        model: String,
        attempts: u32,
        last_error: String,
    },
}

/// Requests one strategy, retrying transport failures with exponential
/// backoff. Invalid *content* is not retried here — it is a final outcome,
/// recorded as such; replacement is the pool builder's job.
pub fn request_llm_strategy(
    transport: &dyn ChatTransport,
    clock: &dyn Clock,
    prompts: &PromptSet,
    spec: &LlmRequestSpec,
    submission_id: &str,
) -> (Result<LlmStrategyRecord, LlmError>, Vec<AuditRecord>) {
    let request = ChatRequest {
        model: spec.model.clone(),
        system: prompts.system.clone(),
        user: prompts.user_prompt(spec.variant).to_string(),
        params: spec.params.clone(),
    };

    let mut audit = Vec::new();
    let mut last_error = String::new();
    for attempt in 1..=spec.max_attempts.max(1) {
        let started = Instant::now();
        let outcome = transport.chat(&request);
        let latency_ms = started.elapsed().as_millis() as u64;
        match outcome {
            Ok(response) => {
                let parsed = parse_strategy_response(&response.content);
                let (valid, allocation, explanation, invalid_reason) = match parsed {
                    Ok(p) => (true, Some(p.allocation), Some(p.explanation), None),
                    Err(reason) => (false, None, None, Some(reason)),
                };
                audit.push(AuditRecord {
                    submission_id: submission_id.to_string(),
                    model: spec.model.clone(),
                    attempt,
                    latency_ms,
                    valid,
                    invalid_reason: invalid_reason.as_ref().map(|r| r.to_string()),
                });
                let record = LlmStrategyRecord {
                    submission_id: submission_id.to_string(),
                    model: spec.model.clone(),
                    variant: spec.variant,
                    timestamp: clock.now(),
                    allocation,
                    explanation,
                    raw_response: response.content,
                    attempt,
                    valid,
                    invalid_reason,
                };
                return (Ok(record), audit);
            }
            Err(failure) => {
                audit.push(AuditRecord {
                    submission_id: submission_id.to_string(),
                    model: spec.model.clone(),
                    attempt,
                    latency_ms,
                    valid: false,
                    invalid_reason: Some(format!("transport: {failure}")),
                });
                last_error = failure.message;
                if attempt < spec.max_attempts {
                    let delay = spec.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                    if delay > 0 {
                        std::thread::sleep(std::time::Duration::from_millis(delay.min(60_000)));
                    }
                }
            }
        }
    }
    (
        Err(LlmError::Transport {
            model: spec.model.clone(),
            attempts: spec.max_attempts.max(1),
            last_error,
        }),
        audit,
    )
}

// --- pool construction ---

/// Configuration of a full elicitation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub models: Vec<String>,
    pub target_size: usize,
    pub variant: PromptVariant,
    /// Seeds the replacement-model draws.
    pub seed: u64,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    /// Upper bound on in-flight requests during the planned phase.
    pub concurrency: usize,
    /// Replacement requests allowed after the planned phase.
    pub refill_budget: usize,
}

impl PoolConfig {
    pub fn new(models: Vec<String>, target_size: usize, variant: PromptVariant) -> Self {
        PoolConfig {
            models,
            target_size,
            variant,
            seed: 0,
            params: serde_json::Map::new(),
            max_attempts: 3,
            backoff_base_ms: 500,
            concurrency: 4,
            refill_budget: 4 * target_size,
        }
    }

    fn request_spec(&self, model: &str) -> LlmRequestSpec {
        LlmRequestSpec {
            model: model.to_string(),
            variant: self.variant,
            params: self.params.clone(),
            max_attempts: self.max_attempts,
            backoff_base_ms: self.backoff_base_ms,
        }
    }
}

/// The pool (valid records only, ordered by model id then instance index)
/// and the complete per-attempt audit trail, including rejected and
/// transport-failed requests.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutcome {
    pub records: Vec<LlmStrategyRecord>,
    pub audit: Vec<AuditRecord>,
}

impl PoolOutcome {
    pub fn to_submissions(&self) -> Vec<Submission> {
        self.records
            .iter()
            .filter_map(LlmStrategyRecord::to_submission)
            .collect()
    }

    /// Valid instances per model, the raw material of the model
    /// leaderboard's instance counts.
    pub fn instances_per_model(&self) -> BTreeMap<String, u32> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.model.clone()).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("pool shortfall: {got} valid strategies of {target} after exhausting the refill budget")]
    Shortfall {
        got: usize,
        target: usize,
        /// Whatever was collected; callers may keep or discard it.
        outcome: PoolOutcome,
    },
    #[error("pool needs at least one model and a positive target size")]
    EmptyPlan,
}

/// Balanced request plan: ⌈target/m⌉ instances per model, trimmed one
/// instance at a time from the last model backwards until the total equals
/// the target.
fn planned_counts(num_models: usize, target: usize) -> Vec<usize> {
    let per_model = target.div_ceil(num_models);
    let mut counts = vec![per_model; num_models];
    let mut excess = per_model * num_models - target;
    for c in counts.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        *c -= 1;
        excess -= 1;
    }
    counts
}

fn instance_id(model: &str, index: usize) -> String {
    format!("{model}#{index}")
}

/// Elicits a pool of `target_size` valid strategies.
///
/// The planned phase requests the balanced per-model counts (with bounded
/// concurrency); invalid and transport-failed requests are then replaced
/// one at a time by models drawn uniformly with the configured seed, until
/// the pool is full or the refill budget runs out, which returns the
/// partial pool inside [`PoolError::Shortfall`]. With a deterministic
/// transport and clock the outcome is bit-reproducible.
pub fn build_llm_pool(
    transport: &dyn ChatTransport,
    clock: &dyn Clock,
    prompts: &PromptSet,
    config: &PoolConfig,
) -> Result<PoolOutcome, PoolError> {
    if config.models.is_empty() || config.target_size == 0 {
        return Err(PoolError::EmptyPlan);
    }
    let counts = planned_counts(config.models.len(), config.target_size);
    let jobs: Vec<(usize, usize)> = config
        .models
        .iter()
        .enumerate()
        .flat_map(|(m, _)| (0..counts[m]).map(move |i| (m, i)))
        .collect();

    struct JobResult {
        record: Option<LlmStrategyRecord>,
        audit: Vec<AuditRecord>,
    }

    let results: Vec<Option<JobResult>> = {
        let queue = Mutex::new(jobs.iter().copied().enumerate().collect::<Vec<_>>());
        let slots: Vec<Mutex<Option<JobResult>>> =
            (0..jobs.len()).map(|_| Mutex::new(None)).collect();
        let workers = config.concurrency.clamp(1, jobs.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let job = queue.lock().expect("queue lock").pop();
                    let Some((slot, (m, i))) = job else { break };
                    let model = &config.models[m];
                    let (result, audit) = request_llm_strategy(
                        transport,
                        clock,
                        prompts,
                        &config.request_spec(model),
                        &instance_id(model, i),
                    );
                    *slots[slot].lock().expect("slot lock") = Some(JobResult {
                        record: result.ok(),
                        audit,
                    });
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock"))
            .collect()
    };

    let mut audit = Vec::new();
    let mut valid: Vec<LlmStrategyRecord> = Vec::with_capacity(config.target_size);
    let mut next_instance: BTreeMap<usize, usize> =
        (0..config.models.len()).map(|m| (m, 0)).collect();
    for (m, i) in &jobs {
        next_instance.insert(*m, next_instance[m].max(i + 1));
    }
    for result in results.into_iter().flatten() {
        audit.extend(result.audit);
        if let Some(record) = result.record {
            if record.valid {
                valid.push(record);
            }
        }
    }

    // Replacement phase: draw models uniformly at random until the pool is
    // full or the budget is gone.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut refills_left = config.refill_budget;
    while valid.len() < config.target_size && refills_left > 0 {
        refills_left -= 1;
        let m = rng.random_range(0..config.models.len());
        let model = &config.models[m];
        let index = next_instance[&m];
        next_instance.insert(m, index + 1);
        let (result, attempt_audit) = request_llm_strategy(
            transport,
            clock,
            prompts,
            &config.request_spec(model),
            &instance_id(model, index),
        );
        audit.extend(attempt_audit);
        if let Ok(record) = result {
            if record.valid {
                valid.push(record);
            }
        }
    }

    valid.sort_by(|a, b| {
        a.model
            .cmp(&b.model)
            .then_with(|| a.submission_id.cmp(&b.submission_id))
    });
    audit.sort_by(|a, b| {
        a.model
            .cmp(&b.model)
            .then_with(|| a.submission_id.cmp(&b.submission_id))
            .then_with(|| a.attempt.cmp(&b.attempt))
    });
    let outcome = PoolOutcome {
        records: valid,
        audit,
    };
    if outcome.records.len() < config.target_size {
        let got = outcome.records.len();
        return Err(PoolError::Shortfall {
            got,
            target: config.target_size,
            outcome,
        });
    }
    Ok(outcome)
}

/// Serializes audit records as JSON-lines.
pub fn write_audit_jsonl<W: std::io::Write>(
    records: &[AuditRecord],
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
