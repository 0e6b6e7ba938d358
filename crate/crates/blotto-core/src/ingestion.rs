//! Submission and survey ingestion: CSV parsing, validation, exclusion
//! logging, deduplication, and categorical recoding of demographics.
//!
//! Row-level problems never abort a parse; each bad row becomes exactly one
//! [`ExclusionRecord`], so `input rows == kept + excluded` always holds.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{validate_allocation, ValidationError, NUM_STATES};
use crate::tournament::{AgentType, Submission, Tournament};

/// Column count of the submissions CSV:
/// `submission_id,participant_id,tournament,timestamp,agent_type,model,A..I`.
const SUBMISSION_FIELDS: usize = 6 + NUM_STATES;

#[derive(Debug, Error)]
pub enum IngestionError {
    #[error("unreadable input: {0}")]
    UnreadableInput(String),
    #[error("unknown {field} category {value:?}")]
    UnknownCategory { field: &'static str, value: String },
    #[error("negative age {0}")]
    NegativeAge(i64),
}

/// Why a raw row was excluded from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    BudgetExceeded,
    NegativeEntry,
    EntryAbove100,
    WrongArity,
    Duplicate,
    MalformedRow,
}

impl ExclusionReason {
    pub fn label(self) -> &'static str {
        match self {
            ExclusionReason::BudgetExceeded => "budget_exceeded",
            ExclusionReason::NegativeEntry => "negative_entry",
            ExclusionReason::EntryAbove100 => "entry_above_100",
            ExclusionReason::WrongArity => "wrong_arity",
            ExclusionReason::Duplicate => "duplicate",
            ExclusionReason::MalformedRow => "malformed_row",
        }
    }
}

impl From<&ValidationError> for ExclusionReason {
    fn from(e: &ValidationError) -> Self {
        match e {
            ValidationError::BudgetExceeded { .. } => ExclusionReason::BudgetExceeded,
            ValidationError::NegativeEntry { .. } => ExclusionReason::NegativeEntry,
            ValidationError::EntryAbove100 { .. } => ExclusionReason::EntryAbove100,
            ValidationError::WrongArity { .. } => ExclusionReason::WrongArity,
        }
    }
}

/// Audit record for one excluded row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionRecord {
    pub submission_id: String,
    pub reason: ExclusionReason,
    pub detail: String,
}

/// Result of parsing a submissions file: every input row lands in exactly
/// one of the two lists, in input order.
#[derive(Debug, Default)]
pub struct ParsedSubmissions {
    pub submissions: Vec<Submission>,
    pub exclusions: Vec<ExclusionRecord>,
}

fn row_id(record: &csv::StringRecord, row_number: usize) -> String {
    match record.get(0) {
        Some(id) if !id.trim().is_empty() => id.trim().to_string(),
        _ => format!("row{row_number}"),
    }
}

/// Parses the submissions CSV. Malformed rows are logged and skipped; only
/// an unreadable file (bad header, broken encoding) is an error.
pub fn parse_submissions(bytes: &[u8]) -> Result<ParsedSubmissions, IngestionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| IngestionError::UnreadableInput(e.to_string()))?
        .clone();
    let expected_header: Vec<&str> = vec![
        "submission_id",
        "participant_id",
        "tournament",
        "timestamp",
        "agent_type",
        "model",
        "A",
        "B",
        "C",
        "D",
        "E",
        "F",
        "G",
        "H",
        "I",
    ];
    if headers.iter().collect::<Vec<_>>() != expected_header {
        return Err(IngestionError::UnreadableInput(format!(
            "unexpected header {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }

    let mut out = ParsedSubmissions::default();
    for (row_number, record) in reader.records().enumerate() {
        let row_number = row_number + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.exclusions.push(ExclusionRecord {
                    submission_id: format!("row{row_number}"),
                    reason: ExclusionReason::MalformedRow,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let id = row_id(&record, row_number);
        match parse_submission_row(&record) {
            Ok(sub) => out.submissions.push(sub),
            Err((reason, detail)) => out.exclusions.push(ExclusionRecord {
                submission_id: id,
                reason,
                detail,
            }),
        }
    }
    Ok(out)
}

fn parse_submission_row(record: &csv::StringRecord) -> Result<Submission, (ExclusionReason, String)> {
    if record.len() != SUBMISSION_FIELDS {
        return Err((
            ExclusionReason::WrongArity,
            format!(
                "expected {SUBMISSION_FIELDS} fields ({} trip columns), found {}",
                NUM_STATES,
                record.len()
            ),
        ));
    }
    let field = |i: usize| record.get(i).unwrap_or("").trim();

    let submission_id = field(0).to_string();
    let participant_id = field(1).to_string();
    if submission_id.is_empty() || participant_id.is_empty() {
        return Err((
            ExclusionReason::MalformedRow,
            "empty submission_id or participant_id".to_string(),
        ));
    }

    let tournament = field(2)
        .parse::<u8>()
        .ok()
        .and_then(Tournament::from_number)
        .ok_or_else(|| {
            (
                ExclusionReason::MalformedRow,
                format!("tournament must be 1, 2 or 3, got {:?}", field(2)),
            )
        })?;

    let timestamp = DateTime::parse_from_rfc3339(field(3))
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| {
            (
                ExclusionReason::MalformedRow,
                format!("bad timestamp {:?}: {e}", field(3)),
            )
        })?;

    let agent_type = match field(4) {
        "human" => AgentType::Human,
        "llm" => AgentType::Llm,
        other => {
            return Err((
                ExclusionReason::MalformedRow,
                format!("agent_type must be human or llm, got {other:?}"),
            ))
        }
    };

    let model = match (agent_type, field(5)) {
        (AgentType::Human, "") => None,
        (AgentType::Human, m) => {
            return Err((
                ExclusionReason::MalformedRow,
                format!("human submission carries a model {m:?}"),
            ))
        }
        (AgentType::Llm, "") => {
            return Err((
                ExclusionReason::MalformedRow,
                "llm submission missing model".to_string(),
            ))
        }
        (AgentType::Llm, m) => Some(m.to_string()),
    };

    let mut raw = [0i64; NUM_STATES];
    for (i, slot) in raw.iter_mut().enumerate() {
        *slot = field(6 + i).parse::<i64>().map_err(|_| {
            (
                ExclusionReason::MalformedRow,
                format!("trip count for state {} is not an integer: {:?}", (b'A' + i as u8) as char, field(6 + i)),
            )
        })?;
    }
    let allocation = validate_allocation(&raw)
        .map_err(|e| (ExclusionReason::from(&e), e.to_string()))?;

    Ok(Submission {
        submission_id,
        participant_id,
        tournament,
        agent_type,
        model,
        timestamp,
        allocation,
    })
}

/// Which of a participant's multiple submissions to one tournament survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupePolicy {
    /// A resubmission supersedes the earlier one.
    #[default]
    KeepLatest,
    KeepEarliest,
}

/// Removes duplicates and logs each dropped row.
///
/// Two rules apply, in order: a repeated `submission_id` is dropped (first
/// occurrence wins), and a human participant keeps at most one submission
/// per tournament, resolved by `policy`. LLM instances are intentionally
/// repeated per model, so they are only subject to the id rule. Identical
/// allocations from distinct participants are all kept.
pub fn dedupe_submissions(
    subs: Vec<Submission>,
    policy: DedupePolicy,
) -> (Vec<Submission>, Vec<ExclusionRecord>) {
    let mut exclusions = Vec::new();

    let mut seen_ids: BTreeMap<String, ()> = BTreeMap::new();
    let mut unique: Vec<Submission> = Vec::with_capacity(subs.len());
    for sub in subs {
        if seen_ids.insert(sub.submission_id.clone(), ()).is_some() {
            exclusions.push(ExclusionRecord {
                submission_id: sub.submission_id.clone(),
                reason: ExclusionReason::Duplicate,
                detail: "repeated submission_id".to_string(),
            });
        } else {
            unique.push(sub);
        }
    }

    // Winner per (participant, tournament) among human submissions.
    let mut winner: BTreeMap<(String, Tournament), usize> = BTreeMap::new();
    for (idx, sub) in unique.iter().enumerate() {
        if sub.agent_type != AgentType::Human {
            continue;
        }
        let key = (sub.participant_id.clone(), sub.tournament);
        match winner.get(&key) {
            None => {
                winner.insert(key, idx);
            }
            Some(&best) => {
                let keep_new = match policy {
                    DedupePolicy::KeepLatest => sub.timestamp >= unique[best].timestamp,
                    DedupePolicy::KeepEarliest => sub.timestamp < unique[best].timestamp,
                };
                if keep_new {
                    winner.insert(key, idx);
                }
            }
        }
    }

    let mut kept = Vec::with_capacity(unique.len());
    for (idx, sub) in unique.into_iter().enumerate() {
        let is_winner = match sub.agent_type {
            AgentType::Human => {
                winner.get(&(sub.participant_id.clone(), sub.tournament)) == Some(&idx)
            }
            AgentType::Llm => true,
        };
        if is_winner {
            kept.push(sub);
        } else {
            exclusions.push(ExclusionRecord {
                submission_id: sub.submission_id.clone(),
                reason: ExclusionReason::Duplicate,
                detail: format!(
                    "participant {} resubmitted to tournament {}",
                    sub.participant_id, sub.tournament
                ),
            });
        }
    }
    (kept, exclusions)
}

// --- demographics ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Education {
    Secondary,
    Higher,
    Doctoral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Employment {
    NotWorking,
    Student,
    Working,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldOfStudy {
    EconManagement,
    Stem,
    HumSocOther,
}

/// A survey row as it appears in the demographics CSV, untouched.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RawDemographicsRow {
    pub participant_id: String,
    pub age: i64,
    pub sex: String,
    pub education: String,
    pub employment: String,
    pub field: String,
}

/// A recoded survey row; raw strings are kept alongside the aggregates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Demographics {
    pub participant_id: String,
    pub age: u32,
    pub sex: Sex,
    pub education_raw: String,
    pub education: Education,
    pub employment_raw: String,
    pub employment: Employment,
    pub field_raw: String,
    pub field: FieldOfStudy,
}

fn recode_sex(raw: &str) -> Result<Sex, IngestionError> {
    match raw {
        "Male" => Ok(Sex::Male),
        "Female" => Ok(Sex::Female),
        _ => Err(IngestionError::UnknownCategory {
            field: "sex",
            value: raw.to_string(),
        }),
    }
}

fn recode_education(raw: &str) -> Result<Education, IngestionError> {
    match raw {
        "Incomplete secondary" | "Secondary" => Ok(Education::Secondary),
        "Incomplete higher" | "Higher" => Ok(Education::Higher),
        "Doctoral degree" | "Doctoral" => Ok(Education::Doctoral),
        _ => Err(IngestionError::UnknownCategory {
            field: "education",
            value: raw.to_string(),
        }),
    }
}

fn recode_employment(raw: &str) -> Result<Employment, IngestionError> {
    match raw {
        "Studying (school student, university student, PhD student)" | "Student" => {
            Ok(Employment::Student)
        }
        "Employed (in an organization)"
        | "Self-employed / freelancer"
        | "Entrepreneur / business owner"
        | "Working" => Ok(Employment::Working),
        "Temporarily not working (job search, parental leave, etc.)"
        | "Retired"
        | "Other"
        | "Not working"
        | "NotWorking" => Ok(Employment::NotWorking),
        _ => Err(IngestionError::UnknownCategory {
            field: "employment",
            value: raw.to_string(),
        }),
    }
}

fn recode_field(raw: &str) -> Result<FieldOfStudy, IngestionError> {
    match raw {
        "Mathematics"
        | "Computer science and technical sciences"
        | "Natural sciences (physics, chemistry, biology, etc.)"
        | "STEM" => Ok(FieldOfStudy::Stem),
        "Economics, business and management" | "Economics and Management" => {
            Ok(FieldOfStudy::EconManagement)
        }
        "Humanities and arts"
        | "Social sciences (sociology, psychology, political science, etc.)"
        | "Other"
        | "Humanities, Social Sciences, and other" => Ok(FieldOfStudy::HumSocOther),
        _ => Err(IngestionError::UnknownCategory {
            field: "field",
            value: raw.to_string(),
        }),
    }
}

/// Observed age range of the sample; ages outside it are flagged, not
/// excluded.
pub const EXPECTED_AGE_RANGE: std::ops::RangeInclusive<u32> = 10..=61;

/// Recodes one survey row into the aggregate categories. Unknown category
/// strings are an error naming the offending value; recoding accepts its
/// own output, so it is idempotent.
pub fn recode_demographics(raw: &RawDemographicsRow) -> Result<Demographics, IngestionError> {
    if raw.age < 0 {
        return Err(IngestionError::NegativeAge(raw.age));
    }
    let age = raw.age as u32;
    if !EXPECTED_AGE_RANGE.contains(&age) {
        log::warn!(
            "participant {}: age {} outside the expected range {:?}",
            raw.participant_id,
            age,
            EXPECTED_AGE_RANGE
        );
    }
    Ok(Demographics {
        participant_id: raw.participant_id.clone(),
        age,
        sex: recode_sex(raw.sex.trim())?,
        education_raw: raw.education.trim().to_string(),
        education: recode_education(raw.education.trim())?,
        employment_raw: raw.employment.trim().to_string(),
        employment: recode_employment(raw.employment.trim())?,
        field_raw: raw.field.trim().to_string(),
        field: recode_field(raw.field.trim())?,
    })
}

/// Result of parsing a demographics file.
#[derive(Debug, Default)]
pub struct ParsedDemographics {
    pub rows: Vec<Demographics>,
    pub exclusions: Vec<ExclusionRecord>,
}

/// Parses the demographics CSV
/// (`participant_id,age,sex,education,employment,field`). Bad rows are
/// logged as `MalformedRow` and skipped.
pub fn parse_demographics(bytes: &[u8]) -> Result<ParsedDemographics, IngestionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let mut out = ParsedDemographics::default();
    for (row_number, record) in reader.deserialize::<RawDemographicsRow>().enumerate() {
        let row_number = row_number + 1;
        match record {
            Ok(raw) => match recode_demographics(&raw) {
                Ok(d) => out.rows.push(d),
                Err(e) => out.exclusions.push(ExclusionRecord {
                    submission_id: raw.participant_id.clone(),
                    reason: ExclusionReason::MalformedRow,
                    detail: e.to_string(),
                }),
            },
            Err(e) => out.exclusions.push(ExclusionRecord {
                submission_id: format!("row{row_number}"),
                reason: ExclusionReason::MalformedRow,
                detail: e.to_string(),
            }),
        }
    }
    Ok(out)
}
