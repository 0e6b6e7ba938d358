//! Run configuration: an optional JSON file merged with command-line
//! overrides. Flags win over the file, the file wins over built-in
//! defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blotto_core::ingestion::DedupePolicy;

/// Duplicate-handling choice as it appears on the command line and in the
/// configuration file.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum DedupeChoice {
    /// A resubmission supersedes the participant's earlier one.
    #[default]
    KeepLatest,
    /// The first submission stands; later duplicates are dropped.
    KeepEarliest,
}

impl DedupeChoice {
    pub fn policy(self) -> DedupePolicy {
        match self {
            DedupeChoice::KeepLatest => DedupePolicy::KeepLatest,
            DedupeChoice::KeepEarliest => DedupePolicy::KeepEarliest,
        }
    }
}

/// Settings for the `fetch-llm` subcommand. Everything here can also be
/// given as a flag; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Chat-completions base URL (the transport appends
    /// `/chat/completions`).
    pub endpoint: Option<String>,
    /// Model identifiers to elicit from.
    pub models: Vec<String>,
    /// Valid strategies to collect; defaults to one per model.
    pub pool_size: Option<usize>,
    /// Which tournament's prompt to send (2 or 3).
    pub variant: Option<u8>,
    /// Alternate prompt set: a JSON object with `system`, `user_t2`, and
    /// `user_t3` fields replacing the built-in prompts.
    pub prompt_file: Option<PathBuf>,
    /// Transport attempts per request before giving up on it.
    pub max_attempts: Option<u32>,
    /// Base backoff in milliseconds between transport retries.
    pub backoff_ms: Option<u64>,
    /// Concurrent requests during the planned phase.
    pub concurrency: Option<usize>,
    /// Sampling parameters forwarded verbatim in every request body.
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// Everything a run needs. Serialized into the run manifest, so two runs
/// with the same effective configuration hash identically.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Submissions CSV
    /// (`submission_id,participant_id,tournament,timestamp,agent_type,model,A..I`).
    pub submissions: Option<PathBuf>,
    /// Demographics CSV (`participant_id,age,sex,education,employment,field`).
    pub demographics: Option<PathBuf>,
    /// Restrict processing to one tournament (1, 2, or 3).
    pub tournament: Option<u8>,
    pub dedupe: DedupeChoice,
    /// Seed for the run's stochastic steps (currently the LLM refill
    /// draws).
    pub seed: u64,
    /// Worker threads for the round-robin; `None` uses one per core.
    pub jobs: Option<usize>,
    /// Output directory; defaults to `out`.
    pub out: Option<PathBuf>,
    pub llm: LlmSettings,
}

impl RunConfig {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Global flags shared by every subcommand. Each one overrides the
/// matching configuration field.
#[derive(Debug, clap::Args)]
pub struct Overrides {
    /// JSON configuration file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Submissions CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub submissions: Option<PathBuf>,
    /// Demographics CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub demographics: Option<PathBuf>,
    /// Restrict processing to one tournament (1, 2, or 3).
    #[arg(long, global = true, value_name = "N")]
    pub tournament: Option<u8>,
    /// Seed for stochastic steps.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Worker threads for the round-robin.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// How to handle repeat submissions by the same participant.
    #[arg(long, global = true, value_enum, value_name = "POLICY")]
    pub dedupe: Option<DedupeChoice>,
}

fn load_file(path: &Path) -> Result<RunConfig> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("config: cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("config: {} is not a valid configuration", path.display()))
}

/// Builds the effective configuration from the optional file plus flags.
pub fn resolve(overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => load_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &overrides.submissions {
        cfg.submissions = Some(p.clone());
    }
    if let Some(p) = &overrides.demographics {
        cfg.demographics = Some(p.clone());
    }
    if let Some(n) = overrides.tournament {
        cfg.tournament = Some(n);
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(j) = overrides.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &overrides.out {
        cfg.out = Some(o.clone());
    }
    if let Some(d) = overrides.dedupe {
        cfg.dedupe = d;
    }
    if let Some(n) = cfg.tournament {
        if !(1..=3).contains(&n) {
            bail!("config: tournament must be 1, 2, or 3, got {n}");
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> Overrides {
        Overrides {
            config: None,
            submissions: None,
            demographics: None,
            tournament: None,
            seed: None,
            jobs: None,
            out: None,
            dedupe: None,
        }
    }

    #[test]
    fn defaults_are_sane() {
        let cfg = resolve(&no_overrides()).unwrap();
        assert_eq!(cfg.out_dir(), PathBuf::from("out"));
        assert_eq!(cfg.dedupe, DedupeChoice::KeepLatest);
        assert_eq!(cfg.seed, 0);
        assert!(cfg.submissions.is_none());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("blotto-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.json");
        std::fs::write(
            &path,
            r#"{"submissions": "from-file.csv", "seed": 7, "llm": {"models": ["m/a"]}}"#,
        )
        .unwrap();
        let mut o = no_overrides();
        o.config = Some(path.clone());
        o.seed = Some(11);
        let cfg = resolve(&o).unwrap();
        assert_eq!(cfg.submissions, Some(PathBuf::from("from-file.csv")));
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.llm.models, vec!["m/a".to_string()]);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn bad_tournament_number_is_rejected() {
        let mut o = no_overrides();
        o.tournament = Some(4);
        let err = resolve(&o).unwrap_err().to_string();
        assert!(err.contains("tournament must be 1, 2, or 3"), "{err}");
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = std::env::temp_dir().join(format!("blotto-cfg-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.json");
        std::fs::write(&path, r#"{"submisions": "typo.csv"}"#).unwrap();
        let mut o = no_overrides();
        o.config = Some(path.clone());
        assert!(resolve(&o).is_err());
        std::fs::remove_file(&path).unwrap();
    }
}
