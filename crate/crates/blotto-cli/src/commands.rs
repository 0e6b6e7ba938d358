//! Subcommand implementations. Every command loads its inputs, writes its
//! artifacts under the output directory, drops a `run_manifest.json`, and
//! maps its result onto the exit-code contract: 0 for success, 1 when the
//! work finished but found validation failures, 2 (via `Err`) for fatal
//! problems.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::Ratio;

use blotto_core::agents::llm::{
    build_llm_pool, write_audit_jsonl, HttpTransport, PoolConfig, PoolError, PoolOutcome,
    SystemClock,
};
use blotto_core::agents::prompts::{PromptSet, PromptVariant};
use blotto_core::analysis::best_response::best_response_expected_states;
use blotto_core::analysis::regression::{
    build_regression_records, fit_performance_regression, HcType, UnclassifiedPolicy,
};
use blotto_core::analysis::{
    level_distribution_table, mean_states_per_duel, model_leaderboard, survival_curve,
    unit_digit_distribution, PointsBasis,
};
use blotto_core::ingestion::{
    dedupe_submissions, parse_demographics, parse_submissions, Demographics, ExclusionRecord,
};
use blotto_core::replay::{
    discover_dataset_dir, load_dataset, replay as replay_dataset, ReplayCheck, DATASET_DIR_ENV,
    DEMOGRAPHICS_FILE, SUBMISSIONS_FILE,
};
use blotto_core::report;
use blotto_core::{
    aggregate_leaderboard, compute_standings, AgentType, Allocation, Submission, Tournament,
};

use crate::config::RunConfig;
use crate::manifest::write_manifest;

const VALIDATION_FAILURE: u8 = 1;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("output: cannot create {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("output: cannot write {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

fn read_input(path: &Path, label: &str) -> Result<Vec<u8>> {
    if !path.exists() {
        bail!("input: {label} file not found: {}", path.display());
    }
    fs::read(path).with_context(|| format!("input: cannot read {label} file {}", path.display()))
}

/// Parsed, deduplicated, tournament-filtered inputs plus everything that
/// was excluded on the way.
struct LoadedInputs {
    submissions: Vec<Submission>,
    exclusions: Vec<ExclusionRecord>,
    demographics: BTreeMap<String, Demographics>,
    demographic_exclusions: Vec<ExclusionRecord>,
    input_paths: Vec<PathBuf>,
}

fn load_inputs(cfg: &RunConfig) -> Result<LoadedInputs> {
    let subs_path = cfg
        .submissions
        .as_ref()
        .context("config: no submissions file given (use --submissions or the config file)")?;
    let bytes = read_input(subs_path, "submissions")?;
    let parsed = parse_submissions(&bytes)
        .map_err(|e| anyhow!("input: {}: {e}", subs_path.display()))?;
    let (mut submissions, dedupe_exclusions) =
        dedupe_submissions(parsed.submissions, cfg.dedupe.policy());
    let mut exclusions = parsed.exclusions;
    exclusions.extend(dedupe_exclusions);
    if let Some(n) = cfg.tournament {
        let t = Tournament::from_number(n).expect("validated in config::resolve");
        submissions.retain(|s| s.tournament == t);
    }

    let mut loaded = LoadedInputs {
        submissions,
        exclusions,
        demographics: BTreeMap::new(),
        demographic_exclusions: Vec::new(),
        input_paths: vec![subs_path.clone()],
    };
    if let Some(demo_path) = &cfg.demographics {
        let bytes = read_input(demo_path, "demographics")?;
        let parsed = parse_demographics(&bytes)
            .map_err(|e| anyhow!("input: {}: {e}", demo_path.display()))?;
        loaded.demographics = parsed
            .rows
            .into_iter()
            .map(|d| (d.participant_id.clone(), d))
            .collect();
        loaded.demographic_exclusions = parsed.exclusions;
        loaded.input_paths.push(demo_path.clone());
    }
    Ok(loaded)
}

fn tournaments_present(subs: &[Submission]) -> Vec<Tournament> {
    Tournament::ALL
        .into_iter()
        .filter(|t| subs.iter().any(|s| s.tournament == *t))
        .collect()
}

fn pool_of(subs: &[Submission], t: Tournament) -> Vec<Submission> {
    subs.iter().filter(|s| s.tournament == t).cloned().collect()
}

fn write_exclusion_logs(out: &Path, inputs: &LoadedInputs, with_demographics: bool) -> Result<()> {
    write_text(
        &out.join("exclusions.csv"),
        &report::exclusions_csv(&inputs.exclusions),
    )?;
    if with_demographics {
        write_text(
            &out.join("demographics_exclusions.csv"),
            &report::exclusions_csv(&inputs.demographic_exclusions),
        )?;
    }
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load_inputs(cfg)?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_exclusion_logs(&out, &inputs, cfg.demographics.is_some())?;
    write_manifest(&out, "validate", cfg, &inputs.input_paths)?;

    println!(
        "submissions: {} valid, {} excluded",
        inputs.submissions.len(),
        inputs.exclusions.len()
    );
    if cfg.demographics.is_some() {
        println!(
            "demographics: {} valid, {} excluded",
            inputs.demographics.len(),
            inputs.demographic_exclusions.len()
        );
    }
    let clean = inputs.exclusions.is_empty() && inputs.demographic_exclusions.is_empty();
    Ok(if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(VALIDATION_FAILURE)
    })
}

pub fn run(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load_inputs(cfg)?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_exclusion_logs(&out, &inputs, cfg.demographics.is_some())?;

    let mut ran_any = false;
    for t in tournaments_present(&inputs.submissions) {
        let pool = pool_of(&inputs.submissions, t);
        if pool.len() < 2 {
            println!(
                "tournament {}: {} strategy, skipped (a round-robin needs at least two)",
                t.number(),
                pool.len()
            );
            continue;
        }
        let standings =
            compute_standings(&pool).map_err(|e| anyhow!("tournament {}: {e}", t.number()))?;
        let dir = out.join(format!("t{}", t.number()));
        ensure_dir(&dir)?;
        write_text(&dir.join("standings.csv"), &report::standings_csv(&standings))?;
        write_json(&dir.join("standings.json"), &report::standings_json(&standings))?;
        let top = &standings[0];
        println!(
            "tournament {}: {} strategies, top score {} by {}",
            t.number(),
            pool.len(),
            report::format_score_half(top.score_half),
            top.submission_id
        );
        ran_any = true;
    }
    write_manifest(&out, "run", cfg, &inputs.input_paths)?;
    if !ran_any {
        println!("no tournament had enough strategies to run");
        return Ok(ExitCode::from(VALIDATION_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn analyze(cfg: &RunConfig) -> Result<ExitCode> {
    let inputs = load_inputs(cfg)?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_exclusion_logs(&out, &inputs, cfg.demographics.is_some())?;

    let mut per_tournament_points: [BTreeMap<String, Ratio<i64>>; 3] = Default::default();
    let mut ran_any = false;
    for t in tournaments_present(&inputs.submissions) {
        let pool = pool_of(&inputs.submissions, t);
        if pool.len() < 2 {
            println!(
                "tournament {}: {} strategy, skipped (a round-robin needs at least two)",
                t.number(),
                pool.len()
            );
            continue;
        }
        let standings =
            compute_standings(&pool).map_err(|e| anyhow!("tournament {}: {e}", t.number()))?;
        for e in &standings {
            per_tournament_points[t.index()]
                .insert(e.submission_id.clone(), Ratio::new(e.score_half as i64, 2));
        }

        let dir = out.join(format!("t{}", t.number()));
        ensure_dir(&dir)?;
        write_text(&dir.join("standings.csv"), &report::standings_csv(&standings))?;
        write_json(&dir.join("standings.json"), &report::standings_json(&standings))?;

        let level_table = level_distribution_table(&standings);
        write_text(&dir.join("levels.csv"), &report::level_table_csv(&level_table))?;

        let digits = unit_digit_distribution(&standings);
        write_text(&dir.join("digits.csv"), &report::digit_table_csv(&digits))?;

        let mut survival = BTreeMap::new();
        let mut mean_states = BTreeMap::new();
        for at in [AgentType::Human, AgentType::Llm] {
            if let Some(curves) = survival_curve(&standings, at) {
                survival.insert(at, curves);
            }
            if let Some(mean) = mean_states_per_duel(&standings, at) {
                mean_states.insert(at, mean);
            }
        }
        write_text(&dir.join("survival.csv"), &report::survival_csv(&survival))?;

        let model_board = standings.iter().any(|e| e.model.is_some()).then(|| {
            model_leaderboard(&standings, &[], PointsBasis::MatchPoints)
        });
        if let Some(board) = &model_board {
            write_text(
                &dir.join("model_leaderboard.csv"),
                &report::model_leaderboard_csv(board),
            )?;
        }

        let regression = if inputs.demographics.is_empty() {
            None
        } else {
            let (records, missing) = build_regression_records(
                &standings,
                &inputs.demographics,
                UnclassifiedPolicy::MergeWithBaseline,
            );
            if !missing.is_empty() {
                log::warn!(
                    "tournament {}: {} human participants lack demographics",
                    t.number(),
                    missing.len()
                );
            }
            match fit_performance_regression(&records, HcType::Hc1) {
                Ok(fit) => {
                    write_text(&dir.join("regression.csv"), &report::regression_csv(&fit))?;
                    Some(fit)
                }
                Err(e) => {
                    log::warn!("tournament {}: regression skipped: {e}", t.number());
                    None
                }
            }
        };

        write_json(
            &dir.join("bundle.json"),
            &report::analysis_bundle_json(
                &standings,
                &level_table,
                &digits,
                &mean_states,
                model_board.as_ref(),
                regression.as_ref(),
            ),
        )?;

        let humans = standings.iter().filter(|e| e.agent_type == AgentType::Human).count();
        let top = &standings[0];
        println!(
            "tournament {}: {} strategies ({} human, {} llm), top score {} by {}",
            t.number(),
            standings.len(),
            humans,
            standings.len() - humans,
            report::format_score_half(top.score_half),
            top.submission_id
        );
        ran_any = true;
    }

    if ran_any {
        let aggregate = aggregate_leaderboard(&per_tournament_points, &inputs.submissions);
        write_text(&out.join("aggregate.csv"), &report::aggregate_csv(&aggregate))?;
    }
    write_manifest(&out, "analyze", cfg, &inputs.input_paths)?;
    if !ran_any {
        println!("no tournament had enough strategies to analyze");
        return Ok(ExitCode::from(VALIDATION_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, clap::Args)]
pub struct FetchArgs {
    /// Chat-completions base URL (overrides the config).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Model identifier; repeat the flag for several models.
    #[arg(long = "model", value_name = "ID")]
    pub models: Vec<String>,
    /// Valid strategies to collect (default: one per model).
    #[arg(long, value_name = "N")]
    pub pool_size: Option<usize>,
    /// Tournament whose prompt to send (2 or 3; default 3).
    #[arg(long, value_name = "N")]
    pub variant: Option<u8>,
    /// Transport attempts per request.
    #[arg(long, value_name = "N")]
    pub max_attempts: Option<u32>,
    /// Base backoff in milliseconds between transport retries.
    #[arg(long, value_name = "MS")]
    pub backoff_ms: Option<u64>,
    /// Concurrent requests during the planned phase.
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
    /// JSON file with `system`, `user_t2`, and `user_t3` replacing the
    /// built-in prompts.
    #[arg(long, value_name = "FILE")]
    pub prompt_file: Option<PathBuf>,
}

pub fn fetch_llm(cfg: &RunConfig, args: &FetchArgs) -> Result<ExitCode> {
    // Fold the flags into the config so the manifest records what actually
    // ran.
    let mut cfg = cfg.clone();
    let llm = &mut cfg.llm;
    if let Some(e) = &args.endpoint {
        llm.endpoint = Some(e.clone());
    }
    if !args.models.is_empty() {
        llm.models = args.models.clone();
    }
    if let Some(n) = args.pool_size {
        llm.pool_size = Some(n);
    }
    if let Some(v) = args.variant {
        llm.variant = Some(v);
    }
    if let Some(v) = args.max_attempts {
        llm.max_attempts = Some(v);
    }
    if let Some(v) = args.backoff_ms {
        llm.backoff_ms = Some(v);
    }
    if let Some(v) = args.concurrency {
        llm.concurrency = Some(v);
    }
    if let Some(p) = &args.prompt_file {
        llm.prompt_file = Some(p.clone());
    }

    let endpoint = llm
        .endpoint
        .clone()
        .context("config: fetch-llm needs an endpoint (--endpoint or llm.endpoint)")?;
    if llm.models.is_empty() {
        bail!("config: fetch-llm needs at least one model (--model or llm.models)");
    }
    let variant = match llm.variant {
        None | Some(3) => PromptVariant::T3,
        Some(2) => PromptVariant::T2,
        Some(n) => bail!("config: prompt variant must be 2 or 3, got {n}"),
    };
    let target = llm.pool_size.unwrap_or(llm.models.len());
    let prompts = match &llm.prompt_file {
        None => PromptSet::builtin(),
        Some(path) => {
            let bytes = read_input(path, "prompt")?;
            serde_json::from_slice(&bytes).with_context(|| {
                format!("input: prompt file {} is not a valid prompt set", path.display())
            })?
        }
    };

    let mut pool_cfg = PoolConfig::new(llm.models.clone(), target, variant);
    pool_cfg.seed = cfg.seed;
    pool_cfg.params = llm.params.clone();
    if let Some(v) = llm.max_attempts {
        pool_cfg.max_attempts = v;
    }
    if let Some(v) = llm.backoff_ms {
        pool_cfg.backoff_base_ms = v;
    }
    if let Some(v) = llm.concurrency {
        pool_cfg.concurrency = v;
    }

    // The transport reads the API key from BLOTTO_LLM_API_KEY when set.
    let transport = HttpTransport::new(endpoint);
    let (outcome, shortfall) = match build_llm_pool(&transport, &SystemClock, &prompts, &pool_cfg)
    {
        Ok(outcome) => (outcome, None),
        Err(PoolError::Shortfall { got, target, outcome }) => (outcome, Some((got, target))),
        Err(e @ PoolError::EmptyPlan) => return Err(anyhow!("config: {e}")),
    };

    let out = cfg.out_dir();
    ensure_dir(&out)?;
    write_pool_artifacts(&out, &outcome)?;
    let inputs: Vec<PathBuf> = cfg.llm.prompt_file.iter().cloned().collect();
    write_manifest(&out, "fetch-llm", &cfg, &inputs)?;

    for (model, n) in outcome.instances_per_model() {
        println!("{model}: {n} valid");
    }
    if let Some((got, target)) = shortfall {
        println!("pool shortfall: {got} of {target} valid strategies (partial pool written)");
        return Ok(ExitCode::from(VALIDATION_FAILURE));
    }
    println!("pool complete: {} valid strategies", outcome.records.len());
    Ok(ExitCode::SUCCESS)
}

fn write_pool_artifacts(out: &Path, outcome: &PoolOutcome) -> Result<()> {
    let mut records_jsonl = String::new();
    for r in &outcome.records {
        records_jsonl += &serde_json::to_string(r).expect("record serializes");
        records_jsonl.push('\n');
    }
    write_text(&out.join("llm_records.jsonl"), &records_jsonl)?;

    let mut audit = Vec::new();
    write_audit_jsonl(&outcome.audit, &mut audit).expect("writing to a Vec cannot fail");
    write_text(&out.join("llm_audit.jsonl"), &String::from_utf8(audit).expect("audit is utf-8"))?;

    write_text(
        &out.join("llm_submissions.csv"),
        &report::submissions_csv(&outcome.to_submissions()),
    )
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    /// Dataset directory containing submissions.csv and demographics.csv.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
}

fn replay_checks_csv(checks: &[ReplayCheck]) -> String {
    let mut out = String::from("name,expected,actual,pass,required\n");
    for c in checks {
        out += &format!(
            "{},{},{},{},{}\n",
            report::csv_escape(&c.name),
            report::csv_escape(&c.expected),
            report::csv_escape(&c.actual),
            c.pass,
            c.required,
        );
    }
    out
}

pub fn replay(cfg: &RunConfig, args: &ReplayArgs) -> Result<ExitCode> {
    let dir = match &args.dataset {
        Some(d) => d.clone(),
        None => discover_dataset_dir(Some(Path::new("dataset"))).ok_or_else(|| {
            anyhow!(
                "input: no dataset directory: pass --dataset, set {DATASET_DIR_ENV}, \
                 or populate ./dataset with {SUBMISSIONS_FILE} and {DEMOGRAPHICS_FILE}"
            )
        })?,
    };
    let dataset = load_dataset(&dir).map_err(|e| anyhow!("input: {e}"))?;
    let replayed = replay_dataset(&dataset).map_err(|e| anyhow!("replay: {e}"))?;

    let out = cfg.out_dir();
    ensure_dir(&out)?;
    for tr in &replayed.tournaments {
        let dir = out.join(format!("t{}", tr.tournament.number()));
        ensure_dir(&dir)?;
        write_text(&dir.join("standings.csv"), &report::standings_csv(&tr.standings))?;
        write_text(&dir.join("levels.csv"), &report::level_table_csv(&tr.level_table))?;
        write_text(&dir.join("digits.csv"), &report::digit_table_csv(&tr.digits))?;
        write_text(&dir.join("survival.csv"), &report::survival_csv(&tr.survival))?;
        if let Some(board) = &tr.model_board {
            write_text(&dir.join("model_leaderboard.csv"), &report::model_leaderboard_csv(board))?;
        }
        if let Some(fit) = &tr.regression {
            write_text(&dir.join("regression.csv"), &report::regression_csv(fit))?;
        }
        write_json(
            &dir.join("bundle.json"),
            &report::analysis_bundle_json(
                &tr.standings,
                &tr.level_table,
                &tr.digits,
                &tr.mean_states,
                tr.model_board.as_ref(),
                tr.regression.as_ref(),
            ),
        )?;
    }
    write_text(&out.join("aggregate.csv"), &report::aggregate_csv(&replayed.aggregate))?;
    write_text(&out.join("replay_checks.csv"), &replay_checks_csv(&replayed.checks))?;
    write_manifest(
        &out,
        "replay",
        cfg,
        &[dir.join(SUBMISSIONS_FILE), dir.join(DEMOGRAPHICS_FILE)],
    )?;

    for line in replayed.summary_lines() {
        println!("{line}");
    }
    if let Some(basis) = replayed.resolved_basis {
        println!("model leaderboard basis: {basis:?}");
    }
    if let Some(hc) = replayed.resolved_hc {
        println!("robust variance variant: {hc:?}");
    }
    Ok(if replayed.required_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(VALIDATION_FAILURE)
    })
}

#[derive(Debug, clap::Args)]
pub struct BestResponseArgs {
    /// Pool CSV in the submissions layout; defaults to the configured
    /// submissions file.
    #[arg(long, value_name = "FILE")]
    pub pool: Option<PathBuf>,
}

pub fn best_response(cfg: &RunConfig, args: &BestResponseArgs) -> Result<ExitCode> {
    let path = args
        .pool
        .clone()
        .or_else(|| cfg.submissions.clone())
        .context("config: no pool file given (use --pool or --submissions)")?;
    let bytes = read_input(&path, "pool")?;
    let parsed =
        parse_submissions(&bytes).map_err(|e| anyhow!("input: {}: {e}", path.display()))?;
    let (mut subs, _) = dedupe_submissions(parsed.submissions, cfg.dedupe.policy());
    if let Some(n) = cfg.tournament {
        let t = Tournament::from_number(n).expect("validated in config::resolve");
        subs.retain(|s| s.tournament == t);
    }
    let pool: Vec<Allocation> = subs.iter().map(|s| s.allocation).collect();
    let Some(best) = best_response_expected_states(&pool) else {
        println!("pool is empty after validation; nothing to respond to");
        return Ok(ExitCode::from(VALIDATION_FAILURE));
    };

    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let decimal = report::ratio_to_decimal(best.expected_states, 3);
    write_json(
        &out.join("best_response.json"),
        &serde_json::json!({
            "trips": best.allocation.trips(),
            "expected_states_per_duel": {
                "numer": best.expected_states.numer(),
                "denom": best.expected_states.denom(),
                "decimal": decimal,
            },
            "pool_size": pool.len(),
        }),
    )?;
    write_manifest(&out, "best-response", cfg, &[path])?;

    let trips = best
        .allocation
        .trips()
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    println!(
        "best response to {} strategies: [{trips}] winning {decimal} states per duel on average",
        pool.len()
    );
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_csv_escapes_and_flags() {
        let checks = vec![ReplayCheck {
            name: "tournament 1 rank 1".into(),
            expected: "166.0 via (4,13,3,17,21,3,21,5,13)".into(),
            actual: "a,b".into(),
            pass: false,
            required: true,
        }];
        let csv = replay_checks_csv(&checks);
        assert_eq!(
            csv,
            "name,expected,actual,pass,required\n\
             tournament 1 rank 1,\"166.0 via (4,13,3,17,21,3,21,5,13)\",\"a,b\",false,true\n"
        );
    }

    #[test]
    fn tournament_presence_is_ordered_and_dedup() {
        use chrono::TimeZone;
        let ts = chrono::Utc.with_ymd_and_hms(2025, 5, 1, 0, 0, 0).unwrap();
        let sub = |id: &str, t: Tournament| Submission {
            submission_id: id.into(),
            participant_id: id.into(),
            tournament: t,
            agent_type: AgentType::Human,
            model: None,
            timestamp: ts,
            allocation: blotto_core::validate_allocation(&[100, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap(),
        };
        let subs = vec![
            sub("a", Tournament::T3),
            sub("b", Tournament::T1),
            sub("c", Tournament::T3),
        ];
        assert_eq!(tournaments_present(&subs), vec![Tournament::T1, Tournament::T3]);
        assert_eq!(pool_of(&subs, Tournament::T3).len(), 2);
    }
}
