//! End-to-end checks of the `blotto` binary: the exit-code contract, the
//! artifact layout, and byte-level determinism of reruns.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write as IoWrite};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blotto_core::replay::DATASET_DIR_ENV;

fn blotto() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blotto"));
    // Keep host settings from leaking into dataset discovery.
    cmd.env_remove(DATASET_DIR_ENV);
    cmd
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("proper exit, no signal")
}

const SUBMISSIONS_HEADER: &str =
    "submission_id,participant_id,tournament,timestamp,agent_type,model,A,B,C,D,E,F,G,H,I\n";

fn submissions_csv(rows: &[(&str, &str, u8, &str, &str, [u8; 9])]) -> String {
    let mut out = String::from(SUBMISSIONS_HEADER);
    for (i, (id, pid, t, agent, model, trips)) in rows.iter().enumerate() {
        let trips = trips.map(|v| v.to_string()).join(",");
        out += &format!(
            "{id},{pid},{t},2025-05-01T10:{:02}:00Z,{agent},{model},{trips}\n",
            i % 60
        );
    }
    out
}

fn human(id: &'static str, t: u8, trips: [u8; 9]) -> (&'static str, &'static str, u8, &'static str, &'static str, [u8; 9]) {
    (id, id, t, "human", "", trips)
}

fn write_inputs(dir: &Path, csv: &str) -> PathBuf {
    let path = dir.join("submissions.csv");
    fs::write(&path, csv).unwrap();
    path
}

#[test]
fn missing_submissions_path_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere").join("subs.cssv");
    let output = blotto()
        .args(["validate", "--submissions"])
        .arg(&missing)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&output), 2, "stderr: {}", stderr(&output));
    let err = stderr(&output);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains(missing.to_str().unwrap()), "{err}");
}

#[test]
fn config_errors_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let output = blotto()
        .args(["--tournament", "5", "validate"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("tournament must be 1, 2, or 3"), "{}", stderr(&output));

    // No submissions configured at all.
    let output = blotto().arg("run").current_dir(dir.path()).output().unwrap();
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("no submissions file"), "{}", stderr(&output));
}

#[test]
fn validate_reports_exclusions_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = submissions_csv(&[
        human("h1", 1, [12, 11, 11, 11, 11, 11, 11, 11, 11]),
        human("h2", 1, [100, 0, 0, 0, 0, 0, 0, 0, 0]),
    ]);
    csv += "bad1,p9,1,2025-05-01T10:05:00Z,human,,50,50,50,0,0,0,0,0,0\n";
    let subs = write_inputs(dir.path(), &csv);
    let out = dir.path().join("out");

    let output = blotto()
        .arg("validate")
        .arg("--submissions")
        .arg(&subs)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&output), 1, "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("2 valid, 1 excluded"), "{}", stdout(&output));

    let log = fs::read_to_string(out.join("exclusions.csv")).unwrap();
    assert!(log.starts_with("submission_id,reason,detail\n"), "{log}");
    assert!(log.contains("bad1"), "{log}");
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn validate_clean_input_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let subs = write_inputs(
        dir.path(),
        &submissions_csv(&[
            human("h1", 1, [12, 11, 11, 11, 11, 11, 11, 11, 11]),
            human("h2", 1, [100, 0, 0, 0, 0, 0, 0, 0, 0]),
        ]),
    );
    let output = blotto()
        .arg("validate")
        .arg("--submissions")
        .arg(&subs)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
}

#[test]
fn run_filters_to_the_requested_tournament() {
    let dir = tempfile::tempdir().unwrap();
    let subs = write_inputs(
        dir.path(),
        &submissions_csv(&[
            human("h1", 1, [12, 11, 11, 11, 11, 11, 11, 11, 11]),
            human("h2", 1, [100, 0, 0, 0, 0, 0, 0, 0, 0]),
            human("h3", 1, [11, 11, 11, 11, 11, 11, 11, 11, 12]),
            human("h4", 2, [20, 20, 20, 20, 20, 0, 0, 0, 0]),
            human("h5", 2, [0, 0, 0, 0, 20, 20, 20, 20, 20]),
        ]),
    );
    let out = dir.path().join("out");
    let output = blotto()
        .args(["run", "--tournament", "1"])
        .arg("--submissions")
        .arg(&subs)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(stdout(&output).contains("tournament 1: 3 strategies"), "{}", stdout(&output));
    assert!(!stdout(&output).contains("tournament 2"), "{}", stdout(&output));

    let standings = fs::read_to_string(out.join("t1").join("standings.csv")).unwrap();
    assert!(standings.starts_with(
        "rank,submission_id,agent_type,model,points,W,T,L,leaderboard_points,A,B,C,D,E,F,G,H,I\n"
    ));
    assert_eq!(standings.lines().count(), 4, "{standings}");
    assert!(!out.join("t2").exists());
}

/// A two-tournament mixed pool exercises every analyze artifact.
fn mixed_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let mut csv = submissions_csv(&[
        ("s1", "h1", 1, "human", "", [12, 11, 11, 11, 11, 11, 11, 11, 11]),
        ("s2", "h2", 1, "human", "", [100, 0, 0, 0, 0, 0, 0, 0, 0]),
        ("s3", "h3", 1, "human", "", [11, 11, 11, 11, 11, 11, 11, 11, 12]),
        ("s4", "h4", 1, "human", "", [25, 25, 25, 25, 0, 0, 0, 0, 0]),
        ("s5", "h1", 3, "human", "", [13, 11, 11, 11, 11, 11, 11, 11, 10]),
        ("s6", "h2", 3, "human", "", [0, 0, 0, 0, 0, 0, 0, 0, 100]),
    ]);
    csv += "m1,m1,3,2025-05-02T09:00:00Z,llm,stub/alpha,12,12,12,12,13,13,13,13,0\n";
    csv += "m2,m2,3,2025-05-02T09:01:00Z,llm,stub/beta,11,11,11,11,11,11,11,11,12\n";
    let subs = write_inputs(dir, &csv);

    let demo = dir.join("demographics.csv");
    fs::write(
        &demo,
        "participant_id,age,sex,education,employment,field\n\
         h1,25,Male,Higher,Student,Mathematics\n\
         h2,34,Female,Doctoral degree,Employed (in an organization),\"Economics, business and management\"\n\
         h3,29,Female,Secondary,Student,Humanities and arts\n\
         h4,41,Male,Higher,Working,STEM\n",
    )
    .unwrap();
    (subs, demo)
}

#[test]
fn analyze_writes_the_full_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let (subs, demo) = mixed_inputs(dir.path());
    let out = dir.path().join("out");
    let output = blotto()
        .arg("analyze")
        .arg("--submissions")
        .arg(&subs)
        .arg("--demographics")
        .arg(&demo)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("tournament 1: 4 strategies (4 human, 0 llm)"), "{text}");
    assert!(text.contains("tournament 3: 4 strategies (2 human, 2 llm)"), "{text}");

    for name in ["standings.csv", "standings.json", "levels.csv", "digits.csv", "survival.csv", "bundle.json"] {
        assert!(out.join("t1").join(name).exists(), "missing t1/{name}");
        assert!(out.join("t3").join(name).exists(), "missing t3/{name}");
    }
    assert!(out.join("t3").join("model_leaderboard.csv").exists());
    assert!(!out.join("t1").join("model_leaderboard.csv").exists());
    assert!(out.join("aggregate.csv").exists());
    assert!(out.join("exclusions.csv").exists());
    assert!(out.join("demographics_exclusions.csv").exists());
    assert!(out.join("run_manifest.json").exists());

    let board = fs::read_to_string(out.join("t3").join("model_leaderboard.csv")).unwrap();
    assert!(board.starts_with("position,model,avg_points,instances\n"), "{board}");
    assert!(board.contains("stub/alpha") && board.contains("stub/beta"), "{board}");

    let aggregate = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let mut lines = aggregate.lines();
    assert_eq!(
        lines.next().unwrap(),
        "final_rank,participant_id,agent_type,t1_points,t2_points,t3_points,total_points"
    );
    assert!(aggregate.contains("h1"), "{aggregate}");
}

fn walk(dir: &Path, base: &Path, files: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(&path, base, files);
        } else {
            files.push(path.strip_prefix(base).unwrap().to_path_buf());
        }
    }
}

#[test]
fn reruns_are_byte_identical_except_the_manifest_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let (subs, demo) = mixed_inputs(dir.path());
    // Same relative --out from two working directories keeps the recorded
    // configurations identical while the artifact trees stay separate.
    let mut outs = Vec::new();
    for name in ["run-a", "run-b"] {
        let cwd = dir.path().join(name);
        fs::create_dir(&cwd).unwrap();
        let output = blotto()
            .arg("analyze")
            .arg("--submissions")
            .arg(&subs)
            .arg("--demographics")
            .arg(&demo)
            .args(["--out", "out", "--seed", "42"])
            .current_dir(&cwd)
            .output()
            .unwrap();
        assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
        outs.push(cwd.join("out"));
    }

    let mut first = Vec::new();
    let mut second = Vec::new();
    walk(&outs[0], &outs[0], &mut first);
    walk(&outs[1], &outs[1], &mut second);
    first.sort();
    second.sort();
    assert_eq!(first, second, "artifact sets differ");
    assert!(first.len() >= 10, "expected a full artifact tree, got {first:?}");

    for rel in &first {
        let a = fs::read(outs[0].join(rel)).unwrap();
        let b = fs::read(outs[1].join(rel)).unwrap();
        if rel == Path::new("run_manifest.json") {
            let scrub = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v.as_object_mut().unwrap().remove("created_utc").unwrap();
                v
            };
            assert_eq!(scrub(&a), scrub(&b), "manifest differs beyond created_utc");
        } else {
            assert_eq!(a, b, "artifact {} differs between reruns", rel.display());
        }
    }
}

#[test]
fn best_response_finds_the_known_counter() {
    let dir = tempfile::tempdir().unwrap();
    let subs = write_inputs(
        dir.path(),
        &submissions_csv(&[human("h1", 1, [12, 11, 11, 11, 11, 11, 11, 11, 11])]),
    );
    let out = dir.path().join("out");
    let output = blotto()
        .arg("best-response")
        .arg("--pool")
        .arg(&subs)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    assert!(
        stdout(&output).contains("[0,12,12,12,12,12,12,12,12] winning 8 states"),
        "{}",
        stdout(&output)
    );

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("best_response.json")).unwrap()).unwrap();
    assert_eq!(json["trips"], serde_json::json!([0, 12, 12, 12, 12, 12, 12, 12, 12]));
    assert_eq!(json["expected_states_per_duel"]["decimal"], "8");
    assert_eq!(json["pool_size"], 1);
}

#[test]
fn replay_without_a_dataset_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let output = blotto()
        .arg("replay")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&output), 2, "stdout: {}", stdout(&output));
    let err = stderr(&output);
    assert!(err.contains("dataset"), "{err}");
    assert!(err.contains(DATASET_DIR_ENV), "{err}");
}

/// Minimal chat-completions stub: drains each request, replies with a
/// fixed valid strategy, and stops after `max_requests` connections.
fn spawn_stub_server(max_requests: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming().take(max_requests) {
            let Ok(stream) = stream else { break };
            let mut reader = BufReader::new(stream);
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(rest) = lower.strip_prefix("content-length:") {
                    content_length = rest.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" || line == "\n" {
                    break;
                }
            }
            let mut body = vec![0u8; content_length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let content = r#"{"A": 13, "B": 11, "C": 11, "D": 11, "E": 11, "F": 11, "G": 11, "H": 11, "I": 10, "total": 100, "explanation": "spread with a slight edge"}"#;
            let reply = serde_json::json!({
                "choices": [{"message": {"content": content}}]
            })
            .to_string();
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
        }
    });
    format!("http://{addr}")
}

#[test]
fn fetch_llm_collects_a_pool_from_a_stub_endpoint() {
    let endpoint = spawn_stub_server(8);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = blotto()
        .args(["fetch-llm", "--endpoint", &endpoint])
        .args(["--model", "stub/alpha", "--model", "stub/beta"])
        .args(["--pool-size", "2", "--variant", "2", "--backoff-ms", "0"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&output), 0, "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("stub/alpha: 1 valid"), "{text}");
    assert!(text.contains("stub/beta: 1 valid"), "{text}");
    assert!(text.contains("pool complete: 2 valid strategies"), "{text}");

    let subs = fs::read_to_string(out.join("llm_submissions.csv")).unwrap();
    assert_eq!(subs.lines().count(), 3, "{subs}");
    assert!(subs.contains(",2,") && subs.contains("llm,stub/alpha,13,11,11,11,11,11,11,11,10"), "{subs}");

    let records = fs::read_to_string(out.join("llm_records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 2, "{records}");
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["valid"], serde_json::json!(true));
    assert_eq!(first["variant"], serde_json::json!("T2"));

    let audit = fs::read_to_string(out.join("llm_audit.jsonl")).unwrap();
    assert_eq!(audit.lines().count(), 2, "{audit}");
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn fetch_llm_without_an_endpoint_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let output = blotto()
        .args(["fetch-llm", "--model", "stub/alpha"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("endpoint"), "{}", stderr(&output));
}
