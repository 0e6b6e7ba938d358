//! Artifact emission: CSV tables mirroring the published layouts, a JSON
//! bundle with exact rationals, and the decimal formatting shared by both.
//!
//! Formatting goes through integer arithmetic (no floats), so outputs are
//! byte-stable across runs and platforms.

use num_rational::Ratio;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::regression::RegressionFit;
use crate::analysis::{LevelTable, ModelLeaderboard, PointsBasis};
use crate::game::{State, NUM_STATES};
use crate::ingestion::ExclusionRecord;
use crate::tournament::{AgentType, AggregateEntry, StandingsEntry};

/// Renders a non-negative-denominator rational with at most `max_dp`
/// decimal places, rounding half to even and trimming trailing zeros
/// ("294.056", "290.5", "191").
pub fn ratio_to_decimal(r: Ratio<i64>, max_dp: usize) -> String {
    let fixed = ratio_to_fixed(r, max_dp);
    if !fixed.contains('.') {
        return fixed;
    }
    let trimmed = fixed.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

/// Like [`ratio_to_decimal`] but keeps exactly `dp` decimal places
/// ("54.6", "4.66").
pub fn ratio_to_fixed(r: Ratio<i64>, dp: usize) -> String {
    let scale: i128 = 10i128.pow(dp as u32);
    let n = *r.numer() as i128;
    let d = *r.denom() as i128;
    debug_assert!(d > 0);
    let negative = n < 0;
    let sn = n.abs() * scale;
    let mut q = sn / d;
    let rem = sn % d;
    match (2 * rem).cmp(&d) {
        std::cmp::Ordering::Greater => q += 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 1 {
                q += 1;
            }
        }
        std::cmp::Ordering::Less => {}
    }
    let sign = if negative && q != 0 { "-" } else { "" };
    if dp == 0 {
        return format!("{sign}{q}");
    }
    format!("{sign}{}.{:0width$}", q / scale, q % scale, width = dp)
}

/// A share of 1 rendered as a percentage with one decimal ("54.6").
pub fn share_as_percent(share: Ratio<i64>) -> String {
    ratio_to_fixed(share * Ratio::from_integer(100), 1)
}

/// Half-point score rendered the way standings print it ("156.5", "166.0").
pub fn format_score_half(score_half: u64) -> String {
    format!("{}.{}", score_half / 2, if score_half % 2 == 1 { "5" } else { "0" })
}

/// Quotes a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Standings as CSV: one row per strategy, best first.
pub fn standings_csv(entries: &[StandingsEntry]) -> String {
    let mut out = String::from(
        "rank,submission_id,agent_type,model,points,W,T,L,leaderboard_points,A,B,C,D,E,F,G,H,I\n",
    );
    for e in entries {
        let trips = e
            .allocation
            .trips()
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            e.rank,
            csv_escape(&e.submission_id),
            e.agent_type.label(),
            csv_escape(e.model.as_deref().unwrap_or("")),
            format_score_half(e.score_half),
            e.wins,
            e.ties,
            e.losses,
            ratio_to_decimal(e.leaderboard_points, 6),
            trips,
        );
    }
    out
}

fn standing_json(e: &StandingsEntry) -> serde_json::Value {
    serde_json::json!({
        "rank": e.rank,
        "submission_id": e.submission_id,
        "agent_type": e.agent_type.label(),
        "model": e.model,
        "points": format_score_half(e.score_half),
        "W": e.wins,
        "T": e.ties,
        "L": e.losses,
        "leaderboard_points": ratio_to_decimal(e.leaderboard_points, 6),
        "trips": e.allocation.trips(),
    })
}

/// The same content as [`standings_csv`], machine-readable.
pub fn standings_json(entries: &[StandingsEntry]) -> serde_json::Value {
    serde_json::Value::Array(entries.iter().map(standing_json).collect())
}

/// Submissions in the ingestion CSV layout, ready to be re-read.
pub fn submissions_csv(subs: &[crate::tournament::Submission]) -> String {
    let mut out = String::from(
        "submission_id,participant_id,tournament,timestamp,agent_type,model,A,B,C,D,E,F,G,H,I\n",
    );
    for s in subs {
        let trips = s
            .allocation
            .trips()
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_escape(&s.submission_id),
            csv_escape(&s.participant_id),
            s.tournament.number(),
            s.timestamp.to_rfc3339(),
            s.agent_type.label(),
            csv_escape(s.model.as_deref().unwrap_or("")),
            trips,
        );
    }
    out
}

/// Exclusion log as CSV.
pub fn exclusions_csv(records: &[ExclusionRecord]) -> String {
    let mut out = String::from("submission_id,reason,detail\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{}",
            csv_escape(&r.submission_id),
            r.reason.label(),
            csv_escape(&r.detail),
        );
    }
    out
}

/// Level-distribution table as CSV, wide like the published layout: one row
/// per level, a percent and score column pair per agent type present.
pub fn level_table_csv(table: &LevelTable) -> String {
    let agent_types: Vec<AgentType> = table.rows.keys().copied().collect();
    let mut header = String::from("reasoning_level,strong_states");
    for at in &agent_types {
        let _ = write!(header, ",{}_percent,{}_score", at.label(), at.label());
    }
    let mut out = header;
    out.push('\n');

    let mut labels = Vec::new();
    for rows in table.rows.values() {
        for row in rows {
            if !labels.contains(&row.label) {
                labels.push(row.label);
            }
        }
    }
    labels.sort();

    for label in labels {
        let strong = label
            .strong_states()
            .map(|s| s.to_string())
            .unwrap_or_default();
        let _ = write!(out, "{},{}", label.name(), strong);
        for at in &agent_types {
            let row = table.rows[at].iter().find(|r| r.label == label);
            match row {
                Some(r) => {
                    let score = r
                        .mean_states_per_duel
                        .map(|s| ratio_to_fixed(s, 2))
                        .unwrap_or_default();
                    let _ = write!(out, ",{},{}", share_as_percent(r.percent_of_pool), score);
                }
                None => out.push_str(",0.0,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Unit-digit table as CSV: one row per agent type, one column per digit,
/// percentages with one decimal.
pub fn digit_table_csv(digits: &BTreeMap<AgentType, [Ratio<i64>; 10]>) -> String {
    let mut out = String::from("agent_type,d0,d1,d2,d3,d4,d5,d6,d7,d8,d9\n");
    for (at, shares) in digits {
        let _ = write!(out, "{}", at.label());
        for share in shares {
            let _ = write!(out, ",{}", share_as_percent(*share));
        }
        out.push('\n');
    }
    out
}

/// Survival curves in long format, one row per (agent type, state, t).
pub fn survival_csv(curves: &BTreeMap<AgentType, [Vec<Ratio<i64>>; NUM_STATES]>) -> String {
    let mut out = String::from("agent_type,state,t,share\n");
    for (at, per_state) in curves {
        for (s, curve) in per_state.iter().enumerate() {
            for (t, share) in curve.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    at.label(),
                    State::ALL[s].letter(),
                    t,
                    ratio_to_decimal(*share, 6),
                );
            }
        }
    }
    out
}

/// Model leaderboard as CSV, ranked rows only; models without a valid
/// instance are reported separately (see the JSON bundle).
pub fn model_leaderboard_csv(board: &ModelLeaderboard) -> String {
    let mut out = String::from("position,model,avg_points,instances\n");
    for (i, row) in board.rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            csv_escape(&row.model),
            ratio_to_decimal(row.average(board.basis), 3),
            row.instances,
        );
    }
    out
}

fn model_leaderboard_json(board: &ModelLeaderboard) -> serde_json::Value {
    serde_json::json!({
        "basis": match board.basis {
            PointsBasis::MatchPoints => "match_points",
            PointsBasis::LeaderboardPoints => "leaderboard_points",
        },
        "rows": board.rows.iter().enumerate().map(|(i, r)| serde_json::json!({
            "position": i + 1,
            "model": r.model,
            "avg_points": ratio_to_decimal(r.average(board.basis), 3),
            "avg_match_points": ratio_to_decimal(r.avg_match_points, 6),
            "avg_leaderboard_points": ratio_to_decimal(r.avg_leaderboard_points, 6),
            "instances": r.instances,
        })).collect::<Vec<_>>(),
        "omitted_models": board.omitted_models,
    })
}

/// Regression summary as CSV: one row per coefficient, then the fit
/// statistics as labelled rows.
pub fn regression_csv(fit: &RegressionFit) -> String {
    let mut out = String::from("term,estimate,robust_se,t_value,p_value,stars\n");
    for c in &fit.coefficients {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.6},{}",
            csv_escape(&c.name),
            c.estimate,
            c.robust_se,
            c.t_value,
            c.p_value,
            c.stars(),
        );
    }
    let _ = writeln!(out, "observations,{},,,,", fit.n);
    let _ = writeln!(out, "r_squared,{:.6},,,,", fit.r_squared);
    let _ = writeln!(out, "adj_r_squared,{:.6},,,,", fit.adj_r_squared);
    let _ = writeln!(out, "residual_se,{:.6},,,,", fit.residual_se);
    let _ = writeln!(
        out,
        "f_statistic,{:.6},,,{:.6},{}",
        fit.f_statistic,
        fit.f_p_value,
        crate::analysis::regression::significance_stars(fit.f_p_value)
    );
    out
}

fn regression_json(fit: &RegressionFit) -> serde_json::Value {
    serde_json::json!({
        "hc": format!("{:?}", fit.hc),
        "coefficients": fit.coefficients.iter().map(|c| serde_json::json!({
            "term": c.name,
            "estimate": c.estimate,
            "robust_se": c.robust_se,
            "t_value": c.t_value,
            "p_value": c.p_value,
            "stars": c.stars(),
        })).collect::<Vec<_>>(),
        "observations": fit.n,
        "r_squared": fit.r_squared,
        "adj_r_squared": fit.adj_r_squared,
        "residual_se": fit.residual_se,
        "f_statistic": fit.f_statistic,
        "f_p_value": fit.f_p_value,
    })
}

fn ratio_json(r: Ratio<i64>) -> serde_json::Value {
    serde_json::json!({
        "numer": *r.numer(),
        "denom": *r.denom(),
        "decimal": ratio_to_decimal(r, 6),
    })
}

fn level_table_json(table: &LevelTable) -> serde_json::Value {
    let mut by_agent = serde_json::Map::new();
    for (at, rows) in &table.rows {
        by_agent.insert(
            at.label().to_string(),
            rows.iter()
                .map(|r| {
                    serde_json::json!({
                        "label": r.label.name(),
                        "strong_states": r.strong_states,
                        "count": r.count,
                        "percent": share_as_percent(r.percent_of_pool),
                        "percent_exact": ratio_json(r.percent_of_pool),
                        "score": r.mean_states_per_duel.map(|s| ratio_to_fixed(s, 2)),
                        "score_exact": r.mean_states_per_duel.map(ratio_json),
                    })
                })
                .collect(),
        );
    }
    serde_json::Value::Object(by_agent)
}

fn digit_table_json(digits: &BTreeMap<AgentType, [Ratio<i64>; 10]>) -> serde_json::Value {
    let mut by_agent = serde_json::Map::new();
    for (at, shares) in digits {
        by_agent.insert(
            at.label().to_string(),
            shares
                .iter()
                .map(|s| serde_json::json!({
                    "percent": share_as_percent(*s),
                    "exact": ratio_json(*s),
                }))
                .collect(),
        );
    }
    serde_json::Value::Object(by_agent)
}

/// Aggregate cross-tournament leaderboard as CSV.
pub fn aggregate_csv(entries: &[AggregateEntry]) -> String {
    let mut out = String::from(
        "final_rank,participant_id,agent_type,t1_points,t2_points,t3_points,total_points\n",
    );
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.final_rank,
            csv_escape(&e.participant_id),
            e.agent_type.label(),
            ratio_to_decimal(e.points_by_tournament[0], 6),
            ratio_to_decimal(e.points_by_tournament[1], 6),
            ratio_to_decimal(e.points_by_tournament[2], 6),
            ratio_to_decimal(e.total_points, 6),
        );
    }
    out
}

/// Everything the analysis produced for one tournament, as one JSON value.
#[allow(clippy::too_many_arguments)]
pub fn analysis_bundle_json(
    standings: &[StandingsEntry],
    level_table: &LevelTable,
    digits: &BTreeMap<AgentType, [Ratio<i64>; 10]>,
    mean_states: &BTreeMap<AgentType, Ratio<i64>>,
    model_board: Option<&ModelLeaderboard>,
    regression: Option<&RegressionFit>,
) -> serde_json::Value {
    let mut bundle = serde_json::Map::new();
    bundle.insert("standings".into(), standings_json(standings));
    bundle.insert("reasoning_levels".into(), level_table_json(level_table));
    bundle.insert("unit_digits".into(), digit_table_json(digits));
    bundle.insert(
        "mean_states_per_duel".into(),
        serde_json::Value::Object(
            mean_states
                .iter()
                .map(|(at, r)| (at.label().to_string(), ratio_json(*r)))
                .collect(),
        ),
    );
    if let Some(board) = model_board {
        bundle.insert("model_leaderboard".into(), model_leaderboard_json(board));
    }
    if let Some(fit) = regression {
        bundle.insert("regression".into(), regression_json(fit));
    }
    serde_json::Value::Object(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_allocation;
    use chrono::{DateTime, Utc};

    #[test]
    fn decimal_rounding_is_half_even_and_trimmed() {
        assert_eq!(ratio_to_decimal(Ratio::new(5293, 18), 3), "294.056");
        assert_eq!(ratio_to_decimal(Ratio::new(581, 2), 3), "290.5");
        assert_eq!(ratio_to_decimal(Ratio::from_integer(191), 3), "191");
        // Exact halves at the cut round to the even neighbour.
        assert_eq!(ratio_to_decimal(Ratio::new(19025, 80), 3), "237.812");
        assert_eq!(ratio_to_decimal(Ratio::new(2067, 16), 3), "129.188");
        assert_eq!(ratio_to_decimal(Ratio::new(-3, 2), 0), "-2");
        assert_eq!(ratio_to_decimal(Ratio::new(1, 3), 6), "0.333333");
    }

    #[test]
    fn fixed_rendering_pads() {
        assert_eq!(ratio_to_fixed(Ratio::new(112, 205) * Ratio::from_integer(100), 1), "54.6");
        assert_eq!(ratio_to_fixed(Ratio::new(9, 2), 2), "4.50");
        assert_eq!(ratio_to_fixed(Ratio::from_integer(3), 2), "3.00");
        assert_eq!(share_as_percent(Ratio::new(1, 2)), "50.0");
    }

    #[test]
    fn score_half_prints_like_standings() {
        assert_eq!(format_score_half(332), "166.0");
        assert_eq!(format_score_half(313), "156.5");
        assert_eq!(format_score_half(0), "0.0");
    }

    fn entry(rank: u32, id: &str, model: Option<&str>) -> StandingsEntry {
        StandingsEntry {
            submission_id: id.to_string(),
            participant_id: id.to_string(),
            agent_type: if model.is_some() {
                AgentType::Llm
            } else {
                AgentType::Human
            },
            model: model.map(|m| m.to_string()),
            timestamp: DateTime::parse_from_rfc3339("2025-10-02T10:00:00Z")
                .unwrap()
                .with_timezone(&Utc),
            allocation: validate_allocation(&[4, 13, 3, 17, 21, 3, 21, 5, 13]).unwrap(),
            wins: 2,
            ties: 1,
            losses: 0,
            score_half: 5,
            state_half_votes: 30,
            rank,
            leaderboard_points: Ratio::new(345, 2),
        }
    }

    #[test]
    fn standings_csv_layout() {
        let csv = standings_csv(&[entry(1, "s1", None)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rank,submission_id,agent_type,model,points,W,T,L,leaderboard_points,A,B,C,D,E,F,G,H,I"
        );
        assert_eq!(
            lines.next().unwrap(),
            "1,s1,human,,2.5,2,1,0,172.5,4,13,3,17,21,3,21,5,13"
        );
    }

    #[test]
    fn standings_json_matches_csv_content() {
        let json = standings_json(&[entry(1, "s1", Some("m/x"))]);
        let row = &json[0];
        assert_eq!(row["rank"], 1);
        assert_eq!(row["points"], "2.5");
        assert_eq!(row["leaderboard_points"], "172.5");
        assert_eq!(row["model"], "m/x");
        assert_eq!(row["trips"][1], 13);
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        let mut e = entry(1, "weird,id", None);
        e.submission_id = "weird,id".into();
        let csv = standings_csv(&[e]);
        assert!(csv.contains("\"weird,id\""));
    }
}
