//! Round-robin scheduling, scoring, ranking, and leaderboard points.
//!
//! Every strategy in a pool plays every other exactly once. A strategy's
//! tournament score is wins plus half of ties, tracked in half-point integer
//! units so that pool-wide sums are exact. Ranking breaks score ties by
//! submission time (earlier is better); leaderboard points follow the fixed
//! 200/180/165/... schedule with score-tied groups splitting the points of
//! the positions they occupy.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use num_rational::Ratio;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{resolve_match, Allocation};

/// Which of the three tournaments a submission enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tournament {
    T1,
    T2,
    T3,
}

impl Tournament {
    pub const ALL: [Tournament; 3] = [Tournament::T1, Tournament::T2, Tournament::T3];

    pub fn number(self) -> u8 {
        match self {
            Tournament::T1 => 1,
            Tournament::T2 => 2,
            Tournament::T3 => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Tournament> {
        match n {
            1 => Some(Tournament::T1),
            2 => Some(Tournament::T2),
            3 => Some(Tournament::T3),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl std::fmt::Display for Tournament {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Whether a strategy was authored by a person or elicited from a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentType {
    Human,
    Llm,
}

impl AgentType {
    pub fn label(self) -> &'static str {
        match self {
            AgentType::Human => "human",
            AgentType::Llm => "llm",
        }
    }
}

/// One strategy entered into one tournament.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: String,
    pub participant_id: String,
    pub tournament: Tournament,
    pub agent_type: AgentType,
    /// Model identifier; present iff `agent_type` is [`AgentType::Llm`].
    pub model: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub allocation: Allocation,
}

/// Per-strategy results accumulated over a round robin.
///
/// `half_votes` is the total electoral votes collected across all matches,
/// in half-vote units; dividing by `2 * (N - 1)` gives the average number of
/// states won per duel (ties counting one half).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchTally {
    pub wins: u32,
    pub ties: u32,
    pub losses: u32,
    pub half_votes: u64,
}

impl MatchTally {
    /// Tournament score `S = W + T/2`, in half-point units.
    pub fn score_half(&self) -> u64 {
        2 * self.wins as u64 + self.ties as u64
    }

    pub fn score(&self) -> f64 {
        self.score_half() as f64 / 2.0
    }

    pub fn matches_played(&self) -> u32 {
        self.wins + self.ties + self.losses
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TournamentError {
    #[error("duplicate submission_id {0:?} in pool")]
    DuplicateSubmissionId(String),
    #[error("round robin requires at least 2 submissions, got {0}")]
    PoolTooSmall(usize),
    #[error("no submission (and hence no tie-break timestamp) for scored id {0:?}")]
    MissingTimestamp(String),
}

/// Plays all `N(N-1)/2` matches of a pool and returns per-submission tallies.
///
/// Match evaluation is parallel over unordered pairs; accumulation is
/// commutative integer addition, so the result is independent of schedule
/// and pool order.
pub fn run_round_robin(pool: &[Submission]) -> Result<BTreeMap<String, MatchTally>, TournamentError> {
    if pool.len() < 2 {
        return Err(TournamentError::PoolTooSmall(pool.len()));
    }
    let mut tallies: BTreeMap<String, MatchTally> = BTreeMap::new();
    for sub in pool {
        if tallies.insert(sub.submission_id.clone(), MatchTally::default()).is_some() {
            return Err(TournamentError::DuplicateSubmissionId(sub.submission_id.clone()));
        }
    }

    let n = pool.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let results: Vec<(usize, usize, u8)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let r = resolve_match(&pool[i].allocation, &pool[j].allocation);
            (i, j, r.half_votes().0)
        })
        .collect();

    for (i, j, half_a) in results {
        let half_b = crate::game::TOTAL_HALF_VOTES - half_a;
        {
            let ta = tallies.get_mut(&pool[i].submission_id).expect("present");
            ta.half_votes += half_a as u64;
            match half_a.cmp(&half_b) {
                std::cmp::Ordering::Greater => ta.wins += 1,
                std::cmp::Ordering::Less => ta.losses += 1,
                std::cmp::Ordering::Equal => ta.ties += 1,
            }
        }
        let tb = tallies.get_mut(&pool[j].submission_id).expect("present");
        tb.half_votes += half_b as u64;
        match half_b.cmp(&half_a) {
            std::cmp::Ordering::Greater => tb.wins += 1,
            std::cmp::Ordering::Less => tb.losses += 1,
            std::cmp::Ordering::Equal => tb.ties += 1,
        }
    }
    Ok(tallies)
}

/// One row of a ranked tournament table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandingsEntry {
    pub submission_id: String,
    pub participant_id: String,
    pub agent_type: AgentType,
    pub model: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub allocation: Allocation,
    pub wins: u32,
    pub ties: u32,
    pub losses: u32,
    /// Score `S` in half-point units.
    pub score_half: u64,
    /// Electoral half-votes collected across all matches (a won state is 2,
    /// a tied state is 1); feeds the states-per-duel statistics.
    pub state_half_votes: u64,
    pub rank: u32,
    pub leaderboard_points: Ratio<i64>,
}

impl StandingsEntry {
    pub fn score(&self) -> f64 {
        self.score_half as f64 / 2.0
    }

    pub fn matches_played(&self) -> u32 {
        self.wins + self.ties + self.losses
    }
}

/// Sorts by score descending, breaking equal scores by earlier submission
/// time (then by id, for full determinism), and assigns ranks `1..=N`.
///
/// Leaderboard points are left at zero; see [`assign_leaderboard_points`].
pub fn rank_standings(
    scores: &BTreeMap<String, MatchTally>,
    submissions: &[Submission],
) -> Result<Vec<StandingsEntry>, TournamentError> {
    let by_id: BTreeMap<&str, &Submission> = submissions
        .iter()
        .map(|s| (s.submission_id.as_str(), s))
        .collect();

    let mut entries = Vec::with_capacity(scores.len());
    for (id, tally) in scores {
        let sub = by_id
            .get(id.as_str())
            .ok_or_else(|| TournamentError::MissingTimestamp(id.clone()))?;
        entries.push(StandingsEntry {
            submission_id: sub.submission_id.clone(),
            participant_id: sub.participant_id.clone(),
            agent_type: sub.agent_type,
            model: sub.model.clone(),
            timestamp: sub.timestamp,
            allocation: sub.allocation,
            wins: tally.wins,
            ties: tally.ties,
            losses: tally.losses,
            score_half: tally.score_half(),
            state_half_votes: tally.half_votes,
            rank: 0,
            leaderboard_points: Ratio::zero(),
        });
    }
    entries.sort_by(|a, b| {
        b.score_half
            .cmp(&a.score_half)
            .then_with(|| a.timestamp.cmp(&b.timestamp))
            .then_with(|| a.submission_id.cmp(&b.submission_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = (i + 1) as u32;
    }
    Ok(entries)
}

/// Points awarded to an untied strategy at `rank` (1-based).
pub fn rank_points(rank: u32) -> i64 {
    match rank {
        1 => 200,
        2 => 180,
        3 => 165,
        4 => 150,
        5 => 140,
        6 => 130,
        7 => 120,
        8 => 110,
        9 => 100,
        10..=100 => 101 - rank as i64,
        _ => 0,
    }
}

/// Assigns leaderboard points over ranked standings.
///
/// A group of strategies with equal score occupies a run of rank positions
/// and splits the total points of those positions equally. The split keys on
/// score ties only: the timestamp tie-break orders the displayed table but
/// does not change anyone's points. Positions beyond 100 contribute zero to
/// a straddling group's pot.
pub fn assign_leaderboard_points(entries: &[StandingsEntry]) -> BTreeMap<String, Ratio<i64>> {
    let mut points = BTreeMap::new();
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].score_half == entries[start].score_half {
            end += 1;
        }
        let pot: i64 = (start..end).map(|i| rank_points(entries[i].rank)).sum();
        let share = Ratio::new(pot, (end - start) as i64);
        for e in &entries[start..end] {
            points.insert(e.submission_id.clone(), share);
        }
        start = end;
    }
    points
}

/// Writes the point shares from [`assign_leaderboard_points`] back onto the
/// standings rows.
pub fn apply_leaderboard_points(
    entries: &mut [StandingsEntry],
    points: &BTreeMap<String, Ratio<i64>>,
) {
    for e in entries.iter_mut() {
        if let Some(p) = points.get(&e.submission_id) {
            e.leaderboard_points = *p;
        }
    }
}

/// Runs a full tournament pass: round robin, ranking, and points.
pub fn compute_standings(pool: &[Submission]) -> Result<Vec<StandingsEntry>, TournamentError> {
    let tallies = run_round_robin(pool)?;
    let mut entries = rank_standings(&tallies, pool)?;
    let points = assign_leaderboard_points(&entries);
    apply_leaderboard_points(&mut entries, &points);
    Ok(entries)
}

/// One row of the cross-tournament aggregate leaderboard.
///
/// Humans aggregate by participant; LLM instances cannot recur across
/// tournaments and aggregate by submission id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateEntry {
    pub participant_id: String,
    pub agent_type: AgentType,
    pub points_by_tournament: [Ratio<i64>; 3],
    pub total_points: Ratio<i64>,
    pub final_rank: u32,
    /// Earliest submission time across the participant's entries; the
    /// aggregate tie-breaker.
    pub first_submission: DateTime<Utc>,
}

/// Sums per-tournament points into the aggregate leaderboard. Missing
/// tournaments contribute zero; total ties are broken by the earliest
/// submission timestamp across the participant's submissions.
pub fn aggregate_leaderboard(
    per_tournament_points: &[BTreeMap<String, Ratio<i64>>; 3],
    submissions: &[Submission],
) -> Vec<AggregateEntry> {
    struct Acc {
        agent_type: AgentType,
        points: [Ratio<i64>; 3],
        first: DateTime<Utc>,
    }
    let mut by_key: BTreeMap<String, Acc> = BTreeMap::new();
    for sub in submissions {
        let key = match sub.agent_type {
            AgentType::Human => sub.participant_id.clone(),
            AgentType::Llm => sub.submission_id.clone(),
        };
        let pts = per_tournament_points[sub.tournament.index()]
            .get(&sub.submission_id)
            .copied()
            .unwrap_or_else(Ratio::zero);
        let acc = by_key.entry(key).or_insert_with(|| Acc {
            agent_type: sub.agent_type,
            points: [Ratio::zero(); 3],
            first: sub.timestamp,
        });
        acc.points[sub.tournament.index()] += pts;
        acc.first = acc.first.min(sub.timestamp);
    }

    let mut entries: Vec<AggregateEntry> = by_key
        .into_iter()
        .map(|(key, acc)| AggregateEntry {
            participant_id: key,
            agent_type: acc.agent_type,
            points_by_tournament: acc.points,
            total_points: acc.points[0] + acc.points[1] + acc.points[2],
            final_rank: 0,
            first_submission: acc.first,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.total_points
            .cmp(&a.total_points)
            .then_with(|| a.first_submission.cmp(&b.first_submission))
            .then_with(|| a.participant_id.cmp(&b.participant_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.final_rank = (i + 1) as u32;
    }
    entries
}
