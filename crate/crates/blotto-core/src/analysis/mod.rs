//! Descriptive statistics over strategy pools: the strong-state reasoning
//! taxonomy, unit-digit distributions, survival curves, and the per-model
//! leaderboard. Shares are kept as exact rationals so that percentage
//! invariants hold without rounding slack.

pub mod best_response;
pub mod regression;

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::Zero;

use crate::game::{Allocation, BUDGET, NUM_STATES};
use crate::tournament::{AgentType, StandingsEntry};

/// Threshold separating a "strong" state from a weak one: a state is strong
/// when it receives more than this many trips. With a budget of 100 over
/// nine states, the near-uniform allocation has exactly one state above it.
pub const STRONG_STATE_THRESHOLD: u8 = 11;

/// Reasoning-depth category implied by the number of strong states.
///
/// Depth grows as a player sacrifices states to overweight the rest, so
/// fewer strong states means deeper (attempted) reasoning. Depths past four
/// strong states are pooled into one `5+` bracket per strong-state count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum LevelLabel {
    L0,
    L1,
    L2,
    L3,
    L4,
    L5Plus4,
    L5Plus3,
    L5Plus2,
    /// No strong state at all (every entry ≤ 11). Reported separately so it
    /// cannot distort the shares of the named levels.
    Unclassified,
}

impl LevelLabel {
    /// Rows in the order the level table prints them.
    pub const TABLE_ORDER: [LevelLabel; 9] = [
        LevelLabel::L0,
        LevelLabel::L1,
        LevelLabel::L2,
        LevelLabel::L3,
        LevelLabel::L4,
        LevelLabel::L5Plus4,
        LevelLabel::L5Plus3,
        LevelLabel::L5Plus2,
        LevelLabel::Unclassified,
    ];

    /// Display name; the three deepest brackets share one name and are told
    /// apart by their strong-state count.
    pub fn name(self) -> &'static str {
        match self {
            LevelLabel::L0 => "Level 0",
            LevelLabel::L1 => "Level 1",
            LevelLabel::L2 => "Level 2",
            LevelLabel::L3 => "Level 3",
            LevelLabel::L4 => "Level 4",
            LevelLabel::L5Plus4 | LevelLabel::L5Plus3 | LevelLabel::L5Plus2 => "Level 5+",
            LevelLabel::Unclassified => "Unclassified",
        }
    }

    /// The strong-state count this label corresponds to, if it pins one
    /// down (`Unclassified` covers zero strong states only in practice, but
    /// carries no count of its own).
    pub fn strong_states(self) -> Option<u8> {
        match self {
            LevelLabel::L0 => Some(1),
            LevelLabel::L1 => Some(8),
            LevelLabel::L2 => Some(7),
            LevelLabel::L3 => Some(6),
            LevelLabel::L4 => Some(5),
            LevelLabel::L5Plus4 => Some(4),
            LevelLabel::L5Plus3 => Some(3),
            LevelLabel::L5Plus2 => Some(2),
            LevelLabel::Unclassified => None,
        }
    }
}

/// Classification of one allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ReasoningLevel {
    pub strong_states: u8,
    pub label: LevelLabel,
}

/// Counts strong states and maps the count to its level label.
///
/// One strong state is the shallowest classified pattern; each sacrificed
/// state past that deepens the level, so eight strong states is depth one,
/// seven is depth two, and so on down to two strong states (depth `5+`).
/// Nine strong states would need at least 108 trips and cannot occur; zero
/// strong states falls outside the taxonomy and comes back `Unclassified`.
pub fn classify_reasoning_level(a: &Allocation) -> ReasoningLevel {
    let strong_states = a
        .trips()
        .iter()
        .filter(|&&t| t > STRONG_STATE_THRESHOLD)
        .count() as u8;
    let label = match strong_states {
        1 => LevelLabel::L0,
        8 => LevelLabel::L1,
        7 => LevelLabel::L2,
        6 => LevelLabel::L3,
        5 => LevelLabel::L4,
        4 => LevelLabel::L5Plus4,
        3 => LevelLabel::L5Plus3,
        2 => LevelLabel::L5Plus2,
        _ => LevelLabel::Unclassified,
    };
    ReasoningLevel {
        strong_states,
        label,
    }
}

/// One row of the level-distribution table for one agent type.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LevelTableRow {
    pub label: LevelLabel,
    /// Strong-state count of the row (absent for the unclassified row).
    pub strong_states: Option<u8>,
    /// Share of this agent type's pool, as an exact fraction of 1.
    pub percent_of_pool: Ratio<i64>,
    /// Mean states won per duel by the row's strategies, ties counting as
    /// half a state; `None` when the row is empty.
    pub mean_states_per_duel: Option<Ratio<i64>>,
    pub count: u32,
}

/// Full level table: rows per agent type present in the pool.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LevelTable {
    pub rows: BTreeMap<AgentType, Vec<LevelTableRow>>,
}

/// Fraction of electoral half-votes a strategy took, converted to states
/// won per duel: half-votes / (2 · matches).
fn states_per_duel(e: &StandingsEntry) -> Ratio<i64> {
    Ratio::new(e.state_half_votes as i64, 2 * e.matches_played() as i64)
}

/// Groups a scored pool by agent type and reasoning level.
///
/// Per agent type, `percent_of_pool` is the share of that agent type's
/// strategies in the row (the shares sum to exactly 1), and the score is
/// the unweighted mean over the row's strategies of their states won per
/// duel. Rows that the pool never hits are emitted with a zero share and no
/// score, except `Unclassified`, which is only emitted when populated.
pub fn level_distribution_table(standings: &[StandingsEntry]) -> LevelTable {
    let mut cells: BTreeMap<AgentType, BTreeMap<LevelLabel, (u32, Ratio<i64>)>> = BTreeMap::new();
    let mut totals: BTreeMap<AgentType, u32> = BTreeMap::new();

    for e in standings {
        let level = classify_reasoning_level(&e.allocation);
        let cell = cells
            .entry(e.agent_type)
            .or_default()
            .entry(level.label)
            .or_insert((0, Ratio::zero()));
        cell.0 += 1;
        cell.1 += states_per_duel(e);
        *totals.entry(e.agent_type).or_insert(0) += 1;
    }

    let mut rows = BTreeMap::new();
    for (agent_type, by_label) in cells {
        let total = totals[&agent_type] as i64;
        let mut table_rows = Vec::new();
        for label in LevelLabel::TABLE_ORDER {
            let (count, score_sum) = by_label
                .get(&label)
                .copied()
                .unwrap_or((0, Ratio::zero()));
            if label == LevelLabel::Unclassified && count == 0 {
                continue;
            }
            table_rows.push(LevelTableRow {
                label,
                strong_states: label.strong_states(),
                percent_of_pool: Ratio::new(count as i64, total),
                mean_states_per_duel: (count > 0)
                    .then(|| score_sum / Ratio::from_integer(count as i64)),
                count,
            });
        }
        rows.insert(agent_type, table_rows);
    }
    LevelTable { rows }
}

/// Pool-wide mean states won per duel for one agent type, the headline
/// number quoted alongside the level tables.
pub fn mean_states_per_duel(standings: &[StandingsEntry], agent_type: AgentType) -> Option<Ratio<i64>> {
    let mut sum = Ratio::zero();
    let mut n = 0i64;
    for e in standings.iter().filter(|e| e.agent_type == agent_type) {
        sum += states_per_duel(e);
        n += 1;
    }
    (n > 0).then(|| sum / Ratio::from_integer(n))
}

/// Distribution of the final digit of state-level trip counts, per agent
/// type. Each allocation contributes nine observations; shares are exact
/// fractions of 1 and sum to 1 per agent type.
pub fn unit_digit_distribution(
    standings: &[StandingsEntry],
) -> BTreeMap<AgentType, [Ratio<i64>; 10]> {
    let mut counts: BTreeMap<AgentType, [i64; 10]> = BTreeMap::new();
    for e in standings {
        let slot = counts.entry(e.agent_type).or_insert([0; 10]);
        for &t in e.allocation.trips() {
            slot[(t % 10) as usize] += 1;
        }
    }
    counts
        .into_iter()
        .map(|(agent_type, c)| {
            let total: i64 = c.iter().sum();
            let mut shares = [Ratio::zero(); 10];
            for (share, count) in shares.iter_mut().zip(c) {
                *share = Ratio::new(count, total);
            }
            (agent_type, shares)
        })
        .collect()
}

/// Survival curves: for each state, the share of one agent type's pool
/// allocating at least `t` trips there, for `t = 0..=100`.
///
/// Returns `None` when the pool has no strategies of that agent type.
/// Every curve starts at 1 and is non-increasing in `t`.
pub fn survival_curve(
    standings: &[StandingsEntry],
    agent_type: AgentType,
) -> Option<[Vec<Ratio<i64>>; NUM_STATES]> {
    let pool: Vec<&Allocation> = standings
        .iter()
        .filter(|e| e.agent_type == agent_type)
        .map(|e| &e.allocation)
        .collect();
    if pool.is_empty() {
        return None;
    }
    let n = pool.len() as i64;
    Some(std::array::from_fn(|s| {
        (0..=BUDGET as i64)
            .map(|t| {
                let at_least = pool.iter().filter(|a| a.trips()[s] as i64 >= t).count();
                Ratio::new(at_least as i64, n)
            })
            .collect()
    }))
}

/// Which per-instance points a model's average is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PointsBasis {
    /// Round-robin score `S` (wins plus half-ties).
    MatchPoints,
    /// Rank-schedule leaderboard points.
    LeaderboardPoints,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelRow {
    pub model: String,
    /// Mean round-robin score of the model's instances.
    pub avg_match_points: Ratio<i64>,
    /// Mean leaderboard points of the model's instances.
    pub avg_leaderboard_points: Ratio<i64>,
    pub instances: u32,
}

impl ModelRow {
    pub fn average(&self, basis: PointsBasis) -> Ratio<i64> {
        match basis {
            PointsBasis::MatchPoints => self.avg_match_points,
            PointsBasis::LeaderboardPoints => self.avg_leaderboard_points,
        }
    }
}

/// Per-model ranking plus the roster models that fielded no valid instance
/// (they are left out of the rows and surface in a footnote instead).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModelLeaderboard {
    pub basis: PointsBasis,
    pub rows: Vec<ModelRow>,
    pub omitted_models: Vec<String>,
}

/// Averages each model's instance points and ranks models by that average.
///
/// Both points bases are computed for every row; `basis` only picks the
/// sort key. Ties in the average are broken by instance count (more first),
/// then model name. `roster` lists the models that were supposed to
/// compete; roster models with no instance in the standings are reported in
/// `omitted_models`. An empty roster means "whatever appears in the
/// standings".
pub fn model_leaderboard(
    standings: &[StandingsEntry],
    roster: &[String],
    basis: PointsBasis,
) -> ModelLeaderboard {
    struct Acc {
        score_half: i64,
        leaderboard: Ratio<i64>,
        instances: u32,
    }
    let mut by_model: BTreeMap<String, Acc> = BTreeMap::new();
    for e in standings {
        let Some(model) = &e.model else { continue };
        let acc = by_model.entry(model.clone()).or_insert(Acc {
            score_half: 0,
            leaderboard: Ratio::zero(),
            instances: 0,
        });
        acc.score_half += e.score_half as i64;
        acc.leaderboard += e.leaderboard_points;
        acc.instances += 1;
    }

    let mut rows: Vec<ModelRow> = by_model
        .into_iter()
        .map(|(model, acc)| ModelRow {
            model,
            avg_match_points: Ratio::new(acc.score_half, 2 * acc.instances as i64),
            avg_leaderboard_points: acc.leaderboard / Ratio::from_integer(acc.instances as i64),
            instances: acc.instances,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.average(basis)
            .cmp(&a.average(basis))
            .then_with(|| b.instances.cmp(&a.instances))
            .then_with(|| a.model.cmp(&b.model))
    });

    let omitted_models = roster
        .iter()
        .filter(|m| !rows.iter().any(|r| &&r.model == m))
        .cloned()
        .collect();
    ModelLeaderboard {
        basis,
        rows,
        omitted_models,
    }
}
