//! Engine and analysis library for a nine-state resource-allocation
//! tournament: match resolution, round-robin scoring, data ingestion,
//! strategy generators (rule-based and LLM-elicited), descriptive tables,
//! best-response search, and regression tooling.

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod agents;
pub mod analysis;
pub mod game;
pub mod ingestion;
pub mod replay;
pub mod report;
pub mod tournament;

pub use game::{
    resolve_match, validate_allocation, Allocation, MatchResult, Outcome, State, ValidationError,
    BUDGET, NUM_STATES, TOTAL_HALF_VOTES,
};
pub use tournament::{
    aggregate_leaderboard, apply_leaderboard_points, assign_leaderboard_points, compute_standings,
    rank_points, rank_standings, run_round_robin, AgentType, AggregateEntry, MatchTally,
    StandingsEntry, Submission, Tournament, TournamentError,
};
