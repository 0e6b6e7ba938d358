//! The Electoral Race game: a discrete Colonel Blotto contest over nine
//! states with a budget of 100 campaign trips.
//!
//! A pure strategy allocates an integer number of trips to each state,
//! spending at most the budget. In a match, each state goes to the side
//! with the larger allocation (ties split the state's vote), and the match
//! winner is the side with more electoral votes.
//!
//! All vote arithmetic is carried in half-vote integer units so that match
//! resolution is exact; fractional votes appear only at presentation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of contested states.
pub const NUM_STATES: usize = 9;

/// Total campaign-trip budget per strategy.
pub const BUDGET: u32 = 100;

/// Total electoral votes at stake, in half-vote units (9 votes).
pub const TOTAL_HALF_VOTES: u8 = 2 * NUM_STATES as u8;

/// One of the nine contested states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum State {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl State {
    pub const ALL: [State; NUM_STATES] = [
        State::A,
        State::B,
        State::C,
        State::D,
        State::E,
        State::F,
        State::G,
        State::H,
        State::I,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<State> {
        State::ALL.get(index).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Why a raw trip vector was rejected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("expected {expected} entries, found {found}", expected = NUM_STATES)]
    WrongArity { found: usize },
    #[error("negative entry {value} in state {state}")]
    NegativeEntry { state: State, value: i64 },
    #[error("entry {value} in state {state} exceeds 100")]
    EntryAbove100 { state: State, value: i64 },
    #[error("total {total} exceeds the budget of {budget}", budget = BUDGET)]
    BudgetExceeded { total: i64 },
}

/// A validated pure strategy: nine trip counts with total at most [`BUDGET`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    trips: [u8; NUM_STATES],
}

impl Allocation {
    /// Validates a raw trip vector. The returned allocation is bit-identical
    /// to the input; sub-budget totals are accepted unchanged.
    pub fn new(raw: &[i64]) -> Result<Allocation, ValidationError> {
        validate_allocation(raw)
    }

    pub fn trips(&self) -> &[u8; NUM_STATES] {
        &self.trips
    }

    pub fn trip(&self, state: State) -> u8 {
        self.trips[state.index()]
    }

    pub fn total(&self) -> u32 {
        self.trips.iter().map(|&t| t as u32).sum()
    }

    /// Number of states allocated strictly more than 11 trips. This is the
    /// raw statistic behind the reasoning-level taxonomy.
    pub fn strong_state_count(&self) -> u8 {
        self.trips.iter().filter(|&&t| t > 11).count() as u8
    }
}

impl std::fmt::Display for Allocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, t) in self.trips.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// Checks arity, per-state bounds (first offending state wins), then the
/// budget, and returns the allocation unchanged if all hold.
pub fn validate_allocation(raw: &[i64]) -> Result<Allocation, ValidationError> {
    if raw.len() != NUM_STATES {
        return Err(ValidationError::WrongArity { found: raw.len() });
    }
    let mut trips = [0u8; NUM_STATES];
    for (i, &value) in raw.iter().enumerate() {
        let state = State::from_index(i).expect("index in range");
        if value < 0 {
            return Err(ValidationError::NegativeEntry { state, value });
        }
        if value > 100 {
            return Err(ValidationError::EntryAbove100 { state, value });
        }
        trips[i] = value as u8;
    }
    let total: i64 = raw.iter().sum();
    if total > BUDGET as i64 {
        return Err(ValidationError::BudgetExceeded { total });
    }
    Ok(Allocation { trips })
}

/// Outcome of a state contest or of a whole match, from A's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    WinA,
    WinB,
    Tie,
}

impl Outcome {
    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::WinA => Outcome::WinB,
            Outcome::WinB => Outcome::WinA,
            Outcome::Tie => Outcome::Tie,
        }
    }
}

/// Resolved match between two allocations.
///
/// Votes are stored in half-vote units: a won state contributes 2, a tied
/// state contributes 1 to each side, so `half_votes_a + half_votes_b == 18`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchResult {
    half_votes_a: u8,
    per_state: [Outcome; NUM_STATES],
}

impl MatchResult {
    /// Electoral votes per side in half-vote units.
    pub fn half_votes(&self) -> (u8, u8) {
        (self.half_votes_a, TOTAL_HALF_VOTES - self.half_votes_a)
    }

    pub fn votes_a(&self) -> f64 {
        self.half_votes_a as f64 / 2.0
    }

    pub fn votes_b(&self) -> f64 {
        (TOTAL_HALF_VOTES - self.half_votes_a) as f64 / 2.0
    }

    pub fn per_state(&self) -> &[Outcome; NUM_STATES] {
        &self.per_state
    }

    pub fn outcome(&self) -> Outcome {
        match self.half_votes_a.cmp(&(TOTAL_HALF_VOTES / 2)) {
            std::cmp::Ordering::Greater => Outcome::WinA,
            std::cmp::Ordering::Less => Outcome::WinB,
            std::cmp::Ordering::Equal => Outcome::Tie,
        }
    }
}

/// Plays one Electoral Race match: state by state, the larger allocation
/// wins; equal allocations tie the state.
pub fn resolve_match(a: &Allocation, b: &Allocation) -> MatchResult {
    let mut half_votes_a = 0u8;
    let mut per_state = [Outcome::Tie; NUM_STATES];
    for i in 0..NUM_STATES {
        let (ta, tb) = (a.trips[i], b.trips[i]);
        per_state[i] = match ta.cmp(&tb) {
            std::cmp::Ordering::Greater => {
                half_votes_a += 2;
                Outcome::WinA
            }
            std::cmp::Ordering::Less => Outcome::WinB,
            std::cmp::Ordering::Equal => {
                half_votes_a += 1;
                Outcome::Tie
            }
        };
    }
    MatchResult {
        half_votes_a,
        per_state,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn alloc(raw: [i64; 9]) -> Allocation {
        validate_allocation(&raw).expect("valid allocation")
    }

    #[test]
    fn near_uniform_is_valid_at_full_budget() {
        let a = validate_allocation(&[12, 11, 11, 11, 11, 11, 11, 11, 11]).unwrap();
        assert_eq!(a.total(), 100);
        assert_eq!(a.trip(State::A), 12);
    }

    #[test]
    fn all_zero_is_valid() {
        let a = validate_allocation(&[0; 9]).unwrap();
        assert_eq!(a.total(), 0);
    }

    #[test]
    fn budget_violation_reports_total() {
        let err = validate_allocation(&[50, 51, 0, 0, 0, 0, 0, 0, 0]).unwrap_err();
        assert_eq!(err, ValidationError::BudgetExceeded { total: 101 });
    }

    #[test]
    fn first_offending_state_is_named() {
        let err = validate_allocation(&[0, -1, -5, 0, 0, 0, 0, 0, 0]).unwrap_err();
        assert_eq!(
            err,
            ValidationError::NegativeEntry {
                state: State::B,
                value: -1
            }
        );
        let err = validate_allocation(&[0, 0, 0, 101, 0, 0, 0, 0, 200]).unwrap_err();
        assert_eq!(
            err,
            ValidationError::EntryAbove100 {
                state: State::D,
                value: 101
            }
        );
    }

    #[test]
    fn wrong_arity_rejected() {
        assert_eq!(
            validate_allocation(&[1; 8]).unwrap_err(),
            ValidationError::WrongArity { found: 8 }
        );
        assert_eq!(
            validate_allocation(&[1; 10]).unwrap_err(),
            ValidationError::WrongArity { found: 10 }
        );
    }

    #[test]
    fn entry_bound_checked_before_budget() {
        // A single entry above 100 also blows the budget; the entry error wins.
        let err = validate_allocation(&[150, 0, 0, 0, 0, 0, 0, 0, 0]).unwrap_err();
        assert_eq!(
            err,
            ValidationError::EntryAbove100 {
                state: State::A,
                value: 150
            }
        );
    }

    #[test]
    fn self_match_is_a_full_tie() {
        let x = alloc([4, 13, 3, 17, 21, 3, 21, 5, 13]);
        let r = resolve_match(&x, &x);
        assert_eq!(r.half_votes(), (9, 9));
        assert_eq!(r.outcome(), Outcome::Tie);
        assert!(r.per_state().iter().all(|&s| s == Outcome::Tie));
    }

    #[test]
    fn top_two_tournament_one_strategies() {
        // Hand-resolved pair: A wins states A, G, I; C and D tie.
        let a = alloc([4, 13, 3, 17, 21, 3, 21, 5, 13]);
        let b = alloc([3, 16, 3, 17, 22, 17, 3, 16, 3]);
        let r = resolve_match(&a, &b);
        assert_eq!(r.votes_a(), 4.0);
        assert_eq!(r.votes_b(), 5.0);
        assert_eq!(r.outcome(), Outcome::WinB);
        assert_eq!(r.per_state()[State::A.index()], Outcome::WinA);
        assert_eq!(r.per_state()[State::C.index()], Outcome::Tie);
        assert_eq!(r.per_state()[State::D.index()], Outcome::Tie);
        assert_eq!(r.per_state()[State::G.index()], Outcome::WinA);
        assert_eq!(r.per_state()[State::I.index()], Outcome::WinA);
    }

    #[test]
    fn concentration_loses_to_near_uniform() {
        let a = alloc([100, 0, 0, 0, 0, 0, 0, 0, 0]);
        let b = alloc([12, 11, 11, 11, 11, 11, 11, 11, 11]);
        let r = resolve_match(&a, &b);
        assert_eq!(r.votes_a(), 1.0);
        assert_eq!(r.votes_b(), 8.0);
        assert_eq!(r.outcome(), Outcome::WinB);
    }

    prop_compose! {
        /// Any valid allocation, with bias toward spending most of the budget.
        pub(crate) fn arb_allocation()(cut in proptest::collection::vec(0u32..=100, 9), spend in 0u32..=100) -> Allocation {
            // Distribute `spend` trips proportionally to random weights, rounding down.
            let total: u32 = cut.iter().sum::<u32>().max(1);
            let raw: Vec<i64> = cut.iter().map(|&w| ((w as u64 * spend as u64) / total as u64) as i64).collect();
            validate_allocation(&raw).expect("within budget by construction")
        }
    }

    proptest! {
        #[test]
        fn votes_always_conserved(a in arb_allocation(), b in arb_allocation()) {
            let r = resolve_match(&a, &b);
            let (ha, hb) = r.half_votes();
            prop_assert_eq!(ha + hb, TOTAL_HALF_VOTES);
        }

        #[test]
        fn antisymmetric_under_swap(a in arb_allocation(), b in arb_allocation()) {
            let r = resolve_match(&a, &b);
            let s = resolve_match(&b, &a);
            prop_assert_eq!(r.half_votes().0, s.half_votes().1);
            prop_assert_eq!(r.outcome(), s.outcome().flipped());
            for i in 0..NUM_STATES {
                prop_assert_eq!(r.per_state()[i], s.per_state()[i].flipped());
            }
        }

        #[test]
        fn extra_trip_never_hurts(a in arb_allocation(), b in arb_allocation(), idx in 0usize..9) {
            prop_assume!(a.total() < BUDGET && a.trips()[idx] < 100);
            let mut raw: Vec<i64> = a.trips().iter().map(|&t| t as i64).collect();
            raw[idx] += 1;
            let bumped = validate_allocation(&raw).unwrap();
            let before = resolve_match(&a, &b).half_votes().0;
            let after = resolve_match(&bumped, &b).half_votes().0;
            prop_assert!(after >= before);
        }
    }
}
