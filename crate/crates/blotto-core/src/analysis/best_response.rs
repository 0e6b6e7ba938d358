//! Best response against a fixed opponent pool under the states-won
//! objective, which separates across states and therefore yields to a
//! budget knapsack.

use num_rational::Ratio;

use crate::game::{Allocation, BUDGET, NUM_STATES};

/// An optimal allocation together with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub allocation: Allocation,
    /// Expected states won per duel against a pool member drawn uniformly,
    /// ties counting half.
    pub expected_states: Ratio<i64>,
}

/// Knapsack solver shared by the real game and the small test instances.
///
/// `values[s][t]` is the (integer) payoff of putting `t` trips on state
/// `s`, summed over the pool; the solver maximizes the total over states
/// subject to `Σ t_s ≤ budget`. Returns the lexicographically smallest
/// optimal allocation, found by scanning each state's trip counts in
/// ascending order during reconstruction, and the optimal total.
fn knapsack_lex_min(values: &[Vec<i64>], budget: usize) -> (Vec<u32>, i64) {
    let num_states = values.len();
    // best[s][b]: optimal payoff from states s.. with b trips left.
    let mut best = vec![vec![0i64; budget + 1]; num_states + 1];
    for s in (0..num_states).rev() {
        for b in 0..=budget {
            best[s][b] = (0..=b)
                .map(|t| values[s][t] + best[s + 1][b - t])
                .max()
                .expect("non-empty range");
        }
    }

    let mut chosen = Vec::with_capacity(num_states);
    let mut b = budget;
    for s in 0..num_states {
        let t = (0..=b)
            .find(|&t| values[s][t] + best[s + 1][b - t] == best[s][b])
            .expect("reconstruction must reach the optimum");
        chosen.push(t as u32);
        b -= t;
    }
    (chosen, best[0][budget])
}

/// Per-state payoff table against `pool`, in half-state units: beating an
/// opponent's count earns 2, matching it earns 1.
fn value_tables(num_states: usize, budget: usize, pool: &[Vec<u32>]) -> Vec<Vec<i64>> {
    (0..num_states)
        .map(|s| {
            (0..=budget as u32)
                .map(|t| {
                    pool.iter()
                        .map(|opp| match t.cmp(&opp[s]) {
                            std::cmp::Ordering::Greater => 2i64,
                            std::cmp::Ordering::Equal => 1,
                            std::cmp::Ordering::Less => 0,
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Best response on an arbitrary instance size; pool entries must all have
/// `num_states` counts. Exposed at this granularity so tests can pit the
/// dynamic program against exhaustive search on small instances.
pub fn best_response_generic(
    num_states: usize,
    budget: usize,
    pool: &[Vec<u32>],
) -> Option<(Vec<u32>, Ratio<i64>)> {
    if pool.is_empty() {
        return None;
    }
    debug_assert!(pool.iter().all(|o| o.len() == num_states));
    let values = value_tables(num_states, budget, pool);
    let (chosen, total_half) = knapsack_lex_min(&values, budget);
    Some((chosen, Ratio::new(total_half, 2 * pool.len() as i64)))
}

/// Maximizes expected states won per duel against the pool, over all valid
/// allocations. Returns `None` for an empty pool.
pub fn best_response_expected_states(pool: &[Allocation]) -> Option<BestResponse> {
    let raw: Vec<Vec<u32>> = pool
        .iter()
        .map(|a| a.trips().iter().map(|&t| t as u32).collect())
        .collect();
    let (chosen, expected_states) = best_response_generic(NUM_STATES, BUDGET as usize, &raw)?;
    let trips: Vec<i64> = chosen.iter().map(|&t| t as i64).collect();
    let allocation = crate::game::validate_allocation(&trips)
        .expect("knapsack respects the budget and entry bounds");
    Some(BestResponse {
        allocation,
        expected_states,
    })
}

/// Exhaustive maximizer over all full-budget compositions, for
/// cross-checking the dynamic program on small instances. Spending less
/// than the full budget never helps (payoffs are monotone in trips), so
/// full-spend enumeration finds the optimal value.
pub fn exhaustive_best_value(num_states: usize, budget: usize, pool: &[Vec<u32>]) -> Ratio<i64> {
    assert!(!pool.is_empty());
    let values = value_tables(num_states, budget, pool);
    let mut best = i64::MIN;
    let mut current = vec![0u32; num_states];
    fn recurse(
        values: &[Vec<i64>],
        current: &mut Vec<u32>,
        s: usize,
        left: usize,
        acc: i64,
        best: &mut i64,
    ) {
        if s + 1 == current.len() {
            current[s] = left as u32;
            *best = (*best).max(acc + values[s][left]);
            return;
        }
        for t in 0..=left {
            current[s] = t as u32;
            recurse(values, current, s + 1, left - t, acc + values[s][t], best);
        }
    }
    recurse(&values, &mut current, 0, budget, 0, &mut best);
    Ratio::new(best, 2 * pool.len() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::alloc;
    use proptest::prelude::*;

    #[test]
    fn one_trip_everywhere_beats_the_zero_strategy() {
        let pool = vec![alloc([0; 9])];
        let br = best_response_expected_states(&pool).unwrap();
        assert_eq!(br.expected_states, Ratio::from_integer(9));
        assert_eq!(br.allocation.trips(), &[1u8; 9]);
    }

    #[test]
    fn near_uniform_opponent_caps_at_eight_states() {
        let pool = vec![alloc([12, 11, 11, 11, 11, 11, 11, 11, 11])];
        let br = best_response_expected_states(&pool).unwrap();
        assert_eq!(br.expected_states, Ratio::from_integer(8));
        // Lexicographic minimum sacrifices state A, the one costing 13.
        assert_eq!(br.allocation.trips(), &[0, 12, 12, 12, 12, 12, 12, 12, 12]);
    }

    #[test]
    fn empty_pool_has_no_response() {
        assert!(best_response_expected_states(&[]).is_none());
        assert!(best_response_generic(3, 5, &[]).is_none());
    }

    #[test]
    fn small_instance_matches_exhaustive_search() {
        let pool = vec![vec![2, 2, 2]];
        let (_, value) = best_response_generic(3, 6, &pool).unwrap();
        assert_eq!(value, exhaustive_best_value(3, 6, &pool));
        // Beating two of three twos costs 6; the third state is lost.
        assert_eq!(value, Ratio::from_integer(2));
    }

    #[test]
    fn reported_value_matches_replay_of_the_allocation() {
        let pool = vec![
            alloc([4, 13, 3, 17, 21, 3, 21, 5, 13]),
            alloc([3, 16, 3, 17, 22, 17, 3, 16, 3]),
            alloc([11, 11, 11, 11, 11, 11, 11, 11, 12]),
        ];
        let br = best_response_expected_states(&pool).unwrap();
        let total_half: i64 = pool
            .iter()
            .map(|opp| crate::game::resolve_match(&br.allocation, opp).half_votes().0 as i64)
            .sum();
        assert_eq!(br.expected_states, Ratio::new(total_half, 2 * pool.len() as i64));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn dp_equals_exhaustive_on_small_instances(
            num_states in 1usize..=3,
            budget in 0usize..=8,
            pool in proptest::collection::vec(proptest::collection::vec(0u32..=8, 3), 1..=3),
        ) {
            let pool: Vec<Vec<u32>> = pool
                .into_iter()
                .map(|mut opp| { opp.truncate(num_states); opp })
                .collect();
            let (chosen, value) = best_response_generic(num_states, budget, &pool).unwrap();
            prop_assert_eq!(value, exhaustive_best_value(num_states, budget, &pool));
            prop_assert!(chosen.iter().map(|&t| t as usize).sum::<usize>() <= budget);
        }

        #[test]
        fn best_response_is_at_least_as_good_as_any_pool_member(
            allocs in proptest::collection::vec(crate::game::tests::arb_allocation(), 1..6)
        ) {
            let br = best_response_expected_states(&allocs).unwrap();
            for candidate in &allocs {
                let total_half: i64 = allocs
                    .iter()
                    .map(|opp| crate::game::resolve_match(candidate, opp).half_votes().0 as i64)
                    .sum();
                let candidate_value = Ratio::new(total_half, 2 * allocs.len() as i64);
                prop_assert!(br.expected_states >= candidate_value);
            }
        }
    }
}
