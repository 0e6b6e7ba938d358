//! Seeded input generators shared by the benchmarks: realistic submission
//! pools and regression records of arbitrary size.

use chrono::{TimeZone, Utc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use blotto_core::analysis::regression::RegressionRecord;
use blotto_core::analysis::LevelLabel;
use blotto_core::ingestion::{Education, Employment, FieldOfStudy};
use blotto_core::{validate_allocation, AgentType, Allocation, Submission, Tournament, BUDGET, NUM_STATES};

/// A random full-budget allocation drawn by stick-breaking, the shape that
/// dominates real pools.
pub fn random_allocation(rng: &mut impl Rng) -> Allocation {
    let mut trips = [0i64; NUM_STATES];
    let mut left = BUDGET as i64;
    for slot in trips.iter_mut().take(NUM_STATES - 1) {
        *slot = rng.random_range(0..=left);
        left -= *slot;
    }
    trips[NUM_STATES - 1] = left;
    trips.shuffle(rng);
    validate_allocation(&trips).expect("stick-breaking stays within budget")
}

/// `n` human submissions to tournament 1 with distinct ids.
pub fn random_pool(n: usize, seed: u64) -> Vec<Submission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Utc.with_ymd_and_hms(2025, 5, 1, 8, 0, 0).unwrap();
    (0..n)
        .map(|i| Submission {
            submission_id: format!("s{i:04}"),
            participant_id: format!("p{i:04}"),
            tournament: Tournament::T1,
            agent_type: AgentType::Human,
            model: None,
            timestamp: base + chrono::Duration::seconds(i as i64),
            allocation: random_allocation(&mut rng),
        })
        .collect()
}

/// `n` synthetic regression records covering every category.
pub fn random_records(n: usize, seed: u64) -> Vec<RegressionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [
        LevelLabel::L0,
        LevelLabel::L1,
        LevelLabel::L2,
        LevelLabel::L3,
        LevelLabel::L4,
        LevelLabel::L5Plus4,
    ];
    let educations = [Education::Secondary, Education::Higher, Education::Doctoral];
    let employments = [Employment::Student, Employment::Working, Employment::NotWorking];
    let fields = [FieldOfStudy::Stem, FieldOfStudy::EconManagement, FieldOfStudy::HumSocOther];
    (0..n)
        .map(|i| {
            let level = *levels.choose(&mut rng).expect("non-empty");
            RegressionRecord {
                participant_id: format!("p{i:04}"),
                points: rng.random_range(40.0..260.0),
                level,
                age: rng.random_range(16.0..60.0),
                female: rng.random_bool(0.5),
                education: *educations.choose(&mut rng).expect("non-empty"),
                field: *fields.choose(&mut rng).expect("non-empty"),
                employment: *employments.choose(&mut rng).expect("non-empty"),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_pool(5, 9), random_pool(5, 9));
        let a = random_records(5, 9);
        let b = random_records(5, 9);
        assert_eq!(a.len(), b.len());
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.participant_id == y.participant_id && x.points == y.points));
    }

    #[test]
    fn pool_spends_the_full_budget() {
        for sub in random_pool(20, 3) {
            let total: u32 = sub.allocation.trips().iter().map(|&t| t as u32).sum();
            assert_eq!(total, BUDGET);
        }
    }
}
