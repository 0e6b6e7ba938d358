//! The elicitation prompts sent to language models.
//!
//! The prompt text is a wire contract: validation downstream assumes models
//! saw exactly these bytes, so the strings here must never be reflowed or
//! "fixed up". The two tournament variants share everything except the
//! paragraph describing the opponent pool.

use std::sync::LazyLock;

use crate::tournament::Tournament;

/// Which user-prompt variant to send. Only the two mixed human/LLM
/// tournaments elicit strategies from models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PromptVariant {
    T2,
    T3,
}

impl PromptVariant {
    pub fn for_tournament(t: Tournament) -> Option<PromptVariant> {
        match t {
            Tournament::T1 => None,
            Tournament::T2 => Some(PromptVariant::T2),
            Tournament::T3 => Some(PromptVariant::T3),
        }
    }

    pub fn tournament(self) -> Tournament {
        match self {
            PromptVariant::T2 => Tournament::T2,
            PromptVariant::T3 => Tournament::T3,
        }
    }
}

pub const SYSTEM_MESSAGE: &str = "You are a tournament participant. Reply ONLY with a JSON object strictly following this schema:\n\n{\"A\": <int>, \"B\": <int>, \"C\": <int>, \"D\": <int>, \"E\": <int>, \"F\": <int>, \"G\": <int>, \"H\": <int>, \"I\": <int>, \"total\": <int \u{2264} 100>, \"explanation\": <string in Russian>}\n\nThe total number of trips must be \u{2264} 100. Do not add any text, any symbols outside the JSON object, or any Markdown.";

const USER_HEAD: &str = "A tournament in the game \"Pre-Election Race\" is being conducted. The rules of a one-shot game of \"Pre-Election Race\" are given below:\n\n1. Two candidates compete for the presidency of a fictional overseas country.\n\n2. The overseas country has 9 states: A, B, C, D, E, F, G, H, I.\n\n3. Each candidate has resources for 100 campaign trips.\n\n4. Each of the two candidates simultaneously and independently decides how many times and to which states to travel. Each state may be visited any integer number of times from 0 to 100.\n\n5. In each state, the candidate who visited that state more times wins. For winning each of the 9 states, the candidate receives 1 electoral vote. If the candidates visited a given state the same number of times, the election in that state ends in a tie, and both players receive 0.5 electoral votes.\n\n6. The president is the candidate who receives more electoral votes. The winner receives 1 point. If the candidates receive the same number of electoral votes, each receives 0.5 points.\n\nYou are one of the candidates. Please indicate, for each of the nine states A, B, C, D, E, F, G, H, I, how many trips you will make to that state. In total, you may make no more than 100 trips.\n\nAll strategies entered into the tournament will play against one another in a round-robin format, that is, each strategy will play exactly one match against every other strategy. In the final tournament table, strategies are ranked by the total number of points earned across all presidential races.";

const OPPONENTS_T2: &str = "In this tournament, your opponents will include both strategies submitted by other people and one strategy from each of several popular modern large language models. We expect several hundred human strategies and 5\u{2013}10 strategies from different large language models. Your goal is to score as many points as possible across all presidential races and thereby finish as high as possible in the tournament standings.";

const OPPONENTS_T3: &str = "In this tournament, your opponents will include both strategies submitted by other people and strategies from several popular modern large language models. We expect several hundred human strategies and approximately the same number of strategies from different large language models. Your goal is to score as many points as possible across all presidential races and thereby finish as high as possible in the tournament standings.";

const USER_TAIL: &str = "In your answer, you must also provide a justification for your decision.\n\nRequired response format:\n\n{\"A\": <number of trips>, \"B\": <number of trips>, \"C\": <number of trips>, \"D\": <number of trips>, \"E\": <number of trips>, \"F\": <number of trips>, \"G\": <number of trips>, \"H\": <number of trips>, \"I\": <number of trips>, \"total\": <sum of all trips, \u{2264} 100>, \"explanation\": <why this allocation of trips was chosen>}";

static USER_T2: LazyLock<String> =
    LazyLock::new(|| format!("{USER_HEAD}\n\n{OPPONENTS_T2}\n\n{USER_TAIL}"));
static USER_T3: LazyLock<String> =
    LazyLock::new(|| format!("{USER_HEAD}\n\n{OPPONENTS_T3}\n\n{USER_TAIL}"));

/// A complete prompt pair per tournament variant. The default set is the
/// published English text; an alternate set (for example the original
/// survey language) can be supplied through configuration.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PromptSet {
    pub system: String,
    pub user_t2: String,
    pub user_t3: String,
}

impl PromptSet {
    pub fn builtin() -> PromptSet {
        PromptSet {
            system: SYSTEM_MESSAGE.to_string(),
            user_t2: USER_T2.clone(),
            user_t3: USER_T3.clone(),
        }
    }

    pub fn user_prompt(&self, variant: PromptVariant) -> &str {
        match variant {
            PromptVariant::T2 => &self.user_t2,
            PromptVariant::T3 => &self.user_t3,
        }
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_differ_only_in_the_opponent_paragraph() {
        let set = PromptSet::builtin();
        let t2: Vec<&str> = set.user_t2.split("\n\n").collect();
        let t3: Vec<&str> = set.user_t3.split("\n\n").collect();
        assert_eq!(t2.len(), t3.len());
        let differing: Vec<usize> = (0..t2.len()).filter(|&i| t2[i] != t3[i]).collect();
        assert_eq!(differing.len(), 1);
        assert!(t2[differing[0]].starts_with("In this tournament, your opponents"));
    }

    #[test]
    fn system_message_is_shared_and_strict() {
        let set = PromptSet::builtin();
        assert!(set.system.starts_with("You are a tournament participant."));
        assert!(set.system.contains("Reply ONLY with a JSON object"));
        assert!(set.system.ends_with("or any Markdown."));
    }

    #[test]
    fn budget_bound_uses_the_comparison_sign() {
        let set = PromptSet::builtin();
        for text in [&set.system, &set.user_t2, &set.user_t3] {
            assert!(text.contains("\u{2264} 100"));
        }
    }

    #[test]
    fn response_schema_lists_all_nine_states() {
        let set = PromptSet::builtin();
        for letter in ["\"A\"", "\"B\"", "\"C\"", "\"D\"", "\"E\"", "\"F\"", "\"G\"", "\"H\"", "\"I\""]
        {
            assert!(set.system.contains(letter));
            assert!(set.user_t2.contains(letter));
        }
        assert!(set.user_t2.contains("\"total\""));
        assert!(set.user_t2.contains("\"explanation\""));
    }

    #[test]
    fn variant_maps_to_its_tournament() {
        assert_eq!(PromptVariant::for_tournament(Tournament::T1), None);
        assert_eq!(
            PromptVariant::for_tournament(Tournament::T2),
            Some(PromptVariant::T2)
        );
        assert_eq!(PromptVariant::T3.tournament(), Tournament::T3);
    }
}
