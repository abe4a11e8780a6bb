use std::fmt;

use serde::{Deserialize, Serialize};

/// Prompt strategies. The first five are the generation operators the
/// scheduler chooses between; `Insight` and `Reset` are used by migration and
/// fusion reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptStrategy {
    E1,
    E2,
    M1,
    M2,
    M3,
    #[serde(rename = "INSIGHT")]
    Insight,
    #[serde(rename = "RESET")]
    Reset,
}

impl PromptStrategy {
    /// Generation operators in tie-breaking order.
    pub const ARMS: [PromptStrategy; 5] =
        [PromptStrategy::E1, PromptStrategy::E2, PromptStrategy::M1, PromptStrategy::M2, PromptStrategy::M3];

    pub fn tag(self) -> &'static str {
        match self {
            PromptStrategy::E1 => "E1",
            PromptStrategy::E2 => "E2",
            PromptStrategy::M1 => "M1",
            PromptStrategy::M2 => "M2",
            PromptStrategy::M3 => "M3",
            PromptStrategy::Insight => "INSIGHT",
            PromptStrategy::Reset => "RESET",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [Self::ARMS.as_slice(), &[PromptStrategy::Insight, PromptStrategy::Reset]]
            .concat()
            .into_iter()
            .find(|s| s.tag().eq_ignore_ascii_case(tag))
    }

    pub fn is_crossover(self) -> bool {
        matches!(self, PromptStrategy::E1 | PromptStrategy::E2)
    }

    pub fn is_mutation(self) -> bool {
        matches!(self, PromptStrategy::M1 | PromptStrategy::M2 | PromptStrategy::M3)
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}
