//! The ten paralinguistic task kinds and their label vocabularies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the ten benchmark task kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Age,
    Gender,
    Emotion,
    Pitch,
    Volume,
    Speed,
    Range,
    Intonation,
    SpeakerId,
    SpeakerCount,
}

impl TaskKind {
    /// All tasks, in report column order.
    pub const ALL: [TaskKind; 10] = [
        TaskKind::Age,
        TaskKind::Gender,
        TaskKind::Emotion,
        TaskKind::Pitch,
        TaskKind::Volume,
        TaskKind::Speed,
        TaskKind::Range,
        TaskKind::Intonation,
        TaskKind::SpeakerId,
        TaskKind::SpeakerCount,
    ];

    /// Tasks whose answer depends on the time direction of the audio. Their
    /// labels and choices must be rewritten when clips are reversed.
    pub fn temporally_dependent(self) -> bool {
        matches!(
            self,
            TaskKind::Pitch
                | TaskKind::Volume
                | TaskKind::Speed
                | TaskKind::Range
                | TaskKind::Intonation
                | TaskKind::SpeakerId
        )
    }

    /// Three-segment signal comparison tasks built from one seed utterance.
    pub fn is_signal_comparison(self) -> bool {
        matches!(self, TaskKind::Pitch | TaskKind::Volume | TaskKind::Speed | TaskKind::Range)
    }

    /// Short display name used in report headers.
    pub fn column_name(self) -> &'static str {
        match self {
            TaskKind::Age => "Age",
            TaskKind::Gender => "Gender",
            TaskKind::Emotion => "Emotion",
            TaskKind::Pitch => "Pitch",
            TaskKind::Volume => "Volume",
            TaskKind::Speed => "Speed",
            TaskKind::Range => "Range",
            TaskKind::Intonation => "Intonation",
            TaskKind::SpeakerId => "SpkID",
            TaskKind::SpeakerCount => "SpkCnt",
        }
    }

    /// The label vocabulary a script may assert for this task, where fixed.
    /// Emotion labels are configured per build; counting labels are numeric.
    pub fn fixed_labels(self) -> Option<&'static [&'static str]> {
        match self {
            TaskKind::Age => Some(&["young", "old"]),
            TaskKind::Gender => Some(&["male", "female"]),
            TaskKind::Pitch | TaskKind::Volume | TaskKind::Speed | TaskKind::Range => {
                Some(&["high", "medium", "low"])
            }
            TaskKind::Intonation => Some(&["rising", "falling"]),
            TaskKind::SpeakerId => Some(&["first", "second", "third", "fourth", "fifth"]),
            TaskKind::Emotion | TaskKind::SpeakerCount => None,
        }
    }

    pub fn parse(name: &str) -> Result<TaskKind> {
        let lowered = name.to_lowercase();
        let norm = lowered.trim();
        TaskKind::ALL
            .into_iter()
            .find(|t| t.snake_name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown task kind: {name}")))
    }

    pub fn snake_name(self) -> &'static str {
        match self {
            TaskKind::Age => "age",
            TaskKind::Gender => "gender",
            TaskKind::Emotion => "emotion",
            TaskKind::Pitch => "pitch",
            TaskKind::Volume => "volume",
            TaskKind::Speed => "speed",
            TaskKind::Range => "range",
            TaskKind::Intonation => "intonation",
            TaskKind::SpeakerId => "speaker_id",
            TaskKind::SpeakerCount => "speaker_count",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.snake_name())
    }
}

/// The six orderings of {low, medium, high} used as comparison answers.
pub const COMPARISON_PATTERNS: [&str; 6] = [
    "low-medium-high",
    "low-high-medium",
    "medium-low-high",
    "medium-high-low",
    "high-low-medium",
    "high-medium-low",
];

/// Reverse a pattern string tokenwise: "low-high-medium" -> "medium-high-low".
pub fn reverse_pattern(pattern: &str) -> Result<String> {
    let parts: Vec<&str> = pattern.split('-').collect();
    if parts.is_empty() || !parts.iter().all(|p| matches!(*p, "low" | "medium" | "high")) {
        return Err(Error::invalid(format!("unknown pattern token in '{pattern}'")));
    }
    Ok(parts.into_iter().rev().collect::<Vec<_>>().join("-"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_ten_tasks_with_expected_temporal_flags() {
        assert_eq!(TaskKind::ALL.len(), 10);
        let temporal: Vec<TaskKind> =
            TaskKind::ALL.into_iter().filter(|t| t.temporally_dependent()).collect();
        assert_eq!(
            temporal,
            vec![
                TaskKind::Pitch,
                TaskKind::Volume,
                TaskKind::Speed,
                TaskKind::Range,
                TaskKind::Intonation,
                TaskKind::SpeakerId,
            ]
        );
    }

    #[test]
    fn pattern_reversal_is_an_involution() {
        for p in COMPARISON_PATTERNS {
            let r = reverse_pattern(p).unwrap();
            assert_eq!(reverse_pattern(&r).unwrap(), p);
        }
        assert_eq!(reverse_pattern("low-high-medium").unwrap(), "medium-high-low");
        assert!(reverse_pattern("low-tall-medium").is_err());
    }

    #[test]
    fn parse_round_trips() {
        for t in TaskKind::ALL {
            assert_eq!(TaskKind::parse(t.snake_name()).unwrap(), t);
        }
        assert!(TaskKind::parse("tempo").is_err());
    }
}
