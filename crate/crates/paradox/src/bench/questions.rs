//! Question phrasing per task. Templates are data: the defaults ship in
//! `data/questions.toml` and a config can point at a replacement file.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::task::TaskKind;
use crate::text;

const DEFAULT_QUESTIONS: &str = include_str!("../../data/questions.toml");

#[derive(Debug, Deserialize)]
struct QuestionFile {
    questions: BTreeMap<String, String>,
}

/// Loaded question templates. The speaker-identity template takes a
/// `{query}` ordinal substitution.
#[derive(Debug, Clone)]
pub struct QuestionTemplates {
    by_task: BTreeMap<TaskKind, String>,
}

impl QuestionTemplates {
    pub fn default_set() -> Self {
        Self::from_toml(DEFAULT_QUESTIONS).expect("bundled question templates parse")
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        let file: QuestionFile =
            toml::from_str(raw).map_err(|e| Error::Format(format!("question templates: {e}")))?;
        let mut by_task = BTreeMap::new();
        for task in TaskKind::ALL {
            let template = file.questions.get(task.snake_name()).ok_or_else(|| {
                Error::Format(format!("question templates missing task '{task}'"))
            })?;
            by_task.insert(task, template.clone());
        }
        Ok(QuestionTemplates { by_task })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn question(&self, task: TaskKind) -> &str {
        &self.by_task[&task]
    }

    /// The speaker-identity question for a 1-based query position.
    pub fn speaker_id_question(&self, query_position: usize) -> Result<String> {
        let ordinal = text::ordinal_word(query_position)
            .ok_or_else(|| Error::invalid(format!("no ordinal for position {query_position}")))?;
        Ok(self.by_task[&TaskKind::SpeakerId].replace("{query}", ordinal))
    }
}

impl Default for QuestionTemplates {
    fn default() -> Self {
        Self::default_set()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_cover_all_tasks() {
        let q = QuestionTemplates::default_set();
        for task in TaskKind::ALL {
            assert!(!q.question(task).is_empty());
        }
        assert!(q.question(TaskKind::Pitch).to_lowercase().contains("pitch"));
    }

    #[test]
    fn speaker_id_question_substitutes_the_query_ordinal() {
        let q = QuestionTemplates::default_set();
        let question = q.speaker_id_question(1).unwrap();
        assert!(question.contains("first"), "{question}");
        assert!(!question.contains("{query}"));
    }

    #[test]
    fn missing_task_in_custom_file_is_an_error() {
        assert!(QuestionTemplates::from_toml("[questions]\nage = \"Q?\"").is_err());
    }
}
