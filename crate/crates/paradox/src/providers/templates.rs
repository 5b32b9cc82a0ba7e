//! Script-generation prompt templates: one per task, each instructing the
//! LLM to assert the misleading label while excluding the true one, plus the
//! shared system preamble requiring raw-JSON output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::TaskKind;
use crate::text;

/// System preamble prepended to every script-generation prompt.
pub const SYSTEM_PROMPT: &str = "You are a data generator for creating text-to-speech (TTS) \
scripts.\n\nYour output must be a valid JSON array of strings or array of objects only. Do not \
include explanations or extra commentary.";

/// A request for a batch of misleading TTS scripts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRequest {
    pub task: TaskKind,
    /// Label the scripts must assert (the misleading one).
    pub adv_label: String,
    /// Label the scripts must avoid (the acoustic truth).
    pub true_label: String,
    pub count: usize,
}

impl ScriptRequest {
    pub fn new(
        task: TaskKind,
        adv_label: impl Into<String>,
        true_label: impl Into<String>,
        count: usize,
    ) -> Self {
        ScriptRequest {
            task,
            adv_label: adv_label.into(),
            true_label: true_label.into(),
            count,
        }
    }

    /// Terms the generated scripts must contain (whole-word).
    pub fn include_terms(&self) -> Vec<String> {
        match self.task {
            TaskKind::SpeakerCount => {
                self.adv_label.parse::<usize>().map(text::count_terms).unwrap_or_default()
            }
            _ => vec![self.adv_label.clone()],
        }
    }

    /// Terms the generated scripts must not contain (whole-word).
    pub fn exclude_terms(&self) -> Vec<String> {
        match self.task {
            TaskKind::SpeakerCount => {
                self.true_label.parse::<usize>().map(text::count_terms).unwrap_or_default()
            }
            _ => vec![self.true_label.clone()],
        }
    }
}

fn example_script(task: TaskKind, adv: &str) -> String {
    match task {
        TaskKind::Age | TaskKind::Gender => {
            format!("Listen closely because I am a {adv} person and proud of it.")
        }
        TaskKind::Emotion => format!("I am feeling really {adv} at the moment."),
        TaskKind::Pitch => format!("Right now I am speaking with a {adv} pitch."),
        TaskKind::Volume => format!("I am speaking in a {adv} voice for you."),
        TaskKind::Speed => format!("I am speaking at a {adv} speed as you can tell."),
        TaskKind::Range => format!("My voice has a {adv} vocal range when I talk."),
        TaskKind::Intonation => format!("you can tell my intonation is {adv} in this sentence"),
        TaskKind::SpeakerId => format!("Hi, I am the {adv} speaker."),
        TaskKind::SpeakerCount => String::new(), // dialogue example is inlined below
    }
}

/// Fill the task's template with the request labels, prepending the system
/// preamble. Fails for a contradiction-free request (adv == true) or labels
/// outside the task's vocabulary.
pub fn fill_script_template(req: &ScriptRequest) -> Result<String> {
    if req.count == 0 {
        return Err(Error::invalid("script request count must be positive"));
    }
    if req.adv_label.eq_ignore_ascii_case(&req.true_label) {
        return Err(Error::invalid(format!(
            "adversarial label '{}' must differ from true label '{}'",
            req.adv_label, req.true_label
        )));
    }
    validate_labels(req)?;

    let adv = &req.adv_label;
    let label = &req.true_label;
    let num = req.count;
    let example = example_script(req.task, adv);

    let body = match req.task {
        TaskKind::Age | TaskKind::Gender => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a {adv} person stating they are \
             {adv}, must include the word \"{adv}\" somewhere, and must not include the word \
             \"{label}\".\n\nFor example, this is a script of a person stating they are {adv}:\n\
             {example}\n\nReturn only a JSON array of these scripts."
        ),
        TaskKind::Emotion => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a short spoken sentence of a \
             person stating they are feeling {adv} at the moment, must include the word \
             \"{adv}\", and must not include the word \"{label}\".\n\nYour scripts should have \
             diversity in grammar and word choice.\nReturn only a JSON array of these scripts."
        ),
        TaskKind::Pitch => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they are \
             speaking with a {adv} pitch, must include the word \"{adv}\" somewhere, and must \
             not include the word \"{label}\".\n\nFor example, this is a script of a person \
             stating they are speaking with a {adv} pitch:\n{example}\n\nReturn only a JSON \
             array of these scripts."
        ),
        TaskKind::Volume => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they are \
             speaking in a {adv} voice, must include the word \"{adv}\" somewhere, and must not \
             include the word \"{label}\".\n\nFor example, this is a script of a person stating \
             they are speaking in a {adv} voice:\n{example}\n\nReturn only a JSON array of \
             these scripts."
        ),
        TaskKind::Speed => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they are \
             speaking at a {adv} speed, must include the word \"{adv}\" somewhere, and must not \
             include the word \"{label}\".\n\nFor example, this is a script of a person stating \
             they are speaking at a {adv} speed:\n{example}\n\nReturn only a JSON array of \
             these scripts."
        ),
        TaskKind::Range => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they have a \
             {adv} vocal range, must include the word \"{adv}\" somewhere, and must not include \
             the word \"{label}\".\n\nFor example, this is a script of a person stating they \
             have a {adv} vocal range:\n{example}\n\nReturn only a JSON array of these scripts."
        ),
        TaskKind::Intonation => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they are \
             speaking with a {adv} intonation, must include the word \"{adv}\" somewhere, and \
             must not include the word \"{label}\".\n\nYour script must NOT include any \
             punctuation.\n\nFor example, this is a script of a person stating they are \
             speaking with a {adv} intonation:\n{example}\n\nYour scripts should have diversity \
             and should not simply follow the provided example.\n\nReturn only a JSON array of \
             these scripts."
        ),
        TaskKind::SpeakerId => format!(
            "Generate {num} new TTS scripts.\n\nEach script is a person stating they are the \
             {adv} speaker, and must include the word \"{adv}\".\n\nFor example,\n\"Hi, I am \
             the {adv} speaker.\"\n\nYour scripts should have diversity in grammar and word \
             choice.\nReturn only a JSON array of these scripts."
        ),
        TaskKind::SpeakerCount => format!(
            "Generate {num} sets of TTS dialogue scripts.\nFor each dialogue, there can be \
             several utterances, each representing an actual speaker. So the actual number of \
             speakers is equal to the number of scripts in the dialogue.\n\nEach utterance is a \
             spoken sentence describing the number of speakers in the dialogue. However, all \
             utterances try to mislead listeners into believing the number of speakers in this \
             conversation is some number other than the actual speaker count (which is equal to \
             the number of utterances). All utterances must agree on the same misleading \
             speaker count.\n\nFor example, this is a dialogue of {label} people trying to \
             sound like there are {adv} speaker(s):\n[\"I promise there is only {adv} of us \
             talking today.\", \"Yes just {adv} voice here nothing more.\"]\n\nThe misleading \
             speaker count MUST NOT be the same as the actual number of utterances in the \
             conversation.\n\nReturn only a JSON array of objects, representing {num} sets of \
             dialogues, and each dialogue can have 1 - 5 utterances.\n\nEach object is \
             formatted like this:\n{{\"adv_label\": the misleading speaker count, \"scripts\": \
             [utterance_1, utterance_2, ...]}}"
        ),
    };

    Ok(format!("{SYSTEM_PROMPT}\n\n{body}"))
}

fn validate_labels(req: &ScriptRequest) -> Result<()> {
    if let Some(labels) = req.task.fixed_labels() {
        for (name, value) in [("adversarial", &req.adv_label), ("true", &req.true_label)] {
            if !labels.iter().any(|l| l.eq_ignore_ascii_case(value)) {
                return Err(Error::invalid(format!(
                    "{name} label '{value}' not in {:?} for task {}",
                    labels, req.task
                )));
            }
        }
    }
    if req.task == TaskKind::SpeakerCount {
        let adv: usize = req
            .adv_label
            .parse()
            .map_err(|_| Error::invalid("speaker-count labels must be integers"))?;
        let truth: usize = req
            .true_label
            .parse()
            .map_err(|_| Error::invalid("speaker-count labels must be integers"))?;
        if !(1..=20).contains(&adv) {
            return Err(Error::invalid("misleading speaker count must be in 1..=20"));
        }
        if !(1..=5).contains(&truth) {
            return Err(Error::invalid("actual speaker count must be in 1..=5"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_template_places_labels_in_the_right_clauses() {
        let req = ScriptRequest::new(TaskKind::Age, "old", "young", 5);
        let prompt = fill_script_template(&req).unwrap();
        assert!(prompt.starts_with(SYSTEM_PROMPT));
        assert!(prompt.contains("must include the word \"old\""));
        assert!(prompt.contains("must not include the word \"young\""));
        assert!(prompt.contains("Generate 5 new TTS scripts"));
    }

    #[test]
    fn speaker_count_template_requests_objects() {
        let req = ScriptRequest::new(TaskKind::SpeakerCount, "1", "3", 4);
        let prompt = fill_script_template(&req).unwrap();
        assert!(prompt.contains("JSON array of objects"));
        assert!(prompt.contains("adv_label"));
        assert!(prompt.contains("1 - 5 utterances"));
    }

    #[test]
    fn coinciding_labels_are_rejected() {
        let req = ScriptRequest::new(TaskKind::Age, "young", "young", 5);
        assert!(matches!(fill_script_template(&req), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn labels_outside_the_vocabulary_are_rejected() {
        let req = ScriptRequest::new(TaskKind::Gender, "robot", "female", 2);
        assert!(fill_script_template(&req).is_err());
        let req = ScriptRequest::new(TaskKind::SpeakerCount, "25", "3", 2);
        assert!(fill_script_template(&req).is_err());
    }

    #[test]
    fn intonation_template_forbids_punctuation() {
        let req = ScriptRequest::new(TaskKind::Intonation, "falling", "rising", 3);
        let prompt = fill_script_template(&req).unwrap();
        assert!(prompt.contains("must NOT include any punctuation"));
    }

    #[test]
    fn count_terms_cover_digits_and_words() {
        let req = ScriptRequest::new(TaskKind::SpeakerCount, "1", "3", 4);
        assert_eq!(req.include_terms(), vec!["1".to_string(), "one".to_string()]);
        assert_eq!(req.exclude_terms(), vec!["3".to_string(), "three".to_string()]);
    }
}
