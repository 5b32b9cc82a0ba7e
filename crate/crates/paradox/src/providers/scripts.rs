//! Script generation against an LLM: prompt filling, JSON parsing, and the
//! post-hoc lexical check that drops non-compliant scripts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::templates::{fill_script_template, ScriptRequest};
use crate::providers::LlmClient;
use crate::task::TaskKind;
use crate::text;

/// Validated scripts plus how many candidates the lexical check dropped.
#[derive(Debug, Clone)]
pub struct ScriptBatch {
    pub scripts: Vec<String>,
    pub shortfall: usize,
}

/// One generated dialogue for speaker counting: the misleading count all
/// turns assert, and the per-turn scripts (1-5 of them).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DialogueSet {
    pub adv_count: usize,
    pub scripts: Vec<String>,
}

/// Generate a batch of single-utterance scripts. The response must be a JSON
/// array of strings; each script must contain the misleading term and none of
/// the true terms (whole-word, case-insensitive). Non-compliant scripts are
/// dropped and counted in `shortfall`.
pub fn generate_scripts(req: &ScriptRequest, llm: &dyn LlmClient) -> Result<ScriptBatch> {
    if req.task == TaskKind::SpeakerCount {
        return Err(Error::invalid(
            "speaker counting uses generate_dialogues, not generate_scripts",
        ));
    }
    let prompt = fill_script_template(req)?;
    let raw = llm.complete(&prompt)?;
    let candidates: Vec<String> = serde_json::from_str(&raw).map_err(|e| {
        Error::provider_with_payload("llm", format!("response is not a JSON string array: {e}"), raw.clone())
    })?;

    let include = req.include_terms();
    let exclude = req.exclude_terms();
    let mut scripts = Vec::new();
    let mut shortfall = 0usize;
    for cand in candidates {
        let punctuation_ok =
            req.task != TaskKind::Intonation || !cand.chars().any(|c| c.is_ascii_punctuation());
        if punctuation_ok && text::passes_lexical_check(&cand, &include, &exclude) {
            scripts.push(cand);
        } else {
            shortfall += 1;
        }
    }
    if scripts.is_empty() {
        return Err(Error::EmptyBatch(format!(
            "all {shortfall} generated scripts failed the lexical check for task {}",
            req.task
        )));
    }
    Ok(ScriptBatch { scripts, shortfall })
}

#[derive(Debug, Deserialize)]
struct RawDialogue {
    adv_label: serde_json::Value,
    scripts: Vec<String>,
}

/// Generate dialogue sets for speaker counting. The response must be a JSON
/// array of `{adv_label, scripts}` objects. A set is kept only when the
/// misleading count differs from the actual turn count, each turn asserts the
/// misleading count, and no turn mentions the actual count.
pub fn generate_dialogues(req: &ScriptRequest, llm: &dyn LlmClient) -> Result<(Vec<DialogueSet>, usize)> {
    if req.task != TaskKind::SpeakerCount {
        return Err(Error::invalid("generate_dialogues only applies to speaker counting"));
    }
    let prompt = fill_script_template(req)?;
    let raw = llm.complete(&prompt)?;
    let candidates: Vec<RawDialogue> = serde_json::from_str(&raw).map_err(|e| {
        Error::provider_with_payload("llm", format!("response is not a JSON dialogue array: {e}"), raw.clone())
    })?;

    let mut sets = Vec::new();
    let mut shortfall = 0usize;
    for cand in candidates {
        let adv_count = match &cand.adv_label {
            serde_json::Value::Number(n) => n.as_u64().map(|v| v as usize),
            serde_json::Value::String(s) => s.trim().parse::<usize>().ok(),
            _ => None,
        };
        let Some(adv_count) = adv_count else {
            shortfall += 1;
            continue;
        };
        if dialogue_is_valid(adv_count, &cand.scripts) {
            sets.push(DialogueSet { adv_count, scripts: cand.scripts });
        } else {
            shortfall += 1;
        }
    }
    if sets.is_empty() {
        return Err(Error::EmptyBatch("no generated dialogue passed validation".into()));
    }
    Ok((sets, shortfall))
}

fn dialogue_is_valid(adv_count: usize, scripts: &[String]) -> bool {
    let actual = scripts.len();
    if !(1..=5).contains(&actual) || !(1..=20).contains(&adv_count) || adv_count == actual {
        return false;
    }
    let include = text::count_terms(adv_count);
    let exclude = text::count_terms(actual);
    scripts.iter().all(|s| text::passes_lexical_check(s, &include, &exclude))
}
