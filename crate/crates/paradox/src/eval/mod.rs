//! Scoring model responses against a manifest: deterministic answer parsing,
//! ground-truth accuracy vs. adversarial-label agreement, and report
//! rendering.

pub mod agreement;
pub mod reversed;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bench::{Manifest, McqItem};
use crate::error::{Error, Result};
use crate::task::TaskKind;
use crate::text;

/// One raw model response, as ingested from a responses JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelResponse {
    pub item_id: String,
    pub raw_text: String,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub latency_ms: Option<f64>,
}

/// What a response resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parsed {
    Choice(usize),
    ParseFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub parsed: Parsed,
}

/// Parse a free-text response into a choice index. The cascade is fixed so
/// scores are reproducible:
///
/// 1. a unique leading or parenthesized option letter;
/// 2. a unique whole-string match of exactly one normalized choice text;
/// 3. a unique whole-word substring match of exactly one choice text.
///
/// Anything else (including ambiguity at every stage) is a `ParseFailure`;
/// parsing never errors.
pub fn parse_answer(resp: &ModelResponse, item: &McqItem) -> Prediction {
    let parsed = parse_text(&resp.raw_text, &item.choices);
    Prediction { item_id: resp.item_id.clone(), parsed }
}

fn parse_text(raw: &str, choices: &[String]) -> Parsed {
    // rule 1: option letters
    let mut letters: BTreeSet<usize> = BTreeSet::new();
    let trimmed = raw.trim();
    let mut chars = trimmed.chars();
    if let Some(first) = chars.next() {
        if let Some(idx) = letter_index(first, choices.len()) {
            let boundary = chars.next().is_none_or(|c| !c.is_alphanumeric());
            if boundary {
                letters.insert(idx);
            }
        }
    }
    let bytes: Vec<char> = trimmed.chars().collect();
    for i in 0..bytes.len().saturating_sub(2) {
        if bytes[i] == '(' && bytes[i + 2] == ')' {
            if let Some(idx) = letter_index(bytes[i + 1], choices.len()) {
                letters.insert(idx);
            }
        }
    }
    if letters.len() == 1 {
        return Parsed::Choice(*letters.iter().next().unwrap());
    }

    // rule 2: the whole response is exactly one choice
    let norm = text::normalize(raw);
    let whole: Vec<usize> = choices
        .iter()
        .enumerate()
        .filter(|(_, c)| text::normalize(c) == norm)
        .map(|(i, _)| i)
        .collect();
    if whole.len() == 1 {
        return Parsed::Choice(whole[0]);
    }

    // rule 3: exactly one choice text occurs in the response (whole-word)
    let containing: Vec<usize> = choices
        .iter()
        .enumerate()
        .filter(|(_, c)| text::contains_term(raw, c))
        .map(|(i, _)| i)
        .collect();
    if containing.len() == 1 {
        return Parsed::Choice(containing[0]);
    }

    Parsed::ParseFailure
}

fn letter_index(c: char, n_choices: usize) -> Option<usize> {
    let upper = c.to_ascii_uppercase();
    if !upper.is_ascii_uppercase() {
        return None;
    }
    let idx = (upper as usize) - ('A' as usize);
    (idx < n_choices).then_some(idx)
}

/// Per-task scores. `ala` and `delta` are absent for tasks where no item
/// carries a misleading label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub n: usize,
    pub acc_gt: f64,
    pub ala: Option<f64>,
    pub delta: Option<f64>,
    pub parse_failures: usize,
    pub parse_failure_rate: f64,
}

/// Scores per task plus unweighted macro averages over the tasks present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub model_id: String,
    pub per_task: BTreeMap<TaskKind, TaskScore>,
    pub total_items: usize,
    pub macro_acc_gt: f64,
    pub macro_ala: Option<f64>,
    pub macro_delta: Option<f64>,
}

/// Score predictions against a manifest. Denominators are all N items of a
/// task (Acc and ALA alike); items without a response count as parse
/// failures and match neither label. Unknown or duplicate item ids are
/// errors.
pub fn score(manifest: &Manifest, predictions: &[Prediction]) -> Result<Scoreboard> {
    score_with_model(manifest, predictions, "model")
}

pub fn score_with_model(
    manifest: &Manifest,
    predictions: &[Prediction],
    model_id: &str,
) -> Result<Scoreboard> {
    let known: BTreeMap<&str, &McqItem> =
        manifest.items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if !known.contains_key(p.item_id.as_str()) {
            return Err(Error::invalid(format!("prediction for unknown item {}", p.item_id)));
        }
        if by_id.insert(p.item_id.as_str(), p).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for item {}", p.item_id)));
        }
    }

    struct Tally {
        n: usize,
        gt: usize,
        adv: usize,
        has_adv: bool,
        failures: usize,
    }
    let mut tallies: BTreeMap<TaskKind, Tally> = BTreeMap::new();
    for item in &manifest.items {
        let tally = tallies
            .entry(item.task)
            .or_insert(Tally { n: 0, gt: 0, adv: 0, has_adv: false, failures: 0 });
        tally.n += 1;
        tally.has_adv |= item.y_adv.is_some();
        let parsed =
            by_id.get(item.item_id.as_str()).map(|p| p.parsed).unwrap_or(Parsed::ParseFailure);
        match parsed {
            Parsed::Choice(idx) => {
                if idx == item.y_true {
                    tally.gt += 1;
                }
                if item.y_adv == Some(idx) {
                    tally.adv += 1;
                }
            }
            Parsed::ParseFailure => tally.failures += 1,
        }
    }

    let mut per_task = BTreeMap::new();
    let mut total_items = 0usize;
    for (task, tally) in tallies {
        let n = tally.n as f64;
        total_items += tally.n;
        let acc_gt = tally.gt as f64 / n;
        let ala = tally.has_adv.then(|| tally.adv as f64 / n);
        per_task.insert(
            task,
            TaskScore {
                n: tally.n,
                acc_gt,
                ala,
                delta: ala.map(|a| a - acc_gt),
                parse_failures: tally.failures,
                parse_failure_rate: tally.failures as f64 / n,
            },
        );
    }

    let k = per_task.len() as f64;
    let macro_acc_gt =
        if per_task.is_empty() { 0.0 } else { per_task.values().map(|t| t.acc_gt).sum::<f64>() / k };
    let defined: Vec<f64> = per_task.values().filter_map(|t| t.ala).collect();
    let macro_ala = (!defined.is_empty())
        .then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let deltas: Vec<f64> = per_task.values().filter_map(|t| t.delta).collect();
    let macro_delta =
        (!deltas.is_empty()).then(|| deltas.iter().sum::<f64>() / deltas.len() as f64);

    Ok(Scoreboard { model_id: model_id.to_string(), per_task, total_items, macro_acc_gt, macro_ala, macro_delta })
}

/// Report column order (the standard per-task table layout).
pub const REPORT_COLUMNS: [TaskKind; 10] = TaskKind::ALL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

/// Render a scoreboard. JSON round-trips to `Scoreboard`; the CSV carries one
/// Table-style row (model, ten task GT accuracies, macro average); the table
/// also shows ALA, delta, and parse-failure rows.
pub fn emit_report(board: &Scoreboard, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(board).map_err(|e| Error::Format(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            out.push_str("model");
            for task in REPORT_COLUMNS {
                out.push(',');
                out.push_str(task.column_name());
            }
            out.push_str(",Avg\n");
            out.push_str(&board.model_id);
            for task in REPORT_COLUMNS {
                out.push(',');
                match board.per_task.get(&task) {
                    Some(t) => out.push_str(&format!("{:.4}", t.acc_gt)),
                    None => out.push('-'),
                }
            }
            out.push_str(&format!(",{:.4}\n", board.macro_acc_gt));
            Ok(out.into_bytes())
        }
        ReportFormat::Table => {
            let mut out = String::new();
            let headers: Vec<String> = std::iter::once("metric".to_string())
                .chain(REPORT_COLUMNS.iter().map(|t| t.column_name().to_string()))
                .chain(std::iter::once("Avg".to_string()))
                .collect();
            let fmt_opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.3}"),
                None => "-".to_string(),
            };
            let mut rows: Vec<Vec<String>> = Vec::new();
            if !board.per_task.is_empty() {
                let cell = |task: TaskKind, f: &dyn Fn(&TaskScore) -> Option<f64>| {
                    fmt_opt(board.per_task.get(&task).and_then(f))
                };
                let mk_row = |name: &str,
                              f: &dyn Fn(&TaskScore) -> Option<f64>,
                              avg: Option<f64>| {
                    let mut row = vec![name.to_string()];
                    row.extend(REPORT_COLUMNS.iter().map(|t| cell(*t, f)));
                    row.push(fmt_opt(avg));
                    row
                };
                rows.push(mk_row("acc_gt", &|t| Some(t.acc_gt), Some(board.macro_acc_gt)));
                rows.push(mk_row("ala", &|t| t.ala, board.macro_ala));
                rows.push(mk_row("delta", &|t| t.delta, board.macro_delta));
                rows.push(mk_row("parse_fail", &|t| Some(t.parse_failure_rate), None));
            }
            let widths: Vec<usize> = headers
                .iter()
                .enumerate()
                .map(|(c, h)| {
                    rows.iter().map(|r| r[c].len()).chain(std::iter::once(h.len())).max().unwrap()
                })
                .collect();
            let render = |cells: &[String]| -> String {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&render(&headers));
            out.push('\n');
            for row in &rows {
                out.push_str(&render(row));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
    }
}

/// Parse a responses JSONL stream ({item_id, raw_text, model_id} per line).
pub fn read_responses(bytes: &[u8]) -> Result<Vec<ModelResponse>> {
    let mut out = Vec::new();
    for (i, line) in String::from_utf8_lossy(bytes).lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let resp: ModelResponse = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("bad response on line {}: {e}", i + 1)))?;
        out.push(resp);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{ManifestHeader, ManifestKind, Provenance, MANIFEST_SCHEMA_VERSION};

    fn item(id: &str, task: TaskKind, choices: &[&str], y_true: usize, y_adv: Option<usize>) -> McqItem {
        McqItem {
            item_id: id.into(),
            task,
            audio_path: format!("audio/{id}.wav"),
            transcript: "t".into(),
            question: "q".into(),
            choices: choices.iter().map(|c| c.to_string()).collect(),
            y_true,
            y_adv,
            provenance: Provenance::default(),
        }
    }

    fn manifest(items: Vec<McqItem>) -> Manifest {
        Manifest::new(
            ManifestHeader {
                schema_version: MANIFEST_SCHEMA_VERSION,
                kind: ManifestKind::EvalBenchmark,
                global_seed: 1,
                build_config: serde_json::json!({}),
            },
            items,
        )
        .unwrap()
    }

    fn resp(id: &str, text: &str) -> ModelResponse {
        ModelResponse { item_id: id.into(), raw_text: text.into(), model_id: None, latency_ms: None }
    }

    #[test]
    fn parses_option_letters() {
        let it = item("x", TaskKind::Age, &["young", "old", "ancient", "newborn"], 0, Some(1));
        assert_eq!(parse_answer(&resp("x", "(B)"), &it).parsed, Parsed::Choice(1));
        assert_eq!(parse_answer(&resp("x", "B"), &it).parsed, Parsed::Choice(1));
        assert_eq!(parse_answer(&resp("x", "b."), &it).parsed, Parsed::Choice(1));
        assert_eq!(parse_answer(&resp("x", "The answer is (C)"), &it).parsed, Parsed::Choice(2));
        // leading letter immediately followed by a letter is prose, not an option
        assert_eq!(parse_answer(&resp("x", "Because of pitch"), &it).parsed, Parsed::ParseFailure);
    }

    #[test]
    fn parses_unique_choice_text_and_substring() {
        let patterns =
            ["low-high-medium", "high-low-medium", "medium-high-low", "low-medium-high"];
        let it = item("x", TaskKind::Pitch, &patterns, 0, Some(1));
        assert_eq!(
            parse_answer(&resp("x", "The answer is low-high-medium."), &it).parsed,
            Parsed::Choice(0)
        );
        assert_eq!(parse_answer(&resp("x", "low-high-medium"), &it).parsed, Parsed::Choice(0));
        let it2 = item("y", TaskKind::Gender, &["male", "female"], 1, Some(0));
        // "female" must not trigger the "male" choice
        assert_eq!(parse_answer(&resp("y", "clearly female"), &it2).parsed, Parsed::Choice(1));
    }

    #[test]
    fn ambiguous_responses_are_parse_failures() {
        let it = item("x", TaskKind::Gender, &["male", "female"], 0, Some(1));
        assert_eq!(
            parse_answer(&resp("x", "either male or female"), &it).parsed,
            Parsed::ParseFailure
        );
        assert_eq!(parse_answer(&resp("x", ""), &it).parsed, Parsed::ParseFailure);
        assert_eq!(
            parse_answer(&resp("x", "(A) no wait (B)"), &it).parsed,
            Parsed::ParseFailure
        );
    }

    fn fixture_10() -> (Manifest, Vec<Prediction>) {
        // 10 single-task items: 3 answered y_true, 5 answered y_adv, 2 parse failures
        let items: Vec<McqItem> = (0..10)
            .map(|i| item(&format!("it-{i:02}"), TaskKind::Age, &["young", "old"], 0, Some(1)))
            .collect();
        let mut predictions = Vec::new();
        for i in 0..3 {
            predictions.push(Prediction { item_id: format!("it-{i:02}"), parsed: Parsed::Choice(0) });
        }
        for i in 3..8 {
            predictions.push(Prediction { item_id: format!("it-{i:02}"), parsed: Parsed::Choice(1) });
        }
        for i in 8..10 {
            predictions
                .push(Prediction { item_id: format!("it-{i:02}"), parsed: Parsed::ParseFailure });
        }
        (manifest(items), predictions)
    }

    #[test]
    fn hand_fixture_scores_exactly() {
        let (m, p) = fixture_10();
        let board = score(&m, &p).unwrap();
        let t = &board.per_task[&TaskKind::Age];
        assert_eq!(t.acc_gt, 0.300);
        assert_eq!(t.ala, Some(0.500));
        assert!((t.delta.unwrap() - 0.200).abs() < 1e-15);
        assert_eq!(t.parse_failures, 2);
    }

    #[test]
    fn all_true_and_all_adv_extremes() {
        let (m, _) = fixture_10();
        let all_true: Vec<Prediction> = m
            .items
            .iter()
            .map(|i| Prediction { item_id: i.item_id.clone(), parsed: Parsed::Choice(i.y_true) })
            .collect();
        let b = score(&m, &all_true).unwrap();
        assert_eq!(b.per_task[&TaskKind::Age].acc_gt, 1.0);
        assert_eq!(b.per_task[&TaskKind::Age].ala, Some(0.0));

        let all_adv: Vec<Prediction> = m
            .items
            .iter()
            .map(|i| Prediction {
                item_id: i.item_id.clone(),
                parsed: Parsed::Choice(i.y_adv.unwrap()),
            })
            .collect();
        let b = score(&m, &all_adv).unwrap();
        assert_eq!(b.per_task[&TaskKind::Age].acc_gt, 0.0);
        assert_eq!(b.per_task[&TaskKind::Age].ala, Some(1.0));
    }

    #[test]
    fn missing_responses_count_as_parse_failures() {
        let (m, _) = fixture_10();
        let board = score(&m, &[]).unwrap();
        let t = &board.per_task[&TaskKind::Age];
        assert_eq!(t.parse_failures, 10);
        assert_eq!(t.acc_gt, 0.0);
    }

    #[test]
    fn unknown_and_duplicate_ids_error() {
        let (m, mut p) = fixture_10();
        p.push(Prediction { item_id: "nope".into(), parsed: Parsed::ParseFailure });
        assert!(score(&m, &p).is_err());
        let (m, mut p) = fixture_10();
        p.push(p[0].clone());
        assert!(score(&m, &p).is_err());
    }

    #[test]
    fn score_is_permutation_invariant() {
        let (m, mut p) = fixture_10();
        let a = score(&m, &p).unwrap();
        p.reverse();
        let b = score(&m, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn acc_plus_ala_bounded_when_all_items_have_adv() {
        let (m, p) = fixture_10();
        let b = score(&m, &p).unwrap();
        let t = &b.per_task[&TaskKind::Age];
        assert!(t.acc_gt + t.ala.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn json_report_round_trips() {
        let (m, p) = fixture_10();
        let board = score(&m, &p).unwrap();
        let bytes = emit_report(&board, ReportFormat::Json).unwrap();
        let back: Scoreboard = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, board);
    }

    #[test]
    fn csv_has_model_plus_eleven_fields() {
        let (m, p) = fixture_10();
        let board = score(&m, &p).unwrap();
        let bytes = emit_report(&board, ReportFormat::Csv).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 12, "line: {line}");
        }
    }

    #[test]
    fn empty_scoreboard_renders_header_only_table() {
        let board = score(&manifest(vec![]), &[]).unwrap();
        let bytes = emit_report(&board, ReportFormat::Table).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("Age"));
    }
}
