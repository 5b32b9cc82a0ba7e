//! The reversed-audio diagnostic: every clip is time-reversed, and for
//! temporally dependent tasks the labels and choices are rewritten to match
//! (comparison patterns reverse tokenwise, intonation labels flip, speaker
//! ordinals mirror). Lexical content becomes unintelligible while pitch,
//! volume, timbre, and contour statistics survive, so a model that truly
//! listens gains and a transcript-follower loses its shortcut.

use std::path::Path;

use rayon::prelude::*;

use crate::audio::{reverse, wav};
use crate::bench::{resolve_audio_path, Manifest, McqItem};
use crate::error::{Error, Result};
use crate::task::{reverse_pattern, TaskKind};
use crate::text;

/// Derive the reversed dataset. Reversed audio (item clips and raw-segment
/// sidecars) is written under `out_manifest_path`'s directory at the same
/// relative paths; the returned manifest mirrors the input ordering.
pub fn derive_reversed_dataset(
    manifest: &Manifest,
    manifest_path: &Path,
    out_manifest_path: &Path,
) -> Result<Manifest> {
    let src_dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let dst_dir = out_manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    if src_dir == dst_dir {
        return Err(Error::invalid(
            "reversed dataset must be written to a new directory, not over its source",
        ));
    }

    let items: Vec<McqItem> = manifest
        .items
        .par_iter()
        .map(|item| -> Result<McqItem> {
            let mut paths = vec![item.audio_path.clone()];
            paths.extend(item.provenance.segments.iter().map(|s| s.path.clone()));
            paths.dedup();
            for rel in &paths {
                let audio = wav::read_wav(&resolve_audio_path(manifest_path, rel))?;
                let out_path = resolve_audio_path(out_manifest_path, rel);
                if let Some(parent) = out_path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                wav::write_wav(&out_path, &reverse(&audio))?;
            }
            reverse_item_labels(item)
        })
        .collect::<Result<Vec<_>>>()?;

    Manifest::new(manifest.header.clone(), items)
}

/// Rewrite one item's labels for time reversal. Pure; audio is untouched.
pub fn reverse_item_labels(item: &McqItem) -> Result<McqItem> {
    let mut out = item.clone();
    out.provenance.reversed = !item.provenance.reversed;

    if !item.task.temporally_dependent() {
        return Ok(out);
    }

    match item.task {
        TaskKind::Pitch | TaskKind::Volume | TaskKind::Speed | TaskKind::Range => {
            out.choices =
                item.choices.iter().map(|c| reverse_pattern(c)).collect::<Result<_>>()?;
            if let Some(p) = out.provenance.transform_params.get_mut("pattern") {
                let reversed = reverse_pattern(
                    p.as_str().ok_or_else(|| Error::invalid("pattern provenance not a string"))?,
                )?;
                *p = serde_json::Value::String(reversed);
            }
        }
        TaskKind::Intonation => {
            out.choices = item.choices.iter().map(|c| swap_contour_words(c)).collect();
            if let Some(p) = out.provenance.transform_params.get_mut("contour") {
                if let Some(s) = p.as_str() {
                    *p = serde_json::Value::String(swap_contour_words(s));
                }
            }
        }
        TaskKind::SpeakerId => {
            let n = item
                .provenance
                .transform_params
                .get("segment_count")
                .and_then(|v| v.as_u64())
                .map(|v| v as usize)
                .unwrap_or(item.provenance.segments.len());
            if n == 0 {
                return Err(Error::invalid("speaker-id item lacks segment count"));
            }
            out.choices = item.choices.iter().map(|c| remap_ordinals(c, n)).collect();
            out.question = remap_ordinals(&item.question, n);
            if let Some(q) = out.provenance.transform_params.get_mut("query_index") {
                let old = q
                    .as_u64()
                    .ok_or_else(|| Error::invalid("query_index provenance not an integer"))?
                    as usize;
                *q = serde_json::json!(n - 1 - old);
            }
            // segment sidecars now describe mirrored positions
            out.provenance.segments.reverse();
        }
        _ => unreachable!("non-temporal tasks handled above"),
    }
    out.validate()?;
    Ok(out)
}

fn swap_contour_words(s: &str) -> String {
    map_word_tokens(s, |w| match w {
        "rising" => Some("falling".to_string()),
        "falling" => Some("rising".to_string()),
        _ => None,
    })
}

/// Map segment ordinals under time reversal: position i of n becomes n+1-i.
fn remap_ordinals(s: &str, n: usize) -> String {
    map_word_tokens(s, |w| {
        text::ordinal_value(w).and_then(|v| {
            if v <= n {
                text::ordinal_word(n + 1 - v).map(str::to_string)
            } else {
                None
            }
        })
    })
}

/// Replace whole word tokens via `f`, keeping everything else byte-for-byte.
fn map_word_tokens(s: &str, f: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(s.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            match f(&word.to_lowercase()) {
                Some(mapped) => out.push_str(&mapped),
                None => out.push_str(word),
            }
            word.clear();
        }
    };
    for c in s.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Provenance;

    fn base_item(task: TaskKind, choices: &[&str], y_true: usize, y_adv: Option<usize>) -> McqItem {
        McqItem {
            item_id: "x-0001".into(),
            task,
            audio_path: "audio/x-0001.wav".into(),
            transcript: "t".into(),
            question: "q".into(),
            choices: choices.iter().map(|c| c.to_string()).collect(),
            y_true,
            y_adv,
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn comparison_patterns_reverse_tokenwise() {
        let mut item = base_item(
            TaskKind::Pitch,
            &["low-high-medium", "high-low-medium", "medium-high-low"],
            0,
            Some(1),
        );
        item.provenance
            .transform_params
            .insert("pattern".into(), serde_json::json!("low-high-medium"));
        let rev = reverse_item_labels(&item).unwrap();
        assert_eq!(rev.true_choice(), "medium-high-low");
        assert_eq!(rev.adv_choice(), Some("medium-low-high"));
        assert_eq!(rev.y_true, item.y_true);
        let back = reverse_item_labels(&rev).unwrap();
        assert_eq!(back.choices, item.choices);
        assert!(!back.provenance.reversed);
    }

    #[test]
    fn intonation_labels_flip() {
        let item = base_item(TaskKind::Intonation, &["rising", "falling"], 0, Some(1));
        let rev = reverse_item_labels(&item).unwrap();
        assert_eq!(rev.choices, vec!["falling", "rising"]);
        assert_eq!(rev.true_choice(), "falling");
        let back = reverse_item_labels(&rev).unwrap();
        assert_eq!(back.choices, item.choices);
    }

    #[test]
    fn age_items_keep_their_labels() {
        let item = base_item(TaskKind::Age, &["young", "old"], 0, Some(1));
        let rev = reverse_item_labels(&item).unwrap();
        assert_eq!(rev.choices, item.choices);
        assert_eq!(rev.y_true, item.y_true);
        assert!(rev.provenance.reversed);
    }

    #[test]
    fn speaker_ordinals_mirror() {
        let mut item = base_item(
            TaskKind::SpeakerId,
            &["second segment", "third segment", "fourth segment"],
            1,
            Some(0),
        );
        item.question = "Which other segment is spoken by the same speaker as the first segment?".into();
        item.provenance.transform_params.insert("segment_count".into(), serde_json::json!(4));
        item.provenance.transform_params.insert("query_index".into(), serde_json::json!(0));
        let rev = reverse_item_labels(&item).unwrap();
        // segment 1 of 4 -> segment 4; 2->3, 3->2, 4->1
        assert!(rev.question.contains("fourth segment"), "{}", rev.question);
        assert_eq!(rev.choices, vec!["third segment", "second segment", "first segment"]);
        assert_eq!(rev.true_choice(), "second segment");
        let back = reverse_item_labels(&rev).unwrap();
        assert_eq!(back.choices, item.choices);
        assert_eq!(back.question, item.question);
    }

    #[test]
    fn unknown_pattern_token_is_invalid() {
        let mut item = base_item(TaskKind::Pitch, &["low-tall-medium", "high-low-medium"], 0, None);
        item.provenance.transform_params.insert("pattern".into(), serde_json::json!("low-tall-medium"));
        assert!(reverse_item_labels(&item).is_err());
    }
}
