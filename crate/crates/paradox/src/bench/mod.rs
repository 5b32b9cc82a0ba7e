//! Benchmark item and manifest types, and the JSONL manifest format.
//!
//! A manifest is one header line followed by one item per line, UTF-8, keys
//! in fixed order. Audio lives in a sidecar directory next to the manifest;
//! `audio_path` and segment paths are relative to the manifest's directory,
//! so a dataset directory can be moved wholesale.

pub mod build;
pub mod questions;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::TaskKind;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// What a manifest is for. Preference-pair construction refuses
/// `EvalBenchmark` manifests unless explicitly overridden: the evaluation
/// benchmark must never leak into preference training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    EvalBenchmark,
    Training,
}

/// A raw synthesized clip and what it says; the unit the transcript gate
/// checks. For single-clip items this points at the item audio itself; for
/// assembled items (comparisons, multi-speaker) these are the pre-transform
/// per-turn clips kept as sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub path: String,
    pub transcript: String,
}

/// Where an item came from: enough to reproduce or audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub seed: u64,
    #[serde(default)]
    pub provider_ids: Vec<String>,
    #[serde(default)]
    pub transform_params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub segments: Vec<SegmentRef>,
    /// Set when this item was derived by the reversed-audio transformation.
    #[serde(default)]
    pub reversed: bool,
}

/// One multiple-choice benchmark example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub item_id: String,
    pub task: TaskKind,
    pub audio_path: String,
    /// Full lexical content of the clip (all spoken scripts joined).
    pub transcript: String,
    pub question: String,
    pub choices: Vec<String>,
    pub y_true: usize,
    #[serde(default)]
    pub y_adv: Option<usize>,
    pub provenance: Provenance,
}

impl McqItem {
    /// Check the structural invariants every emitted item must satisfy.
    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.choices.len()) {
            return Err(Error::invalid(format!(
                "{}: choice count {} outside 2..=6",
                self.item_id,
                self.choices.len()
            )));
        }
        let unique: BTreeSet<&String> = self.choices.iter().collect();
        if unique.len() != self.choices.len() {
            return Err(Error::invalid(format!("{}: duplicate choices", self.item_id)));
        }
        if self.y_true >= self.choices.len() {
            return Err(Error::invalid(format!("{}: y_true out of range", self.item_id)));
        }
        if let Some(adv) = self.y_adv {
            if adv >= self.choices.len() {
                return Err(Error::invalid(format!("{}: y_adv out of range", self.item_id)));
            }
            if adv == self.y_true {
                return Err(Error::invalid(format!(
                    "{}: y_adv must differ from y_true",
                    self.item_id
                )));
            }
        }
        Ok(())
    }

    pub fn true_choice(&self) -> &str {
        &self.choices[self.y_true]
    }

    pub fn adv_choice(&self) -> Option<&str> {
        self.y_adv.map(|i| self.choices[i].as_str())
    }
}

/// First line of a manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub schema_version: u32,
    pub kind: ManifestKind,
    pub global_seed: u64,
    /// Snapshot of the build configuration that produced this manifest.
    pub build_config: serde_json::Value,
}

/// A full dataset: header plus items in build order.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub items: Vec<McqItem>,
}

impl Manifest {
    pub fn new(header: ManifestHeader, items: Vec<McqItem>) -> Result<Self> {
        let manifest = Manifest { header, items };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for item in &self.items {
            item.validate()?;
            if !seen.insert(&item.item_id) {
                return Err(Error::invalid(format!("duplicate item id {}", item.item_id)));
            }
        }
        Ok(())
    }

    /// Serialize to JSONL bytes (header line + one line per item).
    pub fn to_jsonl(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::new();
        serde_json::to_writer(&mut out, &self.header).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
        for item in &self.items {
            serde_json::to_writer(&mut out, item).map_err(|e| Error::Format(e.to_string()))?;
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(bytes: &[u8]) -> Result<Manifest> {
        let mut lines = BufReader::new(bytes).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Format("empty manifest file".into()))?
            .map_err(Error::Io)?;
        let header: ManifestHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Format(format!("bad manifest header: {e}")))?;
        if header.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest schema version {}",
                header.schema_version
            )));
        }
        let mut items = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let item: McqItem = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("bad item on line {}: {e}", i + 2)))?;
            items.push(item);
        }
        Manifest::new(header, items)
    }
}

/// Write a manifest file atomically: the bytes land at `<path>.partial`
/// first and only rename onto the final path once complete.
pub fn emit_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let bytes = manifest.to_jsonl()?;
    let partial: PathBuf = partial_path(path);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(&partial)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&partial, path)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = std::fs::read(path)?;
    Manifest::from_jsonl(&bytes)
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".partial");
    PathBuf::from(s)
}

/// Resolve an item-relative audio path against the manifest location.
pub fn resolve_audio_path(manifest_path: &Path, relative: &str) -> PathBuf {
    match manifest_path.parent() {
        Some(dir) => dir.join(relative),
        None => PathBuf::from(relative),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_item(id: &str) -> McqItem {
        McqItem {
            item_id: id.to_string(),
            task: TaskKind::Age,
            audio_path: format!("audio/{id}.wav"),
            transcript: "I am an old soul".into(),
            question: "What is the age group of the speaker?".into(),
            choices: vec!["young".into(), "old".into()],
            y_true: 0,
            y_adv: Some(1),
            provenance: Provenance { seed: 7, ..Default::default() },
        }
    }

    fn sample_manifest(items: Vec<McqItem>) -> Manifest {
        Manifest::new(
            ManifestHeader {
                schema_version: MANIFEST_SCHEMA_VERSION,
                kind: ManifestKind::EvalBenchmark,
                global_seed: 42,
                build_config: serde_json::json!({"items_per_task": 2}),
            },
            items,
        )
        .unwrap()
    }

    #[test]
    fn jsonl_round_trip_preserves_everything() {
        let m = sample_manifest(vec![sample_item("a-0001"), sample_item("a-0002")]);
        let bytes = m.to_jsonl().unwrap();
        let back = Manifest::from_jsonl(&bytes).unwrap();
        assert_eq!(back, m);
        // byte-determinism of serialization itself
        assert_eq!(back.to_jsonl().unwrap(), bytes);
    }

    #[test]
    fn empty_manifest_is_valid_and_round_trips() {
        let m = sample_manifest(vec![]);
        let bytes = m.to_jsonl().unwrap();
        assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 1);
        let back = Manifest::from_jsonl(&bytes).unwrap();
        assert!(back.items.is_empty());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = Manifest::new(
            sample_manifest(vec![]).header,
            vec![sample_item("dup"), sample_item("dup")],
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adv_equal_to_true_is_rejected() {
        let mut item = sample_item("x");
        item.y_adv = Some(item.y_true);
        assert!(item.validate().is_err());
    }

    #[test]
    fn duplicate_choices_are_rejected() {
        let mut item = sample_item("x");
        item.choices = vec!["old".into(), "old".into()];
        item.y_adv = None;
        assert!(item.validate().is_err());
    }

    #[test]
    fn atomic_emit_writes_final_path_only(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let m = sample_manifest(vec![sample_item("a-0001")]);
        emit_manifest(&m, &path).unwrap();
        assert!(path.exists());
        assert!(!partial_path(&path).exists());
        assert_eq!(read_manifest(&path).unwrap(), m);
    }
}
