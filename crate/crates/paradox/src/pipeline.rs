//! End-to-end pipelines behind the CLI subcommands: plan, generate scripts,
//! synthesize, assemble, verify, reverse, score, probe, and the numerics
//! report. Everything is deterministic in the configured seed; stub mode
//! needs no network or credentials.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::audio::{wav, ContourLabel};
use crate::bench::build::{
    build_attribute_item, build_intonation_item, build_signal_comparison_item,
    build_speaker_count_item, build_speaker_id_item, BuiltItem, ItemContext,
};
use crate::bench::questions::QuestionTemplates;
use crate::bench::{
    emit_manifest, partial_path, read_manifest, Manifest, ManifestHeader, McqItem,
    MANIFEST_SCHEMA_VERSION,
};
use crate::config::{EndpointConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::reversed::{derive_reversed_dataset, reverse_item_labels};
use crate::eval::{
    emit_report, parse_answer, read_responses, score_with_model, Prediction, ReportFormat,
    Scoreboard,
};
use crate::mixer::dpo::{
    dpo_loss, gradient_check_max_rel_err, PreferenceBatch, PreferenceTriple,
};
use crate::mixer::fit::{synth_mix_dataset, toy_mixer_fit, SynthStackSpec, ToyFitConfig};
use crate::mixer::{default_layer_set, LayerId};
use crate::probe::dumpfile;
use crate::probe::{layer_curve, synth_dump, LayerCurve, ProbeConfig, SynthDumpSpec};
use crate::providers::http::{
    HttpAsrClient, HttpEmotionClient, HttpLlmClient, HttpTransport, HttpTtsClient,
    ProviderEndpoint, RetryPolicy,
};
use crate::providers::scripts::{generate_dialogues, generate_scripts};
use crate::providers::stub::{stub_voice_bank, StubAsr, StubEmotion, StubLlm, StubTts};
use crate::providers::templates::ScriptRequest;
use crate::providers::{AsrClient, EmotionClient, LlmClient, TtsClient, VoiceSpec};
use crate::seeded::rng_for;
use crate::task::TaskKind;
use crate::text;
use crate::verify::{verify_manifest, TermLexicon, VerifyClients, VerifyOutput, VerifyPolicy};

use rand::Rng;

/// Structured JSON event on stderr.
pub fn log_event(event: &str, fields: serde_json::Value) {
    let mut obj = json!({ "event": event });
    if let (Some(dst), Some(src)) = (obj.as_object_mut(), fields.as_object()) {
        for (k, v) in src {
            dst.insert(k.clone(), v.clone());
        }
    }
    eprintln!("{obj}");
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let partial = partial_path(path);
    let mut f = std::fs::File::create(&partial)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&partial, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// provider wiring
// ---------------------------------------------------------------------------

/// The full client set a pipeline needs.
pub struct ProviderSet {
    pub tts: Box<dyn TtsClient>,
    pub llm: Box<dyn LlmClient>,
    pub asr: Box<dyn AsrClient>,
    pub emotion: Box<dyn EmotionClient>,
    pub voices: Vec<VoiceSpec>,
}

pub fn providers_from_config(config: &PipelineConfig) -> Result<ProviderSet> {
    if config.stub {
        return Ok(ProviderSet {
            tts: Box::new(StubTts),
            llm: Box::new(StubLlm::new(config.seed)),
            asr: Box::new(StubAsr),
            emotion: Box::new(StubEmotion::new()),
            voices: stub_voice_bank(),
        });
    }
    let transport = Arc::new(HttpTransport::new(
        RetryPolicy {
            attempts: config.retry.attempts,
            base_delay: Duration::from_millis(config.retry.base_delay_ms),
        },
        config.max_concurrent_requests,
    ));
    let endpoint = |e: &EndpointConfig| ProviderEndpoint {
        provider_id: e.provider_id.clone(),
        url: e.url.clone(),
        model: e.model.clone(),
        auth_header: e.auth_header.clone(),
        auth_scheme: e.auth_scheme.clone(),
    };
    let p = &config.providers;
    let missing = |what: &str| Error::invalid(format!("missing {what} provider endpoint"));
    Ok(ProviderSet {
        tts: Box::new(HttpTtsClient {
            endpoint: endpoint(p.tts.as_ref().ok_or_else(|| missing("tts"))?),
            transport: transport.clone(),
        }),
        llm: Box::new(HttpLlmClient {
            endpoint: endpoint(p.llm.as_ref().ok_or_else(|| missing("llm"))?),
            transport: transport.clone(),
        }),
        asr: Box::new(HttpAsrClient {
            endpoint: endpoint(p.asr.as_ref().ok_or_else(|| missing("asr"))?),
            transport: transport.clone(),
        }),
        emotion: Box::new(HttpEmotionClient {
            endpoint: endpoint(p.emotion.as_ref().ok_or_else(|| missing("emotion"))?),
            transport,
        }),
        voices: p.voices.iter().map(|v| v.to_spec()).collect(),
    })
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

enum PlanKind {
    Attribute { y_true: String, y_adv: String, script: String, voice: VoiceSpec },
    Comparison { adv_level: String, script: String, voice: VoiceSpec },
    Intonation { contour: ContourLabel, script: String, voice: VoiceSpec },
    SpeakerCount { scripts: Vec<String>, misleading: usize, voices: Vec<VoiceSpec> },
    SpeakerId { segments: Vec<(String, VoiceSpec)>, query: usize },
}

struct ItemPlan {
    task: TaskKind,
    item_id: String,
    seed: u64,
    kind: PlanKind,
}

fn voices_with(voices: &[VoiceSpec], key: &str, value: &str) -> Vec<VoiceSpec> {
    voices
        .iter()
        .filter(|v| v.attr(key).is_some_and(|a| a.eq_ignore_ascii_case(value)))
        .cloned()
        .collect()
}

/// Request one script batch and error if the provider could not cover the
/// group. Shortfalls are logged.
fn script_batch(
    llm: &dyn LlmClient,
    task: TaskKind,
    adv: &str,
    truth: &str,
    count: usize,
) -> Result<Vec<String>> {
    let req = ScriptRequest::new(task, adv, truth, count);
    let batch = generate_scripts(&req, llm)?;
    if batch.shortfall > 0 {
        log_event(
            "script_shortfall",
            json!({ "task": task.to_string(), "adv": adv, "dropped": batch.shortfall }),
        );
    }
    if batch.scripts.len() < count {
        return Err(Error::EmptyBatch(format!(
            "needed {count} scripts for {task}/{adv}, provider yielded {}",
            batch.scripts.len()
        )));
    }
    Ok(batch.scripts)
}

fn plan_task(
    config: &PipelineConfig,
    task: TaskKind,
    providers: &ProviderSet,
) -> Result<Vec<ItemPlan>> {
    let n = config.items_per_task;
    let seed = config.seed;
    let voices = &providers.voices;
    let llm = providers.llm.as_ref();
    let item_id = |i: usize| format!("{task}-{i:04}");
    let item_seed =
        |i: usize| crate::seeded::derive_seed(seed, &["item", task.snake_name(), &i.to_string()]);
    let mut plans = Vec::with_capacity(n);

    match task {
        TaskKind::Age | TaskKind::Gender => {
            let (key, labels) = if task == TaskKind::Age {
                ("age_group", ["young", "old"])
            } else {
                ("gender", ["male", "female"])
            };
            // even items: true = labels[0]; odd items: true = labels[1]
            let counts = [n.div_ceil(2), n / 2];
            let batches: Vec<Vec<String>> = (0..2)
                .map(|o| {
                    let (truth, adv) = (labels[o], labels[1 - o]);
                    if counts[o] == 0 {
                        return Ok(Vec::new());
                    }
                    script_batch(llm, task, adv, truth, counts[o])
                })
                .collect::<Result<_>>()?;
            let mut used = [0usize; 2];
            for i in 0..n {
                let o = i % 2;
                let (truth, adv) = (labels[o], labels[1 - o]);
                let pool = voices_with(voices, key, truth);
                if pool.is_empty() {
                    return Err(Error::invalid(format!(
                        "no voice with {key}={truth} in the catalog"
                    )));
                }
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::Attribute {
                        y_true: truth.into(),
                        y_adv: adv.into(),
                        script: batches[o][used[o]].clone(),
                        voice: pool[(i / 2) % pool.len()].clone(),
                    },
                });
                used[o] += 1;
            }
        }
        TaskKind::Emotion => {
            // orientation cycle: (pair, direction)
            let pairs = &config.emotion_pairs;
            let orientations: Vec<(String, String)> = pairs
                .iter()
                .flat_map(|p| {
                    [(p[0].clone(), p[1].clone()), (p[1].clone(), p[0].clone())]
                })
                .collect();
            let mut counts = vec![0usize; orientations.len()];
            for i in 0..n {
                counts[i % orientations.len()] += 1;
            }
            let batches: Vec<Vec<String>> = orientations
                .iter()
                .zip(&counts)
                .map(|((truth, adv), count)| {
                    if *count == 0 {
                        return Ok(Vec::new());
                    }
                    script_batch(llm, task, adv, truth, *count)
                })
                .collect::<Result<_>>()?;
            let mut used = vec![0usize; orientations.len()];
            for i in 0..n {
                let o = i % orientations.len();
                let (truth, adv) = orientations[o].clone();
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::Attribute {
                        y_true: truth,
                        y_adv: adv,
                        script: batches[o][used[o]].clone(),
                        voice: voices[i % voices.len()].clone(),
                    },
                });
                used[o] += 1;
            }
        }
        TaskKind::Pitch | TaskKind::Volume | TaskKind::Speed | TaskKind::Range => {
            let levels = ["high", "low"];
            let counts = [n.div_ceil(2), n / 2];
            let batches: Vec<Vec<String>> = (0..2)
                .map(|o| {
                    if counts[o] == 0 {
                        return Ok(Vec::new());
                    }
                    script_batch(llm, task, levels[o], "medium", counts[o])
                })
                .collect::<Result<_>>()?;
            let mut used = [0usize; 2];
            for i in 0..n {
                let o = i % 2;
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::Comparison {
                        adv_level: levels[o].into(),
                        script: batches[o][used[o]].clone(),
                        voice: voices[i % voices.len()].clone(),
                    },
                });
                used[o] += 1;
            }
        }
        TaskKind::Intonation => {
            let contours = [ContourLabel::Rising, ContourLabel::Falling];
            let counts = [n.div_ceil(2), n / 2];
            let batches: Vec<Vec<String>> = (0..2)
                .map(|o| {
                    if counts[o] == 0 {
                        return Ok(Vec::new());
                    }
                    let truth = contours[o].word();
                    let adv = contours[o].opposite().word();
                    script_batch(llm, task, adv, truth, counts[o])
                })
                .collect::<Result<_>>()?;
            let mut used = [0usize; 2];
            for i in 0..n {
                let o = i % 2;
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::Intonation {
                        contour: contours[o],
                        script: batches[o][used[o]].clone(),
                        voice: voices[i % voices.len()].clone(),
                    },
                });
                used[o] += 1;
            }
        }
        TaskKind::SpeakerId => {
            let n_segments = 4usize;
            // draw positions per item, then batch the ordinal claims
            struct Layout {
                query: usize,
                true_pos: usize,
                adv_pos: usize,
                voice_picks: Vec<usize>,
            }
            let mut layouts = Vec::with_capacity(n);
            let mut claims_needed: std::collections::BTreeMap<usize, usize> = Default::default();
            for i in 0..n {
                let mut rng = rng_for(item_seed(i), &["plan"]);
                let query = rng.gen_range(0..n_segments);
                let true_pos = loop {
                    let p = rng.gen_range(0..n_segments);
                    if p != query {
                        break p;
                    }
                };
                let adv_pos = loop {
                    let p = rng.gen_range(0..n_segments);
                    if p != query && p != true_pos {
                        break p;
                    }
                };
                let base = rng.gen_range(0..voices.len());
                let voice_picks = (0..n_segments).map(|k| (base + k) % voices.len()).collect();
                for pos in 0..n_segments {
                    let claim = if pos == adv_pos { query + 1 } else { pos + 1 };
                    *claims_needed.entry(claim).or_default() += 1;
                }
                layouts.push(Layout { query, true_pos, adv_pos, voice_picks });
            }
            let mut claim_scripts: std::collections::BTreeMap<usize, Vec<String>> =
                Default::default();
            for (claim, count) in &claims_needed {
                let adv = text::ordinal_word(*claim)
                    .ok_or_else(|| Error::invalid("segment claim has no ordinal word"))?;
                let truth = text::ordinal_word(claim % 5 + 1).unwrap();
                claim_scripts
                    .insert(*claim, script_batch(llm, task, adv, truth, *count)?);
            }
            let mut claim_used: std::collections::BTreeMap<usize, usize> = Default::default();
            for (i, layout) in layouts.iter().enumerate() {
                // same voice at query and true positions; distinct elsewhere
                let mut pool: Vec<VoiceSpec> = Vec::new();
                for idx in &layout.voice_picks {
                    let v = voices[*idx].clone();
                    if !pool.iter().any(|p| p.voice_id == v.voice_id) {
                        pool.push(v);
                    }
                }
                if pool.len() < n_segments - 1 {
                    return Err(Error::invalid("voice catalog too small for speaker identity"));
                }
                let mut segments: Vec<(String, VoiceSpec)> = Vec::with_capacity(n_segments);
                let mut distinct_iter = pool
                    .iter()
                    .filter(|v| v.voice_id != pool[0].voice_id)
                    .cloned()
                    .collect::<Vec<_>>()
                    .into_iter();
                for pos in 0..n_segments {
                    let claim =
                        if pos == layout.adv_pos { layout.query + 1 } else { pos + 1 };
                    let used = claim_used.entry(claim).or_default();
                    let script = claim_scripts[&claim][*used].clone();
                    *used += 1;
                    let voice = if pos == layout.query || pos == layout.true_pos {
                        pool[0].clone()
                    } else {
                        distinct_iter.next().expect("enough distinct voices")
                    };
                    segments.push((script, voice));
                }
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::SpeakerId { segments, query: layout.query },
                });
            }
        }
        TaskKind::SpeakerCount => {
            let req = ScriptRequest::new(task, "1", "3", n);
            let (sets, shortfall) = generate_dialogues(&req, llm)?;
            if shortfall > 0 {
                log_event(
                    "dialogue_shortfall",
                    json!({ "task": task.to_string(), "dropped": shortfall }),
                );
            }
            if sets.len() < n {
                return Err(Error::EmptyBatch(format!(
                    "needed {n} dialogues, provider yielded {}",
                    sets.len()
                )));
            }
            for (i, set) in sets.into_iter().take(n).enumerate() {
                let mut rng = rng_for(item_seed(i), &["plan"]);
                let offset = rng.gen_range(0..voices.len());
                let turn_voices: Vec<VoiceSpec> = (0..set.scripts.len())
                    .map(|k| voices[(offset + k) % voices.len()].clone())
                    .collect();
                plans.push(ItemPlan {
                    task,
                    item_id: item_id(i),
                    seed: item_seed(i),
                    kind: PlanKind::SpeakerCount {
                        scripts: set.scripts,
                        misleading: set.adv_count,
                        voices: turn_voices,
                    },
                });
            }
        }
    }
    Ok(plans)
}

fn build_plan(
    plan: &ItemPlan,
    config: &PipelineConfig,
    questions: &QuestionTemplates,
    tts: &dyn TtsClient,
) -> Result<BuiltItem> {
    let ctx = ItemContext {
        item_id: plan.item_id.clone(),
        seed: plan.seed,
        questions,
        shuffle_choices: config.shuffle_choices,
    };
    let policy = config.choice_policy();
    match &plan.kind {
        PlanKind::Attribute { y_true, y_adv, script, voice } => {
            build_attribute_item(plan.task, y_true, y_adv, script, voice, tts, &ctx)
        }
        PlanKind::Comparison { adv_level, script, voice } => {
            let seed_clip = tts.synthesize(&crate::providers::TtsJob::plain(script, voice.clone()))?;
            build_signal_comparison_item(
                plan.task,
                &seed_clip,
                script,
                adv_level,
                &config.magnitudes.to_magnitudes(),
                &policy,
                tts.provider_id(),
                &ctx,
            )
        }
        PlanKind::Intonation { contour, script, voice } => {
            build_intonation_item(script, *contour, voice, tts, &ctx)
        }
        PlanKind::SpeakerCount { scripts, misleading, voices } => {
            build_speaker_count_item(scripts, *misleading, voices, tts, &policy, &ctx)
        }
        PlanKind::SpeakerId { segments, query } => {
            build_speaker_id_item(segments, *query, tts, &policy, &ctx)
        }
    }
}

/// Build a benchmark into `out_dir`: audio sidecars under `out_dir/audio/`,
/// manifest at `out_dir/manifest.jsonl`. Returns the manifest path.
/// Deterministic in (config, stub providers): a rebuild is byte-identical.
pub fn cmd_build(config: &PipelineConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let providers = providers_from_config(config)?;
    let questions = match &config.question_templates {
        Some(path) => QuestionTemplates::load(path)?,
        None => QuestionTemplates::default_set(),
    };
    if providers.voices.is_empty() {
        return Err(Error::invalid("voice catalog is empty"));
    }

    let mut plans = Vec::new();
    for task in config.task_list()? {
        plans.extend(plan_task(config, task, &providers)?);
    }
    log_event("planned", json!({ "items": plans.len() }));

    std::fs::create_dir_all(out_dir.join("audio"))?;
    let tts = providers.tts.as_ref();
    let built: Vec<Option<McqItem>> = plans
        .par_iter()
        .map(|plan| -> Result<Option<McqItem>> {
            match build_plan(plan, config, &questions, tts) {
                Ok(built) => {
                    for (rel, audio) in &built.files {
                        wav::write_wav(&out_dir.join(rel), audio)?;
                    }
                    Ok(Some(built.item))
                }
                Err(Error::RejectedItem(reason)) => {
                    log_event(
                        "item_rejected",
                        json!({ "item_id": plan.item_id, "reason": reason }),
                    );
                    Ok(None)
                }
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;
    let items: Vec<McqItem> = built.into_iter().flatten().collect();

    let manifest = Manifest::new(
        ManifestHeader {
            schema_version: MANIFEST_SCHEMA_VERSION,
            kind: config.manifest_kind()?,
            global_seed: config.seed,
            build_config: config.snapshot()?,
        },
        items,
    )?;
    let manifest_path = out_dir.join("manifest.jsonl");
    emit_manifest(&manifest, &manifest_path)?;
    log_event(
        "built",
        json!({ "items": manifest.items.len(), "manifest": manifest_path.display().to_string() }),
    );
    Ok(manifest_path)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub struct VerifySummary {
    pub kept_path: PathBuf,
    pub rejected_path: PathBuf,
    pub held_path: PathBuf,
    pub kept: usize,
    pub rejected: usize,
    pub held: usize,
}

/// Run the verification gates over a manifest. The kept manifest lands next
/// to the input as `<stem>.verified.jsonl` (so audio paths stay valid), with
/// rejection and held reports alongside.
pub fn cmd_verify(manifest_path: &Path, config: &PipelineConfig) -> Result<VerifySummary> {
    let manifest = read_manifest(manifest_path)?;
    let providers = providers_from_config(config)?;
    let policy = VerifyPolicy {
        transcript_gate: config.gates.transcript,
        lexical_gate: config.gates.lexical,
        emotion_referee: config.gates.emotion_referee,
        referee_min_confidence: config.gates.referee_min_confidence,
    };
    let lexicon = TermLexicon { per_label: config.lexicon.clone() };
    let clients = VerifyClients { asr: providers.asr.as_ref(), emotion: providers.emotion.as_ref() };
    let output: VerifyOutput =
        verify_manifest(&manifest, manifest_path, &clients, &policy, &lexicon)?;

    for outcome in &output.outcomes {
        log_event(
            "gate_decision",
            json!({
                "item_id": outcome.item_id,
                "passed": outcome.passed,
                "failed": outcome.failed_gates,
                "inconclusive": outcome.inconclusive_gates,
            }),
        );
    }

    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid("manifest path has no stem"))?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let kept_path = dir.join(format!("{stem}.verified.jsonl"));
    let rejected_path = dir.join(format!("{stem}.rejected.jsonl"));
    let held_path = dir.join(format!("{stem}.held.jsonl"));

    emit_manifest(&output.kept, &kept_path)?;
    let to_jsonl = |outcomes: Vec<&crate::verify::VerificationOutcome>| -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        for o in outcomes {
            serde_json::to_writer(&mut bytes, o).map_err(|e| Error::Format(e.to_string()))?;
            bytes.push(b'\n');
        }
        Ok(bytes)
    };
    write_atomic(&rejected_path, &to_jsonl(output.rejected().collect())?)?;
    write_atomic(&held_path, &to_jsonl(output.held().collect())?)?;

    Ok(VerifySummary {
        kept_path,
        rejected_path,
        held_path,
        kept: output.kept.items.len(),
        rejected: output.rejected().count(),
        held: output.held().count(),
    })
}

// ---------------------------------------------------------------------------
// eval / reverse
// ---------------------------------------------------------------------------

/// Score a responses file against a manifest. With `reversed_labels` the
/// manifest labels are rewritten for time-reversed audio before scoring
/// (for responses collected on a reversed dataset built elsewhere).
pub fn cmd_eval(
    manifest_path: &Path,
    responses_path: &Path,
    format: ReportFormat,
    reversed_labels: bool,
) -> Result<(Scoreboard, Vec<u8>)> {
    let mut manifest = read_manifest(manifest_path)?;
    if reversed_labels {
        manifest.items = manifest
            .items
            .iter()
            .map(reverse_item_labels)
            .collect::<Result<Vec<_>>>()?;
    }
    let responses = read_responses(&std::fs::read(responses_path)?)?;
    let model_id = responses
        .iter()
        .find_map(|r| r.model_id.clone())
        .unwrap_or_else(|| "model".to_string());
    let by_id: std::collections::BTreeMap<&str, &McqItem> =
        manifest.items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut predictions: Vec<Prediction> = Vec::with_capacity(responses.len());
    for resp in &responses {
        let item = by_id.get(resp.item_id.as_str()).ok_or_else(|| {
            Error::invalid(format!("response for unknown item {}", resp.item_id))
        })?;
        predictions.push(parse_answer(resp, item));
    }
    let board = score_with_model(&manifest, &predictions, &model_id)?;
    let rendered = emit_report(&board, format)?;
    Ok((board, rendered))
}

/// Derive the reversed dataset into `out_dir`.
pub fn cmd_reverse(manifest_path: &Path, out_dir: &Path) -> Result<PathBuf> {
    let manifest = read_manifest(manifest_path)?;
    let out_path = out_dir.join("manifest.jsonl");
    std::fs::create_dir_all(out_dir)?;
    let reversed = derive_reversed_dataset(&manifest, manifest_path, &out_path)?;
    emit_manifest(&reversed, &out_path)?;
    log_event(
        "reversed",
        json!({ "items": reversed.items.len(), "manifest": out_path.display().to_string() }),
    );
    Ok(out_path)
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

pub struct ProbeArgs {
    /// Feature dump to analyze; mutually exclusive with `synth_planted`.
    pub dump: Option<PathBuf>,
    /// Generate a synthetic dump with the signal planted at this layer id.
    pub synth_planted: Option<i64>,
    pub depth: usize,
    pub folds: usize,
    pub seed: u64,
    pub epochs: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn cmd_probe(args: &ProbeArgs) -> Result<LayerCurve> {
    let dump = match (&args.dump, args.synth_planted) {
        (Some(path), None) => dumpfile::read_dump(path)?,
        (None, Some(planted)) => {
            let spec =
                SynthDumpSpec::new(200, vec![0, 2, 4, 6, 8, 10], planted, 0.5, args.seed);
            synth_dump(&spec)?
        }
        (Some(_), Some(_)) => {
            return Err(Error::invalid("--dump and --synth-planted are mutually exclusive"));
        }
        (None, None) => {
            return Err(Error::invalid("probe needs --dump or --synth-planted"));
        }
    };
    let mut cfg = ProbeConfig { depth: args.depth, folds: args.folds, seed: args.seed, ..ProbeConfig::default() };
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(hidden) = args.hidden_dim {
        cfg.hidden_dim = hidden;
    }
    let curve = layer_curve(&dump, &cfg)?;
    if let Some(out) = &args.out {
        let mut bytes =
            serde_json::to_vec_pretty(&curve).map_err(|e| Error::Format(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(out, &bytes)?;
    }
    if let Some(csv) = &args.csv {
        write_atomic(csv, curve.to_csv().as_bytes())?;
    }
    Ok(curve)
}

// ---------------------------------------------------------------------------
// mix
// ---------------------------------------------------------------------------

/// Numerics report from the gradient-check suite and the toy mixer fit.
#[derive(Debug, Clone, Serialize)]
pub struct MixReport {
    pub dpo_init_loss: f64,
    pub grad_max_rel_err: f64,
    pub planted_layer_argmax: String,
    pub readout_acc: f64,
}

pub fn cmd_mix(seed: u64) -> Result<MixReport> {
    // zero-margin batch: policy equals reference, so every margin is 0 and
    // the loss must be ln 2
    let mut rng = rng_for(seed, &["mix", "fixture"]);
    let triples: Vec<PreferenceTriple> = (0..16)
        .map(|i| {
            let chosen = -rng.gen_range(0.0..4.0);
            let rejected = -rng.gen_range(0.0..4.0);
            PreferenceTriple {
                id: format!("zm{i}"),
                policy_chosen_logp: chosen,
                policy_rejected_logp: rejected,
                reference_chosen_logp: chosen,
                reference_rejected_logp: rejected,
            }
        })
        .collect();
    let (dpo_init_loss, _) = dpo_loss(&PreferenceBatch::new(triples))?;

    let grad_max_rel_err = gradient_check_max_rel_err(100, seed)?;

    let spec = SynthStackSpec::new(240, default_layer_set(), LayerId::Numbered(5), seed);
    let dataset = synth_mix_dataset(&spec)?;
    let fit = toy_mixer_fit(&dataset, &ToyFitConfig { epochs: 120, seed, ..ToyFitConfig::default() })?;

    Ok(MixReport {
        dpo_init_loss,
        grad_max_rel_err,
        planted_layer_argmax: fit.alpha_argmax,
        readout_acc: fit.holdout_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_report_hits_the_expected_values() {
        let report = cmd_mix(7).unwrap();
        assert!((report.dpo_init_loss - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(report.grad_max_rel_err <= 1e-4);
        assert_eq!(report.planted_layer_argmax, "5");
        assert!(report.readout_acc >= 0.9);
    }
}
