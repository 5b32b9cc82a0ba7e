//! Item constructors for the ten task kinds. Every constructor enforces the
//! linguistic-acoustic contradiction structurally (the transcript asserts the
//! misleading label, the audio carries the true one) and the signal-comparison
//! builder re-measures its own segments, rejecting any item whose audio does
//! not agree with the pattern label.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{
    apply_gain, classify_terminal_contour, concat, estimate_f0, pitch_shift, range_scale,
    time_stretch, ContourConfig, ContourLabel, F0Config, Waveform,
};
use crate::bench::questions::QuestionTemplates;
use crate::bench::{McqItem, Provenance, SegmentRef};
use crate::error::{Error, Result};
use crate::providers::ssml::render_ssml;
use crate::providers::{TtsClient, TtsJob, VoiceSpec};
use crate::task::{TaskKind, COMPARISON_PATTERNS};
use crate::text;

/// Per-item construction context.
pub struct ItemContext<'a> {
    pub item_id: String,
    pub seed: u64,
    pub questions: &'a QuestionTemplates,
    pub shuffle_choices: bool,
}

impl ItemContext<'_> {
    fn rng(&self, ns: &str) -> ChaCha8Rng {
        crate::seeded::rng_for(self.seed, &["item", &self.item_id, ns])
    }

    fn audio_path(&self) -> String {
        format!("audio/{}.wav", self.item_id)
    }

    fn segment_path(&self, index: usize) -> String {
        format!("audio/{}.seg{index}.wav", self.item_id)
    }
}

/// A constructed item plus the audio files backing it, keyed by
/// manifest-relative path (the item audio and any raw-segment sidecars).
pub struct BuiltItem {
    pub item: McqItem,
    pub files: Vec<(String, Waveform)>,
}

/// Transform magnitudes for the low/high variants of the comparison tasks.
#[derive(Debug, Clone)]
pub struct ComparisonMagnitudes {
    /// Speed factors (low, high); output duration = input / rate.
    pub speed_rates: (f64, f64),
    /// Gain in dB (low, high).
    pub gain_db: (f64, f64),
    /// Pitch shift in semitones (low, high).
    pub pitch_semitones: (f64, f64),
    /// Vocal-range deviation factors (low, high).
    pub range_factors: (f64, f64),
}

impl Default for ComparisonMagnitudes {
    fn default() -> Self {
        ComparisonMagnitudes {
            speed_rates: (0.7, 1.4),
            gain_db: (-8.0, 8.0),
            pitch_semitones: (-4.0, 4.0),
            range_factors: (0.5, 2.0),
        }
    }
}

/// Choice-set policy for comparison and counting items.
#[derive(Debug, Clone)]
pub struct ChoicePolicy {
    /// How many pattern choices a comparison item carries (2..=6).
    pub comparison_choices: usize,
    /// Whether comparison items carry a designated misleading pattern.
    /// When false, ALA is undefined for these tasks.
    pub comparison_adv: bool,
    /// Silence between assembled segments, seconds.
    pub gap_seconds: f64,
}

impl Default for ChoicePolicy {
    fn default() -> Self {
        ChoicePolicy { comparison_choices: 4, comparison_adv: true, gap_seconds: 0.30 }
    }
}

fn shuffled_choices(
    mut texts: Vec<String>,
    true_text: &str,
    adv_text: Option<&str>,
    rng: &mut ChaCha8Rng,
    shuffle: bool,
) -> Result<(Vec<String>, usize, Option<usize>)> {
    if shuffle {
        texts.shuffle(rng);
    }
    let y_true = texts
        .iter()
        .position(|t| t == true_text)
        .ok_or_else(|| Error::invalid("choices must contain the true label"))?;
    let y_adv = match adv_text {
        Some(a) => Some(
            texts
                .iter()
                .position(|t| t == a)
                .ok_or_else(|| Error::invalid("choices must contain the misleading label"))?,
        ),
        None => None,
    };
    Ok((texts, y_true, y_adv))
}

fn base_provenance(ctx: &ItemContext<'_>, provider_ids: Vec<String>) -> Provenance {
    Provenance { seed: ctx.seed, provider_ids, ..Default::default() }
}

// ---------------------------------------------------------------------------
// attribute items (age, gender, emotion)
// ---------------------------------------------------------------------------

/// Build an age / gender / emotion item: a single clip whose voice carries
/// `y_true` while the script asserts `y_adv`.
pub fn build_attribute_item(
    task: TaskKind,
    y_true: &str,
    y_adv: &str,
    script: &str,
    voice: &VoiceSpec,
    tts: &dyn TtsClient,
    ctx: &ItemContext<'_>,
) -> Result<BuiltItem> {
    if !matches!(task, TaskKind::Age | TaskKind::Gender | TaskKind::Emotion) {
        return Err(Error::invalid(format!("{task} is not an attribute task")));
    }
    if y_true.eq_ignore_ascii_case(y_adv) {
        return Err(Error::invalid("y_adv must differ from y_true"));
    }
    let metadata_key = match task {
        TaskKind::Age => Some("age_group"),
        TaskKind::Gender => Some("gender"),
        _ => None,
    };
    if let Some(key) = metadata_key {
        match voice.attr(key) {
            Some(v) if v.eq_ignore_ascii_case(y_true) => {}
            other => {
                return Err(Error::invalid(format!(
                    "voice {} has {key}={other:?}, item needs {y_true}",
                    voice.voice_id
                )));
            }
        }
    }
    if !text::passes_lexical_check(script, &[y_adv.to_string()], &[y_true.to_string()]) {
        return Err(Error::invalid(format!(
            "script must assert '{y_adv}' and avoid '{y_true}': {script}"
        )));
    }

    let mut job = TtsJob::plain(script, voice.clone());
    if task == TaskKind::Emotion {
        job = job.with_style(y_true);
    }
    let audio = tts.synthesize(&job)?;

    let mut rng = ctx.rng("choices");
    let (choices, y_true_idx, y_adv_idx) = shuffled_choices(
        vec![y_true.to_string(), y_adv.to_string()],
        y_true,
        Some(y_adv),
        &mut rng,
        ctx.shuffle_choices,
    )?;

    let audio_path = ctx.audio_path();
    let mut provenance = base_provenance(ctx, vec![tts.provider_id().to_string()]);
    provenance.segments =
        vec![SegmentRef { path: audio_path.clone(), transcript: script.to_string() }];
    provenance
        .transform_params
        .insert("y_true_label".into(), serde_json::Value::String(y_true.to_string()));

    let item = McqItem {
        item_id: ctx.item_id.clone(),
        task,
        audio_path: audio_path.clone(),
        transcript: script.to_string(),
        question: ctx.questions.question(task).to_string(),
        choices,
        y_true: y_true_idx,
        y_adv: y_adv_idx,
        provenance,
    };
    item.validate()?;
    Ok(BuiltItem { item, files: vec![(audio_path, audio)] })
}

// ---------------------------------------------------------------------------
// signal comparison items (pitch, volume, speed, range)
// ---------------------------------------------------------------------------

fn level_rank(level: &str) -> usize {
    match level {
        "low" => 0,
        "medium" => 1,
        _ => 2,
    }
}

/// The scalar each comparison task orders its segments by.
pub fn measure_segment(task: TaskKind, segment: &Waveform) -> Result<f64> {
    match task {
        TaskKind::Volume => Ok(segment.rms()),
        TaskKind::Speed => Ok(1.0 / segment.duration_seconds()),
        TaskKind::Pitch => {
            let track = estimate_f0(segment, &F0Config::default())?;
            track.median_f0().ok_or_else(|| Error::invalid("segment has no voiced frames"))
        }
        TaskKind::Range => {
            let track = estimate_f0(segment, &F0Config::default())?;
            let median = track
                .median_f0()
                .ok_or_else(|| Error::invalid("segment has no voiced frames"))?;
            let mut devs: Vec<f64> = track
                .f0_hz
                .iter()
                .filter_map(|f| *f)
                .map(|hz| (hz / median).log2().abs() * 12.0)
                .collect();
            if devs.is_empty() {
                return Err(Error::invalid("segment has no voiced frames"));
            }
            devs.sort_by(f64::total_cmp);
            Ok(devs[((devs.len() as f64 * 0.9) as usize).min(devs.len() - 1)])
        }
        other => Err(Error::invalid(format!("{other} is not a signal comparison task"))),
    }
}

/// Build a three-segment comparison item. The seed clip is the untouched
/// medium segment; low/high variants come from the task's transform. The
/// built audio is re-measured segment by segment and the item is rejected if
/// the measurements disagree with the pattern label.
#[allow(clippy::too_many_arguments)]
pub fn build_signal_comparison_item(
    task: TaskKind,
    seed_clip: &Waveform,
    transcript: &str,
    adv_level: &str,
    magnitudes: &ComparisonMagnitudes,
    policy: &ChoicePolicy,
    tts_provider: &str,
    ctx: &ItemContext<'_>,
) -> Result<BuiltItem> {
    if !task.is_signal_comparison() {
        return Err(Error::invalid(format!("{task} is not a signal comparison task")));
    }
    if !(2..=6).contains(&policy.comparison_choices) {
        return Err(Error::invalid("comparison items need between 2 and 6 choices"));
    }
    if !matches!(adv_level, "high" | "low") {
        return Err(Error::invalid(
            "the seed transcript must assert 'high' or 'low' (the seed itself is the medium segment)",
        ));
    }
    // The seed clip is x_medium, so "medium" is the level the script must not claim.
    if !text::passes_lexical_check(transcript, &[adv_level.to_string()], &["medium".to_string()]) {
        return Err(Error::invalid(format!(
            "seed transcript must assert '{adv_level}' and avoid 'medium': {transcript}"
        )));
    }

    let low; let high;
    let mut normalized_any = false;
    match task {
        TaskKind::Speed => {
            low = time_stretch(seed_clip, magnitudes.speed_rates.0)?;
            high = time_stretch(seed_clip, magnitudes.speed_rates.1)?;
        }
        TaskKind::Volume => {
            let lo = apply_gain(seed_clip, magnitudes.gain_db.0)?;
            let hi = apply_gain(seed_clip, magnitudes.gain_db.1)?;
            normalized_any = lo.normalized || hi.normalized;
            low = lo.waveform;
            high = hi.waveform;
        }
        TaskKind::Pitch => {
            low = pitch_shift(seed_clip, magnitudes.pitch_semitones.0)?;
            high = pitch_shift(seed_clip, magnitudes.pitch_semitones.1)?;
        }
        TaskKind::Range => {
            low = range_scale(seed_clip, magnitudes.range_factors.0)?;
            high = range_scale(seed_clip, magnitudes.range_factors.1)?;
        }
        _ => unreachable!(),
    }

    let mut rng = ctx.rng("pattern");
    let pattern = COMPARISON_PATTERNS[rng.gen_range(0..COMPARISON_PATTERNS.len())].to_string();
    let levels: Vec<&str> = pattern.split('-').collect();
    let by_level = |level: &str| -> &Waveform {
        match level {
            "low" => &low,
            "medium" => seed_clip,
            _ => &high,
        }
    };
    let parts: Vec<Waveform> = levels.iter().map(|l| by_level(l).clone()).collect();

    // measurement oracle: segment measurements must order like the levels
    let measures: Vec<f64> =
        parts.iter().map(|p| measure_segment(task, p)).collect::<Result<_>>()?;
    for i in 0..levels.len() {
        for j in 0..levels.len() {
            if level_rank(levels[i]) < level_rank(levels[j]) && measures[i] >= measures[j] {
                return Err(Error::RejectedItem(format!(
                    "{}: segment measurements {measures:?} disagree with pattern {pattern}",
                    ctx.item_id
                )));
            }
        }
    }

    let audio = concat(&parts, policy.gap_seconds)?;

    // choice set: y_true, optional misleading pattern, then random fill
    let mut rng_adv = ctx.rng("adv");
    let adv_pattern = if policy.comparison_adv {
        let others: Vec<&&str> = COMPARISON_PATTERNS.iter().filter(|p| **p != pattern).collect();
        Some(others[rng_adv.gen_range(0..others.len())].to_string())
    } else {
        None
    };
    let mut texts: Vec<String> = vec![pattern.clone()];
    if let Some(a) = &adv_pattern {
        texts.push(a.clone());
    }
    let mut pool: Vec<String> = COMPARISON_PATTERNS
        .iter()
        .map(|p| p.to_string())
        .filter(|p| !texts.contains(p))
        .collect();
    let mut rng_fill = ctx.rng("fill");
    pool.shuffle(&mut rng_fill);
    while texts.len() < policy.comparison_choices {
        texts.push(pool.pop().expect("six patterns exceed any valid choice count"));
    }
    let mut rng_choices = ctx.rng("choices");
    let (choices, y_true_idx, y_adv_idx) = shuffled_choices(
        texts,
        &pattern,
        adv_pattern.as_deref(),
        &mut rng_choices,
        ctx.shuffle_choices,
    )?;

    let audio_path = ctx.audio_path();
    let seed_path = ctx.segment_path(0);
    let mut provenance = base_provenance(ctx, vec![tts_provider.to_string()]);
    provenance.segments =
        vec![SegmentRef { path: seed_path.clone(), transcript: transcript.to_string() }];
    let params = &mut provenance.transform_params;
    params.insert("pattern".into(), serde_json::Value::String(pattern.clone()));
    params.insert("adv_level".into(), serde_json::Value::String(adv_level.to_string()));
    params.insert(
        "segment_samples".into(),
        serde_json::json!(parts.iter().map(Waveform::len).collect::<Vec<_>>()),
    );
    params.insert(
        "gap_samples".into(),
        serde_json::json!(
            (policy.gap_seconds * f64::from(seed_clip.sample_rate_hz())).round() as usize
        ),
    );
    params.insert("normalized".into(), serde_json::json!(normalized_any));
    let (lo_mag, hi_mag) = match task {
        TaskKind::Speed => (magnitudes.speed_rates.0, magnitudes.speed_rates.1),
        TaskKind::Volume => (magnitudes.gain_db.0, magnitudes.gain_db.1),
        TaskKind::Pitch => (magnitudes.pitch_semitones.0, magnitudes.pitch_semitones.1),
        _ => (magnitudes.range_factors.0, magnitudes.range_factors.1),
    };
    params.insert("low_magnitude".into(), serde_json::json!(lo_mag));
    params.insert("high_magnitude".into(), serde_json::json!(hi_mag));

    let item = McqItem {
        item_id: ctx.item_id.clone(),
        task,
        audio_path: audio_path.clone(),
        transcript: transcript.to_string(),
        question: ctx.questions.question(task).to_string(),
        choices,
        y_true: y_true_idx,
        y_adv: y_adv_idx,
        provenance,
    };
    item.validate()?;
    Ok(BuiltItem { item, files: vec![(audio_path, audio), (seed_path, seed_clip.clone())] })
}

/// Split an assembled comparison clip back into its three segments using the
/// recorded segment lengths. Used by audits that re-measure emitted items.
pub fn split_comparison_audio(item: &McqItem, audio: &Waveform) -> Result<Vec<Waveform>> {
    let lens: Vec<usize> = item
        .provenance
        .transform_params
        .get("segment_samples")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .ok_or_else(|| Error::invalid("item lacks segment_samples provenance"))?;
    let gap: usize = item
        .provenance
        .transform_params
        .get("gap_samples")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as usize;
    let mut out = Vec::with_capacity(lens.len());
    let samples = audio.samples();
    let mut pos = 0usize;
    for (i, len) in lens.iter().enumerate() {
        if pos + len > samples.len() {
            return Err(Error::invalid("segment lengths exceed audio length"));
        }
        out.push(Waveform::new(samples[pos..pos + len].to_vec(), audio.sample_rate_hz())?);
        pos += len;
        if i + 1 < lens.len() {
            pos += gap;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// speaker counting
// ---------------------------------------------------------------------------

/// Build a speaker-counting item: one turn per distinct voice, every turn
/// asserting the same misleading count.
pub fn build_speaker_count_item(
    scripts: &[String],
    misleading_count: usize,
    voices: &[VoiceSpec],
    tts: &dyn TtsClient,
    policy: &ChoicePolicy,
    ctx: &ItemContext<'_>,
) -> Result<BuiltItem> {
    let actual = scripts.len();
    if !(1..=5).contains(&actual) {
        return Err(Error::invalid("speaker counting takes 1 to 5 scripts"));
    }
    if misleading_count == actual {
        return Err(Error::invalid("misleading count must differ from the actual count"));
    }
    if !(1..=20).contains(&misleading_count) {
        return Err(Error::invalid("misleading count must be within 1..=20"));
    }
    if voices.len() != actual {
        return Err(Error::invalid("one voice per script required"));
    }
    let mut ids: Vec<&str> = voices.iter().map(|v| v.voice_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != actual {
        return Err(Error::invalid("voices must be pairwise distinct"));
    }
    let include = text::count_terms(misleading_count);
    let exclude = text::count_terms(actual);
    for s in scripts {
        if !text::passes_lexical_check(s, &include, &exclude) {
            return Err(Error::invalid(format!(
                "turn must assert {misleading_count} and avoid {actual}: {s}"
            )));
        }
    }

    let mut turns = Vec::with_capacity(actual);
    for (script, voice) in scripts.iter().zip(voices) {
        turns.push(tts.synthesize(&TtsJob::plain(script, voice.clone()))?);
    }
    let audio = concat(&turns, policy.gap_seconds)?;

    let y_true_text = actual.to_string();
    let y_adv_text = misleading_count.to_string();
    let mut rng = ctx.rng("distractors");
    let mut texts = vec![y_true_text.clone(), y_adv_text.clone()];
    while texts.len() < 4 {
        let c = rng.gen_range(1..=20usize).to_string();
        if !texts.contains(&c) {
            texts.push(c);
        }
    }
    let mut rng_choices = ctx.rng("choices");
    let (choices, y_true_idx, y_adv_idx) = shuffled_choices(
        texts,
        &y_true_text,
        Some(&y_adv_text),
        &mut rng_choices,
        ctx.shuffle_choices,
    )?;

    let audio_path = ctx.audio_path();
    let mut files = vec![(audio_path.clone(), audio)];
    let mut provenance = base_provenance(ctx, vec![tts.provider_id().to_string()]);
    for (i, (script, turn)) in scripts.iter().zip(&turns).enumerate() {
        let path = ctx.segment_path(i);
        provenance.segments.push(SegmentRef { path: path.clone(), transcript: script.clone() });
        files.push((path, turn.clone()));
    }
    provenance
        .transform_params
        .insert("voice_ids".into(), serde_json::json!(voices.iter().map(|v| &v.voice_id).collect::<Vec<_>>()));

    let item = McqItem {
        item_id: ctx.item_id.clone(),
        task: TaskKind::SpeakerCount,
        audio_path,
        transcript: scripts.join(" "),
        question: ctx.questions.question(TaskKind::SpeakerCount).to_string(),
        choices,
        y_true: y_true_idx,
        y_adv: y_adv_idx,
        provenance,
    };
    item.validate()?;
    Ok(BuiltItem { item, files })
}

// ---------------------------------------------------------------------------
// speaker identity
// ---------------------------------------------------------------------------

fn claimed_ordinal(script: &str) -> Option<usize> {
    text::tokens(script).iter().find_map(|t| text::ordinal_value(t))
}

/// Build a speaker-identity item: `segments` are (script, voice) turns;
/// exactly one non-query turn must reuse the query's voice (the true answer),
/// and exactly one non-query turn must claim the query's ordinal (the
/// transcript-implied misdirection).
pub fn build_speaker_id_item(
    segments: &[(String, VoiceSpec)],
    query_index: usize,
    tts: &dyn TtsClient,
    policy: &ChoicePolicy,
    ctx: &ItemContext<'_>,
) -> Result<BuiltItem> {
    let n = segments.len();
    if !(3..=5).contains(&n) {
        return Err(Error::invalid("speaker identity takes 3 to 5 segments"));
    }
    if query_index >= n {
        return Err(Error::invalid("query index out of range"));
    }
    let query_voice = &segments[query_index].1;
    let matches: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(i, (_, v))| *i != query_index && v.voice_id == query_voice.voice_id)
        .map(|(i, _)| i)
        .collect();
    let y_true_pos = match matches.as_slice() {
        [single] => *single,
        [] => return Err(Error::invalid("no other segment shares the query voice")),
        _ => return Err(Error::invalid("multiple segments share the query voice")),
    };

    let query_ordinal = query_index + 1;
    let claimants: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(i, (script, _))| {
            *i != query_index && claimed_ordinal(script) == Some(query_ordinal)
        })
        .map(|(i, _)| i)
        .collect();
    let y_adv_pos = match claimants.as_slice() {
        [single] => *single,
        [] => {
            return Err(Error::invalid(
                "no non-query segment claims the query ordinal; the transcripts imply no target",
            ));
        }
        _ => return Err(Error::invalid("multiple segments claim the query ordinal")),
    };
    if y_adv_pos == y_true_pos {
        return Err(Error::invalid(
            "the transcript-implied segment coincides with the true match",
        ));
    }

    let mut turns = Vec::with_capacity(n);
    for (script, voice) in segments {
        turns.push(tts.synthesize(&TtsJob::plain(script, voice.clone()))?);
    }
    let audio = concat(&turns, policy.gap_seconds)?;

    let ordinal_text = |pos: usize| -> Result<String> {
        Ok(format!(
            "{} segment",
            text::ordinal_word(pos + 1)
                .ok_or_else(|| Error::invalid("segment position has no ordinal word"))?
        ))
    };
    let mut texts = Vec::new();
    for i in 0..n {
        if i != query_index {
            texts.push(ordinal_text(i)?);
        }
    }
    let y_true_text = ordinal_text(y_true_pos)?;
    let y_adv_text = ordinal_text(y_adv_pos)?;
    let mut rng_choices = ctx.rng("choices");
    let (choices, y_true_idx, y_adv_idx) = shuffled_choices(
        texts,
        &y_true_text,
        Some(&y_adv_text),
        &mut rng_choices,
        ctx.shuffle_choices,
    )?;

    let audio_path = ctx.audio_path();
    let mut files = vec![(audio_path.clone(), audio)];
    let mut provenance = base_provenance(ctx, vec![tts.provider_id().to_string()]);
    for (i, ((script, _), turn)) in segments.iter().zip(&turns).enumerate() {
        let path = ctx.segment_path(i);
        provenance.segments.push(SegmentRef { path: path.clone(), transcript: script.clone() });
        files.push((path, turn.clone()));
    }
    let params = &mut provenance.transform_params;
    params.insert("query_index".into(), serde_json::json!(query_index));
    params.insert("segment_count".into(), serde_json::json!(n));
    params.insert(
        "voice_ids".into(),
        serde_json::json!(segments.iter().map(|(_, v)| &v.voice_id).collect::<Vec<_>>()),
    );

    let item = McqItem {
        item_id: ctx.item_id.clone(),
        task: TaskKind::SpeakerId,
        audio_path,
        transcript: segments.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(" "),
        question: ctx.questions.speaker_id_question(query_ordinal)?,
        choices,
        y_true: y_true_idx,
        y_adv: y_adv_idx,
        provenance,
    };
    item.validate()?;
    Ok(BuiltItem { item, files })
}

// ---------------------------------------------------------------------------
// intonation
// ---------------------------------------------------------------------------

/// Build an intonation item: the SSML contour enforces the true label, the
/// script asserts the opposite word. After synthesis the clip's terminal
/// contour is re-classified; a mismatch rejects the item (logged, not fatal).
pub fn build_intonation_item(
    script: &str,
    contour: ContourLabel,
    voice: &VoiceSpec,
    tts: &dyn TtsClient,
    ctx: &ItemContext<'_>,
) -> Result<BuiltItem> {
    if contour == ContourLabel::Indeterminate {
        return Err(Error::invalid("contour must be rising or falling"));
    }
    let true_word = contour.word();
    let adv_word = contour.opposite().word();
    if !text::passes_lexical_check(script, &[adv_word.to_string()], &[true_word.to_string()]) {
        return Err(Error::invalid(format!(
            "script must assert '{adv_word}' and avoid '{true_word}': {script}"
        )));
    }

    let document = render_ssml(script, contour, voice)?;
    let audio = tts.synthesize(&TtsJob::ssml(document, voice.clone()))?;

    let track = estimate_f0(&audio, &F0Config::default())?;
    let observed = classify_terminal_contour(&track, &ContourConfig::default())?;
    if observed != contour {
        return Err(Error::RejectedItem(format!(
            "{}: synthesized contour classified {} instead of {}",
            ctx.item_id,
            observed.word(),
            true_word
        )));
    }

    let mut rng = ctx.rng("choices");
    let (choices, y_true_idx, y_adv_idx) = shuffled_choices(
        vec![true_word.to_string(), adv_word.to_string()],
        true_word,
        Some(adv_word),
        &mut rng,
        ctx.shuffle_choices,
    )?;

    let audio_path = ctx.audio_path();
    let mut provenance = base_provenance(ctx, vec![tts.provider_id().to_string()]);
    provenance.segments =
        vec![SegmentRef { path: audio_path.clone(), transcript: script.to_string() }];
    provenance
        .transform_params
        .insert("contour".into(), serde_json::Value::String(true_word.to_string()));

    let item = McqItem {
        item_id: ctx.item_id.clone(),
        task: TaskKind::Intonation,
        audio_path: audio_path.clone(),
        transcript: script.to_string(),
        question: ctx.questions.question(TaskKind::Intonation).to_string(),
        choices,
        y_true: y_true_idx,
        y_adv: y_adv_idx,
        provenance,
    };
    item.validate()?;
    Ok(BuiltItem { item, files: vec![(audio_path, audio)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub::{stub_voice_bank, StubTts};

    fn ctx<'a>(id: &str, questions: &'a QuestionTemplates) -> ItemContext<'a> {
        ItemContext { item_id: id.into(), seed: 1234, questions, shuffle_choices: true }
    }

    fn female_voice() -> VoiceSpec {
        stub_voice_bank()
            .into_iter()
            .find(|v| v.attr("gender") == Some("female") && v.attr("age_group") == Some("young"))
            .unwrap()
    }

    #[test]
    fn attribute_item_includes_both_labels() {
        let q = QuestionTemplates::default_set();
        let built = build_attribute_item(
            TaskKind::Gender,
            "female",
            "male",
            "I am a male speaker through and through",
            &female_voice(),
            &StubTts,
            &ctx("gender-0001", &q),
        )
        .unwrap();
        let item = &built.item;
        assert!(item.choices.contains(&"male".to_string()));
        assert!(item.choices.contains(&"female".to_string()));
        assert_eq!(item.true_choice(), "female");
        assert_eq!(item.adv_choice(), Some("male"));
        assert_eq!(built.files.len(), 1);
    }

    #[test]
    fn attribute_item_rejects_contradiction_free_labels() {
        let q = QuestionTemplates::default_set();
        let err = build_attribute_item(
            TaskKind::Age,
            "young",
            "young",
            "I am young",
            &female_voice(),
            &StubTts,
            &ctx("age-0001", &q),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn attribute_item_rejects_metadata_mismatch() {
        let q = QuestionTemplates::default_set();
        let male = stub_voice_bank()
            .into_iter()
            .find(|v| v.attr("gender") == Some("male"))
            .unwrap();
        let err = build_attribute_item(
            TaskKind::Gender,
            "female",
            "male",
            "I am a male speaker",
            &male,
            &StubTts,
            &ctx("gender-0002", &q),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    fn stub_seed_clip(text: &str) -> Waveform {
        StubTts.synthesize(&TtsJob::plain(text, female_voice())).unwrap()
    }

    #[test]
    fn comparison_item_measures_consistent_with_pattern() {
        let q = QuestionTemplates::default_set();
        let seed = stub_seed_clip("i am speaking with a high pitch as you can tell");
        for task in [TaskKind::Pitch, TaskKind::Volume, TaskKind::Speed, TaskKind::Range] {
            let built = build_signal_comparison_item(
                task,
                &seed,
                "i am speaking with a high pitch as you can tell",
                "high",
                &ComparisonMagnitudes::default(),
                &ChoicePolicy::default(),
                "stub-tts",
                &ctx(&format!("{task}-0001"), &q),
            )
            .unwrap();
            let item = &built.item;
            assert_eq!(item.choices.len(), 4);
            assert!(item.y_adv.is_some());
            // re-split the emitted audio and re-measure
            let audio = &built.files[0].1;
            let parts = split_comparison_audio(item, audio).unwrap();
            let levels: Vec<&str> = item.true_choice().split('-').collect();
            let measures: Vec<f64> =
                parts.iter().map(|p| measure_segment(task, p).unwrap()).collect();
            for i in 0..3 {
                for j in 0..3 {
                    if level_rank(levels[i]) < level_rank(levels[j]) {
                        assert!(
                            measures[i] < measures[j],
                            "{task}: {measures:?} vs {levels:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn comparison_pattern_is_reproducible_across_runs() {
        let q = QuestionTemplates::default_set();
        let seed = stub_seed_clip("my voice is high today believe me");
        let build = || {
            build_signal_comparison_item(
                TaskKind::Volume,
                &seed,
                "my voice is high today believe me",
                "high",
                &ComparisonMagnitudes::default(),
                &ChoicePolicy::default(),
                "stub-tts",
                &ctx("volume-0007", &q),
            )
            .unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a.item, b.item);
        assert_eq!(a.files[0].1.samples(), b.files[0].1.samples());
    }

    #[test]
    fn speaker_count_item_with_three_turns() {
        let q = QuestionTemplates::default_set();
        let bank = stub_voice_bank();
        let scripts = vec![
            "i promise there is only one of us speaking".to_string(),
            "just one voice here believe me".to_string(),
            "count again there is one speaker".to_string(),
        ];
        let built = build_speaker_count_item(
            &scripts,
            1,
            &bank[0..3],
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("speaker_count-0001", &q),
        )
        .unwrap();
        assert_eq!(built.item.true_choice(), "3");
        assert_eq!(built.item.adv_choice(), Some("1"));
        assert_eq!(built.item.choices.len(), 4);
        assert_eq!(built.files.len(), 4); // item audio + 3 turn sidecars
    }

    #[test]
    fn speaker_count_rejects_equal_counts_and_duplicate_voices() {
        let q = QuestionTemplates::default_set();
        let bank = stub_voice_bank();
        let scripts =
            vec!["there are two of us".to_string(), "exactly two voices".to_string()];
        assert!(build_speaker_count_item(
            &scripts,
            2,
            &bank[0..2],
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("sc-0002", &q)
        )
        .is_err());
        let dup = vec![bank[0].clone(), bank[0].clone()];
        let scripts =
            vec!["only one of us here".to_string(), "one voice speaking".to_string()];
        assert!(build_speaker_count_item(
            &scripts,
            1,
            &dup,
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("sc-0003", &q)
        )
        .is_err());
    }

    fn id_segments(voice_pattern: &[usize]) -> Vec<(String, VoiceSpec)> {
        // query (index 0) claims its own ordinal; segment 1 claims the query's
        // ordinal (misdirection); the rest claim their own.
        let bank = stub_voice_bank();
        voice_pattern
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let claim = if i == 1 { 1 } else { i + 1 };
                let word = text::ordinal_word(claim).unwrap();
                (format!("hi i am the {word} speaker"), bank[*v].clone())
            })
            .collect()
    }

    #[test]
    fn speaker_id_item_resolves_true_and_adv_targets() {
        let q = QuestionTemplates::default_set();
        let segments = id_segments(&[0, 1, 0, 2]); // voices A B A C
        let built = build_speaker_id_item(
            &segments,
            0,
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("speaker_id-0001", &q),
        )
        .unwrap();
        assert_eq!(built.item.true_choice(), "third segment");
        assert_eq!(built.item.adv_choice(), Some("second segment"));
        assert_eq!(built.item.choices.len(), 3);
        assert!(built.item.question.contains("first"));
    }

    #[test]
    fn speaker_id_rejects_zero_or_multiple_voice_matches() {
        let q = QuestionTemplates::default_set();
        let none = id_segments(&[0, 1, 2, 3]);
        assert!(build_speaker_id_item(
            &none,
            0,
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("si-0002", &q)
        )
        .is_err());
        let multi = id_segments(&[0, 0, 0, 1]);
        assert!(build_speaker_id_item(
            &multi,
            0,
            &StubTts,
            &ChoicePolicy::default(),
            &ctx("si-0003", &q)
        )
        .is_err());
    }

    #[test]
    fn intonation_item_checks_the_synthesized_contour() {
        let q = QuestionTemplates::default_set();
        let built = build_intonation_item(
            "my intonation is falling can you hear it",
            ContourLabel::Rising,
            &female_voice(),
            &StubTts,
            &ctx("intonation-0001", &q),
        )
        .unwrap();
        assert_eq!(built.item.true_choice(), "rising");
        assert_eq!(built.item.adv_choice(), Some("falling"));
    }

    #[test]
    fn intonation_rejects_script_asserting_the_true_word() {
        let q = QuestionTemplates::default_set();
        let err = build_intonation_item(
            "my intonation is rising can you hear it",
            ContourLabel::Rising,
            &female_voice(),
            &StubTts,
            &ctx("intonation-0002", &q),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn choice_shuffle_never_moves_label_texts() {
        let q = QuestionTemplates::default_set();
        for i in 0..20 {
            let built = build_attribute_item(
                TaskKind::Age,
                "old",
                "young",
                "i am young and full of energy",
                &stub_voice_bank()
                    .into_iter()
                    .find(|v| v.attr("age_group") == Some("old"))
                    .unwrap(),
                &StubTts,
                &ItemContext {
                    item_id: format!("age-{i:04}"),
                    seed: i,
                    questions: &q,
                    shuffle_choices: true,
                },
            )
            .unwrap();
            assert_eq!(built.item.true_choice(), "old");
            assert_eq!(built.item.adv_choice(), Some("young"));
        }
    }
}
