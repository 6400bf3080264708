//! The transformation pipeline: translation into the working language,
//! summaries at three lengths, storyboards, the storyboard → image → caption
//! round trip, and back-translation.

mod prompts;

pub use prompts::{PromptSet, IMAGE_CAPTION_PROMPT, LONG_SUMMARY_PROMPT, MEDIUM_SUMMARY_PROMPT, SHORT_SUMMARY_PROMPT, STORYBOARD_PROMPT};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Group, Split};
use crate::providers::{map_bounded, Provider, ProviderError, ProviderKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformationKind {
    Original,
    Translated,
    ShortSummary,
    MediumSummary,
    LongSummary,
    Storyboard,
    ImageDescription,
    BackTranslated,
}

impl TransformationKind {
    pub const ALL: [TransformationKind; 8] = [
        TransformationKind::Original,
        TransformationKind::Translated,
        TransformationKind::ShortSummary,
        TransformationKind::MediumSummary,
        TransformationKind::LongSummary,
        TransformationKind::Storyboard,
        TransformationKind::ImageDescription,
        TransformationKind::BackTranslated,
    ];

    /// Kinds produced by generation from the working-language text.
    pub const GENERATED: [TransformationKind; 5] = [
        TransformationKind::ShortSummary,
        TransformationKind::MediumSummary,
        TransformationKind::LongSummary,
        TransformationKind::Storyboard,
        TransformationKind::ImageDescription,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TransformationKind::Original => "Original",
            TransformationKind::Translated => "Translated",
            TransformationKind::ShortSummary => "ShortSummary",
            TransformationKind::MediumSummary => "MediumSummary",
            TransformationKind::LongSummary => "LongSummary",
            TransformationKind::Storyboard => "Storyboard",
            TransformationKind::ImageDescription => "ImageDescription",
            TransformationKind::BackTranslated => "BackTranslated",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TransformationKind::Original => "Original",
            TransformationKind::Translated => "Translated",
            TransformationKind::ShortSummary => "Short Summary",
            TransformationKind::MediumSummary => "Medium Summary",
            TransformationKind::LongSummary => "Long Summary",
            TransformationKind::Storyboard => "Storyboard",
            TransformationKind::ImageDescription => "Image Description",
            TransformationKind::BackTranslated => "Back Translated",
        }
    }

    /// Pipeline step number used in report tables.
    pub fn step(&self) -> u8 {
        match self {
            TransformationKind::Original => 0,
            TransformationKind::Translated | TransformationKind::BackTranslated => 1,
            TransformationKind::ImageDescription => 3,
            _ => 2,
        }
    }

    /// File-name form, e.g. `short_summary`.
    pub fn slug(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.as_str().chars().enumerate() {
            if c.is_ascii_uppercase() && i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        }
        out
    }
}

impl fmt::Display for TransformationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm: String = s.chars().filter(|c| *c != '_' && *c != ' ' && *c != '-').collect();
        TransformationKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| format!("unknown transformation kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryLength {
    Short,
    Medium,
    Long,
}

impl SummaryLength {
    pub fn kind(&self) -> TransformationKind {
        match self {
            SummaryLength::Short => TransformationKind::ShortSummary,
            SummaryLength::Medium => TransformationKind::MediumSummary,
            SummaryLength::Long => TransformationKind::LongSummary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub source_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformedCorpus {
    pub kind: TransformationKind,
    pub dataset_name: String,
    pub language: String,
    pub items: Vec<CorpusItem>,
    /// Cache keys behind each item, upstream stages first. Empty for `Original`.
    pub provenance: Vec<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("dataset is already in {0:?}; skip the translation step")]
    SameLanguage(String),
    #[error("empty input text")]
    EmptyInput,
    #[error("{stage} failed for item {id:?}: {source}")]
    Provider { stage: &'static str, id: String, source: ProviderError },
    #[error("{stage} failed: {source}")]
    Stage { stage: &'static str, source: ProviderError },
    #[error("expected a {expected} corpus, got {found}")]
    WrongKind { expected: TransformationKind, found: TransformationKind },
    #[error("{kind} completed {completed}/{total} items (required {required:.0}%); first failure: {first_failure}")]
    Incomplete { kind: TransformationKind, completed: usize, total: usize, required: f64, first_failure: String },
    #[error("no {0} provider configured")]
    MissingProvider(ProviderKind),
    #[error("corpus line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl TransformedCorpus {
    pub fn original(d: &Dataset) -> Self {
        TransformedCorpus {
            kind: TransformationKind::Original,
            dataset_name: d.name.clone(),
            language: d.source_language.clone(),
            items: d.transcripts.iter().map(|t| CorpusItem { source_id: t.id.clone(), text: t.text.clone() }).collect(),
            provenance: vec![Vec::new(); d.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.source_id.as_str()).collect()
    }

    pub fn text_of(&self, id: &str) -> Option<&str> {
        self.items.iter().find(|i| i.source_id == id).map(|i| i.text.as_str())
    }

    /// Keep only items whose id is in `keep`, preserving order.
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> Self {
        let mut out = self.clone();
        let mask: Vec<bool> = self.items.iter().map(|i| keep.contains(&i.source_id)).collect();
        out.items = self.items.iter().zip(&mask).filter(|(_, m)| **m).map(|(i, _)| i.clone()).collect();
        out.provenance = self.provenance.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p.clone()).collect();
        out
    }

    /// One line per item in the dataset schema plus a `kind` field. Group and
    /// split come from `dataset`.
    pub fn write_jsonl<W: Write>(&self, dataset: &Dataset, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            text: &'a str,
            group: Group,
            #[serde(skip_serializing_if = "Option::is_none")]
            split: Option<Split>,
            language: &'a str,
            kind: TransformationKind,
        }
        let meta: HashMap<&str, (Group, Option<Split>)> =
            dataset.transcripts.iter().map(|t| (t.id.as_str(), (t.group, t.split))).collect();
        for item in &self.items {
            let (group, split) = meta.get(item.source_id.as_str()).copied().ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("id {:?} not in dataset", item.source_id))
            })?;
            let line = Line { id: &item.source_id, text: &item.text, group, split, language: &self.language, kind: self.kind };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Inverse of [`write_jsonl`](Self::write_jsonl); provenance is left empty.
    pub fn parse_jsonl(dataset_name: &str, content: &str) -> Result<Self, TransformError> {
        #[derive(Deserialize)]
        struct Line {
            id: String,
            text: String,
            language: String,
            kind: TransformationKind,
        }
        let mut items = Vec::new();
        let mut kind = None;
        let mut language = String::new();
        for (i, raw) in content.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line =
                serde_json::from_str(raw).map_err(|e| TransformError::Parse { line: i + 1, msg: e.to_string() })?;
            match kind {
                None => kind = Some(line.kind),
                Some(k) if k != line.kind => {
                    return Err(TransformError::Parse { line: i + 1, msg: format!("mixed kinds {k} and {}", line.kind) })
                }
                _ => {}
            }
            language = line.language;
            items.push(CorpusItem { source_id: line.id, text: line.text });
        }
        let kind = kind.ok_or(TransformError::Parse { line: 0, msg: "empty corpus file".into() })?;
        let provenance = vec![Vec::new(); items.len()];
        Ok(TransformedCorpus { kind, dataset_name: dataset_name.to_string(), language, items, provenance })
    }
}

/// Translate every transcript into `target`.
pub fn translate_corpus(d: &Dataset, target: &str, provider: &Provider, max_in_flight: usize) -> Result<TransformedCorpus, TransformError> {
    if d.source_language.eq_ignore_ascii_case(target) {
        return Err(TransformError::SameLanguage(d.source_language.clone()));
    }
    let results = map_bounded(&d.transcripts, max_in_flight, |t| {
        provider
            .translate_keyed(&t.text, &d.source_language, target)
            .map_err(|source| TransformError::Provider { stage: "translate", id: t.id.clone(), source })
    });
    let mut items = Vec::with_capacity(d.len());
    let mut provenance = Vec::with_capacity(d.len());
    for (t, r) in d.transcripts.iter().zip(results) {
        let keyed = r?;
        items.push(CorpusItem { source_id: t.id.clone(), text: keyed.value });
        provenance.push(vec![keyed.cache_key]);
    }
    Ok(TransformedCorpus {
        kind: TransformationKind::Translated,
        dataset_name: d.name.clone(),
        language: target.to_string(),
        items,
        provenance,
    })
}

/// Summarize with the configured prompt for `length`. Returns the completion
/// verbatim along with its cache key.
pub fn summarize(text: &str, length: SummaryLength, provider: &Provider, prompts: &PromptSet) -> Result<(String, String), TransformError> {
    if text.trim().is_empty() {
        return Err(TransformError::EmptyInput);
    }
    let keyed = provider
        .chat_generate_keyed(prompts.get(length.kind()), text)
        .map_err(|source| TransformError::Stage { stage: "chat", source })?;
    Ok((keyed.value, keyed.cache_key))
}

pub fn storyboard(text: &str, provider: &Provider, prompts: &PromptSet) -> Result<(String, String), TransformError> {
    if text.trim().is_empty() {
        return Err(TransformError::EmptyInput);
    }
    let keyed = provider
        .chat_generate_keyed(prompts.get(TransformationKind::Storyboard), text)
        .map_err(|source| TransformError::Stage { stage: "chat", source })?;
    Ok((keyed.value, keyed.cache_key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    /// One image for the whole storyboard.
    #[default]
    PerStoryboard,
    /// One image per scene; captions are joined with blank lines.
    PerScene,
}

/// Split storyboard text into scenes: blank-line separated blocks, or lines
/// starting with a scene number when there are no blank lines.
pub fn split_scenes(storyboard: &str) -> Vec<String> {
    let blocks: Vec<String> = storyboard
        .split("\n\n")
        .map(|b| b.trim().to_string())
        .filter(|b| !b.is_empty())
        .collect();
    if blocks.len() > 1 {
        return blocks;
    }
    let mut scenes: Vec<String> = Vec::new();
    for line in storyboard.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let numbered = trimmed.split_once('.').map(|(n, _)| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit())).unwrap_or(false);
        match scenes.last_mut() {
            Some(last) if !numbered => {
                last.push('\n');
                last.push_str(trimmed);
            }
            _ => scenes.push(trimmed.to_string()),
        }
    }
    if scenes.is_empty() {
        vec![storyboard.trim().to_string()]
    } else {
        scenes
    }
}

/// Storyboard → image → caption. Returns the caption and the cache keys of
/// every image and caption produced, in order.
pub fn image_roundtrip(
    storyboard_text: &str,
    t2i: &Provider,
    i2t: &Provider,
    caption_prompt: &str,
    mode: ImageMode,
) -> Result<(String, Vec<String>), TransformError> {
    if storyboard_text.trim().is_empty() {
        return Err(TransformError::EmptyInput);
    }
    let scenes = match mode {
        ImageMode::PerStoryboard => vec![storyboard_text.to_string()],
        ImageMode::PerScene => split_scenes(storyboard_text),
    };
    let mut keys = Vec::new();
    let mut captions = Vec::new();
    for scene in &scenes {
        let image = t2i
            .text_to_image_keyed(scene)
            .map_err(|source| TransformError::Stage { stage: "text_to_image", source })?;
        keys.push(image.cache_key.clone());
        let caption = i2t
            .image_to_text_keyed(&image.value, caption_prompt)
            .map_err(|source| TransformError::Stage { stage: "image_to_text", source })?;
        keys.push(caption.cache_key);
        captions.push(caption.value);
    }
    Ok((captions.join("\n\n"), keys))
}

/// Translate a translated corpus back into `target` (normally the source language).
pub fn back_translate(corpus: &TransformedCorpus, target: &str, provider: &Provider, max_in_flight: usize) -> Result<TransformedCorpus, TransformError> {
    if corpus.kind != TransformationKind::Translated {
        return Err(TransformError::WrongKind { expected: TransformationKind::Translated, found: corpus.kind });
    }
    let indexed: Vec<usize> = (0..corpus.items.len()).collect();
    let results = map_bounded(&indexed, max_in_flight, |&i| {
        let item = &corpus.items[i];
        provider
            .translate_keyed(&item.text, &corpus.language, target)
            .map_err(|source| TransformError::Provider { stage: "back_translate", id: item.source_id.clone(), source })
    });
    let mut items = Vec::new();
    let mut provenance = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let keyed = r?;
        items.push(CorpusItem { source_id: corpus.items[i].source_id.clone(), text: keyed.value });
        let mut chain = corpus.provenance.get(i).cloned().unwrap_or_default();
        chain.push(keyed.cache_key);
        provenance.push(chain);
    }
    Ok(TransformedCorpus {
        kind: TransformationKind::BackTranslated,
        dataset_name: corpus.dataset_name.clone(),
        language: target.to_string(),
        items,
        provenance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FailureMode {
    /// Every item of every kind must succeed.
    Strict,
    /// A kind is kept when at least `threshold` of its items succeed.
    Lenient { threshold: f64 },
}

impl Default for FailureMode {
    fn default() -> Self {
        FailureMode::Strict
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub enabled: BTreeSet<TransformationKind>,
    pub target_language: String,
    pub prompts: PromptSet,
    pub failure_mode: FailureMode,
    pub image_mode: ImageMode,
    pub max_in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            enabled: TransformationKind::ALL.into_iter().collect(),
            target_language: "en".into(),
            prompts: PromptSet::default(),
            failure_mode: FailureMode::Strict,
            image_mode: ImageMode::PerStoryboard,
            max_in_flight: 4,
        }
    }
}

/// Providers by role. Only the roles needed by the enabled kinds must be set.
#[derive(Debug, Default)]
pub struct ProviderSet {
    pub chat: Option<Provider>,
    pub translate: Option<Provider>,
    pub text_to_image: Option<Provider>,
    pub image_to_text: Option<Provider>,
}

impl ProviderSet {
    fn need<'a>(p: &'a Option<Provider>, kind: ProviderKind) -> Result<&'a Provider, TransformError> {
        p.as_ref().ok_or(TransformError::MissingProvider(kind))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub kind: TransformationKind,
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub corpora: BTreeMap<TransformationKind, TransformedCorpus>,
    pub failures: Vec<ItemFailure>,
}

type ItemResult = Result<(String, Vec<String>), String>;

struct Collector<'a> {
    dataset: &'a Dataset,
    mode: FailureMode,
    failures: Vec<ItemFailure>,
}

impl Collector<'_> {
    /// Assemble a corpus from per-item results (aligned with dataset order),
    /// recording failures and enforcing the failure mode.
    fn assemble(&mut self, kind: TransformationKind, language: &str, results: Vec<Option<ItemResult>>) -> Result<TransformedCorpus, TransformError> {
        let total = self.dataset.len();
        let mut items = Vec::new();
        let mut provenance = Vec::new();
        for (t, r) in self.dataset.transcripts.iter().zip(results) {
            match r {
                Some(Ok((text, keys))) => {
                    items.push(CorpusItem { source_id: t.id.clone(), text });
                    provenance.push(keys);
                }
                Some(Err(error)) => self.failures.push(ItemFailure { kind, id: t.id.clone(), error }),
                None => self.failures.push(ItemFailure { kind, id: t.id.clone(), error: "upstream stage failed".into() }),
            }
        }
        let first_failure = self.failures.iter().find(|f| f.kind == kind).map(|f| format!("{}: {}", f.id, f.error));
        let completed = items.len();
        let required = match self.mode {
            FailureMode::Strict => 1.0,
            FailureMode::Lenient { threshold } => threshold,
        };
        if (completed as f64) < required * total as f64 || completed == 0 {
            return Err(TransformError::Incomplete {
                kind,
                completed,
                total,
                required: required * 100.0,
                first_failure: first_failure.unwrap_or_else(|| "none".into()),
            });
        }
        Ok(TransformedCorpus { kind, dataset_name: self.dataset.name.clone(), language: language.to_string(), items, provenance })
    }
}

/// Per-dataset-row view of an upstream corpus: `None` where the item is missing.
fn aligned<'a>(d: &Dataset, c: &'a TransformedCorpus) -> Vec<Option<(&'a str, &'a [String])>> {
    let by_id: HashMap<&str, usize> = c.items.iter().enumerate().map(|(i, it)| (it.source_id.as_str(), i)).collect();
    d.transcripts
        .iter()
        .map(|t| by_id.get(t.id.as_str()).map(|&i| (c.items[i].text.as_str(), c.provenance[i].as_slice())))
        .collect()
}

/// Run every enabled transformation in dependency order.
///
/// Datasets already in the target language skip translation and
/// back-translation. Generated kinds are derived from the translated text when
/// translation applies, and image descriptions from the storyboards.
pub fn run_pipeline(d: &Dataset, cfg: &PipelineConfig, providers: &ProviderSet) -> Result<PipelineOutput, TransformError> {
    use TransformationKind as K;
    let translating = !d.source_language.eq_ignore_ascii_case(&cfg.target_language);
    let wants = |k: K| cfg.enabled.contains(&k);
    let mut col = Collector { dataset: d, mode: cfg.failure_mode, failures: Vec::new() };
    let mut corpora = BTreeMap::new();
    let limit = cfg.max_in_flight;

    let original = TransformedCorpus::original(d);
    if wants(K::Original) {
        corpora.insert(K::Original, original.clone());
    }

    let needs_generated = K::GENERATED.iter().any(|k| wants(*k));
    let base = if translating && (wants(K::Translated) || wants(K::BackTranslated) || needs_generated) {
        let tp = ProviderSet::need(&providers.translate, ProviderKind::Translate)?;
        let results = map_bounded(&d.transcripts, limit, |t| {
            Some(
                tp.translate_keyed(&t.text, &d.source_language, &cfg.target_language)
                    .map(|k| (k.value, vec![k.cache_key]))
                    .map_err(|e| e.to_string()),
            )
        });
        let translated = col.assemble(K::Translated, &cfg.target_language, results)?;
        if wants(K::Translated) {
            corpora.insert(K::Translated, translated.clone());
        }
        translated
    } else {
        original
    };

    if translating && wants(K::BackTranslated) {
        let tp = ProviderSet::need(&providers.translate, ProviderKind::Translate)?;
        let upstream = aligned(d, &base);
        let results = map_bounded(&upstream, limit, |u| {
            u.map(|(text, chain)| {
                tp.translate_keyed(text, &cfg.target_language, &d.source_language)
                    .map(|k| {
                        let mut keys = chain.to_vec();
                        keys.push(k.cache_key);
                        (k.value, keys)
                    })
                    .map_err(|e| e.to_string())
            })
        });
        corpora.insert(K::BackTranslated, col.assemble(K::BackTranslated, &d.source_language, results)?);
    }

    let chat_kinds: Vec<K> = [K::ShortSummary, K::MediumSummary, K::LongSummary, K::Storyboard]
        .into_iter()
        .filter(|k| wants(*k) || (*k == K::Storyboard && wants(K::ImageDescription)))
        .collect();
    let upstream = aligned(d, &base);
    let mut storyboards = None;
    for kind in chat_kinds {
        let chat = ProviderSet::need(&providers.chat, ProviderKind::Chat)?;
        let prompt = cfg.prompts.get(kind);
        let results = map_bounded(&upstream, limit, |u| {
            u.map(|(text, chain)| {
                chat.chat_generate_keyed(prompt, text)
                    .map(|k| {
                        let mut keys = chain.to_vec();
                        keys.push(k.cache_key);
                        (k.value, keys)
                    })
                    .map_err(|e| e.to_string())
            })
        });
        let corpus = col.assemble(kind, &cfg.target_language, results)?;
        if kind == K::Storyboard {
            storyboards = Some(corpus.clone());
        }
        if wants(kind) {
            corpora.insert(kind, corpus);
        }
    }

    if wants(K::ImageDescription) {
        let t2i = ProviderSet::need(&providers.text_to_image, ProviderKind::TextToImage)?;
        let i2t = ProviderSet::need(&providers.image_to_text, ProviderKind::ImageToText)?;
        let boards = storyboards.expect("storyboards computed when image descriptions are enabled");
        let upstream = aligned(d, &boards);
        let caption_prompt = cfg.prompts.get(K::ImageDescription);
        let results = map_bounded(&upstream, limit, |u| {
            u.map(|(text, chain)| {
                image_roundtrip(text, t2i, i2t, caption_prompt, cfg.image_mode)
                    .map(|(caption, keys)| {
                        let mut all = chain.to_vec();
                        all.extend(keys);
                        (caption, all)
                    })
                    .map_err(|e| e.to_string())
            })
        });
        corpora.insert(K::ImageDescription, col.assemble(K::ImageDescription, &cfg.target_language, results)?);
    }

    Ok(PipelineOutput { corpora, failures: col.failures })
}
