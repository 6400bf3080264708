//! Run configuration: flat `key = value` lines, `#` comments.
//!
//! Relative paths are resolved against the run directory. Provider roles
//! default to the offline mock backends.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{derive_seeds, TrainConfig};
use crate::corpus::DatasetFormat;
use crate::providers::{ProviderConfig, ProviderKind, RetryPolicy};
use crate::textmetrics::MetricConfig;
use crate::transform::{FailureMode, ImageMode, PipelineConfig, TransformationKind};

#[derive(Debug, Error)]
#[error("config line {line}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// Fixed split when every transcript carries a split tag, else k-fold.
    Auto,
    CrossValidation,
    FixedSplit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaggerChoice {
    Baseline,
    /// Directory of `<kind_slug>.jsonl` annotation files.
    External(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub dataset_format: Option<DatasetFormat>,
    pub target_language: String,
    pub pipeline: PipelineConfig,
    /// Indexed like [`ProviderKind::ALL`].
    pub providers: Vec<ProviderConfig>,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub evaluation: Evaluation,
    pub train: TrainConfig,
    pub metrics: MetricConfig,
    pub cache_dir: PathBuf,
    pub http_timeout: Duration,
    pub retry: RetryPolicy,
    pub freq_table: Option<PathBuf>,
    pub oov_floor: Option<f64>,
    pub tagger: TaggerChoice,
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn provider(&self, kind: ProviderKind) -> &ProviderConfig {
        let i = ProviderKind::ALL.iter().position(|k| *k == kind).expect("known kind");
        &self.providers[i]
    }

    /// Key/value pairs as written, after comment stripping.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// SHA-256 over the sorted key/value pairs, so formatting and key order do
    /// not matter.
    pub fn digest(&self) -> String {
        digest_entries(&self.entries)
    }

    pub fn parse(content: &str) -> Result<RunConfig, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut lines = BTreeMap::new();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError { line: i + 1, msg: format!("expected `key = value`, got {line:?}") })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(ConfigError { line: i + 1, msg: format!("duplicate key {k:?}") });
            }
            lines.insert(k, i + 1);
        }
        Self::from_entries(entries, &lines)
    }

    pub fn from_entries(entries: BTreeMap<String, String>, lines: &BTreeMap<String, usize>) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig {
            dataset: PathBuf::new(),
            dataset_format: None,
            target_language: "en".into(),
            pipeline: PipelineConfig::default(),
            providers: ProviderKind::ALL.iter().map(|k| ProviderConfig::mock(*k)).collect(),
            k: 5,
            seeds: Vec::new(),
            evaluation: Evaluation::Auto,
            train: TrainConfig::default(),
            metrics: MetricConfig::default(),
            cache_dir: PathBuf::from("cache"),
            http_timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
            freq_table: None,
            oov_floor: None,
            tagger: TaggerChoice::Baseline,
            entries: BTreeMap::new(),
        };
        let mut runs = 10usize;
        let mut master_seed = 0u64;
        let mut explicit_seeds = None;
        let mut lenient_threshold = None;
        let mut lenient = false;
        let mut tagger = "baseline".to_string();
        let mut pos_dir = None;

        for (key, value) in &entries {
            let at = |msg: String| ConfigError { line: lines.get(key).copied().unwrap_or(0), msg };
            let bad = |e: String| at(format!("{key}: {e}"));
            match key.as_str() {
                "dataset" => cfg.dataset = PathBuf::from(value),
                "dataset_format" => cfg.dataset_format = Some(parse(value).map_err(bad)?),
                "target_language" => cfg.target_language = value.clone(),
                "kinds" => {
                    let mut set = BTreeSet::new();
                    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        set.insert(TransformationKind::from_str(part).map_err(bad)?);
                    }
                    set.insert(TransformationKind::Original);
                    cfg.pipeline.enabled = set;
                }
                "failure_mode" => match value.as_str() {
                    "strict" => lenient = false,
                    "lenient" => lenient = true,
                    other => return Err(bad(format!("expected strict or lenient, got {other:?}"))),
                },
                "lenient_threshold" => lenient_threshold = Some(parse::<f64>(value).map_err(bad)?),
                "image_mode" => {
                    cfg.pipeline.image_mode = match value.as_str() {
                        "per_storyboard" => ImageMode::PerStoryboard,
                        "per_scene" => ImageMode::PerScene,
                        other => return Err(bad(format!("expected per_storyboard or per_scene, got {other:?}"))),
                    }
                }
                "max_in_flight" => cfg.pipeline.max_in_flight = positive(value).map_err(bad)?,
                "k" => cfg.k = parse(value).map_err(bad)?,
                "runs" => runs = positive(value).map_err(bad)?,
                "master_seed" => master_seed = parse(value).map_err(bad)?,
                "seeds" => {
                    explicit_seeds = Some(
                        value
                            .split(',')
                            .map(|s| parse::<u64>(s.trim()))
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(bad)?,
                    )
                }
                "evaluation" => {
                    cfg.evaluation = match value.as_str() {
                        "auto" => Evaluation::Auto,
                        "cv" => Evaluation::CrossValidation,
                        "fixed" => Evaluation::FixedSplit,
                        other => return Err(bad(format!("expected auto, cv or fixed, got {other:?}"))),
                    }
                }
                "cache_dir" => cfg.cache_dir = PathBuf::from(value),
                "http_timeout_secs" => cfg.http_timeout = Duration::from_secs(positive(value).map_err(bad)? as u64),
                "retry.max_attempts" => cfg.retry.max_attempts = positive(value).map_err(bad)? as u32,
                "retry.base_delay_ms" => cfg.retry.base_delay = Duration::from_millis(parse(value).map_err(bad)?),
                "train.max_epochs" => cfg.train.max_epochs = parse(value).map_err(bad)?,
                "train.steps_per_epoch" => cfg.train.steps_per_epoch = parse(value).map_err(bad)?,
                "train.patience" => cfg.train.early_stop_patience = parse(value).map_err(bad)?,
                "train.learning_rate" => cfg.train.learning_rate = parse(value).map_err(bad)?,
                "train.l2" => cfg.train.l2 = parse(value).map_err(bad)?,
                "train.validation_fraction" => cfg.train.validation_fraction = parse(value).map_err(bad)?,
                "train.class_weighting" => cfg.train.class_weighting = parse(value).map_err(bad)?,
                "bleu.max_n" => cfg.metrics.bleu.max_n = positive(value).map_err(bad)?,
                "bleu.epsilon" => {
                    cfg.metrics.bleu.epsilon = if value == "none" { None } else { Some(parse(value).map_err(bad)?) }
                }
                "chrf.max_n" => cfg.metrics.chrf.max_n = positive(value).map_err(bad)?,
                "chrf.beta" => cfg.metrics.chrf.beta = parse(value).map_err(bad)?,
                "freq_table" => cfg.freq_table = Some(PathBuf::from(value)),
                "oov_floor" => cfg.oov_floor = Some(parse(value).map_err(bad)?),
                "tagger" => tagger = value.clone(),
                "pos_annotations_dir" => pos_dir = Some(PathBuf::from(value)),
                other => {
                    if let Some(slug) = other.strip_prefix("prompt.") {
                        let kind = TransformationKind::from_str(slug).map_err(bad)?;
                        cfg.pipeline.prompts.set(kind, value.clone()).map_err(bad)?;
                    } else if let Some((role, field)) = other.split_once('.') {
                        let kind = ProviderKind::from_str(role).map_err(|_| at(format!("unknown key {other:?}")))?;
                        let i = ProviderKind::ALL.iter().position(|k| *k == kind).expect("known kind");
                        set_provider_field(&mut cfg.providers[i], field, value).map_err(|e| {
                            at(if e.is_empty() { format!("unknown key {other:?}") } else { format!("{other}: {e}") })
                        })?;
                    } else {
                        return Err(at(format!("unknown key {other:?}")));
                    }
                }
            }
        }

        let at_key = |key: &str, msg: String| ConfigError { line: lines.get(key).copied().unwrap_or(0), msg };
        if cfg.dataset.as_os_str().is_empty() {
            return Err(at_key("dataset", "missing required key `dataset`".into()));
        }
        if !crate::corpus::is_well_formed_language_tag(&cfg.target_language) {
            return Err(at_key("target_language", format!("malformed language tag {:?}", cfg.target_language)));
        }
        cfg.pipeline.target_language = cfg.target_language.clone();
        cfg.pipeline.failure_mode = match (lenient, lenient_threshold) {
            (false, None) => FailureMode::Strict,
            (false, Some(_)) => return Err(at_key("lenient_threshold", "lenient_threshold needs failure_mode = lenient".into())),
            (true, t) => {
                let threshold = t.unwrap_or(0.9);
                if !(threshold > 0.0 && threshold <= 1.0) {
                    return Err(at_key("lenient_threshold", format!("threshold must be in (0, 1], got {threshold}")));
                }
                FailureMode::Lenient { threshold }
            }
        };
        cfg.seeds = match explicit_seeds {
            Some(s) if s.is_empty() => return Err(at_key("seeds", "empty seed list".into())),
            Some(s) => {
                if entries.contains_key("runs") && s.len() != runs {
                    return Err(at_key("seeds", format!("{} seeds listed but runs = {runs}", s.len())));
                }
                s
            }
            None => derive_seeds(master_seed, runs),
        };
        if cfg.k < 2 {
            return Err(at_key("k", format!("k must be at least 2, got {}", cfg.k)));
        }
        cfg.train.validate().map_err(|e| at_key("train.max_epochs", e.to_string()))?;
        cfg.tagger = match (tagger.as_str(), pos_dir) {
            ("baseline", None) => TaggerChoice::Baseline,
            ("baseline", Some(_)) => return Err(at_key("pos_annotations_dir", "pos_annotations_dir needs tagger = external".into())),
            ("external", Some(d)) => TaggerChoice::External(d),
            ("external", None) => return Err(at_key("tagger", "tagger = external needs pos_annotations_dir".into())),
            (other, _) => return Err(at_key("tagger", format!("expected baseline or external, got {other:?}"))),
        };
        for p in &cfg.providers {
            p.validate().map_err(|e| at_key(&format!("{}.endpoint", p.kind), e.to_string()))?;
        }
        cfg.entries = entries;
        Ok(cfg)
    }

    pub fn resolve(&self, run_dir: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            run_dir.join(p)
        }
    }
}

pub fn digest_entries(entries: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in entries {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("{e} ({s:?})"))
}

fn positive(s: &str) -> Result<usize, String> {
    match parse::<usize>(s)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

/// Empty error string means the field name is unknown.
fn set_provider_field(p: &mut ProviderConfig, field: &str, value: &str) -> Result<(), String> {
    match field {
        "endpoint" => p.endpoint = value.to_string(),
        "model" => p.model = value.to_string(),
        "credential_env" => p.credential_env = Some(value.to_string()),
        "temperature" => p.params.temperature = parse(value)?,
        "max_tokens" => p.params.max_tokens = parse(value)?,
        "seed" => p.params.seed = if value == "none" { None } else { Some(parse(value)?) },
        "dimension" => p.dimension = Some(positive(value)?),
        _ => return Err(String::new()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_digest_ignore_layout() {
        let a = RunConfig::parse("dataset = d.jsonl\n# comment\nk=3\n").unwrap();
        let b = RunConfig::parse("k = 3\n\ndataset=d.jsonl").unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.k, 3);
        assert_eq!(a.seeds, derive_seeds(0, 10));
        assert!(a.providers.iter().all(|p| p.is_mock()));
        assert_eq!(a.pipeline.failure_mode, FailureMode::Strict);
        assert_eq!(a.pipeline.enabled.len(), 8);
    }

    #[test]
    fn unknown_and_bad_keys_report_line() {
        let e = RunConfig::parse("dataset = d.jsonl\nfoo = 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("unknown key"));
        let e = RunConfig::parse("dataset = d\nchat.colour = red\n").unwrap_err();
        assert!(e.msg.contains("unknown key"), "{e}");
        let e = RunConfig::parse("dataset = d\nk = x\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(RunConfig::parse("k = 3\n").unwrap_err().msg.contains("dataset"));
        assert!(RunConfig::parse("dataset = d\nk = 1\n").is_err());
        assert!(RunConfig::parse("dataset = d\nlenient_threshold = 0.5\n").is_err());
        assert!(RunConfig::parse("dataset = d\nchat.endpoint = ftp://x\n").is_err());
    }

    #[test]
    fn providers_prompts_and_modes() {
        let cfg = RunConfig::parse(
            "dataset = d\n\
             chat.endpoint = https://api.example.com/v1\n\
             chat.credential_env = MY_KEY\n\
             chat.seed = none\n\
             embed.dimension = 32\n\
             prompt.short_summary = Be brief.\n\
             failure_mode = lenient\n\
             lenient_threshold = 0.75\n\
             kinds = translated, storyboard\n\
             seeds = 1,2,3\n\
             tagger = external\n\
             pos_annotations_dir = pos\n",
        )
        .unwrap();
        let chat = cfg.provider(ProviderKind::Chat);
        assert_eq!(chat.credential_env.as_deref(), Some("MY_KEY"));
        assert_eq!(chat.params.seed, None);
        assert_eq!(cfg.provider(ProviderKind::Embed).dimension, Some(32));
        assert_eq!(cfg.pipeline.prompts.get(TransformationKind::ShortSummary), "Be brief.");
        assert_eq!(cfg.pipeline.failure_mode, FailureMode::Lenient { threshold: 0.75 });
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert!(cfg.pipeline.enabled.contains(&TransformationKind::Original));
        assert_eq!(cfg.pipeline.enabled.len(), 3);
        assert_eq!(cfg.tagger, TaggerChoice::External(PathBuf::from("pos")));
    }

    #[test]
    fn seeds_must_agree_with_runs() {
        assert!(RunConfig::parse("dataset = d\nruns = 2\nseeds = 1,2,3\n").is_err());
        assert_eq!(RunConfig::parse("dataset = d\nruns = 4\nmaster_seed = 9\n").unwrap().seeds, derive_seeds(9, 4));
    }
}
