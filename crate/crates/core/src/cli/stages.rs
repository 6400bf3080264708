//! Pipeline stages over a run directory.
//!
//! Layout under the run directory:
//!
//! ```text
//! manifest.json                config digest, stage times, prompts, provenance
//! data/dataset.jsonl           normalised dataset
//! data/dataset_stats.json
//! corpora/<kind_slug>.jsonl
//! similarity/similarity.json
//! lexical/lexical.json
//! classification/runs.json
//! stats/stats.json
//! reports/table_<name>.{md,csv,json}, reports/matrix_<metric>.csv
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{digest_entries, Evaluation, RunConfig, TaggerChoice};
use super::CliError;
use crate::classifier::{cross_validate, fixed_split_evaluate, summarize_runs, ClassificationRun, ClassifierError, TrainConfig};
use crate::corpus::{dataset_stats, load_dataset, Dataset, DatasetFormat, DatasetStats, Group};
use crate::lexstats::{
    compare_measures, document_measures, AnnotationTagger, FrequencyTable, GroupComparison, LexiconTagger, Measure, Tagger,
    Tokenizer,
};
use crate::providers::{
    DisabledTransport, HttpTransport, Provider, ProviderKind, ProviderSummary, ResponseCache, Transport,
};
use crate::report::{self, ClassificationInput, Format, ReportTable};
use crate::stattests::{pearson, wilcoxon_signed_rank, StatTestResult};
use crate::textmetrics::{pairwise_matrix, similarity_row, Metric, MetricError, PairwiseMatrix, SimilarityScore};
use crate::transform::{
    run_pipeline, FailureMode, ImageMode, ItemFailure, PromptSet, ProviderSet, TransformError, TransformationKind,
    TransformedCorpus,
};

const BUILTIN_EN_FREQ: &str = include_str!("../../data/en_freq.tsv");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub config: BTreeMap<String, String>,
    pub dataset: String,
    pub source_language: String,
    pub target_language: String,
    pub transcripts: usize,
    pub stages: BTreeMap<String, DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformRecord {
    /// Exact system prompts sent for each generated kind.
    pub prompts: PromptSet,
    pub prompt_overrides: Vec<TransformationKind>,
    pub providers: Vec<ProviderSummary>,
    pub image_mode: ImageMode,
    pub failure_mode: FailureMode,
    pub corpora: BTreeMap<TransformationKind, CorpusRecord>,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub language: String,
    pub items: usize,
    /// Cache keys behind each item, upstream first.
    pub provenance: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityArtifact {
    pub reference: TransformationKind,
    pub rows: BTreeMap<TransformationKind, SimilarityScore>,
    pub missing: Vec<TransformationKind>,
    pub parameters: String,
    /// (items kept, dataset size) when corpora were restricted to shared ids.
    pub restricted: Option<(usize, usize)>,
    pub matrices: Vec<PairwiseMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexicalRow {
    pub kind: TransformationKind,
    pub comparisons: BTreeMap<Measure, Result<GroupComparison, String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexicalArtifact {
    pub language: String,
    pub tagger: String,
    pub frequency_table: String,
    pub rows: Vec<LexicalRow>,
    pub skipped: Vec<TransformationKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationArtifact {
    pub evaluation: String,
    pub k: Option<usize>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub restricted: Option<(usize, usize)>,
    pub runs: BTreeMap<TransformationKind, Vec<ClassificationRun>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub kinds: Vec<TransformationKind>,
    pub cosine: Vec<f64>,
    pub macro_f1: Vec<f64>,
    pub result: Result<StatTestResult, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsArtifact {
    pub baseline: TransformationKind,
    pub wilcoxon: BTreeMap<TransformationKind, Result<StatTestResult, String>>,
    pub correlation: Option<CorrelationRecord>,
}

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("data/dataset.jsonl")
    }
    pub fn dataset_stats(&self) -> PathBuf {
        self.root.join("data/dataset_stats.json")
    }
    pub fn corpus(&self, kind: TransformationKind) -> PathBuf {
        self.root.join("corpora").join(format!("{}.jsonl", kind.slug()))
    }
    pub fn similarity(&self) -> PathBuf {
        self.root.join("similarity/similarity.json")
    }
    pub fn lexical(&self) -> PathBuf {
        self.root.join("lexical/lexical.json")
    }
    pub fn classification(&self) -> PathBuf {
        self.root.join("classification/runs.json")
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("stats/stats.json")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    const STAGE_DIRS: [&'static str; 6] = ["corpora", "similarity", "lexical", "classification", "stats", "reports"];
}

/// Everything a stage needs: the run directory, its configuration and the
/// shared provider plumbing.
pub struct Context {
    pub dir: RunDir,
    pub config: RunConfig,
    transport: Arc<dyn Transport>,
    cache: Arc<ResponseCache>,
    providers_used: Vec<Provider>,
}

impl Context {
    pub fn new(run_dir: &Path, config: RunConfig, offline: bool) -> Result<Self, CliError> {
        let transport: Arc<dyn Transport> = if offline {
            Arc::new(DisabledTransport)
        } else {
            Arc::new(HttpTransport::new(config.http_timeout).map_err(|e| CliError::Provider(e.to_string()))?)
        };
        let cache = Arc::new(ResponseCache::new(config.resolve(run_dir, &config.cache_dir)));
        Ok(Context { dir: RunDir::new(run_dir), config, transport, cache, providers_used: Vec::new() })
    }

    fn provider(&self, kind: ProviderKind) -> Result<Provider, CliError> {
        Provider::new(self.config.provider(kind).clone(), self.cache.clone(), self.transport.clone())
            .map(|p| p.with_retry(self.config.retry.clone()))
            .map_err(|e| CliError::Usage(format!("{kind} provider: {e}")))
    }

    /// Backend calls and cache hits of the providers used so far.
    fn call_line(&mut self) -> String {
        let backend: usize = self.providers_used.iter().map(Provider::backend_calls).sum();
        let hits: usize = self.providers_used.iter().map(Provider::cache_hits).sum();
        self.providers_used.clear();
        format!("provider calls: {backend} backend, {hits} cached")
    }

    fn load_manifest(&self) -> Result<Manifest, CliError> {
        load_manifest(&self.dir)
    }

    fn save_manifest(&self, m: &Manifest) -> Result<(), CliError> {
        write_json(&self.dir.manifest(), m)
    }

    fn mark(&self, stage: &str) -> Result<(), CliError> {
        let mut m = self.load_manifest()?;
        m.stages.insert(stage.to_string(), Utc::now());
        self.save_manifest(&m)
    }

    fn load_dataset(&self, m: &Manifest) -> Result<Dataset, CliError> {
        let content = read(&self.dir.dataset(), "ingest")?;
        Dataset::parse_jsonl(&m.dataset, &content).map_err(data)
    }

    fn load_corpora(&self, m: &Manifest) -> Result<BTreeMap<TransformationKind, TransformedCorpus>, CliError> {
        let rec = m.transform.as_ref().ok_or_else(|| missing_stage("transform"))?;
        let mut out = BTreeMap::new();
        for &kind in rec.corpora.keys() {
            let content = read(&self.dir.corpus(kind), "transform")?;
            out.insert(kind, TransformedCorpus::parse_jsonl(&m.dataset, &content).map_err(data)?);
        }
        Ok(out)
    }
}

pub fn load_manifest(dir: &RunDir) -> Result<Manifest, CliError> {
    let path = dir.manifest();
    if !path.exists() {
        return Err(CliError::Data(format!("no run found in {}; run `ingest` first", dir.root.display())));
    }
    read_json(&path, "ingest")
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn missing_stage(stage: &str) -> CliError {
    CliError::Data(format!("missing prerequisite; run `{stage}` first"))
}

fn read(path: &Path, stage: &str) -> Result<String, CliError> {
    if !path.exists() {
        return Err(missing_stage(stage));
    }
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T, CliError> {
    serde_json::from_str(&read(path, stage)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(data)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn transform_error(e: TransformError) -> CliError {
    match e {
        TransformError::Provider { .. }
        | TransformError::Stage { .. }
        | TransformError::Incomplete { .. }
        | TransformError::MissingProvider(_) => CliError::Provider(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn metric_error(e: MetricError) -> CliError {
    match e {
        MetricError::Embed(_) | MetricError::NoEmbedder => CliError::Provider(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

fn classifier_error(kind: TransformationKind, e: ClassifierError) -> CliError {
    let provider = match &e {
        ClassifierError::Embed { .. } => true,
        ClassifierError::Cell { source, .. } => matches!(**source, ClassifierError::Embed { .. }),
        _ => false,
    };
    let msg = format!("{kind}: {e}");
    if provider {
        CliError::Provider(msg)
    } else {
        CliError::Data(msg)
    }
}

/// Ids present in every corpus; `None` when that is the whole dataset.
fn shared_ids(d: &Dataset, corpora: &BTreeMap<TransformationKind, TransformedCorpus>) -> Option<BTreeSet<String>> {
    let mut keep: BTreeSet<String> = d.ids().into_iter().collect();
    for c in corpora.values() {
        let ids: BTreeSet<&str> = c.ids().into_iter().collect();
        keep.retain(|id| ids.contains(id.as_str()));
    }
    (keep.len() < d.len()).then_some(keep)
}

fn restrict(
    d: &Dataset,
    corpora: BTreeMap<TransformationKind, TransformedCorpus>,
) -> (BTreeMap<TransformationKind, TransformedCorpus>, Option<(usize, usize)>) {
    match shared_ids(d, &corpora) {
        None => (corpora, None),
        Some(keep) => {
            let n = keep.len();
            (corpora.into_iter().map(|(k, c)| (k, c.restricted_to(&keep))).collect(), Some((n, d.len())))
        }
    }
}

fn restriction_note(r: Option<(usize, usize)>) -> Vec<String> {
    r.map(|(n, total)| format!("Restricted to the {n} of {total} transcripts present in every transformation."))
        .into_iter()
        .collect()
}

pub fn ingest(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let path = cfg.resolve(&ctx.dir.root, &cfg.dataset);
    let format = cfg.dataset_format.unwrap_or_else(|| DatasetFormat::from_path(&path));
    let d = load_dataset(&path, format).map_err(data)?;
    let stats = dataset_stats(&d, &Tokenizer::default()).map_err(data)?;

    let digest = cfg.digest();
    if let Ok(old) = load_manifest(&ctx.dir) {
        if old.config_digest != digest {
            for sub in RunDir::STAGE_DIRS {
                let p = ctx.dir.root.join(sub);
                if p.exists() {
                    fs::remove_dir_all(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                }
            }
        }
    }
    let mut buf = Vec::new();
    d.write_jsonl(&mut buf).map_err(data)?;
    write_bytes(&ctx.dir.dataset(), &buf)?;
    write_json(&ctx.dir.dataset_stats(), &stats)?;
    let mut stages = BTreeMap::new();
    stages.insert("ingest".to_string(), Utc::now());
    ctx.save_manifest(&Manifest {
        config_digest: digest,
        config: cfg.entries().clone(),
        dataset: d.name.clone(),
        source_language: d.source_language.clone(),
        target_language: cfg.target_language.clone(),
        transcripts: d.len(),
        stages,
        transform: None,
    })?;
    writeln!(
        out,
        "ingest: {} ({}), {} transcripts (AD {}, C {})",
        d.name,
        d.source_language,
        d.len(),
        d.group_count(Group::Ad),
        d.group_count(Group::Control)
    )
    .map_err(data)?;
    Ok(())
}

pub fn transform(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    let mut manifest = ctx.load_manifest()?;
    let d = ctx.load_dataset(&manifest)?;
    let cfg = ctx.config.pipeline.clone();
    let providers = ProviderSet {
        chat: Some(ctx.provider(ProviderKind::Chat)?),
        translate: Some(ctx.provider(ProviderKind::Translate)?),
        text_to_image: Some(ctx.provider(ProviderKind::TextToImage)?),
        image_to_text: Some(ctx.provider(ProviderKind::ImageToText)?),
    };
    let result = run_pipeline(&d, &cfg, &providers);
    ctx.providers_used.extend([providers.chat, providers.translate, providers.text_to_image, providers.image_to_text].into_iter().flatten());
    let output = result.map_err(transform_error)?;

    let corpora_dir = ctx.dir.root.join("corpora");
    if corpora_dir.exists() {
        fs::remove_dir_all(&corpora_dir).map_err(data)?;
    }
    let mut records = BTreeMap::new();
    for (kind, c) in &output.corpora {
        let mut buf = Vec::new();
        c.write_jsonl(&d, &mut buf).map_err(data)?;
        write_bytes(&ctx.dir.corpus(*kind), &buf)?;
        let provenance = c.items.iter().zip(&c.provenance).map(|(it, keys)| (it.source_id.clone(), keys.clone())).collect();
        records.insert(*kind, CorpusRecord { language: c.language.clone(), items: c.len(), provenance });
        writeln!(out, "transform: {:<16} {}/{} items ({})", kind.as_str(), c.len(), d.len(), c.language).map_err(data)?;
    }
    if !output.failures.is_empty() {
        writeln!(out, "transform: {} item failures recorded in the manifest", output.failures.len()).map_err(data)?;
    }
    manifest.transform = Some(TransformRecord {
        prompts: cfg.prompts.clone(),
        prompt_overrides: cfg.prompts.overridden(),
        providers: ProviderKind::ALL.iter().map(|k| ctx.config.provider(*k).summary()).collect(),
        image_mode: cfg.image_mode,
        failure_mode: cfg.failure_mode,
        corpora: records,
        failures: output.failures,
    });
    manifest.stages.insert("transform".into(), Utc::now());
    ctx.save_manifest(&manifest)?;
    let line = ctx.call_line();
    writeln!(out, "transform: {line}").map_err(data)?;
    Ok(())
}

pub fn similarity(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = ctx.load_manifest()?;
    let d = ctx.load_dataset(&manifest)?;
    let (corpora, restricted) = restrict(&d, ctx.load_corpora(&manifest)?);
    let reference = if corpora.contains_key(&TransformationKind::Translated) {
        TransformationKind::Translated
    } else {
        TransformationKind::Original
    };
    let embedder = ctx.provider(ProviderKind::Embed)?;
    let metrics = ctx.config.metrics.clone();
    let limit = ctx.config.pipeline.max_in_flight;
    let result = (|| {
        let mut rows = BTreeMap::new();
        let mut missing = Vec::new();
        for kind in TransformationKind::GENERATED {
            match corpora.get(&kind) {
                Some(c) => {
                    rows.insert(kind, similarity_row(c, &corpora[&reference], &metrics, &embedder)?);
                }
                None => missing.push(kind),
            }
        }
        let ordered: Vec<&TransformedCorpus> = TransformationKind::ALL.iter().filter_map(|k| corpora.get(k)).collect();
        let matrices = Metric::ALL
            .iter()
            .map(|&m| pairwise_matrix(&ordered, m, &metrics, Some(&embedder), limit))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((rows, missing, matrices))
    })();
    ctx.providers_used.push(embedder);
    let (rows, missing, matrices) = result.map_err(metric_error)?;
    for (kind, s) in &rows {
        writeln!(out, "similarity: {:<16} chrF {:.2}  BLEU {:.2}  cosine {:.2}", kind.as_str(), s.chrf, s.bleu, s.cosine)
            .map_err(data)?;
    }
    write_json(
        &ctx.dir.similarity(),
        &SimilarityArtifact { reference, rows, missing, parameters: metrics.describe(), restricted, matrices },
    )?;
    ctx.mark("similarity")?;
    let line = ctx.call_line();
    writeln!(out, "similarity: {line}").map_err(data)?;
    Ok(())
}

fn frequency_table(ctx: &Context) -> Result<(FrequencyTable, String), CliError> {
    let lang = &ctx.config.target_language;
    let (table, source) = match &ctx.config.freq_table {
        Some(p) => {
            let path = ctx.config.resolve(&ctx.dir.root, p);
            (FrequencyTable::load_tsv(&path, lang).map_err(data)?, p.display().to_string())
        }
        None if lang.eq_ignore_ascii_case("en") => {
            (FrequencyTable::parse_tsv(BUILTIN_EN_FREQ, "en", "built-in").map_err(data)?, "built-in".to_string())
        }
        None => return Err(CliError::Usage(format!("no built-in frequency table for {lang:?}; set `freq_table`"))),
    };
    let origin = format!("{source}, {} entries", table.len());
    let table = match ctx.config.oov_floor {
        Some(f) => table.with_oov_floor(f),
        None => table,
    };
    Ok((table, origin))
}

pub fn lexical(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = ctx.load_manifest()?;
    let d = ctx.load_dataset(&manifest)?;
    let corpora = ctx.load_corpora(&manifest)?;
    let (table, table_origin) = frequency_table(ctx)?;
    let tokenizer = Tokenizer::default();
    let groups: BTreeMap<&str, Group> = d.transcripts.iter().map(|t| (t.id.as_str(), t.group)).collect();
    let lang = ctx.config.target_language.clone();
    let baseline_english = lang.eq_ignore_ascii_case("en");

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut tagger_desc = String::new();
    for (&kind, c) in &corpora {
        if !c.language.eq_ignore_ascii_case(&lang) {
            skipped.push(kind);
            continue;
        }
        let tagger = match &ctx.config.tagger {
            TaggerChoice::Baseline => Tagger::Baseline(LexiconTagger::builtin()),
            TaggerChoice::External(dir) => {
                let path = ctx.config.resolve(&ctx.dir.root, dir).join(format!("{}.jsonl", kind.slug()));
                Tagger::External(AnnotationTagger::load(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?)
            }
        };
        tagger_desc = tagger.describe().to_string();
        let mut docs = Vec::new();
        for item in &c.items {
            let g = *groups.get(item.source_id.as_str()).ok_or_else(|| data(format!("{} not in the dataset", item.source_id)))?;
            let m = document_measures(&item.source_id, &item.text, &tokenizer, &table, &tagger)
                .map_err(|e| CliError::Data(format!("{kind} {}: {e}", item.source_id)))?;
            docs.push((g, m));
        }
        let mut comparisons = compare_measures(&docs, &[Measure::Ttr, Measure::Lf, Measure::Pnr, Measure::Rb, Measure::Vb]);
        if !baseline_english && matches!(ctx.config.tagger, TaggerChoice::Baseline) {
            for m in Measure::POS {
                comparisons.insert(m, Err("the built-in tagger covers English only".into()));
            }
        }
        writeln!(out, "lexical: {:<16} {} documents", kind.as_str(), docs.len()).map_err(data)?;
        rows.push(LexicalRow { kind, comparisons });
    }
    rows.sort_by_key(|r| TransformationKind::ALL.iter().position(|k| *k == r.kind));
    if !skipped.is_empty() {
        let names: Vec<&str> = skipped.iter().map(|k| k.as_str()).collect();
        writeln!(out, "lexical: skipped {} (not in {lang})", names.join(", ")).map_err(data)?;
    }
    write_json(
        &ctx.dir.lexical(),
        &LexicalArtifact { language: lang, tagger: tagger_desc, frequency_table: table_origin, rows, skipped },
    )?;
    ctx.mark("lexical")
}

pub fn classify(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = ctx.load_manifest()?;
    let d = ctx.load_dataset(&manifest)?;
    let (corpora, restricted) = restrict(&d, ctx.load_corpora(&manifest)?);
    let fixed = match ctx.config.evaluation {
        Evaluation::FixedSplit => true,
        Evaluation::CrossValidation => false,
        Evaluation::Auto => d.transcripts.iter().all(|t| t.split.is_some()),
    };
    let embedder = ctx.provider(ProviderKind::Embed)?;
    let (k, seeds, train, limit) =
        (ctx.config.k, ctx.config.seeds.clone(), ctx.config.train.clone(), ctx.config.pipeline.max_in_flight);
    let mut runs = BTreeMap::new();
    let mut failure = None;
    for (&kind, c) in &corpora {
        let r = if fixed {
            fixed_split_evaluate(c, &d, &seeds, &embedder, &train, limit)
        } else {
            cross_validate(c, &d, k, &seeds, &embedder, &train, limit)
        };
        match r {
            Ok(r) => {
                let s = summarize_runs(&r).expect("at least one seed");
                writeln!(out, "classify: {:<16} macro-F1 {:.3}  acc AD {:.3}  acc C {:.3}", kind.as_str(), s.macro_f1, s.acc_ad, s.acc_c)
                    .map_err(data)?;
                runs.insert(kind, r);
            }
            Err(e) => {
                failure = Some(classifier_error(kind, e));
                break;
            }
        }
    }
    ctx.providers_used.push(embedder);
    if let Some(e) = failure {
        return Err(e);
    }
    let artifact = ClassificationArtifact {
        evaluation: if fixed { "fixed_split" } else { "cross_validation" }.into(),
        k: (!fixed).then_some(k),
        seeds,
        train,
        restricted,
        runs,
    };
    write_json(&ctx.dir.classification(), &artifact)?;
    ctx.mark("classify")?;
    let line = ctx.call_line();
    writeln!(out, "classify: {line}").map_err(data)?;
    Ok(())
}

pub fn stats(ctx: &mut Context, out: &mut dyn Write) -> Result<(), CliError> {
    ctx.load_manifest()?;
    let cls: ClassificationArtifact = read_json(&ctx.dir.classification(), "classify")?;
    let baseline = TransformationKind::Original;
    let base = cls.runs.get(&baseline).ok_or_else(|| data("no baseline runs for Original"))?;
    let f1 = |r: &[ClassificationRun]| r.iter().map(|x| x.macro_f1).collect::<Vec<_>>();
    let mut wilcoxon = BTreeMap::new();
    for (&kind, runs) in &cls.runs {
        if kind == baseline {
            continue;
        }
        let r = wilcoxon_signed_rank(&f1(runs), &f1(base)).map_err(|e| e.to_string());
        match &r {
            Ok(t) => writeln!(out, "stats: {:<16} Wilcoxon W+ {} p {:.4} ({})", kind.as_str(), t.statistic, t.p_value, t.method.tag()),
            Err(e) => writeln!(out, "stats: {:<16} Wilcoxon not computed ({e})", kind.as_str()),
        }
        .map_err(data)?;
        wilcoxon.insert(kind, r);
    }
    let correlation = if ctx.dir.similarity().exists() {
        let sim: SimilarityArtifact = read_json(&ctx.dir.similarity(), "similarity")?;
        let kinds: Vec<TransformationKind> =
            TransformationKind::GENERATED.into_iter().filter(|k| sim.rows.contains_key(k) && cls.runs.contains_key(k)).collect();
        let cosine: Vec<f64> = kinds.iter().map(|k| sim.rows[k].cosine).collect();
        let macro_f1: Vec<f64> = kinds.iter().map(|k| summarize_runs(&cls.runs[k]).expect("non-empty").macro_f1).collect();
        let result = pearson(&cosine, &macro_f1).map_err(|e| e.to_string());
        match &result {
            Ok(r) => writeln!(out, "stats: cosine vs macro-F1 Pearson r {:.3} p {:.4}", r.statistic, r.p_value),
            Err(e) => writeln!(out, "stats: correlation not computed ({e})"),
        }
        .map_err(data)?;
        Some(CorrelationRecord { kinds, cosine, macro_f1, result })
    } else {
        writeln!(out, "stats: no similarity results; correlation skipped (run `similarity` first)").map_err(data)?;
        None
    };
    write_json(&ctx.dir.stats(), &StatsArtifact { baseline, wilcoxon, correlation })?;
    ctx.mark("stats")
}

/// All tables the available artifacts support, plus the pairwise matrices.
pub fn build_tables(ctx: &Context, manifest: &Manifest) -> Result<(Vec<ReportTable>, Vec<PairwiseMatrix>, Vec<String>), CliError> {
    let (src, tgt) = (manifest.source_language.as_str(), manifest.target_language.as_str());
    let mut tables = Vec::new();
    let mut skipped = Vec::new();
    let stats: DatasetStats = read_json(&ctx.dir.dataset_stats(), "ingest")?;
    tables.push(report::datasets_table(&[stats]));

    let mut matrices = Vec::new();
    if ctx.dir.similarity().exists() {
        let sim: SimilarityArtifact = read_json(&ctx.dir.similarity(), "similarity")?;
        let mut t = report::similarity_table(&sim.rows, sim.reference, &sim.missing, &sim.parameters);
        t.footer.extend(restriction_note(sim.restricted));
        tables.push(t);
        matrices = sim.matrices;
    } else {
        skipped.push("similarity");
    }

    if ctx.dir.classification().exists() {
        let cls: ClassificationArtifact = read_json(&ctx.dir.classification(), "classify")?;
        let mut notes = vec![match cls.k {
            Some(k) => format!(
                "Stratified {k}-fold cross-validation, {} seeds; every transformation uses the same folds for a given seed.",
                cls.seeds.len()
            ),
            None => format!("Fixed train/test split, {} seeds.", cls.seeds.len()),
        }];
        notes.extend(restriction_note(cls.restricted));
        let kinds: Vec<TransformationKind> = TransformationKind::ALL
            .into_iter()
            .filter(|k| *k != TransformationKind::BackTranslated && cls.runs.contains_key(k))
            .collect();
        let input = ClassificationInput {
            name: "classification",
            title: "Classification performance",
            runs: &cls.runs,
            kinds: &kinds,
            baseline: Some(TransformationKind::Original),
            source_language: src,
            target_language: tgt,
            notes: &notes,
        };
        tables.push(report::classification_table(&input).map_err(data)?);
        if cls.runs.contains_key(&TransformationKind::BackTranslated) {
            let bt = [TransformationKind::Original, TransformationKind::Translated, TransformationKind::BackTranslated];
            let kinds: Vec<TransformationKind> = bt.into_iter().filter(|k| cls.runs.contains_key(k)).collect();
            let input = ClassificationInput {
                name: "back_translation",
                title: "Classification after back-translation",
                kinds: &kinds,
                ..input
            };
            tables.push(report::classification_table(&input).map_err(data)?);
        }
    } else {
        skipped.push("classify");
    }

    if ctx.dir.lexical().exists() {
        let lex: LexicalArtifact = read_json(&ctx.dir.lexical(), "lexical")?;
        let rows: Vec<(String, BTreeMap<Measure, Result<GroupComparison, String>>)> =
            lex.rows.iter().map(|r| (report::kind_label(r.kind, src, tgt), r.comparisons.clone())).collect();
        let mut notes = vec![format!("Lexical frequency: mean Zipf value, {} table ({}).", lex.language, lex.frequency_table)];
        if !lex.skipped.is_empty() {
            let names: Vec<String> = lex.skipped.iter().map(|k| report::kind_label(*k, src, tgt)).collect();
            notes.push(format!("Not measured (not in {}): {}.", lex.language, names.join(", ")));
        }
        tables.push(report::group_measure_table("lexical", "Lexical measures by group", &Measure::LEXICAL, &rows, &notes));
        let mut pos_notes = vec![format!("Tagger: {}.", lex.tagger)];
        pos_notes.extend(notes.into_iter().skip(1));
        tables.push(report::group_measure_table("pos", "Part-of-speech measures by group", &Measure::POS, &rows, &pos_notes));
    } else {
        skipped.push("lexical");
    }

    if ctx.dir.stats().exists() {
        let st: StatsArtifact = read_json(&ctx.dir.stats(), "stats")?;
        if let Some(c) = st.correlation {
            tables.push(report::correlation_table(&c.kinds, &c.cosine, &c.macro_f1));
        }
    } else {
        skipped.push("stats");
    }
    Ok((tables, matrices, skipped.into_iter().map(String::from).collect()))
}

pub fn report(ctx: &mut Context, formats: &[Format], out: &mut dyn Write) -> Result<(), CliError> {
    let manifest = ctx.load_manifest()?;
    let (tables, matrices, skipped) = build_tables(ctx, &manifest)?;
    let dir = ctx.dir.reports();
    for t in &tables {
        for f in formats {
            let mut buf = Vec::new();
            report::emit(t, *f, &mut buf).map_err(data)?;
            write_bytes(&dir.join(format!("table_{}.{}", t.name, f.extension())), &buf)?;
        }
        writeln!(out, "report: table_{}", t.name).map_err(data)?;
    }
    for m in &matrices {
        let mut buf = Vec::new();
        m.write_csv(&mut buf).map_err(data)?;
        write_bytes(&dir.join(format!("matrix_{}.csv", m.metric.as_str())), &buf)?;
    }
    for s in skipped {
        writeln!(out, "report: no results from `{s}`; its tables are skipped").map_err(data)?;
    }
    ctx.mark("report")
}

/// Check that `cfg` is the configuration the run was started with.
pub fn check_digest(dir: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let m = load_manifest(dir)?;
    if m.config_digest != cfg.digest() {
        return Err(CliError::Usage(format!(
            "config differs from the one used at ingest (digest {} vs {}); rerun `ingest` or omit --config",
            &cfg.digest()[..12],
            &m.config_digest[..12.min(m.config_digest.len())]
        )));
    }
    Ok(())
}

/// Configuration recorded in the manifest.
pub fn manifest_config(dir: &RunDir) -> Result<RunConfig, CliError> {
    let m = load_manifest(dir)?;
    if digest_entries(&m.config) != m.config_digest {
        return Err(CliError::Data("manifest config does not match its digest".into()));
    }
    RunConfig::from_entries(m.config, &BTreeMap::new()).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run_all(ctx: &mut Context, formats: &[Format], out: &mut dyn Write) -> Result<(), CliError> {
    ingest(ctx, out)?;
    transform(ctx, out)?;
    similarity(ctx, out)?;
    lexical(ctx, out)?;
    classify(ctx, out)?;
    stats(ctx, out)?;
    report(ctx, formats, out)
}
