//! Surface and semantic similarity between transcripts: sentence-level BLEU,
//! character n-gram F-score (chrF) and embedding cosine, plus corpus means and
//! pairwise matrices over transformation kinds.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexstats::Tokenizer;
use crate::providers::{map_bounded, EmbeddingVector, ProviderError, TextEmbedder};
use crate::transform::{TransformationKind, TransformedCorpus};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{0} is empty after tokenization")]
    Empty(&'static str),
    #[error("embedding dimensions differ ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("corpora do not share ids: missing from {left}: {missing_left:?}; missing from {right}: {missing_right:?}")]
    IdMismatch { left: String, right: String, missing_left: Vec<String>, missing_right: Vec<String> },
    #[error("cosine similarity needs an embedding provider")]
    NoEmbedder,
    #[error("embedding failed: {0}")]
    Embed(#[from] ProviderError),
    #[error("invalid metric parameter: {0}")]
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Chrf,
    Bleu,
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Chrf, Metric::Bleu, Metric::Cosine];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Chrf => "chrf",
            Metric::Bleu => "bleu",
            Metric::Cosine => "cosine",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Chrf => "chrF",
            Metric::Bleu => "BLEU",
            Metric::Cosine => "Cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown metric {s:?} (expected chrf, bleu or cosine)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    /// Replace zero match counts by this value. `None` means unsmoothed.
    pub epsilon: Option<f64>,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { max_n: 4, epsilon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChrfConfig {
    pub max_n: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig { max_n: 6, beta: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricConfig {
    pub bleu: BleuConfig,
    pub chrf: ChrfConfig,
    pub tokenizer: Tokenizer,
}

impl MetricConfig {
    /// One-line parameter summary for report footers.
    pub fn describe(&self) -> String {
        format!(
            "BLEU: sentence-level, max n={}, {}, tokenizer {}; chrF: character n-grams 1..{}, beta={}, whitespace removed, case-sensitive; cosine: raw, in [-1, 1]",
            self.bleu.max_n,
            match self.bleu.epsilon {
                None => "no smoothing".to_string(),
                Some(e) => format!("epsilon smoothing {e}"),
            },
            self.tokenizer.describe(),
            self.chrf.max_n,
            self.chrf.beta,
        )
    }
}

fn ngram_counts<T: Eq + std::hash::Hash + Clone>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and candidate total for order `n`.
fn clipped<T: Eq + std::hash::Hash + Clone>(cand: &[T], refr: &[T], n: usize) -> (usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(refr, n);
    let matches = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
    (matches, cand.len().saturating_sub(n - 1))
}

/// Sentence BLEU over token sequences.
pub fn bleu_tokens<S: AsRef<str>>(cand: &[S], refr: &[S], cfg: &BleuConfig) -> Result<f64, MetricError> {
    if cfg.max_n == 0 {
        return Err(MetricError::Param("BLEU max_n must be at least 1".into()));
    }
    let cand: Vec<&str> = cand.iter().map(AsRef::as_ref).collect();
    let refr: Vec<&str> = refr.iter().map(AsRef::as_ref).collect();
    if cand.is_empty() {
        return Err(MetricError::Empty("candidate"));
    }
    if refr.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    let orders = cfg.max_n.min(cand.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let (m, total) = clipped(&cand, &refr, n);
        let m = if m == 0 {
            match cfg.epsilon {
                Some(e) => e,
                None => return Ok(0.0),
            }
        } else {
            m as f64
        };
        log_sum += (m / total as f64).ln();
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok((bp * (log_sum / orders as f64).exp()).min(1.0))
}

pub fn bleu(candidate: &str, reference: &str, cfg: &BleuConfig, tokenizer: &Tokenizer) -> Result<f64, MetricError> {
    bleu_tokens(&tokenizer.tokenize(candidate), &tokenizer.tokenize(reference), cfg)
}

/// chrF over characters with all whitespace removed.
///
/// Precision and recall are averaged over the orders at which both strings
/// have at least one n-gram, then combined as an F-beta score.
pub fn chrf(candidate: &str, reference: &str, cfg: &ChrfConfig) -> Result<f64, MetricError> {
    if cfg.max_n == 0 || !(cfg.beta > 0.0) {
        return Err(MetricError::Param(format!("chrF needs max_n >= 1 and beta > 0 (got {}, {})", cfg.max_n, cfg.beta)));
    }
    let cand: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let refr: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if cand.is_empty() {
        return Err(MetricError::Empty("candidate"));
    }
    if refr.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    let orders = cfg.max_n.min(cand.len()).min(refr.len());
    let (mut p, mut r) = (0.0, 0.0);
    for n in 1..=orders {
        let (m, cand_total) = clipped(&cand, &refr, n);
        let ref_total = refr.len() - (n - 1);
        p += m as f64 / cand_total as f64;
        r += m as f64 / ref_total as f64;
    }
    p /= orders as f64;
    r /= orders as f64;
    if p + r == 0.0 {
        return Ok(0.0);
    }
    let b2 = cfg.beta * cfg.beta;
    Ok((1.0 + b2) * p * r / (b2 * p + r))
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricError> {
    if a.dimension() != b.dimension() {
        return Err(MetricError::Dimension(a.dimension(), b.dimension()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub bleu: f64,
    pub chrf: f64,
    pub cosine: f64,
}

impl SimilarityScore {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Bleu => self.bleu,
            Metric::Chrf => self.chrf,
            Metric::Cosine => self.cosine,
        }
    }
}

fn check_ids(a: &TransformedCorpus, b: &TransformedCorpus) -> Result<(), MetricError> {
    let ia: BTreeSet<&str> = a.ids().into_iter().collect();
    let ib: BTreeSet<&str> = b.ids().into_iter().collect();
    if ia == ib {
        return Ok(());
    }
    Err(MetricError::IdMismatch {
        left: a.kind.to_string(),
        right: b.kind.to_string(),
        missing_left: ib.difference(&ia).map(|s| s.to_string()).collect(),
        missing_right: ia.difference(&ib).map(|s| s.to_string()).collect(),
    })
}

/// Precomputed embeddings for the items of one corpus, keyed by id.
type EmbeddingIndex = HashMap<String, EmbeddingVector>;

fn embed_corpus(c: &TransformedCorpus, embedder: &dyn TextEmbedder, max_in_flight: usize) -> Result<EmbeddingIndex, MetricError> {
    let results = map_bounded(&c.items, max_in_flight, |item| embedder.embed_text(&item.text));
    c.items
        .iter()
        .zip(results)
        .map(|(item, r)| Ok((item.source_id.clone(), r?)))
        .collect()
}

fn pair_score(
    cand: &str,
    refr: &str,
    metric: Metric,
    cfg: &MetricConfig,
    emb: Option<(&EmbeddingVector, &EmbeddingVector)>,
) -> Result<f64, MetricError> {
    match metric {
        Metric::Bleu => bleu(cand, refr, &cfg.bleu, &cfg.tokenizer),
        Metric::Chrf => chrf(cand, refr, &cfg.chrf),
        Metric::Cosine => {
            let (x, y) = emb.ok_or(MetricError::NoEmbedder)?;
            cosine(x, y)
        }
    }
}

fn mean_with(
    a: &TransformedCorpus,
    b: &TransformedCorpus,
    metric: Metric,
    cfg: &MetricConfig,
    emb: Option<(&EmbeddingIndex, &EmbeddingIndex)>,
) -> Result<f64, MetricError> {
    check_ids(a, b)?;
    if a.is_empty() {
        return Err(MetricError::Empty("corpus"));
    }
    let mut sum = 0.0;
    for item in &a.items {
        let other = b.text_of(&item.source_id).expect("ids checked");
        let pair = emb.map(|(ea, eb)| (&ea[&item.source_id], &eb[&item.source_id]));
        sum += pair_score(&item.text, other, metric, cfg, pair)?;
    }
    Ok(sum / a.len() as f64)
}

/// Mean per-item score, pairing items by source id. `a` supplies the
/// candidates and `b` the references.
pub fn mean_similarity(
    a: &TransformedCorpus,
    b: &TransformedCorpus,
    metric: Metric,
    cfg: &MetricConfig,
    embedder: Option<&dyn TextEmbedder>,
) -> Result<f64, MetricError> {
    check_ids(a, b)?;
    if metric != Metric::Cosine {
        return mean_with(a, b, metric, cfg, None);
    }
    let e = embedder.ok_or(MetricError::NoEmbedder)?;
    let ea = embed_corpus(a, e, 4)?;
    let eb = embed_corpus(b, e, 4)?;
    mean_with(a, b, metric, cfg, Some((&ea, &eb)))
}

/// All three metrics between `candidate` and `reference`.
pub fn similarity_row(
    candidate: &TransformedCorpus,
    reference: &TransformedCorpus,
    cfg: &MetricConfig,
    embedder: &dyn TextEmbedder,
) -> Result<SimilarityScore, MetricError> {
    Ok(SimilarityScore {
        bleu: mean_similarity(candidate, reference, Metric::Bleu, cfg, None)?,
        chrf: mean_similarity(candidate, reference, Metric::Chrf, cfg, None)?,
        cosine: mean_similarity(candidate, reference, Metric::Cosine, cfg, Some(embedder))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub labels: Vec<TransformationKind>,
    /// `values[i][j]` scores corpus `i` as candidate against corpus `j`.
    pub values: Vec<Vec<f64>>,
    pub metric: Metric,
}

impl PairwiseMatrix {
    /// Full-precision CSV with kind names as row and column headers.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.metric.as_str().to_string()];
        header.extend(self.labels.iter().map(|k| k.as_str().to_string()));
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![label.as_str().to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean similarity for every ordered pair of corpora.
pub fn pairwise_matrix(
    corpora: &[&TransformedCorpus],
    metric: Metric,
    cfg: &MetricConfig,
    embedder: Option<&dyn TextEmbedder>,
    max_in_flight: usize,
) -> Result<PairwiseMatrix, MetricError> {
    for c in corpora.iter().skip(1) {
        check_ids(corpora[0], c)?;
    }
    let embeddings = if metric == Metric::Cosine {
        let e = embedder.ok_or(MetricError::NoEmbedder)?;
        Some(corpora.iter().map(|c| embed_corpus(c, e, max_in_flight)).collect::<Result<Vec<_>, _>>()?)
    } else {
        None
    };
    let n = corpora.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let scores = map_bounded(&cells, max_in_flight, |&(i, j)| {
        let emb = embeddings.as_ref().map(|e| (&e[i], &e[j]));
        mean_with(corpora[i], corpora[j], metric, cfg, emb)
    });
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), s) in cells.iter().zip(scores) {
        values[i][j] = s?;
    }
    Ok(PairwiseMatrix { labels: corpora.iter().map(|c| c.kind).collect(), values, metric })
}
