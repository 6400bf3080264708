//! AD/Control classification over text embeddings: a class-weighted logistic
//! head trained by full-batch gradient descent with early stopping, evaluated by
//! stratified k-fold cross-validation or on a fixed train/test split.
//!
//! AD is the positive class (`y = 1`).

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{split_folds, CorpusError, Dataset, FoldAssignment, Group, Split};
use crate::providers::{map_bounded, ProviderError, TextEmbedder};
use crate::transform::TransformedCorpus;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class weights need both classes (got only {0})")]
    SingleClass(Group),
    #[error("no training examples")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    Length(usize, usize),
    #[error("loss became non-finite at epoch {epoch} (loss {loss}, |w| {weight_norm}, lr {learning_rate})")]
    NonFinite { epoch: usize, loss: f64, weight_norm: f64, learning_rate: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("seed {seed}, fold {fold}: {source}")]
    Cell { seed: u64, fold: usize, source: Box<ClassifierError> },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("embedding failed for {id:?}: {source}")]
    Embed { id: String, source: ProviderError },
    #[error("{0} has no label in the dataset")]
    UnknownId(String),
}

/// Balanced weights: `n / (2 · count(class))`.
pub fn class_weights(labels: &[Group]) -> Result<HashMap<Group, f64>, ClassifierError> {
    let n = labels.len();
    let ad = labels.iter().filter(|g| **g == Group::Ad).count();
    let c = n - ad;
    if n == 0 {
        return Err(ClassifierError::Empty);
    }
    if ad == 0 {
        return Err(ClassifierError::SingleClass(Group::Control));
    }
    if c == 0 {
        return Err(ClassifierError::SingleClass(Group::Ad));
    }
    Ok(HashMap::from([
        (Group::Ad, n as f64 / (2.0 * ad as f64)),
        (Group::Control, n as f64 / (2.0 * c as f64)),
    ]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHead {
    pub fn zeros(dim: usize) -> Self {
        LinearHead { weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Full-batch gradient steps per epoch.
    pub steps_per_epoch: usize,
    pub early_stop_patience: usize,
    /// Initial step size; epoch `e` (1-based) uses `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub l2: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 10,
            steps_per_epoch: 25,
            early_stop_patience: 3,
            learning_rate: 0.1,
            l2: 1e-4,
            validation_fraction: 0.2,
            seed: 0,
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::Config(m));
        if self.max_epochs == 0 || self.steps_per_epoch == 0 {
            return bad("max_epochs and steps_per_epoch must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad(format!("validation_fraction must be in (0, 0.5), got {}", self.validation_fraction));
        }
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return bad(format!("learning_rate must be > 0 and l2 >= 0 (got {}, {})", self.learning_rate, self.l2));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn target(g: Group) -> f64 {
    match g {
        Group::Ad => 1.0,
        Group::Control => 0.0,
    }
}

/// Mean sample-weighted binary cross-entropy plus `l2/2 · |w|²` (the bias is
/// not penalised). Returns the loss and the gradients for weights and bias.
pub fn loss_and_gradient(head: &LinearHead, xs: &[Vec<f64>], ys: &[Group], sample_weights: &[f64], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; head.dimension()];
    let mut gb = 0.0;
    for ((x, y), sw) in xs.iter().zip(ys).zip(sample_weights) {
        let z = head.logit(x);
        let t = target(*y);
        loss += sw * (softplus(z) - t * z);
        let r = sw * (sigmoid(z) - t);
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
    }
    let sq: f64 = head.weights.iter().map(|w| w * w).sum();
    loss = loss / n + 0.5 * l2 * sq;
    for (g, w) in gw.iter_mut().zip(&head.weights) {
        *g = *g / n + l2 * w;
    }
    (loss, gw, gb / n)
}

fn sample_weights(ys: &[Group], weighting: bool) -> Result<Vec<f64>, ClassifierError> {
    if !weighting {
        return Ok(vec![1.0; ys.len()]);
    }
    let w = class_weights(ys)?;
    Ok(ys.iter().map(|g| w[g]).collect())
}

/// Stratified, seeded hold-out: about `fraction` of each class goes to
/// validation, keeping at least one example of each class for fitting.
fn validation_split(ys: &[Group], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for g in Group::BOTH {
        let mut idx: Vec<usize> = (0..ys.len()).filter(|&i| ys[i] == g).collect();
        idx.shuffle(&mut rng);
        let take = ((idx.len() as f64 * fraction).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..take]);
        fit.extend_from_slice(&idx[take..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

fn check_dims(xs: &[Vec<f64>], dim: usize) -> Result<(), ClassifierError> {
    match xs.iter().find(|x| x.len() != dim) {
        Some(x) => Err(ClassifierError::Dimension { expected: dim, got: x.len() }),
        None => Ok(()),
    }
}

/// Train a head. Returns the parameters from the epoch with the lowest
/// validation loss (weighted cross-entropy without the penalty term).
pub fn train(xs: &[Vec<f64>], ys: &[Group], cfg: &TrainConfig) -> Result<LinearHead, ClassifierError> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(ClassifierError::Empty);
    }
    if xs.len() != ys.len() {
        return Err(ClassifierError::Length(xs.len(), ys.len()));
    }
    let dim = xs[0].len();
    check_dims(xs, dim)?;
    class_weights(ys)?;

    let (fit, val) = validation_split(ys, cfg.validation_fraction, cfg.seed);
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Group>) { (idx.iter().map(|&i| xs[i].clone()).collect(), idx.iter().map(|&i| ys[i]).collect()) };
    let (fx, fy) = pick(&fit);
    let (vx, vy) = pick(&val);
    let fw = sample_weights(&fy, cfg.class_weighting)?;
    // Validation weights use the fitting-set class weights.
    let vw: Vec<f64> = if cfg.class_weighting {
        let w = class_weights(&fy)?;
        vy.iter().map(|g| w[g]).collect()
    } else {
        vec![1.0; vy.len()]
    };

    let mut head = LinearHead::zeros(dim);
    let mut best: Option<(f64, LinearHead)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate / (epoch as f64).sqrt();
        for _ in 0..cfg.steps_per_epoch {
            let (loss, gw, gb) = loss_and_gradient(&head, &fx, &fy, &fw, cfg.l2);
            if !loss.is_finite() {
                let weight_norm = head.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                return Err(ClassifierError::NonFinite { epoch, loss, weight_norm, learning_rate: lr });
            }
            for (w, g) in head.weights.iter_mut().zip(&gw) {
                *w -= lr * g;
            }
            head.bias -= lr * gb;
        }
        if vx.is_empty() {
            continue;
        }
        let (val_loss, _, _) = loss_and_gradient(&head, &vx, &vy, &vw, 0.0);
        if !val_loss.is_finite() {
            return Err(ClassifierError::NonFinite { epoch, loss: val_loss, weight_norm: f64::NAN, learning_rate: lr });
        }
        match &best {
            Some((b, _)) if val_loss >= *b => {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    break;
                }
            }
            _ => {
                best = Some((val_loss, head.clone()));
                since_best = 0;
            }
        }
    }
    Ok(best.map(|(_, h)| h).unwrap_or(head))
}

/// Scores `sigmoid(w·x + b)` and labels (AD when the score is at least 0.5).
pub fn predict(head: &LinearHead, xs: &[Vec<f64>]) -> Result<(Vec<Group>, Vec<f64>), ClassifierError> {
    check_dims(xs, head.dimension())?;
    let scores: Vec<f64> = xs.iter().map(|x| sigmoid(head.logit(x))).collect();
    let labels = scores.iter().map(|&s| if s >= 0.5 { Group::Ad } else { Group::Control }).collect();
    Ok((labels, scores))
}

fn f1_for(pred: &[Group], gold: &[Group], class: Group) -> f64 {
    let tp = pred.iter().zip(gold).filter(|(p, g)| **p == class && **g == class).count() as f64;
    let fp = pred.iter().zip(gold).filter(|(p, g)| **p == class && **g != class).count() as f64;
    let fn_ = pred.iter().zip(gold).filter(|(p, g)| **p != class && **g == class).count() as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn macro_f1(pred: &[Group], gold: &[Group]) -> Result<f64, ClassifierError> {
    if pred.len() != gold.len() {
        return Err(ClassifierError::Length(pred.len(), gold.len()));
    }
    for g in Group::BOTH {
        if !gold.contains(&g) {
            let other = if g == Group::Ad { Group::Control } else { Group::Ad };
            return Err(ClassifierError::SingleClass(other));
        }
    }
    Ok((f1_for(pred, gold, Group::Ad) + f1_for(pred, gold, Group::Control)) / 2.0)
}

/// Recall of each class, `(AD, C)`. A class absent from `gold` scores NaN.
pub fn per_class_accuracy(pred: &[Group], gold: &[Group]) -> Result<(f64, f64), ClassifierError> {
    if pred.len() != gold.len() {
        return Err(ClassifierError::Length(pred.len(), gold.len()));
    }
    let recall = |class: Group| {
        let total = gold.iter().filter(|g| **g == class).count();
        let hit = pred.iter().zip(gold).filter(|(p, g)| **g == class && **p == class).count();
        if total == 0 {
            f64::NAN
        } else {
            hit as f64 / total as f64
        }
    };
    Ok((recall(Group::Ad), recall(Group::Control)))
}

/// Run seeds derived from a master seed with SplitMix64.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| splitmix64(master.wrapping_add(i))).collect()
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub macro_f1: f64,
    pub acc_ad: f64,
    pub acc_c: f64,
    /// Every test prediction fell in one class.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRun {
    pub seed: u64,
    pub folds: Vec<FoldMetrics>,
    pub macro_f1: f64,
    pub acc_ad: f64,
    pub acc_c: f64,
    pub degenerate: bool,
    /// Fold membership used for this seed (absent for fixed splits).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold_assignment: Option<FoldAssignment>,
}

impl ClassificationRun {
    fn from_folds(seed: u64, folds: Vec<FoldMetrics>, fold_assignment: Option<FoldAssignment>) -> Self {
        let n = folds.len() as f64;
        let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        ClassificationRun {
            seed,
            macro_f1: mean(|m| m.macro_f1),
            acc_ad: mean(|m| m.acc_ad),
            acc_c: mean(|m| m.acc_c),
            degenerate: folds.iter().any(|m| m.degenerate),
            folds,
            fold_assignment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub macro_f1: f64,
    pub acc_ad: f64,
    pub acc_c: f64,
}

pub fn summarize_runs(runs: &[ClassificationRun]) -> Option<RunSummary> {
    if runs.is_empty() {
        return None;
    }
    let n = runs.len() as f64;
    Some(RunSummary {
        runs: runs.len(),
        macro_f1: runs.iter().map(|r| r.macro_f1).sum::<f64>() / n,
        acc_ad: runs.iter().map(|r| r.acc_ad).sum::<f64>() / n,
        acc_c: runs.iter().map(|r| r.acc_c).sum::<f64>() / n,
    })
}

/// Embeddings and labels for the corpus items, in corpus order.
fn embed_items(
    corpus: &TransformedCorpus,
    dataset: &Dataset,
    embedder: &dyn TextEmbedder,
    max_in_flight: usize,
) -> Result<Vec<(String, Vec<f64>, Group, Option<Split>)>, ClassifierError> {
    let meta: HashMap<&str, (Group, Option<Split>)> =
        dataset.transcripts.iter().map(|t| (t.id.as_str(), (t.group, t.split))).collect();
    let vectors = map_bounded(&corpus.items, max_in_flight, |item| embedder.embed_text(&item.text));
    corpus
        .items
        .iter()
        .zip(vectors)
        .map(|(item, v)| {
            let (g, s) = *meta.get(item.source_id.as_str()).ok_or_else(|| ClassifierError::UnknownId(item.source_id.clone()))?;
            let v = v.map_err(|source| ClassifierError::Embed { id: item.source_id.clone(), source })?;
            Ok((item.source_id.clone(), v.values, g, s))
        })
        .collect()
}

fn evaluate(train_x: &[Vec<f64>], train_y: &[Group], test_x: &[Vec<f64>], test_y: &[Group], cfg: &TrainConfig, fold: usize) -> Result<FoldMetrics, ClassifierError> {
    let head = train(train_x, train_y, cfg)?;
    let (pred, _) = predict(&head, test_x)?;
    let (acc_ad, acc_c) = per_class_accuracy(&pred, test_y)?;
    let distinct: BTreeSet<Group> = pred.iter().copied().collect();
    Ok(FoldMetrics { fold, n_test: test_y.len(), macro_f1: macro_f1(&pred, test_y)?, acc_ad, acc_c, degenerate: distinct.len() < 2 })
}

/// Stratified k-fold cross-validation, one run per seed.
///
/// Folds are built from the full dataset with the run seed, so every corpus
/// derived from the same dataset is split identically. Items missing from
/// `corpus` are left out of both training and testing.
pub fn cross_validate(
    corpus: &TransformedCorpus,
    dataset: &Dataset,
    k: usize,
    seeds: &[u64],
    embedder: &dyn TextEmbedder,
    cfg: &TrainConfig,
    max_in_flight: usize,
) -> Result<Vec<ClassificationRun>, ClassifierError> {
    cfg.validate()?;
    let items = embed_items(corpus, dataset, embedder, max_in_flight)?;
    let assignments = seeds.iter().map(|&s| split_folds(dataset, k, s)).collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|s| (0..k).map(move |f| (s, f))).collect();
    let results = map_bounded(&cells, max_in_flight, |&(si, fold)| {
        let fa = &assignments[si];
        let (mut trx, mut try_, mut tex, mut tey) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (id, x, g, _) in &items {
            if fa.fold_of(id) == Some(fold) {
                tex.push(x.clone());
                tey.push(*g);
            } else {
                trx.push(x.clone());
                try_.push(*g);
            }
        }
        let cell_cfg = TrainConfig { seed: splitmix64(seeds[si] ^ (fold as u64).wrapping_mul(0x9e37_79b9)), ..cfg.clone() };
        evaluate(&trx, &try_, &tex, &tey, &cell_cfg, fold)
            .map_err(|e| ClassifierError::Cell { seed: seeds[si], fold, source: Box::new(e) })
    });
    let mut per_seed: Vec<Vec<FoldMetrics>> = vec![Vec::new(); seeds.len()];
    for (&(si, _), r) in cells.iter().zip(results) {
        per_seed[si].push(r?);
    }
    Ok(seeds
        .iter()
        .zip(per_seed)
        .zip(assignments)
        .map(|((&seed, folds), fa)| ClassificationRun::from_folds(seed, folds, Some(fa)))
        .collect())
}

/// Train on the `train` split and score the `test` split, once per seed.
pub fn fixed_split_evaluate(
    corpus: &TransformedCorpus,
    dataset: &Dataset,
    seeds: &[u64],
    embedder: &dyn TextEmbedder,
    cfg: &TrainConfig,
    max_in_flight: usize,
) -> Result<Vec<ClassificationRun>, ClassifierError> {
    cfg.validate()?;
    // Fails with the offending id when any split tag is missing.
    crate::corpus::fixed_split(dataset)?;
    let items = embed_items(corpus, dataset, embedder, max_in_flight)?;
    let (mut trx, mut try_, mut tex, mut tey) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (_, x, g, s) in &items {
        match s {
            Some(Split::Train) => {
                trx.push(x.clone());
                try_.push(*g);
            }
            _ => {
                tex.push(x.clone());
                tey.push(*g);
            }
        }
    }
    let results = map_bounded(seeds, max_in_flight, |&seed| {
        let cell_cfg = TrainConfig { seed, ..cfg.clone() };
        evaluate(&trx, &try_, &tex, &tey, &cell_cfg, 0).map_err(|e| ClassifierError::Cell { seed, fold: 0, source: Box::new(e) })
    });
    seeds
        .iter()
        .zip(results)
        .map(|(&seed, r)| Ok(ClassificationRun::from_folds(seed, vec![r?], None)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Transcript;
    use crate::providers::{EmbeddingVector, ProviderError};
    use crate::transform::{CorpusItem, TransformationKind};
    use proptest::prelude::*;
    use rand::Rng;

    /// Box-Muller normal draw, enough for synthetic blobs.
    fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn balanced_weights_for_imbalanced_counts() {
        let mut labels = vec![Group::Ad; 23];
        labels.extend(vec![Group::Control; 116]);
        let w = class_weights(&labels).unwrap();
        assert!((w[&Group::Ad] - 139.0 / 46.0).abs() < 1e-12);
        assert!((w[&Group::Control] - 139.0 / 232.0).abs() < 1e-12);
        assert!((w[&Group::Ad] - 3.0217).abs() < 1e-4);
        assert!((w[&Group::Control] - 0.5991).abs() < 1e-4);
        let total: f64 = labels.iter().map(|g| w[g]).sum();
        assert!((total - 139.0).abs() < 1e-9);

        let even: Vec<Group> = [Group::Ad, Group::Control].repeat(78);
        let w = class_weights(&even).unwrap();
        assert_eq!((w[&Group::Ad], w[&Group::Control]), (1.0, 1.0));
        assert!(matches!(class_weights(&[Group::Ad, Group::Ad]), Err(ClassifierError::SingleClass(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let dim = rng.gen_range(1..6);
            let n = rng.gen_range(2..12);
            let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let ys: Vec<Group> = (0..n).map(|i| if i % 2 == 0 { Group::Ad } else { Group::Control }).collect();
            let sw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
            let head = LinearHead { weights: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), bias: rng.gen_range(-1.0..1.0) };
            let l2 = rng.gen_range(0.0..0.1);
            let (_, gw, gb) = loss_and_gradient(&head, &xs, &ys, &sw, l2);
            let h = 1e-5;
            let loss_at = |hd: &LinearHead| loss_and_gradient(hd, &xs, &ys, &sw, l2).0;
            let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            for j in 0..dim {
                let (mut up, mut down) = (head.clone(), head.clone());
                up.weights[j] += h;
                down.weights[j] -= h;
                let numeric = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
                assert!(rel(gw[j], numeric) < 1e-4, "w[{j}]: {} vs {numeric}", gw[j]);
            }
            let (mut up, mut down) = (head.clone(), head.clone());
            up.bias += h;
            down.bias -= h;
            let numeric = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
            assert!(rel(gb, numeric) < 1e-4);
        }
    }

    fn separable() -> (Vec<Vec<f64>>, Vec<Group>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let ad = i % 2 == 0;
            let x = rng.gen_range(-1.0..1.0);
            let margin = rng.gen_range(0.3..1.0);
            xs.push(vec![x, if ad { margin } else { -margin }]);
            ys.push(if ad { Group::Ad } else { Group::Control });
        }
        (xs, ys)
    }

    #[test]
    fn separable_toy_is_learned() {
        let (xs, ys) = separable();
        let cfg = TrainConfig { max_epochs: 200, early_stop_patience: 200, ..TrainConfig::default() };
        let head = train(&xs, &ys, &cfg).unwrap();
        let (pred, _) = predict(&head, &xs).unwrap();
        assert_eq!(pred, ys);
        assert_eq!(head, train(&xs, &ys, &cfg).unwrap());
    }

    #[test]
    fn zero_head_ties_to_ad() {
        let head = LinearHead::zeros(3);
        let (labels, scores) = predict(&head, &[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 0.5]]).unwrap();
        assert_eq!(labels, vec![Group::Ad, Group::Ad]);
        assert_eq!(scores, vec![0.5, 0.5]);
        assert!(matches!(predict(&head, &[vec![1.0]]), Err(ClassifierError::Dimension { expected: 3, got: 1 })));
    }

    fn blobs(n_ad: usize, n_c: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Group>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n_ad + n_c {
            let ad = i < n_ad;
            let centre = if ad { [0.6, 0.0] } else { [-0.6, 0.0] };
            xs.push(vec![centre[0] + gaussian(&mut rng), centre[1] + gaussian(&mut rng)]);
            ys.push(if ad { Group::Ad } else { Group::Control });
        }
        (xs, ys)
    }

    #[test]
    fn weighting_raises_minority_recall() {
        let (xs, ys) = blobs(40, 200, 5);
        let (tx, ty) = blobs(200, 200, 6);
        let weighted = TrainConfig::default();
        let unweighted = TrainConfig { class_weighting: false, ..TrainConfig::default() };
        let recall = |cfg: &TrainConfig| {
            let head = train(&xs, &ys, cfg).unwrap();
            let (pred, _) = predict(&head, &tx).unwrap();
            per_class_accuracy(&pred, &ty).unwrap().0
        };
        let (w, u) = (recall(&weighted), recall(&unweighted));
        assert!(w > u, "weighted AD recall {w} vs unweighted {u}");
    }

    #[test]
    fn balanced_data_ignores_weighting() {
        let (xs, ys) = blobs(30, 30, 9);
        let a = train(&xs, &ys, &TrainConfig::default()).unwrap();
        let b = train(&xs, &ys, &TrainConfig { class_weighting: false, ..TrainConfig::default() }).unwrap();
        // The stratified hold-out keeps the fitting set balanced too.
        assert_eq!(a, b);
    }

    #[test]
    fn early_stopping_returns_best_validation_epoch() {
        let (xs, ys) = blobs(20, 60, 13);
        let cfg = TrainConfig { max_epochs: 30, learning_rate: 3.0, early_stop_patience: 2, ..TrainConfig::default() };
        let head = train(&xs, &ys, &cfg).unwrap();
        let (fit, val) = validation_split(&ys, cfg.validation_fraction, cfg.seed);
        let fy: Vec<Group> = fit.iter().map(|&i| ys[i]).collect();
        let w = class_weights(&fy).unwrap();
        let vx: Vec<Vec<f64>> = val.iter().map(|&i| xs[i].clone()).collect();
        let vy: Vec<Group> = val.iter().map(|&i| ys[i]).collect();
        let vw: Vec<f64> = vy.iter().map(|g| w[g]).collect();
        let chosen = loss_and_gradient(&head, &vx, &vy, &vw, 0.0).0;
        // Replay the schedule and record every epoch's validation loss.
        let fx: Vec<Vec<f64>> = fit.iter().map(|&i| xs[i].clone()).collect();
        let fw: Vec<f64> = fy.iter().map(|g| w[g]).collect();
        let mut h = LinearHead::zeros(2);
        let mut losses = Vec::new();
        for epoch in 1..=cfg.max_epochs {
            let lr = cfg.learning_rate / (epoch as f64).sqrt();
            for _ in 0..cfg.steps_per_epoch {
                let (_, gw, gb) = loss_and_gradient(&h, &fx, &fy, &fw, cfg.l2);
                h.weights.iter_mut().zip(&gw).for_each(|(a, g)| *a -= lr * g);
                h.bias -= lr * gb;
            }
            losses.push(loss_and_gradient(&h, &vx, &vy, &vw, 0.0).0);
        }
        let best_seen = losses.iter().take_while(|l| **l != chosen).count();
        assert!(best_seen < losses.len(), "chosen head matches some epoch");
        assert!(losses[..=best_seen].iter().all(|l| *l >= chosen));
    }

    #[test]
    fn macro_f1_examples() {
        let gold: Vec<Group> = [Group::Ad, Group::Control].repeat(5);
        assert_eq!(macro_f1(&gold, &gold).unwrap(), 1.0);
        assert_eq!(per_class_accuracy(&gold, &gold).unwrap(), (1.0, 1.0));
        let all_c = vec![Group::Control; 10];
        assert!((macro_f1(&all_c, &gold).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(per_class_accuracy(&all_c, &gold).unwrap(), (0.0, 1.0));
        assert!(matches!(macro_f1(&all_c[..3], &gold), Err(ClassifierError::Length(3, 10))));
    }

    proptest! {
        #[test]
        fn macro_f1_label_swap_symmetric(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 2..40)) {
            let mut pairs = bits;
            pairs[0].1 = true;
            pairs[1].1 = false;
            let to = |b: bool| if b { Group::Ad } else { Group::Control };
            let pred: Vec<Group> = pairs.iter().map(|p| to(p.0)).collect();
            let gold: Vec<Group> = pairs.iter().map(|p| to(p.1)).collect();
            let pred_s: Vec<Group> = pairs.iter().map(|p| to(!p.0)).collect();
            let gold_s: Vec<Group> = pairs.iter().map(|p| to(!p.1)).collect();
            let a = macro_f1(&pred, &gold).unwrap();
            prop_assert!((a - macro_f1(&pred_s, &gold_s).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn score_monotone_in_logit(w in -3.0f64..3.0, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
            let head = LinearHead { weights: vec![w], bias: 0.1 };
            let (_, s) = predict(&head, &[vec![x1], vec![x2]]).unwrap();
            if w * x1 < w * x2 {
                prop_assert!(s[0] <= s[1]);
            }
        }
    }

    struct Lookup(HashMap<String, Vec<f64>>);

    impl TextEmbedder for Lookup {
        fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
            EmbeddingVector::new(self.0.get(text).cloned().unwrap_or_else(|| vec![0.0, 0.0, 1.0]))
        }
    }

    fn toy_dataset(n_ad: usize, n_c: usize, with_split: bool) -> (Dataset, TransformedCorpus, Lookup) {
        let (xs, ys) = blobs(n_ad, n_c, 21);
        let mut table = HashMap::new();
        let mut transcripts = Vec::new();
        for (i, (x, g)) in xs.iter().zip(&ys).enumerate() {
            let text = format!("text {i}");
            // Shift the blobs far apart so the toy problem is separable.
            let shift = if *g == Group::Ad { 5.0 } else { -5.0 };
            table.insert(text.clone(), vec![x[0] + shift, x[1], 1.0]);
            transcripts.push(Transcript {
                id: format!("id{i:03}"),
                text,
                group: *g,
                split: with_split.then(|| if i % 4 == 0 { Split::Test } else { Split::Train }),
                language: "en".into(),
            });
        }
        let d = Dataset::from_transcripts("toy", "en", transcripts);
        let c = TransformedCorpus::original(&d);
        (d, c, Lookup(table))
    }

    #[test]
    fn cross_validation_pairs_folds_across_corpora() {
        let (d, original, emb) = toy_dataset(12, 18, false);
        let mut other = original.clone();
        other.kind = TransformationKind::ShortSummary;
        other.items.iter_mut().for_each(|i| i.text.push_str(" (unseen)"));
        let seeds = derive_seeds(42, 3);
        let cfg = TrainConfig::default();
        let a = cross_validate(&original, &d, 5, &seeds, &emb, &cfg, 4).unwrap();
        let b = cross_validate(&other, &d, 5, &seeds, &emb, &cfg, 4).unwrap();
        assert_eq!(a.len(), 3);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.fold_assignment, rb.fold_assignment);
            assert_eq!(ra.folds.len(), 5);
        }
        assert!(a.iter().all(|r| r.macro_f1 == 1.0));
        // Every item embeds to the same vector: predictions collapse to one class.
        assert!(b.iter().all(|r| r.degenerate));
        assert_eq!(a, cross_validate(&original, &d, 5, &seeds, &emb, &cfg, 1).unwrap());
    }

    #[test]
    fn constant_corpus_scores_majority_value() {
        let (d, original, emb) = toy_dataset(10, 10, false);
        let constant = TransformedCorpus {
            items: original.items.iter().map(|i| CorpusItem { source_id: i.source_id.clone(), text: "same".into() }).collect(),
            ..original
        };
        let runs = cross_validate(&constant, &d, 5, &[1], &emb, &TrainConfig::default(), 2).unwrap();
        assert!(runs[0].degenerate);
        assert!((runs[0].macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_split_uses_test_ids_only() {
        let (d, c, emb) = toy_dataset(12, 20, true);
        let runs = fixed_split_evaluate(&c, &d, &derive_seeds(0, 10), &emb, &TrainConfig::default(), 4).unwrap();
        assert_eq!(runs.len(), 10);
        let n_test = d.transcripts.iter().filter(|t| t.split == Some(Split::Test)).count();
        assert!(runs.iter().all(|r| r.folds[0].n_test == n_test && r.macro_f1 == 1.0));

        let (d, c, emb) = toy_dataset(6, 6, false);
        assert!(fixed_split_evaluate(&c, &d, &[0], &emb, &TrainConfig::default(), 1).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s = derive_seeds(7, 10);
        assert_eq!(s, derive_seeds(7, 10));
        assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), 10);
        assert_ne!(s, derive_seeds(8, 10));
    }
}
