//! Lexical and part-of-speech measures over tokenized transcripts, and their
//! AD vs. control group comparison.

mod pos;

pub use pos::{pos_ratios, AnnotationTagger, LexiconTagger, PosRatios, PosTag, Tagger};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::Group;
use crate::stattests::{self, StatError, TestMethod};

#[derive(Debug, Error)]
pub enum LexError {
    #[error("empty token list")]
    Empty,
    #[error("frequency table {path}: line {line}: {msg}")]
    TableFormat { path: String, line: usize, msg: String },
    #[error("frequency table is empty")]
    EmptyTable,
    #[error("POS annotation: {0}")]
    Annotation(String),
    #[error("group comparison: {0}")]
    Compare(#[from] StatError),
    #[error("group comparison: {0}")]
    Groups(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    #[default]
    UnicodeWords,
}

/// Unicode (UAX #29) word segmentation. Punctuation never forms a token and
/// apostrophes inside words are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub mode: TokenizerMode,
    pub lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { mode: TokenizerMode::UnicodeWords, lowercase: true }
    }
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        match self.mode {
            TokenizerMode::UnicodeWords => text
                .unicode_words()
                .map(|w| if self.lowercase { w.to_lowercase() } else { w.to_string() })
                .collect(),
        }
    }

    pub fn describe(&self) -> String {
        format!("unicode_words{}", if self.lowercase { ", lowercased" } else { "" })
    }
}

/// Tokenize with the default tokenizer.
pub fn tokenize(text: &str) -> Vec<String> {
    Tokenizer::default().tokenize(text)
}

/// Type-token ratio: distinct tokens over total tokens.
pub fn ttr<S: AsRef<str>>(tokens: &[S]) -> Result<f64, LexError> {
    if tokens.is_empty() {
        return Err(LexError::Empty);
    }
    let unique: HashSet<&str> = tokens.iter().map(|t| t.as_ref()).collect();
    Ok(unique.len() as f64 / tokens.len() as f64)
}

/// Word probabilities for Zipf-frequency lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub language: String,
    probs: HashMap<String, f64>,
    /// Zipf value assigned to out-of-vocabulary tokens.
    pub oov_floor: f64,
}

pub fn zipf_from_probability(p: f64) -> f64 {
    (p * 1e9).log10()
}

impl FrequencyTable {
    pub fn new(language: &str, probs: HashMap<String, f64>) -> Result<Self, LexError> {
        if probs.is_empty() {
            return Err(LexError::EmptyTable);
        }
        Ok(FrequencyTable { language: language.to_string(), probs, oov_floor: 0.0 })
    }

    pub fn with_oov_floor(mut self, floor: f64) -> Self {
        self.oov_floor = floor;
        self
    }

    /// Parse the `word<TAB>probability` format.
    pub fn parse_tsv(content: &str, language: &str, origin: &str) -> Result<Self, LexError> {
        let mut probs = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| LexError::TableFormat { path: origin.to_string(), line: i + 1, msg };
            let (word, p) = line.split_once('\t').ok_or_else(|| err("expected word<TAB>probability".into()))?;
            let p: f64 = p.trim().parse().map_err(|_| err(format!("bad probability {p:?}")))?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(err(format!("probability {p} outside (0, 1]")));
            }
            probs.insert(word.to_string(), p);
        }
        Self::new(language, probs)
    }

    pub fn load_tsv(path: &Path, language: &str) -> Result<Self, LexError> {
        let content = fs::read_to_string(path)?;
        Self::parse_tsv(&content, language, &path.display().to_string())
    }

    /// Build a table from raw word counts.
    pub fn from_counts<I, S>(counts: I, language: &str) -> Result<Self, LexError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, c) in counts {
            if c > 0 {
                *merged.entry(w.into()).or_default() += c;
            }
        }
        let total: u64 = merged.values().sum();
        let probs = merged.into_iter().map(|(w, c)| (w, c as f64 / total as f64)).collect();
        Self::new(language, probs)
    }

    /// Writes entries sorted by descending probability, then word.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut entries: Vec<(&String, &f64)> = self.probs.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (w, p) in entries {
            writeln!(out, "{w}\t{p:e}")?;
        }
        Ok(())
    }

    pub fn probability(&self, word: &str) -> Option<f64> {
        self.probs.get(word).copied()
    }

    pub fn zipf(&self, word: &str) -> f64 {
        self.probability(word).map(zipf_from_probability).unwrap_or(self.oov_floor)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Mean Zipf frequency over tokens (OOV tokens contribute the table's floor).
pub fn avg_zipf<S: AsRef<str>>(tokens: &[S], table: &FrequencyTable) -> Result<f64, LexError> {
    if tokens.is_empty() {
        return Err(LexError::Empty);
    }
    Ok(tokens.iter().map(|t| table.zipf(t.as_ref())).sum::<f64>() / tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub mean_control: f64,
    pub mean_ad: f64,
    pub p_value: f64,
    pub test: TestMethod,
    /// Documents left out because the measure was undefined for them.
    pub excluded: usize,
}

/// Welch comparison of a per-document measure between the control and AD groups.
/// `None` values are undefined measures and are excluded.
pub fn group_compare(values: &[(Group, Option<f64>)]) -> Result<GroupComparison, LexError> {
    let mut control = Vec::new();
    let mut ad = Vec::new();
    let mut excluded = 0;
    for (g, v) in values {
        match (g, v) {
            (_, None) => excluded += 1,
            (Group::Control, Some(x)) => control.push(*x),
            (Group::Ad, Some(x)) => ad.push(*x),
        }
    }
    if control.len() < 2 || ad.len() < 2 {
        return Err(LexError::Groups(format!(
            "each group needs at least 2 defined values (control {}, AD {})",
            control.len(),
            ad.len()
        )));
    }
    let result = stattests::welch_t(&control, &ad)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(GroupComparison {
        mean_control: mean(&control),
        mean_ad: mean(&ad),
        p_value: result.p_value,
        test: result.method,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Ttr,
    /// Average Zipf frequency.
    Lf,
    Pnr,
    /// Adverbs per token.
    Rb,
    /// Participles per token.
    Vb,
}

impl Measure {
    pub const LEXICAL: [Measure; 2] = [Measure::Ttr, Measure::Lf];
    pub const POS: [Measure; 3] = [Measure::Pnr, Measure::Rb, Measure::Vb];

    pub fn label(&self) -> &'static str {
        match self {
            Measure::Ttr => "ttr",
            Measure::Lf => "lf",
            Measure::Pnr => "pnr",
            Measure::Rb => "RB",
            Measure::Vb => "VB",
        }
    }
}

/// Per-document measures; `None` where a measure is undefined (no tokens, or
/// no nouns for pnr).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocMeasures {
    pub ttr: Option<f64>,
    pub lf: Option<f64>,
    pub pnr: Option<f64>,
    pub rb: Option<f64>,
    pub vb: Option<f64>,
}

impl DocMeasures {
    pub fn get(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Ttr => self.ttr,
            Measure::Lf => self.lf,
            Measure::Pnr => self.pnr,
            Measure::Rb => self.rb,
            Measure::Vb => self.vb,
        }
    }
}

pub fn document_measures(
    doc_id: &str,
    text: &str,
    tokenizer: &Tokenizer,
    table: &FrequencyTable,
    tagger: &Tagger,
) -> Result<DocMeasures, LexError> {
    let tokens = tokenizer.tokenize(text);
    if tokens.is_empty() {
        return Ok(DocMeasures { ttr: None, lf: None, pnr: None, rb: None, vb: None });
    }
    let ratios = pos_ratios(&tagger.pos_tag(doc_id, &tokens)?)?;
    Ok(DocMeasures {
        ttr: Some(ttr(&tokens)?),
        lf: Some(avg_zipf(&tokens, table)?),
        pnr: ratios.pnr,
        rb: Some(ratios.adv_ratio),
        vb: Some(ratios.part_ratio),
    })
}

/// Group comparison for each measure. A measure whose comparison is not
/// possible maps to the reason.
pub fn compare_measures(docs: &[(Group, DocMeasures)], measures: &[Measure]) -> BTreeMap<Measure, Result<GroupComparison, String>> {
    measures
        .iter()
        .map(|&m| {
            let values: Vec<(Group, Option<f64>)> = docs.iter().map(|(g, d)| (*g, d.get(m))).collect();
            (m, group_compare(&values).map_err(|e| e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("The boy, the puppy."), toks(&["the", "boy", "the", "puppy"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Don't stop"), toks(&["don't", "stop"]));
        assert_eq!(tokenize("O menino viu um cachorrinho, né?"), toks(&["o", "menino", "viu", "um", "cachorrinho", "né"]));
        let cased = Tokenizer { lowercase: false, ..Tokenizer::default() };
        assert_eq!(cased.tokenize("The Boy"), toks(&["The", "Boy"]));
    }

    #[test]
    fn ttr_examples() {
        assert!((ttr(&toks(&["the", "boy", "saw", "the", "puppy"])).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(ttr(&toks(&["a", "b", "c"])).unwrap(), 1.0);
        assert!((ttr(&toks(&["no", "no", "no"])).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(ttr::<String>(&[]), Err(LexError::Empty)));
    }

    #[test]
    fn zipf_examples() {
        let table = FrequencyTable::parse_tsv("boy\t0.05\nrare\t1e-9\nseven\t0.01\nthree\t1e-6\n", "en", "t").unwrap();
        assert!((avg_zipf(&toks(&["boy"]), &table).unwrap() - 7.698970004336019).abs() < 1e-12);
        assert!(avg_zipf(&toks(&["rare"]), &table).unwrap().abs() < 1e-12);
        assert!((avg_zipf(&toks(&["seven", "three"]), &table).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(avg_zipf(&toks(&["unknown"]), &table).unwrap(), 0.0);
        let floored = table.with_oov_floor(1.5);
        assert_eq!(avg_zipf(&toks(&["unknown"]), &floored).unwrap(), 1.5);
        assert!(avg_zipf::<String>(&[], &floored).is_err());
    }

    #[test]
    fn frequency_table_errors() {
        assert!(matches!(FrequencyTable::parse_tsv("", "en", "t"), Err(LexError::EmptyTable)));
        assert!(FrequencyTable::parse_tsv("a\t0\n", "en", "t").is_err());
        assert!(FrequencyTable::parse_tsv("a 0.1\n", "en", "t").is_err());
        assert!(FrequencyTable::parse_tsv("a\t1.5\n", "en", "t").is_err());
    }

    #[test]
    fn frequency_table_from_counts_round_trip() {
        let t = FrequencyTable::from_counts([("the", 6u64), ("boy", 3), ("dog", 1)], "en").unwrap();
        assert!((t.probability("the").unwrap() - 0.6).abs() < 1e-15);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let back = FrequencyTable::parse_tsv(std::str::from_utf8(&buf).unwrap(), "en", "t").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn group_compare_identical_groups() {
        let vals: Vec<(Group, Option<f64>)> = [1.0, 2.0, 3.0]
            .iter()
            .flat_map(|v| [(Group::Control, Some(*v)), (Group::Ad, Some(*v))])
            .collect();
        let c = group_compare(&vals).unwrap();
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert_eq!(c.mean_ad, c.mean_control);
    }

    #[test]
    fn group_compare_excludes_undefined() {
        let vals = vec![
            (Group::Control, Some(0.5)),
            (Group::Control, Some(0.7)),
            (Group::Control, None),
            (Group::Ad, Some(1.1)),
            (Group::Ad, Some(0.9)),
        ];
        let c = group_compare(&vals).unwrap();
        assert_eq!(c.excluded, 1);
        assert!((c.mean_control - 0.6).abs() < 1e-12);
        let welch = stattests::welch_t(&[0.5, 0.7], &[1.1, 0.9]).unwrap();
        assert_eq!(c.p_value, welch.p_value);
    }

    #[test]
    fn group_compare_degenerate() {
        let vals = vec![
            (Group::Control, Some(1.0)),
            (Group::Control, Some(1.0)),
            (Group::Ad, Some(2.0)),
            (Group::Ad, Some(2.0)),
        ];
        assert!(matches!(group_compare(&vals), Err(LexError::Compare(StatError::Degenerate(_)))));
        assert!(group_compare(&vals[..3]).is_err());
    }

    #[test]
    fn document_measures_and_comparison() {
        let table = FrequencyTable::new("en", HashMap::from([("the".to_string(), 0.05)])).unwrap();
        let tagger = Tagger::Baseline(LexiconTagger::builtin());
        let tok = Tokenizer::default();
        let d = document_measures("x", "The boy saw the puppy.", &tok, &table, &tagger).unwrap();
        assert!((d.ttr.unwrap() - 0.8).abs() < 1e-12);
        // Two in-table tokens at 7.699, three OOV tokens at the 0.0 floor.
        assert!((d.lf.unwrap() - 2.0 * 0.05e9f64.log10() / 5.0).abs() < 1e-12);
        assert_eq!(d.pnr, Some(0.0));
        let empty = document_measures("y", "...", &tok, &table, &tagger).unwrap();
        assert_eq!(empty.ttr, None);

        let mk = |v: f64| DocMeasures { ttr: Some(v), lf: Some(v), pnr: None, rb: Some(v), vb: Some(v) };
        let docs = vec![(Group::Ad, mk(0.5)), (Group::Ad, mk(0.6)), (Group::Control, mk(0.7)), (Group::Control, mk(0.9))];
        let cmp = compare_measures(&docs, &[Measure::Ttr, Measure::Pnr]);
        assert!((cmp[&Measure::Ttr].as_ref().unwrap().mean_control - 0.8).abs() < 1e-12);
        assert!(cmp[&Measure::Pnr].is_err());
    }

    proptest! {
        #[test]
        fn ttr_bounded_and_permutation_invariant(words in prop::collection::vec("[a-e]{1,2}", 1..40), rot in 0usize..40) {
            let t = ttr(&words).unwrap();
            prop_assert!(t > 0.0 && t <= 1.0);
            let mut rotated = words.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            prop_assert_eq!(ttr(&rotated).unwrap(), t);
        }

        #[test]
        fn avg_zipf_bounded(words in prop::collection::vec("[a-f]", 1..30)) {
            let table = FrequencyTable::from_counts(
                [("a", 50u64), ("b", 20), ("c", 5), ("d", 1)], "en").unwrap();
            let z = avg_zipf(&words, &table).unwrap();
            let max = zipf_from_probability(50.0 / 76.0);
            // "e" and "f" are OOV and fall to the 0.0 floor.
            prop_assert!(z >= 0.0 - 1e-12 && z <= max + 1e-12);
            let mut rev = words.clone();
            rev.reverse();
            prop_assert!((avg_zipf(&rev, &table).unwrap() - z).abs() < 1e-12);
        }
    }
}
