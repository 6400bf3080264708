//! Labeled transcript datasets: loading, validation, descriptive statistics and
//! splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexstats::Tokenizer;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("row {row}: missing required field {field:?}")]
    MissingField { row: usize, field: &'static str },
    #[error("row {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: unknown group label {value:?} (expected AD or C)")]
    UnknownGroup { row: usize, value: String },
    #[error("row {row}: unknown split {value:?} (expected train or test)")]
    UnknownSplit { row: usize, value: String },
    #[error("row {row}: transcript {id:?} has empty text")]
    EmptyText { row: usize, id: String },
    #[error("row {row}: malformed language tag {value:?}")]
    BadLanguage { row: usize, value: String },
    #[error("row {row}: language {found:?} differs from the dataset language {expected:?}")]
    MixedLanguage { row: usize, expected: String, found: String },
    #[error("dataset is empty")]
    Empty,
    #[error("transcript {id:?} has no split tag")]
    MissingSplit { id: String },
    #[error("k must be at least 2 (got {0})")]
    InvalidK(usize),
    #[error("group {group} has {size} members, fewer than k = {k}")]
    GroupTooSmall { group: Group, size: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "AD")]
    Ad,
    #[serde(rename = "C")]
    Control,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Ad, Group::Control];

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Ad => "AD",
            Group::Control => "C",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ad" => Ok(Group::Ad),
            "c" | "control" => Ok(Group::Control),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub text: String,
    pub group: Group,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<Split>,
    pub language: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub transcripts: Vec<Transcript>,
    pub source_language: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format {other:?} (expected jsonl or csv)")),
        }
    }
}

impl DatasetFormat {
    /// Guess from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

/// Loose row shape shared by the JSONL and CSV readers; validated afterwards.
#[derive(Debug, Deserialize)]
struct RawRow {
    id: Option<String>,
    text: Option<String>,
    group: Option<String>,
    split: Option<String>,
    language: Option<String>,
}

/// Well-formedness check for BCP-47 tags: a 2-3 or 5-8 letter primary
/// subtag followed by 1-8 character alphanumeric subtags.
pub fn is_well_formed_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = match parts.next() {
        Some(p) => p,
        None => return false,
    };
    let primary_ok = matches!(primary.len(), 2 | 3 | 5..=8) && primary.chars().all(|c| c.is_ascii_alphabetic());
    primary_ok && parts.all(|p| (1..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

fn validate_row(row: usize, raw: RawRow) -> Result<Transcript, CorpusError> {
    let id = raw.id.ok_or(CorpusError::MissingField { row, field: "id" })?;
    if id.trim().is_empty() {
        return Err(CorpusError::MissingField { row, field: "id" });
    }
    let text = raw.text.ok_or(CorpusError::MissingField { row, field: "text" })?;
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText { row, id });
    }
    let group_raw = raw.group.ok_or(CorpusError::MissingField { row, field: "group" })?;
    let group = group_raw.parse().map_err(|_| CorpusError::UnknownGroup { row, value: group_raw.clone() })?;
    let split = match raw.split.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(s.parse().map_err(|_| CorpusError::UnknownSplit { row, value: s.to_string() })?),
    };
    let language = raw.language.ok_or(CorpusError::MissingField { row, field: "language" })?;
    if !is_well_formed_language_tag(&language) {
        return Err(CorpusError::BadLanguage { row, value: language });
    }
    Ok(Transcript { id, text, group, split, language })
}

impl Dataset {
    /// Validate rows in order; `rows[i]` is reported as row `i + 1`.
    fn from_raw(name: &str, rows: Vec<(usize, RawRow)>) -> Result<Dataset, CorpusError> {
        let mut seen = HashSet::new();
        let mut transcripts = Vec::with_capacity(rows.len());
        let mut source_language: Option<String> = None;
        for (row, raw) in rows {
            let t = validate_row(row, raw)?;
            if !seen.insert(t.id.clone()) {
                return Err(CorpusError::DuplicateId { row, id: t.id });
            }
            match &source_language {
                None => source_language = Some(t.language.clone()),
                Some(l) if *l != t.language => {
                    return Err(CorpusError::MixedLanguage { row, expected: l.clone(), found: t.language })
                }
                _ => {}
            }
            transcripts.push(t);
        }
        let source_language = source_language.ok_or(CorpusError::Empty)?;
        Ok(Dataset { name: name.to_string(), transcripts, source_language })
    }

    /// Build from already-validated transcripts (used for subsets).
    pub fn from_transcripts(name: &str, source_language: &str, transcripts: Vec<Transcript>) -> Dataset {
        Dataset { name: name.to_string(), transcripts, source_language: source_language.to_string() }
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.transcripts.iter().map(|t| t.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<(String, Group)> {
        self.transcripts.iter().map(|t| (t.id.clone(), t.group)).collect()
    }

    pub fn group_count(&self, g: Group) -> usize {
        self.transcripts.iter().filter(|t| t.group == g).count()
    }

    pub fn parse_jsonl(name: &str, content: &str) -> Result<Dataset, CorpusError> {
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRow =
                serde_json::from_str(line).map_err(|e| CorpusError::Parse { row: i + 1, msg: e.to_string() })?;
            rows.push((i + 1, raw));
        }
        Self::from_raw(name, rows)
    }

    pub fn parse_csv<R: std::io::Read>(name: &str, reader: R) -> Result<Dataset, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<RawRow>().enumerate() {
            let raw = rec.map_err(|e| CorpusError::Parse { row: i + 1, msg: e.to_string() })?;
            rows.push((i + 1, raw));
        }
        Self::from_raw(name, rows)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.transcripts {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "text", "group", "split", "language"])?;
        for t in &self.transcripts {
            let split = match t.split {
                Some(Split::Train) => "train",
                Some(Split::Test) => "test",
                None => "",
            };
            w.write_record([t.id.as_str(), t.text.as_str(), t.group.as_str(), split, t.language.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load a dataset; its name is the file stem.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let file = File::open(path).map_err(io_err)?;
    match format {
        DatasetFormat::Jsonl => {
            let mut content = String::new();
            for line in BufReader::new(file).lines() {
                content.push_str(&line.map_err(io_err)?);
                content.push('\n');
            }
            Dataset::parse_jsonl(&name, &content)
        }
        DatasetFormat::Csv => Dataset::parse_csv(&name, file),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: Group,
    pub count: usize,
    pub mean_tokens: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when degenerate.
    pub std_tokens: f64,
    /// Set when the group has fewer than two members.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    /// AD first, then control.
    pub groups: Vec<GroupStats>,
}

impl DatasetStats {
    pub fn group(&self, g: Group) -> &GroupStats {
        self.groups.iter().find(|s| s.group == g).expect("both groups present")
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }
}

pub fn dataset_stats(d: &Dataset, tokenizer: &Tokenizer) -> Result<DatasetStats, CorpusError> {
    if d.is_empty() {
        return Err(CorpusError::Empty);
    }
    let groups = Group::BOTH
        .iter()
        .map(|&g| {
            let lens: Vec<f64> = d
                .transcripts
                .iter()
                .filter(|t| t.group == g)
                .map(|t| tokenizer.tokenize(&t.text).len() as f64)
                .collect();
            let n = lens.len();
            let mean = if n == 0 { 0.0 } else { lens.iter().sum::<f64>() / n as f64 };
            let std = if n < 2 {
                0.0
            } else {
                (lens.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            };
            GroupStats { group: g, count: n, mean_tokens: mean, std_tokens: std, degenerate: n < 2 }
        })
        .collect();
    Ok(DatasetStats { dataset: d.name.clone(), groups })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.assignments.values() {
            sizes[*f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment over `(id, group)` pairs.
///
/// Each group is shuffled with a seeded RNG, the groups are concatenated (AD
/// first) and position `i` goes to fold `i mod k`. Per-group fold counts and
/// total fold sizes therefore each differ by at most one.
pub fn stratified_folds(items: &[(String, Group)], k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    if k < 2 {
        return Err(CorpusError::InvalidK(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    let mut pos = 0usize;
    for g in Group::BOTH {
        let mut members: Vec<&String> = items.iter().filter(|(_, gg)| *gg == g).map(|(id, _)| id).collect();
        if members.len() < k {
            return Err(CorpusError::GroupTooSmall { group: g, size: members.len(), k });
        }
        members.shuffle(&mut rng);
        for id in members {
            assignments.insert(id.clone(), pos % k);
            pos += 1;
        }
    }
    Ok(FoldAssignment { k, assignments })
}

pub fn split_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    stratified_folds(&d.labels(), k, seed)
}

/// Partition by split tag. An empty side is returned as-is; callers that need
/// both sides check for emptiness.
pub fn fixed_split(d: &Dataset) -> Result<(Dataset, Dataset), CorpusError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for t in &d.transcripts {
        match t.split {
            Some(Split::Train) => train.push(t.clone()),
            Some(Split::Test) => test.push(t.clone()),
            None => return Err(CorpusError::MissingSplit { id: t.id.clone() }),
        }
    }
    Ok((
        Dataset::from_transcripts(&format!("{}-train", d.name), &d.source_language, train),
        Dataset::from_transcripts(&format!("{}-test", d.name), &d.source_language, test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(id: &str, text: &str, group: &str) -> String {
        format!("{{\"id\":\"{id}\",\"text\":\"{text}\",\"group\":\"{group}\",\"language\":\"en\"}}")
    }

    fn synthetic(n_ad: usize, n_c: usize) -> Dataset {
        let mut ts = Vec::new();
        for i in 0..n_ad + n_c {
            ts.push(Transcript {
                id: format!("p{i:03}"),
                text: "word ".repeat(i % 7 + 1),
                group: if i < n_ad { Group::Ad } else { Group::Control },
                split: None,
                language: "en".into(),
            });
        }
        Dataset::from_transcripts("synthetic", "en", ts)
    }

    #[test]
    fn parses_three_rows() {
        let content = [row("a", "the boy", "AD"), row("b", "a dog", "C"), row("c", "the cat", "c")].join("\n");
        let d = Dataset::parse_jsonl("t", &content).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.transcripts[2].group, Group::Control);
        assert_eq!(d.source_language, "en");
        assert_eq!(d.ids(), vec!["a", "b", "c"]);
    }

    #[test]
    fn rejects_unknown_group() {
        let content = [row("a", "x", "AD"), row("b", "y", "MCI")].join("\n");
        match Dataset::parse_jsonl("t", &content) {
            Err(e @ CorpusError::UnknownGroup { row: 2, .. }) => assert!(e.to_string().contains("MCI")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_errors_name_the_row() {
        let dup = [row("a", "x", "AD"), row("a", "y", "C")].join("\n");
        assert!(matches!(Dataset::parse_jsonl("t", &dup), Err(CorpusError::DuplicateId { row: 2, .. })));
        let empty = row("a", "   ", "AD");
        assert!(matches!(Dataset::parse_jsonl("t", &empty), Err(CorpusError::EmptyText { row: 1, .. })));
        let missing = "{\"id\":\"a\",\"group\":\"AD\",\"language\":\"en\"}";
        assert!(matches!(
            Dataset::parse_jsonl("t", missing),
            Err(CorpusError::MissingField { row: 1, field: "text" })
        ));
        let bad_lang = "{\"id\":\"a\",\"text\":\"x\",\"group\":\"AD\",\"language\":\"english!\"}";
        assert!(matches!(Dataset::parse_jsonl("t", bad_lang), Err(CorpusError::BadLanguage { .. })));
        assert!(matches!(Dataset::parse_jsonl("t", ""), Err(CorpusError::Empty)));
    }

    #[test]
    fn language_tags() {
        for ok in ["en", "pt", "pt-BR", "zh-Hant-TW", "yue"] {
            assert!(is_well_formed_language_tag(ok), "{ok}");
        }
        for bad in ["", "e", "english1", "pt_BR", "en-", "pt-toolongsubtag"] {
            assert!(!is_well_formed_language_tag(bad), "{bad}");
        }
    }

    #[test]
    fn csv_mirror_with_quoting() {
        let csv = "id,text,group,split,language\n\
                   a,\"Well, the boy \"\"ran\"\"\",ad,train,en\n\
                   b,the girl,Control,,en\n";
        let d = Dataset::parse_csv("c", csv.as_bytes()).unwrap();
        assert_eq!(d.transcripts[0].text, "Well, the boy \"ran\"");
        assert_eq!(d.transcripts[0].split, Some(Split::Train));
        assert_eq!(d.transcripts[1].split, None);
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        assert_eq!(Dataset::parse_csv("c", out.as_slice()).unwrap(), d);
    }

    #[test]
    fn stats_sample_std() {
        let ts = vec![
            Transcript { id: "a".into(), text: "one two three".into(), group: Group::Ad, split: None, language: "en".into() },
            Transcript { id: "b".into(), text: "one two three four five".into(), group: Group::Ad, split: None, language: "en".into() },
            Transcript { id: "c".into(), text: "solo words here".into(), group: Group::Control, split: None, language: "en".into() },
        ];
        let d = Dataset::from_transcripts("s", "en", ts);
        let s = dataset_stats(&d, &Tokenizer::default()).unwrap();
        let ad = s.group(Group::Ad);
        assert_eq!(ad.mean_tokens, 4.0);
        assert!((ad.std_tokens - 2f64.sqrt()).abs() < 1e-12);
        assert!(!ad.degenerate);
        let c = s.group(Group::Control);
        assert_eq!((c.count, c.std_tokens, c.degenerate), (1, 0.0, true));
        assert_eq!(s.total(), 3);
        assert!(dataset_stats(&Dataset::from_transcripts("e", "en", vec![]), &Tokenizer::default()).is_err());
    }

    #[test]
    fn balanced_counts() {
        let s = dataset_stats(&synthetic(78, 78), &Tokenizer::default()).unwrap();
        assert_eq!((s.group(Group::Ad).count, s.group(Group::Control).count), (78, 78));
    }

    #[test]
    fn folds_for_imbalanced_counts() {
        let d = synthetic(23, 116);
        let f = split_folds(&d, 5, 7).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![28, 28, 28, 28, 27]);
        for fold in 0..5 {
            let ad = d.transcripts.iter().filter(|t| t.group == Group::Ad && f.fold_of(&t.id) == Some(fold)).count();
            assert!(ad == 4 || ad == 5, "fold {fold} has {ad} AD");
        }
    }

    #[test]
    fn folds_two_balanced() {
        let d = synthetic(2, 2);
        let f = split_folds(&d, 2, 1).unwrap();
        for fold in 0..2 {
            let members: Vec<&Transcript> = d.transcripts.iter().filter(|t| f.fold_of(&t.id) == Some(fold)).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|t| t.group == Group::Ad).count(), 1);
        }
    }

    #[test]
    fn folds_deterministic_and_seed_sensitive() {
        let d = synthetic(20, 30);
        assert_eq!(split_folds(&d, 5, 3).unwrap(), split_folds(&d, 5, 3).unwrap());
        assert_ne!(split_folds(&d, 5, 3).unwrap(), split_folds(&d, 5, 4).unwrap());
    }

    #[test]
    fn folds_errors() {
        let d = synthetic(3, 10);
        assert!(matches!(split_folds(&d, 5, 0), Err(CorpusError::GroupTooSmall { group: Group::Ad, size: 3, k: 5 })));
        assert!(matches!(split_folds(&d, 1, 0), Err(CorpusError::InvalidK(1))));
    }

    #[test]
    fn fixed_split_partitions() {
        let mut d = synthetic(5, 5);
        for (i, t) in d.transcripts.iter_mut().enumerate() {
            t.split = Some(if i % 10 < 7 { Split::Train } else { Split::Test });
        }
        let (train, test) = fixed_split(&d).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
        assert_eq!(train.transcripts[0].id, "p000");

        for t in d.transcripts.iter_mut() {
            t.split = Some(Split::Train);
        }
        let (_, test) = fixed_split(&d).unwrap();
        assert!(test.is_empty());

        d.transcripts[4].split = None;
        match fixed_split(&d) {
            Err(CorpusError::MissingSplit { id }) => assert_eq!(id, "p004"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip_is_byte_stable() {
        let mut d = synthetic(3, 4);
        d.transcripts[1].split = Some(Split::Test);
        let mut first = Vec::new();
        d.write_jsonl(&mut first).unwrap();
        let reloaded = Dataset::parse_jsonl("synthetic", std::str::from_utf8(&first).unwrap()).unwrap();
        let _ = dataset_stats(&reloaded, &Tokenizer::default()).unwrap();
        let mut second = Vec::new();
        reloaded.write_jsonl(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(reloaded, d);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(n_ad in 2usize..30, n_c in 2usize..60, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n_ad >= k && n_c >= k);
            let d = synthetic(n_ad, n_c);
            let f = split_folds(&d, k, seed).unwrap();
            prop_assert_eq!(f.assignments.len(), d.len());
            let sizes = f.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let global = n_ad as f64 / d.len() as f64;
            for fold in 0..k {
                let ad = d.transcripts.iter().filter(|t| t.group == Group::Ad && f.fold_of(&t.id) == Some(fold)).count();
                let frac = ad as f64 / sizes[fold] as f64;
                prop_assert!((frac - global).abs() <= 1.0 / sizes[fold] as f64 + 1e-12);
            }
            let s = dataset_stats(&d, &Tokenizer::default()).unwrap();
            prop_assert_eq!(s.total(), d.len());
        }
    }
}
