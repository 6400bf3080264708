use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LexError;

/// Coarse part-of-speech tags. `VerbPart` covers participles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PosTag {
    Noun,
    Pron,
    Verb,
    VerbPart,
    Adv,
    Adj,
    Det,
    Adp,
    Conj,
    Num,
    Prt,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 12] = [
        PosTag::Noun,
        PosTag::Pron,
        PosTag::Verb,
        PosTag::VerbPart,
        PosTag::Adv,
        PosTag::Adj,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Conj,
        PosTag::Num,
        PosTag::Prt,
        PosTag::X,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Pron => "PRON",
            PosTag::Verb => "VERB",
            PosTag::VerbPart => "VERB_PART",
            PosTag::Adv => "ADV",
            PosTag::Adj => "ADJ",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Conj => "CONJ",
            PosTag::Num => "NUM",
            PosTag::Prt => "PRT",
            PosTag::X => "X",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = LexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LexError::Annotation(format!("unknown POS tag {s:?}")))
    }
}

const BUILTIN_LEXICON: &str = include_str!("../../data/en_lexicon.tsv");

// Checked in order; first match wins.
const SUFFIX_RULES: &[(&str, PosTag)] = &[
    ("ing", PosTag::VerbPart),
    ("ly", PosTag::Adv),
    ("tion", PosTag::Noun),
    ("sion", PosTag::Noun),
    ("ness", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ance", PosTag::Noun),
    ("ence", PosTag::Noun),
    ("ship", PosTag::Noun),
    ("hood", PosTag::Noun),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("ive", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ible", PosTag::Adj),
    ("less", PosTag::Adj),
    ("ish", PosTag::Adj),
    ("ed", PosTag::Verb),
];

/// Lexicon lookup followed by suffix heuristics; unknown words get `X`.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: HashMap<String, PosTag>,
}

impl LexiconTagger {
    /// The shipped English lexicon.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("built-in lexicon parses")
    }

    /// `word<TAB>TAG` lines.
    pub fn parse(content: &str) -> Result<Self, LexError> {
        let mut lexicon = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, t) = line
                .split_once('\t')
                .ok_or_else(|| LexError::Annotation(format!("lexicon line {}: expected word<TAB>TAG", i + 1)))?;
            lexicon.insert(w.to_lowercase(), t.trim().parse()?);
        }
        Ok(LexiconTagger { lexicon })
    }

    pub fn tag_word(&self, word: &str) -> PosTag {
        if let Some(t) = self.lexicon.get(word) {
            return *t;
        }
        if !word.is_empty() && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
            return PosTag::Num;
        }
        let len = word.chars().count();
        for (suffix, tag) in SUFFIX_RULES {
            if len > suffix.len() + 1 && word.ends_with(suffix) {
                return *tag;
            }
        }
        // Inflected forms of known words.
        for suffix in ["es", "s"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                match self.lexicon.get(stem) {
                    Some(PosTag::Noun) => return PosTag::Noun,
                    Some(PosTag::Verb) => return PosTag::Verb,
                    _ => {}
                }
            }
        }
        PosTag::X
    }

    pub fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        tokens.iter().map(|t| self.tag_word(t)).collect()
    }
}

/// Pre-computed tags keyed by document id (JSONL `{"id": str, "tags": [str]}`).
#[derive(Debug, Clone, Default)]
pub struct AnnotationTagger {
    docs: HashMap<String, Vec<PosTag>>,
}

#[derive(Deserialize)]
struct AnnotationLine {
    id: String,
    tags: Vec<String>,
}

impl AnnotationTagger {
    pub fn parse_jsonl(content: &str) -> Result<Self, LexError> {
        let mut docs = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: AnnotationLine = serde_json::from_str(line)
                .map_err(|e| LexError::Annotation(format!("line {}: {e}", i + 1)))?;
            let tags = row.tags.iter().map(|t| t.parse()).collect::<Result<Vec<_>, _>>()?;
            docs.insert(row.id, tags);
        }
        Ok(AnnotationTagger { docs })
    }

    pub fn load(path: &Path) -> Result<Self, LexError> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn tags_for(&self, doc_id: &str, tokens: &[String]) -> Result<Vec<PosTag>, LexError> {
        let tags = self
            .docs
            .get(doc_id)
            .ok_or_else(|| LexError::Annotation(format!("no annotation for document {doc_id:?}")))?;
        if tags.len() != tokens.len() {
            return Err(LexError::Annotation(format!(
                "document {doc_id:?} has {} tags for {} tokens",
                tags.len(),
                tokens.len()
            )));
        }
        Ok(tags.clone())
    }
}

#[derive(Debug, Clone)]
pub enum Tagger {
    Baseline(LexiconTagger),
    External(AnnotationTagger),
}

impl Tagger {
    pub fn pos_tag(&self, doc_id: &str, tokens: &[String]) -> Result<Vec<PosTag>, LexError> {
        match self {
            Tagger::Baseline(t) => Ok(t.tag(tokens)),
            Tagger::External(t) => t.tags_for(doc_id, tokens),
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Tagger::Baseline(_) => "built-in lexicon + suffix baseline",
            Tagger::External(_) => "external annotation file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosRatios {
    /// Pronouns per noun; `None` when the document has no nouns.
    pub pnr: Option<f64>,
    /// Adverbs per token.
    pub adv_ratio: f64,
    /// Participles per token.
    pub part_ratio: f64,
}

pub fn pos_ratios(tags: &[PosTag]) -> Result<PosRatios, LexError> {
    if tags.is_empty() {
        return Err(LexError::Empty);
    }
    let count = |want: PosTag| tags.iter().filter(|t| **t == want).count();
    let nouns = count(PosTag::Noun);
    let n = tags.len() as f64;
    Ok(PosRatios {
        pnr: (nouns > 0).then(|| count(PosTag::Pron) as f64 / nouns as f64),
        adv_ratio: count(PosTag::Adv) as f64 / n,
        part_ratio: count(PosTag::VerbPart) as f64 / n,
    })
}
