//! Result tables in Markdown, CSV and JSON.
//!
//! Markdown shows display precision; CSV keeps full precision; JSON is the
//! complete table and parses back to an equal value.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{summarize_runs, ClassificationRun};
use crate::corpus::{DatasetStats, Group};
use crate::lexstats::{GroupComparison, Measure};
use crate::stattests::wilcoxon_signed_rank;
use crate::textmetrics::{Metric, SimilarityScore};
use crate::transform::TransformationKind;

pub const DASH: &str = "—";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("runs for {kind} are not paired with the baseline: {detail}")]
    Unpaired { kind: TransformationKind, detail: String },
    #[error("no runs for the baseline {0}")]
    MissingBaseline(TransformationKind),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON output: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Full-precision value; `None` for cells with no computed value.
    pub value: Option<f64>,
    /// Standard deviation shown next to the value, when the cell has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    pub display: String,
    #[serde(default)]
    pub significant: bool,
    #[serde(default)]
    pub bold: bool,
}

impl Cell {
    pub fn number(value: f64, decimals: usize) -> Self {
        Cell { value: Some(value), spread: None, display: format!("{value:.decimals$}"), significant: false, bold: false }
    }

    pub fn missing() -> Self {
        Cell { value: None, spread: None, display: DASH.to_string(), significant: false, bold: false }
    }

    fn markdown(&self) -> String {
        // Significance stars are escaped and kept outside the bold span.
        let (num, stars) = split_stars(&self.display);
        let stars = stars.replace('*', "\\*");
        if self.bold && self.value.is_some() {
            format!("**{num}**{stars}")
        } else {
            format!("{num}{stars}")
        }
    }
}

fn split_stars(s: &str) -> (&str, &str) {
    let cut = s.trim_end_matches('*').len();
    s.split_at(cut)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub labels: Vec<String>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    /// File-name stem, e.g. `similarity`.
    pub name: String,
    pub title: String,
    pub label_columns: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub footer: Vec<String>,
}

impl ReportTable {
    pub fn is_rectangular(&self) -> bool {
        self.rows.iter().all(|r| r.labels.len() == self.label_columns.len() && r.cells.len() == self.columns.len())
    }

    /// Bold the maximum of each listed column (all tied maxima).
    fn bold_column_maxima(&mut self, columns: &[usize]) {
        for &c in columns {
            let max = self.rows.iter().filter_map(|r| r.cells[c].value).fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                continue;
            }
            for r in &mut self.rows {
                if r.cells[c].value == Some(max) {
                    r.cells[c].bold = true;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Markdown, Format::Csv, Format::Json];

    pub fn extension(&self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown report format {other:?} (expected md, csv or json)")),
        }
    }
}

pub fn emit<W: Write>(table: &ReportTable, format: Format, mut out: W) -> Result<(), ReportError> {
    match format {
        Format::Markdown => write_markdown(table, &mut out)?,
        Format::Csv => write_csv(table, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, table)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn escape_md(s: &str) -> String {
    s.replace('|', "\\|")
}

fn write_markdown<W: Write>(t: &ReportTable, out: &mut W) -> io::Result<()> {
    writeln!(out, "## {}\n", t.title)?;
    let header: Vec<String> = t.label_columns.iter().chain(&t.columns).map(|s| escape_md(s)).collect();
    writeln!(out, "| {} |", header.join(" | "))?;
    let align: Vec<&str> = t.label_columns.iter().map(|_| "---").chain(t.columns.iter().map(|_| "---:")).collect();
    writeln!(out, "|{}|", align.join("|"))?;
    for r in &t.rows {
        let cells: Vec<String> = r.labels.iter().map(|l| escape_md(l)).chain(r.cells.iter().map(Cell::markdown)).collect();
        writeln!(out, "| {} |", cells.join(" | "))?;
    }
    if !t.footer.is_empty() {
        writeln!(out)?;
        for f in &t.footer {
            writeln!(out, "- {f}")?;
        }
    }
    Ok(())
}

fn write_csv<W: Write>(t: &ReportTable, out: &mut W) -> Result<(), csv::Error> {
    // Columns with a spread get a companion `<name> std` column.
    let spread_cols: Vec<bool> = (0..t.columns.len()).map(|c| t.rows.iter().any(|r| r.cells[c].spread.is_some())).collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = t.label_columns.clone();
    for (c, name) in t.columns.iter().enumerate() {
        header.push(name.clone());
        if spread_cols[c] {
            header.push(format!("{name} std"));
        }
    }
    w.write_record(&header)?;
    for r in &t.rows {
        let mut rec = r.labels.clone();
        for (c, cell) in r.cells.iter().enumerate() {
            rec.push(cell.value.map(|v| v.to_string()).unwrap_or_default());
            if spread_cols[c] {
                rec.push(cell.spread.map(|v| v.to_string()).unwrap_or_default());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `table_<name>.{md,csv,json}` under `dir`, returning the paths.
pub fn write_table(table: &ReportTable, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for f in Format::ALL {
        let path = dir.join(format!("table_{}.{}", table.name, f.extension()));
        let mut buf = Vec::new();
        emit(table, f, &mut buf)?;
        fs::write(&path, buf)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn parse_json(content: &str) -> Result<ReportTable, ReportError> {
    Ok(serde_json::from_str(content)?)
}

/// Row label for a kind; source-language kinds carry the language tag.
pub fn kind_label(kind: TransformationKind, source_language: &str, target_language: &str) -> String {
    match kind {
        TransformationKind::Original | TransformationKind::BackTranslated if !source_language.eq_ignore_ascii_case(target_language) => {
            format!("{} ({source_language})", kind.label())
        }
        TransformationKind::Translated => format!("{} ({target_language})", kind.label()),
        _ => kind.label().to_string(),
    }
}

/// Dataset sizes and transcript lengths per group.
pub fn datasets_table(stats: &[DatasetStats]) -> ReportTable {
    let rows = stats
        .iter()
        .map(|s| {
            let (ad, c) = (s.group(Group::Ad), s.group(Group::Control));
            let length = |g: &crate::corpus::GroupStats| Cell {
                value: Some(g.mean_tokens),
                spread: Some(g.std_tokens),
                display: format!("{:.0} (±{:.0})", g.mean_tokens, g.std_tokens),
                significant: false,
                bold: false,
            };
            Row {
                labels: vec![s.dataset.clone()],
                cells: vec![
                    Cell::number(ad.count as f64, 0),
                    Cell::number(c.count as f64, 0),
                    Cell::number(s.total() as f64, 0),
                    length(ad),
                    length(c),
                ],
            }
        })
        .collect();
    let mut footer = vec!["Transcript length is the mean (± sample standard deviation) number of word tokens; filled pauses count as words, punctuation does not.".to_string()];
    for s in stats {
        for g in &s.groups {
            if g.degenerate {
                footer.push(format!("{}: the {} group has fewer than two transcripts; its standard deviation is undefined.", s.dataset, g.group));
            }
        }
    }
    ReportTable {
        name: "datasets".into(),
        title: "Dataset statistics".into(),
        label_columns: vec!["Dataset".into()],
        columns: ["AD", "Control", "Total", "Length AD", "Length Control"].map(String::from).to_vec(),
        rows,
        footer,
    }
}

/// Mean similarity of each kind against the reference corpus. Rows follow
/// pipeline step order; kinds listed in `missing` are noted in the footer.
pub fn similarity_table(
    rows: &BTreeMap<TransformationKind, SimilarityScore>,
    reference: TransformationKind,
    missing: &[TransformationKind],
    parameters: &str,
) -> ReportTable {
    let columns = [Metric::Chrf, Metric::Bleu, Metric::Cosine];
    let table_rows = TransformationKind::ALL
        .iter()
        .filter_map(|k| rows.get(k).map(|s| (k, s)))
        .map(|(k, s)| Row {
            labels: vec![k.step().to_string(), k.label().to_string()],
            cells: columns.iter().map(|m| Cell::number(s.get(*m), 2)).collect(),
        })
        .collect();
    let mut footer = vec![
        format!("Scores are means over transcript pairs against the {} text.", reference.label()),
        parameters.to_string(),
    ];
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|k| k.label()).collect();
        footer.push(format!("Not computed: {}.", names.join(", ")));
    }
    ReportTable {
        name: "similarity".into(),
        title: "Similarity scores".into(),
        label_columns: vec!["Step".into(), "Transformation".into()],
        columns: columns.iter().map(|m| m.label().to_string()).collect(),
        rows: table_rows,
        footer,
    }
}

pub const CLASSIFIER_NOTE: &str =
    "Classifier: class-weighted logistic head over text embeddings, used in place of a fine-tuned transformer; absolute scores are not comparable to fine-tuned models.";

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Paired macro-F1 values, checked to come from the same seeds in the same order.
fn paired(kind: TransformationKind, base: &[ClassificationRun], other: &[ClassificationRun]) -> Result<(Vec<f64>, Vec<f64>), ReportError> {
    let seeds = |r: &[ClassificationRun]| r.iter().map(|x| x.seed).collect::<Vec<_>>();
    if seeds(base) != seeds(other) {
        return Err(ReportError::Unpaired { kind, detail: format!("seeds {:?} vs {:?}", seeds(base), seeds(other)) });
    }
    for (a, b) in base.iter().zip(other) {
        if a.fold_assignment.is_some() && b.fold_assignment.is_some() && a.fold_assignment != b.fold_assignment {
            return Err(ReportError::Unpaired { kind, detail: format!("fold assignments differ for seed {}", a.seed) });
        }
    }
    Ok((base.iter().map(|r| r.macro_f1).collect(), other.iter().map(|r| r.macro_f1).collect()))
}

pub struct ClassificationInput<'a> {
    pub name: &'a str,
    pub title: &'a str,
    pub runs: &'a BTreeMap<TransformationKind, Vec<ClassificationRun>>,
    /// Kinds to include, in row order.
    pub kinds: &'a [TransformationKind],
    /// Baseline for significance stars; `None` disables stars.
    pub baseline: Option<TransformationKind>,
    pub source_language: &'a str,
    pub target_language: &'a str,
    pub notes: &'a [String],
}

/// Mean macro-F1 and per-class accuracy per kind, with paired Wilcoxon stars
/// on macro-F1 improvements over the baseline and bold column maxima.
pub fn classification_table(input: &ClassificationInput) -> Result<ReportTable, ReportError> {
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    let base_runs = match input.baseline {
        Some(b) => Some(input.runs.get(&b).ok_or(ReportError::MissingBaseline(b))?),
        None => None,
    };
    let mut n_runs = None;
    for &kind in input.kinds {
        let Some(runs) = input.runs.get(&kind) else {
            footer.push(format!("{}: no classification runs.", kind.label()));
            continue;
        };
        let summary = summarize_runs(runs).expect("non-empty runs");
        n_runs = Some(runs.len());
        let mut f1 = Cell::number(summary.macro_f1, 3);
        if let (Some(base), Some(b)) = (base_runs, input.baseline) {
            if kind != b {
                let (x, y) = paired(kind, base, runs)?;
                let improved = summary.macro_f1 > summarize_runs(base).expect("non-empty").macro_f1;
                match wilcoxon_signed_rank(&y, &x) {
                    Ok(t) if improved && t.p_value < 0.05 => {
                        f1.display.push_str(stars(t.p_value));
                        f1.significant = true;
                    }
                    Ok(_) => {}
                    Err(e) => footer.push(format!("{}: significance not computed ({e}).", kind.label())),
                }
            }
        }
        if runs.iter().any(|r| r.degenerate) {
            footer.push(format!("{}: at least one fold predicted a single class.", kind.label()));
        }
        rows.push(Row {
            labels: vec![kind.step().to_string(), kind_label(kind, input.source_language, input.target_language)],
            cells: vec![f1, Cell::number(summary.acc_ad, 3), Cell::number(summary.acc_c, 3)],
        });
    }
    let mut table = ReportTable {
        name: input.name.to_string(),
        title: input.title.to_string(),
        label_columns: vec!["Step".into(), "Transformation".into()],
        columns: ["macro-F1", "Accuracy AD", "Accuracy C"].map(String::from).to_vec(),
        rows,
        footer: Vec::new(),
    };
    table.bold_column_maxima(&[0, 1, 2]);
    let mut head = vec![format!("Means over {} runs. Best value per column in bold.", n_runs.unwrap_or(0))];
    if let Some(b) = input.baseline {
        head.push(format!(
            "Paired Wilcoxon signed-rank test on per-run macro-F1 against {}: * p < 0.05, ** p < 0.01 (improvements only).",
            b.label()
        ));
    }
    head.push(CLASSIFIER_NOTE.to_string());
    head.extend(input.notes.iter().cloned());
    head.extend(footer);
    table.footer = head;
    Ok(table)
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Control mean, AD mean and Welch p per measure; the triple is bold when
/// p < 0.05.
pub fn group_measure_table(
    name: &str,
    title: &str,
    measures: &[Measure],
    rows: &[(String, BTreeMap<Measure, Result<GroupComparison, String>>)],
    notes: &[String],
) -> ReportTable {
    let mut columns = Vec::new();
    for m in measures {
        for suffix in ["C", "AD", "p"] {
            columns.push(format!("{} {suffix}", m.label()));
        }
    }
    let mut footer = vec!["Group means per measure with Welch's t-test p-values; differences with p < 0.05 in bold.".to_string()];
    footer.extend(notes.iter().cloned());
    let mut out_rows = Vec::new();
    for (label, comparisons) in rows {
        let mut cells = Vec::new();
        for m in measures {
            match comparisons.get(m) {
                Some(Ok(c)) => {
                    let sig = c.p_value < 0.05;
                    let mut triple = [Cell::number(c.mean_control, 3), Cell::number(c.mean_ad, 3), Cell::number(c.p_value, 3)];
                    triple[2].display = format_p(c.p_value);
                    for cell in &mut triple {
                        cell.significant = sig;
                        cell.bold = sig;
                    }
                    cells.extend(triple);
                    if c.excluded > 0 {
                        let noun = if c.excluded == 1 { "document" } else { "documents" };
                        footer.push(format!("{label}, {}: {} {noun} excluded (measure undefined).", m.label(), c.excluded));
                    }
                }
                Some(Err(reason)) => {
                    cells.extend([Cell::missing(), Cell::missing(), Cell::missing()]);
                    footer.push(format!("{label}, {}: {DASH} not computed ({reason}).", m.label()));
                }
                None => {
                    cells.extend([Cell::missing(), Cell::missing(), Cell::missing()]);
                    footer.push(format!("{label}, {}: {DASH} not computed.", m.label()));
                }
            }
        }
        out_rows.push(Row { labels: vec![label.clone()], cells });
    }
    ReportTable {
        name: name.to_string(),
        title: title.to_string(),
        label_columns: vec!["Transformation".into()],
        columns,
        rows: out_rows,
        footer,
    }
}

/// Pearson correlation between semantic similarity and classification
/// performance across kinds, as a one-row table.
pub fn correlation_table(kinds: &[TransformationKind], cosine: &[f64], macro_f1: &[f64]) -> ReportTable {
    let names: Vec<&str> = kinds.iter().map(|k| k.label()).collect();
    let (cells, extra) = match crate::stattests::pearson(cosine, macro_f1) {
        Ok(r) => {
            let mut p = Cell::number(r.p_value, 3);
            p.display = format_p(r.p_value);
            (vec![Cell::number(r.statistic, 3), Cell::number(r.df.unwrap_or(f64::NAN), 0), p], None)
        }
        Err(e) => (vec![Cell::missing(), Cell::missing(), Cell::missing()], Some(format!("{DASH}: not computed ({e})."))),
    };
    let mut footer = vec![format!("Pearson correlation across {} ({} points).", names.join(", "), kinds.len())];
    footer.extend(extra);
    ReportTable {
        name: "correlation".into(),
        title: "Correlation between cosine similarity and macro-F1".into(),
        label_columns: vec!["Pair".into()],
        columns: vec!["r".into(), "df".into(), "p".into()],
        rows: vec![Row { labels: vec!["Cosine vs macro-F1".into()], cells }],
        footer,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FoldMetrics;
    use crate::stattests::TestMethod;

    fn run(seed: u64, f1: f64) -> ClassificationRun {
        ClassificationRun {
            seed,
            folds: vec![FoldMetrics { fold: 0, n_test: 10, macro_f1: f1, acc_ad: 0.5, acc_c: 0.9, degenerate: false }],
            macro_f1: f1,
            acc_ad: 0.5,
            acc_c: 0.9,
            degenerate: false,
            fold_assignment: None,
        }
    }

    fn score(v: f64) -> SimilarityScore {
        SimilarityScore { bleu: v / 10.0, chrf: v, cosine: v + 0.1 }
    }

    #[test]
    fn similarity_rows_in_step_order() {
        use TransformationKind as K;
        let rows: BTreeMap<_, _> = [(K::ImageDescription, score(0.25)), (K::ShortSummary, score(0.39)), (K::Storyboard, score(0.26))].into();
        let t = similarity_table(&rows, K::Original, &[K::LongSummary], "params");
        let labels: Vec<&str> = t.rows.iter().map(|r| r.labels[1].as_str()).collect();
        assert_eq!(labels, vec!["Short Summary", "Storyboard", "Image Description"]);
        assert_eq!(t.rows[0].cells[0].display, "0.39");
        assert_eq!(t.rows[2].labels[0], "3");
        assert!(t.footer.iter().any(|f| f.contains("Long Summary")));
        assert!(t.is_rectangular());

        let single: BTreeMap<_, _> = [(K::Storyboard, score(0.5))].into();
        assert_eq!(similarity_table(&single, K::Original, &[], "").rows.len(), 1);
    }

    #[test]
    fn csv_keeps_full_precision() {
        use TransformationKind as K;
        let rows: BTreeMap<_, _> = [(K::ShortSummary, SimilarityScore { bleu: 0.123456789012345, chrf: 1.0 / 3.0, cosine: -0.25 })].into();
        let t = similarity_table(&rows, K::Original, &[], "p");
        let mut buf = Vec::new();
        emit(&t, Format::Csv, &mut buf).unwrap();
        let mut r = csv::Reader::from_reader(buf.as_slice());
        let rec = r.records().next().unwrap().unwrap();
        let values: Vec<f64> = rec.iter().skip(2).map(|s| s.parse().unwrap()).collect();
        let expected: Vec<f64> = t.rows[0].cells.iter().map(|c| c.value.unwrap()).collect();
        assert_eq!(values, expected);

        let mut md = Vec::new();
        emit(&t, Format::Markdown, &mut md).unwrap();
        let md = String::from_utf8(md).unwrap();
        assert!(md.contains("| 2 | Short Summary | 0.33 | 0.12 | -0.25 |"));
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let t = group_measure_table("lexical", "Lexical", &[Measure::Ttr], &[("Original".into(), BTreeMap::new())], &[]);
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit(&t, Format::Json, &mut a).unwrap();
        emit(&t, Format::Json, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_json(std::str::from_utf8(&a).unwrap()).unwrap(), t);
    }

    #[test]
    fn stars_and_bold() {
        use TransformationKind as K;
        let base: Vec<_> = (0..10).map(|s| run(s, 0.50 + s as f64 * 0.001)).collect();
        // Improves in every paired run with distinct differences: exact p = 2/1024.
        let better: Vec<_> = (0..10).map(|s| run(s, 0.60 + s as f64 * 0.003)).collect();
        let worse: Vec<_> = (0..10).map(|s| run(s, 0.40)).collect();
        let runs: BTreeMap<_, _> = [(K::Original, base), (K::Storyboard, better), (K::ShortSummary, worse)].into();
        let input = ClassificationInput {
            name: "classification",
            title: "Classification",
            runs: &runs,
            kinds: &[K::Original, K::ShortSummary, K::Storyboard],
            baseline: Some(K::Original),
            source_language: "en",
            target_language: "en",
            notes: &[],
        };
        let t = classification_table(&input).unwrap();
        let f1: Vec<&Cell> = t.rows.iter().map(|r| &r.cells[0]).collect();
        assert_eq!(f1[2].display, "0.613**");
        assert!(f1[2].significant && f1[2].bold);
        // A significant decrease gets no star.
        assert_eq!(f1[1].display, "0.400");
        assert_eq!(t.rows.iter().filter(|r| r.cells[0].bold).count(), 1);
        // Ties in the accuracy columns bold every maximum.
        assert!(t.rows.iter().all(|r| r.cells[1].bold && r.cells[2].bold));
        let mut md = Vec::new();
        emit(&t, Format::Markdown, &mut md).unwrap();
        assert!(String::from_utf8(md).unwrap().contains("| 2 | Storyboard | **0.613**\\*\\* |"));
    }

    #[test]
    fn baseline_only_has_no_stars() {
        use TransformationKind as K;
        let runs: BTreeMap<_, _> = [(K::Original, (0..10).map(|s| run(s, 0.5)).collect::<Vec<_>>())].into();
        let input = ClassificationInput {
            name: "c",
            title: "c",
            runs: &runs,
            kinds: &[K::Original],
            baseline: Some(K::Original),
            source_language: "en",
            target_language: "en",
            notes: &[],
        };
        let t = classification_table(&input).unwrap();
        assert!(!t.rows[0].cells[0].display.contains('*'));
    }

    #[test]
    fn unpaired_runs_are_rejected() {
        use TransformationKind as K;
        let runs: BTreeMap<_, _> = [(K::Original, vec![run(1, 0.5), run(2, 0.5)]), (K::Storyboard, vec![run(1, 0.6), run(3, 0.6)])].into();
        let input = ClassificationInput {
            name: "c",
            title: "c",
            runs: &runs,
            kinds: &[K::Original, K::Storyboard],
            baseline: Some(K::Original),
            source_language: "en",
            target_language: "en",
            notes: &[],
        };
        assert!(matches!(classification_table(&input), Err(ReportError::Unpaired { .. })));
    }

    fn cmp(c: f64, ad: f64, p: f64, excluded: usize) -> Result<GroupComparison, String> {
        Ok(GroupComparison { mean_control: c, mean_ad: ad, p_value: p, test: TestMethod::Welch, excluded })
    }

    #[test]
    fn group_table_bolds_strictly_below_threshold() {
        let rows = vec![
            ("Short Summaries".to_string(), BTreeMap::from([(Measure::Ttr, cmp(0.819, 0.825, 0.589, 0)), (Measure::Lf, cmp(5.759, 5.814, 0.042, 0))])),
            ("Boundary".to_string(), BTreeMap::from([(Measure::Ttr, cmp(0.5, 0.6, 0.05, 0)), (Measure::Lf, Err("too few".to_string()))])),
        ];
        let t = group_measure_table("lexical", "Lexical measures", &[Measure::Ttr, Measure::Lf], &rows, &[]);
        let r0 = &t.rows[0].cells;
        assert!(!r0[0].bold && r0[3].bold && r0[4].bold && r0[5].bold);
        assert_eq!((r0[3].display.as_str(), r0[4].display.as_str(), r0[5].display.as_str()), ("5.759", "5.814", "0.042"));
        let r1 = &t.rows[1].cells;
        assert!(!r1[2].bold);
        assert_eq!(r1[3].display, DASH);
        assert!(t.footer.iter().any(|f| f.contains("Boundary, lf") && f.contains("too few")));

        let pnr = vec![("Original".to_string(), BTreeMap::from([(Measure::Pnr, cmp(0.6, 1.1, 0.0005, 3))]))];
        let t = group_measure_table("pos", "POS", &[Measure::Pnr], &pnr, &[]);
        assert_eq!(t.rows[0].cells[2].display, "<0.001");
        assert!(t.footer.iter().any(|f| f.contains("3 documents excluded")));
        let mut md = Vec::new();
        emit(&t, Format::Markdown, &mut md).unwrap();
        assert!(String::from_utf8(md).unwrap().contains("| **0.600** | **1.100** | **<0.001** |"));
    }

    #[test]
    fn correlation_row() {
        use TransformationKind as K;
        let kinds = [K::ShortSummary, K::MediumSummary, K::LongSummary, K::Storyboard, K::ImageDescription];
        let t = correlation_table(&kinds, &[0.69, 0.74, 0.76, 0.68, 0.39], &[0.499, 0.547, 0.647, 0.662, 0.523]);
        assert_eq!(t.rows[0].cells[0].display, "0.415");
        assert_eq!(t.rows[0].cells[2].display, "0.488");
    }

    #[test]
    fn language_labels() {
        assert_eq!(kind_label(TransformationKind::Original, "pt", "en"), "Original (pt)");
        assert_eq!(kind_label(TransformationKind::Translated, "pt", "en"), "Translated (en)");
        assert_eq!(kind_label(TransformationKind::Original, "en", "en"), "Original");
    }
}
