//! Stage ordering, configuration checks and output selection through the CLI.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::Value;

use formshift::providers::{DisabledTransport, Provider, ProviderConfig, ProviderKind, ResponseCache};
use formshift::transform::{image_roundtrip, split_scenes, ImageMode, PromptSet, TransformationKind};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = formshift::cli::run_with_args(std::iter::once("formshift").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Copy a fixture dataset and config into a fresh directory.
fn setup(dataset: &str, conf: &str, extra: &str) -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(Path::new(FIXTURES).join(dataset), dir.path().join(dataset)).unwrap();
    let mut text = fs::read_to_string(Path::new(FIXTURES).join(conf)).unwrap();
    text.push_str(extra);
    fs::write(dir.path().join(conf), text).unwrap();
    let conf = dir.path().join(conf).to_string_lossy().into_owned();
    let run = dir.path().to_string_lossy().into_owned();
    (dir, conf, run)
}

#[test]
fn stages_name_their_missing_prerequisite() {
    let (_dir, conf, run) = setup("english_splits.jsonl", "english.conf", "");
    let (code, _, err) = cli(&["transform", "--run-dir", &run]);
    assert_eq!(code, 2);
    assert!(err.contains("run `ingest` first"), "{err}");
    assert_eq!(cli(&["ingest", "--config", &conf, "--run-dir", &run]).0, 0);
    for stage in ["similarity", "lexical", "classify"] {
        let (code, _, err) = cli(&[stage, "--run-dir", &run]);
        assert_eq!(code, 2, "{stage}");
        assert!(err.contains("run `transform` first"), "{stage}: {err}");
    }
    let (code, _, err) = cli(&["stats", "--run-dir", &run]);
    assert_eq!(code, 2);
    assert!(err.contains("run `classify` first"), "{err}");
}

#[test]
fn changed_config_is_rejected_by_later_stages() {
    let (dir, conf, run) = setup("english_splits.jsonl", "english.conf", "");
    assert_eq!(cli(&["ingest", "--config", &conf, "--run-dir", &run]).0, 0);
    assert_eq!(cli(&["transform", "--config", &conf, "--run-dir", &run]).0, 0);
    let edited = dir.path().join("edited.conf");
    let text = fs::read_to_string(&conf).unwrap().replace("master_seed = 7", "master_seed = 8");
    fs::write(&edited, text).unwrap();
    let (code, _, err) = cli(&["similarity", "--config", edited.to_str().unwrap(), "--run-dir", &run]);
    assert_eq!(code, 1, "{err}");
    // Without --config the recorded configuration is used.
    assert_eq!(cli(&["similarity", "--run-dir", &run]).0, 0);
}

#[test]
fn malformed_config_reports_the_line() {
    let (_dir, conf, run) = setup("english_splits.jsonl", "english.conf", "no_such_key = 1\n");
    let (code, _, err) = cli(&["ingest", "--config", &conf, "--run-dir", &run]);
    assert_eq!(code, 1);
    assert!(err.contains("no_such_key") && err.contains("line"), "{err}");
}

#[test]
fn english_run_skips_translation_and_honours_format() {
    let (dir, conf, run) = setup("english_splits.jsonl", "english.conf", "");
    let (code, out, err) = cli(&["run", "--offline", "--format", "md", "--config", &conf, "--run-dir", &run]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("provider calls"), "{out}");
    let corpora = dir.path().join("corpora");
    for kind in TransformationKind::ALL {
        let exists = corpora.join(format!("{}.jsonl", kind.slug())).exists();
        let translation = matches!(kind, TransformationKind::Translated | TransformationKind::BackTranslated);
        assert_eq!(exists, !translation, "{kind}");
    }
    let reports: Vec<String> = fs::read_dir(dir.path().join("reports"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(!reports.is_empty());
    // --format selects table formats; pairwise matrices are always CSV.
    let (tables, matrices): (Vec<_>, Vec<_>) = reports.iter().partition(|n| n.starts_with("table_"));
    assert!(tables.iter().all(|n| n.ends_with(".md")), "{tables:?}");
    assert_eq!(matrices.len(), 3, "{matrices:?}");
    assert!(matrices.iter().all(|n| n.starts_with("matrix_") && n.ends_with(".csv")), "{matrices:?}");
    assert!(!reports.iter().any(|n| n.contains("back_translation")), "{reports:?}");
    // Every transcript has a split, so evaluation uses it instead of folds.
    let cls: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("classification/runs.json")).unwrap()).unwrap();
    assert_eq!(cls["evaluation"], "fixed_split");
}

#[test]
fn numbered_storyboard_scene_round_trip() {
    let s1 = fs::read_to_string(Path::new(FIXTURES).join("storyboard_s1.txt")).unwrap();
    let scenes = split_scenes(&s1);
    assert_eq!(scenes, vec![s1.trim().to_string()]);
    let two = format!("{}\n2. **The Chase:** The puppy runs off and the boy follows.", s1.trim());
    assert_eq!(split_scenes(&two).len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::new(dir.path()));
    let provider = |kind| Provider::new(ProviderConfig::mock(kind), cache.clone(), Arc::new(DisabledTransport)).unwrap();
    let (t2i, i2t) = (provider(ProviderKind::TextToImage), provider(ProviderKind::ImageToText));
    let prompt = PromptSet::default().get(TransformationKind::ImageDescription).to_string();
    for (mode, images) in [(ImageMode::PerStoryboard, 1), (ImageMode::PerScene, 1)] {
        let (caption, keys) = image_roundtrip(&s1, &t2i, &i2t, &prompt, mode).unwrap();
        assert!(!caption.trim().is_empty());
        assert_eq!(keys.len(), 2 * images);
    }
    let (caption, keys) = image_roundtrip(&two, &t2i, &i2t, &prompt, ImageMode::PerScene).unwrap();
    assert_eq!(keys.len(), 4);
    assert_eq!(caption.split("\n\n").count(), 2);
}
