use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TransformationKind;

pub const SHORT_SUMMARY_PROMPT: &str =
    "Summarise the following text into a one sentence summary. Just output the summary and no other information.";
pub const MEDIUM_SUMMARY_PROMPT: &str =
    "Summarise the following text into a concise summary. Just output the summary and no other information.";
pub const LONG_SUMMARY_PROMPT: &str = "Summarise the following text into a long summary containing as much information as possible. Just output the summary and no other information.";
pub const STORYBOARD_PROMPT: &str = "Transform any text you are given into key story scenes. Focus on the most important story moments. Break down complex actions into separate scenes if needed. Just output the storyboard and no other information.";
pub const IMAGE_CAPTION_PROMPT: &str = "Describe in detail what is happening in the image.";

/// System prompts for the generated kinds. Defaults are the reference prompts;
/// any of them can be overridden from configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    prompts: BTreeMap<TransformationKind, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        use TransformationKind as K;
        let prompts = [
            (K::ShortSummary, SHORT_SUMMARY_PROMPT),
            (K::MediumSummary, MEDIUM_SUMMARY_PROMPT),
            (K::LongSummary, LONG_SUMMARY_PROMPT),
            (K::Storyboard, STORYBOARD_PROMPT),
            (K::ImageDescription, IMAGE_CAPTION_PROMPT),
        ]
        .into_iter()
        .map(|(k, p)| (k, p.to_string()))
        .collect();
        PromptSet { prompts }
    }
}

impl PromptSet {
    /// Prompt for a generated kind.
    ///
    /// # Panics
    /// If `kind` is not one of [`TransformationKind::GENERATED`].
    pub fn get(&self, kind: TransformationKind) -> &str {
        self.prompts
            .get(&kind)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("{kind} has no prompt"))
    }

    pub fn set(&mut self, kind: TransformationKind, prompt: impl Into<String>) -> Result<(), String> {
        if !TransformationKind::GENERATED.contains(&kind) {
            return Err(format!("{kind} does not take a prompt"));
        }
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(format!("empty prompt for {kind}"));
        }
        self.prompts.insert(kind, prompt);
        Ok(())
    }

    /// Kinds whose prompt differs from the default.
    pub fn overridden(&self) -> Vec<TransformationKind> {
        let defaults = PromptSet::default();
        self.prompts
            .iter()
            .filter(|(k, p)| defaults.prompts.get(k) != Some(p))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TransformationKind, &str)> {
        self.prompts.iter().map(|(k, p)| (*k, p.as_str()))
    }
}
