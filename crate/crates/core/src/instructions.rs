//! Instruction prompts for pair and seed-sentence generation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const PHRASE_SLOT: &str = "{phrase}";
pub const SENTENCE_SLOT: &str = "{x1}";

pub const DEFAULT_TEMPLATE: &str =
    "Task: Write two sentences that {phrase}.\nSentence 1: \"{x1}\"\nSentence 2: \"";

/// Graded similarity of a text pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SimilarityLabel {
    /// 0: completely different topics.
    Different,
    /// 0.5: somewhat similar.
    Similar,
    /// 1: same meaning.
    Same,
}

impl SimilarityLabel {
    pub const ALL: [SimilarityLabel; 3] = [
        SimilarityLabel::Different,
        SimilarityLabel::Similar,
        SimilarityLabel::Same,
    ];

    pub fn value(self) -> f64 {
        match self {
            SimilarityLabel::Different => 0.0,
            SimilarityLabel::Similar => 0.5,
            SimilarityLabel::Same => 1.0,
        }
    }

    pub fn from_value(value: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.value() == value)
    }

    pub fn default_phrase(self) -> &'static str {
        match self {
            SimilarityLabel::Different => "are on completely different topics",
            SimilarityLabel::Similar => "are somewhat similar",
            SimilarityLabel::Same => "mean the same thing",
        }
    }
}

impl fmt::Display for SimilarityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl core::str::FromStr for SimilarityLabel {
    type Err = InstructionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<f64>()
            .ok()
            .and_then(SimilarityLabel::from_value)
            .ok_or_else(|| InstructionError::InvalidLabel(s.to_string()))
    }
}

impl Serialize for SimilarityLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for SimilarityLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        SimilarityLabel::from_value(value)
            .ok_or_else(|| serde::de::Error::custom("similarity label must be 0, 0.5 or 1"))
    }
}

/// Labels strictly above `label`.
pub fn counterlabels(label: SimilarityLabel) -> Vec<SimilarityLabel> {
    SimilarityLabel::ALL
        .into_iter()
        .filter(|&other| other > label)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstructionError {
    #[error("sentence must not be empty")]
    EmptySentence,
    #[error("sentence contains a double quote: {0:?}")]
    QuoteInSentence(String),
    #[error("no instruction phrase configured for label {0}")]
    MissingLabel(SimilarityLabel),
    #[error("invalid similarity label {0:?}")]
    InvalidLabel(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(&'static str),
    #[error("invalid phrase for label {0}: phrases must be non-empty and quote-free")]
    InvalidPhrase(SimilarityLabel),
    #[error("instruction set has no labels")]
    NoLabels,
}

/// Key-value form of an instruction set as found in configuration files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionConfig {
    #[serde(default)]
    pub template: Option<String>,
    /// Label value (`"0"`, `"0.5"`, `"1"`) to phrase.
    #[serde(default)]
    pub phrases: BTreeMap<String, String>,
}

/// Phrase per label plus the template they are substituted into.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionSet {
    template: String,
    phrases: BTreeMap<SimilarityLabel, String>,
}

impl Default for InstructionSet {
    fn default() -> Self {
        InstructionSet {
            template: DEFAULT_TEMPLATE.to_string(),
            phrases: SimilarityLabel::ALL
                .into_iter()
                .map(|l| (l, l.default_phrase().to_string()))
                .collect(),
        }
    }
}

impl InstructionSet {
    /// A custom set. The template needs one `{phrase}` followed by one `{x1}`;
    /// the text before `{x1}` and the whole template must both end in `"`.
    pub fn new(
        template: impl Into<String>,
        phrases: BTreeMap<SimilarityLabel, String>,
    ) -> Result<Self, InstructionError> {
        let template = template.into();
        validate_template(&template)?;
        if phrases.is_empty() {
            return Err(InstructionError::NoLabels);
        }
        for (&label, phrase) in &phrases {
            if phrase.trim().is_empty() || phrase.contains('"') {
                return Err(InstructionError::InvalidPhrase(label));
            }
        }
        Ok(InstructionSet { template, phrases })
    }

    /// Applies a config document on top of the defaults. Listing any phrase
    /// restricts the label set to the listed labels.
    pub fn from_config(config: &InstructionConfig) -> Result<Self, InstructionError> {
        let defaults = InstructionSet::default();
        let template = config.template.clone().unwrap_or(defaults.template);
        let phrases = if config.phrases.is_empty() {
            defaults.phrases
        } else {
            config
                .phrases
                .iter()
                .map(|(k, v)| Ok((k.parse::<SimilarityLabel>()?, v.clone())))
                .collect::<Result<_, InstructionError>>()?
        };
        InstructionSet::new(template, phrases)
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Configured labels in ascending order.
    pub fn labels(&self) -> Vec<SimilarityLabel> {
        self.phrases.keys().copied().collect()
    }

    pub fn phrase(&self, label: SimilarityLabel) -> Result<&str, InstructionError> {
        self.phrases
            .get(&label)
            .map(String::as_str)
            .ok_or(InstructionError::MissingLabel(label))
    }

    /// Configured labels strictly above `label`.
    pub fn counterlabels(&self, label: SimilarityLabel) -> Vec<SimilarityLabel> {
        counterlabels(label)
            .into_iter()
            .filter(|l| self.phrases.contains_key(l))
            .collect()
    }

    /// The prompt asking for a second sentence related to `x1` at `label`.
    /// It ends with the opening quote of the second sentence.
    pub fn render_pair_instruction(
        &self,
        label: SimilarityLabel,
        x1: &str,
    ) -> Result<String, InstructionError> {
        check_sentence(x1)?;
        let phrase = self.phrase(label)?;
        Ok(self
            .template
            .replacen(PHRASE_SLOT, phrase, 1)
            .replacen(SENTENCE_SLOT, x1, 1))
    }

    /// The template cut right after the quote that opens the first sentence.
    pub fn render_seed_instruction(
        &self,
        label: SimilarityLabel,
    ) -> Result<String, InstructionError> {
        let phrase = self.phrase(label)?;
        let head = &self.template[..self.template.find(SENTENCE_SLOT).unwrap()];
        Ok(head.replacen(PHRASE_SLOT, phrase, 1))
    }
}

/// Whether `x1` can be embedded in a template.
pub fn check_sentence(x1: &str) -> Result<(), InstructionError> {
    if x1.trim().is_empty() {
        return Err(InstructionError::EmptySentence);
    }
    if x1.contains('"') {
        return Err(InstructionError::QuoteInSentence(x1.to_string()));
    }
    Ok(())
}

fn validate_template(template: &str) -> Result<(), InstructionError> {
    let invalid = InstructionError::InvalidTemplate;
    if template.matches(PHRASE_SLOT).count() != 1 {
        return Err(invalid("expected exactly one {phrase} placeholder"));
    }
    if template.matches(SENTENCE_SLOT).count() != 1 {
        return Err(invalid("expected exactly one {x1} placeholder"));
    }
    let sentence_at = template.find(SENTENCE_SLOT).unwrap();
    if template.find(PHRASE_SLOT).unwrap() > sentence_at {
        return Err(invalid("{phrase} must come before {x1}"));
    }
    if !template[..sentence_at].ends_with('"') {
        return Err(invalid(
            "{x1} must directly follow an opening quotation mark",
        ));
    }
    if !template.ends_with('"') {
        return Err(invalid("template must end with an opening quotation mark"));
    }
    Ok(())
}
