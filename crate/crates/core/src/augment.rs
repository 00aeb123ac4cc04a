//! Caption rewriting strategies: prefix, suffix, label replacement and the
//! compound of all three.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::ChoiceSource;
use crate::coco::{supercategory_peers, CaptionAnnotation, Category};
use crate::embedding::EmbeddingProvider;
use crate::matcher::{match_label_word, DEFAULT_MIN_SCORE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Prefix,
    Suffix,
    Replacement,
    Compound,
}

impl StrategyKind {
    /// Order matching [`AugmentationConfig::strategy_weights`].
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Prefix,
        StrategyKind::Suffix,
        StrategyKind::Replacement,
        StrategyKind::Compound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Prefix => "prefix",
            StrategyKind::Suffix => "suffix",
            StrategyKind::Replacement => "replacement",
            StrategyKind::Compound => "compound",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("prefix list is empty")]
    NoPrefixes,
    #[error("suffix list is empty")]
    NoSuffixes,
    #[error("prefixes and suffixes must not be blank")]
    BlankAffix,
    #[error("strategy weights must be finite, nonnegative and not all zero")]
    BadWeights,
    #[error("replacement_prob must lie in (0, 1], got {0}")]
    BadReplacementProb(f64),
    #[error("min_score must lie in [-1, 1], got {0}")]
    BadMinScore(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    /// Weights for prefix, suffix, replacement, compound.
    pub strategy_weights: [f64; 4],
    pub replacement_prob: f64,
    pub min_score: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            prefixes: [
                "A cartoon of",
                "A grainy image of",
                "A black and white image of",
            ]
            .map(String::from)
            .to_vec(),
            suffixes: [
                "on a rainy day",
                "on a foggy night",
                "in the mountains",
                "near the sea",
            ]
            .map(String::from)
            .to_vec(),
            strategy_weights: [0.25; 4],
            replacement_prob: 0.5,
            min_score: DEFAULT_MIN_SCORE,
        }
    }
}

impl AugmentationConfig {
    /// Checks the config and rescales the strategy weights to sum to 1.
    pub fn validated(mut self) -> Result<Self, ConfigError> {
        if self.prefixes.is_empty() {
            return Err(ConfigError::NoPrefixes);
        }
        if self.suffixes.is_empty() {
            return Err(ConfigError::NoSuffixes);
        }
        if self
            .prefixes
            .iter()
            .chain(&self.suffixes)
            .any(|s| s.trim().is_empty())
        {
            return Err(ConfigError::BlankAffix);
        }
        let total: f64 = self.strategy_weights.iter().sum();
        if self
            .strategy_weights
            .iter()
            .any(|w| !w.is_finite() || *w < 0.0)
            || total <= 0.0
        {
            return Err(ConfigError::BadWeights);
        }
        self.strategy_weights.iter_mut().for_each(|w| *w /= total);
        if !(self.replacement_prob > 0.0 && self.replacement_prob <= 1.0) {
            return Err(ConfigError::BadReplacementProb(self.replacement_prob));
        }
        if !(-1.0..=1.0).contains(&self.min_score) {
            return Err(ConfigError::BadMinScore(self.min_score));
        }
        Ok(self)
    }
}

/// One label swap. `span` is the half-open character range of the replaced
/// token in the text the replacement step received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub old_category_id: u64,
    pub new_category_id: u64,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedCaption {
    pub source_caption_id: u64,
    pub text: String,
    pub strategy: StrategyKind,
    pub replacements: Vec<Replacement>,
    pub labels_after: BTreeSet<u64>,
    pub choice_trace: Vec<u64>,
}

/// Text and label bookkeeping produced by the replacement step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementOutcome {
    pub text: String,
    pub replacements: Vec<Replacement>,
    pub labels_after: BTreeSet<u64>,
}

/// `prefix + " " + caption`, with the caption's first alphabetic character
/// lowercased.
pub fn apply_prefix(caption: &str, prefix: &str) -> String {
    if caption.is_empty() {
        return prefix.to_string();
    }
    let mut out = String::with_capacity(prefix.len() + caption.len() + 1);
    out.push_str(prefix);
    out.push(' ');
    let mut lowered = false;
    for ch in caption.chars() {
        if !lowered && ch.is_alphabetic() {
            out.extend(ch.to_lowercase());
            lowered = true;
        } else {
            out.push(ch);
        }
    }
    out
}

/// Caption without trailing periods/whitespace, then `" " + suffix`.
pub fn apply_suffix(caption: &str, suffix: &str) -> String {
    let trimmed = caption.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    if trimmed.is_empty() {
        return suffix.to_string();
    }
    format!("{trimmed} {suffix}")
}

/// Swaps a random subset of the image's labels for supercategory peers.
///
/// Each label is selected with probability `cfg.replacement_prob`; when the
/// round selects nothing the lowest-id label is selected instead. A selected
/// label is swapped only if a caption token matches it and it has at least
/// one peer; the matched token is replaced by the peer's name. Labels whose
/// anchor token was already claimed by an earlier label are skipped.
pub fn apply_replacement<P: EmbeddingProvider + ?Sized>(
    caption: &str,
    labels: &[Category],
    taxonomy: &[Category],
    provider: &P,
    cfg: &AugmentationConfig,
    choices: &mut ChoiceSource,
) -> ReplacementOutcome {
    let mut labels: Vec<&Category> = labels.iter().collect();
    labels.sort_by_key(|c| c.id);
    labels.dedup_by_key(|c| c.id);
    let mut labels_after: BTreeSet<u64> = labels.iter().map(|c| c.id).collect();

    let mut selected: Vec<bool> = labels
        .iter()
        .map(|_| choices.bernoulli(cfg.replacement_prob))
        .collect();
    if !selected.iter().any(|s| *s) {
        if let Some(first) = selected.first_mut() {
            *first = true;
        }
    }

    struct Swap<'a> {
        start: usize,
        end: usize,
        old: u64,
        peer: &'a str,
        new: u64,
    }
    let mut peers_store = Vec::new();
    for (label, chosen) in labels.iter().zip(&selected) {
        if !*chosen {
            continue;
        }
        let Ok(peers) = supercategory_peers(taxonomy, label.id) else {
            continue;
        };
        if peers.is_empty() {
            continue;
        }
        let Ok(Some(anchor)) = match_label_word(caption, &label.name, provider, cfg.min_score)
        else {
            continue;
        };
        peers_store.push((label.id, anchor.token, peers));
    }

    let mut swaps: Vec<Swap<'_>> = Vec::new();
    for (old, token, peers) in &peers_store {
        if swaps.iter().any(|s| s.start == token.start) {
            continue;
        }
        let peer = &peers[choices.index(peers.len())];
        swaps.push(Swap {
            start: token.start,
            end: token.end,
            old: *old,
            peer: &peer.name,
            new: peer.id,
        });
    }

    let mut text = caption.to_string();
    let mut by_position: Vec<&Swap<'_>> = swaps.iter().collect();
    by_position.sort_by_key(|s| std::cmp::Reverse(s.start));
    for swap in by_position {
        let (from, to) = byte_range(&text, swap.start, swap.end);
        text.replace_range(from..to, swap.peer);
    }

    let mut replacements = Vec::with_capacity(swaps.len());
    for swap in &swaps {
        labels_after.remove(&swap.old);
        replacements.push(Replacement {
            old_category_id: swap.old,
            new_category_id: swap.new,
            span: (swap.start, swap.end),
        });
    }
    labels_after.extend(swaps.iter().map(|s| s.new));

    ReplacementOutcome {
        text,
        replacements,
        labels_after,
    }
}

/// Byte range of the half-open character range `start..end` in `s`.
fn byte_range(s: &str, start: usize, end: usize) -> (usize, usize) {
    let mut offsets = s
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(s.len()));
    let from = offsets.nth(start).unwrap_or(s.len());
    let to = if end == start {
        from
    } else {
        offsets.nth(end - start - 1).unwrap_or(s.len())
    };
    (from, to)
}

/// Prefix, then suffix, then replacement. Prefix and suffix are drawn from
/// the config lists in that order before the replacement draws.
pub fn apply_compound<P: EmbeddingProvider + ?Sized>(
    caption: &str,
    labels: &[Category],
    taxonomy: &[Category],
    provider: &P,
    cfg: &AugmentationConfig,
    choices: &mut ChoiceSource,
) -> ReplacementOutcome {
    let prefix = &cfg.prefixes[choices.index(cfg.prefixes.len())];
    let suffix = &cfg.suffixes[choices.index(cfg.suffixes.len())];
    let framed = apply_suffix(&apply_prefix(caption, prefix), suffix);
    apply_replacement(&framed, labels, taxonomy, provider, cfg, choices)
}

/// Draws a strategy from the configured weights and applies it.
pub fn augment_caption<P: EmbeddingProvider + ?Sized>(
    caption: &CaptionAnnotation,
    labels: &[Category],
    taxonomy: &[Category],
    provider: &P,
    cfg: &AugmentationConfig,
    choices: &mut ChoiceSource,
) -> AugmentedCaption {
    let trace_start = choices.trace().len();
    let strategy = StrategyKind::ALL[choices.weighted(&cfg.strategy_weights)];
    let source_labels = || labels.iter().map(|c| c.id).collect::<BTreeSet<u64>>();

    let (text, replacements, labels_after) = match strategy {
        StrategyKind::Prefix => {
            let prefix = &cfg.prefixes[choices.index(cfg.prefixes.len())];
            (
                apply_prefix(&caption.caption, prefix),
                Vec::new(),
                source_labels(),
            )
        }
        StrategyKind::Suffix => {
            let suffix = &cfg.suffixes[choices.index(cfg.suffixes.len())];
            (
                apply_suffix(&caption.caption, suffix),
                Vec::new(),
                source_labels(),
            )
        }
        StrategyKind::Replacement | StrategyKind::Compound => {
            let outcome = if strategy == StrategyKind::Replacement {
                apply_replacement(&caption.caption, labels, taxonomy, provider, cfg, choices)
            } else {
                apply_compound(&caption.caption, labels, taxonomy, provider, cfg, choices)
            };
            (outcome.text, outcome.replacements, outcome.labels_after)
        }
    };

    AugmentedCaption {
        source_caption_id: caption.id,
        text,
        strategy,
        replacements,
        labels_after,
        choice_trace: choices.trace()[trace_start..].to_vec(),
    }
}
