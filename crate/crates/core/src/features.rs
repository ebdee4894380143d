//! Feature extraction for tagging: contextual templates over the surrounding
//! tags and target word, lexical templates over capitalization and fixed
//! suffixes, plus the training lexicon and baseline-tag heuristics.
//!
//! Feature names are template-prefixed (`t-1=NN`, `cap`, `suf2=ng`, ...), so
//! distinct (template, value) pairs always map to distinct names.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{Sentence, TaggedCorpus};
use crate::error::{Result, SmError};

/// Pseudo-tag for context positions before the sentence start.
pub const BOS_TAG: &str = "<S>";
/// Pseudo-tag for context positions past the sentence end.
pub const EOS_TAG: &str = "</S>";

/// Default tag guessed for capitalized unknown words.
pub const CAP_BASELINE: &str = "NNP";
/// Default tag guessed for uncapitalized unknown words.
pub const LOWER_BASELINE: &str = "NN";

#[derive(Debug, Clone, Default)]
struct WordStats {
    tag_counts: BTreeMap<String, u64>,
}

impl WordStats {
    fn most_frequent(&self) -> &str {
        // BTreeMap iterates in tag-name order; strict > keeps the
        // lexicographically smallest tag among ties.
        let mut best: Option<(&str, u64)> = None;
        for (tag, &count) in &self.tag_counts {
            if best.map_or(true, |(_, c)| count > c) {
                best = Some((tag, count));
            }
        }
        best.expect("word stats never empty").0
    }
}

/// Word -> observed-tag map built from a training corpus, with the
/// most-frequent tag per word and global tag frequencies.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashMap<String, WordStats>,
    tag_freq: BTreeMap<String, u64>,
    token_total: u64,
}

impl Lexicon {
    /// Builds the lexicon from a tagged corpus. Every token must carry a tag.
    pub fn build(corpus: &TaggedCorpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(SmError::EmptyCorpus);
        }
        let mut lex = Lexicon::default();
        for token in corpus.tokens() {
            let tag = token.tag.as_deref().ok_or_else(|| {
                SmError::InvalidInput(format!("untagged token {:?} in training corpus", token.surface))
            })?;
            lex.observe(&token.surface, tag);
        }
        Ok(lex)
    }

    pub fn observe(&mut self, word: &str, tag: &str) {
        *self
            .words
            .entry(word.to_string())
            .or_default()
            .tag_counts
            .entry(tag.to_string())
            .or_insert(0) += 1;
        *self.tag_freq.entry(tag.to_string()).or_insert(0) += 1;
        self.token_total += 1;
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    /// Tags observed with `word` in training, in tag-name order.
    pub fn tags(&self, word: &str) -> Option<impl Iterator<Item = &str>> {
        self.words.get(word).map(|s| s.tag_counts.keys().map(|t| t.as_str()))
    }

    pub fn tag_count(&self, word: &str, tag: &str) -> u64 {
        self.words
            .get(word)
            .and_then(|s| s.tag_counts.get(tag).copied())
            .unwrap_or(0)
    }

    /// Most frequently observed tag for a known word; ties break by tag name.
    pub fn most_frequent(&self, word: &str) -> Option<&str> {
        self.words.get(word).map(|s| s.most_frequent())
    }

    pub fn tag_frequency(&self, tag: &str) -> u64 {
        self.tag_freq.get(tag).copied().unwrap_or(0)
    }

    pub fn tag_frequencies(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tag_freq.iter().map(|(t, &c)| (t.as_str(), c))
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn token_total(&self) -> u64 {
        self.token_total
    }

    /// All (word, tag, count) entries, sorted by word then tag; used by the
    /// model serializer.
    pub fn entries_sorted(&self) -> Vec<(&str, &BTreeMap<String, u64>)> {
        let mut out: Vec<(&str, &BTreeMap<String, u64>)> =
            self.words.iter().map(|(w, s)| (w.as_str(), &s.tag_counts)).collect();
        out.sort_unstable_by_key(|(w, _)| *w);
        out
    }
}

/// Builds the word -> observed-tag lexicon from a training corpus.
pub fn build_lexicon(corpus: &TaggedCorpus) -> Result<Lexicon> {
    Lexicon::build(corpus)
}

/// True when the first character is uppercase. Sentence-initial position is
/// not special-cased.
pub fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Numeric tokens: ASCII digits with optional interior `.`, `,` or `-`.
pub fn is_numeric(word: &str) -> bool {
    let bytes = word.as_bytes();
    if bytes.is_empty() {
        return false;
    }
    if !bytes[0].is_ascii_digit() || !bytes[bytes.len() - 1].is_ascii_digit() {
        return false;
    }
    bytes.iter().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b',' | b'-'))
}

/// A word is unknown when it is absent from the training lexicon and is not
/// a numeric token.
pub fn is_unknown(word: &str, lex: &Lexicon) -> bool {
    !lex.contains(word) && !is_numeric(word)
}

/// Heuristic tag for a word: the most frequent observed tag for known words,
/// otherwise `NNP` for capitalized and `NN` for uncapitalized words.
pub fn baseline_tag<'a>(word: &str, lex: &'a Lexicon) -> &'a str {
    match lex.most_frequent(word) {
        Some(tag) => tag,
        None if is_capitalized(word) => CAP_BASELINE,
        None => LOWER_BASELINE,
    }
}

/// Active feature names for one token, split by family.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureBundle {
    pub contextual: Vec<String>,
    pub lexical: Vec<String>,
}

impl FeatureBundle {
    pub fn all(&self) -> impl Iterator<Item = &str> {
        self.contextual.iter().chain(self.lexical.iter()).map(|s| s.as_str())
    }
}

/// Name prefix classifying a feature into the stage subspaces.
pub fn is_cap_feature(name: &str) -> bool {
    name == "cap"
}

pub fn is_suffix_feature(name: &str) -> bool {
    name.starts_with("suf1=") || name.starts_with("suf2=") || name.starts_with("suf3=")
}

pub fn is_lexical_feature(name: &str) -> bool {
    is_cap_feature(name) || is_suffix_feature(name)
}

pub fn is_contextual_feature(name: &str) -> bool {
    !is_lexical_feature(name)
}

/// Contextual features of token `i`: the four neighbor tags, their three
/// conjunctions, optionally the baseline tag, and the target word identity.
/// Left context reads already-assigned tags (`left_tags[0..i]`); right
/// context uses baseline tags of the right neighbors; positions outside the
/// sentence yield boundary pseudo-tags.
pub fn extract_contextual(
    sentence: &Sentence,
    i: usize,
    left_tags: &[String],
    lex: &Lexicon,
    include_baseline: bool,
) -> Result<Vec<String>> {
    let n = sentence.len();
    if i >= n {
        return Err(SmError::InvalidInput(format!("token index {i} out of range (len {n})")));
    }
    if left_tags.len() < i {
        return Err(SmError::InvalidInput(format!(
            "need {i} assigned left tags, got {}",
            left_tags.len()
        )));
    }
    let left = |k: usize| -> &str {
        // Tag of token i-k, or the boundary pseudo-tag.
        if i >= k {
            &left_tags[i - k]
        } else {
            BOS_TAG
        }
    };
    let right = |k: usize| -> &str {
        if i + k < n {
            baseline_tag(&sentence.tokens[i + k].surface, lex)
        } else {
            EOS_TAG
        }
    };
    let tm1 = left(1);
    let tm2 = left(2);
    let tp1 = right(1);
    let tp2 = right(2);

    let mut out = vec![
        format!("t-1={tm1}"),
        format!("t+1={tp1}"),
        format!("t-2={tm2}"),
        format!("t+2={tp2}"),
        format!("t-1&t+1={tm1}&{tp1}"),
        format!("t-2&t-1={tm2}&{tm1}"),
        format!("t+1&t+2={tp1}&{tp2}"),
    ];
    if include_baseline {
        out.push(format!("base={}", baseline_tag(&sentence.tokens[i].surface, lex)));
    }
    out.push(format!("w={}", sentence.tokens[i].surface));
    Ok(out)
}

/// Lexical features of a word: capitalization, and 1/2/3-character suffixes
/// guarded by minimum word lengths 4/5/6. Suffixes are lowercased.
pub fn extract_lexical(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    if is_capitalized(word) {
        out.push("cap".to_string());
    }
    let chars: Vec<char> = word.chars().collect();
    let len = chars.len();
    for k in 1..=3usize {
        if len > k + 2 {
            let suffix: String =
                chars[len - k..].iter().flat_map(|c| c.to_lowercase()).collect();
            out.push(format!("suf{k}={suffix}"));
        }
    }
    out
}

/// Both feature families for token `i` of a sentence.
pub fn extract_bundle(
    sentence: &Sentence,
    i: usize,
    left_tags: &[String],
    lex: &Lexicon,
    include_baseline: bool,
) -> Result<FeatureBundle> {
    Ok(FeatureBundle {
        contextual: extract_contextual(sentence, i, left_tags, lex, include_baseline)?,
        lexical: extract_lexical(&sentence.tokens[i].surface),
    })
}
