//! The tagging instantiation of the sequential pipeline: count-based
//! capitalization and suffix filters feed a Winnow network, with the lexicon
//! restricting known-word candidates and the pipeline handling unknown words.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::alphabet::{FeatureId, LabelAlphabet, LabelId, SparseExample};
use crate::corpus::{Sentence, TaggedCorpus};
use crate::distribution::ConfusionSet;
use crate::error::{Result, SmError};
use crate::features::{
    extract_bundle, is_cap_feature, is_contextual_feature, is_numeric, is_suffix_feature,
    FeatureBundle, Lexicon,
};
use crate::learners::{
    train_epochs, CountClassifier, FeatureInterner, SnowNetwork, TrainExample, TrainingReport,
    WinnowParams,
};
use crate::model::{
    stage_filter, CombineMode, FeatureView, PredictionTrace, SequentialModel, Stage,
    ViewRegistry, FULL_VIEW,
};

/// Padding label appended when a corpus induces fewer than two tags; it is
/// never trained and sorts after every real tag, so it never wins an argmax.
pub const PAD_TAG: &str = "<pad>";

/// View names the tagger registers for its stages.
pub const CAP_VIEW: &str = "lex.cap";
pub const SUFFIX_VIEW: &str = "lex.suffix";
pub const CONTEXT_VIEW: &str = "ctx";

/// Which feature families the final-stage network reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalClassifier {
    /// Contextual features only.
    Contextual,
    /// Contextual plus lexical features.
    AllFeatures,
}

impl FinalClassifier {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalClassifier::Contextual => "f3",
            FinalClassifier::AllFeatures => "f3p",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f3" => Ok(FinalClassifier::Contextual),
            "f3p" => Ok(FinalClassifier::AllFeatures),
            other => Err(SmError::InvalidInput(format!("unknown classifier {other:?}"))),
        }
    }

    fn view(self) -> &'static str {
        match self {
            FinalClassifier::Contextual => CONTEXT_VIEW,
            FinalClassifier::AllFeatures => FULL_VIEW,
        }
    }
}

/// How negative examples are scoped while training the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Every example is a negative for all other labels.
    OneVsAll,
    /// Negatives are confined to the per-example confusion set.
    SmRestricted,
}

impl TrainingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainingMode::OneVsAll => "ova",
            TrainingMode::SmRestricted => "sm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ova" => Ok(TrainingMode::OneVsAll),
            "sm" => Ok(TrainingMode::SmRestricted),
            other => Err(SmError::InvalidInput(format!("unknown training mode {other:?}"))),
        }
    }
}

/// Stage names accepted in [`TaggerConfig::stage_order`].
pub const STAGE_CAP: &str = "cap";
pub const STAGE_SUFFIX: &str = "suffix";
pub const STAGE_FINAL: &str = "final";

#[derive(Debug, Clone)]
pub struct TaggerConfig {
    /// Pipeline order for unknown words: (registered stage name, threshold).
    pub stage_order: Vec<(String, f64)>,
    pub combine: CombineMode,
    pub training_mode: TrainingMode,
    pub final_classifier: FinalClassifier,
    pub winnow: WinnowParams,
    /// When set, the initial weight is estimated from the mean number of
    /// active features observed during extraction.
    pub auto_initial_weight: bool,
    /// Emit the baseline-tag contextual feature.
    pub include_baseline: bool,
    /// Exclude numeric tokens from the unknown-word category.
    pub numeric_exclusion: bool,
    /// Support floor for the count filters.
    pub min_support: u64,
    /// In restricted mode, number of word-type folds used to simulate
    /// unknown words while computing training confusion sets. 0 keeps the
    /// lexicon tag set as the confusion set.
    pub unknown_sim_folds: u32,
    pub seed: u64,
    /// Fixed alphabet; `None` induces it from the training corpus.
    pub tags: Option<Vec<String>>,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            stage_order: vec![
                (STAGE_CAP.to_string(), 0.0),
                (STAGE_SUFFIX.to_string(), 0.0),
                (STAGE_FINAL.to_string(), 0.0),
            ],
            // The count stages act as candidate filters; the final stage
            // re-scores the survivors on its own. A true product would let
            // raw suffix counts outvote the network's decision.
            combine: CombineMode::Replace,
            training_mode: TrainingMode::SmRestricted,
            final_classifier: FinalClassifier::AllFeatures,
            winnow: WinnowParams::default(),
            auto_initial_weight: true,
            include_baseline: false,
            numeric_exclusion: true,
            min_support: 1,
            unknown_sim_folds: 0,
            seed: 0,
            tags: None,
        }
    }
}

impl TaggerConfig {
    fn validate(&self) -> Result<()> {
        if self.stage_order.is_empty() {
            return Err(SmError::InvalidInput("stage order must not be empty".into()));
        }
        for (name, eps) in &self.stage_order {
            if !matches!(name.as_str(), STAGE_CAP | STAGE_SUFFIX | STAGE_FINAL) {
                return Err(SmError::InvalidInput(format!("unknown stage {name:?}")));
            }
            if !(*eps >= 0.0 && *eps < 1.0) {
                return Err(SmError::InvalidInput(format!(
                    "stage {name:?} threshold {eps} outside [0, 1)"
                )));
            }
        }
        self.winnow.validate()?;
        if self.min_support == 0 {
            return Err(SmError::InvalidInput("min-support must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-token timing and update accounting from training.
#[derive(Debug, Clone, Default)]
pub struct TrainingSummary {
    pub tokens: usize,
    pub mean_active_features: f64,
    pub mean_confusion_set_size: f64,
    pub network: TrainingReport,
    pub extraction_wall: Duration,
    pub total_wall: Duration,
}

/// How a token was decided.
#[derive(Debug, Clone)]
pub enum TokenRoute {
    /// Known word: argmax over the lexicon tag set (no pipeline stages run).
    Lexicon { confusion_set: ConfusionSet },
    /// Unknown word: full pipeline trace.
    Pipeline(PredictionTrace),
}

#[derive(Debug, Clone)]
pub struct TaggedToken {
    pub tag: String,
    pub route: TokenRoute,
}

/// Unknown-word decision procedure used at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownRoute {
    /// Run the filter pipeline before the final network.
    Pipeline,
    /// Run the final network alone over the whole alphabet.
    FinalOnly,
}

/// Category of a test token relative to the training lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Known,
    Unknown,
    /// Not in the lexicon but matching the numeric pattern; excluded from
    /// the unknown-word category.
    NumericUnseen,
}

struct NameView {
    interner: Arc<FeatureInterner>,
    pred: fn(&str) -> bool,
}

impl FeatureView for NameView {
    fn project(&self, x: &SparseExample) -> SparseExample {
        SparseExample::new(
            x.features()
                .iter()
                .copied()
                .filter(|f| self.interner.name(*f).is_some_and(self.pred)),
        )
    }
}

/// A trained tagging pipeline plus its lexicon, filters and network.
pub struct TrainedTagger {
    alphabet: Arc<LabelAlphabet>,
    lexicon: Lexicon,
    interner: Arc<FeatureInterner>,
    cap_filter: Arc<CountClassifier>,
    suffix_filter: Arc<CountClassifier>,
    network: Arc<SnowNetwork>,
    unknown_model: SequentialModel,
    config: TaggerConfig,
    summary: TrainingSummary,
}

struct ExtractedToken {
    word: usize,
    gold: LabelId,
    cap: Vec<FeatureId>,
    suffix: Vec<FeatureId>,
    context: Vec<FeatureId>,
}

impl ExtractedToken {
    fn final_example(&self, classifier: FinalClassifier) -> SparseExample {
        match classifier {
            FinalClassifier::Contextual => SparseExample::new(self.context.iter().copied()),
            FinalClassifier::AllFeatures => SparseExample::new(
                self.context
                    .iter()
                    .chain(self.cap.iter())
                    .chain(self.suffix.iter())
                    .copied(),
            ),
        }
    }

}

fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Trains the full tagger: lexicon, count filters, network, and the
/// assembled unknown-word pipeline.
pub fn train(corpus: &TaggedCorpus, cfg: TaggerConfig) -> Result<TrainedTagger> {
    let total_start = Instant::now();
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(SmError::EmptyCorpus);
    }

    // Alphabet: configured, or induced from the corpus tags in sorted order.
    let mut observed: BTreeSet<&str> = BTreeSet::new();
    for token in corpus.tokens() {
        let tag = token.tag.as_deref().ok_or_else(|| {
            SmError::InvalidInput(format!("untagged token {:?} in training corpus", token.surface))
        })?;
        observed.insert(tag);
    }
    let alphabet = match &cfg.tags {
        Some(tags) => {
            let alphabet = LabelAlphabet::new(tags.iter().cloned())?;
            for tag in &observed {
                if alphabet.id(tag).is_none() {
                    return Err(SmError::AlphabetOverflow { tag: (*tag).to_string() });
                }
            }
            alphabet
        }
        None => {
            let mut names: Vec<String> = observed.iter().map(|t| t.to_string()).collect();
            if names.len() < 2 {
                names.push(PAD_TAG.to_string());
            }
            LabelAlphabet::new(names)?
        }
    };
    let alphabet = Arc::new(alphabet);

    let lexicon = Lexicon::build(corpus)?;

    // Extraction pass: intern every feature, record per-token id sets, and
    // train the count filters.
    let extraction_start = Instant::now();
    let mut interner = FeatureInterner::new();
    let mut cap_filter = CountClassifier::new(cfg.min_support);
    let mut suffix_filter = CountClassifier::new(cfg.min_support);
    let mut words: Vec<String> = Vec::new();
    let mut word_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut tokens: Vec<ExtractedToken> = Vec::new();

    for sentence in &corpus.sentences {
        let gold_tags: Vec<String> =
            sentence.tokens.iter().map(|t| t.tag.clone().unwrap_or_default()).collect();
        for i in 0..sentence.len() {
            let token = &sentence.tokens[i];
            let tag = token.tag.as_deref().expect("checked above");
            let gold = alphabet
                .id(tag)
                .ok_or_else(|| SmError::AlphabetOverflow { tag: tag.to_string() })?;
            let bundle =
                extract_bundle(sentence, i, &gold_tags[..i], &lexicon, cfg.include_baseline)?;

            let mut cap = Vec::new();
            let mut suffix = Vec::new();
            for name in &bundle.lexical {
                let id = interner.intern(name);
                if is_cap_feature(name) {
                    cap_filter.train(id, gold);
                    cap.push(id);
                } else {
                    suffix_filter.train(id, gold);
                    suffix.push(id);
                }
            }
            let context: Vec<FeatureId> =
                bundle.contextual.iter().map(|name| interner.intern(name)).collect();

            let word = *word_index.entry(token.surface.clone()).or_insert_with(|| {
                words.push(token.surface.clone());
                words.len() - 1
            });
            tokens.push(ExtractedToken { word, gold, cap, suffix, context });
        }
    }
    let extraction_wall = extraction_start.elapsed();
    let interner = Arc::new(interner);

    let mean_active = if tokens.is_empty() {
        0.0
    } else {
        tokens
            .iter()
            .map(|t| t.final_example(cfg.final_classifier).len() as f64)
            .sum::<f64>()
            / tokens.len() as f64
    };
    let mut winnow = cfg.winnow.clone();
    if cfg.auto_initial_weight {
        winnow = winnow.with_estimated_initial_weight(mean_active);
    }

    // Per-word confusion sets for restricted training.
    let full_set = ConfusionSet::full(&alphabet);
    let word_sets: Vec<ConfusionSet> = match cfg.training_mode {
        TrainingMode::OneVsAll => Vec::new(),
        TrainingMode::SmRestricted => {
            if cfg.unknown_sim_folds == 0 {
                lexicon_confusion_sets(&words, &lexicon, &alphabet, &full_set)
            } else {
                holdout_confusion_sets(&words, &tokens, &cfg, &cap_filter, &suffix_filter, &full_set)
            }
        }
    };

    let examples: Vec<TrainExample> = tokens
        .iter()
        .map(|t| TrainExample {
            x: t.final_example(cfg.final_classifier),
            gold: t.gold,
            cs: match cfg.training_mode {
                TrainingMode::OneVsAll => full_set.clone(),
                TrainingMode::SmRestricted => word_sets[t.word].clone(),
            },
        })
        .collect();
    let mean_cs = if examples.is_empty() {
        0.0
    } else {
        examples.iter().map(|e| e.cs.len() as f64).sum::<f64>() / examples.len() as f64
    };

    let mut network = SnowNetwork::new(alphabet.clone(), winnow, interner.clone());
    let report = train_epochs(&mut network, &examples);

    let summary = TrainingSummary {
        tokens: tokens.len(),
        mean_active_features: mean_active,
        mean_confusion_set_size: mean_cs,
        network: report,
        extraction_wall,
        total_wall: total_start.elapsed(),
    };

    assemble(
        alphabet,
        lexicon,
        interner,
        Arc::new(cap_filter),
        Arc::new(suffix_filter),
        Arc::new(network),
        cfg,
        summary,
    )
}

fn lexicon_confusion_sets(
    words: &[String],
    lexicon: &Lexicon,
    alphabet: &LabelAlphabet,
    full: &ConfusionSet,
) -> Vec<ConfusionSet> {
    words
        .iter()
        .map(|word| {
            let ids: Vec<LabelId> = lexicon
                .tags(word)
                .map(|tags| tags.filter_map(|t| alphabet.id(t)).collect())
                .unwrap_or_default();
            ConfusionSet::new(ids).unwrap_or_else(|_| full.clone())
        })
        .collect()
}

/// Unknown-word simulation: word types are hashed into folds, the count
/// tables contributed by each fold are subtracted when filtering that fold's
/// own words, and the surviving set becomes the training confusion set.
fn holdout_confusion_sets(
    words: &[String],
    tokens: &[ExtractedToken],
    cfg: &TaggerConfig,
    cap_filter: &CountClassifier,
    suffix_filter: &CountClassifier,
    full: &ConfusionSet,
) -> Vec<ConfusionSet> {
    let folds = cfg.unknown_sim_folds as usize;
    let fold_of: Vec<usize> =
        words.iter().map(|w| (fnv1a64(w.as_bytes(), cfg.seed) % folds as u64) as usize).collect();

    let mut cap_contrib: Vec<CountClassifier> =
        (0..folds).map(|_| CountClassifier::new(cfg.min_support)).collect();
    let mut suffix_contrib: Vec<CountClassifier> =
        (0..folds).map(|_| CountClassifier::new(cfg.min_support)).collect();
    for t in tokens {
        let fold = fold_of[t.word];
        for &f in &t.cap {
            cap_contrib[fold].train(f, t.gold);
        }
        for &f in &t.suffix {
            suffix_contrib[fold].train(f, t.gold);
        }
    }

    // One representative confusion set per word type (feature sets of a word
    // type's lexical features are identical across its tokens).
    let mut sets: Vec<Option<ConfusionSet>> = vec![None; words.len()];
    let (cap_eps, suffix_eps) = (
        stage_epsilon(cfg, STAGE_CAP).unwrap_or(0.0),
        stage_epsilon(cfg, STAGE_SUFFIX).unwrap_or(0.0),
    );
    for t in tokens {
        if sets[t.word].is_some() {
            continue;
        }
        let fold = fold_of[t.word];
        let cap_x = SparseExample::new(t.cap.iter().copied());
        let suffix_x = SparseExample::new(t.suffix.iter().copied());
        let after_cap =
            holdout_filter(cap_filter, &cap_contrib[fold], &cap_x, full, cap_eps, cfg.min_support);
        let after_suffix = holdout_filter(
            suffix_filter,
            &suffix_contrib[fold],
            &suffix_x,
            &after_cap,
            suffix_eps,
            cfg.min_support,
        );
        sets[t.word] = Some(after_suffix);
    }
    sets.into_iter().map(|s| s.unwrap_or_else(|| full.clone())).collect()
}

fn stage_epsilon(cfg: &TaggerConfig, name: &str) -> Option<f64> {
    cfg.stage_order.iter().find(|(n, _)| n == name).map(|(_, e)| *e)
}

fn holdout_filter(
    full_counts: &CountClassifier,
    contrib: &CountClassifier,
    x: &SparseExample,
    cs: &ConfusionSet,
    epsilon: f64,
    min_support: u64,
) -> ConfusionSet {
    let totals = full_counts.support_totals(x, cs);
    let held = contrib.support_totals(x, cs);
    let weights = totals.iter().zip(held.iter()).map(|(&(l, a), &(_, b))| {
        let kept = a.saturating_sub(b);
        (l, if kept >= min_support { kept as f64 } else { 0.0 })
    });
    let dist = crate::distribution::LabelDistribution::from_weights(weights)
        .unwrap_or_else(|_| crate::distribution::LabelDistribution::uniform(cs));
    stage_filter(&dist, epsilon, cs).unwrap_or_else(|_| cs.clone())
}

/// Builds the view registry and pipeline from trained parts. Shared by
/// training and model loading so both construct identical pipelines.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    alphabet: Arc<LabelAlphabet>,
    lexicon: Lexicon,
    interner: Arc<FeatureInterner>,
    cap_filter: Arc<CountClassifier>,
    suffix_filter: Arc<CountClassifier>,
    network: Arc<SnowNetwork>,
    config: TaggerConfig,
    summary: TrainingSummary,
) -> Result<TrainedTagger> {
    let mut views = ViewRegistry::default();
    views.register(
        CAP_VIEW,
        Arc::new(NameView { interner: interner.clone(), pred: is_cap_feature }),
    );
    views.register(
        SUFFIX_VIEW,
        Arc::new(NameView { interner: interner.clone(), pred: is_suffix_feature }),
    );
    views.register(
        CONTEXT_VIEW,
        Arc::new(NameView { interner: interner.clone(), pred: is_contextual_feature }),
    );

    let mut stages = Vec::new();
    for (name, eps) in &config.stage_order {
        let stage = match name.as_str() {
            STAGE_CAP => Stage::new(cap_filter.clone(), *eps, CAP_VIEW),
            STAGE_SUFFIX => Stage::new(suffix_filter.clone(), *eps, SUFFIX_VIEW),
            STAGE_FINAL => {
                Stage::new(network.clone(), *eps, config.final_classifier.view())
            }
            other => return Err(SmError::InvalidInput(format!("unknown stage {other:?}"))),
        };
        stages.push(stage);
    }
    let unknown_model =
        SequentialModel::new(alphabet.clone(), stages, config.combine).with_views(views);
    let diagnostics = unknown_model.validate();
    if !diagnostics.is_empty() {
        return Err(SmError::InvalidInput(format!(
            "assembled pipeline is malformed: {}",
            diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
        )));
    }

    Ok(TrainedTagger {
        alphabet,
        lexicon,
        interner,
        cap_filter,
        suffix_filter,
        network,
        unknown_model,
        config,
        summary,
    })
}

impl std::fmt::Debug for TrainedTagger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedTagger")
            .field("labels", &self.alphabet.len())
            .field("lexicon_words", &self.lexicon.word_count())
            .field("features", &self.interner.len())
            .field("stages", &self.config.stage_order)
            .finish()
    }
}

impl TrainedTagger {
    pub fn alphabet(&self) -> &Arc<LabelAlphabet> {
        &self.alphabet
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn config(&self) -> &TaggerConfig {
        &self.config
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    pub fn interner(&self) -> &Arc<FeatureInterner> {
        &self.interner
    }

    pub fn cap_filter(&self) -> &Arc<CountClassifier> {
        &self.cap_filter
    }

    pub fn suffix_filter(&self) -> &Arc<CountClassifier> {
        &self.suffix_filter
    }

    pub fn network(&self) -> &Arc<SnowNetwork> {
        &self.network
    }

    pub fn unknown_model(&self) -> &SequentialModel {
        &self.unknown_model
    }

    /// Category of a token relative to the lexicon and numeric pattern.
    pub fn token_kind(&self, word: &str) -> TokenKind {
        if self.lexicon.contains(word) {
            TokenKind::Known
        } else if self.config.numeric_exclusion && is_numeric(word) {
            TokenKind::NumericUnseen
        } else {
            TokenKind::Unknown
        }
    }

    /// Interns nothing: features unseen in training are dropped, which is
    /// equivalent to them being unlinked everywhere.
    fn example_from_names<'a, I: Iterator<Item = &'a str>>(&self, names: I) -> SparseExample {
        SparseExample::new(names.filter_map(|n| self.interner.lookup(n)))
    }

    fn bundle_for(
        &self,
        sentence: &Sentence,
        i: usize,
        assigned: &[String],
    ) -> Result<FeatureBundle> {
        extract_bundle(sentence, i, assigned, &self.lexicon, self.config.include_baseline)
    }

    /// Tags a sentence left to right. Known words are restricted to their
    /// lexicon tag set; others run the unknown-word pipeline (or the final
    /// network alone under [`UnknownRoute::FinalOnly`]).
    pub fn tag_sentence_with(
        &self,
        sentence: &Sentence,
        route: UnknownRoute,
    ) -> Result<Vec<TaggedToken>> {
        let mut out: Vec<TaggedToken> = Vec::with_capacity(sentence.len());
        let mut assigned: Vec<String> = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let word = &sentence.tokens[i].surface;
            let bundle = self.bundle_for(sentence, i, &assigned)?;
            let tagged = match self.token_kind(word) {
                TokenKind::Known => self.tag_known(word, &bundle)?,
                TokenKind::Unknown | TokenKind::NumericUnseen => match route {
                    UnknownRoute::Pipeline => self.tag_unknown_pipeline(&bundle)?,
                    UnknownRoute::FinalOnly => self.tag_unknown_final_only(&bundle)?,
                },
            };
            assigned.push(tagged.tag.clone());
            out.push(tagged);
        }
        Ok(out)
    }

    pub fn tag_sentence(&self, sentence: &Sentence) -> Result<Vec<TaggedToken>> {
        self.tag_sentence_with(sentence, UnknownRoute::Pipeline)
    }

    fn tag_known(&self, word: &str, bundle: &FeatureBundle) -> Result<TaggedToken> {
        let ids: Vec<LabelId> = self
            .lexicon
            .tags(word)
            .expect("known word")
            .filter_map(|t| self.alphabet.id(t))
            .collect();
        let cs = ConfusionSet::new(ids)?;
        let tag = if cs.len() == 1 {
            cs.iter().next().expect("singleton")
        } else {
            let x = match self.config.final_classifier {
                FinalClassifier::Contextual => {
                    self.example_from_names(bundle.contextual.iter().map(|s| s.as_str()))
                }
                FinalClassifier::AllFeatures => self.example_from_names(bundle.all()),
            };
            self.network.predict(&x, &cs)?.argmax()
        };
        Ok(TaggedToken {
            tag: self.alphabet.name(tag).to_string(),
            route: TokenRoute::Lexicon { confusion_set: cs },
        })
    }

    fn tag_unknown_pipeline(&self, bundle: &FeatureBundle) -> Result<TaggedToken> {
        let x = self.example_from_names(bundle.all());
        let trace = self.unknown_model.predict(&x)?;
        Ok(TaggedToken {
            tag: self.alphabet.name(trace.final_label).to_string(),
            route: TokenRoute::Pipeline(trace),
        })
    }

    fn tag_unknown_final_only(&self, bundle: &FeatureBundle) -> Result<TaggedToken> {
        let x = match self.config.final_classifier {
            FinalClassifier::Contextual => {
                self.example_from_names(bundle.contextual.iter().map(|s| s.as_str()))
            }
            FinalClassifier::AllFeatures => self.example_from_names(bundle.all()),
        };
        let cs = ConfusionSet::full(&self.alphabet);
        let dist = self.network.predict(&x, &cs)?;
        let label = dist.argmax();
        let trace = PredictionTrace {
            stages: vec![crate::model::StageRecord {
                input: cs.clone(),
                emitted: dist.clone(),
                survivors: ConfusionSet::singleton(label),
            }],
            final_distribution: dist,
            final_label: label,
        };
        Ok(TaggedToken {
            tag: self.alphabet.name(label).to_string(),
            route: TokenRoute::Pipeline(trace),
        })
    }

    /// Runs only the filter stages of the unknown pipeline over a token's
    /// lexical features, as if the word were unknown. Used to measure the
    /// one-sided-error rate of the filters.
    pub fn filter_survivors(&self, word: &str) -> Result<ConfusionSet> {
        let lexical = crate::features::extract_lexical(word);
        let x = self.example_from_names(lexical.iter().map(|s| s.as_str()));
        let mut cs = ConfusionSet::full(&self.alphabet);
        for (name, eps) in &self.config.stage_order {
            let (classifier, view): (&CountClassifier, fn(&str) -> bool) = match name.as_str() {
                STAGE_CAP => (&self.cap_filter, is_cap_feature),
                STAGE_SUFFIX => (&self.suffix_filter, is_suffix_feature),
                _ => continue,
            };
            let projected = SparseExample::new(
                x.features()
                    .iter()
                    .copied()
                    .filter(|f| self.interner.name(*f).is_some_and(view)),
            );
            let dist = classifier.predict(&projected, &cs);
            cs = stage_filter(&dist, *eps, &cs)?;
        }
        Ok(cs)
    }

    /// Fraction of corpus tokens whose gold tag survives the filter stages.
    /// On the training corpus itself, with threshold 0 and support floor 1,
    /// this is exactly 1.0 because every (feature, tag) pair was counted.
    pub fn filter_survival_rate(&self, corpus: &TaggedCorpus) -> Result<f64> {
        let mut total = 0u64;
        let mut survived = 0u64;
        for token in corpus.tokens() {
            let Some(tag) = token.tag.as_deref() else { continue };
            let Some(gold) = self.alphabet.id(tag) else { continue };
            let survivors = self.filter_survivors(&token.surface)?;
            total += 1;
            if survivors.contains(gold) {
                survived += 1;
            }
        }
        if total == 0 {
            return Err(SmError::InvalidInput("no scorable tokens".into()));
        }
        Ok(survived as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_tagged, Token};
    use std::io::Cursor;

    fn sentence(pairs: &[(&str, &str)]) -> Sentence {
        Sentence::new(pairs.iter().map(|(w, t)| Token::new(*w, *t)).collect()).unwrap()
    }

    fn toy_corpus() -> TaggedCorpus {
        let text = "\
the\tDT\ncat\tNN\nsat\tVBD\n\n\
the\tDT\ndog\tNN\nran\tVBD\n\n\
Running\tVBG\nis\tVBZ\nfun\tJJ\n\n\
Paris\tNNP\nis\tVBZ\nbig\tJJ\n\n\
the\tDT\nbird\tNN\nis\tVBZ\nsinging\tVBG\n";
        read_tagged(Cursor::new(text)).unwrap()
    }

    #[test]
    fn train_builds_consistent_parts() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        assert!(tagger.alphabet().len() >= 5);
        assert!(tagger.lexicon().contains("cat"));
        assert!(tagger.unknown_model().validate().is_empty());
        assert!(tagger.summary().tokens > 0);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            train(&TaggedCorpus::default(), TaggerConfig::default()),
            Err(SmError::EmptyCorpus)
        ));
    }

    #[test]
    fn configured_alphabet_overflow_is_rejected() {
        let cfg = TaggerConfig {
            tags: Some(vec!["DT".into(), "NN".into()]),
            ..TaggerConfig::default()
        };
        match train(&toy_corpus(), cfg) {
            Err(SmError::AlphabetOverflow { .. }) => {}
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn known_single_tag_words_bypass_the_pipeline() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let tagged = tagger.tag_sentence(&sentence(&[("the", "DT"), ("cat", "NN")])).unwrap();
        assert_eq!(tagged[0].tag, "DT");
        assert_eq!(tagged[1].tag, "NN");
        for t in &tagged {
            match &t.route {
                TokenRoute::Lexicon { confusion_set } => assert_eq!(confusion_set.len(), 1),
                other => panic!("expected lexicon route, got {other:?}"),
            }
        }
    }

    #[test]
    fn known_word_tag_always_in_lexicon_set() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let tagged = tagger.tag_sentence(&sentence(&[("is", "VBZ"), ("the", "DT")])).unwrap();
        for (token, word) in tagged.iter().zip(["is", "the"]) {
            let tags: Vec<&str> = tagger.lexicon().tags(word).unwrap().collect();
            assert!(tags.contains(&token.tag.as_str()), "{word} -> {}", token.tag);
        }
    }

    #[test]
    fn unknown_word_runs_all_pipeline_stages() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let tagged = tagger.tag_sentence(&sentence(&[("blorking", "VBG")])).unwrap();
        match &tagged[0].route {
            TokenRoute::Pipeline(trace) => {
                assert_eq!(trace.stages.len(), 3);
                for (i, rec) in trace.stages.iter().enumerate() {
                    assert!(rec.survivors.is_subset_of(&rec.input), "stage {i}");
                    assert!(!rec.survivors.is_empty());
                }
            }
            other => panic!("expected pipeline route, got {other:?}"),
        }
    }

    // Capitalized -ing unknown word: the cap filter keeps tags seen with
    // capitalized words, the suffix filter keeps -ing tags, and the final
    // decision happens among the intersection.
    #[test]
    fn capitalized_ing_word_filters_to_cap_and_suffix_tags() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let vbg = tagger.alphabet().id("VBG").unwrap();
        let nnp = tagger.alphabet().id("NNP").unwrap();

        let tagged = tagger.tag_sentence(&sentence(&[("Blorping", "VBG")])).unwrap();
        match &tagged[0].route {
            TokenRoute::Pipeline(trace) => {
                // cap was observed with VBG (Running) and NNP (Paris).
                let after_cap = &trace.stages[0].survivors;
                assert!(after_cap.contains(vbg) && after_cap.contains(nnp));
                assert_eq!(after_cap.len(), 2);
                // "ing" narrows it to VBG.
                let after_suffix = &trace.stages[1].survivors;
                assert_eq!(after_suffix.as_slice(), &[vbg]);
            }
            other => panic!("expected pipeline route, got {other:?}"),
        }
        assert_eq!(tagged[0].tag, "VBG");
    }

    // Unknown, uncapitalized, too short for suffixes: both filters fall back
    // to uniform and the final stage decides over the full alphabet.
    #[test]
    fn featureless_unknown_token_keeps_full_alphabet_at_final_stage() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let tagged = tagger.tag_sentence(&sentence(&[("zq", "NN")])).unwrap();
        match &tagged[0].route {
            TokenRoute::Pipeline(trace) => {
                let m = tagger.alphabet().len();
                assert_eq!(trace.stages[0].survivors.len(), m);
                assert_eq!(trace.stages[1].survivors.len(), m);
                assert_eq!(trace.stages[2].input.len(), m);
            }
            other => panic!("expected pipeline route, got {other:?}"),
        }
    }

    #[test]
    fn numeric_unseen_tokens_are_not_unknown() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        assert_eq!(tagger.token_kind("3.14"), TokenKind::NumericUnseen);
        assert_eq!(tagger.token_kind("blork"), TokenKind::Unknown);
        assert_eq!(tagger.token_kind("cat"), TokenKind::Known);
        // Tagging is still total for numerics.
        let tagged = tagger.tag_sentence(&sentence(&[("3.14", "CD")])).unwrap();
        assert!(!tagged[0].tag.is_empty());
    }

    #[test]
    fn one_word_one_tag_corpus_emits_that_tag() {
        let corpus = read_tagged(Cursor::new("hi\tUH\n\nhi\tUH\n")).unwrap();
        let tagger = train(&corpus, TaggerConfig::default()).unwrap();
        let known = tagger.tag_sentence(&sentence(&[("hi", "UH")])).unwrap();
        assert_eq!(known[0].tag, "UH");
        let unknown = tagger.tag_sentence(&sentence(&[("zorp", "UH")])).unwrap();
        assert_eq!(unknown[0].tag, "UH");
    }

    #[test]
    fn restricted_mode_records_gold_in_set_or_filters() {
        // Lexicon confusion sets always contain the gold tag.
        let cfg = TaggerConfig { training_mode: TrainingMode::SmRestricted, ..Default::default() };
        let tagger = train(&toy_corpus(), cfg).unwrap();
        assert_eq!(tagger.summary().network.filtered_examples, 0);

        // With unknown-word simulation, filtered examples are possible but
        // every presentation is either trained (gold in set) or counted.
        let cfg = TaggerConfig {
            training_mode: TrainingMode::SmRestricted,
            unknown_sim_folds: 10,
            ..Default::default()
        };
        let tagger = train(&toy_corpus(), cfg).unwrap();
        let epochs = tagger.summary().network.epochs.len() as u64;
        assert_eq!(tagger.summary().network.filtered_examples % epochs.max(1), 0);
    }

    #[test]
    fn modes_share_lexicon_and_filters_but_differ_in_updates() {
        let corpus = toy_corpus();
        let sm = train(
            &corpus,
            TaggerConfig { training_mode: TrainingMode::SmRestricted, ..Default::default() },
        )
        .unwrap();
        let ova = train(
            &corpus,
            TaggerConfig { training_mode: TrainingMode::OneVsAll, ..Default::default() },
        )
        .unwrap();

        assert_eq!(sm.lexicon().word_count(), ova.lexicon().word_count());
        let rows = |cc: &CountClassifier| -> Vec<(FeatureId, Vec<(LabelId, u64)>)> {
            cc.rows().map(|(f, row)| (f, row.iter().map(|(l, c)| (*l, *c)).collect())).collect()
        };
        assert_eq!(rows(sm.cap_filter()), rows(ova.cap_filter()));
        assert_eq!(rows(sm.suffix_filter()), rows(ova.suffix_filter()));
        assert!(
            sm.summary().network.total_node_updates <= ova.summary().network.total_node_updates
        );
    }

    #[test]
    fn filter_survival_is_perfect_on_training_data() {
        let tagger = train(&toy_corpus(), TaggerConfig::default()).unwrap();
        let rate = tagger.filter_survival_rate(&toy_corpus()).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected_before_training() {
        let bad_stage = TaggerConfig {
            stage_order: vec![("nope".into(), 0.0)],
            ..TaggerConfig::default()
        };
        assert!(train(&toy_corpus(), bad_stage).is_err());
        let bad_eps = TaggerConfig {
            stage_order: vec![(STAGE_FINAL.into(), 1.0)],
            ..TaggerConfig::default()
        };
        assert!(train(&toy_corpus(), bad_eps).is_err());
    }
}
