//! Accuracy and timing harness: per-category token accuracy, filter-stage
//! statistics, a confusion matrix cross-check, corpus splitting, and the
//! one-vs-all versus restricted training benchmark.

use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alphabet::LabelId;
use crate::corpus::TaggedCorpus;
use crate::error::{Result, SmError};
use crate::tagger::{
    train, TaggerConfig, TokenKind, TokenRoute, TrainedTagger, TrainingMode, UnknownRoute,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bucket {
    pub tokens: u64,
    pub correct: u64,
}

impl Bucket {
    pub fn accuracy(&self) -> Option<f64> {
        (self.tokens > 0).then(|| self.correct as f64 / self.tokens as f64)
    }

    fn add(&mut self, correct: bool) {
        self.tokens += 1;
        self.correct += correct as u64;
    }
}

/// Gold x predicted counts; gold tags outside the alphabet land in a
/// separate always-wrong bucket.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    labels: usize,
    counts: Vec<u64>,
    pub out_of_alphabet: u64,
}

impl ConfusionMatrix {
    fn new(labels: usize) -> Self {
        ConfusionMatrix { labels, counts: vec![0; labels * labels], out_of_alphabet: 0 }
    }

    fn record(&mut self, gold: Option<LabelId>, predicted: LabelId) {
        match gold {
            Some(g) => self.counts[g.idx() * self.labels + predicted.idx()] += 1,
            None => self.out_of_alphabet += 1,
        }
    }

    pub fn count(&self, gold: LabelId, predicted: LabelId) -> u64 {
        self.counts[gold.idx() * self.labels + predicted.idx()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.out_of_alphabet
    }

    /// Accuracy recomputed from the matrix; must agree exactly with the
    /// streaming buckets.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let diag: u64 = (0..self.labels).map(|i| self.counts[i * self.labels + i]).sum();
        Some(diag as f64 / total as f64)
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub known: Bucket,
    pub unknown: Bucket,
    /// Unseen numeric tokens, excluded from the unknown category.
    pub numeric: Bucket,
    pub out_of_alphabet: u64,
    /// Mean surviving-set size after each pipeline stage, unknown tokens.
    pub stage_mean_cs: Vec<f64>,
    /// Fraction of unknown tokens whose gold tag survives each stage.
    pub gold_survival: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub tokens_per_sec: f64,
    pub wall: Duration,
}

impl EvalReport {
    pub fn total_tokens(&self) -> u64 {
        self.known.tokens + self.unknown.tokens + self.numeric.tokens
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let total = self.total_tokens();
        (total > 0)
            .then(|| (self.known.correct + self.unknown.correct + self.numeric.correct) as f64 / total as f64)
    }

    /// Gold survival after the last filter stage (the stage before the final
    /// classifier), when the pipeline has one.
    pub fn filter_survival(&self) -> Option<f64> {
        if self.gold_survival.len() >= 2 {
            Some(self.gold_survival[self.gold_survival.len() - 2])
        } else {
            self.gold_survival.last().copied()
        }
    }

    /// Line-oriented key=value records for scripting.
    pub fn kv_lines(&self) -> Vec<String> {
        let fmt_acc = |b: &Bucket| match b.accuracy() {
            Some(a) => format!("{a:.6}"),
            None => "undefined".to_string(),
        };
        let mut out = vec![
            format!("known.tokens={}", self.known.tokens),
            format!("known.correct={}", self.known.correct),
            format!("known.accuracy={}", fmt_acc(&self.known)),
            format!("unknown.tokens={}", self.unknown.tokens),
            format!("unknown.correct={}", self.unknown.correct),
            format!("unknown.accuracy={}", fmt_acc(&self.unknown)),
            format!("numeric.tokens={}", self.numeric.tokens),
            format!("numeric.accuracy={}", fmt_acc(&self.numeric)),
            format!(
                "overall.accuracy={}",
                self.overall_accuracy().map_or("undefined".into(), |a| format!("{a:.6}"))
            ),
            format!("out_of_alphabet={}", self.out_of_alphabet),
        ];
        for (i, (mean, survival)) in
            self.stage_mean_cs.iter().zip(self.gold_survival.iter()).enumerate()
        {
            out.push(format!("stage{i}.mean_cs={mean:.4}"));
            out.push(format!("stage{i}.gold_survival={survival:.6}"));
        }
        out.push(format!("throughput.tokens_per_sec={:.1}", self.tokens_per_sec));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = |b: &Bucket| match b.accuracy() {
            Some(a) => format!("{:.2}%", a * 100.0),
            None => "   --".to_string(),
        };
        writeln!(f, "tokens     known {:>8}  unknown {:>6}  numeric {:>5}", self.known.tokens, self.unknown.tokens, self.numeric.tokens)?;
        writeln!(f, "accuracy   known {:>8}  unknown {:>6}  numeric {:>5}", acc(&self.known), acc(&self.unknown), acc(&self.numeric))?;
        if self.out_of_alphabet > 0 {
            writeln!(f, "flagged    {} gold tags outside the alphabet", self.out_of_alphabet)?;
        }
        for (i, (mean, survival)) in
            self.stage_mean_cs.iter().zip(self.gold_survival.iter()).enumerate()
        {
            writeln!(f, "stage {i}    mean confusion set {mean:>7.2}  gold survival {:.4}", survival)?;
        }
        write!(f, "throughput {:.0} tokens/s", self.tokens_per_sec)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub unknown_route: UnknownRoute,
    /// 0 = all available cores.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { unknown_route: UnknownRoute::Pipeline, threads: 0 }
    }
}

struct TokenResult {
    kind: TokenKind,
    gold: Option<LabelId>,
    predicted: LabelId,
    /// Survivor sizes and gold-survival flags per stage (unknown route only).
    stages: Vec<(usize, bool)>,
}

fn eval_sentence(
    tagger: &TrainedTagger,
    sentence: &crate::corpus::Sentence,
    route: UnknownRoute,
) -> Result<Vec<TokenResult>> {
    let tagged = tagger.tag_sentence_with(sentence, route)?;
    let mut out = Vec::with_capacity(tagged.len());
    for (token, result) in sentence.tokens.iter().zip(tagged) {
        let gold_tag = token.tag.as_deref().ok_or_else(|| {
            SmError::InvalidInput(format!("token {:?} in test corpus has no gold tag", token.surface))
        })?;
        let gold = tagger.alphabet().id(gold_tag);
        let predicted = tagger.alphabet().id(&result.tag).expect("predicted tag in alphabet");
        let stages = match &result.route {
            TokenRoute::Pipeline(trace) if tagger.token_kind(&token.surface) == TokenKind::Unknown => {
                trace
                    .stages
                    .iter()
                    .map(|rec| {
                        (rec.survivors.len(), gold.is_some_and(|g| rec.survivors.contains(g)))
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        out.push(TokenResult { kind: tagger.token_kind(&token.surface), gold, predicted, stages });
    }
    Ok(out)
}

/// Tags the whole test corpus and aggregates accuracy per token category,
/// per-stage filter statistics, and a confusion-matrix cross-check.
pub fn evaluate(
    tagger: &TrainedTagger,
    test: &TaggedCorpus,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(SmError::EmptyCorpus);
    }
    let start = Instant::now();
    let route = opts.unknown_route;
    let results: Result<Vec<Vec<TokenResult>>> = if opts.threads == 1 {
        test.sentences.iter().map(|s| eval_sentence(tagger, s, route)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| SmError::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            test.sentences
                .par_iter()
                .map(|s| eval_sentence(tagger, s, route))
                .collect()
        })
    };
    let results = results?;
    let wall = start.elapsed();

    let mut known = Bucket::default();
    let mut unknown = Bucket::default();
    let mut numeric = Bucket::default();
    let mut confusion = ConfusionMatrix::new(tagger.alphabet().len());
    let mut stage_size_sums: Vec<f64> = Vec::new();
    let mut stage_survivals: Vec<u64> = Vec::new();
    let mut unknown_with_stages = 0u64;

    for sentence in &results {
        for token in sentence {
            let correct = token.gold == Some(token.predicted);
            match token.kind {
                TokenKind::Known => known.add(correct),
                TokenKind::Unknown => unknown.add(correct),
                TokenKind::NumericUnseen => numeric.add(correct),
            }
            confusion.record(token.gold, token.predicted);
            if !token.stages.is_empty() {
                if token.stages.len() > stage_size_sums.len() {
                    stage_size_sums.resize(token.stages.len(), 0.0);
                    stage_survivals.resize(token.stages.len(), 0);
                }
                unknown_with_stages += 1;
                for (i, &(size, survived)) in token.stages.iter().enumerate() {
                    stage_size_sums[i] += size as f64;
                    stage_survivals[i] += survived as u64;
                }
            }
        }
    }

    let denom = unknown_with_stages.max(1) as f64;
    let report = EvalReport {
        known,
        unknown,
        numeric,
        out_of_alphabet: confusion.out_of_alphabet,
        stage_mean_cs: stage_size_sums.iter().map(|s| s / denom).collect(),
        gold_survival: stage_survivals.iter().map(|s| *s as f64 / denom).collect(),
        confusion,
        tokens_per_sec: test.token_count() as f64 / wall.as_secs_f64().max(1e-9),
        wall,
    };
    debug_assert_eq!(report.overall_accuracy(), report.confusion.accuracy());
    Ok(report)
}

/// Seeded by-sentence split; sentence order is preserved inside each side.
pub fn split_corpus(corpus: &TaggedCorpus, train_fraction: f64, seed: u64) -> (TaggedCorpus, TaggedCorpus) {
    let mut indices: Vec<usize> = (0..corpus.sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = ((corpus.sentences.len() as f64) * train_fraction).round() as usize;
    let mut train_idx: Vec<usize> = indices[..cut.min(indices.len())].to_vec();
    let mut test_idx: Vec<usize> = indices[cut.min(indices.len())..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| TaggedCorpus {
        sentences: idx.iter().map(|&i| corpus.sentences[i].clone()).collect(),
    };
    (pick(&train_idx), pick(&test_idx))
}

#[derive(Debug, Clone)]
pub struct ModeStats {
    pub node_updates: u64,
    /// Median wall clock of the network-training phase (the part the
    /// training mode changes).
    pub network_wall: Duration,
    /// Median wall clock of the whole training run.
    pub total_wall: Duration,
    pub mean_confusion_set: f64,
}

#[derive(Debug, Clone)]
pub struct BenchComparison {
    pub one_vs_all: ModeStats,
    pub sm_restricted: ModeStats,
    pub update_ratio: f64,
    pub network_speedup: f64,
}

impl BenchComparison {
    pub fn kv_lines(&self) -> Vec<String> {
        let mode = |name: &str, s: &ModeStats| {
            vec![
                format!("{name}.node_updates={}", s.node_updates),
                format!("{name}.network_secs={:.4}", s.network_wall.as_secs_f64()),
                format!("{name}.total_secs={:.4}", s.total_wall.as_secs_f64()),
                format!("{name}.mean_cs={:.3}", s.mean_confusion_set),
            ]
        };
        let mut out = mode("ova", &self.one_vs_all);
        out.extend(mode("sm", &self.sm_restricted));
        out.push(format!("update_ratio={:.4}", self.update_ratio));
        out.push(format!("network_speedup={:.2}", self.network_speedup));
        out
    }
}

impl fmt::Display for BenchComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mode          updates      network-s    total-s   mean-cs"
        )?;
        for (name, s) in [("one-vs-all", &self.one_vs_all), ("sm-restricted", &self.sm_restricted)] {
            writeln!(
                f,
                "{name:<13} {:>10}   {:>9.3}  {:>9.3}   {:>6.2}",
                s.node_updates,
                s.network_wall.as_secs_f64(),
                s.total_wall.as_secs_f64(),
                s.mean_confusion_set
            )?;
        }
        write!(
            f,
            "update ratio {:.4}, network speedup {:.2}x",
            self.update_ratio, self.network_speedup
        )
    }
}

fn median(mut durations: Vec<Duration>) -> Duration {
    durations.sort_unstable();
    durations[durations.len() / 2]
}

/// Trains both modes on the identical corpus and hyperparameters, reporting
/// update counts and median wall clocks over `runs` repetitions. Runs
/// sequentially for timing stability.
pub fn bench_training(
    corpus: &TaggedCorpus,
    base: &TaggerConfig,
    runs: usize,
) -> Result<BenchComparison> {
    let runs = runs.max(1);
    let mut stats = Vec::with_capacity(2);
    for mode in [TrainingMode::OneVsAll, TrainingMode::SmRestricted] {
        let cfg = TaggerConfig { training_mode: mode, ..base.clone() };
        let mut updates = None;
        let mut network_walls = Vec::with_capacity(runs);
        let mut total_walls = Vec::with_capacity(runs);
        let mut mean_cs = 0.0;
        for _ in 0..runs {
            let tagger = train(corpus, cfg.clone())?;
            let summary = tagger.summary();
            match updates {
                None => updates = Some(summary.network.total_node_updates),
                Some(u) => debug_assert_eq!(u, summary.network.total_node_updates),
            }
            network_walls.push(summary.network.wall);
            total_walls.push(summary.total_wall);
            mean_cs = summary.mean_confusion_set_size;
        }
        stats.push(ModeStats {
            node_updates: updates.unwrap_or(0),
            network_wall: median(network_walls),
            total_wall: median(total_walls),
            mean_confusion_set: mean_cs,
        });
    }
    let sm = stats.pop().expect("two modes");
    let ova = stats.pop().expect("two modes");
    let update_ratio = sm.node_updates as f64 / ova.node_updates.max(1) as f64;
    let network_speedup =
        ova.network_wall.as_secs_f64() / sm.network_wall.as_secs_f64().max(1e-9);
    Ok(BenchComparison { one_vs_all: ova, sm_restricted: sm, update_ratio, network_speedup })
}
