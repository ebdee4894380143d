//! Seeded synthetic corpus generators: a morphology-rich tagged corpus for
//! desk-scale accuracy experiments, and a wide-alphabet corpus for training
//! benchmarks.
//!
//! The desk generator keeps morphology regular on purpose: open-class words
//! carry their class suffix (`-ing`, `-ed`, `-ly`, ...), proper nouns are the
//! only capitalized forms, and a slice of surfaces is shared across tags
//! (noun/verb stems, `-s` plurals vs third-person verbs, gerunds used as
//! nouns), so lexical filters are informative but not trivially perfect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, TaggedCorpus, Token};

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";

fn stem(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        s.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        if rng.gen_bool(0.3) {
            s.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        }
    }
    s
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Zipf-weighted sampling pool over word forms.
struct Pool {
    forms: Vec<String>,
    cumulative: Vec<f64>,
}

impl Pool {
    fn new(forms: Vec<String>) -> Self {
        let mut cumulative = Vec::with_capacity(forms.len());
        let mut total = 0.0;
        for rank in 0..forms.len() {
            total += 1.0 / (rank as f64 + 2.0);
            cumulative.push(total);
        }
        Pool { forms, cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &str {
        let total = *self.cumulative.last().expect("non-empty pool");
        let target = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < target);
        &self.forms[idx.min(self.forms.len() - 1)]
    }
}

#[derive(Debug, Clone)]
pub struct DeskCorpusSpec {
    pub sentences: usize,
    pub seed: u64,
    /// Fraction of gerund (`-ing`) tokens tagged as nouns.
    pub gerund_noun_rate: f64,
    /// Fraction of adjective slots filled by participial `-ed`/`-ing` forms
    /// tagged JJ.
    pub deverbal_adjective_rate: f64,
}

impl Default for DeskCorpusSpec {
    fn default() -> Self {
        DeskCorpusSpec {
            sentences: 6000,
            seed: 0xd35c,
            gerund_noun_rate: 0.15,
            deverbal_adjective_rate: 0.12,
        }
    }
}

/// Sentence templates as tag sequences. `?` marks optional slots, `|`
/// separates alternatives for a slot (duplicates weight a choice), `VBZ:be`
/// and `VBD:be` force auxiliary surfaces. The alternations put several
/// morphology classes into the same contexts, so the surrounding tags alone
/// underdetermine the answer.
const TEMPLATES: &[&[&str]] = &[
    &["DT", "JJ|VBG|VBN|NN?", "NN|NN|NNS|VBG", "VBZ|VBD|VBP", "RB?"],
    &["DT", "NN|NNS", "VBZ:be", "VBG|VBN|JJ", "IN", "DT", "JJ?", "NN|NNS"],
    &["DT", "NNS|NN", "VBP|VBD|VBZ", "JJ|RB"],
    &["NNP|NNPS", "VBD|VBZ|VBP", "DT", "NN|NNS", "IN", "NNP"],
    &["PRP", "MD", "VB", "DT", "JJ|VBG|VBN?", "NN|NNS"],
    &["EX", "VBZ:be", "DT", "JJ?", "NN|VBG"],
    &["PRP", "VBD|VBP|VBZ", "PRP$", "NN|NNS", "CC", "PRP$", "NNS|NN"],
    &["DT", "JJS|JJR|JJ", "NN|NNS", "VBZ:be", "JJR|JJ|VBN", "IN", "DT", "NN|NNS"],
    &["NNP", "CC", "NNP", "VBD|VBP|VBZ", "IN", "CD", "NNS"],
    &["PRP", "VBP|VBD|VBZ", "RB", "IN", "DT", "NN|NNS"],
    &["DT", "NN", "IN", "DT", "NN|NNS", "VBZ|VBD|VBP", "JJ|RB?"],
    &["NNP", "VBZ:be|VBD:be", "VBN|VBG|JJ", "IN", "DT", "NN"],
    &["PRP$", "NNS|NN", "VBP|VBZ|VBD", "VBG", "IN", "NNP"],
    &["DT", "NN|NNS", "VBD:be", "RB?", "JJ|VBN|VBG"],
    &["NNPS|NNS|NNP", "VBP|VBD", "DT", "JJ?", "NN|NNS"],
    &["DT", "VBG|JJ|VBN|NN", "NN|NNS", "VBZ|VBD|VBP", "IN", "DT", "NN"],
    &["TO", "VB", "DT", "NN|NNS", "VBZ:be", "JJ|VBN"],
    &["PRP", "VBD|VBZ|VBP", "CD", "NN|NNS", "IN", "DT", "NN"],
    &["DT", "NN", "NN|NNS", "VBZ|VBD|VBP", "DT", "NN|NNS"],
    &["RB", "PRP", "VBP|VBD|VBZ", "DT", "NN|NNS"],
];

struct DeskVocabulary {
    nn: Pool,
    nns: Pool,
    vb: Pool,
    vbz: Pool,
    vbd: Pool,
    vbn: Pool,
    vbg: Pool,
    jj: Pool,
    jjr: Pool,
    jjs: Pool,
    rb: Pool,
    nnp: Pool,
    nnps: Pool,
    cd: Pool,
}

fn random_ending(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(2..=4);
    let mut s = String::new();
    for k in 0..len {
        let set = if k % 2 == 0 { VOWELS } else { CONSONANTS };
        s.push(set[rng.gen_range(0..set.len())] as char);
    }
    s
}

/// Word types for one class: every surface is stem + ending, with the ending
/// drawn Zipf-style from a few common anchors followed by a long tail of
/// rare class-specific endings. Frequent endings give a learner plenty of
/// evidence; tail endings are seen a handful of times, which a count table
/// remembers but weight training barely registers.
fn class_forms(
    rng: &mut ChaCha8Rng,
    types: usize,
    anchors: &[&str],
    tail_endings: usize,
    capitalized: bool,
) -> Vec<String> {
    let mut endings: Vec<String> = anchors.iter().map(|s| s.to_string()).collect();
    for _ in 0..tail_endings {
        endings.push(random_ending(rng));
    }
    let ending_pool = Pool::new(endings);
    (0..types)
        .map(|_| {
            let base = stem(rng);
            let base = if capitalized { capitalize(&base) } else { base };
            format!("{base}{}", ending_pool.sample(rng))
        })
        .collect()
}

impl DeskVocabulary {
    fn build(rng: &mut ChaCha8Rng) -> Self {
        let mut nn = class_forms(rng, 4000, &["", "er", "ment", "ion"], 30, false);
        let mut vb = class_forms(rng, 1500, &[""], 20, false);
        // Shared bare surfaces: some verbs double as nouns.
        for k in 0..vb.len() / 8 {
            vb[k * 8] = nn[rng.gen_range(0..nn.len())].clone();
        }
        let mut nns = class_forms(rng, 2500, &["s", "ers"], 20, false);
        let vbz = class_forms(rng, 1200, &["s"], 20, false);
        for k in 0..nns.len() / 12 {
            nns[k * 12] = vbz[rng.gen_range(0..vbz.len())].clone();
        }
        // Noun compounds and agentives leak into adjective-ish endings too.
        for k in 0..nn.len() / 16 {
            let pos = rng.gen_range(0..nn.len());
            nn[pos] = format!("{}er", stem(rng));
            let _ = k;
        }

        DeskVocabulary {
            nn: Pool::new(nn),
            nns: Pool::new(nns),
            vb: Pool::new(vb),
            vbz: Pool::new(vbz),
            vbd: Pool::new(class_forms(rng, 1500, &["ed"], 20, false)),
            vbn: Pool::new(class_forms(rng, 1200, &["ed", "en"], 20, false)),
            vbg: Pool::new(class_forms(rng, 1200, &["ing"], 15, false)),
            jj: Pool::new(class_forms(rng, 1500, &["ous", "ful", "ive", "al"], 25, false)),
            jjr: Pool::new(class_forms(rng, 400, &["er"], 10, false)),
            jjs: Pool::new(class_forms(rng, 400, &["est"], 10, false)),
            rb: Pool::new(class_forms(rng, 800, &["ly"], 15, false)),
            nnp: Pool::new(class_forms(rng, 1500, &["", "on", "ia"], 25, true)),
            nnps: Pool::new(class_forms(rng, 600, &["s"], 15, true)),
            cd: Pool::new(
                (0..80)
                    .map(|i| match i % 4 {
                        0 => format!("{}", rng.gen_range(2..=9999)),
                        1 => format!("{}.{}", rng.gen_range(0..=99), rng.gen_range(0..=99)),
                        2 => format!("{},{:03}", rng.gen_range(1..=900), rng.gen_range(0..=999)),
                        _ => format!("{}", rng.gen_range(1900..=2100)),
                    })
                    .collect(),
            ),
        }
    }
}

fn closed(tag: &str) -> Option<&'static [&'static str]> {
    Some(match tag {
        "DT" => &["the", "a", "an", "this", "that", "these", "those", "some", "no", "every"],
        "IN" => &["in", "on", "at", "with", "for", "by", "from", "of", "over", "under", "that"],
        "CC" => &["and", "or", "but"],
        "PRP" => &["he", "she", "it", "they", "we", "you"],
        "PRP$" => &["his", "her", "its", "their", "our", "your"],
        "TO" => &["to"],
        "MD" => &["can", "will", "may", "must", "should", "might"],
        "EX" => &["there"],
        _ => return None,
    })
}

/// Generates the desk-scale tagged corpus.
pub fn desk_corpus(spec: &DeskCorpusSpec) -> TaggedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = DeskVocabulary::build(&mut rng);

    let mut sentences = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let template = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
        let mut tokens = Vec::with_capacity(template.len());
        for sym in template {
            let (sym, optional) = match sym.strip_suffix('?') {
                Some(s) => (s, true),
                None => (*sym, false),
            };
            if optional && rng.gen_bool(0.5) {
                continue;
            }
            let choices: Vec<&str> = sym.split('|').collect();
            let sym = choices[rng.gen_range(0..choices.len())];
            let (surface, tag) = emit_token(sym, &vocab, &mut rng, spec);
            tokens.push(Token::new(surface, tag));
        }
        if tokens.is_empty() {
            continue;
        }
        sentences.push(Sentence { tokens });
    }
    TaggedCorpus { sentences }
}

fn emit_token(
    sym: &str,
    vocab: &DeskVocabulary,
    rng: &mut ChaCha8Rng,
    spec: &DeskCorpusSpec,
) -> (String, String) {
    match sym {
        "VBZ:be" => {
            let forms = ["is", "has", "does"];
            (forms[rng.gen_range(0..forms.len())].to_string(), "VBZ".into())
        }
        "VBD:be" => {
            let forms = ["was", "had", "did"];
            (forms[rng.gen_range(0..forms.len())].to_string(), "VBD".into())
        }
        "VBG" => {
            let surface = vocab.vbg.sample(rng).to_string();
            // Gerunds occasionally act as nouns with the same surface.
            let tag = if rng.gen_bool(spec.gerund_noun_rate) { "NN" } else { "VBG" };
            (surface, tag.into())
        }
        "VBZ" => {
            // Mix auxiliary and inflected main verbs.
            if rng.gen_bool(0.15) {
                ("is".into(), "VBZ".into())
            } else {
                (vocab.vbz.sample(rng).to_string(), "VBZ".into())
            }
        }
        "VBD" => {
            if rng.gen_bool(0.15) {
                ("was".into(), "VBD".into())
            } else {
                (vocab.vbd.sample(rng).to_string(), "VBD".into())
            }
        }
        "VBN" => (vocab.vbd.sample(rng).to_string(), "VBN".into()),
        "VB" => (vocab.vb.sample(rng).to_string(), "VB".into()),
        "VBP" => {
            if rng.gen_bool(0.15) {
                ("are".into(), "VBP".into())
            } else {
                (vocab.vb.sample(rng).to_string(), "VBP".into())
            }
        }
        "JJ" => {
            // Participial and -ly adjectives share surfaces with verb and
            // adverb morphology.
            let roll = rng.gen::<f64>();
            if roll < spec.deverbal_adjective_rate {
                let pool = if rng.gen_bool(0.5) { &vocab.vbd } else { &vocab.vbg };
                (pool.sample(rng).to_string(), "JJ".into())
            } else if roll < spec.deverbal_adjective_rate + 0.08 {
                (vocab.rb.sample(rng).to_string(), "JJ".into())
            } else {
                (vocab.jj.sample(rng).to_string(), "JJ".into())
            }
        }
        "NN" => {
            // Agentive -er nouns share surfaces with comparatives.
            if rng.gen_bool(0.10) {
                (vocab.jjr.sample(rng).to_string(), "NN".into())
            } else {
                (vocab.nn.sample(rng).to_string(), "NN".into())
            }
        }
        "NNS" => (vocab.nns.sample(rng).to_string(), "NNS".into()),
        "NNP" => (vocab.nnp.sample(rng).to_string(), "NNP".into()),
        "NNPS" => (vocab.nnps.sample(rng).to_string(), "NNPS".into()),
        "JJR" => (vocab.jjr.sample(rng).to_string(), "JJR".into()),
        "JJS" => (vocab.jjs.sample(rng).to_string(), "JJS".into()),
        "RB" => (vocab.rb.sample(rng).to_string(), "RB".into()),
        "CD" => (vocab.cd.sample(rng).to_string(), "CD".into()),
        closed_tag => {
            let words = closed(closed_tag)
                .unwrap_or_else(|| panic!("template symbol {closed_tag:?} has no pool"));
            (words[rng.gen_range(0..words.len())].to_string(), closed_tag.into())
        }
    }
}

/// Wide-alphabet benchmark corpus: `classes` tags, word types carrying 1 to
/// `max_tags_per_word` tags each, tag sequences from a seeded sparse Markov
/// chain.
#[derive(Debug, Clone)]
pub struct BenchCorpusSpec {
    pub classes: usize,
    pub word_types: usize,
    pub max_tags_per_word: usize,
    pub sentences: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for BenchCorpusSpec {
    fn default() -> Self {
        BenchCorpusSpec {
            classes: 50,
            word_types: 4000,
            max_tags_per_word: 5,
            sentences: 2500,
            min_tokens: 8,
            max_tokens: 14,
            seed: 0xbe7c,
        }
    }
}

pub fn bench_corpus(spec: &BenchCorpusSpec) -> TaggedCorpus {
    assert!(spec.classes >= 2 && spec.word_types >= spec.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tags: Vec<String> = (0..spec.classes).map(|c| format!("c{c:02}")).collect();

    // Word type -> tag set; the first `classes` types cover each tag once.
    let mut type_tags: Vec<Vec<usize>> = Vec::with_capacity(spec.word_types);
    let mut by_tag: Vec<Vec<usize>> = vec![Vec::new(); spec.classes];
    for t in 0..spec.word_types {
        let count = rng.gen_range(1..=spec.max_tags_per_word);
        let mut set = vec![t % spec.classes];
        while set.len() < count {
            let tag = rng.gen_range(0..spec.classes);
            if !set.contains(&tag) {
                set.push(tag);
            }
        }
        for &tag in &set {
            by_tag[tag].push(t);
        }
        type_tags.push(set);
    }

    // Sparse transition structure: each class has a handful of likely
    // successors, so contextual features repeat across many examples.
    let followers: Vec<Vec<usize>> = (0..spec.classes)
        .map(|_| (0..5).map(|_| rng.gen_range(0..spec.classes)).collect())
        .collect();

    let mut sentences = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let len = rng.gen_range(spec.min_tokens..=spec.max_tokens);
        let mut tag = rng.gen_range(0..spec.classes);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            let word_type = by_tag[tag][rng.gen_range(0..by_tag[tag].len())];
            tokens.push(Token::new(format!("w{word_type}"), tags[tag].clone()));
            tag = if rng.gen_bool(0.85) {
                followers[tag][rng.gen_range(0..followers[tag].len())]
            } else {
                rng.gen_range(0..spec.classes)
            };
        }
        sentences.push(Sentence { tokens });
    }
    TaggedCorpus { sentences }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashMap};

    #[test]
    fn desk_corpus_is_deterministic() {
        let spec = DeskCorpusSpec { sentences: 50, ..Default::default() };
        let a = desk_corpus(&spec);
        let b = desk_corpus(&spec);
        assert_eq!(a, b);
        assert_eq!(a.sentences.len(), 50);
    }

    #[test]
    fn desk_corpus_morphology_is_consistent() {
        let spec = DeskCorpusSpec { sentences: 400, ..Default::default() };
        let corpus = desk_corpus(&spec);
        for token in corpus.tokens() {
            let tag = token.tag.as_deref().unwrap();
            match tag {
                "VBG" => assert!(token.surface.ends_with("ing"), "{:?}", token),
                "RB" => assert!(token.surface.ends_with("ly"), "{:?}", token),
                "NNP" | "NNPS" => assert!(
                    token.surface.chars().next().unwrap().is_uppercase(),
                    "{:?}",
                    token
                ),
                "NN" | "NNS" | "VB" | "VBZ" | "DT" | "IN" => assert!(
                    token.surface.chars().next().unwrap().is_lowercase()
                        || token.surface.chars().next().unwrap().is_ascii_digit(),
                    "{:?}",
                    token
                ),
                _ => {}
            }
        }
    }

    #[test]
    fn desk_corpus_contains_ambiguous_surfaces() {
        let spec = DeskCorpusSpec { sentences: 3000, ..Default::default() };
        let corpus = desk_corpus(&spec);
        let mut seen: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for token in corpus.tokens() {
            seen.entry(token.surface.as_str())
                .or_default()
                .insert(token.tag.as_deref().unwrap());
        }
        let ambiguous = seen.values().filter(|tags| tags.len() > 1).count();
        assert!(ambiguous > 20, "only {ambiguous} ambiguous surfaces");
    }

    #[test]
    fn bench_corpus_has_bounded_tag_sets() {
        let spec = BenchCorpusSpec { sentences: 200, ..Default::default() };
        let corpus = bench_corpus(&spec);
        let mut seen: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        let mut tags: BTreeSet<&str> = BTreeSet::new();
        for token in corpus.tokens() {
            let tag = token.tag.as_deref().unwrap();
            tags.insert(tag);
            seen.entry(token.surface.as_str()).or_default().insert(tag);
        }
        assert!(tags.len() > 40, "only {} distinct tags", tags.len());
        let mean: f64 =
            seen.values().map(|t| t.len() as f64).sum::<f64>() / seen.len() as f64;
        assert!(mean <= 5.0, "mean observed tag set {mean}");
    }
}
