use seqmodel::eval::split_corpus;
use seqmodel::synth::{desk_corpus, DeskCorpusSpec};
use seqmodel::tagger::{train, FinalClassifier, TaggerConfig, TokenKind, TrainingMode, UnknownRoute, TokenRoute};
use std::collections::BTreeMap;

fn main() {
    let corpus = desk_corpus(&DeskCorpusSpec::default());
    let (tr, te) = split_corpus(&corpus, 0.9, 42);
    let f3p = train(&tr, TaggerConfig {
        training_mode: TrainingMode::OneVsAll,
        final_classifier: FinalClassifier::AllFeatures,
        ..Default::default()
    }).unwrap();
    let mut errors: BTreeMap<(String, String, bool), u32> = BTreeMap::new();
    let mut total = 0u32;
    let mut err_count = 0u32;
    for s in &te.sentences {
        let final_only = f3p.tag_sentence_with(s, UnknownRoute::FinalOnly).unwrap();
        for (tok, tagged) in s.tokens.iter().zip(&final_only) {
            if f3p.token_kind(&tok.surface) != TokenKind::Unknown { continue; }
            total += 1;
            let gold = tok.tag.clone().unwrap();
            if tagged.tag != gold {
                err_count += 1;
                // was the prediction outside the filter survivors?
                let survivors = f3p.filter_survivors(&tok.surface).unwrap();
                let pred_id = f3p.alphabet().id(&tagged.tag).unwrap();
                let outside = !survivors.contains(pred_id);
                *errors.entry((gold, tagged.tag.clone(), outside)).or_insert(0) += 1;
                let _ = &tagged.route;
            }
        }
    }
    println!("unknown={total} errors={err_count}");
    let mut v: Vec<_> = errors.into_iter().collect();
    v.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
    for ((g, p, outside), c) in v.iter().take(25) {
        println!("{c:>4}  gold={g:<5} pred={p:<5} outside_survivors={outside}");
    }
    let _ = TokenRoute::Lexicon { confusion_set: seqmodel::ConfusionSet::singleton(seqmodel::LabelId(0)) };
}
