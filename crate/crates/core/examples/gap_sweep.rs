use seqmodel::eval::{evaluate, split_corpus, EvalOptions};
use seqmodel::synth::{desk_corpus, DeskCorpusSpec};
use seqmodel::tagger::{train, FinalClassifier, TaggerConfig, TrainingMode, UnknownRoute};

fn main() {
    for split_seed in [42u64, 7, 99] {
        for corpus_seed in [0xd35c_u64, 1, 2] {
            let corpus = desk_corpus(&DeskCorpusSpec { seed: corpus_seed, ..Default::default() });
            let (tr, te) = split_corpus(&corpus, 0.9, split_seed);
            let f3p = train(
                &tr,
                TaggerConfig {
                    training_mode: TrainingMode::OneVsAll,
                    final_classifier: FinalClassifier::AllFeatures,
                    ..Default::default()
                },
            )
            .unwrap();
            let f3 = train(
                &tr,
                TaggerConfig {
                    training_mode: TrainingMode::OneVsAll,
                    final_classifier: FinalClassifier::Contextual,
                    ..Default::default()
                },
            )
            .unwrap();
            let only = EvalOptions { unknown_route: UnknownRoute::FinalOnly, ..Default::default() };
            let pipe = EvalOptions::default();
            let a_f3 = evaluate(&f3, &te, &only).unwrap().unknown;
            let a_f3p = evaluate(&f3p, &te, &only).unwrap().unknown;
            let a_sm = evaluate(&f3p, &te, &pipe).unwrap().unknown;
            let pct = |b: seqmodel::eval::Bucket| b.accuracy().unwrap() * 100.0;
            println!(
                "split={split_seed} corpus={corpus_seed:#x}: n={} f3={:.2} f3p={:.2} sm={:.2} gap_sm={:.2} gap_f3p={:.2}",
                a_f3.tokens, pct(a_f3), pct(a_f3p), pct(a_sm),
                pct(a_sm) - pct(a_f3p), pct(a_f3p) - pct(a_f3),
            );
        }
    }
}
