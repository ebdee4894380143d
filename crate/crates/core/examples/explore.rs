use seqmodel::eval::{bench_training, evaluate, split_corpus, EvalOptions};
use seqmodel::synth::{bench_corpus, desk_corpus, BenchCorpusSpec, DeskCorpusSpec};
use seqmodel::tagger::{train, FinalClassifier, TaggerConfig, TrainingMode, UnknownRoute};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let corpus = desk_corpus(&DeskCorpusSpec::default());
    println!(
        "desk corpus: {} sentences, {} tokens ({:.2}s)",
        corpus.sentences.len(),
        corpus.token_count(),
        t0.elapsed().as_secs_f64()
    );
    let (train_part, test_part) = split_corpus(&corpus, 0.9, 42);
    println!("split: {} train / {} test", train_part.sentences.len(), test_part.sentences.len());

    let t0 = Instant::now();
    let f3_ova = train(
        &train_part,
        TaggerConfig {
            training_mode: TrainingMode::OneVsAll,
            final_classifier: FinalClassifier::Contextual,
            ..Default::default()
        },
    )
    .unwrap();
    println!(
        "f3 ova trained in {:.2}s (updates {}, mean_active {:.1}, w0 {:.4})",
        t0.elapsed().as_secs_f64(),
        f3_ova.summary().network.total_node_updates,
        f3_ova.summary().mean_active_features,
        f3_ova.network().params().initial_weight,
    );
    let t0 = Instant::now();
    let f3p_ova = train(
        &train_part,
        TaggerConfig {
            training_mode: TrainingMode::OneVsAll,
            final_classifier: FinalClassifier::AllFeatures,
            ..Default::default()
        },
    )
    .unwrap();
    println!("f3p ova trained in {:.2}s", t0.elapsed().as_secs_f64());
    let f3_sm = train(
        &train_part,
        TaggerConfig {
            training_mode: TrainingMode::SmRestricted,
            final_classifier: FinalClassifier::Contextual,
            ..Default::default()
        },
    )
    .unwrap();

    let opts_final = EvalOptions { unknown_route: UnknownRoute::FinalOnly, ..Default::default() };
    let opts_sm = EvalOptions::default();

    let r_f3 = evaluate(&f3_ova, &test_part, &opts_final).unwrap();
    let r_f3p = evaluate(&f3p_ova, &test_part, &opts_final).unwrap();
    let r_sm3 = evaluate(&f3_ova, &test_part, &opts_sm).unwrap();
    let r_sm3p = evaluate(&f3p_ova, &test_part, &opts_sm).unwrap();
    let r_sm_known = evaluate(&f3_sm, &test_part, &opts_sm).unwrap();

    let pct = |o: Option<f64>| o.map(|a| a * 100.0).unwrap_or(f64::NAN);
    println!("unknown tokens: {}", r_f3.unknown.tokens);
    println!(
        "unknown acc: f3={:.2} f3p={:.2} sm(f3)={:.2} sm(f3p)={:.2}",
        pct(r_f3.unknown.accuracy()),
        pct(r_f3p.unknown.accuracy()),
        pct(r_sm3.unknown.accuracy()),
        pct(r_sm3p.unknown.accuracy()),
    );
    println!(
        "known acc: ova={:.3} sm={:.3}",
        pct(r_f3.known.accuracy()),
        pct(r_sm_known.known.accuracy()),
    );
    println!(
        "survival train={} test stages={:?}",
        f3p_ova.filter_survival_rate(&train_part).unwrap(),
        r_sm3p.gold_survival,
    );
    println!("mean cs per stage: {:?}", r_sm3p.stage_mean_cs);

    let t0 = Instant::now();
    let bench = bench_corpus(&BenchCorpusSpec::default());
    println!(
        "bench corpus: {} sentences {} tokens ({:.2}s)",
        bench.sentences.len(),
        bench.token_count(),
        t0.elapsed().as_secs_f64()
    );
    let cfg = TaggerConfig {
        final_classifier: FinalClassifier::Contextual,
        ..Default::default()
    };
    let t0 = Instant::now();
    let comparison = bench_training(&bench, &cfg, 3).unwrap();
    println!("bench ran in {:.2}s", t0.elapsed().as_secs_f64());
    println!("{comparison}");
}
