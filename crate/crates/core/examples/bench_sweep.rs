use seqmodel::eval::bench_training;
use seqmodel::learners::WinnowParams;
use seqmodel::synth::{bench_corpus, BenchCorpusSpec};
use seqmodel::tagger::{FinalClassifier, TaggerConfig};

fn main() {
    for (epochs, w0, beta) in [(1usize, 2.0f64, 0.5f64), (1, 3.0, 0.5), (1, 2.0, 0.3), (2, 2.0, 0.3)] {
        let corpus = bench_corpus(&BenchCorpusSpec::default());
        let cfg = TaggerConfig {
            final_classifier: FinalClassifier::Contextual,
            winnow: WinnowParams { max_epochs: epochs, initial_weight: w0, demotion: beta, ..Default::default() },
            auto_initial_weight: false,
            ..Default::default()
        };
        let c = bench_training(&corpus, &cfg, 1).unwrap();
        println!(
            "epochs={epochs} w0={w0} beta={beta}: ratio={:.4} speedup={:.1} ova={} sm={}",
            c.update_ratio, c.network_speedup, c.one_vs_all.node_updates, c.sm_restricted.node_updates,
        );
    }
}
