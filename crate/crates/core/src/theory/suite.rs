//! Named check runners behind the `verify` command: each runs a family of
//! seeded instances, returns one pass/fail outcome with its numerics, and is
//! also what the acceptance suite calls.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{FeatureId, LabelAlphabet, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution};
use crate::error::Result;
use crate::model::{CombineMode, SequentialModel, Stage, StageClassifier, FULL_VIEW};
use crate::theory::{
    claim1_check, claim2_check, dt_sm_agreement, enumerate_domain, joint_posterior_argmax,
    product_rule_argmax, BinaryDecisionTree, Claim2Task, JointModel, SyntheticSpec,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub seed: u64,
    pub pass: bool,
    /// key=value numerics for the report line.
    pub details: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "check={} seed={} pass={} {}",
            self.name,
            self.seed,
            self.pass,
            self.details
        )
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> SyntheticSpec {
    let m = rng.gen_range(2..=5);
    let n = rng.gen_range(1..=3);
    // Keep the joint domain at or below 4096.
    let mut arities = Vec::with_capacity(n);
    let mut domain = 1usize;
    for _ in 0..n {
        let cap = (4096 / domain).clamp(2, 8);
        let a = rng.gen_range(2..=cap);
        domain *= a;
        arities.push(a);
    }
    SyntheticSpec::random(rng, m, &arities, 0.12)
}

/// Product-rule/joint-posterior equivalence, both as the factored formula
/// and as the assembled pipeline, over seeded random independent specs.
pub fn run_ml_equivalence(seed: u64, specs: usize) -> CheckOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = 0usize;
    let mut formula_mismatches = 0usize;
    let mut pipeline_mismatches = 0usize;
    for _ in 0..specs {
        let spec = random_spec(&mut rng);
        for x in enumerate_domain(spec.arities()) {
            if spec.input_mass(&x) <= 0.0 {
                continue;
            }
            inputs += 1;
            if product_rule_argmax(&spec, &x) != joint_posterior_argmax(&spec, &x) {
                formula_mismatches += 1;
            }
        }
        match crate::theory::sm_equivalence_check(&spec) {
            Ok(report) => pipeline_mismatches += report.mismatches,
            Err(_) => pipeline_mismatches += 1,
        }
    }
    let elapsed = start.elapsed();
    CheckOutcome {
        name: "ml-equivalence",
        seed,
        pass: formula_mismatches == 0 && pipeline_mismatches == 0,
        details: format!(
            "specs={specs} inputs={inputs} formula_mismatches={formula_mismatches} \
             pipeline_mismatches={pipeline_mismatches} secs={:.2}",
            elapsed.as_secs_f64()
        ),
    }
}

/// Nested-set error inequality and the proof decomposition identity over
/// seeded spec/set instances.
pub fn run_claim1(seed: u64, instances: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut worst_gap = 0.0f64;
    for _ in 0..instances {
        let k = rng.gen_range(1..=4);
        let r = rng.gen_range(1..=3);
        let extra = rng.gen_range(0..=1);
        let m = k + r + extra;
        let n = rng.gen_range(1..=2);
        let arities: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=6)).collect();
        let spec = SyntheticSpec::random(&mut rng, m, &arities, 0.1);
        let f: Vec<usize> = (0..spec.domain_size()).map(|_| rng.gen_range(0..k)).collect();
        match claim1_check(&spec, k, r, &f) {
            Ok(report) => {
                if report.error_k > report.error_kprime || report.identity_gap > 1e-12 {
                    violations += 1;
                }
                worst_gap = worst_gap.max(report.identity_gap);
            }
            Err(_) => violations += 1,
        }
    }
    CheckOutcome {
        name: "claim1-range-test",
        seed,
        pass: violations == 0,
        details: format!(
            "instances={instances} violations={violations} worst_identity_gap={worst_gap:.3e}"
        ),
    }
}

/// Training-restriction direction over seeded interference tasks: mean loss
/// of the restricted hypothesis stays at or below the full one.
pub fn run_claim2(seed: u64, trials: usize) -> CheckOutcome {
    let task = Claim2Task::default();
    let mut restricted = 0.0;
    let mut full = 0.0;
    for t in 0..trials as u64 {
        let report = claim2_check(&task, seed.wrapping_add(t));
        restricted += report.restricted_loss;
        full += report.full_loss;
    }
    let restricted = restricted / trials as f64;
    let full = full / trials as f64;
    CheckOutcome {
        name: "claim2-train-restriction",
        seed,
        pass: restricted <= full + 1e-3,
        details: format!(
            "trials={trials} mean_restricted_loss={restricted:.6} mean_full_loss={full:.6}"
        ),
    }
}

/// Tree-to-pipeline conversion: exhaustive prediction agreement and size
/// equality over seeded random trees.
pub fn run_dt_equivalence(seed: u64, trees: usize) -> CheckOutcome {
    let start = Instant::now();
    let labels = ["A", "B", "C", "D", "E", "F"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = 0usize;
    let mut mismatches = 0usize;
    let mut size_violations = 0usize;
    for _ in 0..trees {
        let internal = rng.gen_range(1..=15);
        let bits = rng.gen_range(1..=10);
        let tree = BinaryDecisionTree::random(&mut rng, internal, bits, &labels);
        match dt_sm_agreement(&tree) {
            Ok(report) => {
                inputs += report.inputs;
                mismatches += report.mismatches;
                if report.stage_count != report.internal_nodes {
                    size_violations += 1;
                }
            }
            Err(_) => mismatches += 1,
        }
    }
    let elapsed = start.elapsed();
    CheckOutcome {
        name: "dt-to-sm",
        seed,
        pass: mismatches == 0 && size_violations == 0,
        details: format!(
            "trees={trees} inputs={inputs} mismatches={mismatches} \
             size_violations={size_violations} secs={:.2}",
            elapsed.as_secs_f64()
        ),
    }
}

/// Stage that emits a deterministic pseudo-random sub-distribution of its
/// input set, for structural fuzzing.
struct RandomStage {
    salt: u64,
}

impl StageClassifier for RandomStage {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        let mut h = 0xcbf29ce484222325u64 ^ self.salt;
        for f in x.features() {
            h ^= f.0 as u64 + 0x9e37;
            h = h.wrapping_mul(0x100000001b3);
        }
        for l in cs.iter() {
            h ^= l.0 as u64 + 0x7f4a;
            h = h.wrapping_mul(0x100000001b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let members: Vec<_> = cs.iter().collect();
        let mut weights: Vec<(crate::alphabet::LabelId, f64)> = Vec::with_capacity(members.len());
        for &l in &members {
            if rng.gen_bool(0.7) {
                weights.push((l, rng.gen::<f64>() + 1e-6));
            }
        }
        if weights.is_empty() {
            let pick = members[rng.gen_range(0..members.len())];
            weights.push((pick, 1.0));
        }
        LabelDistribution::from_weights(weights)
    }

    fn kind(&self) -> &'static str {
        "fuzz"
    }
}

/// Monotonicity/non-emptiness fuzzing over random pipelines and inputs:
/// every trace must shrink (or keep) and never empty its candidate set, and
/// every running distribution must stay normalized.
pub fn run_monotonicity_fuzz(seed: u64, cases: usize) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut predictions = 0usize;
    for case in 0..cases {
        let m = rng.gen_range(2..=8);
        let alphabet = Arc::new(
            LabelAlphabet::new((0..m).map(|i| format!("L{i}"))).expect("valid alphabet"),
        );
        let stage_count = rng.gen_range(1..=5);
        let stages: Vec<Stage> = (0..stage_count)
            .map(|s| {
                let epsilon = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.9) };
                Stage::new(
                    Arc::new(RandomStage { salt: seed ^ (case as u64) << 8 ^ s as u64 }),
                    epsilon,
                    FULL_VIEW,
                )
            })
            .collect();
        let combine =
            if case % 2 == 0 { CombineMode::Product } else { CombineMode::Replace };
        let model = SequentialModel::new(alphabet, stages, combine);
        let x = SparseExample::new(
            (0..rng.gen_range(0..6)).map(|_| FeatureId(rng.gen_range(0..64))),
        );
        match model.predict(&x) {
            Ok(trace) => {
                predictions += 1;
                let mut prev_len = m;
                for rec in &trace.stages {
                    if rec.survivors.is_empty()
                        || !rec.survivors.is_subset_of(&rec.input)
                        || rec.input.len() > prev_len
                        || (rec.emitted.sum() - 1.0).abs() > 1e-9
                    {
                        violations += 1;
                        break;
                    }
                    prev_len = rec.survivors.len();
                }
                if !trace.stages.last().expect("at least one stage").survivors.contains(trace.final_label)
                {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    CheckOutcome {
        name: "sm-monotonicity-fuzz",
        seed,
        pass: violations == 0,
        details: format!("cases={cases} predictions={predictions} violations={violations}"),
    }
}

/// The full battery at the standard sizes.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        run_ml_equivalence(seed, 100),
        run_claim1(seed, 200),
        run_claim2(seed, 50),
        run_dt_equivalence(seed, 100),
        run_monotonicity_fuzz(seed, 10_000),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        assert!(run_ml_equivalence(7, 10).pass);
        assert!(run_claim1(7, 20).pass);
        assert!(run_claim2(7, 5).pass);
        assert!(run_dt_equivalence(7, 10).pass);
        assert!(run_monotonicity_fuzz(7, 500).pass);
    }

    #[test]
    fn outcome_lines_are_machine_readable() {
        let outcome = run_claim1(3, 5);
        let line = outcome.line();
        assert!(line.starts_with("check=claim1-range-test seed=3 pass="));
        assert!(line.contains("instances=5"));
    }
}
