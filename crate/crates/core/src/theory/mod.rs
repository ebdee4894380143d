//! Desk-scale, exhaustive verification of the mathematics behind the
//! pipeline: the product-rule/joint-posterior equivalence under conditional
//! independence, the nested-confusion-set error inequality and its proof
//! decomposition, the training-restriction claim, and the decision-tree
//! conversion.

mod dt;
pub mod suite;

pub use dt::{dt_sm_agreement, dt_to_sm, BinaryDecisionTree, DtAgreementReport, DtChild, DtNode};

use std::sync::Arc;

use rand::Rng;

use crate::alphabet::{FeatureId, LabelAlphabet, LabelId, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution};
use crate::error::{Result, SmError};
use crate::learners::{FeatureInterner, SnowNetwork, TrainExample, WinnowParams};
use crate::model::{CombineMode, SequentialModel, Stage, StageClassifier, FULL_VIEW};

/// Anything that defines a joint distribution p(c, x) over a class variable
/// and a tuple of categorical feature blocks.
pub trait JointModel {
    fn class_count(&self) -> usize;
    fn arities(&self) -> &[usize];
    /// Marginal class probability p(c).
    fn prior(&self, c: usize) -> f64;
    /// Joint mass p(c, x).
    fn joint_score(&self, c: usize, x: &[usize]) -> f64;
    /// Per-block posterior p(c | x^k = v) over all classes.
    fn block_posterior(&self, k: usize, v: usize) -> Vec<f64>;

    fn domain_size(&self) -> usize {
        self.arities().iter().product()
    }

    /// Input marginal p(x).
    fn input_mass(&self, x: &[usize]) -> f64 {
        (0..self.class_count()).map(|c| self.joint_score(c, x)).sum()
    }
}

/// Iterates the full joint feature domain in odometer order.
pub fn enumerate_domain(arities: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = arities.iter().product();
    (0..total).map(move |mut idx| {
        let mut x = vec![0; arities.len()];
        for (k, &a) in arities.iter().enumerate().rev() {
            x[k] = idx % a;
            idx /= a;
        }
        x
    })
}

/// Flattened index of one domain value, inverse of [`enumerate_domain`].
pub fn domain_index(arities: &[usize], x: &[usize]) -> usize {
    let mut idx = 0;
    for (k, &a) in arities.iter().enumerate() {
        idx = idx * a + x[k];
    }
    idx
}

fn argmax_over(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (c, s) in scores.enumerate() {
        if s > best.1 {
            best = (c, s);
        }
    }
    best.0
}

/// A class prior plus per-block conditionals, with the blocks conditionally
/// independent given the class by construction.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    prior: Vec<f64>,
    /// conditionals[k][c][v] = p(x^k = v | c)
    conditionals: Vec<Vec<Vec<f64>>>,
    arities: Vec<usize>,
}

impl SyntheticSpec {
    pub fn new(prior: Vec<f64>, conditionals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        const TOL: f64 = 1e-9;
        let m = prior.len();
        if m < 2 {
            return Err(SmError::InvalidInput("need at least 2 classes".into()));
        }
        if (prior.iter().sum::<f64>() - 1.0).abs() > TOL || prior.iter().any(|p| *p < 0.0) {
            return Err(SmError::InvalidInput("prior must be a distribution".into()));
        }
        if conditionals.is_empty() {
            return Err(SmError::InvalidInput("need at least one feature block".into()));
        }
        let mut arities = Vec::with_capacity(conditionals.len());
        for (k, block) in conditionals.iter().enumerate() {
            if block.len() != m {
                return Err(SmError::InvalidInput(format!(
                    "block {k} has {} class rows, expected {m}",
                    block.len()
                )));
            }
            let arity = block[0].len();
            if arity == 0 {
                return Err(SmError::InvalidInput(format!("block {k} has arity 0")));
            }
            for (c, row) in block.iter().enumerate() {
                if row.len() != arity {
                    return Err(SmError::InvalidInput(format!(
                        "block {k} row {c} has inconsistent arity"
                    )));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > TOL || row.iter().any(|p| *p < 0.0) {
                    return Err(SmError::InvalidInput(format!(
                        "block {k} row {c} is not a distribution"
                    )));
                }
            }
            arities.push(arity);
        }
        let domain: usize = arities.iter().product();
        if domain > 1_000_000 {
            return Err(SmError::InvalidInput(format!("joint domain {domain} too large")));
        }
        Ok(SyntheticSpec { prior, conditionals, arities })
    }

    /// Seeded random spec: `m` classes, `n` blocks with the given arities.
    /// A fraction of conditional cells is zeroed to exercise sparse
    /// posteriors; rows are renormalized afterwards.
    pub fn random<R: Rng>(
        rng: &mut R,
        m: usize,
        arities: &[usize],
        zero_fraction: f64,
    ) -> SyntheticSpec {
        let prior = random_distribution(rng, m, 0.0);
        let conditionals = arities
            .iter()
            .map(|&a| (0..m).map(|_| random_distribution(rng, a, zero_fraction)).collect())
            .collect();
        SyntheticSpec::new(prior, conditionals).expect("generated spec is valid")
    }
}

fn random_distribution<R: Rng>(rng: &mut R, n: usize, zero_fraction: f64) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..n)
            .map(|_| {
                if zero_fraction > 0.0 && rng.gen::<f64>() < zero_fraction {
                    0.0
                } else {
                    rng.gen::<f64>() + 1e-3
                }
            })
            .collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
            return row;
        }
    }
}

impl JointModel for SyntheticSpec {
    fn class_count(&self) -> usize {
        self.prior.len()
    }

    fn arities(&self) -> &[usize] {
        &self.arities
    }

    fn prior(&self, c: usize) -> f64 {
        self.prior[c]
    }

    fn joint_score(&self, c: usize, x: &[usize]) -> f64 {
        let mut score = self.prior[c];
        for (k, &v) in x.iter().enumerate() {
            score *= self.conditionals[k][c][v];
        }
        score
    }

    fn block_posterior(&self, k: usize, v: usize) -> Vec<f64> {
        let joint: Vec<f64> =
            (0..self.prior.len()).map(|c| self.prior[c] * self.conditionals[k][c][v]).collect();
        let mass: f64 = joint.iter().sum();
        if mass > 0.0 {
            joint.into_iter().map(|j| j / mass).collect()
        } else {
            joint
        }
    }
}

/// An explicit joint table p(c, x); the general case, with no independence
/// structure assumed. Block posteriors come from marginalization.
#[derive(Debug, Clone)]
pub struct JointTable {
    classes: usize,
    arities: Vec<usize>,
    /// probs[c * domain + index(x)]
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(classes: usize, arities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let domain: usize = arities.iter().product();
        if classes < 2 {
            return Err(SmError::InvalidInput("need at least 2 classes".into()));
        }
        if probs.len() != classes * domain {
            return Err(SmError::InvalidInput(format!(
                "table has {} cells, expected {}",
                probs.len(),
                classes * domain
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 || probs.iter().any(|p| *p < 0.0) {
            return Err(SmError::InvalidInput("joint table must be a distribution".into()));
        }
        Ok(JointTable { classes, arities, probs })
    }

    pub fn from_spec(spec: &SyntheticSpec) -> Self {
        let arities = spec.arities().to_vec();
        let domain: usize = arities.iter().product();
        let classes = spec.class_count();
        let mut probs = vec![0.0; classes * domain];
        for x in enumerate_domain(&arities) {
            let idx = domain_index(&arities, &x);
            for c in 0..classes {
                probs[c * domain + idx] = spec.joint_score(c, &x);
            }
        }
        JointTable { classes, arities, probs }
    }
}

impl JointModel for JointTable {
    fn class_count(&self) -> usize {
        self.classes
    }

    fn arities(&self) -> &[usize] {
        &self.arities
    }

    fn prior(&self, c: usize) -> f64 {
        let domain = self.domain_size();
        self.probs[c * domain..(c + 1) * domain].iter().sum()
    }

    fn joint_score(&self, c: usize, x: &[usize]) -> f64 {
        self.probs[c * self.domain_size() + domain_index(&self.arities, x)]
    }

    fn block_posterior(&self, k: usize, v: usize) -> Vec<f64> {
        let mut joint = vec![0.0; self.classes];
        for x in enumerate_domain(&self.arities) {
            if x[k] == v {
                for (c, slot) in joint.iter_mut().enumerate() {
                    *slot += self.joint_score(c, &x);
                }
            }
        }
        let mass: f64 = joint.iter().sum();
        if mass > 0.0 {
            joint.into_iter().map(|j| j / mass).collect()
        } else {
            joint
        }
    }
}

/// Bayes-optimal label: argmax over classes of p(c) * p(x | c), ties broken
/// by lowest class id.
pub fn joint_posterior_argmax(model: &impl JointModel, x: &[usize]) -> usize {
    argmax_over((0..model.class_count()).map(|c| model.joint_score(c, x)))
}

/// Label chosen by the factored rule: the product over blocks of the
/// per-block posteriors, divided by the prior raised to N-1.
pub fn product_rule_argmax(model: &impl JointModel, x: &[usize]) -> usize {
    let n = model.arities().len();
    let m = model.class_count();
    let posteriors: Vec<Vec<f64>> =
        (0..n).map(|k| model.block_posterior(k, x[k])).collect();
    let scores = (0..m).map(|c| {
        let prior = model.prior(c);
        if prior <= 0.0 {
            return 0.0;
        }
        let mut score = 1.0;
        for p in &posteriors {
            score *= p[c];
        }
        score / prior.powi(n as i32 - 1)
    });
    argmax_over(scores)
}

/// Stage classifier emitting the fixed per-block posterior for whichever
/// block value is active in the example encoding.
struct BlockStage {
    offset: u32,
    arity: usize,
    /// posterior[v][c]
    posterior: Vec<Vec<f64>>,
}

impl StageClassifier for BlockStage {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        let value = x
            .features()
            .iter()
            .find_map(|f| {
                let raw = f.0;
                (raw >= self.offset && raw < self.offset + self.arity as u32)
                    .then(|| (raw - self.offset) as usize)
            })
            .ok_or_else(|| SmError::InvalidInput("no active value for this block".into()))?;
        let row = &self.posterior[value];
        LabelDistribution::from_weights(cs.iter().map(|c| (c, row[c.idx()])))
    }

    fn kind(&self) -> &'static str {
        "block-posterior"
    }
}

/// Final stage dividing by p(c)^(N-1): emits weights proportional to the
/// inverse prior power over the surviving labels.
struct PriorCorrectionStage {
    inverse_power: Vec<f64>,
}

impl StageClassifier for PriorCorrectionStage {
    fn emit(&self, _x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        LabelDistribution::from_weights(cs.iter().map(|c| (c, self.inverse_power[c.idx()])))
    }

    fn kind(&self) -> &'static str {
        "prior-correction"
    }
}

/// Encodes a joint-domain point as a sparse example: one active feature per
/// block, id = block offset + value.
pub fn encode_domain_point(arities: &[usize], x: &[usize]) -> SparseExample {
    let mut features = Vec::with_capacity(x.len());
    let mut offset = 0u32;
    for (k, &a) in arities.iter().enumerate() {
        features.push(FeatureId(offset + x[k] as u32));
        offset += a as u32;
    }
    SparseExample::new(features)
}

/// Builds the product pipeline for a joint model: one stage per block
/// emitting that block's posterior, plus a final prior-correction stage, all
/// thresholds 0, product combining.
pub fn build_product_pipeline(model: &impl JointModel) -> Result<SequentialModel> {
    let m = model.class_count();
    let n = model.arities().len();
    let alphabet =
        Arc::new(LabelAlphabet::new((0..m).map(|c| format!("c{c}")))?);
    let mut stages = Vec::with_capacity(n + 1);
    let mut offset = 0u32;
    for (k, &arity) in model.arities().iter().enumerate() {
        let posterior: Vec<Vec<f64>> =
            (0..arity).map(|v| model.block_posterior(k, v)).collect();
        stages.push(Stage::new(
            Arc::new(BlockStage { offset, arity, posterior }),
            0.0,
            FULL_VIEW,
        ));
        offset += arity as u32;
    }
    let inverse_power: Vec<f64> = (0..m)
        .map(|c| {
            let p = model.prior(c);
            if p > 0.0 {
                p.powi(-(n as i32 - 1))
            } else {
                0.0
            }
        })
        .collect();
    stages.push(Stage::new(Arc::new(PriorCorrectionStage { inverse_power }), 0.0, FULL_VIEW));
    Ok(SequentialModel::new(alphabet, stages, CombineMode::Product))
}

#[derive(Debug, Clone, Default)]
pub struct EquivalenceReport {
    /// Domain points with positive mass that were compared.
    pub inputs: usize,
    /// Domain points skipped because p(x) = 0.
    pub skipped_zero_mass: usize,
    pub mismatches: usize,
}

/// Runs the assembled pipeline over every positive-mass input and counts
/// disagreements with the exact joint-posterior argmax. Zero for every
/// conditionally independent model; dependent joints may disagree.
pub fn sm_equivalence_check(model: &impl JointModel) -> Result<EquivalenceReport> {
    let pipeline = build_product_pipeline(model)?;
    let mut report = EquivalenceReport::default();
    for x in enumerate_domain(model.arities()) {
        if model.input_mass(&x) <= 0.0 {
            report.skipped_zero_mass += 1;
            continue;
        }
        let expected = joint_posterior_argmax(model, &x);
        let trace = pipeline.predict(&encode_domain_point(model.arities(), &x))?;
        report.inputs += 1;
        if trace.final_label.idx() != expected {
            report.mismatches += 1;
        }
    }
    Ok(report)
}

/// Exact expected errors for nested candidate sets `K = {0..k}` and
/// `K' = {0..k+r}` against a true labeling `f` (indexed by flattened domain
/// point, values inside K).
#[derive(Debug, Clone)]
pub struct NestedSetErrorReport {
    pub error_k: f64,
    pub error_kprime: f64,
    /// Mass where the K-argmax is correct but a distractor from K'\K wins.
    pub residual: f64,
    /// residual / (1 - error_k); 0 when the K-argmax is never correct.
    pub pe_conditional: f64,
    /// |error_kprime - (error_k + residual)|; the proof decomposition.
    pub identity_gap: f64,
}

pub fn claim1_check(
    model: &impl JointModel,
    k: usize,
    r: usize,
    f: &[usize],
) -> Result<NestedSetErrorReport> {
    let m = model.class_count();
    if k == 0 || k + r > m {
        return Err(SmError::InvalidInput(format!("need 1 <= k and k+r <= {m}, got k={k} r={r}")));
    }
    if f.len() != model.domain_size() {
        return Err(SmError::InvalidInput(format!(
            "labeling covers {} points, domain has {}",
            f.len(),
            model.domain_size()
        )));
    }
    if f.iter().any(|&c| c >= k) {
        return Err(SmError::InvalidInput("true labeling must map into K".into()));
    }

    let arities = model.arities();
    let mut error_k = 0.0;
    let mut error_kprime = 0.0;
    let mut residual = 0.0;
    for x in enumerate_domain(arities) {
        let mass = model.input_mass(&x);
        if mass <= 0.0 {
            continue;
        }
        let truth = f[domain_index(arities, &x)];
        let scores: Vec<f64> = (0..k + r).map(|c| model.joint_score(c, &x)).collect();
        let argmax_k = argmax_over(scores.iter().copied().take(k));
        let argmax_kprime = argmax_over(scores.iter().copied());
        let wrong_k = argmax_k != truth;
        if wrong_k {
            error_k += mass;
        }
        if argmax_kprime != truth {
            error_kprime += mass;
        }
        if !wrong_k && argmax_kprime >= k {
            residual += mass;
        }
    }
    let pe_conditional = if error_k < 1.0 { residual / (1.0 - error_k) } else { 0.0 };
    let identity_gap = (error_kprime - (error_k + residual)).abs();
    Ok(NestedSetErrorReport { error_k, error_kprime, residual, pe_conditional, identity_gap })
}

/// Generator for the 2-vs-3-class training-restriction experiment. Classes
/// c0 and c1 live on disjoint feature pools; c2's examples overlap c0's pool,
/// so one-vs-all training lets c2 interfere with the c0 node.
#[derive(Debug, Clone)]
pub struct Claim2Task {
    pub pool_size: usize,
    /// Active features drawn per example.
    pub active_per_example: usize,
    /// How many of c2's active features come from c0's pool.
    pub overlap: usize,
    pub train_per_class: usize,
    /// Size of the third class's training set; 0 reproduces identical
    /// training for both hypotheses.
    pub s3_size: usize,
    pub test_per_class: usize,
}

impl Default for Claim2Task {
    fn default() -> Self {
        Claim2Task {
            pool_size: 12,
            active_per_example: 4,
            overlap: 3,
            train_per_class: 60,
            s3_size: 60,
            test_per_class: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Claim2Report {
    /// Squared loss of the hypothesis trained without the third class.
    pub restricted_loss: f64,
    /// Squared loss of the hypothesis trained with it.
    pub full_loss: f64,
    pub restricted_01: f64,
    pub full_01: f64,
    pub seed: u64,
}

pub fn claim2_check(task: &Claim2Task, seed: u64) -> Claim2Report {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = task.pool_size;

    let draw = |rng: &mut rand_chacha::ChaCha8Rng, class: usize| -> SparseExample {
        let mut features = Vec::with_capacity(task.active_per_example + 1);
        for slot in 0..task.active_per_example {
            let pool_base = match class {
                0 => 0,
                1 => p,
                // The interfering class draws its first `overlap` features
                // from c0's territory.
                _ if slot < task.overlap => 0,
                _ => 2 * p,
            };
            features.push(FeatureId((pool_base + rng.gen_range(0..p)) as u32));
        }
        // One shared noise feature.
        features.push(FeatureId((3 * p + rng.gen_range(0..4)) as u32));
        SparseExample::new(features)
    };

    let s1: Vec<SparseExample> = (0..task.train_per_class).map(|_| draw(&mut rng, 0)).collect();
    let s2: Vec<SparseExample> = (0..task.train_per_class).map(|_| draw(&mut rng, 1)).collect();
    let s3: Vec<SparseExample> = (0..task.s3_size).map(|_| draw(&mut rng, 2)).collect();
    let test: Vec<(SparseExample, usize)> = (0..task.test_per_class)
        .flat_map(|_| [0usize, 1usize])
        .map(|c| (draw(&mut rng, c), c))
        .collect();

    let alphabet = Arc::new(
        LabelAlphabet::new(["c1", "c2", "c3"]).expect("fixed alphabet"),
    );
    let pair = ConfusionSet::new([LabelId(0), LabelId(1)]).expect("non-empty");
    let triple = ConfusionSet::full(&alphabet);

    // Round-robin stream so both hypotheses see S1 and S2 in the same order.
    let mut restricted_stream = Vec::new();
    let mut full_stream = Vec::new();
    for i in 0..task.train_per_class.max(task.s3_size) {
        if i < task.train_per_class {
            for (class, pool) in [(0u32, &s1), (1u32, &s2)] {
                restricted_stream.push(TrainExample {
                    x: pool[i].clone(),
                    gold: LabelId(class),
                    cs: pair.clone(),
                });
                full_stream.push(TrainExample {
                    x: pool[i].clone(),
                    gold: LabelId(class),
                    cs: triple.clone(),
                });
            }
        }
        if i < task.s3_size {
            full_stream.push(TrainExample { x: s3[i].clone(), gold: LabelId(2), cs: triple.clone() });
        }
    }

    let params = WinnowParams { max_epochs: 3, ..Default::default() };
    let interner = Arc::new(FeatureInterner::new());
    let mut restricted = SnowNetwork::new(alphabet.clone(), params.clone(), interner.clone());
    crate::learners::train_epochs(&mut restricted, &restricted_stream);
    let mut full = SnowNetwork::new(alphabet, params, interner);
    crate::learners::train_epochs(&mut full, &full_stream);

    let eval = |net: &SnowNetwork| -> (f64, f64) {
        let mut sq = 0.0;
        let mut wrong = 0.0;
        for (x, gold) in &test {
            let dist = net.predict(x, &pair).expect("valid confusion set");
            let margin = dist.get(LabelId(0)) - dist.get(LabelId(1));
            let y = if *gold == 0 { 1.0 } else { -1.0 };
            sq += (1.0 - y * margin).powi(2);
            if dist.argmax().idx() != *gold {
                wrong += 1.0;
            }
        }
        let n = test.len() as f64;
        (sq / n, wrong / n)
    };
    let (restricted_loss, restricted_01) = eval(&restricted);
    let (full_loss, full_01) = eval(&full);
    Claim2Report { restricted_loss, full_loss, restricted_01, full_01, seed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_spec() -> SyntheticSpec {
        // 3 classes, 2 blocks, uniform prior, distinct conditionals.
        SyntheticSpec::new(
            vec![1.0 / 3.0; 3],
            vec![
                vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]],
                vec![vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2], vec![0.3, 0.1, 0.6]],
            ],
        )
        .unwrap()
    }

    /// Brute-force oracle: builds the full joint table and reads the argmax
    /// off the row, independently of the model's factored scoring path.
    fn brute_force_argmax(spec: &SyntheticSpec, x: &[usize]) -> usize {
        let table = JointTable::from_spec(spec);
        let mut best = (0usize, f64::NEG_INFINITY);
        for c in 0..table.class_count() {
            let s = table.joint_score(c, x);
            if s > best.1 {
                best = (c, s);
            }
        }
        best.0
    }

    #[test]
    fn joint_argmax_full_tie_goes_to_lowest_class() {
        let spec = SyntheticSpec::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
        )
        .unwrap();
        assert_eq!(joint_posterior_argmax(&spec, &[0]), 0);
        assert_eq!(joint_posterior_argmax(&spec, &[1]), 0);
    }

    #[test]
    fn joint_argmax_dominant_block_wins() {
        let spec = SyntheticSpec::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.9, 0.1], vec![0.1, 0.9]]],
        )
        .unwrap();
        assert_eq!(joint_posterior_argmax(&spec, &[0]), 0);
        assert_eq!(joint_posterior_argmax(&spec, &[1]), 1);
    }

    #[test]
    fn joint_argmax_matches_brute_force_enumeration() {
        let spec = uniform_spec();
        for x in enumerate_domain(spec.arities()) {
            assert_eq!(joint_posterior_argmax(&spec, &x), brute_force_argmax(&spec, &x));
        }
    }

    #[test]
    fn product_rule_equals_joint_argmax_on_random_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let m = rng.gen_range(2..=5);
            let n = rng.gen_range(1..=3);
            let arities: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=6)).collect();
            let spec = SyntheticSpec::random(&mut rng, m, &arities, 0.15);
            for x in enumerate_domain(spec.arities()) {
                if spec.input_mass(&x) <= 0.0 {
                    continue;
                }
                assert_eq!(
                    product_rule_argmax(&spec, &x),
                    joint_posterior_argmax(&spec, &x),
                );
            }
        }
    }

    #[test]
    fn product_rule_single_block_reduces_to_posterior_argmax() {
        let spec = SyntheticSpec::new(
            vec![0.3, 0.7],
            vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]]],
        )
        .unwrap();
        for x in [[0], [1]] {
            assert_eq!(product_rule_argmax(&spec, &x), joint_posterior_argmax(&spec, &x));
        }
    }

    #[test]
    fn pipeline_equivalence_on_uniform_prior_three_stage_model() {
        // With a uniform prior the correction stage is inert and the bare
        // three-stage product already matches the joint argmax.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = SyntheticSpec::random(&mut rng, 4, &[2, 3, 2], 0.0);
        let report = sm_equivalence_check(&spec).unwrap();
        assert_eq!(report.mismatches, 0);
        assert_eq!(report.inputs + report.skipped_zero_mass, 12);
    }

    #[test]
    fn pipeline_equivalence_with_degenerate_prior() {
        let spec = SyntheticSpec::new(
            vec![1.0, 0.0],
            vec![vec![vec![0.5, 0.5], vec![0.9, 0.1]]],
        )
        .unwrap();
        let report = sm_equivalence_check(&spec).unwrap();
        assert_eq!(report.mismatches, 0);
    }

    #[test]
    fn dependent_joint_is_reported_not_hidden() {
        // XOR-shaped dependence: block posteriors are uninformative but the
        // joint is deterministic given both blocks.
        let mut probs = vec![0.0; 2 * 4];
        // p(c=0, x=(0,0)) = p(c=0, x=(1,1)) = 0.25
        probs[0] = 0.25;
        probs[3] = 0.25;
        // p(c=1, x=(0,1)) = p(c=1, x=(1,0)) = 0.25
        probs[4 + 1] = 0.25;
        probs[4 + 2] = 0.25;
        let joint = JointTable::new(2, vec![2, 2], probs).unwrap();
        let report = sm_equivalence_check(&joint).unwrap();
        assert!(report.mismatches > 0, "XOR dependence must break the product rule");
    }

    #[test]
    fn claim1_equal_sets_have_equal_error() {
        let spec = uniform_spec();
        let f: Vec<usize> = enumerate_domain(spec.arities())
            .map(|x| domain_index(spec.arities(), &x) % 2)
            .collect();
        let report = claim1_check(&spec, 2, 0, &f).unwrap();
        assert_eq!(report.error_k, report.error_kprime);
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn claim1_inequality_and_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let k = rng.gen_range(1..=4);
            let r = rng.gen_range(1..=3);
            let m = k + r + rng.gen_range(0..=1);
            let n = rng.gen_range(1..=2);
            let arities: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=5)).collect();
            let spec = SyntheticSpec::random(&mut rng, m, &arities, 0.1);
            let f: Vec<usize> =
                (0..spec.domain_size()).map(|_| rng.gen_range(0..k)).collect();
            let report = claim1_check(&spec, k, r, &f).unwrap();
            assert!(report.error_k <= report.error_kprime);
            assert!(report.identity_gap <= 1e-12, "gap {}", report.identity_gap);
        }
    }

    #[test]
    fn claim1_negligible_distractors_add_negligible_error() {
        // Distractor class 2 has near-zero posterior everywhere.
        let spec = SyntheticSpec::new(
            vec![0.4999995, 0.4999995, 1e-6],
            vec![vec![vec![0.8, 0.2], vec![0.3, 0.7], vec![0.5, 0.5]]],
        )
        .unwrap();
        let f = vec![0usize, 1];
        let report = claim1_check(&spec, 2, 1, &f).unwrap();
        assert!(report.residual < 1e-5);
        assert!((report.error_kprime - report.error_k).abs() < 1e-5);
    }

    #[test]
    fn claim1_rejects_truth_outside_k() {
        let spec = uniform_spec();
        let f = vec![2usize; spec.domain_size()];
        assert!(claim1_check(&spec, 2, 1, &f).is_err());
    }

    // Relaxed one-sided error: forcing filter mistakes on correctly-decided
    // inputs with total mass at most the residual never pushes the total
    // error past Error_K'.
    #[test]
    fn claim1_relaxed_filter_error_stays_below_kprime() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let k = rng.gen_range(1..=3);
            let r = rng.gen_range(1..=2);
            let arities = vec![rng.gen_range(2..=4), rng.gen_range(2..=4)];
            let spec = SyntheticSpec::random(&mut rng, k + r, &arities, 0.0);
            let f: Vec<usize> =
                (0..spec.domain_size()).map(|_| rng.gen_range(0..k)).collect();
            let report = claim1_check(&spec, k, r, &f).unwrap();
            let budget = report.residual;

            // Greedily pick correctly-decided inputs whose mass fits the
            // budget and assume the filter drops the truth there (forced
            // error).
            let mut injected = 0.0;
            let mut total_error = report.error_k;
            for x in enumerate_domain(spec.arities()) {
                let mass = spec.input_mass(&x);
                if mass <= 0.0 {
                    continue;
                }
                let truth = f[domain_index(spec.arities(), &x)];
                let scores: Vec<f64> = (0..k).map(|c| spec.joint_score(c, &x)).collect();
                let correct = argmax_over(scores.into_iter()) == truth;
                if correct && injected + mass <= budget {
                    injected += mass;
                    total_error += mass;
                }
            }
            assert!(
                total_error <= report.error_kprime + 1e-12,
                "total {} vs kprime {}",
                total_error,
                report.error_kprime
            );
        }
    }

    #[test]
    fn claim2_empty_third_class_gives_identical_losses() {
        let task = Claim2Task { s3_size: 0, ..Default::default() };
        let report = claim2_check(&task, 3);
        assert_eq!(report.restricted_loss, report.full_loss);
        assert_eq!(report.restricted_01, report.full_01);
    }

    #[test]
    fn claim2_adversarial_interference_hurts_the_full_hypothesis() {
        let task = Claim2Task { overlap: 4, s3_size: 120, ..Default::default() };
        let report = claim2_check(&task, 9);
        assert!(
            report.restricted_loss < report.full_loss,
            "restricted {} vs full {}",
            report.restricted_loss,
            report.full_loss
        );
    }

    #[test]
    fn claim2_mean_over_seeds_favors_restricted_training() {
        let task = Claim2Task::default();
        let mut restricted = 0.0;
        let mut full = 0.0;
        for seed in 0..50 {
            let report = claim2_check(&task, seed);
            restricted += report.restricted_loss;
            full += report.full_loss;
        }
        restricted /= 50.0;
        full /= 50.0;
        assert!(restricted <= full + 1e-3, "restricted {restricted} vs full {full}");
    }
}
