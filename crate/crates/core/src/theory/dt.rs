//! Binary decision trees over input bits, and their conversion into an
//! equivalent pipeline: one stage per internal node, parents ordered before
//! children, each stage filtering the label set to its taken subtree when the
//! node lies on the input's root-to-leaf path and passing through otherwise.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::sync::Arc;

use rand::Rng;

use crate::alphabet::{FeatureId, LabelAlphabet, LabelId, SparseExample};
use crate::distribution::{ConfusionSet, LabelDistribution};
use crate::error::{Result, SmError};
use crate::model::{CombineMode, SequentialModel, Stage, StageClassifier, FULL_VIEW};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DtChild {
    Node(usize),
    Leaf(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtNode {
    pub id: usize,
    /// Input bit examined at this node: 0 goes left, 1 goes right.
    pub query: usize,
    pub left: DtChild,
    pub right: DtChild,
}

/// A well-formed binary decision tree. The root is the first node supplied;
/// every node is reachable from it exactly once.
#[derive(Debug, Clone)]
pub struct BinaryDecisionTree {
    nodes: Vec<DtNode>,
    index: HashMap<usize, usize>,
    root: usize,
}

impl BinaryDecisionTree {
    pub fn new(nodes: Vec<DtNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(SmError::InvalidInput("tree needs at least one internal node".into()));
        }
        let mut index = HashMap::new();
        for (pos, node) in nodes.iter().enumerate() {
            if index.insert(node.id, pos).is_some() {
                return Err(SmError::InvalidInput(format!("duplicate node id {}", node.id)));
            }
        }
        let root = nodes[0].id;
        let tree = BinaryDecisionTree { nodes, index, root };

        // Each node must be referenced as a child exactly once (except the
        // root: never), which rules out cycles, sharing and unreachable
        // nodes in one sweep.
        let mut referenced: HashMap<usize, usize> = HashMap::new();
        for node in &tree.nodes {
            for child in [&node.left, &node.right] {
                if let DtChild::Node(id) = child {
                    if !tree.index.contains_key(id) {
                        return Err(SmError::InvalidInput(format!(
                            "node {} references undeclared child {id}",
                            node.id
                        )));
                    }
                    *referenced.entry(*id).or_insert(0) += 1;
                }
            }
        }
        if referenced.contains_key(&root) {
            return Err(SmError::InvalidInput("root must not be referenced as a child".into()));
        }
        for node in &tree.nodes {
            if node.id != root && referenced.get(&node.id) != Some(&1) {
                return Err(SmError::InvalidInput(format!(
                    "node {} must be referenced exactly once",
                    node.id
                )));
            }
        }
        Ok(tree)
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &DtNode {
        &self.nodes[self.index[&id]]
    }

    pub fn nodes(&self) -> &[DtNode] {
        &self.nodes
    }

    /// Number of input bits the tree reads (highest query index + 1).
    pub fn bit_width(&self) -> usize {
        self.nodes.iter().map(|n| n.query + 1).max().unwrap_or(0)
    }

    /// Distinct leaf labels in sorted order.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .nodes
            .iter()
            .flat_map(|n| [&n.left, &n.right])
            .filter_map(|c| match c {
                DtChild::Leaf(l) => Some(l.clone()),
                DtChild::Node(_) => None,
            })
            .collect::<HashSet<String>>()
            .into_iter()
            .collect();
        labels.sort_unstable();
        labels
    }

    /// Walks the tree on a bit mask (bit b of `input` answers query b).
    pub fn predict(&self, input: u64) -> &str {
        let mut current = self.root;
        loop {
            let node = self.node(current);
            let child =
                if input >> node.query & 1 == 0 { &node.left } else { &node.right };
            match child {
                DtChild::Node(id) => current = *id,
                DtChild::Leaf(label) => return label,
            }
        }
    }

    /// Parses the line-per-node text form:
    /// `node <id> query=<bit> left=<id|leaf:TAG> right=<id|leaf:TAG>`.
    /// The first node listed is the root. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let number = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SmError::Parse { line: number, message };
            let mut parts = line.split_whitespace();
            if parts.next() != Some("node") {
                return Err(err(format!("expected `node`, found {line:?}")));
            }
            let id = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("missing node id".into()))?;
            let mut query = None;
            let mut left = None;
            let mut right = None;
            for field in parts {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| err(format!("malformed field {field:?}")))?;
                match key {
                    "query" => {
                        query = Some(
                            value.parse().map_err(|_| err(format!("bad query {value:?}")))?,
                        )
                    }
                    "left" | "right" => {
                        let child = if let Some(label) = value.strip_prefix("leaf:") {
                            if label.is_empty() {
                                return Err(err("empty leaf label".into()));
                            }
                            DtChild::Leaf(label.to_string())
                        } else {
                            DtChild::Node(
                                value.parse().map_err(|_| err(format!("bad child {value:?}")))?,
                            )
                        };
                        if key == "left" {
                            left = Some(child);
                        } else {
                            right = Some(child);
                        }
                    }
                    other => return Err(err(format!("unknown field {other:?}"))),
                }
            }
            nodes.push(DtNode {
                id,
                query: query.ok_or_else(|| err("missing query".into()))?,
                left: left.ok_or_else(|| err("missing left child".into()))?,
                right: right.ok_or_else(|| err("missing right child".into()))?,
            });
        }
        BinaryDecisionTree::new(nodes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let child = |c: &DtChild| match c {
                DtChild::Node(id) => id.to_string(),
                DtChild::Leaf(l) => format!("leaf:{l}"),
            };
            out.push_str(&format!(
                "node {} query={} left={} right={}\n",
                node.id,
                node.query,
                child(&node.left),
                child(&node.right),
            ));
        }
        out
    }

    /// Seeded random tree with `internal` nodes over `bits` input bits and
    /// at least two distinct leaf labels drawn from `labels`.
    pub fn random<R: Rng>(rng: &mut R, internal: usize, bits: usize, labels: &[&str]) -> Self {
        assert!(internal >= 1 && bits >= 1 && labels.len() >= 2);
        let mut nodes: Vec<DtNode> = (0..internal)
            .map(|id| DtNode {
                id,
                query: rng.gen_range(0..bits),
                left: DtChild::Leaf(labels[rng.gen_range(0..labels.len())].to_string()),
                right: DtChild::Leaf(labels[rng.gen_range(0..labels.len())].to_string()),
            })
            .collect();
        // Attach nodes 1.. as children of earlier nodes, replacing a leaf.
        for id in 1..internal {
            loop {
                let parent = rng.gen_range(0..id);
                let side = rng.gen_bool(0.5);
                let slot = if side { &mut nodes[parent].right } else { &mut nodes[parent].left };
                if matches!(slot, DtChild::Leaf(_)) {
                    *slot = DtChild::Node(id);
                    break;
                }
            }
        }
        // Guarantee at least two distinct labels among the leaves.
        let tree = BinaryDecisionTree::new(nodes).expect("construction is well-formed");
        if tree.leaf_labels().len() >= 2 {
            return tree;
        }
        let mut nodes = tree.nodes;
        let only = match (&nodes[0].left, &nodes[0].right) {
            (DtChild::Leaf(l), _) => l.clone(),
            (_, DtChild::Leaf(l)) => l.clone(),
            _ => labels[0].to_string(),
        };
        let other = labels.iter().find(|l| **l != only).expect("two labels exist");
        for node in nodes.iter_mut() {
            if let DtChild::Leaf(l) = &mut node.left {
                *l = other.to_string();
                break;
            }
            if let DtChild::Leaf(l) = &mut node.right {
                *l = other.to_string();
                break;
            }
        }
        BinaryDecisionTree::new(nodes).expect("still well-formed")
    }
}

/// Stage classifier for one internal node: active iff every ancestor routes
/// toward this node on the given input, in which case it keeps the leaf
/// labels under the taken child; inactive nodes emit a pass-through uniform.
struct NodeSplitStage {
    query: usize,
    /// (bit, required value) constraints from the root to this node.
    path: Vec<(usize, bool)>,
    left_labels: Vec<LabelId>,
    right_labels: Vec<LabelId>,
}

impl NodeSplitStage {
    fn bit(x: &SparseExample, bit: usize) -> bool {
        x.contains(FeatureId(bit as u32))
    }
}

impl StageClassifier for NodeSplitStage {
    fn emit(&self, x: &SparseExample, cs: &ConfusionSet) -> Result<LabelDistribution> {
        let on_path = self.path.iter().all(|&(bit, value)| Self::bit(x, bit) == value);
        if !on_path {
            return Ok(LabelDistribution::uniform(cs));
        }
        let taken =
            if Self::bit(x, self.query) { &self.right_labels } else { &self.left_labels };
        let survivors: Vec<LabelId> =
            taken.iter().copied().filter(|l| cs.contains(*l)).collect();
        if survivors.is_empty() {
            return Err(SmError::InvalidInput(
                "taken subtree shares no labels with the surviving set".into(),
            ));
        }
        let cs = ConfusionSet::new(survivors)?;
        Ok(LabelDistribution::uniform(&cs))
    }

    fn kind(&self) -> &'static str {
        "dt-node"
    }
}

fn subtree_labels(
    tree: &BinaryDecisionTree,
    child: &DtChild,
    alphabet: &LabelAlphabet,
) -> Vec<LabelId> {
    let mut out = HashSet::new();
    let mut stack = vec![child.clone()];
    while let Some(c) = stack.pop() {
        match c {
            DtChild::Leaf(label) => {
                out.insert(alphabet.id(&label).expect("leaf label in alphabet"));
            }
            DtChild::Node(id) => {
                let node = tree.node(id);
                stack.push(node.left.clone());
                stack.push(node.right.clone());
            }
        }
    }
    let mut out: Vec<LabelId> = out.into_iter().collect();
    out.sort_unstable();
    out
}

/// Converts a tree into an equivalent pipeline: stage count equals the
/// internal-node count, parents precede children (ties by node id), and the
/// pipeline predicts the same label as the tree on every input.
pub fn dt_to_sm(tree: &BinaryDecisionTree) -> Result<SequentialModel> {
    let labels = tree.leaf_labels();
    if labels.len() < 2 {
        return Err(SmError::InvalidInput(
            "tree predicts a single constant label; nothing to discriminate".into(),
        ));
    }
    let alphabet = Arc::new(LabelAlphabet::new(labels)?);

    // Ancestor constraints per node.
    let mut paths: HashMap<usize, Vec<(usize, bool)>> = HashMap::new();
    paths.insert(tree.root(), Vec::new());
    // Root-first order, lowest id among the ready nodes first.
    let mut order = Vec::with_capacity(tree.internal_count());
    let mut ready = BinaryHeap::new();
    ready.push(Reverse(tree.root()));
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        let node = tree.node(id);
        let path = paths[&id].clone();
        for (child, value) in [(&node.left, false), (&node.right, true)] {
            if let DtChild::Node(cid) = child {
                let mut child_path = path.clone();
                child_path.push((node.query, value));
                paths.insert(*cid, child_path);
                ready.push(Reverse(*cid));
            }
        }
    }

    let stages = order
        .into_iter()
        .map(|id| {
            let node = tree.node(id);
            Stage::new(
                Arc::new(NodeSplitStage {
                    query: node.query,
                    path: paths[&id].clone(),
                    left_labels: subtree_labels(tree, &node.left, &alphabet),
                    right_labels: subtree_labels(tree, &node.right, &alphabet),
                }) as Arc<dyn StageClassifier>,
                0.0,
                FULL_VIEW,
            )
        })
        .collect();
    Ok(SequentialModel::new(alphabet, stages, CombineMode::Product))
}

/// Encodes a bit mask as the set of 1-bit feature ids.
pub fn bits_to_example(input: u64, bits: usize) -> SparseExample {
    SparseExample::new(
        (0..bits).filter(|b| input >> b & 1 == 1).map(|b| FeatureId(b as u32)),
    )
}

#[derive(Debug, Clone)]
pub struct DtAgreementReport {
    pub inputs: usize,
    pub mismatches: usize,
    pub stage_count: usize,
    pub internal_nodes: usize,
}

/// Exhaustively compares tree and converted pipeline over all 2^bits inputs.
pub fn dt_sm_agreement(tree: &BinaryDecisionTree) -> Result<DtAgreementReport> {
    let bits = tree.bit_width();
    if bits > 20 {
        return Err(SmError::InvalidInput(format!(
            "{bits} input bits is too wide for exhaustive checking"
        )));
    }
    let pipeline = dt_to_sm(tree)?;
    let stage_count = pipeline.stages.len();
    let mut mismatches = 0;
    let total = 1u64 << bits;
    for input in 0..total {
        let expected = tree.predict(input);
        let trace = pipeline.predict(&bits_to_example(input, bits))?;
        if pipeline.alphabet.name(trace.final_label) != expected {
            mismatches += 1;
        }
    }
    Ok(DtAgreementReport {
        inputs: total as usize,
        mismatches,
        stage_count,
        internal_nodes: tree.internal_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn depth_one() -> BinaryDecisionTree {
        BinaryDecisionTree::new(vec![DtNode {
            id: 0,
            query: 0,
            left: DtChild::Leaf("A".into()),
            right: DtChild::Leaf("B".into()),
        }])
        .unwrap()
    }

    /// Complete depth-3 tree over 3 bits: node i queries bit depth(i).
    fn complete_depth_three() -> BinaryDecisionTree {
        let leaf = |s: &str| DtChild::Leaf(s.to_string());
        BinaryDecisionTree::new(vec![
            DtNode { id: 0, query: 0, left: DtChild::Node(1), right: DtChild::Node(2) },
            DtNode { id: 1, query: 1, left: DtChild::Node(3), right: DtChild::Node(4) },
            DtNode { id: 2, query: 1, left: DtChild::Node(5), right: DtChild::Node(6) },
            DtNode { id: 3, query: 2, left: leaf("A"), right: leaf("B") },
            DtNode { id: 4, query: 2, left: leaf("C"), right: leaf("D") },
            DtNode { id: 5, query: 2, left: leaf("B"), right: leaf("A") },
            DtNode { id: 6, query: 2, left: leaf("D"), right: leaf("C") },
        ])
        .unwrap()
    }

    #[test]
    fn depth_one_tree_converts_and_agrees() {
        let tree = depth_one();
        let report = dt_sm_agreement(&tree).unwrap();
        assert_eq!(report.inputs, 2);
        assert_eq!(report.mismatches, 0);
        assert_eq!(report.stage_count, 1);
        assert_eq!(report.internal_nodes, 1);
    }

    #[test]
    fn complete_depth_three_agrees_on_all_inputs() {
        let tree = complete_depth_three();
        let report = dt_sm_agreement(&tree).unwrap();
        assert_eq!(report.inputs, 8);
        assert_eq!(report.mismatches, 0);
        assert_eq!(report.stage_count, 7);
    }

    #[test]
    fn random_trees_agree_exhaustively() {
        let labels = ["A", "B", "C", "D", "E"];
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let internal = rng.gen_range(1..=15);
            let bits = rng.gen_range(1..=10);
            let tree = BinaryDecisionTree::random(&mut rng, internal, bits, &labels);
            let report = dt_sm_agreement(&tree).unwrap();
            assert_eq!(report.mismatches, 0, "tree:\n{}", tree.to_text());
            assert_eq!(report.stage_count, report.internal_nodes);
        }
    }

    #[test]
    fn parse_round_trip() {
        let tree = complete_depth_three();
        let text = tree.to_text();
        let parsed = BinaryDecisionTree::parse(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
        for input in 0..8 {
            assert_eq!(parsed.predict(input), tree.predict(input));
        }
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        assert!(matches!(
            BinaryDecisionTree::parse("node 0 query=0 left=leaf:A\n"),
            Err(SmError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            BinaryDecisionTree::parse("nod 0 query=0 left=leaf:A right=leaf:B\n"),
            Err(SmError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn malformed_trees_are_rejected() {
        // Dangling child reference.
        assert!(BinaryDecisionTree::new(vec![DtNode {
            id: 0,
            query: 0,
            left: DtChild::Node(7),
            right: DtChild::Leaf("A".into()),
        }])
        .is_err());
        // Cycle back to the root.
        assert!(BinaryDecisionTree::new(vec![
            DtNode { id: 0, query: 0, left: DtChild::Node(1), right: DtChild::Leaf("A".into()) },
            DtNode { id: 1, query: 1, left: DtChild::Node(0), right: DtChild::Leaf("B".into()) },
        ])
        .is_err());
        // Unreachable node.
        assert!(BinaryDecisionTree::new(vec![
            DtNode { id: 0, query: 0, left: DtChild::Leaf("A".into()), right: DtChild::Leaf("B".into()) },
            DtNode { id: 1, query: 1, left: DtChild::Leaf("A".into()), right: DtChild::Leaf("B".into()) },
        ])
        .is_err());
    }

    #[test]
    fn constant_tree_cannot_convert() {
        let tree = BinaryDecisionTree::new(vec![DtNode {
            id: 0,
            query: 0,
            left: DtChild::Leaf("A".into()),
            right: DtChild::Leaf("A".into()),
        }])
        .unwrap();
        assert!(dt_to_sm(&tree).is_err());
    }

    #[test]
    fn repeated_labels_across_leaves_are_handled() {
        // Same label reachable through different paths.
        let leaf = |s: &str| DtChild::Leaf(s.to_string());
        let tree = BinaryDecisionTree::new(vec![
            DtNode { id: 0, query: 0, left: DtChild::Node(1), right: leaf("A") },
            DtNode { id: 1, query: 1, left: leaf("A"), right: leaf("B") },
        ])
        .unwrap();
        let report = dt_sm_agreement(&tree).unwrap();
        assert_eq!(report.mismatches, 0);
    }
}
