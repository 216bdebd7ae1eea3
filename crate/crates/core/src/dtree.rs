//! Binary CART classifier grown best-first under a leaf budget.
//!
//! Growth keeps a frontier of splittable leaves ordered by
//! `impurity_decrease * node_size` and always expands the best one, so a
//! `max_leaf_nodes` budget selects the most useful splits regardless of depth.
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values; a sample goes left iff `feature <= threshold`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::weather_data::LabeledSample;
use crate::{features_from_slice, DomeState, Error, Result, FEATURE_COUNT};

/// Gains at or below this are treated as zero.
const MIN_GAIN: f64 = 1e-12;

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    /// Carried for reproducibility records; growth itself draws no random numbers.
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_leaf_nodes: 50,
            min_samples_leaf: 1,
            seed: 324,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaf_nodes == 0 {
            return Err(Error::InvalidConfig(
                "max_leaf_nodes must be at least 1".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Node impurity of a `(n_close, n_open)` count pair.
pub fn impurity(class_counts: [usize; 2], criterion: Criterion) -> Result<f64> {
    let total = class_counts[0] + class_counts[1];
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    Ok(impurity_unchecked(class_counts, criterion))
}

fn impurity_unchecked(class_counts: [usize; 2], criterion: Criterion) -> f64 {
    let total = (class_counts[0] + class_counts[1]) as f64;
    let p0 = class_counts[0] as f64 / total;
    let p1 = class_counts[1] as f64 / total;
    match criterion {
        Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
        Criterion::Entropy => [p0, p1]
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum(),
    }
}

fn counts_of<'a, I: IntoIterator<Item = &'a LabeledSample>>(samples: I) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for s in samples {
        counts[s.label.as_u8() as usize] += 1;
    }
    counts
}

fn majority(counts: [usize; 2]) -> DomeState {
    // Ties close the dome.
    DomeState::from_bool(counts[1] > counts[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity decrease of the split.
    pub gain: f64,
}

/// Best admissible split of `samples`, or `None` when no split has positive gain.
pub fn best_split(
    samples: &[LabeledSample],
    criterion: Criterion,
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    best_split_of(samples, &idx, criterion, min_samples_leaf)
}

fn best_split_of(
    samples: &[LabeledSample],
    idx: &[usize],
    criterion: Criterion,
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let n = idx.len();
    if n < 2 {
        return None;
    }
    let total = counts_of(idx.iter().map(|&i| &samples[i]));
    if total[0] == 0 || total[1] == 0 {
        return None;
    }
    let parent = impurity_unchecked(total, criterion);
    let min_leaf = min_samples_leaf.max(1);
    let nf = n as f64;

    let mut best: Option<SplitCandidate> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    for feature in 0..FEATURE_COUNT {
        column.clear();
        column.extend(idx.iter().map(|&i| {
            (
                samples[i].features[feature],
                samples[i].label.as_u8() as usize,
            )
        }));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0usize; 2];
        for i in 0..n - 1 {
            left[column[i].1] += 1;
            let (here, next) = (column[i].0, column[i + 1].0);
            if here >= next {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let gain = parent
                - (n_left as f64 / nf) * impurity_unchecked(left, criterion)
                - (n_right as f64 / nf) * impurity_unchecked(right, criterion);
            if best.is_none_or(|b| gain > b.gain) {
                let mut threshold = here + (next - here) / 2.0;
                if threshold >= next {
                    threshold = here;
                }
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > MIN_GAIN)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity: f64,
        n: usize,
    },
    Leaf {
        class: DomeState,
        class_counts: [usize; 2],
    },
}

impl Node {
    pub fn size(&self) -> usize {
        match *self {
            Node::Split { n, .. } => n,
            Node::Leaf { class_counts, .. } => class_counts[0] + class_counts[1],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    config: TreeConfig,
    nodes: Vec<Node>,
}

struct Frontier {
    priority: f64,
    node: usize,
    split: SplitCandidate,
    members: Vec<usize>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Max-heap on priority; earlier-created nodes win ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.node.cmp(&self.node))
    }
}

pub fn train_tree(samples: &[LabeledSample], config: &TreeConfig) -> Result<TreeModel> {
    train_tree_traced(samples, config).map(|(model, _)| model)
}

/// Trains a tree and also returns, for each training sample, the id of the
/// leaf whose training subset contains it.
pub fn train_tree_traced(
    samples: &[LabeledSample],
    config: &TreeConfig,
) -> Result<(TreeModel, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    config.validate()?;

    let all: Vec<usize> = (0..samples.len()).collect();
    let root_counts = counts_of(samples);
    let mut nodes = vec![Node::Leaf {
        class: majority(root_counts),
        class_counts: root_counts,
    }];
    let mut leaf_members: Vec<Option<Vec<usize>>> = vec![None];
    let mut heap = BinaryHeap::new();
    let criterion = config.criterion;
    let min_leaf = config.min_samples_leaf;

    let enqueue = |heap: &mut BinaryHeap<Frontier>,
                   leaf_members: &mut Vec<Option<Vec<usize>>>,
                   node: usize,
                   members: Vec<usize>| {
        match best_split_of(samples, &members, criterion, min_leaf) {
            Some(split) => heap.push(Frontier {
                priority: split.gain * members.len() as f64,
                node,
                split,
                members,
            }),
            None => leaf_members[node] = Some(members),
        }
    };
    enqueue(&mut heap, &mut leaf_members, 0, all);

    let mut leaves = 1;
    while leaves < config.max_leaf_nodes {
        let Some(Frontier {
            node,
            split,
            members,
            ..
        }) = heap.pop()
        else {
            break;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| samples[i].features[split.feature] <= split.threshold);
        let counts = counts_of(members.iter().map(|&i| &samples[i]));

        let left = nodes.len();
        let right = left + 1;
        for side in [&left_idx, &right_idx] {
            let c = counts_of(side.iter().map(|&i| &samples[i]));
            nodes.push(Node::Leaf {
                class: majority(c),
                class_counts: c,
            });
            leaf_members.push(None);
        }
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            impurity: impurity_unchecked(counts, criterion),
            n: members.len(),
        };
        leaves += 1;
        enqueue(&mut heap, &mut leaf_members, left, left_idx);
        enqueue(&mut heap, &mut leaf_members, right, right_idx);
    }
    // Whatever is still queued stays a leaf.
    for pending in heap.into_vec() {
        leaf_members[pending.node] = Some(pending.members);
    }

    let mut leaf_of_sample = vec![usize::MAX; samples.len()];
    for (node, members) in leaf_members.into_iter().enumerate() {
        for i in members.into_iter().flatten() {
            leaf_of_sample[i] = node;
        }
    }
    debug_assert!(leaf_of_sample.iter().all(|&l| l != usize::MAX));

    Ok((
        TreeModel {
            config: *config,
            nodes,
        },
        leaf_of_sample,
    ))
}

impl TreeModel {
    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Impurity of node `id` under the model's criterion.
    pub fn node_impurity(&self, id: usize) -> f64 {
        match self.nodes[id] {
            Node::Split { impurity, .. } => impurity,
            Node::Leaf { class_counts, .. } => {
                impurity_unchecked(class_counts, self.config.criterion)
            }
        }
    }

    /// Id of the leaf reached by `features`.
    pub fn leaf_index(&self, features: &[f64]) -> Result<usize> {
        let x = features_from_slice(features)?;
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return Ok(id),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<DomeState> {
        let id = self.leaf_index(features)?;
        match self.nodes[id] {
            Node::Leaf { class, .. } => Ok(class),
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    /// Rebuilds a model from raw parts, checking that the nodes form a single
    /// tree rooted at node 0 with in-range feature indices.
    pub fn from_parts(config: TreeConfig, nodes: Vec<Node>) -> Result<Self> {
        config.validate()?;
        if nodes.is_empty() {
            return Err(Error::MalformedModel("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if feature >= FEATURE_COUNT || !threshold.is_finite() {
                        return Err(Error::MalformedModel(format!("node {id} has a bad split")));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() || child == 0 {
                            return Err(Error::MalformedModel(format!(
                                "node {id} points at invalid child {child}"
                            )));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { class_counts, .. } => {
                    if class_counts[0] + class_counts[1] == 0 {
                        return Err(Error::MalformedModel(format!("leaf {id} is empty")));
                    }
                }
            }
        }
        if parents.iter().skip(1).any(|&p| p != 1) {
            return Err(Error::MalformedModel(
                "every non-root node needs one parent".into(),
            ));
        }
        // Single parents plus full reachability from the root rule out cycles.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::MalformedModel("cycle in tree".into()));
            }
            if let Node::Split { left, right, .. } = nodes[id] {
                stack.push(left);
                stack.push(right);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::MalformedModel("unreachable nodes".into()));
        }
        let leaves = nodes.iter().filter(|n| n.is_leaf()).count();
        if leaves > config.max_leaf_nodes {
            return Err(Error::MalformedModel(format!(
                "{leaves} leaves exceed the budget of {}",
                config.max_leaf_nodes
            )));
        }
        Ok(Self { config, nodes })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NodeRecord {
    Split {
        id: usize,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity: f64,
        n: usize,
    },
    Leaf {
        id: usize,
        class: DomeState,
        class_counts: [usize; 2],
    },
}

/// On-disk form: `{version, config, nodes}` with explicit node ids.
#[derive(Debug, Serialize, Deserialize)]
pub struct TreeDocument {
    pub version: u32,
    pub config: TreeConfig,
    nodes: Vec<NodeRecord>,
}

impl From<&TreeModel> for TreeDocument {
    fn from(model: &TreeModel) -> Self {
        let nodes = model
            .nodes
            .iter()
            .enumerate()
            .map(|(id, node)| match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    impurity,
                    n,
                } => NodeRecord::Split {
                    id,
                    feature,
                    threshold,
                    left,
                    right,
                    impurity,
                    n,
                },
                Node::Leaf {
                    class,
                    class_counts,
                } => NodeRecord::Leaf {
                    id,
                    class,
                    class_counts,
                },
            })
            .collect();
        Self {
            version: TREE_FORMAT_VERSION,
            config: model.config,
            nodes,
        }
    }
}

impl TryFrom<TreeDocument> for TreeModel {
    type Error = Error;

    fn try_from(doc: TreeDocument) -> Result<Self> {
        if doc.version != TREE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: doc.version,
                supported: TREE_FORMAT_VERSION,
            });
        }
        let mut slots: Vec<Option<Node>> = vec![None; doc.nodes.len()];
        for record in doc.nodes {
            let (id, node) = match record {
                NodeRecord::Split {
                    id,
                    feature,
                    threshold,
                    left,
                    right,
                    impurity,
                    n,
                } => (
                    id,
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        impurity,
                        n,
                    },
                ),
                NodeRecord::Leaf {
                    id,
                    class,
                    class_counts,
                } => (
                    id,
                    Node::Leaf {
                        class,
                        class_counts,
                    },
                ),
            };
            let slot = slots
                .get_mut(id)
                .ok_or_else(|| Error::MalformedModel(format!("node id {id} out of range")))?;
            if slot.replace(node).is_some() {
                return Err(Error::MalformedModel(format!("duplicate node id {id}")));
            }
        }
        let nodes = slots
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MalformedModel("node ids are not contiguous".into()))?;
        TreeModel::from_parts(doc.config, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DomeState::{Close, Open};

    fn sample(x: &[f64], label: DomeState) -> LabeledSample {
        let mut features = [0.0; FEATURE_COUNT];
        features[..x.len()].copy_from_slice(x);
        LabeledSample::new(features, label)
    }

    #[test]
    fn impurity_values() {
        assert_eq!(impurity([10, 0], Criterion::Gini).unwrap(), 0.0);
        assert_eq!(impurity([5, 5], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity([5, 5], Criterion::Entropy).unwrap(), 1.0);
        assert!((impurity([3, 1], Criterion::Gini).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(impurity([0, 7], Criterion::Entropy).unwrap(), 0.0);
        assert!(matches!(
            impurity([0, 0], Criterion::Gini),
            Err(Error::EmptyCounts)
        ));
    }

    #[test]
    fn two_point_split() {
        let data = [sample(&[1.0], Close), sample(&[3.0], Open)];
        let s = best_split(&data, Criterion::Gini, 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.0);
        assert_eq!(s.gain, 0.5);
    }

    #[test]
    fn pure_node_has_no_split() {
        let data = [
            sample(&[1.0], Close),
            sample(&[3.0], Close),
            sample(&[5.0], Close),
        ];
        assert!(best_split(&data, Criterion::Gini, 1).is_none());
    }

    #[test]
    fn xor_has_no_positive_gain_split() {
        let data = [
            sample(&[0.0, 0.0], Close),
            sample(&[0.0, 1.0], Open),
            sample(&[1.0, 0.0], Open),
            sample(&[1.0, 1.0], Close),
        ];
        assert!(best_split(&data, Criterion::Gini, 1).is_none());
        assert!(best_split(&data, Criterion::Entropy, 1).is_none());
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        assert_eq!(model.leaf_count(), 1);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let data = [
            sample(&[1.0], Close),
            sample(&[2.0], Open),
            sample(&[3.0], Open),
            sample(&[4.0], Open),
        ];
        let s = best_split(&data, Criterion::Gini, 1).unwrap();
        assert_eq!(s.threshold, 1.5);
        let s = best_split(&data, Criterion::Gini, 2).unwrap();
        assert_eq!(s.threshold, 2.5);
    }

    #[test]
    fn tie_prefers_lowest_feature_then_threshold() {
        // Feature 0 and 1 separate the classes equally well.
        let data = [sample(&[0.0, 0.0], Close), sample(&[1.0, 1.0], Open)];
        let s = best_split(&data, Criterion::Gini, 1).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let data: Vec<_> = (0..10).map(|i| sample(&[i as f64], Open)).collect();
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        assert_eq!(model.nodes().len(), 1);
        assert_eq!(
            model.predict(&[99.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            Open
        );
    }

    #[test]
    fn two_point_tree() {
        let data = [sample(&[1.0], Close), sample(&[3.0], Open)];
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        assert_eq!(model.leaf_count(), 2);
        for s in &data {
            assert_eq!(model.predict(&s.features).unwrap(), s.label);
        }
    }

    #[test]
    fn routing_and_arity() {
        let data = [sample(&[20.0], Open), sample(&[23.0], Close)];
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        match model.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 21.5),
            _ => panic!("expected a split"),
        }
        assert_eq!(
            model.predict(&[30.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            Close
        );
        assert_eq!(
            model.predict(&[21.5, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            Open
        );
        assert!(matches!(
            model.predict(&[1.0, 2.0]),
            Err(Error::Arity {
                expected: 6,
                got: 2
            })
        ));
    }

    #[test]
    fn leaf_tie_predicts_close() {
        let data = [sample(&[1.0], Close), sample(&[1.0], Open)];
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        assert_eq!(model.leaf_count(), 1);
        assert_eq!(model.predict(&data[0].features).unwrap(), Close);
    }

    #[test]
    fn budget_of_one_is_majority_leaf() {
        let data = [
            sample(&[1.0], Open),
            sample(&[2.0], Open),
            sample(&[3.0], Close),
        ];
        let config = TreeConfig {
            max_leaf_nodes: 1,
            ..TreeConfig::default()
        };
        let model = train_tree(&data, &config).unwrap();
        assert_eq!(model.nodes().len(), 1);
        assert_eq!(model.predict(&data[2].features).unwrap(), Open);
    }

    #[test]
    fn empty_training_set_and_bad_config() {
        assert!(matches!(
            train_tree(&[], &TreeConfig::default()),
            Err(Error::EmptyTrainingSet)
        ));
        let bad = TreeConfig {
            min_samples_leaf: 0,
            ..TreeConfig::default()
        };
        assert!(train_tree(&[sample(&[1.0], Open)], &bad).is_err());
    }

    #[test]
    fn adjacent_floats_keep_threshold_between_values() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let data = [sample(&[a], Close), sample(&[b], Open)];
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        assert_eq!(model.predict(&data[0].features).unwrap(), Close);
        assert_eq!(model.predict(&data[1].features).unwrap(), Open);
    }

    #[test]
    fn document_rejects_bad_structure() {
        let data = [sample(&[1.0], Close), sample(&[3.0], Open)];
        let model = train_tree(&data, &TreeConfig::default()).unwrap();
        let mut doc = TreeDocument::from(&model);
        doc.version = 7;
        assert!(matches!(
            TreeModel::try_from(doc),
            Err(Error::VersionMismatch {
                found: 7,
                supported: 1
            })
        ));

        let bad_child = vec![
            Node::Split {
                feature: 0,
                threshold: 1.0,
                left: 1,
                right: 1,
                impurity: 0.5,
                n: 2,
            },
            Node::Leaf {
                class: Open,
                class_counts: [0, 1],
            },
        ];
        assert!(TreeModel::from_parts(TreeConfig::default(), bad_child).is_err());
    }
}
