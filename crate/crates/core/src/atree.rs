//! The A-tree: a (D+2)-layer structure that groups a stream of accepted
//! photos by a chain of similarity constraints.
//!
//! Layer 0 is the root, layers 1..=D each apply one [`ConstraintLayerSpec`],
//! and every layer-D node owns one leaf group of sibling submissions. A node
//! is anchored on the first submission routed through it and the anchor never
//! changes, so the grouping depends on arrival order.
//!
//! Insertion walks down from the root. At each layer the incoming photo is
//! compared with the anchors of the current node's children; the closest
//! child satisfying the layer predicate wins (oldest child on ties), and if
//! none does a new child anchored on the photo is created.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{redundancy_ratio, ConstraintLayerSpec, RepresentativePolicy, Submission};
use crate::similarity::{layer_distance, layer_similar, DEFAULT_MATCH_RATIO};

const ROOT: usize = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ATreeError {
    #[error("tree of task {0} is sealed")]
    Sealed(String),
    #[error("submission belongs to task {found}, tree belongs to {expected}")]
    WrongTask { expected: String, found: String },
    #[error("submission {0} already in the tree")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    layer: usize,
    /// Index into `ATree::entries`; `None` only for the root.
    anchor: Option<usize>,
    children: Vec<usize>,
    /// Leaf group owned by a layer-D node.
    leaf: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafGroup {
    members: Vec<String>,
}

impl LeafGroup {
    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn representative(&self, policy: RepresentativePolicy) -> &str {
        match policy {
            RepresentativePolicy::First => &self.members[0],
            RepresentativePolicy::Last => &self.members[self.members.len() - 1],
        }
    }
}

/// Route taken by one insertion: the child position chosen at each layer
/// and the leaf group reached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafPath {
    pub steps: Vec<usize>,
    pub leaf_group: usize,
    /// First layer (1-based) at which a new node had to be created.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branched_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionRecord {
    pub submission_id: String,
    pub path: LeafPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ATree {
    task_id: String,
    layers: Vec<ConstraintLayerSpec>,
    match_ratio: f64,
    nodes: Vec<Node>,
    groups: Vec<LeafGroup>,
    entries: Vec<Submission>,
    insertion_log: Vec<InsertionRecord>,
    #[serde(skip)]
    ids: BTreeSet<String>,
    sealed: bool,
}

impl ATree {
    pub fn new(task_id: impl Into<String>, layers: Vec<ConstraintLayerSpec>) -> Self {
        Self::with_match_ratio(task_id, layers, DEFAULT_MATCH_RATIO)
    }

    pub fn with_match_ratio(
        task_id: impl Into<String>,
        layers: Vec<ConstraintLayerSpec>,
        match_ratio: f64,
    ) -> Self {
        Self {
            task_id: task_id.into(),
            layers,
            match_ratio,
            nodes: vec![Node {
                layer: 0,
                anchor: None,
                children: Vec::new(),
                leaf: None,
            }],
            groups: Vec::new(),
            entries: Vec::new(),
            insertion_log: Vec::new(),
            ids: BTreeSet::new(),
            sealed: false,
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn layers(&self) -> &[ConstraintLayerSpec] {
        &self.layers
    }

    pub fn match_ratio(&self) -> f64 {
        self.match_ratio
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of inserted submissions.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn groups(&self) -> &[LeafGroup] {
        &self.groups
    }

    /// Inserted submissions in arrival order.
    pub fn entries(&self) -> &[Submission] {
        &self.entries
    }

    pub fn insertion_log(&self) -> &[InsertionRecord] {
        &self.insertion_log
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Refuses further insertions. Used when the owning task closes.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn insert(&mut self, submission: Submission) -> Result<LeafPath, ATreeError> {
        if self.sealed {
            return Err(ATreeError::Sealed(self.task_id.clone()));
        }
        if submission.task_id != self.task_id {
            return Err(ATreeError::WrongTask {
                expected: self.task_id.clone(),
                found: submission.task_id,
            });
        }
        if self.ids.contains(&submission.submission_id) {
            return Err(ATreeError::Duplicate(submission.submission_id));
        }

        let entry = self.entries.len();
        let mut node = ROOT;
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut branched_at = None;
        for (d, layer) in self.layers.iter().enumerate() {
            let best = self.nodes[node]
                .children
                .iter()
                .enumerate()
                .filter_map(|(pos, &child)| {
                    let anchor =
                        &self.entries[self.nodes[child].anchor.expect("non-root node has anchor")];
                    layer_distance(layer, &submission, anchor, self.match_ratio)
                        .map(|dist| (pos, child, dist))
                })
                .fold(None::<(usize, usize, f64)>, |best, cur| match best {
                    Some(b) if b.2 <= cur.2 => Some(b),
                    _ => Some(cur),
                });
            match best {
                Some((pos, child, _)) => {
                    steps.push(pos);
                    node = child;
                }
                None => {
                    let child = self.nodes.len();
                    self.nodes.push(Node {
                        layer: d + 1,
                        anchor: Some(entry),
                        children: Vec::new(),
                        leaf: None,
                    });
                    steps.push(self.nodes[node].children.len());
                    self.nodes[node].children.push(child);
                    branched_at.get_or_insert(d + 1);
                    node = child;
                }
            }
        }

        let leaf_group = match self.nodes[node].leaf {
            Some(g) => g,
            None => {
                self.groups.push(LeafGroup {
                    members: Vec::new(),
                });
                let g = self.groups.len() - 1;
                self.nodes[node].leaf = Some(g);
                g
            }
        };
        self.groups[leaf_group]
            .members
            .push(submission.submission_id.clone());
        let path = LeafPath {
            steps,
            leaf_group,
            branched_at,
        };
        self.ids.insert(submission.submission_id.clone());
        self.insertion_log.push(InsertionRecord {
            submission_id: submission.submission_id.clone(),
            path: path.clone(),
        });
        self.entries.push(submission);
        Ok(path)
    }

    /// One representative per leaf group, in leaf creation order.
    pub fn handover(&self, policy: RepresentativePolicy) -> Handover {
        let representatives = self
            .groups
            .iter()
            .map(|g| g.representative(policy).to_string())
            .collect::<Vec<_>>();
        let group_sizes = self.groups.iter().map(LeafGroup::len).collect::<Vec<_>>();
        let total = self.entries.len();
        Handover {
            redundancy_ratio: redundancy_ratio(total, representatives.len()),
            representatives,
            group_sizes,
            total,
        }
    }

    /// Leaf groups as a set of member sets, independent of creation order.
    pub fn partition(&self) -> BTreeSet<BTreeSet<String>> {
        self.groups
            .iter()
            .map(|g| g.members.iter().cloned().collect())
            .collect()
    }

    /// Anchors of the nodes at `layer` (1-based), in creation order.
    pub fn anchors_at(&self, layer: usize) -> Vec<&Submission> {
        self.nodes
            .iter()
            .filter(|n| n.layer == layer)
            .filter_map(|n| n.anchor.map(|a| &self.entries[a]))
            .collect()
    }

    pub fn snapshot(&self) -> TreeSnapshot {
        TreeSnapshot {
            task_id: self.task_id.clone(),
            layers: self.layers.clone(),
            node_count: self.nodes.len(),
            group_count: self.groups.len(),
            root: self.snapshot_node(ROOT),
            insertion_log: self.insertion_log.clone(),
        }
    }

    fn snapshot_node(&self, id: usize) -> NodeSnapshot {
        let node = &self.nodes[id];
        NodeSnapshot {
            layer_index: node.layer,
            anchor: node.anchor.map(|a| self.entries[a].submission_id.clone()),
            children: node
                .children
                .iter()
                .map(|&c| self.snapshot_node(c))
                .collect(),
            members: node.leaf.map(|g| self.groups[g].members.clone()),
        }
    }

    /// Checks the structural invariants: every entry sits in exactly one
    /// group, siblings are pairwise dissimilar on their layer, and every group
    /// member is similar to each anchor on its root-to-leaf path.
    pub fn verify(&self) -> Result<(), String> {
        let grouped: usize = self.groups.iter().map(LeafGroup::len).sum();
        if grouped != self.entries.len() || self.insertion_log.len() != self.entries.len() {
            return Err(format!(
                "{} entries, {grouped} grouped, {} logged",
                self.entries.len(),
                self.insertion_log.len()
            ));
        }
        let mut seen = BTreeSet::new();
        for id in self.groups.iter().flat_map(|g| &g.members) {
            if !seen.insert(id) {
                return Err(format!("{id} appears in two groups"));
            }
        }
        for node in &self.nodes {
            if node.layer == self.layers.len() && node.anchor.is_some() && node.leaf.is_none() {
                return Err("layer-D node without a leaf group".into());
            }
            let layer = match self.layers.get(node.layer) {
                Some(l) => l,
                None => continue,
            };
            for (i, &a) in node.children.iter().enumerate() {
                for &b in &node.children[i + 1..] {
                    let (x, y) = (self.anchor(a), self.anchor(b));
                    if layer_similar(layer, x, y, self.match_ratio) {
                        return Err(format!(
                            "sibling anchors {} and {} are similar on layer {}",
                            x.submission_id,
                            y.submission_id,
                            node.layer + 1
                        ));
                    }
                }
            }
        }
        for (record, entry) in self.insertion_log.iter().zip(&self.entries) {
            let mut node = ROOT;
            for (d, &step) in record.path.steps.iter().enumerate() {
                node = self.nodes[node].children[step];
                let anchor = self.anchor(node);
                if anchor.submission_id != entry.submission_id
                    && !layer_similar(&self.layers[d], entry, anchor, self.match_ratio)
                {
                    return Err(format!(
                        "{} is not similar to its layer-{} anchor {}",
                        entry.submission_id,
                        d + 1,
                        anchor.submission_id
                    ));
                }
            }
            if self.nodes[node].leaf != Some(record.path.leaf_group) {
                return Err(format!(
                    "path of {} does not reach its group",
                    entry.submission_id
                ));
            }
        }
        Ok(())
    }

    fn anchor(&self, node: usize) -> &Submission {
        &self.entries[self.nodes[node].anchor.expect("non-root node has anchor")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handover {
    pub representatives: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub redundancy_ratio: f64,
    pub total: usize,
}

/// Exported tree document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSnapshot {
    pub task_id: String,
    pub layers: Vec<ConstraintLayerSpec>,
    pub node_count: usize,
    pub group_count: usize,
    pub root: NodeSnapshot,
    pub insertion_log: Vec<InsertionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub layer_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    pub children: Vec<NodeSnapshot>,
    /// Leaf group members, present on layer-D nodes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<String>>,
}

impl NodeSnapshot {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(NodeSnapshot::count).sum::<usize>()
    }
}
