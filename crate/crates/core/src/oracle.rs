//! Exact reference for photo selection on small instances.
//!
//! Two photos conflict when they are similar under every layer of the task.
//! The best possible selection is a maximum independent set of that conflict
//! graph, found here by exhaustive branch and bound. Used to score how much
//! of the achievable coverage the greedy A-tree keeps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atree::ATree;
use crate::model::{ConstraintLayerSpec, Submission};
use crate::similarity::layer_similar;

/// Largest graph [`max_independent_set`] will search.
pub const MAX_ORACLE_VERTICES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n} vertices exceeds the exact-search limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("oracle size must be at least 1")]
    EmptyOracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    n: usize,
    adjacency: Vec<BTreeSet<usize>>,
}

impl SimilarityGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    /// Adds the undirected edge `(i, j)`. Self-loops are ignored.
    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(
            i < self.n && j < self.n,
            "edge ({i}, {j}) out of range for {} vertices",
            self.n
        );
        if i != j {
            self.adjacency[i].insert(j);
            self.adjacency[j].insert(i);
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).is_some_and(|a| a.contains(&j))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.range(i + 1..).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(k, &i)| set[k + 1..].iter().all(|&j| !self.has_edge(i, j)))
    }
}

/// Conflict graph: an edge wherever a pair is similar under all layers.
pub fn build_graph(
    subs: &[Submission],
    layers: &[ConstraintLayerSpec],
    match_ratio: f64,
) -> SimilarityGraph {
    let mut g = SimilarityGraph::new(subs.len());
    for i in 0..subs.len() {
        for j in i + 1..subs.len() {
            if layers
                .iter()
                .all(|l| layer_similar(l, &subs[i], &subs[j], match_ratio))
            {
                g.add_edge(i, j);
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependentSet {
    pub size: usize,
    /// Vertex indices in ascending order.
    pub members: Vec<usize>,
}

/// Exact maximum independent set. The witness is the lexicographically
/// smallest among all maximum sets.
pub fn max_independent_set(g: &SimilarityGraph) -> Result<IndependentSet, OracleError> {
    if g.n > MAX_ORACLE_VERTICES {
        return Err(OracleError::TooLarge {
            n: g.n,
            max: MAX_ORACLE_VERTICES,
        });
    }
    let adj: Vec<u32> = g
        .adjacency
        .iter()
        .map(|a| a.iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let all = if g.n == 0 { 0 } else { u32::MAX >> (32 - g.n) };
    let mut best = Best { mask: 0, size: 0 };
    search(&adj, all, 0, &mut best);
    let members: Vec<usize> = (0..g.n).filter(|&i| best.mask & (1 << i) != 0).collect();
    debug_assert!(g.is_independent(&members));
    Ok(IndependentSet {
        size: members.len(),
        members,
    })
}

struct Best {
    mask: u32,
    size: u32,
}

// Include-first branching on the lowest candidate visits independent sets in
// lexicographic order, so the first maximum found is the smallest one.
fn search(adj: &[u32], candidates: u32, chosen: u32, best: &mut Best) {
    let size = chosen.count_ones();
    if candidates == 0 {
        if size > best.size {
            best.size = size;
            best.mask = chosen;
        }
        return;
    }
    if size + candidates.count_ones() <= best.size {
        return;
    }
    let v = candidates.trailing_zeros() as usize;
    let bit = 1u32 << v;
    search(adj, candidates & !bit & !adj[v], chosen | bit, best);
    search(adj, candidates & !bit, chosen, best);
}

/// Leaf groups kept by the tree relative to the exact optimum. Not clamped.
pub fn coverage_ratio(tree_groups: usize, oracle_size: usize) -> Result<f64, OracleError> {
    if oracle_size == 0 {
        return Err(OracleError::EmptyOracle);
    }
    Ok(tree_groups as f64 / oracle_size as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub tree_groups: usize,
    pub oracle_size: usize,
    /// `None` when the tree is empty.
    pub coverage_ratio: Option<f64>,
    pub witness: Vec<String>,
}

/// Scores a built tree against the exact optimum over its own entries.
pub fn score_tree(tree: &ATree) -> Result<CoverageSummary, OracleError> {
    let entries = tree.entries();
    let graph = build_graph(entries, tree.layers(), tree.match_ratio());
    let mis = max_independent_set(&graph)?;
    let coverage_ratio = match mis.size {
        0 => None,
        size => Some(coverage_ratio(tree.groups().len(), size)?),
    };
    Ok(CoverageSummary {
        tree_groups: tree.groups().len(),
        oracle_size: mis.size,
        coverage_ratio,
        witness: mis
            .members
            .iter()
            .map(|&i| entries[i].submission_id.clone())
            .collect(),
    })
}
