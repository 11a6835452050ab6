//! Interaction datasets and their binary projection.
//!
//! An [`InteractionDataset`] is a time-sorted list of directed interactions
//! `(time, src, dst)` over dense node ids `0..n_nodes` on a horizon
//! `[0, horizon]`. Synthetic datasets carry per-node ground-truth atoms;
//! parsed datasets carry the original node labels.

use crate::error::{require_positive, Error, Result};
use crate::hawkes::PairHistory;
use crate::measures::NodeAtom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One directed interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub time: f64,
    pub src: u32,
    pub dst: u32,
}

/// Directed interactions over `[0, horizon]` with dense node ids.
///
/// Interactions are sorted by `(time, src, dst)`; duplicates are legal and
/// kept (real datasets repeat second-resolution stamps). Self-interactions
/// are rejected — drop them before construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionDataset {
    interactions: Vec<Interaction>,
    n_nodes: usize,
    horizon: f64,
    /// Ground-truth atoms per node id (synthetic data only).
    pub ground_truth: Option<Vec<NodeAtom>>,
    /// Original node labels per node id (parsed data only).
    pub labels: Option<Vec<String>>,
}

impl InteractionDataset {
    /// Builds a dataset, sorting interactions into canonical order.
    pub fn new(
        mut interactions: Vec<Interaction>,
        n_nodes: usize,
        horizon: f64,
    ) -> Result<Self> {
        require_positive("horizon", horizon)?;
        for ev in &interactions {
            if ev.src == ev.dst {
                return Err(Error::invalid(
                    "interaction",
                    ev.src as f64,
                    "self-interactions are not part of the model",
                ));
            }
            if ev.src as usize >= n_nodes || ev.dst as usize >= n_nodes {
                return Err(Error::invalid(
                    "node id",
                    ev.src.max(ev.dst) as f64,
                    "exceeds node count",
                ));
            }
            if !(ev.time.is_finite() && ev.time >= 0.0 && ev.time <= horizon) {
                return Err(Error::invalid("time", ev.time, "must lie in [0, horizon]"));
            }
        }
        interactions.sort_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.src.cmp(&b.src))
                .then(a.dst.cmp(&b.dst))
        });
        Ok(InteractionDataset {
            interactions,
            n_nodes,
            horizon,
            ground_truth: None,
            labels: None,
        })
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Interaction counts per directed pair, in deterministic key order.
    pub fn directed_pair_counts(&self) -> BTreeMap<(u32, u32), usize> {
        let mut counts = BTreeMap::new();
        for ev in &self.interactions {
            *counts.entry((ev.src, ev.dst)).or_insert(0) += 1;
        }
        counts
    }

    /// Event histories per unordered pair `(i, j)`, `i < j`. The forward
    /// direction of each history is `i → j`. Keys are in deterministic order.
    pub fn pair_histories(&self) -> BTreeMap<(u32, u32), PairHistory> {
        let mut times: BTreeMap<(u32, u32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ev in &self.interactions {
            let (key, is_forward) = if ev.src < ev.dst {
                ((ev.src, ev.dst), true)
            } else {
                ((ev.dst, ev.src), false)
            };
            let entry = times.entry(key).or_default();
            if is_forward {
                entry.0.push(ev.time);
            } else {
                entry.1.push(ev.time);
            }
        }
        times
            .into_iter()
            .map(|(key, (f, b))| {
                let history = PairHistory::new(f, b, self.horizon)
                    .expect("interaction order is canonical by construction");
                (key, history)
            })
            .collect()
    }

    /// Node ids that appear in at least one interaction.
    pub fn active_nodes(&self) -> Vec<u32> {
        let mut seen = vec![false; self.n_nodes];
        for ev in &self.interactions {
            seen[ev.src as usize] = true;
            seen[ev.dst as usize] = true;
        }
        (0..self.n_nodes as u32).filter(|&i| seen[i as usize]).collect()
    }
}

/// Undirected simple graph on the dataset's nodes: an edge per pair with at
/// least one interaction in either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryGraph {
    n_nodes: usize,
    /// Unique, sorted, `i < j`.
    edges: Vec<(u32, u32)>,
}

impl BinaryGraph {
    pub fn new(n_nodes: usize, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(Error::invalid("edge", e.0 as f64, "self-loops are not allowed"));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 as usize >= n_nodes {
                return Err(Error::invalid("edge endpoint", e.1 as f64, "exceeds node count"));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(BinaryGraph { n_nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Undirected degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for &(i, j) in &self.edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        deg
    }
}

/// Collapses interactions to the undirected binary graph.
pub fn binary_projection(dataset: &InteractionDataset) -> BinaryGraph {
    let edges = dataset
        .interactions()
        .iter()
        .map(|ev| {
            if ev.src < ev.dst {
                (ev.src, ev.dst)
            } else {
                (ev.dst, ev.src)
            }
        })
        .collect();
    BinaryGraph::new(dataset.n_nodes(), edges).expect("dataset invariants imply valid edges")
}

/// Histogram of undirected degrees: entry `d` is the number of nodes with
/// degree `d`.
pub fn degree_distribution(graph: &BinaryGraph) -> Vec<usize> {
    let degrees = graph.degrees();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for d in degrees {
        hist[d] += 1;
    }
    hist
}
