//! Girvan–Newman divisive community detection.
//!
//! Edges are removed one at a time in order of current betweenness
//! (recomputed after every removal). Whenever the residual graph gains a
//! component, the component partition is recorded and scored for modularity
//! against the original graph. The best-scoring recorded partition is the
//! community structure.

mod betweenness;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::SimilarityNetwork;
use crate::survey::DesignId;

pub use betweenness::edge_betweenness;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommunityError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("edge ({u}, {v}) has non-positive weight {weight}")]
    InvalidWeight {
        u: DesignId,
        v: DesignId,
        weight: f64,
    },
    #[error("partition does not cover vertex {0}")]
    InvalidPartition(DesignId),
    #[error("modularity is undefined on a graph without edges")]
    UndefinedModularity,
}

/// How shortest paths are measured for betweenness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Hop count.
    Unweighted,
    /// Edge length `1 / weight`.
    WeightedInverse,
}

/// How edges count toward modularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    Unweighted,
    Weighted,
}

/// Betweenness on topology, modularity on similarity weights by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityMode {
    pub betweenness: PathMode,
    pub modularity: QualityMode,
}

impl Default for CommunityMode {
    fn default() -> Self {
        Self {
            betweenness: PathMode::Unweighted,
            modularity: QualityMode::Weighted,
        }
    }
}

/// A hard partition of graph vertices with its modularity score.
/// Community ids are dense and numbered by smallest member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub assignment: BTreeMap<DesignId, usize>,
    pub modularity: f64,
}

impl Partition {
    /// Builds a partition from per-local-vertex labels, renumbering
    /// communities by first appearance in vertex order.
    fn from_labels(g: &SimilarityNetwork, labels: &[usize], modularity: f64) -> Self {
        let mut renumber = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (local, &label) in labels.iter().enumerate() {
            let next = renumber.len();
            let id = *renumber.entry(label).or_insert(next);
            assignment.insert(g.vertex(local), id);
        }
        Self {
            assignment,
            modularity,
        }
    }

    pub fn community_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |&m| m + 1)
    }

    /// Members of each community, sorted, indexed by community id.
    pub fn communities(&self) -> Vec<Vec<DesignId>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (&v, &c) in &self.assignment {
            out[c].push(v);
        }
        out
    }
}

/// `Q = Σ_c [ in_c / 2m − (tot_c / 2m)² ]` where `in_c` is twice the
/// intra-community edge mass and `tot_c` the degree sum of community `c`.
pub fn modularity(
    g: &SimilarityNetwork,
    assignment: &BTreeMap<DesignId, usize>,
    mode: QualityMode,
) -> Result<f64, CommunityError> {
    let mut labels = Vec::with_capacity(g.vertex_count());
    for &v in g.vertices() {
        labels.push(
            *assignment
                .get(&v)
                .ok_or(CommunityError::InvalidPartition(v))?,
        );
    }
    modularity_of_labels(g, &labels, mode)
}

fn modularity_of_labels(
    g: &SimilarityNetwork,
    labels: &[usize],
    mode: QualityMode,
) -> Result<f64, CommunityError> {
    let weight = |w: f64| match mode {
        QualityMode::Unweighted => 1.0,
        QualityMode::Weighted => w,
    };
    let m: f64 = g.edges().iter().map(|e| weight(e.weight)).sum();
    if g.edge_count() == 0 || m <= 0.0 {
        return Err(CommunityError::UndefinedModularity);
    }
    let communities = labels.iter().max().map_or(0, |&c| c + 1);
    let mut inside = vec![0.0; communities];
    let mut total = vec![0.0; communities];
    for (idx, e) in g.edges().iter().enumerate() {
        let w = weight(e.weight);
        let (a, b) = g.endpoints(idx);
        total[labels[a]] += w;
        total[labels[b]] += w;
        if labels[a] == labels[b] {
            inside[labels[a]] += 2.0 * w;
        }
    }
    let two_m = 2.0 * m;
    Ok(inside
        .iter()
        .zip(&total)
        .map(|(i, t)| i / two_m - (t / two_m).powi(2))
        .sum())
}

/// One edge removal: the edge and its betweenness at the time it was cut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    pub edge: (DesignId, DesignId),
    pub betweenness: f64,
}

/// A recorded component split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPoint {
    /// Number of removals performed when the split happened (the removal at
    /// `removal_sequence[removals - 1]` caused it).
    pub removals: usize,
    pub partition: Partition,
}

/// Full removal history of one Girvan–Newman run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    /// Components of the input graph before any removal.
    pub initial: Partition,
    pub removal_sequence: Vec<Removal>,
    pub splits: Vec<SplitPoint>,
}

/// Betweenness values closer than this (relative) count as tied.
const SCORE_TIE: f64 = 1e-9;

/// Runs Girvan–Newman to exhaustion. Ties in betweenness go to the
/// lexicographically smallest `(u, v)` edge.
pub fn girvan_newman(
    g: &SimilarityNetwork,
    mode: CommunityMode,
) -> Result<Dendrogram, CommunityError> {
    if g.is_empty() {
        return Err(CommunityError::EmptyGraph);
    }
    let (labels, mut components) = g.component_labels();
    let initial = Partition::from_labels(
        g,
        &labels,
        modularity_of_labels(g, &labels, mode.modularity)?,
    );

    let mut alive = vec![true; g.edge_count()];
    let mut removal_sequence = Vec::with_capacity(g.edge_count());
    let mut splits = Vec::new();
    for _ in 0..g.edge_count() {
        let scores = betweenness::masked_edge_betweenness(g, &alive, mode.betweenness)?;
        let mut best: Option<(usize, f64)> = None;
        for (idx, &score) in scores.iter().enumerate() {
            if !alive[idx] {
                continue;
            }
            match best {
                Some((_, top)) if score <= top + SCORE_TIE * top.max(1.0) => {}
                _ => best = Some((idx, score)),
            }
        }
        let (cut, score) = best.expect("an edge remains alive");
        alive[cut] = false;
        let e = g.edges()[cut];
        removal_sequence.push(Removal {
            edge: (e.u, e.v),
            betweenness: score,
        });

        let (a, b) = g.endpoints(cut);
        if !reachable(g, &alive, a, b) {
            let labels = masked_labels(g, &alive);
            components += 1;
            debug_assert_eq!(labels.iter().max().map(|m| m + 1), Some(components));
            let q = modularity_of_labels(g, &labels, mode.modularity)?;
            splits.push(SplitPoint {
                removals: removal_sequence.len(),
                partition: Partition::from_labels(g, &labels, q),
            });
        }
    }
    Ok(Dendrogram {
        initial,
        removal_sequence,
        splits,
    })
}

fn reachable(g: &SimilarityNetwork, alive: &[bool], from: usize, to: usize) -> bool {
    let mut seen = vec![false; g.vertex_count()];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for &(w, e) in g.neighbors(v) {
            if alive[e] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

fn masked_labels(g: &SimilarityNetwork, alive: &[bool]) -> Vec<usize> {
    let mut label = vec![usize::MAX; g.vertex_count()];
    let mut next = 0;
    for start in 0..g.vertex_count() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(w, e) in g.neighbors(v) {
                if alive[e] && label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Modularity values closer than this count as tied.
const Q_TIE: f64 = 1e-12;

/// The recorded partition (level 0 included) with the highest modularity.
/// Ties go to fewer communities, then to the earlier record.
pub fn best_partition(dendrogram: &Dendrogram) -> &Partition {
    let mut best = &dendrogram.initial;
    for candidate in dendrogram.splits.iter().map(|s| &s.partition) {
        let better = candidate.modularity > best.modularity + Q_TIE
            || ((candidate.modularity - best.modularity).abs() <= Q_TIE
                && candidate.community_count() < best.community_count());
        if better {
            best = candidate;
        }
    }
    best
}
