//! Thresholded similarity network and its structural primitives.

mod cliques;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::matrices::NormMatrix;
use crate::survey::DesignId;

pub use cliques::{for_each_maximal_clique, maximal_cliques};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

/// Undirected weighted edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: DesignId,
    pub v: DesignId,
    pub weight: f64,
}

/// Undirected weighted graph over design ids.
///
/// Vertices are kept sorted and addressed internally by their position
/// ("local index"); edges are sorted by `(u, v)` and addressed by position.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityNetwork {
    threshold: f64,
    vertices: Vec<DesignId>,
    edges: Vec<Edge>,
    // local vertex -> [(local neighbor, edge index)], sorted by neighbor
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl SimilarityNetwork {
    /// Assembles a graph from explicit parts. Edge endpoints are added to the
    /// vertex set if missing; self-loops and repeated pairs are ignored
    /// (first occurrence wins).
    pub fn from_parts(vertices: &[DesignId], edges: &[Edge], threshold: f64) -> Self {
        let mut verts: Vec<DesignId> = vertices.to_vec();
        verts.extend(edges.iter().flat_map(|e| [e.u, e.v]));
        verts.sort_unstable();
        verts.dedup();

        let mut normalized: Vec<Edge> = edges
            .iter()
            .filter(|e| e.u != e.v)
            .map(|e| Edge {
                u: e.u.min(e.v),
                v: e.u.max(e.v),
                weight: e.weight,
            })
            .collect();
        normalized.sort_by_key(|e| (e.u, e.v));
        normalized.dedup_by_key(|e| (e.u, e.v));

        let mut adjacency = vec![Vec::new(); verts.len()];
        for (idx, e) in normalized.iter().enumerate() {
            let a = verts.binary_search(&e.u).expect("endpoint registered");
            let b = verts.binary_search(&e.v).expect("endpoint registered");
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self {
            threshold,
            vertices: verts,
            edges: normalized,
            adjacency,
        }
    }

    /// Unit-weight graph from an edge list; handy for fixtures.
    pub fn from_unweighted(pairs: &[(DesignId, DesignId)]) -> Self {
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(u, v)| Edge { u, v, weight: 1.0 })
            .collect();
        Self::from_parts(&[], &edges, 0.0)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn vertices(&self) -> &[DesignId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Local index of a design id.
    pub fn index_of(&self, id: DesignId) -> Option<usize> {
        self.vertices.binary_search(&id).ok()
    }

    pub fn vertex(&self, local: usize) -> DesignId {
        self.vertices[local]
    }

    /// `(neighbor, edge index)` pairs of a local vertex, sorted by neighbor.
    pub fn neighbors(&self, local: usize) -> &[(usize, usize)] {
        &self.adjacency[local]
    }

    pub fn degree(&self, local: usize) -> usize {
        self.adjacency[local].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .is_ok()
    }

    /// Local endpoints of an edge.
    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        let e = &self.edges[edge];
        (
            self.index_of(e.u).expect("endpoint registered"),
            self.index_of(e.v).expect("endpoint registered"),
        )
    }

    /// Edge-list export: `i j weight` per line, sorted by `(i, j)`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:.6}", e.u, e.v, e.weight);
        }
        out
    }

    /// Hop distances from a local source; `None` for unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or_default();
            for &(w, _) in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Component label per local vertex, labels numbered by first appearance
    /// in vertex order.
    pub(crate) fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.vertex_count()];
        let mut count = 0;
        for start in 0..self.vertex_count() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }
}

/// Keeps pair `(i, j)` when it is supported, has positive weight, and
/// `W[i][j] >= tau`.
pub fn build_graph(
    w: &NormMatrix,
    tau: f64,
    include_isolated: bool,
) -> Result<SimilarityNetwork, GraphError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(GraphError::InvalidThreshold(tau));
    }
    let n = w.dim();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let weight = w.weight(i, j);
            if w.supported(i, j) && weight > 0.0 && weight >= tau {
                edges.push(Edge {
                    u: i as DesignId,
                    v: j as DesignId,
                    weight,
                });
            }
        }
    }
    let vertices: Vec<DesignId> = if include_isolated {
        (0..n as DesignId).collect()
    } else {
        Vec::new()
    };
    Ok(SimilarityNetwork::from_parts(&vertices, &edges, tau))
}

/// Maximal connected vertex sets, each sorted, ordered by smallest member.
pub fn connected_components(g: &SimilarityNetwork) -> Vec<Vec<DesignId>> {
    let (labels, count) = g.component_labels();
    let mut comps = vec![Vec::new(); count];
    for (local, &label) in labels.iter().enumerate() {
        comps[label].push(g.vertex(local));
    }
    // labels follow vertex order, so components already come sorted by their
    // smallest member
    comps
}

/// Largest hop eccentricity over all components.
pub fn diameter(g: &SimilarityNetwork) -> Result<usize, GraphError> {
    if g.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    Ok((0..g.vertex_count())
        .map(|s| g.bfs_distances(s).into_iter().flatten().max().unwrap_or(0))
        .max()
        .unwrap_or(0))
}
