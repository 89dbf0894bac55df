//! Edge betweenness by Brandes-style dependency accumulation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::{CommunityError, PathMode};
use crate::graph::SimilarityNetwork;

/// Relative tolerance for treating two weighted path lengths as equal.
const LENGTH_TIE: f64 = 1e-12;

/// Betweenness of every edge, aligned with `g.edges()`: for each edge the
/// sum over unordered vertex pairs of the fraction of shortest paths between
/// them that use the edge. In [`PathMode::WeightedInverse`] an edge of weight
/// `w` has length `1 / w`.
pub fn edge_betweenness(g: &SimilarityNetwork, mode: PathMode) -> Result<Vec<f64>, CommunityError> {
    if g.is_empty() {
        return Err(CommunityError::EmptyGraph);
    }
    let alive = vec![true; g.edge_count()];
    masked_edge_betweenness(g, &alive, mode)
}

/// As [`edge_betweenness`], over the subgraph of edges with `alive[e]` set.
/// Dead edges score 0.
pub(crate) fn masked_edge_betweenness(
    g: &SimilarityNetwork,
    alive: &[bool],
    mode: PathMode,
) -> Result<Vec<f64>, CommunityError> {
    if mode == PathMode::WeightedInverse {
        if let Some(e) = g
            .edges()
            .iter()
            .zip(alive)
            .find(|(e, &a)| a && !(e.weight > 0.0 && e.weight.is_finite()))
        {
            return Err(CommunityError::InvalidWeight {
                u: e.0.u,
                v: e.0.v,
                weight: e.0.weight,
            });
        }
    }
    let n = g.vertex_count();
    let mut scores = vec![0.0; g.edge_count()];
    let mut sp = ShortestPaths::new(n);
    for source in 0..n {
        match mode {
            PathMode::Unweighted => sp.bfs(g, alive, source),
            PathMode::WeightedInverse => sp.dijkstra(g, alive, source),
        }
        sp.accumulate(&mut scores);
    }
    // each unordered pair was counted from both ends
    for s in &mut scores {
        *s /= 2.0;
    }
    Ok(scores)
}

/// Single-source state reused across sources.
struct ShortestPaths {
    sigma: Vec<f64>,
    dist: Vec<f64>,
    delta: Vec<f64>,
    // (predecessor, edge index)
    preds: Vec<Vec<(usize, usize)>>,
    order: Vec<usize>,
}

impl ShortestPaths {
    fn new(n: usize) -> Self {
        Self {
            sigma: vec![0.0; n],
            dist: vec![f64::INFINITY; n],
            delta: vec![0.0; n],
            preds: vec![Vec::new(); n],
            order: Vec::with_capacity(n),
        }
    }

    fn reset(&mut self, source: usize) {
        self.sigma.fill(0.0);
        self.dist.fill(f64::INFINITY);
        self.delta.fill(0.0);
        for p in &mut self.preds {
            p.clear();
        }
        self.order.clear();
        self.sigma[source] = 1.0;
        self.dist[source] = 0.0;
    }

    fn bfs(&mut self, g: &SimilarityNetwork, alive: &[bool], source: usize) {
        self.reset(source);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            self.order.push(v);
            for &(w, e) in g.neighbors(v) {
                if !alive[e] {
                    continue;
                }
                if self.dist[w].is_infinite() {
                    self.dist[w] = self.dist[v] + 1.0;
                    queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1.0 {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push((v, e));
                }
            }
        }
    }

    fn dijkstra(&mut self, g: &SimilarityNetwork, alive: &[bool], source: usize) {
        self.reset(source);
        let mut settled = vec![false; self.sigma.len()];
        let mut heap = BinaryHeap::from([Frontier {
            dist: 0.0,
            vertex: source,
        }]);
        while let Some(Frontier { dist, vertex: v }) = heap.pop() {
            if settled[v] || dist > self.dist[v] {
                continue;
            }
            settled[v] = true;
            self.order.push(v);
            for &(w, e) in g.neighbors(v) {
                if !alive[e] || settled[w] {
                    continue;
                }
                let alt = self.dist[v] + 1.0 / g.edges()[e].weight;
                let current = self.dist[w];
                let tol = LENGTH_TIE * alt.max(1.0);
                if alt < current - tol {
                    self.dist[w] = alt;
                    self.sigma[w] = self.sigma[v];
                    self.preds[w].clear();
                    self.preds[w].push((v, e));
                    heap.push(Frontier {
                        dist: alt,
                        vertex: w,
                    });
                } else if (alt - current).abs() <= tol {
                    self.sigma[w] += self.sigma[v];
                    self.preds[w].push((v, e));
                }
            }
        }
    }

    /// Back-propagates pair dependencies in reverse settle order.
    fn accumulate(&mut self, scores: &mut [f64]) {
        while let Some(w) = self.order.pop() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &(v, e) in &self.preds[w] {
                let c = self.sigma[v] * coeff;
                scores[e] += c;
                self.delta[v] += c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    dist: f64,
    vertex: usize,
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
    // min-heap on distance, then vertex index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, SimilarityNetwork};

    fn lookup(g: &SimilarityNetwork, scores: &[f64], u: u32, v: u32) -> f64 {
        let idx = g.edges().iter().position(|e| e.u == u && e.v == v).unwrap();
        scores[idx]
    }

    #[test]
    fn path_of_three() {
        let g = SimilarityNetwork::from_unweighted(&[(0, 1), (1, 2)]);
        let b = edge_betweenness(&g, PathMode::Unweighted).unwrap();
        assert_eq!(b, vec![2.0, 2.0]);
    }

    #[test]
    fn barbell_bridge_carries_all_cross_pairs() {
        let g = SimilarityNetwork::from_unweighted(&[
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 3),
            (3, 4),
            (3, 5),
            (4, 5),
        ]);
        let b = edge_betweenness(&g, PathMode::Unweighted).unwrap();
        let bridge = lookup(&g, &b, 2, 3);
        assert_eq!(bridge, 9.0);
        for (i, &s) in b.iter().enumerate() {
            if g.edges()[i] != g.edges()[3] {
                assert!(s < bridge);
            }
        }
    }

    #[test]
    fn weighted_inverse_routes_around_weak_edge() {
        let g = SimilarityNetwork::from_parts(
            &[],
            &[
                Edge {
                    u: 0,
                    v: 1,
                    weight: 1.0,
                },
                Edge {
                    u: 1,
                    v: 2,
                    weight: 1.0,
                },
                Edge {
                    u: 0,
                    v: 2,
                    weight: 0.1,
                },
            ],
            0.0,
        );
        let b = edge_betweenness(&g, PathMode::WeightedInverse).unwrap();
        assert_eq!(lookup(&g, &b, 0, 2), 0.0);
        assert_eq!(lookup(&g, &b, 0, 1), 2.0);
        assert_eq!(lookup(&g, &b, 1, 2), 2.0);
    }

    #[test]
    fn square_splits_paths_evenly() {
        let g = SimilarityNetwork::from_unweighted(&[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let b = edge_betweenness(&g, PathMode::Unweighted).unwrap();
        // each edge: its own pair (1) plus half of two diagonal pairs (0.5 + 0.5)
        assert!(b.iter().all(|&x| (x - 2.0).abs() < 1e-12));
        let w = edge_betweenness(&g, PathMode::WeightedInverse).unwrap();
        assert!(w.iter().all(|&x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_non_positive_weights_in_weighted_mode() {
        let g = SimilarityNetwork::from_parts(
            &[],
            &[Edge {
                u: 0,
                v: 1,
                weight: 0.0,
            }],
            0.0,
        );
        assert!(matches!(
            edge_betweenness(&g, PathMode::WeightedInverse),
            Err(CommunityError::InvalidWeight { .. })
        ));
        assert!(edge_betweenness(&g, PathMode::Unweighted).is_ok());
        assert!(matches!(
            edge_betweenness(
                &SimilarityNetwork::from_unweighted(&[]),
                PathMode::Unweighted
            ),
            Err(CommunityError::EmptyGraph)
        ));
    }
}
