//! Maximal clique enumeration (Bron–Kerbosch with Tomita pivoting) over
//! word-packed vertex sets.

use std::ops::ControlFlow;

use super::SimilarityNetwork;
use crate::survey::DesignId;

#[derive(Clone, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
        }
    }

    fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn intersect(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn intersection_len(&self, other: &BitSet) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn difference(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

/// Calls `visit` with each maximal clique (sorted design ids) of size at
/// least `min_size`. Stops early when `visit` breaks.
pub fn for_each_maximal_clique<F>(g: &SimilarityNetwork, min_size: usize, mut visit: F)
where
    F: FnMut(&[DesignId]) -> ControlFlow<()>,
{
    let n = g.vertex_count();
    if n == 0 {
        return;
    }
    let neighbors: Vec<BitSet> = (0..n)
        .map(|v| {
            let mut s = BitSet::empty(n);
            for &(w, _) in g.neighbors(v) {
                s.insert(w);
            }
            s
        })
        .collect();
    let mut current = Vec::new();
    let _ = expand(
        g,
        &neighbors,
        &mut current,
        BitSet::full(n),
        BitSet::empty(n),
        min_size,
        &mut visit,
    );
}

fn expand<F>(
    g: &SimilarityNetwork,
    neighbors: &[BitSet],
    current: &mut Vec<usize>,
    mut candidates: BitSet,
    mut excluded: BitSet,
    min_size: usize,
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[DesignId]) -> ControlFlow<()>,
{
    if candidates.is_empty() {
        if excluded.is_empty() && current.len() >= min_size {
            let mut ids: Vec<DesignId> = current.iter().map(|&v| g.vertex(v)).collect();
            ids.sort_unstable();
            return visit(&ids);
        }
        return ControlFlow::Continue(());
    }
    // pivot: the vertex of P ∪ X with the most neighbors in P
    let pivot = candidates
        .iter()
        .chain(excluded.iter())
        .max_by_key(|&u| {
            (
                candidates.intersection_len(&neighbors[u]),
                std::cmp::Reverse(u),
            )
        })
        .expect("candidates non-empty");
    let branch: Vec<usize> = candidates.difference(&neighbors[pivot]).iter().collect();
    for v in branch {
        current.push(v);
        expand(
            g,
            neighbors,
            current,
            candidates.intersect(&neighbors[v]),
            excluded.intersect(&neighbors[v]),
            min_size,
            visit,
        )?;
        current.pop();
        candidates.remove(v);
        excluded.insert(v);
    }
    ControlFlow::Continue(())
}

/// All maximal cliques with at least `min_size` vertices, each sorted, in
/// lexicographic order.
pub fn maximal_cliques(g: &SimilarityNetwork, min_size: usize) -> Vec<Vec<DesignId>> {
    let mut out = Vec::new();
    for_each_maximal_clique(g, min_size, |c| {
        out.push(c.to_vec());
        ControlFlow::Continue(())
    });
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_is_one_clique() {
        let k4 =
            SimilarityNetwork::from_unweighted(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(maximal_cliques(&k4, 1), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn barbell_cliques_by_min_size() {
        let g = SimilarityNetwork::from_unweighted(&[
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 3),
            (3, 4),
            (3, 5),
            (4, 5),
        ]);
        assert_eq!(maximal_cliques(&g, 3), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(
            maximal_cliques(&g, 2),
            vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 5]]
        );
    }

    #[test]
    fn triangle_with_pendant() {
        let g = SimilarityNetwork::from_unweighted(&[(0, 1), (0, 2), (1, 2), (2, 3)]);
        assert_eq!(maximal_cliques(&g, 2), vec![vec![0, 1, 2], vec![2, 3]]);
    }

    #[test]
    fn isolated_vertices_are_singleton_cliques() {
        let g = SimilarityNetwork::from_parts(&[0, 1, 2], &[], 0.0);
        assert_eq!(maximal_cliques(&g, 1).len(), 3);
        assert!(maximal_cliques(&g, 2).is_empty());
    }

    #[test]
    fn early_stop() {
        let g = SimilarityNetwork::from_unweighted(&[(0, 1), (2, 3), (4, 5)]);
        let mut seen = 0;
        for_each_maximal_clique(&g, 2, |_| {
            seen += 1;
            if seen == 2 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert_eq!(seen, 2);
    }

    #[test]
    fn bitset_iterates_across_words() {
        let mut s = BitSet::empty(130);
        for i in [0, 63, 64, 129] {
            s.insert(i);
        }
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
    }
}
