//! Brute-force reference implementations shared by the integration tests.
//! Each one trades speed for being obviously correct on tiny inputs.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use coselect_core::graph::{Edge, SimilarityNetwork};
use coselect_core::survey::{DesignId, SelectionEvent};
use num_rational::Ratio;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on `0..n`: a random spanning tree (when `connected`) plus
/// each remaining pair with probability `p`. Weights in `(0, 1]` when
/// `weighted`, else 1.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: f64,
    connected: bool,
    weighted: bool,
) -> SimilarityNetwork {
    let mut adj = vec![vec![false; n]; n];
    if connected {
        for v in 1..n {
            let u = rng.random_range(0..v);
            adj[u][v] = true;
        }
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if !adj[u][v] && rng.random_bool(p) {
                adj[u][v] = true;
            }
        }
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if adj[u][v] {
                let weight = if weighted {
                    // coarse grid so that equal-length paths actually occur
                    f64::from(rng.random_range(1..=4u32)) / 4.0
                } else {
                    1.0
                };
                edges.push(Edge {
                    u: u as DesignId,
                    v: v as DesignId,
                    weight,
                });
            }
        }
    }
    let vertices: Vec<DesignId> = (0..n as DesignId).collect();
    SimilarityNetwork::from_parts(&vertices, &edges, 0.0)
}

fn dense_adjacency(g: &SimilarityNetwork) -> Vec<Vec<Option<f64>>> {
    let n = g.vertex_count();
    let mut adj = vec![vec![None; n]; n];
    for e in g.edges() {
        let a = g.index_of(e.u).unwrap();
        let b = g.index_of(e.v).unwrap();
        adj[a][b] = Some(e.weight);
        adj[b][a] = Some(e.weight);
    }
    adj
}

fn edge_index(g: &SimilarityNetwork, a: usize, b: usize) -> usize {
    let (u, v) = (g.vertex(a).min(g.vertex(b)), g.vertex(a).max(g.vertex(b)));
    g.edges().iter().position(|e| e.u == u && e.v == v).unwrap()
}

/// Every simple path from `s` to `t`, as vertex sequences.
fn simple_paths(adj: &[Vec<Option<f64>>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(
        adj: &[Vec<Option<f64>>],
        t: usize,
        path: &mut Vec<usize>,
        seen: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        let here = *path.last().unwrap();
        if here == t {
            out.push(path.clone());
            return;
        }
        for next in 0..adj.len() {
            if adj[here][next].is_some() && !seen[next] {
                seen[next] = true;
                path.push(next);
                go(adj, t, path, seen, out);
                path.pop();
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; adj.len()];
    seen[s] = true;
    let mut out = Vec::new();
    go(adj, t, &mut vec![s], &mut seen, &mut out);
    out
}

/// Unweighted edge betweenness by enumerating every shortest path of every
/// unordered pair, in exact rationals.
pub fn betweenness_exact(g: &SimilarityNetwork) -> Vec<Ratio<i64>> {
    let adj = dense_adjacency(g);
    let n = g.vertex_count();
    let mut out = vec![Ratio::from_integer(0); g.edge_count()];
    for s in 0..n {
        for t in (s + 1)..n {
            let paths = simple_paths(&adj, s, t);
            let Some(shortest) = paths.iter().map(Vec::len).min() else {
                continue;
            };
            let best: Vec<_> = paths.iter().filter(|p| p.len() == shortest).collect();
            let share = Ratio::new(1, best.len() as i64);
            for p in best {
                for w in p.windows(2) {
                    out[edge_index(g, w[0], w[1])] += share;
                }
            }
        }
    }
    out
}

/// Edge betweenness with edge length `1 / weight`, by path enumeration.
/// Path lengths within a relative `1e-12` count as equal.
pub fn betweenness_weighted(g: &SimilarityNetwork) -> Vec<f64> {
    let adj = dense_adjacency(g);
    let n = g.vertex_count();
    let mut out = vec![0.0; g.edge_count()];
    let length =
        |p: &Vec<usize>| -> f64 { p.windows(2).map(|w| 1.0 / adj[w[0]][w[1]].unwrap()).sum() };
    for s in 0..n {
        for t in (s + 1)..n {
            let paths = simple_paths(&adj, s, t);
            if paths.is_empty() {
                continue;
            }
            let lengths: Vec<f64> = paths.iter().map(length).collect();
            let min = lengths.iter().copied().fold(f64::INFINITY, f64::min);
            let best: Vec<_> = paths
                .iter()
                .zip(&lengths)
                .filter(|(_, &l)| l <= min * (1.0 + 1e-12))
                .map(|(p, _)| p)
                .collect();
            let share = 1.0 / best.len() as f64;
            for p in best {
                for w in p.windows(2) {
                    out[edge_index(g, w[0], w[1])] += share;
                }
            }
        }
    }
    out
}

/// Sum of hop distances over connected unordered pairs (Floyd–Warshall).
pub fn total_hop_distance(g: &SimilarityNetwork) -> u64 {
    let adj = dense_adjacency(g);
    let n = adj.len();
    let inf = u64::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if adj[i][j].is_some() {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    let mut total = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i][j] < inf {
                total += d[i][j];
            }
        }
    }
    total
}

/// `Q = (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j)` over ordered pairs.
pub fn modularity_double_sum(g: &SimilarityNetwork, labels: &[usize], weighted: bool) -> f64 {
    let adj = dense_adjacency(g);
    let n = adj.len();
    let a = |i: usize, j: usize| adj[i][j].map_or(0.0, |w| if weighted { w } else { 1.0 });
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a(i, j)).sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a(i, j) - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max {
            cur.push(c);
            go(i + 1, n, max.max(c + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        go(0, n, 0, &mut Vec::new(), &mut out);
    }
    out
}

pub fn to_assignment(g: &SimilarityNetwork, labels: &[usize]) -> BTreeMap<DesignId, usize> {
    g.vertices()
        .iter()
        .copied()
        .zip(labels.iter().copied())
        .collect()
}

/// Maximal cliques of size `>= min_size` by checking every vertex subset.
pub fn cliques_exhaustive(g: &SimilarityNetwork, min_size: usize) -> Vec<Vec<DesignId>> {
    let adj = dense_adjacency(g);
    let n = adj.len();
    assert!(n <= 20);
    let is_clique = |mask: u32| {
        (0..n).all(|i| {
            mask & (1 << i) == 0
                || (0..n).all(|j| i == j || mask & (1 << j) == 0 || adj[i][j].is_some())
        })
    };
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) < min_size.max(1) || !is_clique(mask) {
            continue;
        }
        let maximal = (0..n).all(|v| mask & (1 << v) != 0 || !is_clique(mask | (1 << v)));
        if maximal {
            out.push(
                (0..n)
                    .filter(|&v| mask & (1 << v) != 0)
                    .map(|v| g.vertex(v))
                    .collect(),
            );
        }
    }
    out.sort();
    out
}

/// Newman's degree assortativity, straight from the edge-sum formula.
pub fn newman_assortativity(g: &SimilarityNetwork) -> f64 {
    let m = g.edge_count() as f64;
    let deg = |id: DesignId| g.degree(g.index_of(id).unwrap()) as f64;
    let (mut prod, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for e in g.edges() {
        let (j, k) = (deg(e.u), deg(e.v));
        prod += j * k;
        sum += 0.5 * (j + k);
        sq += 0.5 * (j * j + k * k);
    }
    let mean = sum / m;
    (prod / m - mean * mean) / (sq / m - mean * mean)
}

/// Co-occurrence and co-selection counts by looping over every event and
/// every ordered pair of ids.
pub fn counts_quadruple_loop(
    events: &[SelectionEvent],
    n: usize,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let mut c = vec![vec![0; n]; n];
    let mut s = vec![vec![0; n]; n];
    for e in events {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (i32_, j32) = (i as DesignId, j as DesignId);
                if e.shown.contains(&i32_) && e.shown.contains(&j32) {
                    c[i][j] += 1;
                }
                if e.selected.contains(&i32_) && e.selected.contains(&j32) {
                    s[i][j] += 1;
                }
            }
        }
    }
    (c, s)
}

/// Random well-formed events over `0..n`.
pub fn random_events(
    rng: &mut ChaCha8Rng,
    count: usize,
    n: usize,
    k: usize,
) -> Vec<SelectionEvent> {
    let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    (0..count)
        .map(|i| {
            let shown: Vec<DesignId> = sample(rng, n, k)
                .into_iter()
                .map(|x| x as DesignId)
                .collect();
            let selected = shown
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.4))
                .collect();
            SelectionEvent {
                session_id: "t".into(),
                iteration_index: i as u32 + 1,
                shown,
                selected,
                recorded_at: at,
            }
        })
        .collect()
}
