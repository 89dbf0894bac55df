//! Threshold sweep over the similarity matrix, the ranked pair hierarchy,
//! and typology roots.
//!
//! Roots are defined operationally: take the highest grid threshold whose
//! graph still has an edge; the surviving edges, grouped by connected
//! component at that threshold, are the root sets.

use std::cmp::Ordering;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::community::{best_partition, girvan_newman, CommunityMode, Partition};
use crate::graph::{
    build_graph, connected_components, diameter, for_each_maximal_clique, SimilarityNetwork,
};
use crate::matrices::{CoMatrix, NormMatrix};
use crate::survey::DesignId;

/// Printed alongside every sweep report.
pub const ROOT_DEFINITION: &str = "root sets: edges surviving at the highest grid threshold with a non-empty graph, grouped by connected component at that threshold";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no grid threshold leaves any edge")]
    NoSurvivors,
}

/// `from, from + step, ..., <= to`, rounded to 1e-9 to absorb float drift.
pub fn grid_from_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>, SweepError> {
    if step.is_nan() || step <= 0.0 || !from.is_finite() || !to.is_finite() || to < from {
        return Err(SweepError::InvalidGrid(format!(
            "range {from}..={to} step {step}"
        )));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn validate_grid(grid: &[f64]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::InvalidGrid("grid is empty".into()));
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(SweepError::InvalidGrid(format!(
            "threshold {t} outside [0, 1]"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub community_mode: CommunityMode,
    /// Smallest maximal clique that is counted.
    pub clique_min_size: usize,
    /// Clique counting stops here and the count is flagged as truncated.
    pub clique_limit: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            community_mode: CommunityMode::default(),
            clique_min_size: 3,
            clique_limit: 1_000_000,
        }
    }
}

/// Community structure of one thresholded graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub tau: f64,
    pub vertices: usize,
    pub edges: usize,
    pub component_sizes: Vec<usize>,
    pub clique_count: usize,
    pub clique_count_truncated: bool,
    pub diameter: Option<usize>,
    pub best_partition: Option<Partition>,
    pub pairs: Vec<(DesignId, DesignId)>,
}

impl SweepEntry {
    pub fn components(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn modularity(&self) -> Option<f64> {
        self.best_partition.as_ref().map(|p| p.modularity)
    }
}

/// Component-grouped survivors at the root threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RootSet {
    pub designs: Vec<DesignId>,
    pub pairs: Vec<(DesignId, DesignId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub grid: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub root_tau: Option<f64>,
    pub root_sets: Vec<RootSet>,
    pub root_designs: Vec<DesignId>,
    pub root_definition: &'static str,
}

pub(crate) struct GraphSummary {
    pub component_sizes: Vec<usize>,
    pub clique_count: usize,
    pub clique_count_truncated: bool,
    pub diameter: Option<usize>,
    pub best_partition: Option<Partition>,
}

pub(crate) fn summarize(g: &SimilarityNetwork, options: &SweepOptions) -> GraphSummary {
    let mut clique_count = 0;
    let mut truncated = false;
    for_each_maximal_clique(g, options.clique_min_size, |_| {
        if clique_count == options.clique_limit {
            truncated = true;
            return ControlFlow::Break(());
        }
        clique_count += 1;
        ControlFlow::Continue(())
    });
    let best = if g.edge_count() > 0 {
        let dendrogram =
            girvan_newman(g, options.community_mode).expect("non-empty graph with edges");
        Some(best_partition(&dendrogram).clone())
    } else {
        None
    };
    GraphSummary {
        component_sizes: connected_components(g).iter().map(Vec::len).collect(),
        clique_count,
        clique_count_truncated: truncated,
        diameter: diameter(g).ok(),
        best_partition: best,
    }
}

/// Runs the full graph analysis independently at every threshold.
pub fn threshold_sweep(
    w: &NormMatrix,
    grid: &[f64],
    options: &SweepOptions,
) -> Result<SweepReport, SweepError> {
    validate_grid(grid)?;
    let mut entries = Vec::with_capacity(grid.len());
    for &tau in grid {
        let g = build_graph(w, tau, false).map_err(|e| SweepError::InvalidGrid(e.to_string()))?;
        let summary = summarize(&g, options);
        entries.push(SweepEntry {
            tau,
            vertices: g.vertex_count(),
            edges: g.edge_count(),
            component_sizes: summary.component_sizes,
            clique_count: summary.clique_count,
            clique_count_truncated: summary.clique_count_truncated,
            diameter: summary.diameter,
            best_partition: summary.best_partition,
            pairs: g.edges().iter().map(|e| (e.u, e.v)).collect(),
        });
    }
    let mut report = SweepReport {
        grid: grid.to_vec(),
        entries,
        root_tau: None,
        root_sets: Vec::new(),
        root_designs: Vec::new(),
        root_definition: ROOT_DEFINITION,
    };
    if let Ok((tau, sets)) = root_sets(&report) {
        report.root_designs = flatten_roots(&sets);
        report.root_tau = Some(tau);
        report.root_sets = sets;
    }
    Ok(report)
}

/// Root sets at the highest non-empty grid threshold, with that threshold.
pub fn root_sets(sweep: &SweepReport) -> Result<(f64, Vec<RootSet>), SweepError> {
    let entry = sweep
        .entries
        .iter()
        .rev()
        .find(|e| !e.pairs.is_empty())
        .ok_or(SweepError::NoSurvivors)?;
    let edges: Vec<_> = entry
        .pairs
        .iter()
        .map(|&(u, v)| crate::graph::Edge { u, v, weight: 1.0 })
        .collect();
    let g = SimilarityNetwork::from_parts(&[], &edges, entry.tau);
    let sets = connected_components(&g)
        .into_iter()
        .map(|designs| {
            let pairs = entry
                .pairs
                .iter()
                .copied()
                .filter(|(u, _)| designs.binary_search(u).is_ok())
                .collect();
            RootSet { designs, pairs }
        })
        .collect();
    Ok((entry.tau, sets))
}

/// Union of all root-set designs, sorted.
pub fn root_designs(sweep: &SweepReport) -> Result<Vec<DesignId>, SweepError> {
    root_sets(sweep).map(|(_, sets)| flatten_roots(&sets))
}

fn flatten_roots(sets: &[RootSet]) -> Vec<DesignId> {
    let mut all: Vec<DesignId> = sets
        .iter()
        .flat_map(|s| s.designs.iter().copied())
        .collect();
    all.sort_unstable();
    all
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPair {
    pub pair: (DesignId, DesignId),
    pub weight: f64,
    pub support: u32,
}

/// Supported pairs with positive weight, by weight descending, then
/// co-occurrence count descending, then pair ascending.
pub fn pair_hierarchy(w: &NormMatrix, c: &CoMatrix) -> Vec<RankedPair> {
    let n = w.dim().min(c.dim());
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if w.supported(i, j) && w.weight(i, j) > 0.0 {
                pairs.push(RankedPair {
                    pair: (i as DesignId, j as DesignId),
                    weight: w.weight(i, j),
                    support: c.get(i, j),
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap_or(Ordering::Equal)
            .then(b.support.cmp(&a.support))
            .then(a.pair.cmp(&b.pair))
    });
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{accumulate, normalize};
    use crate::survey::SelectionEvent;
    use chrono::{TimeZone, Utc};

    #[test]
    fn grid_arithmetic() {
        let grid = grid_from_range(0.0, 0.6, 0.05).unwrap();
        assert_eq!(grid.len(), 13);
        assert_eq!(grid[3], 0.15);
        assert_eq!(*grid.last().unwrap(), 0.6);
        assert!(grid_from_range(0.0, 0.6, 0.0).is_err());
        assert!(grid_from_range(0.5, 0.1, 0.1).is_err());
        assert!(validate_grid(&[0.3, 0.1]).is_err());
        assert!(validate_grid(&[0.1, 0.1]).is_err());
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.0, 1.2]).is_err());
    }

    fn weights() -> NormMatrix {
        NormMatrix::from_pairs(
            6,
            &[
                (0, 1, 0.9),
                (1, 2, 0.5),
                (0, 2, 0.4),
                (3, 4, 0.45),
                (4, 5, 0.3),
                (2, 3, 0.1),
            ],
        )
    }

    #[test]
    fn sweep_entries_are_antitone() {
        let report =
            threshold_sweep(&weights(), &[0.0, 0.15, 0.3], &SweepOptions::default()).unwrap();
        assert_eq!(report.entries.len(), 3);
        let edges: Vec<_> = report.entries.iter().map(|e| e.edges).collect();
        assert_eq!(edges, vec![6, 5, 5]);
        assert_eq!(report.entries[1].components(), 2);
        assert_eq!(report.root_tau, Some(0.3));
    }

    #[test]
    fn single_strongest_pair_is_the_root() {
        let grid = grid_from_range(0.0, 0.9, 0.1).unwrap();
        let report = threshold_sweep(&weights(), &grid, &SweepOptions::default()).unwrap();
        assert_eq!(root_designs(&report).unwrap(), vec![0, 1]);
        assert_eq!(report.root_sets.len(), 1);
        assert_eq!(report.root_sets[0].pairs, vec![(0, 1)]);
    }

    #[test]
    fn two_disjoint_pairs_give_two_root_sets() {
        let w = NormMatrix::from_pairs(5, &[(0, 1, 0.8), (2, 3, 0.8), (1, 2, 0.2)]);
        let report = threshold_sweep(&w, &[0.0, 0.5, 0.8], &SweepOptions::default()).unwrap();
        let (tau, sets) = root_sets(&report).unwrap();
        assert_eq!(tau, 0.8);
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].designs, vec![0, 1]);
        assert_eq!(sets[1].designs, vec![2, 3]);
    }

    #[test]
    fn empty_top_threshold_entry() {
        let report = threshold_sweep(&weights(), &[1.0], &SweepOptions::default()).unwrap();
        let e = &report.entries[0];
        assert_eq!((e.vertices, e.edges), (0, 0));
        assert!(e.best_partition.is_none());
        assert!(e.diameter.is_none());
        assert_eq!(root_designs(&report), Err(SweepError::NoSurvivors));
        assert!(report.root_tau.is_none());
    }

    #[test]
    fn hierarchy_order() {
        let w = NormMatrix::from_pairs(6, &[(0, 1, 0.8), (2, 3, 0.5), (4, 5, 0.5)]);
        let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let mut events = Vec::new();
        for (pair, times) in [((0, 1), 10), ((2, 3), 8), ((4, 5), 3)] {
            for _ in 0..times {
                events.push(SelectionEvent {
                    session_id: "s".into(),
                    iteration_index: 1,
                    shown: vec![pair.0, pair.1],
                    selected: vec![],
                    recorded_at: at,
                });
            }
        }
        let (c, _) = accumulate(&events, 6).unwrap();
        let h = pair_hierarchy(&w, &c);
        let order: Vec<_> = h.iter().map(|p| p.pair).collect();
        assert_eq!(order, vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(h[1].support, 8);
    }

    #[test]
    fn hierarchy_ties_fall_back_to_pair_order() {
        let w = NormMatrix::from_pairs(4, &[(2, 3, 0.5), (0, 3, 0.5), (0, 1, 0.5)]);
        let c = CoMatrix::zeros(4);
        let order: Vec<_> = pair_hierarchy(&w, &c).iter().map(|p| p.pair).collect();
        assert_eq!(order, vec![(0, 1), (0, 3), (2, 3)]);
        let (c, s) = accumulate(std::iter::empty(), 4).unwrap();
        assert!(pair_hierarchy(&normalize(&c, &s, 1).unwrap(), &c).is_empty());
    }
}
