//! End-to-end analysis of a selection log into report files.
//!
//! Every output is a pure function of the inputs: maps are ordered, floats
//! are printed by a fixed formatter, and no wall-clock value is embedded.
//! Running the same analysis twice yields byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::community::{best_partition, girvan_newman, CommunityMode, Dendrogram, Partition};
use crate::graph::{
    build_graph, connected_components, diameter, for_each_maximal_clique, GraphError,
    SimilarityNetwork,
};
use crate::matrices::{accumulate, normalize, CoMatrix, MatrixError, NormMatrix};
use crate::metrics::{metrics_report, MetricsConfig, MetricsReport};
use crate::survey::{DesignId, SelectionEvent};
use crate::sweep::{
    pair_hierarchy, threshold_sweep, RankedPair, SweepError, SweepOptions, SweepReport,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

/// Either one threshold or a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    Single(f64),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub pool_size: usize,
    pub min_support: u32,
    pub thresholds: Thresholds,
    pub graph: SweepOptions,
    pub metrics: MetricsConfig,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            pool_size: 72,
            min_support: 1,
            thresholds: Thresholds::Single(0.15),
            graph: SweepOptions::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueSummary {
    pub min_size: usize,
    pub count: usize,
    pub truncated: bool,
    /// False when `count` exceeds [`CLIQUE_LIST_LIMIT`] and `members` is left empty.
    pub listed: bool,
    pub members: Vec<Vec<DesignId>>,
}

/// Reports list clique members only up to this many cliques.
pub const CLIQUE_LIST_LIMIT: usize = 10_000;

/// Community membership keyed by community id, with the partition's Q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityReport {
    pub modularity: f64,
    pub mode: CommunityMode,
    pub communities: BTreeMap<usize, Vec<DesignId>>,
}

impl CommunityReport {
    fn new(partition: &Partition, mode: CommunityMode) -> Self {
        Self {
            modularity: partition.modularity,
            mode,
            communities: partition.communities().into_iter().enumerate().collect(),
        }
    }
}

/// Single-threshold analysis summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tau: f64,
    pub min_support: u32,
    pub pool_size: usize,
    pub events: usize,
    pub vertices: usize,
    pub edges: usize,
    pub components: Vec<Vec<DesignId>>,
    pub cliques: CliqueSummary,
    pub diameter: Option<usize>,
    pub communities: Option<CommunityReport>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct SingleAnalysis {
    pub graph: SimilarityNetwork,
    pub dendrogram: Option<Dendrogram>,
    pub best: Option<Partition>,
    pub report: AnalysisReport,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub events: usize,
    pub cooccurrence: CoMatrix,
    pub coselection: CoMatrix,
    pub similarity: NormMatrix,
    pub hierarchy: Vec<RankedPair>,
    pub single: Option<SingleAnalysis>,
    pub sweep: Option<SweepReport>,
}

/// Analyzes a selection log.
pub fn analyze_events(
    events: &[SelectionEvent],
    options: &AnalysisOptions,
) -> Result<Analysis, PipelineError> {
    let (c, s) = accumulate(events, options.pool_size)?;
    analyze_counts(c, s, events.len(), options)
}

/// Analyzes precomputed co-occurrence and co-selection counts.
pub fn analyze_counts(
    c: CoMatrix,
    s: CoMatrix,
    events: usize,
    options: &AnalysisOptions,
) -> Result<Analysis, PipelineError> {
    let w = normalize(&c, &s, options.min_support)?;
    let hierarchy = pair_hierarchy(&w, &c);
    let (single, sweep) = match &options.thresholds {
        Thresholds::Single(tau) => (Some(analyze_single(&w, *tau, events, options)?), None),
        Thresholds::Grid(grid) => (None, Some(threshold_sweep(&w, grid, &options.graph)?)),
    };
    Ok(Analysis {
        events,
        cooccurrence: c,
        coselection: s,
        similarity: w,
        hierarchy,
        single,
        sweep,
    })
}

fn analyze_single(
    w: &NormMatrix,
    tau: f64,
    events: usize,
    options: &AnalysisOptions,
) -> Result<SingleAnalysis, PipelineError> {
    let graph = build_graph(w, tau, false)?;
    let mode = options.graph.community_mode;
    let dendrogram = if graph.edge_count() > 0 {
        Some(girvan_newman(&graph, mode).expect("graph has edges"))
    } else {
        None
    };
    let best = dendrogram.as_ref().map(|d| best_partition(d).clone());

    let mut members = Vec::new();
    let mut truncated = false;
    for_each_maximal_clique(&graph, options.graph.clique_min_size, |c| {
        if members.len() == options.graph.clique_limit {
            truncated = true;
            return ControlFlow::Break(());
        }
        members.push(c.to_vec());
        ControlFlow::Continue(())
    });
    let count = members.len();
    let listed = count <= CLIQUE_LIST_LIMIT;
    if listed {
        members.sort();
    } else {
        members = Vec::new();
    }

    let report = AnalysisReport {
        tau,
        min_support: options.min_support,
        pool_size: options.pool_size,
        events,
        vertices: graph.vertex_count(),
        edges: graph.edge_count(),
        components: connected_components(&graph),
        cliques: CliqueSummary {
            min_size: options.graph.clique_min_size,
            count,
            truncated,
            listed,
            members,
        },
        diameter: diameter(&graph).ok(),
        communities: best.as_ref().map(|p| CommunityReport::new(p, mode)),
        metrics: metrics_report(&graph, &options.metrics),
    };
    Ok(SingleAnalysis {
        graph,
        dendrogram,
        best,
        report,
    })
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report values serialize");
    out.push(b'\n');
    out
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV row per threshold: `tau,vertices,edges,components,modularity,cliques,diameter`.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("tau,vertices,edges,components,modularity,cliques,diameter\n");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.tau,
            e.vertices,
            e.edges,
            e.components(),
            fmt_opt_f64(e.modularity()),
            e.clique_count,
            e.diameter.map(|d| d.to_string()).unwrap_or_default()
        );
    }
    out
}

/// `i,j,weight,support` ranked from strongest pair down.
pub fn hierarchy_csv(hierarchy: &[RankedPair]) -> String {
    let mut out = String::from("i,j,weight,support\n");
    for p in hierarchy {
        let _ = writeln!(
            out,
            "{},{},{:.6},{}",
            p.pair.0, p.pair.1, p.weight, p.support
        );
    }
    out
}

impl Analysis {
    /// Matrix exports only.
    pub fn matrix_files(&self) -> BTreeMap<&'static str, Vec<u8>> {
        BTreeMap::from([
            ("cooccurrence.csv", self.cooccurrence.to_csv().into_bytes()),
            ("coselection.csv", self.coselection.to_csv().into_bytes()),
            ("similarity.csv", self.similarity.to_csv().into_bytes()),
        ])
    }

    /// Every report file, keyed by file name.
    pub fn files(&self) -> BTreeMap<&'static str, Vec<u8>> {
        let mut files = self.matrix_files();
        files.insert("hierarchy.csv", hierarchy_csv(&self.hierarchy).into_bytes());
        if let Some(single) = &self.single {
            files.insert("graph.edges", single.graph.to_edge_list().into_bytes());
            files.insert("report.json", json(&single.report));
            files.insert("metrics.json", json(&single.report.metrics));
            files.insert("communities.json", json(&single.report.communities));
            files.insert("dendrogram.json", json(&single.dendrogram));
        }
        if let Some(sweep) = &self.sweep {
            files.insert("sweep.json", json(sweep));
            files.insert("sweep.csv", sweep_csv(sweep).into_bytes());
        }
        files
    }

    /// The primary JSON document: the single-threshold report or the sweep.
    pub fn summary_json(&self) -> serde_json::Value {
        match (&self.single, &self.sweep) {
            (Some(single), _) => serde_json::to_value(&single.report),
            (None, Some(sweep)) => serde_json::to_value(sweep),
            (None, None) => Ok(serde_json::Value::Null),
        }
        .expect("report values serialize")
    }
}
