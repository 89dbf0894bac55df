//! Analysis requests shared by the CLI and the admin endpoint.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use coselect_core::community::CommunityMode;
use coselect_core::pipeline::{AnalysisOptions, Thresholds};
use coselect_core::survey::SessionId;
use coselect_core::sweep::grid_from_range;
use serde::Deserialize;

/// A sweep grid, either listed or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRequest {
    /// Log file to analyze. When absent the stored sessions are used.
    pub log: Option<PathBuf>,
    /// Restrict stored sessions to these ids.
    pub sessions: Option<Vec<SessionId>>,
    pub tau: Option<f64>,
    pub grid: Option<GridSpec>,
    pub min_support: Option<u32>,
    pub community_mode: Option<CommunityMode>,
    /// Directory to write report files into.
    pub output_dir: Option<PathBuf>,
}

impl AnalysisRequest {
    /// Pipeline options for this request over a pool of `pool_size` designs.
    pub fn options(&self, pool_size: usize) -> Result<AnalysisOptions, String> {
        let thresholds = match (self.tau, &self.grid) {
            (Some(tau), None) => Thresholds::Single(tau),
            (None, Some(GridSpec::List(grid))) => Thresholds::Grid(grid.clone()),
            (None, Some(GridSpec::Range { from, to, step })) => {
                Thresholds::Grid(grid_from_range(*from, *to, *step).map_err(|e| e.to_string())?)
            }
            _ => return Err("give exactly one of tau or grid".into()),
        };
        let mut options = AnalysisOptions {
            pool_size,
            thresholds,
            ..AnalysisOptions::default()
        };
        if let Some(min_support) = self.min_support {
            options.min_support = min_support;
        }
        if let Some(mode) = self.community_mode {
            options.graph.community_mode = mode;
        }
        Ok(options)
    }
}

/// Writes every file into `dir`, creating it if needed. Returns the paths
/// written, in name order.
pub fn write_files(
    dir: &Path,
    files: &BTreeMap<&'static str, Vec<u8>>,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_one_threshold_source() {
        let req = |json: &str| serde_json::from_str::<AnalysisRequest>(json).unwrap();
        assert!(req("{}").options(72).is_err());
        assert!(req(r#"{"tau":0.15,"grid":[0.1,0.2]}"#).options(72).is_err());
        assert_eq!(
            req(r#"{"tau":0.15}"#).options(72).unwrap().thresholds,
            Thresholds::Single(0.15)
        );
        let o = req(r#"{"grid":{"from":0,"to":0.6,"step":0.05},"min_support":2}"#)
            .options(72)
            .unwrap();
        let Thresholds::Grid(grid) = o.thresholds else {
            panic!()
        };
        assert_eq!(grid.len(), 13);
        assert_eq!(o.min_support, 2);
        assert!(serde_json::from_str::<AnalysisRequest>(r#"{"tau":0.1,"bogus":1}"#).is_err());
    }
}
