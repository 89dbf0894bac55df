//! Synthetic respondents over a catalog with planted typologies.
//!
//! Respondent model: each iteration, pick an anchor uniformly from the
//! panel and select every shown design of the anchor's typology; then drop
//! each of those with probability `miss_rate` and add each other shown
//! design with probability `false_rate`. This is a verification model, not
//! a claim about how people group designs.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::survey::{DesignId, SelectionEvent, Session, SessionConfig, SessionId, SurveyError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error("no overlap between partition and catalog")]
    Undefined,
}

/// Ground-truth typology label per design id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCatalog {
    pub typologies: usize,
    pub labels: Vec<usize>,
}

impl PlantedCatalog {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: DesignId) -> Option<usize> {
        self.labels.get(id as usize).copied()
    }

    /// Design ids of each typology.
    pub fn members(&self) -> Vec<Vec<DesignId>> {
        let mut out = vec![Vec::new(); self.typologies];
        for (id, &label) in self.labels.iter().enumerate() {
            out[label].push(id as DesignId);
        }
        out
    }
}

/// Round-robin labels shuffled by `seed`; typology sizes differ by at most 1.
pub fn planted_catalog(n: usize, g: usize, seed: u64) -> Result<PlantedCatalog, SimError> {
    if g == 0 || g > n {
        return Err(SimError::InvalidConfig(format!(
            "need 1 <= typologies <= pool size, got {g} typologies for {n} designs"
        )));
    }
    let mut labels: Vec<usize> = (0..n).map(|i| i % g).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(PlantedCatalog {
        typologies: g,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Probability that a matching design is left out (β).
    pub miss_rate: f64,
    /// Probability that a non-matching design is added (ε).
    pub false_rate: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        miss_rate: 0.0,
        false_rate: 0.0,
    };

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("miss_rate", self.miss_rate),
            ("false_rate", self.false_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Timestamps of simulated events start here and advance one second per
/// iteration, keeping simulated logs byte-reproducible.
fn simulated_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap()
}

fn respond(
    catalog: &PlantedCatalog,
    config: &SessionConfig,
    noise: &NoiseModel,
    id: SessionId,
    seed: u64,
    start: DateTime<Utc>,
) -> Result<Vec<SelectionEvent>, SimError> {
    if config.pool_size != catalog.len() {
        return Err(SimError::InvalidConfig(format!(
            "pool_size {} does not match catalog of {}",
            config.pool_size,
            catalog.len()
        )));
    }
    noise.validate()?;
    let mut session = Session::new(
        id,
        SessionConfig {
            rng_seed: seed,
            ..*config
        },
        "planted",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut events = Vec::with_capacity(config.iterations as usize);
    for iteration in 1..=config.iterations {
        let panel = session.next_panel()?.to_vec();
        let anchor = panel[rng.random_range(0..panel.len())];
        let typology = catalog.labels[anchor as usize];
        let selected: Vec<DesignId> = panel
            .iter()
            .copied()
            .filter(|&id| {
                if catalog.labels[id as usize] == typology {
                    !rng.random_bool(noise.miss_rate)
                } else {
                    rng.random_bool(noise.false_rate)
                }
            })
            .collect();
        let at = start + Duration::seconds(i64::from(iteration));
        events.push(session.record_selection(iteration, &selected, at)?);
    }
    Ok(events)
}

/// One respondent's full log under `noise`, drawn from `seed`.
pub fn simulate_respondent(
    catalog: &PlantedCatalog,
    config: &SessionConfig,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<SelectionEvent>, SimError> {
    respond(
        catalog,
        config,
        noise,
        SessionId::new(format!("sim-{seed:016x}")),
        seed,
        simulated_epoch(),
    )
}

/// Parameters of a simulated respondent population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub config: SessionConfig,
    pub noise: NoiseModel,
    pub respondents: usize,
    pub seed: u64,
    /// Draw each respondent's rates uniformly from `[0, 2·rate]` (capped at
    /// 1) instead of using `noise` verbatim.
    #[serde(default)]
    pub heterogeneous: bool,
}

/// SplitMix64 step; gives each respondent an independent seed.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Logs of `spec.respondents` independent respondents, in respondent order.
/// Respondent `r` gets session id `rNNNNN`.
pub fn simulate_population(
    catalog: &PlantedCatalog,
    spec: &PopulationSpec,
) -> Result<Vec<SelectionEvent>, SimError> {
    spec.config.validate()?;
    spec.noise.validate()?;
    let mut out = Vec::with_capacity(spec.respondents * spec.config.iterations as usize);
    for r in 0..spec.respondents {
        let seed = mix_seed(spec.seed, r as u64);
        let noise = if spec.heterogeneous {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            NoiseModel {
                miss_rate: (rng.random::<f64>() * 2.0 * spec.noise.miss_rate).min(1.0),
                false_rate: (rng.random::<f64>() * 2.0 * spec.noise.false_rate).min(1.0),
            }
        } else {
            spec.noise
        };
        let start =
            simulated_epoch() + Duration::seconds(r as i64 * i64::from(spec.config.iterations));
        out.extend(respond(
            catalog,
            &spec.config,
            &noise,
            SessionId::new(format!("r{r:05}")),
            seed,
            start,
        )?);
    }
    Ok(out)
}

/// Record of a simulation run, sufficient to score an analysis against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub typologies: usize,
    pub catalog_seed: u64,
    pub population: PopulationSpec,
    pub labels: Vec<usize>,
}

/// Adjusted Rand Index between two labelings of the same items. Two trivial
/// labelings (both all-one-cluster or both all-singletons) score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    if n == 0 {
        return None;
    }
    let pairs = |k: u64| k * k.saturating_sub(1) / 2;
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index = joint.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_a = rows.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_b = cols.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let total = pairs(n as u64) as f64;
    if total == 0.0 {
        return Some(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Some(1.0);
    }
    Some((index - expected) / (max - expected))
}

/// ARI between a detected partition and the planted labels, over the ids
/// the partition covers.
pub fn recovery_score(partition: &Partition, catalog: &PlantedCatalog) -> Result<f64, SimError> {
    let (found, truth): (Vec<usize>, Vec<usize>) = partition
        .assignment
        .iter()
        .filter_map(|(&id, &c)| catalog.label(id).map(|l| (c, l)))
        .unzip();
    adjusted_rand_index(&found, &truth).ok_or(SimError::Undefined)
}
