//! Co-occurrence (C), co-selection (S) and normalized similarity (W = S/C)
//! matrices folded from selection events.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use crate::survey::{DesignId, SelectionEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("design id {id} out of range for dimension {n}")]
    OutOfRange { id: DesignId, n: usize },
    #[error("co-selection exceeds co-occurrence at ({i}, {j}): S={s} > C={c}")]
    InconsistentCounts { i: usize, j: usize, s: u32, c: u32 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("malformed matrix csv: {0}")]
    Csv(String),
}

/// Symmetric count matrix with a zero diagonal, stored dense row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl CoMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    fn bump_pair(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] += 1;
        self.entries[j * self.n + i] += 1;
    }

    /// Increments every unordered pair drawn from `ids`.
    fn add_all_pairs(&mut self, ids: &[DesignId]) {
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                self.bump_pair(i as usize, j as usize);
            }
        }
    }

    /// Upper-triangle pairs `(i, j, count)` with `i < j`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn to_csv(&self) -> String {
        matrix_csv(self.n, |i, j| self.get(i, j).to_string())
    }

    /// Parses the CSV export format: a header row of ids, then `n` rows of
    /// `n` counts. Symmetry and a zero diagonal are enforced.
    pub fn from_csv(text: &str) -> Result<Self, MatrixError> {
        let rows = parse_csv_rows(text)?;
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                m.entries[i * n + j] = cell
                    .parse()
                    .map_err(|_| MatrixError::Csv(format!("row {}: bad count {cell:?}", i + 1)))?;
            }
        }
        for i in 0..n {
            if m.get(i, i) != 0 {
                return Err(MatrixError::Csv(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(MatrixError::Csv(format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }
}

impl AddAssign<&CoMatrix> for CoMatrix {
    fn add_assign(&mut self, rhs: &CoMatrix) {
        assert_eq!(self.n, rhs.n, "matrix dimensions differ");
        for (a, b) in self.entries.iter_mut().zip(&rhs.entries) {
            *a += b;
        }
    }
}

impl Add for CoMatrix {
    type Output = CoMatrix;

    fn add(mut self, rhs: CoMatrix) -> CoMatrix {
        self += &rhs;
        self
    }
}

/// Folds events into `(C, S)`. Every unordered pair within `shown` adds one
/// to C; every unordered pair within `selected` adds one to S.
pub fn accumulate<'a, I>(events: I, n: usize) -> Result<(CoMatrix, CoMatrix), MatrixError>
where
    I: IntoIterator<Item = &'a SelectionEvent>,
{
    let mut c = CoMatrix::zeros(n);
    let mut s = CoMatrix::zeros(n);
    for event in events {
        if let Some(&id) = event
            .shown
            .iter()
            .chain(&event.selected)
            .find(|&&id| id as usize >= n)
        {
            return Err(MatrixError::OutOfRange { id, n });
        }
        c.add_all_pairs(&event.shown);
        s.add_all_pairs(&event.selected);
    }
    Ok((c, s))
}

/// Pairwise fraction of co-showings that became co-selections.
#[derive(Debug, Clone, PartialEq)]
pub struct NormMatrix {
    n: usize,
    weights: Vec<f64>,
    support: Vec<bool>,
}

impl NormMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Whether the pair had enough co-showings to carry a ratio.
    pub fn supported(&self, i: usize, j: usize) -> bool {
        self.support[i * self.n + j]
    }

    /// Builds a matrix directly from upper-triangle entries `(i, j, w)`;
    /// listed pairs are marked supported.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut m = Self {
            n,
            weights: vec![0.0; n * n],
            support: vec![false; n * n],
        };
        for &(i, j, w) in pairs {
            assert!(
                i != j && i < n && j < n,
                "pair ({i}, {j}) invalid for n={n}"
            );
            assert!((0.0..=1.0).contains(&w), "weight {w} outside [0, 1]");
            for (a, b) in [(i, j), (j, i)] {
                m.weights[a * n + b] = w;
                m.support[a * n + b] = true;
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        matrix_csv(self.n, |i, j| format!("{:.6}", self.weight(i, j)))
    }
}

/// `W[i][j] = S[i][j] / C[i][j]` where `C[i][j] >= max(1, min_support)`,
/// otherwise 0 with the support mask cleared.
pub fn normalize(c: &CoMatrix, s: &CoMatrix, min_support: u32) -> Result<NormMatrix, MatrixError> {
    if c.n != s.n {
        return Err(MatrixError::DimensionMismatch(c.n, s.n));
    }
    let n = c.n;
    let floor = min_support.max(1);
    let mut weights = vec![0.0; n * n];
    let mut support = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let (cij, sij) = (c.get(i, j), s.get(i, j));
            if sij > cij {
                return Err(MatrixError::InconsistentCounts {
                    i,
                    j,
                    s: sij,
                    c: cij,
                });
            }
            if i != j && cij >= floor {
                weights[i * n + j] = f64::from(sij) / f64::from(cij);
                support[i * n + j] = true;
            }
        }
    }
    Ok(NormMatrix {
        n,
        weights,
        support,
    })
}

fn matrix_csv(n: usize, cell: impl Fn(usize, usize) -> String) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", cell(i, j));
        }
        out.push('\n');
    }
    out
}

fn parse_csv_rows(text: &str) -> Result<Vec<Vec<String>>, MatrixError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| MatrixError::Csv("missing header row".into()))?;
    let ids: Vec<&str> = header
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for (expected, id) in ids.iter().enumerate() {
        if id.parse::<usize>().ok() != Some(expected) {
            return Err(MatrixError::Csv(format!(
                "header id {id:?} at column {expected}"
            )));
        }
    }
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect();
    if rows.len() != ids.len() || rows.iter().any(|r| r.len() != ids.len()) {
        return Err(MatrixError::Csv(format!(
            "expected {0} rows of {0} values",
            ids.len()
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn event(shown: Vec<u32>, selected: Vec<u32>) -> SelectionEvent {
        SelectionEvent {
            session_id: "s".into(),
            iteration_index: 1,
            shown,
            selected,
            recorded_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    fn total(m: &CoMatrix) -> u32 {
        m.upper_pairs().map(|(_, _, v)| v).sum()
    }

    #[test]
    fn one_panel_of_twelve() {
        let e = event((0..12).collect(), vec![2, 5, 7]);
        let (c, s) = accumulate([&e], 72).unwrap();
        assert_eq!(c.upper_pairs().filter(|&(_, _, v)| v == 1).count(), 66);
        assert_eq!(total(&c), 66);
        assert_eq!(total(&s), 3);
        assert_eq!((s.get(2, 5), s.get(2, 7), s.get(5, 7)), (1, 1, 1));
        assert_eq!(s.get(7, 5), 1);
    }

    #[test]
    fn empty_log_gives_zero_matrices() {
        let (c, s) = accumulate(std::iter::empty(), 5).unwrap();
        assert_eq!(c, CoMatrix::zeros(5));
        assert_eq!(s, CoMatrix::zeros(5));
    }

    #[test]
    fn duplicate_events_double_every_entry() {
        let e = event(vec![0, 1, 2, 3], vec![1, 3]);
        let (c1, s1) = accumulate([&e], 4).unwrap();
        let (c2, s2) = accumulate([&e, &e], 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c2.get(i, j), 2 * c1.get(i, j));
                assert_eq!(s2.get(i, j), 2 * s1.get(i, j));
            }
        }
    }

    #[test]
    fn out_of_range_ids() {
        let e = event(vec![0, 9], vec![]);
        assert_eq!(
            accumulate([&e], 5).unwrap_err(),
            MatrixError::OutOfRange { id: 9, n: 5 }
        );
    }

    fn pair_matrix(n: usize, entries: &[(usize, usize, u32)]) -> CoMatrix {
        let mut m = CoMatrix::zeros(n);
        for &(i, j, v) in entries {
            m.entries[i * n + j] = v;
            m.entries[j * n + i] = v;
        }
        m
    }

    #[test]
    fn normalize_ratios_and_support() {
        let c = pair_matrix(4, &[(0, 1, 4), (0, 2, 5), (1, 2, 1)]);
        let s = pair_matrix(4, &[(0, 1, 2), (0, 2, 5)]);
        let w = normalize(&c, &s, 1).unwrap();
        assert_eq!(w.weight(0, 1), 0.5);
        assert_eq!(w.weight(2, 0), 1.0);
        assert_eq!(w.weight(1, 2), 0.0);
        assert!(w.supported(1, 2));
        assert_eq!(w.weight(0, 3), 0.0);
        assert!(!w.supported(0, 3));
        assert!(!w.supported(0, 0));

        let w = normalize(&c, &s, 2).unwrap();
        assert!(!w.supported(1, 2));
        assert!(w.supported(0, 1));
    }

    #[test]
    fn normalize_rejects_selection_above_occurrence() {
        let c = pair_matrix(3, &[(0, 1, 1)]);
        let s = pair_matrix(3, &[(0, 1, 2)]);
        assert!(matches!(
            normalize(&c, &s, 1),
            Err(MatrixError::InconsistentCounts { s: 2, c: 1, .. })
        ));
    }

    #[test]
    fn csv_format_and_parse() {
        let c = pair_matrix(3, &[(0, 1, 4), (1, 2, 2)]);
        let s = pair_matrix(3, &[(0, 1, 1)]);
        assert_eq!(c.to_csv(), "0,1,2\n0,4,0\n4,0,2\n0,2,0\n");
        assert_eq!(CoMatrix::from_csv(&c.to_csv()).unwrap(), c);
        let w = normalize(&c, &s, 1).unwrap();
        assert_eq!(
            w.to_csv(),
            "0,1,2\n0.000000,0.250000,0.000000\n0.250000,0.000000,0.000000\n0.000000,0.000000,0.000000\n"
        );
        assert!(CoMatrix::from_csv("0,1\n0,1\n2,0\n").is_err());
        assert!(CoMatrix::from_csv("0,1\n0,1\n").is_err());
        assert_eq!(
            CoMatrix::from_csv("\n").unwrap_err(),
            MatrixError::Csv("missing header row".into())
        );
    }
}
