//! Structural similarity between candidate programs.
//!
//! Sources are parsed and normalized into ordered labelled trees
//! ([`normalize`]), compared by exact tree edit distance
//! ([`tree_edit_distance`]) and scaled into a `[0, 1]` similarity ([`tsed`]).
//! Island-level scores average the pairwise similarity over every cross pair.

mod normalize;
mod ted;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::{normalize, NormalizedTree, TreeNode};
pub use ted::{tree_edit_distance, EditOperation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("population is empty")]
    EmptyPopulation,
}

/// Normalized similarity `max(0, 1 - Δ / max(|a|, |b|))`.
pub fn tsed(a: &NormalizedTree, b: &NormalizedTree) -> f64 {
    let largest = a.size().max(b.size());
    let distance = tree_edit_distance(a, b);
    (1.0 - distance as f64 / largest as f64).max(0.0)
}

/// Similarity of two sources; both must parse.
pub fn tsed_sources(a: &str, b: &str) -> Result<f64, MetricError> {
    Ok(tsed(&normalize(a)?, &normalize(b)?))
}

/// Mean pairwise similarity over the cross product of two populations of
/// already-normalized trees.
pub fn tree_set_similarity(a: &[NormalizedTree], b: &[NormalizedTree]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyPopulation);
    }
    let total: f64 = a
        .par_iter()
        .map(|x| b.iter().map(|y| tsed(x, y)).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / (a.len() * b.len()) as f64)
}

/// Mean TSED between every member of `pop_a` and every member of `pop_b`.
pub fn island_similarity<S: AsRef<str>>(pop_a: &[S], pop_b: &[S]) -> Result<f64, MetricError> {
    if pop_a.is_empty() || pop_b.is_empty() {
        return Err(MetricError::EmptyPopulation);
    }
    let ta = pop_a.iter().map(|s| normalize(s.as_ref())).collect::<Result<Vec<_>, _>>()?;
    let tb = pop_b.iter().map(|s| normalize(s.as_ref())).collect::<Result<Vec<_>, _>>()?;
    tree_set_similarity(&ta, &tb)
}

/// K×K matrix of island similarities. Symmetric by construction: only the
/// upper triangle is computed and mirrored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    entries: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn compute(islands: &[Vec<NormalizedTree>]) -> Result<Self, MetricError> {
        let k = islands.len();
        let pairs: Vec<(usize, usize)> =
            (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
        let scores = pairs
            .par_iter()
            .map(|&(i, j)| tree_set_similarity(&islands[i], &islands[j]))
            .collect::<Result<Vec<_>, _>>()?;
        let mut entries = vec![vec![0.0; k]; k];
        for (&(i, j), s) in pairs.iter().zip(scores) {
            entries[i][j] = s;
            entries[j][i] = s;
        }
        Ok(SimilarityMatrix { entries })
    }

    pub fn from_rows(entries: Vec<Vec<f64>>) -> Self {
        SimilarityMatrix { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Comma-separated rows with 6 fractional digits.
    pub fn to_csv(&self, header: Option<&[String]>) -> String {
        let mut out = String::new();
        if let Some(names) = header {
            out.push_str(&names.join(","));
            out.push('\n');
        }
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
