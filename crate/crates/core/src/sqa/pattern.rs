use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Off-diagonal positions forced to zero in the precision matrix.
///
/// Stored as unordered pairs; membership is symmetric, so `(i, j)` and `(j, i)` are
/// always both constrained. Indices are 0-based in the API and 1-based in the JSON file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    dim: usize,
    zeros: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternFile {
    p: usize,
    zeros: Vec<[usize; 2]>,
}

impl SparsityPattern {
    /// The unconstrained pattern.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            zeros: BTreeSet::new(),
        }
    }

    /// Builds a pattern from 0-based index pairs, applying the symmetric closure.
    pub fn new(dim: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("pattern dimension"));
        }
        let mut zeros = BTreeSet::new();
        for (i, j) in pairs {
            if i >= dim || j >= dim {
                return Err(Error::Invalid(format!(
                    "pattern pair ({i}, {j}) out of range for dimension {dim}"
                )));
            }
            if i == j {
                return Err(Error::Invalid(format!(
                    "pattern pair ({i}, {j}) is on the diagonal"
                )));
            }
            zeros.insert((i.min(j), i.max(j)));
        }
        Ok(Self { dim, zeros })
    }

    /// The exact zero pattern of the off-diagonal part of `m`, entries with
    /// `|m_ij| ≤ threshold` counted as zero.
    pub fn from_zeros_of(m: &SymmetricMatrix, threshold: f64) -> Self {
        let p = m.dim();
        let zeros = (0..p)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| m[(i, j)].abs() <= threshold)
            .collect();
        Self { dim: p, zeros }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    /// True when `(i, j)` (in either order) is constrained to zero.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.zeros.contains(&(i.min(j), i.max(j)))
    }

    /// Constrained pairs with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.zeros.iter().copied()
    }

    /// Number of constrained unordered pairs.
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    /// Dimension of the feasible direction space: free upper-triangle entries plus `γ`.
    pub fn free_dimension(&self) -> usize {
        self.dim * (self.dim + 1) / 2 - self.zeros.len() + 1
    }

    /// Parses `{"p": int, "zeros": [[i, j], ...]}` with 1-based indices.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PatternFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let mut pairs = Vec::with_capacity(file.zeros.len());
        for [i, j] in file.zeros {
            if i == 0 || j == 0 {
                return Err(Error::Invalid(format!(
                    "pattern indices are 1-based, got [{i}, {j}]"
                )));
            }
            pairs.push((i - 1, j - 1));
        }
        Self::new(file.p, pairs)
    }

    /// Serializes with 1-based indices, each unordered pair listed once.
    pub fn to_json_string(&self) -> String {
        let file = PatternFile {
            p: self.dim,
            zeros: self.zeros.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        };
        serde_json::to_string(&file).expect("pattern serializes")
    }

    /// Zeroes constrained entries of `m` in place.
    pub(crate) fn apply_zeros(&self, m: &mut DMatrix<f64>) {
        for &(i, j) in &self.zeros {
            m[(i, j)] = 0.0;
            m[(j, i)] = 0.0;
        }
    }
}

/// Orthogonal projection onto the feasible direction space: symmetrizes the matrix part,
/// zeroes constrained entries, and passes the `γ` component through.
///
/// # Panics
///
/// If `z` is not square with the pattern's dimension.
pub fn project_pattern(
    z: &DMatrix<f64>,
    gamma_component: f64,
    pattern: &SparsityPattern,
) -> (SymmetricMatrix, f64) {
    assert_eq!(z.nrows(), pattern.dim(), "projection dimension mismatch");
    assert_eq!(z.ncols(), pattern.dim(), "projection dimension mismatch");
    let mut s = (z + z.transpose()) * 0.5;
    pattern.apply_zeros(&mut s);
    (
        SymmetricMatrix::new(s).expect("projection of a finite matrix"),
        gamma_component,
    )
}
