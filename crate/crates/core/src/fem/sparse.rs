//! Compressed-row symmetric matrices and Dirichlet bookkeeping.

use crate::error::{Error, Result};

/// Symmetric sparse matrix in compressed row form. Assembled once,
/// immutable afterwards; SPD on the free unknowns after Dirichlet rows are
/// masked out.
#[derive(Debug, Clone)]
pub struct SparseSpd {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag[i] = v;
                }
            }
        }
        diag
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Energy pairing `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut row = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                row += v * y[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Maximum relative row-wise asymmetry, `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (jcols, jvals) = self.row(j);
                let vt = jcols
                    .iter()
                    .position(|&c| c == i)
                    .map(|k| jvals[k])
                    .unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst / scale
    }

    /// `alpha * A + beta * B`, merging sparsity patterns.
    pub fn linear_combination(alpha: f64, a: &SparseSpd, beta: f64, b: &SparseSpd) -> Result<SparseSpd> {
        if a.n != b.n {
            return Err(Error::Mismatch(format!("matrix dims {} vs {}", a.n, b.n)));
        }
        let mut builder = CsrBuilder::new(a.n);
        for i in 0..a.n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                builder.add(i, j, alpha * v);
            }
            let (cols, vals) = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                builder.add(i, j, beta * v);
            }
        }
        Ok(builder.build())
    }
}

/// Triplet accumulator producing a deterministic CSR layout (sorted
/// columns, duplicates merged in index order).
pub struct CsrBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder { n, entries: Vec::new() }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn build(mut self) -> SparseSpd {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut k = 0;
        for row in 0..self.n {
            while k < self.entries.len() && self.entries[k].0 == row {
                let col = self.entries[k].1;
                let mut acc = 0.0;
                while k < self.entries.len() && self.entries[k].0 == row && self.entries[k].1 == col {
                    acc += self.entries[k].2;
                    k += 1;
                }
                col_idx.push(col);
                values.push(acc);
            }
            row_ptr[row + 1] = col_idx.len();
        }
        SparseSpd { n: self.n, row_ptr, col_idx, values }
    }
}

/// Prescribed values at constrained unknowns (vertex or vertex-component
/// indices), kept disjoint from the free set by construction.
#[derive(Debug, Clone, Default)]
pub struct DirichletSet {
    mask: Vec<bool>,
    values: Vec<f64>,
    indices: Vec<usize>,
}

impl DirichletSet {
    pub fn none(n: usize) -> Self {
        DirichletSet { mask: vec![false; n], values: vec![0.0; n], indices: Vec::new() }
    }

    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut set = DirichletSet::none(n);
        for (idx, value) in pairs {
            if idx >= n {
                return Err(Error::InvalidParameter(format!(
                    "dirichlet index {idx} out of range for dim {n}"
                )));
            }
            if !set.mask[idx] {
                set.indices.push(idx);
            }
            set.mask[idx] = true;
            set.values[idx] = value;
        }
        set.indices.sort_unstable();
        Ok(set)
    }

    pub fn is_constrained(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Zeroes the constrained components of a vector in place.
    pub fn project_free(&self, v: &mut [f64]) {
        for &i in &self.indices {
            v[i] = 0.0;
        }
    }
}
