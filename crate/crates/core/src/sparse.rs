//! Hermitian operators in compressed sparse row form.
//!
//! Every operator is assembled through [`HermitianBuilder`], which stores each
//! off-diagonal element together with its exact complex conjugate, so the
//! resulting matrix equals its conjugate transpose bit for bit.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::C64;

/// Accumulates the entries of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct HermitianBuilder {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl HermitianBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds a real value to `H[i][i]`.
    pub fn add_diagonal(&mut self, i: usize, value: f64) {
        assert!(i < self.dim, "diagonal index {i} out of range {}", self.dim);
        self.entries.push((i, i, C64::new(value, 0.0)));
    }

    /// Adds `value` to `H[row][col]` and `conj(value)` to `H[col][row]`.
    pub fn add_hop(&mut self, row: usize, col: usize, value: C64) {
        assert!(row < self.dim && col < self.dim, "hop ({row}, {col}) out of range {}", self.dim);
        assert_ne!(row, col, "use add_diagonal for diagonal entries");
        self.entries.push((row, col, value));
        self.entries.push((col, row, value.conj()));
    }

    /// Sorts by (row, col) and sums duplicates. The sort is stable, so
    /// conjugate partners are summed in the same order.
    pub fn build(mut self) -> SparseHermitian {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseHermitian { dim: self.dim, row_ptr, cols, vals }
    }
}

/// Immutable Hermitian operator in CSR layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

/// Rows per task when applying the operator in parallel.
const ROW_CHUNK: usize = 4096;

impl SparseHermitian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// `H[i][j]`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Triplets `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Checks `H[i][j] == conj(H[j][i])` exactly for every stored entry.
    pub fn is_hermitian(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i) == v.conj())
    }

    /// Spectral enclosure `[lo, hi]` from Gershgorin discs.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut center = 0.0;
            let mut radius = 0.0;
            for (j, v) in self.row(i) {
                if i == j {
                    center = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        self.for_rows(y, |i, yi| *yi = self.row_dot(i, x));
    }

    /// Three-term Chebyshev update on the shifted and scaled operator
    /// `X = (H - shift) / scale`, fused with the series accumulation:
    ///
    /// `prev <- 2 X cur - prev`, then `acc += coeff * prev`.
    pub fn chebyshev_step(
        &self,
        cur: &[C64],
        prev: &mut [C64],
        acc: &mut [C64],
        coeff: C64,
        shift: f64,
        scale: f64,
    ) {
        assert_eq!(cur.len(), self.dim);
        assert_eq!(prev.len(), self.dim);
        assert_eq!(acc.len(), self.dim);
        let two_over = 2.0 / scale;
        let update = |i: usize, p: &mut C64, s: &mut C64| {
            let hx = self.row_dot(i, cur) - cur[i] * shift;
            *p = hx * two_over - *p;
            *s += coeff * *p;
        };
        if rayon::current_num_threads() <= 1 || self.dim < 2 * ROW_CHUNK {
            for (i, (p, s)) in prev.iter_mut().zip(acc.iter_mut()).enumerate() {
                update(i, p, s);
            }
        } else {
            prev.par_chunks_mut(ROW_CHUNK)
                .zip(acc.par_chunks_mut(ROW_CHUNK))
                .enumerate()
                .for_each(|(c, (pc, sc))| {
                    let base = c * ROW_CHUNK;
                    for (k, (p, s)) in pc.iter_mut().zip(sc.iter_mut()).enumerate() {
                        update(base + k, p, s);
                    }
                });
        }
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            acc += self.vals[k] * x[self.cols[k]];
        }
        acc
    }

    /// Runs `f(row, &mut out[row])` over all rows. Each row is computed
    /// independently, so the result does not depend on the partitioning.
    fn for_rows<F>(&self, out: &mut [C64], f: F)
    where
        F: Fn(usize, &mut C64) + Sync,
    {
        if rayon::current_num_threads() <= 1 || self.dim < 2 * ROW_CHUNK {
            out.iter_mut().enumerate().for_each(|(i, o)| f(i, o));
        } else {
            out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * ROW_CHUNK;
                chunk.iter_mut().enumerate().for_each(|(k, o)| f(base + k, o));
            });
        }
    }

    /// `<x|H|x>` (real for Hermitian `H`).
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Real symmetric dense copy, or `None` when any entry has an imaginary part.
    pub fn to_dense_real(&self) -> Option<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            if v.im != 0.0 {
                return None;
            }
            m[(i, j)] = v.re;
        }
        Some(m)
    }

    /// Writes the coordinate list as `row col re im` lines.
    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# dim {} nnz {}", self.dim, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}
