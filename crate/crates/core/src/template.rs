// SPDX-License-Identifier: Apache-2.0
//! Coupling matrices whose entries scale as `coeff * e^{exp_mult * A}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub coeff: f64,
    pub exp_mult: i32,
}

impl TemplateEntry {
    pub const ZERO: Self = Self {
        coeff: 0.0,
        exp_mult: 0,
    };

    pub fn new(coeff: f64, exp_mult: i32) -> Self {
        Self { coeff, exp_mult }
    }

    pub fn value(&self, amp_a: f64) -> f64 {
        if self.coeff == 0.0 {
            0.0
        } else if self.exp_mult == 0 {
            self.coeff
        } else {
            self.coeff * (self.exp_mult as f64 * amp_a).exp()
        }
    }
}

/// `rows x cols` template, one column per bath. Row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTemplate {
    rows: usize,
    cols: usize,
    entries: Vec<TemplateEntry>,
}

impl CouplingTemplate {
    pub fn new(rows: usize, cols: usize, entries: Vec<TemplateEntry>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(mismatch(
                "CouplingTemplate::new",
                format!("{} entries", rows * cols),
                entries.len(),
            ));
        }
        if entries.iter().any(|e| !e.coeff.is_finite()) {
            return Err(Error::NonFinite("template coefficient"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// No baths at all (`rows x 0`).
    pub fn empty(rows: usize) -> Self {
        Self {
            rows,
            cols: 0,
            entries: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<TemplateEntry>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(mismatch(
                "CouplingTemplate::from_rows",
                format!("{cols} columns"),
                format!("{} in row {}", rows[bad].len(), bad + 1),
            ));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// A plain numeric matrix: every `exp_mult` is zero.
    pub fn from_numeric(m: &DMatrix<f64>) -> Result<Self> {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| TemplateEntry::new(m[(i, j)], 0)))
            .collect();
        Self::new(m.nrows(), m.ncols(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> TemplateEntry {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: TemplateEntry) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }

    /// Multiply every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| TemplateEntry::new(e.coeff * factor, e.exp_mult))
            .collect();
        Self { entries, ..*self }
    }

    /// Append the columns of `other`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if other.rows != self.rows {
            return Err(mismatch("CouplingTemplate::hstack", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut entries = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            entries.extend_from_slice(&self.entries[i * self.cols..(i + 1) * self.cols]);
            entries.extend_from_slice(&other.entries[i * other.cols..(i + 1) * other.cols]);
        }
        Self::new(self.rows, cols, entries)
    }

    /// Evaluate at amplification `amp_a`.
    pub fn materialize(&self, amp_a: f64) -> Result<DMatrix<f64>> {
        let m = DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).value(amp_a));
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("materialized coupling template"));
        }
        Ok(m)
    }

    pub fn to_rows(&self) -> Vec<Vec<TemplateEntry>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.entries.chunks(self.cols).map(<[_]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CouplingTemplate {
        CouplingTemplate::from_rows(&[
            vec![TemplateEntry::new(-1.0, 1), TemplateEntry::new(2.0, 0)],
            vec![TemplateEntry::new(0.5, -1), TemplateEntry::new(3.0, 2)],
        ])
        .unwrap()
    }

    #[test]
    fn exact_at_zero_amplification() {
        let m = sample().materialize(0.0).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, 3.0]));
    }

    #[test]
    fn derivative_matches_exponent() {
        let t = sample();
        let (a, h) = (0.7, 1e-6);
        let up = t.materialize(a + h).unwrap();
        let dn = t.materialize(a - h).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = t.entry(i, j);
                let exact = e.exp_mult as f64 * e.value(a);
                let fd = (up[(i, j)] - dn[(i, j)]) / (2.0 * h);
                if exact == 0.0 {
                    assert!(fd.abs() < 1e-9);
                } else {
                    assert!(((fd - exact) / exact).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let t = CouplingTemplate::from_rows(&[vec![TemplateEntry::new(1.0, 1000)]]).unwrap();
        assert!(matches!(t.materialize(1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn ragged_rows_rejected() {
        let r = CouplingTemplate::from_rows(&[vec![TemplateEntry::ZERO], vec![]]);
        assert!(r.is_err());
    }

    #[test]
    fn hstack_and_round_trip() {
        let t = sample();
        let s = t.hstack(&CouplingTemplate::empty(2)).unwrap();
        assert_eq!(s, t);
        let w = t.hstack(&t.scaled(2.0)).unwrap();
        assert_eq!(w.cols(), 4);
        assert_eq!(w.entry(1, 3).coeff, 6.0);
        assert_eq!(CouplingTemplate::from_rows(&w.to_rows()).unwrap(), w);
    }
}
