// SPDX-License-Identifier: Apache-2.0
//! Spectral and Routh-Hurwitz stability, plus the analytic necessary
//! bounds on an extra coupling `gamma` between site 1 and a far site.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{balance, inf_norm, spectral_abscissa};
use crate::model::{build_h_p, build_h_x};
use crate::params::SensorParams;

/// Relative stability tolerance: `tol = STABILITY_TOL_REL * ||M||_inf`.
pub const STABILITY_TOL_REL: f64 = 1e-9;

/// Routh arrays are only built up to this degree.
pub const MAX_ROUTH_DEGREE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouthVerdict {
    Stable,
    Unstable,
    /// A zero pivot or zero row; the spectral verdict is authoritative.
    Degenerate,
    /// Degree above [`MAX_ROUTH_DEGREE`].
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spectral_abscissa: f64,
    pub stable: bool,
    /// `-spectral_abscissa`; positive when stable.
    pub margin: f64,
    pub tol: f64,
    pub routh_verdict: RouthVerdict,
    pub routh_table: Vec<Vec<f64>>,
    /// Monic, descending powers.
    pub char_poly: Vec<f64>,
}

impl StabilityReport {
    /// Routh and spectral verdicts agree, or Routh has no verdict.
    pub fn consistent(&self) -> bool {
        match self.routh_verdict {
            RouthVerdict::Stable => self.stable,
            RouthVerdict::Unstable => !self.stable,
            RouthVerdict::Degenerate | RouthVerdict::Skipped => true,
        }
    }
}

pub fn default_tol(m: &DMatrix<f64>) -> f64 {
    STABILITY_TOL_REL * inf_norm(m)
}

/// Spectral verdict only; the Routh fields are left empty and `Skipped`.
pub fn spectral_stability(m: &DMatrix<f64>, tol: f64) -> Result<StabilityReport> {
    let a = spectral_abscissa(m)?;
    Ok(StabilityReport {
        spectral_abscissa: a,
        stable: a < -tol,
        margin: -a,
        tol,
        routh_verdict: RouthVerdict::Skipped,
        routh_table: Vec::new(),
        char_poly: Vec::new(),
    })
}

/// Spectral verdict plus characteristic polynomial and Routh array
/// (the latter only up to degree 10).
pub fn analyze(m: &DMatrix<f64>, tol: f64) -> Result<StabilityReport> {
    let mut report = spectral_stability(m, tol)?;
    if m.nrows() <= MAX_ROUTH_DEGREE && m.nrows() > 0 {
        let (b, _) = balance(m);
        report.char_poly = char_poly_coeffs(&b);
        let (table, verdict) = routh_table(&report.char_poly);
        report.routh_table = table;
        report.routh_verdict = verdict;
    }
    Ok(report)
}

/// Faddeev-LeVerrier: monic characteristic polynomial, descending powers.
pub fn char_poly_coeffs(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        mk = m * &mk;
        for i in 0..n {
            mk[(i, i)] += c[k - 1];
        }
        c[k] = -(m * &mk).trace() / k as f64;
    }
    c
}

/// Routh array for a polynomial in descending powers with positive
/// leading coefficient.
///
/// A pivot is treated as zero when it is below `1e-9` times the size of
/// the terms that produced it.
pub fn routh_table(coeffs: &[f64]) -> (Vec<Vec<f64>>, RouthVerdict) {
    const ZERO_REL: f64 = 1e-9;
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return (vec![coeffs.to_vec()], RouthVerdict::Stable);
    }
    let width = |i: usize| (deg - i) / 2 + 1;
    let first: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let second: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    let coeff_scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut table = vec![first, second];
    let at = |row: &Vec<f64>, j: usize| row.get(j).copied().unwrap_or(0.0);

    let pivot_zero = |v: f64, scale: f64| v.abs() <= ZERO_REL * scale;
    if pivot_zero(table[0][0], coeff_scale) || pivot_zero(table[1][0], coeff_scale) {
        return (table, RouthVerdict::Degenerate);
    }
    for i in 2..=deg {
        let (r2, r1) = (&table[i - 2], &table[i - 1]);
        let mut row = Vec::with_capacity(width(i));
        let mut scale0 = 0.0;
        for j in 0..width(i) {
            let t1 = r1[0] * at(r2, j + 1);
            let t2 = r2[0] * at(r1, j + 1);
            if j == 0 {
                scale0 = t1.abs().max(t2.abs()) / r1[0].abs();
            }
            row.push((t1 - t2) / r1[0]);
        }
        let zero = pivot_zero(row[0], scale0);
        table.push(row);
        if zero {
            return (table, RouthVerdict::Degenerate);
        }
    }
    let stable = table.iter().all(|r| r[0] > 0.0);
    let verdict = if stable {
        RouthVerdict::Stable
    } else {
        RouthVerdict::Unstable
    };
    (table, verdict)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `D_N = sum_k C(N-k, k) lambda^{N-2k} J^{2k}`, descending powers, i.e.
/// the characteristic polynomial of the undamped reciprocal chain.
pub fn tridiagonal_char_poly_dn(n: usize, hop_j: f64) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    for k in 0..=n / 2 {
        c[2 * k] = binomial(n - k, k) * hop_j.powi(2 * k as i32);
    }
    c
}

/// Necessary bounds for a coupling between sites 1 and `N-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case1Bound {
    /// `(N+1)/2 * J * e^{-A(N-2)}`.
    pub asymptotic: f64,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// Exact roots of the quadratic, `root_lo < 0 < root_hi`. The X chain
    /// needs `root_lo < gamma < root_hi`; the P chain the mirror image.
    pub root_lo: f64,
    pub root_hi: f64,
    /// Joint X/P requirement: `|gamma| < joint`.
    pub joint: f64,
    /// `A(N-2) >= 3`, where the asymptotic form is trusted.
    pub asymptotic_regime: bool,
}

pub fn necessary_bound_case1(n: usize, hop_j: f64, amp_a: f64) -> Case1Bound {
    let x = amp_a * (n as f64 - 2.0);
    let np1 = n as f64 + 1.0;
    let asymptotic = 0.5 * np1 * hop_j * (-x).exp();
    // Difference e^{-x} - e^{x} = -2 sinh x.
    let d = -2.0 * x.sinh();
    let disc = (d * d + 2.0 * np1).sqrt();
    let root_lo = 0.5 * hop_j * (d - disc);
    let root_hi = -np1 * hop_j * hop_j / (2.0 * root_lo);
    Case1Bound {
        asymptotic,
        gamma_lo: -asymptotic,
        gamma_hi: asymptotic,
        root_lo,
        root_hi,
        joint: root_hi.min(-root_lo),
        asymptotic_regime: x >= 3.0,
    }
}

/// Necessary bounds for a coupling between sites 1 and `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Bound {
    /// `|gamma| < kappa e^{-A(N-1)}`.
    pub bound: f64,
    /// One-sided: `gamma < (kappa/2) / (e^{-A(N-1)} + e^{A(N-1)})`.
    pub r2_upper: f64,
    /// One-sided: `gamma > -kappa e^{-A(N-1)}`.
    pub l2_lower: f64,
}

pub fn necessary_bound_case2(n: usize, kappa: f64, amp_a: f64) -> Case2Bound {
    let x = amp_a * (n as f64 - 1.0);
    let bound = kappa * (-x).exp();
    Case2Bound {
        bound,
        r2_upper: 0.25 * kappa / x.cosh(),
        l2_lower: -bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingCase {
    /// Site 1 to site `N-1`.
    One,
    /// Site 1 to site `N`.
    Two,
}

impl CouplingCase {
    pub fn far_site(self, n: usize) -> usize {
        match self {
            Self::One => n - 1,
            Self::Two => n,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }
}

/// `h + gamma (|1><j| + |j><1|)` with `j` the far site (1-based).
pub fn add_gamma_coupling(h: &DMatrix<f64>, case: CouplingCase, gamma: f64) -> DMatrix<f64> {
    let j = case.far_site(h.nrows()) - 1;
    let mut m = h.clone();
    m[(0, j)] += gamma;
    m[(j, 0)] += gamma;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub abscissa_x: f64,
    pub abscissa_p: f64,
    pub stable: bool,
}

/// Joint X/P spectral verdict for each `gamma`, in input order.
pub fn gamma_stability_scan(
    p: &SensorParams,
    case: CouplingCase,
    gammas: &[f64],
) -> Result<Vec<GammaPoint>> {
    let (hx, hp) = (build_h_x(p), build_h_p(p));
    gammas
        .par_iter()
        .map(|&gamma| {
            let mx = add_gamma_coupling(&hx, case, gamma);
            let mp = add_gamma_coupling(&hp, case, gamma);
            let (ax, ap) = (spectral_abscissa(&mx)?, spectral_abscissa(&mp)?);
            let tol = default_tol(&mx).max(default_tol(&mp));
            Ok(GammaPoint {
                gamma,
                abscissa_x: ax,
                abscissa_p: ap,
                stable: ax < -tol && ap < -tol,
            })
        })
        .collect()
}
