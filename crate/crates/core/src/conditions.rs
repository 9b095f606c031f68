// SPDX-License-Identifier: Apache-2.0
//! The loss/gain conditions that keep the noise at the vacuum level.
//!
//! * C1: every loss column lies in the span of columns `2..N` of `h^P`.
//! * C2: balanced gain, `Y Y^T = Z Z^T`.
//! * C3: as C1 with columns `2..N-1`.
//! * C4: every loss column is orthogonal to row `N` of `(h^X)^-1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Result};
use crate::linalg::{self, column_span_basis, project_out};
use crate::model::{build_h_p, build_h_x, SensorModel};
use crate::params::SensorParams;
use crate::template::{CouplingTemplate, TemplateEntry};

/// Default scale-normalized tolerance for every condition.
pub const CONDITION_TOL: f64 = 1e-8;

/// Singular values below this fraction of the largest are dropped when
/// forming span bases.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub residual: f64,
}

impl ConditionCheck {
    fn new(residual: f64, tol: f64) -> Self {
        Self {
            holds: residual <= tol,
            residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1: ConditionCheck,
    /// `residual` is the normalized deviation `||YY^T - ZZ^T||_F / max(1, ||ZZ^T||_F)`.
    pub c2: ConditionCheck,
    pub c3: ConditionCheck,
    pub c4: ConditionCheck,
    pub tol: f64,
}

fn span_residual(z: &DMatrix<f64>, basis: &DMatrix<f64>) -> f64 {
    if z.ncols() == 0 {
        return 0.0;
    }
    let q = column_span_basis(basis, RANK_TOL);
    project_out(&q, z).norm() / z.norm().max(1.0)
}

/// Columns `2..=last` (1-based) of `h_p`.
fn hp_columns(h_p: &DMatrix<f64>, last: usize) -> DMatrix<f64> {
    h_p.columns(1, last - 1).into_owned()
}

pub fn check_c1(z: &DMatrix<f64>, h_p: &DMatrix<f64>, tol: f64) -> ConditionCheck {
    let n = h_p.ncols();
    ConditionCheck::new(span_residual(z, &hp_columns(h_p, n)), tol)
}

pub fn check_c3(z: &DMatrix<f64>, h_p: &DMatrix<f64>, tol: f64) -> ConditionCheck {
    let n = h_p.ncols();
    ConditionCheck::new(span_residual(z, &hp_columns(h_p, n - 1)), tol)
}

pub fn check_c2(y: &DMatrix<f64>, z: &DMatrix<f64>, tol: f64) -> ConditionCheck {
    let zz = z * z.transpose();
    let dev = (y * y.transpose() - &zz).norm() / zz.norm().max(1.0);
    ConditionCheck::new(dev, tol)
}

/// `||r Z|| / (||r|| max(1, ||Z||_F))` with `r` row `N` of `(h^X)^-1`.
pub fn check_c4(z: &DMatrix<f64>, h_x: &DMatrix<f64>, tol: f64) -> Result<ConditionCheck> {
    let r = c4_row(h_x)?;
    if z.ncols() == 0 {
        return Ok(ConditionCheck::new(0.0, tol));
    }
    let rz = (&r * z).norm();
    Ok(ConditionCheck::new(rz / (r.norm() * z.norm().max(1.0)), tol))
}

/// Row `N` of `(h^X)^-1`.
pub fn c4_row(h_x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h_x.nrows();
    let mut en = DMatrix::zeros(n, 1);
    en[(n - 1, 0)] = 1.0;
    let r = linalg::solve_checked(&h_x.transpose(), &en, "row N of (h^X)^-1", linalg::RESIDUAL_TOL)?;
    Ok(r.transpose())
}

/// Orthogonal projection of every column of `z` onto the C1 span: the
/// nearest C1-satisfying matrix in Frobenius norm.
pub fn repair_to_c1(z: &DMatrix<f64>, h_p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h_p.ncols();
    let q = column_span_basis(&hp_columns(h_p, n), RANK_TOL);
    &q * (q.transpose() * z)
}

/// `Y = Z`.
pub fn synthesize_balanced_gain(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.clone()
}

pub fn check_all(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    tol: f64,
) -> Result<ConditionReport> {
    if z.nrows() != p.n_sites || y.nrows() != p.n_sites {
        return Err(mismatch("check_all", p.n_sites, format!("{} / {}", z.nrows(), y.nrows())));
    }
    let (hx, hp) = (build_h_x(p), build_h_p(p));
    Ok(ConditionReport {
        c1: check_c1(z, &hp, tol),
        c2: check_c2(y, z, tol),
        c3: check_c3(z, &hp, tol),
        c4: check_c4(z, &hx, tol)?,
        tol,
    })
}

impl SensorModel {
    pub fn conditions(&self, tol: f64) -> Result<ConditionReport> {
        check_all(&self.params, &self.loss_matrix()?, &self.gain_matrix()?, tol)
    }
}

/// Output of [`repair_template`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum RepairedTemplate {
    /// Every entry is again `coeff * e^{exp_mult A}`.
    Template { template: CouplingTemplate },
    /// Only valid at the requested `A`.
    Numeric { amp_a: f64, rows: Vec<Vec<f64>> },
}

impl RepairedTemplate {
    pub fn to_template(&self) -> CouplingTemplate {
        match self {
            Self::Template { template } => template.clone(),
            Self::Numeric { rows, .. } => {
                let m = DMatrix::from_fn(rows.len(), rows.first().map_or(0, Vec::len), |i, j| rows[i][j]);
                CouplingTemplate::from_numeric(&m).expect("finite repaired matrix")
            }
        }
    }
}

/// Repair a loss template at the sensor's `A`. The C1 span depends on `A`
/// only, so the projection is evaluated at `A`, `A+1` and `A+2`; entries
/// that scale as a single integer exponential are kept symbolic.
pub fn repair_template(loss: &CouplingTemplate, p: &SensorParams) -> Result<RepairedTemplate> {
    let a0 = p.amp_a();
    let mut mats = Vec::with_capacity(3);
    for k in 0..3 {
        let pk = p.with_amp_a(a0 + k as f64)?;
        mats.push(repair_to_c1(&loss.materialize(pk.amp_a())?, &build_h_p(&pk)));
    }
    let (rows, cols) = (loss.rows(), loss.cols());
    let scale = mats[0].amax().max(1.0);
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = [mats[0][(i, j)], mats[1][(i, j)], mats[2][(i, j)]];
            match symbolic_entry(v, a0, scale, loss.entry(i, j)) {
                Some(e) => entries.push(e),
                None => {
                    let m = &mats[0];
                    return Ok(RepairedTemplate::Numeric {
                        amp_a: a0,
                        rows: (0..rows).map(|i| m.row(i).iter().copied().collect()).collect(),
                    });
                }
            }
        }
    }
    Ok(RepairedTemplate::Template {
        template: CouplingTemplate::new(rows, cols, entries)?,
    })
}

fn symbolic_entry(v: [f64; 3], a0: f64, scale: f64, orig: TemplateEntry) -> Option<TemplateEntry> {
    const TOL: f64 = 1e-9;
    if v.iter().all(|x| x.abs() <= TOL * scale) {
        return Some(TemplateEntry::ZERO);
    }
    if v.contains(&0.0) || v[0].signum() != v[1].signum() || v[1].signum() != v[2].signum() {
        return None;
    }
    let m1 = (v[1] / v[0]).ln();
    let m2 = (v[2] / v[1]).ln();
    let m = m1.round();
    if (m1 - m).abs() > TOL || (m2 - m).abs() > TOL || m.abs() > 64.0 {
        return None;
    }
    let coeff = v[0] * (-m * a0).exp();
    // Unchanged entries keep their exact input coefficient.
    if orig.exp_mult == m as i32 && (coeff - orig.coeff).abs() <= TOL * orig.coeff.abs().max(1.0) {
        return Some(orig);
    }
    Some(TemplateEntry::new(coeff, m as i32))
}

/// One point of the robustness probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub factor: f64,
    pub c1_residual: f64,
    /// `None` when the perturbed dynamics is unstable.
    pub log10_snr_per_photon_normalized: Option<f64>,
}

/// Scales loss entry `(row, col)` (1-based) by each factor and records the
/// C1 residual and the linear-response figure of merit. Factor 0 removes
/// the entry, factor 1 is the unperturbed model.
pub fn robustness_probe(
    model: &SensorModel,
    row: usize,
    col: usize,
    factors: &[f64],
    eps: f64,
) -> Result<Vec<ProbePoint>> {
    let (n, nz) = (model.loss.rows(), model.loss.cols());
    if !(1..=n).contains(&row) || !(1..=nz).contains(&col) {
        return Err(mismatch("robustness probe entry", format!("1..={n} x 1..={nz}"), format!("({row},{col})")));
    }
    let h_p = build_h_p(&model.params);
    factors
        .iter()
        .map(|&f| {
            let mut m = model.clone();
            let e = m.loss.entry(row - 1, col - 1);
            m.loss.set(row - 1, col - 1, TemplateEntry::new(e.coeff * f, e.exp_mult));
            let z = m.loss_matrix()?;
            let log10 = match m.linear_report(eps) {
                Ok(r) => Some(r.log10_snr_per_photon_normalized),
                Err(crate::error::Error::Unstable { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(ProbePoint {
                factor: f,
                c1_residual: check_c1(&z, &h_p, CONDITION_TOL).residual,
                log10_snr_per_photon_normalized: log10,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{loss_tuned, loss_z1, loss_z2};

    fn params(a: f64) -> SensorParams {
        SensorParams::from_hop_w_and_amp(3, 1e5, a, 10.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn reference_losses() {
        let p = params(1.0);
        let hp = build_h_p(&p);
        let m = |t: CouplingTemplate| t.materialize(1.0).unwrap();
        assert!(check_c1(&m(loss_tuned(0.5)), &hp, CONDITION_TOL).holds);
        assert!(!check_c1(&m(loss_z1(0.5)), &hp, CONDITION_TOL).holds);
        assert!(!check_c1(&m(loss_z2(0.5)), &hp, CONDITION_TOL).holds);
        let zero = DMatrix::zeros(3, 2);
        let c = check_c1(&zero, &hp, CONDITION_TOL);
        assert!(c.holds && c.residual == 0.0);
    }

    #[test]
    fn c2_cases() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 0.5]);
        assert_eq!(check_c2(&z, &z, CONDITION_TOL).residual, 0.0);
        let th: f64 = 0.3;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!(check_c2(&(&z * r), &z, CONDITION_TOL).holds);
        assert!(!check_c2(&(2.0 * &z), &z, CONDITION_TOL).holds);
    }

    #[test]
    fn c3_against_last_column() {
        let p = SensorParams::from_hopping(5, 1.3, 0.7, 10.0, 1.0, 1.0).unwrap();
        let hp = build_h_p(&p);
        let last = hp.columns(4, 1).into_owned();
        assert!(!check_c3(&last, &hp, CONDITION_TOL).holds);
        assert!(check_c1(&last, &hp, CONDITION_TOL).holds);
        let w = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 2.0, 0.5, -0.7, 0.1]);
        let inner = hp.columns(1, 3) * w;
        assert!(check_c3(&inner, &hp, CONDITION_TOL).holds);
        assert!(check_c3(&DMatrix::zeros(5, 1), &hp, CONDITION_TOL).holds);
    }

    #[test]
    fn c4_row_has_even_entries() {
        // Row N of (h^X)^-1 is not supported on odd sites only, so a loss
        // supported on even sites does not satisfy C4 in general.
        let p = SensorParams::from_hopping(3, 1.3, 0.7, 10.0, 1.0, 1.0).unwrap();
        let hx = build_h_x(&p);
        let r = c4_row(&hx).unwrap();
        let brute = hx.clone().try_inverse().unwrap();
        assert!((r.row(0) - brute.row(2)).abs().max() < 1e-12);
        assert!(r[(0, 1)].abs() > 0.1);
        let even = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!(!check_c4(&even, &hx, CONDITION_TOL).unwrap().holds);
        // A column orthogonal to r does satisfy it.
        let orth = DMatrix::from_column_slice(3, 1, &[r[(0, 1)], -r[(0, 0)], 0.0]);
        assert!(check_c4(&orth, &hx, CONDITION_TOL).unwrap().holds);
        assert!(check_c4(&DMatrix::zeros(3, 1), &hx, CONDITION_TOL).unwrap().holds);
        let dense = DMatrix::from_row_slice(3, 2, &[0.3, 0.8, -0.4, 0.2, 1.1, -0.6]);
        assert!(!check_c4(&dense, &hx, CONDITION_TOL).unwrap().holds);
    }

    #[test]
    fn repair_properties() {
        let p = params(2.0);
        let hp = build_h_p(&p);
        let z1 = loss_z1(0.5).materialize(2.0).unwrap();
        let r = repair_to_c1(&z1, &hp);
        assert!(check_c1(&r, &hp, 1e-12).holds);
        assert!((repair_to_c1(&r, &hp) - &r).norm() < 1e-13);
        let tuned = loss_tuned(0.5).materialize(2.0).unwrap();
        assert!((repair_to_c1(&tuned, &hp) - &tuned).norm() < 1e-12 * tuned.norm());
        // Normal to the span for N = 3 is (e^-A, 0, e^A).
        let normal = DMatrix::from_column_slice(3, 1, &[(-2f64).exp(), 0.0, 2f64.exp()]);
        assert!(repair_to_c1(&normal, &hp).norm() < 1e-12 * normal.norm());
    }

    #[test]
    fn balanced_gain() {
        let tuned = loss_tuned(0.5).materialize(1.0).unwrap();
        let y = synthesize_balanced_gain(&tuned);
        assert_eq!(check_c2(&y, &tuned, 0.0).residual, 0.0);
        assert_eq!(crate::model::net_noise(&tuned, &y).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(synthesize_balanced_gain(&DMatrix::zeros(3, 0)).ncols(), 0);
    }

    #[test]
    fn template_repair_keeps_symbols_when_possible() {
        let p = params(1.5);
        match repair_template(&loss_tuned(0.5), &p).unwrap() {
            RepairedTemplate::Template { template } => assert_eq!(template, loss_tuned(0.5)),
            other => panic!("expected symbolic template, got {other:?}"),
        }
        let r = repair_template(&loss_z1(0.5), &p).unwrap();
        let z = r.to_template().materialize(1.5).unwrap();
        assert!(check_c1(&z, &build_h_p(&p), CONDITION_TOL).holds);
    }

    #[test]
    fn probe_reverts_tuned_to_z1() {
        let m = crate::scenarios::Scenario::Tuned.reference(3.0).unwrap();
        let pts = robustness_probe(&m, 3, 2, &[0.0, 1.0], 1e-3).unwrap();
        let z1 = crate::scenarios::Scenario::Z1.reference(3.0).unwrap().linear_report(1e-3).unwrap();
        assert!(pts[0].c1_residual > 1e-6);
        assert!(pts[1].c1_residual < CONDITION_TOL);
        let got = pts[0].log10_snr_per_photon_normalized.unwrap();
        assert!((got - z1.log10_snr_per_photon_normalized).abs() < 1e-9);
        assert!(pts[1].log10_snr_per_photon_normalized.unwrap() > got + 2.0);
    }
}
