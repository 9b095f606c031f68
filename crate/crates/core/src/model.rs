// SPDX-License-Identifier: Apache-2.0
//! Dynamical matrices, noise couplings and drive of the sensor.
//!
//! Sites are 1-based in documentation; matrices here are 0-based, so site
//! `n` lives at index `n - 1` and its P quadrature at `N + n - 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{mismatch, Error, Result};
use crate::params::SensorParams;
use crate::template::CouplingTemplate;

/// Hatano-Nelson chain with damping on site 1:
/// `-kappa/2 |1><1| + sum_n (J e^A |n+1><n| - J e^-A |n><n+1|)`.
///
/// `build_chain(n, kappa, J, -A)` gives the P-sector matrix.
pub fn build_chain(n: usize, kappa: f64, hop_j: f64, amp_a: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n);
    if n == 0 {
        return h;
    }
    h[(0, 0)] = -0.5 * kappa;
    let down = hop_j * amp_a.exp();
    let up = -hop_j * (-amp_a).exp();
    for i in 0..n - 1 {
        h[(i + 1, i)] = down;
        h[(i, i + 1)] = up;
    }
    h
}

/// X-quadrature matrix `h^X`.
pub fn build_h_x(p: &SensorParams) -> DMatrix<f64> {
    build_chain(p.n_sites, p.kappa, p.hop_j(), p.amp_a())
}

/// P-quadrature matrix `h^P`, i.e. `h^X` with `A -> -A`.
pub fn build_h_p(p: &SensorParams) -> DMatrix<f64> {
    build_chain(p.n_sites, p.kappa, p.hop_j(), -p.amp_a())
}

fn check_rows(context: &'static str, n: usize, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != n {
        return Err(mismatch(context, format!("{n} rows"), m.nrows()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// `Y Y^T - Z Z^T`.
pub fn net_noise(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.nrows() != y.nrows() {
        return Err(mismatch("net_noise", format!("{} rows", z.nrows()), y.nrows()));
    }
    let mut w = y * y.transpose() - z * z.transpose();
    // Exact symmetry regardless of summation order.
    let n = w.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(w)
}

/// `Y Y^T + Z Z^T`, the weight of the bath noise in the output.
pub fn noise_weight(z: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    y * y.transpose() + z * z.transpose()
}

/// `H[eps]`: block-diagonal `(M_X, M_P)` plus `eps |N><2N| - eps |2N><N|`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGenerator {
    pub mx_block: DMatrix<f64>,
    pub mp_block: DMatrix<f64>,
    pub eps: f64,
    pub drive: DVector<f64>,
}

impl QuadratureGenerator {
    pub fn n_sites(&self) -> usize {
        self.mx_block.nrows()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_sites()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.mx_block);
        h.view_mut((n, n), (n, n)).copy_from(&self.mp_block);
        h[(n - 1, 2 * n - 1)] = self.eps;
        h[(2 * n - 1, n - 1)] = -self.eps;
        h
    }
}

pub fn assemble_generator(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
) -> Result<QuadratureGenerator> {
    let n = p.n_sites;
    check_rows("loss matrix Z", n, z)?;
    check_rows("gain matrix Y", n, y)?;
    if !eps.is_finite() {
        return Err(Error::NonFinite("eps"));
    }
    let w = net_noise(z, y)?;
    let mut drive = DVector::zeros(2 * n);
    drive[0] = (2.0 * p.kappa).sqrt() * p.beta;
    Ok(QuadratureGenerator {
        mx_block: build_h_x(p) + &w,
        mp_block: build_h_p(p) + &w,
        eps,
        drive,
    })
}

/// Maps independent white-noise channels into the quadrature equations.
///
/// Column order: waveguide X, waveguide P, then X/P pairs for every gain
/// bath, then X/P pairs for every loss bath.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseInputMap {
    pub matrix: DMatrix<f64>,
    pub n_gain: usize,
    pub n_loss: usize,
}

impl NoiseInputMap {
    pub const WAVEGUIDE_X: usize = 0;
    pub const WAVEGUIDE_P: usize = 1;

    pub fn channels(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn gain_columns(&self, bath: usize) -> (usize, usize) {
        (2 + 2 * bath, 3 + 2 * bath)
    }

    pub fn loss_columns(&self, bath: usize) -> (usize, usize) {
        let base = 2 + 2 * self.n_gain;
        (base + 2 * bath, base + 1 + 2 * bath)
    }
}

pub fn build_noise_input_map(
    p: &SensorParams,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<NoiseInputMap> {
    let n = p.n_sites;
    check_rows("loss matrix Z", n, z)?;
    check_rows("gain matrix Y", n, y)?;
    let (ny, nz) = (y.ncols(), z.ncols());
    let mut l = DMatrix::zeros(2 * n, 2 + 2 * ny + 2 * nz);
    let sk = p.kappa.sqrt();
    l[(0, 0)] = sk;
    l[(n, 1)] = sk;
    let s2 = std::f64::consts::SQRT_2;
    for j in 0..ny {
        for i in 0..n {
            l[(i, 2 + 2 * j)] = s2 * y[(i, j)];
            l[(n + i, 3 + 2 * j)] = -s2 * y[(i, j)];
        }
    }
    let base = 2 + 2 * ny;
    for j in 0..nz {
        for i in 0..n {
            l[(i, base + 2 * j)] = s2 * z[(i, j)];
            l[(n + i, base + 1 + 2 * j)] = s2 * z[(i, j)];
        }
    }
    Ok(NoiseInputMap {
        matrix: l,
        n_gain: ny,
        n_loss: nz,
    })
}

/// Parameters together with loss and gain templates.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub params: SensorParams,
    pub loss: CouplingTemplate,
    pub gain: CouplingTemplate,
}

impl SensorModel {
    pub fn new(params: SensorParams, loss: CouplingTemplate, gain: CouplingTemplate) -> Result<Self> {
        let n = params.n_sites;
        if loss.rows() != n {
            return Err(mismatch("loss template", format!("{n} rows"), loss.rows()));
        }
        if gain.rows() != n {
            return Err(mismatch("gain template", format!("{n} rows"), gain.rows()));
        }
        Ok(Self { params, loss, gain })
    }

    /// No loss and no gain.
    pub fn ideal(params: SensorParams) -> Self {
        let n = params.n_sites;
        Self {
            params,
            loss: CouplingTemplate::empty(n),
            gain: CouplingTemplate::empty(n),
        }
    }

    /// Gain equal to the loss, `Y = Z`.
    pub fn balanced(params: SensorParams, loss: CouplingTemplate) -> Result<Self> {
        let gain = loss.clone();
        Self::new(params, loss, gain)
    }

    pub fn with_params(&self, params: SensorParams) -> Result<Self> {
        Self::new(params, self.loss.clone(), self.gain.clone())
    }

    pub fn loss_matrix(&self) -> Result<DMatrix<f64>> {
        self.loss.materialize(self.params.amp_a())
    }

    pub fn gain_matrix(&self) -> Result<DMatrix<f64>> {
        self.gain.materialize(self.params.amp_a())
    }

    pub fn generator(&self, eps: f64) -> Result<QuadratureGenerator> {
        assemble_generator(&self.params, &self.loss_matrix()?, &self.gain_matrix()?, eps)
    }

    pub fn noise_input_map(&self) -> Result<NoiseInputMap> {
        build_noise_input_map(&self.params, &self.loss_matrix()?, &self.gain_matrix()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, kappa: f64, j: f64, a: f64) -> SensorParams {
        SensorParams::from_hopping(n, j, a, kappa, 1.0, 1.0).unwrap()
    }

    #[test]
    fn reciprocal_chain() {
        let p = params(3, 10.0, 1.0, 0.0);
        let expect = DMatrix::from_row_slice(3, 3, &[-5.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        assert_eq!(build_h_x(&p), expect);
        assert_eq!(build_h_p(&p), expect);
    }

    #[test]
    fn ln2_hopping_entries() {
        let p = params(3, 10.0, 1.0, 2f64.ln());
        let h = build_h_x(&p);
        for i in 0..2 {
            assert!((h[(i + 1, i)] - 2.0).abs() < 1e-15);
            assert!((h[(i, i + 1)] + 0.5).abs() < 1e-15);
        }
        assert_eq!(h[(0, 2)], 0.0);
        assert_eq!(h[(2, 0)], 0.0);
    }

    #[test]
    fn p_sector_relations() {
        let p = params(5, 3.0, 1.3, 1.0);
        let (hx, hp) = (build_h_x(&p), build_h_p(&p));
        assert!((hp[(1, 0)] - 1.3 * (-1f64).exp()).abs() < 1e-15);
        // h^P = -(h^X)^T - kappa |1><1|
        let rhs = -hx.transpose() - DMatrix::from_fn(5, 5, |i, j| if i == 0 && j == 0 { 3.0 } else { 0.0 });
        assert!((hp - rhs).abs().max() < 1e-15);
    }

    #[test]
    fn net_noise_cases() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 0.5]);
        assert_eq!(net_noise(&z, &z).unwrap(), DMatrix::zeros(3, 3));
        let zero = DMatrix::zeros(3, 0);
        assert_eq!(net_noise(&zero, &zero).unwrap(), DMatrix::zeros(3, 3));
        let w = net_noise(&z, &zero).unwrap();
        // Hand product: (Z Z^T)_{13} = 1*(-1) + 2*0.5 = 0.
        assert_eq!(w[(0, 0)], -5.0);
        assert_eq!(w[(0, 2)], 0.0);
        assert_eq!(w[(1, 2)], -0.5);
        assert!(net_noise(&z, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn generator_layout() {
        let p = params(3, 10.0, 1.0, 0.4);
        let z = DMatrix::zeros(3, 0);
        let g0 = assemble_generator(&p, &z, &z, 0.0).unwrap().to_matrix();
        let g = assemble_generator(&p, &z, &z, 0.1).unwrap();
        let d = g.to_matrix() - &g0;
        assert_eq!(d[(2, 5)], 0.1);
        assert_eq!(d[(5, 2)], -0.1);
        assert_eq!(d.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(g0.view((0, 3), (3, 3)).abs().max(), 0.0);
        assert_eq!(g0.view((3, 0), (3, 3)).abs().max(), 0.0);
        assert!((g.drive.norm() - 20f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn waveguide_only_noise_map() {
        let p = params(3, 4.0, 1.0, 0.4);
        let z = DMatrix::zeros(3, 0);
        let l = build_noise_input_map(&p, &z, &z).unwrap().matrix;
        assert_eq!(l.ncols(), 2);
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(3, 1)], 2.0);
        assert_eq!(l.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn loss_and_gain_blocks() {
        let p = params(3, 4.0, 1.0, 0.4);
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 0.5]);
        let y = DMatrix::from_row_slice(3, 1, &[0.3, 0.0, 0.7]);
        let m = build_noise_input_map(&p, &z, &y).unwrap();
        assert_eq!(m.channels(), 2 + 2 + 4);
        let s2 = std::f64::consts::SQRT_2;
        let (gx, gp) = m.gain_columns(0);
        assert_eq!(m.matrix[(2, gx)], s2 * 0.7);
        assert_eq!(m.matrix[(5, gp)], -s2 * 0.7);
        for b in 0..2 {
            let (lx, lp) = m.loss_columns(b);
            for i in 0..3 {
                assert_eq!(m.matrix[(i, lx)], s2 * z[(i, b)]);
                assert_eq!(m.matrix[(3 + i, lp)], s2 * z[(i, b)]);
                assert_eq!(m.matrix[(3 + i, lx)], 0.0);
            }
        }
    }
}
