// SPDX-License-Identifier: Apache-2.0
//! Parameter sweeps with CSV output in grid order.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{RunConfig, SweepSpec, SweepVariable};
use crate::error::{Error, Result};
use crate::model::SensorModel;
use crate::response::{ResponseEngine, SensingReport};
use crate::stability::CouplingCase;
use crate::template::CouplingTemplate;

pub const CSV_HEADER: &str = "sweep_var,value,signal,noise,n_tot,snr_per_photon,log10_norm,stable,error";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub report: Option<SensingReport>,
    pub stable: Option<bool>,
    pub error: Option<String>,
}

/// Loss and gain columns producing `gamma (|1><j| + |j><1|)` in `YY^T - ZZ^T`:
/// `Y = s (e_1 + e_j)`, `Z = s (e_1 - e_j)` with `gamma = 2 s^2` (swapped
/// for negative `gamma`).
pub fn gamma_baths(n: usize, case: CouplingCase, gamma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let j = case.far_site(n) - 1;
    let s = (gamma.abs() / 2.0).sqrt();
    let mut plus = DMatrix::zeros(n, 1);
    let mut minus = DMatrix::zeros(n, 1);
    plus[(0, 0)] = s;
    plus[(j, 0)] = s;
    minus[(0, 0)] = s;
    minus[(j, 0)] = -s;
    if gamma >= 0.0 {
        (minus, plus)
    } else {
        (plus, minus)
    }
}

fn resize_empty(t: &CouplingTemplate, n: usize) -> Result<CouplingTemplate> {
    if t.cols() == 0 {
        Ok(CouplingTemplate::empty(n))
    } else if t.rows() == n {
        Ok(t.clone())
    } else {
        Err(crate::error::mismatch("n_sites sweep", format!("{n}-row templates"), t.rows()))
    }
}

fn point_model(cfg: &RunConfig, var: SweepVariable, v: f64) -> Result<SensorModel> {
    match var {
        SweepVariable::AmpA => cfg.model()?.with_params(cfg.params.with_amp_a(v)?),
        SweepVariable::AlphaScale => {
            let mut c = cfg.clone();
            c.loss.scale = v;
            c.model()
        }
        SweepVariable::NSites => {
            let base = cfg.model()?;
            let n = v as usize;
            SensorModel::new(
                cfg.params.with_n_sites(n)?,
                resize_empty(&base.loss, n)?,
                resize_empty(&base.gain, n)?,
            )
        }
        SweepVariable::Eps0 | SweepVariable::Gamma => cfg.model(),
    }
}

fn evaluate(cfg: &RunConfig, spec: &SweepSpec, engine: &ResponseEngine, v: f64) -> Result<SensingReport> {
    let model = point_model(cfg, spec.variable, v)?;
    let p = &model.params;
    let (mut z, mut y) = (model.loss_matrix()?, model.gain_matrix()?);
    if spec.variable == SweepVariable::Gamma {
        let (gz, gy) = gamma_baths(p.n_sites, spec.case, v);
        z = hstack(&z, &gz);
        y = hstack(&y, &gy);
    }
    if spec.beyond_linear {
        let eps0 = if spec.variable == SweepVariable::Eps0 {
            v
        } else {
            cfg.eps0.ok_or_else(|| crate::error::invalid("eps0", "beyond_linear sweeps need [perturbation] eps0"))?
        };
        engine.snr_beyond(p, &z, &y, eps0)
    } else {
        engine.snr_per_photon_linear(p, &z, &y, cfg.eps)
    }
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Evaluates every grid point in parallel; rows come back in grid order.
pub fn run_sweep(cfg: &RunConfig, spec: &SweepSpec, engine: &ResponseEngine) -> Result<Vec<SweepRow>> {
    SweepSpec::validate_grid(&spec.grid).map_err(|m| Error::Config {
        key: "sweep.grid".into(),
        line: 1,
        message: m,
    })?;
    Ok(spec
        .grid
        .par_iter()
        .map(|&v| match evaluate(cfg, spec, engine, v) {
            Ok(r) => SweepRow {
                value: v,
                stable: Some(r.stable),
                report: Some(r),
                error: None,
            },
            Err(Error::Unstable { .. }) => SweepRow {
                value: v,
                report: None,
                stable: Some(false),
                error: None,
            },
            Err(e) => SweepRow {
                value: v,
                report: None,
                stable: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// CSV text: one `#` metadata line, the header, then one row per point.
pub fn to_csv(cfg: &RunConfig, spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# nhsense {} sweep variable={} points={} regime={} n_sites={} kappa={:e} eps={:e}",
        env!("CARGO_PKG_VERSION"),
        spec.variable.name(),
        rows.len(),
        if spec.beyond_linear { "beyond_linear" } else { "linear" },
        cfg.params.n_sites,
        cfg.params.kappa,
        cfg.eps,
    );
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{:.16e},", spec.variable.name(), row.value);
        match &row.report {
            Some(r) => {
                let _ = write!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},",
                    r.signal, r.noise, r.n_tot, r.snr_per_photon, r.log10_snr_per_photon_normalized
                );
            }
            None => out.push_str(",,,,,"),
        }
        if let Some(s) = row.stable {
            out.push_str(if s { "true" } else { "false" });
        }
        out.push(',');
        if let Some(e) = &row.error {
            out.push_str(&csv_quote(e));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::net_noise;

    #[test]
    fn gamma_baths_realize_symmetric_coupling() {
        for g in [0.3, -0.7] {
            let (z, y) = gamma_baths(5, CouplingCase::Two, g);
            let w = net_noise(&z, &y).unwrap();
            let mut expect = DMatrix::zeros(5, 5);
            expect[(0, 4)] = g;
            expect[(4, 0)] = g;
            assert!((w - expect).amax() < 1e-15);
        }
    }

    #[test]
    fn csv_quotes_errors() {
        assert_eq!(csv_quote("a \"b\", c"), "\"a \"\"b\"\", c\"");
    }
}
