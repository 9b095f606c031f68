// SPDX-License-Identifier: Apache-2.0
//! TOML run configuration. See the README for the schema.
//!
//! Errors name the offending key and the line it sits on (the section
//! header when the key is missing).

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::SensorModel;
use crate::params::SensorParams;
use crate::stability::CouplingCase;
use crate::template::{CouplingTemplate, TemplateEntry};

/// One-paragraph schema summary used in "empty config" errors.
pub const SCHEMA_HINT: &str = "expected sections [sensor] (n_sites, kappa, beta, tau and one of \
hop_w+drive_delta | hop_j+amp_a | hop_w+amp_a), optional [loss] and [gain] (scale, rows; \
gain may use balanced = true), optional [perturbation] (eps, eps0) and optional [sweep] \
(variable, grid or start/stop/step)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    AmpA,
    AlphaScale,
    NSites,
    Eps0,
    Gamma,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::AmpA => "amp_a",
            Self::AlphaScale => "alpha_scale",
            Self::NSites => "n_sites",
            Self::Eps0 => "eps0",
            Self::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::AmpA, Self::AlphaScale, Self::NSites, Self::Eps0, Self::Gamma]
            .into_iter()
            .find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    /// Coupling geometry for `gamma` sweeps.
    pub case: CouplingCase,
    /// Use the beyond-linear engine for every point.
    pub beyond_linear: bool,
}

impl SweepSpec {
    /// Grid must be nonempty, finite and strictly monotone.
    pub fn validate_grid(grid: &[f64]) -> std::result::Result<(), String> {
        if grid.is_empty() {
            return Err("sweep grid is empty".into());
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err("sweep grid has non-finite values".into());
        }
        if grid.len() > 1 {
            let up = grid.windows(2).all(|w| w[1] > w[0]);
            let down = grid.windows(2).all(|w| w[1] < w[0]);
            if !(up || down) {
                return Err("sweep grid is not strictly monotone".into());
            }
        }
        Ok(())
    }
}

/// Templates are stored unscaled; `scale` multiplies every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub scale: f64,
    pub template: CouplingTemplate,
}

impl CouplingSpec {
    pub fn empty(n: usize) -> Self {
        Self {
            scale: 1.0,
            template: CouplingTemplate::empty(n),
        }
    }

    pub fn scaled(&self) -> CouplingTemplate {
        self.template.scaled(self.scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainSpec {
    Explicit(CouplingSpec),
    /// `Y = Z`, following the loss through any scale change.
    Balanced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SensorParams,
    pub loss: CouplingSpec,
    pub gain: GainSpec,
    pub eps: f64,
    pub eps0: Option<f64>,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn model(&self) -> Result<SensorModel> {
        let loss = self.loss.scaled();
        let gain = match &self.gain {
            GainSpec::Balanced => loss.clone(),
            GainSpec::Explicit(g) => g.scaled(),
        };
        SensorModel::new(self.params, loss, gain)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        parse_config(&text)
    }
}

struct Src<'a> {
    text: &'a str,
}

impl Src<'_> {
    /// 1-based line of `key = ...` inside `[section]`, else of the header.
    fn line(&self, section: &str, key: Option<&str>) -> usize {
        let mut current = String::new();
        let mut header = 1;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
                current = name.trim().to_string();
                if current == section {
                    header = i + 1;
                }
                continue;
            }
            if current == section {
                if let Some(k) = key {
                    if let Some(rest) = line.strip_prefix(k) {
                        if rest.trim_start().starts_with('=') {
                            return i + 1;
                        }
                    }
                }
            }
        }
        header
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            key: format!("{section}.{key}"),
            line: self.line(section, Some(key)),
            message: message.into(),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn get_f64(src: &Src, sec: &Table, section: &str, key: &str) -> Result<Option<f64>> {
    match sec.get(key) {
        None => Ok(None),
        Some(Value::Float(f)) => Ok(Some(*f)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(other) => Err(src.err(section, key, format!("expected a number, found {}", other.type_str()))),
    }
}

fn req_f64(src: &Src, sec: &Table, section: &str, key: &str) -> Result<f64> {
    get_f64(src, sec, section, key)?.ok_or_else(|| src.err(section, key, "missing required key"))
}

fn check_keys(src: &Src, sec: &Table, section: &str, allowed: &[&str]) -> Result<()> {
    for k in sec.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(src.err(section, k, format!("unknown key; allowed: {}", allowed.join(", "))));
        }
    }
    Ok(())
}

fn parse_sensor(src: &Src, sec: &Table) -> Result<SensorParams> {
    const S: &str = "sensor";
    check_keys(
        src,
        sec,
        S,
        &["n_sites", "hop_w", "drive_delta", "hop_j", "amp_a", "kappa", "beta", "tau"],
    )?;
    let n = match sec.get("n_sites") {
        Some(Value::Integer(i)) if *i > 0 => *i as usize,
        Some(_) => return Err(src.err(S, "n_sites", "expected a positive integer")),
        None => return Err(src.err(S, "n_sites", "missing required key")),
    };
    let kappa = req_f64(src, sec, S, "kappa")?;
    let beta = req_f64(src, sec, S, "beta")?;
    let tau = req_f64(src, sec, S, "tau")?;
    let w = get_f64(src, sec, S, "hop_w")?;
    let delta = get_f64(src, sec, S, "drive_delta")?;
    let j = get_f64(src, sec, S, "hop_j")?;
    let a = get_f64(src, sec, S, "amp_a")?;
    let built = match (w, delta, j, a) {
        (Some(w), Some(d), None, None) => SensorParams::new(n, w, d, kappa, beta, tau),
        (None, None, Some(j), Some(a)) => SensorParams::from_hopping(n, j, a, kappa, beta, tau),
        (Some(w), None, None, Some(a)) => SensorParams::from_hop_w_and_amp(n, w, a, kappa, beta, tau),
        _ => {
            return Err(src.err(
                S,
                if j.is_some() { "hop_j" } else { "hop_w" },
                "give exactly one of: hop_w + drive_delta, hop_j + amp_a, hop_w + amp_a",
            ))
        }
    };
    built.map_err(|e| {
        let key = match &e {
            Error::InvalidParameter { name, .. } => (*name).to_string(),
            _ => "n_sites".to_string(),
        };
        src.err(S, &key, e.to_string())
    })
}

fn parse_entry(v: &Value) -> std::result::Result<TemplateEntry, String> {
    match v {
        Value::Float(f) => Ok(TemplateEntry::new(*f, 0)),
        Value::Integer(i) => Ok(TemplateEntry::new(*i as f64, 0)),
        Value::Array(pair) if pair.len() == 2 => {
            let coeff = match &pair[0] {
                Value::Float(f) => *f,
                Value::Integer(i) => *i as f64,
                _ => return Err("entry coefficient must be a number".into()),
            };
            let exp = match &pair[1] {
                Value::Integer(i) => i32::try_from(*i).map_err(|_| "exp_mult out of range".to_string())?,
                _ => return Err("exp_mult must be an integer".into()),
            };
            Ok(TemplateEntry::new(coeff, exp))
        }
        _ => Err("entry must be a number or a [coeff, exp_mult] pair".into()),
    }
}

fn parse_coupling(src: &Src, sec: &Table, section: &str, n: usize) -> Result<CouplingSpec> {
    let scale = get_f64(src, sec, section, "scale")?.unwrap_or(1.0);
    let rows = match sec.get("rows") {
        None => return Ok(CouplingSpec { scale, ..CouplingSpec::empty(n) }),
        Some(Value::Array(rows)) => rows,
        Some(_) => return Err(src.err(section, "rows", "expected an array of rows")),
    };
    if rows.len() != n {
        return Err(src.err(section, "rows", format!("expected {n} rows (one per site), found {}", rows.len())));
    }
    let mut parsed = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let Value::Array(cells) = row else {
            return Err(src.err(section, "rows", format!("row {} is not an array", i + 1)));
        };
        let mut out = Vec::with_capacity(cells.len());
        for (j, c) in cells.iter().enumerate() {
            out.push(parse_entry(c).map_err(|m| src.err(section, "rows", format!("row {}, column {}: {m}", i + 1, j + 1)))?);
        }
        parsed.push(out);
    }
    let template = CouplingTemplate::from_rows(&parsed).map_err(|e| src.err(section, "rows", e.to_string()))?;
    Ok(CouplingSpec { scale, template })
}

fn parse_sweep(src: &Src, sec: &Table) -> Result<SweepSpec> {
    const S: &str = "sweep";
    check_keys(src, sec, S, &["variable", "grid", "start", "stop", "step", "case", "regime"])?;
    let variable = match sec.get("variable") {
        Some(Value::String(s)) => SweepVariable::parse(s).ok_or_else(|| {
            src.err(S, "variable", "expected one of amp_a, alpha_scale, n_sites, eps0, gamma")
        })?,
        Some(_) => return Err(src.err(S, "variable", "expected a string")),
        None => return Err(src.err(S, "variable", "missing required key")),
    };
    let grid = if let Some(g) = sec.get("grid") {
        let Value::Array(vals) = g else {
            return Err(src.err(S, "grid", "expected an array of numbers"));
        };
        vals.iter()
            .map(|v| match v {
                Value::Float(f) => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(src.err(S, "grid", "expected an array of numbers")),
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let start = req_f64(src, sec, S, "start")?;
        let stop = req_f64(src, sec, S, "stop")?;
        let step = req_f64(src, sec, S, "step")?;
        if !(step.is_finite() && step != 0.0) || (stop - start) * step < 0.0 {
            return Err(src.err(S, "step", "step must be nonzero and point from start to stop"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    };
    SweepSpec::validate_grid(&grid).map_err(|m| src.err(S, "grid", m))?;
    if variable == SweepVariable::NSites
        && grid.iter().any(|v| v.fract() != 0.0 || *v < 3.0 || (*v as usize).is_multiple_of(2))
    {
        return Err(src.err(S, "grid", "n_sites values must be odd integers >= 3"));
    }
    let case = match sec.get("case") {
        None | Some(Value::Integer(2)) => CouplingCase::Two,
        Some(Value::Integer(1)) => CouplingCase::One,
        Some(_) => return Err(src.err(S, "case", "expected 1 or 2")),
    };
    let beyond_linear = match sec.get("regime") {
        None => variable == SweepVariable::Eps0,
        Some(Value::String(s)) if s == "linear" => false,
        Some(Value::String(s)) if s == "beyond_linear" => true,
        Some(_) => return Err(src.err(S, "regime", "expected \"linear\" or \"beyond_linear\"")),
    };
    if variable == SweepVariable::Eps0 && !beyond_linear {
        return Err(src.err(S, "regime", "an eps0 sweep needs the beyond_linear regime"));
    }
    Ok(SweepSpec {
        variable,
        grid,
        case,
        beyond_linear,
    })
}

fn section<'a>(src: &Src, root: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::Config {
            key: name.to_string(),
            line: src.line(name, None),
            message: "expected a table".into(),
        }),
    }
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let src = Src { text };
    let root: Table = text.parse::<Table>().map_err(|e| Error::Config {
        key: "toml".into(),
        line: e.span().map_or(1, |s| line_of_offset(text, s.start)),
        message: e.message().to_string(),
    })?;
    if root.is_empty() {
        return Err(Error::Config {
            key: "sensor".into(),
            line: 1,
            message: format!("empty config; {SCHEMA_HINT}"),
        });
    }
    for k in root.keys() {
        if !["sensor", "loss", "gain", "perturbation", "sweep"].contains(&k.as_str()) {
            return Err(Error::Config {
                key: k.clone(),
                line: src.line(k, None),
                message: format!("unknown section; {SCHEMA_HINT}"),
            });
        }
    }
    let sensor = section(&src, &root, "sensor")?.ok_or_else(|| Error::Config {
        key: "sensor".into(),
        line: 1,
        message: format!("missing [sensor] section; {SCHEMA_HINT}"),
    })?;
    let params = parse_sensor(&src, sensor)?;
    let n = params.n_sites;

    let loss = match section(&src, &root, "loss")? {
        Some(t) => {
            check_keys(&src, t, "loss", &["scale", "rows"])?;
            parse_coupling(&src, t, "loss", n)?
        }
        None => CouplingSpec::empty(n),
    };
    let gain = match section(&src, &root, "gain")? {
        Some(t) => {
            check_keys(&src, t, "gain", &["scale", "rows", "balanced"])?;
            match t.get("balanced") {
                Some(Value::Boolean(true)) => {
                    if t.contains_key("rows") || t.contains_key("scale") {
                        return Err(src.err("gain", "balanced", "balanced = true excludes rows and scale"));
                    }
                    GainSpec::Balanced
                }
                Some(Value::Boolean(false)) | None => GainSpec::Explicit(parse_coupling(&src, t, "gain", n)?),
                Some(_) => return Err(src.err("gain", "balanced", "expected a boolean")),
            }
        }
        None => GainSpec::Explicit(CouplingSpec::empty(n)),
    };

    let (eps, eps0) = match section(&src, &root, "perturbation")? {
        Some(t) => {
            check_keys(&src, t, "perturbation", &["eps", "eps0"])?;
            let eps = get_f64(&src, t, "perturbation", "eps")?.unwrap_or(1e-3);
            let eps0 = get_f64(&src, t, "perturbation", "eps0")?;
            if !eps.is_finite() {
                return Err(src.err("perturbation", "eps", "must be finite"));
            }
            if let Some(e0) = eps0 {
                if !(e0.is_finite() && e0 != 0.0) {
                    return Err(src.err("perturbation", "eps0", "must be finite and nonzero"));
                }
            }
            (eps, eps0)
        }
        None => (1e-3, None),
    };

    let sweep = section(&src, &root, "sweep")?.map(|t| parse_sweep(&src, t)).transpose()?;

    let cfg = RunConfig {
        params,
        loss,
        gain,
        eps,
        eps0,
        sweep,
    };
    // materialization at the configured A catches overflowing templates early
    let model = cfg.model().map_err(|e| src.err("loss", "rows", e.to_string()))?;
    model.loss_matrix().map_err(|e| src.err("loss", "rows", e.to_string()))?;
    model.gain_matrix().map_err(|e| src.err("gain", "rows", e.to_string()))?;
    Ok(cfg)
}
