//! Declarative experiment files (TOML) with `section.key=value` overrides.
//!
//! ```toml
//! model = "ode"            # ode | ode-harvest | pde-const | pde-inhomogeneous
//!
//! [params]
//! a1 = 1.8
//! a2 = 3.0
//! b1 = 1.0
//! b2 = 1.0
//! c1 = 0.5
//! c2 = 1.8
//! p = 0.4
//!
//! [initial]
//! u = 0.8
//! v = "20"                 # numbers or expressions in x
//!
//! [solver]
//! t_end = 200.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::kinetics::{HarvestParams, KineticParams, ParamError, State2};
use crate::ode::IntegrateOptions;
use crate::pde::{Grid, PdeError, PdeOptions, PdeParams, PdeState, Reaction, ResourceField, Scheme};
use crate::scan::{Axis, IcPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid override `{0}` (expected section.key=value)")]
    Override(String),
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.to_string() }
    }

    fn missing(field: &str) -> Self {
        Self::invalid(field, "required for this model")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Ode,
    OdeHarvest,
    PdeConst,
    PdeInhomogeneous,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Ode => "ode",
            Model::OdeHarvest => "ode-harvest",
            Model::PdeConst => "pde-const",
            Model::PdeInhomogeneous => "pde-inhomogeneous",
        }
    }
}

/// A constant or an expression in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub enum Profile {
    Constant(f64),
    Expr(Expr),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<ProfileRepr> for Profile {
    type Error = ExprError;

    fn try_from(r: ProfileRepr) -> Result<Self, Self::Error> {
        match r {
            ProfileRepr::Number(v) => Ok(Profile::Constant(v)),
            ProfileRepr::Text(s) => Expr::parse(&s).map(Profile::Expr),
        }
    }
}

impl From<Profile> for ProfileRepr {
    fn from(p: Profile) -> Self {
        match p {
            Profile::Constant(v) => ProfileRepr::Number(v),
            Profile::Expr(e) => ProfileRepr::Text(e.source().to_string()),
        }
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Expr(e) => e.eval(x),
        }
    }

    /// Value for point models; expressions are evaluated at `x = 0`.
    pub fn scalar(&self) -> f64 {
        self.eval(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Harvest split and coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Inhomogeneous interspecific rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
}

/// Spatially constant data inside the recovery band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandBlock {
    pub u0: f64,
    /// Position between the lower and upper bound, in `[0, 1]`.
    pub fraction: f64,
    /// Exponent used to evaluate the band.
    pub p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    #[serde(default)]
    pub x0: f64,
    pub x1: f64,
    #[serde(default = "default_nx")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Profile>,
}

fn default_nx() -> usize {
    128
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_on_outcome: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryBlock {
    /// Fractional exponent at which the recovery conditions are evaluated.
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Diffusion,
    C1Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub kind: ScanKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<IcPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_exponent: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("value = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("value").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `section.key=value` to a parsed document.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let keys: Vec<&str> = path.trim().split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.to_string()));
    }
    let mut cur = table;
    for key in &keys[..keys.len() - 1] {
        let entry = cur.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, overrides)
    }

    /// Parse, apply overrides, and validate.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let config: Self = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            let mut table: toml::Table =
                text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Re-check every physical constraint the model needs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.model {
            Model::Ode => {
                self.kinetic_params()?;
            }
            Model::OdeHarvest => {
                self.harvest_params()?;
            }
            Model::PdeConst | Model::PdeInhomogeneous => {
                self.pde_params()?;
            }
        }
        if let Some(t) = self.solver.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::invalid("solver.t_end", "must be positive and finite"));
            }
        }
        if let Some(scan) = &self.scan {
            if scan.kind == ScanKind::Diffusion && !matches!(self.model, Model::PdeConst | Model::PdeInhomogeneous) {
                return Err(ConfigError::invalid("scan.kind", "diffusion scans need a pde model"));
            }
            if scan.kind == ScanKind::C1Window && self.model != Model::Ode {
                return Err(ConfigError::invalid("scan.kind", "c1-window scans need the ode model"));
            }
        }
        Ok(())
    }

    fn param(&self, name: &str, value: Option<f64>) -> Result<f64, ConfigError> {
        value.ok_or_else(|| ConfigError::missing(&format!("params.{name}")))
    }

    pub fn kinetic_params(&self) -> Result<KineticParams, ConfigError> {
        let p = &self.params;
        let k = KineticParams {
            a1: self.param("a1", p.a1)?,
            a2: self.param("a2", p.a2)?,
            b1: self.param("b1", p.b1)?,
            b2: self.param("b2", p.b2)?,
            c1: self.param("c1", p.c1)?,
            c2: self.param("c2", p.c2)?,
            p: p.p.unwrap_or(1.0),
            q: p.q.unwrap_or(1.0),
        };
        k.validate().map_err(param_error)?;
        Ok(k)
    }

    pub fn harvest_params(&self) -> Result<HarvestParams, ConfigError> {
        let base = self.kinetic_params()?;
        let d = self.param("d", self.params.d)?;
        let e = self.param("e", self.params.e)?;
        HarvestParams::new(base, d, e)
            .and_then(|h| h.with_coupling(self.params.coupling.unwrap_or(1.0)))
            .map_err(param_error)
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let d = self.domain.as_ref().ok_or_else(|| ConfigError::missing("domain"))?;
        Grid::new(d.x0, d.x1, d.n).map_err(|e| ConfigError::invalid("domain", e))
    }

    pub fn pde_params(&self) -> Result<PdeParams, ConfigError> {
        let grid = self.grid()?;
        let reaction = match self.model {
            Model::PdeConst => Reaction::Constant(self.kinetic_params()?),
            Model::PdeInhomogeneous => {
                let m =
                    self.domain.as_ref().and_then(|d| d.m.as_ref()).ok_or_else(|| ConfigError::missing("domain.m"))?;
                let m =
                    ResourceField::from_fn(&grid, |x| m.eval(x)).map_err(|e| ConfigError::invalid("domain.m", e))?;
                Reaction::Inhomogeneous {
                    b: self.param("b", self.params.b)?,
                    c: self.param("c", self.params.c)?,
                    p: self.params.p.unwrap_or(1.0),
                    m,
                }
            }
            _ => return Err(ConfigError::invalid("model", "not a pde model")),
        };
        // a diffusion scan supplies its own diffusivities
        let scanned = matches!(&self.scan, Some(s) if s.kind == ScanKind::Diffusion).then_some(1.0);
        let params = PdeParams {
            reaction,
            d1: self.param("d1", self.params.d1.or(scanned))?,
            d2: self.param("d2", self.params.d2.or(scanned))?,
        };
        params.validate(&grid).map_err(pde_error)?;
        Ok(params)
    }

    fn initial_block(&self) -> Result<&InitialBlock, ConfigError> {
        self.initial.as_ref().ok_or_else(|| ConfigError::missing("initial"))
    }

    /// Point initial condition for the ODE models.
    pub fn initial_point(&self) -> Result<State2, ConfigError> {
        let init = self.initial_block()?;
        if let Some(band) = &init.band {
            return self.band_point(band);
        }
        let u = init.u.as_ref().ok_or_else(|| ConfigError::missing("initial.u"))?.scalar();
        let v = init.v.as_ref().ok_or_else(|| ConfigError::missing("initial.v"))?.scalar();
        let s = State2::new(u, v);
        if !s.is_finite() || !s.is_nonnegative() {
            return Err(ConfigError::invalid("initial", "densities must be finite and non-negative"));
        }
        Ok(s)
    }

    fn band_point(&self, band: &BandBlock) -> Result<State2, ConfigError> {
        let k = KineticParams { p: band.p, ..self.kinetic_params()? };
        crate::pde::recovery_band_point(&k, band.u0, band.fraction).map_err(|e| ConfigError::invalid("initial.band", e))
    }

    /// Initial fields for the PDE models.
    pub fn initial_state(&self) -> Result<PdeState, ConfigError> {
        let grid = self.grid()?;
        let init = self.initial_block()?;
        if let Some(band) = &init.band {
            return PdeState::constant(grid, self.band_point(band)?)
                .map_err(|e| ConfigError::invalid("initial.band", e));
        }
        let u = init.u.as_ref().ok_or_else(|| ConfigError::missing("initial.u"))?;
        let v = init.v.as_ref().ok_or_else(|| ConfigError::missing("initial.v"))?;
        PdeState::new(grid, grid.sample(|x| u.eval(x)), grid.sample(|x| v.eval(x)))
            .map_err(|e| ConfigError::invalid("initial", e))
    }

    pub fn t_end(&self, default: f64) -> f64 {
        self.solver.t_end.unwrap_or(default)
    }

    pub fn integrate_options(&self) -> IntegrateOptions {
        let d = IntegrateOptions::default();
        IntegrateOptions {
            rtol: self.solver.rtol.unwrap_or(d.rtol),
            atol: self.solver.atol.unwrap_or(d.atol),
            h_max: self.solver.h_max.unwrap_or(d.h_max),
            ..d
        }
    }

    pub fn pde_options(&self) -> PdeOptions {
        let d = PdeOptions::default();
        PdeOptions {
            scheme: self.solver.scheme.unwrap_or(d.scheme),
            dt_max: self.solver.dt_max.unwrap_or(d.dt_max),
            stop_on_outcome: self.solver.stop_on_outcome.unwrap_or(d.stop_on_outcome),
            snapshot_times: self.solver.snapshot_times.clone(),
            ..d
        }
    }

    pub fn scan_block(&self) -> Result<&ScanBlock, ConfigError> {
        self.scan.as_ref().ok_or_else(|| ConfigError::missing("scan"))
    }

    /// Diffusivity axes, with `resolution` taking precedence over the file.
    pub fn scan_axes(&self, resolution: Option<usize>) -> Result<(Axis, Axis), ConfigError> {
        let s = self.scan_block()?;
        let n = resolution.or(s.resolution).unwrap_or(16);
        let d = Axis::default();
        let d1 = Axis::log(s.d1_min.unwrap_or(d.lo), s.d1_max.unwrap_or(d.hi), n)
            .map_err(|e| ConfigError::invalid("scan.d1", e))?;
        let d2 = Axis::log(s.d2_min.unwrap_or(d.lo), s.d2_max.unwrap_or(d.hi), n)
            .map_err(|e| ConfigError::invalid("scan.d2", e))?;
        Ok((d1, d2))
    }
}

fn param_error(e: ParamError) -> ConfigError {
    let field = match &e {
        ParamError::NonPositive { name, .. } | ParamError::ExponentOutOfRange { name, .. } => format!("params.{name}"),
        ParamError::InvalidSplit { .. } => "params.d/params.e".to_string(),
    };
    ConfigError::invalid(field, e)
}

fn pde_error(e: PdeError) -> ConfigError {
    match e {
        PdeError::Param(p) => param_error(p),
        PdeError::InvalidDiffusivity { name, .. } => ConfigError::invalid(format!("params.{name}"), e),
        PdeError::InvalidResource { .. } => ConfigError::invalid("domain.m", e),
        other => ConfigError::invalid("domain", other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ODE: &str = r#"
model = "ode"

[params]
a1 = 1.8
a2 = 3.0
b1 = 1.0
b2 = 1.0
c1 = 0.5
c2 = 1.8
p = 0.4

[initial]
u = 0.8
v = "10 + 2^2"
"#;

    #[test]
    fn parses_and_builds() {
        let c = ExperimentConfig::parse(ODE, &[]).unwrap();
        assert_eq!(c.model, Model::Ode);
        assert_eq!(c.kinetic_params().unwrap().q, 1.0);
        assert_eq!(c.initial_point().unwrap(), State2::new(0.8, 14.0));
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::parse(ODE, &[]).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml(), &[]).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn overrides_replace_and_create_keys() {
        let c =
            ExperimentConfig::parse(ODE, &["params.p=0.5".into(), "solver.t_end=50".into(), "initial.u=x+1".into()])
                .unwrap();
        assert_eq!(c.params.p, Some(0.5));
        assert_eq!(c.solver.t_end, Some(50.0));
        assert_eq!(c.initial_point().unwrap().u, 1.0);
        assert!(matches!(ExperimentConfig::parse(ODE, &["nonsense".into()]), Err(ConfigError::Override(_))));
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let bad = ODE.replace("c2 = 1.8", "c2 = 1.8\nc3 = 1.0");
        let msg = ExperimentConfig::parse(&bad, &[]).unwrap_err().to_string();
        assert!(msg.contains("c3"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn physical_constraints_rechecked() {
        let err = ExperimentConfig::parse(ODE, &["params.p=1.5".into()]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "params.p"), "{err}");
        let err = ExperimentConfig::parse(&ODE.replace("a1 = 1.8\n", ""), &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref field, .. } if field == "params.a1"));
        let err = ExperimentConfig::parse(ODE, &["initial.v=\"1 +\"".into()]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn pde_fields_from_expressions() {
        let text = r#"
model = "pde-inhomogeneous"
[params]
b = 0.999
c = 0.999
p = 0.7
d1 = 1e-4
d2 = 3e-4
[domain]
x1 = 1.0
n = 16
m = "x*(1-x)"
[initial]
u = "x*(1-x)/2 + 0.01"
v = 0.02
"#;
        let c = ExperimentConfig::parse(text, &[]).unwrap();
        let s = c.initial_state().unwrap();
        let x = c.grid().unwrap().x(3);
        assert!((s.u[3] - (x * (1.0 - x) / 2.0 + 0.01)).abs() < 1e-15);
        assert_eq!(s.v, vec![0.02; 16]);
        assert_eq!(ExperimentConfig::parse(&c.to_toml(), &[]).unwrap(), c);
        assert!(ExperimentConfig::parse(text, &["domain.m=\"x - 1\"".into()]).is_err());
    }
}
