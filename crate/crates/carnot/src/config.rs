//! Config-file formats: group specs, domains, expression sets, and solver
//! parameters, composed as one TOML document.

use crate::domain::{Domain, DomainError};
use crate::expr::{parse_expression, parse_with_params, Expression, ParseError};
use crate::gauge::{gauge_calibrate, GaugeError};
use crate::group::{
    build_group, expression_to_polynomial, GroupError, Preset, StratifiedGroup,
    StratifiedGroupSpec,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config syntax: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("field `{field}`: {source}")]
    Expr {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("field `{field}`: expression references x{} but the group has dimension {dim}", index + 1)]
    CoordOutOfRange {
        field: String,
        index: usize,
        dim: usize,
    },
    #[error("field `{field}`: {message}")]
    Bad { field: String, message: String },
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct GroupConfig {
    pub name: Option<String>,
    pub preset: Option<String>,
    pub strata: Option<Vec<usize>>,
    #[serde(default)]
    pub coeffs: Vec<CoeffEntry>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CoeffEntry {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub poly: String,
}

impl GroupConfig {
    pub fn preset_id(id: &str) -> GroupConfig {
        GroupConfig {
            preset: Some(id.to_string()),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<StratifiedGroup, ConfigError> {
        if let Some(id) = &self.preset {
            let preset =
                Preset::parse(id).ok_or_else(|| ConfigError::UnknownPreset(id.clone()))?;
            return Ok(StratifiedGroup::preset(preset));
        }
        let strata = self.strata.clone().ok_or(ConfigError::Missing("group.strata"))?;
        let n: usize = strata.iter().sum();
        let mut entries = Vec::new();
        for c in &self.coeffs {
            let field = format!("group.coeffs[k={},l={},m={}]", c.k, c.l, c.m);
            let expr = parse_expression(&c.poly).map_err(|source| ConfigError::Expr {
                field: field.clone(),
                source,
            })?;
            let poly = expression_to_polynomial(&expr, n).map_err(|message| ConfigError::Bad {
                field: field.clone(),
                message,
            })?;
            entries.push((c.k, c.l, c.m, poly));
        }
        let name = self.name.clone().unwrap_or_else(|| "custom".into());
        let spec = StratifiedGroupSpec::custom(&name, strata, entries)?;
        Ok(build_group(spec)?)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    GaugeBall { center: Vec<f64>, radius: f64 },
}

impl DomainConfig {
    pub fn build(&self, g: &StratifiedGroup) -> Result<Domain, ConfigError> {
        match self {
            DomainConfig::Box { lo, hi } => Ok(Domain::box_domain(lo, hi)?),
            DomainConfig::GaugeBall { center, radius } => {
                let pg = gauge_calibrate(g)?;
                Ok(Domain::gauge_ball(g, &pg, center, *radius)?)
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct ExpressionsConfig {
    pub u: Option<String>,
    pub v: Option<String>,
    /// One-variable nonlinearity in t (written in x1).
    pub f: Option<String>,
    /// Reaction F(x, rho).
    pub reaction: Option<String>,
    /// Schrodinger potential q(rho, x).
    pub q: Option<String>,
    /// Robin coefficients a_j.
    #[serde(default)]
    pub a: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct ParamsConfig {
    pub p: f64,
    pub order: usize,
    pub n: Vec<usize>,
    pub tol: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub delta: f64,
    pub q_exp: f64,
    pub n_starts: usize,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            p: 2.0,
            order: 8,
            n: vec![9, 9, 9],
            tol: 1e-8,
            eps: 1e-8,
            max_iter: 200_000,
            seed: 0,
            delta: 0.5,
            q_exp: 0.5,
            n_starts: 5,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct RunConfig {
    pub group: Option<GroupConfig>,
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub expressions: ExpressionsConfig,
    #[serde(default)]
    pub params: Option<ParamsConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> ParamsConfig {
        self.params.clone().unwrap_or_default()
    }

    pub fn build_group(&self) -> Result<StratifiedGroup, ConfigError> {
        self.group
            .as_ref()
            .ok_or(ConfigError::Missing("group"))?
            .build()
    }

    /// Parse and dimension-check a plain expression field.
    pub fn expression(
        &self,
        field: &'static str,
        text: &str,
        g: &StratifiedGroup,
    ) -> Result<Expression, ConfigError> {
        let e = parse_expression(text).map_err(|source| ConfigError::Expr {
            field: field.to_string(),
            source,
        })?;
        check_coords(field, &e, g)?;
        if let Some(p) = self.params.as_ref().map(|p| p.p) {
            if !(p > 1.0) {
                return Err(ConfigError::Bad {
                    field: "params.p".into(),
                    message: format!("p must exceed 1, got {p}"),
                });
            }
        }
        Ok(e)
    }

    /// Parse an expression that may also mention `rho`.
    pub fn rho_expression(
        &self,
        field: &'static str,
        text: &str,
        g: &StratifiedGroup,
    ) -> Result<Expression, ConfigError> {
        let e = parse_with_params(text, &["rho"]).map_err(|source| ConfigError::Expr {
            field: field.to_string(),
            source,
        })?;
        check_coords(field, &e, g)?;
        Ok(e)
    }
}

fn check_coords(
    field: &'static str,
    e: &Expression,
    g: &StratifiedGroup,
) -> Result<(), ConfigError> {
    if let Some(mc) = e.max_coord() {
        if mc >= g.dim() {
            return Err(ConfigError::CoordOutOfRange {
                field: field.to_string(),
                index: mc,
                dim: g.dim(),
            });
        }
    }
    Ok(())
}
