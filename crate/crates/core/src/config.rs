//! JSON run configuration.
//!
//! Rationals are written as integers or strings such as `"1/3"`. An algebra
//! is either a preset (`Z2`, `Zn`, `trivial`) or a raw table with a trace
//! form; a manifold is a preset (`A2`, `CP1`, `cubic1d`) or a prepotential
//! with Euler data.

use num_traits::Zero;
use serde::Deserialize;
use thiserror::Error;

use crate::algebra::{AlgebraError, FrobeniusAlgebra};
use crate::dispersive::MchSign;
use crate::expr::{parse, ExprError};
use crate::manifold::{EulerData, FrobeniusManifold, ManifoldError};
use crate::scalar::{parse_rational, Q};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational {0:?}")]
    Rational(String),
    #[error("missing section `{0}`")]
    Missing(&'static str),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RationalValue {
    Int(i64),
    Text(String),
}

impl RationalValue {
    pub fn to_q(&self) -> Result<Q, ConfigError> {
        match self {
            RationalValue::Int(n) => Ok(Q::from_integer((*n).into())),
            RationalValue::Text(s) => parse_rational(s).map_err(|_| ConfigError::Rational(s.clone())),
        }
    }

    /// The symbolic placeholder `"eps"`.
    pub fn is_symbol(&self) -> bool {
        matches!(self, RationalValue::Text(s) if s.trim() == "eps")
    }
}

/// `table[i][j][k] = c_ij^k`.
pub type StructureTable = Vec<Vec<Vec<Q>>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    pub preset: Option<String>,
    pub eps: Option<RationalValue>,
    pub mu: Option<RationalValue>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub form: Option<String>,
    /// `table[i][j][k] = c_ij^k`.
    pub table: Option<Vec<Vec<Vec<RationalValue>>>>,
    pub omega: Option<Vec<RationalValue>>,
    pub unity: Option<usize>,
}

impl AlgebraConfig {
    /// Whether `eps` is the symbolic placeholder (Z2 only).
    pub fn symbolic_eps(&self) -> bool {
        self.eps.as_ref().is_some_and(RationalValue::is_symbol)
    }

    fn z2_parts(&self) -> Result<(Q, usize), ConfigError> {
        let mu = self.mu.as_ref().map(RationalValue::to_q).transpose()?.unwrap_or_else(Q::zero);
        let k = self.k.unwrap_or(1);
        Ok((mu, k))
    }

    /// The explicit table and trace form, unchecked, when given.
    pub fn raw_table(&self) -> Result<Option<(StructureTable, Vec<Q>)>, ConfigError> {
        let Some(table) = &self.table else { return Ok(None) };
        let c = table
            .iter()
            .map(|row| row.iter().map(|col| col.iter().map(RationalValue::to_q).collect()).collect())
            .collect::<Result<StructureTable, _>>()?;
        let omega = self
            .omega
            .as_ref()
            .ok_or(ConfigError::Missing("algebra.omega"))?
            .iter()
            .map(RationalValue::to_q)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some((c, omega)))
    }

    /// The algebra with `eps` set to `eps_value` when it is symbolic.
    pub fn build_with(&self, eps_value: Option<&Q>) -> Result<FrobeniusAlgebra, ConfigError> {
        if let Some((c, omega)) = self.raw_table()? {
            return Ok(FrobeniusAlgebra::new(c, omega, self.unity.unwrap_or(0), "custom")?);
        }
        let preset = self.preset.as_deref().ok_or(ConfigError::Missing("algebra.preset or algebra.table"))?;
        match preset {
            "trivial" | "R" => Ok(FrobeniusAlgebra::trivial()),
            "Z2" => {
                let eps = match (&self.eps, eps_value) {
                    (Some(e), _) if !e.is_symbol() => e.to_q()?,
                    (Some(_), Some(v)) => v.clone(),
                    (Some(_), None) => {
                        return Err(ConfigError::Invalid("symbolic eps is only supported by the tensor command".into()))
                    }
                    (None, _) => Q::zero(),
                };
                let (mu, k) = self.z2_parts()?;
                Ok(FrobeniusAlgebra::z2(&eps, &mu, k)?)
            }
            "Zn" => {
                let n = self.n.ok_or(ConfigError::Missing("algebra.n"))?;
                match self.form.as_deref() {
                    Some("tr_n") => Ok(FrobeniusAlgebra::zn_trace(n)?),
                    Some(other) => Err(ConfigError::Invalid(format!("unknown trace form {other:?}"))),
                    None => Ok(FrobeniusAlgebra::zn(n, self.k.unwrap_or(0))?),
                }
            }
            other => Err(ConfigError::Invalid(format!("unknown algebra preset {other:?}"))),
        }
    }

    pub fn build(&self) -> Result<FrobeniusAlgebra, ConfigError> {
        self.build_with(None)
    }

    /// Family `eps ↦ Z2(eps, mu, k)` for symbolic lifts. The trace form must
    /// not depend on `eps`, which rules out `k = 1`.
    pub fn z2_family(&self) -> Result<impl Fn(&Q) -> Result<FrobeniusAlgebra, AlgebraError>, ConfigError> {
        if self.preset.as_deref() != Some("Z2") {
            return Err(ConfigError::Invalid("symbolic eps needs the Z2 preset".into()));
        }
        let (mu, k) = self.z2_parts()?;
        if k != 2 {
            return Err(ConfigError::Invalid("symbolic eps needs k = 2: the k = 1 trace form depends on eps".into()));
        }
        Ok(move |e: &Q| FrobeniusAlgebra::z2(e, &mu, k))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerConfig {
    pub q: Vec<RationalValue>,
    #[serde(default)]
    pub r: Option<Vec<RationalValue>>,
    pub d: RationalValue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub preset: Option<String>,
    pub dim: Option<usize>,
    #[serde(rename = "F")]
    pub prepotential: Option<String>,
    pub euler: Option<EulerConfig>,
}

impl ManifoldConfig {
    pub fn build(&self) -> Result<FrobeniusManifold, ConfigError> {
        if let Some(name) = &self.preset {
            return Ok(FrobeniusManifold::preset(name)?);
        }
        let dim = self.dim.ok_or(ConfigError::Missing("manifold.dim"))?;
        let f = parse(self.prepotential.as_deref().ok_or(ConfigError::Missing("manifold.F"))?)?;
        let euler = match &self.euler {
            None => EulerData::trivial(dim),
            Some(e) => EulerData {
                charges: e.q.iter().map(RationalValue::to_q).collect::<Result<_, _>>()?,
                shifts: match &e.r {
                    Some(r) => r.iter().map(RationalValue::to_q).collect::<Result<_, _>>()?,
                    None => vec![Q::zero(); dim],
                },
                dimension: e.d.to_q()?,
            },
        };
        Ok(FrobeniusManifold::new(f, dim, euler, "custom")?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Mch,
    Mkdv,
    Kdv,
    Monge,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub system: System,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "M")]
    pub points: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub output_every: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    /// `"printed"` or `"flipped"`, for the modified Camassa–Holm system.
    #[serde(default)]
    pub sign: Option<String>,
    /// Highest density level monitored for the Mongé system.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Basis index (1-based) of the KdV Hamiltonian lift.
    #[serde(default = "one")]
    pub r: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn one() -> usize {
    1
}

fn default_amplitude() -> f64 {
    0.1
}

fn default_levels() -> usize {
    4
}

fn default_tolerance() -> f64 {
    1e-6
}

impl SimulationConfig {
    pub fn mch_sign(&self) -> Result<MchSign, ConfigError> {
        match self.sign.as_deref() {
            None | Some("printed") => Ok(MchSign::Printed),
            Some("flipped") => Ok(MchSign::Flipped),
            Some(other) => Err(ConfigError::Invalid(format!("unknown sign {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiuraConfig {
    #[serde(rename = "L", default = "two_pi")]
    pub length: f64,
    #[serde(rename = "M", default = "default_points")]
    pub points: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_miura_amplitude")]
    pub amplitude: f64,
}

impl Default for MiuraConfig {
    fn default() -> Self {
        Self { length: two_pi(), points: default_points(), pairs: default_pairs(), amplitude: default_miura_amplitude() }
    }
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

fn default_points() -> usize {
    256
}

fn default_pairs() -> usize {
    10
}

fn default_miura_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitiesConfig {
    pub n_max: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algebra: Option<AlgebraConfig>,
    pub manifold: Option<ManifoldConfig>,
    pub simulation: Option<SimulationConfig>,
    pub densities: Option<DensitiesConfig>,
    pub miura: Option<MiuraConfig>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn algebra(&self) -> Result<&AlgebraConfig, ConfigError> {
        self.algebra.as_ref().ok_or(ConfigError::Missing("algebra"))
    }

    pub fn manifold(&self) -> Result<&ManifoldConfig, ConfigError> {
        self.manifold.as_ref().ok_or(ConfigError::Missing("manifold"))
    }

    pub fn simulation(&self) -> Result<&SimulationConfig, ConfigError> {
        self.simulation.as_ref().ok_or(ConfigError::Missing("simulation"))
    }
}
