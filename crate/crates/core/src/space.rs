//! Parameter spaces, configurations and the sampling primitives used by the
//! optimizer, the rule engine and the simulator.
//!
//! A [`SearchSpace`] is an ordered list of parameters. The order fixes the
//! layout of the [`FeatureVector`] produced by [`SearchSpace::encode`]:
//! numerical parameters contribute one component in `[0, 1]` (affine or
//! logarithmic), categorical parameters contribute a one-hot block.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_SPACE_DOC: &str = include_str!("../assets/default_space.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("invalid parameter definition `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfiguration(Vec<Violation>),
    #[error("feature vector has length {actual}, expected {expected}")]
    FeatureLength { expected: usize, actual: usize },
    #[error("neighborhood radius {0} outside [0, 1)")]
    Radius(f64),
    #[error("malformed space document: {0}")]
    Document(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// A parameter value: numbers for numerical parameters, and either numbers
/// or strings for categorical choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Text(s) => s.parse().ok(),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(s) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Numerical { lower: f64, upper: f64, scale: Scale },
    Categorical { choices: Vec<ParamValue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParameterDoc", into = "ParameterDoc")]
pub struct ParameterDef {
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Numerical,
    Categorical,
}

/// Wire form of a parameter: `{name, kind, lower, upper, choices, scale}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParameterDoc {
    name: String,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choices: Option<Vec<ParamValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<Scale>,
}

impl TryFrom<ParameterDoc> for ParameterDef {
    type Error = SpaceError;

    fn try_from(doc: ParameterDoc) -> Result<Self, SpaceError> {
        let invalid = |reason: &str| SpaceError::InvalidParameter {
            name: doc.name.clone(),
            reason: reason.to_string(),
        };
        match doc.kind {
            Kind::Numerical => {
                let (lower, upper) = match (doc.lower, doc.upper) {
                    (Some(l), Some(u)) => (l, u),
                    _ => return Err(invalid("numerical parameter needs lower and upper")),
                };
                ParameterDef::numerical(&doc.name, lower, upper, doc.scale.unwrap_or(Scale::Linear))
            }
            Kind::Categorical => {
                let choices = doc.choices.ok_or_else(|| invalid("categorical parameter needs choices"))?;
                ParameterDef::categorical(&doc.name, choices)
            }
        }
    }
}

impl From<ParameterDef> for ParameterDoc {
    fn from(p: ParameterDef) -> Self {
        match p.domain {
            Domain::Numerical { lower, upper, scale } => ParameterDoc {
                name: p.name,
                kind: Kind::Numerical,
                lower: Some(lower),
                upper: Some(upper),
                choices: None,
                scale: Some(scale),
            },
            Domain::Categorical { choices } => ParameterDoc {
                name: p.name,
                kind: Kind::Categorical,
                lower: None,
                upper: None,
                choices: Some(choices),
                scale: None,
            },
        }
    }
}

impl ParameterDef {
    pub fn numerical(name: &str, lower: f64, upper: f64, scale: Scale) -> Result<Self, SpaceError> {
        let invalid = |reason: &str| SpaceError::InvalidParameter {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(invalid("bounds must be finite"));
        }
        if lower >= upper {
            return Err(invalid(&format!("lower {lower} must be below upper {upper}")));
        }
        if scale == Scale::Log && lower <= 0.0 {
            return Err(invalid("log scale requires a positive lower bound"));
        }
        Ok(ParameterDef {
            name: name.to_string(),
            domain: Domain::Numerical { lower, upper, scale },
        })
    }

    pub fn categorical(name: &str, choices: Vec<ParamValue>) -> Result<Self, SpaceError> {
        let invalid = |reason: &str| SpaceError::InvalidParameter {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if choices.len() < 2 {
            return Err(invalid("categorical parameter needs at least two choices"));
        }
        for (i, a) in choices.iter().enumerate() {
            if choices[..i].contains(a) {
                return Err(invalid(&format!("duplicate choice {a}")));
            }
        }
        Ok(ParameterDef {
            name: name.to_string(),
            domain: Domain::Categorical { choices },
        })
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.domain, Domain::Numerical { .. })
    }

    /// Number of feature-vector components this parameter occupies.
    pub fn width(&self) -> usize {
        match &self.domain {
            Domain::Numerical { .. } => 1,
            Domain::Categorical { choices } => choices.len(),
        }
    }

    /// Maps a numerical value to `[0, 1]` according to the scale. Values
    /// outside the bounds map outside the unit interval.
    pub fn normalize(&self, value: f64) -> f64 {
        match &self.domain {
            Domain::Numerical { lower, upper, scale: Scale::Linear } => (value - lower) / (upper - lower),
            Domain::Numerical { lower, upper, scale: Scale::Log } => {
                (value.ln() - lower.ln()) / (upper.ln() - lower.ln())
            }
            Domain::Categorical { .. } => f64::NAN,
        }
    }

    pub fn denormalize(&self, unit: f64) -> f64 {
        match &self.domain {
            Domain::Numerical { lower, upper, scale: Scale::Linear } => {
                (lower + unit * (upper - lower)).clamp(*lower, *upper)
            }
            Domain::Numerical { lower, upper, scale: Scale::Log } => {
                (lower.ln() + unit * (upper.ln() - lower.ln())).exp().clamp(*lower, *upper)
            }
            Domain::Categorical { .. } => f64::NAN,
        }
    }

    /// Position of a value on `[0, 1]`: the normalized value for numerical
    /// parameters, `index / (k - 1)` for categorical ones.
    pub fn unit_position(&self, value: &ParamValue) -> Option<f64> {
        match &self.domain {
            Domain::Numerical { .. } => value.as_f64().map(|v| self.normalize(v)),
            Domain::Categorical { choices } => choices
                .iter()
                .position(|c| c == value)
                .map(|i| i as f64 / (choices.len() - 1) as f64),
        }
    }

    /// Inverse of [`ParameterDef::unit_position`]; categorical positions snap
    /// to the nearest choice.
    pub fn from_unit_position(&self, unit: f64) -> ParamValue {
        match &self.domain {
            Domain::Numerical { .. } => ParamValue::Number(self.denormalize(unit.clamp(0.0, 1.0))),
            Domain::Categorical { choices } => {
                let k = choices.len() - 1;
                let idx = (unit.clamp(0.0, 1.0) * k as f64).round() as usize;
                choices[idx.min(k)].clone()
            }
        }
    }

    pub fn check(&self, value: &ParamValue) -> Option<Violation> {
        match &self.domain {
            Domain::Numerical { lower, upper, .. } => match value {
                ParamValue::Number(v) if v.is_finite() && *v >= *lower && *v <= *upper => None,
                ParamValue::Number(v) => Some(Violation::OutOfBounds {
                    name: self.name.clone(),
                    value: *v,
                    lower: *lower,
                    upper: *upper,
                }),
                ParamValue::Text(_) => Some(Violation::WrongType { name: self.name.clone() }),
            },
            Domain::Categorical { choices } => {
                if choices.contains(value) {
                    None
                } else {
                    Some(Violation::NotAChoice {
                        name: self.name.clone(),
                        value: value.clone(),
                    })
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.domain {
            Domain::Numerical { .. } => ParamValue::Number(self.denormalize(rng.gen::<f64>())),
            Domain::Categorical { choices } => choices[rng.gen_range(0..choices.len())].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Missing { name: String },
    Unknown { name: String },
    OutOfBounds { name: String, value: f64, lower: f64, upper: f64 },
    NotAChoice { name: String, value: ParamValue },
    WrongType { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { name } => write!(f, "missing parameter `{name}`"),
            Violation::Unknown { name } => write!(f, "unknown parameter `{name}`"),
            Violation::OutOfBounds { name, value, lower, upper } => {
                write!(f, "`{name}` = {value} outside [{lower}, {upper}]")
            }
            Violation::NotAChoice { name, value } => write!(f, "`{name}` = {value} is not a valid choice"),
            Violation::WrongType { name } => write!(f, "`{name}` has the wrong value type"),
        }
    }
}

/// One point of a search space, keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: impl Into<ParamValue>) {
        self.values.insert(name.to_string(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(ParamValue::as_f64)
    }
}

/// Kernel input for one configuration. Every component lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterDef>", into = "Vec<ParameterDef>")]
pub struct SearchSpace {
    params: Vec<ParameterDef>,
}

impl TryFrom<Vec<ParameterDef>> for SearchSpace {
    type Error = SpaceError;

    fn try_from(params: Vec<ParameterDef>) -> Result<Self, SpaceError> {
        SearchSpace::new(params)
    }
}

impl From<SearchSpace> for Vec<ParameterDef> {
    fn from(space: SearchSpace) -> Self {
        space.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParameterDef>) -> Result<Self, SpaceError> {
        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(SearchSpace { params })
    }

    /// Parses a JSON list of `{name, kind, lower, upper, choices, scale}`.
    pub fn from_json(doc: &str) -> Result<Self, SpaceError> {
        serde_json::from_str(doc).map_err(|e| SpaceError::Document(e.to_string()))
    }

    /// Like [`SearchSpace::from_json`], but checks every parameter and
    /// reports all problems instead of the first.
    pub fn lint_json(doc: &str) -> Result<Self, Vec<SpaceError>> {
        let raw: Vec<serde_json::Value> =
            serde_json::from_str(doc).map_err(|e| vec![SpaceError::Document(e.to_string())])?;
        let mut errors = Vec::new();
        let mut params = Vec::new();
        let mut seen = HashSet::new();
        for (i, v) in raw.into_iter().enumerate() {
            let parsed = serde_json::from_value::<ParameterDoc>(v)
                .map_err(|e| SpaceError::Document(format!("parameter #{i}: {e}")))
                .and_then(ParameterDef::try_from);
            match parsed {
                Ok(p) if !seen.insert(p.name.clone()) => errors.push(SpaceError::DuplicateName(p.name)),
                Ok(p) => params.push(p),
                Err(e) => errors.push(e),
            }
        }
        if errors.is_empty() {
            Ok(SearchSpace { params })
        } else {
            Err(errors)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    /// The bundled 10-parameter Spark SQL space.
    pub fn spark_default() -> Self {
        Self::from_json(DEFAULT_SPACE_DOC).expect("bundled space document is valid")
    }

    pub fn default_document() -> &'static str {
        DEFAULT_SPACE_DOC
    }

    pub fn params(&self) -> &[ParameterDef] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, name: &str) -> Option<&ParameterDef> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn feature_len(&self) -> usize {
        self.params.iter().map(ParameterDef::width).sum()
    }

    pub fn validate(&self, config: &Configuration) -> Vec<Violation> {
        let mut out = Vec::new();
        for p in &self.params {
            match config.get(&p.name) {
                None => out.push(Violation::Missing { name: p.name.clone() }),
                Some(v) => out.extend(p.check(v)),
            }
        }
        for name in config.values.keys() {
            if self.param(name).is_none() {
                out.push(Violation::Unknown { name: name.clone() });
            }
        }
        out
    }

    pub fn ensure_valid(&self, config: &Configuration) -> Result<(), SpaceError> {
        let violations = self.validate(config);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SpaceError::InvalidConfiguration(violations))
        }
    }

    pub fn encode(&self, config: &Configuration) -> Result<FeatureVector, SpaceError> {
        self.ensure_valid(config)?;
        let mut out = Vec::with_capacity(self.feature_len());
        for p in &self.params {
            let value = &config.values[&p.name];
            match &p.domain {
                Domain::Numerical { .. } => {
                    let v = value.as_f64().expect("validated numerical value");
                    out.push(p.normalize(v).clamp(0.0, 1.0));
                }
                Domain::Categorical { choices } => {
                    out.extend(choices.iter().map(|c| if c == value { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(FeatureVector(out))
    }

    /// Inverse of [`SearchSpace::encode`]. One-hot blocks decode by argmax so
    /// that relaxed (non-binary) blocks still map to a valid choice.
    pub fn decode(&self, features: &FeatureVector) -> Result<Configuration, SpaceError> {
        if features.len() != self.feature_len() {
            return Err(SpaceError::FeatureLength {
                expected: self.feature_len(),
                actual: features.len(),
            });
        }
        let mut config = Configuration::new();
        let mut offset = 0;
        for p in &self.params {
            match &p.domain {
                Domain::Numerical { .. } => {
                    config.set(&p.name, p.denormalize(features.0[offset].clamp(0.0, 1.0)));
                }
                Domain::Categorical { choices } => {
                    let block = &features.0[offset..offset + choices.len()];
                    let mut best = 0;
                    for (i, v) in block.iter().enumerate() {
                        if *v > block[best] {
                            best = i;
                        }
                    }
                    config.set(&p.name, choices[best].clone());
                }
            }
            offset += p.width();
        }
        Ok(config)
    }

    /// Uniform sample: numerical parameters are uniform in their normalized
    /// (possibly logarithmic) coordinate, categorical ones uniform over choices.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut config = Configuration::new();
        for p in &self.params {
            config.set(&p.name, p.sample(rng));
        }
        config
    }

    /// Samples each numerical value uniformly in `[c(1 - r), c(1 + r)]`,
    /// clamped to the parameter bounds. Categorical values are kept.
    pub fn sample_neighborhood<R: Rng + ?Sized>(
        &self,
        center: &Configuration,
        radius: f64,
        rng: &mut R,
    ) -> Result<Configuration, SpaceError> {
        if !(0.0..1.0).contains(&radius) {
            return Err(SpaceError::Radius(radius));
        }
        self.ensure_valid(center)?;
        let mut out = center.clone();
        for p in &self.params {
            if let Domain::Numerical { lower, upper, .. } = p.domain {
                let c = center.get_f64(&p.name).expect("validated");
                let (lo, hi) = (c * (1.0 - radius), c * (1.0 + radius));
                let v = if hi > lo { rng.gen_range(lo..=hi) } else { c };
                out.set(&p.name, v.clamp(lower, upper));
            }
        }
        Ok(out)
    }

    /// Resamples exactly one uniformly chosen dimension.
    pub fn mutate<R: Rng + ?Sized>(&self, base: &Configuration, rng: &mut R) -> Configuration {
        let mut out = base.clone();
        if self.params.is_empty() {
            return out;
        }
        let p = &self.params[rng.gen_range(0..self.params.len())];
        out.set(&p.name, p.sample(rng));
        out
    }

    /// Configuration at the given unit positions (one per parameter).
    pub fn from_unit_positions(&self, positions: &[f64]) -> Configuration {
        let mut config = Configuration::new();
        for (p, u) in self.params.iter().zip(positions) {
            config.set(&p.name, p.from_unit_position(*u));
        }
        config
    }

    pub fn unit_positions(&self, config: &Configuration) -> Result<Vec<f64>, SpaceError> {
        self.ensure_valid(config)?;
        Ok(self
            .params
            .iter()
            .map(|p| p.unit_position(&config.values[&p.name]).expect("validated"))
            .collect())
    }
}
