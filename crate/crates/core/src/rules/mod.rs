//! Expert rules: metric-conditioned parameter adjustments.
//!
//! A rule names one parameter, a condition over runtime metrics and current
//! parameter values, a direction, a step and safety bounds. For each
//! parameter the first rule (document order) whose condition holds fires;
//! conditions and formulas read the configuration as it was before the pass.

pub mod expr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{eval_condition, eval_formula, parse_condition, parse_formula, Condition, ExprError, Formula};

use crate::metrics::RuntimeMetrics;
use crate::space::{Configuration, Domain, ParamValue, SearchSpace, SpaceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("malformed rule document: {0}")]
    Document(String),
    #[error("rule #{index} ({parameter}): {message}")]
    Rule { index: usize, parameter: String, message: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "up")]
    Increase,
    #[serde(rename = "down")]
    Decrease,
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Multiply(f64),
    /// Assign the rule's bound (lower = upper).
    SetToBound,
    Formula(Formula),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Bytes,
    Mib,
    Gib,
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertRule {
    pub parameter: String,
    pub direction: Direction,
    pub condition: Condition,
    pub step: Step,
    pub lower: f64,
    pub upper: f64,
    pub unit: Option<Unit>,
    /// Source text of the condition, kept for display.
    pub condition_text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<ExpertRule>,
}

// ---- document format ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDoc {
    Multiply(f64),
    Set,
    Formula(String),
}

/// A bound is a plain number or a string with an optional binary suffix
/// (`K` = 2¹⁰, `M` = 2²⁰, `G` = 2³⁰).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundDoc {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsDoc {
    pub lower: BoundDoc,
    pub upper: BoundDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Unit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDoc {
    pub parameter: String,
    pub direction: Direction,
    pub condition: String,
    pub step: StepDoc,
    pub bounds: BoundsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RuleDocument {
    Wrapped {
        #[serde(default)]
        version: Option<u32>,
        rules: Vec<RuleDoc>,
    },
    List(Vec<RuleDoc>),
}

pub fn parse_bound(b: &BoundDoc) -> Result<f64, String> {
    match b {
        BoundDoc::Number(n) => Ok(*n),
        BoundDoc::Text(s) => {
            let s = s.trim();
            let (digits, mult) = match s.chars().last() {
                Some('K' | 'k') => (&s[..s.len() - 1], 1024.0),
                Some('M' | 'm') => (&s[..s.len() - 1], 1024.0 * 1024.0),
                Some('G' | 'g') => (&s[..s.len() - 1], 1024.0 * 1024.0 * 1024.0),
                _ => (s, 1.0),
            };
            digits
                .trim()
                .parse::<f64>()
                .map(|v| v * mult)
                .map_err(|_| format!("bad bound `{s}`"))
        }
    }
}

const DEFAULT_RULES: &str = include_str!("../../assets/default_rules.json");

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The bundled 47-rule document for the default space.
    pub fn default_document() -> &'static str {
        DEFAULT_RULES
    }

    pub fn spark_default(space: &SearchSpace) -> Result<Self, RuleError> {
        parse_ruleset(DEFAULT_RULES, space)
    }

    pub fn rules_for<'a>(&'a self, parameter: &'a str) -> impl Iterator<Item = (usize, &'a ExpertRule)> + 'a {
        self.rules.iter().enumerate().filter(move |(_, r)| r.parameter == parameter)
    }
}

fn compile_rule(index: usize, doc: &RuleDoc, space: &SearchSpace) -> Result<ExpertRule, RuleError> {
    let fail = |message: String| RuleError::Rule { index, parameter: doc.parameter.clone(), message };
    let param = space
        .param(&doc.parameter)
        .ok_or_else(|| fail("parameter is not in the search space".into()))?;
    let lower = parse_bound(&doc.bounds.lower).map_err(fail)?;
    let upper = parse_bound(&doc.bounds.upper).map_err(fail)?;
    if !(lower.is_finite() && upper.is_finite()) {
        return Err(fail("bounds must be finite".into()));
    }
    if lower > upper {
        return Err(fail(format!("lower bound {lower} exceeds upper bound {upper}")));
    }
    let condition = parse_condition(&doc.condition, space).map_err(|e| fail(e.to_string()))?;
    let step = match &doc.step {
        StepDoc::Multiply(f) => {
            if !param.is_numerical() {
                return Err(fail("multiply step on a categorical parameter".into()));
            }
            match doc.direction {
                Direction::Increase if *f <= 1.0 => return Err(fail(format!("increase factor {f} must exceed 1"))),
                Direction::Decrease if !(*f > 0.0 && *f < 1.0) => {
                    return Err(fail(format!("decrease factor {f} must lie in (0, 1)")))
                }
                Direction::None => return Err(fail("multiply step needs a direction".into())),
                _ => Step::Multiply(*f),
            }
        }
        StepDoc::Set => {
            if lower != upper {
                return Err(fail("set step needs lower = upper".into()));
            }
            if let Domain::Categorical { choices } = &param.domain {
                if !choices.iter().any(|c| c.as_f64() == Some(lower)) {
                    return Err(fail(format!("{lower} is not a choice of the parameter")));
                }
            }
            Step::SetToBound
        }
        StepDoc::Formula(src) => {
            if !param.is_numerical() {
                return Err(fail("formula step on a categorical parameter".into()));
            }
            Step::Formula(parse_formula(src, space).map_err(|e| fail(e.to_string()))?)
        }
    };
    Ok(ExpertRule {
        parameter: doc.parameter.clone(),
        direction: doc.direction,
        condition,
        step,
        lower,
        upper,
        unit: doc.bounds.unit,
        condition_text: doc.condition.clone(),
    })
}

/// Parses a rule document against the space its rules must target. Accepts
/// `{"version": 1, "rules": [...]}`, a bare list, or an empty document.
pub fn parse_ruleset(document: &str, space: &SearchSpace) -> Result<RuleSet, RuleError> {
    if document.trim().is_empty() {
        return Ok(RuleSet::default());
    }
    let doc: RuleDocument = serde_json::from_str(document).map_err(|e| RuleError::Document(e.to_string()))?;
    let docs = match doc {
        RuleDocument::Wrapped { rules, .. } | RuleDocument::List(rules) => rules,
    };
    let rules = docs
        .iter()
        .enumerate()
        .map(|(i, d)| compile_rule(i, d, space))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RuleSet { rules })
}

/// Compiles every rule of a document, collecting all problems instead of
/// stopping at the first.
pub fn lint_ruleset(document: &str, space: &SearchSpace) -> Result<RuleSet, Vec<RuleError>> {
    if document.trim().is_empty() {
        return Ok(RuleSet::default());
    }
    let doc: serde_json::Value = serde_json::from_str(document).map_err(|e| vec![RuleError::Document(e.to_string())])?;
    let items = match doc {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(mut map) => match map.remove("rules") {
            Some(serde_json::Value::Array(items)) => items,
            _ => return Err(vec![RuleError::Document("expected a `rules` list".into())]),
        },
        _ => return Err(vec![RuleError::Document("expected a rule list".into())]),
    };
    let (ok, bad): (Vec<_>, Vec<_>) = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let parameter = v.get("parameter").and_then(|p| p.as_str()).unwrap_or("?").to_string();
            serde_json::from_value::<RuleDoc>(v)
                .map_err(|e| RuleError::Rule { index: i, parameter, message: e.to_string() })
                .and_then(|d| compile_rule(i, &d, space))
        })
        .partition(Result::is_ok);
    if bad.is_empty() {
        Ok(RuleSet { rules: ok.into_iter().map(Result::unwrap).collect() })
    } else {
        Err(bad.into_iter().map(|r| r.unwrap_err()).collect())
    }
}

/// One parameter change made by [`apply_rules_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct Firing {
    pub rule: usize,
    pub parameter: String,
    pub before: ParamValue,
    pub after: ParamValue,
}

/// Value a rule assigns, before clamping to the space. Multiply and formula
/// results are clamped into the rule bounds but never against the rule's
/// direction: an increase rule cannot lower a value that already sits above
/// its upper bound, and symmetrically for decreases.
fn rule_output(rule: &ExpertRule, current: f64, snapshot: &Configuration) -> Result<f64, ExprError> {
    let raw = match &rule.step {
        Step::SetToBound => return Ok(rule.lower),
        Step::Multiply(f) => current * f,
        Step::Formula(f) => eval_formula(f, snapshot)?,
    };
    let clamped = raw.clamp(rule.lower, rule.upper);
    Ok(match rule.direction {
        Direction::Increase => clamped.max(current),
        Direction::Decrease => clamped.min(current),
        Direction::None => clamped,
    })
}

fn first_match(
    rules: &RuleSet,
    parameter: &str,
    snapshot: &Configuration,
    metrics: &RuntimeMetrics,
) -> Result<Option<usize>, RuleError> {
    for (i, rule) in rules.rules_for(parameter) {
        let holds = eval_condition(&rule.condition, metrics, snapshot).map_err(|e| RuleError::Rule {
            index: i,
            parameter: rule.parameter.clone(),
            message: e.to_string(),
        })?;
        if holds {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Applies the first matching rule per parameter and reports each firing.
pub fn apply_rules_traced(
    rules: &RuleSet,
    config: &Configuration,
    metrics: &RuntimeMetrics,
    space: &SearchSpace,
) -> Result<(Configuration, Vec<Firing>), RuleError> {
    space.ensure_valid(config)?;
    let mut out = config.clone();
    let mut fired = Vec::new();
    for param in space.params() {
        let Some(i) = first_match(rules, &param.name, config, metrics)? else {
            continue;
        };
        let rule = &rules.rules[i];
        let before = config.get(&param.name).expect("validated").clone();
        let current = before.as_f64().unwrap_or(f64::NAN);
        let v = rule_output(rule, current, config).map_err(|e| RuleError::Rule {
            index: i,
            parameter: rule.parameter.clone(),
            message: e.to_string(),
        })?;
        let after = match &param.domain {
            Domain::Numerical { lower, upper, .. } => ParamValue::Number(if v.is_finite() {
                v.clamp(*lower, *upper)
            } else {
                current
            }),
            // compile_rule guarantees set values on categoricals are choices
            Domain::Categorical { choices } => choices
                .iter()
                .find(|c| c.as_f64() == Some(v))
                .cloned()
                .unwrap_or_else(|| before.clone()),
        };
        out.set(&param.name, after.clone());
        fired.push(Firing { rule: i, parameter: param.name.clone(), before, after });
    }
    Ok((out, fired))
}

pub fn apply_rules(
    rules: &RuleSet,
    config: &Configuration,
    metrics: &RuntimeMetrics,
    space: &SearchSpace,
) -> Result<Configuration, RuleError> {
    Ok(apply_rules_traced(rules, config, metrics, space)?.0)
}

/// Rule update of `prev` followed by a neighborhood sample of the given
/// radius around the result.
pub fn expert_init_suggest<R: Rng + ?Sized>(
    prev: &Configuration,
    metrics: &RuntimeMetrics,
    rules: &RuleSet,
    space: &SearchSpace,
    radius: f64,
    rng: &mut R,
) -> Result<Configuration, RuleError> {
    let updated = apply_rules(rules, prev, metrics, space)?;
    Ok(space.sample_neighborhood(&updated, radius, rng)?)
}
