//! Instance, solution, and report file formats.
//!
//! Instances are TOML with all money and type values as decimal strings
//! of at most six fractional digits; a seventh digit is a parse error,
//! never a rounding. Serialization is deterministic, so
//! parse -> serialize -> parse is the identity.
//!
//! The CSV report is RFC-4180-style with LF line endings, `.` decimal
//! separators, and exactly six fractional digits for money.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duality::DualSolution;
use crate::model::{Assignment, Instance, ModelError, PaymentBounds, Provider, Traveler};
use crate::money::{Money, UnitFrac};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Value {
        path: String,
        #[source]
        source: crate::money::MoneyError,
    },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("serialization failed: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    payment_bounds: BoundsFile,
    #[serde(rename = "traveler")]
    travelers: Vec<TravelerFile>,
    #[serde(rename = "provider")]
    providers: Vec<ProviderFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    payoff_override: Option<OverrideFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsFile {
    lower: String,
    upper: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TravelerFile {
    predispositions: Vec<String>,
    willingness: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProviderFile {
    op_type: String,
    cost_scale: String,
    capacity: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct OverrideFile {
    rows: Vec<Vec<String>>,
}

fn parse_money(path: String, literal: &str) -> Result<Money, FormatError> {
    literal.parse().map_err(|source| FormatError::Value { path, source })
}

fn parse_frac(path: String, literal: &str) -> Result<UnitFrac, FormatError> {
    literal.parse().map_err(|source| FormatError::Value { path, source })
}

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let file: InstanceFile = toml::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(FormatError::SchemaVersion(file.schema_version));
    }
    let bounds = PaymentBounds {
        lower: parse_money("payment_bounds.lower".into(), &file.payment_bounds.lower)?,
        upper: parse_money("payment_bounds.upper".into(), &file.payment_bounds.upper)?,
    };
    let travelers = file
        .travelers
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let predispositions = t
                .predispositions
                .iter()
                .enumerate()
                .map(|(j, p)| parse_frac(format!("traveler[{i}].predispositions[{j}]"), p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Traveler {
                predispositions,
                willingness: parse_money(format!("traveler[{i}].willingness"), &t.willingness)?,
                label: t.label.clone(),
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let providers = file
        .providers
        .iter()
        .enumerate()
        .map(|(j, p)| {
            Ok(Provider {
                op_type: parse_frac(format!("provider[{j}].op_type"), &p.op_type)?,
                cost_scale: parse_money(format!("provider[{j}].cost_scale"), &p.cost_scale)?,
                capacity: p.capacity,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let payoff_override = file
        .payoff_override
        .map(|o| {
            o.rows
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, cell)| parse_money(format!("payoff_override.rows[{i}][{j}]"), cell))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    Ok(Instance::new(travelers, providers, bounds, payoff_override)?)
}

pub fn serialize_instance(instance: &Instance) -> Result<String, FormatError> {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        payment_bounds: BoundsFile {
            lower: instance.payment_bounds().lower.to_string(),
            upper: instance.payment_bounds().upper.to_string(),
        },
        travelers: instance
            .travelers()
            .iter()
            .map(|t| TravelerFile {
                predispositions: t.predispositions.iter().map(|p| p.to_string()).collect(),
                willingness: t.willingness.to_string(),
                label: t.label.clone(),
            })
            .collect(),
        providers: instance
            .providers()
            .iter()
            .map(|p| ProviderFile {
                op_type: p.op_type.to_string(),
                cost_scale: p.cost_scale.to_string(),
                capacity: p.capacity,
            })
            .collect(),
        payoff_override: instance.payoff_override().map(|rows| OverrideFile {
            rows: rows
                .iter()
                .map(|row| row.iter().map(|m| m.to_string()).collect())
                .collect(),
        }),
    };
    Ok(toml::to_string(&file)?)
}

/// A solved (or candidate) assignment with its dual prices, for auditing.
#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    schema_version: u32,
    /// Provider index per traveler; -1 means unmatched.
    matches: Vec<i64>,
    phi: Vec<String>,
    psi: Vec<String>,
}

pub struct SolutionCandidate {
    pub matches: Vec<Option<usize>>,
    pub dual: DualSolution,
}

pub fn serialize_solution(assignment: &Assignment, dual: &DualSolution) -> Result<String, FormatError> {
    let file = SolutionFile {
        schema_version: SCHEMA_VERSION,
        matches: assignment
            .matches()
            .iter()
            .map(|m| m.map_or(-1, |j| j as i64))
            .collect(),
        phi: dual.phi.iter().map(|m| m.to_string()).collect(),
        psi: dual.psi.iter().map(|m| m.to_string()).collect(),
    };
    Ok(toml::to_string(&file)?)
}

pub fn parse_solution(text: &str) -> Result<SolutionCandidate, FormatError> {
    let file: SolutionFile = toml::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(FormatError::SchemaVersion(file.schema_version));
    }
    let matches = file
        .matches
        .iter()
        .map(|&m| if m < 0 { None } else { Some(m as usize) })
        .collect();
    let phi = file
        .phi
        .iter()
        .enumerate()
        .map(|(i, s)| parse_money(format!("phi[{i}]"), s))
        .collect::<Result<Vec<_>, _>>()?;
    let psi = file
        .psi
        .iter()
        .enumerate()
        .map(|(j, s)| parse_money(format!("psi[{j}]"), s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SolutionCandidate {
        matches,
        dual: DualSolution { phi, psi, gap: Money::ZERO },
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One data row per matched traveler, then a per-provider utilization
/// summary.
pub fn emit_assignment_csv(
    instance: &Instance,
    assignment: &Assignment,
    dual: &DualSolution,
    payments: &crate::duality::PaymentMatrix,
) -> Result<String, ModelError> {
    let matrix = instance.utility_matrix()?;
    let mut out = String::from("traveler,label,provider,payoff,phi,payment\n");
    for (i, m) in assignment.matches().iter().enumerate() {
        let Some(j) = *m else { continue };
        let label = instance.travelers()[i].label.as_deref().unwrap_or("");
        let payment = payments.get(i, j).unwrap_or(Money::ZERO);
        out.push_str(&format!(
            "{i},{},{j},{},{},{}\n",
            csv_field(label),
            matrix.get(i, j),
            dual.phi[i],
            payment
        ));
    }
    out.push('\n');
    out.push_str("provider,assigned,capacity,psi\n");
    let load = assignment.provider_load(instance.num_providers());
    for (j, p) in instance.providers().iter().enumerate() {
        out.push_str(&format!("{j},{},{},{}\n", load[j], p.capacity, dual.psi[j]));
    }
    Ok(out)
}
