//! Pricing mechanism for privately known types.
//!
//! Agents report their types, the market is solved on the reports, and
//! each agent's transfer is its Clarke pivot: the externality it imposes
//! on everyone else, measured in gross terms (valuations and operating
//! costs). Travelers are charged, providers are compensated, and both
//! transfers are provably non-negative. Harnesses sweep misreports over a
//! type grid and random instances to verify that truth-telling dominates
//! and participation never hurts.

use thiserror::Error;

use crate::generate::{generate_instance, GenError, GeneratorConfig};
use crate::model::{Assignment, Instance, ModelError, UtilityMatrix};
use crate::money::{Money, UnitFrac, FRAC_DENOM};
use crate::solver::{solve_optimal_assignment, SolveError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MechanismError {
    #[error("expected one report per agent: {0}")]
    ReportMismatch(String),
    #[error("mechanism requires derived payoffs; this instance carries a payoff override")]
    OverridePresent,
    #[error("grid resolution {0} must be at least 2 and divide the type grid")]
    BadGrid(u32),
    #[error("computed a negative transfer for {agent}; pivot accounting is broken")]
    NegativeTransfer { agent: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Money(#[from] crate::money::MoneyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Generate(#[from] GenError),
}

/// A single agent's reported type vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Report {
    Traveler { id: usize, predispositions: Vec<UnitFrac> },
    Provider { id: usize, op_type: UnitFrac },
}

/// Truthful reports for every agent of an instance.
pub fn truthful_reports(instance: &Instance) -> Vec<Report> {
    let mut reports = Vec::with_capacity(instance.num_travelers() + instance.num_providers());
    for (i, t) in instance.travelers().iter().enumerate() {
        reports.push(Report::Traveler { id: i, predispositions: t.predispositions.clone() });
    }
    for (j, p) in instance.providers().iter().enumerate() {
        reports.push(Report::Provider { id: j, op_type: p.op_type });
    }
    reports
}

/// Everything the mechanism decides: the assignment on reported types,
/// per-agent transfers, per-agent net utilities at true types, and the
/// budget surplus (charges minus compensations, any sign).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismOutcome {
    pub assignment: Assignment,
    pub traveler_charges: Vec<Money>,
    pub provider_compensations: Vec<Money>,
    pub traveler_utilities: Vec<Money>,
    pub provider_utilities: Vec<Money>,
    pub budget: Money,
}

/// Optimum of the market restricted to the non-excluded agents. Excluded
/// travelers and providers simply contribute no positive arcs.
pub fn gross_welfare(
    matrix: &UtilityMatrix,
    capacities: &[u32],
    excluded_travelers: &[usize],
    excluded_providers: &[usize],
) -> Result<Money, SolveError> {
    let rows: Vec<Vec<Money>> = (0..matrix.rows())
        .map(|i| {
            (0..matrix.cols())
                .map(|j| {
                    if excluded_travelers.contains(&i) || excluded_providers.contains(&j) {
                        Money::ZERO
                    } else {
                        matrix.get(i, j)
                    }
                })
                .collect()
        })
        .collect();
    let masked = UtilityMatrix::from_rows(rows).expect("mask preserves shape");
    let restricted = solve_optimal_assignment(&masked, capacities)?;
    Ok(restricted.objective())
}

fn require_derived(instance: &Instance) -> Result<(), MechanismError> {
    if instance.payoff_override().is_some() {
        return Err(MechanismError::OverridePresent);
    }
    Ok(())
}

/// Charge for one traveler: welfare the others could reach without the
/// traveler, minus what the others actually get at the chosen optimum
/// (total welfare minus the traveler's own gross valuation).
pub fn clarke_charge_traveler(instance: &Instance, traveler: usize) -> Result<Money, MechanismError> {
    let matrix = instance.utility_matrix()?;
    let capacities = instance.capacities();
    let full = solve_optimal_assignment(&matrix, &capacities)?;
    charge_traveler_at(instance, &matrix, &capacities, &full, traveler)
}

fn charge_traveler_at(
    instance: &Instance,
    matrix: &UtilityMatrix,
    capacities: &[u32],
    full: &Assignment,
    traveler: usize,
) -> Result<Money, MechanismError> {
    let without = gross_welfare(matrix, capacities, &[traveler], &[])?;
    let own_valuation = match full.matches()[traveler] {
        Some(j) => instance.valuation(traveler, j)?,
        None => Money::ZERO,
    };
    let others_at_optimum = full.objective() - own_valuation;
    let charge = without - others_at_optimum;
    if charge.is_negative() {
        return Err(MechanismError::NegativeTransfer { agent: format!("traveler {traveler}") });
    }
    Ok(charge)
}

/// Compensation for one provider: what the others get at the chosen
/// optimum (total welfare plus the provider's operating costs), minus the
/// welfare reachable without the provider. This is the provider's marginal
/// contribution and is never negative.
pub fn clarke_compensation_provider(
    instance: &Instance,
    provider: usize,
) -> Result<Money, MechanismError> {
    let matrix = instance.utility_matrix()?;
    let capacities = instance.capacities();
    let full = solve_optimal_assignment(&matrix, &capacities)?;
    compensation_provider_at(instance, &matrix, &capacities, &full, provider)
}

fn compensation_provider_at(
    instance: &Instance,
    matrix: &UtilityMatrix,
    capacities: &[u32],
    full: &Assignment,
    provider: usize,
) -> Result<Money, MechanismError> {
    let without = gross_welfare(matrix, capacities, &[], &[provider])?;
    let served = i64::from(full.provider_load(matrix.cols())[provider]);
    let own_costs = instance.cost(provider)?.checked_mul(served)?;
    let others_at_optimum = full.objective() + own_costs;
    let compensation = others_at_optimum - without;
    if compensation.is_negative() {
        return Err(MechanismError::NegativeTransfer { agent: format!("provider {provider}") });
    }
    Ok(compensation)
}

fn reported_instance(reports: &[Report], true_instance: &Instance) -> Result<Instance, MechanismError> {
    let num_t = true_instance.num_travelers();
    let num_p = true_instance.num_providers();
    let mut travelers = true_instance.travelers().to_vec();
    let mut providers = true_instance.providers().to_vec();
    let mut seen_t = vec![false; num_t];
    let mut seen_p = vec![false; num_p];
    for report in reports {
        match report {
            Report::Traveler { id, predispositions } => {
                let slot = travelers
                    .get_mut(*id)
                    .ok_or_else(|| MechanismError::ReportMismatch(format!("unknown traveler {id}")))?;
                if std::mem::replace(&mut seen_t[*id], true) {
                    return Err(MechanismError::ReportMismatch(format!(
                        "duplicate report for traveler {id}"
                    )));
                }
                slot.predispositions = predispositions.clone();
            }
            Report::Provider { id, op_type } => {
                let slot = providers
                    .get_mut(*id)
                    .ok_or_else(|| MechanismError::ReportMismatch(format!("unknown provider {id}")))?;
                if std::mem::replace(&mut seen_p[*id], true) {
                    return Err(MechanismError::ReportMismatch(format!(
                        "duplicate report for provider {id}"
                    )));
                }
                slot.op_type = *op_type;
            }
        }
    }
    if let Some(i) = seen_t.iter().position(|s| !s) {
        return Err(MechanismError::ReportMismatch(format!("missing report for traveler {i}")));
    }
    if let Some(j) = seen_p.iter().position(|s| !s) {
        return Err(MechanismError::ReportMismatch(format!("missing report for provider {j}")));
    }
    Ok(Instance::new(
        travelers,
        providers,
        true_instance.payment_bounds(),
        None,
    )?)
}

/// Runs the full mechanism: solve on reports, compute every pivot
/// transfer, and evaluate each agent's net utility at its TRUE type.
pub fn run_mechanism(
    reports: &[Report],
    true_instance: &Instance,
) -> Result<MechanismOutcome, MechanismError> {
    require_derived(true_instance)?;
    let reported = reported_instance(reports, true_instance)?;
    let matrix = reported.utility_matrix()?;
    let capacities = reported.capacities();
    let assignment = solve_optimal_assignment(&matrix, &capacities)?;

    let num_t = reported.num_travelers();
    let num_p = reported.num_providers();
    let mut traveler_charges = Vec::with_capacity(num_t);
    for i in 0..num_t {
        traveler_charges.push(charge_traveler_at(&reported, &matrix, &capacities, &assignment, i)?);
    }
    let mut provider_compensations = Vec::with_capacity(num_p);
    for j in 0..num_p {
        provider_compensations.push(compensation_provider_at(
            &reported, &matrix, &capacities, &assignment, j,
        )?);
    }

    let mut traveler_utilities = Vec::with_capacity(num_t);
    for i in 0..num_t {
        let value = match assignment.matches()[i] {
            Some(j) => true_instance.valuation(i, j)?,
            None => Money::ZERO,
        };
        traveler_utilities.push(value - traveler_charges[i]);
    }
    let load = assignment.provider_load(num_p);
    let mut provider_utilities = Vec::with_capacity(num_p);
    for j in 0..num_p {
        let costs = true_instance.cost(j)?.checked_mul(i64::from(load[j]))?;
        provider_utilities.push(provider_compensations[j] - costs);
    }

    let charges: Money = traveler_charges.iter().copied().sum();
    let compensations: Money = provider_compensations.iter().copied().sum();
    Ok(MechanismOutcome {
        assignment,
        traveler_charges,
        provider_compensations,
        traveler_utilities,
        provider_utilities,
        budget: charges - compensations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipationViolation {
    pub seed: u64,
    pub agent: String,
    pub value: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipationReport {
    pub trials: u32,
    pub min_utility: Money,
    pub min_transfer: Money,
    pub violations: Vec<ParticipationViolation>,
}

/// Runs the mechanism truthfully on `trials` seeded random instances and
/// collects every negative utility or transfer.
pub fn verify_participation(
    base: &GeneratorConfig,
    trials: u32,
) -> Result<ParticipationReport, MechanismError> {
    let mut report = ParticipationReport {
        trials,
        min_utility: Money::ZERO,
        min_transfer: Money::ZERO,
        violations: Vec::new(),
    };
    for trial in 0..trials {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(u64::from(trial));
        let instance = generate_instance(&config)?;
        let outcome = run_mechanism(&truthful_reports(&instance), &instance)?;
        let mut note = |agent: String, value: Money, seed: u64, is_utility: bool| {
            if is_utility {
                report.min_utility = report.min_utility.min(value);
            } else {
                report.min_transfer = report.min_transfer.min(value);
            }
            if value.is_negative() {
                report.violations.push(ParticipationViolation { seed, agent, value });
            }
        };
        for (i, &u) in outcome.traveler_utilities.iter().enumerate() {
            note(format!("traveler {i} utility"), u, config.seed, true);
        }
        for (j, &u) in outcome.provider_utilities.iter().enumerate() {
            note(format!("provider {j} utility"), u, config.seed, true);
        }
        for (i, &t) in outcome.traveler_charges.iter().enumerate() {
            note(format!("traveler {i} charge"), t, config.seed, false);
        }
        for (j, &t) in outcome.provider_compensations.iter().enumerate() {
            note(format!("provider {j} compensation"), t, config.seed, false);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    Traveler(usize),
    Provider(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegretPoint {
    pub agent: Agent,
    pub coordinate: usize,
    pub reported: UnitFrac,
    pub regret: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthfulnessReport {
    pub grid: u32,
    pub points_checked: usize,
    /// Largest misreport utility minus truthful utility seen; at most
    /// zero when truth-telling dominates.
    pub max_regret: Money,
    pub violations: Vec<RegretPoint>,
}

fn grid_values(grid: u32, include_zero: bool) -> Result<Vec<UnitFrac>, MechanismError> {
    if grid < 2 || FRAC_DENOM % grid != 0 {
        return Err(MechanismError::BadGrid(grid));
    }
    let step = FRAC_DENOM / grid;
    let start = if include_zero { 0 } else { 1 };
    (start..=grid)
        .map(|k| UnitFrac::new(k * step).map_err(|_| MechanismError::BadGrid(grid)))
        .collect()
}

/// Sweeps one agent's report over the type grid, one coordinate at a
/// time, holding everyone else truthful, and compares the agent's true
/// utility against the truthful run. Exact integer comparison.
pub fn verify_truthfulness(
    instance: &Instance,
    agent: Agent,
    grid: u32,
) -> Result<TruthfulnessReport, MechanismError> {
    require_derived(instance)?;
    let truthful = run_mechanism(&truthful_reports(instance), instance)?;
    let truthful_utility = match agent {
        Agent::Traveler(i) => truthful.traveler_utilities[i],
        Agent::Provider(j) => truthful.provider_utilities[j],
    };

    let mut report = TruthfulnessReport {
        grid,
        points_checked: 0,
        max_regret: Money::ZERO,
        violations: Vec::new(),
    };
    let record = |coordinate: usize, reported: UnitFrac, utility: Money, report: &mut TruthfulnessReport| {
        let regret = utility - truthful_utility;
        report.points_checked += 1;
        report.max_regret = report.max_regret.max(regret);
        if regret > Money::ZERO {
            report.violations.push(RegretPoint { agent, coordinate, reported, regret });
        }
    };

    match agent {
        Agent::Traveler(i) => {
            let values = grid_values(grid, true)?;
            let truth = &instance.travelers()[i].predispositions;
            for coordinate in 0..instance.num_providers() {
                for &value in &values {
                    let mut predispositions = truth.clone();
                    predispositions[coordinate] = value;
                    let mut reports = truthful_reports(instance);
                    reports[i] = Report::Traveler { id: i, predispositions };
                    let outcome = run_mechanism(&reports, instance)?;
                    record(coordinate, value, outcome.traveler_utilities[i], &mut report);
                }
            }
        }
        Agent::Provider(j) => {
            let values = grid_values(grid, false)?;
            for &value in &values {
                let mut reports = truthful_reports(instance);
                reports[instance.num_travelers() + j] = Report::Provider { id: j, op_type: value };
                let outcome = run_mechanism(&reports, instance)?;
                record(0, value, outcome.provider_utilities[j], &mut report);
            }
        }
    }
    Ok(report)
}
