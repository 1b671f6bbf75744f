//! Dual prices, stability certification, and equilibrium payments.
//!
//! The dual of the relaxed assignment LP assigns a gain `phi_i` to each
//! traveler and a per-seat gain `psi_j` to each provider, subject to
//! `phi_i + psi_j >= a_ij` and non-negativity. At an optimal assignment
//! the dual optima form a lattice; `solve_dual` returns the
//! traveler-optimal extreme point (coordinatewise minimal `psi`), found as
//! the minimal solution of a difference-constraint system implied by
//! complementary slackness. Audits accept arbitrary candidates so the
//! module doubles as an independent certifier.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{Assignment, Instance, UtilityMatrix};
use crate::money::Money;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DualError {
    #[error("capacity vector has {got} entries for a {expected}-provider matrix")]
    CapacityLength { expected: usize, got: usize },
    #[error("assignment has {got} entries for a {expected}-traveler matrix")]
    AssignmentLength { expected: usize, got: usize },
    #[error("dual has {got_phi} traveler and {got_psi} provider entries for a {rows}x{cols} matrix")]
    DualShape { rows: usize, cols: usize, got_phi: usize, got_psi: usize },
    #[error("assignment is not optimal: {reason}")]
    PrimalNotOptimal { reason: String },
    #[error("payment extraction requires a stable primal/dual pair: {0}")]
    Unstable(String),
    #[error("dual prices are inconsistent with the payoff matrix at pair ({traveler}, {provider})")]
    Corrupt { traveler: usize, provider: usize },
}

/// Dual prices certifying an optimal assignment. `gap` is primal minus
/// dual objective and is zero on every solution this module returns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSolution {
    pub phi: Vec<Money>,
    pub psi: Vec<Money>,
    pub gap: Money,
}

impl DualSolution {
    pub fn objective(&self, capacities: &[u32]) -> Money {
        let phi_sum: Money = self.phi.iter().copied().sum();
        let psi_sum: Money = self
            .psi
            .iter()
            .zip(capacities)
            .map(|(&psi, &cap)| psi.checked_mul(i64::from(cap)).expect("dual objective overflow"))
            .sum();
        phi_sum + psi_sum
    }
}

/// Equilibrium payments for matched pairs only; unmatched pairs pay
/// nothing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PaymentMatrix {
    payments: BTreeMap<(usize, usize), Money>,
    /// Matched pairs whose payment falls outside the instance bounds.
    pub out_of_bounds: Vec<(usize, usize, Money)>,
}

impl PaymentMatrix {
    pub fn get(&self, traveler: usize, provider: usize) -> Option<Money> {
        self.payments.get(&(traveler, provider)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Money)> {
        self.payments.iter()
    }

    pub fn len(&self) -> usize {
        self.payments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payments.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NegativePhi { traveler: usize, value: Money },
    NegativePsi { provider: usize, value: Money },
    /// Pair whose payoff exceeds the combined dual prices.
    BlockingPair { traveler: usize, provider: usize, deficit: Money },
    /// Dual objective does not equal the assignment's total payoff.
    DualityGap { primal: Money, dual: Money },
    /// Matched pair whose dual constraint is not tight.
    MatchedSlack { traveler: usize, provider: usize, slack: Money },
    /// Unmatched traveler carrying a positive gain.
    UnmatchedTravelerGain { traveler: usize, value: Money },
    /// Provider below capacity carrying a positive per-seat gain.
    SlackProviderGain { provider: usize, value: Money },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativePhi { traveler, value } => {
                write!(f, "traveler {traveler} gain is negative ({value})")
            }
            Violation::NegativePsi { provider, value } => {
                write!(f, "provider {provider} gain is negative ({value})")
            }
            Violation::BlockingPair { traveler, provider, deficit } => write!(
                f,
                "blocking pair ({traveler}, {provider}): payoff exceeds prices by {deficit}"
            ),
            Violation::DualityGap { primal, dual } => {
                write!(f, "duality gap: primal {primal} vs dual {dual}")
            }
            Violation::MatchedSlack { traveler, provider, slack } => write!(
                f,
                "matched pair ({traveler}, {provider}) has slack {slack} in its price constraint"
            ),
            Violation::UnmatchedTravelerGain { traveler, value } => {
                write!(f, "unmatched traveler {traveler} has positive gain {value}")
            }
            Violation::SlackProviderGain { provider, value } => {
                write!(f, "under-capacity provider {provider} has positive gain {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

fn check_shapes(
    matrix: &UtilityMatrix,
    capacities: &[u32],
    assignment: &Assignment,
    dual: &DualSolution,
) -> Result<(), DualError> {
    if capacities.len() != matrix.cols() {
        return Err(DualError::CapacityLength { expected: matrix.cols(), got: capacities.len() });
    }
    if assignment.matches().len() != matrix.rows() {
        return Err(DualError::AssignmentLength {
            expected: matrix.rows(),
            got: assignment.matches().len(),
        });
    }
    if dual.phi.len() != matrix.rows() || dual.psi.len() != matrix.cols() {
        return Err(DualError::DualShape {
            rows: matrix.rows(),
            cols: matrix.cols(),
            got_phi: dual.phi.len(),
            got_psi: dual.psi.len(),
        });
    }
    Ok(())
}

/// Computes the traveler-optimal optimal dual of an optimal assignment.
///
/// Complementary slackness pins `phi_i = a_im - psi_m` for matched pairs
/// and `phi_i = 0` for unmatched travelers, leaving lower-bound difference
/// constraints on `psi` alone. Their minimal solution is the longest-path
/// distance from a zero source, computed by Bellman-Ford over providers.
/// Any positive cycle or residual slack means the primal was not optimal.
pub fn solve_dual(
    matrix: &UtilityMatrix,
    capacities: &[u32],
    primal: &Assignment,
) -> Result<DualSolution, DualError> {
    if capacities.len() != matrix.cols() {
        return Err(DualError::CapacityLength { expected: matrix.cols(), got: capacities.len() });
    }
    if primal.matches().len() != matrix.rows() {
        return Err(DualError::AssignmentLength {
            expected: matrix.rows(),
            got: primal.matches().len(),
        });
    }
    let rows = matrix.rows();
    let cols = matrix.cols();

    // psi lower bounds: psi_j >= 0, psi_j >= a_ij for unmatched i, and
    // psi_j >= psi_m + (a_ij - a_im) when i is matched to m.
    let mut psi = vec![0i64; cols];
    for i in 0..rows {
        if primal.matches()[i].is_none() {
            for (j, psi_j) in psi.iter_mut().enumerate() {
                *psi_j = (*psi_j).max(matrix.get(i, j).micros());
            }
        }
    }
    let mut iterations = 0usize;
    loop {
        let mut changed = false;
        for i in 0..rows {
            let Some(m) = primal.matches()[i] else { continue };
            let a_im = matrix.get(i, m).micros();
            for j in 0..cols {
                if j == m {
                    continue;
                }
                let bound = psi[m] + matrix.get(i, j).micros() - a_im;
                if bound > psi[j] {
                    psi[j] = bound;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
        if iterations > cols + 1 {
            return Err(DualError::PrimalNotOptimal {
                reason: "price constraints admit a positive cycle".into(),
            });
        }
    }

    // Providers with spare seats must price at zero on any optimal dual.
    let load = primal.provider_load(cols);
    for (j, (&used, &cap)) in load.iter().zip(capacities).enumerate() {
        if used < cap && psi[j] != 0 {
            return Err(DualError::PrimalNotOptimal {
                reason: format!("provider {j} has spare capacity but a forced positive price"),
            });
        }
    }

    let mut phi = vec![Money::ZERO; rows];
    for i in 0..rows {
        if let Some(m) = primal.matches()[i] {
            let value = matrix.get(i, m).micros() - psi[m];
            if value < 0 {
                return Err(DualError::PrimalNotOptimal {
                    reason: format!("traveler {i} would need a negative gain"),
                });
            }
            phi[i] = Money::from_micros(value);
        }
    }
    let psi: Vec<Money> = psi.into_iter().map(Money::from_micros).collect();
    let dual = DualSolution { phi, psi, gap: Money::ZERO };

    let dual_objective = dual.objective(capacities);
    let gap = primal.objective() - dual_objective;
    if gap != Money::ZERO {
        return Err(DualError::PrimalNotOptimal {
            reason: format!("duality gap {gap} remains"),
        });
    }
    Ok(dual)
}

/// Audits an arbitrary assignment/dual candidate for stability: dual
/// feasibility plus total payoff equal to total dual value. Every failing
/// pair and condition is reported.
pub fn check_stability(
    matrix: &UtilityMatrix,
    capacities: &[u32],
    assignment: &Assignment,
    dual: &DualSolution,
) -> Result<AuditReport, DualError> {
    check_shapes(matrix, capacities, assignment, dual)?;
    let mut violations = Vec::new();
    for (i, &phi) in dual.phi.iter().enumerate() {
        if phi.is_negative() {
            violations.push(Violation::NegativePhi { traveler: i, value: phi });
        }
    }
    for (j, &psi) in dual.psi.iter().enumerate() {
        if psi.is_negative() {
            violations.push(Violation::NegativePsi { provider: j, value: psi });
        }
    }
    for i in 0..matrix.rows() {
        for j in 0..matrix.cols() {
            let covered = dual.phi[i] + dual.psi[j];
            let payoff = matrix.get(i, j);
            if covered < payoff {
                violations.push(Violation::BlockingPair {
                    traveler: i,
                    provider: j,
                    deficit: payoff - covered,
                });
            }
        }
    }
    let dual_objective = dual.objective(capacities);
    if dual_objective != assignment.objective() {
        violations.push(Violation::DualityGap {
            primal: assignment.objective(),
            dual: dual_objective,
        });
    }
    Ok(AuditReport { ok: violations.is_empty(), violations })
}

/// Audits the complementary slackness conditions: tight prices on matched
/// pairs, zero gain for unmatched travelers, zero per-seat gain for
/// providers below capacity.
pub fn check_complementary_slackness(
    matrix: &UtilityMatrix,
    capacities: &[u32],
    assignment: &Assignment,
    dual: &DualSolution,
) -> Result<AuditReport, DualError> {
    check_shapes(matrix, capacities, assignment, dual)?;
    let mut violations = Vec::new();
    for (i, m) in assignment.matches().iter().enumerate() {
        match m {
            Some(j) => {
                let slack = (dual.phi[i] + dual.psi[*j]) - matrix.get(i, *j);
                if slack != Money::ZERO {
                    violations.push(Violation::MatchedSlack { traveler: i, provider: *j, slack });
                }
            }
            None => {
                if dual.phi[i] != Money::ZERO {
                    violations.push(Violation::UnmatchedTravelerGain {
                        traveler: i,
                        value: dual.phi[i],
                    });
                }
            }
        }
    }
    let load = assignment.provider_load(matrix.cols());
    for (j, (&used, &cap)) in load.iter().zip(capacities).enumerate() {
        if used < cap && dual.psi[j] != Money::ZERO {
            violations.push(Violation::SlackProviderGain { provider: j, value: dual.psi[j] });
        }
    }
    Ok(AuditReport { ok: violations.is_empty(), violations })
}

/// Derives the equilibrium payment of every matched pair from the dual
/// prices: the traveler pays their valuation minus their gain, and that
/// same payment must leave the provider exactly its per-seat gain.
pub fn extract_payments(
    instance: &Instance,
    assignment: &Assignment,
    dual: &DualSolution,
) -> Result<PaymentMatrix, DualError> {
    let matrix = instance
        .utility_matrix()
        .map_err(|e| DualError::Unstable(e.to_string()))?;
    let capacities = instance.capacities();
    let stability = check_stability(&matrix, &capacities, assignment, dual)?;
    if !stability.ok {
        let summary = stability
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(DualError::Unstable(summary));
    }

    let bounds = instance.payment_bounds();
    let mut out = PaymentMatrix::default();
    for (i, m) in assignment.matches().iter().enumerate() {
        let Some(j) = *m else { continue };
        let v = instance.valuation(i, j).map_err(|e| DualError::Unstable(e.to_string()))?;
        let c = instance.cost(j).map_err(|e| DualError::Unstable(e.to_string()))?;
        let t = v - dual.phi[i];
        if t - c != dual.psi[j] {
            return Err(DualError::Corrupt { traveler: i, provider: j });
        }
        if !bounds.contains(t) {
            out.out_of_bounds.push((i, j, t));
        }
        out.payments.insert((i, j), t);
    }
    Ok(out)
}
