//! Domain types for the capacitated traveler-provider assignment market.
//!
//! A traveler is matched to at most one provider; a provider serves up to
//! its capacity. The matching payoff of a pair is the traveler's valuation
//! minus the provider's operating cost; the payment between them cancels
//! out of the pair total.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{Money, MoneyError, UnitFrac};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("instance needs at least one traveler and one provider")]
    Empty,
    #[error("traveler {traveler}: expected {expected} predispositions, got {got}")]
    PredispositionLength { traveler: usize, expected: usize, got: usize },
    #[error("traveler {traveler}: willingness scale must be non-negative")]
    NegativeWillingness { traveler: usize },
    #[error("provider {provider}: operating type must be in (0, 1]")]
    ZeroOpType { provider: usize },
    #[error("provider {provider}: cost scale must be non-negative")]
    NegativeCost { provider: usize },
    #[error("provider {provider}: capacity must be at least 1")]
    ZeroCapacity { provider: usize },
    #[error("payment bounds reversed: lower {lower} > upper {upper}")]
    BoundsReversed { lower: Money, upper: Money },
    #[error("payoff override must be {rows}x{cols}, got {got_rows}x{got_cols}")]
    OverrideShape { rows: usize, cols: usize, got_rows: usize, got_cols: usize },
    #[error("provider index {index} out of range for {count} providers")]
    ProviderIndex { index: usize, count: usize },
    #[error("traveler index {index} out of range for {count} travelers")]
    TravelerIndex { index: usize, count: usize },
    #[error(transparent)]
    Money(#[from] MoneyError),
}

/// One traveler: a per-provider predisposition vector and the maximum
/// willingness to pay at full predisposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traveler {
    pub predispositions: Vec<UnitFrac>,
    pub willingness: Money,
    /// Optional type-group label, carried through to reports.
    pub label: Option<String>,
}

/// One provider: an operating type in (0, 1], a cost scale, and a seat
/// capacity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provider {
    pub op_type: UnitFrac,
    pub cost_scale: Money,
    pub capacity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentBounds {
    pub lower: Money,
    pub upper: Money,
}

impl PaymentBounds {
    pub fn contains(&self, t: Money) -> bool {
        self.lower <= t && t <= self.upper
    }
}

/// A full market instance. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    travelers: Vec<Traveler>,
    providers: Vec<Provider>,
    payment_bounds: PaymentBounds,
    payoff_override: Option<Vec<Vec<Money>>>,
}

impl Instance {
    pub fn new(
        travelers: Vec<Traveler>,
        providers: Vec<Provider>,
        payment_bounds: PaymentBounds,
        payoff_override: Option<Vec<Vec<Money>>>,
    ) -> Result<Instance, ModelError> {
        if travelers.is_empty() || providers.is_empty() {
            return Err(ModelError::Empty);
        }
        let cols = providers.len();
        for (i, t) in travelers.iter().enumerate() {
            if t.predispositions.len() != cols {
                return Err(ModelError::PredispositionLength {
                    traveler: i,
                    expected: cols,
                    got: t.predispositions.len(),
                });
            }
            if t.willingness.is_negative() {
                return Err(ModelError::NegativeWillingness { traveler: i });
            }
        }
        for (j, p) in providers.iter().enumerate() {
            if p.op_type.is_zero() {
                return Err(ModelError::ZeroOpType { provider: j });
            }
            if p.cost_scale.is_negative() {
                return Err(ModelError::NegativeCost { provider: j });
            }
            if p.capacity == 0 {
                return Err(ModelError::ZeroCapacity { provider: j });
            }
        }
        if payment_bounds.lower > payment_bounds.upper {
            return Err(ModelError::BoundsReversed {
                lower: payment_bounds.lower,
                upper: payment_bounds.upper,
            });
        }
        if let Some(matrix) = &payoff_override {
            let got_rows = matrix.len();
            let got_cols = matrix.first().map_or(0, |r| r.len());
            if got_rows != travelers.len() || matrix.iter().any(|r| r.len() != cols) {
                return Err(ModelError::OverrideShape {
                    rows: travelers.len(),
                    cols,
                    got_rows,
                    got_cols,
                });
            }
        }
        Ok(Instance { travelers, providers, payment_bounds, payoff_override })
    }

    pub fn num_travelers(&self) -> usize {
        self.travelers.len()
    }

    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn travelers(&self) -> &[Traveler] {
        &self.travelers
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn payment_bounds(&self) -> PaymentBounds {
        self.payment_bounds
    }

    pub fn payoff_override(&self) -> Option<&Vec<Vec<Money>>> {
        self.payoff_override.as_ref()
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.providers.iter().map(|p| p.capacity).collect()
    }

    /// Whether aggregate capacity exactly meets traveler demand.
    pub fn is_balanced(&self) -> bool {
        let total: u64 = self.providers.iter().map(|p| u64::from(p.capacity)).sum();
        total == self.travelers.len() as u64
    }

    /// Gross valuation of traveler `i` for being served by provider `j`:
    /// predisposition times willingness scale, exact.
    ///
    /// With a payoff override in place the valuation is the override entry
    /// itself (costs are folded to zero), keeping payoff = valuation - cost.
    pub fn valuation(&self, traveler: usize, provider: usize) -> Result<Money, ModelError> {
        let t = self.travelers.get(traveler).ok_or(ModelError::TravelerIndex {
            index: traveler,
            count: self.travelers.len(),
        })?;
        if provider >= self.providers.len() {
            return Err(ModelError::ProviderIndex {
                index: provider,
                count: self.providers.len(),
            });
        }
        if let Some(matrix) = &self.payoff_override {
            return Ok(matrix[traveler][provider]);
        }
        Ok(t.willingness.scale(t.predispositions[provider])?)
    }

    /// Operating cost of provider `j` for serving one traveler: operating
    /// type times cost scale, exact. Zero under a payoff override.
    pub fn cost(&self, provider: usize) -> Result<Money, ModelError> {
        let p = self.providers.get(provider).ok_or(ModelError::ProviderIndex {
            index: provider,
            count: self.providers.len(),
        })?;
        if self.payoff_override.is_some() {
            return Ok(Money::ZERO);
        }
        Ok(p.cost_scale.scale(p.op_type)?)
    }

    /// Builds the payoff matrix: entry (i, j) is valuation minus cost, or
    /// the override entry verbatim.
    pub fn utility_matrix(&self) -> Result<UtilityMatrix, ModelError> {
        let rows = self.travelers.len();
        let cols = self.providers.len();
        if let Some(matrix) = &self.payoff_override {
            return Ok(UtilityMatrix {
                entries: matrix.iter().flatten().copied().collect(),
                rows,
                cols,
            });
        }
        let mut entries = Vec::with_capacity(rows * cols);
        let costs: Vec<Money> = (0..cols).map(|j| self.cost(j)).collect::<Result<_, _>>()?;
        for i in 0..rows {
            for (j, cost) in costs.iter().enumerate() {
                entries.push(self.valuation(i, j)?.checked_sub(*cost)?);
            }
        }
        Ok(UtilityMatrix { entries, rows, cols })
    }

    /// Same market with one traveler's predisposition vector replaced.
    pub fn with_traveler_predispositions(
        &self,
        traveler: usize,
        predispositions: Vec<UnitFrac>,
    ) -> Result<Instance, ModelError> {
        let mut travelers = self.travelers.clone();
        let slot = travelers.get_mut(traveler).ok_or(ModelError::TravelerIndex {
            index: traveler,
            count: self.travelers.len(),
        })?;
        slot.predispositions = predispositions;
        Instance::new(travelers, self.providers.clone(), self.payment_bounds, self.payoff_override.clone())
    }

    /// Same market with one provider's operating type replaced.
    pub fn with_provider_op_type(
        &self,
        provider: usize,
        op_type: UnitFrac,
    ) -> Result<Instance, ModelError> {
        let mut providers = self.providers.clone();
        let slot = providers.get_mut(provider).ok_or(ModelError::ProviderIndex {
            index: provider,
            count: self.providers.len(),
        })?;
        slot.op_type = op_type;
        Instance::new(self.travelers.clone(), providers, self.payment_bounds, self.payoff_override.clone())
    }
}

/// Immutable payoff matrix, row per traveler, column per provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityMatrix {
    entries: Vec<Money>,
    rows: usize,
    cols: usize,
}

impl UtilityMatrix {
    pub fn from_rows(rows: Vec<Vec<Money>>) -> Result<UtilityMatrix, ModelError> {
        let row_count = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        if row_count == 0 || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(ModelError::OverrideShape {
                rows: row_count,
                cols,
                got_rows: row_count,
                got_cols: cols,
            });
        }
        Ok(UtilityMatrix { entries: rows.into_iter().flatten().collect(), rows: row_count, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, traveler: usize, provider: usize) -> Money {
        assert!(traveler < self.rows && provider < self.cols, "matrix index out of range");
        self.entries[traveler * self.cols + provider]
    }
}

/// A feasible matching: at most one provider per traveler, capacities
/// respected, with its exact total payoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    matches: Vec<Option<usize>>,
    objective: Money,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("match vector has {got} entries for a {expected}-traveler matrix")]
    Length { expected: usize, got: usize },
    #[error("traveler {traveler} matched to out-of-range provider {provider}")]
    ProviderIndex { traveler: usize, provider: usize },
    #[error("provider {provider} over capacity: {assigned} matched, capacity {capacity}")]
    OverCapacity { provider: usize, assigned: u32, capacity: u32 },
    #[error("capacity vector has {got} entries for a {expected}-provider matrix")]
    CapacityLength { expected: usize, got: usize },
    #[error(transparent)]
    Money(#[from] MoneyError),
}

impl Assignment {
    /// Validates feasibility against the matrix shape and capacities and
    /// computes the exact objective.
    pub fn new(
        matches: Vec<Option<usize>>,
        matrix: &UtilityMatrix,
        capacities: &[u32],
    ) -> Result<Assignment, AssignmentError> {
        if matches.len() != matrix.rows() {
            return Err(AssignmentError::Length { expected: matrix.rows(), got: matches.len() });
        }
        if capacities.len() != matrix.cols() {
            return Err(AssignmentError::CapacityLength {
                expected: matrix.cols(),
                got: capacities.len(),
            });
        }
        let mut load = vec![0u32; matrix.cols()];
        let mut objective = Money::ZERO;
        for (i, m) in matches.iter().enumerate() {
            if let Some(j) = *m {
                if j >= matrix.cols() {
                    return Err(AssignmentError::ProviderIndex { traveler: i, provider: j });
                }
                load[j] += 1;
                objective = objective.checked_add(matrix.get(i, j))?;
            }
        }
        for (j, (&used, &cap)) in load.iter().zip(capacities).enumerate() {
            if used > cap {
                return Err(AssignmentError::OverCapacity {
                    provider: j,
                    assigned: used,
                    capacity: cap,
                });
            }
        }
        Ok(Assignment { matches, objective })
    }

    pub fn matches(&self) -> &[Option<usize>] {
        &self.matches
    }

    pub fn objective(&self) -> Money {
        self.objective
    }

    pub fn matched_count(&self) -> usize {
        self.matches.iter().filter(|m| m.is_some()).count()
    }

    /// Travelers matched to each provider.
    pub fn provider_load(&self, num_providers: usize) -> Vec<u32> {
        let mut load = vec![0u32; num_providers];
        for m in self.matches.iter().flatten() {
            load[*m] += 1;
        }
        load
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn money(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn frac(s: &str) -> UnitFrac {
        s.parse().unwrap()
    }

    pub(crate) fn simple_instance() -> Instance {
        Instance::new(
            vec![
                Traveler {
                    predispositions: vec![frac("0.5"), frac("1")],
                    willingness: money("10"),
                    label: None,
                },
                Traveler {
                    predispositions: vec![frac("0"), frac("0.25")],
                    willingness: money("8"),
                    label: Some("commuters".into()),
                },
            ],
            vec![
                Provider { op_type: frac("0.5"), cost_scale: money("2"), capacity: 1 },
                Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 2 },
            ],
            PaymentBounds { lower: money("0"), upper: money("100") },
            None,
        )
        .unwrap()
    }

    #[test]
    fn valuation_is_predisposition_times_willingness() {
        let inst = simple_instance();
        assert_eq!(inst.valuation(0, 0).unwrap(), money("5"));
        assert_eq!(inst.valuation(1, 0).unwrap(), Money::ZERO);
        assert_eq!(inst.valuation(0, 1).unwrap(), money("10"));
    }

    #[test]
    fn theta_one_hits_full_willingness() {
        let inst = Instance::new(
            vec![Traveler {
                predispositions: vec![frac("1")],
                willingness: money("7.5"),
                label: None,
            }],
            vec![Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 1 }],
            PaymentBounds { lower: money("0"), upper: money("10") },
            None,
        )
        .unwrap();
        assert_eq!(inst.valuation(0, 0).unwrap(), money("7.500000"));
    }

    #[test]
    fn cost_is_op_type_times_scale() {
        let inst = simple_instance();
        assert_eq!(inst.cost(0).unwrap(), money("1"));
        assert_eq!(inst.cost(1).unwrap(), Money::ZERO);

        let free = Instance::new(
            vec![Traveler { predispositions: vec![frac("1")], willingness: money("1"), label: None }],
            vec![Provider { op_type: frac("1"), cost_scale: money("3"), capacity: 1 }],
            PaymentBounds { lower: money("0"), upper: money("10") },
            None,
        )
        .unwrap();
        assert_eq!(free.cost(0).unwrap(), money("3"));
    }

    #[test]
    fn matrix_entries_are_valuation_minus_cost() {
        let inst = simple_instance();
        let a = inst.utility_matrix().unwrap();
        assert_eq!(a.get(0, 0), money("4"));
        assert_eq!(a.get(0, 1), money("10"));
        assert_eq!(a.get(1, 0), money("-1"));
        assert_eq!(a.get(1, 1), money("2"));
    }

    #[test]
    fn override_matrix_passes_through() {
        let rows = vec![vec![money("1"), money("2")], vec![money("-0.5"), money("3")]];
        let inst = Instance::new(
            vec![
                Traveler { predispositions: vec![frac("0"), frac("0")], willingness: money("0"), label: None },
                Traveler { predispositions: vec![frac("0"), frac("0")], willingness: money("0"), label: None },
            ],
            vec![
                Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 1 },
                Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 1 },
            ],
            PaymentBounds { lower: money("0"), upper: money("10") },
            Some(rows.clone()),
        )
        .unwrap();
        let a = inst.utility_matrix().unwrap();
        assert_eq!(a.get(1, 0), money("-0.5"));
        assert_eq!(inst.valuation(1, 0).unwrap(), money("-0.5"));
        assert_eq!(inst.cost(0).unwrap(), Money::ZERO);
    }

    #[test]
    fn pair_payoff_is_payment_invariant() {
        // Traveler and provider utilities at any payment t sum to the
        // matrix entry: (v - t) + (t - c) = v - c.
        let inst = simple_instance();
        let a = inst.utility_matrix().unwrap();
        for (i, j) in [(0usize, 0usize), (0, 1), (1, 1)] {
            let v = inst.valuation(i, j).unwrap();
            let c = inst.cost(j).unwrap();
            for t in [money("-3"), money("0"), money("7.25")] {
                assert_eq!((v - t) + (t - c), a.get(i, j));
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Instance::new(
            vec![],
            vec![Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 1 }],
            PaymentBounds { lower: money("0"), upper: money("1") },
            None,
        )
        .is_err());

        let err = Instance::new(
            vec![Traveler { predispositions: vec![frac("1")], willingness: money("1"), label: None }],
            vec![Provider { op_type: frac("1"), cost_scale: money("0"), capacity: 1 }],
            PaymentBounds { lower: money("0"), upper: money("1") },
            Some(vec![vec![money("1"), money("2")]]),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::OverrideShape { .. }));

        let err = Instance::new(
            vec![Traveler { predispositions: vec![frac("1")], willingness: money("1"), label: None }],
            vec![Provider { op_type: frac("0"), cost_scale: money("0"), capacity: 1 }],
            PaymentBounds { lower: money("0"), upper: money("1") },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ZeroOpType { .. }));
    }

    #[test]
    fn balance_is_reported_not_enforced() {
        let inst = simple_instance(); // capacities 1 + 2 = 3 != 2 travelers
        assert!(!inst.is_balanced());
    }

    #[test]
    fn assignment_checks_feasibility_and_objective() {
        let inst = simple_instance();
        let a = inst.utility_matrix().unwrap();
        let caps = inst.capacities();

        let asg = Assignment::new(vec![Some(0), Some(1)], &a, &caps).unwrap();
        assert_eq!(asg.objective(), money("6"));
        assert_eq!(asg.provider_load(2), vec![1, 1]);

        let err = Assignment::new(vec![Some(0), Some(0)], &a, &caps).unwrap_err();
        assert!(matches!(err, AssignmentError::OverCapacity { provider: 0, .. }));
    }
}
