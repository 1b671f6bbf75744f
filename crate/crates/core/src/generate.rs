//! Seeded instance generation.
//!
//! The same seed and config always produce the same instance, bit for
//! bit. Willingness and cost scales are drawn in whole currency units so
//! every derived payoff lands exactly on the micro-unit grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Instance, ModelError, PaymentBounds, Provider, Traveler};
use crate::money::{Money, UnitFrac, FRAC_DENOM};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("config needs at least one traveler and one provider")]
    Empty,
    #[error("range {name} is reversed: {low} > {high}")]
    ReversedRange { name: &'static str, low: i64, high: i64 },
    #[error("cannot balance capacities: {travelers} travelers cannot cover {providers} providers with at least one seat each")]
    Unbalanceable { travelers: usize, providers: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub travelers: usize,
    pub providers: usize,
    /// Inclusive capacity range each provider draws from.
    pub capacity_range: (u32, u32),
    /// Inclusive whole-unit range for traveler willingness scales.
    pub willingness_units: (i64, i64),
    /// Inclusive whole-unit range for provider cost scales.
    pub cost_units: (i64, i64),
    /// Force aggregate capacity to equal the traveler count.
    pub balanced: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            travelers: 6,
            providers: 3,
            capacity_range: (1, 4),
            willingness_units: (0, 10),
            cost_units: (0, 6),
            balanced: false,
        }
    }
}

pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance, GenError> {
    if config.travelers == 0 || config.providers == 0 {
        return Err(GenError::Empty);
    }
    if config.capacity_range.0 > config.capacity_range.1 {
        return Err(GenError::ReversedRange {
            name: "capacity",
            low: i64::from(config.capacity_range.0),
            high: i64::from(config.capacity_range.1),
        });
    }
    for (name, (low, high)) in
        [("willingness", config.willingness_units), ("cost", config.cost_units)]
    {
        if low > high {
            return Err(GenError::ReversedRange { name, low, high });
        }
        if low < 0 {
            return Err(GenError::ReversedRange { name, low, high: 0 });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let travelers: Vec<Traveler> = (0..config.travelers)
        .map(|_| {
            let predispositions = (0..config.providers)
                .map(|_| UnitFrac::new(rng.gen_range(0..=FRAC_DENOM)).expect("in grid"))
                .collect();
            let willingness = Money::from_units(
                rng.gen_range(config.willingness_units.0..=config.willingness_units.1),
            )
            .expect("whole-unit range fits");
            Traveler { predispositions, willingness, label: None }
        })
        .collect();

    let mut capacities: Vec<u32> = (0..config.providers)
        .map(|_| rng.gen_range(config.capacity_range.0..=config.capacity_range.1))
        .collect();
    if config.balanced {
        balance_capacities(&mut capacities, config.travelers)?;
    }

    let providers: Vec<Provider> = capacities
        .into_iter()
        .map(|capacity| {
            let op_type = UnitFrac::new(rng.gen_range(1..=FRAC_DENOM)).expect("in grid");
            let cost_scale =
                Money::from_units(rng.gen_range(config.cost_units.0..=config.cost_units.1))
                    .expect("whole-unit range fits");
            Provider { op_type, cost_scale, capacity }
        })
        .collect();

    let bounds = PaymentBounds {
        lower: Money::from_units(-1_000).expect("fixed bound"),
        upper: Money::from_units(1_000).expect("fixed bound"),
    };
    Ok(Instance::new(travelers, providers, bounds, None)?)
}

/// Adjusts drawn capacities so they sum to the traveler count: the
/// largest provider absorbs the difference, and any shortfall below one
/// seat spills over to the next largest.
fn balance_capacities(capacities: &mut [u32], travelers: usize) -> Result<(), GenError> {
    let providers = capacities.len();
    if travelers < providers {
        return Err(GenError::Unbalanceable { travelers, providers });
    }
    let mut total: i64 = capacities.iter().map(|&c| i64::from(c)).sum();
    let target = travelers as i64;
    while total != target {
        let diff = target - total;
        let idx = if diff > 0 {
            // Grow the largest (first on ties).
            (0..providers).max_by_key(|&j| (capacities[j], std::cmp::Reverse(j))).unwrap()
        } else {
            (0..providers)
                .filter(|&j| capacities[j] > 1)
                .max_by_key(|&j| (capacities[j], std::cmp::Reverse(j)))
                .ok_or(GenError::Unbalanceable { travelers, providers })?
        };
        let room = if diff > 0 { diff } else { diff.max(1 - i64::from(capacities[idx])) };
        capacities[idx] = (i64::from(capacities[idx]) + room) as u32;
        total += room;
    }
    Ok(())
}
