//! Property tests: solver against the exhaustive oracle, duality
//! identities, mechanism invariants, and format round-trips.

use proptest::prelude::*;

use mobility_core::{
    brute_force_assignment, check_complementary_slackness, check_stability, extract_payments,
    generate_instance, parse_instance, run_mechanism, serialize_instance, solve_dual,
    solve_optimal_assignment, truthful_reports, Assignment, DualSolution, GeneratorConfig, Money,
    UtilityMatrix,
};

fn matrix_strategy() -> impl Strategy<Value = (UtilityMatrix, Vec<u32>)> {
    (1usize..=6, 1usize..=3).prop_flat_map(|(rows, cols)| {
        let entries = prop::collection::vec(
            prop::collection::vec(-8_000_000i64..=8_000_000, cols),
            rows,
        );
        let caps = prop::collection::vec(1u32..=4, cols);
        (entries, caps).prop_map(|(entries, caps)| {
            let matrix = UtilityMatrix::from_rows(
                entries
                    .into_iter()
                    .map(|row| row.into_iter().map(Money::from_micros).collect())
                    .collect(),
            )
            .unwrap();
            (matrix, caps)
        })
    })
}

/// A random feasible match vector, independent of the solver.
fn random_feasible(
    matrix: &UtilityMatrix,
    caps: &[u32],
    picks: &[usize],
) -> Vec<Option<usize>> {
    let mut remaining = caps.to_vec();
    let mut matches = Vec::with_capacity(matrix.rows());
    for i in 0..matrix.rows() {
        let pick = picks[i] % (matrix.cols() + 1);
        if pick < matrix.cols() && remaining[pick] > 0 {
            remaining[pick] -= 1;
            matches.push(Some(pick));
        } else {
            matches.push(None);
        }
    }
    matches
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_oracle_exactly((matrix, caps) in matrix_strategy()) {
        let solved = solve_optimal_assignment(&matrix, &caps).unwrap();
        let oracle = brute_force_assignment(&matrix, &caps).unwrap();
        prop_assert_eq!(solved.objective(), oracle.objective());
    }

    #[test]
    fn solver_dominates_random_feasible_assignments(
        (matrix, caps) in matrix_strategy(),
        picks in prop::collection::vec(0usize..100, 64),
    ) {
        let solved = solve_optimal_assignment(&matrix, &caps).unwrap();
        for chunk in picks.chunks(matrix.rows().max(1)) {
            if chunk.len() < matrix.rows() { break; }
            let matches = random_feasible(&matrix, &caps, chunk);
            let candidate = Assignment::new(matches, &matrix, &caps).unwrap();
            prop_assert!(solved.objective() >= candidate.objective());
        }
    }

    #[test]
    fn extra_capacity_never_hurts((matrix, caps) in matrix_strategy(), j_pick in 0usize..8) {
        let base = solve_optimal_assignment(&matrix, &caps).unwrap();
        let mut bigger = caps.clone();
        let j = j_pick % caps.len();
        bigger[j] += 1;
        let grown = solve_optimal_assignment(&matrix, &bigger).unwrap();
        prop_assert!(grown.objective() >= base.objective());
    }

    #[test]
    fn strong_duality_and_slackness_hold((matrix, caps) in matrix_strategy()) {
        let primal = solve_optimal_assignment(&matrix, &caps).unwrap();
        let dual = solve_dual(&matrix, &caps, &primal).unwrap();
        prop_assert_eq!(dual.gap, Money::ZERO);
        prop_assert_eq!(dual.objective(&caps), primal.objective());
        let stability = check_stability(&matrix, &caps, &primal, &dual).unwrap();
        let slackness = check_complementary_slackness(&matrix, &caps, &primal, &dual).unwrap();
        prop_assert!(stability.ok, "{:?}", stability.violations);
        // At an optimal primal/dual pair the two audits agree.
        prop_assert_eq!(stability.ok, slackness.ok);
    }

    #[test]
    fn weak_duality_bounds_every_feasible_pair(
        (matrix, caps) in matrix_strategy(),
        picks in prop::collection::vec(0usize..100, 6),
        psi_micros in prop::collection::vec(0i64..=9_000_000, 3),
    ) {
        let matches = random_feasible(&matrix, &caps, &picks);
        let primal = Assignment::new(matches, &matrix, &caps).unwrap();
        // Any non-negative psi extends to a feasible dual by taking the
        // smallest phi covering every pair.
        let psi: Vec<Money> = (0..matrix.cols()).map(|j| Money::from_micros(psi_micros[j])).collect();
        let phi: Vec<Money> = (0..matrix.rows())
            .map(|i| {
                (0..matrix.cols())
                    .map(|j| matrix.get(i, j) - psi[j])
                    .fold(Money::ZERO, Money::max)
            })
            .collect();
        let dual = DualSolution { phi, psi, gap: Money::ZERO };
        prop_assert!(primal.objective() <= dual.objective(&caps));
    }

    #[test]
    fn generated_instances_round_trip_and_solve(seed in any::<u64>(), balanced in any::<bool>()) {
        let config = GeneratorConfig {
            seed,
            travelers: 5,
            providers: 3,
            balanced,
            ..Default::default()
        };
        let instance = generate_instance(&config).unwrap();
        let text = serialize_instance(&instance).unwrap();
        let reparsed = parse_instance(&text).unwrap();
        prop_assert_eq!(&reparsed, &instance);
        prop_assert_eq!(serialize_instance(&reparsed).unwrap(), text);
        if balanced {
            prop_assert!(instance.is_balanced());
        }

        // Payment identities: with extracted payments every matched
        // traveler nets exactly phi and every provider seat nets psi.
        let matrix = instance.utility_matrix().unwrap();
        let caps = instance.capacities();
        let primal = solve_optimal_assignment(&matrix, &caps).unwrap();
        let dual = solve_dual(&matrix, &caps, &primal).unwrap();
        let payments = extract_payments(&instance, &primal, &dual).unwrap();
        for (i, m) in primal.matches().iter().enumerate() {
            let Some(j) = *m else { continue };
            let t = payments.get(i, j).unwrap();
            prop_assert_eq!(instance.valuation(i, j).unwrap() - t, dual.phi[i]);
            prop_assert_eq!(t - instance.cost(j).unwrap(), dual.psi[j]);
        }
    }

    #[test]
    fn mechanism_is_efficient_and_deterministic(seed in any::<u64>()) {
        let config = GeneratorConfig { seed, travelers: 4, providers: 2, ..Default::default() };
        let instance = generate_instance(&config).unwrap();
        let outcome = run_mechanism(&truthful_reports(&instance), &instance).unwrap();
        let again = run_mechanism(&truthful_reports(&instance), &instance).unwrap();
        prop_assert_eq!(&outcome, &again);

        // The mechanism's assignment is exactly the welfare optimum on
        // the reported types.
        let matrix = instance.utility_matrix().unwrap();
        let caps = instance.capacities();
        let direct = solve_optimal_assignment(&matrix, &caps).unwrap();
        prop_assert_eq!(outcome.assignment.objective(), direct.objective());

        // Unmatched travelers and idle providers are never pivotal and
        // transfer nothing; every transfer is non-negative.
        for (i, m) in outcome.assignment.matches().iter().enumerate() {
            if m.is_none() {
                prop_assert_eq!(outcome.traveler_charges[i], Money::ZERO);
            }
            prop_assert!(!outcome.traveler_charges[i].is_negative());
        }
        let load = outcome.assignment.provider_load(instance.num_providers());
        for (j, t) in outcome.provider_compensations.iter().enumerate() {
            if load[j] == 0 {
                prop_assert_eq!(*t, Money::ZERO);
            }
            prop_assert!(!t.is_negative());
        }
    }
}

/// Dual optima found by exhaustive grid search over whole-unit prices;
/// independent of `solve_dual`.
fn enumerate_optimal_duals(
    matrix: &UtilityMatrix,
    caps: &[u32],
    optimum: Money,
    max_units: i64,
) -> Vec<DualSolution> {
    let cols = matrix.cols();
    assert!(cols <= 2, "grid enumeration is exponential in providers");
    let mut found = Vec::new();
    let mut psi_units = vec![0i64; cols];
    loop {
        let psi: Vec<Money> =
            psi_units.iter().map(|&u| Money::from_units(u).unwrap()).collect();
        // Smallest feasible phi for this psi; for a fixed psi it is the
        // only candidate that can reach the optimal objective.
        let phi: Vec<Money> = (0..matrix.rows())
            .map(|i| {
                (0..cols).map(|j| matrix.get(i, j) - psi[j]).fold(Money::ZERO, Money::max)
            })
            .collect();
        let dual = DualSolution { phi, psi, gap: Money::ZERO };
        if dual.objective(caps) == optimum {
            found.push(dual);
        }
        // Odometer over psi grid.
        let mut k = 0;
        loop {
            if k == cols {
                return found;
            }
            psi_units[k] += 1;
            if psi_units[k] <= max_units {
                break;
            }
            psi_units[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn midpoints_of_optimal_duals_stay_optimal() {
    let unit = |v: i64| Money::from_units(v).unwrap();
    let matrix = UtilityMatrix::from_rows(vec![
        vec![unit(3), unit(1)],
        vec![unit(2), unit(2)],
        vec![unit(4), unit(3)],
    ])
    .unwrap();
    let caps = [1, 2];
    let primal = solve_optimal_assignment(&matrix, &caps).unwrap();
    let duals = enumerate_optimal_duals(&matrix, &caps, primal.objective(), 6);
    assert!(duals.len() >= 2, "expected several whole-unit optimal duals, found {}", duals.len());

    let ours = solve_dual(&matrix, &caps, &primal).unwrap();
    // The traveler-optimal point dominates every enumerated optimum.
    for dual in &duals {
        for (a, b) in ours.phi.iter().zip(&dual.phi) {
            assert!(a >= b);
        }
    }

    for a in &duals {
        for b in &duals {
            let phi: Vec<Money> = a
                .phi
                .iter()
                .zip(&b.phi)
                .map(|(&x, &y)| Money::from_micros((x.micros() + y.micros()) / 2))
                .collect();
            let psi: Vec<Money> = a
                .psi
                .iter()
                .zip(&b.psi)
                .map(|(&x, &y)| Money::from_micros((x.micros() + y.micros()) / 2))
                .collect();
            let mid = DualSolution { phi, psi, gap: Money::ZERO };
            assert_eq!(mid.objective(&caps), primal.objective());
            let report = check_stability(&matrix, &caps, &primal, &mid).unwrap();
            assert!(report.ok, "{:?}", report.violations);
        }
    }
}

#[test]
fn dual_prices_stay_below_the_largest_payoff() {
    // Extreme dual coordinates are bounded by the largest positive
    // payoff in their row or column.
    for seed in 0..20u64 {
        let config = GeneratorConfig { seed, travelers: 6, providers: 3, ..Default::default() };
        let instance = generate_instance(&config).unwrap();
        let matrix = instance.utility_matrix().unwrap();
        let caps = instance.capacities();
        let primal = solve_optimal_assignment(&matrix, &caps).unwrap();
        let dual = solve_dual(&matrix, &caps, &primal).unwrap();
        for (i, &phi) in dual.phi.iter().enumerate() {
            let row_max = (0..matrix.cols()).map(|j| matrix.get(i, j)).fold(Money::ZERO, Money::max);
            assert!(phi <= row_max);
        }
        for (j, &psi) in dual.psi.iter().enumerate() {
            let col_max = (0..matrix.rows()).map(|i| matrix.get(i, j)).fold(Money::ZERO, Money::max);
            assert!(psi <= col_max);
        }
    }
}
