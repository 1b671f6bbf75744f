//! Exact toolkit for two-sided, capacitated traveler-provider assignment
//! markets: optimal matching, dual prices with stability certification,
//! and pivot-based pricing under privately known types.
//!
//! All money lives on an integer micro-unit grid, so every optimality,
//! stability, and truthfulness statement in this crate is an exact
//! integer identity with no tolerances.

pub mod duality;
pub mod format;
pub mod generate;
pub mod mechanism;
pub mod model;
pub mod money;
pub mod solver;

pub use duality::{
    check_complementary_slackness, check_stability, extract_payments, solve_dual, AuditReport,
    DualError, DualSolution, PaymentMatrix, Violation,
};
pub use format::{
    emit_assignment_csv, parse_instance, parse_solution, serialize_instance, serialize_solution,
    FormatError, SolutionCandidate, SCHEMA_VERSION,
};
pub use generate::{generate_instance, GenError, GeneratorConfig};
pub use mechanism::{
    clarke_charge_traveler, clarke_compensation_provider, gross_welfare, run_mechanism,
    truthful_reports, verify_participation, verify_truthfulness, Agent, MechanismError,
    MechanismOutcome, ParticipationReport, Report, TruthfulnessReport,
};
pub use model::{
    Assignment, AssignmentError, Instance, ModelError, PaymentBounds, Provider, Traveler,
    UtilityMatrix,
};
pub use money::{Money, MoneyError, UnitFrac, FRAC_DENOM, MICROS_PER_UNIT};
pub use solver::{
    assignment_value, brute_force_assignment, solve_optimal_assignment, FlowNetwork, SolveError,
};
