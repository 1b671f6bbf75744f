//! Python bindings: parse or generate instances, solve them, certify the
//! dual prices, and run the pricing mechanism. Money crosses the boundary
//! as decimal strings so exactness survives the trip.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mobility_core as core;
use mobility_core::{Agent, GeneratorConfig, Money};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn internal_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(frozen)]
struct Instance {
    inner: core::Instance,
}

#[pymethods]
impl Instance {
    #[getter]
    fn num_travelers(&self) -> usize {
        self.inner.num_travelers()
    }

    #[getter]
    fn num_providers(&self) -> usize {
        self.inner.num_providers()
    }

    #[getter]
    fn capacities(&self) -> Vec<u32> {
        self.inner.capacities()
    }

    #[getter]
    fn balanced(&self) -> bool {
        self.inner.is_balanced()
    }

    /// Payoff matrix entries as decimal strings, row per traveler.
    fn payoff_matrix(&self) -> PyResult<Vec<Vec<String>>> {
        let matrix = self.inner.utility_matrix().map_err(value_err)?;
        Ok((0..matrix.rows())
            .map(|i| (0..matrix.cols()).map(|j| matrix.get(i, j).to_string()).collect())
            .collect())
    }

    fn to_toml(&self) -> PyResult<String> {
        core::serialize_instance(&self.inner).map_err(internal_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance({} travelers, {} providers)",
            self.inner.num_travelers(),
            self.inner.num_providers()
        )
    }
}

#[pyclass(frozen)]
struct SolveResult {
    /// Provider index per traveler, None when unmatched.
    #[pyo3(get)]
    matches: Vec<Option<usize>>,
    #[pyo3(get)]
    objective: String,
    #[pyo3(get)]
    phi: Vec<String>,
    #[pyo3(get)]
    psi: Vec<String>,
    /// (traveler, provider, payment) per matched pair.
    #[pyo3(get)]
    payments: Vec<(usize, usize, String)>,
    #[pyo3(get)]
    stable: bool,
}

#[pyclass(frozen)]
struct MechanismResult {
    #[pyo3(get)]
    matches: Vec<Option<usize>>,
    #[pyo3(get)]
    traveler_charges: Vec<String>,
    #[pyo3(get)]
    provider_compensations: Vec<String>,
    #[pyo3(get)]
    traveler_utilities: Vec<String>,
    #[pyo3(get)]
    provider_utilities: Vec<String>,
    #[pyo3(get)]
    budget: String,
}

fn money_strings(values: &[Money]) -> Vec<String> {
    values.iter().map(Money::to_string).collect()
}

/// Parse an instance from its TOML text form.
#[pyfunction]
fn parse_instance(text: &str) -> PyResult<Instance> {
    core::parse_instance(text).map(|inner| Instance { inner }).map_err(value_err)
}

/// Generate a seeded random instance.
#[pyfunction]
#[pyo3(signature = (seed, travelers, providers, balanced = false))]
fn generate_instance(
    seed: u64,
    travelers: usize,
    providers: usize,
    balanced: bool,
) -> PyResult<Instance> {
    let config = GeneratorConfig { seed, travelers, providers, balanced, ..Default::default() };
    core::generate_instance(&config).map(|inner| Instance { inner }).map_err(value_err)
}

/// Solve an instance exactly: optimal assignment, traveler-optimal dual
/// prices, and equilibrium payments.
#[pyfunction]
fn solve(instance: &Instance) -> PyResult<SolveResult> {
    let inst = &instance.inner;
    let matrix = inst.utility_matrix().map_err(value_err)?;
    let caps = inst.capacities();
    let assignment = core::solve_optimal_assignment(&matrix, &caps).map_err(internal_err)?;
    let dual = core::solve_dual(&matrix, &caps, &assignment).map_err(internal_err)?;
    let payments = core::extract_payments(inst, &assignment, &dual).map_err(internal_err)?;
    let stable = core::check_stability(&matrix, &caps, &assignment, &dual)
        .map_err(internal_err)?
        .ok;
    Ok(SolveResult {
        matches: assignment.matches().to_vec(),
        objective: assignment.objective().to_string(),
        phi: money_strings(&dual.phi),
        psi: money_strings(&dual.psi),
        payments: payments
            .iter()
            .map(|(&(i, j), &t)| (i, j, t.to_string()))
            .collect(),
        stable,
    })
}

/// Exhaustive-enumeration objective for small instances.
#[pyfunction]
fn oracle_objective(instance: &Instance) -> PyResult<String> {
    let matrix = instance.inner.utility_matrix().map_err(value_err)?;
    let caps = instance.inner.capacities();
    let assignment = core::brute_force_assignment(&matrix, &caps).map_err(value_err)?;
    Ok(assignment.objective().to_string())
}

/// Run the pricing mechanism with truthful reports.
#[pyfunction]
fn run_mechanism(instance: &Instance) -> PyResult<MechanismResult> {
    let inst = &instance.inner;
    let outcome =
        core::run_mechanism(&core::truthful_reports(inst), inst).map_err(internal_err)?;
    Ok(MechanismResult {
        matches: outcome.assignment.matches().to_vec(),
        traveler_charges: money_strings(&outcome.traveler_charges),
        provider_compensations: money_strings(&outcome.provider_compensations),
        traveler_utilities: money_strings(&outcome.traveler_utilities),
        provider_utilities: money_strings(&outcome.provider_utilities),
        budget: outcome.budget.to_string(),
    })
}

/// Max regret (as a decimal string) from sweeping one agent's report over
/// the type grid; at most zero when truth-telling dominates.
#[pyfunction]
#[pyo3(signature = (instance, traveler = None, provider = None, grid = 20))]
fn max_misreport_regret(
    instance: &Instance,
    traveler: Option<usize>,
    provider: Option<usize>,
    grid: u32,
) -> PyResult<String> {
    let agent = match (traveler, provider) {
        (Some(i), None) => Agent::Traveler(i),
        (None, Some(j)) => Agent::Provider(j),
        _ => return Err(PyValueError::new_err("pass exactly one of traveler= or provider=")),
    };
    let report = core::verify_truthfulness(&instance.inner, agent, grid).map_err(value_err)?;
    Ok(report.max_regret.to_string())
}

#[pymodule]
fn mobility_game(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<SolveResult>()?;
    m.add_class::<MechanismResult>()?;
    m.add_function(wrap_pyfunction!(parse_instance, m)?)?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_objective, m)?)?;
    m.add_function(wrap_pyfunction!(run_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(max_misreport_regret, m)?)?;
    Ok(())
}
