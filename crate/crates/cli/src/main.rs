use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mobility_core::{
    brute_force_assignment, check_complementary_slackness, check_stability, emit_assignment_csv,
    extract_payments, generate_instance, parse_instance, parse_solution, serialize_instance,
    run_mechanism, serialize_solution, solve_dual, solve_optimal_assignment, truthful_reports,
    verify_participation, verify_truthfulness, Agent, Assignment, GeneratorConfig, Instance, Money,
    UtilityMatrix,
};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mobility",
    about = "Exact solver and pricing toolkit for traveler-provider assignment markets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance: optimal assignment, dual prices, and payments.
    Solve {
        instance: PathBuf,
        /// Write the per-traveler assignment report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the assignment and dual prices for later auditing.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Solve by exhaustive enumeration (small instances only).
    Oracle { instance: PathBuf },
    /// Certify a stored assignment/dual pair against an instance.
    Audit { instance: PathBuf, solution: PathBuf },
    /// Run the pricing mechanism with truthful reports end to end.
    Mechanism { instance: PathBuf },
    /// Generate a seeded random instance file.
    Gen(GenArgs),
    /// Sweep misreports for every agent and report the worst regret.
    SweepTruthfulness {
        instance: PathBuf,
        /// Reported-type grid resolution (must divide 1000000).
        #[arg(long, default_value_t = 20)]
        grid: u32,
        /// Write per-agent regret rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the mechanism truthfully on seeded random instances and check
    /// that no agent ends up worse off than staying out.
    VerifyParticipation(ParticipationArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output instance file.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, env = "MOBILITY_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    travelers: usize,
    #[arg(long, default_value_t = 3)]
    providers: usize,
    #[arg(long, default_value_t = 1)]
    min_capacity: u32,
    #[arg(long, default_value_t = 4)]
    max_capacity: u32,
    #[arg(long, default_value_t = 10)]
    max_willingness: i64,
    #[arg(long, default_value_t = 6)]
    max_cost: i64,
    /// Force aggregate capacity to equal the traveler count.
    #[arg(long)]
    balanced: bool,
}

#[derive(Args)]
struct ParticipationArgs {
    #[arg(long, env = "MOBILITY_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 6)]
    travelers: usize,
    #[arg(long, default_value_t = 3)]
    providers: usize,
}

fn read_instance(path: &PathBuf) -> Result<Instance, (u8, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| (EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn print_assignment(instance: &Instance, matrix: &UtilityMatrix, assignment: &Assignment) {
    println!("objective: {}", assignment.objective());
    println!("matched: {} of {}", assignment.matched_count(), instance.num_travelers());
    for (i, m) in assignment.matches().iter().enumerate() {
        match m {
            Some(j) => println!("traveler {i} -> provider {j} (payoff {})", matrix.get(i, *j)),
            None => println!("traveler {i} -> unmatched"),
        }
    }
    let load = assignment.provider_load(instance.num_providers());
    for (j, p) in instance.providers().iter().enumerate() {
        println!("provider {j}: {}/{} seats used", load[j], p.capacity);
    }
    if !instance.is_balanced() {
        println!("note: aggregate capacity does not equal traveler count");
    }
}

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    match cli.command {
        Command::Solve { instance, csv, solution } => {
            let inst = read_instance(&instance)?;
            let matrix = inst
                .utility_matrix()
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            let caps = inst.capacities();
            let assignment = solve_optimal_assignment(&matrix, &caps)
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            let dual = solve_dual(&matrix, &caps, &assignment)
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            let payments = extract_payments(&inst, &assignment, &dual)
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;

            print_assignment(&inst, &matrix, &assignment);
            println!("phi: [{}]", join_money(&dual.phi));
            println!("psi: [{}]", join_money(&dual.psi));
            for ((i, j), t) in payments.iter() {
                println!("payment traveler {i} -> provider {j}: {t}");
            }
            for (i, j, t) in &payments.out_of_bounds {
                println!("warning: payment ({i}, {j}) = {t} outside the instance bounds");
            }

            if let Some(path) = csv {
                let report = emit_assignment_csv(&inst, &assignment, &dual, &payments)
                    .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
                std::fs::write(&path, report)
                    .map_err(|e| (EXIT_INPUT, format!("cannot write {}: {e}", path.display())))?;
            }
            if let Some(path) = solution {
                let text = serialize_solution(&assignment, &dual)
                    .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
                std::fs::write(&path, text)
                    .map_err(|e| (EXIT_INPUT, format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(EXIT_OK)
        }
        Command::Oracle { instance } => {
            let inst = read_instance(&instance)?;
            let matrix = inst
                .utility_matrix()
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            let caps = inst.capacities();
            let assignment = brute_force_assignment(&matrix, &caps)
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            print_assignment(&inst, &matrix, &assignment);
            Ok(EXIT_OK)
        }
        Command::Audit { instance, solution } => {
            let inst = read_instance(&instance)?;
            let matrix = inst
                .utility_matrix()
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            let caps = inst.capacities();
            let text = std::fs::read_to_string(&solution)
                .map_err(|e| (EXIT_INPUT, format!("cannot read {}: {e}", solution.display())))?;
            let candidate =
                parse_solution(&text).map_err(|e| (EXIT_INPUT, format!("{}: {e}", solution.display())))?;
            let assignment = Assignment::new(candidate.matches, &matrix, &caps)
                .map_err(|e| (EXIT_VIOLATION, format!("infeasible assignment: {e}")))?;
            let stability = check_stability(&matrix, &caps, &assignment, &candidate.dual)
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            let slackness =
                check_complementary_slackness(&matrix, &caps, &assignment, &candidate.dual)
                    .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            for v in stability.violations.iter().chain(&slackness.violations) {
                println!("violation: {v}");
            }
            if stability.ok && slackness.ok {
                println!("stable: assignment and dual prices certify each other");
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_VIOLATION)
            }
        }
        Command::Mechanism { instance } => {
            let inst = read_instance(&instance)?;
            let outcome = run_mechanism(&truthful_reports(&inst), &inst)
                .map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            let matrix = inst
                .utility_matrix()
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            print_assignment(&inst, &matrix, &outcome.assignment);
            println!("charges: [{}]", join_money(&outcome.traveler_charges));
            println!("compensations: [{}]", join_money(&outcome.provider_compensations));
            println!("traveler utilities: [{}]", join_money(&outcome.traveler_utilities));
            println!("provider utilities: [{}]", join_money(&outcome.provider_utilities));
            println!("budget: {}", outcome.budget);
            Ok(EXIT_OK)
        }
        Command::Gen(args) => {
            let config = GeneratorConfig {
                seed: args.seed,
                travelers: args.travelers,
                providers: args.providers,
                capacity_range: (args.min_capacity, args.max_capacity),
                willingness_units: (0, args.max_willingness),
                cost_units: (0, args.max_cost),
                balanced: args.balanced,
            };
            let inst = generate_instance(&config).map_err(|e| (EXIT_INPUT, e.to_string()))?;
            let text = serialize_instance(&inst).map_err(|e| (EXIT_INTERNAL, e.to_string()))?;
            std::fs::write(&args.output, text)
                .map_err(|e| (EXIT_INPUT, format!("cannot write {}: {e}", args.output.display())))?;
            println!("wrote {}", args.output.display());
            Ok(EXIT_OK)
        }
        Command::SweepTruthfulness { instance, grid, csv } => {
            let inst = read_instance(&instance)?;
            let mut agents: Vec<Agent> =
                (0..inst.num_travelers()).map(Agent::Traveler).collect();
            agents.extend((0..inst.num_providers()).map(Agent::Provider));

            let mut rows = String::from("agent,points,max_regret,violations\n");
            let mut worst = Money::ZERO;
            let mut violated = false;
            for agent in agents {
                let report = verify_truthfulness(&inst, agent, grid)
                    .map_err(|e| (EXIT_INPUT, e.to_string()))?;
                let name = match agent {
                    Agent::Traveler(i) => format!("traveler {i}"),
                    Agent::Provider(j) => format!("provider {j}"),
                };
                println!(
                    "{name}: {} grid points, max regret {}",
                    report.points_checked, report.max_regret
                );
                rows.push_str(&format!(
                    "{},{},{},{}\n",
                    name, report.points_checked, report.max_regret, report.violations.len()
                ));
                worst = worst.max(report.max_regret);
                violated |= !report.violations.is_empty();
            }
            if let Some(path) = csv {
                std::fs::write(&path, rows)
                    .map_err(|e| (EXIT_INPUT, format!("cannot write {}: {e}", path.display())))?;
            }
            if violated {
                println!("misreporting pays somewhere: worst regret {worst}");
                Ok(EXIT_VIOLATION)
            } else {
                println!("truth-telling dominates on the grid");
                Ok(EXIT_OK)
            }
        }
        Command::VerifyParticipation(args) => {
            let config = GeneratorConfig {
                seed: args.seed,
                travelers: args.travelers,
                providers: args.providers,
                ..Default::default()
            };
            let report = verify_participation(&config, args.trials)
                .map_err(|e| (EXIT_INPUT, e.to_string()))?;
            println!(
                "{} trials: min utility {}, min transfer {}",
                report.trials, report.min_utility, report.min_transfer
            );
            for v in &report.violations {
                println!("violation (seed {}): {} = {}", v.seed, v.agent, v.value);
            }
            if report.violations.is_empty() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_VIOLATION)
            }
        }
    }
}

fn join_money(values: &[Money]) -> String {
    values.iter().map(Money::to_string).collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap handles --help/--version with success exits itself.
            if err.exit_code() == 0 {
                err.exit();
            }
            eprint!("{err}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
