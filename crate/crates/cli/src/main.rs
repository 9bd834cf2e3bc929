//! `riskdevs`: batch risk assessments from JSON models, scenarios and grids.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use riskdevs::adversarial::{minimax_report, minimax_risk};
use riskdevs::montecarlo::{estimate_risk, SamplerConfig};
use riskdevs::num::Duration;
use riskdevs::powergrid::{compile_grid, load_grid, AttackMode, GridBehavior};
use riskdevs::risk::{additive_criticality, aggregate_risk_with, correlated_criticality, AggregateOptions, CriticalityFunction};
use riskdevs::{
    build_tree_with, load_model, Diagnostic, Error, Language, ModelBehavior, Rational, RiskReport, Scenario,
    TabularModel, TreeConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_EXPLOSION: u8 = 3;

#[derive(Parser)]
#[command(name = "riskdevs", version, about = "Risk assessment over simulation trees of stochastic DEVS models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the risk of a model or grid and write a JSON report.
    Assess(RunArgs),
    /// Check inputs without running; prints diagnostics as JSON.
    Validate(RunArgs),
    /// Build the simulation tree and write its textual dump.
    DumpTree(RunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RunMode {
    Exact,
    Minimax,
    Montecarlo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackArg {
    Stochastic,
    Adversarial,
}

#[derive(Args)]
struct RunArgs {
    /// Tabular model JSON file.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    model: Option<PathBuf>,
    /// Power grid JSON file.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Scenario JSON file (tabular models only).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: RunMode,
    /// Horizon override, e.g. `3` or `5/2`.
    #[arg(long, value_parser = parse_horizon)]
    horizon: Option<Rational>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = riskdevs::risk::DEFAULT_TOP_K)]
    top_k: usize,
    /// Also print the simulation tree to standard error.
    #[arg(long)]
    tree_dump: bool,
    #[arg(long, default_value_t = riskdevs::tree::DEFAULT_NODE_LIMIT)]
    explosion_limit: usize,
    #[arg(long, env = "RISKDEVS_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Grid attacker model; defaults to adversarial for minimax, stochastic otherwise.
    #[arg(long, value_enum)]
    attack_mode: Option<AttackArg>,
}

fn parse_horizon(text: &str) -> Result<Rational, String> {
    match Duration::parse(text).map_err(|e| e.to_string())? {
        Duration::Finite(h) if h > Rational::from_integer(0.into()) => Ok(h),
        _ => Err("horizon must be a positive finite number".into()),
    }
}

enum Failure {
    Usage(String),
    Input(Vec<(String, Diagnostic)>),
    Explosion(String),
}

impl Failure {
    fn engine(source: &str, err: Error) -> Self {
        match err {
            Error::ExplosionLimit { .. } => Failure::Explosion(err.to_string()),
            other => Failure::Input(other.diagnostics().into_iter().map(|d| (source.to_string(), d)).collect()),
        }
    }
}

#[derive(Serialize)]
struct Located {
    file: String,
    path: String,
    message: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Assess(args) => prepare(args).and_then(|()| assess(args)),
        Command::DumpTree(args) => prepare(args).and_then(|()| dump_tree(args)),
        Command::Validate(args) => prepare(args).and_then(|()| validate(args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(diags)) => {
            for (file, d) in diags {
                eprintln!("error: {file}: {d}");
            }
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Explosion(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_EXPLOSION)
        }
    }
}

fn prepare(args: &RunArgs) -> Result<(), Failure> {
    let montecarlo = args.mode == RunMode::Montecarlo;
    if montecarlo != args.samples.is_some() || montecarlo != args.seed.is_some() {
        return Err(Failure::Usage(
            "--samples and --seed are required with --mode montecarlo and rejected otherwise".into(),
        ));
    }
    if args.grid.is_some() {
        if args.scenario.is_some() {
            return Err(Failure::Usage("--scenario cannot be combined with --grid; use --horizon".into()));
        }
        if args.horizon.is_none() {
            return Err(Failure::Usage("--grid requires --horizon".into()));
        }
    } else {
        if args.scenario.is_none() {
            return Err(Failure::Usage("--model requires --scenario".into()));
        }
        if args.attack_mode.is_some() {
            return Err(Failure::Usage("--attack-mode applies to --grid only".into()));
        }
    }
    if let Some(threads) = args.threads {
        riskdevs::par::configure_threads(threads as usize).map_err(Failure::Usage)?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        Failure::Input(vec![(path.display().to_string(), Diagnostic::new("", format!("cannot read file: {e}")))])
    })
}

fn parse<T>(path: &Path, f: impl FnOnce(&str) -> riskdevs::Result<T>) -> Result<T, Failure> {
    f(&read(path)?).map_err(|e| Failure::engine(&path.display().to_string(), e))
}

fn emit(args: &RunArgs, text: &str) -> Result<(), Failure> {
    match &args.output {
        Some(path) => fs::write(path, format!("{}\n", text.trim_end())).map_err(|e| {
            Failure::Input(vec![(path.display().to_string(), Diagnostic::new("", format!("cannot write file: {e}")))])
        }),
        None => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", text.trim_end());
            Ok(())
        }
    }
}

struct TabularInputs {
    model: TabularModel,
    scenario: Scenario,
    model_file: String,
}

fn tabular_inputs(args: &RunArgs) -> Result<TabularInputs, Failure> {
    let model_path = args.model.as_deref().expect("checked by clap");
    let scenario_path = args.scenario.as_deref().expect("checked in prepare");
    let model = parse(model_path, load_model)?;
    let mut scenario = parse(scenario_path, Scenario::from_json)?;
    let scenario_file = scenario_path.display().to_string();
    if let Some(h) = &args.horizon {
        scenario = scenario
            .with_horizon(h.clone())
            .map_err(|e| Failure::engine(&scenario_file, e))?;
    }
    Ok(TabularInputs {
        model,
        scenario,
        model_file: model_path.display().to_string(),
    })
}

fn grid_inputs(args: &RunArgs) -> Result<(GridBehavior, Scenario, String), Failure> {
    let path = args.grid.as_deref().expect("checked by clap");
    let file = path.display().to_string();
    let spec = parse(path, load_grid)?;
    let mode = match args.attack_mode {
        Some(AttackArg::Adversarial) => AttackMode::Adversarial,
        Some(AttackArg::Stochastic) => AttackMode::Stochastic,
        None if args.mode == RunMode::Minimax => AttackMode::Adversarial,
        None => AttackMode::Stochastic,
    };
    let grid = compile_grid(spec, mode).map_err(|e| Failure::engine(&file, e))?;
    let horizon = args.horizon.clone().expect("checked in prepare");
    let scenario = grid.scenario(horizon).map_err(|e| Failure::engine(&file, e))?;
    Ok((grid, scenario, file))
}

fn tree_config(args: &RunArgs) -> TreeConfig {
    TreeConfig {
        node_limit: args.explosion_limit,
        ..TreeConfig::default()
    }
}

fn report<B: ModelBehavior, C: CriticalityFunction<B::State> + ?Sized>(
    args: &RunArgs,
    behavior: &B,
    initial: B::State,
    scenario: &Scenario,
    c: &C,
    source: &str,
    metadata: impl FnOnce(&Language<'_, B>) -> riskdevs::Result<std::collections::BTreeMap<String, serde_json::Value>>,
) -> Result<RiskReport, Failure> {
    let fail = |e| Failure::engine(source, e);
    if args.mode == RunMode::Montecarlo {
        let config = SamplerConfig::new(args.samples.expect("checked"), args.seed.expect("checked"));
        return estimate_risk(behavior, initial, scenario, c, &config).map_err(fail);
    }
    let language = build_tree_with(behavior, initial, scenario, &tree_config(args)).map_err(fail)?;
    if args.tree_dump {
        eprint!("{}", language.dump());
    }
    let mut report = if args.mode == RunMode::Minimax {
        let result = minimax_risk(&language, c).map_err(fail)?;
        minimax_report(&language, c, &result, Some(args.top_k)).map_err(fail)?
    } else {
        let options = AggregateOptions {
            top_k: args.top_k,
            ..AggregateOptions::default()
        };
        aggregate_risk_with(&language, c, &options).map_err(fail)?
    };
    report.metadata.extend(metadata(&language).map_err(fail)?);
    Ok(report)
}

fn assess(args: &RunArgs) -> Result<(), Failure> {
    let report = if args.grid.is_some() {
        let (grid, scenario, file) = grid_inputs(args)?;
        let c = grid.grid_criticality().map_err(|e| Failure::engine(&file, e))?;
        report(args, &grid, grid.initial_state(), &scenario, &c, &file, |lang| {
            grid.metadata(lang)
        })?
    } else {
        let inputs = tabular_inputs(args)?;
        let b = riskdevs::behavior_of(&inputs.model);
        let c = correlated_criticality(&b, Box::new(additive_criticality(&b)), inputs.model.correlations())
            .map_err(|e| Failure::engine(&inputs.model_file, e))?;
        report(args, &b, inputs.model.initial(), &inputs.scenario, &c, &inputs.model_file, |_| {
            Ok(Default::default())
        })?
    };
    emit(args, &report.to_json())
}

fn dump_tree(args: &RunArgs) -> Result<(), Failure> {
    let dump = if args.grid.is_some() {
        let (grid, scenario, file) = grid_inputs(args)?;
        build_tree_with(&grid, grid.initial_state(), &scenario, &tree_config(args))
            .map_err(|e| Failure::engine(&file, e))?
            .dump()
    } else {
        let inputs = tabular_inputs(args)?;
        let b = riskdevs::behavior_of(&inputs.model);
        build_tree_with(&b, inputs.model.initial(), &inputs.scenario, &tree_config(args))
            .map_err(|e| Failure::engine(&inputs.model_file, e))?
            .dump()
    };
    emit(args, dump.trim_end())
}

fn validate(args: &RunArgs) -> Result<(), Failure> {
    let diagnostics = match collect_diagnostics(args) {
        Ok(found) => found,
        Err(Failure::Input(found)) => found,
        Err(other) => return Err(other),
    };
    let located: Vec<Located> = diagnostics
        .iter()
        .map(|(file, d)| Located {
            file: file.clone(),
            path: d.path.clone(),
            message: d.message.clone(),
        })
        .collect();
    emit(args, &serde_json::to_string_pretty(&located).expect("diagnostics serialize"))?;
    if located.is_empty() {
        Ok(())
    } else {
        Err(Failure::Input(diagnostics))
    }
}

fn collect_diagnostics(args: &RunArgs) -> Result<Vec<(String, Diagnostic)>, Failure> {
    let mut found = Vec::new();
    if args.grid.is_some() {
        let (grid, _, file) = grid_inputs(args)?;
        if args.mode == RunMode::Montecarlo && grid.mode() == AttackMode::Adversarial {
            found.push((
                file,
                Diagnostic::new("", "adversarial grids contain decision states and cannot be sampled"),
            ));
        }
        return Ok(found);
    }
    let model_path = args.model.as_deref().expect("checked by clap");
    let scenario_path = args.scenario.as_deref().expect("checked in prepare");
    let model = parse(model_path, load_model);
    let scenario = parse(scenario_path, Scenario::from_json);
    let (model, scenario) = match (model, scenario) {
        (Ok(m), Ok(s)) => (m, s),
        (m, s) => {
            for err in [m.err(), s.err()].into_iter().flatten() {
                if let Failure::Input(d) = err {
                    found.extend(d);
                }
            }
            return Ok(found);
        }
    };
    let model_file = model_path.display().to_string();
    let scenario_file = scenario_path.display().to_string();
    let b = riskdevs::behavior_of(&model);
    found.extend(scenario.check_events(&b).into_iter().map(|d| (scenario_file.clone(), d)));
    if let Err(e) = correlated_criticality(&b, Box::new(additive_criticality(&b)), model.correlations()) {
        found.extend(e.diagnostics().into_iter().map(|d| (model_file.clone(), d)));
    }
    for q in model.zero_delay_cycles() {
        found.push((
            model_file.clone(),
            Diagnostic::new(
                format!("states.{}", model.name(q)),
                "state lies on a cycle of zero-lifetime transitions",
            ),
        ));
    }
    if args.mode == RunMode::Montecarlo {
        for q in model.reachable() {
            let spec = &model.states()[q.index()];
            if spec.role.is_decision() && model.internal(q).is_some() {
                found.push((
                    model_file.clone(),
                    Diagnostic::new(
                        format!("states.{}", spec.name),
                        format!("{} decision state cannot be sampled; use --mode minimax", spec.role),
                    ),
                ));
            }
        }
    }
    Ok(found)
}
