use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use channel_arena::adversaries::{parse_jsonl, replay, MinimizeError, ATTACK_LIBRARY};
use channel_arena::evaluator::playground::{builtin_figure, PlaygroundInstance};
use channel_arena::{
    builtin_scenario, fuzz, minimize_trace, run_scenario, FuzzConfig, GameConfig, GameTrace,
    Params, PartyMutation, Scenario, ScenarioError,
};
use clap::{Args, Parser, Subcommand};

const VIOLATION: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "channel-arena",
    version,
    about = "Adversarial game engine for a two-party payment channel"
)]
struct Cli {
    /// Print per-step violations and extra summaries on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate timing parameters and print both inequalities with their slack.
    CheckParams {
        /// Params JSON file; defaults to (2, 3, 6, 20) with coins (20, 10).
        file: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Replay a scenario file or builtin scenario and stream its JSONL trace.
    Run {
        /// Scenario JSON file, JSONL trace, or builtin name.
        scenario: String,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable the honest party's revocation duty (builtins only).
        #[arg(long)]
        sabotage: bool,
    },
    /// Run a seeded fuzz campaign and write one trace per violating game.
    Fuzz {
        #[arg(long, env = "CHANNEL_ARENA_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        games: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Directory for violation traces.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Disable the honest party's revocation duty.
        #[arg(long)]
        sabotage: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the attack library; sabotaged entries must fail.
    Attacks,
    /// Print the evaluator and extractable value of a UTXO instance.
    Playground {
        /// Instance JSON file or builtin figure name.
        instance: String,
    },
    /// Shrink a failing JSONL trace.
    Minimize {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    delta_wake: Option<u64>,
    #[arg(long)]
    delta_net: Option<u64>,
    #[arg(long)]
    channel_timelock: Option<u64>,
    #[arg(long)]
    channel_closing_time: Option<u64>,
    #[arg(long)]
    coins_a: Option<u64>,
    #[arg(long)]
    coins_b: Option<u64>,
}

impl Overrides {
    fn apply(&self, mut p: Params) -> Params {
        let set = |field: &mut u64, v: Option<u64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut p.delta_wake, self.delta_wake);
        set(&mut p.delta_net, self.delta_net);
        set(&mut p.channel_timelock, self.channel_timelock);
        set(&mut p.channel_closing_time, self.channel_closing_time);
        set(&mut p.initial_coins.a, self.coins_a);
        set(&mut p.initial_coins.b, self.coins_b);
        p
    }
}

/// An error that maps to a non-zero exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: USAGE,
        message: message.to_string(),
    }
}

fn violation(message: impl ToString) -> Failure {
    Failure {
        code: VIOLATION,
        message: message.to_string(),
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::AssertionFailed(_) => violation(e),
        _ => usage(e),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| usage(format!("stdout: {e}"))),
    }
}

fn report_violations(t: &GameTrace, verbose: bool) {
    if !verbose {
        return;
    }
    for r in t.reports.iter().filter(|r| !r.checks.ok) {
        eprintln!("step {}: {}", r.step, r.checks.violations.join(", "));
    }
}

fn check_params(file: Option<&Path>, overrides: &Overrides) -> Result<(), Failure> {
    let base = match file {
        Some(p) => {
            serde_json::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => Params::default(),
    };
    let params = overrides.apply(base);
    for ineq in params.inequalities() {
        println!(
            "{}: {} (lhs={} rhs={} slack={})",
            ineq.constraint,
            ineq.formula,
            ineq.lhs,
            ineq.rhs,
            ineq.slack()
        );
    }
    params.validate().map_err(usage)?;
    println!("ok");
    Ok(())
}

fn load_scenario(arg: &str, sabotage: bool) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        if sabotage {
            return Err(usage("--sabotage applies to builtin scenarios only"));
        }
        let text = read(path)?;
        if path.extension().is_some_and(|e| e == "jsonl") {
            let (header, moves) = parse_jsonl(&text).map_err(|e| usage(format!("{arg}: {e}")))?;
            return Ok(Scenario {
                name: header.name,
                params: header.params,
                honest: header.honest,
                config: header.config,
                moves,
                expected_final: None,
            });
        }
        return Scenario::from_json(&text).map_err(|e| usage(format!("{arg}: {e}")));
    }
    let config = GameConfig {
        party_mutation: sabotage.then_some(PartyMutation::DisableRevocationDuty),
        ..GameConfig::default()
    };
    builtin_scenario(arg, &config).map_err(scenario_failure)
}

fn run(arg: &str, out: Option<&Path>, sabotage: bool, verbose: bool) -> Result<(), Failure> {
    let scenario = load_scenario(arg, sabotage)?;
    // Stream the trace even when the final assertions fail.
    let trace = replay(&scenario.header(), &scenario.moves).map_err(scenario_failure)?;
    write_out(out, &trace.to_jsonl())?;
    report_violations(&trace, verbose);
    run_scenario(&scenario).map_err(scenario_failure)?;
    if !trace.is_clean() {
        return Err(violation(format!(
            "{}: {} violating steps",
            scenario.name,
            trace.violation_count()
        )));
    }
    Ok(())
}

fn run_fuzz(
    cfg: FuzzConfig,
    params: Params,
    out_dir: Option<&Path>,
    verbose: bool,
) -> Result<(), Failure> {
    params.clone().validate().map_err(usage)?;
    let report = fuzz(&cfg, &params);
    println!("{}", report.summary_json());
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        for v in &report.violations {
            let path = dir.join(format!("{}.jsonl", v.trace.header.name));
            fs::write(&path, v.trace.to_jsonl())
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
    }
    if verbose {
        for v in &report.violations {
            eprintln!("game {} step {}: {}", v.game, v.step, v.checks.join(", "));
        }
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(violation(format!(
            "{} violating games",
            report.violation_games()
        )))
    }
}

fn attacks(verbose: bool) -> Result<(), Failure> {
    let mut mismatches = 0;
    for a in ATTACK_LIBRARY {
        let config = GameConfig {
            party_mutation: a.mutation,
            ..GameConfig::default()
        };
        let scenario = builtin_scenario(a.scenario, &config).map_err(scenario_failure)?;
        let (failed, detail) = match run_scenario(&scenario) {
            Ok(t) => {
                report_violations(&t, verbose);
                (
                    !t.is_clean(),
                    format!("{} violating steps", t.violation_count()),
                )
            }
            Err(ScenarioError::AssertionFailed(m)) => (true, m),
            Err(e) => return Err(scenario_failure(e)),
        };
        let as_expected = failed == a.must_fail;
        mismatches += !as_expected as usize;
        println!(
            "{:<18} {:<6} expected {:<6} {}",
            a.name,
            if failed { "fail" } else { "pass" },
            if a.must_fail { "fail" } else { "pass" },
            detail
        );
    }
    if mismatches == 0 {
        Ok(())
    } else {
        Err(violation(format!(
            "{mismatches} attacks with unexpected outcome"
        )))
    }
}

fn playground(arg: &str) -> Result<(), Failure> {
    let path = Path::new(arg);
    let inst = if path.is_file() {
        PlaygroundInstance::from_json(&read(path)?).map_err(usage)?
    } else {
        builtin_figure(arg).map_err(usage)?
    };
    let ev = inst.evaluate().map_err(usage)?;
    let ex = inst.extractable().map_err(usage)?;
    println!("evaluator={ev} ownership={ex}");
    Ok(())
}

fn minimize(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let (header, moves) = parse_jsonl(&read(path)?).map_err(usage)?;
    let trace = replay(&header, &moves).map_err(scenario_failure)?;
    let small = minimize_trace(&trace).map_err(|e| match e {
        MinimizeError::NoViolation => usage(e),
        MinimizeError::CannotReproduce(_) => violation(e),
    })?;
    eprintln!("{} -> {} moves", trace.reports.len(), small.reports.len());
    write_out(out, &small.to_jsonl())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CheckParams { file, overrides } => check_params(file.as_deref(), &overrides),
        Command::Run {
            scenario,
            out,
            sabotage,
        } => run(&scenario, out.as_deref(), sabotage, cli.verbose),
        Command::Fuzz {
            seed,
            games,
            steps,
            out_dir,
            sabotage,
            overrides,
        } => {
            let cfg = FuzzConfig {
                seed,
                max_steps: steps,
                games_count: games,
                party_mutation: sabotage.then_some(PartyMutation::DisableRevocationDuty),
                ..FuzzConfig::default()
            };
            run_fuzz(
                cfg,
                overrides.apply(Params::default()),
                out_dir.as_deref(),
                cli.verbose,
            )
        }
        Command::Attacks => attacks(cli.verbose),
        Command::Playground { instance } => playground(&instance),
        Command::Minimize { trace, out } => minimize(&trace, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
