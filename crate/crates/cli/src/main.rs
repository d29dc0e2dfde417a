use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mdvi_core::algorithms::{theorem_params, Beta, Constants, Regime};
use mdvi_core::garnet::{generate, GarnetParams};
use mdvi_core::harness::{
    reference_value, run_experiment, run_seed_on, save_records, verify_lemmas, AlgorithmSpec, ExperimentSpec,
    MdpSource, Seeds, SweepResult, VerifyConfig,
};
use mdvi_core::TabularMdp;

#[derive(Parser)]
#[command(name = "mdvi", version, about = "Mirror descent value iteration on tabular MDPs")]
struct Cli {
    /// Cap on worker threads for multi-seed commands.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random Garnet MDPs.
    #[command(subcommand)]
    Garnet(GarnetCommand),
    /// Single learning runs that write a per-iteration trace.
    #[command(subcommand)]
    Run(RunCommand),
    /// Run a TOML experiment spec and write records, sweep and resolved config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the error-propagation bounds on sampled runs.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Print the iteration and sample counts prescribed by a guarantee.
    Params(ParamsArgs),
}

#[derive(Subcommand)]
enum GarnetCommand {
    Gen {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        branching: usize,
        #[arg(long)]
        discount: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunCommon {
    #[arg(long)]
    mdp: PathBuf,
    #[arg(long)]
    iters: usize,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace: PathBuf,
    /// Fill the wall_ms column.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum RunCommand {
    Mdvi {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long)]
        alpha: f64,
        /// Inverse temperature, or `inf` for greedy policies.
        #[arg(long, default_value = "inf")]
        beta: Beta,
        /// Use the true transition kernel instead of samples.
        #[arg(long)]
        exact: bool,
        /// Also record the error of the non-stationary policy.
        #[arg(long)]
        nonstationary: bool,
    },
    Qlearning {
        #[command(flatten)]
        common: RunCommon,
        #[arg(long = "rate-exp", default_value_t = 1.0)]
        rate_exp: f64,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    Lemmas {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        /// Number of runs, seeded 0..N.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParamsArgs {
    /// 1: non-stationary policy guarantee, 2: last-policy guarantee.
    #[arg(long)]
    theorem: u8,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    #[arg(long, default_value_t = 1.0)]
    c4: f64,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

enum Status {
    Ok,
    LemmaFailure,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::LemmaFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(command: Command) -> Result<Status> {
    match command {
        Command::Garnet(GarnetCommand::Gen {
            states,
            actions,
            branching,
            discount,
            seed,
            out,
        }) => {
            let mdp = generate(&GarnetParams::new(states, actions, branching, discount, seed))?;
            mdp.save(&out)?;
            println!("wrote {} ({states} states, {actions} actions)", out.display());
        }
        Command::Run(run) => run_single(run)?,
        Command::Sweep { config, out } => {
            let outputs = run_experiment(&config, &out)?;
            let text = std::fs::read_to_string(&outputs.sweep).context("reading sweep.json")?;
            print_sweep(&SweepResult::from_json_str(&text)?);
            println!("records: {}", outputs.records.display());
            println!("sweep: {}", outputs.sweep.display());
            println!("resolved config: {}", outputs.resolved_config.display());
            if let Some(path) = outputs.convergence {
                println!("convergence: {}", path.display());
            }
        }
        Command::Verify(VerifyCommand::Lemmas {
            mdp,
            alpha,
            iters,
            samples,
            seeds,
            delta,
            report,
        }) => {
            let model = TabularMdp::load(&mdp)?;
            let config = VerifyConfig {
                alpha,
                iterations: iters,
                samples_per_update: samples,
                seeds: (0..seeds).collect(),
                delta,
            };
            let result = verify_lemmas(&model, &config)?;
            for lemma in &result.lemmas {
                let verdict = match (lemma.available, lemma.passed()) {
                    (false, _) => "n/a ",
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                };
                let slack = lemma.worst_slack.map_or("-".to_string(), |s| format!("{s:.3e}"));
                println!(
                    "{verdict}  {:<34} checks={:<6} failures={:<4} worst_slack={slack}",
                    lemma.name, lemma.checks, lemma.failures
                );
            }
            println!(
                "s identity residual {:.3e} (tolerance {:.3e})",
                result.s_identity_max_residual, result.s_identity_tolerance
            );
            let rates = &result.violation_rates;
            let fmt = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!(
                "event violation rates over {} runs: E1 {} E2 {:.3} E3 {} E4 {:.3}",
                rates.runs,
                fmt(rates.e1),
                rates.e2,
                fmt(rates.e3),
                rates.e4
            );
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&result)?;
                std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
            if !result.passed {
                return Ok(Status::LemmaFailure);
            }
        }
        Command::Params(args) => {
            let constants = Constants {
                c1: args.c1,
                c2: args.c2,
                c3: args.c3,
                c4: args.c4,
            };
            let p = theorem_params(
                Regime::from_theorem(args.theorem)?,
                args.gamma,
                args.states,
                args.actions,
                args.eps,
                args.delta,
                constants,
            )?;
            for w in &p.warnings {
                eprintln!("warning: {w}");
            }
            if args.json {
                println!("{}", serde_json::to_string_pretty(&p)?);
            } else {
                println!("alpha = {}", p.alpha);
                println!("K = {}", p.iterations);
                println!("M = {}", p.samples_per_update);
                println!("total samples = {}", p.total_samples(args.states, args.actions));
            }
        }
    }
    Ok(Status::Ok)
}

fn run_single(run: RunCommand) -> Result<()> {
    let (common, algorithm, nonstationary) = match run {
        RunCommand::Mdvi {
            common,
            alpha,
            beta,
            exact,
            nonstationary,
        } => {
            let algorithm = AlgorithmSpec::Mdvi {
                alpha,
                beta,
                iterations: common.iters,
                samples_per_update: common.samples,
                exact_mode: exact,
            };
            (common, algorithm, nonstationary)
        }
        RunCommand::Qlearning { common, rate_exp } => {
            let algorithm = AlgorithmSpec::Qlearning {
                iterations: common.iters,
                samples_per_update: common.samples,
                rate_exponent: rate_exp,
            };
            (common, algorithm, false)
        }
    };
    let mut spec = ExperimentSpec {
        name: None,
        errors: vec![f64::MAX],
        seeds: Seeds::List(vec![common.seed]),
        max_samples: None,
        record_every: 1,
        nonstationary,
        timing: common.timing,
        stop_after_all_crossed: false,
        mdp: MdpSource::File {
            path: common.mdp.clone(),
        },
        algorithm,
    };
    spec.normalize()?;
    let mdp = spec.mdp.load(common.seed, Path::new("."))?;
    let v_star = reference_value(&mdp)?;
    let outcome = run_seed_on(&spec, &mdp, &v_star, common.seed)?;
    save_records(&common.trace, &outcome.records)?;
    let last = outcome.records.last().expect("a run records at least k = 0");
    let best = outcome
        .records
        .iter()
        .map(|r| r.sup_error_last)
        .fold(f64::INFINITY, f64::min);
    println!("{}", spec.algorithm.label());
    println!("iterations {}  samples {}", last.k, last.samples);
    println!("final error {:.6e}  best error {best:.6e}", last.sup_error_last);
    if let Some(ns) = last.sup_error_ns {
        println!("final non-stationary error {ns:.6e}");
    }
    println!("trace: {}", common.trace.display());
    Ok(())
}

fn print_sweep(sweep: &SweepResult) {
    println!("{}  ({} seeds)", sweep.algorithm, sweep.seeds.len());
    println!("{:>12} {:>8} {:>8} {:>12} {:>12} {:>12}", "epsilon", "crossed", "censored", "q25", "median", "q75");
    let show = |v: Option<f64>| v.map_or("inf".to_string(), |x| format!("{x:.1}"));
    for s in &sweep.summary {
        println!(
            "{:>12.3e} {:>8} {:>8} {:>12} {:>12} {:>12}",
            s.epsilon,
            s.crossed,
            s.censored,
            show(s.q25),
            show(s.median),
            show(s.q75)
        );
    }
}
