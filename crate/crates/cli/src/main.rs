//! Command-line front end. Every subcommand is a client of the HTTP
//! service: either a remote one (`--server` / OCSEARCH_SERVER) or a
//! private in-process instance spawned for the duration of the command.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ocsearch_api::{OracleRequest, ReportRequest, RunOverrides, RunRequest};
use ocsearch_client::Client;
use ocsearch_core::circuit::file::parse_circuit;
use ocsearch_core::hyperspace::CircuitModel;
use ocsearch_core::planner::RunConfig;

const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "ocsearch", version, about = "Worst-case operating-condition search")]
struct Cli {
    /// Base URL of a running service; when unset (and OCSEARCH_SERVER is
    /// empty) the command runs against a private in-process service.
    #[arg(long, global = true)]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the search: fixed planning, then adaptive iterations.
    Run(RunArgs),
    /// Compute true per-response extrema of a synthetic circuit.
    Oracle(OracleArgs),
    /// Regenerate the text summary from a stored run log.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Circuit description file.
    #[arg(long)]
    circuit: PathBuf,
    /// Number of independent repetitions; runs seeds 0..N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Simulation budget of the fixed planning stage.
    #[arg(long, default_value_t = 100)]
    fp_budget: usize,
    /// Number of adaptive iterations after fixed planning.
    #[arg(long, default_value_t = 10)]
    ap_iterations: usize,
    /// Exploration weight of the acquisition score.
    #[arg(long)]
    kappa: Option<f64>,
    /// Approximate size of the candidate evaluation set.
    #[arg(long)]
    eval_target: Option<usize>,
    /// Seeds run in parallel; defaults to available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory the artifacts (log.csv, summary.txt) are written to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Circuit description file; must use the synthetic backend.
    #[arg(long)]
    circuit: PathBuf,
    /// Grid points per dimension for the scan; defaults by dimension.
    #[arg(long)]
    density: Option<usize>,
    /// Directory the extrema.toml artifact is written to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Circuit description file the log was produced with.
    #[arg(long)]
    circuit: PathBuf,
    /// Run log to summarize; no simulations are executed.
    #[arg(long)]
    log: PathBuf,
    /// Optional extrema file; adds the error-metrics block.
    #[arg(long)]
    extrema: Option<PathBuf>,
    /// Directory the summary.txt artifact is written to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting async runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(dispatch(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn dispatch(cli: Cli) -> Result<ExitCode> {
    let client = connect(cli.server).await?;
    match cli.command {
        Command::Run(args) => cmd_run(&client, args).await,
        Command::Oracle(args) => cmd_oracle(&client, args).await,
        Command::Report(args) => cmd_report(&client, args).await,
    }
}

async fn connect(server: Option<String>) -> Result<Client> {
    let explicit = server.or_else(|| std::env::var("OCSEARCH_SERVER").ok().filter(|s| !s.is_empty()));
    match explicit {
        Some(url) => Ok(Client::new(url)),
        None => {
            let (addr, _task) = ocsearch_service::spawn_ephemeral()
                .await
                .context("starting in-process service")?;
            Ok(Client::new(format!("http://{addr}")))
        }
    }
}

fn load_model(path: &Path) -> Result<(String, CircuitModel)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading circuit {}", path.display()))?;
    let model = parse_circuit(&text)?;
    Ok((text, model))
}

fn write_artifact(out: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let path = out.join(name);
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

async fn cmd_run(client: &Client, args: RunArgs) -> Result<ExitCode> {
    let (circuit_toml, model) = load_model(&args.circuit)?;

    let simulator_command = std::env::var("OCSEARCH_SIMULATOR_CMD")
        .ok()
        .map(|s| s.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|v| !v.is_empty());
    let jobs = args.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    let overrides = RunOverrides {
        seeds: Some((0..args.seeds).collect()),
        fp_budget: Some(args.fp_budget),
        ap_iterations: Some(args.ap_iterations),
        eval_target: args.eval_target,
        kappa: args.kappa,
        jobs: Some(jobs),
        simulator_command,
    };

    // Check the configuration locally so mistakes fail before any
    // simulation is attempted, with the offending field named.
    let mut config = RunConfig::new(model);
    if let Some(seeds) = &overrides.seeds {
        config.seeds = seeds.clone();
    }
    config.fp_budget = args.fp_budget;
    config.ap_iterations = args.ap_iterations;
    if let Some(v) = args.eval_target {
        config.eval_target = v;
    }
    if let Some(v) = args.kappa {
        config.kappa = v;
    }
    config.jobs = jobs;
    config.validate()?;

    eprintln!(
        "running {} seeds: fp {} + ap {} iterations",
        args.seeds, args.fp_budget, args.ap_iterations
    );
    let accepted = client
        .submit_run(&RunRequest {
            circuit_toml,
            overrides,
        })
        .await?;
    let status = client.wait_until_done(accepted.id).await?;
    if let Some(message) = status.error {
        bail!("run failed: {message}");
    }

    let log = client.run_log(accepted.id).await?;
    let summary = client.run_summary(accepted.id).await?;
    write_artifact(&args.out, "log.csv", &log)?;
    write_artifact(&args.out, "summary.txt", &summary)?;
    print!("{summary}");

    if let Some(failed) = status.failed_seeds {
        if failed > 0 {
            eprintln!("warning: {failed} seed(s) aborted; see summary");
        }
    }
    Ok(if status.violations_found == Some(true) {
        ExitCode::from(EXIT_VIOLATION)
    } else {
        ExitCode::SUCCESS
    })
}

async fn cmd_oracle(client: &Client, args: OracleArgs) -> Result<ExitCode> {
    let (circuit_toml, model) = load_model(&args.circuit)?;
    if !model.backend.is_synthetic() {
        bail!("oracle extrema require a synthetic backend; {} uses an external simulator", model.name);
    }
    let response = client
        .oracle(&OracleRequest {
            circuit_toml,
            density: args.density,
        })
        .await?;
    let path = write_artifact(&args.out, "extrema.toml", &response.extrema_toml)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

async fn cmd_report(client: &Client, args: ReportArgs) -> Result<ExitCode> {
    let (circuit_toml, _) = load_model(&args.circuit)?;
    let log_csv = std::fs::read_to_string(&args.log)
        .with_context(|| format!("reading log {}", args.log.display()))?;
    let extrema_toml = match &args.extrema {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .with_context(|| format!("reading extrema {}", path.display()))?,
        ),
        None => None,
    };
    let response = client
        .report(&ReportRequest {
            circuit_toml,
            log_csv,
            extrema_toml,
        })
        .await?;
    write_artifact(&args.out, "summary.txt", &response.summary)?;
    print!("{}", response.summary);
    Ok(ExitCode::SUCCESS)
}
