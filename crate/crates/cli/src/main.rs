//! Command-line driver. Experiments always run through the HTTP service:
//! either a remote one (`--server`) or an embedded instance on a loopback
//! port, so the CLI exercises the same path either way.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hemocomm_api::ExperimentSpec;
use hemocomm_client::Client;
use hemocomm_core::experiment::ExperimentKind;

#[derive(Parser)]
#[command(
    name = "hemocomm",
    version,
    about = "Particle-resolved molecular communication experiments in a blood vessel"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Start the experiment service.
    Serve(ServeArgs),
    /// Parse and validate a configuration file, printing the resolved form.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Directory for job outputs.
    #[arg(long, default_value = "hemocomm-jobs")]
    output_root: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which experiment to run.
    #[arg(long, value_name = "impulse|trace|sweep|frame")]
    experiment: Option<String>,
    /// Frame bits, e.g. 101.
    #[arg(long)]
    bits: Option<String>,
    /// Random seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count override (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Force deterministic mode.
    #[arg(long)]
    deterministic: bool,
    /// Where to write the outputs.
    #[arg(long, default_value = "hemocomm-out")]
    output_dir: PathBuf,
    /// Simulated duration override, microseconds.
    #[arg(long)]
    duration_us: Option<f64>,
    /// Analysis horizon, microseconds (defaults to the duration).
    #[arg(long)]
    horizon_us: Option<f64>,
    /// Number of replicates (replicate k runs on stream (seed, k)).
    #[arg(long)]
    replicates: Option<usize>,
    /// Delay-line counts for sweep experiments, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep_p: Vec<usize>,
    /// Thresholds for sweep experiments, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep_th: Vec<u64>,
    /// Run against an existing service instead of the embedded one.
    #[arg(long)]
    server: Option<String>,
    /// Poll interval while waiting for the job, milliseconds.
    #[arg(long, default_value_t = 500)]
    poll_ms: u64,
}

fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => bail!("bit string may only contain 0 and 1, found {other:?}"),
        })
        .collect()
}

fn parse_kind(text: &str) -> Result<ExperimentKind> {
    Ok(match text {
        "impulse" => ExperimentKind::Impulse,
        "trace" => ExperimentKind::Trace,
        "sweep" => ExperimentKind::Sweep,
        "frame" => ExperimentKind::Frame,
        other => bail!("unknown experiment {other:?} (expected impulse|trace|sweep|frame)"),
    })
}

fn load_config_file(path: &Option<PathBuf>) -> Result<hemocomm_core::SimulationConfig> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            hemocomm_core::load_config(&text).with_context(|| format!("in {}", path.display()))
        }
        None => Ok(hemocomm_core::SimulationConfig::default()),
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let kind = parse_kind(
        args.experiment
            .as_deref()
            .context("--experiment is required (impulse|trace|sweep|frame)")?,
    )?;
    let mut config = load_config_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if args.deterministic {
        config.deterministic = true;
    }
    if let Some(d) = args.duration_us {
        config.duration_us = d;
    }
    let mut spec = ExperimentSpec::new(kind, config);
    if let Some(bits) = &args.bits {
        spec.bits = parse_bits(bits)?;
        if kind == ExperimentKind::Frame {
            spec.config.encoder.frame_bits = spec.bits.len();
            spec.config.chain.frame_bits = spec.bits.len();
        }
    }
    if let Some(h) = args.horizon_us {
        spec.horizon_us = Some(h);
    }
    if let Some(r) = args.replicates {
        spec.replicates = r;
    }
    if !args.sweep_p.is_empty() {
        spec.sweep_delay_lines = args.sweep_p.clone();
    }
    if !args.sweep_th.is_empty() {
        spec.sweep_thresholds = args.sweep_th.clone();
    }
    spec.validate()?;
    Ok(spec)
}

async fn run_experiment(args: RunArgs) -> Result<()> {
    let spec = build_spec(&args)?;

    // Without --server, bring up an embedded service on a loopback port and
    // talk to it over HTTP like any other client.
    let (base_url, _job_root) = match &args.server {
        Some(url) => (url.clone(), None),
        None => {
            let job_root = tempfile_dir(&args.output_dir)?;
            let (tx, rx) = tokio::sync::oneshot::channel();
            let root = job_root.clone();
            tokio::spawn(async move {
                let bound = |addr: SocketAddr| {
                    let _ = tx.send(addr);
                };
                if let Err(e) =
                    hemocomm_service::serve("127.0.0.1:0".parse().unwrap(), root, bound).await
                {
                    eprintln!("embedded service failed: {e}");
                }
            });
            let addr = rx.await.context("embedded service did not start")?;
            (format!("http://{addr}"), Some(job_root))
        }
    };

    let client = Client::new(base_url);
    let job = client.submit(&spec).await?;
    eprintln!("job {job} submitted ({})", spec.kind);
    let mut last_pct = u64::MAX;
    let info = client
        .wait(job, Duration::from_millis(args.poll_ms), |done, total| {
            let Some(pct) = (done * 100).checked_div(total) else {
                return;
            };
            if pct != last_pct {
                eprintln!("progress: {pct}%");
                last_pct = pct;
            }
        })
        .await?;
    let written = client.fetch_outputs(job, &args.output_dir).await?;
    if let Some(summary) = info.summary {
        eprintln!(
            "done in {:.1}s: {} assimilations, max per cell {}",
            summary.wall_clock_s, summary.measured.total_assimilated, summary.measured.max_assimilated_per_cell
        );
    }
    println!("{}", args.output_dir.display());
    eprintln!("{} files written", written.len());
    Ok(())
}

/// Scratch root for the embedded service's job storage.
fn tempfile_dir(output_dir: &std::path::Path) -> Result<PathBuf> {
    let dir = output_dir.join(".jobs");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

async fn serve(args: ServeArgs) -> Result<()> {
    std::fs::create_dir_all(&args.output_root)
        .with_context(|| format!("creating {}", args.output_root.display()))?;
    hemocomm_service::serve(args.bind, args.output_root, |addr| {
        println!("listening on http://{addr}");
    })
    .await?;
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config = hemocomm_core::load_config(&text)?;
    print!("{}", config.to_toml());
    Ok(())
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "hemocomm=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Serve(args)) => serve(args).await,
        Some(Command::Validate(args)) => validate(args),
        None => run_experiment(cli.run).await,
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
