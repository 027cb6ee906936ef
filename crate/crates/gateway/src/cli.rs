use crate::server::{serve, ServeOptions};
use clap::{Args, Parser, Subcommand};
use hubsim::inputs::{has_errors, load_inputs, validate_inputs, InputPaths, LoadedInputs};
use hubsim::sim::{
    init_world, parse_checkpoints, parse_input_log, run_headless, run_replay, write_checkpoints,
    write_input_log, ReplayError, ReplayOutcome, SimConfig, SimContext,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DIVERGED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hubsim",
    version,
    about = "Traffic hub simulator with a guided barrier tour"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve WebSocket sessions on /session plus /health, /site and /scenario.
    Serve {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of static client files served from /.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Save every session's input log and checkpoints into this directory.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Run without a client, driving the avatar from a script.
    Run {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value_t = 24_000)]
        ticks: u64,
        /// Input log (one JSON frame per line). Missing ticks use neutral input.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "events.ndjson")]
        out_events: PathBuf,
        #[arg(long, default_value = "checkpoints.tsv")]
        out_checkpoints: PathBuf,
        /// Where to write the consumed input log.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Check all input documents and print a report.
    Validate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run a recorded input log and compare checkpoint hashes.
    Replay {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        record: PathBuf,
        #[arg(long, alias = "out-checkpoints")]
        checkpoints: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long, default_value = "fixtures/site.json")]
    pub site: PathBuf,
    #[arg(long, default_value = "fixtures/tour.json")]
    pub scenario: PathBuf,
    #[arg(long, default_value = "fixtures/schedule.json")]
    pub schedule: PathBuf,
    #[arg(long, default_value = "fixtures/catalog.json")]
    pub catalog: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl InputArgs {
    pub fn paths(&self) -> InputPaths {
        InputPaths {
            site: self.site.clone(),
            scenario: self.scenario.clone(),
            schedule: self.schedule.clone(),
            catalog: self.catalog.clone(),
        }
    }
}

/// Load and validate; on failure print to stderr and return the exit code.
fn prepare(args: &InputArgs) -> Result<(LoadedInputs, Arc<SimContext>), u8> {
    let loaded = load_inputs(&args.paths(), SimConfig::default()).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })?;
    let findings = validate_inputs(&loaded.inputs);
    if has_errors(&findings) {
        for f in &findings {
            eprintln!("error: {}: {}", f.source, f.message);
        }
        return Err(EXIT_INVALID);
    }
    let ctx = SimContext::new(loaded.inputs.clone()).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })?;
    Ok((loaded, Arc::new(ctx)))
}

fn read_text(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_INVALID
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), u8> {
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_INVALID
    })
}

fn cmd_run(
    inputs: &InputArgs,
    ticks: u64,
    script: Option<&Path>,
    out_events: &Path,
    out_checkpoints: &Path,
    record: Option<&Path>,
) -> Result<(), u8> {
    let (_, ctx) = prepare(inputs)?;
    let frames = match script {
        Some(p) => parse_input_log(&read_text(p)?).map_err(|e| {
            eprintln!("error: {}: {e}", p.display());
            EXIT_FORMAT
        })?,
        None => Vec::new(),
    };
    let mut world = init_world(ctx, inputs.seed).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })?;
    let run = run_headless(&mut world, &frames, ticks);
    let mut events = String::new();
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &run.events {
        events.push_str(&serde_json::to_string(e).expect("event serializes"));
        events.push('\n');
        *by_kind.entry(e.body.name()).or_default() += 1;
    }
    write_file(out_events, &events)?;
    write_file(out_checkpoints, &write_checkpoints(&run.checkpoints))?;
    if let Some(p) = record {
        write_file(p, &write_input_log(&run.log))?;
    }
    for (kind, n) in &by_kind {
        println!("{kind}={n}");
    }
    println!(
        "ticks={} events={} tour_completed={}",
        world.state.tick,
        run.events.len(),
        world.state.tour.completed
    );
    Ok(())
}

fn cmd_validate(inputs: &InputArgs, json: bool) -> Result<(), u8> {
    let loaded = match load_inputs(&inputs.paths(), SimConfig::default()) {
        Ok(l) => l,
        Err(e) => {
            if json {
                let report = serde_json::json!({"ok": false, "findings": [
                    {"source": "load", "severity": "error", "message": e.to_string()}
                ]});
                println!("{report}");
            } else {
                eprintln!("error: {e}");
            }
            return Err(EXIT_INVALID);
        }
    };
    let findings = validate_inputs(&loaded.inputs);
    let ok = !has_errors(&findings);
    if json {
        println!("{}", serde_json::json!({"ok": ok, "findings": findings}));
    } else {
        for f in &findings {
            let subject = f
                .subject
                .as_deref()
                .map(|s| format!(" `{s}`"))
                .unwrap_or_default();
            println!("{:?} {}{}: {}", f.severity, f.source, subject, f.message);
        }
        println!("{}", if ok { "valid" } else { "invalid" });
    }
    if ok {
        Ok(())
    } else {
        Err(EXIT_INVALID)
    }
}

fn cmd_replay(inputs: &InputArgs, record: &Path, checkpoints: &Path) -> Result<(), u8> {
    let (_, ctx) = prepare(inputs)?;
    let log = parse_input_log(&read_text(record)?).map_err(|e| {
        eprintln!("error: {}: {e}", record.display());
        EXIT_FORMAT
    })?;
    let points = parse_checkpoints(&read_text(checkpoints)?).map_err(|e| {
        eprintln!("error: {}: {e}", checkpoints.display());
        EXIT_FORMAT
    })?;
    match run_replay(ctx, inputs.seed, &log, &points) {
        Ok(ReplayOutcome::Pass) => {
            println!(
                "replay ok: {} ticks, {} checkpoints",
                log.len(),
                points.len()
            );
            Ok(())
        }
        Ok(ReplayOutcome::Fail {
            tick,
            expected,
            actual,
        }) => {
            println!("diverged at tick {tick}: expected {expected:016x} actual {actual:016x}");
            Err(EXIT_DIVERGED)
        }
        Err(e @ (ReplayError::LogGap { .. } | ReplayError::CheckpointBeyondLog { .. })) => {
            eprintln!("error: {e}");
            Err(EXIT_FORMAT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_INVALID)
        }
    }
}

fn cmd_serve(
    inputs: &InputArgs,
    port: u16,
    static_dir: Option<PathBuf>,
    record_dir: Option<PathBuf>,
) -> Result<(), u8> {
    let (loaded, ctx) = prepare(inputs)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })?;
    let opts = ServeOptions {
        ctx,
        seed: inputs.seed,
        site_bytes: loaded.site_bytes,
        scenario_bytes: loaded.scenario_bytes,
        static_dir,
        record_dir,
    };
    runtime
        .block_on(async move {
            let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
            tracing::info!(port, "listening");
            serve(listener, opts).await
        })
        .map_err(|e| {
            eprintln!("error: {e}");
            EXIT_INVALID
        })
}

/// Run one parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Serve {
            inputs,
            port,
            static_dir,
            record,
        } => cmd_serve(inputs, *port, static_dir.clone(), record.clone()),
        Command::Run {
            inputs,
            ticks,
            script,
            out_events,
            out_checkpoints,
            record,
        } => cmd_run(
            inputs,
            *ticks,
            script.as_deref(),
            out_events,
            out_checkpoints,
            record.as_deref(),
        ),
        Command::Validate { inputs, json } => cmd_validate(inputs, *json),
        Command::Replay {
            inputs,
            record,
            checkpoints,
        } => cmd_replay(inputs, record, checkpoints),
    };
    ExitCode::from(result.err().unwrap_or(EXIT_OK))
}

/// Install the log subscriber, filtered by `SIM_LOG` (default `warn`).
pub fn init_logging() {
    let filter = std::env::var("SIM_LOG").unwrap_or_else(|_| "warn".to_string());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(filter))
        .with_writer(std::io::stderr)
        .try_init();
}
