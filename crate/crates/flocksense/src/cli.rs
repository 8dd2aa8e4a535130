//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 validation or invariant failure (including I/O
//! problems), 2 usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::parse_scenario;
use crate::engine::{run, RNG_ID};
use crate::error::Result;
use crate::metrics::{compute_tick_metrics, detection_summary, TickMetrics};
use crate::plot::{plot_tracks, PlotStyle};
use crate::trace::{export_trace, parse_trace, check_trace, TraceFormat, TraceMeta};

#[derive(Parser)]
#[command(
    name = "flocksense",
    version,
    about = "Deterministic flocking-swarm simulation monitored by a proximity-sensor network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and optionally write trace, metrics, and plot files
    Run {
        /// Scenario document (flat key = value lines)
        scenario: PathBuf,
        /// Write the run trace here (.jsonl for JSONL, anything else for CSV)
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write per-tick metrics CSV here
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Write an SVG plot here
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Plot style (defaults to tracks)
        #[arg(long, value_enum)]
        style: Option<StyleArg>,
    },
    /// Re-validate every runtime invariant over a stored trace
    Check {
        /// Trace file produced by `run --trace`
        trace: PathBuf,
    },
    /// Recompute per-tick metrics from a stored trace (CSV on stdout)
    Metrics {
        /// Trace file produced by `run --trace`
        trace: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StyleArg {
    Tracks,
    Snapshot,
}

impl From<StyleArg> for PlotStyle {
    fn from(style: StyleArg) -> Self {
        match style {
            StyleArg::Tracks => PlotStyle::Tracks,
            StyleArg::Snapshot => PlotStyle::Snapshot,
        }
    }
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own help/version output; usage problems are
            // exit code 2, help/version requests are success.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };

    let outcome = match cli.command {
        Command::Run {
            scenario,
            trace,
            metrics,
            plot,
            style,
        } => cmd_run(&scenario, trace, metrics, plot, style),
        Command::Check { trace } => cmd_check(&trace),
        Command::Metrics { trace } => cmd_metrics(&trace),
    };

    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn cmd_run(
    scenario_path: &Path,
    trace_flag: Option<PathBuf>,
    metrics_flag: Option<PathBuf>,
    plot_flag: Option<PathBuf>,
    style_flag: Option<StyleArg>,
) -> Result<i32> {
    let text = std::fs::read_to_string(scenario_path)?;
    let scenario = parse_scenario(&text)?;
    let config = scenario.sim;

    let trace_path = trace_flag.or(scenario.out.trace);
    let metrics_path = metrics_flag.or(scenario.out.metrics);
    let plot_path = plot_flag.or(scenario.out.plot);
    let style = style_flag
        .map(PlotStyle::from)
        .or(scenario.out.plot_style)
        .unwrap_or(PlotStyle::Tracks);

    let output = run(&config)?;
    let meta = TraceMeta {
        rng: RNG_ID.to_string(),
        config,
    };

    if let Some(path) = &trace_path {
        let format = format_for(path);
        let document = export_trace(&meta, &output.sensors, &output.traces, format)?;
        std::fs::write(path, document)?;
        println!("trace written to {}", path.display());
    }

    let metric_rows: Vec<TickMetrics> = output
        .traces
        .iter()
        .map(|row| compute_tick_metrics(row, &config.flock, &config.bounds))
        .collect();

    if let Some(path) = &metrics_path {
        std::fs::write(path, metrics_csv(&metric_rows))?;
        println!("metrics written to {}", path.display());
    }

    if let Some(path) = &plot_path {
        let svg = plot_tracks(&output.traces, &output.sensors, &config.bounds, style)?;
        std::fs::write(path, svg)?;
        println!("plot written to {}", path.display());
    }

    println!(
        "ran {} ticks: {} boids, {} sensors, seed {}",
        config.ticks, config.n_boids, config.n_sensors, config.seed
    );
    if let Some(last) = metric_rows.last() {
        println!(
            "final tick {}: polarization {:.6}, mean flockmates {:.6}, components {}, component polarization {:.6}",
            last.tick,
            last.polarization,
            last.mean_flockmates,
            last.n_components,
            last.mean_component_polarization
        );
    }
    if let Ok(summary) = detection_summary(&output.traces) {
        let active = summary.iter().filter(|s| s.detection_ticks > 0).count();
        println!("sensors that detected at least once: {active}/{}", summary.len());
    }

    if output.violations.is_empty() {
        Ok(0)
    } else {
        for violation in &output.violations {
            eprintln!("violation: {violation}");
        }
        eprintln!("{} invariant violation(s) recorded", output.violations.len());
        Ok(1)
    }
}

fn cmd_check(path: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(path)?;
    let parsed = parse_trace(&text)?;
    let violations = check_trace(&parsed);
    if violations.is_empty() {
        println!(
            "ok: {} tick(s), {} boid(s), {} sensor(s), all invariants hold",
            parsed.ticks.len(),
            parsed.meta.config.n_boids,
            parsed.deployment.len()
        );
        Ok(0)
    } else {
        for violation in &violations {
            eprintln!("violation: {violation}");
        }
        eprintln!("{} invariant violation(s)", violations.len());
        Ok(1)
    }
}

fn cmd_metrics(path: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(path)?;
    let parsed = parse_trace(&text)?;
    let config = parsed.meta.config;
    let rows: Vec<TickMetrics> = parsed
        .to_tick_traces()
        .iter()
        .map(|row| compute_tick_metrics(row, &config.flock, &config.bounds))
        .collect();
    print!("{}", metrics_csv(&rows));
    Ok(0)
}

fn format_for(path: &Path) -> TraceFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => TraceFormat::Jsonl,
        _ => TraceFormat::Csv,
    }
}

fn metrics_csv(rows: &[TickMetrics]) -> String {
    let mut out = String::from(
        "tick,polarization,mean_flockmates,n_components,mean_component_polarization\n",
    );
    for m in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{:.6}",
            m.tick, m.polarization, m.mean_flockmates, m.n_components, m.mean_component_polarization
        )
        .expect("string write");
    }
    out
}
