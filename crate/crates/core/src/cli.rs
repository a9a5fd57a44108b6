//! Command-line entry points. Exit codes: 0 success, 1 run failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::checks;
use crate::integrator::run_scenario;
use crate::output::{read_trace, stability_csv, trace_records, write_run_outputs};
use crate::plot::{render_plots, PlotPlan};
use crate::scenario::{load_scenario, OutputFormat, ScenarioConfig};
use crate::stability::{stability_map, DEFAULT_WAVENUMBERS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mixflow", version, about = "Two-class mixed traffic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, trace and plots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.directory` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override snapshot times, e.g. `0,1,20,40,60`.
        #[arg(long, value_delimiter = ',')]
        snapshots: Option<Vec<f64>>,
    },
    /// Sweep linear stability over a (delta, rho0) grid and write CSV.
    Stability {
        #[arg(long)]
        config: PathBuf,
        /// `start:end:count`
        #[arg(long)]
        delta: Sweep,
        /// `start:end:count`
        #[arg(long)]
        rho: Sweep,
        /// Wavenumbers in 1/m.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the solver self-checks against a scenario's parameters.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Render SVG plots from a trace file.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Evenly spaced values `start:end:count`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.end
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:end:count, got `{s}`"));
        };
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let count = n.parse::<usize>().map_err(|e| format!("`{n}`: {e}"))?;
        if count == 0 {
            return Err("count must be at least 1".into());
        }
        Ok(Self {
            start: num(a)?,
            end: num(b)?,
            count,
        })
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, String> {
    load_scenario(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn simulate(
    config: PathBuf,
    out: Option<PathBuf>,
    snapshots: Option<Vec<f64>>,
) -> Result<(), String> {
    let mut config = load(&config)?;
    let out = out
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .ok_or("no output directory: pass --out or set output.directory")?;
    if let Some(times) = snapshots {
        config.time.snapshots = times;
        config.validate().map_err(|e| e.to_string())?;
    }
    let formats = &config.output.formats;
    let (csv, jsonl, svg) = (
        formats.contains(&OutputFormat::Csv),
        formats.contains(&OutputFormat::Trace),
        formats.contains(&OutputFormat::Svg),
    );
    let (trace, failure) = match run_scenario(&config) {
        Ok(trace) => (trace, None),
        Err(f) => (f.trace.clone(), Some(f.to_string())),
    };
    write_run_outputs(&trace, &out, csv, jsonl).map_err(|e| e.to_string())?;
    if let Some(message) = failure {
        return Err(format!(
            "simulation stopped: {message} (partial output in {})",
            out.display()
        ));
    }
    if svg {
        render_plots(&trace_records(&trace), PlotPlan::default(), &out)
            .map_err(|e| e.to_string())?;
    }
    eprintln!(
        "wrote {} snapshots over {} steps to {}",
        trace.snapshots.len(),
        trace.diagnostics.len().saturating_sub(1),
        out.display()
    );
    Ok(())
}

fn stability(
    config: PathBuf,
    delta: Sweep,
    rho: Sweep,
    k: Option<Vec<f64>>,
    out: Option<PathBuf>,
) -> Result<(), String> {
    let config = load(&config)?;
    let ks = k.unwrap_or_else(|| DEFAULT_WAVENUMBERS.to_vec());
    let map = stability_map(
        &delta.values(),
        &rho.values(),
        &ks,
        &config.class_specs(),
        config.road.width,
    )
    .map_err(|e| e.to_string())?;
    let csv = stability_csv(&map);
    match out {
        Some(path) => std::fs::write(&path, csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| e.to_string())?,
    }
    let disagreements = map.disagreements().count();
    if disagreements > 0 {
        eprintln!(
            "note: closed-form and spectral verdicts differ at {disagreements} of {} points",
            map.points.len()
        );
    }
    Ok(())
}

fn check(config: PathBuf, trials: usize, seed: u64) -> Result<(), String> {
    let config = load(&config)?;
    let results = checks::run_all(&config, trials, seed).map_err(|e| e.to_string())?;
    let mut failed = 0;
    let mut stdout = std::io::stdout().lock();
    for r in &results {
        let _ = writeln!(
            stdout,
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.summary
        );
        for note in &r.notes {
            let _ = writeln!(stdout, "    {note}");
        }
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(format!("{failed} check suite(s) failed"));
    }
    Ok(())
}

fn plot(trace: PathBuf, out: PathBuf) -> Result<(), String> {
    let records = read_trace(&trace).map_err(|e| e.to_string())?;
    let files = render_plots(&records, PlotPlan::default(), &out).map_err(|e| e.to_string())?;
    eprintln!("wrote {} plots to {}", files.len(), out.display());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            snapshots,
        } => simulate(config, out, snapshots),
        Command::Stability {
            config,
            delta,
            rho,
            k,
            out,
        } => stability(config, delta, rho, k, out),
        Command::Check {
            config,
            trials,
            seed,
        } => check(config, trials, seed),
        Command::Plot { trace, out } => plot(trace, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_FAILURE
        }
    }
}
