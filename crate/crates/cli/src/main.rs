//! `emw`: electromechanical wave simulation from the command line.
//!
//! Exit codes: 0 ok, 1 domain violation, 2 IO/usage/parse error,
//! 3 numerical failure.

mod config;
mod io;
mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use emw_core::analysis::{self, AnalysisError};
use emw_core::case::{validate_case, BusId, CaseError};
use emw_core::continuum::ContinuumError;
use emw_core::inertia::InertiaError;
use emw_core::path::PathError;
use emw_core::powerflow::PowerFlowError;
use emw_core::solver::SolverError;

use config::{BoundaryChoice, ModelChoice, RunConfig, SweepParam};
use plot::PlotKind;
use run::{usage, Usage};

#[derive(Parser)]
#[command(
    name = "emw",
    version,
    about = "Electromechanical wave propagation on transmission networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    /// Case file (.m for MATPOWER, otherwise JSON) or builtin:NAME
    case: String,
    /// Generator dynamics for a MATPOWER case
    #[arg(long)]
    sidecar: Option<String>,
}

#[derive(Args, Default)]
struct RunFlags {
    /// JSON file with the same keys as these flags; flags win
    #[arg(long)]
    config: Option<String>,
    /// Case file or builtin:NAME
    case: Option<String>,
    /// Scenario file or builtin:NAME
    scenario: Option<String>,
    #[arg(long)]
    sidecar: Option<String>,
    /// Source bus; defaults to the load-step bus
    #[arg(long)]
    src: Option<BusId>,
    #[arg(long)]
    dst: Option<BusId>,
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryChoice>,
    /// Grid step in miles
    #[arg(long)]
    dxi: Option<f64>,
    #[arg(long)]
    courant: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Fixed time step in seconds instead of the CFL choice
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    record_stride: Option<usize>,
    /// Time constant of the boundary transition in seconds
    #[arg(long)]
    lag_s: Option<f64>,
    /// Voltage used by the homogeneous model
    #[arg(long)]
    v_const: Option<f64>,
    /// Arrival threshold as a fraction of the source peak
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
}

impl RunFlags {
    fn config(&self) -> Result<RunConfig> {
        let flags = RunConfig {
            case: self.case.clone(),
            sidecar: self.sidecar.clone(),
            scenario: self.scenario.clone(),
            src: self.src,
            dst: self.dst,
            model: self.model,
            boundary: self.boundary,
            dxi: self.dxi,
            courant: self.courant,
            t_end: self.t_end,
            dt: self.dt,
            record_stride: self.record_stride,
            lag_s: self.lag_s,
            v_const: self.v_const,
            threshold: self.threshold,
            out: self.out.clone(),
            ..Default::default()
        };
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(&flags))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a case against the simulation invariants
    Validate(CaseArgs),
    /// Solve the AC power flow and print bus voltages as CSV
    Powerflow(CaseArgs),
    /// Distribute generator inertia over the lines
    DistributeInertia(CaseArgs),
    /// Fastest EMW path between two buses
    Path {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        src: BusId,
        #[arg(long)]
        dst: BusId,
        /// Print the path as JSON
        #[arg(long)]
        json: bool,
    },
    /// Run the full pipeline and write artifacts
    Simulate(RunFlags),
    /// Repeat the pipeline over a list of parameter values
    Sweep {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
        /// Line to lengthen, as "from-to" or a 1-based number
        #[arg(long)]
        line: Option<String>,
        /// Only change the generator at this bus
        #[arg(long)]
        gen: Option<BusId>,
        /// Concurrent runs (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analyze a run directory holding wavefield.csv and grid.csv
    Analyze {
        dir: PathBuf,
        #[arg(long, default_value_t = analysis::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        json: bool,
        /// Wave field file inside the directory
        #[arg(long, default_value = "wavefield.csv")]
        field: String,
    },
    /// Render a wave field CSV as SVG
    Plot {
        wavefield: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Time in s (profile) or position in miles (timeseries)
        #[arg(long)]
        at: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>()
            || cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
        {
            return 2;
        }
        if let Some(s) = cause.downcast_ref::<SolverError>() {
            return match s {
                SolverError::NonFinite { .. }
                | SolverError::Unstable { .. }
                | SolverError::ZeroSpeed
                | SolverError::PowerFlow(_) => 3,
                SolverError::Config(_) => 2,
                SolverError::Case(c) => case_code(c),
                _ => 1,
            };
        }
        if cause.is::<PowerFlowError>() {
            return 3;
        }
        if let Some(c) = cause.downcast_ref::<CaseError>() {
            return case_code(c);
        }
        if cause.is::<PathError>()
            || cause.is::<InertiaError>()
            || cause.is::<ContinuumError>()
            || cause.is::<AnalysisError>()
        {
            return 1;
        }
    }
    1
}

fn case_code(c: &CaseError) -> u8 {
    match c {
        CaseError::Syntax { .. } | CaseError::Schema(_) | CaseError::MalformedRow { .. } => 2,
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate(a) => {
            let c = io::load_case_unchecked(&a.case, a.sidecar.as_deref())?;
            let report = validate_case(&c);
            print!("{report}");
            Ok(if report.is_empty() { 0 } else { 1 })
        }
        Command::Powerflow(a) => {
            let c = io::load_case(&a.case, a.sidecar.as_deref())?;
            let (_, sol) = run::base_solution(&c)?;
            eprintln!(
                "converged in {} iterations, max mismatch {:.3e} pu",
                sol.iterations, sol.max_mismatch
            );
            print!("{}", sol.to_csv());
            Ok(0)
        }
        Command::DistributeInertia(a) => {
            let c = io::load_case(&a.case, a.sidecar.as_deref())?;
            let map = emw_core::inertia::distribute_inertia(
                &c,
                emw_core::inertia::DEFAULT_TOL,
                emw_core::inertia::DEFAULT_MAX_ROUNDS,
            )?;
            eprintln!(
                "{} rounds, total {:.6e} of {:.6e}, residue {:.3e}",
                map.rounds,
                map.total(),
                c.total_inertia(),
                map.residue
            );
            print!("{}", map.to_csv(&c));
            Ok(0)
        }
        Command::Path { case, src, dst, json } => {
            let c = io::load_case(&case.case, case.sidecar.as_deref())?;
            let p = run::find_path(&c, src, dst)?;
            if json {
                println!("{}", p.to_json(&c));
            } else {
                let buses: Vec<String> = p.buses.iter().map(|b| b.to_string()).collect();
                println!("{}", buses.join(" "));
                eprintln!(
                    "travel time {:.4} s over {:.3} mi",
                    p.travel_time_s, p.total_length_miles
                );
            }
            Ok(0)
        }
        Command::Simulate(flags) => {
            let cfg = flags.config()?;
            let (c, d) = load_inputs(&cfg)?;
            let out = run::run_pipeline(&c, &d, &cfg)?;
            if let Some(dir) = &cfg.out {
                run::write_artifacts(&PathBuf::from(dir), &c, &cfg, &out)?;
            }
            print!("{}", run::summary(&out));
            Ok(0)
        }
        Command::Sweep {
            run: flags,
            param,
            values,
            line,
            gen,
            jobs,
        } => {
            let extra = RunConfig {
                param,
                values,
                line,
                gen,
                jobs,
                ..Default::default()
            };
            let cfg = flags.config()?.overlay(&extra);
            let (c, d) = load_inputs(&cfg)?;
            let rows = run::sweep(&c, &d, &cfg)?;
            let param = cfg.param.expect("checked by sweep");
            if let Some(dir) = &cfg.out {
                let dir = PathBuf::from(dir);
                io::write(&dir, "sweep.json", &serde_json::to_string_pretty(&rows)?)?;
                io::write(&dir, "manifest.json", &serde_json::to_string_pretty(&cfg.resolved())?)?;
            }
            print!("{}", run::sweep_table(param, &rows));
            Ok(0)
        }
        Command::Analyze {
            dir,
            threshold,
            json,
            field,
        } => {
            let w = io::wavefield_from_files(&dir.join(field), &dir.join("grid.csv"))?;
            let report = analysis::analyze(&w, threshold, None)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            Ok(0)
        }
        Command::Plot {
            wavefield,
            kind,
            at,
            out,
        } => {
            let table = io::read_field_table(&wavefield)?;
            let svg = plot::render(&table, kind, at).map_err(|e| usage(e.to_string()))?;
            std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
            Ok(0)
        }
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(emw_core::case::PowerCase, emw_core::case::Disturbance)> {
    let case = cfg.case.as_deref().ok_or_else(|| usage("a case is required"))?;
    let scenario = cfg.scenario.as_deref().ok_or_else(|| usage("a scenario is required"))?;
    Ok((
        io::load_case(case, cfg.sidecar.as_deref())?,
        io::load_scenario(scenario)?,
    ))
}
