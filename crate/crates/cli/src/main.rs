use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use empc_wds::export::{self, MetricsReport, SummaryRow};
use empc_wds::scenario::{ScenarioError, ScenarioFile, RICHMOND_PRUNED_SCN};
use empc_wds::sim::{self, ControllerKind, RunOutcome, ScenarioConfig};
use rayon::prelude::*;

const DEFAULT_SWEEP_L_S: [f64; 6] = [5.0, 15.0, 25.0, 35.0, 45.0, 55.0];

#[derive(Parser)]
#[command(name = "empc-wds", version, about = "EMPC pump scheduling for water distribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write trace.csv / metrics.json.
    Simulate(SimulateArgs),
    /// Run EMPC and trigger control for a list of base demands.
    Sweep(SweepArgs),
    /// Check a scenario file and report every problem found.
    Validate(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file; the bundled Richmond Pruned scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory (EMPC_WDS_OUT takes precedence).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write every EMPC plan to plans.jsonl.
    #[arg(long)]
    plans: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// Base demand in L/s.
    #[arg(long)]
    demand: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Base demands in L/s.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    demand: Option<Vec<f64>>,
    /// Parallel cases (defaults to the number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Validation(String),
    Infeasible(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => Failure::Other(e.into()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<(ScenarioFile, String), Failure> {
    match &args.scenario {
        Some(path) => Ok(ScenarioFile::load(path)?),
        None => Ok((
            ScenarioFile::from_toml_str(RICHMOND_PRUNED_SCN)?,
            RICHMOND_PRUNED_SCN.to_string(),
        )),
    }
}

fn out_dir(args: &OutputArgs) -> PathBuf {
    std::env::var_os("EMPC_WDS_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| args.out.clone())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_run(dir: &Path, label: &str, cfg: &ScenarioConfig, out: &RunOutcome, plans: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let stations = cfg.model.pumps.station_count();
    export::write_trace_csv(create(&dir.join("trace.csv"))?, &out.trace, stations)?;
    export::write_trace_jsonl(create(&dir.join("trace.jsonl"))?, &out.trace)?;
    export::write_metrics_json(create(&dir.join("metrics.json"))?, &MetricsReport::new(label, out))?;
    if plans && cfg.controller == ControllerKind::Empc {
        export::write_plans_jsonl(create(&dir.join("plans.jsonl"))?, &out.plans)?;
    }
    Ok(())
}

fn controller_name(kind: ControllerKind) -> &'static str {
    match kind {
        ControllerKind::Empc => "empc",
        ControllerKind::Trigger => "trigger",
    }
}

fn failure_text(out: &RunOutcome) -> Option<String> {
    out.failure.as_ref().map(|f| {
        format!(
            "infeasible from hour {}: {} ({} infeasible control steps)",
            f.hour, f.reason, f.infeasible_steps
        )
    })
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (mut file, src) = load(&args.scenario)?;
    if let Some(kind) = args.controller {
        file.controller.kind = kind;
    }
    if let Some(d) = args.demand {
        file.demand.base_l_s = d;
    }
    if let Some(seed) = args.output.seed {
        file.simulation.seed = seed;
    }
    let cfg = file.to_config(Some(&src))?;
    let out = sim::run_closed_loop(&cfg).map_err(|e| Failure::Other(e.into()))?;
    let dir = out_dir(&args.output);
    let label = controller_name(cfg.controller);
    write_run(&dir, label, &cfg, &out, args.output.plans)?;

    let m = &out.metrics;
    println!("controller   {label}");
    println!("base demand  {} L/s", cfg.model.demand.base_demand_m3s * 1000.0);
    println!("volume       {:.1} m3", m.total_volume_m3);
    println!("energy       {:.1} kWh", m.total_energy_kwh);
    println!("cost         {:.2} GBP", m.total_cost_pounds);
    match m.cost_per_m3 {
        Some(c) => println!("cost per m3  {c:.4} GBP"),
        None => println!("cost per m3  undefined"),
    }
    println!("depth range  {:.3} .. {:.3} m", m.min_depth_m, m.max_depth_m);
    println!("switches     {}", m.switch_count);
    println!("written to   {}", dir.display());
    if !out.violations.is_empty() {
        println!(
            "warning: depth left its bounds on {} substeps (first at t = {} s)",
            out.violations.len(),
            out.violations[0].time_s
        );
    }
    match failure_text(&out) {
        Some(msg) => Err(Failure::Infeasible(msg)),
        None => Ok(()),
    }
}

fn case_dir_name(demand: f64) -> String {
    format!("d{demand}")
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let (mut file, src) = load(&args.scenario)?;
    if let Some(seed) = args.output.seed {
        file.simulation.seed = seed;
    }
    let demands = args.demand.unwrap_or_else(|| DEFAULT_SWEEP_L_S.to_vec());
    if demands.is_empty() {
        return Err(Failure::Validation("demand list is empty".into()));
    }
    // validate the unmodified base once so schema errors surface as such
    file.to_config(Some(&src))?;

    let dir = out_dir(&args.output);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("cannot start worker pool")?;
    let plans = args.output.plans;

    let rows: Vec<SummaryRow> = pool.install(|| {
        demands
            .par_iter()
            .map(|&d| {
                run_case(&file, &src, d, &dir.join(case_dir_name(d)), plans)
                    .unwrap_or_else(|e| SummaryRow::errored(d, format!("{e:#}")))
            })
            .collect()
    });

    export::write_summary_csv(create(&dir.join("summary.csv"))?, &rows).map_err(anyhow::Error::from)?;
    export::write_summary_jsonl(create(&dir.join("summary.jsonl"))?, &rows).map_err(anyhow::Error::from)?;

    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>10} {:>12} {:>10} {:>8}",
        "d L/s", "EMPC", "EMPC GBP", "GBP/m3", "trigger", "trig. GBP", "GBP/m3", "ratio"
    );
    let opt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
    for r in &rows {
        println!(
            "{:>8} {:>12} {:>12} {:>12} {:>10} {:>12} {:>10} {:>8}",
            r.demand_l_s,
            r.empc_status,
            opt(r.empc_cost_gbp, 2),
            opt(r.empc_cost_per_m3, 4),
            r.trigger_status,
            opt(r.trigger_cost_gbp, 2),
            opt(r.trigger_cost_per_m3, 4),
            opt(r.cost_ratio, 4),
        );
    }
    println!("summary written to {}", dir.join("summary.csv").display());

    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.empc_status == "infeasible" || r.empc_status == "error")
        .map(|r| r.demand_l_s.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!(
            "EMPC failed for base demand(s) {} L/s",
            failed.join(", ")
        )))
    }
}

fn run_case(base: &ScenarioFile, src: &str, demand: f64, dir: &Path, plans: bool) -> Result<SummaryRow> {
    let mut file = base.clone();
    file.demand.base_l_s = demand;
    let cfg = file.to_config(Some(src))?;
    let (empc, trigger, report) = sim::run_comparison(&cfg)?;
    let mut empc_cfg = cfg.clone();
    empc_cfg.controller = ControllerKind::Empc;
    let mut trigger_cfg = cfg;
    trigger_cfg.controller = ControllerKind::Trigger;
    write_run(&dir.join("empc"), "empc", &empc_cfg, &empc, plans)?;
    write_run(&dir.join("trigger"), "trigger", &trigger_cfg, &trigger, false)?;
    serde_json::to_writer_pretty(create(&dir.join("comparison.json"))?, &report)?;
    Ok(SummaryRow::from_runs(demand, &empc, &trigger, &report))
}

fn validate(args: ScenarioArgs) -> Result<(), Failure> {
    let (file, src) = load(&args)?;
    let issues = file.validate(Some(&src));
    if issues.is_empty() {
        println!("ok");
        return Ok(());
    }
    Err(Failure::Validation(
        ScenarioError::Invalid(issues).to_string(),
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
