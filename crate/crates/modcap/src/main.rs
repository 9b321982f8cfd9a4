use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modcap::commands::{
    cmd_dump_model, cmd_dump_tree, cmd_generate, cmd_metrics, cmd_solve, MetricsRequest, ModelKind,
    BUNDLE_FILE,
};
use modcap::config::{parse_points, InstanceSource, RunConfig};
use modcap::CliError;
use modcap_core::generate::SyntheticConfig;
use modcap_core::sddip::CutPreset;

/// Stochastic modular and mobile capacity planning.
#[derive(Parser)]
#[command(name = "modcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Run the decomposition and write a result bundle.
    Solve(SolveArgs),
    /// Adaptivity, VSS and mobility reports.
    Metrics(MetricsArgs),
    /// Print the scenario tree as JSON.
    DumpTree(RunArgs),
    /// Print a model in LP format.
    DumpModel(DumpModelArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenPreset {
    Tiny,
    Se,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator settings as JSON; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<GenPreset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    facilities: Option<usize>,
    #[arg(long)]
    locations: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// Revision periods, e.g. `1,3,5`.
    #[arg(long)]
    revision_points: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Run configuration as JSON; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance file instead of a generated instance.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Seed for the generated instance.
    #[arg(long)]
    instance_seed: Option<u64>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tree_seed: Option<u64>,
    /// Revision periods, e.g. `1,3,5`.
    #[arg(long)]
    revision_points: Option<String>,
    /// Relative MIP gap for every solve.
    #[arg(long)]
    mip_gap: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Cut families, e.g. `SIM+I` or `b`.
    #[arg(long)]
    preset: Option<String>,
    /// Forward samples per iteration.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Wall-clock limit in seconds, checked between iterations.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Relative optimality gap tolerance.
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_alternating: bool,
    /// Also solve the extensive form and report the gap to it.
    #[arg(long)]
    with_oracle: bool,
    /// Out-of-sample paths to evaluate the final policy on.
    #[arg(long)]
    evaluate: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Revision counts to sweep over all placements, e.g. `1,2,3`.
    #[arg(long)]
    revisions: Option<String>,
    /// Explicit placements separated by `;`, e.g. `1,3;1,2,4`.
    #[arg(long)]
    schedules: Option<String>,
    #[arg(long)]
    vss: bool,
    /// Take RP from decomposition bounds rather than the extensive form.
    #[arg(long)]
    rp_bounds: bool,
    #[arg(long)]
    mobility: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Extensive,
    Deterministic,
    Stage,
}

#[derive(Args)]
struct DumpModelArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "extensive")]
    form: ModelArg,
    /// Stage for `--form stage`.
    #[arg(long, default_value_t = 1)]
    stage: usize,
}

fn run_config(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.instance {
        c.instance = InstanceSource::Path(p.clone());
    }
    if let Some(s) = a.instance_seed {
        match &mut c.instance {
            InstanceSource::Generate(g) => g.seed = s,
            InstanceSource::Path(_) => {
                return Err(CliError::Validation(
                    "--instance-seed applies only to generated instances".into(),
                ))
            }
        }
    }
    if let Some(b) = a.branching {
        c.tree.branching = b;
    }
    if let Some(s) = a.sigma {
        c.tree.demand_sigma = s;
    }
    if let Some(l) = a.lambda {
        c.tree.disruption_rate = l;
    }
    if let Some(s) = a.tree_seed {
        c.tree.seed = s;
    }
    if let Some(p) = &a.revision_points {
        c.revision_points = Some(parse_points(p)?);
    }
    if let Some(g) = a.mip_gap {
        c.mip_rel_gap = g;
    }
    if let Some(o) = &a.output {
        c.output_dir = o.clone();
    }
    Ok(c)
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Environment(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let mut g = match (&a.config, a.preset) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Environment(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
        }
        (None, Some(GenPreset::Se)) => SyntheticConfig::se(a.seed.unwrap_or(1)),
        _ => SyntheticConfig::default(),
    };
    if let Some(s) = a.seed {
        g.seed = s;
    }
    if let Some(n) = a.facilities {
        g.n_facilities = n;
    }
    if let Some(n) = a.locations {
        g.n_locations = n;
    }
    if let Some(t) = a.horizon {
        g.horizon = t;
    }
    if let Some(l) = a.levels {
        g.levels = l;
    }
    if let Some(p) = &a.revision_points {
        let pts = parse_points(p)?;
        if let Some(bad) = pts.iter().find(|&&t| t == 0 || t > g.horizon) {
            return Err(CliError::Validation(format!(
                "revision point {bad} lies outside periods 1..{}",
                g.horizon
            )));
        }
        g.revision = Some((1..=g.horizon).map(|t| pts.contains(&t)).collect());
    }
    write_or_print(a.output.as_ref(), &cmd_generate(&g)?)
}

fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let mut c = run_config(&a.run)?;
    if let Some(p) = &a.preset {
        c.sddip.preset = p
            .parse::<CutPreset>()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    if let Some(m) = a.samples {
        c.sddip.forward_samples = m;
    }
    if let Some(n) = a.max_iterations {
        c.sddip.max_iterations = n;
    }
    if let Some(t) = a.time_limit {
        if t.is_nan() || t < 0.0 {
            return Err(CliError::Validation(
                "--time-limit must be nonnegative".into(),
            ));
        }
        c.sddip.time_limit_ms = Some((t * 1000.0) as u64);
    }
    if let Some(g) = a.gap {
        c.sddip.gap_tolerance = g;
    }
    if let Some(w) = a.workers {
        c.sddip.workers = w;
    }
    if let Some(s) = a.seed {
        c.sddip.seed = s;
    }
    if a.no_alternating {
        c.sddip.alternating = false;
    }
    if a.with_oracle {
        c.with_oracle = true;
    }
    if a.evaluate.is_some() {
        c.evaluation_paths = a.evaluate;
    }
    let b = cmd_solve(&c)?;
    let r = &b.result;
    println!(
        "status {} lb {} ub {} gap {:.4}% iterations {}",
        serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        r.lower_bound,
        r.upper_bound,
        100.0 * r.gap,
        r.iterations
    );
    if let Some(o) = &b.oracle {
        println!(
            "oracle {} lb gap {:.4}%",
            o.value,
            100.0 * o.lb_gap_to_oracle
        );
    }
    println!("bundle {}", c.output_dir.join(BUNDLE_FILE).display());
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let c = run_config(&a.run)?;
    let mut req = MetricsRequest {
        vss: a.vss,
        vss_from_bounds: a.rp_bounds,
        mobility: a.mobility,
        ..Default::default()
    };
    if let Some(r) = &a.revisions {
        req.revision_counts = parse_points(r)?;
    }
    if let Some(s) = &a.schedules {
        req.schedules = s
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(parse_points)
            .collect::<Result<_, _>>()?;
    }
    if req.revision_counts.is_empty() && req.schedules.is_empty() && !req.vss && !req.mobility {
        return Err(CliError::Validation(
            "nothing to do; pass --revisions, --schedules, --vss or --mobility".into(),
        ));
    }
    let out = cmd_metrics(&c, &req)?;
    for f in &out.files {
        println!("{}", c.output_dir.join(f).display());
    }
    Ok(())
}

fn dump_model(a: &DumpModelArgs) -> Result<(), CliError> {
    let c = run_config(&a.run)?;
    let kind = match a.form {
        ModelArg::Extensive => ModelKind::Extensive,
        ModelArg::Deterministic => ModelKind::Deterministic,
        ModelArg::Stage => ModelKind::Stage(a.stage),
    };
    write_or_print(a.run.output.as_ref(), &cmd_dump_model(&c, kind)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Metrics(a) => metrics(a),
        Command::DumpTree(a) => run_config(a)
            .and_then(|c| cmd_dump_tree(&c))
            .and_then(|t| write_or_print(a.output.as_ref(), &t)),
        Command::DumpModel(a) => dump_model(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
