//! `fairmatch` command line: ingest edge lists, generate bounds and
//! individual-fairness windows, solve, verify, sample, enumerate, bench.
//!
//! Exit codes: 0 success, 2 infeasible, 1 usage or data error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use fairmatch::bench::{bench_all, BenchRow, BoundStyle, RunConfig};
use fairmatch::datagen::{generate_bounds, generate_if, ingest, synthetic, ColumnMap, SyntheticConfig};
use fairmatch::decomp::MatchingDistribution;
use fairmatch::ext::{solve_extended, Algorithm, FairnessObjective, RunOptions, Solution, Variant};
use fairmatch::greedy::ScanOrder;
use fairmatch::instance::{compute_stats, Instance};
use fairmatch::numeric::{Rational, Scalar};
use fairmatch::verify::{audit, enumerate_group_fair, sample};

#[derive(Parser)]
#[command(name = "fairmatch", version, about = "Fair randomized matchings with group and individual guarantees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an instance from an (item, platform, group) edge-list CSV.
    Ingest(IngestArgs),
    /// Replace group caps by the uniform generated cap.
    Genbounds(GenboundsArgs),
    /// Regenerate rank-based individual-fairness windows.
    Genif(GenifArgs),
    /// Solve and decompose into a distribution over matchings.
    Solve(SolveArgs),
    /// Audit a distribution against an instance.
    Verify(VerifyArgs),
    /// Draw matchings from a distribution and tabulate frequencies.
    Sample(SampleArgs),
    /// Enumerate every group-fair matching of a small instance.
    Oracle(OracleArgs),
    /// Run the pipeline and report UB, SOL, and the guarantee.
    Bench(BenchArgs),
}

#[derive(Args)]
struct IngestArgs {
    csv: PathBuf,
    #[arg(long, default_value = "item")]
    item_col: String,
    #[arg(long, default_value = "platform")]
    platform_col: String,
    #[arg(long, default_value = "group")]
    group_col: String,
    /// Output path (stdout when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenboundsArgs {
    instance: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenifArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank percentages in (0, 100].
    #[arg(long, value_delimiter = ',', default_values_t = [25.0, 50.0, 75.0, 100.0])]
    ranks: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Exact,
    Greedy,
    TwoG,
    G,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Exact => Algorithm::Exact,
            AlgoArg::Greedy => Algorithm::Greedy,
            AlgoArg::TwoG => Algorithm::TwoG,
            AlgoArg::G => Algorithm::G,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Standard,
    MaxminGroup,
    MindomGroup,
    MaxminIndividual,
}

impl From<ObjectiveArg> for Variant {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Standard => Variant::Standard,
            ObjectiveArg::MaxminGroup => Variant::MaxminGroup,
            ObjectiveArg::MindomGroup => Variant::MindomGroup,
            ObjectiveArg::MaxminIndividual => Variant::MaxminIndividual,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "standard")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Floor on the matching size for the auxiliary objectives.
    #[arg(long, default_value_t = 0.0)]
    zeta: f64,
    /// Shuffle the greedy scan order with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Scale individual lower bounds when the exact LP is infeasible.
    #[arg(long)]
    scale: bool,
    /// Run in exact rational arithmetic; weights are written as "p/q".
    #[arg(long)]
    rational: bool,
    /// Distribution output path (stdout summary only when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the per-iteration trace here and reference it from the output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the instance the distribution is audited against.
    #[arg(long)]
    audit_instance: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    distribution: PathBuf,
    /// Probability windows are checked as [L/t - delta, U/t + delta].
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SampleArgs {
    instance: PathBuf,
    distribution: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    /// Also require group lower bounds and platform windows.
    #[arg(long)]
    strong: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files; each is benched on its own thread.
    instances: Vec<PathBuf>,
    /// JSON run configuration; command-line flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bench a seeded synthetic instance: items,platforms,groups,delta,degree.
    #[arg(long, value_delimiter = ',')]
    synthetic: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "greedy")]
    algo: AlgoArg,
    #[arg(long, value_enum, default_value = "standard")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace group caps by the uniform generated cap.
    #[arg(long)]
    uniform_bounds: bool,
    /// Regenerate rank windows with these percentages.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<f64>>,
    #[arg(long)]
    scale: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Run configuration file. Column names apply when `data` is a CSV.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    algorithm: String,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default)]
    objective: Option<String>,
    #[serde(default)]
    zeta: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    bounds: Option<String>,
    #[serde(default)]
    rank_percents: Option<Vec<f64>>,
    #[serde(default)]
    scale: bool,
    #[serde(default)]
    columns: Option<ColumnsFile>,
    #[serde(default)]
    data: Vec<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnsFile {
    item: String,
    platform: String,
    group: String,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let infeasible = err
                .chain()
                .any(|c| c.downcast_ref::<fairmatch::Error>().is_some_and(fairmatch::Error::is_infeasible));
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let cols = ColumnMap {
                item: a.item_col,
                platform: a.platform_col,
                group: a.group_col,
            };
            let inst = ingest(&a.csv, &cols).with_context(|| format!("ingesting {}", a.csv.display()))?;
            emit(a.output.as_deref(), &inst.to_json())
        }
        Command::Genbounds(a) => {
            let inst = generate_bounds(&load_instance(&a.instance)?)?;
            emit(a.output.as_deref(), &inst.to_json())
        }
        Command::Genif(a) => {
            let inst = generate_if(&load_instance(&a.instance)?, a.seed, &a.ranks)?;
            emit(a.output.as_deref(), &inst.to_json())
        }
        Command::Solve(a) => solve_cmd(a),
        Command::Verify(a) => {
            let inst = load_instance(&a.instance)?;
            let dist = load_distribution(&inst, &a.distribution)?;
            let report = audit(&inst, &dist, &a.t, &a.delta, a.tol);
            match a.format {
                Format::Json => println!("{}", report.to_json()),
                Format::Csv => print!("{}", report.to_csv()),
            }
            if !report.all_pass() {
                bail!("audit failed");
            }
            Ok(())
        }
        Command::Sample(a) => {
            let inst = load_instance(&a.instance)?;
            let dist = load_distribution(&inst, &a.distribution)?;
            let table = sample(&inst, &dist, a.seed, a.draws)?;
            match a.format {
                Format::Json => println!("{}", table.to_json()),
                Format::Csv => print!("{}", table.to_csv()),
            }
            Ok(())
        }
        Command::Oracle(a) => {
            let inst = load_instance(&a.instance)?;
            let res = enumerate_group_fair(&inst, a.strong)?;
            let matchings: Vec<&Vec<usize>> = res.matchings.iter().map(|m| &m.edges).collect();
            let out = json!({
                "strong": res.strong,
                "count": matchings.len(),
                "max_cardinality": res.max_cardinality,
                "matchings": matchings,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Bench(a) => bench_cmd(a),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_distribution(inst: &Instance, path: &Path) -> Result<MatchingDistribution<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(MatchingDistribution::from_json(inst, &value)?)
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let objective = FairnessObjective {
        variant: a.objective.into(),
        zeta: a.zeta,
    };
    let opts = RunOptions {
        epsilon: a.epsilon,
        order: a.seed.map_or(ScanOrder::PreferenceRank, ScanOrder::Shuffled),
        scale: a.scale,
        ..RunOptions::default()
    };
    if a.rational {
        let sol = solve_extended::<Rational>(&inst, objective, a.algo.into(), &opts)?;
        write_solution(&a, &sol)
    } else {
        let sol = solve_extended::<f64>(&inst, objective, a.algo.into(), &opts)?;
        write_solution(&a, &sol)
    }
}

fn write_solution<S: Scalar>(a: &SolveArgs, sol: &Solution<S>) -> Result<()> {
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    let trace_ref = a.trace.as_ref().map(|p| p.display().to_string());
    if let Some(p) = &a.trace {
        emit(Some(p), &serde_json::to_string_pretty(&sol.trace_json())?)?;
    }
    if let Some(p) = &a.output {
        emit(Some(p), &serde_json::to_string_pretty(&sol.distribution.to_json(trace_ref.as_deref()))?)?;
    }
    if let Some(p) = &a.audit_instance {
        emit(Some(p), &sol.audit_instance.to_json())?;
    }
    let summary = json!({
        "algorithm": sol.algorithm.name(),
        "objective": sol.objective.variant.name(),
        "lp_value": sol.lp_value.to_f64(),
        "mu": sol.mu.as_ref().map(Scalar::to_f64),
        "t_star": sol.t_star,
        "t": sol.t.to_f64(),
        "delta": sol.delta.to_f64(),
        "expected_size": sol.report.expected_size,
        "support": sol.distribution.len(),
        "audit_pass": sol.report.all_pass(),
        "warnings": sol.warnings,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let (config, mut instances) = match &a.config {
        Some(path) => config_from_file(path)?,
        None => {
            let cfg = RunConfig {
                algorithm: a.algo.into(),
                epsilon: a.epsilon,
                objective: FairnessObjective {
                    variant: a.objective.into(),
                    zeta: a.zeta,
                },
                seed: a.seed,
                bounds: if a.uniform_bounds { BoundStyle::Uniform } else { BoundStyle::Keep },
                rank_percents: a.ranks.clone(),
                scale: a.scale,
            };
            (cfg, Vec::new())
        }
    };
    for p in &a.instances {
        instances.push(load_instance(p)?);
    }
    if let Some(s) = &a.synthetic {
        let [items, platforms, groups, delta, degree] = s[..] else {
            bail!("--synthetic takes items,platforms,groups,delta,degree");
        };
        instances.push(synthetic(&SyntheticConfig {
            items,
            platforms,
            groups,
            max_groups_per_item: delta,
            degree,
            seed: config.seed,
        })?);
    }
    if instances.is_empty() {
        bail!("nothing to bench: pass instance files, --synthetic, or a config with data");
    }
    config.validate()?;

    let rows = bench_all(&config, &instances).into_iter().collect::<fairmatch::Result<Vec<_>>>()?;
    for (inst, row) in instances.iter().zip(&rows) {
        let stats = compute_stats(inst);
        eprintln!(
            "{} items, delta {}: UB/SOL {:.3} (guarantee {:.1}), support {}, {:.2} s",
            inst.num_items(),
            stats.delta,
            row.ub_over_sol,
            row.approx,
            row.support,
            row.seconds
        );
    }
    emit(a.output.as_deref(), BenchRow::to_csv(&rows).trim_end())
}

fn config_from_file(path: &Path) -> Result<(RunConfig, Vec<Instance>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ConfigFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let variant = match &file.objective {
        Some(o) => Variant::parse(o)?,
        None => Variant::Standard,
    };
    let bounds = match file.bounds.as_deref() {
        None | Some("keep") => BoundStyle::Keep,
        Some("uniform") => BoundStyle::Uniform,
        Some(other) => bail!("unknown bound style '{other}' (expected keep or uniform)"),
    };
    let cfg = RunConfig {
        algorithm: Algorithm::parse(&file.algorithm)?,
        epsilon: file.epsilon,
        objective: FairnessObjective {
            variant,
            zeta: file.zeta,
        },
        seed: file.seed,
        bounds,
        rank_percents: file.rank_percents,
        scale: file.scale,
    };
    let cols = file
        .columns
        .map(|c| ColumnMap {
            item: c.item,
            platform: c.platform,
            group: c.group,
        })
        .unwrap_or_default();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut instances = Vec::new();
    for d in &file.data {
        let p = base.join(d);
        let inst = if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            ingest(&p, &cols).with_context(|| format!("ingesting {}", p.display()))?
        } else {
            load_instance(&p)?
        };
        instances.push(inst);
    }
    Ok((cfg, instances))
}
