use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gnnprep_core::cost::{generate_catalog_sized, select_config, WorkloadParams};
use gnnprep_core::graph::uniform_random;
use gnnprep_core::io::{load_graph, save_csc, save_graph, write_atomic, EdgeOrder, GraphFormat};
use gnnprep_core::pipeline::{random_batch, Pipeline, SamplingParams};
use gnnprep_core::policy::PolicyRegistry;
use gnnprep_core::scenario::{replay, Scenario};
use gnnprep_core::{EdgeArrayCoo, ScrConfig, UpeConfig, Vid, DEFAULT_CLOCK_HZ};

/// Random batches are drawn from a stream separate from sampling.
const BATCH_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Parser)]
#[command(
    name = "gnnprep",
    version,
    about = "GNN graph preprocessing with a cycle model of the UPE/SCR engines"
)]
struct Cli {
    /// Refuse to run randomized commands without an explicit --seed.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a COO edge list to a CSC file and print stage cycles as JSON.
    Convert(ConvertArgs),
    /// Convert, sample, reindex and convert the sampled subgraph.
    Preprocess(PreprocessArgs),
    /// Score every hardware variant pair for a workload.
    Plan(PlanArgs),
    /// Replay a scenario script under static and dynamic policies.
    Replay(ReplayArgs),
    /// Write a uniform random graph.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input graph file.
    input: PathBuf,
    #[arg(long, default_value_t = GraphFormat::Text)]
    format: GraphFormat,
    /// Column order of text edge lists.
    #[arg(long, default_value = "src-dst")]
    edge_order: EdgeOrder,
}

impl InputArgs {
    fn load(&self) -> Result<EdgeArrayCoo> {
        load_graph(&self.input, self.format, self.edge_order)
            .with_context(|| format!("cannot load {}", self.input.display()))
    }
}

#[derive(Args)]
struct HwArgs {
    #[arg(long, default_value_t = 32)]
    n_upe: usize,
    #[arg(long, default_value_t = 64)]
    w_upe: usize,
    #[arg(long, default_value_t = 8)]
    n_scr: usize,
    #[arg(long, default_value_t = 512)]
    w_scr: usize,
    #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
    clock_hz: f64,
}

impl HwArgs {
    fn pipeline(&self) -> Result<Pipeline> {
        let upe = UpeConfig::new(self.n_upe, self.w_upe)?;
        let scr = ScrConfig::new(self.n_scr, self.w_scr)?;
        Ok(Pipeline::new(upe, scr)?.with_clock(self.clock_hz)?)
    }
}

#[derive(Args)]
struct CatalogArgs {
    #[arg(long, default_value_t = gnnprep_core::cost::DEFAULT_UPE_CAPACITY)]
    catalog_upe_capacity: usize,
    #[arg(long, default_value_t = gnnprep_core::cost::DEFAULT_SCR_CAPACITY)]
    catalog_scr_capacity: usize,
    /// Variants per family.
    #[arg(long, default_value_t = gnnprep_core::cost::CATALOG_SIZE)]
    catalog_size: usize,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output CSC file.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    hw: HwArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output CSC file for the sampled subgraph; the VID map goes to
    /// `<output>.map.json`.
    #[arg(short, long)]
    output: PathBuf,
    /// Batch node VIDs, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "batch_size")]
    batch: Vec<Vid>,
    /// Draw this many distinct batch nodes at random instead.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fanout per hop.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Sampler: node or layer.
    #[arg(long, default_value = "node")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path; a CSV with the same stem is written beside it.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    hw: HwArgs,
}

#[derive(Args)]
struct PlanArgs {
    /// Take n and e from a graph file instead of --nodes/--edges.
    #[arg(long, conflicts_with_all = ["nodes", "edges"])]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = GraphFormat::Text)]
    format: GraphFormat,
    #[arg(long, default_value = "src-dst")]
    edge_order: EdgeOrder,
    #[arg(long, requires = "edges")]
    nodes: Option<u64>,
    #[arg(long, requires = "nodes")]
    edges: Option<u64>,
    #[arg(long, default_value_t = 10)]
    k: u64,
    #[arg(long, default_value_t = 2)]
    layers: u32,
    #[arg(long, default_value_t = 1)]
    batch_size: u64,
    #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
    clock_hz: f64,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Print the plan as JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write the scoring table here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Override the scenario's amortization horizon.
    #[arg(long)]
    horizon: Option<u32>,
    /// Override the scenario's clock.
    #[arg(long)]
    clock_hz: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    edges: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = GraphFormat::Text)]
    format: GraphFormat,
    #[arg(long, default_value = "src-dst")]
    edge_order: EdgeOrder,
    #[arg(short, long)]
    output: PathBuf,
}

fn seed_or_default(seed: Option<u64>, strict: bool) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None if strict => bail!("--strict requires an explicit --seed"),
        None => Ok(0),
    }
}

/// Writes to standard output; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    let g = a.input.load()?;
    let pipe = a.hw.pipeline()?;
    let (csc, cycles) = pipe.convert(&g)?;
    save_csc(&a.output, &csc).with_context(|| format!("cannot write {}", a.output.display()))?;
    let total = cycles.total().get();
    let summary = json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "upe": pipe.upe,
        "scr": pipe.scr,
        "ordering_sort": cycles.ordering.sort,
        "ordering_merge": cycles.ordering.merge,
        "merge_rounds": cycles.ordering.charged_merge_rounds,
        "chunks": cycles.ordering.chunks,
        "key_bits": cycles.ordering.key_bits,
        "reshaping": cycles.reshaping,
        "total_cycles": total,
        "estimated_seconds": total as f64 / pipe.clock_hz,
    });
    emit(&(serde_json::to_string_pretty(&summary)? + "\n"))
}

fn cmd_preprocess(a: &PreprocessArgs, strict: bool) -> Result<()> {
    let seed = seed_or_default(a.seed, strict)?;
    let g = a.input.load()?;
    let batch = match a.batch_size {
        Some(count) => random_batch(g.node_count(), count, seed ^ BATCH_SEED_SALT)?,
        None if a.batch.is_empty() => bail!("give batch nodes with --batch or --batch-size"),
        None => a.batch.clone(),
    };
    let params = SamplingParams {
        batch,
        fanout: a.k,
        layers: a.layers,
        mode: a.mode.clone(),
    };
    let (sub, report) = a.hw.pipeline()?.preprocess(&g, &params, seed)?;
    save_csc(&a.output, &sub.csc)
        .with_context(|| format!("cannot write {}", a.output.display()))?;
    write_atomic(
        &sidecar(&a.output, ".map.json"),
        sub.vid_map_json().as_bytes(),
    )?;
    let js = report.to_json();
    if let Some(path) = &a.report {
        write_atomic(path, js.as_bytes())?;
        write_atomic(&path.with_extension("csv"), report.to_csv().as_bytes())?;
    }
    emit(&(js + "\n"))
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let (n, e) = match (&a.input, a.nodes, a.edges) {
        (Some(path), _, _) => {
            let g = load_graph(path, a.format, a.edge_order)
                .with_context(|| format!("cannot load {}", path.display()))?;
            (g.node_count() as u64, g.edge_count() as u64)
        }
        (None, Some(n), Some(e)) => (n, e),
        _ => bail!("give either --input or both --nodes and --edges"),
    };
    let workload = WorkloadParams {
        n,
        e,
        layers: a.layers,
        fanout: a.k,
        batch: a.batch_size,
    };
    let cat = generate_catalog_sized(
        a.catalog.catalog_upe_capacity,
        a.catalog.catalog_scr_capacity,
        a.catalog.catalog_size,
    )?;
    let plan = select_config(&workload, &cat)?;
    let body = if a.json {
        serde_json::to_string_pretty(&plan)? + "\n"
    } else {
        plan.scores_csv(a.clock_hz)
    };
    let best = &plan.best;
    let headline = format!(
        "# best: UPE {} SCR {} total_cycles={} est_ms={:.6}",
        best.config.upe,
        best.config.scr,
        best.cost.total,
        best.cost.millis(a.clock_hz)
    );
    match &a.output {
        Some(path) => {
            write_atomic(path, body.as_bytes())?;
            emit(&(headline + "\n"))
        }
        None if a.json => emit(&body),
        None => emit(&format!("{headline}\n{body}")),
    }
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let mut scenario = Scenario::load(&a.scenario)
        .with_context(|| format!("cannot read {}", a.scenario.display()))?;
    if let Some(h) = a.horizon {
        scenario.reconfig.horizon = h;
    }
    if let Some(c) = a.clock_hz {
        scenario.clock_hz = c;
    }
    let base = a.scenario.parent().unwrap_or(Path::new("."));
    let out = replay(&scenario, base, &PolicyRegistry::default())?;
    let csv = out.to_csv();
    match &a.output {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => emit(&csv)?,
    }
    for p in &scenario.policies {
        eprintln!(
            "{p}: {} reconfiguration(s), {:.6} ms cumulative",
            out.reconfigurations(p),
            out.final_cumulative_ms(p).unwrap_or(0.0)
        );
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, strict: bool) -> Result<()> {
    let g = uniform_random(a.nodes, a.edges, seed_or_default(a.seed, strict)?)?;
    save_graph(&a.output, &g, a.format, a.edge_order)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Convert(a) => cmd_convert(a),
        Command::Preprocess(a) => cmd_preprocess(a, cli.strict),
        Command::Plan(a) => cmd_plan(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Generate(a) => cmd_generate(a, cli.strict),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
