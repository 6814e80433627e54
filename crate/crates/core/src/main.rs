use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stencilkit::bench::{grid_sweep, ingest_counters, load_counter_mapping, thread_sweep, CompileCommand, RunOptions};
use stencilkit::cache::{
    address_stream, layer_conditions, simulate_cache, write_trace, LcOptions, SimOptions, StreamAccounting,
    TrafficPrediction, DEFAULT_SAFETY,
};
use stencilkit::machine::{resolve_machine, MachineModel};
use stencilkit::models::{ecm_from_traffic, incore, lup_per_cl, roofline};
use stencilkit::stencil::{
    build_kernel, emit_c, BlockSpec, CoefficientStorage, ElementType, EmitOptions, GridDims, KernelIR, StencilKind,
    StencilSpec, Weighting,
};
use stencilkit::workflow::{plan, render_plots, run_workflow, PlanOptions, Status, Table, Tables, WorkflowOptions};
use stencilkit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stencilkit",
    version,
    about = "Stencil code generation, traffic prediction and performance models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the C benchmark for a stencil.
    Generate(GenerateArgs),
    /// Layer conditions, ECM or Roofline predictions.
    Analyze(AnalyzeArgs),
    /// Run the cache simulator.
    Simulate(SimulateArgs),
    /// Compile and run benchmarks on this host.
    Bench(BenchArgs),
    /// Run the full data collection workflow and write a report.
    Workflow(WorkflowArgs),
    /// Re-render the plots of a report directory from its CSV files.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct StencilArgs {
    /// 2 or 3.
    #[arg(long, default_value_t = 3)]
    dim: u32,
    #[arg(long, default_value_t = 1)]
    radius: u32,
    /// star or box.
    #[arg(long, default_value = "star")]
    kind: StencilKind,
    /// homogeneous, heterogeneous, isotropic or point-symmetric.
    #[arg(long, default_value = "homogeneous")]
    weighting: Weighting,
    /// constant or variable.
    #[arg(long, default_value = "constant")]
    coeff: CoefficientStorage,
    /// float or double.
    #[arg(long, default_value = "double")]
    dtype: ElementType,
}

impl StencilArgs {
    fn kernel(&self) -> Result<KernelIR> {
        build_kernel(&self.spec()?)
    }

    fn spec(&self) -> Result<StencilSpec> {
        StencilSpec::new(self.dim, self.radius, self.kind, self.weighting, self.coeff, self.dtype)
    }
}

#[derive(Args, Clone)]
struct LcArgs {
    /// Fraction of each cache assumed usable for reuse.
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    safety: f64,
    /// line_per_stream or window.
    #[arg(long, default_value = "line_per_stream")]
    lc_accounting: StreamAccounting,
}

impl LcArgs {
    fn options(&self) -> LcOptions {
        LcOptions {
            safety: self.safety,
            accounting: self.lc_accounting,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    stencil: StencilArgs,
    #[arg(long)]
    openmp: bool,
    /// Wrap the timed region in instrumentation markers.
    #[arg(long)]
    markers: bool,
    /// Default block size; enables the blocked loop nest.
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, default_value_t = 64)]
    line_size: usize,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Lc,
    Ecm,
    Roofline,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum PredictorArg {
    Lc,
    Sim,
}

#[derive(Args)]
struct AnalyzeArgs {
    what: Analysis,
    #[command(flatten)]
    stencil: StencilArgs,
    /// Machine file path or built-in name.
    #[arg(long)]
    machine: String,
    /// Grid edges: `10,20,30` or `10-60` with --step.
    #[arg(long, default_value = "100")]
    sizes: String,
    #[arg(long, default_value_t = 10)]
    step: usize,
    /// Traffic source for ecm and roofline.
    #[arg(long, value_enum, default_value = "lc")]
    predictor: PredictorArg,
    #[command(flatten)]
    lc: LcArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    stencil: StencilArgs,
    #[arg(long)]
    machine: String,
    #[arg(long, default_value = "32")]
    sizes: String,
    #[arg(long, default_value_t = 10)]
    step: usize,
    #[arg(long)]
    fully_associative: bool,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Largest element count (all arrays) the simulator accepts.
    #[arg(long, default_value_t = 1 << 24)]
    element_budget: usize,
    /// Dump the address stream of the first size to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    stencil: StencilArgs,
    #[arg(long)]
    machine: String,
    #[arg(long, default_value = "10-60")]
    sizes: String,
    #[arg(long, default_value_t = 10)]
    step: usize,
    /// Run a thread sweep 1..=N at the largest size instead of a grid sweep.
    #[arg(long)]
    threads: Option<u32>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    min_runtime: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_pin: bool,
}

#[derive(Args)]
struct WorkflowArgs {
    #[command(flatten)]
    stencil: StencilArgs,
    #[arg(long)]
    machine: String,
    /// Explicit grid edges; planned from the last-level break when absent.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = 10)]
    step: usize,
    /// Thread scaling up to this many cores (default: all cores of the socket).
    #[arg(long)]
    threads: Option<u32>,
    #[arg(long, default_value = "L3")]
    block_level: String,
    /// Bytes, or with a K/M/G/T suffix (binary multiples).
    #[arg(long, default_value = "16G")]
    memory_budget: String,
    #[arg(long)]
    with_benchmarks: bool,
    #[arg(long, default_value_t = 1.0)]
    min_runtime: f64,
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
    #[command(flatten)]
    lc: LcArgs,
    /// Largest address stream (elements) handed to the cache simulator.
    #[arg(long, default_value_t = 1 << 24)]
    sim_budget: usize,
    /// Override the suggested traffic-light status.
    #[arg(long)]
    status: Option<Status>,
    #[arg(long, default_value = "")]
    status_comment: String,
    /// Counter mapping file for phenomenological ECM.
    #[arg(long, requires = "counter_dir")]
    counters: Option<PathBuf>,
    /// Directory with one `<N>.csv` counter export per grid edge.
    #[arg(long, requires = "counters")]
    counter_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    machine: String,
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
    /// Element size of the stencil in bytes.
    #[arg(long, default_value_t = 8)]
    element_size: usize,
}

fn parse_sizes(text: &str, step: usize) -> Result<Vec<usize>> {
    let bad = || Error::InvalidInput(format!("cannot parse sizes `{text}`"));
    if let Some((a, b)) = text.split_once('-') {
        let (a, b): (usize, usize) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if step == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(step).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn parse_bytes(text: &str) -> Result<u64> {
    let t = text.trim().trim_end_matches(['B', 'b']).trim_end_matches(['i', 'I']);
    let (digits, shift) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 10),
        Some('M' | 'm') => (&t[..t.len() - 1], 20),
        Some('G' | 'g') => (&t[..t.len() - 1], 30),
        Some('T' | 't') => (&t[..t.len() - 1], 40),
        _ => (t, 0),
    };
    let v: f64 = digits
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("cannot parse byte count `{text}`")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidInput(format!("byte count `{text}` must be positive")));
    }
    Ok((v * (1u64 << shift) as f64) as u64)
}

fn invocation() -> String {
    let args: Vec<String> = std::env::args().collect();
    shlex::try_join(args.iter().map(String::as_str)).unwrap_or_else(|_| args.join(" "))
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let kernel = a.stencil.kernel()?;
    let options = EmitOptions {
        openmp: a.openmp,
        markers: a.markers,
        blocking: a.block.map(BlockSpec::new).transpose()?,
        line_size: a.line_size,
    };
    let src = emit_c(&kernel, &options)?;
    match &a.output {
        Some(p) => fs::write(p, src).map_err(|e| Error::io(p, e)),
        None => {
            print!("{src}");
            Ok(())
        }
    }
}

fn traffic_for(
    kernel: &KernelIR,
    machine: &MachineModel,
    dims: &GridDims,
    predictor: PredictorArg,
    lc: LcOptions,
) -> Result<TrafficPrediction> {
    match predictor {
        PredictorArg::Lc => Ok(layer_conditions(kernel, machine, dims, lc)?.1),
        PredictorArg::Sim => Ok(simulate_cache(kernel, machine, dims, SimOptions::default())?.traffic),
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let kernel = a.stencil.kernel()?;
    let (machine, _) = resolve_machine(&a.machine)?;
    let lup = lup_per_cl(&machine, kernel.spec.element.size_bytes());
    let sizes = parse_sizes(&a.sizes, a.step)?;
    match a.what {
        Analysis::Lc => {
            for n in sizes {
                let dims = GridDims::cubic(&kernel.spec, n);
                let (conds, traffic) = layer_conditions(&kernel, &machine, &dims, a.lc.options())?;
                println!("N={n}");
                println!("  level class  holds  break  requirement");
                for c in conds {
                    println!(
                        "  {:<5} {:<5}  {:<5}  {:>5}  {} = {} B of {} B",
                        c.level,
                        c.dimensionality,
                        c.holds,
                        c.break_size.to_string(),
                        c.requirement,
                        c.requirement_bytes,
                        c.effective_size_bytes
                    );
                }
                for l in &traffic.links {
                    println!(
                        "  {:<6} load {:>7} B/CL  store {:>7} B/CL",
                        l.link, l.load_bytes_per_cl, l.store_bytes_per_cl
                    );
                }
            }
        }
        Analysis::Ecm => {
            println!("N,T_comp,T_RegL1,T_L1L2,T_L2L3,T_L3MEM,T_ECM,MLUP/s");
            for n in sizes {
                let dims = GridDims::cubic(&kernel.spec, n);
                let traffic = traffic_for(&kernel, &machine, &dims, a.predictor, a.lc.options())?;
                let e = ecm_from_traffic(&kernel, &machine, &traffic)?;
                let t = e.terms;
                let mlups = stencilkit::models::convert(e.t_total, machine.clock_hz, lup)? / 1e6;
                println!(
                    "{n},{},{},{},{},{},{},{mlups:.1}",
                    t.t_comp, t.t_reg_l1, t.t_l1l2, t.t_l2l3, t.t_l3mem, e.t_total
                );
            }
        }
        Analysis::Roofline => {
            let t_comp = incore(&kernel, &machine)?.t_comp;
            println!("N,bottleneck,cycles_per_cl,MLUP/s");
            for n in sizes {
                let dims = GridDims::cubic(&kernel.spec, n);
                let traffic = traffic_for(&kernel, &machine, &dims, a.predictor, a.lc.options())?;
                let r = roofline(&traffic, &machine, t_comp, lup)?;
                println!("{n},{},{},{:.1}", r.bottleneck, r.cycles_per_cl, r.performance / 1e6);
            }
        }
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let kernel = a.stencil.kernel()?;
    let (machine, _) = resolve_machine(&a.machine)?;
    let sizes = parse_sizes(&a.sizes, a.step)?;
    if let Some(path) = &a.trace {
        let dims = GridDims::cubic(&kernel.spec, sizes[0]);
        dims.validate_for(&kernel.spec)?;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_trace(&mut w, address_stream(&kernel, &dims, machine.line_size()))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    let options = SimOptions {
        warmup_sweeps: a.warmup,
        element_budget: a.element_budget,
        fully_associative: a.fully_associative,
    };
    println!("N,link,load_B_per_CL,store_B_per_CL");
    for n in sizes {
        let dims = GridDims::cubic(&kernel.spec, n);
        let r = simulate_cache(&kernel, &machine, &dims, options)?;
        for l in &r.traffic.links {
            println!("{n},{},{},{}", l.link, l.load_bytes_per_cl, l.store_bytes_per_cl);
        }
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let kernel = a.stencil.kernel()?;
    let (machine, _) = resolve_machine(&a.machine)?;
    let sizes = parse_sizes(&a.sizes, a.step)?;
    let mut run = RunOptions::new(CompileCommand::from_env()?);
    run.min_runtime_s = a.min_runtime;
    run.seed = a.seed;
    run.pin = !a.no_pin;
    println!("N,threads,block,sweeps,wall_s,mean_wall_s,cycles_per_cl,mlups,checksum");
    let print = |r: &stencilkit::bench::BenchmarkResult| {
        println!(
            "{},{},{},{},{},{},{},{},{}",
            r.dims.n,
            r.threads,
            r.block.map(|b| b.to_string()).unwrap_or_default(),
            r.sweeps,
            r.wall_s,
            r.mean_wall_s,
            r.cycles_per_cl,
            r.mlups,
            r.checksum
        )
    };
    if let Some(t) = a.threads {
        let dims = GridDims::cubic(&kernel.spec, *sizes.last().unwrap());
        let s = thread_sweep(&kernel, &machine, &dims, t, &run)?;
        s.results.iter().for_each(print);
        for (t, e) in &s.failures {
            eprintln!("{t} threads failed: {e}");
        }
        for f in &s.flags {
            eprintln!("note: {f}");
        }
    } else {
        let block = a.block.map(BlockSpec::new).transpose()?;
        let s = grid_sweep(&kernel, &machine, &sizes, block, &run)?;
        s.results.iter().for_each(print);
        for (n, e) in &s.failures {
            eprintln!("N={n} failed: {e}");
        }
    }
    Ok(())
}

fn workflow(a: &WorkflowArgs) -> Result<()> {
    let spec = a.stencil.spec()?;
    let (machine, machine_text) = resolve_machine(&a.machine)?;
    let sizes = a.sizes.as_deref().map(|s| parse_sizes(s, a.step)).transpose()?;
    let plan_options = PlanOptions {
        step: a.step,
        sizes,
        threads: a.threads,
        block_level: a.block_level.clone(),
        memory_budget: parse_bytes(&a.memory_budget)?,
        lc: a.lc.options(),
        ..PlanOptions::default()
    };
    let plan = plan(&spec, &machine, &plan_options)?;
    let benchmarks = if a.with_benchmarks {
        let mut run = RunOptions::new(CompileCommand::from_env()?);
        run.min_runtime_s = a.min_runtime;
        Some(run)
    } else {
        None
    };
    let mut measurements = BTreeMap::new();
    if let (Some(mapping), Some(dir)) = (&a.counters, &a.counter_dir) {
        let mapping = load_counter_mapping(mapping)?;
        for &n in &plan.sizes {
            let path = dir.join(format!("{n}.csv"));
            if path.exists() {
                measurements.insert(n, ingest_counters(&path, &mapping)?);
            }
        }
    }
    let options = WorkflowOptions {
        benchmarks,
        measurements,
        status_override: a.status.map(|s| (s, a.status_comment.clone())),
        invocation: invocation(),
        machine_source: Some(machine_text),
        ..WorkflowOptions::default()
    };
    let options = WorkflowOptions {
        sim: SimOptions {
            element_budget: a.sim_budget,
            ..SimOptions::default()
        },
        ..options
    };
    let bundle = run_workflow(&plan, &options)?;
    bundle.write_to(&a.out_dir)?;
    for n in &bundle.notices {
        eprintln!("note: {n}");
    }
    println!(
        "wrote {} sizes ({}..={}) to {}; status {}: {}",
        plan.sizes.len(),
        plan.sizes[0],
        plan.n_max,
        a.out_dir.display(),
        bundle.status,
        bundle.comment
    );
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let (machine, _) = resolve_machine(&a.machine)?;
    let mut tables: Tables = BTreeMap::new();
    let entries = fs::read_dir(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&a.out_dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            tables.insert(name, Table::from_csv(&text)?);
        }
    }
    let lup = machine.line_size() as f64 / a.element_size as f64;
    let (plots, notices) = render_plots(&tables, &machine, lup);
    for (name, svg) in &plots {
        let path: PathBuf = Path::new(&a.out_dir).join(name);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    for n in notices {
        eprintln!("note: {n}");
    }
    println!("rendered {} plots in {}", plots.len(), a.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Workflow(a) => workflow(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
