//! The end-to-end data collection workflow: size planning, model sweeps,
//! optional benchmarks, thread scaling, blocking and the report bundle.

mod html;
mod svg;
mod table;

pub use html::render_html;
pub use svg::{nice_ticks, render_plots, secondary_labels, sig3, Tables};
pub use table::{read_csv, report_table, write_csv, ReportRow, Table, REPORT_HEADER};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{grid_sweep, thread_sweep, RunOptions};
use crate::cache::{
    layer_conditions, simulate_cache, BreakSize, Dimensionality, LayerCondition, LcModel, LcOptions, SimOptions,
    TrafficPrediction,
};
use crate::machine::{effective_size, MachineModel};
use crate::models::{
    ecm_from_traffic, incore, lup_per_cl, phenomenological_ecm, roofline, scale_cores, EcmPrediction, MeasurementRecord,
};
use crate::stencil::{build_kernel, emit_c, BlockSpec, EmitOptions, GridDims, KernelIR, StencilSpec};
use crate::{Error, Result};
use svg::{BLOCKING_HEADER, THREAD_HEADER, VOLUME_HEADER};

pub const DEFAULT_STEP: usize = 10;
pub const DEFAULT_START: usize = 10;
pub const DEFAULT_MEMORY_BUDGET: u64 = 16 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub start: usize,
    pub step: usize,
    /// Explicit sizes replace the planned range.
    pub sizes: Option<Vec<usize>>,
    /// Thread counts run from 1 to this value; defaults to the socket's cores.
    pub threads: Option<u32>,
    /// Cache level the blocking factor targets.
    pub block_level: String,
    pub memory_budget: u64,
    pub lc: LcOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            start: DEFAULT_START,
            step: DEFAULT_STEP,
            sizes: None,
            threads: None,
            block_level: "L3".into(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
            lc: LcOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowPlan {
    pub spec: StencilSpec,
    pub machine: MachineModel,
    pub sizes: Vec<usize>,
    pub step: usize,
    /// Edge of the largest grid; thread scaling and blocking run here.
    pub n_max: usize,
    /// Break of the last-level condition of the kernel's highest class.
    pub l3_break: BreakSize,
    pub threads: u32,
    pub block_level: String,
    pub block_factors: Vec<usize>,
    pub memory_budget: u64,
    pub lc: LcOptions,
}

/// Bytes of all arrays of a cubic grid.
pub fn working_set_bytes(kernel: &KernelIR, edge: usize) -> u64 {
    let arrays = 2 + crate::stencil::weight_arrays(kernel).len() as u64;
    let points = (edge as u64).pow(kernel.spec.dimensions);
    arrays * points * kernel.spec.element.size_bytes() as u64
}

fn top_class(kernel: &KernelIR) -> Dimensionality {
    *Dimensionality::for_kernel(kernel.spec.dimensions)
        .last()
        .expect("kernels have at least one class")
}

/// Largest block for which the target level's top condition holds at edge `n`.
/// 3D kernels tile the middle loop, 2D kernels the inner loop.
pub fn blocking_factor(
    kernel: &KernelIR,
    machine: &MachineModel,
    level: &str,
    n: usize,
    lc: LcOptions,
) -> Result<Option<usize>> {
    let spec = machine
        .level(level)
        .ok_or_else(|| Error::InvalidInput(format!("machine has no cache level `{level}`")))?;
    let model = LcModel::new(kernel, machine.line_size(), lc)?;
    let class = top_class(kernel);
    let elem = kernel.spec.element.size_bytes();
    let holds = |b: usize| -> Result<bool> {
        let dims = if kernel.spec.dimensions == 3 {
            GridDims::new_3d(n, b, n, elem)
        } else {
            GridDims::new_2d(n, b, elem)
        };
        Ok(model
            .conditions(machine, &dims)?
            .iter()
            .any(|c| c.level == spec.name && c.dimensionality == class && c.holds))
    };
    let hi = n.saturating_sub(2 * kernel.spec.radius as usize).max(1);
    if !holds(1)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1, hi);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(Some(lo))
}

/// Chooses the grid sizes: up to 1.5 times the last-level break, rounded
/// down to the step and reduced until all arrays fit the memory budget.
pub fn plan(spec: &StencilSpec, machine: &MachineModel, options: &PlanOptions) -> Result<WorkflowPlan> {
    spec.validate()?;
    machine.validate()?;
    if options.step == 0 || options.start == 0 {
        return Err(Error::Plan("start and step must be positive".into()));
    }
    let kernel = build_kernel(spec)?;
    let last = machine.levels().last().expect("validated machines have levels");
    let model = LcModel::new(&kernel, machine.line_size(), options.lc)?;
    let l3_break = model.break_size(top_class(&kernel), effective_size(last, options.lc.safety)?);
    let min_edge = 2 * spec.radius as usize + 2;
    let fits = |n: usize| working_set_bytes(&kernel, n) <= options.memory_budget;

    let sizes = match &options.sizes {
        Some(list) => {
            if list.is_empty() {
                return Err(Error::Plan("size list is empty".into()));
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Plan("sizes must be strictly ascending".into()));
            }
            if let Some(n) = list.iter().find(|n| **n < min_edge) {
                return Err(Error::Plan(format!("size {n} is below the minimum edge {min_edge}")));
            }
            let largest = *list.last().unwrap();
            if !fits(largest) {
                return Err(Error::Plan(format!(
                    "{largest}^{} needs {} bytes, over the budget of {}",
                    spec.dimensions,
                    working_set_bytes(&kernel, largest),
                    options.memory_budget
                )));
            }
            list.clone()
        }
        None => {
            let BreakSize::At(b) = l3_break else {
                return Err(Error::Plan(format!(
                    "the {} condition never breaks; pass explicit sizes",
                    last.name
                )));
            };
            let target = (1.5 * b as f64).floor() as usize;
            let mut n_max = target - target % options.step;
            while n_max >= options.start && !fits(n_max) {
                n_max -= options.step;
            }
            if n_max < options.start || !fits(options.start) {
                return Err(Error::Plan(format!(
                    "even {}^{} ({} bytes) exceeds the memory budget of {} bytes",
                    options.start,
                    spec.dimensions,
                    working_set_bytes(&kernel, options.start),
                    options.memory_budget
                )));
            }
            let first = if options.start >= min_edge {
                options.start
            } else {
                options.start + (min_edge - options.start).div_ceil(options.step) * options.step
            };
            (first..=n_max).step_by(options.step).collect::<Vec<_>>()
        }
    };
    if sizes.is_empty() {
        return Err(Error::Plan("no grid size satisfies the radius and budget".into()));
    }
    let n_max = *sizes.last().unwrap();
    let threads = options.threads.unwrap_or(machine.cores_per_socket);
    if threads == 0 || threads > machine.cores_per_socket {
        return Err(Error::Plan(format!(
            "thread count {threads} outside 1..={}",
            machine.cores_per_socket
        )));
    }
    let mut block_factors = Vec::new();
    if let Some(b) = blocking_factor(&kernel, machine, &options.block_level, n_max, options.lc)? {
        for f in [b, b / 2, b / 4] {
            if f >= 1 && !block_factors.contains(&f) {
                block_factors.push(f);
            }
        }
    }
    Ok(WorkflowPlan {
        spec: *spec,
        machine: machine.clone(),
        sizes,
        step: options.step,
        n_max,
        l3_break,
        threads,
        block_level: options.block_level.clone(),
        block_factors,
        memory_budget: options.memory_budget,
        lc: options.lc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Green,
    Yellow,
    Red,
}

impl Status {
    pub fn color(self) -> &'static str {
        match self {
            Status::Green => "#2e9e44",
            Status::Yellow => "#e0b000",
            Status::Red => "#d0342c",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Green => "green",
            Status::Yellow => "yellow",
            Status::Red => "red",
        })
    }
}

impl FromStr for Status {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "green" => Ok(Status::Green),
            "yellow" => Ok(Status::Yellow),
            "red" => Ok(Status::Red),
            other => Err(Error::InvalidInput(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkflowOptions {
    /// Run benchmarks with these options; `None` produces a model-only report.
    pub benchmarks: Option<RunOptions>,
    pub sim: SimOptions,
    /// Counter measurements by grid edge.
    pub measurements: BTreeMap<usize, MeasurementRecord>,
    pub status_override: Option<(Status, String)>,
    /// Command line recorded in the reproduction section.
    pub invocation: String,
    /// Machine file text the digest is taken over; the serialized model if `None`.
    pub machine_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub rows: Vec<ReportRow>,
    /// CSV files by name, `report.csv` first in the schema sense.
    pub tables: BTreeMap<String, String>,
    pub plots: BTreeMap<String, String>,
    pub html: String,
    pub status: Status,
    pub comment: String,
    /// Per-row failures and skipped plots.
    pub notices: Vec<String>,
    pub conditions: Vec<LayerCondition>,
    pub kernel_source: String,
    pub machine_digest: String,
}

impl ReportBundle {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let index = ("index.html".to_string(), self.html.clone());
        let files = self.tables.iter().chain(&self.plots).chain([(&index.0, &index.1)]);
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

struct SizeModels {
    lc: (TrafficPrediction, EcmPrediction),
    cs: Result<(TrafficPrediction, EcmPrediction)>,
}

fn model_size(kernel: &KernelIR, plan: &WorkflowPlan, n: usize, sim: SimOptions) -> Result<SizeModels> {
    let m = &plan.machine;
    let dims = GridDims::cubic(&kernel.spec, n);
    let (_, lc_traffic) = layer_conditions(kernel, m, &dims, plan.lc)?;
    let lc_ecm = ecm_from_traffic(kernel, m, &lc_traffic)?;
    let cs = simulate_cache(kernel, m, &dims, sim).and_then(|r| {
        let e = ecm_from_traffic(kernel, m, &r.traffic)?;
        Ok((r.traffic, e))
    });
    Ok(SizeModels {
        lc: (lc_traffic, lc_ecm),
        cs,
    })
}

/// Model sweeps in parallel, one scoped thread per chunk of sizes.
fn model_sweep(kernel: &KernelIR, plan: &WorkflowPlan, sim: SimOptions) -> Vec<Result<SizeModels>> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(plan.sizes.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<SizeModels>>> = (0..plan.sizes.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= plan.sizes.len() {
                    break;
                }
                let r = model_size(kernel, plan, plan.sizes[i], sim);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every size is modeled")).collect()
}

fn total_bytes(t: &TrafficPrediction, i: usize) -> f64 {
    t.links[i].load_bytes_per_cl + t.links[i].store_bytes_per_cl
}

fn level_number(name: &str, index: usize) -> f64 {
    name.trim_start_matches(|c: char| !c.is_ascii_digit())
        .parse()
        .unwrap_or(index as f64 + 1.0)
}

/// Auto-suggested status: the worst relative deviation between benchmark and
/// ECM (LC) on rows past the last-level break, or on all rows if none are.
pub fn suggest_status(rows: &[ReportRow], machine: &MachineModel, l3_break: BreakSize) -> (Status, String) {
    let pairs: Vec<(usize, f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let b = r.benchmark_cycles?;
            let e = crate::models::compose_ecm(r.ecm_lc?, machine.overlap_policy).ok()?;
            Some((r.n, b, e.t_total))
        })
        .collect();
    if pairs.is_empty() {
        return (
            Status::Yellow,
            "model-only report: no benchmark data to grade against".into(),
        );
    }
    let plateau: Vec<_> = match l3_break.value() {
        Some(b) if pairs.iter().any(|p| p.0 as u64 >= b) => pairs.iter().filter(|p| p.0 as u64 >= b).collect(),
        _ => pairs.iter().collect(),
    };
    let worst = plateau.iter().map(|(_, b, e)| (b - e).abs() / e).fold(0.0, f64::max);
    let status = if worst <= 0.2 {
        Status::Green
    } else if worst <= 0.5 {
        Status::Yellow
    } else {
        Status::Red
    };
    (
        status,
        format!(
            "largest benchmark vs ECM deviation {:.1}% over {} sizes",
            worst * 100.0,
            plateau.len()
        ),
    )
}

const PHENOM_HEADER: [&str; 9] = [
    "N^3",
    "Phenom Tol",
    "Phenom Tnol",
    "Phenom Tl1l2",
    "Phenom Tl2l3",
    "Phenom Tl3mem",
    "Phenom cycl",
    "Phenom lower bound",
    "Measured cycl",
];

/// Runs the workflow and assembles the report bundle.
pub fn run_workflow(plan: &WorkflowPlan, options: &WorkflowOptions) -> Result<ReportBundle> {
    let machine = &plan.machine;
    let kernel = build_kernel(&plan.spec)?;
    let lup = lup_per_cl(machine, plan.spec.element.size_bytes());
    let mut notices = Vec::new();

    let benchmarks: BTreeMap<usize, f64> = match &options.benchmarks {
        None => BTreeMap::new(),
        Some(run) => match grid_sweep(&kernel, machine, &plan.sizes, None, run) {
            Ok(out) => {
                for (n, e) in &out.failures {
                    notices.push(format!("benchmark at N={n} failed: {e}"));
                }
                out.results.iter().map(|r| (r.dims.n, r.cycles_per_cl)).collect()
            }
            Err(e) => {
                notices.push(format!("benchmark sweep failed: {e}"));
                BTreeMap::new()
            }
        },
    };

    let mut rows = Vec::new();
    let mut volumes = Table::new(&VOLUME_HEADER);
    let ic = incore(&kernel, machine)?;
    let mut n_max_ecm = None;
    let mut over_budget = Vec::new();
    for (n, models) in plan.sizes.iter().zip(model_sweep(&kernel, plan, options.sim)) {
        let mut row = ReportRow {
            n: *n,
            benchmark_cycles: benchmarks.get(n).copied(),
            ecm_lc: None,
            roofline_lc: None,
            ecm_cs: None,
            roofline_cs: None,
        };
        let mut vol = vec![Some(*n as f64)];
        match models {
            Ok(m) => {
                let (lc_t, lc_e) = m.lc;
                row.ecm_lc = Some(lc_e.terms);
                row.roofline_lc = Some(roofline(&lc_t, machine, ic.t_comp, lup)?.cycles_per_cl);
                vol.extend((0..3).map(|i| Some(total_bytes(&lc_t, i))));
                if *n == plan.n_max {
                    n_max_ecm = Some(lc_e);
                }
                match m.cs {
                    Ok((cs_t, cs_e)) => {
                        row.ecm_cs = Some(cs_e.terms);
                        row.roofline_cs = Some(roofline(&cs_t, machine, ic.t_comp, lup)?.cycles_per_cl);
                        vol.extend((0..3).map(|i| Some(total_bytes(&cs_t, i))));
                    }
                    Err(e) => {
                        if let Error::SimulationBudget { .. } = e {
                            over_budget.push(*n);
                        } else {
                            notices.push(format!("cache simulation at N={n} skipped: {e}"));
                        }
                        vol.extend([None; 3]);
                    }
                }
            }
            Err(e) => {
                notices.push(format!("models at N={n} failed: {e}"));
                vol.extend([None; 6]);
            }
        }
        volumes.push(vol)?;
        rows.push(row);
    }
    if let (Some(first), Some(last)) = (over_budget.first(), over_budget.last()) {
        notices.push(format!(
            "cache simulation skipped for {} sizes (N={first}..={last}): address stream exceeds the budget of {} elements",
            over_budget.len(),
            options.sim.element_budget
        ));
    }

    // thread scaling at the largest size
    let mut threads = Table::new(&THREAD_HEADER);
    if let Some(ecm) = n_max_ecm {
        let scaling = scale_cores(&ecm, machine, plan.threads, lup)?;
        let measured: BTreeMap<u32, f64> = match &options.benchmarks {
            Some(run) => {
                let dims = GridDims::cubic(&plan.spec, plan.n_max);
                match thread_sweep(&kernel, machine, &dims, plan.threads, run) {
                    Ok(s) => {
                        notices.extend(s.flags.iter().map(|f| format!("thread scaling: {f}")));
                        s.results.iter().map(|r| (r.threads, r.mlups)).collect()
                    }
                    Err(e) => {
                        notices.push(format!("thread sweep failed: {e}"));
                        BTreeMap::new()
                    }
                }
            }
            None => BTreeMap::new(),
        };
        for p in &scaling.points {
            let domain = (p.cores - 1) / machine.cores_per_numa_domain;
            threads.push(vec![
                Some(p.cores as f64),
                Some(p.performance / 1e6),
                measured.get(&p.cores).copied(),
                Some(domain as f64),
            ])?;
        }
    }

    // blocking at the largest size
    let mut blocking = Table::new(&BLOCKING_HEADER);
    let blocked_ecm = |b: Option<usize>| -> Result<f64> {
        let elem = plan.spec.element.size_bytes();
        let n = plan.n_max;
        let dims = match (b, plan.spec.dimensions) {
            (None, _) => GridDims::cubic(&plan.spec, n),
            (Some(b), 3) => GridDims::new_3d(n, b, n, elem),
            (Some(b), _) => GridDims::new_2d(n, b, elem),
        };
        let model = LcModel::new(&kernel, machine.line_size(), plan.lc)?;
        let traffic = model.traffic(&kernel, machine, &dims)?;
        Ok(ecm_from_traffic(&kernel, machine, &traffic)?.t_total)
    };
    let blocked_bench: BTreeMap<usize, f64> = match &options.benchmarks {
        Some(run) if !plan.block_factors.is_empty() => {
            let mut out = BTreeMap::new();
            let src = emit_c(
                &kernel,
                &EmitOptions {
                    blocking: Some(BlockSpec::new(plan.block_factors[0])?),
                    line_size: machine.line_size() as usize,
                    ..EmitOptions::plain()
                },
            )?;
            match crate::bench::compile_benchmark(&src, machine, run) {
                Ok(bin) => {
                    let dims = GridDims::cubic(&plan.spec, plan.n_max);
                    for &b in &plan.block_factors {
                        match bin.run(&dims, Some(BlockSpec::new(b)?), machine, run) {
                            Ok(r) => {
                                out.insert(b, r.cycles_per_cl);
                            }
                            Err(e) => notices.push(format!("blocked benchmark {b} failed: {e}")),
                        }
                    }
                }
                Err(e) => notices.push(format!("blocked benchmark did not compile: {e}")),
            }
            out
        }
        _ => BTreeMap::new(),
    };
    blocking.push(vec![
        Some(plan.n_max as f64),
        Some(0.0),
        Some(blocked_ecm(None)?),
        benchmarks.get(&plan.n_max).copied(),
    ])?;
    for &b in &plan.block_factors {
        blocking.push(vec![
            Some(plan.n_max as f64),
            Some(b as f64),
            Some(blocked_ecm(Some(b))?),
            blocked_bench.get(&b).copied(),
        ])?;
    }

    // layer-condition breaks
    let dims_max = GridDims::cubic(&plan.spec, plan.n_max);
    let (conditions, _) = layer_conditions(&kernel, machine, &dims_max, plan.lc)?;
    let mut breaks = Table::new(&["level", "dimensionality", "break N"]);
    for (i, level) in machine.levels().iter().enumerate() {
        for c in conditions.iter().filter(|c| c.level == level.name) {
            let class = match c.dimensionality {
                Dimensionality::D1 => 1.0,
                Dimensionality::D2 => 2.0,
                Dimensionality::D3 => 3.0,
            };
            breaks.push(vec![
                Some(level_number(&level.name, i)),
                Some(class),
                c.break_size.value().map(|v| v as f64),
            ])?;
        }
    }

    let mut tables: Tables = BTreeMap::new();
    tables.insert("report.csv".into(), report_table(&rows)?);
    tables.insert("volumes.csv".into(), volumes);
    tables.insert("thread_scaling.csv".into(), threads);
    tables.insert("blocking.csv".into(), blocking);
    tables.insert("lc_breaks.csv".into(), breaks);

    if !options.measurements.is_empty() {
        let mut phen = Table::new(&PHENOM_HEADER);
        for (n, rec) in &options.measurements {
            match phenomenological_ecm(rec, machine, plan.spec.element.size_bytes()) {
                Ok(p) => phen.push(vec![
                    Some(*n as f64),
                    p.t_comp,
                    p.t_reg_l1,
                    p.t_l1l2,
                    p.t_l2l3,
                    p.t_l3mem,
                    Some(p.t_total),
                    Some(if p.lower_bound { 1.0 } else { 0.0 }),
                    rec.cycles_per_cl,
                ])?,
                Err(e) => notices.push(format!("measurement at N={n} unusable: {e}")),
            }
        }
        tables.insert("phenomenological.csv".into(), phen);
    }

    // plots read the tables back from their CSV text
    let csv_text: BTreeMap<String, String> = tables
        .iter()
        .map(|(k, t)| Ok((k.clone(), t.to_csv()?)))
        .collect::<Result<_>>()?;
    let reread: Tables = csv_text
        .iter()
        .map(|(k, v)| Ok((k.clone(), Table::from_csv(v)?)))
        .collect::<Result<_>>()?;
    let (plots, plot_notices) = render_plots(&reread, machine, lup);
    notices.extend(plot_notices);

    let (mut status, mut comment) = suggest_status(&rows, machine, plan.l3_break);
    let benchmarked = options.benchmarks.is_some();
    let failed_rows = rows
        .iter()
        .any(|r| r.ecm_lc.is_none() || (benchmarked && r.benchmark_cycles.is_none()));
    if failed_rows && status == Status::Green {
        status = Status::Yellow;
        comment.push_str("; some sizes failed");
    }
    if let Some((s, c)) = &options.status_override {
        status = *s;
        comment = c.clone();
    }

    let machine_text = match &options.machine_source {
        Some(t) => t.clone(),
        None => machine.to_toml()?,
    };
    let machine_digest = hex::encode(Sha256::digest(machine_text.as_bytes()));
    let kernel_source = emit_c(
        &kernel,
        &EmitOptions {
            line_size: machine.line_size() as usize,
            ..EmitOptions::plain()
        },
    )?;

    let mut bundle = ReportBundle {
        rows,
        tables: csv_text,
        plots,
        html: String::new(),
        status,
        comment,
        notices,
        conditions,
        kernel_source,
        machine_digest,
    };
    bundle.html = render_html(&bundle, plan, &options.invocation, ic.t_comp, ic.t_reg_l1);
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::parse_machine;
    use crate::stencil::{CoefficientStorage, ElementType, StencilKind, Weighting};

    fn seven_point() -> StencilSpec {
        StencilSpec::new(
            3,
            1,
            StencilKind::Star,
            Weighting::Homogeneous,
            CoefficientStorage::Constant,
            ElementType::Float64,
        )
        .unwrap()
    }

    fn toy() -> MachineModel {
        parse_machine(include_str!("../../machines/toy.toml"), "toy").unwrap()
    }

    #[test]
    fn toy_plan_tops_out_at_sixty() {
        let p = plan(&seven_point(), &toy(), &PlanOptions::default()).unwrap();
        assert_eq!(p.l3_break, BreakSize::At(40));
        assert_eq!(p.n_max, 60);
        assert_eq!(p.sizes, [10, 20, 30, 40, 50, 60]);
        assert_eq!(p.threads, 4);
    }

    #[test]
    fn budget_reduces_the_largest_size() {
        let opts = PlanOptions {
            memory_budget: 2 * 8 * 40u64.pow(3),
            ..Default::default()
        };
        let p = plan(&seven_point(), &toy(), &opts).unwrap();
        assert_eq!(p.n_max, 40);
        let tiny = PlanOptions {
            memory_budget: 2 * 8 * 1000 - 1,
            ..Default::default()
        };
        assert!(matches!(plan(&seven_point(), &toy(), &tiny), Err(Error::Plan(_))));
    }

    #[test]
    fn status_is_parsed_and_colored() {
        assert_eq!("Green".parse::<Status>().unwrap(), Status::Green);
        assert!("blue".parse::<Status>().is_err());
        assert_ne!(Status::Red.color(), Status::Green.color());
    }
}
