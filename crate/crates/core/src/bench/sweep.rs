use serde::{Deserialize, Serialize};

use super::{compile_benchmark, BenchmarkResult, RunOptions};
use crate::machine::MachineModel;
use crate::stencil::{emit_c, BlockSpec, EmitOptions, GridDims, KernelIR};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub results: Vec<BenchmarkResult>,
    /// Sizes whose run failed, with the error text.
    pub failures: Vec<(usize, String)>,
    /// Sizes dropped because they were listed more than once.
    pub duplicates: Vec<usize>,
}

/// Sorted, deduplicated sizes. Rejects empty and descending lists.
pub(crate) fn normalize_sizes(sizes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if sizes.is_empty() {
        return Err(Error::InvalidInput("size list is empty".into()));
    }
    if let Some(w) = sizes.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(format!(
            "sizes must be ascending, found {} after {}",
            w[1], w[0]
        )));
    }
    let mut unique = sizes.to_vec();
    unique.dedup();
    let mut duplicates: Vec<usize> = sizes.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    duplicates.dedup();
    for d in &duplicates {
        log::warn!("size {d} listed more than once; measuring it once");
    }
    Ok((unique, duplicates))
}

fn emit_for(kernel: &KernelIR, machine: &MachineModel, openmp: bool, block: Option<BlockSpec>) -> Result<String> {
    emit_c(
        kernel,
        &EmitOptions {
            openmp,
            markers: false,
            blocking: block,
            line_size: machine.line_size() as usize,
        },
    )
}

/// Single-core benchmark over cubic grids. One binary serves every size;
/// a failing size is recorded and the sweep continues.
pub fn grid_sweep(
    kernel: &KernelIR,
    machine: &MachineModel,
    sizes: &[usize],
    block: Option<BlockSpec>,
    options: &RunOptions,
) -> Result<SweepOutcome> {
    let (sizes, duplicates) = normalize_sizes(sizes)?;
    let source = emit_for(kernel, machine, options.openmp, block)?;
    let binary = compile_benchmark(&source, machine, options)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for n in sizes {
        let dims = GridDims::cubic(&kernel.spec, n);
        match binary.run(&dims, block, machine, options) {
            Ok(r) => results.push(r),
            Err(e) => {
                log::warn!("size {n} failed: {e}");
                failures.push((n, e.to_string()));
            }
        }
    }
    if results.is_empty() {
        let detail = failures
            .iter()
            .map(|(n, e)| format!("{n}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Sweep(detail));
    }
    Ok(SweepOutcome {
        results,
        failures,
        duplicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadSweep {
    pub results: Vec<BenchmarkResult>,
    pub failures: Vec<(u32, String)>,
    /// Scaling irregularities worth a look; they do not fail the sweep.
    pub flags: Vec<String>,
}

/// Relative drop in performance tolerated before a thread count is flagged.
const SCALING_NOISE: f64 = 0.05;

/// Flags thread counts where performance drops noticeably below the best
/// seen so far.
pub fn scaling_flags(results: &[BenchmarkResult]) -> Vec<String> {
    let mut best: f64 = 0.0;
    let mut flags = Vec::new();
    for r in results {
        if best > 0.0 && r.mlups < best * (1.0 - SCALING_NOISE) {
            flags.push(format!(
                "{} threads: {:.1} MLUP/s is below the {:.1} MLUP/s already reached",
                r.threads, r.mlups, best
            ));
        }
        best = best.max(r.mlups);
    }
    flags
}

/// OpenMP runs with 1..=max_threads threads, pinned compactly so the first
/// NUMA domain fills before the next.
pub fn thread_sweep(
    kernel: &KernelIR,
    machine: &MachineModel,
    dims: &GridDims,
    max_threads: u32,
    options: &RunOptions,
) -> Result<ThreadSweep> {
    if max_threads == 0 || max_threads > machine.cores_per_socket {
        return Err(Error::InvalidInput(format!(
            "thread count {max_threads} outside 1..={} cores of {}",
            machine.cores_per_socket, machine.name
        )));
    }
    let options = RunOptions {
        openmp: true,
        ..options.clone()
    };
    let source = emit_for(kernel, machine, true, None)?;
    let binary = compile_benchmark(&source, machine, &options)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for t in 1..=max_threads {
        let opts = RunOptions {
            threads: t,
            ..options.clone()
        };
        match binary.run(dims, None, machine, &opts) {
            Ok(r) => results.push(r),
            Err(e) => failures.push((t, e.to_string())),
        }
    }
    if results.is_empty() {
        return Err(Error::Sweep(format!("no thread count succeeded at {dims:?}")));
    }
    let flags = scaling_flags(&results);
    Ok(ThreadSweep {
        results,
        failures,
        flags,
    })
}
