//! Compiling and running generated benchmarks, sweeps over sizes and
//! thread counts, and ingestion of external counter exports.

mod counters;
mod sweep;

pub use counters::{ingest_counters, load_counter_mapping, CounterField, CounterMapping};
pub use sweep::{grid_sweep, thread_sweep, SweepOutcome, ThreadSweep};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::machine::MachineModel;
use crate::stencil::{BlockSpec, GridDims};
use crate::{Error, Result};

/// Environment variable overriding the compiler command template.
pub const CC_TEMPLATE_ENV: &str = "STENCILKIT_CC_TEMPLATE";

/// `-ffp-contract=off` follows the machine flags so that the checksum stays
/// bitwise equal to the interpreter's at any optimization level.
pub const DEFAULT_CC_TEMPLATE: &str = "cc -std=c99 -O2 {flags} -ffp-contract=off {source} -o {output} -lm";

pub const DEFAULT_MIN_RUNTIME_S: f64 = 1.0;

/// A compiler invocation with `{source}`, `{output}` and `{flags}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileCommand {
    template: String,
}

impl CompileCommand {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        for key in ["{source}", "{output}"] {
            if !template.contains(key) {
                return Err(Error::InvalidInput(format!(
                    "compiler template `{template}` lacks the {key} placeholder"
                )));
            }
        }
        Ok(CompileCommand { template })
    }

    /// The environment override if set, the built-in default otherwise.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CC_TEMPLATE_ENV) {
            Ok(t) if !t.trim().is_empty() => Self::new(t),
            _ => Self::new(DEFAULT_CC_TEMPLATE),
        }
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn argv(&self, source: &Path, output: &Path, flags: &str) -> Result<Vec<String>> {
        let line = self
            .template
            .replace("{flags}", flags)
            .replace(
                "{source}",
                &shlex::try_quote(&source.to_string_lossy()).map_err(quote_err)?,
            )
            .replace(
                "{output}",
                &shlex::try_quote(&output.to_string_lossy()).map_err(quote_err)?,
            );
        let argv = shlex::split(&line)
            .ok_or_else(|| Error::InvalidInput(format!("compiler command `{line}` has unbalanced quotes")))?;
        if argv.is_empty() {
            return Err(Error::InvalidInput("empty compiler command".into()));
        }
        Ok(argv)
    }
}

fn quote_err(e: shlex::QuoteError) -> Error {
    Error::InvalidInput(format!("path cannot be quoted for the shell: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub min_runtime_s: f64,
    pub seed: u64,
    /// OpenMP threads; 1 without OpenMP.
    pub threads: u32,
    pub openmp: bool,
    pub pin: bool,
    pub compile: CompileCommand,
}

impl RunOptions {
    pub fn new(compile: CompileCommand) -> Self {
        RunOptions {
            min_runtime_s: DEFAULT_MIN_RUNTIME_S,
            seed: 0,
            threads: 1,
            openmp: false,
            pin: true,
            compile,
        }
    }
}

/// One measurement. `wall_s` is the fastest sweep, `mean_wall_s` the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub dims: GridDims,
    pub threads: u32,
    pub block: Option<usize>,
    pub sweeps: u64,
    pub wall_s: f64,
    pub mean_wall_s: f64,
    pub cycles_per_cl: f64,
    pub mlups: f64,
    pub checksum: f64,
}

const OUTPUT_KEYS: [&str; 6] = ["sweeps", "wall_s", "mean_wall_s", "cycles_per_cl", "mlups", "checksum"];

/// Parses the `key=value` lines printed by the harness.
pub fn parse_output(stdout: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (n, line) in stdout.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::BenchmarkOutput {
            line_no: n + 1,
            line: line.to_string(),
        };
        let (k, v) = line.split_once('=').ok_or_else(bad)?;
        let k = k.trim();
        if !OUTPUT_KEYS.contains(&k) {
            return Err(bad());
        }
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        out.insert(k.to_string(), v);
    }
    if let Some(missing) = OUTPUT_KEYS.iter().find(|k| !out.contains_key(**k)) {
        return Err(Error::BenchmarkOutput {
            line_no: stdout.lines().count(),
            line: format!("<missing {missing}=>"),
        });
    }
    Ok(out)
}

fn command_line(argv: &[String]) -> String {
    shlex::try_join(argv.iter().map(String::as_str)).unwrap_or_else(|_| argv.join(" "))
}

/// A compiled benchmark binary living in its own temporary directory.
#[derive(Debug)]
pub struct CompiledBenchmark {
    _dir: tempfile::TempDir,
    exe: PathBuf,
    pub compile_command: String,
}

pub fn compile_benchmark(source: &str, machine: &MachineModel, options: &RunOptions) -> Result<CompiledBenchmark> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let src = dir.path().join("stencil.c");
    let exe = dir.path().join("stencil");
    std::fs::write(&src, source).map_err(|e| Error::io(&src, e))?;
    let mut flags = machine.compiler_flags.clone();
    if options.openmp {
        flags.push_str(" -fopenmp");
    }
    let argv = options.compile.argv(&src, &exe, flags.trim())?;
    let shown = command_line(&argv);
    log::info!("compiling: {shown}");
    let out = Command::new(&argv[0])
        .args(&argv[1..])
        .output()
        .map_err(|e| Error::Compile {
            command: shown.clone(),
            diagnostics: format!(
                "could not start `{}`: {e}; set {CC_TEMPLATE_ENV} to a working compiler command",
                argv[0]
            ),
        })?;
    if !out.status.success() {
        return Err(Error::Compile {
            command: shown,
            diagnostics: String::from_utf8_lossy(&out.stderr).into_owned(),
        });
    }
    Ok(CompiledBenchmark {
        _dir: dir,
        exe,
        compile_command: shown,
    })
}

fn which(program: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(program))
        .find(|p| p.is_file())
}

impl CompiledBenchmark {
    pub fn run(
        &self,
        dims: &GridDims,
        block: Option<BlockSpec>,
        machine: &MachineModel,
        options: &RunOptions,
    ) -> Result<BenchmarkResult> {
        let mut args: Vec<String> = Vec::new();
        if dims.dimensions == 3 {
            args.push(dims.m.to_string());
        }
        args.push(dims.n.to_string());
        args.push(dims.p.to_string());
        args.push(options.min_runtime_s.to_string());
        args.push(machine.clock_hz.to_string());
        args.push(options.seed.to_string());
        if let Some(b) = block {
            args.push(b.size.to_string());
        }

        let mut argv = vec![self.exe.to_string_lossy().into_owned()];
        argv.extend(args);
        let mut cmd;
        if options.pin {
            match which("taskset") {
                Some(taskset) => {
                    cmd = Command::new(taskset);
                    cmd.arg("-c").arg(format!("0-{}", options.threads.max(1) - 1));
                    cmd.args(&argv);
                }
                None => {
                    log::warn!("taskset not found; running unpinned");
                    cmd = Command::new(&argv[0]);
                    cmd.args(&argv[1..]);
                }
            }
        } else {
            cmd = Command::new(&argv[0]);
            cmd.args(&argv[1..]);
        }
        if options.openmp {
            cmd.env("OMP_NUM_THREADS", options.threads.to_string());
            if options.pin {
                cmd.env("OMP_PROC_BIND", "close").env("OMP_PLACES", "cores");
            }
        }
        let shown = command_line(&argv);
        log::info!("running: {shown}");
        let out = cmd.output().map_err(|e| Error::Run {
            command: shown.clone(),
            status: "not started".into(),
            stderr: e.to_string(),
        })?;
        if !out.status.success() {
            // taskset refuses CPU lists outside the allowed set; retry unpinned
            if options.pin && which("taskset").is_some() {
                log::warn!("pinned run failed, retrying unpinned");
                let relaxed = RunOptions {
                    pin: false,
                    ..options.clone()
                };
                return self.run(dims, block, machine, &relaxed);
            }
            return Err(Error::Run {
                command: shown,
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        let values = parse_output(&String::from_utf8_lossy(&out.stdout))?;
        Ok(BenchmarkResult {
            dims: *dims,
            threads: options.threads,
            block: block.map(|b| b.size),
            sweeps: values["sweeps"] as u64,
            wall_s: values["wall_s"],
            mean_wall_s: values["mean_wall_s"],
            cycles_per_cl: values["cycles_per_cl"],
            mlups: values["mlups"],
            checksum: values["checksum"],
        })
    }
}

/// Compiles `source` and runs it once at `dims`.
pub fn run_benchmark(
    source: &str,
    dims: &GridDims,
    block: Option<BlockSpec>,
    machine: &MachineModel,
    options: &RunOptions,
) -> Result<BenchmarkResult> {
    compile_benchmark(source, machine, options)?.run(dims, block, machine, options)
}
