use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::template::{render, HARNESS};
use super::{CoefficientRef, Coefficients, GridDims, KernelIR, Offset, Weighting};
use crate::{Error, Result};

/// Spatial blocking of one loop. 3D kernels tile the middle (`j`) loop,
/// 2D kernels tile the inner (`i`) loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
}

impl BlockSpec {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("block size must be at least 1".into()));
        }
        Ok(BlockSpec { size })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmitOptions {
    pub openmp: bool,
    pub markers: bool,
    pub blocking: Option<BlockSpec>,
    /// Cache line size used for array alignment and work accounting.
    pub line_size: usize,
}

impl EmitOptions {
    pub fn plain() -> Self {
        EmitOptions {
            line_size: 64,
            ..Default::default()
        }
    }
}

/// Rejects block sizes that would leave a single degenerate tile.
pub fn validate_blocking(kernel: &KernelIR, dims: &GridDims, block: &BlockSpec) -> Result<()> {
    if block.size == 0 {
        return Err(Error::InvalidInput("block size must be at least 1".into()));
    }
    if kernel.spec.dimensions == 2 && block.size >= dims.p {
        return Err(Error::InvalidInput(format!(
            "block of {} covers the whole tiled axis (P = {}); the tile is degenerate",
            block.size, dims.p
        )));
    }
    Ok(())
}

fn index_expr(var: &str, delta: i32) -> String {
    match delta {
        0 => var.to_string(),
        d if d > 0 => format!("{var}+{d}"),
        d => format!("{var}{d}"),
    }
}

fn access(array: &str, offset: &Offset, dims: u32) -> String {
    let mut s = String::from(array);
    if dims == 3 {
        write!(s, "[{}]", index_expr("k", offset.k)).unwrap();
    }
    write!(s, "[{}][{}]", index_expr("j", offset.j), index_expr("i", offset.i)).unwrap();
    s
}

fn coefficient_text(kernel: &KernelIR, c: &CoefficientRef) -> String {
    match (c, &kernel.coefficients) {
        (CoefficientRef::Scalar(n), _) => format!("c{n}"),
        (CoefficientRef::Weight(n), Coefficients::WeightGrid { name, .. }) => {
            access(&format!("{name}[{n}]"), &Offset::CENTER, kernel.spec.dimensions)
        }
        (CoefficientRef::Weight(n), Coefficients::Scalars(_)) => format!("c{n}"),
    }
}

/// The update statement, e.g. `b[k][j][i] = c0 * (a[k][j][i] + ...);`.
pub(crate) fn assignment(kernel: &KernelIR, indent: &str) -> String {
    let d = kernel.spec.dimensions;
    let lhs = access(&kernel.write_array, &Offset::CENTER, d);
    let cont = format!("{indent}    ");
    let mut s = format!("{indent}{lhs} = ");
    if kernel.spec.weighting == Weighting::Homogeneous {
        let coeff = coefficient_text(kernel, &kernel.terms[0].coefficient);
        write!(s, "{coeff} * (").unwrap();
        for (n, term) in kernel.terms.iter().enumerate() {
            if n > 0 {
                write!(s, "\n{cont}+ ").unwrap();
            }
            s.push_str(&access(&term.array, &term.offset, d));
        }
        s.push_str(");");
    } else {
        for (n, term) in kernel.terms.iter().enumerate() {
            if n > 0 {
                write!(s, "\n{cont}+ ").unwrap();
            }
            write!(
                s,
                "{} * {}",
                coefficient_text(kernel, &term.coefficient),
                access(&term.array, &term.offset, d)
            )
            .unwrap();
        }
        s.push(';');
    }
    s
}

fn loops(kernel: &KernelIR, blocked: bool) -> (Vec<String>, usize) {
    let r = "RADIUS";
    let naive_k = format!("for (long k = {r}; k < M - {r}; ++k) {{");
    let naive_j = format!("for (long j = {r}; j < N - {r}; ++j) {{");
    let naive_i = format!("for (long i = {r}; i < P - {r}; ++i) {{");
    let headers = match (kernel.spec.dimensions, blocked) {
        (3, false) => vec![naive_k, naive_j, naive_i],
        (3, true) => vec![
            format!("for (long jb = {r}; jb < N - {r}; jb += bs) {{"),
            naive_k,
            format!("for (long j = jb; j < (jb + bs < N - {r} ? jb + bs : N - {r}); ++j) {{"),
            naive_i,
        ],
        (_, false) => vec![naive_j, naive_i],
        (_, true) => vec![
            format!("for (long ib = {r}; ib < P - {r}; ib += bs) {{"),
            naive_j,
            format!("for (long i = ib; i < (ib + bs < P - {r} ? ib + bs : P - {r}); ++i) {{"),
        ],
    };
    let depth = headers.len();
    let lines = headers
        .into_iter()
        .enumerate()
        .map(|(n, h)| format!("{}{h}", "    ".repeat(n + 1)))
        .collect();
    (lines, depth)
}

fn declarations(kernel: &KernelIR) -> String {
    let d = kernel.spec.dimensions;
    let shape = if d == 3 { "[N][P]" } else { "[P]" };
    let mut s = String::new();
    writeln!(
        s,
        "    const real_t (*restrict {a}){shape} = (const real_t (*){shape})a_;",
        a = kernel.read_array
    )
    .unwrap();
    write!(
        s,
        "    real_t (*restrict {b}){shape} = (real_t (*){shape})b_;",
        b = kernel.write_array
    )
    .unwrap();
    match &kernel.coefficients {
        Coefficients::Scalars(names) => {
            for (n, name) in names.iter().enumerate() {
                write!(s, "\n    const real_t {name} = coef[{n}];").unwrap();
            }
        }
        Coefficients::WeightGrid { name, .. } => {
            let wshape = if d == 3 { "[M][N][P]" } else { "[N][P]" };
            write!(
                s,
                "\n    const real_t (*restrict {name}){wshape} = (const real_t (*){wshape})w_;"
            )
            .unwrap();
        }
    }
    s
}

/// Emits a self-contained C99 benchmark for `kernel`.
pub fn emit_c(kernel: &KernelIR, options: &EmitOptions) -> Result<String> {
    if let Some(block) = &options.blocking {
        if block.size == 0 {
            return Err(Error::InvalidInput("block size must be at least 1".into()));
        }
    }
    let line_size = if options.line_size == 0 { 64 } else { options.line_size };
    if !line_size.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "line size {line_size} is not a power of two"
        )));
    }
    let spec = &kernel.spec;
    let (nscalar, nweight) = match &kernel.coefficients {
        Coefficients::Scalars(v) => (v.len(), 0),
        Coefficients::WeightGrid { components, .. } => (0, *components),
    };

    let (loop_lines, depth) = loops(kernel, options.blocking.is_some());
    let body_indent = "    ".repeat(depth + 1);
    let mut body = assignment(kernel, &body_indent);
    for n in (1..=depth).rev() {
        write!(body, "\n{}}}", "    ".repeat(n)).unwrap();
    }
    let block_loops = loop_lines.join("\n");

    let omp = |s: &str| {
        if options.openmp {
            s.to_string()
        } else {
            String::new()
        }
    };
    let marker = |s: &str| {
        if options.markers {
            s.to_string()
        } else {
            String::new()
        }
    };

    let mut dims = String::new();
    writeln!(dims, "#define NDIM {}", spec.dimensions).unwrap();
    writeln!(dims, "#define RADIUS {}", spec.radius).unwrap();
    writeln!(dims, "#define NSCALAR {nscalar}").unwrap();
    writeln!(dims, "#define NWEIGHT {nweight}").unwrap();
    writeln!(dims, "#define LINE_SIZE_BYTES {line_size}").unwrap();
    writeln!(dims, "#define BLOCKED {}", u8::from(options.blocking.is_some())).unwrap();
    write!(dims, "#define DEFAULT_BLOCK {}", options.blocking.map_or(0, |b| b.size)).unwrap();

    let subs: BTreeMap<&str, String> = [
        (
            "MARKER_HEADER",
            marker("#ifdef LIKWID_PERFMON\n#include <likwid-marker.h>\n#endif"),
        ),
        ("DTYPE", format!("typedef {} real_t;", spec.element.c_name())),
        ("DIMS", dims),
        ("DECLARATIONS", declarations(kernel)),
        ("OMP_PRAGMA", omp("    #pragma omp parallel for schedule(static)")),
        ("BLOCK_LOOPS", block_loops),
        ("KERNEL_BODY", body),
        ("OMP_INIT_PRAGMA", omp("    #pragma omp parallel for schedule(static)")),
        (
            "MARKER_BEGIN",
            marker("#ifdef LIKWID_PERFMON\n    LIKWID_MARKER_INIT;\n    LIKWID_MARKER_START(\"stencil\");\n#endif"),
        ),
        (
            "MARKER_END",
            marker("#ifdef LIKWID_PERFMON\n    LIKWID_MARKER_STOP(\"stencil\");\n    LIKWID_MARKER_CLOSE;\n#endif"),
        ),
    ]
    .into_iter()
    .collect();

    let header = format!("/* {} | generated stencil benchmark */\n", spec.label());
    Ok(header + &render(HARNESS, &subs)?)
}
