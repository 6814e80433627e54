//! C ABI over the stencilkit library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! and released by the matching `*_free`. Every fallible function returns an
//! [`SkStatus`]; on failure a description is available from
//! [`sk_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stencilkit::cache::{layer_conditions, BreakSize, Dimensionality, LcOptions};
use stencilkit::machine::{parse_machine, resolve_machine, MachineModel};
use stencilkit::models::{convert, ecm_from_traffic, lup_per_cl};
use stencilkit::stencil::{
    build_kernel, emit_c, BlockSpec, CoefficientStorage, ElementType, EmitOptions, GridDims, KernelIR, StencilKind,
    StencilSpec, Weighting,
};
use stencilkit::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedStencil = 3,
    InvalidGrid = 4,
    Machine = 5,
    Io = 6,
    /// The output buffer was too small; the required length was still reported.
    BufferTooSmall = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStencilKind {
    Star = 0,
    Box = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkWeighting {
    Homogeneous = 0,
    Heterogeneous = 1,
    Isotropic = 2,
    PointSymmetric = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkCoefficientStorage {
    Constant = 0,
    Variable = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkElementType {
    Float32 = 0,
    Float64 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkDimensionality {
    D1 = 1,
    D2 = 2,
    D3 = 3,
}

/// Stencil parameters. The enum-typed fields are passed as plain integers
/// holding the values of `SkStencilKind`, `SkWeighting`,
/// `SkCoefficientStorage` and `SkElementType`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SkStencilSpec {
    pub dimensions: u32,
    pub radius: u32,
    pub kind: u32,
    pub weighting: u32,
    pub storage: u32,
    pub element: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SkOpCounts {
    pub adds: usize,
    pub muls: usize,
    pub loads: usize,
    pub stores: usize,
    pub distinct_streams: usize,
}

/// Grid extents including halos. 2D grids ignore `m`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SkGrid {
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SkLayerCondition {
    /// NUL-terminated level name, truncated to 15 bytes.
    pub level: [c_char; 16],
    pub dimensionality: u32,
    pub holds: bool,
    /// Smallest cubic edge at which the condition fails; 0 when it never does.
    pub break_size: u64,
    pub requirement_bytes: f64,
    pub effective_size_bytes: f64,
}

/// Bytes per cache line of work on each link, in order L1L2, L2L3, L3MEM.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SkTraffic {
    pub load_bytes: [f64; 3],
    pub store_bytes: [f64; 3],
}

/// ECM contributions and prediction in cycles per cache line of work.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SkEcm {
    pub t_comp: f64,
    pub t_reg_l1: f64,
    pub t_l1l2: f64,
    pub t_l2l3: f64,
    pub t_l3mem: f64,
    pub t_total: f64,
    /// Single-core performance in lattice updates per second.
    pub lups: f64,
}

/// Opaque stencil kernel.
pub struct SkKernel(KernelIR);

/// Opaque machine model.
pub struct SkMachine(MachineModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SkStatus {
    match e {
        Error::UnsupportedStencil(_) => SkStatus::UnsupportedStencil,
        Error::InvalidGrid(_) => SkStatus::InvalidGrid,
        Error::MachineParse { .. } | Error::MachineValidation { .. } => SkStatus::Machine,
        Error::Io { .. } => SkStatus::Io,
        Error::InvalidInput(_) => SkStatus::InvalidArgument,
        _ => SkStatus::Internal,
    }
}

fn fail(status: SkStatus, msg: impl Into<String>) -> SkStatus {
    set_error(msg);
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SkStatus>) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SkStatus::Internal, "internal panic"),
    }
}

fn lib<T>(r: stencilkit::Result<T>) -> Result<T, SkStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SkStatus> {
    p.as_ref()
        .ok_or_else(|| fail(SkStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SkStatus> {
    p.as_mut()
        .ok_or_else(|| fail(SkStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SkStatus> {
    if p.is_null() {
        return Err(fail(SkStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SkStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn pick<T: Copy>(value: u32, options: &[T], what: &str) -> Result<T, SkStatus> {
    options.get(value as usize).copied().ok_or_else(|| {
        fail(
            SkStatus::InvalidArgument,
            format!("{what} value {value} is out of range"),
        )
    })
}

fn spec_from(s: &SkStencilSpec) -> Result<StencilSpec, SkStatus> {
    let kind = pick(s.kind, &[StencilKind::Star, StencilKind::Box], "kind")?;
    let weighting = pick(
        s.weighting,
        &[
            Weighting::Homogeneous,
            Weighting::Heterogeneous,
            Weighting::Isotropic,
            Weighting::PointSymmetric,
        ],
        "weighting",
    )?;
    let storage = pick(
        s.storage,
        &[CoefficientStorage::Constant, CoefficientStorage::Variable],
        "storage",
    )?;
    let element = pick(s.element, &[ElementType::Float32, ElementType::Float64], "element")?;
    lib(StencilSpec::new(
        s.dimensions,
        s.radius,
        kind,
        weighting,
        storage,
        element,
    ))
}

fn dims_from(kernel: &KernelIR, g: &SkGrid) -> GridDims {
    let size = kernel.spec.element.size_bytes();
    if kernel.spec.dimensions == 3 {
        GridDims::new_3d(g.m, g.n, g.p, size)
    } else {
        GridDims::new_2d(g.n, g.p, size)
    }
}

/// Message of the last failed call on this thread, or null when there is
/// none. The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a kernel. Release it with `sk_kernel_free`.
///
/// # Safety
/// `spec` must point to a valid `SkStencilSpec` and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_new(spec: *const SkStencilSpec, out_kernel: *mut *mut SkKernel) -> SkStatus {
    guard(|| {
        let spec = spec_from(deref(spec, "spec")?)?;
        let slot = out(out_kernel, "out_kernel")?;
        let kernel = lib(build_kernel(&spec))?;
        *slot = Box::into_raw(Box::new(SkKernel(kernel)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle from `sk_kernel_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_free(kernel: *mut SkKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// # Safety
/// `kernel` must be a live handle and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_term_count(kernel: *const SkKernel, out_count: *mut usize) -> SkStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *out(out_count, "out_count")? = k.0.terms.len();
        Ok(())
    })
}

/// # Safety
/// `kernel` must be a live handle and `out_counts` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_op_counts(kernel: *const SkKernel, out_counts: *mut SkOpCounts) -> SkStatus {
    guard(|| {
        let c = &deref(kernel, "kernel")?.0.op_counts;
        *out(out_counts, "out_counts")? = SkOpCounts {
            adds: c.adds,
            muls: c.muls,
            loads: c.loads,
            stores: c.stores,
            distinct_streams: c.distinct_streams,
        };
        Ok(())
    })
}

/// Emits the C benchmark source. `block` of 0 selects the unblocked loop
/// nest. The string must be released with `sk_string_free`.
///
/// # Safety
/// `kernel` must be a live handle and `out_source` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_kernel_emit_c(
    kernel: *const SkKernel,
    openmp: bool,
    block: usize,
    out_source: *mut *mut c_char,
) -> SkStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let slot = out(out_source, "out_source")?;
        let blocking = if block == 0 {
            None
        } else {
            Some(lib(BlockSpec::new(block))?)
        };
        let options = EmitOptions {
            openmp,
            blocking,
            ..EmitOptions::plain()
        };
        let src = lib(emit_c(&k.0, &options))?;
        let c = CString::new(src).map_err(|_| fail(SkStatus::Internal, "source contains NUL"))?;
        *slot = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a machine file by path, or one of the built-in models by name
/// (`hsw`, `bdw`, `skx`, `zen`, `toy`).
///
/// # Safety
/// `path_or_name` must be a NUL-terminated string and `out_machine` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_machine_load(path_or_name: *const c_char, out_machine: *mut *mut SkMachine) -> SkStatus {
    guard(|| {
        let name = text(path_or_name, "path_or_name")?;
        let slot = out(out_machine, "out_machine")?;
        let (m, _) = lib(resolve_machine(name))?;
        *slot = Box::into_raw(Box::new(SkMachine(m)));
        Ok(())
    })
}

/// Parses a machine description from TOML text.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out_machine` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_machine_parse(toml_text: *const c_char, out_machine: *mut *mut SkMachine) -> SkStatus {
    guard(|| {
        let t = text(toml_text, "toml_text")?;
        let slot = out(out_machine, "out_machine")?;
        let m = lib(parse_machine(t, "<memory>"))?;
        *slot = Box::into_raw(Box::new(SkMachine(m)));
        Ok(())
    })
}

/// # Safety
/// `machine` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sk_machine_free(machine: *mut SkMachine) {
    if !machine.is_null() {
        drop(Box::from_raw(machine));
    }
}

/// Evaluates the layer conditions at `grid` with the default safety factor.
///
/// Writes up to `capacity` conditions to `out_conditions` and the number
/// available to `out_len`. Returns `SK_STATUS_BUFFER_TOO_SMALL` when
/// `capacity` is insufficient; pass a null buffer with capacity 0 to query
/// the size. `out_traffic` may be null.
///
/// # Safety
/// Handles must be live; `out_conditions` must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn sk_layer_conditions(
    kernel: *const SkKernel,
    machine: *const SkMachine,
    grid: SkGrid,
    out_conditions: *mut SkLayerCondition,
    capacity: usize,
    out_len: *mut usize,
    out_traffic: *mut SkTraffic,
) -> SkStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let m = deref(machine, "machine")?;
        let len = out(out_len, "out_len")?;
        let dims = dims_from(&k.0, &grid);
        let (conds, traffic) = lib(layer_conditions(&k.0, &m.0, &dims, LcOptions::default()))?;
        *len = conds.len();
        if let Some(t) = out_traffic.as_mut() {
            for (i, l) in traffic.links.iter().take(3).enumerate() {
                t.load_bytes[i] = l.load_bytes_per_cl;
                t.store_bytes[i] = l.store_bytes_per_cl;
            }
        }
        if capacity < conds.len() {
            return Err(fail(
                SkStatus::BufferTooSmall,
                format!("{} conditions do not fit in a buffer of {capacity}", conds.len()),
            ));
        }
        if out_conditions.is_null() {
            return Err(fail(SkStatus::NullPointer, "out_conditions is null"));
        }
        for (i, c) in conds.iter().enumerate() {
            let mut level = [0 as c_char; 16];
            for (dst, b) in level.iter_mut().zip(c.level.bytes().take(15)) {
                *dst = b as c_char;
            }
            out_conditions.add(i).write(SkLayerCondition {
                level,
                dimensionality: match c.dimensionality {
                    Dimensionality::D1 => 1,
                    Dimensionality::D2 => 2,
                    Dimensionality::D3 => 3,
                },
                holds: c.holds,
                break_size: match c.break_size {
                    BreakSize::At(n) => n,
                    BreakSize::Unbounded => 0,
                },
                requirement_bytes: c.requirement_bytes,
                effective_size_bytes: c.effective_size_bytes,
            });
        }
        Ok(())
    })
}

/// Single-core ECM prediction from layer-condition traffic at `grid`.
///
/// # Safety
/// Handles must be live and `out_ecm` writable.
#[no_mangle]
pub unsafe extern "C" fn sk_ecm(
    kernel: *const SkKernel,
    machine: *const SkMachine,
    grid: SkGrid,
    out_ecm: *mut SkEcm,
) -> SkStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let m = deref(machine, "machine")?;
        let slot = out(out_ecm, "out_ecm")?;
        let dims = dims_from(&k.0, &grid);
        let (_, traffic) = lib(layer_conditions(&k.0, &m.0, &dims, LcOptions::default()))?;
        let e = lib(ecm_from_traffic(&k.0, &m.0, &traffic))?;
        let lup = lup_per_cl(&m.0, k.0.spec.element.size_bytes());
        let [t_comp, t_reg_l1, t_l1l2, t_l2l3, t_l3mem] = e.terms.as_array();
        *slot = SkEcm {
            t_comp,
            t_reg_l1,
            t_l1l2,
            t_l2l3,
            t_l3mem,
            t_total: e.t_total,
            lups: lib(convert(e.t_total, m.0.clock_hz, lup))?,
        };
        Ok(())
    })
}

/// Converts cycles per cache line to MLUP/s.
///
/// # Safety
/// `out_mlups` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_convert_to_mlups(
    cycles_per_cl: f64,
    clock_hz: f64,
    lup_per_cl: f64,
    out_mlups: *mut f64,
) -> SkStatus {
    guard(|| {
        let slot = out(out_mlups, "out_mlups")?;
        *slot = lib(convert(cycles_per_cl, clock_hz, lup_per_cl))? / 1e6;
        Ok(())
    })
}
