use std::collections::BTreeMap;
use std::io::Write;

use crate::stencil::{weight_arrays, Coefficients, GridDims, KernelIR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub kind: AccessKind,
    pub addr: u64,
}

/// Placement of the kernel's arrays in one address space: read array first,
/// then the write array, then the weight components, each starting on a
/// line boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub bases: BTreeMap<String, u64>,
    pub total_bytes: u64,
}

impl Layout {
    pub fn new(kernel: &KernelIR, dims: &GridDims, line_size: u64) -> Layout {
        let bytes = dims.bytes_per_array() as u64;
        let stride = bytes.div_ceil(line_size) * line_size;
        let mut names = vec![kernel.read_array.clone(), kernel.write_array.clone()];
        names.extend(weight_arrays(kernel));
        let bases: BTreeMap<String, u64> = names
            .into_iter()
            .enumerate()
            .map(|(n, name)| (name, n as u64 * stride))
            .collect();
        let total_bytes = bases.len() as u64 * stride;
        Layout { bases, total_bytes }
    }
}

/// Per-point access template: (base address, element offset, kind).
pub(crate) fn point_template(kernel: &KernelIR, dims: &GridDims, layout: &Layout) -> Vec<(u64, i64, AccessKind)> {
    let mut events: Vec<(u64, i64, AccessKind)> = kernel
        .terms
        .iter()
        .map(|t| (layout.bases[&t.array], t.offset.linearize(dims), AccessKind::Load))
        .collect();
    if let Coefficients::WeightGrid { name, .. } = &kernel.coefficients {
        let mut seen = Vec::new();
        for t in &kernel.terms {
            let c = t.coefficient.index();
            if !seen.contains(&c) {
                seen.push(c);
                events.push((layout.bases[&format!("{name}[{c}]")], 0, AccessKind::Load));
            }
        }
    }
    events.push((layout.bases[&kernel.write_array], 0, AccessKind::Store));
    events
}

/// Iterator over the accesses of one naive sweep in program order.
pub struct AddressStream {
    template: Vec<(u64, i64, AccessKind)>,
    dims: GridDims,
    element_size: u64,
    lo: usize,
    k_hi: usize,
    k: usize,
    j: usize,
    i: usize,
    event: usize,
    done: bool,
}

impl Iterator for AddressStream {
    type Item = Access;

    fn next(&mut self) -> Option<Access> {
        if self.done {
            return None;
        }
        let idx = self.dims.linear_index(self.k, self.j, self.i) as i64;
        let (base, off, kind) = self.template[self.event];
        let access = Access {
            kind,
            addr: base + (idx + off) as u64 * self.element_size,
        };
        self.event += 1;
        if self.event == self.template.len() {
            self.event = 0;
            self.i += 1;
            if self.i == self.dims.p - self.lo {
                self.i = self.lo;
                self.j += 1;
                if self.j == self.dims.n - self.lo {
                    self.j = self.lo;
                    self.k += 1;
                    if self.k == self.k_hi {
                        self.done = true;
                    }
                }
            }
        }
        Some(access)
    }
}

/// Address stream of one sweep: per interior point, the term loads, the
/// weight loads, then the store.
pub fn address_stream(kernel: &KernelIR, dims: &GridDims, line_size: u64) -> AddressStream {
    let layout = Layout::new(kernel, dims, line_size);
    let template = point_template(kernel, dims, &layout);
    let r = kernel.spec.radius as usize;
    let (k_lo, k_hi) = if dims.dimensions == 3 { (r, dims.m - r) } else { (0, 1) };
    AddressStream {
        template,
        dims: *dims,
        element_size: dims.element_size as u64,
        lo: r,
        k_hi,
        k: k_lo,
        j: r,
        i: r,
        event: 0,
        done: dims.interior_points(r) == 0,
    }
}

/// Writes one `<L|S> <hex address>` line per access.
pub fn write_trace<W: Write>(out: &mut W, stream: impl Iterator<Item = Access>) -> std::io::Result<()> {
    for a in stream {
        let tag = match a.kind {
            AccessKind::Load => 'L',
            AccessKind::Store => 'S',
        };
        writeln!(out, "{tag} {:#x}", a.addr)?;
    }
    Ok(())
}
