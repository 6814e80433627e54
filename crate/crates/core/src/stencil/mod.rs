//! Stencil classification, kernel IR, code emission and the reference interpreter.

mod emit;
mod interp;
pub mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use emit::{emit_c, validate_blocking, BlockSpec, EmitOptions};
pub use interp::{checksum, interpret, reference_inputs, seeded_value, Element, KernelInputs, Traversal};

/// Largest supported radius for star stencils.
pub const MAX_STAR_RADIUS: u32 = 8;
/// Upper bound on box stencil terms; (2r+1)^d must not exceed it.
pub const MAX_BOX_TERMS: usize = 729;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilKind {
    Star,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Homogeneous,
    Heterogeneous,
    Isotropic,
    PointSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientStorage {
    Constant,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Float32,
    Float64,
}

impl ElementType {
    pub fn size_bytes(self) -> usize {
        match self {
            ElementType::Float32 => 4,
            ElementType::Float64 => 8,
        }
    }

    pub fn bits(self) -> u32 {
        self.size_bytes() as u32 * 8
    }

    pub fn c_name(self) -> &'static str {
        match self {
            ElementType::Float32 => "float",
            ElementType::Float64 => "double",
        }
    }
}

macro_rules! cli_enum {
    ($ty:ty { $($variant:ident => [$($name:literal),+]),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($($name)|+ => Ok(<$ty>::$variant),)+
                    other => Err(Error::InvalidInput(format!(
                        "unknown {} `{}`",
                        stringify!($ty),
                        other
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(<$ty>::$variant => cli_enum!(@first $($name),+),)+
                };
                f.write_str(name)
            }
        }
    };
    (@first $first:literal $(, $rest:literal)*) => { $first };
}

cli_enum!(StencilKind { Star => ["star"], Box => ["box"] });
cli_enum!(Weighting {
    Homogeneous => ["homogeneous", "homo"],
    Heterogeneous => ["heterogeneous", "hetero"],
    Isotropic => ["isotropic", "iso"],
    PointSymmetric => ["point-symmetric", "point_symmetric", "pointsym"],
});
cli_enum!(CoefficientStorage {
    Constant => ["constant", "const"],
    Variable => ["variable", "var"],
});
cli_enum!(ElementType {
    Float32 => ["float32", "float", "f32"],
    Float64 => ["float64", "double", "f64"],
});

/// The six classification parameters of a stencil family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StencilSpec {
    pub dimensions: u32,
    pub radius: u32,
    pub kind: StencilKind,
    pub weighting: Weighting,
    pub storage: CoefficientStorage,
    pub element: ElementType,
}

impl StencilSpec {
    pub fn new(
        dimensions: u32,
        radius: u32,
        kind: StencilKind,
        weighting: Weighting,
        storage: CoefficientStorage,
        element: ElementType,
    ) -> Result<Self> {
        let spec = StencilSpec {
            dimensions,
            radius,
            kind,
            weighting,
            storage,
            element,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dimensions) {
            return Err(Error::UnsupportedStencil(format!(
                "{} dimensions requested, only 2D and 3D stencils are supported",
                self.dimensions
            )));
        }
        if self.radius == 0 {
            return Err(Error::UnsupportedStencil("radius must be at least 1".into()));
        }
        match self.kind {
            StencilKind::Star if self.radius > MAX_STAR_RADIUS => Err(Error::UnsupportedStencil(format!(
                "star radius {} exceeds the supported maximum of {MAX_STAR_RADIUS}",
                self.radius
            ))),
            StencilKind::Box if self.point_count() > MAX_BOX_TERMS => Err(Error::UnsupportedStencil(format!(
                "{}D box of radius {} has {} points, more than the supported {MAX_BOX_TERMS}",
                self.dimensions,
                self.radius,
                self.point_count()
            ))),
            _ => Ok(()),
        }
    }

    pub fn point_count(&self) -> usize {
        let (d, r) = (self.dimensions as usize, self.radius as usize);
        match self.kind {
            StencilKind::Star => 2 * d * r + 1,
            StencilKind::Box => (2 * r + 1).pow(d as u32),
        }
    }

    /// Short identifier such as `3D-1r-homo-star-const-double`.
    pub fn label(&self) -> String {
        let weighting = match self.weighting {
            Weighting::Homogeneous => "homo",
            Weighting::Heterogeneous => "hetero",
            Weighting::Isotropic => "iso",
            Weighting::PointSymmetric => "point",
        };
        let storage = match self.storage {
            CoefficientStorage::Constant => "const",
            CoefficientStorage::Variable => "var",
        };
        format!(
            "{}D-{}r-{}-{}-{}-{}",
            self.dimensions,
            self.radius,
            weighting,
            self.kind,
            storage,
            self.element.c_name()
        )
    }
}

/// Grid extents, outer to inner. 2D grids carry `m == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub dimensions: u32,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub element_size: usize,
}

impl GridDims {
    pub fn new_3d(m: usize, n: usize, p: usize, element_size: usize) -> Self {
        GridDims {
            dimensions: 3,
            m,
            n,
            p,
            element_size,
        }
    }

    pub fn new_2d(n: usize, p: usize, element_size: usize) -> Self {
        GridDims {
            dimensions: 2,
            m: 1,
            n,
            p,
            element_size,
        }
    }

    /// Cubic (or square, for 2D) grid for `spec`.
    pub fn cubic(spec: &StencilSpec, edge: usize) -> Self {
        let size = spec.element.size_bytes();
        if spec.dimensions == 3 {
            Self::new_3d(edge, edge, edge, size)
        } else {
            Self::new_2d(edge, edge, size)
        }
    }

    pub fn validate_for(&self, spec: &StencilSpec) -> Result<()> {
        if self.dimensions != spec.dimensions {
            return Err(Error::InvalidGrid(format!(
                "{}D grid used with a {}D stencil",
                self.dimensions, spec.dimensions
            )));
        }
        if self.element_size != spec.element.size_bytes() {
            return Err(Error::InvalidGrid(format!(
                "element size {} B does not match {}",
                self.element_size,
                spec.element.c_name()
            )));
        }
        let min = 2 * spec.radius as usize + 2;
        let axes: &[(&str, usize)] = if self.dimensions == 3 {
            &[("M", self.m), ("N", self.n), ("P", self.p)]
        } else {
            &[("N", self.n), ("P", self.p)]
        };
        for (name, extent) in axes {
            if *extent < min {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {extent} leaves no interior for radius {} (need at least {min})",
                    spec.radius
                )));
            }
        }
        Ok(())
    }

    pub fn strides(&self) -> [usize; 3] {
        [self.n * self.p, self.p, 1]
    }

    pub fn len(&self) -> usize {
        self.m * self.n * self.p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bytes_per_array(&self) -> usize {
        self.len() * self.element_size
    }

    pub fn interior_points(&self, radius: usize) -> usize {
        let inner = |e: usize| e.saturating_sub(2 * radius);
        let outer = if self.dimensions == 3 { inner(self.m) } else { 1 };
        outer * inner(self.n) * inner(self.p)
    }

    pub fn linear_index(&self, k: usize, j: usize, i: usize) -> usize {
        (k * self.n + j) * self.p + i
    }
}

/// Relative offset of one stencil access. 2D stencils keep `k == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Offset {
    pub k: i32,
    pub j: i32,
    pub i: i32,
}

impl Offset {
    pub const CENTER: Offset = Offset { k: 0, j: 0, i: 0 };

    pub fn new(k: i32, j: i32, i: i32) -> Self {
        Offset { k, j, i }
    }

    pub fn max_norm(&self) -> u32 {
        self.k
            .unsigned_abs()
            .max(self.j.unsigned_abs())
            .max(self.i.unsigned_abs())
    }

    pub fn squared_norm(&self) -> u32 {
        (self.k * self.k + self.j * self.j + self.i * self.i) as u32
    }

    pub fn nonzero_axes(&self) -> usize {
        [self.k, self.j, self.i].iter().filter(|v| **v != 0).count()
    }

    pub fn negated(&self) -> Offset {
        Offset::new(-self.k, -self.j, -self.i)
    }

    pub fn linearize(&self, dims: &GridDims) -> i64 {
        let [sk, sj, _] = dims.strides();
        self.k as i64 * sk as i64 + self.j as i64 * sj as i64 + self.i as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoefficientRef {
    /// Index into the scalar coefficient list (`c0`, `c1`, ...).
    Scalar(usize),
    /// Component of the weight grid (`W[n][k][j][i]`).
    Weight(usize),
}

impl CoefficientRef {
    pub fn index(&self) -> usize {
        match self {
            CoefficientRef::Scalar(n) | CoefficientRef::Weight(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetTerm {
    pub array: String,
    pub offset: Offset,
    pub coefficient: CoefficientRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coefficients {
    Scalars(Vec<String>),
    WeightGrid { name: String, components: usize },
}

impl Coefficients {
    pub fn count(&self) -> usize {
        match self {
            Coefficients::Scalars(names) => names.len(),
            Coefficients::WeightGrid { components, .. } => *components,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub adds: usize,
    pub muls: usize,
    pub loads: usize,
    pub stores: usize,
    pub distinct_streams: usize,
}

/// A Jacobi-form stencil kernel: one read array, one write array, and the
/// ordered list of weighted reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelIR {
    pub spec: StencilSpec,
    pub read_array: String,
    pub write_array: String,
    pub terms: Vec<OffsetTerm>,
    pub coefficients: Coefficients,
    pub op_counts: OpCounts,
}

pub const READ_ARRAY: &str = "a";
pub const WRITE_ARRAY: &str = "b";
pub const WEIGHT_GRID: &str = "W";

fn stencil_offsets(spec: &StencilSpec) -> Vec<Offset> {
    let r = spec.radius as i32;
    let k_range = if spec.dimensions == 3 { -r..=r } else { 0..=0 };
    let mut offsets = Vec::with_capacity(spec.point_count());
    for k in k_range {
        for j in -r..=r {
            for i in -r..=r {
                let o = Offset::new(k, j, i);
                let keep = match spec.kind {
                    StencilKind::Box => true,
                    StencilKind::Star => o.nonzero_axes() <= 1,
                };
                if keep {
                    offsets.push(o);
                }
            }
        }
    }
    // center first, remaining offsets lexicographic by (k, j, i)
    offsets.sort_by_key(|o| (*o != Offset::CENTER, *o));
    offsets
}

/// Assigns coefficient indices to the ordered offsets according to the weighting mode.
fn assign_coefficients(weighting: Weighting, offsets: &[Offset]) -> (Vec<usize>, usize) {
    match weighting {
        Weighting::Homogeneous => (vec![0; offsets.len()], 1),
        Weighting::Heterogeneous => ((0..offsets.len()).collect(), offsets.len()),
        Weighting::Isotropic => {
            let norms: BTreeSet<u32> = offsets.iter().map(Offset::squared_norm).collect();
            let class: BTreeMap<u32, usize> = norms.into_iter().enumerate().map(|(n, s)| (s, n)).collect();
            let idx = offsets.iter().map(|o| class[&o.squared_norm()]).collect();
            (idx, class.len())
        }
        Weighting::PointSymmetric => {
            let mut pair: BTreeMap<Offset, usize> = BTreeMap::new();
            let mut next = 0;
            let idx = offsets
                .iter()
                .map(|o| {
                    let key = (*o).min(o.negated());
                    *pair.entry(key).or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect();
            (idx, next)
        }
    }
}

/// Builds the kernel IR for a stencil classification.
pub fn build_kernel(spec: &StencilSpec) -> Result<KernelIR> {
    spec.validate()?;
    let offsets = stencil_offsets(spec);
    let (coeff_idx, coeff_count) = assign_coefficients(spec.weighting, &offsets);

    let terms = offsets
        .iter()
        .zip(&coeff_idx)
        .map(|(offset, &c)| OffsetTerm {
            array: READ_ARRAY.to_string(),
            offset: *offset,
            coefficient: match spec.storage {
                CoefficientStorage::Constant => CoefficientRef::Scalar(c),
                CoefficientStorage::Variable => CoefficientRef::Weight(c),
            },
        })
        .collect();
    let coefficients = match spec.storage {
        CoefficientStorage::Constant => Coefficients::Scalars((0..coeff_count).map(|n| format!("c{n}")).collect()),
        CoefficientStorage::Variable => Coefficients::WeightGrid {
            name: WEIGHT_GRID.to_string(),
            components: coeff_count,
        },
    };

    let mut kernel = KernelIR {
        spec: *spec,
        read_array: READ_ARRAY.to_string(),
        write_array: WRITE_ARRAY.to_string(),
        terms,
        coefficients,
        op_counts: OpCounts::default(),
    };
    kernel.op_counts = count_ops(&kernel);
    Ok(kernel)
}

/// Per-iteration arithmetic and memory operation counts.
pub fn count_ops(kernel: &KernelIR) -> OpCounts {
    let terms = kernel.terms.len();
    let homogeneous = kernel.spec.weighting == Weighting::Homogeneous;
    let weight_loads = match &kernel.coefficients {
        Coefficients::WeightGrid { components, .. } => *components,
        Coefficients::Scalars(_) => 0,
    };
    OpCounts {
        adds: terms.saturating_sub(1),
        muls: if homogeneous { 1 } else { terms },
        loads: terms + weight_loads,
        stores: 1,
        distinct_streams: streams(kernel).len(),
    }
}

/// Distinct (array, outer offset) pairs: every row of data that advances with the inner loop.
pub fn streams(kernel: &KernelIR) -> BTreeSet<(String, i32, i32)> {
    let mut set: BTreeSet<(String, i32, i32)> = kernel
        .terms
        .iter()
        .map(|t| (t.array.clone(), t.offset.k, t.offset.j))
        .collect();
    for name in weight_arrays(kernel) {
        set.insert((name, 0, 0));
    }
    set.insert((kernel.write_array.clone(), 0, 0));
    set
}

/// Names of the individual weight-grid components, e.g. `W[3]`.
pub fn weight_arrays(kernel: &KernelIR) -> Vec<String> {
    match &kernel.coefficients {
        Coefficients::WeightGrid { name, components } => (0..*components).map(|c| format!("{name}[{c}]")).collect(),
        Coefficients::Scalars(_) => Vec::new(),
    }
}

/// Linearized element offsets per array, sorted descending.
pub fn linearized_offsets(kernel: &KernelIR, dims: &GridDims) -> BTreeMap<String, Vec<i64>> {
    let mut map: BTreeMap<String, Vec<i64>> = BTreeMap::new();
    for term in &kernel.terms {
        map.entry(term.array.clone())
            .or_default()
            .push(term.offset.linearize(dims));
    }
    for name in weight_arrays(kernel) {
        map.insert(name, vec![0]);
    }
    map.insert(kernel.write_array.clone(), vec![0]);
    for offsets in map.values_mut() {
        offsets.sort_unstable_by(|a, b| b.cmp(a));
        offsets.dedup();
    }
    map
}
