use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LinkTraffic, Predictor, TrafficPrediction};
use crate::machine::{effective_size, CacheLevelSpec, MachineModel};
use crate::stencil::{weight_arrays, GridDims, KernelIR, Offset};
use crate::{Error, Result};

pub const DEFAULT_SAFETY: f64 = 0.5;

/// Scaling class of a reuse distance, equivalently the layer condition that covers it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimensionality {
    #[serde(rename = "1D")]
    D1,
    #[serde(rename = "2D")]
    D2,
    #[serde(rename = "3D")]
    D3,
}

impl Dimensionality {
    pub const ALL: [Dimensionality; 3] = [Self::D1, Self::D2, Self::D3];

    pub fn for_kernel(dimensions: u32) -> &'static [Dimensionality] {
        if dimensions == 3 {
            &Self::ALL
        } else {
            &Self::ALL[..2]
        }
    }
}

impl fmt::Display for Dimensionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::D1 => "1D",
            Self::D2 => "2D",
            Self::D3 => "3D",
        })
    }
}

impl std::str::FromStr for Dimensionality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "1D" => Ok(Self::D1),
            "2D" => Ok(Self::D2),
            "3D" => Ok(Self::D3),
            _ => Err(Error::InvalidInput(format!("unknown dimensionality `{s}`"))),
        }
    }
}

/// How the capacity requirement of a layer condition is accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamAccounting {
    /// Satisfied distances plus one cache line per distinct stream.
    #[default]
    LinePerStream,
    /// Satisfied distances plus, for every access that is not satisfied
    /// (including the leading access of each array), a window as long as
    /// the largest satisfied distance.
    Window,
}

impl fmt::Display for StreamAccounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinePerStream => "line_per_stream",
            Self::Window => "window",
        })
    }
}

impl std::str::FromStr for StreamAccounting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "line_per_stream" => Ok(Self::LinePerStream),
            "window" => Ok(Self::Window),
            _ => Err(Error::InvalidInput(format!("unknown stream accounting `{s}`"))),
        }
    }
}

/// A linear form `np·N·P + p·P + one`, in elements or bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sym {
    pub np: i64,
    pub p: i64,
    pub one: i64,
}

impl Sym {
    fn of_offset(o: &Offset) -> Sym {
        Sym {
            np: o.k as i64,
            p: o.j as i64,
            one: o.i as i64,
        }
    }

    fn sub(self, rhs: Sym) -> Sym {
        Sym {
            np: self.np - rhs.np,
            p: self.p - rhs.p,
            one: self.one - rhs.one,
        }
    }

    fn add(self, rhs: Sym) -> Sym {
        Sym {
            np: self.np + rhs.np,
            p: self.p + rhs.p,
            one: self.one + rhs.one,
        }
    }

    fn scale(self, f: i64) -> Sym {
        Sym {
            np: self.np * f,
            p: self.p * f,
            one: self.one * f,
        }
    }

    pub fn order(&self) -> Dimensionality {
        if self.np != 0 {
            Dimensionality::D3
        } else if self.p != 0 {
            Dimensionality::D2
        } else {
            Dimensionality::D1
        }
    }

    pub fn eval(&self, n: f64, p: f64) -> f64 {
        self.np as f64 * n * p + self.p as f64 * p + self.one as f64
    }

    pub fn eval_dims(&self, dims: &GridDims) -> f64 {
        self.eval(dims.n as f64, dims.p as f64)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.np != 0 {
            parts.push(format!("{}*N*P", self.np));
        }
        if self.p != 0 {
            parts.push(format!("{}*P", self.p));
        }
        if self.one != 0 || parts.is_empty() {
            parts.push(self.one.to_string());
        }
        f.write_str(&parts.join(" + ").replace("+ -", "- "))
    }
}

/// Reuse distances (consecutive differences) of offsets sorted descending.
pub fn reuse_distances(offsets: &[i64]) -> Vec<i64> {
    offsets.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Per-array access structure independent of the grid size.
#[derive(Debug, Clone)]
struct ArrayStreams {
    /// Symbolic reuse distances between consecutive offsets, sorted descending.
    distances: Vec<Sym>,
    is_write: bool,
}

fn array_streams(kernel: &KernelIR) -> BTreeMap<String, ArrayStreams> {
    let mut offsets: BTreeMap<String, Vec<Offset>> = BTreeMap::new();
    for t in &kernel.terms {
        offsets.entry(t.array.clone()).or_default().push(t.offset);
    }
    for name in weight_arrays(kernel) {
        offsets.insert(name, vec![Offset::CENTER]);
    }
    offsets.insert(kernel.write_array.clone(), vec![Offset::CENTER]);

    offsets
        .into_iter()
        .map(|(name, mut offs)| {
            // descending linear order is descending lexicographic order
            offs.sort_unstable_by(|a, b| b.cmp(a));
            offs.dedup();
            let syms: Vec<Sym> = offs.iter().map(Sym::of_offset).collect();
            let distances = syms.windows(2).map(|w| w[0].sub(w[1])).collect();
            let is_write = name == kernel.write_array;
            (name, ArrayStreams { distances, is_write })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum BreakSize {
    /// Smallest cubic edge at which the condition fails.
    At(u64),
    /// The requirement does not grow with the grid; the condition never fails.
    Unbounded,
}

impl BreakSize {
    pub fn value(&self) -> Option<u64> {
        match self {
            BreakSize::At(n) => Some(*n),
            BreakSize::Unbounded => None,
        }
    }
}

impl fmt::Display for BreakSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BreakSize::At(n) => write!(f, "{n}"),
            BreakSize::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCondition {
    pub level: String,
    pub dimensionality: Dimensionality,
    /// Requirement in bytes as a function of the grid extents.
    pub requirement: String,
    pub requirement_bytes: f64,
    pub effective_size_bytes: f64,
    pub holds: bool,
    pub break_size: BreakSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcOptions {
    pub safety: f64,
    pub accounting: StreamAccounting,
}

impl Default for LcOptions {
    fn default() -> Self {
        LcOptions {
            safety: DEFAULT_SAFETY,
            accounting: StreamAccounting::LinePerStream,
        }
    }
}

/// Analytic layer-condition model for one kernel.
#[derive(Debug, Clone)]
pub struct LcModel {
    arrays: BTreeMap<String, ArrayStreams>,
    element_size: i64,
    line_size: i64,
    streams: i64,
    dimensions: u32,
    radius: u32,
    options: LcOptions,
}

impl LcModel {
    pub fn new(kernel: &KernelIR, line_size: u64, options: LcOptions) -> Result<Self> {
        if !(options.safety > 0.0 && options.safety <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "safety factor {} outside (0, 1]",
                options.safety
            )));
        }
        Ok(LcModel {
            arrays: array_streams(kernel),
            element_size: kernel.spec.element.size_bytes() as i64,
            line_size: line_size as i64,
            streams: kernel.op_counts.distinct_streams as i64,
            dimensions: kernel.spec.dimensions,
            radius: kernel.spec.radius,
            options,
        })
    }

    /// Requirement in bytes for `class`, with the window (if any) chosen at `dims`.
    fn requirement(&self, class: Dimensionality, n: f64, p: f64) -> Sym {
        let satisfied: Vec<Sym> = self
            .arrays
            .values()
            .flat_map(|a| a.distances.iter().copied())
            .filter(|d| d.order() <= class)
            .collect();
        let sum = satisfied.iter().fold(Sym::default(), |acc, d| acc.add(*d));
        match self.options.accounting {
            StreamAccounting::LinePerStream => sum.scale(self.element_size).add(Sym {
                one: self.streams * self.line_size,
                ..Sym::default()
            }),
            StreamAccounting::Window => {
                let unsatisfied: i64 = self
                    .arrays
                    .values()
                    .map(|a| 1 + a.distances.iter().filter(|d| d.order() > class).count() as i64)
                    .sum();
                let window = satisfied
                    .iter()
                    .copied()
                    .max_by(|a, b| a.eval(n, p).total_cmp(&b.eval(n, p)))
                    .unwrap_or_default();
                sum.add(window.scale(unsatisfied)).scale(self.element_size)
            }
        }
    }

    fn cubic_requirement(&self, class: Dimensionality, n: f64) -> f64 {
        self.requirement(class, n, n).eval(n, n)
    }

    fn min_edge(&self) -> u64 {
        2 * self.radius as u64 + 2
    }

    /// Smallest cubic edge at which `class` fails for a cache of `effective` bytes.
    pub fn break_size(&self, class: Dimensionality, effective: f64) -> BreakSize {
        let lo = self.min_edge();
        let fails = |n: u64| self.cubic_requirement(class, n as f64) > effective;
        if fails(lo) {
            return BreakSize::At(lo);
        }
        // the window may switch to a different distance for small N, so the
        // closed form is taken at a large edge where the leading term dominates
        let probe = 1u64 << 20;
        let sym = self.requirement(class, probe as f64, probe as f64);
        let (a, b, c) = (sym.np as f64, sym.p as f64, sym.one as f64 - effective);
        let root = if a > 0.0 {
            (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
        } else if b > 0.0 {
            -c / b
        } else {
            return BreakSize::Unbounded;
        };
        let mut n = (root.floor().max(lo as f64)) as u64;
        while n > lo && fails(n) {
            n -= 1;
        }
        while !fails(n) {
            n += 1;
        }
        BreakSize::At(n)
    }

    pub fn conditions(&self, machine: &MachineModel, dims: &GridDims) -> Result<Vec<LayerCondition>> {
        let mut out = Vec::new();
        for level in machine.levels() {
            let eff = effective_size(level, self.options.safety)?;
            for &class in Dimensionality::for_kernel(self.dimensions) {
                let req = self.requirement(class, dims.n as f64, dims.p as f64);
                let bytes = req.eval_dims(dims);
                out.push(LayerCondition {
                    level: level.name.clone(),
                    dimensionality: class,
                    requirement: format!("{req} B"),
                    requirement_bytes: bytes,
                    effective_size_bytes: eff,
                    holds: bytes <= eff,
                    break_size: self.break_size(class, eff),
                });
            }
        }
        Ok(out)
    }

    /// Largest class whose condition holds at `dims`, or `None` if even 1D fails.
    fn holding_class(&self, level: &CacheLevelSpec, dims: &GridDims) -> Result<Option<Dimensionality>> {
        let eff = effective_size(level, self.options.safety)?;
        Ok(Dimensionality::for_kernel(self.dimensions)
            .iter()
            .rev()
            .copied()
            .find(|&c| self.requirement(c, dims.n as f64, dims.p as f64).eval_dims(dims) <= eff))
    }

    /// Cache lines per cacheline of work missing at a level where `class` holds.
    fn miss_lines(&self, class: Option<Dimensionality>, write_allocate: bool) -> (f64, f64) {
        let mut loads = 0i64;
        let mut stores = 0i64;
        for a in self.arrays.values() {
            if a.is_write {
                stores += 1;
                if write_allocate {
                    loads += 1;
                }
                continue;
            }
            let misses = a
                .distances
                .iter()
                .filter(|d| class.is_none_or(|c| d.order() > c))
                .count() as i64;
            loads += 1 + misses;
        }
        (loads as f64, stores as f64)
    }

    pub fn traffic(&self, kernel: &KernelIR, machine: &MachineModel, dims: &GridDims) -> Result<TrafficPrediction> {
        let levels = machine.levels();
        let line = self.line_size as f64;
        let mut misses = Vec::with_capacity(levels.len());
        for level in levels {
            let class = self.holding_class(level, dims)?;
            misses.push(self.miss_lines(class, level.write_allocate));
        }
        let mut links: Vec<LinkTraffic> = levels
            .iter()
            .zip(&misses)
            .map(|(level, (loads, stores))| LinkTraffic {
                link: super::link_name(levels, level),
                load_bytes_per_cl: loads * line,
                store_bytes_per_cl: stores * line,
            })
            .collect();
        // A victim last level receives every eviction from the level above
        // and is bypassed by fills from memory.
        let last = levels.len() - 1;
        if levels[last].victim {
            let (l2_loads, _) = misses[last - 1];
            let (l3_loads, _) = misses[last];
            links[last - 1].store_bytes_per_cl = l2_loads * line;
            links[last - 1].load_bytes_per_cl = (l2_loads - l3_loads).max(0.0) * line;
        }
        let ops = kernel.op_counts;
        Ok(TrafficPrediction {
            predictor: Predictor::LayerCondition,
            reg_load_elements: ops.loads as f64,
            reg_store_elements: ops.stores as f64,
            links,
        })
    }
}

/// Layer conditions for every level and the traffic they imply.
pub fn layer_conditions(
    kernel: &KernelIR,
    machine: &MachineModel,
    dims: &GridDims,
    options: LcOptions,
) -> Result<(Vec<LayerCondition>, TrafficPrediction)> {
    dims.validate_for(&kernel.spec)?;
    let model = LcModel::new(kernel, machine.line_size(), options)?;
    Ok((model.conditions(machine, dims)?, model.traffic(kernel, machine, dims)?))
}

/// Break size of one level and dimensionality.
pub fn lc_break_size(
    kernel: &KernelIR,
    machine: &MachineModel,
    level: &str,
    dimensionality: Dimensionality,
    options: LcOptions,
) -> Result<BreakSize> {
    let spec = machine
        .level(level)
        .ok_or_else(|| Error::InvalidInput(format!("machine has no cache level `{level}`")))?;
    if !Dimensionality::for_kernel(kernel.spec.dimensions).contains(&dimensionality) {
        return Err(Error::InvalidInput(format!(
            "{dimensionality} layer condition is undefined for a {}D kernel",
            kernel.spec.dimensions
        )));
    }
    let model = LcModel::new(kernel, machine.line_size(), options)?;
    Ok(model.break_size(dimensionality, effective_size(spec, options.safety)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::{
        build_kernel, linearized_offsets, CoefficientStorage, ElementType, StencilKind, StencilSpec, Weighting,
    };

    fn kernel(d: u32, r: u32, kind: StencilKind, w: Weighting) -> KernelIR {
        build_kernel(&StencilSpec::new(d, r, kind, w, CoefficientStorage::Constant, ElementType::Float64).unwrap())
            .unwrap()
    }

    fn seven_point() -> KernelIR {
        kernel(3, 1, StencilKind::Star, Weighting::Homogeneous)
    }

    #[test]
    fn distances_of_r1_star() {
        let dims = GridDims::new_3d(100, 100, 100, 8);
        let offs = linearized_offsets(&seven_point(), &dims);
        let d = reuse_distances(&offs["a"]);
        assert_eq!(d, vec![9900, 99, 1, 1, 99, 9900]);
        assert_eq!(d.iter().sum::<i64>(), 2 * 100 * 100);
        assert!(reuse_distances(&offs["b"]).is_empty());
    }

    #[test]
    fn r3_star_has_p_scaled_distances() {
        let k = kernel(3, 3, StencilKind::Star, Weighting::Heterogeneous);
        for p in [50i64, 100, 200] {
            let dims = GridDims::new_3d(p as usize, p as usize, p as usize, 8);
            let d = reuse_distances(&linearized_offsets(&k, &dims)["a"]);
            // from a[k][j-1][i] to a[k][j][i+3] and its mirror
            assert_eq!(d.iter().filter(|&&x| x == p - 3).count(), 2);
            assert_eq!(d.iter().filter(|&&x| x == p).count(), 4);
        }
    }

    #[test]
    fn symbolic_distances_match_numeric() {
        let k = kernel(3, 2, StencilKind::Box, Weighting::Isotropic);
        let dims = GridDims::new_3d(37, 41, 43, 8);
        let numeric = reuse_distances(&linearized_offsets(&k, &dims)["a"]);
        let symbolic: Vec<i64> = array_streams(&k)["a"]
            .distances
            .iter()
            .map(|s| s.eval_dims(&dims) as i64)
            .collect();
        assert_eq!(numeric, symbolic);
    }

    #[test]
    fn requirement_formula_text() {
        let model = LcModel::new(&seven_point(), 64, LcOptions::default()).unwrap();
        let req = model.requirement(Dimensionality::D3, 100.0, 100.0);
        assert_eq!(req.to_string(), "16*N*P + 384");
        let req2 = model.requirement(Dimensionality::D2, 100.0, 100.0);
        assert_eq!(req2.to_string(), "16*P + 384");
    }

    #[test]
    fn window_accounting_counts_unsatisfied_streams() {
        let opts = LcOptions {
            safety: 1.0,
            accounting: StreamAccounting::Window,
        };
        let model = LcModel::new(&seven_point(), 64, opts).unwrap();
        // satisfied: P-1, 1, 1, P-1; unsatisfied: two N*P-P distances plus leads of a and b
        let req = model.requirement(Dimensionality::D2, 500.0, 500.0);
        assert_eq!(req, Sym { np: 0, p: 48, one: -32 });
    }
}
