use std::fmt::Debug;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use super::{BlockSpec, Coefficients, GridDims, KernelIR, Weighting};
use crate::{Error, Result};

/// Floating-point element types the interpreter evaluates in.
pub trait Element: Copy + Debug + PartialEq + Add<Output = Self> + Mul<Output = Self> {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Element for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traversal {
    Naive,
    Blocked(BlockSpec),
}

/// Input grid plus coefficient values. `weights` holds the components of the
/// weight grid back to back, each the size of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelInputs<T> {
    pub a: Vec<T>,
    pub scalars: Vec<T>,
    pub weights: Vec<T>,
}

/// The seeded pseudo-random input value shared with the C harness.
pub fn seeded_value(idx: u64, seed: u64) -> f64 {
    let h = idx.wrapping_mul(2_654_435_761).wrapping_add(seed) % 1021;
    h as f64 / 1021.0
}

fn seeded_weight(idx: u64, component: u64, seed: u64) -> f64 {
    let h = idx
        .wrapping_mul(40_503)
        .wrapping_add(component.wrapping_mul(7919))
        .wrapping_add(seed)
        % 509;
    h as f64 / 509.0
}

/// Inputs initialized exactly as the generated benchmark initializes them.
pub fn reference_inputs<T: Element>(kernel: &KernelIR, dims: &GridDims, seed: u64) -> KernelInputs<T> {
    let len = dims.len() as u64;
    let a = (0..len).map(|i| T::from_f64(seeded_value(i, seed))).collect();
    let (scalars, weights) = match &kernel.coefficients {
        Coefficients::Scalars(names) => (
            (0..names.len()).map(|n| T::from_f64(1.0 / (n as f64 + 2.0))).collect(),
            Vec::new(),
        ),
        Coefficients::WeightGrid { components, .. } => (
            Vec::new(),
            (0..*components as u64)
                .flat_map(|c| (0..len).map(move |i| T::from_f64(seeded_weight(i, c, seed))))
                .collect(),
        ),
    };
    KernelInputs { a, scalars, weights }
}

/// Sequential double-precision sum, matching the harness checksum.
pub fn checksum<T: Element>(grid: &[T]) -> f64 {
    grid.iter().fold(0.0, |acc, v| acc + v.to_f64())
}

struct Prepared<'a, T> {
    offsets: Vec<isize>,
    coeff: Vec<usize>,
    homogeneous: bool,
    inputs: &'a KernelInputs<T>,
    weighted: bool,
    len: usize,
}

impl<T: Element> Prepared<'_, T> {
    #[inline]
    fn coefficient(&self, component: usize, idx: usize) -> T {
        if self.weighted {
            self.inputs.weights[component * self.len + idx]
        } else {
            self.inputs.scalars[component]
        }
    }

    #[inline]
    fn point(&self, idx: usize) -> T {
        let a = &self.inputs.a;
        let at = |n: usize| a[(idx as isize + self.offsets[n]) as usize];
        if self.homogeneous {
            let mut sum = at(0);
            for n in 1..self.offsets.len() {
                sum = sum + at(n);
            }
            self.coefficient(self.coeff[0], idx) * sum
        } else {
            let mut acc = self.coefficient(self.coeff[0], idx) * at(0);
            for n in 1..self.offsets.len() {
                acc = acc + self.coefficient(self.coeff[n], idx) * at(n);
            }
            acc
        }
    }
}

/// Performs one Jacobi sweep; the boundary ring of width `radius` is copied from the input.
pub fn interpret<T: Element>(
    kernel: &KernelIR,
    dims: &GridDims,
    inputs: &KernelInputs<T>,
    traversal: Traversal,
) -> Result<Vec<T>> {
    dims.validate_for(&kernel.spec)?;
    let len = dims.len();
    if inputs.a.len() != len {
        return Err(Error::InvalidGrid(format!(
            "input grid has {} elements, dims require {len}",
            inputs.a.len()
        )));
    }
    let weighted = matches!(kernel.coefficients, Coefficients::WeightGrid { .. });
    let ncoef = kernel.coefficients.count();
    if weighted && inputs.weights.len() != ncoef * len {
        return Err(Error::InvalidInput(format!(
            "weight grid has {} elements, expected {} components of {len}",
            inputs.weights.len(),
            ncoef
        )));
    }
    if !weighted && inputs.scalars.len() != ncoef {
        return Err(Error::InvalidInput(format!(
            "{} scalar coefficients supplied, kernel uses {ncoef}",
            inputs.scalars.len()
        )));
    }
    if let Traversal::Blocked(b) = traversal {
        if b.size == 0 {
            return Err(Error::InvalidInput("block size must be at least 1".into()));
        }
    }

    let prepared = Prepared {
        offsets: kernel.terms.iter().map(|t| t.offset.linearize(dims) as isize).collect(),
        coeff: kernel.terms.iter().map(|t| t.coefficient.index()).collect(),
        homogeneous: kernel.spec.weighting == Weighting::Homogeneous,
        inputs,
        weighted,
        len,
    };

    let r = kernel.spec.radius as usize;
    let (m, n, p) = (dims.m, dims.n, dims.p);
    let (k_lo, k_hi) = if dims.dimensions == 3 { (r, m - r) } else { (0, 1) };
    let mut out = inputs.a.clone();
    let mut update = |k: usize, j: usize, i: usize| {
        let idx = dims.linear_index(k, j, i);
        out[idx] = prepared.point(idx);
    };

    match (traversal, dims.dimensions) {
        (Traversal::Naive, _) => {
            for k in k_lo..k_hi {
                for j in r..n - r {
                    for i in r..p - r {
                        update(k, j, i);
                    }
                }
            }
        }
        (Traversal::Blocked(b), 3) => {
            for jb in (r..n - r).step_by(b.size) {
                for k in k_lo..k_hi {
                    for j in jb..(jb + b.size).min(n - r) {
                        for i in r..p - r {
                            update(k, j, i);
                        }
                    }
                }
            }
        }
        (Traversal::Blocked(b), _) => {
            for ib in (r..p - r).step_by(b.size) {
                for j in r..n - r {
                    for i in ib..(ib + b.size).min(p - r) {
                        update(0, j, i);
                    }
                }
            }
        }
    }
    Ok(out)
}
