use serde::{Deserialize, Serialize};

use crate::machine::MachineModel;
use crate::stencil::{ElementType, KernelIR, OpCounts, Weighting};
use crate::{Error, Result};

/// In-core throughput terms in cycles per cacheline of work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InCore {
    pub t_comp: f64,
    pub t_reg_l1: f64,
    pub lanes: u32,
    pub vector_iterations_per_cl: f64,
    pub fp_instructions: u64,
    pub load_instructions: u64,
    pub store_instructions: u64,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Port model for an arbitrary operation mix.
///
/// Assumes ideal vectorization and no loop-carried dependencies. With FMA,
/// one multiply is fused with one add per term unless the kernel scales a
/// plain sum (`fusable` false).
pub fn incore_from_counts(
    ops: &OpCounts,
    fusable: bool,
    element: ElementType,
    machine: &MachineModel,
) -> Result<InCore> {
    let p = &machine.ports;
    let elem_bits = element.bits();
    if p.vector_bits < elem_bits {
        return Err(Error::InvalidInput(format!(
            "vector width {} bit is narrower than a {} bit element",
            p.vector_bits, elem_bits
        )));
    }
    let lanes = p.vector_bits / elem_bits;
    let vec_iters = machine.line_size() as f64 / element.size_bytes() as f64 / lanes as f64;

    let fused = if p.fma && fusable { ops.adds.min(ops.muls) } else { 0 };
    let fp = (ops.adds + ops.muls - fused) as u64;
    let t_comp = if fp == 0 {
        0.0
    } else if p.fp_ports == 0 {
        return Err(Error::InvalidInput(
            "kernel has floating-point work but the machine has no floating-point ports".into(),
        ));
    } else {
        vec_iters * ceil_div(fp, p.fp_ports as u64) as f64
    };

    let loads = ops.loads as u64 * ceil_div(p.vector_bits as u64, p.load_width_bits as u64);
    let stores = ops.stores as u64 * ceil_div(p.vector_bits as u64, p.store_width_bits as u64);
    let load_cy = ceil_div(loads, p.load_ports as u64);
    let store_cy = ceil_div(stores, p.store_ports as u64);
    let per_iter = if p.serialize_load_store {
        load_cy + store_cy
    } else {
        load_cy.max(store_cy)
    };
    Ok(InCore {
        t_comp,
        t_reg_l1: vec_iters * per_iter as f64,
        lanes,
        vector_iterations_per_cl: vec_iters,
        fp_instructions: fp,
        load_instructions: loads,
        store_instructions: stores,
    })
}

/// `T_comp` and `T_RegL1` for a stencil kernel.
pub fn incore(kernel: &KernelIR, machine: &MachineModel) -> Result<InCore> {
    incore_from_counts(
        &kernel.op_counts,
        kernel.spec.weighting != Weighting::Homogeneous,
        kernel.spec.element,
        machine,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::parse_machine;
    use crate::stencil::{build_kernel, CoefficientStorage, StencilKind, StencilSpec};

    fn avx2() -> MachineModel {
        parse_machine(include_str!("../../machines/toy.toml"), "toy").unwrap()
    }

    fn seven_point() -> KernelIR {
        build_kernel(
            &StencilSpec::new(
                3,
                1,
                StencilKind::Star,
                Weighting::Homogeneous,
                CoefficientStorage::Constant,
                ElementType::Float64,
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn seven_point_on_avx2() {
        let ic = incore(&seven_point(), &avx2()).unwrap();
        assert_eq!(ic.vector_iterations_per_cl, 2.0);
        assert_eq!(ic.fp_instructions, 7);
        assert_eq!(ic.t_comp, 8.0);
        assert_eq!(ic.t_reg_l1, 8.0);
    }

    #[test]
    fn copy_kernel() {
        let ops = OpCounts {
            loads: 1,
            stores: 1,
            ..Default::default()
        };
        let ic = incore_from_counts(&ops, false, ElementType::Float64, &avx2()).unwrap();
        assert_eq!((ic.t_comp, ic.t_reg_l1), (0.0, 2.0));
    }

    #[test]
    fn scalar_mode_quadruples() {
        let mut m = avx2();
        let vec = incore(&seven_point(), &m).unwrap();
        m.ports.vector_bits = 64;
        let scalar = incore(&seven_point(), &m).unwrap();
        assert_eq!(scalar.t_comp, 4.0 * vec.t_comp);
        assert_eq!(scalar.t_reg_l1, 4.0 * vec.t_reg_l1);
    }

    #[test]
    fn narrow_vectors_rejected() {
        let mut m = avx2();
        m.ports.vector_bits = 32;
        assert!(incore(&seven_point(), &m).is_err());
    }

    #[test]
    fn heterogeneous_fuses_pairs() {
        let k = build_kernel(
            &StencilSpec::new(
                3,
                3,
                StencilKind::Star,
                Weighting::Heterogeneous,
                CoefficientStorage::Constant,
                ElementType::Float64,
            )
            .unwrap(),
        )
        .unwrap();
        let ic = incore(&k, &avx2()).unwrap();
        // 18 adds and 19 muls fuse into 18 FMAs plus one multiply
        assert_eq!(ic.fp_instructions, 19);
        assert_eq!(ic.t_comp, 2.0 * 10.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn adding_a_term_never_speeds_up(
                adds in 0usize..60, loads in 1usize..60, fusable: bool, homo: bool,
            ) {
                let m = avx2();
                let muls = if homo { 1 } else { adds + 1 };
                let base = OpCounts { adds, muls, loads, stores: 1, distinct_streams: 1 };
                let more = OpCounts {
                    adds: adds + 1,
                    muls: if homo { 1 } else { muls + 1 },
                    loads: loads + 1,
                    ..base
                };
                let a = incore_from_counts(&base, fusable, ElementType::Float64, &m).unwrap();
                let b = incore_from_counts(&more, fusable, ElementType::Float64, &m).unwrap();
                prop_assert!(b.t_comp >= a.t_comp);
                prop_assert!(b.t_reg_l1 >= a.t_reg_l1);
            }
        }
    }
}
