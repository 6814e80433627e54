use serde::{Deserialize, Serialize};

use super::incore::incore;
use crate::cache::TrafficPrediction;
use crate::machine::{cycles_per_cl, mem_cycles_per_cl, MachineModel, OverlapPolicy};
use crate::stencil::KernelIR;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcmTerms {
    pub t_comp: f64,
    pub t_reg_l1: f64,
    pub t_l1l2: f64,
    pub t_l2l3: f64,
    pub t_l3mem: f64,
}

impl EcmTerms {
    pub fn new(t_comp: f64, t_reg_l1: f64, t_l1l2: f64, t_l2l3: f64, t_l3mem: f64) -> Self {
        EcmTerms {
            t_comp,
            t_reg_l1,
            t_l1l2,
            t_l2l3,
            t_l3mem,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.t_comp, self.t_reg_l1, self.t_l1l2, self.t_l2l3, self.t_l3mem]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmPrediction {
    pub terms: EcmTerms,
    pub t_total: f64,
    pub policy: OverlapPolicy,
}

/// Combines ECM terms according to the machine's overlap policy.
pub fn compose_ecm(terms: EcmTerms, policy: OverlapPolicy) -> Result<EcmPrediction> {
    if terms.as_array().iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "ECM terms must be finite and non-negative: {terms:?}"
        )));
    }
    let t = &terms;
    let t_total = match policy {
        OverlapPolicy::IntelNoOverlap => t.t_comp.max(t.t_reg_l1 + t.t_l1l2 + t.t_l2l3 + t.t_l3mem),
        OverlapPolicy::ZenPartialOverlap => t.t_comp.max(t.t_reg_l1).max(t.t_l1l2).max(t.t_l2l3 + t.t_l3mem),
    };
    Ok(EcmPrediction { terms, t_total, policy })
}

/// Transfer terms `(T_L1L2, T_L2L3, T_L3MEM)` for the given per-link volumes.
pub fn transfer_terms(machine: &MachineModel, traffic: &TrafficPrediction) -> Result<(f64, f64, f64)> {
    let levels = machine.levels();
    if traffic.links.len() != levels.len() {
        return Err(Error::InvalidInput(format!(
            "traffic has {} links, machine has {} levels",
            traffic.links.len(),
            levels.len()
        )));
    }
    let l = &traffic.links;
    Ok((
        cycles_per_cl(&levels[1], l[0].load_bytes_per_cl, l[0].store_bytes_per_cl),
        cycles_per_cl(&levels[2], l[1].load_bytes_per_cl, l[1].store_bytes_per_cl),
        mem_cycles_per_cl(machine, l[2].load_bytes_per_cl + l[2].store_bytes_per_cl),
    ))
}

/// Full ECM prediction for a kernel from a traffic prediction.
pub fn ecm_from_traffic(
    kernel: &KernelIR,
    machine: &MachineModel,
    traffic: &TrafficPrediction,
) -> Result<EcmPrediction> {
    let ic = incore(kernel, machine)?;
    let (l1l2, l2l3, l3mem) = transfer_terms(machine, traffic)?;
    compose_ecm(
        EcmTerms::new(ic.t_comp, ic.t_reg_l1, l1l2, l2l3, l3mem),
        machine.overlap_policy,
    )
}
