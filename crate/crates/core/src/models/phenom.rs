use serde::{Deserialize, Serialize};

use super::{compose_ecm, EcmTerms};
use crate::machine::{cycles_per_cl, mem_cycles_per_cl, MachineModel, OverlapPolicy};
use crate::{Error, Result};

/// Measured bytes per cacheline of work crossing one link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkVolume {
    pub load_bytes: f64,
    pub store_bytes: f64,
}

/// Counter-derived measurements for one run. `None` means "not measured",
/// which is different from a measured zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub label: String,
    pub l1l2: Option<LinkVolume>,
    pub l2l3: Option<LinkVolume>,
    pub l3mem: Option<LinkVolume>,
    /// Executed instructions per cacheline of work, summed over ports.
    pub fp_instructions: Option<f64>,
    pub load_instructions: Option<f64>,
    pub store_instructions: Option<f64>,
    pub cycles_per_cl: Option<f64>,
}

impl MeasurementRecord {
    pub fn is_empty(&self) -> bool {
        self.l1l2.is_none()
            && self.l2l3.is_none()
            && self.l3mem.is_none()
            && self.fp_instructions.is_none()
            && self.load_instructions.is_none()
            && self.store_instructions.is_none()
    }

    fn validate(&self) -> Result<()> {
        let volumes = [self.l1l2, self.l2l3, self.l3mem];
        let counts = [self.fp_instructions, self.load_instructions, self.store_instructions];
        let bad = volumes
            .iter()
            .flatten()
            .flat_map(|v| [v.load_bytes, v.store_bytes])
            .chain(counts.iter().flatten().copied())
            .any(|x| !(x.is_finite() && x >= 0.0));
        if bad {
            return Err(Error::InvalidInput(format!(
                "measurement '{}' has negative or non-finite values",
                self.label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenomenologicalEcm {
    pub t_comp: Option<f64>,
    pub t_reg_l1: Option<f64>,
    pub t_l1l2: Option<f64>,
    pub t_l2l3: Option<f64>,
    pub t_l3mem: Option<f64>,
    /// Composition over the present terms.
    pub t_total: f64,
    /// True when at least one term is missing, so `t_total` only bounds the model from below.
    pub lower_bound: bool,
    pub policy: OverlapPolicy,
}

fn port_cycles(count: f64, vec_iters: f64, ports: u32) -> Result<f64> {
    if count == 0.0 {
        return Ok(0.0);
    }
    if ports == 0 {
        return Err(Error::InvalidInput(
            "measured instructions for a port class the machine does not have".into(),
        ));
    }
    Ok(vec_iters * (count / vec_iters / ports as f64).ceil())
}

/// ECM terms rebuilt from measured volumes and instruction counts.
pub fn phenomenological_ecm(
    record: &MeasurementRecord,
    machine: &MachineModel,
    element_size: usize,
) -> Result<PhenomenologicalEcm> {
    if record.is_empty() {
        return Err(Error::InvalidInput(format!(
            "measurement '{}' has neither volumes nor instruction counts",
            record.label
        )));
    }
    record.validate()?;
    let p = &machine.ports;
    let lanes = (p.vector_bits as f64 / (element_size * 8) as f64).max(1.0);
    let vec_iters = machine.line_size() as f64 / element_size as f64 / lanes;
    let levels = machine.levels();

    let t_comp = record
        .fp_instructions
        .map(|c| port_cycles(c, vec_iters, p.fp_ports))
        .transpose()?;
    let t_reg_l1 = match (record.load_instructions, record.store_instructions) {
        (None, None) => None,
        (l, s) => {
            let ld = port_cycles(l.unwrap_or(0.0), vec_iters, p.load_ports)?;
            let st = port_cycles(s.unwrap_or(0.0), vec_iters, p.store_ports)?;
            Some(if p.serialize_load_store { ld + st } else { ld.max(st) })
        }
    };
    let t_l1l2 = record
        .l1l2
        .map(|v| cycles_per_cl(&levels[1], v.load_bytes, v.store_bytes));
    let t_l2l3 = record
        .l2l3
        .map(|v| cycles_per_cl(&levels[2], v.load_bytes, v.store_bytes));
    let t_l3mem = record
        .l3mem
        .map(|v| mem_cycles_per_cl(machine, v.load_bytes + v.store_bytes));

    let all = [t_comp, t_reg_l1, t_l1l2, t_l2l3, t_l3mem];
    let lower_bound =
        all.iter().any(Option::is_none) || (record.load_instructions.is_some() != record.store_instructions.is_some());
    let terms = EcmTerms::new(
        t_comp.unwrap_or(0.0),
        t_reg_l1.unwrap_or(0.0),
        t_l1l2.unwrap_or(0.0),
        t_l2l3.unwrap_or(0.0),
        t_l3mem.unwrap_or(0.0),
    );
    let composed = compose_ecm(terms, machine.overlap_policy)?;
    Ok(PhenomenologicalEcm {
        t_comp,
        t_reg_l1,
        t_l1l2,
        t_l2l3,
        t_l3mem,
        t_total: composed.t_total,
        lower_bound,
        policy: machine.overlap_policy,
    })
}
