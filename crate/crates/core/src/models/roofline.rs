use serde::{Deserialize, Serialize};

use super::{convert, ecm::transfer_terms};
use crate::cache::TrafficPrediction;
use crate::machine::MachineModel;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflinePrediction {
    /// `compute` or the name of the limiting link.
    pub bottleneck: String,
    pub cycles_per_cl: f64,
    /// Lattice updates per second; zero when nothing limits the kernel.
    pub performance: f64,
}

/// Slowest of compute and the per-link transfer times. Ties go to the deepest link.
pub fn roofline(
    traffic: &TrafficPrediction,
    machine: &MachineModel,
    t_comp: f64,
    lup_per_cl: f64,
) -> Result<RooflinePrediction> {
    let (l1l2, l2l3, l3mem) = transfer_terms(machine, traffic)?;
    let candidates = [
        ("compute".to_string(), t_comp),
        (traffic.links[0].link.clone(), l1l2),
        (traffic.links[1].link.clone(), l2l3),
        (traffic.links[2].link.clone(), l3mem),
    ];
    let (bottleneck, cycles) = candidates
        .into_iter()
        .reduce(|best, c| if c.1 >= best.1 { c } else { best })
        .expect("candidate list is non-empty");
    let performance = if cycles > 0.0 {
        convert(cycles, machine.clock_hz, lup_per_cl)?
    } else {
        0.0
    };
    Ok(RooflinePrediction {
        bottleneck,
        cycles_per_cl: cycles,
        performance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::{LinkTraffic, Predictor};
    use crate::machine::parse_machine;

    fn machine() -> MachineModel {
        // toy: L2 upstream 64 B/cy, L3 upstream 32 B/cy, both half duplex;
        // memory 10 GB/s at 2 GHz = 5 B/cy
        parse_machine(include_str!("../../machines/toy.toml"), "toy").unwrap()
    }

    fn traffic(l1l2: f64, l2l3: f64, mem: f64) -> TrafficPrediction {
        let link = |name: &str, bytes: f64| LinkTraffic {
            link: name.into(),
            load_bytes_per_cl: bytes,
            store_bytes_per_cl: 0.0,
        };
        TrafficPrediction {
            predictor: Predictor::LayerCondition,
            reg_load_elements: 0.0,
            reg_store_elements: 0.0,
            links: vec![link("L1L2", l1l2), link("L2L3", l2l3), link("L3MEM", mem)],
        }
    }

    #[test]
    fn memory_bound_example() {
        // 256 B / 64 = 4 cy, 192 B / 32 = 6 cy, 80 B / 5 = 16 cy
        let r = roofline(&traffic(256.0, 192.0, 80.0), &machine(), 8.0, 8.0).unwrap();
        assert_eq!(r.cycles_per_cl, 16.0);
        assert_eq!(r.bottleneck, "L3MEM");
        assert_eq!(r.performance, 2.0e9 * 8.0 / 16.0);
    }

    #[test]
    fn compute_bound_without_traffic() {
        let r = roofline(&traffic(0.0, 0.0, 0.0), &machine(), 8.0, 8.0).unwrap();
        assert_eq!((r.bottleneck.as_str(), r.cycles_per_cl), ("compute", 8.0));
    }

    #[test]
    fn ties_go_deepest() {
        // 64 B over 64 B/cy = 1 cy, 32 B over 32 B/cy = 1 cy, 5 B over 5 B/cy = 1 cy
        let r = roofline(&traffic(64.0, 32.0, 5.0), &machine(), 1.0, 8.0).unwrap();
        assert_eq!(r.bottleneck, "L3MEM");
    }
}
