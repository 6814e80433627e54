use serde::{Deserialize, Serialize};

use super::{convert, EcmPrediction};
use crate::machine::MachineModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub cores: u32,
    /// Aggregate inverse throughput of all active cores.
    pub cycles_per_cl: f64,
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPrediction {
    pub points: Vec<ScalingPoint>,
    /// Cores needed to saturate one NUMA domain; `None` if the kernel never saturates.
    pub saturation_cores: Option<u32>,
}

/// Linear scaling until a domain's memory bandwidth saturates.
///
/// Cores fill NUMA domains compactly. Inside a domain with `m` active
/// cores the performance is `min(m * P1, P_sat)` where `P1` is the
/// single-core ECM prediction and `P_sat` the performance at `T_L3MEM`.
/// Domains add linearly.
pub fn scale_cores(
    ecm: &EcmPrediction,
    machine: &MachineModel,
    max_cores: u32,
    lup_per_cl: f64,
) -> Result<ScalingPrediction> {
    if max_cores == 0 || max_cores > machine.cores_per_socket {
        return Err(Error::InvalidInput(format!(
            "core count {max_cores} outside 1..={}",
            machine.cores_per_socket
        )));
    }
    let clock = machine.clock_hz;
    let p1 = convert(ecm.t_total, clock, lup_per_cl)?;
    let t_mem = ecm.terms.t_l3mem;
    let p_sat = if t_mem > 0.0 {
        Some(convert(t_mem, clock, lup_per_cl)?)
    } else {
        None
    };
    let saturation_cores = (t_mem > 0.0).then(|| (ecm.t_total / t_mem).ceil() as u32);
    let per_domain = machine.cores_per_numa_domain;

    let points = (1..=max_cores)
        .map(|n| {
            let mut remaining = n;
            let mut perf = 0.0;
            while remaining > 0 {
                let m = remaining.min(per_domain);
                let linear = m as f64 * p1;
                perf += p_sat.map_or(linear, |s| linear.min(s));
                remaining -= m;
            }
            ScalingPoint {
                cores: n,
                cycles_per_cl: clock * lup_per_cl / perf,
                performance: perf,
            }
        })
        .collect();
    Ok(ScalingPrediction {
        points,
        saturation_cores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{parse_machine, OverlapPolicy};
    use crate::models::{compose_ecm, EcmTerms};

    fn hsw_like() -> MachineModel {
        let mut m = parse_machine(include_str!("../../machines/toy.toml"), "toy").unwrap();
        m.cores_per_socket = 14;
        m.cores_per_numa_domain = 7;
        m.clock_hz = 2.3e9;
        m
    }

    fn ecm(total_terms: EcmTerms) -> EcmPrediction {
        compose_ecm(total_terms, OverlapPolicy::IntelNoOverlap).unwrap()
    }

    #[test]
    fn saturation_count() {
        let e = ecm(EcmTerms::new(7.0, 7.0, 3.0, 6.0, 14.0));
        let s = scale_cores(&e, &hsw_like(), 14, 8.0).unwrap();
        assert_eq!(s.saturation_cores, Some(3));
    }

    #[test]
    fn in_cache_never_saturates() {
        let e = ecm(EcmTerms::new(4.0, 8.0, 2.0, 2.0, 0.0));
        let s = scale_cores(&e, &hsw_like(), 14, 8.0).unwrap();
        assert_eq!(s.saturation_cores, None);
        let p1 = s.points[0].performance;
        for p in &s.points {
            assert!((p.performance - p.cores as f64 * p1).abs() < 1e-6 * p.performance);
        }
    }

    #[test]
    fn two_domain_shape() {
        let e = ecm(EcmTerms::new(7.0, 7.0, 3.0, 6.0, 14.0));
        let s = scale_cores(&e, &hsw_like(), 14, 8.0).unwrap();
        let perf: Vec<f64> = s.points.iter().map(|p| p.performance).collect();
        let sat = 2.3e9 * 8.0 / 14.0;
        let p1 = 2.3e9 * 8.0 / 30.0;
        // flat from 3 to 7 cores, one more core in the second domain at 8
        for n in 3..=7 {
            assert!((perf[n - 1] - sat).abs() < 1e-3);
        }
        assert!((perf[7] - (sat + p1)).abs() < 1e-3);
        for n in 10..=14 {
            assert!((perf[n - 1] - 2.0 * sat).abs() < 1e-3);
        }
        assert!(perf.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn too_many_cores_rejected() {
        let e = ecm(EcmTerms::new(7.0, 7.0, 3.0, 6.0, 14.0));
        assert!(scale_cores(&e, &hsw_like(), 15, 8.0).is_err());
        assert!(scale_cores(&e, &hsw_like(), 0, 8.0).is_err());
    }
}
