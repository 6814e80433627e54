//! Performance models: in-core port model, ECM and Roofline composition,
//! unit conversion, multicore scaling and phenomenological ECM.

mod ecm;
mod incore;
mod phenom;
mod roofline;
mod scaling;

pub use ecm::{compose_ecm, ecm_from_traffic, transfer_terms, EcmPrediction, EcmTerms};
pub use incore::{incore, incore_from_counts, InCore};
pub use phenom::{phenomenological_ecm, LinkVolume, MeasurementRecord, PhenomenologicalEcm};
pub use roofline::{roofline, RooflinePrediction};
pub use scaling::{scale_cores, ScalingPoint, ScalingPrediction};

use crate::machine::MachineModel;
use crate::{Error, Result};

/// Lattice updates per cacheline of work.
pub fn lup_per_cl(machine: &MachineModel, element_size: usize) -> f64 {
    machine.line_size() as f64 / element_size as f64
}

/// Cycles per cacheline to lattice updates per second.
pub fn convert(cycles_per_cl: f64, clock_hz: f64, lup_per_cl: f64) -> Result<f64> {
    if !(cycles_per_cl.is_finite() && cycles_per_cl > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cycles per cacheline must be positive, got {cycles_per_cl}"
        )));
    }
    Ok(clock_hz * lup_per_cl / cycles_per_cl)
}

/// Lattice updates per second to cycles per cacheline.
pub fn invert(lups: f64, clock_hz: f64, lup_per_cl: f64) -> Result<f64> {
    if !(lups.is_finite() && lups > 0.0) {
        return Err(Error::InvalidInput(format!("performance must be positive, got {lups}")));
    }
    Ok(clock_hz * lup_per_cl / lups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_anchors() {
        let mlups = |cy| convert(cy, 2.3e9, 8.0).unwrap() / 1e6;
        assert!((mlups(40.0) - 460.0).abs() < 1e-9);
        assert!((mlups(20.0) - 920.0).abs() < 1e-9);
        assert!((invert(460e6, 2.3e9, 8.0).unwrap() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(convert(0.0, 2.3e9, 8.0).is_err());
        assert!(convert(-1.0, 2.3e9, 8.0).is_err());
        assert!(invert(0.0, 2.3e9, 8.0).is_err());
        assert!(convert(f64::NAN, 2.3e9, 8.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(cy in 1e-3f64..1e6, clock in 1e8f64..6e9, lup in prop_oneof![Just(8.0), Just(16.0)]) {
                let back = invert(convert(cy, clock, lup).unwrap(), clock, lup).unwrap();
                prop_assert!(((back - cy) / cy).abs() < 1e-14);
            }
        }
    }
}
