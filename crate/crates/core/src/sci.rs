//! Total carbon and carbon intensity per functional unit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{apply_pue, EmissionsReport, PueFactor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SciError {
    #[error("{which} emissions must be finite and >= 0, got {value}")]
    NegativeInput { which: &'static str, value: f64 },
    #[error("functional unit count must be finite and > 0, got {0}")]
    ZeroFunctionalUnits(f64),
}

pub fn total_carbon(operational_kg: f64, embodied_kg: f64) -> Result<f64, SciError> {
    for (which, value) in [("operational", operational_kg), ("embodied", embodied_kg)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SciError::NegativeInput { which, value });
        }
    }
    Ok(operational_kg + embodied_kg)
}

pub fn sci(total_kg: f64, functional_units: f64) -> Result<f64, SciError> {
    if !(functional_units.is_finite() && functional_units > 0.0) {
        return Err(SciError::ZeroFunctionalUnits(functional_units));
    }
    Ok(total_kg / functional_units)
}

/// Energy consumed by the software itself and by facility overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySplit {
    pub software_joules: f64,
    pub overhead_joules: f64,
}

impl EnergySplit {
    pub fn total(&self) -> f64 {
        self.software_joules + self.overhead_joules
    }
}

/// Splits PUE-scaled energy into the pre-PUE part and the overhead on top.
///
/// `total()` reproduces `apply_pue(joules, pue)` bit for bit whenever
/// `pue <= 2`, since the subtraction is then exact.
pub fn overhead_split(pre_pue_joules: f64, pue: PueFactor) -> EnergySplit {
    let post = apply_pue(pre_pue_joules, pue);
    EnergySplit {
        software_joules: pre_pue_joules,
        overhead_joules: post - pre_pue_joules,
    }
}

impl EmissionsReport {
    /// Split of the energy that was charged against an intensity.
    pub fn overhead_split(&self) -> EnergySplit {
        overhead_split(self.covered_joules, self.pue)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalUnit {
    pub name: String,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarbonTotals {
    pub operational_kg: f64,
    pub embodied_kg: f64,
    pub total_kg: f64,
    pub functional_unit_name: String,
    pub functional_unit_count: f64,
    pub sci_kg_per_unit: f64,
}

impl CarbonTotals {
    pub fn compose(
        operational_kg: f64,
        embodied_kg: f64,
        unit: &FunctionalUnit,
    ) -> Result<Self, SciError> {
        let total_kg = total_carbon(operational_kg, embodied_kg)?;
        Ok(CarbonTotals {
            operational_kg,
            embodied_kg,
            total_kg,
            functional_unit_name: unit.name.clone(),
            functional_unit_count: unit.count,
            sci_kg_per_unit: sci(total_kg, unit.count)?,
        })
    }
}
