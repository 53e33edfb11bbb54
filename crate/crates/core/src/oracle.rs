//! Brute-force reference for operational emissions.
//!
//! Walks every whole second of every energy interval, gives each second an
//! equal share of the interval's energy and charges it at the intensity in
//! force at that second. Uncovered seconds contribute nothing. This shares no
//! code with the segment alignment in [`crate::grid`] and exists to check it.

use crate::grid::{GridError, IntensitySeries, PueFactor};
use crate::model::EnergySeries;

/// Per-second discretisation of the emissions integral, in kgCO2e.
pub fn oracle_emissions(
    energy: &EnergySeries,
    intensity: &IntensitySeries,
    pue: PueFactor,
) -> Result<f64, GridError> {
    let feed = intensity.entries();
    let mut kg_kwh_sum = 0.0;
    for e in energy.entries() {
        if e.duration_s.fract() != 0.0 {
            return Err(GridError::OracleResolution {
                start: e.start,
                duration_s: e.duration_s,
            });
        }
        let seconds = e.duration_s as i64;
        let per_second = e.total_joules() / e.duration_s;
        let mut k = 0;
        for t in e.start..e.start + seconds {
            while k < feed.len() && feed[k].end <= t {
                k += 1;
            }
            if k < feed.len() && feed[k].start <= t {
                kg_kwh_sum += feed[k].intensity_kg_per_kwh * per_second;
            }
        }
    }
    Ok(pue.value() * kg_kwh_sum / 3_600_000.0)
}
