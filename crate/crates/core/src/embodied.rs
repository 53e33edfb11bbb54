//! Lifecycle (embodied) emissions and their attribution to consumers.
//!
//! An object's manufacturing, repair and end-of-life emissions are spread
//! over its usable lifespan. A consumer is charged for the time it held the
//! object, weighted by the share of the object it held at each instant.
//! Whatever nobody held stays with the object as an idle residual.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, Execution};

/// Slack allowed when summing instantaneous shares of one object.
pub const OVERSUBSCRIPTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("object {id}: {reason}")]
    InvalidObject { id: String, reason: String },
    #[error("object id {0} appears more than once")]
    DuplicateObject(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("record {record} references unknown object {object_id}")]
    Reference { record: usize, object_id: String },
    #[error("record {record} step {step}: fraction {fraction} outside [0, 1]")]
    Fraction {
        record: usize,
        step: usize,
        fraction: f64,
    },
    #[error("record {record} step {step}: {reason}")]
    ProfileOrder {
        record: usize,
        step: usize,
        reason: String,
    },
    #[error("record {record} step {step}: [{start}, {end}) lies outside the lifespan of object {object_id}")]
    ProfileOutOfLifespan {
        record: usize,
        step: usize,
        object_id: String,
        start: i64,
        end: i64,
    },
    #[error("object {object_id} is shared {total} > 1 at instant {instant}")]
    Oversubscription {
        object_id: String,
        instant: i64,
        total: f64,
    },
    #[error("consumed duration {consumed_s} s must lie in [0, {lifespan_s}] s")]
    Duration { consumed_s: f64, lifespan_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbodiedObject {
    pub id: String,
    /// Manufacturing emissions (kgCO2e).
    pub m_kg: f64,
    /// Repair and maintenance emissions (kgCO2e).
    pub r_kg: f64,
    /// End-of-life emissions (kgCO2e).
    pub eol_kg: f64,
    pub lifespan_start: i64,
    pub lifespan_s: f64,
}

impl EmbodiedObject {
    pub fn check(&self) -> Result<(), LedgerError> {
        let bad = |reason: String| {
            Err(LedgerError::InvalidObject {
                id: self.id.clone(),
                reason,
            })
        };
        for (name, v) in [
            ("m_kg", self.m_kg),
            ("r_kg", self.r_kg),
            ("eol_kg", self.eol_kg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if !(self.lifespan_s.is_finite() && self.lifespan_s > 0.0) {
            return bad(format!("lifespan_s = {} must be > 0", self.lifespan_s));
        }
        Ok(())
    }

    fn contains(&self, start: i64, end: i64) -> bool {
        start >= self.lifespan_start && ((end - self.lifespan_start) as f64) <= self.lifespan_s
    }
}

pub fn lifecycle_total(object: &EmbodiedObject) -> f64 {
    object.m_kg + object.r_kg + object.eol_kg
}

/// Emissions for holding the whole object for `consumed_s` seconds.
pub fn attribute_simple(object: &EmbodiedObject, consumed_s: f64) -> Result<f64, LedgerError> {
    if !(consumed_s >= 0.0 && consumed_s <= object.lifespan_s) {
        return Err(LedgerError::Duration {
            consumed_s,
            lifespan_s: object.lifespan_s,
        });
    }
    Ok(lifecycle_total(object) * consumed_s / object.lifespan_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharingStep {
    pub start: i64,
    pub end: i64,
    pub fraction: f64,
}

impl SharingStep {
    fn duration_s(&self) -> f64 {
        (self.end - self.start) as f64
    }
}

/// Share of an object held over time, as a step function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SharingProfile {
    steps: Vec<SharingStep>,
}

impl SharingProfile {
    pub fn new(steps: Vec<SharingStep>) -> Self {
        SharingProfile { steps }
    }

    /// One step holding `fraction` over `[start, end)`.
    pub fn single(start: i64, end: i64, fraction: f64) -> Self {
        SharingProfile {
            steps: vec![SharingStep {
                start,
                end,
                fraction,
            }],
        }
    }

    pub fn steps(&self) -> &[SharingStep] {
        &self.steps
    }

    /// Total time covered by the profile, whatever the fractions.
    pub fn covered_s(&self) -> f64 {
        self.steps
            .iter()
            .map(SharingStep::duration_s)
            .fold(0.0, |acc, v| acc + v)
    }

    /// Fraction-weighted time (s).
    pub fn weighted_s(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.fraction * s.duration_s())
            .fold(0.0, |acc, v| acc + v)
    }

    /// `record` is only used to label errors.
    fn check(&self, record: usize) -> Result<(), LedgerError> {
        for (step, s) in self.steps.iter().enumerate() {
            if !(s.fraction >= 0.0 && s.fraction <= 1.0) {
                return Err(LedgerError::Fraction {
                    record,
                    step,
                    fraction: s.fraction,
                });
            }
            if s.end <= s.start {
                return Err(LedgerError::ProfileOrder {
                    record,
                    step,
                    reason: format!("end {} must be after start {}", s.end, s.start),
                });
            }
        }
        for (i, pair) in self.steps.windows(2).enumerate() {
            if pair[1].start < pair[0].end {
                return Err(LedgerError::ProfileOrder {
                    record,
                    step: i + 1,
                    reason: format!(
                        "starts at {} before the previous step ends at {}",
                        pair[1].start, pair[0].end
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumptionRecord {
    pub consumer_id: String,
    pub object_id: String,
    pub profile: SharingProfile,
}

fn check_record(
    record: &ConsumptionRecord,
    index: usize,
    object: &EmbodiedObject,
) -> Result<(), LedgerError> {
    record.profile.check(index)?;
    for (step, s) in record.profile.steps.iter().enumerate() {
        if !object.contains(s.start, s.end) {
            return Err(LedgerError::ProfileOutOfLifespan {
                record: index,
                step,
                object_id: object.id.clone(),
                start: s.start,
                end: s.end,
            });
        }
    }
    Ok(())
}

fn shared_unchecked(object: &EmbodiedObject, profile: &SharingProfile) -> f64 {
    lifecycle_total(object) * profile.weighted_s() / object.lifespan_s
}

/// Emissions charged to one record's holding of `object`.
pub fn attribute_shared(
    object: &EmbodiedObject,
    record: &ConsumptionRecord,
) -> Result<f64, LedgerError> {
    check_record(record, 0, object)?;
    Ok(shared_unchecked(object, &record.profile))
}

/// Objects and the records that consume them, validated once and then read-only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    objects: Vec<EmbodiedObject>,
    index: BTreeMap<String, usize>,
    records: Vec<ConsumptionRecord>,
}

impl Ledger {
    pub fn new(
        objects: Vec<EmbodiedObject>,
        records: Vec<ConsumptionRecord>,
    ) -> Result<Self, LedgerError> {
        Self::new_with(objects, records, Execution::default())
    }

    pub fn new_with(
        objects: Vec<EmbodiedObject>,
        records: Vec<ConsumptionRecord>,
        exec: Execution,
    ) -> Result<Self, LedgerError> {
        let mut index = BTreeMap::new();
        for (i, o) in objects.iter().enumerate() {
            o.check()?;
            if index.insert(o.id.clone(), i).is_some() {
                return Err(LedgerError::DuplicateObject(o.id.clone()));
            }
        }
        for (i, r) in records.iter().enumerate() {
            let Some(&k) = index.get(&r.object_id) else {
                return Err(LedgerError::Reference {
                    record: i,
                    object_id: r.object_id.clone(),
                });
            };
            check_record(r, i, &objects[k])?;
        }

        let ledger = Ledger {
            objects,
            index,
            records,
        };
        let sweeps = map_ordered(&ledger.objects, exec, |_, o| {
            ledger.check_subscription(&o.id)
        });
        for r in sweeps {
            r?;
        }
        Ok(ledger)
    }

    /// Sweeps step boundaries of `object_id` in time order; at each instant
    /// the shares of all steps covering it must not exceed one.
    fn check_subscription(&self, object_id: &str) -> Result<(), LedgerError> {
        // (time, delta); ends sort before starts at the same instant.
        let mut events: Vec<(i64, bool, f64)> = Vec::new();
        for r in self.records.iter().filter(|r| r.object_id == object_id) {
            for s in &r.profile.steps {
                if s.fraction > 0.0 {
                    events.push((s.start, true, s.fraction));
                    events.push((s.end, false, s.fraction));
                }
            }
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut active = 0usize;
        let mut total = 0.0;
        let mut i = 0;
        while i < events.len() {
            let t = events[i].0;
            while i < events.len() && events[i].0 == t {
                let (_, opens, f) = events[i];
                if opens {
                    active += 1;
                    total += f;
                } else {
                    active -= 1;
                    total -= f;
                }
                i += 1;
            }
            if active == 0 {
                total = 0.0;
            }
            if total > 1.0 + OVERSUBSCRIPTION_TOLERANCE {
                return Err(LedgerError::Oversubscription {
                    object_id: object_id.to_string(),
                    instant: t,
                    total,
                });
            }
        }
        Ok(())
    }

    pub fn objects(&self) -> &[EmbodiedObject] {
        &self.objects
    }

    pub fn records(&self) -> &[ConsumptionRecord] {
        &self.records
    }

    pub fn object(&self, id: &str) -> Option<&EmbodiedObject> {
        self.index.get(id).map(|&i| &self.objects[i])
    }

    /// Distinct consumer ids, sorted.
    pub fn consumers(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .records
            .iter()
            .map(|r| r.consumer_id.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn record_kg(&self, record: &ConsumptionRecord) -> f64 {
        let object = &self.objects[self.index[&record.object_id]];
        shared_unchecked(object, &record.profile)
    }

    /// Everything charged to `consumer_id`, broken down per object. Unknown
    /// consumers get an empty attribution.
    pub fn consumer_embodied(&self, consumer_id: &str) -> ConsumerAttribution {
        let mut objects: Vec<ObjectShare> = Vec::new();
        for r in self.records.iter().filter(|r| r.consumer_id == consumer_id) {
            let kg = self.record_kg(r);
            match objects.iter_mut().find(|o| o.object_id == r.object_id) {
                Some(o) => o.kg_co2e += kg,
                None => objects.push(ObjectShare {
                    object_id: r.object_id.clone(),
                    kg_co2e: kg,
                }),
            }
        }
        ConsumerAttribution {
            consumer_id: consumer_id.to_string(),
            total_kg_co2e: objects
                .iter()
                .map(|o| o.kg_co2e)
                .fold(0.0, |acc, v| acc + v),
            objects,
        }
    }

    /// Attributions for every consumer, in sorted consumer order.
    pub fn all_consumers_with(&self, exec: Execution) -> Vec<ConsumerAttribution> {
        let ids = self.consumers();
        map_ordered(&ids, exec, |_, id| self.consumer_embodied(id))
    }

    /// Emissions attributed to somebody for `object_id`, summed over records.
    pub fn attributed(&self, object_id: &str) -> Result<f64, LedgerError> {
        if !self.index.contains_key(object_id) {
            return Err(LedgerError::UnknownObject(object_id.to_string()));
        }
        Ok(self
            .records
            .iter()
            .filter(|r| r.object_id == object_id)
            .map(|r| self.record_kg(r))
            .fold(0.0, |acc, v| acc + v))
    }

    /// Lifecycle emissions of `object_id` that no consumer is charged for.
    pub fn idle_residual(&self, object_id: &str) -> Result<f64, LedgerError> {
        let attributed = self.attributed(object_id)?;
        let object = self.object(object_id).expect("checked by attributed");
        Ok(lifecycle_total(object) - attributed)
    }

    /// Per-object balance of lifecycle, attributed and residual emissions.
    pub fn object_balances_with(&self, exec: Execution) -> Vec<ObjectBalance> {
        map_ordered(&self.objects, exec, |_, o| {
            let attributed = self.attributed(&o.id).expect("object from this ledger");
            let lifecycle = lifecycle_total(o);
            ObjectBalance {
                object_id: o.id.clone(),
                lifecycle_kg_co2e: lifecycle,
                attributed_kg_co2e: attributed,
                idle_residual_kg_co2e: lifecycle - attributed,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectShare {
    pub object_id: String,
    pub kg_co2e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsumerAttribution {
    pub consumer_id: String,
    pub total_kg_co2e: f64,
    pub objects: Vec<ObjectShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectBalance {
    pub object_id: String,
    pub lifecycle_kg_co2e: f64,
    pub attributed_kg_co2e: f64,
    pub idle_residual_kg_co2e: f64,
}
