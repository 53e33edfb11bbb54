//! Server power model anchored on CPU TDP.
//!
//! Full-load CPU power is `tdp_watts * n_cpu`. The remaining components are
//! sized from the allocation vector: at full load component `x` draws
//! `alpha_x / alpha_cpu` times the CPU's full-load power, so the whole server
//! draws `tdp_watts * n_cpu / alpha_cpu`. Every component scales linearly with
//! its usage relative to the declared maximum, and an optional idle baseline is
//! added on top for the whole interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, Execution};

/// Absolute tolerance on `alpha_cpu + alpha_mem + alpha_io + alpha_net == 1`.
pub const ALLOCATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("allocation vector invalid: {0}")]
    Allocation(String),
    #[error("server spec invalid: {field} = {value} ({reason})")]
    Spec {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("sample {index}: {component} usage {value} exceeds maximum {max}")]
    UsageOutOfRange {
        index: usize,
        component: Component,
        value: f64,
        max: f64,
    },
    #[error("sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("sample {index}: {reason}")]
    TraceOrder { index: usize, reason: String },
    #[error("{component} usage declared as {trace} in the trace but {spec} in the server spec")]
    UnitMismatch {
        component: Component,
        trace: UsageUnit,
        spec: UsageUnit,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Cpu,
    Mem,
    Io,
    Net,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::Cpu,
        Component::Mem,
        Component::Io,
        Component::Net,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Cpu => "cpu",
            Component::Mem => "mem",
            Component::Io => "io",
            Component::Net => "net",
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One value per component, in cpu/mem/io/net order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerComponent {
    pub cpu: f64,
    pub mem: f64,
    pub io: f64,
    pub net: f64,
}

impl PerComponent {
    pub fn get(&self, c: Component) -> f64 {
        match c {
            Component::Cpu => self.cpu,
            Component::Mem => self.mem,
            Component::Io => self.io,
            Component::Net => self.net,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [self.cpu, self.mem, self.io, self.net]
    }
}

/// What a mem/io/net usage figure counts. Only compared, never converted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageUnit {
    #[default]
    Bytes,
    BytesPerInterval,
}

impl std::fmt::Display for UsageUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UsageUnit::Bytes => "bytes",
            UsageUnit::BytesPerInterval => "bytes_per_interval",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsageUnits {
    #[serde(default)]
    pub mem: UsageUnit,
    #[serde(default)]
    pub io: UsageUnit,
    #[serde(default)]
    pub net: UsageUnit,
}

impl UsageUnits {
    /// Fails on the first component whose unit differs from `spec`.
    pub fn check_against(&self, spec: &UsageUnits) -> Result<(), ModelError> {
        for (component, trace, spec) in [
            (Component::Mem, self.mem, spec.mem),
            (Component::Io, self.io, spec.io),
            (Component::Net, self.net, spec.net),
        ] {
            if trace != spec {
                return Err(ModelError::UnitMismatch {
                    component,
                    trace,
                    spec,
                });
            }
        }
        Ok(())
    }
}

/// Hardware parameters of one server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    /// Full-load power of a single CPU (W).
    pub tdp_watts: f64,
    pub n_cpu: u32,
    /// Share of full-load server power attributed to each component.
    pub alpha: PerComponent,
    /// Usage at which each component is fully loaded (cores for cpu).
    pub u_max: PerComponent,
    #[serde(default)]
    pub units: UsageUnits,
    /// Baseline draw at zero usage (W).
    #[serde(default)]
    pub idle_watts: f64,
}

impl ServerSpec {
    pub fn new(tdp_watts: f64, n_cpu: u32, alpha: PerComponent, u_max: PerComponent) -> Self {
        ServerSpec {
            tdp_watts,
            n_cpu,
            alpha,
            u_max,
            units: UsageUnits::default(),
            idle_watts: 0.0,
        }
    }

    pub fn with_idle_watts(mut self, idle_watts: f64) -> Self {
        self.idle_watts = idle_watts;
        self
    }
}

/// Returns `spec` unchanged if every invariant holds.
pub fn validate_spec(spec: ServerSpec) -> Result<ServerSpec, ModelError> {
    let bad = |field, value, reason| {
        Err(ModelError::Spec {
            field,
            value,
            reason,
        })
    };
    if !(spec.tdp_watts.is_finite() && spec.tdp_watts > 0.0) {
        return bad("tdp_watts", spec.tdp_watts, "must be finite and > 0");
    }
    if spec.n_cpu == 0 {
        return bad("n_cpu", 0.0, "must be >= 1");
    }
    for c in Component::ALL {
        let v = spec.u_max.get(c);
        if !(v.is_finite() && v > 0.0) {
            let field = match c {
                Component::Cpu => "u_max.cpu",
                Component::Mem => "u_max.mem",
                Component::Io => "u_max.io",
                Component::Net => "u_max.net",
            };
            return bad(field, v, "must be finite and > 0");
        }
    }
    if !(spec.idle_watts.is_finite() && spec.idle_watts >= 0.0) {
        return bad("idle_watts", spec.idle_watts, "must be finite and >= 0");
    }

    for c in Component::ALL {
        let a = spec.alpha.get(c);
        if !a.is_finite() || a < 0.0 {
            return Err(ModelError::Allocation(format!(
                "alpha.{c} = {a} must be finite and >= 0"
            )));
        }
    }
    if spec.alpha.cpu <= 0.0 {
        return Err(ModelError::Allocation(format!(
            "alpha.cpu = {} must be > 0",
            spec.alpha.cpu
        )));
    }
    let sum = spec.alpha.cpu + spec.alpha.mem + spec.alpha.io + spec.alpha.net;
    if (sum - 1.0).abs() > ALLOCATION_TOLERANCE {
        return Err(ModelError::Allocation(format!(
            "entries sum to {sum}, expected 1 within {ALLOCATION_TOLERANCE:e}"
        )));
    }
    Ok(spec)
}

/// Resource usage over `[start, start + duration_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageSample {
    /// UTC epoch seconds.
    pub start: i64,
    pub duration_s: f64,
    pub u_cpu: f64,
    pub u_mem: f64,
    pub u_io: f64,
    pub u_net: f64,
}

impl UsageSample {
    pub fn usage(&self, c: Component) -> f64 {
        match c {
            Component::Cpu => self.u_cpu,
            Component::Mem => self.u_mem,
            Component::Io => self.u_io,
            Component::Net => self.u_net,
        }
    }

    fn usage_array(&self) -> [f64; 4] {
        [self.u_cpu, self.u_mem, self.u_io, self.u_net]
    }

    /// Checks the interval and usage values, not their relation to a spec.
    pub fn check(&self, index: usize) -> Result<(), ModelError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ModelError::InvalidSample {
                index,
                reason: format!("duration_s = {} must be > 0", self.duration_s),
            });
        }
        for c in Component::ALL {
            let u = self.usage(c);
            if !(u.is_finite() && u >= 0.0) {
                return Err(ModelError::InvalidSample {
                    index,
                    reason: format!("{c} usage = {u} must be finite and >= 0"),
                });
            }
        }
        Ok(())
    }
}

/// Ordered usage samples plus the units their byte counts were declared in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageTrace {
    pub samples: Vec<UsageSample>,
    /// Source line of each sample when parsed from a file.
    pub rows: Vec<u64>,
    /// `None` means "same as the server spec".
    pub units: Option<UsageUnits>,
}

impl UsageTrace {
    pub fn new(samples: Vec<UsageSample>) -> Self {
        UsageTrace {
            samples,
            rows: Vec::new(),
            units: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row_of(&self, index: usize) -> Option<u64> {
        self.rows.get(index).copied()
    }

    /// `[first start, last end)` rounded outwards to whole seconds.
    pub fn window(&self) -> Option<(i64, i64)> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        let end = last.start + last.duration_s.ceil() as i64;
        Some((first.start, end))
    }
}

/// Fails on the first sample that starts before its predecessor ends.
pub fn check_order(samples: &[UsageSample]) -> Result<(), ModelError> {
    for (i, pair) in samples.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        if next.start <= prev.start {
            return Err(ModelError::TraceOrder {
                index: i + 1,
                reason: format!(
                    "starts at {} which is not after the previous sample's start {}",
                    next.start, prev.start
                ),
            });
        }
        if ((next.start - prev.start) as f64) < prev.duration_s {
            return Err(ModelError::TraceOrder {
                index: i + 1,
                reason: format!(
                    "starts at {} inside the previous sample [{}, {} + {}s)",
                    next.start, prev.start, prev.start, prev.duration_s
                ),
            });
        }
    }
    Ok(())
}

/// What to do with usage above the declared maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangePolicy {
    #[default]
    Reject,
    Clamp,
}

/// Instantaneous power per source (W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub cpu_w: f64,
    pub mem_w: f64,
    pub io_w: f64,
    pub net_w: f64,
    pub idle_w: f64,
    pub total_w: f64,
}

impl PowerBreakdown {
    fn from_parts(parts: [f64; 4], idle_w: f64) -> Self {
        let [cpu_w, mem_w, io_w, net_w] = parts;
        PowerBreakdown {
            cpu_w,
            mem_w,
            io_w,
            net_w,
            idle_w,
            total_w: cpu_w + mem_w + io_w + net_w + idle_w,
        }
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::Cpu => self.cpu_w,
            Component::Mem => self.mem_w,
            Component::Io => self.io_w,
            Component::Net => self.net_w,
        }
    }
}

/// Energy per source (J).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub cpu: f64,
    pub mem: f64,
    pub io: f64,
    pub net: f64,
    pub idle: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(cpu: f64, mem: f64, io: f64, net: f64, idle: f64) -> Self {
        EnergyBreakdown {
            cpu,
            mem,
            io,
            net,
            idle,
            total: cpu + mem + io + net + idle,
        }
    }

    fn accumulate(&mut self, other: &EnergyBreakdown) {
        self.cpu += other.cpu;
        self.mem += other.mem;
        self.io += other.io;
        self.net += other.net;
        self.idle += other.idle;
        self.total += other.total;
    }
}

/// Energy consumed over `[start, start + duration_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEntry {
    pub start: i64,
    pub duration_s: f64,
    pub joules: EnergyBreakdown,
}

impl EnergyEntry {
    pub fn total_joules(&self) -> f64 {
        self.joules.total
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergySeries {
    entries: Vec<EnergyEntry>,
    /// Indices of samples whose usage was clamped to the spec maximum.
    clamped: Vec<usize>,
}

impl EnergySeries {
    /// Builds a series from entries that are sorted, non-overlapping and non-negative.
    pub fn new(entries: Vec<EnergyEntry>) -> Result<Self, ModelError> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.duration_s.is_finite() && e.duration_s > 0.0) {
                return Err(ModelError::InvalidSample {
                    index: i,
                    reason: format!("duration_s = {} must be > 0", e.duration_s),
                });
            }
            let j = &e.joules;
            if [j.cpu, j.mem, j.io, j.net, j.idle, j.total]
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return Err(ModelError::InvalidSample {
                    index: i,
                    reason: "energy values must be finite and >= 0".into(),
                });
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].start <= pair[0].start
                || ((pair[1].start - pair[0].start) as f64) < pair[0].duration_s
            {
                return Err(ModelError::TraceOrder {
                    index: i + 1,
                    reason: "energy entries must be sorted and non-overlapping".into(),
                });
            }
        }
        Ok(EnergySeries {
            entries,
            clamped: Vec::new(),
        })
    }

    /// Single-component convenience: total joules per interval, no breakdown.
    pub fn from_totals(intervals: &[(i64, f64, f64)]) -> Result<Self, ModelError> {
        let entries = intervals
            .iter()
            .map(|&(start, duration_s, joules)| EnergyEntry {
                start,
                duration_s,
                joules: EnergyBreakdown::from_parts(joules, 0.0, 0.0, 0.0, 0.0),
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[EnergyEntry] {
        &self.entries
    }

    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of entry totals, in entry order.
    pub fn total_joules(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.joules.total)
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn component_totals(&self) -> EnergyBreakdown {
        let mut acc = EnergyBreakdown::default();
        for e in &self.entries {
            acc.accumulate(&e.joules);
        }
        acc
    }
}

/// A validated [`ServerSpec`] with its per-component full-load power precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerModel {
    spec: ServerSpec,
    /// Power of each component at its maximum usage (W).
    rated_w: [f64; 4],
    u_max: [f64; 4],
}

impl ServerModel {
    pub fn new(spec: ServerSpec) -> Result<Self, ModelError> {
        let spec = validate_spec(spec)?;
        let cpu_full = spec.tdp_watts * f64::from(spec.n_cpu);
        let alpha = spec.alpha.to_array();
        let mut rated_w = [cpu_full; 4];
        for c in [Component::Mem, Component::Io, Component::Net] {
            rated_w[c.index()] = (alpha[c.index()] / spec.alpha.cpu) * cpu_full;
        }
        Ok(ServerModel {
            u_max: spec.u_max.to_array(),
            rated_w,
            spec,
        })
    }

    pub fn spec(&self) -> &ServerSpec {
        &self.spec
    }

    /// Power of `component` at full usage (W).
    pub fn rated_power(&self, component: Component) -> f64 {
        self.rated_w[component.index()]
    }

    /// Server power at full usage of every component, idle excluded.
    pub fn full_load_power(&self) -> f64 {
        self.spec.tdp_watts * f64::from(self.spec.n_cpu) / self.spec.alpha.cpu
    }

    /// Watts per unit of usage of `component`; constant under the linear model.
    pub fn marginal_power(&self, component: Component) -> f64 {
        self.rated_w[component.index()] / self.u_max[component.index()]
    }

    /// True if any usage in `sample` is above the spec maximum.
    pub fn exceeds_max(&self, sample: &UsageSample) -> bool {
        sample
            .usage_array()
            .iter()
            .zip(self.u_max.iter())
            .any(|(u, m)| u > m)
    }

    pub fn component_power(
        &self,
        sample: &UsageSample,
        policy: RangePolicy,
    ) -> Result<PowerBreakdown, ModelError> {
        self.power_at(0, sample, policy)
    }

    fn power_at(
        &self,
        index: usize,
        sample: &UsageSample,
        policy: RangePolicy,
    ) -> Result<PowerBreakdown, ModelError> {
        sample.check(index)?;
        let usage = sample.usage_array();
        let mut parts = [0.0; 4];
        for c in Component::ALL {
            let i = c.index();
            let mut u = usage[i];
            if u > self.u_max[i] {
                match policy {
                    RangePolicy::Reject => {
                        return Err(ModelError::UsageOutOfRange {
                            index,
                            component: c,
                            value: u,
                            max: self.u_max[i],
                        })
                    }
                    RangePolicy::Clamp => u = self.u_max[i],
                }
            }
            parts[i] = (u / self.u_max[i]) * self.rated_w[i];
        }
        Ok(PowerBreakdown::from_parts(parts, self.spec.idle_watts))
    }

    /// Energy over the sample interval, usage held constant across it.
    pub fn energy_over_interval(
        &self,
        sample: &UsageSample,
        policy: RangePolicy,
    ) -> Result<EnergyEntry, ModelError> {
        self.energy_at(0, sample, policy)
    }

    fn energy_at(
        &self,
        index: usize,
        sample: &UsageSample,
        policy: RangePolicy,
    ) -> Result<EnergyEntry, ModelError> {
        let p = self.power_at(index, sample, policy)?;
        let d = sample.duration_s;
        Ok(EnergyEntry {
            start: sample.start,
            duration_s: d,
            joules: EnergyBreakdown::from_parts(
                p.cpu_w * d,
                p.mem_w * d,
                p.io_w * d,
                p.net_w * d,
                p.idle_w * d,
            ),
        })
    }

    pub fn trace_to_energy_series(
        &self,
        trace: &UsageTrace,
        policy: RangePolicy,
    ) -> Result<EnergySeries, ModelError> {
        self.trace_to_energy_series_with(trace, policy, Execution::default())
    }

    pub fn trace_to_energy_series_with(
        &self,
        trace: &UsageTrace,
        policy: RangePolicy,
        exec: Execution,
    ) -> Result<EnergySeries, ModelError> {
        if let Some(units) = &trace.units {
            units.check_against(&self.spec.units)?;
        }
        for (i, s) in trace.samples.iter().enumerate() {
            s.check(i)?;
        }
        check_order(&trace.samples)?;

        let results = map_ordered(&trace.samples, exec, |i, s| self.energy_at(i, s, policy));
        let mut entries = Vec::with_capacity(results.len());
        for r in results {
            entries.push(r?);
        }
        let clamped = match policy {
            RangePolicy::Reject => Vec::new(),
            RangePolicy::Clamp => trace
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| self.exceeds_max(s))
                .map(|(i, _)| i)
                .collect(),
        };
        Ok(EnergySeries { entries, clamped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_spec() -> ServerSpec {
        ServerSpec::new(
            100.0,
            4,
            PerComponent {
                cpu: 0.4,
                mem: 0.3,
                io: 0.2,
                net: 0.1,
            },
            PerComponent {
                cpu: 4.0,
                mem: 64e9,
                io: 1e12,
                net: 1e9,
            },
        )
    }

    fn sample(u_cpu: f64, u_mem: f64, u_io: f64, u_net: f64) -> UsageSample {
        UsageSample {
            start: 0,
            duration_s: 3600.0,
            u_cpu,
            u_mem,
            u_io,
            u_net,
        }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn validate_accepts_example_and_boundary() {
        assert!(validate_spec(example_spec()).is_ok());
        let mut s = example_spec();
        s.alpha = PerComponent {
            cpu: 1.0,
            mem: 0.0,
            io: 0.0,
            net: 0.0,
        };
        assert!(validate_spec(s).is_ok());
    }

    #[test]
    fn validate_rejects_bad_allocation() {
        let mut s = example_spec();
        s.alpha = PerComponent {
            cpu: 0.5,
            mem: 0.5,
            io: 0.5,
            net: 0.5,
        };
        assert!(matches!(validate_spec(s), Err(ModelError::Allocation(_))));

        let mut s = example_spec();
        s.alpha = PerComponent {
            cpu: 0.6,
            mem: 0.5,
            io: -0.1,
            net: 0.0,
        };
        assert!(matches!(validate_spec(s), Err(ModelError::Allocation(_))));

        let mut s = example_spec();
        s.alpha = PerComponent {
            cpu: 0.0,
            mem: 0.5,
            io: 0.5,
            net: 0.0,
        };
        assert!(matches!(validate_spec(s), Err(ModelError::Allocation(_))));

        // inside and just outside the 1e-9 band
        let mut s = example_spec();
        s.alpha.net += 5e-10;
        assert!(validate_spec(s).is_ok());
        let mut s = example_spec();
        s.alpha.net += 2e-9;
        assert!(validate_spec(s).is_err());
    }

    #[test]
    fn validate_rejects_bad_hardware() {
        let mut s = example_spec();
        s.tdp_watts = 0.0;
        assert!(matches!(
            validate_spec(s),
            Err(ModelError::Spec {
                field: "tdp_watts",
                ..
            })
        ));
        let mut s = example_spec();
        s.n_cpu = 0;
        assert!(matches!(
            validate_spec(s),
            Err(ModelError::Spec { field: "n_cpu", .. })
        ));
        let mut s = example_spec();
        s.u_max.io = -1.0;
        assert!(matches!(
            validate_spec(s),
            Err(ModelError::Spec {
                field: "u_max.io",
                ..
            })
        ));
        let s = example_spec().with_idle_watts(-1.0);
        assert!(matches!(
            validate_spec(s),
            Err(ModelError::Spec {
                field: "idle_watts",
                ..
            })
        ));
    }

    #[test]
    fn full_load_power_matches_anchor() {
        let m = ServerModel::new(example_spec()).unwrap();
        let p = m
            .component_power(&sample(4.0, 64e9, 1e12, 1e9), RangePolicy::Reject)
            .unwrap();
        assert_eq!(p.cpu_w, 400.0);
        assert!(close(p.mem_w, 300.0, 1e-12));
        assert!(close(p.io_w, 200.0, 1e-12));
        assert!(close(p.net_w, 100.0, 1e-12));
        assert!(close(p.total_w, 1000.0, 1e-12));
        assert!(close(m.full_load_power(), 1000.0, 1e-12));
    }

    #[test]
    fn zero_usage_is_zero_power() {
        let m = ServerModel::new(example_spec()).unwrap();
        let p = m
            .component_power(&sample(0.0, 0.0, 0.0, 0.0), RangePolicy::Reject)
            .unwrap();
        assert_eq!(p.total_w, 0.0);
    }

    #[test]
    fn half_cpu() {
        let m = ServerModel::new(example_spec()).unwrap();
        let p = m
            .component_power(&sample(2.0, 0.0, 0.0, 0.0), RangePolicy::Reject)
            .unwrap();
        assert_eq!(p.cpu_w, 200.0);
        assert_eq!(p.total_w, 200.0);
    }

    #[test]
    fn marginal_examples() {
        let m = ServerModel::new(example_spec()).unwrap();
        assert_eq!(m.marginal_power(Component::Cpu), 100.0);
        // (0.3 / 0.4) * 400 W / 64e9 B = 300 / 64e9 = 4.6875e-9 W per byte
        assert!(close(m.marginal_power(Component::Mem), 4.6875e-9, 1e-12));
    }

    #[test]
    fn out_of_range_rejected_or_clamped() {
        let m = ServerModel::new(example_spec()).unwrap();
        let s = sample(5.0, 0.0, 0.0, 0.0);
        let err = m.component_power(&s, RangePolicy::Reject).unwrap_err();
        assert!(matches!(
            err,
            ModelError::UsageOutOfRange {
                component: Component::Cpu,
                ..
            }
        ));
        let p = m.component_power(&s, RangePolicy::Clamp).unwrap();
        assert_eq!(p.cpu_w, 400.0);
    }

    #[test]
    fn energy_examples() {
        let m = ServerModel::new(example_spec()).unwrap();
        let e = m
            .energy_over_interval(&sample(2.0, 0.0, 0.0, 0.0), RangePolicy::Reject)
            .unwrap();
        assert_eq!(e.total_joules(), 720_000.0);

        let e = m
            .energy_over_interval(&sample(0.0, 0.0, 0.0, 0.0), RangePolicy::Reject)
            .unwrap();
        assert_eq!(e.total_joules(), 0.0);

        let idle = ServerModel::new(example_spec().with_idle_watts(50.0)).unwrap();
        let mut s = sample(0.0, 0.0, 0.0, 0.0);
        s.duration_s = 60.0;
        let e = idle.energy_over_interval(&s, RangePolicy::Reject).unwrap();
        assert_eq!(e.total_joules(), 3000.0);
        assert_eq!(e.joules.idle, 3000.0);
    }

    #[test]
    fn idle_is_charged_regardless_of_usage() {
        let m = ServerModel::new(example_spec().with_idle_watts(50.0)).unwrap();
        let p = m
            .component_power(&sample(2.0, 0.0, 0.0, 0.0), RangePolicy::Reject)
            .unwrap();
        assert_eq!(p.idle_w, 50.0);
        assert_eq!(p.total_w, 250.0);
    }

    #[test]
    fn invalid_samples() {
        let m = ServerModel::new(example_spec()).unwrap();
        let mut s = sample(1.0, 0.0, 0.0, 0.0);
        s.duration_s = 0.0;
        assert!(matches!(
            m.component_power(&s, RangePolicy::Reject),
            Err(ModelError::InvalidSample { .. })
        ));
        let s = sample(-1.0, 0.0, 0.0, 0.0);
        assert!(m.component_power(&s, RangePolicy::Reject).is_err());
    }

    #[test]
    fn trace_series() {
        let m = ServerModel::new(example_spec()).unwrap();
        let empty = m
            .trace_to_energy_series(&UsageTrace::default(), RangePolicy::Reject)
            .unwrap();
        assert!(empty.is_empty());

        let a = sample(2.0, 0.0, 0.0, 0.0);
        let b = UsageSample { start: 3600, ..a };
        let series = m
            .trace_to_energy_series(&UsageTrace::new(vec![a, b]), RangePolicy::Reject)
            .unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series.total_joules(), 1_440_000.0);
        assert_eq!(series.entries()[1].start, 3600);

        let c = UsageSample { start: 1800, ..a };
        let err = m
            .trace_to_energy_series(&UsageTrace::new(vec![a, c]), RangePolicy::Reject)
            .unwrap_err();
        assert!(matches!(err, ModelError::TraceOrder { index: 1, .. }));
    }

    #[test]
    fn trace_reports_out_of_range_index_and_clamped_samples() {
        let m = ServerModel::new(example_spec()).unwrap();
        let a = sample(2.0, 0.0, 0.0, 0.0);
        let b = UsageSample {
            start: 3600,
            u_cpu: 9.0,
            ..a
        };
        let trace = UsageTrace::new(vec![a, b]);
        let err = m
            .trace_to_energy_series(&trace, RangePolicy::Reject)
            .unwrap_err();
        assert!(matches!(err, ModelError::UsageOutOfRange { index: 1, .. }));
        let series = m
            .trace_to_energy_series(&trace, RangePolicy::Clamp)
            .unwrap();
        assert_eq!(series.clamped(), &[1]);
    }

    #[test]
    fn unit_mismatch() {
        let m = ServerModel::new(example_spec()).unwrap();
        let mut trace = UsageTrace::new(vec![sample(1.0, 0.0, 0.0, 0.0)]);
        trace.units = Some(UsageUnits {
            net: UsageUnit::BytesPerInterval,
            ..Default::default()
        });
        assert!(matches!(
            m.trace_to_energy_series(&trace, RangePolicy::Reject),
            Err(ModelError::UnitMismatch {
                component: Component::Net,
                ..
            })
        ));
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let m = ServerModel::new(example_spec()).unwrap();
        let samples: Vec<_> = (0..2000)
            .map(|i| UsageSample {
                start: i * 60,
                duration_s: 60.0,
                u_cpu: (i % 40) as f64 / 10.0,
                u_mem: (i % 7) as f64 * 1e9,
                u_io: 0.0,
                u_net: (i % 3) as f64 * 1e8,
            })
            .collect();
        let trace = UsageTrace::new(samples);
        let a = m
            .trace_to_energy_series_with(&trace, RangePolicy::Reject, Execution::Sequential)
            .unwrap();
        let b = m
            .trace_to_energy_series_with(&trace, RangePolicy::Reject, Execution::Parallel)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_joules().to_bits(), b.total_joules().to_bits());
    }
}
