//! Randomised invariants of the power model, grid alignment, embodied ledger
//! and carbon totals.

use proptest::prelude::*;

use carbondef::embodied::{
    attribute_simple, lifecycle_total, ConsumptionRecord, EmbodiedObject, Ledger, SharingProfile,
    SharingStep,
};
use carbondef::grid::{
    align_segments, apply_pue, operational_emissions, CoveragePolicy, IntensityEntry,
    IntensitySeries, PueFactor,
};
use carbondef::model::{
    Component, EnergySeries, PerComponent, RangePolicy, ServerModel, ServerSpec, UsageSample,
    UsageTrace,
};
use carbondef::oracle::oracle_emissions;
use carbondef::sci::{overhead_split, sci, total_carbon};
use carbondef::Execution;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn alpha() -> impl Strategy<Value = PerComponent> {
    (0.05f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(c, m, i, n)| {
        let s = c + m + i + n;
        let (mem, io, net) = (m / s, i / s, n / s);
        PerComponent {
            cpu: 1.0 - mem - io - net,
            mem,
            io,
            net,
        }
    })
}

fn spec() -> impl Strategy<Value = ServerSpec> {
    (
        1.0f64..500.0,
        1u32..8,
        alpha(),
        1.0f64..128.0,
        1e6f64..1e12,
        1e6f64..1e13,
        1e6f64..1e10,
    )
        .prop_map(|(tdp, n, alpha, cpu, mem, io, net)| {
            ServerSpec::new(tdp, n, alpha, PerComponent { cpu, mem, io, net })
        })
}

/// A spec plus a usage point inside its limits.
fn spec_and_usage() -> impl Strategy<Value = (ServerSpec, UsageSample)> {
    (spec(), [const { 0.0f64..=1.0 }; 4], 1.0f64..7200.0).prop_map(|(spec, f, duration_s)| {
        let u = spec.u_max;
        let sample = UsageSample {
            start: 1_700_000_000,
            duration_s,
            u_cpu: f[0] * u.cpu,
            u_mem: f[1] * u.mem,
            u_io: f[2] * u.io,
            u_net: f[3] * u.net,
        };
        (spec, sample)
    })
}

fn scaled(s: &UsageSample, k: f64) -> UsageSample {
    UsageSample {
        u_cpu: s.u_cpu * k,
        u_mem: s.u_mem * k,
        u_io: s.u_io * k,
        u_net: s.u_net * k,
        ..*s
    }
}

fn with_usage(s: &UsageSample, c: Component, v: f64) -> UsageSample {
    let mut out = *s;
    match c {
        Component::Cpu => out.u_cpu = v,
        Component::Mem => out.u_mem = v,
        Component::Io => out.u_io = v,
        Component::Net => out.u_net = v,
    }
    out
}

/// Whole-second energy intervals and a feed with gaps, both within [0, 20000).
fn energy_and_feed() -> impl Strategy<Value = (EnergySeries, IntensitySeries)> {
    let energy = prop::collection::vec((0i64..600, 1i64..900, 0.0f64..5e6), 0..12).prop_map(|v| {
        let mut t = 0;
        let rows: Vec<(i64, f64, f64)> = v
            .into_iter()
            .map(|(gap, d, j)| {
                let start = t + gap;
                t = start + d;
                (start, d as f64, j)
            })
            .collect();
        EnergySeries::from_totals(&rows).unwrap()
    });
    let feed = prop::collection::vec((0i64..300, 1i64..1800, 0.0f64..1.0, any::<bool>()), 0..20)
        .prop_map(|v| {
            let mut t = 0;
            let mut entries = Vec::new();
            for (gap, d, i, keep) in v {
                let start = t + gap;
                t = start + d;
                if keep || gap == 0 {
                    entries.push(IntensityEntry {
                        start,
                        end: t,
                        intensity_kg_per_kwh: i,
                    });
                }
            }
            IntensitySeries::new("prop", entries).unwrap()
        });
    (energy, feed)
}

fn pue() -> impl Strategy<Value = PueFactor> {
    (1.0f64..3.0).prop_map(|p| PueFactor::new(p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn full_usage_hits_the_anchor(spec in spec()) {
        let m = ServerModel::new(spec.clone()).unwrap();
        let full = UsageSample {
            start: 0,
            duration_s: 1.0,
            u_cpu: spec.u_max.cpu,
            u_mem: spec.u_max.mem,
            u_io: spec.u_max.io,
            u_net: spec.u_max.net,
        };
        let p = m.component_power(&full, RangePolicy::Reject).unwrap();
        let anchor = spec.tdp_watts * spec.n_cpu as f64 / spec.alpha.cpu;
        prop_assert!(close(p.total_w, anchor, 1e-9), "{} vs {}", p.total_w, anchor);
        prop_assert!(close(m.full_load_power(), anchor, 1e-12));
    }

    #[test]
    fn power_is_homogeneous((spec, s) in spec_and_usage(), k in 0.0f64..=1.0) {
        let m = ServerModel::new(spec).unwrap();
        let p = m.component_power(&s, RangePolicy::Reject).unwrap();
        let q = m.component_power(&scaled(&s, k), RangePolicy::Reject).unwrap();
        prop_assert!(close(q.total_w, k * p.total_w, 1e-12) || (q.total_w - k * p.total_w).abs() < 1e-300);
        for c in Component::ALL {
            prop_assert!(close(q.component(c), k * p.component(c), 1e-12) || q.component(c) == 0.0);
        }
    }

    #[test]
    fn finite_difference_matches_marginal((spec, s) in spec_and_usage(), which in 0usize..4) {
        let m = ServerModel::new(spec.clone()).unwrap();
        let c = Component::ALL[which];
        let h = 1e-3 * spec.u_max.get(c);
        let base = s.usage(c).clamp(h, spec.u_max.get(c) - h);
        let lo = with_usage(&s, c, base - h);
        let hi = with_usage(&s, c, base + h);
        let p_lo = m.component_power(&lo, RangePolicy::Reject).unwrap().total_w;
        let p_hi = m.component_power(&hi, RangePolicy::Reject).unwrap().total_w;
        let fd = (p_hi - p_lo) / (2.0 * h);
        prop_assert!(close(fd, m.marginal_power(c), 1e-9), "{fd} vs {}", m.marginal_power(c));
    }

    #[test]
    fn energy_is_power_times_duration((spec, s) in spec_and_usage(), idle in 0.0f64..100.0) {
        let m = ServerModel::new(spec.with_idle_watts(idle)).unwrap();
        let p = m.component_power(&s, RangePolicy::Reject).unwrap();
        let e = m.energy_over_interval(&s, RangePolicy::Reject).unwrap();
        prop_assert!(close(e.joules.total, p.total_w * s.duration_s, 1e-12) || e.joules.total == 0.0);
        prop_assert!(close(e.joules.idle, idle * s.duration_s, 1e-12) || idle == 0.0);
    }

    #[test]
    fn sequential_and_parallel_series_agree(spec in spec(), n in 0usize..200) {
        let m = ServerModel::new(spec.clone()).unwrap();
        let samples = (0..n)
            .map(|i| UsageSample {
                start: i as i64 * 60,
                duration_s: 60.0,
                u_cpu: spec.u_max.cpu * ((i % 7) as f64 / 7.0),
                u_mem: spec.u_max.mem * 0.5,
                u_io: 0.0,
                u_net: spec.u_max.net * ((i % 3) as f64 / 3.0),
            })
            .collect();
        let t = UsageTrace::new(samples);
        let a = m.trace_to_energy_series_with(&t, RangePolicy::Reject, Execution::Sequential).unwrap();
        let b = m.trace_to_energy_series_with(&t, RangePolicy::Reject, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn emissions_match_per_second_oracle((energy, feed) in energy_and_feed(), pue in pue()) {
        let fast = operational_emissions(&energy, &feed, pue, CoveragePolicy::SkipUncovered).unwrap();
        let slow = oracle_emissions(&energy, &feed, pue).unwrap();
        prop_assert!(close(fast.total_kg_co2e, slow, 1e-9) || (fast.total_kg_co2e - slow).abs() < 1e-15,
            "{} vs {}", fast.total_kg_co2e, slow);
    }

    #[test]
    fn emissions_are_linear_in_pue((energy, feed) in energy_and_feed(), pue in pue()) {
        let one = operational_emissions(&energy, &feed, PueFactor::ONE, CoveragePolicy::SkipUncovered).unwrap();
        let p = operational_emissions(&energy, &feed, pue, CoveragePolicy::SkipUncovered).unwrap();
        prop_assert!(close(p.total_kg_co2e, pue.value() * one.total_kg_co2e, 1e-12) || one.total_kg_co2e == 0.0);
    }

    #[test]
    fn alignment_conserves_energy((energy, feed) in energy_and_feed()) {
        let a = align_segments(&energy, &feed);
        let input = energy.total_joules();
        let split = a.covered_joules() + a.uncovered_joules();
        prop_assert!(close(split, input, 1e-12) || input == 0.0);
        for s in &a.segments {
            prop_assert!(s.duration_s > 0.0 && s.joules >= 0.0);
        }
    }

    #[test]
    fn constant_intensity_collapses((energy, _) in energy_and_feed(), pue in pue(), i in 0.0f64..1.5) {
        let feed = IntensitySeries::constant("flat", 0, 100_000, i).unwrap();
        let r = operational_emissions(&energy, &feed, pue, CoveragePolicy::Strict).unwrap();
        let expected = pue.value() * i * energy.total_joules() / 3.6e6;
        prop_assert!(close(r.total_kg_co2e, expected, 1e-12) || expected == 0.0);
    }

    #[test]
    fn emissions_grow_with_energy((energy, feed) in energy_and_feed(), pue in pue(), k in 1.0f64..4.0) {
        let bigger = EnergySeries::from_totals(
            &energy.entries().iter().map(|e| (e.start, e.duration_s, e.total_joules() * k)).collect::<Vec<_>>(),
        )
        .unwrap();
        let a = operational_emissions(&energy, &feed, pue, CoveragePolicy::SkipUncovered).unwrap();
        let b = operational_emissions(&bigger, &feed, pue, CoveragePolicy::SkipUncovered).unwrap();
        prop_assert!(b.total_kg_co2e >= a.total_kg_co2e);
    }

    #[test]
    fn overhead_split_is_exact_up_to_pue_two(j in 0.0f64..1e12, p in 1.0f64..=2.0) {
        let pue = PueFactor::new(p).unwrap();
        let s = overhead_split(j, pue);
        prop_assert_eq!(s.software_joules, j);
        prop_assert_eq!(s.total(), apply_pue(j, pue));
        prop_assert!(s.overhead_joules >= 0.0);
    }

    #[test]
    fn sci_round_trips(op in 0.0f64..1e6, emb in 0.0f64..1e6, r in 1e-3f64..1e9) {
        let total = total_carbon(op, emb).unwrap();
        let per_unit = sci(total, r).unwrap();
        prop_assert!(close(per_unit * r, total, 1e-12) || total == 0.0);
    }
}

/// Objects with lifespan `[0, lifespan_s)` and records whose fractions per
/// object sum to at most one, so no instant is oversubscribed.
fn ledger() -> impl Strategy<Value = (Vec<EmbodiedObject>, Vec<ConsumptionRecord>)> {
    let object = (1.0f64..1e4, 0.0f64..1e3, 0.0f64..1e3, 1000i64..1_000_000);
    let holder = (
        0usize..4,
        0.0f64..1.0,
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..4),
    );
    prop::collection::vec((object, prop::collection::vec(holder, 0..4)), 1..5).prop_map(|objs| {
        let mut objects = Vec::new();
        let mut records = Vec::new();
        for (k, ((m, r, e, life), holders)) in objs.into_iter().enumerate() {
            let id = format!("obj-{k}");
            objects.push(EmbodiedObject {
                id: id.clone(),
                m_kg: m,
                r_kg: r,
                eol_kg: e,
                lifespan_start: 0,
                lifespan_s: life as f64,
            });
            let weight: f64 = holders.iter().map(|h| h.1).sum::<f64>().max(1.0);
            for (consumer, w, cuts) in holders {
                let mut steps = Vec::new();
                let mut t = 0;
                for (gap, len) in cuts {
                    let start = t + (gap * life as f64 / 8.0) as i64;
                    let end = (start + 1 + (len * life as f64 / 4.0) as i64).min(life);
                    if start >= end {
                        break;
                    }
                    steps.push(SharingStep {
                        start,
                        end,
                        fraction: w / weight,
                    });
                    t = end;
                }
                records.push(ConsumptionRecord {
                    consumer_id: format!("c-{consumer}"),
                    object_id: id.clone(),
                    profile: SharingProfile::new(steps),
                });
            }
        }
        (objects, records)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn embodied_is_conserved((objects, records) in ledger()) {
        let l = Ledger::new(objects.clone(), records).unwrap();
        let attributed: f64 = l.all_consumers_with(Execution::Sequential).iter().map(|c| c.total_kg_co2e).sum();
        let residual: f64 = objects.iter().map(|o| l.idle_residual(&o.id).unwrap()).sum();
        let lifecycle: f64 = objects.iter().map(lifecycle_total).sum();
        prop_assert!(close(attributed + residual, lifecycle, 1e-9));
        for o in &objects {
            prop_assert!(l.idle_residual(&o.id).unwrap() >= -1e-9 * lifecycle_total(o));
        }
    }

    #[test]
    fn splitting_a_step_in_time_changes_nothing(
        (objects, records) in ledger(),
        cut in 0.0f64..1.0,
    ) {
        let whole = Ledger::new(objects.clone(), records.clone()).unwrap();
        let split_records: Vec<ConsumptionRecord> = records
            .iter()
            .map(|r| {
                let steps = r
                    .profile
                    .steps()
                    .iter()
                    .flat_map(|s| {
                        let mid = s.start + ((s.end - s.start) as f64 * cut) as i64;
                        if mid > s.start && mid < s.end {
                            vec![SharingStep { end: mid, ..*s }, SharingStep { start: mid, ..*s }]
                        } else {
                            vec![*s]
                        }
                    })
                    .collect();
                ConsumptionRecord { profile: SharingProfile::new(steps), ..r.clone() }
            })
            .collect();
        let split = Ledger::new(objects, split_records).unwrap();
        for (a, b) in whole.all_consumers_with(Execution::Parallel).iter().zip(split.all_consumers_with(Execution::Parallel)) {
            prop_assert!(close(a.total_kg_co2e, b.total_kg_co2e, 1e-12) || a.total_kg_co2e == 0.0);
        }
    }

    #[test]
    fn attribution_scales_with_carbon((objects, records) in ledger(), k in 0.1f64..10.0) {
        let base = Ledger::new(objects.clone(), records.clone()).unwrap();
        let scaled_objects = objects
            .iter()
            .map(|o| EmbodiedObject { m_kg: o.m_kg * k, r_kg: o.r_kg * k, eol_kg: o.eol_kg * k, ..o.clone() })
            .collect();
        let scaled = Ledger::new(scaled_objects, records).unwrap();
        for id in base.consumers() {
            let a = base.consumer_embodied(id).total_kg_co2e;
            let b = scaled.consumer_embodied(id).total_kg_co2e;
            prop_assert!(close(b, k * a, 1e-12) || a == 0.0);
        }
    }

    #[test]
    fn full_holding_reduces_to_simple_attribution(m in 1.0f64..1e4, life in 1000i64..1_000_000, used in 0.0f64..=1.0) {
        let object = EmbodiedObject { id: "o".into(), m_kg: m, r_kg: m / 3.0, eol_kg: m / 7.0, lifespan_start: 0, lifespan_s: life as f64 };
        let end = ((life as f64 * used) as i64).max(1);
        let record = ConsumptionRecord {
            consumer_id: "c".into(),
            object_id: "o".into(),
            profile: SharingProfile::single(0, end, 1.0),
        };
        let l = Ledger::new(vec![object.clone()], vec![record]).unwrap();
        prop_assert_eq!(l.consumer_embodied("c").total_kg_co2e, attribute_simple(&object, end as f64).unwrap());
    }

    #[test]
    fn ledger_build_is_mode_independent((objects, records) in ledger()) {
        let a = Ledger::new_with(objects.clone(), records.clone(), Execution::Sequential).unwrap();
        let b = Ledger::new_with(objects, records, Execution::Parallel).unwrap();
        prop_assert_eq!(a.object_balances_with(Execution::Sequential), b.object_balances_with(Execution::Parallel));
    }
}
