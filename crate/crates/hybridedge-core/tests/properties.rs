//! Property tests for the decision-core invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use hybridedge_core::classify::{classify, RuleTable};
use hybridedge_core::kernel::{image_artifact_name, stream_aggregate, ActivityRow};
use hybridedge_core::model::{
    mem_saving_pct, node_utilization, validate_workload, AppClass, ClusterConfig, NodeState,
    PayloadKind, PlacementReason, RuntimeKind, WorkloadSpec,
};
use hybridedge_core::monitor::health_for_gap;
use hybridedge_core::sampling::sample_metrics;
use hybridedge_core::sched::{self, Footprint};
use hybridedge_core::ResourceProfile;

fn payload_kind() -> impl Strategy<Value = PayloadKind> {
    prop_oneof![
        Just(PayloadKind::Image),
        Just(PayloadKind::Stream),
        "[a-z]{1,8}".prop_map(PayloadKind::Custom),
    ]
}

fn app_class() -> impl Strategy<Value = AppClass> {
    prop_oneof![
        Just(AppClass::FaceDetect),
        Just(AppClass::CarDetect),
        Just(AppClass::BodyDetect),
        Just(AppClass::ObjectDetect),
        Just(AppClass::StreamAggregate),
        "[a-z]{1,8}".prop_map(AppClass::Other),
    ]
}

fn workload_spec() -> impl Strategy<Value = WorkloadSpec> {
    (
        "[a-z][a-z0-9]{0,6}",
        payload_kind(),
        app_class(),
        proptest::option::of(0.0f64..500.0),
        proptest::option::of(0.0f64..100.0),
        1u32..6,
        -5i32..6,
    )
        .prop_map(|(id, payload, app, mem, cpu, instances, priority)| {
            let mut spec = WorkloadSpec::new(&id, payload, "payload", app);
            spec.est_mem_mb = mem;
            spec.est_cpu_pct = cpu;
            spec.instances = instances;
            spec.priority = priority;
            spec
        })
}

proptest! {
    #[test]
    fn mem_saving_complement(baseline in 0.001f64..1e6) {
        prop_assert!((mem_saving_pct(baseline, 0.0).unwrap() - 100.0).abs() < 1e-9);
        prop_assert!(mem_saving_pct(baseline, baseline).unwrap().abs() < 1e-12);
    }

    #[test]
    fn utilization_is_monotone_in_allocations(
        capacity in 1.0f64..10_000.0,
        alloc_a in 0.0f64..5_000.0,
        extra in 0.0f64..5_000.0,
        cpu_a in 0.0f64..400.0,
        cpu_extra in 0.0f64..400.0,
    ) {
        let mut node = NodeState::with_capacity("w1", capacity, 4, 0);
        node.mem_allocated_mb = alloc_a;
        node.cpu_allocated_pct = cpu_a;
        let (cpu_before, mem_before) = node_utilization(&node).unwrap();
        node.mem_allocated_mb += extra;
        node.cpu_allocated_pct += cpu_extra;
        let (cpu_after, mem_after) = node_utilization(&node).unwrap();
        prop_assert!(mem_after >= mem_before);
        prop_assert!(cpu_after >= cpu_before);
        prop_assert!((0.0..=1.0).contains(&mem_after));
        prop_assert!((0.0..=1.0).contains(&cpu_after));
    }

    #[test]
    fn validation_is_idempotent(spec in workload_spec()) {
        let config = ClusterConfig::default();
        if let Ok(validated) = validate_workload(spec, &config) {
            let again = validate_workload(validated.spec().clone(), &config).unwrap();
            prop_assert_eq!(validated, again);
        }
    }

    /// Under the default table every Image spec maps to kind Container and
    /// every Stream spec to kind Unikernel, regardless of other fields; and
    /// classification is total.
    #[test]
    fn default_table_routes_by_payload_kind(spec in workload_spec()) {
        let config = ClusterConfig::default();
        let validated = validate_workload(spec, &config).unwrap();
        let rc = classify(&validated, &RuleTable::default_table());
        match validated.payload_kind {
            PayloadKind::Image => prop_assert_eq!(rc.kind, RuntimeKind::Container),
            PayloadKind::Stream => prop_assert_eq!(rc.kind, RuntimeKind::Unikernel),
            PayloadKind::Custom(_) => prop_assert_eq!(rc.kind, RuntimeKind::Container),
        }
    }

    /// Permuting rules after the first matching rule never changes the result.
    #[test]
    fn first_match_is_insensitive_to_later_rules(spec in workload_spec(), swap in any::<bool>()) {
        let config = ClusterConfig::default();
        let validated = validate_workload(spec, &config).unwrap();
        let table = RuleTable::default_table();
        let rc = classify(&validated, &table);
        let mut rules = table.rules().to_vec();
        let first_match = rules.iter().position(|r| r.matches(&validated)).unwrap();
        // swap two rules strictly after the first match, when they exist
        if swap && first_match + 2 < rules.len() - 1 {
            rules.swap(first_match + 1, first_match + 2);
        }
        let known = hybridedge_core::calibration::CalibrationRegistry::paper_defaults().known_flavors();
        let permuted = RuleTable::new(rules, &known).unwrap();
        prop_assert_eq!(classify(&validated, &permuted), rc);
    }

    #[test]
    fn health_is_a_pure_function_of_the_gap(gap in 0u64..10_000) {
        let config = ClusterConfig::default();
        let health = health_for_gap(gap, &config);
        let expected = if gap >= config.unhealthy_gap_ms() {
            hybridedge_core::NodeHealth::Unhealthy
        } else if gap >= config.suspect_gap_ms() {
            hybridedge_core::NodeHealth::Suspect
        } else {
            hybridedge_core::NodeHealth::Healthy
        };
        prop_assert_eq!(health, expected);
        prop_assert_eq!(health_for_gap(gap, &config), health);
    }

    /// Over any sweep sequence with no intervening heartbeats, each instance
    /// id appears in at most one orphan set.
    #[test]
    fn orphans_are_emitted_exactly_once(
        count in 1usize..6,
        sweep_times in proptest::collection::vec(0u64..20_000, 1..8),
    ) {
        let config = ClusterConfig::default();
        let mut node = NodeState::worker("w1", 0);
        for i in 0..count {
            node.running_instances.insert(format!("i{i}"));
        }
        let mut nodes = vec![node];
        let mut times = sweep_times;
        times.sort_unstable();
        let mut seen: Vec<String> = Vec::new();
        for t in times {
            let (updated, orphans) = hybridedge_core::monitor::sweep_health(&nodes, t, &config);
            for o in &orphans {
                prop_assert!(!seen.contains(o), "instance {} orphaned twice", o);
                seen.push(o.clone());
            }
            nodes = updated;
        }
        prop_assert!(seen.len() <= count);
    }

    /// For N identical empty workers and k*N instances of identical positive
    /// footprint, place assigns exactly k per node.
    #[test]
    fn place_spreads_identical_instances_evenly(
        n in 1usize..6,
        k in 1u32..6,
        mem in 1.0f64..100.0,
    ) {
        let config = ClusterConfig::default();
        let nodes: Vec<NodeState> =
            (1..=n).map(|i| NodeState::worker(&format!("w{i}"), 0)).collect();
        let mut spec = WorkloadSpec::new("job", PayloadKind::Image, "p", AppClass::CarDetect);
        spec.est_mem_mb = Some(mem);
        spec.instances = k * n as u32;
        let validated = validate_workload(spec, &config).unwrap();
        let decision = sched::place(
            &validated,
            &hybridedge_core::RuntimeClass::container("docker"),
            &nodes,
            &config,
            0,
            PlacementReason::Fresh,
        )
        .unwrap();
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for a in &decision.assignments {
            *counts.entry(a.node_id.clone()).or_default() += 1;
        }
        prop_assert_eq!(counts.len(), n);
        prop_assert!(counts.values().all(|&c| c == k));
    }

    /// Rebalance always converges to max - min <= threshold, emits at most
    /// one migration per instance, and is deterministic.
    #[test]
    fn rebalance_converges_and_is_bounded(
        counts in proptest::collection::vec(0usize..12, 2..6),
        threshold in 1u32..4,
    ) {
        let mut config = ClusterConfig::default();
        config.rebalance_threshold = threshold;
        let mut nodes = Vec::new();
        let mut footprints = BTreeMap::new();
        let mut total = 0usize;
        for (n, count) in counts.iter().enumerate() {
            let mut node = NodeState::worker(&format!("w{n}"), 0);
            for k in 0..*count {
                let iid = format!("w{n}-i{k}");
                node.running_instances.insert(iid.clone());
                node.mem_allocated_mb += 10.0;
                footprints.insert(iid, Footprint { mem_mb: 10.0, cpu_pct: 0.0 });
                total += 1;
            }
            nodes.push(node);
        }
        let migrations = sched::rebalance(&nodes, &footprints, &config);
        prop_assert!(migrations.len() <= total, "{} migrations for {} instances", migrations.len(), total);
        // determinism
        prop_assert_eq!(&migrations, &sched::rebalance(&nodes, &footprints, &config));
        // convergence: replay the moves and check the final counts
        let mut final_counts: BTreeMap<String, i64> = nodes
            .iter()
            .map(|n| (n.node_id.clone(), n.running_instances.len() as i64))
            .collect();
        for m in &migrations {
            prop_assert!(m.from_node != m.to_node);
            *final_counts.get_mut(&m.from_node).unwrap() -= 1;
            *final_counts.get_mut(&m.to_node).unwrap() += 1;
        }
        let max = final_counts.values().max().unwrap();
        let min = final_counts.values().min().unwrap();
        prop_assert!(
            max - min <= threshold as i64,
            "not converged: {final_counts:?} (threshold {threshold})"
        );
    }

    /// Every simulated metric lies in [mean - spread, mean + spread].
    #[test]
    fn sampled_metrics_stay_in_bounds(
        seed in any::<u64>(),
        cpu_mean in 0.0f64..50.0,
        cpu_spread in 0.0f64..10.0,
        mem_mean in 1.0f64..500.0,
        mem_spread in 0.0f64..100.0,
        time_mean in 0.1f64..1000.0,
        time_spread in 0.0f64..100.0,
    ) {
        let profile = ResourceProfile {
            cpu_pct_mean: cpu_mean,
            cpu_pct_spread: cpu_spread,
            mem_mb_mean: mem_mean,
            mem_mb_spread: mem_spread,
            proc_time_ms_mean: time_mean,
            proc_time_ms_spread: time_spread,
            boot_ms: 0.0,
        };
        let m = sample_metrics(&profile, seed);
        prop_assert!(m.cpu_avg_pct >= (cpu_mean - cpu_spread).max(0.0) - 1e-9);
        prop_assert!(m.cpu_avg_pct <= cpu_mean + cpu_spread + 1e-9);
        prop_assert!(m.mem_peak_mb >= (mem_mean - mem_spread).max(0.0) - 1e-9);
        prop_assert!(m.mem_peak_mb <= mem_mean + mem_spread + 1e-9);
        prop_assert!(m.proc_time_ms >= (time_mean - time_spread).max(0.0) - 1e-9);
        prop_assert!(m.proc_time_ms <= time_mean + time_spread + 1e-9);
        prop_assert_eq!(m, sample_metrics(&profile, seed));
    }

    /// Distinct instance ids give distinct artifact names.
    #[test]
    fn artifact_naming_is_injective(
        ids in proptest::collection::btree_set("[a-z0-9-]{1,10}", 2..10),
    ) {
        let names: std::collections::BTreeSet<String> = ids
            .iter()
            .map(|id| image_artifact_name(&AppClass::CarDetect, id).unwrap())
            .collect();
        prop_assert_eq!(names.len(), ids.len());
    }

    /// stream_aggregate matches a brute-force implementation (nested loops,
    /// no maps) exactly on small random tables.
    #[test]
    fn stream_aggregate_matches_brute_force(
        rows in proptest::collection::vec(("u[0-9]{1,2}", 0u64..50_000), 1..100),
    ) {
        let rows: Vec<ActivityRow> = rows
            .into_iter()
            .map(|(user_id, total_steps)| ActivityRow { user_id, total_steps })
            .collect();
        let report = stream_aggregate(&rows).unwrap();

        // brute force: nested loops, no maps
        let mut users: Vec<&str> = Vec::new();
        for row in &rows {
            if !users.iter().any(|u| *u == row.user_id) {
                users.push(&row.user_id);
            }
        }
        users.sort_unstable();
        prop_assert_eq!(report.per_user_mean_steps.len(), users.len());
        let mut best_user = "";
        let mut best_mean = f64::NEG_INFINITY;
        for user in &users {
            let mut sum = 0u64;
            let mut count = 0u64;
            for row in &rows {
                if row.user_id == *user {
                    sum += row.total_steps;
                    count += 1;
                }
            }
            let mean = sum as f64 / count as f64;
            prop_assert_eq!(report.per_user_mean_steps[*user], mean);
            if mean > best_mean {
                best_mean = mean;
                best_user = user;
            }
        }
        prop_assert_eq!(&report.max_user, best_user);
        prop_assert_eq!(report.max_mean, best_mean);
    }
}
