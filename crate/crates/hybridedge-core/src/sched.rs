//! Placement, admission, spreading, and rebalancing of instances across
//! healthy workers.
//!
//! All functions here are pure: they never mutate the given node states, and
//! the same inputs always produce the same outputs. The manager's single
//! scheduling loop owns cluster state and applies the returned decisions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{
    Assignment, ClusterConfig, NodeHealth, NodeRole, NodeState, PlacementDecision,
    PlacementReason, RuntimeClass, TimestampMs, ValidatedSpec,
};

/// Per-instance resource reservation, as estimated at admission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub mem_mb: f64,
    pub cpu_pct: f64,
}

/// One instance moved from an overloaded node to an underloaded one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Migration {
    pub instance_id: String,
    pub from_node: String,
    pub to_node: String,
}

/// Outcome of admission control. `Queued` is a value, not an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Admission {
    Admit,
    Queued(QueueReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueueReason {
    InsufficientCapacity,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlaceError {
    /// A race invalidated admission; the caller requeues.
    #[error("no healthy node can fit the instance")]
    NoCapacity,
}

/// An instance whose node was declared Unhealthy, carrying everything needed
/// to re-place it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrphanInstance {
    pub instance_id: String,
    pub workload_id: String,
    pub runtime_class: RuntimeClass,
    pub footprint: Footprint,
    pub priority: i32,
}

/// Hypothetical free capacity tracker used while instances are placed one at
/// a time.
struct Residual<'a> {
    node: &'a NodeState,
    free_mem_mb: f64,
    free_cpu_pct: f64,
}

impl<'a> Residual<'a> {
    fn fits(&self, fp: &Footprint) -> bool {
        self.free_mem_mb >= fp.mem_mb && self.free_cpu_pct >= fp.cpu_pct
    }

    fn debit(&mut self, fp: &Footprint) {
        self.free_mem_mb -= fp.mem_mb;
        self.free_cpu_pct -= fp.cpu_pct;
    }

    /// Residual-capacity score: weight_mem * free_mem_fraction +
    /// weight_cpu * free_cpu_fraction.
    fn score(&self, config: &ClusterConfig) -> f64 {
        let mem_fraction = if self.node.mem_capacity_mb > 0.0 {
            self.free_mem_mb / self.node.mem_capacity_mb
        } else {
            0.0
        };
        let cpu_budget = self.node.cpu_budget_pct();
        let cpu_fraction = if cpu_budget > 0.0 { self.free_cpu_pct / cpu_budget } else { 0.0 };
        config.weight_mem * mem_fraction + config.weight_cpu * cpu_fraction
    }
}

fn schedulable(node: &NodeState, config: &ClusterConfig) -> bool {
    node.health == NodeHealth::Healthy
        && (node.role == NodeRole::Worker || config.manager_schedulable)
}

fn residuals<'a>(nodes: &'a [NodeState], config: &ClusterConfig) -> Vec<Residual<'a>> {
    let mut list: Vec<Residual<'a>> = nodes
        .iter()
        .filter(|n| schedulable(n, config))
        .map(|node| Residual {
            node,
            free_mem_mb: node.free_mem_mb(),
            free_cpu_pct: node.free_cpu_pct(),
        })
        .collect();
    // Ascending node_id so that score ties break deterministically.
    list.sort_by(|a, b| a.node.node_id.cmp(&b.node.node_id));
    list
}

/// Picks the fitting node with the maximum residual score, ties broken by
/// ascending node_id, and debits it. Returns the chosen node_id.
fn place_one(
    residuals: &mut [Residual<'_>],
    fp: &Footprint,
    config: &ClusterConfig,
) -> Option<String> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, res) in residuals.iter().enumerate() {
        if !res.fits(fp) {
            continue;
        }
        let score = res.score(config);
        match best {
            Some((_, best_score)) if score <= best_score => {}
            _ => best = Some((idx, score)),
        }
    }
    let (idx, _) = best?;
    residuals[idx].debit(fp);
    Some(residuals[idx].node.node_id.clone())
}

/// Admission control: Admit iff, processing instances one at a time against
/// hypothetical allocations, every instance finds a healthy node with enough
/// free memory and CPU. Nothing is mutated either way.
pub fn admit(spec: &ValidatedSpec, nodes: &[NodeState], config: &ClusterConfig) -> Admission {
    let fp = Footprint { mem_mb: spec.est_mem_mb(), cpu_pct: spec.est_cpu_pct() };
    let mut residuals = residuals(nodes, config);
    for _ in 0..spec.instances() {
        if place_one(&mut residuals, &fp, config).is_none() {
            return Admission::Queued(QueueReason::InsufficientCapacity);
        }
    }
    Admission::Admit
}

/// Instance ids are derived from the workload id and the instance index.
pub fn instance_id(workload_id: &str, index: u32) -> String {
    format!("{workload_id}-{index}")
}

/// Greedy placement: for each instance, score every fitting healthy worker by
/// residual capacity, pick the maximum (ties by ascending node_id), then
/// debit the hypothetical allocation before placing the next instance.
pub fn place(
    spec: &ValidatedSpec,
    rc: &RuntimeClass,
    nodes: &[NodeState],
    config: &ClusterConfig,
    decided_at: TimestampMs,
    reason: PlacementReason,
) -> Result<PlacementDecision, PlaceError> {
    let fp = Footprint { mem_mb: spec.est_mem_mb(), cpu_pct: spec.est_cpu_pct() };
    let mut residuals = residuals(nodes, config);
    let mut assignments = Vec::with_capacity(spec.instances() as usize);
    for index in 0..spec.instances() {
        let node_id = place_one(&mut residuals, &fp, config).ok_or(PlaceError::NoCapacity)?;
        assignments.push(Assignment {
            instance_id: instance_id(spec.id(), index),
            node_id,
            runtime_class: rc.clone(),
        });
    }
    Ok(PlacementDecision { workload_id: spec.id().into(), assignments, decided_at, reason })
}

/// Re-places orphans one at a time with reason RequeueAfterFailure.
/// Unplaceable orphans are returned for the admission queue.
pub fn requeue_orphans(
    orphans: &[OrphanInstance],
    nodes: &[NodeState],
    config: &ClusterConfig,
    decided_at: TimestampMs,
) -> (Vec<PlacementDecision>, Vec<OrphanInstance>) {
    let mut residuals = residuals(nodes, config);
    let mut decisions = Vec::new();
    let mut unplaced = Vec::new();
    for orphan in orphans {
        match place_one(&mut residuals, &orphan.footprint, config) {
            Some(node_id) => decisions.push(PlacementDecision {
                workload_id: orphan.workload_id.clone(),
                assignments: alloc::vec![Assignment {
                    instance_id: orphan.instance_id.clone(),
                    node_id,
                    runtime_class: orphan.runtime_class.clone(),
                }],
                decided_at,
                reason: PlacementReason::RequeueAfterFailure,
            }),
            None => unplaced.push(orphan.clone()),
        }
    }
    (decisions, unplaced)
}

/// Count-based rebalancing: while the instance-count delta between the most
/// and least loaded healthy workers exceeds the threshold, move one instance
/// (lowest instance_id first) from the max-count node to the min-count node.
/// Ties break by ascending node_id. Migrations that would overflow the
/// destination's memory or CPU are skipped; if no legal move remains, the
/// loop stops. Deterministic.
pub fn rebalance(
    nodes: &[NodeState],
    footprints: &BTreeMap<String, Footprint>,
    config: &ClusterConfig,
) -> Vec<Migration> {
    struct Slot {
        node_id: String,
        instances: Vec<String>, // kept sorted ascending
        free_mem_mb: f64,
        free_cpu_pct: f64,
    }

    let mut slots: Vec<Slot> = nodes
        .iter()
        .filter(|n| schedulable(n, config))
        .map(|n| Slot {
            node_id: n.node_id.clone(),
            instances: n.running_instances.iter().cloned().collect(),
            free_mem_mb: n.free_mem_mb(),
            free_cpu_pct: n.free_cpu_pct(),
        })
        .collect();
    slots.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    if slots.len() < 2 {
        return Vec::new();
    }

    let fp_of = |iid: &str| footprints.get(iid).copied().unwrap_or(Footprint { mem_mb: 0.0, cpu_pct: 0.0 });

    let mut migrations = Vec::new();
    loop {
        let max_idx = slots
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.instances.len().cmp(&b.instances.len()))
            .map(|(i, _)| i)
            .unwrap();
        // max_by returns the last maximum; rescan for the first (lowest id).
        let max_idx = slots
            .iter()
            .enumerate()
            .find(|(_, s)| s.instances.len() == slots[max_idx].instances.len())
            .map(|(i, _)| i)
            .unwrap();
        let max_count = slots[max_idx].instances.len();

        // Candidate destinations ordered by ascending count then node_id.
        let mut dest_order: Vec<usize> = (0..slots.len()).filter(|&i| i != max_idx).collect();
        dest_order.sort_by(|&a, &b| {
            slots[a]
                .instances
                .len()
                .cmp(&slots[b].instances.len())
                .then(slots[a].node_id.cmp(&slots[b].node_id))
        });
        let min_count = slots[dest_order[0]].instances.len();
        if max_count.saturating_sub(min_count) <= config.rebalance_threshold as usize {
            break;
        }

        // First (instance, destination) pair that fits, instances in
        // ascending id order, destinations in ascending count order.
        let mut moved = false;
        'outer: for inst_pos in 0..slots[max_idx].instances.len() {
            let iid = slots[max_idx].instances[inst_pos].clone();
            let fp = fp_of(&iid);
            for &dest in &dest_order {
                if slots[dest].instances.len() >= max_count.saturating_sub(1) {
                    // Moving here would not reduce the imbalance.
                    continue;
                }
                if slots[dest].free_mem_mb >= fp.mem_mb && slots[dest].free_cpu_pct >= fp.cpu_pct {
                    slots[max_idx].instances.remove(inst_pos);
                    slots[max_idx].free_mem_mb += fp.mem_mb;
                    slots[max_idx].free_cpu_pct += fp.cpu_pct;
                    let di = dest;
                    let pos = slots[di].instances.binary_search(&iid).unwrap_err();
                    slots[di].instances.insert(pos, iid.clone());
                    slots[di].free_mem_mb -= fp.mem_mb;
                    slots[di].free_cpu_pct -= fp.cpu_pct;
                    migrations.push(Migration {
                        instance_id: iid,
                        from_node: slots[max_idx].node_id.clone(),
                        to_node: slots[di].node_id.clone(),
                    });
                    moved = true;
                    break 'outer;
                }
            }
        }
        if !moved {
            break;
        }
    }
    migrations
}
