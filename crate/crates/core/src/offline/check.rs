//! Direct (pre-linearization) feasibility checker for offline schedules,
//! plus the mapping of simulator outcomes into offline semantics used by
//! the heuristic-vs-formulation comparison.

use super::{OfflineInstance, OfflineJobSchedule, OfflineSchedule, OfflineSegment};
use crate::workload::{JobKind, JobOutcome};
use std::collections::BTreeMap;

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Constraint family that failed, e.g. "preempt2" or "rtj-sd-cap".
    pub constraint: String,
    pub detail: String,
}

impl Violation {
    fn new(constraint: &str, detail: String) -> Self {
        Violation {
            constraint: constraint.into(),
            detail,
        }
    }
}

/// Evaluates every logical constraint family against a schedule. An empty
/// result means the schedule is feasible under offline semantics.
pub fn check_feasible(inst: &OfflineInstance, sched: &OfflineSchedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.jobs.len();

    // every instance job scheduled exactly once
    let mut seen = vec![0usize; n];
    for js in &sched.jobs {
        if js.job_index >= n {
            out.push(Violation::new(
                "structure",
                format!("unknown job index {}", js.job_index),
            ));
            return out;
        }
        seen[js.job_index] += 1;
    }
    for (j, &c) in seen.iter().enumerate() {
        if c != 1 {
            out.push(Violation::new(
                "structure",
                format!("job {j} scheduled {c} times"),
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }

    // per-job structural checks
    for js in &sched.jobs {
        let j = js.job_index;
        let job = &inst.jobs[j];
        let placements = inst.placements(j);
        let Some(placement) = placements
            .iter()
            .find(|p| p.placement_index == js.placement_index)
        else {
            out.push(Violation::new(
                "part1",
                format!("job {j}: placement {} not in its block set", js.placement_index),
            ));
            continue;
        };
        match job.kind {
            JobKind::RealTime => {
                if js.segments.len() != 1 {
                    out.push(Violation::new(
                        "rtj-no-preempt",
                        format!("real-time job {j} has {} segments", js.segments.len()),
                    ));
                    continue;
                }
                if (js.segments[0].ratio - 1.0).abs() > EPS {
                    out.push(Violation::new(
                        "rtj-ratio",
                        format!("real-time job {j} ratio {}", js.segments[0].ratio),
                    ));
                }
                if (js.end - (js.segments[0].start + job.runtime)).abs() > EPS {
                    out.push(Violation::new(
                        "rtj-end",
                        format!("job {j}: end {} != start + runtime", js.end),
                    ));
                }
            }
            JobKind::Batch => {
                if js.segments.is_empty() || js.segments.len() > 2 {
                    out.push(Violation::new(
                        "preempt2",
                        format!(
                            "batch job {j} has {} segments; at most one preemption",
                            js.segments.len()
                        ),
                    ));
                    continue;
                }
                let ratio_sum: f64 = js.segments.iter().map(|s| s.ratio).sum();
                if (ratio_sum - 1.0).abs() > EPS {
                    out.push(Violation::new(
                        "assign4",
                        format!("batch job {j} ratios sum to {ratio_sum}"),
                    ));
                }
                if js.segments.len() == 2 {
                    for seg in &js.segments {
                        if seg.ratio < inst.min_exec_ratio - EPS || seg.ratio > 1.0 + EPS {
                            out.push(Violation::new(
                                "preempt1",
                                format!("batch job {j} segment ratio {}", seg.ratio),
                            ));
                        }
                    }
                }
                // end covers each segment
                let ovhd = if js.segments.len() == 2 {
                    inst.overhead(j)
                } else {
                    0.0
                };
                for (k, seg) in js.segments.iter().enumerate() {
                    let need = seg.start + seg.ratio * job.runtime + ovhd;
                    let family = if k == 0 { "et1" } else { "et2" };
                    if js.end < need - EPS {
                        out.push(Violation::new(
                            family,
                            format!("batch job {j}: end {} before segment end {need}", js.end),
                        ));
                    }
                }
            }
        }
        // submit-time bound on every segment start
        for (k, seg) in js.segments.iter().enumerate() {
            if seg.start < job.submit_time - EPS {
                out.push(Violation::new(
                    "st1",
                    format!("job {j} segment {k} starts before submission"),
                ));
            }
        }
        // slots must cover exactly the placement's blocks
        for (k, seg) in js.segments.iter().enumerate() {
            let mut blocks: Vec<u32> = seg.slots.iter().map(|&(b, _)| b).collect();
            blocks.sort_unstable();
            let want: Vec<u32> = placement.blocks().collect();
            if blocks != want {
                out.push(Violation::new(
                    "assign1",
                    format!("job {j} segment {k} blocks {blocks:?} != placement {want:?}"),
                ));
            }
        }
        // a split job's restart sits at later slots on every block
        if js.segments.len() == 2 {
            let first: BTreeMap<u32, u32> = js.segments[0].slots.iter().copied().collect();
            for &(b, s1) in &js.segments[1].slots {
                if let Some(&s0) = first.get(&b) {
                    if s1 <= s0 {
                        out.push(Violation::new(
                            "st4",
                            format!("job {j}: restart slot {s1} not after {s0} on block {b}"),
                        ));
                    }
                }
            }
        }
    }
    if !out.is_empty() {
        return out;
    }

    // per-block sequence structure and timing
    let mut by_block: BTreeMap<u32, BTreeMap<u32, (usize, usize)>> = BTreeMap::new();
    for (ji, js) in sched.jobs.iter().enumerate() {
        for (k, seg) in js.segments.iter().enumerate() {
            for &(b, s) in &seg.slots {
                if s == 0 || s > inst.max_sequences {
                    out.push(Violation::new(
                        "sequence-cap",
                        format!("job {}: slot {s} outside 1..{}", js.job_index, inst.max_sequences),
                    ));
                    continue;
                }
                if let Some((other, _)) = by_block.entry(b).or_default().insert(s, (ji, k)) {
                    out.push(Violation::new(
                        "assign5",
                        format!(
                            "block {b} slot {s}: jobs {} and {} collide",
                            sched.jobs[other].job_index, js.job_index
                        ),
                    ));
                }
            }
        }
    }
    if !out.is_empty() {
        return out;
    }

    let seg_times = |ji: usize, k: usize| -> (f64, f64) {
        let js: &OfflineJobSchedule = &sched.jobs[ji];
        let job = &inst.jobs[js.job_index];
        let seg: &OfflineSegment = &js.segments[k];
        let ovhd = if js.segments.len() == 2 {
            inst.overhead(js.job_index)
        } else {
            0.0
        };
        (seg.start, seg.start + seg.ratio * job.runtime + ovhd)
    };

    for (&b, slots) in &by_block {
        let mut keys: Vec<u32> = slots.keys().copied().collect();
        keys.sort_unstable();
        for (i, &s) in keys.iter().enumerate() {
            let expect = i as u32 + 1;
            if s != expect {
                out.push(Violation::new(
                    "sequence-contiguity",
                    format!("block {b}: slot {s} used but {expect} empty"),
                ));
            }
        }
        // the next slot's start must clear the previous segment's end
        for w in keys.windows(2) {
            let (ji0, k0) = slots[&w[0]];
            let (ji1, k1) = slots[&w[1]];
            let (_, end0) = seg_times(ji0, k0);
            let (start1, _) = seg_times(ji1, k1);
            if start1 < end0 - EPS {
                out.push(Violation::new(
                    "seq5",
                    format!(
                        "block {b}: slot {} starts {start1} before slot {} ends {end0}",
                        w[1], w[0]
                    ),
                ));
            }
        }
    }

    // real-time slowdown cap
    let mean = sched.mean_rtj_sd(inst);
    if mean > inst.sd_rtj_thresh + 1e-9 {
        out.push(Violation::new(
            "rtj-sd-cap",
            format!("mean real-time slowdown {mean} exceeds {}", inst.sd_rtj_thresh),
        ));
    }
    out
}

/// Maps a just-in-time-checkpoint simulator run onto offline semantics.
/// Every wall-clock segment becomes an offline segment: the head of a
/// restart segment is the checkpoint read and the tail of a preempted
/// segment is the write, both equal to the formulation's overhead constant.
/// Jobs preempted more than once or restarted on a different placement
/// yield schedules the checker will reject, which is the intended signal.
pub fn map_sim_outcomes(
    inst: &OfflineInstance,
    outcomes: &[JobOutcome],
) -> Result<OfflineSchedule, String> {
    let mut jobs = Vec::with_capacity(inst.jobs.len());
    // global slot numbering per block, by segment start time
    let mut block_events: BTreeMap<u32, Vec<(f64, usize, usize)>> = BTreeMap::new();
    for (j, job) in inst.jobs.iter().enumerate() {
        let outcome = outcomes
            .iter()
            .find(|o| o.job_id == job.id)
            .ok_or_else(|| format!("no outcome for job {}", job.id))?;
        for (k, seg) in outcome.segments.iter().enumerate() {
            for b in seg.first_block..=seg.last_block {
                block_events.entry(b).or_default().push((seg.start, j, k));
            }
        }
    }
    let mut slot_of: BTreeMap<(u32, usize, usize), u32> = BTreeMap::new();
    for (&b, events) in block_events.iter_mut() {
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (i, &(_, j, k)) in events.iter().enumerate() {
            slot_of.insert((b, j, k), i as u32 + 1);
        }
    }

    for (j, job) in inst.jobs.iter().enumerate() {
        let outcome = outcomes.iter().find(|o| o.job_id == job.id).unwrap();
        if outcome.segments.is_empty() {
            return Err(format!("job {} has no segments", job.id));
        }
        let first = &outcome.segments[0];
        let placements = inst.placements(j);
        let placement = placements
            .iter()
            .find(|p| p.first_block == first.first_block && p.last_block == first.last_block)
            .ok_or_else(|| format!("job {}: segment blocks are not a placement", job.id))?;
        for seg in &outcome.segments {
            if seg.first_block != first.first_block || seg.last_block != first.last_block {
                return Err(format!(
                    "job {}: restarted on a different placement",
                    job.id
                ));
            }
        }
        let split = outcome.segments.len() > 1;
        let ovhd = inst.overhead(j);
        let mut segments = Vec::new();
        for (k, seg) in outcome.segments.iter().enumerate() {
            let gross = seg.end - seg.start;
            // strip the checkpoint read at a restart head and the write at a
            // preempted tail to recover the compute fraction
            let read = if k > 0 { ovhd } else { 0.0 };
            let write = if k + 1 < outcome.segments.len() { ovhd } else { 0.0 };
            let compute = gross - read - write;
            let ratio = if split {
                (compute / job.runtime).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let slots: Vec<(u32, u32)> = (seg.first_block..=seg.last_block)
                .map(|b| (b, slot_of[&(b, j, k)]))
                .collect();
            segments.push(OfflineSegment {
                start: seg.start,
                ratio,
                slots,
            });
        }
        jobs.push(OfflineJobSchedule {
            job_index: j,
            placement_index: placement.placement_index,
            segments,
            end: outcome.end_time,
        });
    }
    Ok(OfflineSchedule { jobs })
}
