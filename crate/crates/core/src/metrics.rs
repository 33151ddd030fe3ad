//! Performance accounting: slowdown, bounded slowdown, turnaround, system
//! and productive utilization, and per-category aggregation.

use crate::ckpt::OverheadLedger;
use crate::machine::MachineConfig;
use crate::workload::{Category, Job, JobKind, JobOutcome};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default bound for bounded slowdown: 10 minutes.
pub const BSD_BOUND_S: f64 = 600.0;

/// Slowdown: (end - submit) / runtime.
pub fn slowdown(outcome: &JobOutcome, job: &Job) -> f64 {
    (outcome.end_time - job.submit_time) / job.runtime
}

/// Bounded slowdown with the runtime floored at `bound` in both positions,
/// muting the influence of very short jobs.
pub fn bounded_slowdown(outcome: &JobOutcome, job: &Job, bound: f64) -> f64 {
    let wait = outcome.end_time - job.submit_time - job.runtime;
    let floor = job.runtime.max(bound);
    (wait + floor) / floor
}

pub fn turnaround(outcome: &JobOutcome, job: &Job) -> f64 {
    outcome.end_time - job.submit_time
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRow {
    pub id: String,
    pub kind: JobKind,
    pub category: Category,
    pub wait: f64,
    pub turnaround: f64,
    pub sd: f64,
    pub bsd: f64,
}

pub fn job_rows(outcomes: &[&JobOutcome], jobs: &[Job], cfg: &MachineConfig) -> Vec<JobRow> {
    let by_id: BTreeMap<&str, &Job> = jobs.iter().map(|j| (j.id.as_str(), j)).collect();
    let mut rows: Vec<JobRow> = outcomes
        .iter()
        .filter_map(|o| {
            let job = by_id.get(o.job_id.as_str())?;
            Some(JobRow {
                id: o.job_id.clone(),
                kind: job.kind,
                category: crate::workload::categorize(job, cfg),
                wait: o.start_time - job.submit_time,
                turnaround: turnaround(o, job),
                sd: slowdown(o, job),
                bsd: bounded_slowdown(o, job, BSD_BOUND_S),
            })
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    rows
}

/// Nearest-rank quantile: value at index ceil(p * n), 1-based, over sorted data.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StatSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
}

pub fn summarize(values: &[f64]) -> Option<StatSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(StatSummary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: nearest_rank(&sorted, 0.50),
        p5: nearest_rank(&sorted, 0.05),
        p25: nearest_rank(&sorted, 0.25),
        p75: nearest_rank(&sorted, 0.75),
        p95: nearest_rank(&sorted, 0.95),
    })
}

/// Group key: kind (or all kinds) crossed with category (or all categories).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub kind: Option<JobKind>,
    pub category: Option<Category>,
}

impl GroupKey {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            Some(JobKind::RealTime) => "rtj",
            Some(JobKind::Batch) => "bj",
            None => "all",
        };
        let cat = self.category.map(|c| c.label()).unwrap_or("all");
        format!("{kind}/{cat}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: GroupKey,
    pub sd: StatSummary,
    pub bsd: StatSummary,
    pub turnaround: StatSummary,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Utilization {
    pub overall: f64,
    pub productive: f64,
    pub ckpt_overhead: f64,
    pub preempt_overhead: f64,
    pub job_ckpt_overhead: f64,
}

/// Full metrics report; the common output of simulator runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_job: Vec<JobRow>,
    pub groups: Vec<GroupStats>,
    pub utilization: Utilization,
}

/// Aggregates rows into kind x category groups plus the marginals.
pub fn aggregate(rows: &[JobRow]) -> Vec<GroupStats> {
    let kinds = [None, Some(JobKind::RealTime), Some(JobKind::Batch)];
    let categories = [
        None,
        Some(Category::NarrowShort),
        Some(Category::NarrowLong),
        Some(Category::WideShort),
        Some(Category::WideLong),
    ];
    let mut out = Vec::new();
    for kind in kinds {
        for category in categories {
            let selected: Vec<&JobRow> = rows
                .iter()
                .filter(|r| kind.map_or(true, |k| r.kind == k))
                .filter(|r| category.map_or(true, |c| r.category == c))
                .collect();
            let pick =
                |f: fn(&JobRow) -> f64| -> Vec<f64> { selected.iter().map(|r| f(r)).collect() };
            let (sd, bsd, ta) = (
                summarize(&pick(|r| r.sd)),
                summarize(&pick(|r| r.bsd)),
                summarize(&pick(|r| r.turnaround)),
            );
            if let (Some(sd), Some(bsd), Some(turnaround)) = (sd, bsd, ta) {
                out.push(GroupStats {
                    group: GroupKey { kind, category },
                    sd,
                    bsd,
                    turnaround,
                });
            }
        }
    }
    out
}

/// System utilization over a window.
///
/// Overall counts every busy core-second (productive compute, redone work,
/// checkpoint writes and restart reads). Productive counts each completed
/// job's runtime exactly once. The gap between the two is the ledger's
/// overhead, reported as the breakdown.
pub fn utilization(
    outcomes: &[&JobOutcome],
    jobs: &[Job],
    ledger: &OverheadLedger,
    cfg: &MachineConfig,
    window: (f64, f64),
) -> Utilization {
    let span = window.1 - window.0;
    if span <= 0.0 {
        return Utilization::default();
    }
    let capacity = cfg.total_nodes as f64 * span;
    let by_id: BTreeMap<&str, &Job> = jobs.iter().map(|j| (j.id.as_str(), j)).collect();
    let mut busy = 0.0;
    let mut productive = 0.0;
    for o in outcomes {
        let Some(job) = by_id.get(o.job_id.as_str()) else {
            continue;
        };
        let nodes = o
            .segments
            .first()
            .map(|s| (s.last_block - s.first_block + 1) * cfg.block_size)
            .unwrap_or(job.nodes) as f64;
        for seg in &o.segments {
            let lo = seg.start.max(window.0);
            let hi = seg.end.min(window.1);
            if hi > lo {
                busy += (hi - lo) * nodes;
            }
        }
        productive += job.runtime * nodes;
    }
    let to_fraction = |core_hours: f64| core_hours * 3600.0 / capacity;
    Utilization {
        overall: busy / capacity,
        productive: productive / capacity,
        ckpt_overhead: to_fraction(ledger.chr_sys_ckpt),
        preempt_overhead: to_fraction(ledger.chr_sys_pre),
        job_ckpt_overhead: to_fraction(ledger.chr_job_ckpt_total()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Segment;

    fn job(id: &str, submit: f64, runtime: f64, nodes: u32) -> Job {
        Job {
            id: id.into(),
            submit_time: submit,
            walltime: runtime * 2.0,
            runtime,
            nodes,
            kind: JobKind::Batch,
        }
    }

    fn outcome(id: &str, start: f64, end: f64) -> JobOutcome {
        JobOutcome {
            job_id: id.into(),
            start_time: start,
            restart_times: vec![],
            end_time: end,
            preempt_count: 0,
            ckpt_time_total: 0.0,
            preempt_overhead_total: 0.0,
            segments: vec![],
        }
    }

    #[test]
    fn slowdown_basics() {
        let j = job("a", 100.0, 600.0, 512);
        assert_eq!(slowdown(&outcome("a", 100.0, 700.0), &j), 1.0);
        assert_eq!(slowdown(&outcome("a", 700.0, 1300.0), &j), 2.0);
    }

    #[test]
    fn bounded_slowdown_cases() {
        // 5 min runtime, no wait
        let j = job("a", 0.0, 300.0, 512);
        assert_eq!(bounded_slowdown(&outcome("a", 0.0, 300.0), &j, 600.0), 1.0);
        // 5 min runtime, 10 min wait: bound binds in both positions
        assert_eq!(bounded_slowdown(&outcome("a", 600.0, 900.0), &j, 600.0), 2.0);
        // 60 min runtime, 60 min wait: bound inactive, equals slowdown
        let j = job("b", 0.0, 3600.0, 512);
        let o = outcome("b", 3600.0, 7200.0);
        assert_eq!(bounded_slowdown(&o, &j, 600.0), 2.0);
        assert_eq!(bounded_slowdown(&o, &j, 600.0), slowdown(&o, &j));
    }

    #[test]
    fn bsd_sd_relation() {
        for runtime in [60.0, 300.0, 599.0, 600.0, 601.0, 7200.0] {
            for wait in [0.0, 100.0, 5000.0] {
                let j = job("x", 0.0, runtime, 512);
                let o = outcome("x", wait, wait + runtime);
                let sd = slowdown(&o, &j);
                let bsd = bounded_slowdown(&o, &j, 600.0);
                assert!(sd >= 1.0 && bsd >= 1.0);
                if runtime >= 600.0 {
                    assert!((bsd - sd).abs() < 1e-12);
                } else {
                    assert!(bsd <= sd + 1e-12);
                }
            }
        }
    }

    #[test]
    fn nearest_rank_quantiles() {
        let one = summarize(&[42.0]).unwrap();
        assert_eq!(
            (one.p5, one.p25, one.median, one.p75, one.p95),
            (42.0, 42.0, 42.0, 42.0, 42.0)
        );
        let five = summarize(&[5.0, 3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(five.median, 3.0);
        assert_eq!(five.p5, 1.0);
        assert_eq!(five.p95, 5.0);
        assert_eq!(five.p25, 2.0);
        assert_eq!(five.p75, 4.0);
        assert!(five.p5 <= five.p25 && five.p25 <= five.median);
        assert!(five.median <= five.p75 && five.p75 <= five.p95);
    }

    #[test]
    fn aggregate_splits_kinds() {
        let cfg = MachineConfig::default();
        let mut jobs = vec![job("a", 0.0, 1000.0, 512), job("b", 0.0, 1000.0, 512)];
        jobs[1].kind = JobKind::RealTime;
        let outs = [outcome("a", 0.0, 1000.0), outcome("b", 500.0, 1500.0)];
        let refs: Vec<&JobOutcome> = outs.iter().collect();
        let rows = job_rows(&refs, &jobs, &cfg);
        let groups = aggregate(&rows);
        let all = groups
            .iter()
            .find(|g| g.group.kind.is_none() && g.group.category.is_none())
            .unwrap();
        assert_eq!(all.sd.count, 2);
        let rtj = groups
            .iter()
            .find(|g| g.group.kind == Some(JobKind::RealTime) && g.group.category.is_none())
            .unwrap();
        assert_eq!(rtj.sd.count, 1);
        assert!((rtj.sd.mean - 1.5).abs() < 1e-12);
        let bj = groups
            .iter()
            .find(|g| g.group.kind == Some(JobKind::Batch) && g.group.category.is_none())
            .unwrap();
        assert!((bj.sd.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn utilization_cases() {
        let cfg = MachineConfig::default();
        let ledger = OverheadLedger::default();
        // empty machine
        let u = utilization(&[], &[], &ledger, &cfg, (0.0, 86400.0));
        assert_eq!((u.overall, u.productive), (0.0, 0.0));

        // one job filling the machine for the whole window
        let j = job("a", 0.0, 86400.0, 49152);
        let mut o = outcome("a", 0.0, 86400.0);
        o.segments.push(Segment {
            first_block: 1,
            last_block: 96,
            start: 0.0,
            end: 86400.0,
        });
        let u = utilization(&[&o], &[j], &ledger, &cfg, (0.0, 86400.0));
        assert!((u.overall - 1.0).abs() < 1e-12);
        assert!((u.productive - 1.0).abs() < 1e-12);

        // a 30 min redo on 512 nodes becomes the expected deficit fraction
        let mut ledger = OverheadLedger::default();
        ledger.chr_sys_pre = 1800.0 * 512.0 / 3600.0;
        let u = utilization(&[], &[], &ledger, &cfg, (0.0, 86400.0));
        let expect = 512.0 * 1800.0 / (49152.0 * 86400.0);
        assert!((u.preempt_overhead - expect).abs() < 1e-15);
    }
}
