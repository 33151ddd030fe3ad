//! Partition-sequence offline optimization: model construction with big-M
//! linearization, LP-format export, a schedule feasibility checker, and an
//! exact enumerative solver for desk-scale instances.

pub mod check;
pub mod gen;
pub mod model;
pub mod solve;

pub use check::{check_feasible, map_sim_outcomes, Violation};
pub use model::{
    build_model, eval_objective, eval_rows, export_lp, map_schedule_to_vars, LinRel, LinRow,
    ModelExport, VarKind,
};
pub use solve::{
    enumerate_exhaustive, evaluate_structure, solve_exact, threshold_search, SolveOutcome,
    Structure, ThresholdError,
};

use crate::machine::{placements_for, MachineConfig, PartitionPlacement};
use crate::workload::{Job, JobKind};
use serde::{Deserialize, Serialize};

/// One offline scheduling instance: jobs to place, the (possibly reduced)
/// machine, the sequence-slot cap, and the mean real-time slowdown cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflineInstance {
    pub jobs: Vec<Job>,
    pub machine: MachineConfig,
    /// Maximum sequence slots per partition block.
    pub max_sequences: u32,
    /// Cap on the mean slowdown of real-time jobs.
    pub sd_rtj_thresh: f64,
    /// Big-M constant; must dominate any feasible time value.
    pub big_m: f64,
    /// Minimum execution ratio of any batch-job segment.
    pub min_exec_ratio: f64,
}

impl OfflineInstance {
    pub fn new(jobs: Vec<Job>, machine: MachineConfig, max_sequences: u32, sd_rtj_thresh: f64) -> Self {
        let horizon: f64 = jobs.iter().map(|j| j.submit_time).fold(0.0, f64::max)
            + jobs
                .iter()
                .map(|j| j.runtime + 2.0 * overhead_for(j, &machine))
                .sum::<f64>();
        OfflineInstance {
            jobs,
            machine,
            max_sequences,
            sd_rtj_thresh,
            big_m: 2.0 * horizon.max(1.0),
            min_exec_ratio: 0.1,
        }
    }

    pub fn batch_jobs(&self) -> impl Iterator<Item = (usize, &Job)> {
        self.jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.kind == JobKind::Batch)
    }

    pub fn rt_jobs(&self) -> impl Iterator<Item = (usize, &Job)> {
        self.jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.kind == JobKind::RealTime)
    }

    /// Rounded partition size of job `j`.
    pub fn rounded_nodes(&self, j: usize) -> u32 {
        self.machine
            .round_to_partition(self.jobs[j].nodes)
            .expect("instance jobs fit the machine")
    }

    /// Candidate placements of job `j`.
    pub fn placements(&self, j: usize) -> Vec<PartitionPlacement> {
        placements_for(self.rounded_nodes(j), &self.machine).expect("legal size")
    }

    /// Checkpoint/restart overhead constant of job `j`.
    pub fn overhead(&self, j: usize) -> f64 {
        overhead_for(&self.jobs[j], &self.machine)
    }
}

fn overhead_for(job: &Job, machine: &MachineConfig) -> f64 {
    let nodes = machine
        .round_to_partition(job.nodes)
        .expect("instance jobs fit the machine");
    crate::ckpt::ovhd_formulation(nodes, machine)
}

/// One executed segment of a job in an offline schedule. A preempted batch
/// job has two segments on the same placement; everything else has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSegment {
    pub start: f64,
    /// Fraction of the runtime executed in this segment.
    pub ratio: f64,
    /// Sequence slot on each block of the placement (1-based, may differ
    /// per block).
    pub slots: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineJobSchedule {
    pub job_index: usize,
    pub placement_index: u32,
    pub segments: Vec<OfflineSegment>,
    pub end: f64,
}

/// A complete offline schedule: the common output of the exact solver and of
/// mapping a simulator run into offline semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSchedule {
    pub jobs: Vec<OfflineJobSchedule>,
}

impl OfflineSchedule {
    /// Mean slowdown over batch jobs (the objective).
    pub fn mean_bj_sd(&self, inst: &OfflineInstance) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for js in &self.jobs {
            let job = &inst.jobs[js.job_index];
            if job.kind == JobKind::Batch {
                sum += (js.end - job.submit_time) / job.runtime;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Mean slowdown over real-time jobs (the capped quantity).
    pub fn mean_rtj_sd(&self, inst: &OfflineInstance) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for js in &self.jobs {
            let job = &inst.jobs[js.job_index];
            if job.kind == JobKind::RealTime {
                sum += (js.end - job.submit_time) / job.runtime;
                n += 1;
            }
        }
        if n == 0 {
            1.0
        } else {
            sum / n as f64
        }
    }
}
