//! Seeded random instance generation for the formulation-vs-heuristic
//! comparison and for fuzz checks.

use super::OfflineInstance;
use crate::machine::MachineConfig;
use crate::workload::{Job, JobKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub num_bjs: usize,
    pub num_rtjs: usize,
    pub blocks: u32,
    /// Node sizes drawn uniformly from this set (capped at the machine).
    pub sizes: Vec<u32>,
    pub max_sequences: u32,
    pub sd_rtj_thresh: f64,
    /// Submissions fall uniformly in [0, submit_span].
    pub submit_span: f64,
    pub runtime_range: (f64, f64),
}

impl GenParams {
    /// The comparison protocol: 5 batch and 2 real-time jobs on 16 blocks.
    pub fn comparison(blocks: u32) -> Self {
        GenParams {
            num_bjs: 5,
            num_rtjs: 2,
            blocks,
            sizes: vec![512, 1024, 2048, 4096, 8192],
            max_sequences: 7,
            sd_rtj_thresh: 1.2,
            submit_span: 5400.0,
            runtime_range: (600.0, 3600.0),
        }
    }

    /// Tiny instances for oracle-equivalence fuzzing.
    pub fn tiny(num_jobs: usize, blocks: u32, max_sequences: u32) -> Self {
        GenParams {
            num_bjs: num_jobs,
            num_rtjs: 0,
            blocks,
            sizes: vec![512, 1024],
            max_sequences,
            sd_rtj_thresh: 1.5,
            submit_span: 1200.0,
            runtime_range: (300.0, 1800.0),
        }
    }
}

/// Builds one seeded random instance. Jobs are deterministic functions of
/// (params, seed); real-time jobs are drawn from the same distributions.
pub fn random_instance(params: &GenParams, seed: u64) -> OfflineInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let machine = MachineConfig::reduced(params.blocks);
    let mut jobs = Vec::new();
    let total = params.num_bjs + params.num_rtjs;
    for i in 0..total {
        let kind = if i < params.num_bjs {
            JobKind::Batch
        } else {
            JobKind::RealTime
        };
        let sizes: Vec<u32> = params
            .sizes
            .iter()
            .copied()
            .filter(|&s| s <= machine.total_nodes)
            .collect();
        let nodes = sizes[rng.gen_range(0..sizes.len())];
        let runtime =
            (rng.gen_range(params.runtime_range.0..=params.runtime_range.1) / 60.0).round() * 60.0;
        let submit = (rng.gen_range(0.0..=params.submit_span) / 60.0).round() * 60.0;
        let walltime = (runtime * rng.gen_range(1.0..1.5f64) / 60.0).ceil() * 60.0;
        jobs.push(Job {
            id: format!(
                "{}{i}",
                if kind == JobKind::Batch { "b" } else { "r" }
            ),
            submit_time: submit,
            walltime,
            runtime,
            nodes,
            kind,
        });
    }
    OfflineInstance::new(jobs, machine, params.max_sequences, params.sd_rtj_thresh)
}

/// Mixed-kind variant of `tiny` for fuzzing with real-time jobs present.
pub fn random_tiny_mixed(num_jobs: usize, blocks: u32, t: u32, seed: u64) -> OfflineInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let rtjs = if num_jobs > 1 {
        rng.gen_range(0..num_jobs.min(2))
    } else {
        0
    };
    let params = GenParams {
        num_bjs: num_jobs - rtjs,
        num_rtjs: rtjs,
        sd_rtj_thresh: rng.gen_range(1.2..2.5),
        ..GenParams::tiny(num_jobs, blocks, t)
    };
    random_instance(&params, seed)
}
