//! Checkpoint/preemption schemes and their overhead arithmetic.
//!
//! Four schemes: no checkpointing (victims restart from scratch), periodic
//! system-level checkpointing, application-level checkpointing with an
//! overhead budget, and just-in-time checkpointing where the victim writes
//! its state at the moment of preemption while the preemptor waits.

use crate::machine::MachineConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CkptVariant {
    NoCkpt,
    /// Periodic system checkpoint every `interval_s` seconds of accumulated runtime.
    SysCkpt { interval_s: f64 },
    /// Application checkpointing budgeted at `percent_overhead` of walltime.
    AppCkpt { percent_overhead: f64 },
    JitCkpt,
}

/// How checkpoint I/O bandwidth is computed for a job of n nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthModel {
    /// I/O-node based: min((n/128) * 4 GB/s, usable PFS cap). Matches the
    /// restart-overhead constant used by the offline formulation.
    PfsCap,
    /// Per-node link based: min(n * 2 GB/s, usable PFS cap).
    PerNodeMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkptScheme {
    pub variant: CkptVariant,
    /// Checkpoint data written per node, GB.
    pub dsize_per_node_gb: f64,
    pub bandwidth_model: BandwidthModel,
}

impl CkptScheme {
    pub fn no_ckpt() -> Self {
        CkptScheme {
            variant: CkptVariant::NoCkpt,
            dsize_per_node_gb: 4.0,
            bandwidth_model: BandwidthModel::PerNodeMin,
        }
    }

    /// Interval study default: 30 min system checkpoint period.
    pub fn sys_ckpt() -> Self {
        CkptScheme {
            variant: CkptVariant::SysCkpt { interval_s: 1800.0 },
            ..Self::no_ckpt()
        }
    }

    /// App-level default budget: 30% of walltime.
    pub fn app_ckpt(percent: f64) -> Self {
        CkptScheme {
            variant: CkptVariant::AppCkpt {
                percent_overhead: percent,
            },
            ..Self::no_ckpt()
        }
    }

    pub fn jit_ckpt() -> Self {
        CkptScheme {
            variant: CkptVariant::JitCkpt,
            ..Self::no_ckpt()
        }
    }

    pub fn is_jit(&self) -> bool {
        matches!(self.variant, CkptVariant::JitCkpt)
    }

    pub fn validate(&self, cfg: &MachineConfig) -> Result<(), String> {
        match self.variant {
            CkptVariant::SysCkpt { interval_s } if interval_s <= 0.0 => {
                return Err("sys checkpoint interval must be positive".into())
            }
            CkptVariant::AppCkpt { percent_overhead }
                if !(percent_overhead > 0.0 && percent_overhead < 1.0) =>
            {
                return Err("app checkpoint overhead percent must be in (0, 1)".into())
            }
            _ => {}
        }
        if !(self.dsize_per_node_gb > 0.0 && self.dsize_per_node_gb <= cfg.mem_per_node_gb) {
            return Err(format!(
                "dsize {} GB outside (0, {}]",
                self.dsize_per_node_gb, cfg.mem_per_node_gb
            ));
        }
        Ok(())
    }
}

/// Effective checkpoint bandwidth for a job of `nodes` nodes, GB/s.
pub fn ckpt_bandwidth(nodes: u32, model: BandwidthModel, cfg: &MachineConfig) -> f64 {
    let cap = cfg.pfs_usable_fraction * cfg.pfs_bandwidth_gbs;
    match model {
        BandwidthModel::PfsCap => {
            ((nodes as f64 / cfg.io_node_ratio as f64) * cfg.io_node_bandwidth_gbs).min(cap)
        }
        BandwidthModel::PerNodeMin => (nodes as f64 * cfg.per_node_io_bandwidth_gbs).min(cap),
    }
}

/// Time to write (or read back) one checkpoint for a job of `nodes` nodes.
/// Read bandwidth is taken equal to write bandwidth.
pub fn write_time(nodes: u32, scheme: &CkptScheme, cfg: &MachineConfig) -> f64 {
    let data = scheme.dsize_per_node_gb * nodes as f64;
    if data <= 0.0 {
        return 0.0;
    }
    data / ckpt_bandwidth(nodes, scheme.bandwidth_model, cfg)
}

/// Checkpoint/restart overhead constant used by the offline formulation:
/// full node memory over the I/O-node bandwidth, capped at the usable PFS
/// bandwidth. 16*n / min(n/128 * 4, 216) seconds for the default machine.
pub fn ovhd_formulation(nodes: u32, cfg: &MachineConfig) -> f64 {
    let scheme = CkptScheme {
        variant: CkptVariant::JitCkpt,
        dsize_per_node_gb: cfg.mem_per_node_gb,
        bandwidth_model: BandwidthModel::PfsCap,
    };
    write_time(nodes, &scheme, cfg)
}

/// Number of app-level checkpoints that fit the overhead budget and the
/// (even) interval between them. Checkpoints trigger at multiples of the
/// interval of accumulated runtime. A zero-cost write needs no checkpoints.
pub fn plan_app_checkpoints(walltime: f64, ckpt_write: f64, percent: f64) -> (u32, f64) {
    if ckpt_write <= 0.0 {
        return (0, walltime);
    }
    let count = (percent * walltime / ckpt_write).floor() as u32;
    let interval = walltime / (count + 1) as f64;
    (count, interval)
}

/// Snapshot of a running job at the moment it is preempted.
#[derive(Debug, Clone, Copy)]
pub struct PreemptSnapshot {
    pub nodes: u32,
    /// Compute time executed in the current segment.
    pub ran_this_segment: f64,
    /// Total completed runtime so far (across restarts).
    pub runtime_done: f64,
    /// Runtime mark of the last completed checkpoint, if any.
    pub last_ckpt_runtime: Option<f64>,
}

/// What a preemption costs: work to redo, checkpoint read time at restart,
/// and how long the preemptor must wait before it can start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreemptLoss {
    pub redo: f64,
    pub restart_read: f64,
    pub rtj_wait: f64,
}

pub fn preempt_loss(snap: &PreemptSnapshot, scheme: &CkptScheme, cfg: &MachineConfig) -> PreemptLoss {
    match scheme.variant {
        CkptVariant::NoCkpt => PreemptLoss {
            redo: snap.ran_this_segment,
            restart_read: 0.0,
            rtj_wait: 0.0,
        },
        CkptVariant::SysCkpt { .. } | CkptVariant::AppCkpt { .. } => {
            let (redo, read) = match snap.last_ckpt_runtime {
                Some(mark) => (
                    snap.runtime_done - mark,
                    write_time(snap.nodes, scheme, cfg),
                ),
                // nothing checkpointed yet: the whole job restarts from scratch
                None => (snap.runtime_done, 0.0),
            };
            PreemptLoss {
                redo,
                restart_read: read,
                rtj_wait: 0.0,
            }
        }
        CkptVariant::JitCkpt => {
            let w = write_time(snap.nodes, scheme, cfg);
            PreemptLoss {
                redo: 0.0,
                restart_read: w,
                rtj_wait: w,
            }
        }
    }
}

/// Core-hours lost to checkpointing and preemption, split by who pays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadLedger {
    pub chr_sys_ckpt: f64,
    pub chr_sys_pre: f64,
    pub chr_job_ckpt: BTreeMap<String, f64>,
}

impl OverheadLedger {
    pub fn chr_job_ckpt_total(&self) -> f64 {
        self.chr_job_ckpt.values().sum()
    }

    pub fn total_core_hours(&self) -> f64 {
        self.chr_sys_ckpt + self.chr_sys_pre + self.chr_job_ckpt_total()
    }
}

/// A settle-able overhead event: a completed (or aborted) checkpoint write,
/// or the loss assessed when a preemption settles / a victim restarts.
#[derive(Debug, Clone)]
pub enum OverheadEvent {
    CkptWrite { job_id: String, seconds: f64 },
    PreemptLoss { job_id: String, seconds: f64 },
}

/// Charges an overhead event to the ledger. Checkpoint writes are paid by
/// the job under AppCkpt and by the system under SysCkpt/JitCkpt; preemption
/// losses (redo + restart read) are always a system cost.
pub fn account(ledger: &mut OverheadLedger, event: &OverheadEvent, nodes: u32, scheme: &CkptScheme) {
    let core_hours = |seconds: f64| seconds * nodes as f64 / 3600.0;
    match event {
        OverheadEvent::CkptWrite { job_id, seconds } => match scheme.variant {
            CkptVariant::NoCkpt => {}
            CkptVariant::AppCkpt { .. } => {
                *ledger.chr_job_ckpt.entry(job_id.clone()).or_insert(0.0) += core_hours(*seconds);
            }
            CkptVariant::SysCkpt { .. } | CkptVariant::JitCkpt => {
                ledger.chr_sys_ckpt += core_hours(*seconds);
            }
        },
        OverheadEvent::PreemptLoss { seconds, .. } => {
            ledger.chr_sys_pre += core_hours(*seconds);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mira() -> MachineConfig {
        MachineConfig::default()
    }

    fn full_dump() -> CkptScheme {
        CkptScheme {
            variant: CkptVariant::JitCkpt,
            dsize_per_node_gb: 16.0,
            bandwidth_model: BandwidthModel::PfsCap,
        }
    }

    #[test]
    fn write_time_pfscap() {
        let cfg = mira();
        assert!((write_time(512, &full_dump(), &cfg) - 512.0).abs() < 1e-9);
        let t = write_time(49152, &full_dump(), &cfg);
        assert!((t - 786432.0 / 216.0).abs() < 1e-9);
        let zero = CkptScheme {
            dsize_per_node_gb: 0.0,
            ..full_dump()
        };
        assert_eq!(write_time(2048, &zero, &cfg), 0.0);
    }

    #[test]
    fn write_time_per_node_min() {
        let cfg = mira();
        let s = CkptScheme {
            variant: CkptVariant::SysCkpt { interval_s: 1800.0 },
            dsize_per_node_gb: 4.0,
            bandwidth_model: BandwidthModel::PerNodeMin,
        };
        // 512 nodes: 2048 GB at min(1024, 216) = 216 GB/s
        assert!((write_time(512, &s, &cfg) - 2048.0 / 216.0).abs() < 1e-9);
        // 64 nodes: 256 GB at min(128, 216) = 128 GB/s
        assert!((write_time(64, &s, &cfg) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ovhd_formulation_values() {
        let cfg = mira();
        assert!((ovhd_formulation(512, &cfg) - 512.0).abs() < 1e-9);
        assert!((ovhd_formulation(8192, &cfg) - 131072.0 / 216.0).abs() < 1e-9);
        assert!((ovhd_formulation(128, &cfg) - 512.0).abs() < 1e-9);
    }

    #[test]
    fn app_checkpoint_plan() {
        // 120 min walltime, 5 min writes, 10% budget -> 2 checkpoints, 40 min apart
        let (n, iv) = plan_app_checkpoints(7200.0, 300.0, 0.10);
        assert_eq!(n, 2);
        assert!((iv - 2400.0).abs() < 1e-9);
        let (n, iv) = plan_app_checkpoints(7200.0, 300.0, 0.05);
        assert_eq!(n, 1);
        assert!((iv - 3600.0).abs() < 1e-9);
        let (n, _) = plan_app_checkpoints(3600.0, 400.0, 0.10);
        assert_eq!(n, 0);
        let (n, _) = plan_app_checkpoints(3600.0, 0.0, 0.10);
        assert_eq!(n, 0);
    }

    #[test]
    fn app_plan_respects_budget() {
        let mut x = 0x2545f4914f6cdd1du64;
        let mut rng = move || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let wall = 600.0 + rng() * 80000.0;
            let write = rng() * 2000.0;
            let pct = 0.01 + rng() * 0.4;
            let (count, interval) = plan_app_checkpoints(wall, write, pct);
            assert!(count as f64 * write <= pct * wall + 1e-9);
            assert!(interval > 0.0);
            assert!(count as f64 * interval < wall + 1e-9);
        }
    }

    #[test]
    fn preempt_losses_by_scheme() {
        let cfg = mira();
        let snap = PreemptSnapshot {
            nodes: 512,
            ran_this_segment: 1800.0,
            runtime_done: 4200.0,
            last_ckpt_runtime: Some(3600.0),
        };
        let no = preempt_loss(&snap, &CkptScheme::no_ckpt(), &cfg);
        assert_eq!(no, PreemptLoss { redo: 1800.0, restart_read: 0.0, rtj_wait: 0.0 });

        // sys-ckpt, preempted at 70 min of runtime with 30 min interval: 10 min redo
        let sys = CkptScheme::sys_ckpt();
        let snap70 = PreemptSnapshot {
            nodes: 512,
            ran_this_segment: 4200.0,
            runtime_done: 4200.0,
            last_ckpt_runtime: Some(3600.0),
        };
        let loss = preempt_loss(&snap70, &sys, &cfg);
        assert!((loss.redo - 600.0).abs() < 1e-9);
        assert!(loss.restart_read > 0.0);
        assert_eq!(loss.rtj_wait, 0.0);

        // never checkpointed: everything so far is redone, nothing to read
        let fresh = PreemptSnapshot {
            last_ckpt_runtime: None,
            ..snap70
        };
        let loss = preempt_loss(&fresh, &sys, &cfg);
        assert_eq!(loss.redo, 4200.0);
        assert_eq!(loss.restart_read, 0.0);

        let jit = preempt_loss(&snap, &full_dump(), &cfg);
        assert_eq!(jit.redo, 0.0);
        assert!((jit.rtj_wait - 512.0).abs() < 1e-9);
        assert!((jit.restart_read - 512.0).abs() < 1e-9);
    }

    #[test]
    fn ledger_accounting() {
        let cfg = mira();
        let mut ledger = OverheadLedger::default();
        let jit = CkptScheme::jit_ckpt();
        account(
            &mut ledger,
            &OverheadEvent::CkptWrite { job_id: "a".into(), seconds: 512.0 },
            512,
            &jit,
        );
        assert!((ledger.chr_sys_ckpt - 512.0 * 512.0 / 3600.0).abs() < 1e-9);
        assert!(ledger.chr_job_ckpt.is_empty());

        let app = CkptScheme::app_ckpt(0.05);
        account(
            &mut ledger,
            &OverheadEvent::CkptWrite { job_id: "b".into(), seconds: 100.0 },
            1024,
            &app,
        );
        assert!((ledger.chr_job_ckpt["b"] - 100.0 * 1024.0 / 3600.0).abs() < 1e-9);

        let before = ledger.chr_sys_ckpt;
        account(
            &mut ledger,
            &OverheadEvent::CkptWrite { job_id: "c".into(), seconds: 99.0 },
            512,
            &CkptScheme::no_ckpt(),
        );
        assert_eq!(ledger.chr_sys_ckpt, before);

        account(
            &mut ledger,
            &OverheadEvent::PreemptLoss { job_id: "a".into(), seconds: 1800.0 },
            512,
            &CkptScheme::no_ckpt(),
        );
        assert!((ledger.chr_sys_pre - 1800.0 * 512.0 / 3600.0).abs() < 1e-9);
        let _ = cfg;
    }

    #[test]
    fn scheme_validation() {
        let cfg = mira();
        assert!(CkptScheme::sys_ckpt().validate(&cfg).is_ok());
        let bad = CkptScheme {
            variant: CkptVariant::SysCkpt { interval_s: 0.0 },
            ..CkptScheme::no_ckpt()
        };
        assert!(bad.validate(&cfg).is_err());
        let bad = CkptScheme {
            dsize_per_node_gb: 17.0,
            ..CkptScheme::no_ckpt()
        };
        assert!(bad.validate(&cfg).is_err());
    }
}
