//! Deterministic discrete-event simulator and exact offline optimizer for
//! scheduling mixed real-time and batch jobs on a partitioned machine.
//!
//! The crate models a Blue Gene/Q-style system (Mira by default): jobs run
//! on aligned partitions built from 512-node blocks, batch jobs can be
//! checkpointed and preempted to make room for real-time jobs, and several
//! scheduling policies are provided, from plain EASY backfilling up to the
//! weighted-cost two-queue heuristic. A partition-sequence optimization
//! model with LP export and an exact enumerative solver covers the offline
//! side at desk scale.

pub mod ckpt;
pub mod machine;
pub mod metrics;
pub mod offline;
pub mod sim;
pub mod wcjs;
pub mod workload;
