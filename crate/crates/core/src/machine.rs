//! Partitioned machine model: legal partition sizes, aligned placements over
//! 512-node blocks, and the overlap/containment relations between placements.
//!
//! The default configuration models Mira (IBM BG/Q): 96 blocks of 512 nodes,
//! with the production partition size list. Placements for a size that tiles
//! the machine evenly are contiguous and disjoint; the one size that does not
//! tile (32768 nodes = 64 blocks) gets three midplane-group-aligned placements
//! that mutually overlap and act as alternatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MachineError {
    #[error("requested size {0} exceeds machine capacity {1}")]
    TooLarge(u32, u32),
    #[error("{0} is not a legal partition size")]
    UnknownSize(u32),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

/// Machine description. Immutable after construction; cheap to clone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub total_nodes: u32,
    pub block_size: u32,
    pub legal_partition_sizes: Vec<u32>,
    /// Node memory in GB; upper bound for checkpoint data per node.
    pub mem_per_node_gb: f64,
    /// Aggregate parallel file system bandwidth, GB/s.
    pub pfs_bandwidth_gbs: f64,
    /// Fraction of PFS bandwidth usable for checkpoint traffic.
    pub pfs_usable_fraction: f64,
    /// Compute nodes served per I/O node.
    pub io_node_ratio: u32,
    /// Bandwidth of one I/O node, GB/s.
    pub io_node_bandwidth_gbs: f64,
    /// Per compute node I/O bandwidth, GB/s.
    pub per_node_io_bandwidth_gbs: f64,
}

impl Default for MachineConfig {
    /// Mira: 49152 nodes in 96 blocks of 512.
    fn default() -> Self {
        MachineConfig {
            total_nodes: 49152,
            block_size: 512,
            legal_partition_sizes: vec![
                512, 1024, 2048, 4096, 8192, 12288, 16384, 24576, 32768, 49152,
            ],
            mem_per_node_gb: 16.0,
            pfs_bandwidth_gbs: 240.0,
            pfs_usable_fraction: 0.90,
            io_node_ratio: 128,
            io_node_bandwidth_gbs: 4.0,
            per_node_io_bandwidth_gbs: 2.0,
        }
    }
}

impl MachineConfig {
    /// Reduced machine used for desk-scale offline studies: `blocks` 512-node
    /// blocks with the power-of-two size ladder capped at the machine size.
    pub fn reduced(blocks: u32) -> Self {
        let total = blocks * 512;
        let sizes = [512u32, 1024, 2048, 4096, 8192, 16384, 32768]
            .iter()
            .copied()
            .filter(|&s| s <= total)
            .collect();
        MachineConfig {
            total_nodes: total,
            legal_partition_sizes: sizes,
            ..MachineConfig::default()
        }
    }

    pub fn num_blocks(&self) -> u32 {
        self.total_nodes / self.block_size
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.block_size == 0 || self.total_nodes == 0 || self.total_nodes % self.block_size != 0
        {
            return Err("total_nodes must be a positive multiple of block_size".into());
        }
        if self.legal_partition_sizes.is_empty() {
            return Err("no legal partition sizes".into());
        }
        for &s in &self.legal_partition_sizes {
            if s == 0 || s % self.block_size != 0 || s > self.total_nodes {
                return Err(format!("illegal partition size {s}"));
            }
        }
        if !(self.pfs_usable_fraction > 0.0 && self.pfs_usable_fraction <= 1.0) {
            return Err("pfs_usable_fraction must be in (0, 1]".into());
        }
        Ok(())
    }

    /// Smallest legal partition size that fits `requested_nodes`.
    pub fn round_to_partition(&self, requested_nodes: u32) -> Result<u32, MachineError> {
        if requested_nodes == 0 || requested_nodes > self.total_nodes {
            return Err(MachineError::TooLarge(requested_nodes, self.total_nodes));
        }
        self.legal_partition_sizes
            .iter()
            .copied()
            .filter(|&s| s >= requested_nodes)
            .min()
            .ok_or(MachineError::TooLarge(requested_nodes, self.total_nodes))
    }
}

/// One aligned placement of a partition: `size_blocks` consecutive blocks.
/// Block indices are 1-based, matching the partition block numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionPlacement {
    pub size_blocks: u32,
    /// 1-based placement index within its size family.
    pub placement_index: u32,
    /// Inclusive 1-based block range.
    pub first_block: u32,
    pub last_block: u32,
}

impl PartitionPlacement {
    pub fn blocks(&self) -> impl Iterator<Item = u32> {
        self.first_block..=self.last_block
    }

    pub fn contains_block(&self, block: u32) -> bool {
        block >= self.first_block && block <= self.last_block
    }

    /// True iff the block ranges intersect. Parent/child relations are
    /// containment of block ranges.
    pub fn overlaps(&self, other: &PartitionPlacement) -> bool {
        self.first_block <= other.last_block && other.first_block <= self.last_block
    }

    pub fn contains(&self, other: &PartitionPlacement) -> bool {
        self.first_block <= other.first_block && other.last_block <= self.last_block
    }
}

/// All aligned placements for a legal partition size.
///
/// For k = size/block_size dividing the block count, placement i covers
/// blocks [(i-1)k+1, ik]. Otherwise (Mira's 32768-node case) placements
/// start at midplane-group offsets of k/4 blocks and overlap; the scheduler
/// treats them as mutually exclusive alternatives.
pub fn placements_for(
    size_nodes: u32,
    cfg: &MachineConfig,
) -> Result<Vec<PartitionPlacement>, MachineError> {
    if !cfg.legal_partition_sizes.contains(&size_nodes) {
        return Err(MachineError::UnknownSize(size_nodes));
    }
    let k = size_nodes / cfg.block_size;
    let n = cfg.num_blocks();
    let stride = if n % k == 0 { k } else { (k / 4).max(1) };
    let mut out = Vec::new();
    let mut start = 0u32;
    let mut idx = 1u32;
    while start + k <= n {
        out.push(PartitionPlacement {
            size_blocks: k,
            placement_index: idx,
            first_block: start + 1,
            last_block: start + k,
        });
        idx += 1;
        start += stride;
    }
    Ok(out)
}

/// Rounds a raw request up to a legal size and returns its placements.
pub fn placements_for_request(
    requested_nodes: u32,
    cfg: &MachineConfig,
) -> Result<Vec<PartitionPlacement>, MachineError> {
    let size = cfg.round_to_partition(requested_nodes)?;
    placements_for(size, cfg)
}

/// Partition dependency matrix entry: 1 iff `block_index` belongs to the
/// placement `placement_index` of partitions sized `size_nodes`.
pub fn part_dep(
    size_nodes: u32,
    placement_index: u32,
    block_index: u32,
    cfg: &MachineConfig,
) -> Result<u8, MachineError> {
    if block_index == 0 || block_index > cfg.num_blocks() {
        return Err(MachineError::IndexOutOfRange(format!(
            "block index {block_index}"
        )));
    }
    let placements = placements_for(size_nodes, cfg)?;
    let p = placements
        .iter()
        .find(|p| p.placement_index == placement_index)
        .ok_or_else(|| MachineError::IndexOutOfRange(format!("placement {placement_index}")))?;
    Ok(u8::from(p.contains_block(block_index)))
}
