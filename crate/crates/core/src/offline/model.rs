//! Mixed-integer model of the partition-sequence problem: variable layout,
//! every constraint family, big-M transformation of the conditional
//! constraints, auxiliary variables for the quadratic terms, and CPLEX-LP
//! export.
//!
//! Binary decision variables are the execution indicators ex(R|B), the
//! partition-block choice exPb, the preempt flag exPrmpt, and exOvhd, the
//! linearized product exPrmpt*exB that marks where a batch job pays its
//! checkpoint overhead. Products involving a continuous factor become
//! continuous auxiliaries bounded by big-M rows.

use super::{OfflineInstance, OfflineSchedule};
use crate::workload::JobKind;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinRel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub rel: LinRel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ModelExport {
    pub vars: Vec<VarDef>,
    pub index: BTreeMap<String, usize>,
    pub rows: Vec<LinRow>,
    /// Minimize: sum of batch (end - submit) / runtime.
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub binary_count: usize,
    /// Set when the instance is past the practical solve range.
    pub size_warning: Option<String>,
}

struct Builder {
    vars: Vec<VarDef>,
    index: BTreeMap<String, usize>,
    rows: Vec<LinRow>,
}

impl Builder {
    fn var(&mut self, name: String, kind: VarKind, lo: f64, hi: f64) -> usize {
        debug_assert!(!self.index.contains_key(&name), "duplicate var {name}");
        let id = self.vars.len();
        self.index.insert(name.clone(), id);
        self.vars.push(VarDef { name, kind, lo, hi });
        id
    }

    fn row(&mut self, name: String, terms: Vec<(usize, f64)>, rel: LinRel, rhs: f64) {
        self.rows.push(LinRow {
            name,
            terms,
            rel,
            rhs,
        });
    }

    /// z = a * b for binaries a, b.
    fn product_bin(&mut self, z: usize, a: usize, b: usize, tag: &str) {
        self.row(format!("{tag}_le_a"), vec![(z, 1.0), (a, -1.0)], LinRel::Le, 0.0);
        self.row(format!("{tag}_le_b"), vec![(z, 1.0), (b, -1.0)], LinRel::Le, 0.0);
        self.row(
            format!("{tag}_ge"),
            vec![(z, 1.0), (a, -1.0), (b, -1.0)],
            LinRel::Ge,
            -1.0,
        );
    }

    /// z = x * b for continuous x in [0, u] and binary b.
    fn product_cont(&mut self, z: usize, x: usize, b: usize, u: f64, tag: &str) {
        self.row(format!("{tag}_cap"), vec![(z, 1.0), (b, -u)], LinRel::Le, 0.0);
        self.row(format!("{tag}_le_x"), vec![(z, 1.0), (x, -1.0)], LinRel::Le, 0.0);
        self.row(
            format!("{tag}_ge"),
            vec![(z, 1.0), (x, -1.0), (b, -u)],
            LinRel::Ge,
            -u,
        );
    }
}

/// Builds the full linear model for an instance.
pub fn build_model(inst: &OfflineInstance) -> ModelExport {
    let n = inst.jobs.len();
    let m = inst.machine.num_blocks();
    let t = inst.max_sequences;
    let big = inst.big_m;
    let horizon = inst.big_m;
    let mut b = Builder {
        vars: Vec::new(),
        index: BTreeMap::new(),
        rows: Vec::new(),
    };

    let is_rt: Vec<bool> = inst.jobs.iter().map(|j| j.kind == JobKind::RealTime).collect();
    let k_blocks: Vec<u32> = (0..n).map(|j| inst.rounded_nodes(j) / inst.machine.block_size).collect();
    let pbs: Vec<Vec<crate::machine::PartitionPlacement>> = (0..n).map(|j| inst.placements(j)).collect();

    // --- execution indicators and per-slot variables
    let mut ex = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    let mut ex_rt = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    let mut ex_ovhd = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    for j in 0..n {
        for s in 1..=t {
            for p in 1..=m {
                let tag = if is_rt[j] { "exR" } else { "exB" };
                ex[j][s as usize][p as usize] =
                    b.var(format!("{tag}_j{j}_s{s}_p{p}"), VarKind::Binary, 0.0, 1.0);
                if !is_rt[j] {
                    ex_rt[j][s as usize][p as usize] = b.var(
                        format!("exRt_j{j}_s{s}_p{p}"),
                        VarKind::Continuous,
                        0.0,
                        1.0,
                    );
                    ex_ovhd[j][s as usize][p as usize] =
                        b.var(format!("exOvhd_j{j}_s{s}_p{p}"), VarKind::Binary, 0.0, 1.0);
                }
            }
        }
    }
    // --- partition-block choice and preempt flags
    let mut ex_pb: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); n];
    for j in 0..n {
        for p in &pbs[j] {
            let id = b.var(
                format!("exPb_j{j}_pb{}", p.placement_index),
                VarKind::Binary,
                0.0,
                1.0,
            );
            ex_pb[j].insert(p.placement_index, id);
        }
    }
    let ex_prmpt: Vec<usize> = (0..n)
        .map(|j| {
            if is_rt[j] {
                usize::MAX
            } else {
                b.var(format!("exPrmpt_j{j}"), VarKind::Binary, 0.0, 1.0)
            }
        })
        .collect();
    // --- times
    let st: Vec<usize> = (0..n)
        .map(|j| b.var(format!("st_j{j}"), VarKind::Continuous, 0.0, horizon))
        .collect();
    let rst: Vec<usize> = (0..n)
        .map(|j| {
            if is_rt[j] {
                usize::MAX
            } else {
                b.var(format!("rst_j{j}"), VarKind::Continuous, 0.0, horizon)
            }
        })
        .collect();
    let et: Vec<usize> = (0..n)
        .map(|j| {
            if is_rt[j] {
                usize::MAX
            } else {
                b.var(format!("et_j{j}"), VarKind::Continuous, 0.0, horizon)
            }
        })
        .collect();
    let mut st_seq = vec![vec![usize::MAX; m as usize + 1]; t as usize + 1];
    for s in 1..=t {
        for p in 1..=m {
            st_seq[s as usize][p as usize] =
                b.var(format!("stSeq_s{s}_p{p}"), VarKind::Continuous, 0.0, horizon);
        }
    }
    // --- product auxiliaries
    let mut z_st = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    let mut z_rst = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    let mut z_seq = vec![vec![vec![usize::MAX; m as usize + 1]; t as usize + 1]; n];
    for j in 0..n {
        for s in 1..=t as usize {
            for p in 1..=m as usize {
                let suffix = format!("j{j}_s{s}_p{p}");
                let kind = if is_rt[j] { "R" } else { "B" };
                z_st[j][s][p] = b.var(
                    format!("zSt{kind}_{suffix}"),
                    VarKind::Continuous,
                    0.0,
                    horizon,
                );
                z_seq[j][s][p] = b.var(
                    format!("zSeq{kind}_{suffix}"),
                    VarKind::Continuous,
                    0.0,
                    horizon,
                );
                if !is_rt[j] {
                    z_rst[j][s][p] = b.var(
                        format!("zRstB_{suffix}"),
                        VarKind::Continuous,
                        0.0,
                        horizon,
                    );
                }
            }
        }
    }
    // placement-product auxiliaries, only for (p, pb) pairs with mPartDep = 1
    let mut z_expb: Vec<BTreeMap<(u32, u32, u32), usize>> = vec![BTreeMap::new(); n];
    for j in 0..n {
        for pb in &pbs[j] {
            for s in 1..=t {
                for p in pb.blocks() {
                    let tag = if is_rt[j] { "zRPb" } else { "zRtPb" };
                    let id = b.var(
                        format!("{tag}_j{j}_s{s}_p{p}_pb{}", pb.placement_index),
                        VarKind::Continuous,
                        0.0,
                        1.0,
                    );
                    z_expb[j].insert((s, p, pb.placement_index), id);
                }
            }
        }
    }
    let mut z_prpb: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); n];
    for j in 0..n {
        if is_rt[j] {
            continue;
        }
        for pb in &pbs[j] {
            let id = b.var(
                format!("zPrPb_j{j}_pb{}", pb.placement_index),
                VarKind::Continuous,
                0.0,
                1.0,
            );
            z_prpb[j].insert(pb.placement_index, id);
        }
    }

    // ------------------------------------------------------------------
    // product definitions
    for j in 0..n {
        for s in 1..=t as usize {
            for p in 1..=m as usize {
                let e = ex[j][s][p];
                b.product_cont(z_st[j][s][p], st[j], e, horizon, &format!("dZSt_j{j}_s{s}_p{p}"));
                b.product_cont(
                    z_seq[j][s][p],
                    st_seq[s][p],
                    e,
                    horizon,
                    &format!("dZSeq_j{j}_s{s}_p{p}"),
                );
                if !is_rt[j] {
                    b.product_cont(
                        z_rst[j][s][p],
                        rst[j],
                        e,
                        horizon,
                        &format!("dZRst_j{j}_s{s}_p{p}"),
                    );
                    b.product_bin(
                        ex_ovhd[j][s][p],
                        ex_prmpt[j],
                        e,
                        &format!("dOvhd_j{j}_s{s}_p{p}"),
                    );
                }
            }
        }
        for pb in &pbs[j] {
            let pb_var = ex_pb[j][&pb.placement_index];
            for s in 1..=t {
                for p in pb.blocks() {
                    let z = z_expb[j][&(s, p, pb.placement_index)];
                    let e = ex[j][s as usize][p as usize];
                    if is_rt[j] {
                        b.product_bin(z, e, pb_var, &format!("dRPb_j{j}_s{s}_p{p}_pb{}", pb.placement_index));
                    } else {
                        let x = ex_rt[j][s as usize][p as usize];
                        b.product_cont(z, x, pb_var, 1.0, &format!("dRtPb_j{j}_s{s}_p{p}_pb{}", pb.placement_index));
                    }
                }
            }
            if !is_rt[j] {
                b.product_bin(
                    z_prpb[j][&pb.placement_index],
                    ex_prmpt[j],
                    pb_var,
                    &format!("dPrPb_j{j}_pb{}", pb.placement_index),
                );
            }
        }
    }

    // ------------------------------------------------------------------
    // start/end time constraints
    for j in 0..n {
        b.row(
            format!("st1_j{j}"),
            vec![(st[j], 1.0)],
            LinRel::Ge,
            inst.jobs[j].submit_time,
        );
        if !is_rt[j] {
            b.row(
                format!("st1r_j{j}"),
                vec![(rst[j], 1.0)],
                LinRel::Ge,
                inst.jobs[j].submit_time,
            );
        }
    }
    for j in 0..n {
        let rt_j = inst.jobs[j].runtime;
        let ovhd_j = inst.overhead(j);
        for s in 1..=t as usize {
            for p in 1..=m as usize {
                let e = ex[j][s][p];
                let seq = st_seq[s][p];
                if is_rt[j] {
                    // st2: st*exR >= stSeq + B(exR - 1)
                    b.row(
                        format!("st2_j{j}_s{s}_p{p}"),
                        vec![(z_st[j][s][p], 1.0), (seq, -1.0), (e, -big)],
                        LinRel::Ge,
                        -big,
                    );
                } else {
                    // st3: st*exB >= stSeq + B(exB - 1) - B exPrmpt
                    b.row(
                        format!("st3_j{j}_s{s}_p{p}"),
                        vec![
                            (z_st[j][s][p], 1.0),
                            (seq, -1.0),
                            (e, -big),
                            (ex_prmpt[j], big),
                        ],
                        LinRel::Ge,
                        -big,
                    );
                    // st4: rst*exB >= stSeq + B(exB - 1)
                    b.row(
                        format!("st4_j{j}_s{s}_p{p}"),
                        vec![(z_rst[j][s][p], 1.0), (seq, -1.0), (e, -big)],
                        LinRel::Ge,
                        -big,
                    );
                    // st5: st*exB >= stSeq + B(sum_{si>=s} exB - 3) + 2B exB - B exPrmpt
                    let mut terms = vec![
                        (z_st[j][s][p], 1.0),
                        (seq, -1.0),
                        (e, -2.0 * big),
                        (ex_prmpt[j], big),
                    ];
                    for si in s..=t as usize {
                        terms.push((ex[j][si][p], -big));
                    }
                    b.row(format!("st5_j{j}_s{s}_p{p}"), terms, LinRel::Ge, -3.0 * big);
                    // et1: st*exB + rt exRt + ovhd exOvhd <= et
                    b.row(
                        format!("et1_j{j}_s{s}_p{p}"),
                        vec![
                            (z_st[j][s][p], 1.0),
                            (ex_rt[j][s][p], rt_j),
                            (ex_ovhd[j][s][p], ovhd_j),
                            (et[j], -1.0),
                        ],
                        LinRel::Le,
                        0.0,
                    );
                    // et2: rst*exB + rt exRt + ovhd exOvhd <= et + B(2 - sum_{si<=s} exB)
                    let mut terms = vec![
                        (z_rst[j][s][p], 1.0),
                        (ex_rt[j][s][p], rt_j),
                        (ex_ovhd[j][s][p], ovhd_j),
                        (et[j], -1.0),
                    ];
                    for si in 1..=s {
                        terms.push((ex[j][si][p], big));
                    }
                    b.row(format!("et2_j{j}_s{s}_p{p}"), terms, LinRel::Le, 2.0 * big);
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // sequence constraints
    for p in 1..=m as usize {
        b.row(
            format!("seq1_p{p}"),
            vec![(st_seq[1][p], 1.0)],
            LinRel::Eq,
            0.0,
        );
        for s in 1..t as usize {
            b.row(
                format!("seq2_s{s}_p{p}"),
                vec![(st_seq[s][p], 1.0), (st_seq[s + 1][p], -1.0)],
                LinRel::Le,
                0.0,
            );
        }
    }
    for j in 0..n {
        let rt_j = inst.jobs[j].runtime;
        let ovhd_j = inst.overhead(j);
        for s in 1..t as usize {
            for p in 1..=m as usize {
                let next = st_seq[s + 1][p];
                if is_rt[j] {
                    // seq3: (stSeq + rt) exR <= stSeq_{s+1}
                    b.row(
                        format!("seq3_j{j}_s{s}_p{p}"),
                        vec![(z_seq[j][s][p], 1.0), (ex[j][s][p], rt_j), (next, -1.0)],
                        LinRel::Le,
                        0.0,
                    );
                    // seq4: (st + rt) exR <= stSeq_{s+1}
                    b.row(
                        format!("seq4_j{j}_s{s}_p{p}"),
                        vec![(z_st[j][s][p], 1.0), (ex[j][s][p], rt_j), (next, -1.0)],
                        LinRel::Le,
                        0.0,
                    );
                } else {
                    // seq5: (stSeq + rt exRt) exB + ovhd exOvhd <= stSeq_{s+1}
                    b.row(
                        format!("seq5_j{j}_s{s}_p{p}"),
                        vec![
                            (z_seq[j][s][p], 1.0),
                            (ex_rt[j][s][p], rt_j),
                            (ex_ovhd[j][s][p], ovhd_j),
                            (next, -1.0),
                        ],
                        LinRel::Le,
                        0.0,
                    );
                    // seq6: binds for the first half of a split job
                    let mut terms = vec![
                        (z_st[j][s][p], 1.0),
                        (ex_rt[j][s][p], rt_j),
                        (ex_ovhd[j][s][p], ovhd_j),
                        (next, -1.0),
                        (ex_prmpt[j], -big),
                    ];
                    for si in s..=t as usize {
                        terms.push((ex[j][si][p], big));
                    }
                    b.row(format!("seq6_j{j}_s{s}_p{p}"), terms, LinRel::Le, big);
                    // seq7: binds for the second half
                    let mut terms = vec![
                        (z_rst[j][s][p], 1.0),
                        (ex_rt[j][s][p], rt_j),
                        (ex_ovhd[j][s][p], ovhd_j),
                        (next, -1.0),
                    ];
                    for si in 1..=s {
                        terms.push((ex[j][si][p], big));
                    }
                    b.row(format!("seq7_j{j}_s{s}_p{p}"), terms, LinRel::Le, 2.0 * big);
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // assignment constraints
    for j in 0..n {
        let k = k_blocks[j] as f64;
        let all_z: Vec<(usize, f64)> = z_expb[j].values().map(|&z| (z, 1.0)).collect();
        if is_rt[j] {
            b.row(format!("assign1_j{j}"), all_z, LinRel::Eq, k);
            let terms: Vec<(usize, f64)> = (1..=t as usize)
                .flat_map(|s| (1..=m as usize).map(move |p| (s, p)))
                .map(|(s, p)| (ex[j][s][p], 1.0))
                .collect();
            b.row(format!("assign2_j{j}"), terms, LinRel::Eq, k);
            for p in 1..=m as usize {
                let terms: Vec<(usize, f64)> =
                    (1..=t as usize).map(|s| (ex[j][s][p], 1.0)).collect();
                b.row(format!("assign6_j{j}_p{p}"), terms, LinRel::Le, 1.0);
            }
        } else {
            b.row(format!("assign3_j{j}"), all_z, LinRel::Eq, k);
            let terms: Vec<(usize, f64)> = (1..=t as usize)
                .flat_map(|s| (1..=m as usize).map(move |p| (s, p)))
                .map(|(s, p)| (ex_rt[j][s][p], 1.0))
                .collect();
            b.row(format!("assign4_j{j}"), terms, LinRel::Eq, k);
        }
    }
    for s in 1..=t as usize {
        for p in 1..=m as usize {
            let terms: Vec<(usize, f64)> = (0..n).map(|j| (ex[j][s][p], 1.0)).collect();
            b.row(format!("assign5_s{s}_p{p}"), terms, LinRel::Le, 1.0);
        }
    }

    // ------------------------------------------------------------------
    // preemption constraints (batch jobs)
    for j in 0..n {
        if is_rt[j] {
            continue;
        }
        for s in 1..=t as usize {
            for p in 1..=m as usize {
                b.row(
                    format!("preempt1lo_j{j}_s{s}_p{p}"),
                    vec![(ex_rt[j][s][p], 1.0), (ex[j][s][p], -inst.min_exec_ratio)],
                    LinRel::Ge,
                    0.0,
                );
                b.row(
                    format!("preempt1hi_j{j}_s{s}_p{p}"),
                    vec![(ex_rt[j][s][p], 1.0), (ex[j][s][p], -1.0)],
                    LinRel::Le,
                    0.0,
                );
            }
        }
        // preempt2, realized through the partition-block choice: on every
        // block of the chosen placement the job appears exPrmpt+1 times,
        // elsewhere never
        for p in 1..=m as u32 {
            let mut terms: Vec<(usize, f64)> = (1..=t as usize)
                .map(|s| (ex[j][s][p as usize], 1.0))
                .collect();
            for pb in &pbs[j] {
                if pb.contains_block(p) {
                    terms.push((ex_pb[j][&pb.placement_index], -1.0));
                    terms.push((z_prpb[j][&pb.placement_index], -1.0));
                }
            }
            b.row(format!("preempt2_j{j}_p{p}"), terms, LinRel::Eq, 0.0);
        }
        // preempt3: total slots = ceil(nodes/512) * (exPrmpt + 1)
        let mut terms: Vec<(usize, f64)> = (1..=t as usize)
            .flat_map(|s| (1..=m as usize).map(move |p| (s, p)))
            .map(|(s, p)| (ex[j][s][p], 1.0))
            .collect();
        terms.push((ex_prmpt[j], -(k_blocks[j] as f64)));
        b.row(format!("preempt3_j{j}"), terms, LinRel::Eq, k_blocks[j] as f64);
        // preempt4: per block, ratios sum to 1 where the job runs, 0 elsewhere
        for p in 1..=m as u32 {
            let mut terms: Vec<(usize, f64)> = (1..=t as usize)
                .map(|s| (ex_rt[j][s][p as usize], 1.0))
                .collect();
            for pb in &pbs[j] {
                if pb.contains_block(p) {
                    terms.push((ex_pb[j][&pb.placement_index], -1.0));
                }
            }
            b.row(format!("preempt4_j{j}_p{p}"), terms, LinRel::Eq, 0.0);
        }
    }

    // ------------------------------------------------------------------
    // partition-block choice and the real-time slowdown cap
    for j in 0..n {
        let terms: Vec<(usize, f64)> = ex_pb[j].values().map(|&v| (v, 1.0)).collect();
        b.row(format!("part1_j{j}"), terms, LinRel::Eq, 1.0);
    }
    let n_r = inst.rt_jobs().count();
    if n_r > 0 {
        let mut terms = Vec::new();
        let mut fixed = 0.0;
        for (j, job) in inst.rt_jobs() {
            terms.push((st[j], 1.0 / job.runtime));
            fixed += (job.runtime - job.submit_time) / job.runtime;
        }
        b.row(
            "rtj_sd_cap".to_string(),
            terms,
            LinRel::Le,
            n_r as f64 * inst.sd_rtj_thresh - fixed,
        );
    }

    // objective
    let mut objective = Vec::new();
    let mut objective_constant = 0.0;
    for (j, job) in inst.batch_jobs() {
        objective.push((et[j], 1.0 / job.runtime));
        objective_constant -= job.submit_time / job.runtime;
    }

    let binary_count = b.vars.iter().filter(|v| v.kind == VarKind::Binary).count();
    let size_warning = (binary_count > 4000).then(|| {
        format!(
            "{binary_count} binary variables; solve times grow exponentially past a few hundred"
        )
    });
    ModelExport {
        vars: b.vars,
        index: b.index,
        rows: b.rows,
        objective,
        objective_constant,
        binary_count,
        size_warning,
    }
}

fn fmt_coeff(first: bool, c: f64, name: &str) -> String {
    let sign = if c < 0.0 {
        "- "
    } else if first {
        ""
    } else {
        "+ "
    };
    let mag = c.abs();
    if (mag - 1.0).abs() < 1e-15 {
        format!("{sign}{name}")
    } else {
        format!("{sign}{mag} {name}")
    }
}

/// Writes the model in CPLEX LP format. Deterministic: identical models
/// serialize to identical bytes.
pub fn export_lp<W: Write>(model: &ModelExport, sink: &mut W) -> std::io::Result<()> {
    writeln!(sink, "\\ partition-sequence scheduling model")?;
    writeln!(sink, "\\ {} variables ({} binary), {} rows", model.vars.len(), model.binary_count, model.rows.len())?;
    writeln!(sink, "Minimize")?;
    let mut line = String::from(" obj:");
    for (i, &(v, c)) in model.objective.iter().enumerate() {
        line.push(' ');
        line.push_str(&fmt_coeff(i == 0, c, &model.vars[v].name));
        if line.len() > 200 {
            writeln!(sink, "{line}")?;
            line = String::from("     ");
        }
    }
    if model.objective.is_empty() {
        line.push_str(" 0 dummy_zero");
    }
    writeln!(sink, "{line}")?;
    writeln!(sink, "Subject To")?;
    for row in &model.rows {
        let mut line = format!(" {}:", row.name);
        for (i, &(v, c)) in row.terms.iter().enumerate() {
            line.push(' ');
            line.push_str(&fmt_coeff(i == 0, c, &model.vars[v].name));
            if line.len() > 200 {
                writeln!(sink, "{line}")?;
                line = String::from("     ");
            }
        }
        let rel = match row.rel {
            LinRel::Le => "<=",
            LinRel::Ge => ">=",
            LinRel::Eq => "=",
        };
        writeln!(sink, "{line} {rel} {}", row.rhs)?;
    }
    writeln!(sink, "Bounds")?;
    for v in &model.vars {
        if v.kind == VarKind::Continuous {
            writeln!(sink, " {} <= {} <= {}", v.lo, v.name, v.hi)?;
        }
    }
    if model.objective.is_empty() {
        writeln!(sink, " 0 <= dummy_zero <= 0")?;
    }
    writeln!(sink, "Binaries")?;
    let mut line = String::from(" ");
    for v in model.vars.iter().filter(|v| v.kind == VarKind::Binary) {
        if line.len() + v.name.len() > 200 {
            writeln!(sink, "{line}")?;
            line = String::from(" ");
        }
        line.push_str(&v.name);
        line.push(' ');
    }
    writeln!(sink, "{line}")?;
    writeln!(sink, "End")?;
    Ok(())
}

/// Substitutes a schedule into the model's variable space. Product
/// auxiliaries take their defining values, so a schedule satisfies the
/// exported rows exactly when it is logically feasible.
pub fn map_schedule_to_vars(
    inst: &OfflineInstance,
    sched: &OfflineSchedule,
    model: &ModelExport,
) -> Vec<f64> {
    let mut vals = vec![0.0; model.vars.len()];
    let idx = |name: &str| -> Option<usize> { model.index.get(name).copied() };
    let set = |name: String, v: f64, vals: &mut Vec<f64>| {
        if let Some(i) = idx(&name) {
            vals[i] = v;
        }
    };
    let m = inst.machine.num_blocks();
    let t = inst.max_sequences;

    // per-block occupancy: (slot -> (job, start, duration))
    let mut by_block: BTreeMap<u32, BTreeMap<u32, (usize, f64, f64)>> = BTreeMap::new();

    for js in &sched.jobs {
        let j = js.job_index;
        let job = &inst.jobs[j];
        let rt_tag = job.kind == JobKind::RealTime;
        let preempted = js.segments.len() > 1;
        set(format!("exPb_j{j}_pb{}", js.placement_index), 1.0, &mut vals);
        if !rt_tag {
            set(format!("exPrmpt_j{j}"), f64::from(preempted), &mut vals);
            set(format!("et_j{j}"), js.end, &mut vals);
            let rst_val = js
                .segments
                .get(1)
                .map(|s| s.start)
                .unwrap_or(js.segments[0].start);
            set(format!("rst_j{j}"), rst_val, &mut vals);
            set(
                format!("zPrPb_j{j}_pb{}", js.placement_index),
                f64::from(preempted),
                &mut vals,
            );
        }
        set(format!("st_j{j}"), js.segments[0].start, &mut vals);
        for seg in &js.segments {
            let ovhd = if preempted { inst.overhead(j) } else { 0.0 };
            let dur = seg.ratio * job.runtime + ovhd;
            for &(block, slot) in &seg.slots {
                let tag = if rt_tag { "exR" } else { "exB" };
                set(format!("{tag}_j{j}_s{slot}_p{block}"), 1.0, &mut vals);
                if !rt_tag {
                    set(format!("exRt_j{j}_s{slot}_p{block}"), seg.ratio, &mut vals);
                    set(
                        format!("exOvhd_j{j}_s{slot}_p{block}"),
                        f64::from(preempted),
                        &mut vals,
                    );
                    set(
                        format!("zRtPb_j{j}_s{slot}_p{block}_pb{}", js.placement_index),
                        seg.ratio,
                        &mut vals,
                    );
                } else {
                    set(
                        format!("zRPb_j{j}_s{slot}_p{block}_pb{}", js.placement_index),
                        1.0,
                        &mut vals,
                    );
                }
                by_block
                    .entry(block)
                    .or_default()
                    .insert(slot, (j, seg.start, dur));
            }
        }
    }

    // sequence start times: slot 1 pinned at zero, occupied slots take the
    // occupant's start, trailing slots carry the previous end forward
    for p in 1..=m {
        let slots = by_block.get(&p).cloned().unwrap_or_default();
        let mut prev = 0.0f64;
        for s in 1..=t {
            let val = if s == 1 {
                0.0
            } else if let Some(&(_, start, _)) = slots.get(&s) {
                start
            } else {
                prev
            };
            set(format!("stSeq_s{s}_p{p}"), val, &mut vals);
            let end_bound = slots
                .get(&s)
                .map(|&(_, start, dur)| start + dur)
                .unwrap_or(val);
            prev = val.max(end_bound);
        }
    }

    // product auxiliaries take their defining products
    for js in &sched.jobs {
        let j = js.job_index;
        let rt_tag = inst.jobs[j].kind == JobKind::RealTime;
        let kind = if rt_tag { "R" } else { "B" };
        for seg in &js.segments {
            for &(block, slot) in &seg.slots {
                let st_v = vals[idx(&format!("st_j{j}")).unwrap()];
                set(format!("zSt{kind}_j{j}_s{slot}_p{block}"), st_v, &mut vals);
                let seq_v = vals[idx(&format!("stSeq_s{slot}_p{block}")).unwrap()];
                set(format!("zSeq{kind}_j{j}_s{slot}_p{block}"), seq_v, &mut vals);
                if !rt_tag {
                    let rst_v = vals[idx(&format!("rst_j{j}")).unwrap()];
                    set(format!("zRstB_j{j}_s{slot}_p{block}"), rst_v, &mut vals);
                }
            }
        }
    }
    vals
}

/// Evaluates every row against a variable assignment; returns the names of
/// violated rows.
pub fn eval_rows(model: &ModelExport, vals: &[f64], tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|&(v, c)| c * vals[v]).sum();
        let ok = match row.rel {
            LinRel::Le => lhs <= row.rhs + tol,
            LinRel::Ge => lhs >= row.rhs - tol,
            LinRel::Eq => (lhs - row.rhs).abs() <= tol,
        };
        if !ok {
            bad.push(row.name.clone());
        }
    }
    bad
}

/// Objective value of a variable assignment.
pub fn eval_objective(model: &ModelExport, vals: &[f64]) -> f64 {
    model.objective_constant
        + model
            .objective
            .iter()
            .map(|&(v, c)| c * vals[v])
            .sum::<f64>()
}
