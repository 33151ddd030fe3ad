//! Job model, trace ingestion (SWF and CSV, optionally gzipped), job
//! categorization, real-time job selection, and cross-machine size
//! normalization.

use crate::machine::MachineConfig;
use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JobKind {
    RealTime,
    Batch,
}

/// Node-count x runtime class: narrow is a rounded size of at most 4096
/// nodes, short is a runtime of at most 120 minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    NarrowShort,
    NarrowLong,
    WideShort,
    WideLong,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::NarrowShort,
        Category::NarrowLong,
        Category::WideShort,
        Category::WideLong,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Category::NarrowShort => "narrow-short",
            Category::NarrowLong => "narrow-long",
            Category::WideShort => "wide-short",
            Category::WideLong => "wide-long",
        }
    }
}

pub const NARROW_MAX_NODES: u32 = 4096;
pub const SHORT_MAX_RUNTIME_S: f64 = 7200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub submit_time: f64,
    pub walltime: f64,
    pub runtime: f64,
    /// Requested node count, before rounding to a legal partition size.
    pub nodes: u32,
    pub kind: JobKind,
}

impl Job {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.runtime > 0.0) {
            return Err(format!("job {}: runtime must be positive", self.id));
        }
        if self.runtime > self.walltime {
            return Err(format!("job {}: runtime exceeds walltime", self.id));
        }
        if self.nodes == 0 {
            return Err(format!("job {}: nodes must be >= 1", self.id));
        }
        if self.submit_time < 0.0 {
            return Err(format!("job {}: negative submit time", self.id));
        }
        Ok(())
    }
}

/// Category of a job, computed from its rounded partition size and runtime.
pub fn categorize(job: &Job, cfg: &MachineConfig) -> Category {
    let rounded = cfg.round_to_partition(job.nodes).unwrap_or(cfg.total_nodes);
    let narrow = rounded <= NARROW_MAX_NODES;
    let short = job.runtime <= SHORT_MAX_RUNTIME_S;
    match (narrow, short) {
        (true, true) => Category::NarrowShort,
        (true, false) => Category::NarrowLong,
        (false, true) => Category::WideShort,
        (false, false) => Category::WideLong,
    }
}

/// Final record of one job's execution: start, restarts, end, accumulated
/// overheads and the per-segment block allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub job_id: String,
    pub start_time: f64,
    pub restart_times: Vec<f64>,
    pub end_time: f64,
    pub preempt_count: u32,
    /// Total time this job spent writing checkpoints.
    pub ckpt_time_total: f64,
    /// Total preemption overhead (redo plus restart reads).
    pub preempt_overhead_total: f64,
    pub segments: Vec<Segment>,
}

/// One contiguous occupancy of a placement by a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub first_block: u32,
    pub last_block: u32,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace contains no usable jobs")]
    Empty,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Swf,
    Csv,
}

/// SWF interpretation knob: how many requested processors map onto one node.
#[derive(Debug, Clone, Copy)]
pub struct SwfOptions {
    pub procs_per_node: u32,
}

impl Default for SwfOptions {
    fn default() -> Self {
        SwfOptions { procs_per_node: 1 }
    }
}

/// Diagnostics for records that were skipped rather than fatal.
#[derive(Debug, Clone, Default)]
pub struct TraceDiagnostics {
    pub skipped: Vec<String>,
}

fn maybe_gunzip(source: &[u8]) -> Result<Vec<u8>, TraceError> {
    if source.len() >= 2 && source[0] == 0x1f && source[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(source).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(source.to_vec())
    }
}

/// Parses a job trace. Records with missing runtime or node counts are
/// skipped with a per-line diagnostic; malformed fields are fatal errors
/// naming the line. Jobs come back sorted by submit time.
pub fn parse_trace(
    source: &[u8],
    format: TraceFormat,
    swf: SwfOptions,
) -> Result<(Vec<Job>, TraceDiagnostics), TraceError> {
    let bytes = maybe_gunzip(source)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut diags = TraceDiagnostics::default();
    let mut jobs = match format {
        TraceFormat::Swf => parse_swf(&text, swf, &mut diags)?,
        TraceFormat::Csv => parse_csv(&text, &mut diags)?,
    };
    if jobs.is_empty() {
        return Err(TraceError::Empty);
    }
    jobs.sort_by(|a, b| {
        a.submit_time
            .total_cmp(&b.submit_time)
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok((jobs, diags))
}

fn parse_swf(
    text: &str,
    opts: SwfOptions,
    diags: &mut TraceDiagnostics,
) -> Result<Vec<Job>, TraceError> {
    let mut jobs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 9 {
            return Err(TraceError::Parse {
                line,
                msg: format!("expected at least 9 SWF fields, got {}", fields.len()),
            });
        }
        let num = |idx: usize, name: &str| -> Result<f64, TraceError> {
            fields[idx].parse::<f64>().map_err(|_| TraceError::Parse {
                line,
                msg: format!("bad {name} field {:?}", fields[idx]),
            })
        };
        let id = fields[0].to_string();
        let submit = num(1, "submit")?;
        let run = num(3, "run time")?;
        // requested processors (field 8), falling back to allocated (field 5)
        let mut procs = num(7, "requested processors")?;
        if procs <= 0.0 {
            procs = num(4, "allocated processors")?;
        }
        let req_time = num(8, "requested time")?;
        if run <= 0.0 {
            diags
                .skipped
                .push(format!("line {line}: job {id} has no runtime"));
            continue;
        }
        if procs <= 0.0 {
            diags
                .skipped
                .push(format!("line {line}: job {id} has no node count"));
            continue;
        }
        let nodes = (procs / opts.procs_per_node as f64).ceil().max(1.0) as u32;
        let walltime = if req_time > 0.0 { req_time.max(run) } else { run };
        jobs.push(Job {
            id,
            submit_time: submit.max(0.0),
            walltime,
            runtime: run,
            nodes,
            kind: JobKind::Batch,
        });
    }
    Ok(jobs)
}

fn parse_kind(token: &str) -> Option<JobKind> {
    match token.trim().to_ascii_lowercase().as_str() {
        "batch" | "bj" => Some(JobKind::Batch),
        "realtime" | "real-time" | "rtj" | "rt" => Some(JobKind::RealTime),
        _ => None,
    }
}

fn parse_csv(text: &str, diags: &mut TraceDiagnostics) -> Result<Vec<Job>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| TraceError::Other(format!("csv header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, TraceError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| TraceError::Other(format!("csv missing column {name:?}")))
    };
    let (ci, cs, cw, cr, cn, ck) = (
        col("id")?,
        col("submit")?,
        col("walltime")?,
        col("runtime")?,
        col("nodes")?,
        col("kind")?,
    );
    let mut jobs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TraceError::Other(format!("csv: {e}")))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |idx: usize, name: &str| -> Result<f64, TraceError> {
            rec.get(idx)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| TraceError::Parse {
                    line,
                    msg: format!("bad {name} field {:?}", rec.get(idx).unwrap_or("")),
                })
        };
        let id = rec.get(ci).unwrap_or("").to_string();
        let submit = num(cs, "submit")?;
        let walltime = num(cw, "walltime")?;
        let runtime = num(cr, "runtime")?;
        let nodes_f = num(cn, "nodes")?;
        let kind = parse_kind(rec.get(ck).unwrap_or("")).ok_or_else(|| TraceError::Parse {
            line,
            msg: format!("bad kind field {:?}", rec.get(ck).unwrap_or("")),
        })?;
        if runtime <= 0.0 || nodes_f <= 0.0 {
            diags
                .skipped
                .push(format!("line {line}: job {id} missing runtime or nodes"));
            continue;
        }
        jobs.push(Job {
            id,
            submit_time: submit.max(0.0),
            walltime: walltime.max(runtime),
            runtime,
            nodes: nodes_f as u32,
            kind,
        });
    }
    Ok(jobs)
}

/// Serializes jobs back to the canonical CSV schema.
pub fn jobs_to_csv(jobs: &[Job]) -> String {
    let mut out = String::from("id,submit,walltime,runtime,nodes,kind\n");
    for j in jobs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            j.id,
            j.submit_time,
            j.walltime,
            j.runtime,
            j.nodes,
            match j.kind {
                JobKind::Batch => "batch",
                JobKind::RealTime => "realtime",
            }
        ));
    }
    out
}

/// Rescales node counts from a source machine onto the target: each job's
/// request becomes ceil(nodes * target / source), clamped to the machine.
pub fn normalize_sizes(jobs: &mut [Job], source_nodes: u32, target: &MachineConfig) {
    assert!(source_nodes > 0, "source machine size must be positive");
    for job in jobs.iter_mut() {
        let scaled =
            (job.nodes as f64 * target.total_nodes as f64 / source_nodes as f64).ceil() as u64;
        job.nodes = scaled.clamp(1, target.total_nodes as u64) as u32;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtjMethod {
    /// Uniformly sample R% of the trace jobs and mark them real-time.
    Default,
    /// Sample only among jobs with runtime under 90 minutes.
    Walltime90,
    /// Keep the trace all-batch and inject real-time jobs from an external
    /// log, with submit times drawn uniformly over the trace span.
    ExternalLog,
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("need {need} eligible jobs, trace has {have}")]
    InsufficientEligible { need: usize, have: usize },
    #[error("external log required for the ExternalLog method")]
    MissingExternal,
}

pub const WALLTIME90_RUNTIME_CUTOFF_S: f64 = 5400.0;

/// Marks (or injects) real-time jobs. Returns the full job list sorted by
/// submit time; sampling is reproducible given the seed.
pub fn select_rtjs(
    jobs: &[Job],
    method: RtjMethod,
    r_percent: f64,
    seed: u64,
    external: Option<&[Job]>,
) -> Result<Vec<Job>, SelectError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = ((r_percent / 100.0) * jobs.len() as f64).round() as usize;
    let mut out: Vec<Job> = jobs.to_vec();
    for j in out.iter_mut() {
        j.kind = JobKind::Batch;
    }
    match method {
        RtjMethod::Default | RtjMethod::Walltime90 => {
            let eligible: Vec<usize> = match method {
                RtjMethod::Default => (0..out.len()).collect(),
                _ => (0..out.len())
                    .filter(|&i| out[i].runtime < WALLTIME90_RUNTIME_CUTOFF_S)
                    .collect(),
            };
            if eligible.len() < count {
                return Err(SelectError::InsufficientEligible {
                    need: count,
                    have: eligible.len(),
                });
            }
            let chosen: Vec<usize> = {
                let mut pool = eligible;
                pool.shuffle(&mut rng);
                pool.truncate(count);
                pool
            };
            for i in chosen {
                out[i].kind = JobKind::RealTime;
            }
        }
        RtjMethod::ExternalLog => {
            let ext = external.ok_or(SelectError::MissingExternal)?;
            if ext.len() < count {
                return Err(SelectError::InsufficientEligible {
                    need: count,
                    have: ext.len(),
                });
            }
            let span_lo = out.iter().map(|j| j.submit_time).fold(f64::INFINITY, f64::min);
            let span_hi = out
                .iter()
                .map(|j| j.submit_time)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut pool: Vec<usize> = (0..ext.len()).collect();
            pool.shuffle(&mut rng);
            pool.truncate(count);
            for (n, idx) in pool.into_iter().enumerate() {
                let mut j = ext[idx].clone();
                j.id = format!("rtj-ext-{n}");
                j.submit_time = if span_hi > span_lo {
                    rng.gen_range(span_lo..span_hi)
                } else {
                    span_lo
                };
                j.kind = JobKind::RealTime;
                out.push(j);
            }
        }
    }
    out.sort_by(|a, b| {
        a.submit_time
            .total_cmp(&b.submit_time)
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(out)
}

/// Keeps only the jobs submitted inside the half-open analysis window.
pub fn middle_window<'a>(
    outcomes: &'a [JobOutcome],
    jobs: &[Job],
    window: (f64, f64),
) -> Vec<&'a JobOutcome> {
    let in_window = |id: &str| {
        jobs.iter()
            .find(|j| j.id == id)
            .map(|j| j.submit_time >= window.0 && j.submit_time < window.1)
            .unwrap_or(false)
    };
    outcomes.iter().filter(|o| in_window(&o.job_id)).collect()
}

/// Parameters for the synthetic trace generator used by experiments and the
/// acceptance suite.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub num_jobs: usize,
    /// Target offered load: sum(rounded nodes x runtime) over capacity x span.
    pub target_load: f64,
    pub span_s: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_jobs: 500,
            target_load: 0.85,
            span_s: 4.0 * 86400.0,
            seed: 1,
        }
    }
}

/// Generates a deterministic synthetic batch trace with a mix of narrow and
/// wide jobs whose offered load matches the target.
pub fn synthetic_trace(spec: &SyntheticSpec, cfg: &MachineConfig) -> Vec<Job> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut jobs = Vec::with_capacity(spec.num_jobs);
    for i in 0..spec.num_jobs {
        let submit = rng.gen_range(0.0..spec.span_s);
        // mostly narrow jobs with a tail of wide ones, like production mixes
        let r: f64 = rng.gen();
        let max_req = cfg.total_nodes;
        let nodes = if r < 0.55 {
            rng.gen_range(1..=1024.min(max_req))
        } else if r < 0.85 {
            rng.gen_range(1025..=4096.min(max_req)).max(1)
        } else {
            rng.gen_range((4097).min(max_req)..=(16384).min(max_req))
        };
        let runtime = (rng.gen_range(600.0..14400.0f64)).round();
        let walltime = (runtime * rng.gen_range(1.0..2.0f64)).ceil();
        jobs.push(Job {
            id: format!("synth-{i:04}"),
            submit_time: submit.round(),
            walltime,
            runtime,
            nodes,
            kind: JobKind::Batch,
        });
    }
    // scale runtimes so the offered load hits the target
    let work: f64 = jobs
        .iter()
        .map(|j| {
            let rounded = cfg.round_to_partition(j.nodes).unwrap_or(cfg.total_nodes) as f64;
            rounded * j.runtime
        })
        .sum();
    let capacity = cfg.total_nodes as f64 * spec.span_s;
    let scale = spec.target_load * capacity / work;
    for j in jobs.iter_mut() {
        j.runtime = (j.runtime * scale).max(60.0).round();
        j.walltime = j.walltime.max(j.runtime * 1.2).ceil();
    }
    jobs.sort_by(|a, b| {
        a.submit_time
            .total_cmp(&b.submit_time)
            .then_with(|| a.id.cmp(&b.id))
    });
    jobs
}
