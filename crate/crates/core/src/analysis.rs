//! Per-phase metrics, PC profiles and A/B comparison of runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::isa::Category;
use crate::timing::{phase_cycles, Pipeline, TimelineEntry};
use crate::vstream::TraceRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("cannot analyze an empty trace")]
    EmptyTrace,
    #[error("phase sets differ: {a:?} vs {b:?}")]
    PhaseSetMismatch { a: Vec<u32>, b: Vec<u32> },
    #[error("timeline has {entries} entries for {records} records")]
    TimelineMismatch { records: usize, entries: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMetrics {
    pub phase: u32,
    pub vector_instr_count: u64,
    pub scalar_instr_sum: u64,
    pub avg_vl: f64,
    pub vl_histogram: BTreeMap<u64, u64>,
    pub category_histogram: BTreeMap<Category, u64>,
    pub modeled_cycles: Option<u64>,
    pub ipc: Option<f64>,
    pub mem_inflight_fraction: Option<f64>,
}

/// Sorted union of the MEM pipeline's busy intervals.
fn mem_busy(entries: &[TimelineEntry]) -> Vec<(u64, u64)> {
    let mut spans: Vec<(u64, u64)> = entries
        .iter()
        .filter(|e| e.pipeline == Pipeline::Mem)
        .map(|e| (e.start_cycle, e.complete_cycle))
        .collect();
    spans.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Metrics for each phase in order of first appearance. `timeline` carries
/// the simulated entries and the run's total cycles.
pub fn phase_metrics(
    trace: &[TraceRecord],
    timeline: Option<(&[TimelineEntry], u64)>,
) -> Result<Vec<PhaseMetrics>, AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    if let Some((entries, _)) = timeline {
        if entries.len() != trace.len() {
            return Err(AnalysisError::TimelineMismatch {
                records: trace.len(),
                entries: entries.len(),
            });
        }
    }
    let mut order: Vec<u32> = Vec::new();
    let mut acc: BTreeMap<u32, PhaseMetrics> = BTreeMap::new();
    let mut vl_sum: BTreeMap<u32, u64> = BTreeMap::new();
    for r in trace {
        let m = acc.entry(r.phase).or_insert_with(|| {
            order.push(r.phase);
            PhaseMetrics {
                phase: r.phase,
                vector_instr_count: 0,
                scalar_instr_sum: 0,
                avg_vl: 0.0,
                vl_histogram: BTreeMap::new(),
                category_histogram: BTreeMap::new(),
                modeled_cycles: None,
                ipc: None,
                mem_inflight_fraction: None,
            }
        });
        m.vector_instr_count += 1;
        m.scalar_instr_sum += r.scalar_before;
        *m.vl_histogram.entry(r.vl).or_default() += 1;
        *m.category_histogram.entry(r.category()).or_default() += 1;
        *vl_sum.entry(r.phase).or_default() += r.vl;
    }
    for (phase, m) in acc.iter_mut() {
        m.avg_vl = vl_sum[phase] as f64 / m.vector_instr_count as f64;
    }

    if let Some((entries, total)) = timeline {
        let cycles = phase_cycles(trace, entries, total);
        let busy = mem_busy(entries);
        let mut inflight: BTreeMap<u32, u64> = BTreeMap::new();
        let mut j = 0;
        for (i, r) in trace.iter().enumerate() {
            let from = if i == 0 { 0 } else { entries[i].start_cycle };
            let to = entries.get(i + 1).map_or(total, |e| e.start_cycle);
            while j < busy.len() && busy[j].1 <= from {
                j += 1;
            }
            let mut k = j;
            let mut covered = 0;
            while k < busy.len() && busy[k].0 < to {
                covered += busy[k].1.min(to) - busy[k].0.max(from);
                k += 1;
            }
            *inflight.entry(r.phase).or_default() += covered;
        }
        for (phase, m) in acc.iter_mut() {
            let c = cycles.get(phase).copied().unwrap_or(0);
            m.modeled_cycles = Some(c);
            let instrs = (m.vector_instr_count + m.scalar_instr_sum) as f64;
            m.ipc = Some(if c == 0 { 0.0 } else { instrs / c as f64 });
            m.mem_inflight_fraction = Some(if c == 0 {
                0.0
            } else {
                inflight.get(phase).copied().unwrap_or(0) as f64 / c as f64
            });
        }
    }
    Ok(order.into_iter().map(|p| acc.remove(&p).unwrap()).collect())
}

pub fn metrics_csv(metrics: &[PhaseMetrics]) -> String {
    let mut s = String::from(
        "phase,vector_instr_count,scalar_instr_sum,avg_vl,modeled_cycles,ipc,mem_inflight_fraction\n",
    );
    let opt_u = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
    let opt_f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    for m in metrics {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{},{},{}",
            m.phase,
            m.vector_instr_count,
            m.scalar_instr_sum,
            m.avg_vl,
            opt_u(m.modeled_cycles),
            opt_f(m.ipc),
            opt_f(m.mem_inflight_fraction)
        );
    }
    s
}

pub fn metrics_text(metrics: &[PhaseMetrics]) -> String {
    let mut s = format!(
        "{:>5} {:>8} {:>8} {:>8} {:>10} {:>7} {:>8}\n",
        "phase", "vinstr", "scalar", "avg_vl", "cycles", "ipc", "mem_busy"
    );
    for m in metrics {
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>8} {:>8.2} {:>10} {:>7} {:>8}",
            m.phase,
            m.vector_instr_count,
            m.scalar_instr_sum,
            m.avg_vl,
            m.modeled_cycles.map_or("-".into(), |c| c.to_string()),
            m.ipc.map_or("-".into(), |v| format!("{v:.3}")),
            m.mem_inflight_fraction.map_or("-".into(), |v| format!("{v:.3}")),
        );
        let cats: Vec<String> = m
            .category_histogram
            .iter()
            .map(|(c, n)| format!("{}={n}", c.as_str()))
            .collect();
        let vls: Vec<String> = m.vl_histogram.iter().map(|(v, n)| format!("{v}:{n}")).collect();
        let _ = writeln!(s, "      categories {}", cats.join(" "));
        let _ = writeln!(s, "      vl {}", vls.join(" "));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcProfile {
    pub series: Vec<(u64, u64)>,
    /// Maximal runs of strictly increasing pc.
    pub ramps: usize,
}

pub fn pc_profile(trace: &[TraceRecord]) -> PcProfile {
    let series: Vec<(u64, u64)> = trace.iter().map(|r| (r.seq, r.pc)).collect();
    let ramps = series
        .iter()
        .enumerate()
        .filter(|(i, (_, pc))| *i == 0 || *pc <= series[i - 1].1)
        .count();
    PcProfile { series, ramps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Improvement,
    Regression,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Improvement => "IMPROVEMENT",
            Flag::Regression => "REGRESSION",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDelta {
    pub phase: u32,
    pub cycles: (Option<u64>, Option<u64>),
    pub delta_cycles: i64,
    pub avg_vl: (f64, f64),
    pub delta_avg_vl: f64,
    pub ipc: (Option<f64>, Option<f64>),
    pub delta_ipc: f64,
    pub vector_instr: (u64, u64),
    pub delta_vector_instr: i64,
    pub scalar_instr: (u64, u64),
    pub delta_scalar_instr: i64,
    pub flag: Option<Flag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub phases: Vec<PhaseDelta>,
}

/// Per-phase deltas (b minus a). A phase is flagged by modeled cycles:
/// fewer cycles in `b` is an improvement, more is a regression.
pub fn compare(a: &[PhaseMetrics], b: &[PhaseMetrics]) -> Result<Comparison, AnalysisError> {
    let mut pa: Vec<u32> = a.iter().map(|m| m.phase).collect();
    let mut pb: Vec<u32> = b.iter().map(|m| m.phase).collect();
    pa.sort_unstable();
    pb.sort_unstable();
    if pa != pb {
        return Err(AnalysisError::PhaseSetMismatch { a: pa, b: pb });
    }
    let phases = a
        .iter()
        .map(|ma| {
            let mb = b.iter().find(|m| m.phase == ma.phase).unwrap();
            let diff = |x: u64, y: u64| y as i64 - x as i64;
            let delta_cycles = match (ma.modeled_cycles, mb.modeled_cycles) {
                (Some(x), Some(y)) => diff(x, y),
                _ => 0,
            };
            let flag = match delta_cycles {
                d if d < 0 => Some(Flag::Improvement),
                d if d > 0 => Some(Flag::Regression),
                _ => None,
            };
            PhaseDelta {
                phase: ma.phase,
                cycles: (ma.modeled_cycles, mb.modeled_cycles),
                delta_cycles,
                avg_vl: (ma.avg_vl, mb.avg_vl),
                delta_avg_vl: mb.avg_vl - ma.avg_vl,
                ipc: (ma.ipc, mb.ipc),
                delta_ipc: mb.ipc.unwrap_or(0.0) - ma.ipc.unwrap_or(0.0),
                vector_instr: (ma.vector_instr_count, mb.vector_instr_count),
                delta_vector_instr: diff(ma.vector_instr_count, mb.vector_instr_count),
                scalar_instr: (ma.scalar_instr_sum, mb.scalar_instr_sum),
                delta_scalar_instr: diff(ma.scalar_instr_sum, mb.scalar_instr_sum),
                flag,
            }
        })
        .collect();
    Ok(Comparison { phases })
}

impl Comparison {
    pub fn flag_for(&self, phase: u32) -> Option<Flag> {
        self.phases.iter().find(|d| d.phase == phase).and_then(|d| d.flag)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "phase,cycles_a,cycles_b,delta_cycles,avg_vl_a,avg_vl_b,delta_avg_vl,ipc_a,ipc_b,delta_ipc,vector_instr_a,vector_instr_b,delta_vector_instr,scalar_instr_a,scalar_instr_b,delta_scalar_instr,flag\n",
        );
        let ou = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
        let of = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        for d in &self.phases {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{:.6},{:.6},{},{},{:.6},{},{},{},{},{},{},{}",
                d.phase,
                ou(d.cycles.0),
                ou(d.cycles.1),
                d.delta_cycles,
                d.avg_vl.0,
                d.avg_vl.1,
                d.delta_avg_vl,
                of(d.ipc.0),
                of(d.ipc.1),
                d.delta_ipc,
                d.vector_instr.0,
                d.vector_instr.1,
                d.delta_vector_instr,
                d.scalar_instr.0,
                d.scalar_instr.1,
                d.delta_scalar_instr,
                d.flag.map_or("", Flag::as_str)
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>5} {:>10} {:>10} {:>10} {:>8} {:>8} {:>7} {:>7}  {}\n",
            "phase", "cycles_a", "cycles_b", "delta", "vl_a", "vl_b", "ipc_a", "ipc_b", "flag"
        );
        let c = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        for d in &self.phases {
            let _ = writeln!(
                s,
                "{:>5} {:>10} {:>10} {:>+10} {:>8.2} {:>8.2} {:>7} {:>7}  {}",
                d.phase,
                c(d.cycles.0),
                c(d.cycles.1),
                d.delta_cycles,
                d.avg_vl.0,
                d.avg_vl.1,
                f(d.ipc.0),
                f(d.ipc.1),
                d.flag.map_or("", Flag::as_str)
            );
        }
        s
    }
}
