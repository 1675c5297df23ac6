//! Window-local list scheduling that interleaves memory and arithmetic work.
//!
//! Dependences are computed from the dynamic trace, so memory disambiguation
//! uses the exact byte ranges each access touched.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::config::MachineConfig;
use crate::emulator::{run, RunError};
use crate::isa::Category;
use crate::timing::{service_time, simulate, Pipeline, TimingParams};
use crate::vstream::{AddrRange, ItemKind, StreamItem, TraceRecord};

/// Architectural state an instruction or directive can read or write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    V(u8),
    X(u8),
    F(u8),
    /// vl and vtype together.
    VlState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepKind {
    Raw,
    War,
    Waw,
    MemOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DepEdge {
    pub from: usize,
    pub to: usize,
    pub kind: DepKind,
    pub resource: Option<Resource>,
}

/// Edges always point forward in program order, so the graph is acyclic and
/// the original order is one of its topological orders.
#[derive(Debug, Clone, Default)]
pub struct DependenceGraph {
    pub node_count: usize,
    pub edges: Vec<DepEdge>,
}

impl DependenceGraph {
    /// Deduplicated successor lists.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            succ[e.from].push(e.to);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        succ
    }

    pub fn has_edge(&self, from: usize, to: usize, kind: DepKind) -> bool {
        self.edges
            .iter()
            .any(|e| e.from == from && e.to == to && e.kind == kind)
    }

    /// True when `order` (a permutation of node indices) respects every edge.
    pub fn is_topological(&self, order: &[usize]) -> bool {
        if order.len() != self.node_count {
            return false;
        }
        let mut pos = vec![usize::MAX; self.node_count];
        for (i, n) in order.iter().enumerate() {
            if *n >= self.node_count || pos[*n] != usize::MAX {
                return false;
            }
            pos[*n] = i;
        }
        self.edges.iter().all(|e| pos[e.from] < pos[e.to])
    }
}

/// Selection policy for ready instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heuristic {
    /// Prefer the pipeline opposite to the last scheduled instruction, then
    /// the longest critical path, then program order.
    #[default]
    Interleave,
    /// Longest critical path, then program order.
    CriticalPath,
}

#[derive(Debug, Clone, Default)]
struct Node {
    reads: Vec<Resource>,
    writes: Vec<Resource>,
    mem_reads: Vec<AddrRange>,
    mem_writes: Vec<AddrRange>,
    /// `None` for directives.
    pipeline: Option<Pipeline>,
    service: u64,
}

fn record_node(r: &TraceRecord, params: &TimingParams) -> Node {
    let instr = &r.instr;
    let category = instr.category();
    let mut n = Node {
        pipeline: Some(Pipeline::of(category)),
        service: service_time(category, r.vl, params),
        ..Node::default()
    };
    n.reads.extend(instr.vector_sources().into_iter().map(|v| Resource::V(v.index() as u8)));
    n.reads.extend(instr.scalar_sources().into_iter().map(|x| Resource::X(x.index() as u8)));
    n.reads.extend(instr.fs1().map(|f| Resource::F(f.index() as u8)));
    n.reads.push(Resource::VlState);
    if category == Category::Config {
        n.writes.push(Resource::VlState);
        if let Some(rd) = instr.rd().filter(|rd| !rd.is_zero()) {
            n.writes.push(Resource::X(rd.index() as u8));
        }
    } else if instr.mnemonic().is_store() {
        n.mem_writes = merged(&r.addresses);
    } else {
        if instr.mnemonic().is_load() {
            n.mem_reads = merged(&r.addresses);
        }
        n.writes.extend(instr.vd().map(|v| Resource::V(v.index() as u8)));
    }
    n
}

fn directive_node(kind: &ItemKind) -> Node {
    let mut n = Node::default();
    match kind {
        ItemKind::SetXReg { reg, .. } if !reg.is_zero() => {
            n.writes.push(Resource::X(reg.index() as u8))
        }
        ItemKind::SetFReg { reg, .. } => n.writes.push(Resource::F(reg.index() as u8)),
        ItemKind::InitMemF64 { addr, values } => n.mem_writes = init_range(*addr, values.len()),
        ItemKind::InitMemU64 { addr, values } => n.mem_writes = init_range(*addr, values.len()),
        _ => {}
    }
    n
}

fn init_range(addr: u64, count: usize) -> Vec<AddrRange> {
    vec![AddrRange {
        base: addr,
        len: 8 * count as u64,
    }]
}

/// Sorted union of ranges, empty ranges dropped.
fn merged(ranges: &[AddrRange]) -> Vec<AddrRange> {
    let mut v: Vec<AddrRange> = ranges.iter().copied().filter(|r| r.len > 0).collect();
    v.sort_unstable_by_key(|r| r.base);
    let mut out: Vec<AddrRange> = Vec::with_capacity(v.len());
    for r in v {
        match out.last_mut() {
            Some(last) if r.base <= last.end() => {
                let end = last.end().max(r.end());
                last.len = end - last.base;
            }
            _ => out.push(r),
        }
    }
    out
}

fn intersects(a: &[AddrRange], b: &[AddrRange]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].overlaps(&b[j]) {
            return true;
        }
        if a[i].end() <= b[j].end() {
            i += 1;
        } else {
            j += 1;
        }
    }
    false
}

fn graph_of(nodes: &[Node]) -> DependenceGraph {
    let mut edges = Vec::new();
    let mut last_writer: HashMap<Resource, usize> = HashMap::new();
    let mut readers: HashMap<Resource, Vec<usize>> = HashMap::new();
    let mut mem_nodes: Vec<usize> = Vec::new();
    for (j, n) in nodes.iter().enumerate() {
        for r in &n.reads {
            if let Some(&w) = last_writer.get(r) {
                edges.push(DepEdge { from: w, to: j, kind: DepKind::Raw, resource: Some(*r) });
            }
        }
        for r in &n.writes {
            if let Some(&w) = last_writer.get(r) {
                edges.push(DepEdge { from: w, to: j, kind: DepKind::Waw, resource: Some(*r) });
            }
            for &rd in readers.get(r).into_iter().flatten() {
                if rd != j {
                    edges.push(DepEdge { from: rd, to: j, kind: DepKind::War, resource: Some(*r) });
                }
            }
        }
        for r in &n.reads {
            readers.entry(*r).or_default().push(j);
        }
        for r in &n.writes {
            last_writer.insert(*r, j);
            readers.remove(r);
        }
        if !n.mem_reads.is_empty() || !n.mem_writes.is_empty() {
            for &i in &mem_nodes {
                let p = &nodes[i];
                if intersects(&p.mem_writes, &n.mem_reads)
                    || intersects(&p.mem_writes, &n.mem_writes)
                    || intersects(&p.mem_reads, &n.mem_writes)
                {
                    edges.push(DepEdge { from: i, to: j, kind: DepKind::MemOrder, resource: None });
                }
            }
            mem_nodes.push(j);
        }
    }
    DependenceGraph {
        node_count: nodes.len(),
        edges,
    }
}

/// Dependence graph of a window of trace records.
pub fn build_dependences(window: &[TraceRecord]) -> DependenceGraph {
    let params = TimingParams::default();
    let nodes: Vec<Node> = window.iter().map(|r| record_node(r, &params)).collect();
    graph_of(&nodes)
}

fn opposite(p: Pipeline) -> Option<Pipeline> {
    match p {
        Pipeline::Mem => Some(Pipeline::Arith),
        Pipeline::Arith => Some(Pipeline::Mem),
        Pipeline::Config => None,
    }
}

/// List-schedules `nodes`, returning a topological order of indices.
fn list_schedule(nodes: &[Node], graph: &DependenceGraph, heuristic: Heuristic) -> Vec<usize> {
    let succ = graph.successors();
    let mut preds = vec![0usize; nodes.len()];
    for s in &succ {
        for &t in s {
            preds[t] += 1;
        }
    }
    let mut cp = vec![0u64; nodes.len()];
    for i in (0..nodes.len()).rev() {
        let tail = succ[i].iter().map(|s| cp[*s]).max().unwrap_or(0);
        cp[i] = nodes[i].service + tail;
    }

    let lane = |p: Pipeline| p as usize;
    let mut ready: [BinaryHeap<(u64, Reverse<usize>)>; 3] = Default::default();
    let mut ready_directives: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let push = |i: usize,
                ready: &mut [BinaryHeap<(u64, Reverse<usize>)>; 3],
                dirs: &mut BinaryHeap<Reverse<usize>>| match nodes[i].pipeline {
        Some(p) => ready[lane(p)].push((cp[i], Reverse(i))),
        None => dirs.push(Reverse(i)),
    };
    for i in 0..nodes.len() {
        if preds[i] == 0 {
            push(i, &mut ready, &mut ready_directives);
        }
    }

    let mut order = Vec::with_capacity(nodes.len());
    let mut last: Option<Pipeline> = None;
    loop {
        let chosen = if let Some(Reverse(d)) = ready_directives.pop() {
            d
        } else {
            let preferred = match heuristic {
                Heuristic::Interleave => last
                    .and_then(opposite)
                    .filter(|p| !ready[lane(*p)].is_empty()),
                Heuristic::CriticalPath => None,
            };
            let pipe = match preferred {
                Some(p) => Some(p),
                None => Pipeline::ALL
                    .into_iter()
                    .filter_map(|p| ready[lane(p)].peek().map(|top| (*top, p)))
                    .max_by_key(|(top, _)| *top)
                    .map(|(_, p)| p),
            };
            let Some(pipe) = pipe else { break };
            let (_, Reverse(i)) = ready[lane(pipe)].pop().expect("non-empty lane");
            last = Some(pipe);
            i
        };
        order.push(chosen);
        for &s in &succ[chosen] {
            preds[s] -= 1;
            if preds[s] == 0 {
                push(s, &mut ready, &mut ready_directives);
            }
        }
    }
    debug_assert_eq!(order.len(), nodes.len());
    order
}

/// Reorders a window of records. The result is never slower than the input
/// under `params`; when the candidate order would be, the input is returned.
pub fn reschedule(window: &[TraceRecord], params: &TimingParams) -> Vec<TraceRecord> {
    reschedule_with(window, params, Heuristic::default())
}

pub fn reschedule_with(
    window: &[TraceRecord],
    params: &TimingParams,
    heuristic: Heuristic,
) -> Vec<TraceRecord> {
    let nodes: Vec<Node> = window.iter().map(|r| record_node(r, params)).collect();
    let graph = graph_of(&nodes);
    let order = list_schedule(&nodes, &graph, heuristic);
    let candidate: Vec<TraceRecord> = order.iter().map(|i| window[*i].clone()).collect();
    if simulate(&candidate, params).1.total_cycles <= simulate(window, params).1.total_cycles {
        candidate
    } else {
        window.to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleOutcome {
    pub items: Vec<StreamItem>,
    pub windows: usize,
    pub windows_changed: usize,
    pub original_cycles: u64,
    pub scheduled_cycles: u64,
}

/// Reschedules every window of a stream. Phase and window marks are barriers;
/// nothing moves across them.
pub fn schedule_stream(
    config: &MachineConfig,
    items: &[StreamItem],
    heuristic: Heuristic,
) -> Result<ScheduleOutcome, RunError> {
    let params = &config.timing;
    let (_, trace) = run(config, items)?;
    let mut record_of = vec![usize::MAX; items.len()];
    let mut next = 0;
    for (i, item) in items.iter().enumerate() {
        if item.instruction().is_some() {
            record_of[i] = next;
            next += 1;
        }
    }

    let mut out: Vec<StreamItem> = Vec::with_capacity(items.len());
    let mut new_trace: Vec<TraceRecord> = Vec::with_capacity(trace.len());
    let (mut windows, mut changed) = (0, 0);
    let mut start = 0;
    while start < items.len() {
        if matches!(items[start].kind, ItemKind::PhaseMark(_) | ItemKind::WindowMark(_)) {
            out.push(items[start].clone());
            start += 1;
            continue;
        }
        let end = (start..items.len())
            .find(|&i| matches!(items[i].kind, ItemKind::PhaseMark(_) | ItemKind::WindowMark(_)))
            .unwrap_or(items.len());
        windows += 1;
        let seg = &items[start..end];
        let nodes: Vec<Node> = seg
            .iter()
            .enumerate()
            .map(|(k, item)| match &item.kind {
                ItemKind::Instruction(_) => record_node(&trace[record_of[start + k]], params),
                other => directive_node(other),
            })
            .collect();
        let graph = graph_of(&nodes);
        let order = list_schedule(&nodes, &graph, heuristic);
        let records_in = |ord: &mut dyn Iterator<Item = usize>| -> Vec<TraceRecord> {
            ord.filter(|k| record_of[start + k] != usize::MAX)
                .map(|k| trace[record_of[start + k]].clone())
                .collect()
        };
        let original = records_in(&mut (0..seg.len()));
        let candidate = records_in(&mut order.iter().copied());
        let keep_candidate = order.iter().enumerate().any(|(a, b)| a != *b)
            && simulate(&candidate, params).1.total_cycles
                <= simulate(&original, params).1.total_cycles;
        if keep_candidate {
            changed += 1;
            out.extend(retarget_directive_pcs(order.iter().map(|k| seg[*k].clone()).collect()));
            new_trace.extend(candidate);
        } else {
            out.extend(seg.iter().cloned());
            new_trace.extend(original);
        }
        start = end;
    }

    let original_cycles = simulate(&trace, params).1.total_cycles;
    let scheduled_cycles = simulate(&new_trace, params).1.total_cycles;
    if scheduled_cycles > original_cycles {
        return Ok(ScheduleOutcome {
            items: items.to_vec(),
            windows,
            windows_changed: 0,
            original_cycles,
            scheduled_cycles: original_cycles,
        });
    }
    Ok(ScheduleOutcome {
        items: out,
        windows,
        windows_changed: changed,
        original_cycles,
        scheduled_cycles,
    })
}

/// A directive's pc is the pc the next instruction receives; after a reorder
/// that is whichever instruction now follows it.
fn retarget_directive_pcs(mut seg: Vec<StreamItem>) -> Vec<StreamItem> {
    let mut next_pc: Option<u64> = None;
    for item in seg.iter_mut().rev() {
        if item.instruction().is_some() {
            next_pc = Some(item.pc);
        } else if let Some(pc) = next_pc {
            item.pc = pc;
        }
    }
    seg
}

/// Runs both streams and compares registers, vl/vtype and memory bit for bit.
pub fn verify_equivalence(
    config: &MachineConfig,
    stream: &[StreamItem],
    scheduled: &[StreamItem],
) -> Result<bool, RunError> {
    let (a, _) = run(config, stream)?;
    let (b, _) = run(config, scheduled)?;
    Ok(a.same_architectural_state(&b))
}
