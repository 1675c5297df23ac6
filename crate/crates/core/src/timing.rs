//! Trace-driven cycle model: a scalar core feeding a decoupled VPU with one
//! memory pipeline and one arithmetic pipeline.
//!
//! Every cycle count is a max/plus combination of non-negative occupancies and
//! latencies, which makes the model monotone in each rate parameter.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::config::{parse_value, ConfigError};
use crate::isa::{Category, Mnemonic, VReg};
use crate::vstream::TraceRecord;

/// Rates and latencies of the modeled VPU. Numeric defaults are placeholders
/// meant to be tuned; only their ordering (indexed much slower than unit
/// stride, arithmetic as wide as the lanes) is load-bearing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingParams {
    pub unit_stride_elems_per_cycle: u64,
    pub indexed_elems_per_cycle: u64,
    pub strided_elems_per_cycle: u64,
    pub arith_elems_per_cycle: u64,
    pub mem_latency_cycles: u64,
    pub arith_latency_cycles: u64,
    pub scalar_cycles_per_instr: u64,
    pub vector_queue_depth: u64,
    pub chaining: bool,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams::for_lanes(8)
    }
}

const KEYS: [&str; 9] = [
    "unit_stride_elems_per_cycle",
    "indexed_elems_per_cycle",
    "strided_elems_per_cycle",
    "arith_elems_per_cycle",
    "mem_latency_cycles",
    "arith_latency_cycles",
    "scalar_cycles_per_instr",
    "vector_queue_depth",
    "chaining",
];

impl TimingParams {
    /// Defaults with the arithmetic rate matched to `lanes`.
    pub fn for_lanes(lanes: u64) -> Self {
        TimingParams {
            unit_stride_elems_per_cycle: 8,
            indexed_elems_per_cycle: 1,
            strided_elems_per_cycle: 1,
            arith_elems_per_cycle: lanes,
            mem_latency_cycles: 30,
            arith_latency_cycles: 6,
            scalar_cycles_per_instr: 1,
            vector_queue_depth: 16,
            chaining: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let rates = [
            ("unit_stride_elems_per_cycle", self.unit_stride_elems_per_cycle),
            ("indexed_elems_per_cycle", self.indexed_elems_per_cycle),
            ("strided_elems_per_cycle", self.strided_elems_per_cycle),
            ("arith_elems_per_cycle", self.arith_elems_per_cycle),
            ("mem_latency_cycles", self.mem_latency_cycles),
            ("arith_latency_cycles", self.arith_latency_cycles),
            ("vector_queue_depth", self.vector_queue_depth),
        ];
        for (key, v) in rates {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{key} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn apply_entries(&mut self, entries: &[(String, String)]) -> Result<(), ConfigError> {
        for (key, value) in entries {
            let v = || parse_value::<u64>(key, value);
            match key.as_str() {
                "unit_stride_elems_per_cycle" => self.unit_stride_elems_per_cycle = v()?,
                "indexed_elems_per_cycle" => self.indexed_elems_per_cycle = v()?,
                "strided_elems_per_cycle" => self.strided_elems_per_cycle = v()?,
                "arith_elems_per_cycle" => self.arith_elems_per_cycle = v()?,
                "mem_latency_cycles" => self.mem_latency_cycles = v()?,
                "arith_latency_cycles" => self.arith_latency_cycles = v()?,
                "scalar_cycles_per_instr" => self.scalar_cycles_per_instr = v()?,
                "vector_queue_depth" => self.vector_queue_depth = v()?,
                "chaining" => {
                    self.chaining = match value.to_ascii_lowercase().as_str() {
                        "true" | "1" | "yes" | "on" => true,
                        "false" | "0" | "no" | "off" => false,
                        _ => {
                            return Err(ConfigError::BadValue {
                                key: key.clone(),
                                value: value.clone(),
                            })
                        }
                    }
                }
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        Ok(())
    }

    /// Parses a standalone timing file (`key = value` lines).
    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let mut p = TimingParams::default();
        p.apply_entries(&crate::config::ini_entries(text)?)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_ini_string(&self) -> String {
        let values = [
            self.unit_stride_elems_per_cycle.to_string(),
            self.indexed_elems_per_cycle.to_string(),
            self.strided_elems_per_cycle.to_string(),
            self.arith_elems_per_cycle.to_string(),
            self.mem_latency_cycles.to_string(),
            self.arith_latency_cycles.to_string(),
            self.scalar_cycles_per_instr.to_string(),
            self.vector_queue_depth.to_string(),
            self.chaining.to_string(),
        ];
        let mut s = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn rate(&self, category: Category) -> u64 {
        match category {
            Category::MemUnit => self.unit_stride_elems_per_cycle,
            Category::MemStrided => self.strided_elems_per_cycle,
            Category::MemIndexed => self.indexed_elems_per_cycle,
            Category::ArithInt | Category::ArithFp | Category::Perm => self.arith_elems_per_cycle,
            Category::Config => 1,
        }
    }

    fn latency(&self, pipe: Pipeline) -> u64 {
        match pipe {
            Pipeline::Mem => self.mem_latency_cycles,
            Pipeline::Arith => self.arith_latency_cycles,
            Pipeline::Config => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pipeline {
    Mem,
    Arith,
    Config,
}

impl Pipeline {
    pub const ALL: [Pipeline; 3] = [Pipeline::Mem, Pipeline::Arith, Pipeline::Config];

    pub fn of(category: Category) -> Pipeline {
        match category {
            Category::Config => Pipeline::Config,
            c if c.is_memory() => Pipeline::Mem,
            _ => Pipeline::Arith,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Mem => "MEM",
            Pipeline::Arith => "ARITH",
            Pipeline::Config => "CONFIG",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineEntry {
    pub seq: u64,
    pub pipeline: Pipeline,
    pub issue_cycle: u64,
    pub start_cycle: u64,
    pub complete_cycle: u64,
    pub mnemonic: Mnemonic,
}

/// Modeled analog of the hardware performance counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CounterSet {
    pub total_cycles: u64,
    pub vector_instr_count: u64,
    pub scalar_instr_count: u64,
    pub mem_busy_cycles: u64,
    pub arith_busy_cycles: u64,
    pub overlap_cycles: u64,
    pub vpu_idle_cycles: u64,
}

impl CounterSet {
    pub fn ipc(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            (self.scalar_instr_count + self.vector_instr_count) as f64 / self.total_cycles as f64
        }
    }
}

/// Busy cycles of one record on its pipeline, at least one.
pub fn occupancy(record: &TraceRecord, params: &TimingParams) -> u64 {
    occupancy_of(record.category(), record.vl, params)
}

pub fn occupancy_of(category: Category, vl: u64, params: &TimingParams) -> u64 {
    if category == Category::Config {
        return 1;
    }
    vl.div_ceil(params.rate(category).max(1)).max(1)
}

/// Occupancy plus pipeline latency: the time from start to completion when
/// nothing else intervenes.
pub fn service_time(category: Category, vl: u64, params: &TimingParams) -> u64 {
    let pipe = Pipeline::of(category);
    occupancy_of(category, vl, params) + params.latency(pipe)
}

#[derive(Clone, Copy, Default)]
struct Writer {
    complete: u64,
    first_ready: u64,
}

/// Runs the cycle model over a trace.
pub fn simulate(trace: &[TraceRecord], params: &TimingParams) -> (Vec<TimelineEntry>, CounterSet) {
    let depth = params.vector_queue_depth.max(1) as usize;
    let mut entries: Vec<TimelineEntry> = Vec::with_capacity(trace.len());
    let mut pipe_free = [0u64; 3];
    let mut last_writer: [Option<Writer>; 32] = [None; 32];
    let mut last_reader_start = [0u64; 32];
    let mut config_done = 0u64;
    let mut prev_start = 0u64;
    let mut t_scalar = 0u64;
    let mut scalar_total = 0u64;

    for (i, r) in trace.iter().enumerate() {
        t_scalar += r.scalar_before * params.scalar_cycles_per_instr;
        scalar_total += r.scalar_before;
        let mut issue = t_scalar;
        if i >= depth {
            issue = issue.max(entries[i - depth].start_cycle);
        }
        t_scalar = issue + 1;

        let category = r.category();
        let pipe = Pipeline::of(category);
        let occ = occupancy_of(category, r.vl, params);
        let lat = params.latency(pipe);

        let mut start = issue.max(prev_start).max(pipe_free[pipe.slot()]);
        // completion floor imposed by chained producers
        let mut chained_floor = 0u64;
        if pipe != Pipeline::Config {
            start = start.max(config_done);
        }
        for src in read_set(r) {
            if let Some(w) = last_writer[src.index()] {
                if params.chaining {
                    start = start.max(w.first_ready);
                    chained_floor = chained_floor.max(w.complete);
                } else {
                    start = start.max(w.complete);
                }
            }
        }
        if let Some(dst) = write_reg(r) {
            if let Some(w) = last_writer[dst.index()] {
                start = start.max(w.complete);
            }
            start = start.max(last_reader_start[dst.index()]);
        }

        let complete = if pipe == Pipeline::Config {
            start + 1
        } else {
            (start + occ).max(chained_floor) + lat
        };

        for src in read_set(r) {
            let s = &mut last_reader_start[src.index()];
            *s = (*s).max(start);
        }
        if let Some(dst) = write_reg(r) {
            last_writer[dst.index()] = Some(Writer {
                complete,
                first_ready: start + lat + 1,
            });
        }
        if pipe == Pipeline::Config {
            config_done = complete;
        }
        pipe_free[pipe.slot()] = complete;
        prev_start = start;
        entries.push(TimelineEntry {
            seq: r.seq,
            pipeline: pipe,
            issue_cycle: issue,
            start_cycle: start,
            complete_cycle: complete,
            mnemonic: r.instr.mnemonic(),
        });
    }

    let last_complete = entries.iter().map(|e| e.complete_cycle).max().unwrap_or(0);
    let total = if trace.is_empty() {
        0
    } else {
        last_complete.max(t_scalar)
    };
    let counters = counters_from(&entries, total, scalar_total);
    (entries, counters)
}

fn read_set(r: &TraceRecord) -> Vec<VReg> {
    r.instr.vector_sources()
}

fn write_reg(r: &TraceRecord) -> Option<VReg> {
    if r.instr.mnemonic().is_store() {
        None
    } else {
        r.instr.vd()
    }
}

/// Sorted, merged union of half-open intervals.
fn union(mut spans: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    spans.retain(|(a, b)| a < b);
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

fn measure(spans: &[(u64, u64)]) -> u64 {
    spans.iter().map(|(a, b)| b - a).sum()
}

fn intersection_measure(a: &[(u64, u64)], b: &[(u64, u64)]) -> u64 {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn spans_of(entries: &[TimelineEntry], pipe: Pipeline) -> Vec<(u64, u64)> {
    entries
        .iter()
        .filter(|e| e.pipeline == pipe)
        .map(|e| (e.start_cycle, e.complete_cycle))
        .collect()
}

fn counters_from(entries: &[TimelineEntry], total: u64, scalar: u64) -> CounterSet {
    let mem = union(spans_of(entries, Pipeline::Mem));
    let arith = union(spans_of(entries, Pipeline::Arith));
    let all = union(entries.iter().map(|e| (e.start_cycle, e.complete_cycle)).collect());
    CounterSet {
        total_cycles: total,
        vector_instr_count: entries.len() as u64,
        scalar_instr_count: scalar,
        mem_busy_cycles: measure(&mem),
        arith_busy_cycles: measure(&arith),
        overlap_cycles: intersection_measure(&mem, &arith),
        vpu_idle_cycles: total - measure(&all),
    }
}

/// Splits `total_cycles` among phases. Record i owns the cycles from its start
/// to the next record's start (the first record from cycle 0, the last until
/// the end), so the per-phase figures add up to the total exactly.
pub fn phase_cycles(
    trace: &[TraceRecord],
    entries: &[TimelineEntry],
    total_cycles: u64,
) -> BTreeMap<u32, u64> {
    let mut out = BTreeMap::new();
    for (i, r) in trace.iter().enumerate() {
        let from = if i == 0 { 0 } else { entries[i].start_cycle };
        let to = entries.get(i + 1).map_or(total_cycles, |e| e.start_cycle);
        *out.entry(r.phase).or_insert(0) += to - from;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimelineFormat {
    Csv,
    Svg,
}

pub fn emit_timeline(entries: &[TimelineEntry], format: TimelineFormat) -> String {
    match format {
        TimelineFormat::Csv => timeline_csv(entries),
        TimelineFormat::Svg => timeline_svg(entries),
    }
}

fn timeline_csv(entries: &[TimelineEntry]) -> String {
    let mut s = String::from("seq,pipeline,issue,start,complete,mnemonic\n");
    for e in entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.seq,
            e.pipeline,
            e.issue_cycle,
            e.start_cycle,
            e.complete_cycle,
            e.mnemonic.as_str()
        );
    }
    s
}

const SVG_WIDTH: f64 = 1600.0;
const LANE_HEIGHT: f64 = 40.0;
const LABEL_WIDTH: f64 = 70.0;

fn lane_color(pipe: Pipeline) -> &'static str {
    match pipe {
        Pipeline::Mem => "#d9534f",
        Pipeline::Arith => "#428bca",
        Pipeline::Config => "#999999",
    }
}

fn timeline_svg(entries: &[TimelineEntry]) -> String {
    let end = entries.iter().map(|e| e.complete_cycle).max().unwrap_or(0).max(1);
    let scale = (SVG_WIDTH - LABEL_WIDTH) / end as f64;
    let height = LANE_HEIGHT * Pipeline::ALL.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{height}" viewBox="0 0 {SVG_WIDTH} {height}">"#
    );
    for pipe in Pipeline::ALL {
        let y = LANE_HEIGHT * pipe.slot() as f64;
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}" font-family="monospace" font-size="12">{}</text>"#,
            y + LANE_HEIGHT / 2.0 + 4.0,
            pipe
        );
    }
    for e in entries {
        let y = LANE_HEIGHT * e.pipeline.slot() as f64 + 4.0;
        let x = LABEL_WIDTH + e.start_cycle as f64 * scale;
        let w = ((e.complete_cycle - e.start_cycle) as f64 * scale).max(0.5);
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{y:.1}" width="{w:.2}" height="{:.1}" fill="{}" stroke="black" stroke-width="0.2"><title>{} {} [{}, {})</title></rect>"#,
            LANE_HEIGHT - 8.0,
            lane_color(e.pipeline),
            e.seq,
            e.mnemonic.as_str(),
            e.start_cycle,
            e.complete_cycle
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_instruction;

    fn record(seq: u64, text: &str, vl: u64) -> TraceRecord {
        TraceRecord {
            seq,
            pc: 0,
            phase: 0,
            window: 0,
            scalar_before: 0,
            instr: parse_instruction(text).unwrap(),
            vl,
            sew_bits: 64,
            addresses: Vec::new(),
        }
    }

    #[test]
    fn occupancy_examples() {
        let p = TimingParams::default();
        assert_eq!(occupancy(&record(0, "vle64.v v1, (x10)", 256), &p), 32);
        assert_eq!(occupancy(&record(0, "vluxei64.v v1, (x10), v2", 256), &p), 256);
        assert_eq!(occupancy(&record(0, "vfadd.vv v1, v2, v3", 8), &p), 1);
        assert_eq!(occupancy(&record(0, "vfadd.vv v1, v2, v3", 0), &p), 1);
        assert_eq!(occupancy(&record(0, "vsetvli x0, x1, e64, m1", 256), &p), 1);
    }

    #[test]
    fn independent_ops_overlap() {
        let p = TimingParams::default();
        let t = [
            record(0, "vle64.v v1, (x10)", 256),
            record(1, "vfadd.vv v2, v3, v4", 256),
        ];
        let (e, c) = simulate(&t, &p);
        // MEM [0, 62), ARITH [1, 39)
        assert_eq!((e[0].start_cycle, e[0].complete_cycle), (0, 62));
        assert_eq!((e[1].start_cycle, e[1].complete_cycle), (1, 39));
        assert_eq!(c.total_cycles, 62);
        assert_eq!(c.mem_busy_cycles, 62);
        assert_eq!(c.arith_busy_cycles, 38);
        assert_eq!(c.overlap_cycles, 38);
        assert_eq!(c.vpu_idle_cycles, 0);
    }

    #[test]
    fn raw_waits_without_chaining() {
        let p = TimingParams::default();
        let t = [
            record(0, "vle64.v v1, (x10)", 256),
            record(1, "vfadd.vv v2, v1, v1", 256),
        ];
        let (e, c) = simulate(&t, &p);
        assert!(e[1].start_cycle >= e[0].complete_cycle);
        assert_eq!(c.overlap_cycles, 0);
    }

    #[test]
    fn chaining_starts_early_but_not_before_producer_ends() {
        let p = TimingParams {
            chaining: true,
            ..TimingParams::default()
        };
        let t = [
            record(0, "vle64.v v1, (x10)", 256),
            record(1, "vfadd.vv v2, v1, v1", 256),
        ];
        let (e, _) = simulate(&t, &p);
        assert_eq!(e[1].start_cycle, 31);
        assert!(e[1].complete_cycle >= e[0].complete_cycle + p.arith_latency_cycles);
    }

    #[test]
    fn empty_trace_zero_counters() {
        let (e, c) = simulate(&[], &TimingParams::default());
        assert!(e.is_empty());
        assert_eq!(c, CounterSet::default());
    }

    #[test]
    fn scalar_work_and_queue() {
        let p = TimingParams {
            vector_queue_depth: 1,
            ..TimingParams::default()
        };
        let mut a = record(0, "vle64.v v1, (x10)", 256);
        a.scalar_before = 5;
        let b = record(1, "vle64.v v2, (x11)", 256);
        let (e, c) = simulate(&[a, b], &p);
        assert_eq!(e[0].issue_cycle, 5);
        // queue of one: the second waits for the first to start
        assert_eq!(e[1].issue_cycle, 6);
        assert_eq!(e[1].start_cycle, e[0].complete_cycle);
        assert_eq!(c.scalar_instr_count, 5);
    }

    #[test]
    fn vector_ops_wait_for_vsetvli() {
        let p = TimingParams::default();
        let t = [
            record(0, "vsetvli x0, x5, e64, m1", 4),
            record(1, "vfadd.vv v2, v3, v4", 4),
        ];
        let (e, _) = simulate(&t, &p);
        assert_eq!((e[0].start_cycle, e[0].complete_cycle), (0, 1));
        assert_eq!(e[1].start_cycle, 1);
    }

    #[test]
    fn csv_row_format() {
        let e = TimelineEntry {
            seq: 0,
            pipeline: Pipeline::Mem,
            issue_cycle: 10,
            start_cycle: 10,
            complete_cycle: 42,
            mnemonic: Mnemonic::Vle64,
        };
        let csv = emit_timeline(&[e], TimelineFormat::Csv);
        assert_eq!(csv.lines().nth(1), Some("0,MEM,10,10,42,vle64.v"));
    }

    #[test]
    fn svg_one_rect_per_entry_in_distinct_lanes() {
        let t = [
            record(0, "vle64.v v1, (x10)", 256),
            record(1, "vfadd.vv v2, v3, v4", 256),
        ];
        let (e, _) = simulate(&t, &TimingParams::default());
        let svg = emit_timeline(&e, TimelineFormat::Svg);
        assert_eq!(svg.matches("<rect").count(), 2);
        let ys: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<rect"))
            .map(|l| l.split("y=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_ne!(ys[0], ys[1]);
    }

    #[test]
    fn phase_cycles_sum_to_total() {
        let mut t = vec![
            record(0, "vle64.v v1, (x10)", 256),
            record(1, "vfadd.vv v2, v1, v1", 256),
            record(2, "vse64.v v2, (x11)", 256),
        ];
        t[1].phase = 1;
        t[2].phase = 2;
        let (e, c) = simulate(&t, &TimingParams::default());
        let per = phase_cycles(&t, &e, c.total_cycles);
        assert_eq!(per.values().sum::<u64>(), c.total_cycles);
        assert_eq!(per.len(), 3);
    }

    #[test]
    fn ini_round_trip_and_unknown_key() {
        let p = TimingParams {
            chaining: true,
            mem_latency_cycles: 7,
            ..TimingParams::default()
        };
        assert_eq!(TimingParams::from_ini_str(&p.to_ini_string()).unwrap(), p);
        assert!(matches!(
            TimingParams::from_ini_str("latency = 3"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(TimingParams::from_ini_str("indexed_elems_per_cycle = 0").is_err());
    }
}
