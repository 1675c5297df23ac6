//! Paraver `.prv`/`.pcf` export of execution traces.
//!
//! One node, one application, one task, one thread. Each trace record becomes
//! five events sharing a timestamp.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::isa::{Category, Mnemonic};
use crate::timing::TimelineEntry;
use crate::vstream::TraceRecord;

pub const EVENT_PHASE: u64 = 1000;
pub const EVENT_PC: u64 = 2000;
pub const EVENT_VL: u64 = 3000;
pub const EVENT_CATEGORY: u64 = 4000;
pub const EVENT_MNEMONIC: u64 = 5000;

pub const STATE_IDLE: u64 = 0;
pub const STATE_RUNNING: u64 = 1;

const THREAD: &str = "1:1:1:1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrvRecord {
    State { begin: u64, end: u64, state: u64 },
    Event { time: u64, ty: u64, value: u64 },
}

impl PrvRecord {
    pub fn time(&self) -> u64 {
        match *self {
            PrvRecord::State { begin, .. } => begin,
            PrvRecord::Event { time, .. } => time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrvDocument {
    pub duration: u64,
    pub records: Vec<PrvRecord>,
}

impl PrvDocument {
    pub fn events(&self) -> impl Iterator<Item = (u64, u64, u64)> + '_ {
        self.records.iter().filter_map(|r| match *r {
            PrvRecord::Event { time, ty, value } => Some((time, ty, value)),
            PrvRecord::State { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrvError {
    #[error("cannot export an empty trace")]
    EmptyTrace,
    #[error("timeline has {entries} entries for {records} records")]
    TimelineMismatch { records: usize, entries: usize },
    #[error("line {line}: {message}")]
    FormatError { line: usize, message: String },
}

/// Builds the event document. Without a timeline the time axis is the record
/// index; with one it is the modeled issue cycle.
pub fn to_prv(
    trace: &[TraceRecord],
    timeline: Option<(&[TimelineEntry], u64)>,
) -> Result<PrvDocument, PrvError> {
    if trace.is_empty() {
        return Err(PrvError::EmptyTrace);
    }
    if let Some((entries, _)) = timeline {
        if entries.len() != trace.len() {
            return Err(PrvError::TimelineMismatch {
                records: trace.len(),
                entries: entries.len(),
            });
        }
    }
    let duration = match timeline {
        Some((_, total)) => total,
        None => trace.len() as u64,
    };
    let mut records = Vec::with_capacity(trace.len() * 5 + 1);
    records.push(PrvRecord::State {
        begin: 0,
        end: duration,
        state: STATE_RUNNING,
    });
    for (i, r) in trace.iter().enumerate() {
        let time = match timeline {
            Some((entries, _)) => entries[i].issue_cycle,
            None => i as u64,
        };
        let values = [
            (EVENT_PHASE, r.phase as u64),
            (EVENT_PC, r.pc),
            (EVENT_VL, r.vl),
            (EVENT_CATEGORY, r.category().id()),
            (EVENT_MNEMONIC, r.instr.mnemonic().id()),
        ];
        records.extend(
            values
                .into_iter()
                .map(|(ty, value)| PrvRecord::Event { time, ty, value }),
        );
    }
    Ok(PrvDocument { duration, records })
}

pub fn prv_header(duration: u64) -> String {
    format!("#Paraver (01/01/00 at 00:00):{duration}_ns:1(1):1:1(1:1)")
}

/// Serializes to `.prv` and a matching `.pcf`.
pub fn emit_prv(doc: &PrvDocument) -> (String, String) {
    let mut prv = prv_header(doc.duration);
    prv.push('\n');
    for r in &doc.records {
        let _ = match *r {
            PrvRecord::State { begin, end, state } => {
                writeln!(prv, "1:{THREAD}:{begin}:{end}:{state}")
            }
            PrvRecord::Event { time, ty, value } => writeln!(prv, "2:{THREAD}:{time}:{ty}:{value}"),
        };
    }
    (prv, emit_pcf(doc))
}

fn emit_pcf(doc: &PrvDocument) -> String {
    let phases: BTreeSet<u64> = doc
        .events()
        .filter(|(_, ty, _)| *ty == EVENT_PHASE)
        .map(|(_, _, v)| v)
        .collect();
    let mut s = String::from(
        "DEFAULT_OPTIONS\n\nLEVEL               THREAD\nUNITS               NANOSEC\nLOOK_BACK           100\nSPEED               1\nFLAG_ICONS          ENABLED\nNUM_OF_STATE_COLORS 2\nYMAX_SCALE          37\n\n\nDEFAULT_SEMANTIC\n\nTHREAD_FUNC          State As Is\n\n\nSTATES\n0    Idle\n1    Running\n\n\nSTATES_COLOR\n0    {117,195,255}\n1    {0,0,255}\n\n\n",
    );
    s.push_str("EVENT_TYPE\n0    1000    Phase\nVALUES\n");
    for p in &phases {
        let _ = writeln!(s, "{p}      phase {p}");
    }
    s.push_str("\n\nEVENT_TYPE\n0    2000    Program counter\n\n\n");
    s.push_str("EVENT_TYPE\n0    3000    Vector length\n\n\n");
    s.push_str("EVENT_TYPE\n0    4000    Instruction category\nVALUES\n");
    for c in Category::ALL {
        let _ = writeln!(s, "{}      {}", c.id(), c.as_str());
    }
    s.push_str("\n\nEVENT_TYPE\n0    5000    Vector mnemonic\nVALUES\n");
    for m in Mnemonic::ALL {
        let _ = writeln!(s, "{}      {}", m.id(), m.as_str());
    }
    s.push('\n');
    s
}

fn parse_fields(line: &str, lineno: usize) -> Result<Vec<u64>, PrvError> {
    line.split(':')
        .map(|f| {
            f.trim().parse::<u64>().map_err(|_| PrvError::FormatError {
                line: lineno,
                message: format!("expected a non-negative integer, found `{f}`"),
            })
        })
        .collect()
}

/// Parses a `.prv` file produced by [`emit_prv`] or by any single-thread
/// Paraver writer. Event lines may carry several `type:value` pairs.
pub fn parse_prv(text: &str) -> Result<PrvDocument, PrvError> {
    let mut lines = text.lines().enumerate();
    let err = |line: usize, message: &str| PrvError::FormatError {
        line,
        message: message.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let rest = header
        .strip_prefix("#Paraver (")
        .ok_or_else(|| err(1, "header must start with `#Paraver (`"))?;
    let after_date = rest
        .split_once("):")
        .map(|(_, r)| r)
        .ok_or_else(|| err(1, "malformed header date"))?;
    let dur_text = after_date
        .split(':')
        .next()
        .and_then(|d| d.strip_suffix("_ns").or(Some(d)))
        .unwrap_or("");
    let duration: u64 = dur_text
        .parse()
        .map_err(|_| err(1, "malformed duration"))?;

    let mut records = Vec::new();
    let mut last_time = 0u64;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("c:") {
            continue;
        }
        let f = parse_fields(line, lineno)?;
        let record_time;
        match f.first() {
            Some(1) => {
                if f.len() != 8 {
                    return Err(err(lineno, "state record needs 8 fields"));
                }
                if f[5] > f[6] {
                    return Err(err(lineno, "state ends before it begins"));
                }
                record_time = f[5];
                if f[6] > duration {
                    return Err(err(lineno, "state extends past the trace duration"));
                }
                records.push(PrvRecord::State {
                    begin: f[5],
                    end: f[6],
                    state: f[7],
                });
            }
            Some(2) => {
                if f.len() < 8 || (f.len() - 6) % 2 != 0 {
                    return Err(err(lineno, "event record needs type:value pairs"));
                }
                record_time = f[5];
                for pair in f[6..].chunks(2) {
                    records.push(PrvRecord::Event {
                        time: f[5],
                        ty: pair[0],
                        value: pair[1],
                    });
                }
            }
            _ => return Err(err(lineno, "unsupported record kind")),
        }
        if record_time > duration {
            return Err(err(lineno, "record time exceeds the trace duration"));
        }
        if record_time < last_time {
            return Err(err(lineno, "record times must be non-decreasing"));
        }
        last_time = record_time;
    }
    Ok(PrvDocument { duration, records })
}
