//! The VSTREAM input format and the plain-text `.trace` output format.
//!
//! A VSTREAM is the dynamic sequence of vector instructions a program would
//! trap on, annotated with the scalar context the emulator cannot see:
//!
//! ```text
//! .pc 0x80000000        # pc of the next instruction (default: previous + 4)
//! .phase 2              # phase id, persists until the next .phase
//! .window 1             # scheduling window id, persists
//! .scalar 17            # scalar instructions executed before the next vector one
//! .xreg x10 0x1000      # scalar register value produced by scalar code
//! .freg f1 0.5
//! .memf64 0x2000 1.0 2.0 3.0
//! .memu64 0x3000 0 8 16
//! vle64.v v4, (x10)
//! ```
//!
//! `.scalar` counts accumulate until the next instruction and then reset.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::isa::{self, Category, FReg, Instruction, IsaError, XReg};

/// Program counter assumed for the first instruction when no `.pc` is given.
pub const DEFAULT_PC: u64 = 0;

pub const TRACE_HEADER: &str = "#sdvkit-trace v1";

#[derive(Debug, Clone, PartialEq)]
pub enum ItemKind {
    Instruction(Instruction),
    SetXReg { reg: XReg, value: u64 },
    SetFReg { reg: FReg, value: f64 },
    InitMemF64 { addr: u64, values: Vec<f64> },
    InitMemU64 { addr: u64, values: Vec<u64> },
    PhaseMark(u32),
    WindowMark(u32),
}

/// One resolved stream entry. `pc`, `phase` and `window` hold the directive
/// state in effect at this item; for non-instruction items `pc` is the pc
/// the next instruction would receive.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub kind: ItemKind,
    pub pc: u64,
    pub phase: u32,
    pub window: u32,
    pub scalar_before: u64,
}

impl StreamItem {
    pub fn instruction(&self) -> Option<&Instruction> {
        match &self.kind {
            ItemKind::Instruction(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VstreamErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown directive `{0}`")]
    UnknownDirective(String),
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error(transparent)]
    Instruction(#[from] IsaError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct VstreamError {
    pub line: usize,
    pub kind: VstreamErrorKind,
}

fn parse_u64(tok: &str) -> Result<u64, VstreamErrorKind> {
    let bad = || VstreamErrorKind::MalformedNumber(tok.to_string());
    match tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        Some(hex) if !hex.is_empty() => u64::from_str_radix(&hex.replace('_', ""), 16).map_err(|_| bad()),
        Some(_) => Err(bad()),
        None => tok.parse().map_err(|_| bad()),
    }
}

fn parse_u32(tok: &str) -> Result<u32, VstreamErrorKind> {
    let v = parse_u64(tok)?;
    u32::try_from(v).map_err(|_| VstreamErrorKind::MalformedNumber(tok.to_string()))
}

fn parse_f64(tok: &str) -> Result<f64, VstreamErrorKind> {
    tok.parse()
        .map_err(|_| VstreamErrorKind::MalformedNumber(tok.to_string()))
}

/// Incremental VSTREAM parser; yields items line by line so everything
/// before a faulty line stays intact.
pub struct StreamReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    next_pc: u64,
    phase: u32,
    window: u32,
    pending_scalar: u64,
    failed: bool,
}

impl<'a> StreamReader<'a> {
    pub fn new(text: &'a str) -> Self {
        StreamReader {
            lines: text.lines().enumerate(),
            next_pc: DEFAULT_PC,
            phase: 0,
            window: 0,
            pending_scalar: 0,
            failed: false,
        }
    }

    fn item(&self, kind: ItemKind) -> StreamItem {
        StreamItem {
            kind,
            pc: self.next_pc,
            phase: self.phase,
            window: self.window,
            scalar_before: 0,
        }
    }

    /// Handles one line; `Ok(None)` for lines that only update state.
    fn line(&mut self, raw: &str) -> Result<Option<StreamItem>, VstreamErrorKind> {
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            return Ok(None);
        }
        if !text.starts_with('.') {
            let instr = isa::parse_instruction(text)?;
            let item = StreamItem {
                kind: ItemKind::Instruction(instr),
                pc: self.next_pc,
                phase: self.phase,
                window: self.window,
                scalar_before: std::mem::take(&mut self.pending_scalar),
            };
            self.next_pc = self.next_pc.wrapping_add(4);
            return Ok(Some(item));
        }
        let mut toks = text.split_whitespace();
        let directive = toks.next().unwrap();
        let args: Vec<&str> = toks.collect();
        let arity = |n: usize| -> Result<(), VstreamErrorKind> {
            if args.len() == n {
                Ok(())
            } else {
                Err(VstreamErrorKind::Syntax(format!(
                    "{directive} takes {n} argument(s), found {}",
                    args.len()
                )))
            }
        };
        match directive {
            ".pc" => {
                arity(1)?;
                self.next_pc = parse_u64(args[0])?;
                Ok(None)
            }
            ".scalar" => {
                arity(1)?;
                self.pending_scalar += parse_u32(args[0])? as u64;
                Ok(None)
            }
            ".phase" => {
                arity(1)?;
                self.phase = parse_u32(args[0])?;
                Ok(Some(self.item(ItemKind::PhaseMark(self.phase))))
            }
            ".window" => {
                arity(1)?;
                self.window = parse_u32(args[0])?;
                Ok(Some(self.item(ItemKind::WindowMark(self.window))))
            }
            ".xreg" => {
                arity(2)?;
                let reg = isa::parse_xreg(args[0]).ok_or_else(|| {
                    VstreamErrorKind::Syntax(format!("expected scalar register, found `{}`", args[0]))
                })?;
                let value = parse_u64(args[1])?;
                Ok(Some(self.item(ItemKind::SetXReg { reg, value })))
            }
            ".freg" => {
                arity(2)?;
                let reg = isa::parse_freg(args[0]).ok_or_else(|| {
                    VstreamErrorKind::Syntax(format!(
                        "expected floating-point register, found `{}`",
                        args[0]
                    ))
                })?;
                let value = parse_f64(args[1])?;
                Ok(Some(self.item(ItemKind::SetFReg { reg, value })))
            }
            ".memf64" | ".memu64" => {
                if args.len() < 2 {
                    return Err(VstreamErrorKind::Syntax(format!(
                        "{directive} takes an address and at least one value"
                    )));
                }
                let addr = parse_u64(args[0])?;
                let kind = if directive == ".memf64" {
                    ItemKind::InitMemF64 {
                        addr,
                        values: args[1..].iter().map(|t| parse_f64(t)).collect::<Result<_, _>>()?,
                    }
                } else {
                    ItemKind::InitMemU64 {
                        addr,
                        values: args[1..].iter().map(|t| parse_u64(t)).collect::<Result<_, _>>()?,
                    }
                };
                Ok(Some(self.item(kind)))
            }
            other => Err(VstreamErrorKind::UnknownDirective(other.to_string())),
        }
    }
}

impl Iterator for StreamReader<'_> {
    type Item = Result<StreamItem, VstreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while let Some((idx, raw)) = self.lines.next() {
            match self.line(raw) {
                Ok(Some(item)) => return Some(Ok(item)),
                Ok(None) => continue,
                Err(kind) => {
                    self.failed = true;
                    return Some(Err(VstreamError {
                        line: idx + 1,
                        kind,
                    }));
                }
            }
        }
        None
    }
}

pub fn parse_vstream(text: &str) -> Result<Vec<StreamItem>, VstreamError> {
    StreamReader::new(text).collect()
}

/// Serializes items so that `parse_vstream` reproduces them exactly.
pub fn write_vstream(items: &[StreamItem]) -> String {
    let mut out = String::new();
    let mut next_pc = DEFAULT_PC;
    let mut phase = 0u32;
    let mut window = 0u32;
    for item in items {
        match &item.kind {
            ItemKind::PhaseMark(p) => {
                let _ = writeln!(out, ".phase {p}");
                phase = *p;
                continue;
            }
            ItemKind::WindowMark(w) => {
                let _ = writeln!(out, ".window {w}");
                window = *w;
                continue;
            }
            _ => {}
        }
        if item.phase != phase {
            let _ = writeln!(out, ".phase {}", item.phase);
            phase = item.phase;
        }
        if item.window != window {
            let _ = writeln!(out, ".window {}", item.window);
            window = item.window;
        }
        if item.pc != next_pc {
            let _ = writeln!(out, ".pc {:#x}", item.pc);
            next_pc = item.pc;
        }
        match &item.kind {
            ItemKind::Instruction(instr) => {
                if item.scalar_before > 0 {
                    let _ = writeln!(out, ".scalar {}", item.scalar_before);
                }
                let _ = writeln!(out, "{}", isa::disassemble(instr));
                next_pc = next_pc.wrapping_add(4);
            }
            ItemKind::SetXReg { reg, value } => {
                let _ = writeln!(out, ".xreg {reg} {value:#x}");
            }
            ItemKind::SetFReg { reg, value } => {
                let _ = writeln!(out, ".freg {reg} {value:?}");
            }
            ItemKind::InitMemF64 { addr, values } => {
                let _ = write!(out, ".memf64 {addr:#x}");
                for v in values {
                    let _ = write!(out, " {v:?}");
                }
                out.push('\n');
            }
            ItemKind::InitMemU64 { addr, values } => {
                let _ = write!(out, ".memu64 {addr:#x}");
                for v in values {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
            ItemKind::PhaseMark(_) | ItemKind::WindowMark(_) => unreachable!(),
        }
    }
    out
}

/// Half-open byte range `[base, base + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AddrRange {
    pub base: u64,
    pub len: u64,
}

impl AddrRange {
    pub fn end(&self) -> u64 {
        self.base + self.len
    }

    pub fn overlaps(&self, other: &AddrRange) -> bool {
        self.base < other.end() && other.base < self.end()
    }
}

impl fmt::Display for AddrRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}+{:#x}", self.base, self.len)
    }
}

/// One emulated vector instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub seq: u64,
    pub pc: u64,
    pub phase: u32,
    pub window: u32,
    pub scalar_before: u64,
    pub instr: Instruction,
    pub vl: u64,
    pub sew_bits: u32,
    pub addresses: Vec<AddrRange>,
}

impl TraceRecord {
    pub fn category(&self) -> Category {
        self.instr.category()
    }

    pub fn mnemonic_text(&self) -> String {
        isa::disassemble(&self.instr)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceFormatError {
    pub line: usize,
    pub message: String,
}

pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * records.len() + 32);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    let mut window = 0;
    for r in records {
        if r.window != window {
            let _ = writeln!(out, "#window {}", r.window);
            window = r.window;
        }
        let ranges = r
            .addresses
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "{}:{:#x}:{}:{}:{}:{}:{}:{}:{}",
            r.seq,
            r.pc,
            r.phase,
            r.scalar_before,
            r.vl,
            r.sew_bits,
            r.category(),
            r.mnemonic_text(),
            ranges
        );
    }
    out
}

fn parse_range(tok: &str) -> Option<AddrRange> {
    let (base, len) = tok.split_once('+')?;
    let hex = |s: &str| u64::from_str_radix(s.strip_prefix("0x")?, 16).ok();
    Some(AddrRange {
        base: hex(base)?,
        len: hex(len)?,
    })
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>, TraceFormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => {
            return Err(TraceFormatError {
                line: 1,
                message: format!("missing `{TRACE_HEADER}` header"),
            })
        }
    }
    let mut window = 0;
    let mut records: Vec<TraceRecord> = Vec::new();
    for (idx, line) in lines {
        let err = |message: String| TraceFormatError {
            line: idx + 1,
            message,
        };
        if let Some(rest) = line.strip_prefix("#window ") {
            window = rest
                .trim()
                .parse()
                .map_err(|_| err(format!("bad window id `{rest}`")))?;
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(':').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<u64, TraceFormatError> {
            parse_u64(fields[i]).map_err(|e| err(e.to_string()))
        };
        let seq = num(0)?;
        let pc = num(1)?;
        let phase = u32::try_from(num(2)?).map_err(|_| err("phase out of range".into()))?;
        let scalar_before = num(3)?;
        let vl = num(4)?;
        let sew_bits = u32::try_from(num(5)?).map_err(|_| err("sew out of range".into()))?;
        let category = Category::parse(fields[6])
            .ok_or_else(|| err(format!("unknown category `{}`", fields[6])))?;
        let instr = isa::parse_instruction(fields[7]).map_err(|e| err(e.to_string()))?;
        if instr.category() != category {
            return Err(err(format!(
                "category {category} does not match `{}`",
                fields[7]
            )));
        }
        let addresses = if fields[8].is_empty() {
            Vec::new()
        } else {
            fields[8]
                .split(',')
                .map(|t| parse_range(t).ok_or_else(|| err(format!("bad address range `{t}`"))))
                .collect::<Result<_, _>>()?
        };
        if let Some(prev) = records.last() {
            if seq != prev.seq + 1 {
                return Err(err(format!("seq {seq} does not follow {}", prev.seq)));
            }
        }
        records.push(TraceRecord {
            seq,
            pc,
            phase,
            window,
            scalar_before,
            instr,
            vl,
            sew_bits,
            addresses,
        });
    }
    Ok(records)
}
