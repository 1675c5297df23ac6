//! Functional execution of a VSTREAM.
//!
//! Values are bit-accurate, timing is not modeled. Destination tails
//! (elements at index >= vl) are left undisturbed, memory is sparse and
//! reads as zero until written.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::MachineConfig;
use crate::isa::{FReg, Instruction, Mnemonic, Operands, VReg, Vtype, VtypeImm, XReg, Lmul};
use crate::vstream::{AddrRange, ItemKind, StreamItem, TraceRecord};

const PAGE_BITS: u32 = 12;
const PAGE_SIZE: usize = 1 << PAGE_BITS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmuError {
    #[error("unsupported vtype e{sew}/{lmul} (only e64/m1 is implemented)")]
    UnsupportedVtype { sew: u32, lmul: String },
    #[error("vector instruction executed with vill set")]
    IllegalVtype,
    #[error("out-of-bounds access at {addr:#x} (element {element})")]
    OutOfBoundsAccess { addr: u64, element: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("execution stopped at seq {seq}: {error}")]
pub struct RunError {
    /// Number of vector instructions completed before the fault.
    pub seq: u64,
    pub error: EmuError,
}

/// Sparse, zero-initialized, byte-addressable memory bounded by `limit`.
#[derive(Debug, Clone)]
pub struct Memory {
    limit: u64,
    pages: BTreeMap<u64, Box<[u8]>>,
}

impl Memory {
    pub fn new(limit: u64) -> Self {
        Memory {
            limit,
            pages: BTreeMap::new(),
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn in_bounds(&self, addr: u64, len: u64) -> bool {
        addr.checked_add(len).is_some_and(|end| end <= self.limit)
    }

    fn byte(&self, addr: u64) -> u8 {
        self.pages
            .get(&(addr >> PAGE_BITS))
            .map_or(0, |p| p[(addr as usize) & (PAGE_SIZE - 1)])
    }

    fn set_byte(&mut self, addr: u64, value: u8) {
        let page = self
            .pages
            .entry(addr >> PAGE_BITS)
            .or_insert_with(|| vec![0u8; PAGE_SIZE].into_boxed_slice());
        page[(addr as usize) & (PAGE_SIZE - 1)] = value;
    }

    /// Unchecked read; callers validate bounds first.
    pub fn read_u64(&self, addr: u64) -> u64 {
        let mut bytes = [0u8; 8];
        for (i, b) in bytes.iter_mut().enumerate() {
            *b = self.byte(addr + i as u64);
        }
        u64::from_le_bytes(bytes)
    }

    pub fn write_u64(&mut self, addr: u64, value: u64) {
        for (i, b) in value.to_le_bytes().into_iter().enumerate() {
            self.set_byte(addr + i as u64, b);
        }
    }

    pub fn read_f64(&self, addr: u64) -> f64 {
        f64::from_bits(self.read_u64(addr))
    }

    pub fn read_f64s(&self, addr: u64, count: usize) -> Vec<f64> {
        (0..count as u64).map(|i| self.read_f64(addr + 8 * i)).collect()
    }

    /// Two memories are equal when every byte reads the same, regardless of
    /// which pages happen to be materialized.
    pub fn same_contents(&self, other: &Memory) -> bool {
        let zero = [0u8; PAGE_SIZE];
        let keys: std::collections::BTreeSet<_> =
            self.pages.keys().chain(other.pages.keys()).collect();
        keys.into_iter().all(|k| {
            let a = self.pages.get(k).map_or(&zero[..], |p| &p[..]);
            let b = other.pages.get(k).map_or(&zero[..], |p| &p[..]);
            a == b
        })
    }
}

/// Architectural state of one hart's vector context.
#[derive(Debug, Clone)]
pub struct MachineState {
    xregs: [u64; 32],
    fregs: [u64; 32],
    vregs: Vec<u64>,
    vlmax_e64: usize,
    pub vl: u64,
    pub vtype: Vtype,
    pub memory: Memory,
}

impl MachineState {
    pub fn new(config: &MachineConfig) -> Self {
        let vlmax = config.vlmax_e64() as usize;
        MachineState {
            xregs: [0; 32],
            fregs: [0; 32],
            vregs: vec![0; 32 * vlmax],
            vlmax_e64: vlmax,
            vl: 0,
            vtype: Vtype::E64_M1,
            memory: Memory::new(config.memory_bytes),
        }
    }

    pub fn vlmax(&self) -> u64 {
        self.vlmax_e64 as u64
    }

    pub fn xreg(&self, r: XReg) -> u64 {
        if r.is_zero() {
            0
        } else {
            self.xregs[r.index()]
        }
    }

    pub fn set_xreg(&mut self, r: XReg, value: u64) {
        if !r.is_zero() {
            self.xregs[r.index()] = value;
        }
    }

    pub fn freg(&self, r: FReg) -> f64 {
        f64::from_bits(self.fregs[r.index()])
    }

    pub fn set_freg(&mut self, r: FReg, value: f64) {
        self.fregs[r.index()] = value.to_bits();
    }

    /// All elements of a vector register as raw 64-bit patterns.
    pub fn vreg(&self, r: VReg) -> &[u64] {
        let base = r.index() * self.vlmax_e64;
        &self.vregs[base..base + self.vlmax_e64]
    }

    pub fn vreg_mut(&mut self, r: VReg) -> &mut [u64] {
        let base = r.index() * self.vlmax_e64;
        &mut self.vregs[base..base + self.vlmax_e64]
    }

    pub fn vreg_f64(&self, r: VReg) -> Vec<f64> {
        self.vreg(r).iter().map(|b| f64::from_bits(*b)).collect()
    }

    /// Bit-identical registers, vector configuration and memory contents.
    pub fn same_architectural_state(&self, other: &MachineState) -> bool {
        self.xregs == other.xregs
            && self.fregs == other.fregs
            && self.vregs == other.vregs
            && self.vl == other.vl
            && self.vtype == other.vtype
            && self.memory.same_contents(&other.memory)
    }
}

fn requested_vtype(imm: VtypeImm) -> Vtype {
    let lmul = match imm.lmul {
        Lmul::M1 => 1,
        Lmul::M2 => 2,
        Lmul::M4 => 4,
        Lmul::M8 => 8,
        // fractional LMUL marked with 0; never accepted
        _ => 0,
    };
    Vtype {
        sew_bits: imm.sew.bits(),
        lmul,
        vill: false,
    }
}

fn lmul_label(imm: VtypeImm) -> String {
    imm.lmul.as_str().to_string()
}

/// Sets vl = min(avl, VLMAX) for a supported vtype. Unsupported requests set
/// vill, zero vl, and fail.
pub fn apply_vsetvli(state: &mut MachineState, avl: u64, req: Vtype) -> Result<u64, EmuError> {
    if req.vill || req.sew_bits != 64 || req.lmul != 1 {
        state.vtype = Vtype::ILLEGAL;
        state.vl = 0;
        return Err(EmuError::UnsupportedVtype {
            sew: req.sew_bits,
            lmul: match req.lmul {
                0 => "fractional".to_string(),
                n => format!("m{n}"),
            },
        });
    }
    state.vtype = req;
    state.vl = avl.min(req.vlmax(state.vlmax_e64 as u64 * 64));
    Ok(state.vl)
}

fn coalesce(addrs: impl Iterator<Item = u64>) -> Vec<AddrRange> {
    let mut out: Vec<AddrRange> = Vec::new();
    for a in addrs {
        match out.last_mut() {
            Some(last) if last.end() == a => last.len += 8,
            _ => out.push(AddrRange { base: a, len: 8 }),
        }
    }
    out
}

/// Drives a [`MachineState`] through stream items and numbers the records.
pub struct Emulator {
    state: MachineState,
    next_seq: u64,
}

impl Emulator {
    pub fn new(config: &MachineConfig) -> Self {
        Emulator {
            state: MachineState::new(config),
            next_seq: 0,
        }
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn into_state(self) -> MachineState {
        self.state
    }

    pub fn executed(&self) -> u64 {
        self.next_seq
    }

    /// Applies one item. Directives return `None`; instructions return the
    /// record of their execution.
    pub fn step(&mut self, item: &StreamItem) -> Result<Option<TraceRecord>, EmuError> {
        let st = &mut self.state;
        match &item.kind {
            ItemKind::Instruction(instr) => {
                let (vl, addresses) = execute(st, instr)?;
                let record = TraceRecord {
                    seq: self.next_seq,
                    pc: item.pc,
                    phase: item.phase,
                    window: item.window,
                    scalar_before: item.scalar_before,
                    instr: *instr,
                    vl,
                    sew_bits: st.vtype.sew_bits,
                    addresses,
                };
                self.next_seq += 1;
                Ok(Some(record))
            }
            ItemKind::SetXReg { reg, value } => {
                st.set_xreg(*reg, *value);
                Ok(None)
            }
            ItemKind::SetFReg { reg, value } => {
                st.set_freg(*reg, *value);
                Ok(None)
            }
            ItemKind::InitMemF64 { addr, values } => {
                init_memory(st, *addr, values.iter().map(|v| v.to_bits()).collect())?;
                Ok(None)
            }
            ItemKind::InitMemU64 { addr, values } => {
                init_memory(st, *addr, values.clone())?;
                Ok(None)
            }
            ItemKind::PhaseMark(_) | ItemKind::WindowMark(_) => Ok(None),
        }
    }
}

fn init_memory(st: &mut MachineState, addr: u64, words: Vec<u64>) -> Result<(), EmuError> {
    for (i, _) in words.iter().enumerate() {
        let a = addr.wrapping_add(8 * i as u64);
        if !st.memory.in_bounds(a, 8) {
            return Err(EmuError::OutOfBoundsAccess {
                addr: a,
                element: i as u64,
            });
        }
    }
    for (i, w) in words.into_iter().enumerate() {
        st.memory.write_u64(addr + 8 * i as u64, w);
    }
    Ok(())
}

fn check_bounds(st: &MachineState, addrs: &[u64]) -> Result<(), EmuError> {
    match addrs.iter().position(|a| !st.memory.in_bounds(*a, 8)) {
        Some(i) => Err(EmuError::OutOfBoundsAccess {
            addr: addrs[i],
            element: i as u64,
        }),
        None => Ok(()),
    }
}

fn element_addresses(st: &MachineState, instr: &Instruction, vl: usize) -> Vec<u64> {
    match *instr.operands() {
        Operands::UnitStride { rs1, .. } => {
            let base = st.xreg(rs1);
            (0..vl as u64).map(|i| base.wrapping_add(8 * i)).collect()
        }
        Operands::Strided { rs1, rs2, .. } => {
            let base = st.xreg(rs1);
            let stride = st.xreg(rs2);
            (0..vl as u64)
                .map(|i| base.wrapping_add(stride.wrapping_mul(i)))
                .collect()
        }
        Operands::Indexed { rs1, vs2, .. } => {
            let base = st.xreg(rs1);
            st.vreg(vs2)[..vl]
                .iter()
                .map(|off| base.wrapping_add(*off))
                .collect()
        }
        _ => Vec::new(),
    }
}

fn fp(bits: u64) -> f64 {
    f64::from_bits(bits)
}

/// Executes one instruction, returning the vl it ran with and the memory
/// ranges it touched.
fn execute(st: &mut MachineState, instr: &Instruction) -> Result<(u64, Vec<AddrRange>), EmuError> {
    let m = instr.mnemonic();
    match *instr.operands() {
        Operands::SetVli { rd, rs1, vtype } => {
            let avl = if !rs1.is_zero() {
                st.xreg(rs1)
            } else if !rd.is_zero() {
                u64::MAX
            } else {
                st.vl
            };
            let req = requested_vtype(vtype);
            let vl = apply_vsetvli(st, avl, req).map_err(|e| match e {
                EmuError::UnsupportedVtype { sew, .. } => EmuError::UnsupportedVtype {
                    sew,
                    lmul: lmul_label(vtype),
                },
                other => other,
            })?;
            st.set_xreg(rd, vl);
            return Ok((vl, Vec::new()));
        }
        Operands::SetVl { rd, rs1, rs2 } => {
            let raw = st.xreg(rs2);
            let req = if raw >> 8 != 0 {
                Vtype::ILLEGAL
            } else {
                VtypeImm::from_bits(raw as u32)
                    .map(requested_vtype)
                    .unwrap_or(Vtype::ILLEGAL)
            };
            let avl = if !rs1.is_zero() {
                st.xreg(rs1)
            } else if !rd.is_zero() {
                u64::MAX
            } else {
                st.vl
            };
            let vl = apply_vsetvli(st, avl, req)?;
            st.set_xreg(rd, vl);
            return Ok((vl, Vec::new()));
        }
        _ => {}
    }

    if st.vtype.vill {
        return Err(EmuError::IllegalVtype);
    }
    let vl = st.vl as usize;

    if instr.category().is_memory() {
        let addrs = element_addresses(st, instr, vl);
        check_bounds(st, &addrs)?;
        let ranges = if vl == 0 {
            let base = instr.rs1().map_or(0, |r| st.xreg(r));
            vec![AddrRange { base, len: 0 }]
        } else {
            coalesce(addrs.iter().copied())
        };
        if m.is_load() {
            let values: Vec<u64> = addrs.iter().map(|a| st.memory.read_u64(*a)).collect();
            let vd = instr.vd().expect("loads have vd");
            st.vreg_mut(vd)[..vl].copy_from_slice(&values);
        } else {
            let data = st.vreg(instr.vs3().expect("stores have vs3"))[..vl].to_vec();
            for (a, v) in addrs.iter().zip(data) {
                st.memory.write_u64(*a, v);
            }
        }
        return Ok((vl as u64, ranges));
    }

    let vd = instr.vd().expect("arithmetic writes vd");
    let src = |r: Option<VReg>| -> Vec<u64> { r.map_or_else(Vec::new, |r| st.vreg(r)[..vl].to_vec()) };
    let a = src(instr.vs2());
    let b = src(instr.vs1());
    let result: Vec<u64> = match *instr.operands() {
        Operands::Vv { .. } => match m {
            Mnemonic::VaddVv => a.iter().zip(&b).map(|(x, y)| x.wrapping_add(*y)).collect(),
            Mnemonic::VfaddVv => a.iter().zip(&b).map(|(x, y)| (fp(*x) + fp(*y)).to_bits()).collect(),
            Mnemonic::VfsubVv => a.iter().zip(&b).map(|(x, y)| (fp(*x) - fp(*y)).to_bits()).collect(),
            Mnemonic::VfmulVv => a.iter().zip(&b).map(|(x, y)| (fp(*x) * fp(*y)).to_bits()).collect(),
            Mnemonic::VfmaccVv => {
                let acc = &st.vreg(vd)[..vl];
                b.iter()
                    .zip(&a)
                    .zip(acc)
                    .map(|((x, y), z)| fp(*x).mul_add(fp(*y), fp(*z)).to_bits())
                    .collect()
            }
            Mnemonic::VrgatherVv => {
                let table = instr.vs2().map(|r| st.vreg(r)).unwrap();
                b.iter()
                    .map(|idx| if *idx >= vl as u64 { 0 } else { table[*idx as usize] })
                    .collect()
            }
            other => unreachable!("{other} is not a .vv form"),
        },
        Operands::Vx { rs1, .. } => {
            let s = st.xreg(rs1);
            match m {
                Mnemonic::VaddVx => a.iter().map(|x| x.wrapping_add(s)).collect(),
                Mnemonic::VmulVx => a.iter().map(|x| x.wrapping_mul(s)).collect(),
                Mnemonic::VandVx => a.iter().map(|x| x & s).collect(),
                other => unreachable!("{other} is not a .vx form"),
            }
        }
        Operands::Vi { imm, .. } => a.iter().map(|x| x << (imm as u32 & 63)).collect(),
        Operands::Vf { fs1, .. } => vec![st.freg(fs1).to_bits(); vl],
        Operands::V { .. } => (0..vl as u64).collect(),
        _ => unreachable!("memory and config handled above"),
    };
    st.vreg_mut(vd)[..vl].copy_from_slice(&result);
    Ok((vl as u64, Vec::new()))
}

/// Runs a whole stream from the initial state.
pub fn run(
    config: &MachineConfig,
    stream: &[StreamItem],
) -> Result<(MachineState, Vec<TraceRecord>), RunError> {
    let mut emu = Emulator::new(config);
    let mut trace = Vec::new();
    for item in stream {
        match emu.step(item) {
            Ok(Some(r)) => trace.push(r),
            Ok(None) => {}
            Err(error) => {
                return Err(RunError {
                    seq: emu.executed(),
                    error,
                })
            }
        }
    }
    Ok((emu.into_state(), trace))
}
