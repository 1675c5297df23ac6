//! The supported RVV 1.0 instruction subset.
//!
//! Instructions are held in a normalized form: a [`Mnemonic`] plus an
//! [`Operands`] value whose shape is fixed by the mnemonic. Text goes in
//! through [`parse_instruction`] and out through [`disassemble`]; binary
//! words go through [`decode_word`] and [`encode`].

mod asm;
mod encoding;

use std::fmt;

use thiserror::Error;

pub use asm::{disassemble, parse_freg, parse_instruction, parse_xreg};
pub use encoding::{decode_word, encode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unsupported mnemonic `{0}`")]
    UnsupportedMnemonic(String),
    #[error("unsupported instruction word {0:#010x}")]
    UnsupportedInstruction(u32),
    #[error("operands do not match the format of {0}")]
    OperandShape(Mnemonic),
    #[error("immediate {imm} out of range for {mnemonic}")]
    ImmediateRange { mnemonic: Mnemonic, imm: i64 },
}

macro_rules! reg_newtype {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(u8);

        impl $name {
            pub fn new(index: u8) -> Option<Self> {
                (index < 32).then_some(Self(index))
            }

            pub fn index(self) -> usize {
                self.0 as usize
            }

            pub(crate) fn bits(self) -> u32 {
                self.0 as u32
            }

            pub(crate) fn from_field(field: u32) -> Self {
                Self((field & 31) as u8)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }
    };
}

reg_newtype!(VReg, "v");
reg_newtype!(XReg, "x");
reg_newtype!(FReg, "f");

impl XReg {
    pub const ZERO: XReg = XReg(0);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Config,
    MemUnit,
    MemStrided,
    MemIndexed,
    ArithInt,
    ArithFp,
    Perm,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Config,
        Category::MemUnit,
        Category::MemStrided,
        Category::MemIndexed,
        Category::ArithInt,
        Category::ArithFp,
        Category::Perm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "CONFIG",
            Category::MemUnit => "MEM_UNIT",
            Category::MemStrided => "MEM_STRIDED",
            Category::MemIndexed => "MEM_INDEXED",
            Category::ArithInt => "ARITH_INT",
            Category::ArithFp => "ARITH_FP",
            Category::Perm => "PERM",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Stable numeric id (1-based), used as an event value in Paraver exports.
    pub fn id(self) -> u64 {
        Category::ALL.iter().position(|c| *c == self).unwrap() as u64 + 1
    }

    pub fn is_memory(self) -> bool {
        matches!(
            self,
            Category::MemUnit | Category::MemStrided | Category::MemIndexed
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operand layout shared by a group of mnemonics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    SetVli,
    SetVl,
    UnitStride,
    Strided,
    Indexed,
    Vv,
    Vx,
    Vi,
    Vf,
    V,
}

macro_rules! mnemonics {
    ($($variant:ident => $text:literal, $cat:ident, $fmt:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Mnemonic {
            $($variant,)*
        }

        impl Mnemonic {
            pub const ALL: [Mnemonic; 20] = [$(Mnemonic::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Mnemonic::$variant => $text,)*
                }
            }

            pub fn category(self) -> Category {
                match self {
                    $(Mnemonic::$variant => Category::$cat,)*
                }
            }

            pub fn format(self) -> Format {
                match self {
                    $(Mnemonic::$variant => Format::$fmt,)*
                }
            }
        }
    };
}

mnemonics! {
    Vsetvli => "vsetvli", Config, SetVli;
    Vsetvl => "vsetvl", Config, SetVl;
    Vle64 => "vle64.v", MemUnit, UnitStride;
    Vse64 => "vse64.v", MemUnit, UnitStride;
    Vlse64 => "vlse64.v", MemStrided, Strided;
    Vsse64 => "vsse64.v", MemStrided, Strided;
    Vluxei64 => "vluxei64.v", MemIndexed, Indexed;
    Vsuxei64 => "vsuxei64.v", MemIndexed, Indexed;
    VaddVv => "vadd.vv", ArithInt, Vv;
    VaddVx => "vadd.vx", ArithInt, Vx;
    VmulVx => "vmul.vx", ArithInt, Vx;
    VsllVi => "vsll.vi", ArithInt, Vi;
    VandVx => "vand.vx", ArithInt, Vx;
    VidV => "vid.v", ArithInt, V;
    VfaddVv => "vfadd.vv", ArithFp, Vv;
    VfsubVv => "vfsub.vv", ArithFp, Vv;
    VfmulVv => "vfmul.vv", ArithFp, Vv;
    VfmaccVv => "vfmacc.vv", ArithFp, Vv;
    VfmvVF => "vfmv.v.f", ArithFp, Vf;
    VrgatherVv => "vrgather.vv", Perm, Vv;
}

impl Mnemonic {
    /// Case-insensitive lookup of a mnemonic token.
    pub fn lookup(token: &str) -> Option<Mnemonic> {
        Mnemonic::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(token))
    }

    /// Stable numeric id (1-based) in subset order.
    pub fn id(self) -> u64 {
        Mnemonic::ALL.iter().position(|m| *m == self).unwrap() as u64 + 1
    }

    pub fn is_store(self) -> bool {
        matches!(self, Mnemonic::Vse64 | Mnemonic::Vsse64 | Mnemonic::Vsuxei64)
    }

    pub fn is_load(self) -> bool {
        matches!(self, Mnemonic::Vle64 | Mnemonic::Vlse64 | Mnemonic::Vluxei64)
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sew {
    E8,
    E16,
    E32,
    E64,
}

impl Sew {
    pub fn bits(self) -> u32 {
        match self {
            Sew::E8 => 8,
            Sew::E16 => 16,
            Sew::E32 => 32,
            Sew::E64 => 64,
        }
    }

    fn field(self) -> u32 {
        match self {
            Sew::E8 => 0,
            Sew::E16 => 1,
            Sew::E32 => 2,
            Sew::E64 => 3,
        }
    }

    fn from_field(field: u32) -> Option<Sew> {
        Some(match field {
            0 => Sew::E8,
            1 => Sew::E16,
            2 => Sew::E32,
            3 => Sew::E64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lmul {
    Mf8,
    Mf4,
    Mf2,
    M1,
    M2,
    M4,
    M8,
}

impl Lmul {
    pub fn as_str(self) -> &'static str {
        match self {
            Lmul::Mf8 => "mf8",
            Lmul::Mf4 => "mf4",
            Lmul::Mf2 => "mf2",
            Lmul::M1 => "m1",
            Lmul::M2 => "m2",
            Lmul::M4 => "m4",
            Lmul::M8 => "m8",
        }
    }

    fn field(self) -> u32 {
        match self {
            Lmul::M1 => 0,
            Lmul::M2 => 1,
            Lmul::M4 => 2,
            Lmul::M8 => 3,
            Lmul::Mf8 => 5,
            Lmul::Mf4 => 6,
            Lmul::Mf2 => 7,
        }
    }

    fn from_field(field: u32) -> Option<Lmul> {
        Some(match field {
            0 => Lmul::M1,
            1 => Lmul::M2,
            2 => Lmul::M4,
            3 => Lmul::M8,
            5 => Lmul::Mf8,
            6 => Lmul::Mf4,
            7 => Lmul::Mf2,
            _ => return None,
        })
    }

    fn parse(token: &str) -> Option<Lmul> {
        [
            Lmul::Mf8,
            Lmul::Mf4,
            Lmul::Mf2,
            Lmul::M1,
            Lmul::M2,
            Lmul::M4,
            Lmul::M8,
        ]
        .into_iter()
        .find(|l| l.as_str().eq_ignore_ascii_case(token))
    }
}

/// The `vtypei` immediate of `vsetvli`, exactly as written or encoded.
///
/// Any legal RVV 1.0 combination is representable so text and binary
/// round-trip; the emulator accepts only e64/m1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VtypeImm {
    pub sew: Sew,
    pub lmul: Lmul,
    pub tail_agnostic: bool,
    pub mask_agnostic: bool,
}

impl VtypeImm {
    pub const E64_M1: VtypeImm = VtypeImm {
        sew: Sew::E64,
        lmul: Lmul::M1,
        tail_agnostic: false,
        mask_agnostic: false,
    };

    pub fn to_bits(self) -> u32 {
        self.lmul.field()
            | (self.sew.field() << 3)
            | ((self.tail_agnostic as u32) << 6)
            | ((self.mask_agnostic as u32) << 7)
    }

    /// Decodes an 11-bit zimm; reserved encodings yield `None`.
    pub fn from_bits(bits: u32) -> Option<VtypeImm> {
        if bits >> 8 != 0 {
            return None;
        }
        Some(VtypeImm {
            lmul: Lmul::from_field(bits & 7)?,
            sew: Sew::from_field((bits >> 3) & 7)?,
            tail_agnostic: bits & (1 << 6) != 0,
            mask_agnostic: bits & (1 << 7) != 0,
        })
    }
}

/// Active vector type as seen by the emulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vtype {
    pub sew_bits: u32,
    pub lmul: u32,
    pub vill: bool,
}

impl Vtype {
    pub const E64_M1: Vtype = Vtype {
        sew_bits: 64,
        lmul: 1,
        vill: false,
    };

    pub const ILLEGAL: Vtype = Vtype {
        sew_bits: 0,
        lmul: 0,
        vill: true,
    };

    pub fn vlmax(self, vlen_bits: u64) -> u64 {
        if self.vill {
            0
        } else {
            vlen_bits / self.sew_bits as u64 * self.lmul as u64
        }
    }
}

/// Operand fields, one variant per [`Format`].
///
/// For memory formats `vreg` is `vd` on loads and `vs3` on stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operands {
    SetVli { rd: XReg, rs1: XReg, vtype: VtypeImm },
    SetVl { rd: XReg, rs1: XReg, rs2: XReg },
    UnitStride { vreg: VReg, rs1: XReg },
    Strided { vreg: VReg, rs1: XReg, rs2: XReg },
    Indexed { vreg: VReg, rs1: XReg, vs2: VReg },
    Vv { vd: VReg, vs2: VReg, vs1: VReg },
    Vx { vd: VReg, vs2: VReg, rs1: XReg },
    Vi { vd: VReg, vs2: VReg, imm: i8 },
    Vf { vd: VReg, fs1: FReg },
    V { vd: VReg },
}

impl Operands {
    pub fn format(&self) -> Format {
        match self {
            Operands::SetVli { .. } => Format::SetVli,
            Operands::SetVl { .. } => Format::SetVl,
            Operands::UnitStride { .. } => Format::UnitStride,
            Operands::Strided { .. } => Format::Strided,
            Operands::Indexed { .. } => Format::Indexed,
            Operands::Vv { .. } => Format::Vv,
            Operands::Vx { .. } => Format::Vx,
            Operands::Vi { .. } => Format::Vi,
            Operands::Vf { .. } => Format::Vf,
            Operands::V { .. } => Format::V,
        }
    }
}

/// A decoded instruction from the supported subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    mnemonic: Mnemonic,
    operands: Operands,
}

/// Shift amounts for `vsll.vi` are a 5-bit unsigned immediate.
pub const SHIFT_IMM_MAX: i8 = 31;

impl Instruction {
    pub fn new(mnemonic: Mnemonic, operands: Operands) -> Result<Self, IsaError> {
        if mnemonic.format() != operands.format() {
            return Err(IsaError::OperandShape(mnemonic));
        }
        if let Operands::Vi { imm, .. } = operands {
            if !(0..=SHIFT_IMM_MAX).contains(&imm) {
                return Err(IsaError::ImmediateRange {
                    mnemonic,
                    imm: imm as i64,
                });
            }
        }
        Ok(Instruction { mnemonic, operands })
    }

    pub fn mnemonic(&self) -> Mnemonic {
        self.mnemonic
    }

    pub fn operands(&self) -> &Operands {
        &self.operands
    }

    pub fn category(&self) -> Category {
        self.mnemonic.category()
    }

    /// Destination vector register, if the instruction writes one.
    pub fn vd(&self) -> Option<VReg> {
        match self.operands {
            Operands::UnitStride { vreg, .. }
            | Operands::Strided { vreg, .. }
            | Operands::Indexed { vreg, .. }
                if self.mnemonic.is_load() =>
            {
                Some(vreg)
            }
            Operands::Vv { vd, .. }
            | Operands::Vx { vd, .. }
            | Operands::Vi { vd, .. }
            | Operands::Vf { vd, .. }
            | Operands::V { vd } => Some(vd),
            _ => None,
        }
    }

    /// Store data register.
    pub fn vs3(&self) -> Option<VReg> {
        match self.operands {
            Operands::UnitStride { vreg, .. }
            | Operands::Strided { vreg, .. }
            | Operands::Indexed { vreg, .. }
                if self.mnemonic.is_store() =>
            {
                Some(vreg)
            }
            _ => None,
        }
    }

    pub fn vs1(&self) -> Option<VReg> {
        match self.operands {
            Operands::Vv { vs1, .. } => Some(vs1),
            _ => None,
        }
    }

    pub fn vs2(&self) -> Option<VReg> {
        match self.operands {
            Operands::Vv { vs2, .. }
            | Operands::Vx { vs2, .. }
            | Operands::Vi { vs2, .. }
            | Operands::Indexed { vs2, .. } => Some(vs2),
            _ => None,
        }
    }

    pub fn rd(&self) -> Option<XReg> {
        match self.operands {
            Operands::SetVli { rd, .. } | Operands::SetVl { rd, .. } => Some(rd),
            _ => None,
        }
    }

    pub fn rs1(&self) -> Option<XReg> {
        match self.operands {
            Operands::SetVli { rs1, .. }
            | Operands::SetVl { rs1, .. }
            | Operands::UnitStride { rs1, .. }
            | Operands::Strided { rs1, .. }
            | Operands::Indexed { rs1, .. }
            | Operands::Vx { rs1, .. } => Some(rs1),
            _ => None,
        }
    }

    pub fn rs2(&self) -> Option<XReg> {
        match self.operands {
            Operands::SetVl { rs2, .. } | Operands::Strided { rs2, .. } => Some(rs2),
            _ => None,
        }
    }

    pub fn fs1(&self) -> Option<FReg> {
        match self.operands {
            Operands::Vf { fs1, .. } => Some(fs1),
            _ => None,
        }
    }

    pub fn imm(&self) -> Option<i64> {
        match self.operands {
            Operands::Vi { imm, .. } => Some(imm as i64),
            _ => None,
        }
    }

    pub fn vtype(&self) -> Option<VtypeImm> {
        match self.operands {
            Operands::SetVli { vtype, .. } => Some(vtype),
            _ => None,
        }
    }

    /// Vector registers read by this instruction, including the
    /// accumulator of `vfmacc.vv`.
    pub fn vector_sources(&self) -> Vec<VReg> {
        let mut regs: Vec<VReg> = [self.vs1(), self.vs2(), self.vs3()]
            .into_iter()
            .flatten()
            .collect();
        if self.mnemonic == Mnemonic::VfmaccVv {
            regs.extend(self.vd());
        }
        regs
    }

    /// Scalar integer registers read by this instruction (x0 excluded).
    pub fn scalar_sources(&self) -> Vec<XReg> {
        [self.rs1(), self.rs2()]
            .into_iter()
            .flatten()
            .filter(|r| !r.is_zero())
            .collect()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&disassemble(self))
    }
}
