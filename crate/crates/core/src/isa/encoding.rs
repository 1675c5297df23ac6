//! RVV 1.0 binary encodings for the supported subset.

use super::{FReg, Instruction, IsaError, Mnemonic, Operands, VReg, VtypeImm, XReg};

const OP_V: u32 = 0x57;
const LOAD_FP: u32 = 0x07;
const STORE_FP: u32 = 0x27;

const OPIVV: u32 = 0b000;
const OPFVV: u32 = 0b001;
const OPMVV: u32 = 0b010;
const OPIVI: u32 = 0b011;
const OPIVX: u32 = 0b100;
const OPFVF: u32 = 0b101;
const OPMVX: u32 = 0b110;
const OPCFG: u32 = 0b111;

/// Width field for 64-bit vector element memory accesses.
const WIDTH_E64: u32 = 0b111;

const MOP_UNIT: u32 = 0b00;
const MOP_INDEXED_UNORDERED: u32 = 0b01;
const MOP_STRIDED: u32 = 0b10;

/// `vid.v` sits in the VMUNARY0 group, selected by vs1 = 0b10001.
const VMUNARY0_VID: u32 = 0b10001;

fn field(word: u32, lo: u32, width: u32) -> u32 {
    (word >> lo) & ((1 << width) - 1)
}

fn op_v(funct6: u32, vs2: u32, rs1: u32, funct3: u32, vd: u32) -> u32 {
    (funct6 << 26) | (1 << 25) | (vs2 << 20) | (rs1 << 15) | (funct3 << 12) | (vd << 7) | OP_V
}

fn mem(opcode: u32, mop: u32, rs2: u32, rs1: u32, vreg: u32) -> u32 {
    (mop << 26) | (1 << 25) | (rs2 << 20) | (rs1 << 15) | (WIDTH_E64 << 12) | (vreg << 7) | opcode
}

/// `(funct3, funct6)` for each OP-V arithmetic mnemonic.
fn arith_funct(m: Mnemonic) -> Option<(u32, u32)> {
    Some(match m {
        Mnemonic::VaddVv => (OPIVV, 0b000000),
        Mnemonic::VrgatherVv => (OPIVV, 0b001100),
        Mnemonic::VaddVx => (OPIVX, 0b000000),
        Mnemonic::VandVx => (OPIVX, 0b001001),
        Mnemonic::VsllVi => (OPIVI, 0b100101),
        Mnemonic::VmulVx => (OPMVX, 0b100101),
        Mnemonic::VidV => (OPMVV, 0b010100),
        Mnemonic::VfaddVv => (OPFVV, 0b000000),
        Mnemonic::VfsubVv => (OPFVV, 0b000010),
        Mnemonic::VfmulVv => (OPFVV, 0b100100),
        Mnemonic::VfmaccVv => (OPFVV, 0b101100),
        Mnemonic::VfmvVF => (OPFVF, 0b010111),
        _ => return None,
    })
}

/// Encodes an instruction as its 32-bit RVV 1.0 word (unmasked, vm = 1).
pub fn encode(instr: &Instruction) -> u32 {
    let m = instr.mnemonic();
    match *instr.operands() {
        Operands::SetVli { rd, rs1, vtype } => {
            (vtype.to_bits() << 20) | (rs1.bits() << 15) | (OPCFG << 12) | (rd.bits() << 7) | OP_V
        }
        Operands::SetVl { rd, rs1, rs2 } => {
            (0b1000000 << 25)
                | (rs2.bits() << 20)
                | (rs1.bits() << 15)
                | (OPCFG << 12)
                | (rd.bits() << 7)
                | OP_V
        }
        Operands::UnitStride { vreg, rs1 } => {
            let opcode = if m.is_store() { STORE_FP } else { LOAD_FP };
            mem(opcode, MOP_UNIT, 0, rs1.bits(), vreg.bits())
        }
        Operands::Strided { vreg, rs1, rs2 } => {
            let opcode = if m.is_store() { STORE_FP } else { LOAD_FP };
            mem(opcode, MOP_STRIDED, rs2.bits(), rs1.bits(), vreg.bits())
        }
        Operands::Indexed { vreg, rs1, vs2 } => {
            let opcode = if m.is_store() { STORE_FP } else { LOAD_FP };
            mem(opcode, MOP_INDEXED_UNORDERED, vs2.bits(), rs1.bits(), vreg.bits())
        }
        ops => {
            let (funct3, funct6) = arith_funct(m).expect("arithmetic mnemonic");
            let (vd, vs2, rs1) = match ops {
                Operands::Vv { vd, vs2, vs1 } => (vd, vs2.bits(), vs1.bits()),
                Operands::Vx { vd, vs2, rs1 } => (vd, vs2.bits(), rs1.bits()),
                Operands::Vi { vd, vs2, imm } => (vd, vs2.bits(), imm as u32 & 31),
                Operands::Vf { vd, fs1 } => (vd, 0, fs1.bits()),
                Operands::V { vd } => (vd, 0, VMUNARY0_VID),
                _ => unreachable!("memory and config formats handled above"),
            };
            op_v(funct6, vs2, rs1, funct3, vd.bits())
        }
    }
}

fn build(m: Mnemonic, ops: Operands) -> Instruction {
    Instruction::new(m, ops).expect("decoder builds well-shaped operands")
}

fn decode_memory(word: u32, store: bool) -> Option<Instruction> {
    let nf = field(word, 29, 3);
    let mew = field(word, 28, 1);
    let mop = field(word, 26, 2);
    let vm = field(word, 25, 1);
    let rs2 = field(word, 20, 5);
    let width = field(word, 12, 3);
    if nf != 0 || mew != 0 || vm != 1 || width != WIDTH_E64 {
        return None;
    }
    let vreg = VReg::from_field(field(word, 7, 5));
    let rs1 = XReg::from_field(field(word, 15, 5));
    Some(match mop {
        MOP_UNIT if rs2 == 0 => build(
            if store { Mnemonic::Vse64 } else { Mnemonic::Vle64 },
            Operands::UnitStride { vreg, rs1 },
        ),
        MOP_STRIDED => build(
            if store { Mnemonic::Vsse64 } else { Mnemonic::Vlse64 },
            Operands::Strided {
                vreg,
                rs1,
                rs2: XReg::from_field(rs2),
            },
        ),
        MOP_INDEXED_UNORDERED => build(
            if store { Mnemonic::Vsuxei64 } else { Mnemonic::Vluxei64 },
            Operands::Indexed {
                vreg,
                rs1,
                vs2: VReg::from_field(rs2),
            },
        ),
        _ => return None,
    })
}

fn decode_config(word: u32) -> Option<Instruction> {
    let rd = XReg::from_field(field(word, 7, 5));
    let rs1 = XReg::from_field(field(word, 15, 5));
    if field(word, 31, 1) == 0 {
        let vtype = VtypeImm::from_bits(field(word, 20, 11))?;
        Some(build(Mnemonic::Vsetvli, Operands::SetVli { rd, rs1, vtype }))
    } else if field(word, 25, 7) == 0b1000000 {
        let rs2 = XReg::from_field(field(word, 20, 5));
        Some(build(Mnemonic::Vsetvl, Operands::SetVl { rd, rs1, rs2 }))
    } else {
        None
    }
}

fn decode_arith(word: u32) -> Option<Instruction> {
    let funct3 = field(word, 12, 3);
    if funct3 == OPCFG {
        return decode_config(word);
    }
    if field(word, 25, 1) != 1 {
        return None;
    }
    let funct6 = field(word, 26, 6);
    let vd = VReg::from_field(field(word, 7, 5));
    let f1 = field(word, 15, 5);
    let f2 = field(word, 20, 5);
    let m = Mnemonic::ALL
        .into_iter()
        .find(|m| arith_funct(*m) == Some((funct3, funct6)))?;
    let vs2 = VReg::from_field(f2);
    let ops = match m {
        Mnemonic::VidV => {
            if f1 != VMUNARY0_VID || f2 != 0 {
                return None;
            }
            Operands::V { vd }
        }
        Mnemonic::VfmvVF => {
            if f2 != 0 {
                return None;
            }
            Operands::Vf {
                vd,
                fs1: FReg::from_field(f1),
            }
        }
        Mnemonic::VsllVi => Operands::Vi {
            vd,
            vs2,
            imm: f1 as i8,
        },
        Mnemonic::VaddVx | Mnemonic::VandVx | Mnemonic::VmulVx => Operands::Vx {
            vd,
            vs2,
            rs1: XReg::from_field(f1),
        },
        _ => Operands::Vv {
            vd,
            vs2,
            vs1: VReg::from_field(f1),
        },
    };
    Some(build(m, ops))
}

/// Decodes a 32-bit word. Anything outside the supported subset, including
/// masked forms and the all-zero word, is `UnsupportedInstruction`.
pub fn decode_word(word: u32) -> Result<Instruction, IsaError> {
    let decoded = match word & 0x7f {
        OP_V => decode_arith(word),
        LOAD_FP => decode_memory(word, false),
        STORE_FP => decode_memory(word, true),
        _ => None,
    };
    decoded.ok_or(IsaError::UnsupportedInstruction(word))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_instruction;

    fn word(text: &str) -> u32 {
        encode(&parse_instruction(text).unwrap())
    }

    // Encodings taken from an external RVV assembler listing.
    #[test]
    fn known_encodings() {
        assert_eq!(word("vadd.vv v1, v2, v3"), 0x022180d7);
        assert_eq!(word("vluxei64.v v1, (x10), v2"), 0x06257087);
        assert_eq!(word("vfmacc.vv v1, v2, v3"), 0xb23110d7);
        assert_eq!(word("vfmv.v.f v1, f3"), 0x5e01d0d7);
        assert_eq!(word("vrgather.vv v1, v2, v3"), 0x322180d7);
        assert_eq!(word("vsll.vi v1, v2, 3"), 0x9621b0d7);
        assert_eq!(word("vsetvli x1, x2, e64, m1, ta, mu"), 0x058170d7);
        assert_eq!(word("vid.v v7"), 0x5208a3d7);
        assert_eq!(word("vsetvl x3, x4, x5"), 0x805271d7);
    }

    #[test]
    fn zero_word_is_illegal() {
        assert_eq!(decode_word(0), Err(IsaError::UnsupportedInstruction(0)));
    }

    #[test]
    fn scalar_add_is_unsupported() {
        // add x1, x2, x3
        assert!(decode_word(0x003100b3).is_err());
        // fld f1, 0(x10)
        assert!(decode_word(0x00053087).is_err());
    }

    #[test]
    fn masked_form_is_unsupported() {
        assert!(decode_word(0x002180d7).is_err());
    }

    #[test]
    fn decode_inverts_encode_for_every_mnemonic() {
        for text in [
            "vsetvli x1, x2, e64, m1",
            "vsetvl x3, x4, x5",
            "vle64.v v4, (x10)",
            "vse64.v v4, (x10)",
            "vlse64.v v4, (x10), x11",
            "vsse64.v v4, (x10), x11",
            "vluxei64.v v4, (x10), v8",
            "vsuxei64.v v4, (x10), v8",
            "vadd.vv v1, v2, v3",
            "vadd.vx v1, v2, x3",
            "vmul.vx v1, v2, x3",
            "vsll.vi v1, v2, 31",
            "vand.vx v1, v2, x3",
            "vid.v v7",
            "vfadd.vv v1, v2, v3",
            "vfsub.vv v1, v2, v3",
            "vfmul.vv v1, v2, v3",
            "vfmacc.vv v1, v2, v3",
            "vfmv.v.f v1, f31",
            "vrgather.vv v1, v2, v3",
        ] {
            let i = parse_instruction(text).unwrap();
            assert_eq!(decode_word(encode(&i)), Ok(i), "{text}");
        }
    }
}
