use super::{
    FReg, Format, Instruction, IsaError, Lmul, Mnemonic, Operands, Sew, VReg, VtypeImm, XReg,
};

const X_ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

const F_ABI: [&str; 32] = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7", "fs0", "fs1", "fa0", "fa1", "fa2",
    "fa3", "fa4", "fa5", "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7", "fs8", "fs9",
    "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
];

/// One operand token and its 1-based column in the source line.
#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn syntax(column: usize, message: impl Into<String>) -> IsaError {
    IsaError::Syntax {
        column,
        message: message.into(),
    }
}

fn numbered(text: &str, prefix: char) -> Option<u8> {
    let rest = text.strip_prefix(prefix)?;
    if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    let n: u8 = rest.parse().ok()?;
    (n < 32).then_some(n)
}

pub fn parse_xreg(text: &str) -> Option<XReg> {
    let lower = text.to_ascii_lowercase();
    if let Some(n) = numbered(&lower, 'x') {
        return XReg::new(n);
    }
    if lower == "fp" {
        return XReg::new(8);
    }
    X_ABI
        .iter()
        .position(|name| *name == lower)
        .and_then(|i| XReg::new(i as u8))
}

pub fn parse_freg(text: &str) -> Option<FReg> {
    let lower = text.to_ascii_lowercase();
    if let Some(n) = numbered(&lower, 'f') {
        return FReg::new(n);
    }
    F_ABI
        .iter()
        .position(|name| *name == lower)
        .and_then(|i| FReg::new(i as u8))
}

fn parse_vreg(text: &str) -> Option<VReg> {
    numbered(&text.to_ascii_lowercase(), 'v').and_then(VReg::new)
}

impl<'a> Token<'a> {
    fn vreg(self) -> Result<VReg, IsaError> {
        parse_vreg(self.text)
            .ok_or_else(|| syntax(self.column, format!("expected vector register, found `{}`", self.text)))
    }

    fn xreg(self) -> Result<XReg, IsaError> {
        parse_xreg(self.text)
            .ok_or_else(|| syntax(self.column, format!("expected scalar register, found `{}`", self.text)))
    }

    fn freg(self) -> Result<FReg, IsaError> {
        parse_freg(self.text).ok_or_else(|| {
            syntax(
                self.column,
                format!("expected floating-point register, found `{}`", self.text),
            )
        })
    }

    /// `(x10)`, optionally with a literal zero offset as in `0(x10)`.
    fn base(self) -> Result<XReg, IsaError> {
        let inner = self
            .text
            .strip_prefix('0')
            .unwrap_or(self.text)
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| syntax(self.column, format!("expected `(reg)`, found `{}`", self.text)))?;
        parse_xreg(inner.trim()).ok_or_else(|| {
            syntax(
                self.column + 1,
                format!("expected scalar base register, found `{}`", inner),
            )
        })
    }

    fn imm(self) -> Result<i64, IsaError> {
        let t = self.text;
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let value = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
            Some(hex) => i64::from_str_radix(hex, 16),
            None => body.parse::<i64>(),
        }
        .map_err(|_| syntax(self.column, format!("malformed immediate `{t}`")))?;
        Ok(if neg { -value } else { value })
    }
}

fn tokenize(line: &str) -> Result<(Token<'_>, Vec<Token<'_>>), IsaError> {
    let start = line.len() - line.trim_start().len();
    let body = &line[start..];
    if body.trim().is_empty() {
        return Err(syntax(1, "empty instruction"));
    }
    let mn_len = body.find(char::is_whitespace).unwrap_or(body.len());
    let mnemonic = Token {
        text: &body[..mn_len],
        column: start + 1,
    };
    let rest_offset = start + mn_len;
    let rest = &line[rest_offset..];
    let mut operands = Vec::new();
    if !rest.trim().is_empty() {
        let mut offset = rest_offset;
        for piece in rest.split(',') {
            let lead = piece.len() - piece.trim_start().len();
            let text = piece.trim();
            if text.is_empty() {
                return Err(syntax(offset + lead + 1, "empty operand"));
            }
            operands.push(Token {
                text,
                column: offset + lead + 1,
            });
            offset += piece.len() + 1;
        }
    }
    Ok((mnemonic, operands))
}

fn expect_count(
    operands: &[Token<'_>],
    accepted: &[usize],
    line: &str,
    mnemonic: Mnemonic,
) -> Result<(), IsaError> {
    if accepted.contains(&operands.len()) {
        return Ok(());
    }
    let max = *accepted.iter().max().unwrap();
    let column = if operands.len() > max {
        operands[max].column
    } else {
        line.trim_end().len() + 1
    };
    Err(syntax(
        column,
        format!(
            "{mnemonic} takes {} operand(s), found {}",
            accepted
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" or "),
            operands.len()
        ),
    ))
}

fn parse_vtype(ops: &[Token<'_>]) -> Result<VtypeImm, IsaError> {
    let sew = match ops[0].text.to_ascii_lowercase().as_str() {
        "e8" => Sew::E8,
        "e16" => Sew::E16,
        "e32" => Sew::E32,
        "e64" => Sew::E64,
        other => return Err(syntax(ops[0].column, format!("unknown element width `{other}`"))),
    };
    let lmul = Lmul::parse(ops[1].text)
        .ok_or_else(|| syntax(ops[1].column, format!("unknown LMUL `{}`", ops[1].text)))?;
    let (mut tail_agnostic, mut mask_agnostic) = (false, false);
    if ops.len() == 4 {
        tail_agnostic = match ops[2].text.to_ascii_lowercase().as_str() {
            "ta" => true,
            "tu" => false,
            _ => return Err(syntax(ops[2].column, "expected `ta` or `tu`")),
        };
        mask_agnostic = match ops[3].text.to_ascii_lowercase().as_str() {
            "ma" => true,
            "mu" => false,
            _ => return Err(syntax(ops[3].column, "expected `ma` or `mu`")),
        };
    }
    Ok(VtypeImm {
        sew,
        lmul,
        tail_agnostic,
        mask_agnostic,
    })
}

/// Parses one assembly line in standard RVV syntax.
///
/// Mnemonics are case-insensitive; scalar registers accept both `xN` and
/// ABI names. Masked forms (`v0.t`) are rejected.
pub fn parse_instruction(line: &str) -> Result<Instruction, IsaError> {
    let (mn_tok, ops) = tokenize(line)?;
    let mnemonic = Mnemonic::lookup(mn_tok.text)
        .ok_or_else(|| IsaError::UnsupportedMnemonic(mn_tok.text.to_string()))?;
    if let Some(mask) = ops.iter().find(|t| t.text.eq_ignore_ascii_case("v0.t")) {
        return Err(syntax(mask.column, "masked instructions are not supported"));
    }
    let operands = match mnemonic.format() {
        Format::SetVli => {
            expect_count(&ops, &[4, 6], line, mnemonic)?;
            Operands::SetVli {
                rd: ops[0].xreg()?,
                rs1: ops[1].xreg()?,
                vtype: parse_vtype(&ops[2..])?,
            }
        }
        Format::SetVl => {
            expect_count(&ops, &[3], line, mnemonic)?;
            Operands::SetVl {
                rd: ops[0].xreg()?,
                rs1: ops[1].xreg()?,
                rs2: ops[2].xreg()?,
            }
        }
        Format::UnitStride => {
            expect_count(&ops, &[2], line, mnemonic)?;
            Operands::UnitStride {
                vreg: ops[0].vreg()?,
                rs1: ops[1].base()?,
            }
        }
        Format::Strided => {
            expect_count(&ops, &[3], line, mnemonic)?;
            Operands::Strided {
                vreg: ops[0].vreg()?,
                rs1: ops[1].base()?,
                rs2: ops[2].xreg()?,
            }
        }
        Format::Indexed => {
            expect_count(&ops, &[3], line, mnemonic)?;
            Operands::Indexed {
                vreg: ops[0].vreg()?,
                rs1: ops[1].base()?,
                vs2: ops[2].vreg()?,
            }
        }
        Format::Vv => {
            expect_count(&ops, &[3], line, mnemonic)?;
            let vd = ops[0].vreg()?;
            let (a, b) = (ops[1].vreg()?, ops[2].vreg()?);
            // vfmacc.vv is written `vd, vs1, vs2`
            if mnemonic == Mnemonic::VfmaccVv {
                Operands::Vv { vd, vs1: a, vs2: b }
            } else {
                Operands::Vv { vd, vs2: a, vs1: b }
            }
        }
        Format::Vx => {
            expect_count(&ops, &[3], line, mnemonic)?;
            Operands::Vx {
                vd: ops[0].vreg()?,
                vs2: ops[1].vreg()?,
                rs1: ops[2].xreg()?,
            }
        }
        Format::Vi => {
            expect_count(&ops, &[3], line, mnemonic)?;
            let imm = ops[2].imm()?;
            if !(0..=super::SHIFT_IMM_MAX as i64).contains(&imm) {
                return Err(syntax(
                    ops[2].column,
                    format!("shift amount {imm} outside 0..=31"),
                ));
            }
            Operands::Vi {
                vd: ops[0].vreg()?,
                vs2: ops[1].vreg()?,
                imm: imm as i8,
            }
        }
        Format::Vf => {
            expect_count(&ops, &[2], line, mnemonic)?;
            Operands::Vf {
                vd: ops[0].vreg()?,
                fs1: ops[1].freg()?,
            }
        }
        Format::V => {
            expect_count(&ops, &[1], line, mnemonic)?;
            Operands::V {
                vd: ops[0].vreg()?,
            }
        }
    };
    Instruction::new(mnemonic, operands)
}

/// Canonical single-line text; `parse_instruction` inverts it exactly.
pub fn disassemble(instr: &Instruction) -> String {
    let m = instr.mnemonic();
    let ops = match *instr.operands() {
        Operands::SetVli { rd, rs1, vtype } => {
            let mut s = format!(
                "{rd}, {rs1}, e{}, {}",
                vtype.sew.bits(),
                vtype.lmul.as_str()
            );
            if vtype.tail_agnostic || vtype.mask_agnostic {
                s.push_str(if vtype.tail_agnostic { ", ta" } else { ", tu" });
                s.push_str(if vtype.mask_agnostic { ", ma" } else { ", mu" });
            }
            s
        }
        Operands::SetVl { rd, rs1, rs2 } => format!("{rd}, {rs1}, {rs2}"),
        Operands::UnitStride { vreg, rs1 } => format!("{vreg}, ({rs1})"),
        Operands::Strided { vreg, rs1, rs2 } => format!("{vreg}, ({rs1}), {rs2}"),
        Operands::Indexed { vreg, rs1, vs2 } => format!("{vreg}, ({rs1}), {vs2}"),
        Operands::Vv { vd, vs2, vs1 } if m == Mnemonic::VfmaccVv => {
            format!("{vd}, {vs1}, {vs2}")
        }
        Operands::Vv { vd, vs2, vs1 } => format!("{vd}, {vs2}, {vs1}"),
        Operands::Vx { vd, vs2, rs1 } => format!("{vd}, {vs2}, {rs1}"),
        Operands::Vi { vd, vs2, imm } => format!("{vd}, {vs2}, {imm}"),
        Operands::Vf { vd, fs1 } => format!("{vd}, {fs1}"),
        Operands::V { vd } => format!("{vd}"),
    };
    format!("{m} {ops}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Category;

    fn v(n: u8) -> VReg {
        VReg::new(n).unwrap()
    }
    fn x(n: u8) -> XReg {
        XReg::new(n).unwrap()
    }

    #[test]
    fn parses_fp_vv() {
        let i = parse_instruction("vfadd.vv v1, v2, v3").unwrap();
        assert_eq!(i.mnemonic(), Mnemonic::VfaddVv);
        assert_eq!(i.vd(), Some(v(1)));
        assert_eq!(i.vs2(), Some(v(2)));
        assert_eq!(i.vs1(), Some(v(3)));
        assert_eq!(i.category(), Category::ArithFp);
    }

    #[test]
    fn parses_vsetvli() {
        let i = parse_instruction("vsetvli x1, x2, e64, m1").unwrap();
        assert_eq!(i.mnemonic(), Mnemonic::Vsetvli);
        assert_eq!(i.rd(), Some(x(1)));
        assert_eq!(i.rs1(), Some(x(2)));
        let vt = i.vtype().unwrap();
        assert_eq!(vt.sew.bits(), 64);
        assert_eq!(vt.lmul, Lmul::M1);
        assert_eq!(i.category(), Category::Config);
    }

    #[test]
    fn parses_unit_load() {
        let i = parse_instruction("vle64.v v4, (x10)").unwrap();
        assert_eq!(i.mnemonic(), Mnemonic::Vle64);
        assert_eq!(i.vd(), Some(v(4)));
        assert_eq!(i.rs1(), Some(x(10)));
        assert_eq!(i.category(), Category::MemUnit);
    }

    #[test]
    fn unknown_mnemonic() {
        assert_eq!(
            parse_instruction("vadd.qq v1, v2"),
            Err(IsaError::UnsupportedMnemonic("vadd.qq".into()))
        );
    }

    #[test]
    fn case_and_whitespace_insensitive() {
        let a = parse_instruction("  VFADD.VV   v1 ,v2,   v3  ").unwrap();
        let b = parse_instruction("vfadd.vv v1, v2, v3").unwrap();
        assert_eq!(a, b);
        let c = parse_instruction("vle64.v v4, (a0)").unwrap();
        assert_eq!(c, parse_instruction("vle64.v v4, (x10)").unwrap());
    }

    #[test]
    fn syntax_errors_carry_columns() {
        match parse_instruction("vfadd.vv v1, q2, v3") {
            Err(IsaError::Syntax { column, .. }) => assert_eq!(column, 14),
            other => panic!("{other:?}"),
        }
        match parse_instruction("vfadd.vv v1, v2") {
            Err(IsaError::Syntax { .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_instruction("vadd.vv v1, v2, v3, v0.t") {
            Err(IsaError::Syntax { column, message }) => {
                assert_eq!(column, 21);
                assert!(message.contains("masked"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_instruction("vsll.vi v1, v2, 32"),
            Err(IsaError::Syntax { .. })
        ));
        assert!(matches!(
            parse_instruction("vle64.v v1, x10"),
            Err(IsaError::Syntax { .. })
        ));
        assert!(matches!(parse_instruction(""), Err(IsaError::Syntax { .. })));
    }

    #[test]
    fn canonical_forms() {
        let i = Instruction::new(
            Mnemonic::VfaddVv,
            Operands::Vv {
                vd: v(1),
                vs2: v(2),
                vs1: v(3),
            },
        )
        .unwrap();
        assert_eq!(disassemble(&i), "vfadd.vv v1, v2, v3");
        let i = Instruction::new(
            Mnemonic::Vsetvli,
            Operands::SetVli {
                rd: x(0),
                rs1: x(5),
                vtype: VtypeImm::E64_M1,
            },
        )
        .unwrap();
        assert_eq!(disassemble(&i), "vsetvli x0, x5, e64, m1");
    }

    #[test]
    fn vfmacc_operand_order() {
        let i = parse_instruction("vfmacc.vv v1, v2, v3").unwrap();
        assert_eq!(i.vs1(), Some(v(2)));
        assert_eq!(i.vs2(), Some(v(3)));
        assert_eq!(disassemble(&i), "vfmacc.vv v1, v2, v3");
    }

    #[test]
    fn policy_flags_round_trip() {
        let text = "vsetvli x3, x4, e32, mf2, ta, mu";
        let i = parse_instruction(text).unwrap();
        assert_eq!(disassemble(&i), text);
        let plain = parse_instruction("vsetvli x3, x4, e64, m1, tu, mu").unwrap();
        assert_eq!(disassemble(&plain), "vsetvli x3, x4, e64, m1");
    }
}
