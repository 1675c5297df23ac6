//! VSTREAM generators (two FFT vectorizations and axpy) and the scalar
//! reference implementations used to check them.
//!
//! Both FFTs are Stockham decimation-in-frequency transforms over split
//! real/imaginary arrays, ping-ponging between two scratch buffers and
//! writing the final stage into the output buffer.
//!
//! * `Naive` runs mixed-radix passes (radix 8 where possible) with one
//!   butterfly per loop iteration, so the vector length is the pass stride:
//!   1, 8, 64 at n = 512. Only unit-stride memory ops are used.
//! * `Wide` runs radix-2 stages over all n/2 butterflies at once, using
//!   index vectors, gathers and scatters to keep the vector length at
//!   min(n/2, VLMAX).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::MachineConfig;
use crate::emulator::MachineState;

pub const FFT_MIN_N: usize = 64;
pub const FFT_MAX_N: usize = 1 << 16;
/// Size at which the per-phase vector-length signature is documented.
pub const REFERENCE_N: usize = 512;
pub const REFERENCE_SEED: u64 = 42;

const BUFFER_BASE: u64 = 0x10000;
const VALUES_PER_LINE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("FFT size {0} must be a power of two in [{FFT_MIN_N}, {FFT_MAX_N}]")]
    InvalidSize(usize),
    #[error("input has {got} samples, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("axpy needs n >= 1")]
    EmptyAxpy,
    #[error("workload needs VLMAX >= 8, machine has {0}")]
    VlmaxTooSmall(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FftVariant {
    Naive,
    Wide,
}

impl FftVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FftVariant::Naive => "naive",
            FftVariant::Wide => "wide",
        }
    }

    pub fn parse(s: &str) -> Option<FftVariant> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Some(FftVariant::Naive),
            "wide" => Some(FftVariant::Wide),
            _ => None,
        }
    }
}

impl fmt::Display for FftVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Base addresses of the FFT buffers; each holds n doubles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FftLayout {
    pub input_re: u64,
    pub input_im: u64,
    pub a_re: u64,
    pub a_im: u64,
    pub b_re: u64,
    pub b_im: u64,
    pub output_re: u64,
    pub output_im: u64,
    pub twiddle_re: u64,
    pub twiddle_im: u64,
}

impl FftLayout {
    /// Consecutive page-aligned buffers starting at a fixed base.
    pub fn packed(n: usize) -> Self {
        let stride = (8 * n as u64).next_multiple_of(4096);
        let at = |k: u64| BUFFER_BASE + k * stride;
        FftLayout {
            input_re: at(0),
            input_im: at(1),
            a_re: at(2),
            a_im: at(3),
            b_re: at(4),
            b_im: at(5),
            output_re: at(6),
            output_im: at(7),
            twiddle_re: at(8),
            twiddle_im: at(9),
        }
    }

    pub fn buffers(&self) -> [(&'static str, u64); 10] {
        [
            ("input_re", self.input_re),
            ("input_im", self.input_im),
            ("a_re", self.a_re),
            ("a_im", self.a_im),
            ("b_re", self.b_re),
            ("b_im", self.b_im),
            ("output_re", self.output_re),
            ("output_im", self.output_im),
            ("twiddle_re", self.twiddle_re),
            ("twiddle_im", self.twiddle_im),
        ]
    }

    /// Highest byte address used, exclusive.
    pub fn end(&self, n: usize) -> u64 {
        self.buffers().iter().map(|(_, b)| *b).max().unwrap() + 8 * n as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FftPlan {
    pub n: usize,
    pub variant: FftVariant,
    pub layout: FftLayout,
}

impl FftPlan {
    pub fn new(n: usize, variant: FftVariant) -> Result<Self, WorkloadError> {
        if !n.is_power_of_two() || !(FFT_MIN_N..=FFT_MAX_N).contains(&n) {
            return Err(WorkloadError::InvalidSize(n));
        }
        Ok(FftPlan {
            n,
            variant,
            layout: FftLayout::packed(n),
        })
    }
}

/// A generated FFT and what the generator knows about its structure.
#[derive(Debug, Clone)]
pub struct FftProgram {
    pub text: String,
    pub plan: FftPlan,
    /// Radix per pass (all 2 for the wide variant).
    pub radices: Vec<usize>,
    /// Loop iterations emitted per phase; each begins at the same pc.
    pub trip_counts: BTreeMap<u32, u64>,
}

/// Text emitter for VSTREAM programs.
struct Emitter {
    out: String,
    phase: Option<u32>,
}

impl Emitter {
    fn new() -> Self {
        Emitter {
            out: String::new(),
            phase: None,
        }
    }

    fn raw(&mut self, line: &str) {
        self.out.push_str(line);
        self.out.push('\n');
    }

    fn region(&mut self, phase: u32, window: u32) {
        if self.phase != Some(phase) {
            let _ = writeln!(self.out, ".phase {phase}");
            self.phase = Some(phase);
        }
        let _ = writeln!(self.out, ".window {window}");
    }

    fn pc(&mut self, pc: u64) {
        let _ = writeln!(self.out, ".pc {pc:#x}");
    }

    fn scalar(&mut self, n: u32) {
        let _ = writeln!(self.out, ".scalar {n}");
    }

    fn xreg(&mut self, r: u8, v: u64) {
        let _ = writeln!(self.out, ".xreg x{r} {v:#x}");
    }

    fn freg(&mut self, r: u8, v: f64) {
        let _ = writeln!(self.out, ".freg f{r} {v:?}");
    }

    /// `vsetvli x0, xR, e64, m1` for a fixed requested length.
    fn setvl(&mut self, avl: u64) {
        self.xreg(31, avl);
        self.scalar(1);
        self.raw("vsetvli x0, x31, e64, m1");
    }

    /// Scalar address setup plus the vector memory op.
    fn mem(&mut self, op: &str, vreg: u8, xr: u8, addr: u64) {
        self.xreg(xr, addr);
        self.scalar(2);
        let _ = writeln!(self.out, "{op} v{vreg}, (x{xr})");
    }

    fn memf64(&mut self, addr: u64, values: impl Iterator<Item = f64>) {
        let values: Vec<f64> = values.collect();
        for (i, chunk) in values.chunks(VALUES_PER_LINE).enumerate() {
            let _ = write!(self.out, ".memf64 {:#x}", addr + 8 * (i * VALUES_PER_LINE) as u64);
            for v in chunk {
                let _ = write!(self.out, " {v:?}");
            }
            self.out.push('\n');
        }
    }

    fn op(&mut self, text: std::fmt::Arguments<'_>) {
        let _ = self.out.write_fmt(text);
        self.out.push('\n');
    }
}

/// `exp(-2 pi i k / n)` with the argument reduced exactly.
pub fn twiddle(k: usize, n: usize) -> Complex {
    let k = k % n;
    let (s, c) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
    // exact values on the axes keep special twiddles bit-clean
    match (4 * k).checked_rem(n) {
        Some(0) => match 4 * k / n {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, -1.0),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, 1.0),
        },
        _ => Complex::new(c, s),
    }
}

/// Uniform samples in [-1, 1) for both components.
pub fn random_input(n: usize, seed: u64) -> Vec<Complex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Uniform reals in [-1, 1).
pub fn random_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn impulse(n: usize) -> Vec<Complex> {
    let mut v = vec![Complex::default(); n];
    v[0] = Complex::new(1.0, 0.0);
    v
}

/// Radix sequence for the naive variant: radix 8 as often as possible while
/// keeping at least three passes.
pub fn naive_radices(n: usize) -> Vec<usize> {
    let log2 = n.trailing_zeros() as usize;
    let mut r = vec![8; log2 / 3];
    match log2 % 3 {
        1 => r.push(2),
        2 => r.push(4),
        _ => {}
    }
    while r.len() < 3 {
        // split a radix-8 pass into 4 and 2
        let pos = r.iter().rposition(|x| *x == 8).expect("n >= 64");
        r[pos] = 4;
        r.insert(pos + 1, 2);
    }
    r
}

fn phase_of_pass(pass: usize, passes: usize) -> u32 {
    if pass == 0 {
        1
    } else if pass + 1 == passes {
        3
    } else {
        2
    }
}

/// Emits the input and twiddle tables plus the phase 0 copy into buffer A.
fn emit_prologue(e: &mut Emitter, plan: &FftPlan, input: &[Complex], vlmax: u64) {
    let n = plan.n;
    let l = &plan.layout;
    e.memf64(l.input_re, input.iter().map(|c| c.re));
    e.memf64(l.input_im, input.iter().map(|c| c.im));
    e.memf64(l.twiddle_re, (0..n).map(|k| twiddle(k, n).re));
    e.memf64(l.twiddle_im, (0..n).map(|k| twiddle(k, n).im));
    e.region(0, 0);
    e.pc(0x100);
    let vl = (n as u64).min(vlmax);
    e.setvl(vl);
    for strip in 0..(n as u64 / vl) {
        let off = 8 * strip * vl;
        e.pc(0x140);
        e.scalar(3);
        e.mem("vle64.v", 0, 5, l.input_re + off);
        e.mem("vle64.v", 1, 6, l.input_im + off);
        e.mem("vse64.v", 0, 7, l.a_re + off);
        e.mem("vse64.v", 1, 8, l.a_im + off);
    }
}

pub fn gen_fft(
    plan: &FftPlan,
    input: &[Complex],
    config: &MachineConfig,
) -> Result<FftProgram, WorkloadError> {
    if input.len() != plan.n {
        return Err(WorkloadError::InputLength {
            expected: plan.n,
            got: input.len(),
        });
    }
    let vlmax = config.vlmax_e64();
    if vlmax < 8 {
        return Err(WorkloadError::VlmaxTooSmall(vlmax));
    }
    let mut e = Emitter::new();
    emit_prologue(&mut e, plan, input, vlmax);
    let (radices, trip_counts) = match plan.variant {
        FftVariant::Naive => emit_naive(&mut e, plan, vlmax),
        FftVariant::Wide => emit_wide(&mut e, plan, vlmax),
    };
    Ok(FftProgram {
        text: e.out,
        plan: plan.clone(),
        radices,
        trip_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rotation {
    One,
    MinusI,
    W8,
    W8Cubed,
}

fn inner_rotation(span: usize, i: usize) -> Rotation {
    match (span, i) {
        (_, 0) => Rotation::One,
        (4, 1) | (8, 2) => Rotation::MinusI,
        (8, 1) => Rotation::W8,
        (8, 3) => Rotation::W8Cubed,
        _ => unreachable!("radix <= 8"),
    }
}

const SPLAT_C: u8 = 30;
const SPLAT_NEG_C: u8 = 31;

/// Vector register pool for temporaries, v16..v29 initially.
struct Pool {
    free: Vec<u8>,
}

impl Pool {
    fn new() -> Self {
        Pool {
            free: (16..30).rev().collect(),
        }
    }

    fn take(&mut self) -> u8 {
        self.free.pop().expect("register pool exhausted")
    }

    fn give(&mut self, r: u8) {
        self.free.push(r);
    }
}

fn bitrev(k: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        k.reverse_bits() >> (usize::BITS - bits)
    }
}

/// In-register radix-r DIF butterfly over `x` (pairs of re/im registers).
/// Leaves X[k] in `x[bitrev(k)]`.
fn emit_butterfly(e: &mut Emitter, pool: &mut Pool, x: &mut [(u8, u8)]) {
    let r = x.len();
    let mut h = r / 2;
    while h >= 1 {
        for g in (0..r).step_by(2 * h) {
            for i in 0..h {
                let (ar, ai) = x[g + i];
                let (br, bi) = x[g + i + h];
                let t1 = pool.take();
                let t2 = pool.take();
                let rot = inner_rotation(2 * h, i);
                if rot == Rotation::MinusI {
                    // (a - b) * -i, folded into operand order
                    e.op(format_args!("vfsub.vv v{t1}, v{ai}, v{bi}"));
                    e.op(format_args!("vfsub.vv v{t2}, v{br}, v{ar}"));
                } else {
                    e.op(format_args!("vfsub.vv v{t1}, v{ar}, v{br}"));
                    e.op(format_args!("vfsub.vv v{t2}, v{ai}, v{bi}"));
                }
                e.op(format_args!("vfadd.vv v{ar}, v{ar}, v{br}"));
                e.op(format_args!("vfadd.vv v{ai}, v{ai}, v{bi}"));
                pool.give(br);
                pool.give(bi);
                x[g + i + h] = match rot {
                    Rotation::One | Rotation::MinusI => (t1, t2),
                    Rotation::W8 | Rotation::W8Cubed => {
                        let sum = pool.take();
                        let diff = pool.take();
                        e.op(format_args!("vfadd.vv v{sum}, v{t1}, v{t2}"));
                        e.op(format_args!("vfsub.vv v{diff}, v{t2}, v{t1}"));
                        pool.give(t1);
                        pool.give(t2);
                        if rot == Rotation::W8 {
                            // c(1 - i)(dr + i di) = c(dr + di) + i c(di - dr)
                            e.op(format_args!("vfmul.vv v{sum}, v{sum}, v{SPLAT_C}"));
                            e.op(format_args!("vfmul.vv v{diff}, v{diff}, v{SPLAT_C}"));
                            (sum, diff)
                        } else {
                            // -c(1 + i)(dr + i di) = c(di - dr) - i c(dr + di)
                            e.op(format_args!("vfmul.vv v{diff}, v{diff}, v{SPLAT_C}"));
                            e.op(format_args!("vfmul.vv v{sum}, v{sum}, v{SPLAT_NEG_C}"));
                            (diff, sum)
                        }
                    }
                };
            }
        }
        h /= 2;
    }
}

/// Multiplies `z` in place by a splatted constant.
fn emit_rotate(e: &mut Emitter, pool: &mut Pool, z: (u8, u8), w: Complex) -> (u8, u8) {
    let (zr, zi) = z;
    let wr = pool.take();
    let wi = pool.take();
    e.freg(3, w.re);
    e.scalar(1);
    e.op(format_args!("vfmv.v.f v{wr}, f3"));
    e.freg(4, w.im);
    e.scalar(1);
    e.op(format_args!("vfmv.v.f v{wi}, f4"));
    let re = pool.take();
    let t = pool.take();
    let im = pool.take();
    e.op(format_args!("vfmul.vv v{re}, v{zr}, v{wr}"));
    e.op(format_args!("vfmul.vv v{t}, v{zi}, v{wi}"));
    e.op(format_args!("vfsub.vv v{re}, v{re}, v{t}"));
    e.op(format_args!("vfmul.vv v{im}, v{zr}, v{wi}"));
    e.op(format_args!("vfmacc.vv v{im}, v{zi}, v{wr}"));
    for r in [zr, zi, t, wr, wi] {
        pool.give(r);
    }
    (re, im)
}

fn emit_naive(e: &mut Emitter, plan: &FftPlan, vlmax: u64) -> (Vec<usize>, BTreeMap<u32, u64>) {
    let n = plan.n;
    let l = &plan.layout;
    let radices = naive_radices(n);
    let passes = radices.len();
    let mut trips: BTreeMap<u32, u64> = BTreeMap::new();
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = 1usize;
    for (pass, &r) in radices.iter().enumerate() {
        let (src, dst) = if pass + 1 == passes {
            let src = if pass % 2 == 0 { (l.a_re, l.a_im) } else { (l.b_re, l.b_im) };
            (src, (l.output_re, l.output_im))
        } else if pass % 2 == 0 {
            ((l.a_re, l.a_im), (l.b_re, l.b_im))
        } else {
            ((l.b_re, l.b_im), (l.a_re, l.a_im))
        };
        let phase = phase_of_pass(pass, passes);
        let region = 0x1000 * (pass as u64 + 1);
        let body = region + 0x100;
        e.region(phase, pass as u32 + 1);
        e.pc(region);
        let vl = (s as u64).min(vlmax) as usize;
        e.setvl(vl as u64);
        if r == 8 {
            e.freg(1, c);
            e.scalar(1);
            e.op(format_args!("vfmv.v.f v{SPLAT_C}, f1"));
            e.freg(2, -c);
            e.scalar(1);
            e.op(format_args!("vfmv.v.f v{SPLAT_NEG_C}, f2"));
        }
        let m = n / s / r;
        let bits = r.trailing_zeros();
        for p in 0..m {
            for q in (0..s).step_by(vl) {
                *trips.entry(phase).or_default() += 1;
                e.pc(body);
                e.scalar(3);
                let mut x: Vec<(u8, u8)> = (0..r as u8).map(|j| (2 * j, 2 * j + 1)).collect();
                for j in 0..r {
                    let off = 8 * (q + s * (p + j * m)) as u64;
                    e.mem("vle64.v", x[j].0, 5 + 2 * j as u8, src.0 + off);
                    e.mem("vle64.v", x[j].1, 6 + 2 * j as u8, src.1 + off);
                }
                let mut pool = Pool::new();
                emit_butterfly(e, &mut pool, &mut x);
                for k in 1..r {
                    let exp = (p * k * s) % n;
                    if exp != 0 {
                        let slot = bitrev(k, bits);
                        x[slot] = emit_rotate(e, &mut pool, x[slot], twiddle(exp, n));
                    }
                }
                for k in 0..r {
                    let off = 8 * (q + s * (r * p + k)) as u64;
                    let (zr, zi) = x[bitrev(k, bits)];
                    e.mem("vse64.v", zr, 5 + 2 * k as u8, dst.0 + off);
                    e.mem("vse64.v", zi, 6 + 2 * k as u8, dst.1 + off);
                }
            }
        }
        s *= r;
    }
    (radices, trips)
}

/// Stages per phase for the wide variant: split as evenly as possible, the
/// earlier phases taking any remainder.
fn wide_stage_phases(stages: usize) -> Vec<u32> {
    let base = stages / 3;
    let extra = stages % 3;
    let mut out = Vec::with_capacity(stages);
    for ph in 0..3 {
        let count = base + usize::from(ph < extra);
        out.extend(std::iter::repeat_n(ph as u32 + 1, count));
    }
    out
}

fn emit_wide(e: &mut Emitter, plan: &FftPlan, vlmax: u64) -> (Vec<usize>, BTreeMap<u32, u64>) {
    let n = plan.n;
    let half = n / 2;
    let l = &plan.layout;
    let vl = (half as u64).min(vlmax) as usize;
    let gather = half as u64 <= vlmax;
    let stages = n.trailing_zeros() as usize;
    let phases = wide_stage_phases(stages);
    let mut trips: BTreeMap<u32, u64> = BTreeMap::new();

    // setup continues phase 0: iota and, when they fit, twiddle registers
    e.pc(0x180);
    e.setvl(vl as u64);
    e.raw("vid.v v1");
    if gather {
        e.mem("vle64.v", 2, 9, l.twiddle_re);
        e.mem("vle64.v", 3, 10, l.twiddle_im);
    } else {
        e.xreg(9, l.twiddle_re);
        e.xreg(10, l.twiddle_im);
    }

    for stage in 0..stages {
        let s = 1usize << stage;
        let (src, dst) = if stage + 1 == stages {
            let src = if stage % 2 == 0 { (l.a_re, l.a_im) } else { (l.b_re, l.b_im) };
            (src, (l.output_re, l.output_im))
        } else if stage % 2 == 0 {
            ((l.a_re, l.a_im), (l.b_re, l.b_im))
        } else {
            ((l.b_re, l.b_im), (l.a_re, l.a_im))
        };
        let phase = phases[stage];
        let region = 0x1000 * (stage as u64 + 1);
        e.region(phase, stage as u32 + 1);
        e.pc(region);
        e.xreg(21, !(s as u64 - 1));
        e.xreg(22, 8 * s as u64);
        e.xreg(11, dst.0);
        e.xreg(12, dst.1);
        for b0 in (0..half).step_by(vl) {
            *trips.entry(phase).or_default() += 1;
            e.pc(region + 0x100);
            e.scalar(3);
            e.xreg(23, b0 as u64);
            // butterfly index b, twiddle index b & ~(s-1), output offsets
            e.raw("vadd.vx v4, v1, x23");
            e.raw("vand.vx v5, v4, x21");
            e.raw("vadd.vv v6, v4, v5");
            e.raw("vsll.vi v6, v6, 3");
            e.raw("vadd.vx v7, v6, x22");
            let a = 8 * b0 as u64;
            let c = 8 * (b0 + half) as u64;
            e.mem("vle64.v", 8, 5, src.0 + a);
            e.mem("vle64.v", 9, 6, src.1 + a);
            e.mem("vle64.v", 10, 7, src.0 + c);
            e.mem("vle64.v", 11, 8, src.1 + c);
            if gather {
                e.raw("vrgather.vv v16, v2, v5");
                e.raw("vrgather.vv v17, v3, v5");
            } else {
                e.raw("vsll.vi v18, v5, 3");
                e.scalar(2);
                e.raw("vluxei64.v v16, (x9), v18");
                e.scalar(2);
                e.raw("vluxei64.v v17, (x10), v18");
            }
            e.raw("vfadd.vv v12, v8, v10");
            e.raw("vfadd.vv v13, v9, v11");
            e.raw("vfsub.vv v14, v8, v10");
            e.raw("vfsub.vv v15, v9, v11");
            e.raw("vfmul.vv v18, v14, v16");
            e.raw("vfmul.vv v19, v15, v17");
            e.raw("vfsub.vv v21, v18, v19");
            e.raw("vfmul.vv v22, v14, v17");
            e.raw("vfmacc.vv v22, v15, v16");
            for (data, base, offs) in [(12, 11, 6), (13, 12, 6), (21, 11, 7), (22, 12, 7)] {
                e.scalar(2);
                e.op(format_args!("vsuxei64.v v{data}, (x{base}), v{offs}"));
            }
        }
    }
    (vec![2; stages], trips)
}

/// Reads the transform result out of a final machine state.
pub fn read_fft_output(state: &MachineState, plan: &FftPlan) -> Vec<Complex> {
    let re = state.memory.read_f64s(plan.layout.output_re, plan.n);
    let im = state.memory.read_f64s(plan.layout.output_im, plan.n);
    re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
}

/// Direct O(n^2) DFT, accumulating each bin in input order.
pub fn oracle_dft(input: &[Complex]) -> Vec<Complex> {
    let n = input.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex::default();
            for (j, x) in input.iter().enumerate() {
                let angle = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                let (s, c) = angle.sin_cos();
                acc.re += x.re * c - x.im * s;
                acc.im += x.re * s + x.im * c;
            }
            acc
        })
        .collect()
}

/// max |got - want| / max |want|.
pub fn relative_error(got: &[Complex], want: &[Complex]) -> f64 {
    assert_eq!(got.len(), want.len());
    let num = got
        .iter()
        .zip(want)
        .map(|(g, w)| Complex::new(g.re - w.re, g.im - w.im).abs())
        .fold(0.0, f64::max);
    let den = want.iter().map(|w| w.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone)]
pub struct AxpyProgram {
    pub text: String,
    pub n: usize,
    pub x_addr: u64,
    pub y_addr: u64,
    /// VL of each strip, in order.
    pub strip_vls: Vec<u64>,
}

/// `y <- a*x + y` in strips of VLMAX with a short final strip.
pub fn gen_axpy(
    a: f64,
    x: &[f64],
    y: &[f64],
    config: &MachineConfig,
) -> Result<AxpyProgram, WorkloadError> {
    let n = x.len();
    if n == 0 {
        return Err(WorkloadError::EmptyAxpy);
    }
    if y.len() != n {
        return Err(WorkloadError::InputLength {
            expected: n,
            got: y.len(),
        });
    }
    let vlmax = config.vlmax_e64();
    let x_addr = BUFFER_BASE;
    let y_addr = x_addr + (8 * n as u64).next_multiple_of(4096);
    let mut e = Emitter::new();
    e.memf64(x_addr, x.iter().copied());
    e.memf64(y_addr, y.iter().copied());
    e.region(0, 0);
    e.pc(0x100);
    e.freg(1, a);
    let mut strip_vls = Vec::new();
    let mut done = 0u64;
    while done < n as u64 {
        let vl = (n as u64 - done).min(vlmax);
        strip_vls.push(vl);
        e.pc(0x104);
        e.scalar(3);
        e.xreg(5, n as u64 - done);
        e.raw("vsetvli x6, x5, e64, m1");
        if done == 0 {
            e.scalar(1);
            e.raw("vfmv.v.f v1, f1");
        }
        e.mem("vle64.v", 2, 10, x_addr + 8 * done);
        e.mem("vle64.v", 3, 11, y_addr + 8 * done);
        e.raw("vfmacc.vv v3, v1, v2");
        e.scalar(1);
        e.raw("vse64.v v3, (x11)");
        done += vl;
    }
    Ok(AxpyProgram {
        text: e.out,
        n,
        x_addr,
        y_addr,
        strip_vls,
    })
}

/// Scalar `a*x + y`, fused like `vfmacc.vv`.
pub fn oracle_axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a.mul_add(*xi, *yi)).collect()
}

/// Random straight-line window over eight vector registers and four
/// disjoint buffers, used to fuzz the scheduler. Same seed, same text.
pub fn gen_random_window(seed: u64, ops: usize) -> String {
    const BUF: [u64; 4] = [0x10000, 0x11000, 0x12000, 0x13000];
    const IDX: u64 = 0x14000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Emitter::new();
    for b in BUF {
        let vals: Vec<f64> = (0..32).map(|_| rng.gen_range(-4.0..4.0)).collect();
        e.memf64(b, vals.into_iter());
    }
    let mut perm: Vec<u64> = (0..16).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let _ = writeln!(
        e.out,
        ".memu64 {IDX:#x} {}",
        perm.iter().map(|p| (8 * p).to_string()).collect::<Vec<_>>().join(" ")
    );
    e.freg(1, rng.gen_range(-2.0..2.0));
    e.region(0, 1);
    e.pc(0x100);
    e.setvl(rng.gen_range(1..=16));
    e.mem("vle64.v", 9, 9, IDX);
    e.raw("vid.v v10");
    for _ in 0..ops {
        let vr = |rng: &mut ChaCha8Rng| rng.gen_range(1..=8u8);
        let buf = BUF[rng.gen_range(0..4)];
        match rng.gen_range(0..100) {
            0..=11 => {
                let d = vr(&mut rng);
                e.mem("vle64.v", d, 10 + rng.gen_range(0..3), buf + 8 * rng.gen_range(0..16));
            }
            12..=21 => {
                let d = vr(&mut rng);
                e.mem("vse64.v", d, 10 + rng.gen_range(0..3), buf + 8 * rng.gen_range(0..16));
            }
            22..=27 => {
                let op = if rng.gen_bool(0.5) { "vlse64.v" } else { "vsse64.v" };
                let d = vr(&mut rng);
                e.xreg(13, 8 * rng.gen_range(1..=2));
                e.xreg(14, buf);
                e.op(format_args!("{op} v{d}, (x14), x13"));
            }
            28..=33 => {
                let op = if rng.gen_bool(0.5) { "vluxei64.v" } else { "vsuxei64.v" };
                let d = vr(&mut rng);
                e.xreg(15, buf + 8 * rng.gen_range(0..16));
                e.op(format_args!("{op} v{d}, (x15), v9"));
            }
            34..=36 => e.setvl(rng.gen_range(0..=16)),
            37..=40 => {
                let d = vr(&mut rng);
                e.op(format_args!("vfmv.v.f v{d}, f1"));
            }
            41..=44 => {
                let d = vr(&mut rng);
                let mut a = vr(&mut rng);
                while a == d {
                    a = vr(&mut rng);
                }
                e.op(format_args!("vrgather.vv v{d}, v{a}, v10"));
            }
            45..=49 => {
                let (d, a) = (vr(&mut rng), vr(&mut rng));
                e.xreg(16, rng.gen_range(0..8));
                e.op(format_args!("vadd.vx v{d}, v{a}, x16"));
            }
            _ => {
                let op = ["vfadd.vv", "vfsub.vv", "vfmul.vv", "vfmacc.vv", "vadd.vv"][rng.gen_range(0..5)];
                let (d, a, b) = (vr(&mut rng), vr(&mut rng), vr(&mut rng));
                e.op(format_args!("{op} v{d}, v{a}, v{b}"));
            }
        }
    }
    e.out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radix_choice() {
        assert_eq!(naive_radices(64), vec![8, 4, 2]);
        assert_eq!(naive_radices(128), vec![8, 8, 2]);
        assert_eq!(naive_radices(512), vec![8, 8, 8]);
        assert_eq!(naive_radices(1024), vec![8, 8, 8, 2]);
        for l in 6..=16 {
            let r = naive_radices(1 << l);
            assert!(r.len() >= 3);
            assert_eq!(r.iter().product::<usize>(), 1 << l);
        }
    }

    #[test]
    fn wide_phase_split() {
        assert_eq!(wide_stage_phases(9), vec![1, 1, 1, 2, 2, 2, 3, 3, 3]);
        assert_eq!(wide_stage_phases(7), vec![1, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn invalid_sizes() {
        for n in [0, 32, 100, 1 << 17] {
            assert_eq!(
                FftPlan::new(n, FftVariant::Naive),
                Err(WorkloadError::InvalidSize(n))
            );
        }
    }

    #[test]
    fn layout_is_disjoint() {
        let n = 4096;
        let l = FftLayout::packed(n);
        let mut bases: Vec<u64> = l.buffers().iter().map(|(_, b)| *b).collect();
        bases.sort();
        for w in bases.windows(2) {
            assert!(w[0] + 8 * n as u64 <= w[1]);
        }
    }

    #[test]
    fn twiddle_axes_are_exact() {
        assert_eq!(twiddle(0, 8), Complex::new(1.0, 0.0));
        assert_eq!(twiddle(2, 8), Complex::new(0.0, -1.0));
        assert_eq!(twiddle(4, 8), Complex::new(-1.0, 0.0));
        assert!((twiddle(1, 8).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
    }

    #[test]
    fn dft_oracle_on_small_case() {
        let x = [
            Complex::new(1.0, 0.0),
            Complex::new(2.0, 0.0),
            Complex::new(3.0, 0.0),
            Complex::new(4.0, 0.0),
        ];
        let want = [
            Complex::new(10.0, 0.0),
            Complex::new(-2.0, 2.0),
            Complex::new(-2.0, 0.0),
            Complex::new(-2.0, -2.0),
        ];
        assert!(relative_error(&oracle_dft(&x), &want) < 1e-15);
    }

    #[test]
    fn seeded_input_is_reproducible() {
        assert_eq!(random_input(16, 7), random_input(16, 7));
        assert_ne!(random_input(16, 7), random_input(16, 8));
        assert!(random_input(256, 1)
            .iter()
            .all(|c| (-1.0..1.0).contains(&c.re) && (-1.0..1.0).contains(&c.im)));
    }
}
