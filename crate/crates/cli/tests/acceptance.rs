//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Thresholds are the constants below.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdvkit::analysis::{compare, pc_profile, phase_metrics, Flag};
use sdvkit::isa::{
    decode_word, encode, parse_instruction, FReg, Format, Instruction, Mnemonic, Operands, VReg,
    VtypeImm, XReg,
};
use sdvkit::prv::{emit_prv, parse_prv, to_prv};
use sdvkit::scheduler::{schedule_stream, verify_equivalence, Heuristic};
use sdvkit::timing::{occupancy, simulate, TimingParams};
use sdvkit::vstream::{ItemKind, StreamItem};
use sdvkit::workloads::{
    gen_fft, gen_random_window, oracle_dft, random_input, read_fft_output, relative_error,
    FftPlan, FftVariant, REFERENCE_N, REFERENCE_SEED,
};
use sdvkit::{parse_vstream, read_trace, run, write_trace, AddrRange, Emulator, MachineConfig, TraceRecord};

const FFT_MAX_REL_ERROR: f64 = 1e-9;
const FFT_SIZES: [usize; 3] = [64, 256, 1024];
const FFT_SEEDS: [u64; 3] = [1, 2, 3];
const FFT_BUDGET: Duration = Duration::from_secs(30);
const VSETVLI_SAMPLES: usize = 10_000;
const VLMAX: u64 = 256;
const ROUND_TRIPS: usize = 100;
const MONOTONIC_PAIRS: usize = 100;
const UNIT_STRIDE_OCC: u64 = 32;
const INDEXED_OCC: u64 = 256;
const RANDOM_WINDOWS: usize = 100;
const SCHEDULER_BUDGET: Duration = Duration::from_secs(60);
const CORPUS: &str = include_str!("../../core/tests/fixtures/decoder_corpus.txt");
const CORPUS_PER_MNEMONIC: usize = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fft(n: usize, variant: FftVariant, seed: u64) -> (f64, Vec<TraceRecord>, u64) {
    let cfg = MachineConfig::default();
    let plan = FftPlan::new(n, variant).unwrap();
    let input = random_input(n, seed);
    let prog = gen_fft(&plan, &input, &cfg).unwrap();
    let (state, trace) = run(&cfg, &parse_vstream(&prog.text).unwrap()).unwrap();
    let err = relative_error(&read_fft_output(&state, &plan), &oracle_dft(&input));
    (err, trace, prog.trip_counts[&2])
}

fn fft_correctness() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in FFT_SIZES {
        for seed in FFT_SEEDS {
            for variant in [FftVariant::Naive, FftVariant::Wide] {
                let (err, _, _) = fft(n, variant, seed);
                ensure(err <= FFT_MAX_REL_ERROR, || format!("n={n} seed={seed} {variant}: error {err:e}"))?;
                worst = worst.max(err);
            }
        }
    }
    let took = t.elapsed();
    ensure(took < FFT_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("18 runs, worst relative error {worst:.2e}, {:.2}s", took.as_secs_f64()))
}

fn vl_signature() -> Outcome {
    let avg = |variant| -> Vec<f64> {
        let (_, trace, _) = fft(REFERENCE_N, variant, REFERENCE_SEED);
        phase_metrics(&trace, None).unwrap().iter().map(|p| p.avg_vl).collect()
    };
    let naive = avg(FftVariant::Naive);
    let wide = avg(FftVariant::Wide);
    ensure(naive.len() == 4 && naive[2] == 8.0 && naive[3] == 64.0, || format!("naive {naive:?}"))?;
    ensure(wide == vec![256.0; 4], || format!("wide {wide:?}"))?;
    Ok(format!("naive {naive:?}, wide {wide:?}"))
}

fn vsetvli_law() -> Outcome {
    let cfg = MachineConfig::default();
    let mut emu = Emulator::new(&cfg);
    ensure(emu.state().vlmax() == VLMAX, || format!("VLMAX {}", emu.state().vlmax()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..VSETVLI_SAMPLES {
        let avl: u64 = match rng.gen_range(0..3) {
            0 => rng.gen_range(0..=512),
            1 => rng.gen(),
            _ => rng.gen_range(0..u32::MAX as u64),
        };
        let text = format!(".xreg x5 {avl}\nvsetvli x6, x5, e64, m1\n");
        for item in parse_vstream(&text).unwrap() {
            emu.step(&item).map_err(|e| e.to_string())?;
        }
        let vl = emu.state().xreg(XReg::new(6).unwrap());
        ensure(vl == avl.min(VLMAX) && emu.state().vl == vl, || format!("avl {avl} gave vl {vl}"))?;
    }
    Ok(format!("{VSETVLI_SAMPLES} AVLs, VLMAX {VLMAX}"))
}

fn sdvkit(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sdvkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn determinism() -> Outcome {
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let steps: [&[&str]; 4] = [
        &["gen", "fft", "--n", "256", "--variant", "wide", "--seed", "7", "-o", "f.vs"],
        &["emulate", "f.vs", "-o", "f.trace"],
        &["analyze", "f.trace", "-o", "f.report"],
        &["to-prv", "f.trace", "-o", "f.prv"],
    ];
    for args in steps {
        sdvkit(first.path(), args)?;
    }
    let manifests = ["f.vs", "f.trace", "f.report", "f.prv"].map(|o| format!("{o}.manifest.toml"));
    for m in &manifests {
        fs::copy(first.path().join(m), second.path().join(m)).map_err(|e| e.to_string())?;
        sdvkit(second.path(), &["replay", m])?;
    }
    let outputs = ["f.vs", "f.trace", "f.report", "f.prv", "f.pcf"];
    for f in outputs.iter().copied().chain(manifests.iter().map(String::as_str)) {
        let a = fs::read(first.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(second.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical across replay", outputs.len() + manifests.len()))
}

fn random_instruction(rng: &mut ChaCha8Rng) -> Instruction {
    let m = Mnemonic::ALL[rng.gen_range(0..Mnemonic::ALL.len())];
    let v = |rng: &mut ChaCha8Rng| VReg::new(rng.gen_range(0..32)).unwrap();
    let x = |rng: &mut ChaCha8Rng| XReg::new(rng.gen_range(0..32)).unwrap();
    let ops = match m.format() {
        Format::SetVli => Operands::SetVli { rd: x(rng), rs1: x(rng), vtype: VtypeImm::E64_M1 },
        Format::SetVl => Operands::SetVl { rd: x(rng), rs1: x(rng), rs2: x(rng) },
        Format::UnitStride => Operands::UnitStride { vreg: v(rng), rs1: x(rng) },
        Format::Strided => Operands::Strided { vreg: v(rng), rs1: x(rng), rs2: x(rng) },
        Format::Indexed => Operands::Indexed { vreg: v(rng), rs1: x(rng), vs2: v(rng) },
        Format::Vv => Operands::Vv { vd: v(rng), vs2: v(rng), vs1: v(rng) },
        Format::Vx => Operands::Vx { vd: v(rng), vs2: v(rng), rs1: x(rng) },
        Format::Vi => Operands::Vi { vd: v(rng), vs2: v(rng), imm: rng.gen_range(0..32) },
        Format::Vf => Operands::Vf { vd: v(rng), fs1: FReg::new(rng.gen_range(0..32)).unwrap() },
        Format::V => Operands::V { vd: v(rng) },
    };
    Instruction::new(m, ops).unwrap()
}

fn random_trace(rng: &mut ChaCha8Rng) -> Vec<TraceRecord> {
    let len = rng.gen_range(1..60);
    let mut window = 0;
    (0..len)
        .map(|i| {
            let instr = random_instruction(rng);
            window += u32::from(rng.gen_bool(0.1));
            let addresses = if instr.category().is_memory() {
                (0..rng.gen_range(0..4))
                    .map(|_| AddrRange { base: rng.gen_range(0..1 << 40), len: rng.gen_range(0..4096) })
                    .collect()
            } else {
                Vec::new()
            };
            TraceRecord {
                seq: i,
                pc: rng.gen_range(0..1 << 48),
                phase: rng.gen_range(0..5),
                window,
                scalar_before: rng.gen_range(0..10),
                instr,
                vl: rng.gen_range(0..=VLMAX),
                sew_bits: 64,
                addresses,
            }
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng) -> TimingParams {
    TimingParams {
        unit_stride_elems_per_cycle: rng.gen_range(1..32),
        indexed_elems_per_cycle: rng.gen_range(1..8),
        strided_elems_per_cycle: rng.gen_range(1..8),
        arith_elems_per_cycle: rng.gen_range(1..32),
        mem_latency_cycles: rng.gen_range(1..64),
        arith_latency_cycles: rng.gen_range(1..16),
        scalar_cycles_per_instr: rng.gen_range(0..4),
        vector_queue_depth: rng.gen_range(1..32),
        chaining: rng.gen(),
    }
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut records = 0;
    for case in 0..ROUND_TRIPS {
        let trace = random_trace(&mut rng);
        records += trace.len();
        let text = write_trace(&trace);
        let back = read_trace(&text).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == trace && write_trace(&back) == text, || format!("trace case {case} differs"))?;

        let timed = rng.gen_bool(0.5).then(|| simulate(&trace, &random_params(&mut rng)));
        let doc = to_prv(&trace, timed.as_ref().map(|(e, c)| (e.as_slice(), c.total_cycles)))
            .map_err(|e| format!("case {case}: {e}"))?;
        let events = doc.events().count();
        ensure(events == 5 * trace.len(), || format!("case {case}: {events} events for {} records", trace.len()))?;
        let (prv, _) = emit_prv(&doc);
        let parsed = parse_prv(&prv).map_err(|e| format!("case {case}: {e}"))?;
        ensure(parsed == doc && emit_prv(&parsed).0 == prv, || format!("prv case {case} differs"))?;
    }
    Ok(format!("{ROUND_TRIPS} traces and {ROUND_TRIPS} prv documents, {records} records"))
}

fn timing_sanity() -> Outcome {
    let params = TimingParams::default();
    let rec = |text: &str| TraceRecord {
        seq: 0,
        pc: 0,
        phase: 0,
        window: 0,
        scalar_before: 0,
        instr: parse_instruction(text).unwrap(),
        vl: VLMAX,
        sew_bits: 64,
        addresses: Vec::new(),
    };
    let unit = occupancy(&rec("vle64.v v1, (x10)"), &params);
    let indexed = occupancy(&rec("vluxei64.v v1, (x10), v2"), &params);
    ensure(unit == UNIT_STRIDE_OCC && indexed == INDEXED_OCC, || format!("unit {unit}, indexed {indexed}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = MachineConfig::default();
    for case in 0..MONOTONIC_PAIRS {
        let trace = if case % 2 == 0 {
            random_trace(&mut rng)
        } else {
            let text = gen_random_window(rng.gen(), rng.gen_range(2..40));
            run(&cfg, &parse_vstream(&text).unwrap()).unwrap().1
        };
        let fast = random_params(&mut rng);
        let mut slow = fast.clone();
        for rate in [
            &mut slow.unit_stride_elems_per_cycle,
            &mut slow.indexed_elems_per_cycle,
            &mut slow.strided_elems_per_cycle,
            &mut slow.arith_elems_per_cycle,
        ] {
            if rng.gen_bool(0.5) {
                *rate = rng.gen_range(1..=*rate);
            }
        }
        let a = simulate(&trace, &fast).1.total_cycles;
        let b = simulate(&trace, &slow).1.total_cycles;
        ensure(b >= a, || format!("case {case}: slower rates gave {b} < {a}"))?;
    }
    Ok(format!("occupancy {unit}/{indexed}, {MONOTONIC_PAIRS} monotone pairs"))
}

fn phase_regression() -> Outcome {
    let params = TimingParams::default();
    let timed = |variant| {
        let (_, trace, _) = fft(REFERENCE_N, variant, REFERENCE_SEED);
        let (e, c) = simulate(&trace, &params);
        (phase_metrics(&trace, Some((&e, c.total_cycles))).unwrap(), c.ipc())
    };
    let (naive, ipc_naive) = timed(FftVariant::Naive);
    let (wide, ipc_wide) = timed(FftVariant::Wide);
    let cmp = compare(&naive, &wide).map_err(|e| e.to_string())?;
    let flag = |p: u32| cmp.phases.iter().find(|d| d.phase == p).and_then(|d| d.flag);
    ensure(flag(2) == Some(Flag::Improvement), || format!("phase 2 flag {:?}", flag(2)))?;
    ensure(flag(3) == Some(Flag::Regression), || format!("phase 3 flag {:?}", flag(3)))?;
    ensure(ipc_wide < ipc_naive, || format!("ipc wide {ipc_wide:.4} vs naive {ipc_naive:.4}"))?;
    Ok(format!("phase 2 IMPROVEMENT, phase 3 REGRESSION, ipc {ipc_naive:.4} -> {ipc_wide:.4}"))
}

fn phase2_window() -> Vec<StreamItem> {
    let cfg = MachineConfig::default();
    let plan = FftPlan::new(REFERENCE_N, FftVariant::Naive).unwrap();
    let prog = gen_fft(&plan, &random_input(REFERENCE_N, REFERENCE_SEED), &cfg).unwrap();
    let items = parse_vstream(&prog.text).unwrap();
    let first = items.iter().position(|i| matches!(i.kind, ItemKind::PhaseMark(2))).unwrap();
    let last = items.iter().position(|i| matches!(i.kind, ItemKind::PhaseMark(3))).unwrap();
    items[..first]
        .iter()
        .filter(|i| !matches!(i.kind, ItemKind::Instruction(_)) || i.phase == 0)
        .chain(&items[first..last])
        .cloned()
        .collect()
}

fn scheduler() -> Outcome {
    let t = Instant::now();
    let cfg = MachineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut reordered = 0;
    for case in 0..RANDOM_WINDOWS {
        let items = parse_vstream(&gen_random_window(rng.gen(), rng.gen_range(2..48))).unwrap();
        let out = schedule_stream(&cfg, &items, Heuristic::Interleave).map_err(|e| e.to_string())?;
        let same = verify_equivalence(&cfg, &items, &out.items).map_err(|e| e.to_string())?;
        ensure(same, || format!("window {case} not equivalent"))?;
        ensure(out.scheduled_cycles <= out.original_cycles, || {
            format!("window {case}: {} > {}", out.scheduled_cycles, out.original_cycles)
        })?;
        reordered += usize::from(out.items != items);
    }

    let items = phase2_window();
    let out = schedule_stream(&cfg, &items, Heuristic::Interleave).map_err(|e| e.to_string())?;
    ensure(verify_equivalence(&cfg, &items, &out.items).map_err(|e| e.to_string())?, || {
        "phase-2 window not equivalent".into()
    })?;
    let before = simulate(&run(&cfg, &items).unwrap().1, &cfg.timing).1;
    let after = simulate(&run(&cfg, &out.items).unwrap().1, &cfg.timing).1;
    ensure(after.overlap_cycles > before.overlap_cycles, || {
        format!("overlap {} -> {}", before.overlap_cycles, after.overlap_cycles)
    })?;
    ensure(after.total_cycles < before.total_cycles, || {
        format!("cycles {} -> {}", before.total_cycles, after.total_cycles)
    })?;
    let took = t.elapsed();
    ensure(took < SCHEDULER_BUDGET, || format!("took {took:?}"))?;
    Ok(format!(
        "{RANDOM_WINDOWS} windows ({reordered} reordered); phase 2 overlap {} -> {}, cycles {} -> {}",
        before.overlap_cycles, after.overlap_cycles, before.total_cycles, after.total_cycles
    ))
}

fn decoder_fidelity() -> Outcome {
    let mut counts = vec![0usize; Mnemonic::ALL.len()];
    for line in CORPUS.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let (hex, text) = line.split_once('\t').ok_or_else(|| format!("bad line {line:?}"))?;
        let word = u32::from_str_radix(hex, 16).map_err(|e| format!("{hex}: {e}"))?;
        let parsed = parse_instruction(text).map_err(|e| format!("{text}: {e}"))?;
        let decoded = decode_word(word).map_err(|e| format!("{hex}: {e}"))?;
        ensure(decoded == parsed && encode(&parsed) == word, || format!("{hex} vs {text}"))?;
        counts[Mnemonic::ALL.iter().position(|m| *m == parsed.mnemonic()).unwrap()] += 1;
    }
    ensure(counts.iter().all(|c| *c == CORPUS_PER_MNEMONIC), || format!("per-mnemonic counts {counts:?}"))?;
    Ok(format!("{} words, {} mnemonics", counts.iter().sum::<usize>(), counts.len()))
}

fn pc_sawtooth() -> Outcome {
    let (_, trace, trips) = fft(REFERENCE_N, FftVariant::Naive, REFERENCE_SEED);
    let phase2: Vec<_> = trace.into_iter().filter(|r| r.phase == 2).collect();
    let ramps = pc_profile(&phase2).ramps as u64;
    ensure(ramps == trips, || format!("{ramps} ramps, {trips} trips"))?;
    Ok(format!("{ramps} ramps = {trips} trips"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fft correctness", fft_correctness),
        ("vl signature", vl_signature),
        ("vsetvli law", vsetvli_law),
        ("determinism", determinism),
        ("round trips", round_trips),
        ("timing sanity", timing_sanity),
        ("phase 3 regression", phase_regression),
        ("scheduler soundness and gain", scheduler),
        ("decoder fidelity", decoder_fidelity),
        ("pc sawtooth", pc_sawtooth),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("acceptance {:>2} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
