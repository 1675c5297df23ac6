use sdvkit::isa::parse_instruction;
use sdvkit::scheduler::{
    build_dependences, reschedule, schedule_stream, verify_equivalence, DependenceGraph, Heuristic,
};
use sdvkit::timing::{simulate, TimingParams};
use sdvkit::vstream::{AddrRange, ItemKind, StreamItem};
use sdvkit::workloads::{gen_fft, random_input, FftPlan, FftVariant};
use sdvkit::{parse_vstream, run, MachineConfig, TraceRecord};

fn rec(seq: u64, text: &str, vl: u64, range: Option<(u64, u64)>) -> TraceRecord {
    TraceRecord {
        seq,
        pc: 4 * seq,
        phase: 0,
        window: 0,
        scalar_before: 0,
        instr: parse_instruction(text).unwrap(),
        vl,
        sew_bits: 64,
        addresses: range.map(|(base, len)| vec![AddrRange { base, len }]).unwrap_or_default(),
    }
}

/// Every topological order of `g`, by brute force.
fn all_orders(g: &DependenceGraph) -> Vec<Vec<usize>> {
    fn go(g: &DependenceGraph, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == g.node_count {
            out.push(prefix.clone());
            return;
        }
        for n in 0..g.node_count {
            if prefix.contains(&n) {
                continue;
            }
            let ready = g.edges.iter().filter(|e| e.to == n).all(|e| prefix.contains(&e.from));
            if ready {
                prefix.push(n);
                go(g, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, &mut Vec::new(), &mut out);
    out
}

#[test]
fn two_independent_chains_reach_the_optimum() {
    let p = TimingParams::default();
    let w = vec![
        rec(0, "vle64.v v1, (x10)", 256, Some((0x1000, 2048))),
        rec(1, "vle64.v v2, (x11)", 256, Some((0x3000, 2048))),
        rec(2, "vfadd.vv v3, v1, v1", 256, None),
        rec(3, "vfadd.vv v4, v2, v2", 256, None),
    ];
    let g = build_dependences(&w);
    let best = all_orders(&g)
        .into_iter()
        .map(|o| {
            let t: Vec<_> = o.iter().map(|i| w[*i].clone()).collect();
            simulate(&t, &p).1.total_cycles
        })
        .min()
        .unwrap();
    let chosen = reschedule(&w, &p);
    let order: Vec<usize> = chosen.iter().map(|r| r.seq as usize).collect();
    assert!(g.is_topological(&order));
    assert_eq!(simulate(&chosen, &p).1.total_cycles, best);
    assert!(best <= simulate(&w, &p).1.total_cycles);
    assert_eq!(order, vec![0, 2, 1, 3]);
}

#[test]
fn swapped_raw_pair_is_detected() {
    let cfg = MachineConfig::default();
    let text = ".memf64 0x1000 1 2 3 4\n.xreg x5 4\n.xreg x10 0x1000\nvsetvli x0, x5, e64, m1\nvle64.v v1, (x10)\nvfadd.vv v2, v1, v1\n";
    let items = parse_vstream(text).unwrap();
    assert!(verify_equivalence(&cfg, &items, &items).unwrap());
    let mut swapped = items.clone();
    let n = swapped.len();
    swapped.swap(n - 1, n - 2);
    assert!(!verify_equivalence(&cfg, &items, &swapped).unwrap());
}

fn phase2_window(n: usize) -> Vec<StreamItem> {
    let cfg = MachineConfig::default();
    let plan = FftPlan::new(n, FftVariant::Naive).unwrap();
    let prog = gen_fft(&plan, &random_input(n, 1), &cfg).unwrap();
    let items = parse_vstream(&prog.text).unwrap();
    let first = items.iter().position(|i| matches!(i.kind, ItemKind::PhaseMark(2))).unwrap();
    let last = items.iter().position(|i| matches!(i.kind, ItemKind::PhaseMark(3))).unwrap();
    // keep the setup so the window runs on its own: memory init, phase 0 copy, and
    // the phase 2 pass itself
    items[..first]
        .iter()
        .filter(|i| !matches!(i.kind, ItemKind::Instruction(_)) || i.phase == 0)
        .chain(&items[first..last])
        .cloned()
        .collect()
}

#[test]
fn grouped_iterations_gain_overlap() {
    let cfg = MachineConfig::default();
    let items = phase2_window(512);
    let out = schedule_stream(&cfg, &items, Heuristic::Interleave).unwrap();
    assert!(verify_equivalence(&cfg, &items, &out.items).unwrap());
    let (_, before) = run(&cfg, &items).unwrap();
    let (_, after) = run(&cfg, &out.items).unwrap();
    let b = simulate(&before, &cfg.timing).1;
    let a = simulate(&after, &cfg.timing).1;
    assert!(a.overlap_cycles > b.overlap_cycles);
    assert!(a.total_cycles < b.total_cycles);
}

#[test]
fn dependent_chain_is_untouched() {
    let cfg = MachineConfig::default();
    let text = ".xreg x5 8\n.window 1\nvsetvli x0, x5, e64, m1\nvid.v v1\nvadd.vv v2, v1, v1\nvadd.vv v3, v2, v2\nvfmul.vv v4, v3, v3\n";
    let items = parse_vstream(text).unwrap();
    let out = schedule_stream(&cfg, &items, Heuristic::Interleave).unwrap();
    assert_eq!(out.items, items);
    assert_eq!(out.scheduled_cycles, out.original_cycles);
}
