use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sdvkit::analysis::{compare, metrics_csv, metrics_text, pc_profile, phase_metrics};
use sdvkit::prv::{emit_prv, to_prv};
use sdvkit::scheduler::{schedule_stream, verify_equivalence, Heuristic};
use sdvkit::timing::{emit_timeline, simulate, CounterSet, TimelineFormat, TimingParams};
use sdvkit::workloads::{self, FftPlan, FftVariant};
use sdvkit::{parse_vstream, read_trace, run, write_trace, write_vstream, MachineConfig, TraceRecord};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Long-vector RISC-V workflow: generate streams, emulate them, analyze
/// traces, model timing and reschedule windows.
#[derive(Parser, Debug)]
#[command(name = "sdvkit", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a VSTREAM workload.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run a VSTREAM on the functional emulator and write its trace.
    Emulate(EmulateArgs),
    /// Per-phase metrics of a trace.
    Analyze(AnalyzeArgs),
    /// Export a trace as Paraver .prv plus .pcf.
    ToPrv(ToPrvArgs),
    /// Run the cycle model over a trace.
    Simulate(SimulateArgs),
    /// Reschedule the windows of a VSTREAM and check equivalence.
    Schedule(ScheduleArgs),
    /// Compare two traces phase by phase under one timing model.
    Compare(CompareArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Forward complex FFT of seeded random input.
    Fft(GenFftArgs),
    /// y <- a*x + y over seeded random vectors.
    Axpy(GenAxpyArgs),
}

#[derive(Args, Debug)]
struct MachineOpt {
    /// Machine description (INI key=value, may include timing keys) [default: built-in 16384-bit, 8-lane machine]
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TimingOpt {
    /// Timing parameters (INI key=value) [default: built-in defaults]
    #[arg(long, value_name = "FILE")]
    timing: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenFftArgs {
    /// Transform size, a power of two in [64, 65536]
    #[arg(long, default_value_t = workloads::REFERENCE_N)]
    n: usize,
    /// Vectorization strategy
    #[arg(long, value_enum, default_value_t = VariantArg::Naive)]
    variant: VariantArg,
    /// Seed for the random input
    #[arg(long, default_value_t = workloads::REFERENCE_SEED)]
    seed: u64,
    /// Use a unit impulse as input instead of random samples
    #[arg(long)]
    impulse: bool,
    #[command(flatten)]
    machine: MachineOpt,
    /// Output VSTREAM file ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenAxpyArgs {
    /// Vector length
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Scalar multiplier
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    a: f64,
    /// Seed for x and y
    #[arg(long, default_value_t = workloads::REFERENCE_SEED)]
    seed: u64,
    #[command(flatten)]
    machine: MachineOpt,
    /// Output VSTREAM file ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Naive,
    Wide,
}

#[derive(Args, Debug)]
struct EmulateArgs {
    /// Input VSTREAM ("-" for stdin)
    input: PathBuf,
    #[command(flatten)]
    machine: MachineOpt,
    /// Output trace ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Input trace ("-" for stdin)
    input: PathBuf,
    /// Timing parameters; when given, cycles, IPC and memory occupancy are reported
    #[arg(long, value_name = "FILE")]
    timing: Option<PathBuf>,
    /// Report as CSV
    #[arg(long, conflicts_with = "text")]
    csv: bool,
    /// Report as plain text (the default)
    #[arg(long)]
    text: bool,
    /// Output report ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ToPrvArgs {
    /// Input trace ("-" for stdin)
    input: PathBuf,
    /// Timing parameters; when given, the time axis is modeled cycles instead of record index
    #[arg(long, value_name = "FILE")]
    timing: Option<PathBuf>,
    /// Output .prv file; the .pcf is written next to it
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Input trace ("-" for stdin)
    input: PathBuf,
    #[command(flatten)]
    timing: TimingOpt,
    /// Timeline CSV (seq,pipeline,issue,start,complete,mnemonic)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Timeline SVG, one lane per pipeline
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    /// Alternate pipelines, then longest critical path, then program order
    Interleave,
    /// Longest critical path, then program order
    CriticalPath,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    /// Input VSTREAM ("-" for stdin)
    input: PathBuf,
    #[command(flatten)]
    machine: MachineOpt,
    /// Timing parameters, overriding any timing keys of --config
    #[arg(long, value_name = "FILE")]
    timing: Option<PathBuf>,
    /// Priority heuristic for ready instructions
    #[arg(long, value_enum, default_value_t = HeuristicArg::Interleave)]
    heuristic: HeuristicArg,
    /// Output VSTREAM ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Baseline trace
    a: PathBuf,
    /// Candidate trace
    b: PathBuf,
    #[command(flatten)]
    timing: TimingOpt,
    /// Report as CSV instead of text
    #[arg(long)]
    csv: bool,
    /// Output report ("-" or omitted: stdout)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier command
    manifest: PathBuf,
}

/// Recorded next to every output so the command can be re-run exactly.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RunManifest {
    tool: String,
    version: String,
    command: String,
    args: Vec<String>,
    inputs: Vec<String>,
    config: Option<String>,
    timing: Option<String>,
    seed: Option<u64>,
    outputs: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    /// Bad usage or IO: exit 2.
    Io(String),
    /// The inputs were read but the work failed: exit 1.
    Domain(String),
}

impl CliError {
    fn io(path: &Path, e: io::Error) -> Self {
        let what = match e.kind() {
            io::ErrorKind::NotFound => "no such file".to_string(),
            _ => e.to_string(),
        };
        CliError::Io(format!("{}: {what}", path.display()))
    }

    fn domain(context: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Domain(format!("{}: {e}", context.display()))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn read_input(path: &Path) -> Result<String> {
    if is_stdio(path) {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io(path, e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes via a temporary file in the destination directory and renames it
/// into place, so a failed command never leaves a partial file.
fn write_file(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Collects outputs and writes them only once the whole command succeeded.
struct Outputs {
    files: Vec<(PathBuf, String)>,
    stdout: String,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            files: Vec::new(),
            stdout: String::new(),
        }
    }

    fn emit(&mut self, path: Option<&Path>, contents: String) {
        match path {
            Some(p) if !is_stdio(p) => self.files.push((p.to_path_buf(), contents)),
            _ => self.stdout.push_str(&contents),
        }
    }

    fn commit(self, manifest: Option<RunManifest>) -> Result<()> {
        for (path, contents) in &self.files {
            write_file(path, contents)?;
        }
        if let (Some(m), Some((first, _))) = (manifest, self.files.first()) {
            let mut outputs = m.outputs;
            outputs.extend(self.files.iter().map(|(p, _)| p.display().to_string()));
            let m = RunManifest { outputs, ..m };
            let text = toml::to_string(&m).map_err(|e| CliError::Domain(e.to_string()))?;
            write_file(&manifest_path(first), &text)?;
        }
        let mut out = io::stdout().lock();
        out.write_all(self.stdout.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Io(format!("stdout: {e}")))
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

fn load_machine(path: Option<&Path>) -> Result<MachineConfig> {
    match path {
        None => Ok(MachineConfig::default()),
        Some(p) => MachineConfig::from_ini_str(&read_input(p)?).map_err(|e| CliError::domain(p, e)),
    }
}

fn load_timing(path: Option<&Path>) -> Result<TimingParams> {
    match path {
        None => Ok(TimingParams::default()),
        Some(p) => TimingParams::from_ini_str(&read_input(p)?).map_err(|e| CliError::domain(p, e)),
    }
}

fn load_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    read_trace(&read_input(path)?).map_err(|e| CliError::domain(path, e))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn manifest(args: &[String], command: &str) -> RunManifest {
    RunManifest {
        tool: "sdvkit".to_string(),
        version: VERSION.to_string(),
        command: command.to_string(),
        args: args.to_vec(),
        inputs: Vec::new(),
        config: None,
        timing: None,
        seed: None,
        outputs: Vec::new(),
    }
}

fn counters_text(c: &CounterSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "total_cycles        {}", c.total_cycles);
    let _ = writeln!(s, "vector_instr_count  {}", c.vector_instr_count);
    let _ = writeln!(s, "scalar_instr_count  {}", c.scalar_instr_count);
    let _ = writeln!(s, "mem_busy_cycles     {}", c.mem_busy_cycles);
    let _ = writeln!(s, "arith_busy_cycles   {}", c.arith_busy_cycles);
    let _ = writeln!(s, "overlap_cycles      {}", c.overlap_cycles);
    let _ = writeln!(s, "vpu_idle_cycles     {}", c.vpu_idle_cycles);
    let _ = writeln!(s, "ipc                 {:.4}", c.ipc());
    s
}

fn gen_fft(a: &GenFftArgs, argv: &[String]) -> Result<()> {
    let cfg = load_machine(a.machine.config.as_deref())?;
    let variant = match a.variant {
        VariantArg::Naive => FftVariant::Naive,
        VariantArg::Wide => FftVariant::Wide,
    };
    let plan = FftPlan::new(a.n, variant).map_err(|e| CliError::Domain(e.to_string()))?;
    let input = if a.impulse {
        workloads::impulse(a.n)
    } else {
        workloads::random_input(a.n, a.seed)
    };
    let prog = workloads::gen_fft(&plan, &input, &cfg).map_err(|e| CliError::Domain(e.to_string()))?;
    let mut header = format!(
        "# fft n={} variant={} seed={} input={}\n",
        a.n,
        variant,
        a.seed,
        if a.impulse { "impulse" } else { "random" }
    );
    for (name, base) in plan.layout.buffers() {
        let _ = writeln!(header, "# buffer {name} {base:#x}");
    }
    for (phase, trips) in &prog.trip_counts {
        let _ = writeln!(header, "# trips phase={phase} {trips}");
    }
    let mut out = Outputs::new();
    out.emit(a.output.as_deref(), header + &prog.text);
    let mut m = manifest(argv, "gen fft");
    m.config = a.machine.config.as_deref().map(path_str);
    m.seed = Some(a.seed);
    out.commit(Some(m))
}

fn gen_axpy(a: &GenAxpyArgs, argv: &[String]) -> Result<()> {
    let cfg = load_machine(a.machine.config.as_deref())?;
    let x = workloads::random_values(a.n, a.seed);
    let y = workloads::random_values(a.n, a.seed.wrapping_add(1));
    let prog = workloads::gen_axpy(a.a, &x, &y, &cfg).map_err(|e| CliError::Domain(e.to_string()))?;
    let header = format!(
        "# axpy n={} a={:?} seed={}\n# buffer x {:#x}\n# buffer y {:#x}\n",
        a.n, a.a, a.seed, prog.x_addr, prog.y_addr
    );
    let mut out = Outputs::new();
    out.emit(a.output.as_deref(), header + &prog.text);
    let mut m = manifest(argv, "gen axpy");
    m.config = a.machine.config.as_deref().map(path_str);
    m.seed = Some(a.seed);
    out.commit(Some(m))
}

fn emulate(a: &EmulateArgs, argv: &[String]) -> Result<()> {
    let text = read_input(&a.input)?;
    let cfg = load_machine(a.machine.config.as_deref())?;
    let items = parse_vstream(&text).map_err(|e| CliError::domain(&a.input, e))?;
    let (_, trace) = run(&cfg, &items).map_err(|e| CliError::domain(&a.input, e))?;
    let mut out = Outputs::new();
    out.emit(a.output.as_deref(), write_trace(&trace));
    let mut m = manifest(argv, "emulate");
    m.inputs.push(path_str(&a.input));
    m.config = a.machine.config.as_deref().map(path_str);
    out.commit(Some(m))
}

fn analyze(a: &AnalyzeArgs, argv: &[String]) -> Result<()> {
    let trace = load_trace(&a.input)?;
    let timed = match &a.timing {
        Some(p) => {
            let params = load_timing(Some(p))?;
            Some(simulate(&trace, &params))
        }
        None => None,
    };
    let metrics = phase_metrics(
        &trace,
        timed.as_ref().map(|(e, c)| (e.as_slice(), c.total_cycles)),
    )
    .map_err(|e| CliError::domain(&a.input, e))?;
    let report = if a.csv {
        metrics_csv(&metrics)
    } else {
        let mut s = metrics_text(&metrics);
        let _ = writeln!(s, "pc ramps {}", pc_profile(&trace).ramps);
        if let Some((_, c)) = &timed {
            s.push_str(&counters_text(c));
        }
        s
    };
    let mut out = Outputs::new();
    out.emit(a.output.as_deref(), report);
    let mut m = manifest(argv, "analyze");
    m.inputs.push(path_str(&a.input));
    m.timing = a.timing.as_deref().map(path_str);
    out.commit(Some(m))
}

fn to_prv_cmd(a: &ToPrvArgs, argv: &[String]) -> Result<()> {
    if is_stdio(&a.output) {
        return Err(CliError::Io("to-prv needs a file for -o (a .pcf is written next to it)".into()));
    }
    let trace = load_trace(&a.input)?;
    let timed = match &a.timing {
        Some(p) => Some(simulate(&trace, &load_timing(Some(p))?)),
        None => None,
    };
    let doc = to_prv(
        &trace,
        timed.as_ref().map(|(e, c)| (e.as_slice(), c.total_cycles)),
    )
    .map_err(|e| CliError::domain(&a.input, e))?;
    let (prv, pcf) = emit_prv(&doc);
    let mut out = Outputs::new();
    out.emit(Some(&a.output), prv);
    out.emit(Some(&a.output.with_extension("pcf")), pcf);
    let mut m = manifest(argv, "to-prv");
    m.inputs.push(path_str(&a.input));
    m.timing = a.timing.as_deref().map(path_str);
    out.commit(Some(m))
}

fn simulate_cmd(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let trace = load_trace(&a.input)?;
    let params = load_timing(a.timing.timing.as_deref())?;
    let (entries, counters) = simulate(&trace, &params);
    let mut out = Outputs::new();
    let csv = emit_timeline(&entries, TimelineFormat::Csv);
    if let Some(p) = &a.output {
        out.emit(Some(p), csv);
    }
    if let Some(svg) = &a.svg {
        out.emit(Some(svg), emit_timeline(&entries, TimelineFormat::Svg));
    }
    out.stdout.push_str(&counters_text(&counters));
    let mut m = manifest(argv, "simulate");
    m.inputs.push(path_str(&a.input));
    m.timing = a.timing.timing.as_deref().map(path_str);
    out.commit(Some(m))
}

fn schedule_cmd(a: &ScheduleArgs, argv: &[String]) -> Result<()> {
    let text = read_input(&a.input)?;
    let mut cfg = load_machine(a.machine.config.as_deref())?;
    if let Some(p) = &a.timing {
        cfg.timing = load_timing(Some(p))?;
    }
    let items = parse_vstream(&text).map_err(|e| CliError::domain(&a.input, e))?;
    let heuristic = match a.heuristic {
        HeuristicArg::Interleave => Heuristic::Interleave,
        HeuristicArg::CriticalPath => Heuristic::CriticalPath,
    };
    let outcome = schedule_stream(&cfg, &items, heuristic).map_err(|e| CliError::domain(&a.input, e))?;
    let same = verify_equivalence(&cfg, &items, &outcome.items)
        .map_err(|e| CliError::domain(&a.input, e))?;
    if !same {
        return Err(CliError::Domain(format!(
            "{}: rescheduled stream is not equivalent to the input",
            a.input.display()
        )));
    }
    let mut out = Outputs::new();
    let body = if outcome.items == items { text } else { write_vstream(&outcome.items) };
    out.emit(a.output.as_deref(), body);
    let summary = format!(
        "equivalent true\nwindows {} reordered {}\ncycles {} -> {} (delta {})\n",
        outcome.windows,
        outcome.windows_changed,
        outcome.original_cycles,
        outcome.scheduled_cycles,
        outcome.scheduled_cycles as i64 - outcome.original_cycles as i64
    );
    if a.output.as_deref().is_some_and(|p| !is_stdio(p)) {
        out.stdout.push_str(&summary);
    } else {
        eprint!("{summary}");
    }
    let mut m = manifest(argv, "schedule");
    m.inputs.push(path_str(&a.input));
    m.config = a.machine.config.as_deref().map(path_str);
    m.timing = a.timing.as_deref().map(path_str);
    out.commit(Some(m))
}

fn compare_cmd(a: &CompareArgs, argv: &[String]) -> Result<()> {
    let params = load_timing(a.timing.timing.as_deref())?;
    let analyzed = |path: &Path| -> Result<_> {
        let trace = load_trace(path)?;
        let (e, c) = simulate(&trace, &params);
        let m = phase_metrics(&trace, Some((&e, c.total_cycles))).map_err(|e| CliError::domain(path, e))?;
        Ok((m, c))
    };
    let (ma, ca) = analyzed(&a.a)?;
    let (mb, cb) = analyzed(&a.b)?;
    let cmp = compare(&ma, &mb).map_err(|e| CliError::Domain(e.to_string()))?;
    let report = if a.csv {
        cmp.to_csv()
    } else {
        let mut s = cmp.to_text();
        let _ = writeln!(
            s,
            "total cycles {} -> {}, ipc {:.4} -> {:.4}",
            ca.total_cycles,
            cb.total_cycles,
            ca.ipc(),
            cb.ipc()
        );
        s
    };
    let mut out = Outputs::new();
    out.emit(a.output.as_deref(), report);
    let mut m = manifest(argv, "compare");
    m.inputs.extend([path_str(&a.a), path_str(&a.b)]);
    m.timing = a.timing.timing.as_deref().map(path_str);
    out.commit(Some(m))
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let text = read_input(&a.manifest)?;
    let m: RunManifest = toml::from_str(&text).map_err(|e| CliError::domain(&a.manifest, e))?;
    if m.tool != "sdvkit" {
        return Err(CliError::domain(&a.manifest, "not an sdvkit manifest"));
    }
    let argv: Vec<String> = std::iter::once("sdvkit".to_string()).chain(m.args.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::domain(&a.manifest, e))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::domain(&a.manifest, "manifest records a replay"));
    }
    dispatch(&cli, &m.args)
}

fn dispatch(cli: &Cli, args: &[String]) -> Result<()> {
    match &cli.command {
        Command::Gen(GenCommand::Fft(a)) => gen_fft(a, args),
        Command::Gen(GenCommand::Axpy(a)) => gen_axpy(a, args),
        Command::Emulate(a) => emulate(a, args),
        Command::Analyze(a) => analyze(a, args),
        Command::ToPrv(a) => to_prv_cmd(a, args),
        Command::Simulate(a) => simulate_cmd(a, args),
        Command::Schedule(a) => schedule_cmd(a, args),
        Command::Compare(a) => compare_cmd(a, args),
        Command::Replay(a) => replay(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&cli, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(msg)) => {
            eprintln!("sdvkit: error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("sdvkit: error: {msg}");
            ExitCode::from(1)
        }
    }
}
