//! Long-vector RISC-V toolkit: VSTREAM parsing, functional emulation,
//! execution traces, a cycle model, window rescheduling, FFT workloads and
//! per-phase analysis.

pub mod analysis;
pub mod config;
pub mod emulator;
pub mod isa;
pub mod prv;
pub mod scheduler;
pub mod timing;
pub mod vstream;
pub mod workloads;

pub use config::{ConfigError, MachineConfig};
pub use emulator::{run, EmuError, Emulator, MachineState, RunError};
pub use timing::{simulate, CounterSet, Pipeline, TimelineEntry, TimingParams};
pub use vstream::{parse_vstream, read_trace, write_trace, write_vstream, AddrRange, ItemKind, StreamItem, TraceRecord};
