//! Cycle and energy models for a systolic array split into horizontal slabs
//! that can run independently, fuse into taller groups, or act as one
//! monolithic array.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! sweeps live in `sisa-sim`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod energy;
pub mod geometry;
pub mod microsim;
pub mod perfmodel;
pub mod scheduler;
pub mod workloads;

pub use baselines::{simulate_arch, ArchModel, ArchRun, ArchVariant, ShapePolicy};
pub use energy::{EnergyBreakdown, EnergyConfig};
pub use geometry::{ArrayGeometry, DataFormat, ExecutionMode, LogicalUnit, ModeKind};
pub use perfmodel::{MemoryConfig, PerfOptions, SimResult, TrafficCounters};
pub use scheduler::{plan_gemm, GemmShape, Schedule, Tile};
pub use workloads::{ModelDescriptor, SweepPoint};
