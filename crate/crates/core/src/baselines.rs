//! The slab array and its two comparison points, behind one entry point.
//!
//! A monolithic TPU-like array is one logical unit as tall as the array. A
//! ReDas-like array reshapes its PEs into one of a few fixed rectangles and
//! then behaves like a monolithic array of that shape. All three reuse the
//! same cycle and energy models.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::energy::{edp, EnergyBreakdown, EnergyConfig};
use crate::geometry::{ArrayGeometry, GeometryError};
use crate::perfmodel::{simulate_with, MemoryConfig, PerfOptions, SimResult};
use crate::scheduler::{mode_kind_for, plan_gemm_with, plan_single_unit, PlanOptions, Schedule, ScheduleError};
use crate::{DataFormat, GemmShape};

/// Published ReDas-like shapes, tallest first.
pub const REDAS_SHAPES: [(u64, u64); 4] = [(128, 128), (64, 256), (32, 384), (16, 448)];

/// Power of a reshapeable PE relative to a plain one.
pub const REDAS_PE_POWER_FACTOR: f64 = 2.49;

/// How a reshapeable array picks its shape for a GEMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShapePolicy {
    /// Tallest shape whose height `m` fills completely; the shortest shape
    /// when `m` is below every height.
    #[default]
    HeightFit,
    /// Simulate every shape and keep the fastest; ties go to the taller
    /// shape.
    MinLatency,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchVariant {
    Sisa,
    MonolithicTpu,
    RedasLike {
        shapes: Vec<(u64, u64)>,
        policy: ShapePolicy,
        pe_power_factor: f64,
    },
}

impl ArchVariant {
    pub fn redas_default() -> Self {
        ArchVariant::RedasLike {
            shapes: REDAS_SHAPES.to_vec(),
            policy: ShapePolicy::default(),
            pe_power_factor: REDAS_PE_POWER_FACTOR,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ArchVariant::Sisa => "sisa",
            ArchVariant::MonolithicTpu => "tpu",
            ArchVariant::RedasLike { .. } => "redas",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchModel {
    pub variant: ArchVariant,
    pub plan: PlanOptions,
    pub perf: PerfOptions,
}

impl ArchModel {
    pub fn new(variant: ArchVariant) -> Self {
        Self {
            variant,
            plan: PlanOptions::default(),
            perf: PerfOptions::default(),
        }
    }

    pub fn validate(&self, g: &ArrayGeometry) -> Result<(), ArchError> {
        if let ArchVariant::RedasLike {
            shapes,
            pe_power_factor,
            ..
        } = &self.variant
        {
            if shapes.is_empty() {
                return Err(ArchError::EmptyShapeSet);
            }
            for &(h, w) in shapes {
                if h == 0 || w == 0 || h * w > g.pe_count() {
                    return Err(ArchError::ShapeTooLarge { height: h, width: w });
                }
            }
            if pe_power_factor.is_nan() || *pe_power_factor <= 0.0 {
                return Err(ArchError::PowerFactor);
            }
        }
        Ok(())
    }

    /// Energy constants as seen by this architecture. Monolithic and
    /// reshapeable arrays carry no slab buffers and no gating support.
    pub fn energy_config(&self, base: &EnergyConfig) -> EnergyConfig {
        match &self.variant {
            ArchVariant::Sisa => *base,
            ArchVariant::MonolithicTpu => EnergyConfig {
                slab_buffers_total: 0.0,
                ..base.without_gating_support()
            },
            ArchVariant::RedasLike { pe_power_factor, .. } => {
                let plain = base.without_gating_support();
                EnergyConfig {
                    slab_buffers_total: 0.0,
                    pe_array_total: plain.pe_array_total * pe_power_factor,
                    e_mac_nj: plain.e_mac_nj * pe_power_factor,
                    ..plain
                }
            }
        }
    }

    pub fn memory_config(&self, base: &MemoryConfig) -> MemoryConfig {
        match self.variant {
            ArchVariant::Sisa => *base,
            _ => MemoryConfig {
                slab_local_buffers: false,
                ..*base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchError {
    EmptyShapeSet,
    ShapeTooLarge { height: u64, width: u64 },
    PowerFactor,
    Geometry(GeometryError),
    Schedule(ScheduleError),
}

impl From<ScheduleError> for ArchError {
    fn from(e: ScheduleError) -> Self {
        ArchError::Schedule(e)
    }
}

impl From<GeometryError> for ArchError {
    fn from(e: GeometryError) -> Self {
        ArchError::Geometry(e)
    }
}

impl fmt::Display for ArchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyShapeSet => f.write_str("reshapeable array needs at least one shape"),
            Self::ShapeTooLarge { height, width } => {
                write!(f, "shape {height}x{width} exceeds the PE budget")
            }
            Self::PowerFactor => f.write_str("PE power factor must be positive"),
            Self::Geometry(e) => write!(f, "geometry: {e}"),
            Self::Schedule(e) => write!(f, "{e}"),
        }
    }
}

/// `g` viewed as a single unit of full height.
pub fn monolithic_geometry(g: &ArrayGeometry) -> ArrayGeometry {
    ArrayGeometry {
        rows: g.rows,
        cols: g.cols,
        slab_height: g.rows,
        num_slabs: 1,
    }
}

fn shape_geometry(height: u64, width: u64) -> ArrayGeometry {
    ArrayGeometry {
        rows: height,
        cols: width,
        slab_height: height,
        num_slabs: 1,
    }
}

/// Tiles M into chunks of at most `g.rows` rows and N into chunks of at
/// most `g.cols` columns, all executed one after another on a single unit
/// that drains through the full array height.
pub fn monolithic_plan(
    shape: GemmShape,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
) -> Result<Schedule, ScheduleError> {
    plan_single_unit(shape, &monolithic_geometry(g), mem, fmt)
}

pub fn redas_select_shape(
    shape: GemmShape,
    shapes: &[(u64, u64)],
    policy: ShapePolicy,
    mem: &MemoryConfig,
    fmt: DataFormat,
    perf: PerfOptions,
) -> Result<(u64, u64), ArchError> {
    if shapes.is_empty() {
        return Err(ArchError::EmptyShapeSet);
    }
    match policy {
        ShapePolicy::HeightFit => {
            let filled = shapes
                .iter()
                .copied()
                .filter(|&(h, _)| h <= shape.m)
                .max_by_key(|&(h, w)| (h, w));
            Ok(filled.unwrap_or_else(|| {
                shapes
                    .iter()
                    .copied()
                    .min_by_key(|&(h, w)| (h, core::cmp::Reverse(w)))
                    .expect("non-empty")
            }))
        }
        ShapePolicy::MinLatency => {
            let mut best: Option<((u64, u64), u64)> = None;
            for &(h, w) in shapes {
                let cycles = reshaped_cycles(shape, h, w, mem, fmt, perf)?;
                let better = match best {
                    None => true,
                    Some(((bh, _), bc)) => cycles < bc || (cycles == bc && h > bh),
                };
                if better {
                    best = Some(((h, w), cycles));
                }
            }
            Ok(best.expect("non-empty").0)
        }
    }
}

/// Cycles of `shape` on a single `height × width` unit.
pub fn reshaped_cycles(
    shape: GemmShape,
    height: u64,
    width: u64,
    mem: &MemoryConfig,
    fmt: DataFormat,
    perf: PerfOptions,
) -> Result<u64, ArchError> {
    let g = shape_geometry(height, width);
    let s = plan_single_unit(shape, &g, mem, fmt)?;
    Ok(simulate_with(&s, &g, mem, fmt, perf).cycles)
}

/// Everything one simulated GEMM produced on one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchRun {
    pub arch: &'static str,
    /// Geometry the run was simulated on (a reshaped one for ReDas-like).
    pub geometry: ArrayGeometry,
    pub schedule: Schedule,
    pub sim: SimResult,
    pub energy: EnergyBreakdown,
    pub chosen_shape: Option<(u64, u64)>,
}

pub fn simulate_arch(
    model: &ArchModel,
    shape: GemmShape,
    g: &ArrayGeometry,
    mem: &MemoryConfig,
    fmt: DataFormat,
    ecfg: &EnergyConfig,
) -> Result<ArchRun, ArchError> {
    model.validate(g)?;
    let mem = model.memory_config(mem);
    let ecfg = model.energy_config(ecfg);
    let (geometry, schedule, chosen_shape) = match &model.variant {
        ArchVariant::Sisa => (*g, plan_gemm_with(shape, g, &mem, fmt, model.plan)?, None),
        ArchVariant::MonolithicTpu => {
            let mg = monolithic_geometry(g);
            (mg, plan_single_unit(shape, &mg, &mem, fmt)?, None)
        }
        ArchVariant::RedasLike { shapes, policy, .. } => {
            let (h, w) = redas_select_shape(shape, shapes, *policy, &mem, fmt, model.perf)?;
            let rg = shape_geometry(h, w);
            (rg, plan_single_unit(shape, &rg, &mem, fmt)?, Some((h, w)))
        }
    };
    let sim = simulate_with(&schedule, &geometry, &mem, fmt, model.perf);
    let energy = edp(&sim, &ecfg, &geometry);
    Ok(ArchRun {
        arch: model.variant.name(),
        geometry,
        schedule,
        sim,
        energy,
        chosen_shape,
    })
}

/// Human-readable mode of an architecture at `m` rows, e.g.
/// `independent×8`, `monolithic×1+fused32×4`, `reshape16x448`.
pub fn mode_label(model: &ArchModel, m: u64, g: &ArrayGeometry) -> String {
    match &model.variant {
        ArchVariant::Sisa => {
            let label = |rows: u64| {
                let kind = mode_kind_for(rows, g);
                let units = g.rows / kind.group_height(g);
                format!("{kind}×{units}")
            };
            if m <= g.rows {
                label(m)
            } else {
                let residual = m - g.rows * ((m - 1) / g.rows);
                if residual == g.rows {
                    label(g.rows)
                } else {
                    format!("{}+{}", label(g.rows), label(residual))
                }
            }
        }
        ArchVariant::MonolithicTpu => String::from("monolithic×1"),
        ArchVariant::RedasLike { shapes, policy, .. } => match policy {
            ShapePolicy::HeightFit => {
                // HeightFit depends on m only.
                let probe = GemmShape { m, n: 1, k: 1 };
                match redas_select_shape(probe, shapes, *policy, &MemoryConfig::default(), DataFormat::default(), PerfOptions::default()) {
                    Ok((h, w)) => format!("reshape{h}x{w}"),
                    Err(_) => String::from("reshape"),
                }
            }
            ShapePolicy::MinLatency => String::from("reshape-min-latency"),
        },
    }
}
