//! Static and dynamic energy, and energy-delay product.

use core::fmt;

use crate::geometry::ArrayGeometry;
use crate::perfmodel::{SimResult, TrafficCounters};

const NJ: f64 = 1e-9;

/// Per-cycle static energies are in nJ, per-access energies in nJ per
/// event (per byte for DRAM).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    /// Whole PE array, as synthesized with slab power-gating support.
    pub pe_array_total: f64,
    pub global_buffer: f64,
    pub slab_buffers_total: f64,
    pub output_buffer: f64,
    /// Share of the PE-array energy spent on power-gating support. The
    /// synthesized `pe_array_total` already contains it; a design without
    /// gating support spends `pe_array_total / (1 + frac)`.
    pub gating_energy_overhead_frac: f64,
    /// Fraction of its active static energy a gated slab still leaks.
    pub gated_leak_frac: f64,
    pub e_mac_nj: f64,
    pub e_global_sram_access_nj: f64,
    pub e_slab_sram_access_nj: f64,
    pub e_output_sram_access_nj: f64,
    pub e_dram_per_byte_nj: f64,
    pub clock_hz: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            pe_array_total: 21.60,
            global_buffer: 5.22,
            slab_buffers_total: 0.12,
            output_buffer: 1.25,
            gating_energy_overhead_frac: 0.03,
            gated_leak_frac: 0.0,
            // Per-access values are calibration constants, not measurements.
            e_mac_nj: 0.0005,
            e_global_sram_access_nj: 0.004,
            e_slab_sram_access_nj: 0.0075,
            e_output_sram_access_nj: 0.004,
            e_dram_per_byte_nj: 0.03,
            clock_hz: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnergyError {
    Negative(&'static str),
    FractionOutOfRange(&'static str),
    ZeroClock,
    /// A comparison divided by a zero cycle count or zero EDP.
    EmptyWorkload,
}

impl fmt::Display for EnergyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Negative(n) => write!(f, "{n} must not be negative"),
            Self::FractionOutOfRange(n) => write!(f, "{n} must lie in [0, 1]"),
            Self::ZeroClock => f.write_str("clock_hz must be positive"),
            Self::EmptyWorkload => f.write_str("cannot compare against an empty workload"),
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, v) in [
            ("pe_array_total", self.pe_array_total),
            ("global_buffer", self.global_buffer),
            ("slab_buffers_total", self.slab_buffers_total),
            ("output_buffer", self.output_buffer),
            ("e_mac_nj", self.e_mac_nj),
            ("e_global_sram_access_nj", self.e_global_sram_access_nj),
            ("e_slab_sram_access_nj", self.e_slab_sram_access_nj),
            ("e_output_sram_access_nj", self.e_output_sram_access_nj),
            ("e_dram_per_byte_nj", self.e_dram_per_byte_nj),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(EnergyError::Negative(name));
            }
        }
        for (name, v) in [
            ("gating_energy_overhead_frac", self.gating_energy_overhead_frac),
            ("gated_leak_frac", self.gated_leak_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(EnergyError::FractionOutOfRange(name));
            }
        }
        if self.clock_hz.is_nan() || self.clock_hz <= 0.0 {
            return Err(EnergyError::ZeroClock);
        }
        Ok(())
    }

    /// nJ per cycle with every slab powered.
    pub fn static_per_cycle_nj(&self) -> f64 {
        self.pe_array_total + self.global_buffer + self.slab_buffers_total + self.output_buffer
    }

    /// The same array without slab power-gating support.
    pub fn without_gating_support(&self) -> Self {
        Self {
            pe_array_total: self.pe_array_total / (1.0 + self.gating_energy_overhead_frac),
            gating_energy_overhead_frac: 0.0,
            ..*self
        }
    }
}

/// Static energy per component, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StaticShares {
    pub pe_array: f64,
    pub global_buffer: f64,
    pub slab_buffers: f64,
    pub output_buffer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub static_j: f64,
    pub dynamic_j: f64,
    pub total_j: f64,
    pub delay_s: f64,
    pub edp_js: f64,
    /// Joules per static component over the whole run.
    pub static_shares: StaticShares,
}

/// Static energy over a run. Each slab carries `1/num_slabs` of the PE
/// array and of the slab buffers while powered and `gated_leak_frac` of
/// that while gated; the global and output buffers are always on.
pub fn static_energy(result: &SimResult, cfg: &EnergyConfig, g: &ArrayGeometry) -> (f64, StaticShares) {
    let slabs = g.num_slabs as f64;
    let pe_slab = cfg.pe_array_total / slabs;
    let buf_slab = cfg.slab_buffers_total / slabs;
    let cycles = result.cycles as f64;
    let mut pe = 0.0;
    let mut bufs = 0.0;
    for &active in &result.active_slab_cycles {
        let active = active as f64;
        let gated = cycles - active;
        pe += pe_slab * (active + cfg.gated_leak_frac * gated);
        bufs += buf_slab * (active + cfg.gated_leak_frac * gated);
    }
    let shares = StaticShares {
        pe_array: pe * NJ,
        global_buffer: cfg.global_buffer * cycles * NJ,
        slab_buffers: bufs * NJ,
        output_buffer: cfg.output_buffer * cycles * NJ,
    };
    let total = shares.pe_array + shares.global_buffer + shares.slab_buffers + shares.output_buffer;
    (total, shares)
}

pub fn dynamic_energy(c: &TrafficCounters, cfg: &EnergyConfig) -> f64 {
    let nj = c.mac_count as f64 * cfg.e_mac_nj
        + (c.global_sram_reads + c.global_sram_writes) as f64 * cfg.e_global_sram_access_nj
        + (c.slab_sram_reads + c.slab_sram_writes) as f64 * cfg.e_slab_sram_access_nj
        + c.output_sram_writes as f64 * cfg.e_output_sram_access_nj
        + (c.dram_read_bytes + c.dram_write_bytes) as f64 * cfg.e_dram_per_byte_nj;
    nj * NJ
}

pub fn edp(result: &SimResult, cfg: &EnergyConfig, g: &ArrayGeometry) -> EnergyBreakdown {
    let (static_j, static_shares) = static_energy(result, cfg, g);
    let dynamic_j = dynamic_energy(&result.counters, cfg);
    let total_j = static_j + dynamic_j;
    let delay_s = result.cycles as f64 / cfg.clock_hz;
    EnergyBreakdown {
        static_j,
        dynamic_j,
        total_j,
        delay_s,
        edp_js: total_j * delay_s,
        static_shares,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// `cycles_b / cycles_a`.
    pub speedup: f64,
    /// `edp_a / edp_b`; below 1 means `a` is better.
    pub edp_ratio: f64,
}

pub fn compare(
    a: (&SimResult, &EnergyBreakdown),
    b: (&SimResult, &EnergyBreakdown),
) -> Result<Comparison, EnergyError> {
    compare_totals(a.0.cycles, a.1.edp_js, b.0.cycles, b.1.edp_js)
}

pub fn compare_totals(cycles_a: u64, edp_a: f64, cycles_b: u64, edp_b: f64) -> Result<Comparison, EnergyError> {
    if cycles_a == 0 || edp_b.is_nan() || edp_b <= 0.0 {
        return Err(EnergyError::EmptyWorkload);
    }
    Ok(Comparison {
        speedup: cycles_b as f64 / cycles_a as f64,
        edp_ratio: edp_a / edp_b,
    })
}
