//! Single-run reports.

use serde::Serialize;
use sisa_core::baselines::{mode_label, simulate_arch, ArchRun};
use sisa_core::energy::StaticShares;
use sisa_core::GemmShape;

use crate::config::{Arch, Config};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticSharesJ {
    pub pe_array: f64,
    pub global_buffer: f64,
    pub slab_buffers: f64,
    pub output_buffer: f64,
}

impl From<StaticShares> for StaticSharesJ {
    fn from(s: StaticShares) -> Self {
        Self {
            pe_array: s.pe_array,
            global_buffer: s.global_buffer,
            slab_buffers: s.slab_buffers,
            output_buffer: s.output_buffer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub arch: &'static str,
    pub gemm: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_shape: Option<String>,
    pub tiles: usize,
    pub rounds: usize,
    pub cycles: u64,
    pub per_phase_cycles: Vec<u64>,
    pub macs: u64,
    pub dram_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub sram_reads: u64,
    pub sram_writes: u64,
    pub active_slab_cycles: u64,
    pub gated_slab_cycles: u64,
    pub static_j: f64,
    pub dynamic_j: f64,
    pub energy_j: f64,
    pub delay_s: f64,
    pub edp: f64,
    pub static_shares_j: StaticSharesJ,
}

pub fn shape_label((h, w): (u64, u64)) -> String {
    format!("{h}x{w}")
}

pub fn run_gemm(cfg: &Config, arch: Arch, shape: GemmShape) -> Result<ArchRun> {
    let model = cfg.arch_model(arch);
    Ok(simulate_arch(&model, shape, &cfg.geometry, &cfg.memory, cfg.fmt, &cfg.energy)?)
}

pub fn simulate_report(cfg: &Config, arch: Arch, shape: GemmShape) -> Result<SimReport> {
    let run = run_gemm(cfg, arch, shape)?;
    let mode = match run.chosen_shape {
        Some(s) => format!("reshape{}", shape_label(s)),
        None => mode_label(&cfg.arch_model(arch), shape.m, &cfg.geometry),
    };
    let c = &run.sim.counters;
    Ok(SimReport {
        arch: arch.name(),
        gemm: shape.to_string(),
        mode,
        chosen_shape: run.chosen_shape.map(shape_label),
        tiles: run.schedule.tile_count(),
        rounds: run.schedule.round_count(),
        cycles: run.sim.cycles,
        per_phase_cycles: run.sim.per_phase_cycles.clone(),
        macs: c.mac_count,
        dram_read_bytes: c.dram_read_bytes,
        dram_write_bytes: c.dram_write_bytes,
        sram_reads: c.sram_reads(),
        sram_writes: c.sram_writes(),
        active_slab_cycles: run.sim.total_active_slab_cycles(),
        gated_slab_cycles: run.sim.total_gated_slab_cycles(),
        static_j: run.energy.static_j,
        dynamic_j: run.energy.dynamic_j,
        energy_j: run.energy.total_j,
        delay_s: run.energy.delay_s,
        edp: run.energy.edp_js,
        static_shares_j: run.energy.static_shares.into(),
    })
}

/// Parses `MxNxK`.
pub fn parse_gemm(s: &str) -> std::result::Result<GemmShape, String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(format!("expected MxNxK, got `{s}`"));
    }
    let mut v = [0u64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| format!("`{p}` is not a non-negative integer"))?;
    }
    GemmShape::new(v[0], v[1], v[2]).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_parsing() {
        assert_eq!(parse_gemm("12x8192x3072").unwrap(), GemmShape::new(12, 8192, 3072).unwrap());
        assert!(parse_gemm("0x1x1").is_err());
        assert!(parse_gemm("1x1").is_err());
        assert!(parse_gemm("ax1x1").is_err());
    }

    #[test]
    fn simulate_examples() {
        let cfg = Config::bundled();
        let r = simulate_report(&cfg, Arch::Sisa, parse_gemm("12x8192x3072").unwrap()).unwrap();
        assert_eq!(r.macs, 301_989_888);
        assert_eq!(r.mode, "independent×8");
        let r = simulate_report(&cfg, Arch::Redas, parse_gemm("16x4864x896").unwrap()).unwrap();
        assert_eq!(r.chosen_shape.as_deref(), Some("16x448"));
    }
}
