//! Sweeps over the row dimension `m` across architectures.

use rayon::prelude::*;
use serde::Serialize;
use sisa_core::baselines::mode_label;
use sisa_core::workloads::{aggregate, ModelDescriptor, SweepPoint};
use sisa_core::GemmShape;

use crate::config::{Arch, Config};
use crate::error::{Error, Result};
use crate::report::run_gemm;

/// What runs at each `m`.
#[derive(Debug, Clone)]
pub enum Workload {
    Model(ModelDescriptor),
    /// A single GEMM `m × n × k`.
    Gemm { n: u64, k: u64 },
}

impl Workload {
    pub fn gemms(&self, m: u64) -> Result<Vec<(GemmShape, u64)>> {
        match self {
            Workload::Model(d) => d.expand(m).map_err(|e| Error::config("model", e)),
            Workload::Gemm { n, k } => Ok(vec![(GemmShape::new(m, *n, *k)?, 1)]),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: u64,
    pub arch: &'static str,
    pub mode: String,
    pub cycles: u64,
    pub energy_j: f64,
    pub edp_js: f64,
    pub dram_rd: u64,
    pub dram_wr: u64,
    pub active_slab_cycles: u64,
    pub gated_slab_cycles: u64,
    /// First architecture's cycles over this one's.
    pub speedup: f64,
    /// This architecture's EDP over the first one's.
    pub norm_edp: f64,
}

pub const CSV_HEADER: &str =
    "m,arch,mode,cycles,energy_j,edp_js,dram_rd,dram_wr,active_slab_cycles,gated_slab_cycles,speedup,norm_edp";

pub fn run_point(cfg: &Config, arch: Arch, workload: &Workload, m: u64) -> Result<SweepPoint> {
    let gemms = workload.gemms(m)?;
    let runs = gemms
        .iter()
        .map(|&(s, w)| run_gemm(cfg, arch, s).map(|r| (r, w)))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<_> = runs.iter().map(|(r, w)| (&r.sim, &r.energy, *w)).collect();
    aggregate(m, &parts).map_err(|e| Error::config("workload", e))
}

fn point_mode(cfg: &Config, arch: Arch, workload: &Workload, m: u64) -> String {
    if let (Arch::Redas, Workload::Gemm { n, k }) = (arch, workload) {
        if let Ok(shape) = GemmShape::new(m, *n, *k) {
            if let Ok(run) = run_gemm(cfg, arch, shape) {
                if let Some((h, w)) = run.chosen_shape {
                    return format!("reshape{h}x{w}");
                }
            }
        }
    }
    mode_label(&cfg.arch_model(arch), m, &cfg.geometry)
}

/// Rows ordered by `m`, then by the order of `archs`. Points run in
/// parallel; the first failing point aborts the sweep.
pub fn sweep(cfg: &Config, workload: &Workload, ms: &[u64], archs: &[Arch]) -> Result<Vec<SweepRow>> {
    if archs.is_empty() {
        return Err(Error::config("arch", "at least one architecture is required"));
    }
    if ms.is_empty() {
        return Err(Error::config("m", "empty m range"));
    }
    let per_m: Vec<Result<Vec<SweepRow>>> = ms
        .par_iter()
        .map(|&m| {
            let points = archs
                .iter()
                .map(|&a| {
                    run_point(cfg, a, workload, m).map_err(|e| match e {
                        Error::Config { path, message } => {
                            Error::config(format!("m={m} arch={}: {path}", a.name()), message)
                        }
                        Error::Infeasible(msg) => Error::Infeasible(format!("m={m} arch={}: {msg}", a.name())),
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let base = &points[0];
            Ok(archs
                .iter()
                .zip(&points)
                .map(|(&a, p)| SweepRow {
                    m,
                    arch: a.name(),
                    mode: point_mode(cfg, a, workload, m),
                    cycles: p.cycles,
                    energy_j: p.energy_j,
                    edp_js: p.edp_js,
                    dram_rd: p.counters.dram_read_bytes,
                    dram_wr: p.counters.dram_write_bytes,
                    active_slab_cycles: p.active_slab_cycles,
                    gated_slab_cycles: p.gated_slab_cycles,
                    speedup: base.cycles as f64 / p.cycles as f64,
                    norm_edp: p.edp_js / base.edp_js,
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(ms.len() * archs.len());
    for r in per_m {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    if rows.is_empty() {
        return format!("{CSV_HEADER}\n");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Parses `a..b` (inclusive), `a..=b`, a comma list, or a single value.
pub fn parse_m_range(s: &str) -> std::result::Result<Vec<u64>, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("`{t}` is not an integer"));
    let ms: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("range `{s}` is empty"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<_, _>>()?
    };
    if ms.is_empty() {
        return Err("empty m range".into());
    }
    if ms.contains(&0) {
        return Err("m must be positive".into());
    }
    if ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err("m values must be strictly ascending".into());
    }
    Ok(ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_ranges() {
        assert_eq!(parse_m_range("1..4").unwrap(), [1, 2, 3, 4]);
        assert_eq!(parse_m_range("1..=3").unwrap(), [1, 2, 3]);
        assert_eq!(parse_m_range("16,33,64").unwrap(), [16, 33, 64]);
        assert!(parse_m_range("4..1").is_err());
        assert!(parse_m_range("0..3").is_err());
        assert!(parse_m_range("5,3").is_err());
    }

    #[test]
    fn header_matches_row_fields() {
        let csv = to_csv(&[SweepRow {
            m: 1,
            arch: "sisa",
            mode: "independent×8".into(),
            cycles: 1,
            energy_j: 0.5,
            edp_js: 0.25,
            dram_rd: 2,
            dram_wr: 3,
            active_slab_cycles: 4,
            gated_slab_cycles: 5,
            speedup: 1.0,
            norm_edp: 1.0,
        }]);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(to_csv(&[]).trim_end(), CSV_HEADER);
    }
}
