//! Transformer layer descriptors and per-model aggregation.
//!
//! A model is a list of distinct GEMM templates `(N, K)` with an occurrence
//! weight each. At prefill length `m`, template `(N, K)` becomes the GEMM
//! `m × N × K`; the model total is the weighted sum of its templates.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::energy::EnergyBreakdown;
use crate::perfmodel::{SimResult, TrafficCounters};
use crate::GemmShape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GemmTemplate {
    pub id: u32,
    pub n: u64,
    pub k: u64,
    /// Occurrences per forward pass.
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDescriptor {
    pub name: String,
    pub num_blocks: u64,
    pub templates: Vec<GemmTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    NoTemplates,
    ZeroWeight { id: u32 },
    ZeroDimension { id: u32 },
    DuplicateId { id: u32 },
    ZeroRows,
    EmptyAggregate,
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoTemplates => f.write_str("model has no templates"),
            Self::ZeroWeight { id } => write!(f, "template {id}: weight must be at least 1"),
            Self::ZeroDimension { id } => write!(f, "template {id}: N and K must be positive"),
            Self::DuplicateId { id } => write!(f, "template id {id} appears more than once"),
            Self::ZeroRows => f.write_str("prefill length must be positive"),
            Self::EmptyAggregate => f.write_str("nothing to aggregate"),
        }
    }
}

impl ModelDescriptor {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.templates.is_empty() {
            return Err(WorkloadError::NoTemplates);
        }
        for (i, t) in self.templates.iter().enumerate() {
            if t.weight == 0 {
                return Err(WorkloadError::ZeroWeight { id: t.id });
            }
            if t.n == 0 || t.k == 0 {
                return Err(WorkloadError::ZeroDimension { id: t.id });
            }
            if self.templates[..i].iter().any(|o| o.id == t.id) {
                return Err(WorkloadError::DuplicateId { id: t.id });
            }
        }
        Ok(())
    }

    /// The GEMMs of one forward pass at prefill length `m`, with weights.
    pub fn expand(&self, m: u64) -> Result<Vec<(GemmShape, u64)>, WorkloadError> {
        self.validate()?;
        if m == 0 {
            return Err(WorkloadError::ZeroRows);
        }
        Ok(self
            .templates
            .iter()
            .map(|t| (GemmShape { m, n: t.n, k: t.k }, t.weight))
            .collect())
    }

    pub fn total_macs(&self, m: u64) -> u64 {
        self.templates.iter().map(|t| m * t.n * t.k * t.weight).sum()
    }
}

/// Weighted totals of one architecture on one model at one `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub m: u64,
    pub cycles: u64,
    pub static_j: f64,
    pub dynamic_j: f64,
    pub energy_j: f64,
    pub delay_s: f64,
    /// Aggregate energy times aggregate delay, not a sum of per-GEMM EDPs.
    pub edp_js: f64,
    pub counters: TrafficCounters,
    pub active_slab_cycles: u64,
    pub gated_slab_cycles: u64,
}

/// Combines weighted per-template results.
pub fn aggregate(m: u64, parts: &[(&SimResult, &EnergyBreakdown, u64)]) -> Result<SweepPoint, WorkloadError> {
    if parts.is_empty() || parts.iter().all(|p| p.2 == 0) {
        return Err(WorkloadError::EmptyAggregate);
    }
    let mut p = SweepPoint {
        m,
        cycles: 0,
        static_j: 0.0,
        dynamic_j: 0.0,
        energy_j: 0.0,
        delay_s: 0.0,
        edp_js: 0.0,
        counters: TrafficCounters::default(),
        active_slab_cycles: 0,
        gated_slab_cycles: 0,
    };
    for &(sim, e, w) in parts {
        p.cycles += sim.cycles * w;
        p.static_j += e.static_j * w as f64;
        p.dynamic_j += e.dynamic_j * w as f64;
        p.energy_j += e.total_j * w as f64;
        p.delay_s += e.delay_s * w as f64;
        p.counters.add(&sim.counters.scaled(w));
        p.active_slab_cycles += sim.total_active_slab_cycles() * w;
        p.gated_slab_cycles += sim.total_gated_slab_cycles() * w;
    }
    p.edp_js = p.energy_j * p.delay_s;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{edp, EnergyConfig};
    use crate::geometry::ArrayGeometry;
    use crate::perfmodel::{simulate, MemoryConfig};
    use crate::scheduler::plan_gemm;
    use crate::DataFormat;
    use alloc::vec;

    fn qwen05() -> ModelDescriptor {
        let t = |id, n, k, weight| GemmTemplate { id, n, k, weight };
        ModelDescriptor {
            name: "qwen2.5-0.5b".into(),
            num_blocks: 24,
            templates: vec![
                t(0, 896, 896, 48),
                t(1, 128, 896, 48),
                t(2, 4864, 896, 48),
                t(3, 896, 4864, 24),
                t(4, 151936, 896, 1),
            ],
        }
    }

    #[test]
    fn validation() {
        let mut d = qwen05();
        assert!(d.validate().is_ok());
        d.templates[1].weight = 0;
        assert_eq!(d.validate(), Err(WorkloadError::ZeroWeight { id: 1 }));
        let mut d = qwen05();
        d.templates[2].id = 0;
        assert_eq!(d.validate(), Err(WorkloadError::DuplicateId { id: 0 }));
        assert_eq!(qwen05().expand(0), Err(WorkloadError::ZeroRows));
        assert_eq!(aggregate(1, &[]), Err(WorkloadError::EmptyAggregate));
    }

    #[test]
    fn expand_keeps_order_and_weights() {
        let e = qwen05().expand(16).unwrap();
        assert_eq!(e.len(), 5);
        assert_eq!(e[2], (GemmShape { m: 16, n: 4864, k: 896 }, 48));
        assert_eq!(e[4].1, 1);
    }

    #[test]
    fn aggregate_is_weighted_sum() {
        let g = ArrayGeometry::default();
        let mem = MemoryConfig::default();
        let fmt = DataFormat::default();
        let cfg = EnergyConfig::default();
        let runs: Vec<_> = qwen05()
            .expand(16)
            .unwrap()
            .into_iter()
            .map(|(s, w)| {
                let r = simulate(&plan_gemm(s, &g, &mem, fmt).unwrap(), &g, &mem, fmt);
                let e = edp(&r, &cfg, &g);
                (r, e, w)
            })
            .collect();
        let parts: Vec<_> = runs.iter().map(|(r, e, w)| (r, e, *w)).collect();
        let p = aggregate(16, &parts).unwrap();
        let cycles: u64 = runs.iter().map(|(r, _, w)| r.cycles * w).sum();
        assert_eq!(p.cycles, cycles);
        let delay = cycles as f64 / cfg.clock_hz;
        assert!((p.delay_s - delay).abs() <= 1e-12 * delay);
        assert!((p.edp_js - p.energy_j * p.delay_s).abs() <= 1e-12 * p.edp_js);
        assert_eq!(p.counters.mac_count, qwen05().total_macs(16));

        // the FFN up projection carries the largest weighted share
        let shares: Vec<u64> = runs.iter().map(|(r, _, w)| r.cycles * w).collect();
        let top = shares.iter().enumerate().max_by_key(|x| x.1).unwrap().0;
        assert_eq!(top, 2);
    }
}
