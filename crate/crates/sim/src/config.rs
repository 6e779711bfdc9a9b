//! Architecture configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sisa_core::baselines::{ArchModel, ArchVariant, ShapePolicy};
use sisa_core::perfmodel::{ColdStart, PerfOptions};
use sisa_core::scheduler::PlanOptions;
use sisa_core::{ArrayGeometry, DataFormat, EnergyConfig, MemoryConfig};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides where configuration and model files are looked up.
pub const CONFIG_ROOT_ENV: &str = "SISA_CONFIG_ROOT";

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub geometry: GeometrySection,
    pub memory: MemorySection,
    pub perf: PerfSection,
    pub plan: PlanSection,
    pub energy: EnergySection,
    pub baselines: BaselinesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub rows: u64,
    pub cols: u64,
    pub slab_height: u64,
    pub num_slabs: u64,
    pub bytes_per_element: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    pub global_buffer_bytes: u64,
    pub output_buffer_bytes: u64,
    pub slab_act_buffer_bytes: u64,
    pub slab_wgt_buffer_bytes: u64,
    pub dram_bytes_per_cycle: u64,
    pub global_bank_port_elems: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColdStartName {
    FirstStripe,
    FullTile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfSection {
    pub cold_start: ColdStartName,
    pub drain_overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub power_gating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub clock_hz: f64,
    pub static_nj_per_cycle: StaticSection,
    pub gating: GatingSection,
    pub dynamic_nj: DynamicSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSection {
    pub pe_array: f64,
    pub global_buffer: f64,
    pub slab_buffers: f64,
    pub output_buffer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatingSection {
    pub overhead_frac: f64,
    pub gated_leak_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSection {
    pub mac: f64,
    pub global_sram_access: f64,
    pub slab_sram_access: f64,
    pub output_sram_access: f64,
    pub dram_per_byte: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesSection {
    pub redas: RedasSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    HeightFit,
    MinLatency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedasSection {
    pub shapes: Vec<(u64, u64)>,
    pub pe_power_factor: f64,
    pub policy: PolicyName,
}

/// A validated configuration in the core crate's types.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: ArrayGeometry,
    pub fmt: DataFormat,
    pub memory: MemoryConfig,
    pub perf: PerfOptions,
    pub plan: PlanOptions,
    pub energy: EnergyConfig,
    pub redas_shapes: Vec<(u64, u64)>,
    pub redas_pe_power_factor: f64,
    pub redas_policy: ShapePolicy,
}

impl Config {
    /// The committed default file.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CONFIG, "<bundled default.toml>").expect("bundled config is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Explicit path, else `$SISA_CONFIG_ROOT/default.toml` when present,
    /// else the bundled default.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        if let Some(root) = config_root() {
            let p = root.join("default.toml");
            if p.exists() {
                return Self::load(&p);
            }
        }
        Ok(Self::bundled())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("{origin}: {path}"), e.into_inner().message())
        })?;
        Self::from_file(&file).map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("{origin}: {path}"), message),
            other => other,
        })
    }

    pub fn from_file(f: &ConfigFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", f.schema_version),
            ));
        }
        let g = &f.geometry;
        let geometry = ArrayGeometry::new(g.rows, g.cols, g.slab_height, g.num_slabs)
            .map_err(|e| Error::config("geometry", e))?;
        let fmt = DataFormat {
            bytes_per_element: g.bytes_per_element,
        };
        fmt.validate().map_err(|e| Error::config("geometry", e))?;
        let m = &f.memory;
        let memory = MemoryConfig {
            global_buffer_bytes: m.global_buffer_bytes,
            output_buffer_bytes: m.output_buffer_bytes,
            slab_act_buffer_bytes: m.slab_act_buffer_bytes,
            slab_wgt_buffer_bytes: m.slab_wgt_buffer_bytes,
            dram_bytes_per_cycle: m.dram_bytes_per_cycle,
            global_bank_port_elems: m.global_bank_port_elems,
            slab_local_buffers: true,
        };
        memory
            .validate()
            .map_err(|field| Error::config(format!("memory.{field}"), "must be positive"))?;
        let e = &f.energy;
        let energy = EnergyConfig {
            pe_array_total: e.static_nj_per_cycle.pe_array,
            global_buffer: e.static_nj_per_cycle.global_buffer,
            slab_buffers_total: e.static_nj_per_cycle.slab_buffers,
            output_buffer: e.static_nj_per_cycle.output_buffer,
            gating_energy_overhead_frac: e.gating.overhead_frac,
            gated_leak_frac: e.gating.gated_leak_frac,
            e_mac_nj: e.dynamic_nj.mac,
            e_global_sram_access_nj: e.dynamic_nj.global_sram_access,
            e_slab_sram_access_nj: e.dynamic_nj.slab_sram_access,
            e_output_sram_access_nj: e.dynamic_nj.output_sram_access,
            e_dram_per_byte_nj: e.dynamic_nj.dram_per_byte,
            clock_hz: e.clock_hz,
        };
        energy.validate().map_err(|err| Error::config("energy", err))?;
        let r = &f.baselines.redas;
        let cfg = Config {
            geometry,
            fmt,
            memory,
            perf: PerfOptions {
                cold_start: match f.perf.cold_start {
                    ColdStartName::FirstStripe => ColdStart::FirstStripe,
                    ColdStartName::FullTile => ColdStart::FullTile,
                },
                drain_overlap: f.perf.drain_overlap,
            },
            plan: PlanOptions {
                power_gating: f.plan.power_gating,
            },
            energy,
            redas_shapes: r.shapes.clone(),
            redas_pe_power_factor: r.pe_power_factor,
            redas_policy: match r.policy {
                PolicyName::HeightFit => ShapePolicy::HeightFit,
                PolicyName::MinLatency => ShapePolicy::MinLatency,
            },
        };
        cfg.arch_model(Arch::Redas)
            .validate(&geometry)
            .map_err(|err| Error::config("baselines.redas", err))?;
        Ok(cfg)
    }

    pub fn arch_model(&self, arch: Arch) -> ArchModel {
        let variant = match arch {
            Arch::Sisa => ArchVariant::Sisa,
            Arch::Tpu => ArchVariant::MonolithicTpu,
            Arch::Redas => ArchVariant::RedasLike {
                shapes: self.redas_shapes.clone(),
                policy: self.redas_policy,
                pe_power_factor: self.redas_pe_power_factor,
            },
        };
        ArchModel {
            variant,
            plan: self.plan,
            perf: self.perf,
        }
    }
}

pub fn config_root() -> Option<PathBuf> {
    std::env::var_os(CONFIG_ROOT_ENV).map(PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Sisa,
    Tpu,
    Redas,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Sisa => "sisa",
            Arch::Tpu => "tpu",
            Arch::Redas => "redas",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_core_defaults() {
        let c = Config::bundled();
        assert_eq!(c.geometry, ArrayGeometry::default());
        assert_eq!(c.fmt, DataFormat::default());
        assert_eq!(c.memory, MemoryConfig::default());
        assert_eq!(c.energy, EnergyConfig::default());
        assert_eq!(c.perf, PerfOptions::default());
        assert_eq!(c.plan, PlanOptions::default());
        assert_eq!(c.redas_shapes, sisa_core::baselines::REDAS_SHAPES.to_vec());
        assert_eq!(c.redas_pe_power_factor, 2.49);
    }

    #[test]
    fn unknown_field_is_reported_with_its_path() {
        let text = DEFAULT_CONFIG.replace("mac = 0.0005", "mac = 0.0005\nmacc = 1.0");
        let err = Config::parse(&text, "x.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("energy.dynamic_nj"), "{msg}");
        assert!(msg.contains("macc"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_energy_constant_is_an_error() {
        let text = DEFAULT_CONFIG.replace("output_buffer = 1.25\n", "");
        let msg = Config::parse(&text, "x.toml").unwrap_err().to_string();
        assert!(msg.contains("output_buffer"), "{msg}");
    }

    #[test]
    fn invariants_checked() {
        let text = DEFAULT_CONFIG.replace("num_slabs = 8", "num_slabs = 6");
        assert!(Config::parse(&text, "x").is_err());
        let text = DEFAULT_CONFIG.replace("schema_version = 1", "schema_version = 2");
        assert!(Config::parse(&text, "x").unwrap_err().to_string().contains("schema_version"));
        let text = DEFAULT_CONFIG.replace("[16, 448]", "[16, 2048]");
        assert!(Config::parse(&text, "x").unwrap_err().to_string().contains("baselines.redas"));
    }
}
