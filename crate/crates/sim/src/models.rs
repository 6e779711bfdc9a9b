//! Model descriptor files.
//!
//! ```toml
//! schema_version = 1
//! name = "qwen2.5-0.5b"
//! num_blocks = 24
//!
//! [[templates]]
//! id = 0
//! n = 896        # output features
//! k = 896        # input features
//! weight = 48    # occurrences per forward pass
//! ```

use std::path::Path;

use serde::Deserialize;
use sisa_core::workloads::{GemmTemplate, ModelDescriptor, WorkloadError};

use crate::config::config_root;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Descriptors shipped with the binary, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("qwen2.5-0.5b", include_str!("../models/qwen2.5-0.5b.toml")),
    ("qwen2.5-1.5b", include_str!("../models/qwen2.5-1.5b.toml")),
    ("llama3.2-3b", include_str!("../models/llama3.2-3b.toml")),
    ("qwen2.5-7b", include_str!("../models/qwen2.5-7b.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    name: String,
    num_blocks: u64,
    templates: Vec<TemplateEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateEntry {
    id: u32,
    n: u64,
    k: u64,
    weight: u64,
}

pub fn parse_model(text: &str, origin: &str) -> Result<ModelDescriptor> {
    let de = toml::Deserializer::new(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("{origin}: {path}"), e.into_inner().message())
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::config(
            format!("{origin}: schema_version"),
            format!("expected {SCHEMA_VERSION}, found {}", file.schema_version),
        ));
    }
    let desc = ModelDescriptor {
        name: file.name,
        num_blocks: file.num_blocks,
        templates: file
            .templates
            .into_iter()
            .map(|t| GemmTemplate {
                id: t.id,
                n: t.n,
                k: t.k,
                weight: t.weight,
            })
            .collect(),
    };
    desc.validate().map_err(|e| {
        let field = match &e {
            WorkloadError::NoTemplates => "templates".to_string(),
            WorkloadError::ZeroWeight { id } => format!("templates[{}].weight", index_of(&desc, *id)),
            WorkloadError::ZeroDimension { id } => format!("templates[{}]", index_of(&desc, *id)),
            WorkloadError::DuplicateId { id } => format!("templates[{}].id", last_index_of(&desc, *id)),
            _ => "templates".to_string(),
        };
        Error::config(format!("{origin}: {field}"), e)
    })?;
    Ok(desc)
}

fn index_of(d: &ModelDescriptor, id: u32) -> usize {
    d.templates.iter().position(|t| t.id == id).unwrap_or(0)
}

fn last_index_of(d: &ModelDescriptor, id: u32) -> usize {
    d.templates.iter().rposition(|t| t.id == id).unwrap_or(0)
}

pub fn load_model(path: &Path) -> Result<ModelDescriptor> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_model(&text, &path.display().to_string())
}

pub fn bundled_model(name: &str) -> Option<ModelDescriptor> {
    BUNDLED
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(n, text)| parse_model(text, n).expect("bundled descriptor is valid"))
}

/// A path to a descriptor file, a name under `$SISA_CONFIG_ROOT/models/`,
/// or the name of a bundled descriptor, in that order.
pub fn resolve_model(spec: &str) -> Result<ModelDescriptor> {
    let p = Path::new(spec);
    if p.extension().is_some_and(|e| e == "toml") || p.components().count() > 1 {
        return load_model(p);
    }
    if let Some(root) = config_root() {
        let candidate = root.join("models").join(format!("{spec}.toml"));
        if candidate.exists() {
            return load_model(&candidate);
        }
    }
    bundled_model(spec).ok_or_else(|| {
        let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
        Error::config("model", format!("unknown model `{spec}` (bundled: {})", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(d: &ModelDescriptor) -> Vec<(u64, u64)> {
        d.templates.iter().map(|t| (t.n, t.k)).collect()
    }

    #[test]
    fn bundled_descriptors_load() {
        for (name, _) in BUNDLED {
            let d = bundled_model(name).unwrap();
            assert_eq!(d.templates.len(), 5);
            assert_eq!(d.name, name);
        }
        let q = bundled_model("qwen2.5-0.5b").unwrap();
        assert_eq!(pairs(&q), [(896, 896), (128, 896), (4864, 896), (896, 4864), (151936, 896)]);
        let l = bundled_model("llama3.2-3b").unwrap();
        assert!(pairs(&l).contains(&(8192, 3072)));
        assert!(pairs(&l).contains(&(3072, 8192)));
    }

    #[test]
    fn zero_weight_rejected_with_path() {
        let text = BUNDLED[0].1.replace("weight = 24", "weight = 0");
        let msg = parse_model(&text, "m.toml").unwrap_err().to_string();
        assert!(msg.contains("templates[3].weight"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let text = BUNDLED[0].1.replace("k = 4864", "k = 4864\nbias = true");
        let msg = parse_model(&text, "m.toml").unwrap_err().to_string();
        assert!(msg.contains("templates[3]"), "{msg}");
        assert!(msg.contains("bias"), "{msg}");
    }

    #[test]
    fn unknown_name() {
        assert!(resolve_model("gpt-17").is_err());
    }
}
