//! Checkpoint directories: one network snapshot per file plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::agent::AgentState;
use super::config::VariantConfig;
use crate::error::{Error, Result};
use crate::gap::DiscriminatorPair;
use crate::nn::{snapshot, MlpParams};
use crate::scalar::format_exact;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub variant: String,
    pub variant_config: VariantConfig,
    pub step: u64,
    pub updates: u64,
    /// Written with round-trip precision.
    pub log_temperature: String,
    pub networks: Vec<String>,
}

/// Networks restored from a checkpoint directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub actor: MlpParams<f64>,
    pub critic1: MlpParams<f64>,
    pub critic2: MlpParams<f64>,
    pub target1: MlpParams<f64>,
    pub target2: MlpParams<f64>,
    pub d_sa: Option<MlpParams<f64>>,
    pub d_sas: Option<MlpParams<f64>>,
    pub log_temperature: f64,
}

pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    agent: &AgentState,
    pair: Option<&DiscriminatorPair>,
    variant: &VariantConfig,
    step: u64,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut nets: Vec<(&str, &MlpParams<f64>)> = vec![
        ("actor", &agent.actor),
        ("critic1", &agent.critic1),
        ("critic2", &agent.critic2),
        ("target1", &agent.target1),
        ("target2", &agent.target2),
    ];
    if let Some(p) = pair {
        nets.push(("d_sa", &p.d_sa));
        nets.push(("d_sas", &p.d_sas));
    }
    let mut names = Vec::new();
    for (name, net) in nets {
        let file = format!("{name}.mlp");
        snapshot::save(net, dir.join(&file))?;
        names.push(file);
    }
    let manifest = Manifest {
        variant: variant.variant_name(),
        variant_config: *variant,
        step,
        updates: agent.updates,
        log_temperature: format_exact(agent.log_temperature),
        networks: names,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)
        .map_err(|e| Error::Parse(format!("manifest: {e}")))?;
    let log_temperature = manifest
        .log_temperature
        .parse::<f64>()
        .map_err(|_| Error::Parse("manifest log_temperature".into()))?;
    let has = |n: &str| manifest.networks.iter().any(|f| f == &format!("{n}.mlp"));
    let load = |n: &str| snapshot::load::<f64>(dir.join(format!("{n}.mlp")));
    Ok(Checkpoint {
        actor: load("actor")?,
        critic1: load("critic1")?,
        critic2: load("critic2")?,
        target1: load("target1")?,
        target2: load("target2")?,
        d_sa: if has("d_sa") { Some(load("d_sa")?) } else { None },
        d_sas: if has("d_sas") { Some(load("d_sas")?) } else { None },
        log_temperature,
        manifest,
    })
}
