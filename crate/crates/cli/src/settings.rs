//! Run configuration: a TOML file with `[pipeline]` and `[llm]` tables, plus
//! `--set table.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gest_core::llm::CompletionConfig;
use gest_core::PipelineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub llm: CompletionConfig,
}

/// Marks errors that happen before any input is touched.
#[derive(Debug)]
pub struct ConfigFailure;

impl std::fmt::Display for ConfigFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid configuration")
    }
}

impl std::error::Error for ConfigFailure {}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let key = key.trim();
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (s, f),
        None => ("pipeline", key),
    };
    if section != "pipeline" && section != "llm" {
        bail!("override `{key}`: unknown table `{section}`");
    }
    let mut target = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let path: Vec<&str> = field.split('.').collect();
    for part in &path[..path.len() - 1] {
        target = target
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    target
        .as_table_mut()
        .ok_or_else(|| anyhow!("override `{key}`: parent is not a table"))?
        .insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Loads, overrides and validates. Relative `llm.fixtures_dir` paths are
/// taken relative to the config file.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let (mut table, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            let table: toml::Table = toml::from_str(&text).with_context(|| format!("cannot parse config {}", p.display()))?;
            (table, p.parent().map(Path::to_path_buf))
        }
        None => (toml::Table::new(), None),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
    cfg.pipeline.validate().context("invalid [pipeline] configuration")?;
    if let (Some(dir), Some(base)) = (cfg.llm.fixtures_dir.as_mut(), base) {
        if dir.is_relative() {
            *dir = base.join(&*dir);
        }
    }
    Ok(cfg)
}

pub fn load_or_fail(path: Option<&PathBuf>, overrides: &[String]) -> Result<RunConfig> {
    load(path.map(PathBuf::as_path), overrides).map_err(|e| e.context(ConfigFailure))
}
