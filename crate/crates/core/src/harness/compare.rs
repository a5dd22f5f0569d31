use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::agent::SURPRISE_OFFSETS;
use crate::error::{Error, Result};

use super::{run, ExperimentConfig, TrialOutput};

/// Trials of one variant, keyed by its name.
pub type VariantTrials = (String, Vec<TrialOutput>);

/// A named set of config overrides, written as a TOML table with the same
/// layout as the experiment config (e.g. `{ agent = { horizon = 1 } }`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub overrides: Table,
}

impl Variant {
    /// Variant named `T{horizon}` that only changes the TD horizon.
    pub fn horizon(horizon: usize) -> Self {
        let mut agent = Table::new();
        agent.insert("horizon".into(), Value::Integer(horizon as i64));
        let mut overrides = Table::new();
        overrides.insert("agent".into(), Value::Table(agent));
        Self { name: format!("T{horizon}"), overrides }
    }

    /// `base` with the overrides merged in, table by table.
    pub fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        let text = base.to_toml()?;
        let mut table: Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut table, &self.overrides);
        let mut config: ExperimentConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("variant {}: {e}", self.name)))?;
        config.variants.clear();
        Ok(config)
    }
}

fn merge(dst: &mut Table, src: &Table) {
    for (key, value) in src {
        match (dst.get_mut(key), value) {
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s),
            _ => {
                dst.insert(key.clone(), value.clone());
            }
        }
    }
}

fn check_names(variants: &[Variant]) -> Result<()> {
    if variants.len() < 2 {
        return Err(Error::Config("compare needs at least two variants".into()));
    }
    for (i, v) in variants.iter().enumerate() {
        let valid = !v.name.is_empty()
            && v.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !v.name.starts_with('.');
        if !valid {
            return Err(Error::Config(format!("invalid variant name {:?}", v.name)));
        }
        if variants[..i].iter().any(|w| w.name == v.name) {
            return Err(Error::Config(format!("duplicate variant name {:?}", v.name)));
        }
    }
    Ok(())
}

/// Runs every variant on the same seeds, each into its own subdirectory,
/// and joins the per-episode results into `compare.csv` keyed by
/// `(variant, seed, episode)`. Returns the path of the joined file.
pub fn compare(base: &ExperimentConfig, variants: &[Variant]) -> Result<(PathBuf, Vec<VariantTrials>)> {
    check_names(variants)?;
    let dir = base.resolved_out_dir();
    let configs = variants
        .iter()
        .map(|v| {
            let mut c = v.apply(base)?;
            c.out_dir = Some(dir.join(&v.name));
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("compare.csv");
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    let mut header = vec!["variant".to_string(), "seed".into(), "episode".into(), "return".into(), "length".into()];
    header.extend((1..=SURPRISE_OFFSETS).map(|l| format!("surprise_{l}")));
    out.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;

    let mut results = Vec::with_capacity(variants.len());
    for (variant, config) in variants.iter().zip(configs) {
        let (_, trials) = run(&config)?;
        for t in &trials {
            for (e, ep) in t.episodes.iter().enumerate() {
                let mut row = vec![
                    variant.name.clone(),
                    t.seed.to_string(),
                    (e + 1).to_string(),
                    ep.episode_return.to_string(),
                    ep.steps.len().to_string(),
                ];
                row.extend((1..=SURPRISE_OFFSETS).map(|l| ep.mean_surprise(l).map(|x| x.to_string()).unwrap_or_default()));
                out.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        results.push((variant.name.clone(), trials));
    }
    out.flush()?;
    Ok((path, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_merge_tables() {
        let base = ExperimentConfig::default();
        let c = Variant::horizon(1).apply(&base).unwrap();
        assert_eq!(c.agent.horizon, 1);
        assert_eq!(c.agent.gamma, base.agent.gamma);
        assert_eq!(c.env, base.env);

        let v = Variant { name: "x".into(), overrides: toml::from_str("episodes = 7\n[memory]\nfactor_lr = 0.5").unwrap() };
        let c = v.apply(&base).unwrap();
        assert_eq!((c.episodes, c.memory.factor_lr), (7, 0.5));
        assert_eq!(c.memory.topology, base.memory.topology);

        let bad = Variant { name: "x".into(), overrides: toml::from_str("[agent]\nhorizn = 3").unwrap() };
        assert!(matches!(bad.apply(&base), Err(Error::Config(_))));
    }

    #[test]
    fn names_are_checked() {
        assert!(check_names(&[Variant::horizon(1)]).is_err());
        assert!(check_names(&[Variant::horizon(1), Variant::horizon(1)]).is_err());
        let bad = Variant { name: "../x".into(), overrides: Table::new() };
        assert!(check_names(&[Variant::horizon(1), bad]).is_err());
        assert!(check_names(&[Variant::horizon(1), Variant::horizon(5)]).is_ok());
    }
}
