//! Flat `key = value` run settings: built-in defaults, then an optional
//! config file, then command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use spectramut_core::baselines::{DEFAULT_BSS_THRESHOLD, DEFAULT_RMS_FRACTION};
use spectramut_core::experiment::default_tau_grid;
use spectramut_core::mutation::{MutatorKind, DEFAULT_GF_SIGMA};
use spectramut_core::{RepresentativeMode, SAMPLING_RATES};

/// Keys naming files; they are kept out of report configs so that reports
/// depend on input contents (hashed separately) rather than on paths.
pub const PATH_KEYS: [&str; 4] = ["model", "dataset", "manifest", "out"];

pub fn defaults() -> BTreeMap<String, String> {
    let join = |v: Vec<String>| v.join(",");
    let pairs = [
        ("model", String::new()),
        ("dataset", String::new()),
        ("manifest", String::new()),
        ("out", String::new()),
        ("mode", "dmsharp".into()),
        ("reduction_lo", "0.26".into()),
        ("reduction_hi", "0.56".into()),
        ("x", "auto".into()),
        ("tau", "auto".into()),
        ("seed", "0".into()),
        ("representative_seed", "1".into()),
        ("representative_mode", "random".into()),
        ("repeats", "5".into()),
        ("rms_fraction", DEFAULT_RMS_FRACTION.to_string()),
        ("bss_threshold", DEFAULT_BSS_THRESHOLD.to_string()),
        ("x_grid", join(SAMPLING_RATES.iter().map(|x| x.to_string()).collect())),
        ("tau_grid", join(default_tau_grid().iter().map(|t| format!("{t:.2}")).collect())),
        ("count", "100".into()),
        ("kinds", join(MutatorKind::ALL.iter().map(|k| k.short_name().to_string()).collect())),
        ("generation_seed", "0".into()),
        ("sigma", DEFAULT_GF_SIGMA.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let known = defaults();
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", n + 1))?;
        let key = k.trim().replace('-', "_");
        if !known.contains_key(&key) {
            bail!("config line {}: unknown key {key:?}", n + 1);
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config: Option<&Path>, overrides: Vec<(&str, Option<String>)>) -> Result<Self> {
        let mut values = defaults();
        if let Some(path) = config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            values.extend(parse_config(&text)?);
        }
        for (k, v) in overrides {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn path(&self, key: &str) -> Result<&Path> {
        let v = self.get(key);
        if v.is_empty() {
            bail!("--{key} is required");
        }
        Ok(Path::new(v))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse().map_err(|e| anyhow!("{key} = {v:?}: {e}"))
    }

    /// `None` for `auto`.
    pub fn optional<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            "auto" | "" => Ok(None),
            _ => self.parse(key).map(Some),
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("{key}: {s:?}: {e}")))
            .collect()
    }

    pub fn representative_mode(&self) -> Result<RepresentativeMode> {
        match self.get("representative_mode") {
            "random" => Ok(RepresentativeMode::Random),
            "lowest-id" | "lowest_id" => Ok(RepresentativeMode::LowestId),
            other => bail!("representative_mode {other:?}: expected random or lowest-id"),
        }
    }

    /// Settings that describe the run itself, without file paths.
    pub fn report_config(&self) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| !PATH_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn render(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
