//! Run configuration (TOML) and its content hash.

use std::fs;
use std::path::{Path, PathBuf};

use hsp_core::classify::CommunityConfig;
use hsp_core::sanitize::{load_rules, RuleSet, DEFAULT_RULES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Filter rule CSV. The bundled defaults when absent.
    pub rules: Option<PathBuf>,
    /// Community label table (`asn:value label` lines).
    pub communities: Option<PathBuf>,
    pub x666_heuristic: bool,
    /// Lower bounds of the visibility bands, strictly increasing from 1.
    pub visibility_bands: Vec<usize>,
    pub feeder_group: usize,
    pub cell_days: u64,
    /// Lookback sizes reported by `timeline`.
    pub window_sizes: Vec<usize>,
    pub noise_factor: f64,
    pub gzip: Vec<String>,
    pub bzip2: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            rules: None,
            communities: None,
            x666_heuristic: true,
            visibility_bands: vec![1, 2, 6, 11, 101],
            feeder_group: 10,
            cell_days: 14,
            window_sizes: (1..=14).collect(),
            noise_factor: 100.0,
            gzip: vec!["gzip".into(), "-dc".into()],
            bzip2: vec!["bzip2".into(), "-dc".into()],
        }
    }
}

/// A validated configuration with its rule files loaded.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub rules: RuleSet,
    pub communities: CommunityConfig,
    /// SHA-256 over the settings and the contents of every referenced file.
    pub hash: String,
}

impl Loaded {
    pub fn short_hash(&self) -> &str {
        &self.hash[..16]
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
    let (config, base) = match path {
        Some(p) => {
            let text = read(p)?;
            let cfg: Config = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (Config::default(), PathBuf::new()),
    };
    validate(&config)?;
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let rules_text = match &config.rules {
        Some(p) => read(&resolve(p))?,
        None => DEFAULT_RULES.to_string(),
    };
    let rules_dir = config.rules.as_ref().map(|p| resolve(p).parent().map(Path::to_path_buf).unwrap_or_default());
    let rules = load_rules(&rules_text, rules_dir.as_deref()).map_err(|e| CliError::Config(e.to_string()))?;

    let community_text = match &config.communities {
        Some(p) => read(&resolve(p))?,
        None => String::new(),
    };
    let mut communities = CommunityConfig::parse(&community_text).map_err(|e| CliError::Config(format!("communities: {e}")))?;
    communities.x666_heuristic = config.x666_heuristic;

    let mut settings = config.clone();
    settings.rules = None;
    settings.communities = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&settings).expect("config serializes"));
    h.update([0]);
    h.update(rules_text.as_bytes());
    h.update([0]);
    h.update(community_text.as_bytes());
    // delegation files named by rules are part of the configuration
    for line in rules_text.lines() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.get(1) == Some(&"UnallocatedResource") {
            if let (Some(param), Some(dir)) = (cols.get(3), rules_dir.as_deref()) {
                let path = dir.join(param);
                h.update([0]);
                h.update(fs::read(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
            }
        }
    }
    let hash = hex(&h.finalize());
    Ok(Loaded { config, rules, communities, hash })
}

fn validate(c: &Config) -> Result<(), CliError> {
    let bad = |m: &str| Err(CliError::Config(m.to_string()));
    if c.visibility_bands.first() != Some(&1) || c.visibility_bands.windows(2).any(|w| w[0] >= w[1]) {
        return bad("visibility_bands must start at 1 and increase strictly");
    }
    if c.feeder_group == 0 || c.cell_days == 0 {
        return bad("feeder_group and cell_days must be at least 1");
    }
    if c.window_sizes.contains(&0) {
        return bad("window_sizes must be at least 1");
    }
    if c.noise_factor.is_nan() || c.noise_factor <= 0.0 {
        return bad("noise_factor must be positive");
    }
    if c.gzip.is_empty() || c.bzip2.is_empty() {
        return bad("decompressor commands must not be empty");
    }
    Ok(())
}
