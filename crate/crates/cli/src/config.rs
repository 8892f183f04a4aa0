//! Flat key-value config files: `key = value` lines, `#` comments.
//! Flags always override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct FlatConfig {
    values: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{origin}:{}: expected `key = value`, got `{line}`", lineno + 1);
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                bail!("{origin}:{}: empty key", lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FlatConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }
}

/// Known experiment config keys, used to reject typos with a line reference.
pub const EXPERIMENT_KEYS: &[&str] = &[
    "mech", "curve", "dist", "n", "b", "k", "lambda", "horizon", "reps", "seed", "arrivals",
    "compare", "audit", "format", "out", "preset",
];

/// Parses an `n` spec: a single value, a comma list, or `lo..hi:step`.
pub fn parse_n_spec(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((range, step)) = spec.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .with_context(|| format!("range must look like lo..hi:step, got `{spec}`"))?;
        let lo: u64 = lo.trim().parse()?;
        let hi: u64 = hi.trim().parse()?;
        let step: u64 = step.trim().parse()?;
        if step == 0 || hi < lo {
            bail!("bad n range `{spec}`");
        }
        return Ok((lo..=hi).step_by(step as usize).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(Into::into))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines_and_ranges() {
        let cfg = FlatConfig::parse("# c\nmech = m_r, m_w\n n = 1000..2000:500 \n", "t").unwrap();
        assert_eq!(cfg.get("mech"), Some("m_r, m_w"));
        assert_eq!(parse_n_spec(cfg.get("n").unwrap()).unwrap(), vec![1000, 1500, 2000]);
        assert_eq!(parse_n_spec("64").unwrap(), vec![64]);
        assert_eq!(parse_n_spec("1,2,3").unwrap(), vec![1, 2, 3]);
        assert!(FlatConfig::parse("just words\n", "t").is_err());
    }
}
