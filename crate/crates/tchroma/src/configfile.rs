//! Flat `key = value` config files. `#` starts a comment; unknown keys are
//! errors.

use std::path::Path;

use tchroma_core::Config;

use crate::error::{Error, IoContext, Result};

/// Environment variable naming a config file to load before any
/// command-line overrides.
pub const CONFIG_ENV: &str = "TCHROMA_CONFIG";

pub fn apply_text(cfg: &mut Config, text: &str) -> Result<()> {
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`, got `{raw}`", no + 1)))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

/// `key=value` as given on the command line.
pub fn apply_override(cfg: &mut Config, kv: &str) -> Result<()> {
    let (k, v) =
        kv.split_once('=').ok_or_else(|| Error::Usage(format!("override `{kv}` is not of the form key=value")))?;
    Ok(cfg.set(k.trim(), v.trim())?)
}

pub fn load(path: &Path) -> Result<Config> {
    let mut cfg = Config::default();
    apply_text(&mut cfg, &std::fs::read_to_string(path).at(path)?)?;
    Ok(cfg)
}

/// Every key, one per line, in a form [`apply_text`] reads back exactly.
pub fn dump(cfg: &Config) -> String {
    cfg.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Defaults, then the config file (if any), then overrides; validated.
pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => load(p)?,
        None => Config::default(),
    };
    for kv in overrides {
        apply_override(&mut cfg, kv)?;
    }
    cfg.validate().map_err(|e| Error::Usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_then_load_is_identity() {
        let cfg = Config { alpha: 0.55, seed: 99, delta_a_rel: 1.0 / 3.0, ..Config::default() };
        let mut back = Config::default();
        apply_text(&mut back, &dump(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_blank_lines_and_unknown_keys() {
        let mut cfg = Config::default();
        apply_text(&mut cfg, "# tuned\n\nalpha = 0.5  # tighter\n").unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert!(matches!(apply_text(&mut cfg, "alpah = 0.5"), Err(Error::Key(_))));
        assert!(matches!(apply_text(&mut cfg, "alpha 0.5"), Err(Error::Usage(_))));
        assert!(matches!(apply_override(&mut cfg, "alpha=abc"), Err(Error::Key(_))));
    }

    #[test]
    fn resolve_validates() {
        assert!(resolve(None, &["r_frac=0.4".into()]).is_err());
        assert_eq!(resolve(None, &["c=12".into()]).unwrap().c, 12);
    }
}
