//! Run configuration: a flat, typed `key = value` text format with section
//! headers, plus validation.
//!
//! Grammar (one setting per line):
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Sections and keys:
//!
//! | section | keys |
//! |---------|------|
//! | `grid`  | `n` (int), `half_width` (float) |
//! | `pde`   | `t_final` (float), `n_steps` (int), `gs_tol` (float), `gs_max_sweeps` (int) |
//! | `sde`   | `n_particles` (int), `dt` (float), `epsilon_reg` (float), `kde_bandwidth` (float or `silverman`), `refresh_every` (int), `n_snapshots` (int) |
//! | `run`   | `seed` (int) |
//!
//! Unset keys fall back to scenario defaults. CLI flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Partially-specified configuration: `None` means "use the scenario default".
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunConfig {
    pub grid_n: Option<usize>,
    pub domain_l: Option<f64>,
    pub t_final: Option<f64>,
    pub n_steps: Option<usize>,
    pub gs_tol: Option<f64>,
    pub gs_max_sweeps: Option<usize>,
    pub n_particles: Option<usize>,
    pub dt: Option<f64>,
    pub epsilon_reg: Option<f64>,
    /// `None` = Silverman rule, `Some(v)` = fixed bandwidth.
    pub kde_bandwidth: Option<f64>,
    pub refresh_every: Option<usize>,
    pub n_snapshots: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Merge `self` over `other` (self wins where set).
    pub fn over(&self, other: &RunConfig) -> RunConfig {
        RunConfig {
            grid_n: self.grid_n.or(other.grid_n),
            domain_l: self.domain_l.or(other.domain_l),
            t_final: self.t_final.or(other.t_final),
            n_steps: self.n_steps.or(other.n_steps),
            gs_tol: self.gs_tol.or(other.gs_tol),
            gs_max_sweeps: self.gs_max_sweeps.or(other.gs_max_sweeps),
            n_particles: self.n_particles.or(other.n_particles),
            dt: self.dt.or(other.dt),
            epsilon_reg: self.epsilon_reg.or(other.epsilon_reg),
            kde_bandwidth: self.kde_bandwidth.or(other.kde_bandwidth),
            refresh_every: self.refresh_every.or(other.refresh_every),
            n_snapshots: self.n_snapshots.or(other.n_snapshots),
            seed: self.seed.or(other.seed),
        }
    }
}

fn parse_usize(section: &str, key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::config(format!("{section}.{key}"), format!("not an integer: `{v}`")))
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::config(format!("{section}.{key}"), format!("not a number: `{v}`")))
}

fn parse_u64(section: &str, key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::config(format!("{section}.{key}"), format!("not an integer: `{v}`")))
}

/// Parse the config text; collects every error instead of stopping at the first.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, Vec<Error>> {
    let mut cfg = RunConfig::default();
    let mut errors = vec![];
    let mut section = String::new();
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if !matches!(section.as_str(), "grid" | "pde" | "sde" | "run") {
                errors.push(Error::config(
                    section.clone(),
                    format!("unknown section (line {})", lineno + 1),
                ));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let path = format!("{section}.{key}");
        if seen.insert(path.clone(), ()).is_some() {
            errors.push(Error::config(path.clone(), "duplicate key"));
            continue;
        }
        let res: Result<()> = (|| {
            match (section.as_str(), key) {
                ("grid", "n") => cfg.grid_n = Some(parse_usize(&section, key, value)?),
                ("grid", "half_width") => cfg.domain_l = Some(parse_f64(&section, key, value)?),
                ("pde", "t_final") => cfg.t_final = Some(parse_f64(&section, key, value)?),
                ("pde", "n_steps") => cfg.n_steps = Some(parse_usize(&section, key, value)?),
                ("pde", "gs_tol") => cfg.gs_tol = Some(parse_f64(&section, key, value)?),
                ("pde", "gs_max_sweeps") => {
                    cfg.gs_max_sweeps = Some(parse_usize(&section, key, value)?)
                }
                ("sde", "n_particles") => {
                    cfg.n_particles = Some(parse_usize(&section, key, value)?)
                }
                ("sde", "dt") => cfg.dt = Some(parse_f64(&section, key, value)?),
                ("sde", "epsilon_reg") => {
                    cfg.epsilon_reg = Some(parse_f64(&section, key, value)?)
                }
                ("sde", "kde_bandwidth") => {
                    if value != "silverman" {
                        cfg.kde_bandwidth = Some(parse_f64(&section, key, value)?);
                    }
                }
                ("sde", "refresh_every") => {
                    cfg.refresh_every = Some(parse_usize(&section, key, value)?)
                }
                ("sde", "n_snapshots") => {
                    cfg.n_snapshots = Some(parse_usize(&section, key, value)?)
                }
                ("run", "seed") => cfg.seed = Some(parse_u64(&section, key, value)?),
                _ => {
                    return Err(Error::config(
                        path.clone(),
                        format!("unknown key (line {})", lineno + 1),
                    ))
                }
            }
            Ok(())
        })();
        if let Err(e) = res {
            errors.push(e);
        }
    }
    // range checks on whatever was set
    if let Some(n) = cfg.grid_n {
        if n < 8 {
            errors.push(Error::config("grid.n", "must be >= 8"));
        }
    }
    if let Some(l) = cfg.domain_l {
        if l <= 0.0 {
            errors.push(Error::config("grid.half_width", "must be positive"));
        }
    }
    if let Some(t) = cfg.t_final {
        if t <= 0.0 {
            errors.push(Error::config("pde.t_final", "must be positive"));
        }
    }
    if let Some(n) = cfg.n_steps {
        if n == 0 {
            errors.push(Error::config("pde.n_steps", "must be >= 1"));
        }
    }
    if let Some(v) = cfg.gs_tol {
        if v <= 0.0 {
            errors.push(Error::config("pde.gs_tol", "must be positive"));
        }
    }
    if let Some(n) = cfg.n_particles {
        if n == 0 {
            errors.push(Error::config("sde.n_particles", "must be >= 1"));
        }
    }
    if let Some(v) = cfg.dt {
        if v <= 0.0 {
            errors.push(Error::config("sde.dt", "must be positive"));
        }
    }
    if let Some(v) = cfg.epsilon_reg {
        if v < 0.0 {
            errors.push(Error::config("sde.epsilon_reg", "must be nonnegative"));
        }
    }
    if let Some(v) = cfg.kde_bandwidth {
        if v <= 0.0 {
            errors.push(Error::config("sde.kde_bandwidth", "must be positive"));
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

pub fn load_config(path: &Path) -> std::result::Result<RunConfig, Vec<Error>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Error::config(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )]
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_all_defaults() {
        let cfg = parse_config("").unwrap();
        assert!(cfg.grid_n.is_none());
        assert!(cfg.seed.is_none());
    }

    #[test]
    fn full_file_parses() {
        let text = "\n# comment\n[grid]\nn = 512\nhalf_width = 10.0\n\n[pde]\nt_final = 2.0\nn_steps = 64\n\n[sde]\nn_particles = 1000\ndt = 0.001\nkde_bandwidth = silverman\n\n[run]\nseed = 42\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.grid_n, Some(512));
        assert_eq!(cfg.domain_l, Some(10.0));
        assert_eq!(cfg.seed, Some(42));
        assert!(cfg.kde_bandwidth.is_none()); // silverman keeps the rule
    }

    #[test]
    fn negative_dt_names_the_key() {
        let errs = parse_config("[sde]\ndt = -0.5\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().contains("sde.dt"));
    }

    #[test]
    fn errors_are_aggregated() {
        let errs = parse_config("[grid]\nn = 2\nbogus = 1\n[pde]\nt_final = -1\n").unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
    }

    #[test]
    fn override_precedence() {
        let file = parse_config("[run]\nseed = 1\n[grid]\nn = 256\n").unwrap();
        let cli = RunConfig {
            seed: Some(2),
            ..Default::default()
        };
        let merged = cli.over(&file);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.grid_n, Some(256));
    }
}
