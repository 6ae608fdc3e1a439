//! Flat sectioned key=value configuration files.
//!
//! Lines are `key = value` grouped under `[section]` headers; `#` starts a
//! comment. Parse and lookup errors carry the offending line or the missing
//! `section.key` so the exit-2 diagnostics can name them.

use std::collections::BTreeMap;
use std::fmt;

use chainlab::chain::Model;
use chainlab::experiment::{BracketConfig, DriftConfig, FloorConfig, PacketConfig};
use chainlab::gibbs::{SamplerConfig, SamplerMethod};
use chainlab::integrate::Scheme;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed file: section -> key -> value.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = ConfigFile::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                out.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            if section.is_empty() {
                return Err(ConfigError(format!(
                    "line {}: key {:?} appears before any [section]",
                    lineno + 1,
                    key.trim()
                )));
            }
            out.sections
                .get_mut(&section)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(out)
    }

    fn raw(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
            .ok_or_else(|| ConfigError(format!("missing key {section}.{key}")))
    }

    fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError> {
        let raw = self.raw(section, key)?;
        raw.parse().map_err(|_| {
            ConfigError(format!("key {section}.{key}: cannot parse {raw:?}"))
        })
    }

    fn get_or<T: std::str::FromStr>(
        &self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError> {
        match self.raw(section, key) {
            Ok(raw) => raw
                .parse()
                .map_err(|_| ConfigError(format!("key {section}.{key}: cannot parse {raw:?}"))),
            Err(_) => Ok(default),
        }
    }

    fn get_list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>, ConfigError> {
        let raw = self.raw(section, key)?;
        raw.split(',')
            .map(|tok| {
                tok.trim().parse().map_err(|_| {
                    ConfigError(format!("key {section}.{key}: cannot parse element {tok:?}"))
                })
            })
            .collect()
    }

    fn model(&self, section: &str, key: &str, default: Model) -> Result<Model, ConfigError> {
        match self.raw(section, key) {
            Err(_) => Ok(default),
            Ok("fput") => Ok(Model::Fput),
            Ok("toda") => Ok(Model::Toda),
            Ok("harmonic") => Ok(Model::Harmonic),
            Ok(other) => Err(ConfigError(format!(
                "key {section}.{key}: unknown model {other:?} (fput | toda | harmonic)"
            ))),
        }
    }

    fn scheme(&self) -> Result<Scheme, ConfigError> {
        match self.raw("integrator", "scheme") {
            Err(_) => Ok(Scheme::Yoshida4),
            Ok("leapfrog2") => Ok(Scheme::Leapfrog2),
            Ok("yoshida4") => Ok(Scheme::Yoshida4),
            Ok(other) => Err(ConfigError(format!(
                "key integrator.scheme: unknown scheme {other:?} (leapfrog2 | yoshida4)"
            ))),
        }
    }

    pub fn sampler(&self) -> Result<SamplerConfig, ConfigError> {
        let method = match self.raw("sampler", "method") {
            Err(_) => SamplerMethod::ConstrainedMcmc,
            Ok("constrained_mcmc") => SamplerMethod::ConstrainedMcmc,
            Ok("product_theta") => SamplerMethod::ProductTheta,
            Ok(other) => {
                return Err(ConfigError(format!(
                    "key sampler.method: unknown method {other:?}"
                )))
            }
        };
        Ok(SamplerConfig {
            method,
            n_burn: self.get_or("sampler", "n_burn", 0)?,
            thin: self.get_or("sampler", "thin", 5)?,
            seed: self.get("sampler", "seed")?,
            chains: self.get_or("sampler", "chains", 0)?,
        })
    }

    pub fn kind(&self) -> Result<String, ConfigError> {
        self.get("experiment", "kind")
    }

    pub fn output_dir(&self) -> Option<String> {
        self.raw("output", "dir").ok().map(str::to_string)
    }

    pub fn drift(&self) -> Result<DriftConfig, ConfigError> {
        Ok(DriftConfig {
            n: self.get("chain", "n")?,
            chi: self.get_or("chain", "chi", 1.0)?,
            model: self.model("chain", "model", Model::Fput)?,
            beta_grid: self.get_list("experiment", "beta_grid")?,
            m_list: self.get_list("experiment", "m_list")?,
            t_grid: self.get_list("experiment", "t_grid")?,
            n_samples: self.get("experiment", "n_samples")?,
            delta1: self.get_or("experiment", "delta1", 2.0)?,
            fit_t: self.get_or("experiment", "fit_t", f64::MAX)?,
            fit_beta: self.get_or("experiment", "fit_beta", f64::MAX)?,
            dt: self.get_or("integrator", "dt", 0.0)?,
            scheme: self.scheme()?,
            sampler: self.sampler()?,
        })
    }

    pub fn packet(&self) -> Result<PacketConfig, ConfigError> {
        Ok(PacketConfig {
            n: self.get("chain", "n")?,
            chi: self.get_or("chain", "chi", 0.0)?,
            model: self.model("chain", "model", Model::Toda)?,
            beta_grid: self.get_list("experiment", "beta_grid")?,
            packet_m: self.get("experiment", "packet_m")?,
            packet_y: self.get_list("experiment", "packet_y")?,
            t_grid: self.get_list("experiment", "t_grid")?,
            n_samples: self.get("experiment", "n_samples")?,
            delta1: self.get_or("experiment", "delta1", 2.0)?,
            trend_t_min: self.get_or("experiment", "trend_t_min", 0.0)?,
            dt: self.get_or("integrator", "dt", 0.0)?,
            scheme: self.scheme()?,
            sampler: self.sampler()?,
        })
    }

    pub fn floor(&self) -> Result<FloorConfig, ConfigError> {
        Ok(FloorConfig {
            model: self.model("chain", "model", Model::Toda)?,
            chi: self.get_or("chain", "chi", 0.0)?,
            beta_grid: self.get_list("experiment", "beta_grid")?,
            n_grid: self.get_list("experiment", "n_grid")?,
            n_fixed: self.get("experiment", "n_fixed")?,
            beta_fixed: self.get("experiment", "beta_fixed")?,
            m_var: self.get_or("experiment", "m_var", 2)?,
            m_tail: self.get_or("experiment", "m_tail", 4)?,
            n_samples: self.get("experiment", "n_samples")?,
            sampler: self.sampler()?,
        })
    }

    pub fn bracket(&self) -> Result<BracketConfig, ConfigError> {
        Ok(BracketConfig {
            chi: self.get_or("chain", "chi", 2.0)?,
            beta_grid: self.get_list("experiment", "beta_grid")?,
            n_grid: self.get_list("experiment", "n_grid")?,
            n_fixed: self.get("experiment", "n_fixed")?,
            beta_fixed: self.get("experiment", "beta_fixed")?,
            m_list: self.get_list("experiment", "m_list")?,
            n_samples: self.get("experiment", "n_samples")?,
            sampler: self.sampler()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let text = "# demo\n[chain]\nn = 32\nchi = 2.0\n\n[experiment]\nkind = drift\nbeta_grid = 8, 16,32\nm_list = 2,3\nt_grid = 1,2\nn_samples = 150\n[sampler]\nseed = 7\n";
        let cf = ConfigFile::parse(text).unwrap();
        assert_eq!(cf.kind().unwrap(), "drift");
        let d = cf.drift().unwrap();
        assert_eq!(d.n, 32);
        assert_eq!(d.beta_grid, vec![8.0, 16.0, 32.0]);
        assert_eq!(d.sampler.seed, 7);
        assert_eq!(d.sampler.thin, 5);
    }

    #[test]
    fn missing_key_is_named() {
        let cf = ConfigFile::parse("[chain]\nn = 8\n[experiment]\nkind = drift\n").unwrap();
        let err = cf.drift().unwrap_err();
        assert!(err.to_string().contains("experiment.beta_grid"), "{err}");
    }

    #[test]
    fn bad_lines_carry_line_numbers() {
        let err = ConfigFile::parse("[chain\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let err = ConfigFile::parse("[a]\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = ConfigFile::parse("orphan = 1\n").unwrap_err();
        assert!(err.to_string().contains("before any"));
    }
}
