//! INI configuration: plain `key = value` sections, one `[model.NAME]`
//! section per fitted model.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;
use mnar_core::heckman::GibbsConfig;
use mnar_core::sim::ModelSpec;
use mnar_core::AssumptionSpec;
use sha2::{Digest, Sha256};

const SPEC_KEYS: [&str; 9] = ["kind", "t_l", "t_h", "sigma", "a", "b", "alpha1", "alpha2", "alpha3"];

/// A model with the name its outputs are filed under.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedModel {
    pub name: String,
    pub model: ModelSpec,
}

impl NamedModel {
    pub fn new(name: &str, model: ModelSpec) -> Self {
        Self { name: name.to_string(), model }
    }
}

#[derive(Debug, Default)]
pub struct Config {
    ini: Option<Ini>,
    raw: Vec<u8>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let raw = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = std::str::from_utf8(&raw).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let ini = Ini::load_from_str(text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        Ok(Self { ini: Some(ini), raw })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.as_ref()?.get_from(Some(section), key).map(str::trim)
    }

    pub fn parse<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("[{section}] {key} = `{v}`: {e}")))
            .transpose()
    }

    /// Comma-separated list value.
    pub fn parse_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(section, key)
            .map(|v| {
                v.split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|e| anyhow!("[{section}] {key}: `{p}`: {e}")))
                    .collect()
            })
            .transpose()
    }

    /// Hex SHA-256 of the raw config bytes, empty input when no file was given.
    pub fn sha256(&self) -> String {
        Sha256::digest(&self.raw).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every `[model.NAME]` section in file order.
    pub fn models(&self) -> Result<Vec<NamedModel>> {
        let Some(ini) = &self.ini else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for (section, props) in ini.iter() {
            let Some(name) = section.and_then(|s| s.strip_prefix("model.")) else { continue };
            if name.is_empty() || name.contains(['/', '\\']) {
                bail!("[model.{name}]: model names must be non-empty and free of path separators");
            }
            let pairs: Vec<(&str, &str)> = props.iter().collect();
            if let Some((k, _)) = pairs.iter().find(|(k, _)| !SPEC_KEYS.contains(k)) {
                bail!("[model.{name}]: unknown key `{k}`");
            }
            let kind = props.get("kind").ok_or_else(|| anyhow!("[model.{name}]: missing `kind`"))?;
            let model = match kind.trim().to_ascii_lowercase().as_str() {
                "mar" => ModelSpec::Mar,
                "oracle" => ModelSpec::Oracle,
                "heckman" => ModelSpec::Heckman,
                _ => ModelSpec::Saturated(
                    AssumptionSpec::from_pairs(pairs.iter().copied()).with_context(|| format!("[model.{name}]"))?,
                ),
            };
            if out.iter().any(|m: &NamedModel| m.name == name) {
                bail!("model `{name}` defined twice");
            }
            out.push(NamedModel::new(name, model));
        }
        Ok(out)
    }

    /// `[gibbs]` overrides on the default sampler settings.
    pub fn gibbs(&self) -> Result<GibbsConfig> {
        let mut g = GibbsConfig::default();
        if let Some(v) = self.parse("gibbs", "iterations")? {
            g.iterations = v;
        }
        if let Some(v) = self.parse("gibbs", "burn_in")? {
            g.burn_in = v;
        }
        if let Some(v) = self.parse("gibbs", "mh_sd")? {
            g.mh_sd = v;
        }
        if let Some(v) = self.parse("gibbs", "fixed_rho")? {
            g.fixed_rho = Some(v);
        }
        g.validate().context("[gibbs]")?;
        Ok(g)
    }
}

/// `posterior` or a fixed probability.
pub fn parse_qz(v: &str) -> Result<mnar_core::QzMode> {
    if v.trim().eq_ignore_ascii_case("posterior") {
        return Ok(mnar_core::QzMode::Posterior);
    }
    let p: f64 = v.trim().parse().map_err(|e| anyhow!("qz = `{v}`: {e}"))?;
    if !(p > 0.0 && p < 1.0) {
        bail!("qz = {p} outside (0,1)");
    }
    Ok(mnar_core::QzMode::Fixed(p))
}

pub fn parse_bool(v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("`{v}` is not a boolean"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mnar_core::AssumptionKind;

    fn from_str(text: &str) -> Config {
        Config { ini: Some(Ini::load_from_str(text).unwrap()), raw: text.as_bytes().to_vec() }
    }

    #[test]
    fn models_in_file_order() {
        let c = from_str("[model.b]\nkind = heckman\n[model.a]\nkind = lognormal_betabias\nsigma = 0.4\na = 5\nb = 2\n");
        let m = c.models().unwrap();
        assert_eq!(m[0], NamedModel::new("b", ModelSpec::Heckman));
        match m[1].model {
            ModelSpec::Saturated(s) => {
                assert_eq!(s.kind, AssumptionKind::LognormalBetaBias);
                assert_eq!((s.sigma, s.a, s.b), (0.4, 5.0, 2.0));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn bad_models_rejected() {
        assert!(from_str("[model.x]\nkind = exact_iv\nsigmaa = 1\n").models().is_err());
        assert!(from_str("[model.x]\nt_l = 1\n").models().is_err());
        assert!(from_str("[model.x]\nkind = threshold_iv\nt_l = 2\nt_h = 1\n").models().is_err());
        assert!(from_str("[model.x]\nkind = wibble\n").models().is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(Config::default().sha256(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn qz_values() {
        assert_eq!(parse_qz("posterior").unwrap(), mnar_core::QzMode::Posterior);
        assert_eq!(parse_qz("0.5").unwrap(), mnar_core::QzMode::Fixed(0.5));
        assert!(parse_qz("1.5").is_err());
    }
}
