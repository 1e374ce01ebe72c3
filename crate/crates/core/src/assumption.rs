//! Restriction sets placed on the saturated model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::DirichletHyper;
use crate::omega::PsiRestriction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionKind {
    None,
    ExactIv,
    ThresholdIv,
    LognormalIv,
    ExactIvPosBias,
    LognormalBetaBias,
}

impl AssumptionKind {
    pub const ALL: [AssumptionKind; 6] = [
        AssumptionKind::None,
        AssumptionKind::ExactIv,
        AssumptionKind::ThresholdIv,
        AssumptionKind::LognormalIv,
        AssumptionKind::ExactIvPosBias,
        AssumptionKind::LognormalBetaBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AssumptionKind::None => "none",
            AssumptionKind::ExactIv => "exact_iv",
            AssumptionKind::ThresholdIv => "threshold_iv",
            AssumptionKind::LognormalIv => "lognormal_iv",
            AssumptionKind::ExactIvPosBias => "exact_iv_posbias",
            AssumptionKind::LognormalBetaBias => "lognormal_betabias",
        }
    }
}

impl fmt::Display for AssumptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AssumptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AssumptionKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "sat" | "saturated" => Some(AssumptionKind::None),
                _ => None,
            })
            .ok_or_else(|| invalid(format!("unknown assumption kind `{s}`")))
    }
}

/// An assumption kind with its hyperparameters. Fields a kind does not use
/// keep their defaults and are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSpec {
    pub kind: AssumptionKind,
    pub t_l: f64,
    pub t_h: f64,
    pub sigma: f64,
    pub a: f64,
    pub b: f64,
    pub hyper: DirichletHyper,
}

impl Default for AssumptionSpec {
    fn default() -> Self {
        Self {
            kind: AssumptionKind::None,
            t_l: 2.0 / 3.0,
            t_h: 1.5,
            sigma: 0.4,
            a: 4.0,
            b: 2.0,
            hyper: DirichletHyper::default(),
        }
    }
}

impl AssumptionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn exact_iv() -> Self {
        Self { kind: AssumptionKind::ExactIv, ..Self::default() }
    }

    pub fn threshold_iv(t_l: f64, t_h: f64) -> Self {
        Self { kind: AssumptionKind::ThresholdIv, t_l, t_h, ..Self::default() }
    }

    pub fn lognormal_iv(sigma: f64) -> Self {
        Self { kind: AssumptionKind::LognormalIv, sigma, ..Self::default() }
    }

    pub fn exact_iv_posbias() -> Self {
        Self { kind: AssumptionKind::ExactIvPosBias, ..Self::default() }
    }

    pub fn lognormal_betabias(sigma: f64, a: f64, b: f64) -> Self {
        Self { kind: AssumptionKind::LognormalBetaBias, sigma, a, b, ..Self::default() }
    }

    pub fn with_hyper(mut self, hyper: DirichletHyper) -> Self {
        self.hyper = hyper;
        self
    }

    /// The five restricted priors at their default hyperparameters.
    pub fn restricted_defaults() -> [AssumptionSpec; 5] {
        [
            Self::exact_iv(),
            Self::threshold_iv(2.0 / 3.0, 1.5),
            Self::lognormal_iv(0.4),
            Self::exact_iv_posbias(),
            Self::lognormal_betabias(0.4, 4.0, 2.0),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        DirichletHyper::new(self.hyper.a1, self.hyper.a2, self.hyper.a3)?;
        match self.kind {
            AssumptionKind::ThresholdIv => {
                if !(self.t_l > 0.0 && self.t_l < self.t_h) || self.t_l.is_nan() || self.t_h.is_nan() {
                    return Err(invalid(format!("thresholds need 0 < t_l < t_h, got ({}, {})", self.t_l, self.t_h)));
                }
            }
            AssumptionKind::LognormalIv => check_sigma(self.sigma)?,
            AssumptionKind::LognormalBetaBias => {
                check_sigma(self.sigma)?;
                if !(self.a > 1.0 && self.b > 1.0 && self.a.is_finite() && self.b.is_finite()) {
                    return Err(invalid(format!("beta shape ({}, {}) needs a > 1 and b > 1", self.a, self.b)));
                }
            }
            AssumptionKind::ExactIv | AssumptionKind::ExactIvPosBias => {
                if self.hyper.a3 <= 1.0 {
                    return Err(invalid("exact instrument needs alpha3 > 1 for the constrained cell"));
                }
            }
            AssumptionKind::None => {}
        }
        Ok(())
    }

    /// Short label for tables. Free of commas so it can sit in a CSV field.
    pub fn label(&self) -> String {
        match self.kind {
            AssumptionKind::None => "sat".into(),
            AssumptionKind::ExactIv => "exact_iv".into(),
            AssumptionKind::ThresholdIv => format!("threshold_iv[{};{}]", self.t_l, self.t_h),
            AssumptionKind::LognormalIv => format!("lognormal_iv[{}]", self.sigma),
            AssumptionKind::ExactIvPosBias => "exact_iv_posbias".into(),
            AssumptionKind::LognormalBetaBias => {
                format!("lognormal_betabias[{};{};{}]", self.sigma, self.a, self.b)
            }
        }
    }

    /// The closed-form region this spec implies for the risk difference.
    /// Soft priors charge every `omega` and so leave it unrestricted.
    pub fn psi_restriction(&self) -> PsiRestriction<f64> {
        match self.kind {
            AssumptionKind::ExactIv => PsiRestriction::ExactIv,
            AssumptionKind::ExactIvPosBias => PsiRestriction::ExactIvPosBias,
            AssumptionKind::ThresholdIv => PsiRestriction::Threshold { t_l: self.t_l, t_h: self.t_h },
            AssumptionKind::None | AssumptionKind::LognormalIv | AssumptionKind::LognormalBetaBias => PsiRestriction::None,
        }
    }

    /// Bit pattern of every field, for cache keys.
    pub fn key_bits(&self) -> [u64; 10] {
        [
            self.kind as u64,
            self.t_l.to_bits(),
            self.t_h.to_bits(),
            self.sigma.to_bits(),
            self.a.to_bits(),
            self.b.to_bits(),
            self.hyper.a1.to_bits(),
            self.hyper.a2.to_bits(),
            self.hyper.a3.to_bits(),
            0,
        ]
    }

    /// Builds a spec from `key = value` pairs. Recognised keys are `kind`,
    /// `t_l`, `t_h`, `sigma`, `a`, `b` and `alpha1..alpha3`; other keys are
    /// left to the caller.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut spec = Self::default();
        let mut kind = None;
        for (k, v) in pairs {
            let num = || -> Result<f64> {
                v.trim().parse::<f64>().map_err(|e| invalid(format!("{k} = `{v}`: {e}")))
            };
            match k.trim() {
                "kind" => kind = Some(v.parse::<AssumptionKind>()?),
                "t_l" => spec.t_l = num()?,
                "t_h" => spec.t_h = num()?,
                "sigma" => spec.sigma = num()?,
                "a" => spec.a = num()?,
                "b" => spec.b = num()?,
                "alpha1" => spec.hyper.a1 = num()?,
                "alpha2" => spec.hyper.a2 = num()?,
                "alpha3" => spec.hyper.a3 = num()?,
                _ => {}
            }
        }
        spec.kind = kind.ok_or_else(|| invalid("missing `kind`"))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Inverse of [`AssumptionSpec::from_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("kind", self.kind.name().to_string()),
            ("t_l", self.t_l.to_string()),
            ("t_h", self.t_h.to_string()),
            ("sigma", self.sigma.to_string()),
            ("a", self.a.to_string()),
            ("b", self.b.to_string()),
            ("alpha1", self.hyper.a1.to_string()),
            ("alpha2", self.hyper.a2.to_string()),
            ("alpha3", self.hyper.a3.to_string()),
        ]
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && !sigma.is_nan() {
        Ok(())
    } else {
        Err(invalid(format!("sigma must be positive, got {sigma}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation_rules() {
        assert!(AssumptionSpec::threshold_iv(1.5, 2.0 / 3.0).validate().is_err());
        assert!(AssumptionSpec::threshold_iv(0.5, 2.0).validate().is_ok());
        assert!(AssumptionSpec::lognormal_iv(0.0).validate().is_err());
        assert!(AssumptionSpec::lognormal_betabias(0.4, 1.0, 2.0).validate().is_err());
        assert!(AssumptionSpec::lognormal_betabias(0.4, 5.0, 2.0).validate().is_ok());
        let flat = DirichletHyper { a1: 1.0, a2: 1.0, a3: 1.0 };
        assert!(AssumptionSpec::exact_iv().with_hyper(flat).validate().is_err());
        for s in AssumptionSpec::restricted_defaults() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn parse_kind_aliases() {
        assert_eq!("Exact-IV".parse::<AssumptionKind>().unwrap(), AssumptionKind::ExactIv);
        assert_eq!("sat".parse::<AssumptionKind>().unwrap(), AssumptionKind::None);
        assert!("bogus".parse::<AssumptionKind>().is_err());
    }

    #[test]
    fn pairs_parse_exactly() {
        let s = AssumptionSpec::from_pairs([("kind", "threshold_iv"), ("t_l", "0.6666666666666666"), ("t_h", "1.5")]).unwrap();
        assert_eq!(s.t_l, 2.0 / 3.0);
        assert!(AssumptionSpec::from_pairs([("t_l", "0.5")]).is_err());
        assert!(AssumptionSpec::from_pairs([("kind", "lognormal_iv"), ("sigma", "abc")]).is_err());
    }

    proptest! {
        #[test]
        fn pairs_round_trip(sigma in 0.01f64..5.0, a in 1.01f64..10.0, b in 1.01f64..10.0, a3 in 1.01f64..20.0) {
            let s = AssumptionSpec::lognormal_betabias(sigma, a, b)
                .with_hyper(DirichletHyper::new(1.0, 1.0, a3).unwrap());
            let pairs = s.to_pairs();
            let back = AssumptionSpec::from_pairs(pairs.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
