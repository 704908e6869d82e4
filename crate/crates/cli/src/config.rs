//! Run configuration: a TOML file, overlaid with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use optrec::{LogBase, ProbVector, RevenueParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Tolerance on `|Σ utility − 1|` for configured vectors.
pub const CONFIG_SUM_TOL: f64 = 1e-6;

/// Evenly spaced range, written `min:max:steps` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, steps] = parts.as_slice() else {
            return Err(format!("expected min:max:steps, got `{s}`"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let range = RangeSpec {
            min: num(min)?,
            max: num(max)?,
            steps: steps
                .trim()
                .parse()
                .map_err(|e| format!("`{steps}`: {e}"))?,
        };
        range.check().map_err(|e| e.to_string())?;
        Ok(range)
    }
}

impl RangeSpec {
    pub fn check(&self) -> Result<(), CliError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(CliError::Config(format!(
                "range needs finite min < max, got {}:{}",
                self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(CliError::Config(format!(
                "range needs at least 2 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }
}

impl fmt::Display for RangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

/// A single revenue target or a sweep over targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Scalar(f64),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Utility distribution `U`.
    pub utility: Vec<f64>,
    pub revenue: RevenueParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSpec>,
    /// Raw corpus frequencies `Q`; echoed in metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Tilt range for `sweep-varpi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varpi: Option<RangeSpec>,
    /// Tilt at which `analyze` reports the partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_varpi: Option<f64>,
    /// Lattice resolution for `oracle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    /// Monte-Carlo trials for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Sequence length for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence_length: Option<u64>,
    /// Recommendation distribution for `simulate`; defaults to the optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<Vec<f64>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub beta_range: Option<RangeSpec>,
    pub varpi_range: Option<RangeSpec>,
    pub partition_varpi: Option<f64>,
    pub grid: Option<u32>,
    pub seed: Option<u64>,
    pub base: Option<LogBase>,
    pub out: Option<PathBuf>,
    pub trials: Option<u64>,
    pub sequence_length: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(b) = o.beta {
            self.beta = Some(BetaSpec::Scalar(b));
        }
        if let Some(r) = o.beta_range {
            self.beta = Some(BetaSpec::Range(r));
        }
        if o.varpi_range.is_some() {
            self.varpi = o.varpi_range;
        }
        if o.partition_varpi.is_some() {
            self.partition_varpi = o.partition_varpi;
        }
        if o.grid.is_some() {
            self.grid = o.grid;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(b) = o.base {
            self.log_base = b;
        }
        if o.out.is_some() {
            self.output = o.out.clone();
        }
        if o.trials.is_some() {
            self.trials = o.trials;
        }
        if o.sequence_length.is_some() {
            self.sequence_length = o.sequence_length;
        }
    }

    pub fn utility(&self) -> Result<ProbVector, CliError> {
        ProbVector::new(&self.utility, CONFIG_SUM_TOL)
            .map_err(|e| CliError::Config(format!("field `utility`: {e}")))
    }

    pub fn beta_scalar(&self) -> Result<f64, CliError> {
        match self.beta {
            Some(BetaSpec::Scalar(b)) if b.is_finite() => Ok(b),
            Some(BetaSpec::Scalar(b)) => Err(CliError::Config(format!("field `beta` is not finite ({b})"))),
            Some(BetaSpec::Range(_)) => Err(CliError::Config(
                "field `beta` must be a single value for this command".into(),
            )),
            None => Err(CliError::Config("missing `beta` (set it in the config or pass --beta)".into())),
        }
    }

    pub fn beta_range(&self) -> Result<RangeSpec, CliError> {
        match self.beta {
            Some(BetaSpec::Range(r)) => r.check().map(|_| r),
            _ => Err(CliError::Config(
                "missing `beta` range (use beta = { min, max, steps } or --beta-range)".into(),
            )),
        }
    }

    pub fn varpi_range(&self) -> Result<RangeSpec, CliError> {
        let r = self.varpi.ok_or_else(|| {
            CliError::Config("missing `varpi` range (use varpi = { min, max, steps } or --varpi-range)".into())
        })?;
        r.check()?;
        Ok(r)
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unserializable config: {e}\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
utility = [0.1, 0.2, 0.3, 0.4]
beta = 1.5

[revenue]
cost_push = 4.5
reward_hit = 2
cost_miss_like = 2
reward_ad = 11
cost_omit = 2
"#;

    #[test]
    fn parses_and_defaults() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.beta, Some(BetaSpec::Scalar(1.5)));
        assert_eq!(c.log_base, LogBase::Bits);
        assert_eq!(c.revenue.denominator(), 5.0);
        assert_eq!(c.utility().unwrap().len(), 4);
    }

    #[test]
    fn range_beta() {
        let text = BASE.replace("beta = 1.5", "beta = { min = 0, max = 3, steps = 31 }");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.beta_range().unwrap().steps, 31);
        assert!(c.beta_scalar().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let e = RunConfig::parse(&format!("{BASE}\nbogus = 1\n")).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = RunConfig::parse(&BASE.replace("cost_omit", "cost_omitted"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("cost_omitted"), "{e}");
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn validates_utility() {
        let c = RunConfig::parse(&BASE.replace("0.4]", "0.5]")).unwrap();
        assert!(c.utility().unwrap_err().to_string().contains("utility"));
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::parse(BASE).unwrap();
        c.apply(&Overrides {
            beta_range: Some("0:2:5".parse().unwrap()),
            base: Some(LogBase::Nats),
            seed: Some(3),
            ..Overrides::default()
        });
        assert_eq!(c.beta_range().unwrap(), RangeSpec { min: 0.0, max: 2.0, steps: 5 });
        assert_eq!(c.log_base, LogBase::Nats);
        assert_eq!(c.seed, Some(3));
    }

    #[test]
    fn range_parsing() {
        let r: RangeSpec = "-40:40:161".parse().unwrap();
        assert_eq!((r.min, r.max, r.steps), (-40.0, 40.0, 161));
        assert!("1:0:5".parse::<RangeSpec>().is_err());
        assert!("0:1".parse::<RangeSpec>().is_err());
        assert!("0:1:1".parse::<RangeSpec>().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
