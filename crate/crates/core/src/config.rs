//! Run configuration shared by the command-line tool and the examples.
//!
//! A config file is TOML. Top-level keys pick the variant, seed and output
//! format; each stage has its own table:
//!
//! ```toml
//! variant = "all"
//! seed = 7
//!
//! [separation]
//! percussive_threshold = 1.75
//! median_order = 17
//!
//! [metric]
//! tmax_db = 20.0
//!
//! [psy]
//! pe_switch_threshold = 1800.0
//!
//! [reverb]
//! rt60_low_s = 3.0
//! ```
//!
//! Missing keys keep their defaults; unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::degrade::ReverbConfig;
use crate::error::{Error, Result};
use crate::metric::MetricConfig;
use crate::psymodel::{PsyConfig, PsyVariant};
use crate::separation::SeparationParams;

/// One variant or all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum VariantSelection {
    One(PsyVariant),
    All,
}

impl VariantSelection {
    pub fn variants(self) -> Vec<PsyVariant> {
        match self {
            VariantSelection::One(v) => vec![v],
            VariantSelection::All => PsyVariant::ALL.to_vec(),
        }
    }
}

impl Default for VariantSelection {
    fn default() -> Self {
        VariantSelection::One(PsyVariant::L2pm)
    }
}

impl FromStr for VariantSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(VariantSelection::All)
        } else {
            s.parse().map(VariantSelection::One)
        }
    }
}

impl TryFrom<String> for VariantSelection {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<VariantSelection> for String {
    fn from(v: VariantSelection) -> String {
        v.to_string()
    }
}

impl fmt::Display for VariantSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantSelection::One(PsyVariant::L2pm) => f.write_str("l2pm"),
            VariantSelection::One(PsyVariant::L3pm) => f.write_str("l3pm"),
            VariantSelection::One(PsyVariant::ModifiedL3pm) => f.write_str("mod-l3pm"),
            VariantSelection::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub variant: VariantSelection,
    pub seed: u64,
    pub format: OutputFormat,
    pub separation: SeparationParams,
    pub psy: PsyConfig,
    pub metric: MetricConfig,
    pub reverb: ReverbConfig,
}


impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_toml_str(&text).map_err(|e| e.at_path(path))
    }

    pub fn validate(&self) -> Result<()> {
        self.separation.validate()?;
        self.metric.validate()?;
        self.reverb.validate()
    }
}
