use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Count,
    Asymptotic,
    Volume,
    Subspaces,
    Exceptional,
    QuasinullGrowth,
    Diophantine,
    Ewas,
    Classify,
    Spectrum,
    Paircorr,
    BerryTabor,
    AlphaMoment,
    Siegel,
    ShrinkProfile,
}

impl Experiment {
    pub const ALL: [Experiment; 15] = [
        Experiment::Count,
        Experiment::Asymptotic,
        Experiment::Volume,
        Experiment::Subspaces,
        Experiment::Exceptional,
        Experiment::QuasinullGrowth,
        Experiment::Diophantine,
        Experiment::Ewas,
        Experiment::Classify,
        Experiment::Spectrum,
        Experiment::Paircorr,
        Experiment::BerryTabor,
        Experiment::AlphaMoment,
        Experiment::Siegel,
        Experiment::ShrinkProfile,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| {
            let names: Vec<String> = Experiment::ALL.iter().map(|e| e.name()).collect();
            CliError::Validation(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::Validation(format!("unknown format {s:?}; expected csv or json"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

/// The config file as written by the user.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub parameters: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedOutput {
    pub path: PathBuf,
    pub format: Format,
}

/// Every field filled in; echoed into each artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: ResolvedOutput,
    pub parameters: serde_json::Value,
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

pub const DEFAULT_SEED: u64 = 0x5EED;

pub fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
}

pub fn load_raw(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    parse_raw(&text)
}

/// Merges flags over the file and fills experiment defaults.
pub fn resolve(raw: RawConfig, flags: &Overrides) -> Result<ResolvedConfig, CliError> {
    let experiment = match (flags.experiment, raw.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Validation(format!(
                "--experiment {a} conflicts with config experiment {b}"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Validation("no experiment given (flag or config key `experiment`)".into())),
    };
    let out = raw.output.unwrap_or_default();
    let format = flags.format.or(out.format).unwrap_or_default();
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = flags.output.clone().or(out.path).unwrap_or_else(|| PathBuf::from(format!("{experiment}.{ext}")));
    let parameters = crate::experiments::resolve_parameters(experiment, raw.parameters)?;
    Ok(ResolvedConfig {
        experiment,
        seed: flags.seed.or(raw.seed).unwrap_or(DEFAULT_SEED),
        output: ResolvedOutput { path, format },
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!(Experiment::QuasinullGrowth.name(), "quasinull-growth");
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_raw(r#"{"experiment": "count", "sede": 3}"#).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
        let raw = parse_raw(r#"{"experiment": "paircorr", "parameters": {"torus": {"basis": [[1,0],[0,1]], "flux": [0.1, 0.2]}, "aa": 1}}"#).unwrap();
        let err = resolve(raw, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("aa"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let raw = parse_raw(r#"{"experiment": "spectrum", "seed": 4, "output": {"format": "json"}}"#).unwrap();
        let flags = Overrides { seed: Some(9), ..Default::default() };
        let r = resolve(raw.clone(), &flags).unwrap();
        assert_eq!(r.seed, 9);
        assert_eq!(r.output.format, Format::Json);
        assert_eq!(r.output.path, PathBuf::from("spectrum.json"));
        let flags = Overrides { experiment: Some(Experiment::Count), ..Default::default() };
        assert!(resolve(raw, &flags).is_err());
    }
}
