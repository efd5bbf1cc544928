use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use enkf::ensemble::{GainMode, MeasurementOrder};
use serde::Deserialize;

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Scalar,
    Ungm,
    Batch,
    Lorenz96,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [Self::Scalar, Self::Ungm, Self::Batch, Self::Lorenz96];

    pub fn name(self) -> &'static str {
        match self {
            Self::Scalar => "scalar",
            Self::Ungm => "ungm",
            Self::Batch => "batch",
            Self::Lorenz96 => "lorenz96",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment '{s}'")))
    }
}

pub fn parse_gain(s: &str) -> Result<GainMode, LabError> {
    match s {
        "sample" => Ok(GainMode::Sampled),
        "model" => Ok(GainMode::ModelKnowledge),
        "ls" => Ok(GainMode::LeastSquares),
        "auto" => Ok(GainMode::Auto),
        other => Err(LabError::Config(format!("unknown gain mode '{other}'"))),
    }
}

pub fn gain_name(g: GainMode) -> &'static str {
    match g {
        GainMode::Sampled => "sample",
        GainMode::ModelKnowledge => "model",
        GainMode::LeastSquares => "ls",
        GainMode::Auto => "auto",
    }
}

pub fn parse_order(s: &str) -> Result<MeasurementOrder, LabError> {
    match s {
        "natural" | "forward" => Ok(MeasurementOrder::Natural),
        "reverse" => Ok(MeasurementOrder::Reverse),
        "random" => Ok(MeasurementOrder::Random),
        other => Err(LabError::Config(format!("unknown measurement order '{other}'"))),
    }
}

pub fn order_name(o: MeasurementOrder) -> &'static str {
    match o {
        MeasurementOrder::Natural => "natural",
        MeasurementOrder::Reverse => "reverse",
        MeasurementOrder::Random => "random",
    }
}

/// Fully resolved parameters of one experiment invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub ensemble_size: usize,
    pub inflation: f64,
    pub taper: bool,
    pub taper_length: f64,
    pub gain: GainMode,
    pub order: MeasurementOrder,
    pub sequential: bool,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads for Monte Carlo runs; 0 uses the rayon default.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            ensemble_size: 5,
            inflation: 1.0,
            taper: false,
            taper_length: 5.0,
            gain: GainMode::Sampled,
            order: MeasurementOrder::Natural,
            sequential: false,
            steps: 10,
            runs: 10_000,
            seed: 2017,
            out: PathBuf::from("out").join(experiment.name()),
            threads: 0,
        };
        match experiment {
            ExperimentKind::Scalar => base,
            ExperimentKind::Ungm => Self {
                ensemble_size: 500,
                steps: 151,
                runs: 100,
                ..base
            },
            ExperimentKind::Batch => Self {
                ensemble_size: 50,
                gain: GainMode::ModelKnowledge,
                steps: 49,
                runs: 1,
                ..base
            },
            ExperimentKind::Lorenz96 => Self {
                ensemble_size: 40,
                gain: GainMode::ModelKnowledge,
                steps: 10_000,
                runs: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.ensemble_size < 2 {
            return Err(LabError::Config(format!("ensemble size {} < 2", self.ensemble_size)));
        }
        if !(self.inflation >= 1.0) {
            return Err(LabError::Config(format!("inflation {} < 1", self.inflation)));
        }
        if self.steps < 1 || self.runs < 1 {
            return Err(LabError::Config("steps and runs must be at least 1".into()));
        }
        if !(self.taper_length > 0.0) {
            return Err(LabError::Config(format!("taper length {} must be positive", self.taper_length)));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), LabError> {
        if let Some(v) = o.ensemble_size {
            self.ensemble_size = v;
        }
        if let Some(v) = o.inflation {
            self.inflation = v;
        }
        if let Some(v) = o.taper {
            self.taper = v;
        }
        if let Some(v) = o.taper_length {
            self.taper_length = v;
        }
        if let Some(v) = &o.gain {
            self.gain = parse_gain(v)?;
        }
        if let Some(v) = &o.order {
            self.order = parse_order(v)?;
        }
        if let Some(v) = o.sequential {
            self.sequential = v;
        }
        if let Some(v) = o.steps {
            self.steps = v;
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        Ok(())
    }
}

/// Optional settings from a config file section or the command line.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub ensemble_size: Option<usize>,
    pub inflation: Option<f64>,
    pub taper: Option<bool>,
    pub taper_length: Option<f64>,
    pub gain: Option<String>,
    pub order: Option<String>,
    pub sequential: Option<bool>,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Config file layout: a `[common]` section followed by one section per
/// experiment, later sections taking precedence.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub common: Overrides,
    #[serde(default)]
    pub scalar: Overrides,
    #[serde(default)]
    pub ungm: Overrides,
    #[serde(default)]
    pub batch: Overrides,
    #[serde(default)]
    pub lorenz96: Overrides,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn section(&self, kind: ExperimentKind) -> &Overrides {
        match kind {
            ExperimentKind::Scalar => &self.scalar,
            ExperimentKind::Ungm => &self.ungm,
            ExperimentKind::Batch => &self.batch,
            ExperimentKind::Lorenz96 => &self.lorenz96,
        }
    }
}

/// Defaults, then the file's common and experiment sections, then `cli`.
pub fn resolve(kind: ExperimentKind, file: Option<&ConfigFile>, cli: &Overrides) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Some(file) = file {
        cfg.apply(&file.common)?;
        cfg.apply(file.section(kind))?;
    }
    cfg.apply(cli)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_defaults_file_cli() {
        let file = ConfigFile::parse(
            r#"
            [common]
            seed = 9
            runs = 3

            [lorenz96]
            ensemble_size = 20
            inflation = 1.01
            taper = true
            "#,
        )
        .unwrap();
        let cli = Overrides {
            runs: Some(7),
            ..Overrides::default()
        };
        let cfg = resolve(ExperimentKind::Lorenz96, Some(&file), &cli).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.runs, 7);
        assert_eq!(cfg.ensemble_size, 20);
        assert!(cfg.taper);
        assert_eq!(cfg.steps, 10_000);

        let other = resolve(ExperimentKind::Scalar, Some(&file), &Overrides::default()).unwrap();
        assert_eq!(other.ensemble_size, 5);
        assert_eq!(other.runs, 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ConfigFile::parse("[scalar]\nbogus = 1").is_err());
        let cli = Overrides {
            inflation: Some(0.5),
            ..Overrides::default()
        };
        assert!(resolve(ExperimentKind::Scalar, None, &cli).is_err());
        assert!(parse_gain("exact").is_err());
        assert!("lorenz".parse::<ExperimentKind>().is_err());
        assert_eq!("batch".parse::<ExperimentKind>().unwrap(), ExperimentKind::Batch);
    }
}
