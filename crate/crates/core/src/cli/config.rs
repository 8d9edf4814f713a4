//! Resolved run configuration: defaults, then an optional JSON file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cyclespin::{CycleSpinPlan, SamplerOptions};
use crate::diffusion::TrainConfig;
use crate::error::{Error, Result};
use crate::metrics::RegionSpec;
use crate::predictor::PredictorConfig;
use crate::speckle::SpeckleParams;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// Named region for ENL reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedRegion {
    pub name: String,
    #[serde(flatten)]
    pub region: RegionSpec,
}

impl NamedRegion {
    /// Parses `name:top,left,height,width`.
    pub fn parse(text: &str) -> Result<Self> {
        let usage = || Error::Usage(format!("region `{text}` is not `name:top,left,height,width`"));
        let (name, dims) = text.split_once(':').ok_or_else(usage)?;
        let v: Vec<usize> = dims.split(',').map(|s| s.trim().parse().map_err(|_| usage())).collect::<Result<_>>()?;
        if name.is_empty() || v.len() != 4 {
            return Err(usage());
        }
        Ok(Self { name: name.to_string(), region: RegionSpec::new(v[0], v[1], v[2], v[3]) })
    }
}

/// Every setting of every subcommand; each command reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub looks: f64,
    pub patch: usize,
    pub count: usize,
    /// Synthetic source scenes generated when no input images are given.
    pub scenes: usize,
    pub scene_size: usize,
    pub predictor: PredictorConfig,
    pub train: TrainConfig,
    pub shifts: CycleSpinPlan,
    pub sampler: SamplerOptions,
    pub resize: bool,
    pub regions: Vec<NamedRegion>,
    pub input: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            looks: 1.0,
            patch: 32,
            count: 1000,
            scenes: 24,
            scene_size: 96,
            predictor: PredictorConfig::toy(),
            train: TrainConfig::default(),
            shifts: CycleSpinPlan::default(),
            sampler: SamplerOptions::default(),
            resize: false,
            regions: Vec::new(),
            input: None,
            data: None,
            checkpoint: None,
            reference: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn speckle(&self) -> Result<SpeckleParams> {
        SpeckleParams::new(self.looks, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.speckle()?;
        if self.patch == 0 || self.count == 0 {
            return Err(Error::Config("patch and count must be positive".into()));
        }
        self.predictor.validate()?;
        self.train.validate()?;
        for path in [&self.input, &self.data, &self.checkpoint, &self.reference].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Usage("--out is required".into()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes the resolved config into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, self.to_json() + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_partial_files() {
        let cfg = RunConfig { seed: 9, regions: vec![NamedRegion::parse("sea:0,0,8,8").unwrap()], ..Default::default() };
        assert_eq!(serde_json::from_str::<RunConfig>(&cfg.to_json()).unwrap(), cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 3, "looks": 4}"#).unwrap();
        assert_eq!((partial.seed, partial.looks, partial.patch), (3, 4.0, 32));
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
    }

    #[test]
    fn region_parsing() {
        let r = NamedRegion::parse("flat:1,2,3,4").unwrap();
        assert_eq!(r.region, RegionSpec::new(1, 2, 3, 4));
        assert!(NamedRegion::parse("1,2,3,4").is_err());
        assert!(NamedRegion::parse("x:1,2,3").is_err());
    }
}
