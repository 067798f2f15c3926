use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::field::FieldConfig;
use crate::training::CameraSampler;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub silhouette: f64,
    pub eikonal: f64,
    /// Mock-oracle weight; `None` means one over the oracle pixel count.
    pub mock: Option<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            silhouette: 10.0,
            eikonal: 0.01,
            mock: None,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.silhouette >= 0.0 && self.eikonal >= 0.0 && self.mock.map_or(true, |m| m >= 0.0);
        if !ok {
            return Err(precondition("loss weights must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coarse,
    Fine,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Coarse => "coarse",
            Stage::Fine => "fine",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub resolution: usize,
    pub epochs: usize,
    pub body_captures: usize,
    pub head_captures: usize,
    /// Samples per ray.
    pub samples: usize,
}

impl StageSchedule {
    pub fn steps(&self) -> usize {
        self.epochs * (self.body_captures + self.head_captures)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub coarse: StageSchedule,
    pub fine: StageSchedule,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            coarse: StageSchedule {
                resolution: 64,
                epochs: 40,
                body_captures: 100,
                head_captures: 20,
                samples: 96,
            },
            fine: StageSchedule {
                resolution: 128,
                epochs: 10,
                body_captures: 100,
                head_captures: 50,
                samples: 128,
            },
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl TrainingSchedule {
    /// CPU-sized run: 32 -> 64 pixels, 16/4 epochs, reduced capture quotas.
    pub fn desk() -> Self {
        Self {
            coarse: StageSchedule {
                resolution: 32,
                epochs: 16,
                body_captures: 8,
                head_captures: 2,
                samples: 64,
            },
            fine: StageSchedule {
                resolution: 64,
                epochs: 4,
                body_captures: 8,
                head_captures: 4,
                samples: 64,
            },
            ..Self::default()
        }
    }

    pub fn stage(&self, stage: Stage) -> &StageSchedule {
        match stage {
            Stage::Coarse => &self.coarse,
            Stage::Fine => &self.fine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine.resolution != 2 * self.coarse.resolution {
            return Err(precondition(format!(
                "fine resolution {} must double the coarse resolution {}",
                self.fine.resolution, self.coarse.resolution
            )));
        }
        if self.coarse.resolution == 0 || self.coarse.samples < 2 || self.fine.samples < 2 {
            return Err(precondition("resolutions must be positive and rays need at least 2 samples"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(precondition("learning rate must be positive and moment coefficients in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Mock,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub endpoint: String,
    /// Square image size handed to the oracle.
    pub input_size: usize,
    pub guidance_scale: f64,
    pub t_range: [f64; 2],
    pub weighting: String,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Mock,
            endpoint: "http://127.0.0.1:8000".into(),
            input_size: 128,
            guidance_scale: 100.0,
            t_range: [20.0, 980.0],
            weighting: "constant".into(),
        }
    }
}

/// Everything a generation run reads; loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub prompt: String,
    pub seed: u64,
    pub schedule: TrainingSchedule,
    pub weights: LossWeights,
    pub oracle: OracleConfig,
    pub cameras: CameraSampler,
    /// Eikonal points per step.
    pub eikonal_points: usize,
    /// Jitter sample positions inside their strata.
    pub jitter: bool,
    /// Optimize geometry parameters; `false` trains appearance only.
    pub train_geometry: bool,
    /// Samples below this weight skip the color network.
    pub weight_cutoff: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            prompt: "a person".into(),
            seed: 0,
            schedule: TrainingSchedule::default(),
            weights: LossWeights::default(),
            oracle: OracleConfig {
                input_size: 512,
                ..OracleConfig::default()
            },
            cameras: CameraSampler::default(),
            eikonal_points: 256,
            jitter: true,
            train_geometry: true,
            weight_cutoff: 1e-5,
        }
    }
}

impl GenerationConfig {
    /// Desk schedule with a 64-pixel mock oracle.
    pub fn desk() -> Self {
        Self {
            schedule: TrainingSchedule::desk(),
            oracle: OracleConfig {
                input_size: 64,
                ..OracleConfig::default()
            },
            eikonal_points: 128,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.weights.validate()?;
        for stage in [&self.schedule.coarse, &self.schedule.fine] {
            if self.oracle.input_size % stage.resolution != 0 {
                return Err(precondition(format!(
                    "oracle input size {} is not a multiple of the stage resolution {}",
                    self.oracle.input_size, stage.resolution
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    pub views: usize,
    pub held_out: usize,
    pub resolution: usize,
    pub steps: usize,
    pub rays_per_step: usize,
    pub samples: usize,
    pub learning_rate: f64,
    /// Learning rate at the last step relative to the first; the decay
    /// in between is exponential.
    pub final_lr_fraction: f64,
    pub eikonal_weight: f64,
    pub eikonal_points: usize,
    pub seed: u64,
    pub field: FieldConfig,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            views: 50,
            held_out: 5,
            resolution: 96,
            steps: 5000,
            rays_per_step: 256,
            samples: 64,
            learning_rate: 5e-3,
            final_lr_fraction: 0.1,
            eikonal_weight: 0.1,
            eikonal_points: 64,
            seed: 0,
            field: FieldConfig::desk(),
        }
    }
}
