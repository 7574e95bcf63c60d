use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::instafill::InsertionConfig;
use crate::nn::TrainConfig;
use crate::pipeline::PipelineConfig;
use crate::pixsynth::SynthConfig;
use crate::semgan::SemGanConfig;
use crate::semmap::LabelPalette;
use crate::{seeds, Error, Result};

/// Whole-run configuration file. Every section is optional; unknown keys
/// anywhere are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub palette: PaletteSection,
    pub toydata: ToyDataSection,
    pub semgan: SemGanSection,
    pub instafill: InstaFillSection,
    pub pixsynth: PixSynthSection,
    pub pipeline: PipelineSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaletteSection {
    /// `"cityscapes"` or `"toy"`; ignored when `path` is set.
    pub preset: String,
    pub path: Option<PathBuf>,
}

impl Default for PaletteSection {
    fn default() -> Self {
        Self { preset: "cityscapes".into(), path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyDataSection {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub min_persons: usize,
    pub max_persons: usize,
    /// Standard deviation of the noise added to colorized targets.
    pub noise: f64,
}

impl Default for ToyDataSection {
    fn default() -> Self {
        Self { count: 64, width: 512, height: 256, min_persons: 1, max_persons: 2, noise: 0.05 }
    }
}

/// Optimizer settings of one stage; the seed comes from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            batch_size: t.batch_size,
            epochs: t.epochs,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemGanSection {
    pub checkpoint: PathBuf,
    /// Number of toy maps to train on.
    pub samples: usize,
    pub model: SemGanConfig,
    pub train: TrainSection,
}

impl Default for SemGanSection {
    fn default() -> Self {
        Self {
            checkpoint: "semgan.ckpt".into(),
            samples: 64,
            model: SemGanConfig::full_scale(34),
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstaFillSection {
    pub checkpoint: PathBuf,
    pub samples: usize,
    pub model: InsertionConfig,
    pub train: TrainSection,
}

impl Default for InstaFillSection {
    fn default() -> Self {
        Self {
            checkpoint: "instafill.ckpt".into(),
            samples: 32,
            model: InsertionConfig::default(),
            train: TrainSection { batch_size: 1, ..TrainSection::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PixSynthSection {
    pub checkpoint: PathBuf,
    pub samples: usize,
    pub model: SynthConfig,
    pub train: TrainSection,
}

impl Default for PixSynthSection {
    fn default() -> Self {
        Self {
            checkpoint: "pixsynth.ckpt".into(),
            samples: 8,
            model: SynthConfig::default(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub instances_per_map: usize,
    pub full_size: Option<(usize, usize)>,
    pub translation_size: Option<(usize, usize)>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { instances_per_map: 1, full_size: None, translation_size: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub iou_threshold: f64,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { iou_threshold: crate::bench::DEFAULT_IOU_THRESHOLD }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::path(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Relative paths inside the file are resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.semgan.checkpoint);
        fix(&mut self.instafill.checkpoint);
        fix(&mut self.pixsynth.checkpoint);
        if let Some(p) = self.palette.path.as_mut() {
            fix(p);
        }
    }

    pub fn palette(&self) -> Result<LabelPalette> {
        match (&self.palette.path, self.palette.preset.as_str()) {
            (Some(p), _) => LabelPalette::load(p),
            (None, "cityscapes") => Ok(LabelPalette::cityscapes()),
            (None, "toy") => Ok(LabelPalette::toy()),
            (None, other) => Err(Error::Config(format!("unknown palette preset {other:?}"))),
        }
    }

    /// Structural checks that need no files.
    pub fn validate(&self) -> Result<()> {
        self.semgan.model.validate()?;
        self.instafill.model.validate()?;
        self.pixsynth.model.validate()?;
        for (name, t) in
            [("semgan", &self.semgan.train), ("instafill", &self.instafill.train), ("pixsynth", &self.pixsynth.train)]
        {
            t.to_train_config(0).validate().map_err(|e| Error::Config(format!("[{name}.train] {e}")))?;
        }
        let k = [self.semgan.model.num_classes, self.instafill.model.num_classes, self.pixsynth.model.num_classes];
        if k[0] != k[1] || k[1] != k[2] {
            return Err(Error::Config(format!("stage class counts differ: {k:?}")));
        }
        let t = &self.toydata;
        if t.min_persons > t.max_persons || !(t.noise.is_finite() && t.noise >= 0.0) {
            return Err(Error::Config("toydata person range or noise is invalid".into()));
        }
        if !(0.0..=1.0).contains(&self.bench.iou_threshold) {
            return Err(Error::Config(format!("iou_threshold {} must lie in [0, 1]", self.bench.iou_threshold)));
        }
        Ok(())
    }

    /// Checks that the palette agrees with the models.
    pub fn validate_palette(&self, palette: &LabelPalette) -> Result<()> {
        let k = palette.num_classes();
        if self.semgan.model.num_classes != k {
            return Err(Error::Config(format!(
                "models use {} classes, palette has {k}",
                self.semgan.model.num_classes
            )));
        }
        if palette.person_id() != Some(self.instafill.model.person_class_id) {
            return Err(Error::Config(format!(
                "person class {} does not match the palette's person id {:?}",
                self.instafill.model.person_class_id,
                palette.person_id()
            )));
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: &str) -> u64 {
        seeds::derive(self.seed, stage, 0)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            semgan_checkpoint: self.semgan.checkpoint.clone(),
            insertion_checkpoint: self.instafill.checkpoint.clone(),
            synth_checkpoint: self.pixsynth.checkpoint.clone(),
            instances_per_map: self.pipeline.instances_per_map,
            seed: self.seed,
            step1_resolution: Some(self.semgan.model.resolution),
            full_size: self.pipeline.full_size.or(Some(self.instafill.model.full_size)),
            translation_size: self.pipeline.translation_size.or(Some(self.pixsynth.model.operating_size)),
            parallel: false,
        }
    }
}
