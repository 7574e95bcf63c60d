//! End-to-end generation: sample a map, upscale it, insert persons,
//! downscale it with its boxes, translate it to an image, export.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{format_annotations, AnnotationRecord};
use crate::nn::randn;
use crate::semmap::io::encode_map_png;
use crate::semmap::{resize_nearest, BoundingBox, SemanticMap};
use crate::{instafill, pixsynth, seeds, semgan, Error, Result};

pub const MANIFEST_FORMAT: &str = "ganseq-manifest-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub semgan_checkpoint: PathBuf,
    pub insertion_checkpoint: PathBuf,
    pub synth_checkpoint: PathBuf,
    #[serde(default = "one")]
    pub instances_per_map: usize,
    #[serde(default)]
    pub seed: u64,
    /// Expected sizes; checked against the checkpoints when given.
    #[serde(default)]
    pub step1_resolution: Option<usize>,
    #[serde(default)]
    pub full_size: Option<(usize, usize)>,
    #[serde(default)]
    pub translation_size: Option<(usize, usize)>,
    /// Generate samples on the rayon pool; results are identical either way.
    #[serde(default)]
    pub parallel: bool,
}

fn one() -> usize {
    1
}

/// The three frozen stages.
pub struct Models {
    pub semgan: semgan::Checkpoint,
    pub insertion: instafill::Checkpoint,
    pub synth: pixsynth::Checkpoint,
    /// SHA-256 of each checkpoint's bytes, in stage order.
    pub digests: [String; 3],
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::path(path, e))
}

impl Models {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let (a, b, c) = (read(&cfg.semgan_checkpoint)?, read(&cfg.insertion_checkpoint)?, read(&cfg.synth_checkpoint)?);
        let models = Self {
            semgan: semgan::Checkpoint::from_bytes(&a)?,
            insertion: instafill::Checkpoint::from_bytes(&b)?,
            synth: pixsynth::Checkpoint::from_bytes(&c)?,
            digests: [digest(&a), digest(&b), digest(&c)],
        };
        models.check(cfg)?;
        Ok(models)
    }

    /// Stage configurations must agree on classes and on the sizes named in
    /// the pipeline config.
    pub fn check(&self, cfg: &PipelineConfig) -> Result<()> {
        let k = self.semgan.config.num_classes;
        if self.insertion.config.num_classes != k || self.synth.config.num_classes != k {
            return Err(Error::Config(format!(
                "class counts differ between stages: {k}, {}, {}",
                self.insertion.config.num_classes, self.synth.config.num_classes
            )));
        }
        let checks = [
            (
                "step1_resolution",
                cfg.step1_resolution.map(|r| (r, r)),
                (self.semgan.config.resolution, self.semgan.config.resolution),
            ),
            ("full_size", cfg.full_size, self.insertion.config.full_size),
            ("translation_size", cfg.translation_size, self.synth.config.operating_size),
        ];
        for (name, want, have) in checks {
            if let Some(want) = want {
                if want != have {
                    return Err(Error::Config(format!("{name} {want:?} does not match checkpoint size {have:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub semgan: u64,
    pub instafill: u64,
    pub pixsynth: u64,
}

impl StageSeeds {
    /// `derive(master, stage, index)` per stage.
    pub fn for_sample(master: u64, index: usize) -> Self {
        let i = index as u64;
        Self {
            semgan: seeds::derive(master, "semgan", i),
            instafill: seeds::derive(master, "instafill", i),
            pixsynth: seeds::derive(master, "pixsynth", i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestBox {
    pub class_id: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub status: SampleStatus,
    pub image_path: Option<String>,
    pub map_path: Option<String>,
    pub boxes: Vec<ManifestBox>,
    pub seeds: StageSeeds,
    /// Insertions that exhausted their retry budget.
    pub failed_insertions: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub config_hash: String,
    pub checkpoint_sha256: [String; 3],
    pub seed: u64,
    pub image_size: (usize, usize),
    pub person_class_id: u32,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Contract(format!("unknown manifest format {:?}", m.format)));
        }
        Ok(m)
    }

    pub fn annotations(&self) -> Vec<AnnotationRecord> {
        self.entries
            .iter()
            .filter(|e| e.status == SampleStatus::Ok)
            .flat_map(|e| {
                e.boxes.iter().map(|b| AnnotationRecord {
                    image_id: e.sample_id.clone(),
                    class_id: b.class_id,
                    bbox: BoundingBox { x: b.x, y: b.y, w: b.w, h: b.h },
                })
            })
            .collect()
    }
}

/// Artifacts of one successful sample.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub sample_id: String,
    pub map: SemanticMap,
    pub image: pixsynth::ImageTensor,
    pub boxes: Vec<BoundingBox>,
    /// Placed masks at full resolution, in insertion order.
    pub instances: Vec<crate::semmap::InstanceMask>,
    pub failed_insertions: Vec<String>,
}

pub struct GenerationRun {
    pub manifest: DatasetManifest,
    /// Indexed like the manifest entries; `None` for failed samples.
    pub samples: Vec<Option<GeneratedSample>>,
}

pub fn sample_id(index: usize) -> String {
    format!("sample_{index:04}")
}

/// One sample from its stage seeds.
pub fn generate_sample(models: &Models, cfg: &PipelineConfig, index: usize) -> Result<GeneratedSample> {
    let s = StageSeeds::for_sample(cfg.seed, index);
    let z = randn(&mut seeds::rng(s.semgan), models.semgan.config.latent_dim);
    let map = semgan::sample(&models.semgan, &z)?;
    let full_size = models.insertion.config.full_size;
    let mut full = resize_nearest(&map, full_size.0, full_size.1)?;
    let mut rng = seeds::rng(s.instafill);
    let mut full_boxes = Vec::new();
    let mut instances = Vec::new();
    let mut failed = Vec::new();
    for j in 0..cfg.instances_per_map {
        match instafill::insert_with_retries(&models.insertion, &full, &mut rng) {
            Ok(ins) => {
                full = ins.map;
                full_boxes.push(ins.bbox);
                instances.push(ins.instance);
            }
            Err(e @ (Error::DegenerateShape { .. } | Error::Placement(_))) => {
                log::warn!("{}: insertion {j} failed: {e}", sample_id(index));
                failed.push(format!("instance {j}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let out_size = models.synth.config.operating_size;
    let small = resize_nearest(&full, out_size.0, out_size.1)?;
    let boxes = full_boxes.iter().map(|b| b.rescale(full_size, out_size)).collect();
    let z3 = (models.synth.config.latent_dim > 0)
        .then(|| randn(&mut seeds::rng(s.pixsynth), models.synth.config.latent_dim));
    let image = pixsynth::translate(&models.synth, &small, z3.as_deref())?;
    Ok(GeneratedSample { sample_id: sample_id(index), map: small, image, boxes, instances, failed_insertions: failed })
}

/// Hash of the configuration and checkpoint digests. The `parallel` flag
/// does not change outputs and is left out.
fn config_hash(cfg: &PipelineConfig, models: &Models) -> Result<String> {
    let cfg = PipelineConfig { parallel: false, ..cfg.clone() };
    let value = serde_json::json!({ "pipeline": cfg, "checkpoints": models.digests });
    Ok(digest(serde_json::to_string(&value)?.as_bytes()))
}

/// `n` samples as a pure function of the configuration and checkpoints.
/// Failed samples are kept in the manifest; more than half failing is an
/// error.
pub fn run_generation(cfg: &PipelineConfig, n: usize) -> Result<GenerationRun> {
    let models = Models::load(cfg)?;
    run_with_models(&models, cfg, n)
}

pub fn run_with_models(models: &Models, cfg: &PipelineConfig, n: usize) -> Result<GenerationRun> {
    models.check(cfg)?;
    let results: Vec<Result<GeneratedSample>> = if cfg.parallel {
        (0..n).into_par_iter().map(|i| generate_sample(models, cfg, i)).collect()
    } else {
        (0..n).map(|i| generate_sample(models, cfg, i)).collect()
    };
    let person = models.insertion.config.person_class_id;
    let mut entries = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for (i, r) in results.into_iter().enumerate() {
        let seeds = StageSeeds::for_sample(cfg.seed, i);
        let id = sample_id(i);
        match r {
            Ok(s) => {
                entries.push(ManifestEntry {
                    sample_id: id.clone(),
                    status: SampleStatus::Ok,
                    image_path: Some(format!("images/{id}.png")),
                    map_path: Some(format!("maps/{id}.png")),
                    boxes: s
                        .boxes
                        .iter()
                        .map(|b| ManifestBox { class_id: person, x: b.x, y: b.y, w: b.w, h: b.h })
                        .collect(),
                    seeds,
                    failed_insertions: s.failed_insertions.clone(),
                    error: None,
                });
                samples.push(Some(s));
            }
            Err(e) => {
                log::warn!("{id} failed: {e}");
                entries.push(ManifestEntry {
                    sample_id: id,
                    status: SampleStatus::Failed,
                    image_path: None,
                    map_path: None,
                    boxes: Vec::new(),
                    seeds,
                    failed_insertions: Vec::new(),
                    error: Some(e.to_string()),
                });
                samples.push(None);
            }
        }
    }
    let failed = samples.iter().filter(|s| s.is_none()).count();
    if 2 * failed > n {
        return Err(Error::Run(format!("{failed} of {n} samples failed")));
    }
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.into(),
        config_hash: config_hash(cfg, models)?,
        checkpoint_sha256: models.digests.clone(),
        seed: cfg.seed,
        image_size: models.synth.config.operating_size,
        person_class_id: person,
        entries,
    };
    Ok(GenerationRun { manifest, samples })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExportSummary {
    pub images: usize,
    pub maps: usize,
    pub annotations: usize,
    pub failed: usize,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::path(path, e))
}

/// Writes `images/`, `maps/`, `annotations.csv` and `manifest.json` under
/// `out_dir`, overwriting earlier exports.
pub fn export_dataset(run: &GenerationRun, out_dir: &Path) -> Result<ExportSummary> {
    for sub in ["images", "maps"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::path(&d, e))?;
    }
    let mut summary = ExportSummary { images: 0, maps: 0, annotations: 0, failed: 0 };
    for (entry, sample) in run.manifest.entries.iter().zip(&run.samples) {
        match (sample, &entry.image_path, &entry.map_path) {
            (Some(s), Some(img), Some(map)) => {
                write(&out_dir.join(img), &s.image.to_png()?)?;
                write(&out_dir.join(map), &encode_map_png(&s.map)?)?;
                summary.images += 1;
                summary.maps += 1;
            }
            _ => summary.failed += 1,
        }
    }
    let annotations = run.manifest.annotations();
    summary.annotations = annotations.len();
    write(&out_dir.join("annotations.csv"), format_annotations(&annotations).as_bytes())?;
    write(&out_dir.join("manifest.json"), run.manifest.to_json()?.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests;
