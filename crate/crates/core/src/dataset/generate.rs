//! Seeded synthetic training sets for the imaging and material networks.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::s;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    CropLabels, CropTarget, DatasetManifest, DatasetWriter, Digests, FieldNormalization, Moments, Record,
    RecordEntry, RecordType, Scope, Split, FORMAT_VERSION, SCHEMA_VERSION,
};
use crate::detect::{extract_sequence, Detection, DEFAULT_EXTRACTION_WINDOW};
use crate::error::{Error, Result};
use crate::focusing::rma;
use crate::polarimetry::{EnvironmentLabel, Material, WallType, SEQUENCE_LEN};
use crate::scene::{
    echo_amplitude, noise_std_for_snr, synthesize_bscan, Channel, ScanConfig, Scene, Target, DEFAULT_FRAME_RATE,
};
use crate::waveform::WaveformConfig;

pub const INET_INPUT_NORM: Moments = Moments { mean: 0.0, std: 0.017 };
pub const INET_TARGET_NORM: Moments = Moments { mean: 0.092, std: 0.2423 };
pub const MNET_CO_NORM: Moments = Moments { mean: 0.0, std: 0.0052 };
pub const MNET_CROSS_NORM: Moments = Moments { mean: 0.0, std: 0.0021 };

/// Scenes held out for testing: wet brick walls. Splitting on the
/// environment keeps train and test environments disjoint.
pub fn is_test_environment(env: EnvironmentLabel) -> bool {
    env.wall == WallType::Brick && env.moisture_bucket == 2
}

fn split_of(env: EnvironmentLabel) -> Split {
    if is_test_environment(env) {
        Split::Test
    } else {
        Split::Train
    }
}

/// Affine rescale of `values` from moments `from` to moments `to`.
pub fn normalize(values: &mut [f32], from: Moments, to: Moments) {
    let gain = to.std / from.std;
    values
        .iter_mut()
        .for_each(|v| *v = ((*v as f64 - from.mean) * gain + to.mean) as f32);
}

fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sha256_json<T: Serialize>(v: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(v).expect("serializable")))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn check_range(name: &'static str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= min && hi >= lo) {
        return Err(Error::invalid(name, format!("bad range [{lo}, {hi}]")));
    }
    Ok(())
}

/// Apex amplitude of the strongest target on the co-pol channel.
fn peak_amplitude(scene: &Scene, wf: &WaveformConfig) -> f64 {
    scene
        .targets
        .iter()
        .map(|t| echo_amplitude(t, t.x0, scene, Channel::CoPol).norm() * wf.amplitude())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InetSampler {
    pub permittivity: (f64, f64),
    /// Probe speed range, m/s.
    pub speed: (f64, f64),
    pub targets: (usize, usize),
    /// Target depth range, m.
    pub depth: (f64, f64),
    pub snr_db: (f64, f64),
    pub range_samples: usize,
    /// Probe positions per simulated scan; tiled into crops.
    pub scan_columns: usize,
    pub crop: usize,
    pub stride: usize,
    pub frame_rate: f64,
    pub waveform: WaveformConfig,
}

impl Default for InetSampler {
    fn default() -> Self {
        InetSampler {
            permittivity: (5.0, 14.0),
            speed: (0.01, 0.04),
            targets: (1, 5),
            depth: (0.03, 0.10),
            snr_db: (15.0, 30.0),
            range_samples: 200,
            scan_columns: 400,
            crop: 200,
            stride: 100,
            frame_rate: DEFAULT_FRAME_RATE,
            waveform: WaveformConfig::default(),
        }
    }
}

/// Start columns of `size`-wide crops with the given stride; the last crop
/// is flush with the end.
pub(crate) fn crop_starts(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len <= size {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..=len - size).step_by(stride.max(1)).collect();
    if *starts.last().unwrap() != len - size {
        starts.push(len - size);
    }
    starts
}

impl InetSampler {
    pub fn validate(&self) -> Result<()> {
        check_range("permittivity", self.permittivity, 1.0)?;
        check_range("speed", self.speed, f64::MIN_POSITIVE)?;
        check_range("depth", self.depth, f64::MIN_POSITIVE)?;
        check_range("snr_db", self.snr_db, f64::MIN)?;
        if self.targets.0 == 0 || self.targets.1 < self.targets.0 {
            return Err(Error::invalid("targets", "need 1 <= min <= max"));
        }
        if self.crop == 0 || self.range_samples != self.crop || self.scan_columns < self.crop || self.stride == 0 {
            return Err(Error::invalid(
                "crop",
                "crops must be square (range_samples == crop) and fit in the scan",
            ));
        }
        if !(self.frame_rate > 0.0) {
            return Err(Error::invalid("frame_rate", "must be > 0"));
        }
        Ok(())
    }

    pub fn crops_per_scene(&self) -> usize {
        crop_starts(self.scan_columns, self.crop, self.stride).len()
    }

    fn scene(&self, rng: &mut ChaCha8Rng) -> Result<(Scene, ScanConfig)> {
        let eps = uniform(rng, self.permittivity);
        let speed = uniform(rng, self.speed);
        let wall = WallType::ALL[rng.gen_range(0..WallType::ALL.len())];
        let dx = speed / self.frame_rate;
        let length = self.scan_columns as f64 * dx;
        let count = rng.gen_range(self.targets.0..=self.targets.1);
        let mut targets = Vec::with_capacity(count);
        for _ in 0..count {
            let material = Material::CLASSES[rng.gen_range(0..Material::CLASSES.len())];
            let x0 = uniform(rng, (0.05 * length, 0.95 * length));
            let z0 = uniform(rng, self.depth);
            targets.push(Target::of_material(x0, z0, material, eps)?);
        }
        let mut scene = Scene::new(eps, wall.default_attenuation_db_per_m(), targets)?;
        scene.wall = wall;
        let mut scan = ScanConfig::new(speed, length);
        scan.frame_rate = self.frame_rate;
        scan.range_samples = self.range_samples;
        scan.noise_std = noise_std_for_snr(peak_amplitude(&scene, &self.waveform), uniform(rng, self.snr_db));
        scan.seed = rng.gen();
        Ok((scene, scan))
    }
}

struct InetCrop {
    record: Record,
    entry: RecordEntry,
}

fn inet_scene(sampler: &InetSampler, seed: u64, index: usize) -> Result<(Scene, Vec<InetCrop>)> {
    let mut rng = record_rng(seed, index);
    let (scene, scan) = sampler.scene(&mut rng)?;
    let b = synthesize_bscan(&scene, &scan, &sampler.waveform, Channel::CoPol)?;
    let truth = rma(&b, scene.permittivity, scan.speed)?;
    let split = split_of(scene.environment());
    let mut crops = Vec::new();
    for start in crop_starts(b.columns(), sampler.crop, sampler.stride) {
        let end = start + sampler.crop;
        let mut input = b.data.slice(s![start..end, ..]).to_owned();
        let mut target = truth.data.slice(s![start..end, ..]).to_owned();
        let (mi, mt) = (Moments::of(input.as_slice().unwrap()), Moments::of(target.as_slice().unwrap()));
        if !(mi.is_valid() && mt.is_valid()) {
            return Err(Error::NoSignal);
        }
        normalize(input.as_slice_mut().unwrap(), mi, INET_INPUT_NORM);
        normalize(target.as_slice_mut().unwrap(), mt, INET_TARGET_NORM);
        let x_lo = start as f64 * b.dx;
        let x_hi = end as f64 * b.dx;
        let targets = scene
            .targets
            .iter()
            .filter(|t| t.x0 >= x_lo && t.x0 < x_hi)
            .map(|t| CropTarget {
                x: t.x0 - x_lo,
                z: t.z0,
                material: t.material,
            })
            .collect();
        crops.push(InetCrop {
            record: Record::pair(input.view(), target.view())?,
            entry: RecordEntry {
                file: String::new(),
                sha256: String::new(),
                split,
                environment: scene.environment().id(),
                material: None,
                crop: Some(CropLabels {
                    scene_index: index,
                    first_column: start,
                    permittivity: scene.permittivity,
                    speed: scan.speed,
                    dx: b.dx,
                    dz: truth.dz,
                    targets,
                }),
                original: BTreeMap::from([("input".to_string(), mi), ("target".to_string(), mt)]),
            },
        });
    }
    Ok((scene, crops))
}

fn digest_scenes(scenes: &[Scene]) -> String {
    let mut h = Sha256::new();
    for s in scenes {
        h.update(serde_json::to_vec(s).expect("serializable"));
    }
    hex::encode(h.finalize())
}

/// Scenes simulated per parallel batch; bounds memory for large `n`.
const INET_BATCH: usize = 64;

/// Simulates scenes, focuses each with its true parameters and writes `n`
/// normalized (B-scan crop, focused crop) pairs to `dir`.
pub fn generate_inet_dataset(dir: &Path, n: usize, sampler: &InetSampler, seed: u64) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    sampler.validate()?;
    let writer = DatasetWriter::create(dir)?;
    let per_scene = sampler.crops_per_scene();
    let scene_count = n.div_ceil(per_scene);
    let mut entries = Vec::with_capacity(n);
    let mut scenes = Vec::with_capacity(scene_count);
    for batch in (0..scene_count).step_by(INET_BATCH) {
        let hi = (batch + INET_BATCH).min(scene_count);
        let results: Vec<(Scene, Vec<InetCrop>)> = (batch..hi)
            .into_par_iter()
            .map(|i| inet_scene(sampler, seed, i))
            .collect::<Result<_>>()?;
        for (scene, crops) in results {
            scenes.push(scene);
            for crop in crops.into_iter() {
                if entries.len() == n {
                    break;
                }
                let (file, sha256) = writer.write(entries.len(), &crop.record)?;
                entries.push(RecordEntry {
                    file,
                    sha256,
                    ..crop.entry
                });
            }
        }
    }
    let side = sampler.crop;
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        format_version: FORMAT_VERSION,
        record_type: RecordType::BScanPair,
        record_count: n,
        shape: [2, side, side],
        planes: vec!["input".into(), "target".into()],
        seed,
        normalization: BTreeMap::from([
            ("input".to_string(), per_record(0, INET_INPUT_NORM)),
            ("target".to_string(), per_record(1, INET_TARGET_NORM)),
        ]),
        digests: Digests {
            generator: sha256_json(&(sampler, n, seed)),
            scenes: digest_scenes(&scenes),
        },
        records: entries,
    };
    writer.finish(&manifest)?;
    Ok(manifest)
}

fn per_record(plane: usize, m: Moments) -> FieldNormalization {
    FieldNormalization {
        plane,
        mean: m.mean,
        std: m.std,
        scope: Scope::PerRecord,
        source: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MnetSampler {
    pub speed: f64,
    /// Probe positions on each side of the target.
    pub half_aperture: usize,
    pub snr_db: (f64, f64),
    pub frame_rate: f64,
    pub waveform: WaveformConfig,
}

impl Default for MnetSampler {
    fn default() -> Self {
        MnetSampler {
            speed: 0.02,
            half_aperture: DEFAULT_EXTRACTION_WINDOW,
            snr_db: (20.0, 30.0),
            frame_rate: DEFAULT_FRAME_RATE,
            waveform: WaveformConfig::default(),
        }
    }
}

/// Permittivity span of each moisture bucket.
const MOISTURE_SPANS: [(f64, f64); 3] = [(5.0, 8.0), (8.0, 11.0), (11.0, 14.0)];
/// Depth span of each depth bucket, m.
const DEPTH_SPANS: [(f64, f64); 3] = [(0.03, 0.05), (0.05, 0.075), (0.075, 0.10)];

struct MnetSample {
    co: Vec<f32>,
    cross: Vec<f32>,
    material: Material,
    environment: EnvironmentLabel,
    scene: Scene,
}

/// Record `i` has class `i mod 4` and environment `(i / 4) mod 18`, so
/// every environment sees all four classes.
fn mnet_sample(sampler: &MnetSampler, seed: u64, i: usize) -> Result<MnetSample> {
    let material = Material::CLASSES[i % Material::CLASSES.len()];
    let env = EnvironmentLabel::from_id(((i / Material::CLASSES.len()) % EnvironmentLabel::COUNT as usize) as u16)
        .expect("id below count");
    let mut rng = record_rng(seed, i);
    let eps = uniform(&mut rng, MOISTURE_SPANS[env.moisture_bucket as usize]);
    let z0 = uniform(&mut rng, DEPTH_SPANS[env.depth_bucket as usize]);
    let dx = sampler.speed / sampler.frame_rate;
    let columns = 2 * sampler.half_aperture + 1;
    let x0 = sampler.half_aperture as f64 * dx;
    let target = Target::of_material(x0, z0, material, eps)?;
    let mut scene = Scene::new(eps, env.wall.default_attenuation_db_per_m(), vec![target])?;
    scene.wall = env.wall;
    debug_assert_eq!(scene.environment(), env);
    let mut scan = ScanConfig::new(sampler.speed, columns as f64 * dx);
    scan.frame_rate = sampler.frame_rate;
    scan.range_samples = SEQUENCE_LEN;
    scan.noise_std = noise_std_for_snr(peak_amplitude(&scene, &sampler.waveform), uniform(&mut rng, sampler.snr_db));
    scan.seed = rng.gen();
    let co = synthesize_bscan(&scene, &scan, &sampler.waveform, Channel::CoPol)?;
    let cross = synthesize_bscan(&scene, &scan, &sampler.waveform, Channel::CrossPol)?;
    let d = Detection {
        x: x0,
        z: z0,
        column: sampler.half_aperture as f64,
        depth_index: 0.0,
        peak: 0.0,
        snr_db: 0.0,
        cells: 1,
    };
    let ex = extract_sequence(&co, &cross, &d, sampler.half_aperture)?;
    Ok(MnetSample {
        co: ex.sample.co,
        cross: ex.sample.cross,
        material,
        environment: env,
        scene,
    })
}

fn pooled(samples: &[MnetSample], pick: impl Fn(&MnetSample) -> &[f32]) -> Moments {
    let n = (samples.len() * SEQUENCE_LEN) as f64;
    let mean = samples.iter().flat_map(|s| pick(s).iter()).map(|v| *v as f64).sum::<f64>() / n;
    let var = samples
        .iter()
        .flat_map(|s| pick(s).iter())
        .map(|v| (*v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Moments { mean, std: var.sqrt() }
}

/// Simulates `n` single-target dual-channel scans with classes balanced
/// round-robin, extracts the apex sequences and writes them normalized per
/// channel over the whole dataset.
pub fn generate_mnet_dataset(dir: &Path, n: usize, sampler: &MnetSampler, seed: u64) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    check_range("snr_db", sampler.snr_db, f64::MIN)?;
    if !(sampler.speed > 0.0 && sampler.frame_rate > 0.0) {
        return Err(Error::invalid("speed", "speed and frame rate must be > 0"));
    }
    let writer = DatasetWriter::create(dir)?;
    let mut samples: Vec<MnetSample> = (0..n)
        .into_par_iter()
        .map(|i| mnet_sample(sampler, seed, i))
        .collect::<Result<_>>()?;
    let co_src = pooled(&samples, |s| &s.co);
    let cross_src = pooled(&samples, |s| &s.cross);
    if !(co_src.is_valid() && cross_src.is_valid()) {
        return Err(Error::NoSignal);
    }
    let mut entries = Vec::with_capacity(n);
    for (i, s) in samples.iter_mut().enumerate() {
        let original = BTreeMap::from([
            ("co_pol".to_string(), Moments::of(&s.co)),
            ("cross_pol".to_string(), Moments::of(&s.cross)),
        ]);
        normalize(&mut s.co, co_src, MNET_CO_NORM);
        normalize(&mut s.cross, cross_src, MNET_CROSS_NORM);
        let (file, sha256) = writer.write(i, &Record::polsample(&s.co, &s.cross)?)?;
        entries.push(RecordEntry {
            file,
            sha256,
            split: split_of(s.environment),
            environment: s.environment.id(),
            material: Some(s.material),
            crop: None,
            original,
        });
    }
    let scenes: Vec<Scene> = samples.into_iter().map(|s| s.scene).collect();
    let dataset_scope = |plane, target: Moments, source| FieldNormalization {
        plane,
        mean: target.mean,
        std: target.std,
        scope: Scope::Dataset,
        source: Some(source),
    };
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        format_version: FORMAT_VERSION,
        record_type: RecordType::PolSample,
        record_count: n,
        shape: [2, 1, SEQUENCE_LEN],
        planes: vec!["co_pol".into(), "cross_pol".into()],
        seed,
        normalization: BTreeMap::from([
            ("co_pol".to_string(), dataset_scope(0, MNET_CO_NORM, co_src)),
            ("cross_pol".to_string(), dataset_scope(1, MNET_CROSS_NORM, cross_src)),
        ]),
        digests: Digests {
            generator: sha256_json(&(sampler, n, seed)),
            scenes: digest_scenes(&scenes),
        },
        records: entries,
    };
    writer.finish(&manifest)?;
    Ok(manifest)
}
