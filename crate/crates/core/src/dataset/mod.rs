//! On-disk persistence: binary record blobs, JSON sidecars for scans and
//! images, and dataset directories described by `manifest.json`.

mod codec;
mod generate;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, FormatError, Result};
use crate::focusing::FocusedImage;
use crate::polarimetry::{EnvironmentLabel, Material, PolSample};
use crate::scene::{BScan, Channel, Provenance};
use crate::waveform::WaveformConfig;

pub use codec::{
    decode_record, encode_record, read_record, write_record, Record, RecordKind, FORMAT_VERSION, HEADER_LEN,
    MAGIC, MAX_VALUES,
};
pub use generate::{
    generate_inet_dataset, generate_mnet_dataset, is_test_environment, normalize, InetSampler, MnetSampler,
    INET_INPUT_NORM, INET_TARGET_NORM, MNET_CO_NORM, MNET_CROSS_NORM,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_DIR: &str = "records";
const LOCK_FILE: &str = ".wallscan-write.lock";

/// Sidecar metadata stored next to a B-scan blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BScanMeta {
    pub schema_version: u32,
    pub channel: Channel,
    pub columns: usize,
    pub samples: usize,
    pub dx: f64,
    pub frame_rate: f64,
    pub sample_rate: f64,
    pub waveform: WaveformConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Sidecar metadata stored next to a focused-image blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageMeta {
    pub schema_version: u32,
    pub columns: usize,
    pub depths: usize,
    pub dx: f64,
    pub dz: f64,
    pub origin_depth: f64,
}

/// Path of the JSON sidecar for a blob path.
pub fn sidecar_path(blob: &Path) -> PathBuf {
    blob.with_extension("json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn parse_bscan_meta(text: &str) -> Result<BScanMeta, FormatError> {
    let m: BScanMeta = serde_json::from_str(text).map_err(|e| FormatError::InvalidMetadata(e.to_string()))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(FormatError::InvalidMetadata(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    Ok(m)
}

/// Writes `b` as a blob at `path` plus a JSON sidecar.
pub fn write_bscan(path: &Path, b: &BScan) -> Result<()> {
    b.validate()?;
    write_record(path, &Record::bscan(b.data.view())?)?;
    let meta = BScanMeta {
        schema_version: SCHEMA_VERSION,
        channel: b.channel,
        columns: b.columns(),
        samples: b.samples(),
        dx: b.dx,
        frame_rate: b.frame_rate,
        sample_rate: b.sample_rate,
        waveform: b.waveform,
        provenance: b.provenance.clone(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_bscan(path: &Path) -> Result<BScan> {
    let record = read_record(path)?;
    if record.kind() != RecordKind::BScan {
        return Err(FormatError::InvalidMetadata(format!("{} holds a {:?} record", path.display(), record.kind())).into());
    }
    let meta_path = sidecar_path(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = parse_bscan_meta(&text)?;
    let data = record.into_plane(0);
    if data.dim() != (meta.columns, meta.samples) {
        return Err(FormatError::InvalidMetadata(format!(
            "sidecar says {}x{}, blob holds {:?}",
            meta.columns,
            meta.samples,
            data.dim()
        ))
        .into());
    }
    let b = BScan {
        data,
        channel: meta.channel,
        dx: meta.dx,
        frame_rate: meta.frame_rate,
        sample_rate: meta.sample_rate,
        waveform: meta.waveform,
        provenance: meta.provenance,
    };
    b.validate()?;
    Ok(b)
}

pub fn write_image(path: &Path, img: &FocusedImage) -> Result<()> {
    img.validate()?;
    write_record(path, &Record::image(img.data.view())?)?;
    let meta = ImageMeta {
        schema_version: SCHEMA_VERSION,
        columns: img.data.nrows(),
        depths: img.data.ncols(),
        dx: img.dx,
        dz: img.dz,
        origin_depth: img.origin_depth,
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_image(path: &Path) -> Result<FocusedImage> {
    let record = read_record(path)?;
    if record.kind() != RecordKind::Image {
        return Err(FormatError::InvalidMetadata(format!("{} holds a {:?} record", path.display(), record.kind())).into());
    }
    let meta: ImageMeta = read_json(&sidecar_path(path))?;
    let data = record.into_plane(0);
    if data.dim() != (meta.columns, meta.depths) || meta.schema_version != SCHEMA_VERSION {
        return Err(FormatError::InvalidMetadata(format!("sidecar does not match {}", path.display())).into());
    }
    FocusedImage::new(data, meta.dx, meta.dz, meta.origin_depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordType {
    #[serde(rename = "bscan-pair")]
    BScanPair,
    #[serde(rename = "polsample")]
    PolSample,
}

impl RecordType {
    pub fn kind(self) -> RecordKind {
        match self {
            RecordType::BScanPair => RecordKind::BScanPair,
            RecordType::PolSample => RecordKind::PolSample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Every record is rescaled on its own statistics.
    PerRecord,
    /// One affine map per field, fitted on the whole dataset.
    Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    /// Population mean and standard deviation.
    pub fn of(values: &[f32]) -> Moments {
        let n = values.len() as f64;
        let mean = values.iter().map(|v| *v as f64).sum::<f64>() / n;
        let var = values.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / n;
        Moments { mean, std: var.sqrt() }
    }

    fn is_valid(&self) -> bool {
        self.mean.is_finite() && self.std.is_finite() && self.std > 0.0
    }
}

/// Normalization applied to one field (one plane) of every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldNormalization {
    pub plane: usize,
    pub mean: f64,
    pub std: f64,
    pub scope: Scope,
    /// Statistics before rescaling, for dataset scope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Moments>,
}

/// A target inside an I-Net crop, relative to the crop's first column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropTarget {
    pub x: f64,
    pub z: f64,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropLabels {
    pub scene_index: usize,
    pub first_column: usize,
    pub permittivity: f64,
    pub speed: f64,
    pub dx: f64,
    pub dz: f64,
    pub targets: Vec<CropTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub file: String,
    pub sha256: String,
    pub split: Split,
    pub environment: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropLabels>,
    /// Per-field statistics of the record before normalization.
    pub original: BTreeMap<String, Moments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digests {
    /// SHA-256 of the generator configuration JSON.
    pub generator: String,
    /// SHA-256 over the JSON of every simulated scene, in order.
    pub scenes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub format_version: u8,
    pub record_type: RecordType,
    pub record_count: usize,
    /// `[planes, rows, cols]` of every record blob.
    pub shape: [usize; 3],
    /// Name of each plane, in blob order.
    pub planes: Vec<String>,
    pub seed: u64,
    pub normalization: BTreeMap<String, FieldNormalization>,
    pub digests: Digests,
    pub records: Vec<RecordEntry>,
}

fn inconsistent(msg: impl Into<String>) -> FormatError {
    FormatError::InconsistentManifest(msg.into())
}

impl DatasetManifest {
    /// Internal consistency, without touching the filesystem.
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(FormatError::InvalidMetadata(format!(
                "manifest schema {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::VersionMismatch {
                expected: FORMAT_VERSION,
                found: self.format_version,
            });
        }
        if self.record_count != self.records.len() {
            return Err(inconsistent(format!(
                "record_count {} but {} entries",
                self.record_count,
                self.records.len()
            )));
        }
        let kind = self.record_type.kind();
        if self.shape[0] != kind.planes() || self.planes.len() != kind.planes() {
            return Err(inconsistent(format!("{:?} records need {} planes", self.record_type, kind.planes())));
        }
        for (name, n) in &self.normalization {
            if !(n.mean.is_finite() && n.std.is_finite() && n.std > 0.0) || n.plane >= self.planes.len() {
                return Err(inconsistent(format!("bad normalization for `{name}`")));
            }
            if n.source.map_or(false, |s| !s.is_valid()) {
                return Err(inconsistent(format!("bad source statistics for `{name}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            let p = Path::new(&r.file);
            if p.is_absolute() || p.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
                return Err(inconsistent(format!("record path `{}` escapes the dataset", r.file)));
            }
            if !seen.insert(&r.file) {
                return Err(inconsistent(format!("duplicate record `{}`", r.file)));
            }
            if EnvironmentLabel::from_id(r.environment).is_none() {
                return Err(inconsistent(format!("unknown environment {}", r.environment)));
            }
            if r.original.values().any(|m| !(m.mean.is_finite() && m.std.is_finite())) {
                return Err(inconsistent(format!("non-finite statistics for `{}`", r.file)));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<DatasetManifest, FormatError> {
        let m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| FormatError::InvalidMetadata(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn split_environments(&self, split: Split) -> std::collections::BTreeSet<u16> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.environment)
            .collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Opens a dataset directory and checks the manifest against the files on
/// disk.
pub fn open_dataset(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m = DatasetManifest::parse(&text)?;
    for r in &m.records {
        if !dir.join(&r.file).is_file() {
            return Err(inconsistent(format!("missing record `{}`", r.file)).into());
        }
    }
    let records_dir = dir.join(RECORDS_DIR);
    let on_disk = match fs::read_dir(&records_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().map_or(false, |x| x == "bin"))
            .count(),
        Err(_) => 0,
    };
    if on_disk != m.record_count {
        return Err(inconsistent(format!(
            "manifest lists {} records, {} blobs on disk",
            m.record_count, on_disk
        ))
        .into());
    }
    Ok(m)
}

/// Reads one record, verifying its checksum and shape against the manifest.
pub fn read_entry(dir: &Path, m: &DatasetManifest, entry: &RecordEntry) -> Result<Record> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(inconsistent(format!("checksum mismatch for `{}`", entry.file)).into());
    }
    let r = decode_record(&bytes)?;
    let (p, rows, cols) = r.data().dim();
    if r.kind() != m.record_type.kind() || [p, rows, cols] != m.shape {
        return Err(inconsistent(format!("`{}` does not match the manifest shape", entry.file)).into());
    }
    Ok(r)
}

/// Reads a sequence-pair record back into a labelled sample.
pub fn read_polsample(dir: &Path, m: &DatasetManifest, entry: &RecordEntry) -> Result<PolSample> {
    let r = read_entry(dir, m, entry)?;
    let (co, cross) = r.sequences().ok_or_else(|| inconsistent("not a sequence-pair dataset"))?;
    PolSample::new(
        co,
        cross,
        entry.material.unwrap_or(Material::Custom),
        EnvironmentLabel::from_id(entry.environment),
    )
}

/// Exclusive writer handle on a dataset directory; the lock file is
/// removed on drop.
pub struct DatasetWriter {
    dir: PathBuf,
    lock: PathBuf,
    _file: File,
}

impl DatasetWriter {
    /// Creates `dir` if needed. Fails if another writer holds the lock or
    /// the directory already holds a dataset.
    pub fn create(dir: &Path) -> Result<DatasetWriter> {
        let records = dir.join(RECORDS_DIR);
        fs::create_dir_all(&records).map_err(|e| Error::io(&records, e))?;
        let lock = dir.join(LOCK_FILE);
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| Error::io(&lock, e))?;
        let w = DatasetWriter {
            dir: dir.to_path_buf(),
            lock,
            _file: file,
        };
        let occupied = dir.join(MANIFEST_FILE).exists()
            || fs::read_dir(&records).map_err(|e| Error::io(&records, e))?.next().is_some();
        if occupied {
            return Err(Error::invalid(
                "out",
                format!("{} already contains a dataset", dir.display()),
            ));
        }
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes record `index` and returns its relative path and checksum.
    pub fn write(&self, index: usize, r: &Record) -> Result<(String, String)> {
        let file = format!("{RECORDS_DIR}/{index:06}.bin");
        let bytes = encode_record(r);
        let path = self.dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        Ok((file, sha256_hex(&bytes)))
    }

    /// Writes the manifest last, so a complete manifest marks a complete
    /// dataset.
    pub fn finish(self, m: &DatasetManifest) -> Result<()> {
        m.validate()?;
        write_json(&self.dir.join(MANIFEST_FILE), m)
    }
}

impl Drop for DatasetWriter {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
