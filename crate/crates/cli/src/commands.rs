use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wallscan::dataset::{self, InetSampler, MnetSampler};
use wallscan::detect::{extract_sequence, localization_error, nearest_target, DEFAULT_EXTRACTION_WINDOW};
use wallscan::focusing::{backproject, image_entropy, rma, ImageGrid};
use wallscan::polarimetry::{dispersion_features, estimate_reflection_spectrum, DispersionFeatures, WallType};
use wallscan::scene::Provenance;
use wallscan::{
    cfar_detect, read_bscan, read_image, synthesize_bscan, write_bscan, write_image, BScan, CfarConfig, Channel,
    Detection, Error, Material, ScanConfig, Scene, Target, WaveformConfig,
};

use crate::render::{cdf, csv_field, pgm};
use crate::{Algo, Failure, Kind, Pol};

const CO_FILE: &str = "co_pol.bin";
const CROSS_FILE: &str = "cross_pol.bin";
const SCENE_FILE: &str = "scene.json";
const IMAGE_FILE: &str = "image.bin";
const FOCUS_FILE: &str = "focus.json";
const DETECTIONS_FILE: &str = "detections.json";
const FEATURES_FILE: &str = "features.csv";

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn numeric_err(e: Error) -> Failure {
    match e {
        Error::Io { .. } => Failure::Input(e.to_string()),
        e => Failure::Numeric(e.to_string()),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input_err(format!("{}: {e}", dir.display())))
}

/// Scene file: targets need only position and material; index,
/// reflectivity and dispersion fall back to material defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSpec {
    permittivity: f64,
    #[serde(default)]
    wall: Option<WallType>,
    #[serde(default)]
    attenuation_db_per_m: Option<f64>,
    targets: Vec<TargetSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    x0: f64,
    z0: f64,
    material: Material,
    #[serde(default)]
    refractive_index: Option<Complex64>,
    #[serde(default)]
    reflectivity: Option<Complex64>,
    #[serde(default)]
    dispersion_slope: Option<f64>,
}

impl SceneSpec {
    fn build(self) -> wallscan::Result<Scene> {
        let eps = self.permittivity;
        let wall = self.wall.unwrap_or(WallType::Concrete);
        let targets = self
            .targets
            .into_iter()
            .map(|t| {
                let mut target = match t.refractive_index {
                    Some(n) => Target::with_index(t.x0, t.z0, t.material, n, eps)?,
                    None => Target::of_material(t.x0, t.z0, t.material, eps)?,
                };
                if let Some(r) = t.reflectivity {
                    target.reflectivity = r;
                }
                if let Some(s) = t.dispersion_slope {
                    target.dispersion_slope = s;
                }
                target.validate()?;
                Ok(target)
            })
            .collect::<wallscan::Result<Vec<_>>>()?;
        let mut scene = Scene::new(
            eps,
            self.attenuation_db_per_m.unwrap_or(wall.default_attenuation_db_per_m()),
            targets,
        )?;
        scene.wall = wall;
        Ok(scene)
    }
}

pub fn simulate(
    scene_path: &Path,
    scan_path: &Path,
    waveform: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), Failure> {
    let scene = read_json::<SceneSpec>(scene_path)?
        .build()
        .map_err(|e| input_err(format!("{}: {e}", scene_path.display())))?;
    let mut scan: ScanConfig = read_json(scan_path)?;
    if let Some(s) = seed {
        scan.seed = s;
    }
    scan.validate().map_err(|e| input_err(format!("{}: {e}", scan_path.display())))?;
    let wf = match waveform {
        Some(p) => read_json(p)?,
        None => WaveformConfig::default(),
    };
    create_dir(out)?;
    for (channel, file) in [(Channel::CoPol, CO_FILE), (Channel::CrossPol, CROSS_FILE)] {
        let b = synthesize_bscan(&scene, &scan, &wf, channel).map_err(numeric_err)?;
        write_bscan(&out.join(file), &b).map_err(numeric_err)?;
    }
    write_json(&out.join(SCENE_FILE), &scene)?;
    say!(
        "simulated {} x {} scans of {} target(s) into {}",
        scan.columns(),
        scan.range_samples,
        scene.targets.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FocusReport {
    algorithm: String,
    permittivity: f64,
    speed: f64,
    channel: Channel,
    entropy: f64,
    peak_x: f64,
    peak_z: f64,
    scan_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

fn load_scan(dir: &Path, file: &str) -> Result<BScan, Failure> {
    read_bscan(&dir.join(file)).map_err(input_err)
}

pub fn focus(algo: Algo, eps: f64, speed: f64, channel: Pol, input: &Path, out: &Path) -> Result<(), Failure> {
    if !(eps >= 1.0 && eps.is_finite()) {
        return Err(Failure::Usage(format!("--eps must be >= 1, got {eps}")));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Failure::Usage(format!("--speed must be > 0, got {speed}")));
    }
    let (file, channel) = match channel {
        Pol::Co => (CO_FILE, Channel::CoPol),
        Pol::Cross => (CROSS_FILE, Channel::CrossPol),
    };
    let b = load_scan(input, file)?;
    let img = match algo {
        Algo::Rma => rma(&b, eps, speed),
        Algo::Bp => backproject(&b, eps, speed, &ImageGrid::for_scan(&b, eps, speed)),
    }
    .map_err(numeric_err)?;
    let entropy = image_entropy(&img).map_err(numeric_err)?;
    create_dir(out)?;
    write_image(&out.join(IMAGE_FILE), &img).map_err(numeric_err)?;
    write_file(&out.join("image.pgm"), pgm(&img))?;
    let (peak_x, peak_z) = img.peak_position();
    let report = FocusReport {
        algorithm: format!("{algo:?}").to_lowercase(),
        permittivity: eps,
        speed,
        channel,
        entropy,
        peak_x,
        peak_z,
        scan_dir: input.canonicalize().unwrap_or_else(|_| input.to_path_buf()),
        provenance: b.provenance,
    };
    write_json(&out.join(FOCUS_FILE), &report)?;
    say!("entropy {entropy:.6}, peak at x = {peak_x:.4} m, z = {peak_z:.4} m");
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionEntry {
    #[serde(flatten)]
    detection: Detection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    material: Option<Material>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionsFile {
    cfar: CfarConfig,
    detections: Vec<DetectionEntry>,
}

pub fn detect(pfa: f64, training: usize, guard: usize, dynamic_range: f64, input: &Path) -> Result<(), Failure> {
    let cfg = CfarConfig {
        training,
        guard,
        pfa,
        dynamic_range_db: (dynamic_range > 0.0).then_some(dynamic_range),
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let img = read_image(&input.join(IMAGE_FILE)).map_err(input_err)?;
    let report: Option<FocusReport> = if input.join(FOCUS_FILE).exists() {
        Some(read_json(&input.join(FOCUS_FILE))?)
    } else {
        None
    };
    let truth = report.as_ref().and_then(|r| r.provenance.as_ref()).map(|p| &p.scene.targets);
    let found = cfar_detect(&img, &cfg).map_err(numeric_err)?;
    let detections: Vec<DetectionEntry> = found
        .into_iter()
        .map(|d| {
            let nearest = truth.and_then(|t| nearest_target(&d, t));
            let errors = nearest.map(|t| localization_error(&d, t));
            DetectionEntry {
                detection: d,
                error_x: errors.map(|e| e.0),
                error_z: errors.map(|e| e.1),
                material: nearest.map(|t| t.material),
            }
        })
        .collect();
    say!("detected {} target(s)", detections.len());
    for d in &detections {
        let err = match (d.error_x, d.error_z) {
            (Some(ex), Some(ez)) => format!(" (error x {ex:.4} m, z {ez:.4} m)"),
            _ => String::new(),
        };
        say!("  x = {:.4} m, z = {:.4} m{err}", d.detection.x, d.detection.z);
    }
    write_json(&input.join(DETECTIONS_FILE), &DetectionsFile { cfar: cfg, detections })
}

fn features_row(i: usize, d: &DetectionEntry, co: &BScan, cross: &BScan) -> Result<String, Failure> {
    let ex = extract_sequence(co, cross, &d.detection, DEFAULT_EXTRACTION_WINDOW).map_err(numeric_err)?;
    let wf = co.waveform;
    let co_echo: Vec<f64> = ex.sample.co.iter().map(|v| *v as f64).collect();
    let cross_echo: Vec<f64> = ex.sample.cross.iter().map(|v| *v as f64).collect();
    let co_spec = estimate_reflection_spectrum(&co_echo, &wf);
    let cross_spec = estimate_reflection_spectrum(&cross_echo, &wf);
    let (co_r, cross_r) = (co_spec.mean_magnitude(), cross_spec.mean_magnitude());
    let ratio = (co_r > 0.0).then(|| cross_r / co_r);
    let dispersion = |echo: &[f64]| -> [Option<f64>; 3] {
        match dispersion_features(echo, &wf) {
            Ok(DispersionFeatures {
                width_s,
                centroid_hz,
                skewness,
            }) => [Some(width_s), Some(centroid_hz), Some(skewness)],
            Err(_) => [None; 3],
        }
    };
    let mut fields = vec![
        i.to_string(),
        csv_field(Some(d.detection.x)),
        csv_field(Some(d.detection.z)),
        ex.column.to_string(),
        csv_field(Some(co_r)),
        csv_field(Some(cross_r)),
        csv_field(ratio),
        csv_field(co_spec.delay_estimate()),
    ];
    fields.extend(dispersion(&co_echo).iter().map(|v| csv_field(*v)));
    fields.extend(dispersion(&cross_echo).iter().map(|v| csv_field(*v)));
    fields.push(
        d.material
            .map(|m| serde_json::to_value(m).expect("serializable").as_str().unwrap_or_default().to_string())
            .unwrap_or_default(),
    );
    Ok(fields.join(","))
}

pub fn features(input: &Path) -> Result<(), Failure> {
    let dets: DetectionsFile = read_json(&input.join(DETECTIONS_FILE))?;
    let report: FocusReport = read_json(&input.join(FOCUS_FILE))?;
    let co = load_scan(&report.scan_dir, CO_FILE)?;
    let cross = load_scan(&report.scan_dir, CROSS_FILE)?;
    let mut csv = String::from(
        "index,x_m,z_m,column,co_reflectance,cross_reflectance,cross_co_ratio,delay_s,\
         co_width_s,co_centroid_hz,co_skewness,cross_width_s,cross_centroid_hz,cross_skewness,material\n",
    );
    for (i, d) in dets.detections.iter().enumerate() {
        csv.push_str(&features_row(i, d, &co, &cross)?);
        csv.push('\n');
    }
    let path = input.join(FEATURES_FILE);
    write_file(&path, &csv)?;
    say!("wrote {} row(s) to {}", dets.detections.len(), path.display());
    Ok(())
}

pub fn export_dataset(kind: Kind, n: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Usage("--n must be >= 1".into()));
    }
    let m = match kind {
        Kind::Inet => dataset::generate_inet_dataset(out, n, &InetSampler::default(), seed),
        Kind::Mnet => dataset::generate_mnet_dataset(out, n, &MnetSampler::default(), seed),
    }
    .map_err(|e| match e {
        Error::Io { .. } | Error::InvalidParameter { name: "out", .. } => input_err(e),
        e => numeric_err(e),
    })?;
    say!("wrote {} record(s) to {}", m.record_count, out.display());
    Ok(())
}

/// Pairs of (detections, truth scene) files under the two directories:
/// either the directories themselves or same-named subdirectories.
fn eval_pairs(pred: &Path, truth: &Path) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if pred.join(DETECTIONS_FILE).is_file() {
        return Ok(vec![(pred.join(DETECTIONS_FILE), truth.join(SCENE_FILE))]);
    }
    let mut names: Vec<_> = fs::read_dir(pred)
        .map_err(|e| input_err(format!("{}: {e}", pred.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join(DETECTIONS_FILE).is_file())
        .map(|e| e.file_name())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(input_err(format!("no {DETECTIONS_FILE} under {}", pred.display())));
    }
    Ok(names
        .into_iter()
        .map(|n| (pred.join(&n).join(DETECTIONS_FILE), truth.join(&n).join(SCENE_FILE)))
        .collect())
}

pub fn eval(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let mut ex = Vec::new();
    let mut ez = Vec::new();
    let mut missed = 0usize;
    for (det_path, scene_path) in eval_pairs(pred, truth)? {
        let dets: DetectionsFile = read_json(&det_path)?;
        let scene: Scene = read_json(&scene_path)?;
        for t in &scene.targets {
            let nearest = dets
                .detections
                .iter()
                .map(|d| &d.detection)
                .min_by(|a, b| {
                    let da = (a.x - t.x0).hypot(a.z - t.z0);
                    let db = (b.x - t.x0).hypot(b.z - t.z0);
                    da.total_cmp(&db)
                });
            match nearest {
                Some(d) => {
                    let (x, z) = localization_error(d, t);
                    ex.push(x);
                    ez.push(z);
                }
                None => missed += 1,
            }
        }
    }
    let mut csv = String::from("metric,error_m,cdf\n");
    for (name, errors) in [("x", &ex), ("z", &ez)] {
        for (e, p) in cdf(errors.clone()) {
            csv.push_str(&format!("{name},{e:e},{p}\n"));
        }
    }
    match out {
        Some(p) => write_file(p, &csv)?,
        None => {
            use std::io::Write;
            let _ = std::io::stdout().write_all(csv.as_bytes());
        }
    }
    let median = |v: &[f64]| cdf(v.to_vec()).into_iter().find(|(_, p)| *p >= 0.5).map(|(e, _)| e);
    eprintln!(
        "{} matched, {missed} missed; median |x error| {}, median |z error| {}",
        ex.len(),
        median(&ex).map_or("n/a".into(), |e| format!("{e:.4} m")),
        median(&ez).map_or("n/a".into(), |e| format!("{e:.4} m")),
    );
    Ok(())
}
