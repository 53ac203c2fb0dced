//! Target detection on focused images and per-target sequence extraction.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focusing::FocusedImage;
use crate::polarimetry::{Material, PolSample, SEQUENCE_LEN};
use crate::scene::{BScan, Target};

/// A detected target, positioned at the magnitude-weighted centroid of its
/// cluster of above-threshold cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Horizontal position, m.
    pub x: f64,
    /// Depth, m.
    pub z: f64,
    /// Fractional image column (probe position index).
    pub column: f64,
    /// Fractional image row along depth.
    pub depth_index: f64,
    pub peak: f64,
    pub snr_db: f64,
    pub cells: usize,
}

/// Cell-averaging CFAR parameters. Windows are square; `training` and
/// `guard` count cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarConfig {
    pub training: usize,
    pub guard: usize,
    pub pfa: f64,
    /// Cells weaker than this many dB below the image peak power are never
    /// declared. `None` disables the floor.
    #[serde(default)]
    pub dynamic_range_db: Option<f64>,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig {
            training: 8,
            guard: 2,
            pfa: 1e-4,
            dynamic_range_db: Some(60.0),
        }
    }
}

impl CfarConfig {
    pub fn with_pfa(pfa: f64) -> Self {
        CfarConfig {
            pfa,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.training < 1 {
            return Err(Error::invalid("training", "need at least one training cell"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid("pfa", format!("must lie in (0, 1), got {}", self.pfa)));
        }
        if let Some(db) = self.dynamic_range_db {
            if !(db > 0.0) {
                return Err(Error::invalid("dynamic_range_db", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Full window side length.
    pub fn window(&self) -> usize {
        2 * (self.training + self.guard) + 1
    }

    /// Number of cells in the training ring.
    pub fn training_cells(&self) -> usize {
        let outer = self.window();
        let inner = 2 * self.guard + 1;
        outer * outer - inner * inner
    }

    /// Threshold multiplier `N (P_fa^(-1/N) - 1)` on the mean training power.
    pub fn scale(&self) -> f64 {
        let n = self.training_cells() as f64;
        n * (self.pfa.powf(-1.0 / n) - 1.0)
    }
}

/// Per-cell CFAR decisions.
#[derive(Debug, Clone)]
pub struct CfarMap {
    pub hits: Array2<bool>,
    /// Mean training-ring power behind each tested cell (0 on untested border cells).
    pub noise: Array2<f64>,
    /// Number of cells that had a full training window.
    pub tested: usize,
}

impl CfarMap {
    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|h| **h).count()
    }
}

/// Square-law CA-CFAR over a magnitude image. Border cells without a full
/// window are not tested.
pub fn cfar_map(magnitude: &Array2<f32>, cfg: &CfarConfig) -> Result<CfarMap> {
    cfg.validate()?;
    let (rows, cols) = magnitude.dim();
    let w = cfg.window();
    if rows <= w || cols <= w {
        return Err(Error::ImageTooSmall { rows, cols, window: w });
    }
    let power = magnitude.mapv(|v| (v as f64) * (v as f64));
    // summed-area table with a zero border
    let mut sat = Array2::<f64>::zeros((rows + 1, cols + 1));
    for i in 0..rows {
        let mut line = 0.0;
        for j in 0..cols {
            line += power[[i, j]];
            sat[[i + 1, j + 1]] = sat[[i, j + 1]] + line;
        }
    }
    let block = |i0: usize, j0: usize, i1: usize, j1: usize| {
        sat[[i1, j1]] - sat[[i0, j1]] - sat[[i1, j0]] + sat[[i0, j0]]
    };
    let r = cfg.training + cfg.guard;
    let g = cfg.guard;
    let n = cfg.training_cells() as f64;
    let alpha = cfg.scale();
    let floor = match cfg.dynamic_range_db {
        Some(db) => power.iter().copied().fold(0.0, f64::max) * 10f64.powf(-db / 10.0),
        None => 0.0,
    };
    let mut hits = Array2::from_elem((rows, cols), false);
    let mut noise = Array2::<f64>::zeros((rows, cols));
    let mut tested = 0;
    for i in r..rows - r {
        for j in r..cols - r {
            let outer = block(i - r, j - r, i + r + 1, j + r + 1);
            let inner = block(i - g, j - g, i + g + 1, j + g + 1);
            let mean = (outer - inner).max(0.0) / n;
            tested += 1;
            noise[[i, j]] = mean;
            let p = power[[i, j]];
            hits[[i, j]] = p > alpha * mean && p > floor;
        }
    }
    Ok(CfarMap { hits, noise, tested })
}

/// CA-CFAR detection with 8-connected clustering.
pub fn cfar_detect(img: &FocusedImage, cfg: &CfarConfig) -> Result<Vec<Detection>> {
    let map = cfar_map(&img.data, cfg)?;
    let (rows, cols) = img.data.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for ((i, j), hit) in map.hits.indexed_iter() {
        if !*hit || seen[[i, j]] {
            continue;
        }
        seen[[i, j]] = true;
        queue.push_back((i, j));
        let (mut wsum, mut wi, mut wj) = (0.0, 0.0, 0.0);
        let mut peak = (0.0f64, i, j);
        let mut cells = 0;
        while let Some((a, b)) = queue.pop_front() {
            let m = img.data[[a, b]] as f64;
            wsum += m;
            wi += m * a as f64;
            wj += m * b as f64;
            cells += 1;
            if m > peak.0 {
                peak = (m, a, b);
            }
            for da in -1isize..=1 {
                for db in -1isize..=1 {
                    let (na, nb) = (a as isize + da, b as isize + db);
                    if na < 0 || nb < 0 || na >= rows as isize || nb >= cols as isize {
                        continue;
                    }
                    let (na, nb) = (na as usize, nb as usize);
                    if map.hits[[na, nb]] && !seen[[na, nb]] {
                        seen[[na, nb]] = true;
                        queue.push_back((na, nb));
                    }
                }
            }
        }
        let (ci, cj) = if wsum > 0.0 {
            (wi / wsum, wj / wsum)
        } else {
            (peak.1 as f64, peak.2 as f64)
        };
        let noise = map.noise[[peak.1, peak.2]];
        let snr_db = if noise > 0.0 {
            10.0 * (peak.0 * peak.0 / noise).log10()
        } else {
            f64::MAX
        };
        out.push(Detection {
            x: img.x_at(ci),
            z: img.z_at(cj),
            column: ci,
            depth_index: cj,
            peak: peak.0,
            snr_db,
            cells,
        });
    }
    out.sort_by(|a, b| b.peak.total_cmp(&a.peak));
    Ok(out)
}

/// Absolute horizontal and depth errors `(|x_e - x_a|, |z_e - z_a|)`.
pub fn localization_error(d: &Detection, truth: &Target) -> (f64, f64) {
    ((d.x - truth.x0).abs(), (d.z - truth.z0).abs())
}

/// Ground-truth target closest to a detection.
pub fn nearest_target<'a>(d: &Detection, targets: &'a [Target]) -> Option<&'a Target> {
    targets.iter().min_by(|a, b| {
        let da = (a.x0 - d.x).hypot(a.z0 - d.z);
        let db = (b.x0 - d.x).hypot(b.z0 - d.z);
        da.total_cmp(&db)
    })
}

pub const DEFAULT_EXTRACTION_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub sample: PolSample,
    /// Probe column both sequences were taken from.
    pub column: usize,
    /// The search window ran past the scan edge and was clamped.
    pub clamped: bool,
}

fn fit_length(row: ndarray::ArrayView1<f32>) -> Vec<f32> {
    let mut v: Vec<f32> = row.iter().take(SEQUENCE_LEN).copied().collect();
    v.resize(SEQUENCE_LEN, 0.0);
    v
}

/// Picks the strongest co-pol frame within `window` columns of a
/// detection and returns both channels' frames from that column, cropped
/// or zero-padded to the sequence length.
pub fn extract_sequence(b_co: &BScan, b_cross: &BScan, d: &Detection, window: usize) -> Result<Extraction> {
    if b_co.data.dim() != b_cross.data.dim()
        || (b_co.dx - b_cross.dx).abs() > 1e-12 * b_co.dx
        || (b_co.sample_rate - b_cross.sample_rate).abs() > 1e-9 * b_co.sample_rate
    {
        return Err(Error::ShapeMismatch("co- and cross-pol scans have different axes".into()));
    }
    let nx = b_co.columns();
    let center = d.column.round();
    if !(center >= 0.0 && center < nx as f64) {
        return Err(Error::invalid(
            "detection",
            format!("column {} outside scan of {nx} columns", d.column),
        ));
    }
    let center = center as usize;
    let lo = center.checked_sub(window);
    let hi = center + window;
    let clamped = lo.is_none() || hi >= nx;
    let (lo, hi) = (lo.unwrap_or(0), hi.min(nx - 1));
    let energy = |b: &BScan, i: usize| b.data.row(i).iter().map(|v| (*v as f64).powi(2)).sum::<f64>();
    let (column, best) = (lo..=hi)
        .map(|i| (i, energy(b_co, i)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty window");
    if best == 0.0 && (lo..=hi).all(|i| energy(b_cross, i) == 0.0) {
        return Err(Error::NoSignal);
    }
    let (material, environment) = match &b_co.provenance {
        Some(p) => (
            nearest_target(d, &p.scene.targets)
                .map(|t| t.material)
                .unwrap_or(Material::Custom),
            Some(p.scene.environment()),
        ),
        None => (Material::Custom, None),
    };
    let sample = PolSample::new(
        fit_length(b_co.data.row(column)),
        fit_length(b_cross.data.row(column)),
        material,
        environment,
    )?;
    Ok(Extraction {
        sample,
        column,
        clamped,
    })
}
