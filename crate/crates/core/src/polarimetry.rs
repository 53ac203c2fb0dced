//! Fresnel reflection model for the two polarization channels, plus the
//! classical spectral features computed from received echoes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft, fftfreq};
use crate::waveform::{demodulate, TimeSeries, WaveformConfig};

/// Length of every dual-polarization training sequence.
pub const SEQUENCE_LEN: usize = 1120;

/// Reflection coefficients of one wall/target interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelPair {
    pub gamma_p: Complex64,
    pub gamma_s: Complex64,
    pub n_wall: Complex64,
    pub n_target: Complex64,
    pub incidence: f64,
    pub refraction: Complex64,
}

const BRANCH_TOLERANCE: f64 = 1e-12;

/// Co- and cross-polarization reflection coefficients for incidence angle
/// `incidence` (radians) from a medium of index `n_wall` onto `n_target`.
///
/// The refraction angle follows Snell's law with complex indices. The
/// cosine branch is chosen with `Im(cos) >= 0` so the transmitted field
/// decays past total internal reflection.
pub fn fresnel(n_wall: Complex64, n_target: Complex64, incidence: f64) -> Result<FresnelPair> {
    if n_target.norm() == 0.0 || !n_target.is_finite() {
        return Err(Error::invalid("n_target", "refractive index must be nonzero"));
    }
    if n_wall.norm() == 0.0 || !n_wall.is_finite() {
        return Err(Error::invalid("n_wall", "refractive index must be nonzero"));
    }
    if !(0.0..PI / 2.0).contains(&incidence) {
        return Err(Error::invalid(
            "incidence",
            format!("must lie in [0, pi/2), got {incidence}"),
        ));
    }
    let cos_0 = incidence.cos();
    let sin_s = n_wall * incidence.sin() / n_target;
    // Normal wavenumber n_t cos(phi_s), written without 1 - sin^2 so that
    // matched media and grazing angles do not cancel.
    let mut kz = (n_target * n_target - n_wall * n_wall + n_wall * n_wall * (cos_0 * cos_0)).sqrt();
    let mut cos_s = kz / n_target;
    // The principal root already has Re >= 0; only flip when the decay
    // sign is meaningful and not a rounding residue of a real cosine.
    if cos_s.im < -BRANCH_TOLERANCE * cos_s.norm() {
        kz = -kz;
        cos_s = -cos_s;
    }
    let refraction = -Complex64::i() * (cos_s + Complex64::i() * sin_s).ln();
    let n_t2 = n_target * n_target;
    let gamma_p = (n_t2 * cos_0 - n_wall * kz) / (n_t2 * cos_0 + n_wall * kz);
    let gamma_s = (n_wall * cos_0 - kz) / (n_wall * cos_0 + kz);
    Ok(FresnelPair {
        gamma_p: finite_or_zero(gamma_p),
        gamma_s: finite_or_zero(gamma_s),
        n_wall,
        n_target,
        incidence,
        refraction,
    })
}

// 0/0 only happens for a perfectly matched, grazing interface.
fn finite_or_zero(v: Complex64) -> Complex64 {
    if v.is_finite() {
        v
    } else {
        Complex64::default()
    }
}

/// Target material classes. `Custom` carries no class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    NonCorrodedRebar,
    CorrodedRebar,
    NonLeakedPvc,
    LeakedPvc,
    Custom,
}

impl Material {
    pub const CLASSES: [Material; 4] = [
        Material::NonCorrodedRebar,
        Material::CorrodedRebar,
        Material::NonLeakedPvc,
        Material::LeakedPvc,
    ];

    pub fn class_index(self) -> Option<u8> {
        Material::CLASSES
            .iter()
            .position(|m| *m == self)
            .map(|i| i as u8)
    }

    pub fn from_class_index(index: u8) -> Option<Material> {
        Material::CLASSES.get(index as usize).copied()
    }

    /// Simulation default refractive index. These are tunable knobs, not
    /// measured constants.
    pub fn default_index(self) -> Option<Complex64> {
        match self {
            Material::NonCorrodedRebar => Some(Complex64::new(40.0, 40.0)),
            Material::CorrodedRebar => Some(Complex64::new(14.0, 6.0)),
            Material::NonLeakedPvc => Some(Complex64::new(1.7, 0.01)),
            Material::LeakedPvc => Some(Complex64::new(8.5, 1.5)),
            Material::Custom => None,
        }
    }

    /// Default pulse broadening per unit bandwidth, ns/GHz.
    pub fn default_dispersion_slope(self) -> f64 {
        match self {
            Material::NonCorrodedRebar => 0.0,
            Material::CorrodedRebar => 0.03,
            Material::NonLeakedPvc => 0.01,
            Material::LeakedPvc => 0.06,
            Material::Custom => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallType {
    Concrete,
    Brick,
}

impl WallType {
    pub const ALL: [WallType; 2] = [WallType::Concrete, WallType::Brick];

    /// Default wall loss at the carrier, dB/m.
    pub fn default_attenuation_db_per_m(self) -> f64 {
        match self {
            WallType::Concrete => 50.0,
            WallType::Brick => 35.0,
        }
    }
}

pub const DEPTH_BUCKETS: u8 = 3;
pub const MOISTURE_BUCKETS: u8 = 3;

/// Environment class: wall type x depth bucket x water-content bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvironmentLabel {
    pub wall: WallType,
    pub depth_bucket: u8,
    pub moisture_bucket: u8,
}

impl EnvironmentLabel {
    pub const COUNT: u16 = 2 * DEPTH_BUCKETS as u16 * MOISTURE_BUCKETS as u16;

    pub fn id(&self) -> u16 {
        let wall = WallType::ALL.iter().position(|w| *w == self.wall).unwrap() as u16;
        (wall * DEPTH_BUCKETS as u16 + self.depth_bucket as u16) * MOISTURE_BUCKETS as u16
            + self.moisture_bucket as u16
    }

    pub fn from_id(id: u16) -> Option<Self> {
        if id >= Self::COUNT {
            return None;
        }
        let moisture = (id % MOISTURE_BUCKETS as u16) as u8;
        let rest = id / MOISTURE_BUCKETS as u16;
        let depth = (rest % DEPTH_BUCKETS as u16) as u8;
        let wall = WallType::ALL[(rest / DEPTH_BUCKETS as u16) as usize];
        Some(EnvironmentLabel {
            wall,
            depth_bucket: depth,
            moisture_bucket: moisture,
        })
    }

    /// Depth bucket for a target depth in metres: <5 cm, <7.5 cm, deeper.
    pub fn depth_bucket_for(depth_m: f64) -> u8 {
        if depth_m < 0.05 {
            0
        } else if depth_m < 0.075 {
            1
        } else {
            2
        }
    }

    /// Moisture bucket for a wall permittivity: <8, <11, wetter.
    pub fn moisture_bucket_for(permittivity: f64) -> u8 {
        if permittivity < 8.0 {
            0
        } else if permittivity < 11.0 {
            1
        } else {
            2
        }
    }
}

/// Dual-polarization sequence pair with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PolSample {
    pub co: Vec<f32>,
    pub cross: Vec<f32>,
    pub material: Material,
    pub environment: Option<EnvironmentLabel>,
}

impl PolSample {
    pub fn new(
        co: Vec<f32>,
        cross: Vec<f32>,
        material: Material,
        environment: Option<EnvironmentLabel>,
    ) -> Result<Self> {
        if co.len() != SEQUENCE_LEN || cross.len() != SEQUENCE_LEN {
            return Err(Error::ShapeMismatch(format!(
                "sequences must have length {SEQUENCE_LEN}, got {} and {}",
                co.len(),
                cross.len()
            )));
        }
        if co.iter().chain(&cross).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sequence", "contains non-finite values"));
        }
        Ok(PolSample {
            co,
            cross,
            material,
            environment,
        })
    }
}

/// Transmitted RF pulse laid out circularly: sample 0 is `t = 0`, negative
/// times wrap to the end of the buffer.
pub fn circular_reference_pulse(len: usize, wf: &WaveformConfig) -> Vec<f64> {
    let w = 2.0 * PI * wf.carrier();
    (0..len)
        .map(|n| {
            let k = if n < len.div_ceil(2) { n as f64 } else { n as f64 - len as f64 };
            let t = k * wf.dt();
            wf.envelope_at(t, wf.sigma()) * (w * t).cos()
        })
        .collect()
}

/// Relative spectral magnitude below which division is not attempted.
pub const VALID_BAND_FRACTION: f64 = 0.05;

/// Complex reflection spectrum `Echo(f) / X(f)` on FFT bins.
#[derive(Debug, Clone)]
pub struct ReflectionSpectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub valid: Vec<bool>,
}

impl ReflectionSpectrum {
    pub fn valid_bins(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs
            .iter()
            .zip(&self.values)
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|((f, v), _)| (*f, *v))
    }

    /// Mean |Γ| over valid positive-frequency bins.
    pub fn mean_magnitude(&self) -> f64 {
        let (sum, n) = self
            .valid_bins()
            .filter(|(f, _)| *f > 0.0)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v.norm(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Delay implied by the phase slope across the positive valid band,
    /// `phase = -2 pi f tau`, by least squares on the unwrapped phase.
    /// The slope only fixes the delay modulo the record length, so the
    /// result is wrapped into `[0, N dt)`.
    pub fn delay_estimate(&self) -> Option<f64> {
        let bins: Vec<(f64, Complex64)> = self.valid_bins().filter(|(f, _)| *f > 0.0).collect();
        if bins.len() < 2 {
            return None;
        }
        let mut phases = Vec::with_capacity(bins.len());
        let mut prev = bins[0].1.arg();
        let mut offset = 0.0;
        phases.push(prev);
        for (_, v) in &bins[1..] {
            let p = v.arg();
            let mut d = p - prev;
            while d > PI {
                d -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
                offset += 2.0 * PI;
            }
            phases.push(p + offset);
            prev = p;
        }
        let n = bins.len() as f64;
        let mf = bins.iter().map(|b| b.0).sum::<f64>() / n;
        let mp = phases.iter().sum::<f64>() / n;
        let (mut num, mut den) = (0.0, 0.0);
        for ((f, _), p) in bins.iter().zip(&phases) {
            num += (f - mf) * (p - mp);
            den += (f - mf) * (f - mf);
        }
        let period = 1.0 / self.freqs[1];
        Some((-(num / den) / (2.0 * PI)).rem_euclid(period))
    }
}

/// Spectral division of a received RF echo by the transmitted pulse.
///
/// Only bins where the reference exceeds 5% of its peak magnitude are
/// divided; the rest are zero and flagged invalid.
pub fn estimate_reflection_spectrum(echo: &[f64], wf: &WaveformConfig) -> ReflectionSpectrum {
    let n = echo.len();
    let mut reference: Vec<Complex64> = circular_reference_pulse(n, wf)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let mut spectrum: Vec<Complex64> = echo.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft(&mut reference);
    fft(&mut spectrum);
    let peak = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut valid = vec![false; n];
    let values = spectrum
        .iter()
        .zip(&reference)
        .zip(valid.iter_mut())
        .map(|((e, x), ok)| {
            if peak > 0.0 && x.norm() > VALID_BAND_FRACTION * peak {
                *ok = true;
                e / x
            } else {
                Complex64::default()
            }
        })
        .collect();
    ReflectionSpectrum {
        freqs: fftfreq(n, wf.dt()),
        values,
        valid,
    }
}

/// Time- and frequency-domain dispersion descriptors of one echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionFeatures {
    /// Envelope -3 dB full width, seconds.
    pub width_s: f64,
    /// Power-weighted mean positive frequency, Hz.
    pub centroid_hz: f64,
    pub skewness: f64,
}

/// Required envelope peak over median envelope.
pub const PULSE_DETECTION_RATIO: f64 = 5.0;

pub fn dispersion_features(echo: &[f64], wf: &WaveformConfig) -> Result<DispersionFeatures> {
    if echo.len() < 4 {
        return Err(Error::NoPulse { ratio: 0.0 });
    }
    let env: Vec<f64> = demodulate(&TimeSeries::new(0.0, wf.dt(), echo.to_vec()), wf)
        .values
        .iter()
        .map(|v| v.norm())
        .collect();
    let (peak_idx, peak) = env
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let mut sorted = env.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let ratio = if median > 0.0 { peak / median } else if peak > 0.0 { f64::INFINITY } else { 0.0 };
    if !(ratio > PULSE_DETECTION_RATIO) {
        return Err(Error::NoPulse { ratio });
    }

    let level = peak / std::f64::consts::SQRT_2;
    let crossing = |range: &mut dyn Iterator<Item = usize>, step: isize| -> f64 {
        for i in range {
            if env[i] < level {
                let j = (i as isize - step) as usize;
                // interpolate between i (below) and j (above)
                let frac = (env[j] - level) / (env[j] - env[i]);
                return j as f64 + step as f64 * frac;
            }
        }
        if step < 0 { 0.0 } else { (env.len() - 1) as f64 }
    };
    let left = crossing(&mut (0..peak_idx).rev(), -1);
    let right = crossing(&mut (peak_idx + 1..env.len()), 1);
    let width_s = (right - left) * wf.dt();

    let n = echo.len();
    let mut spectrum: Vec<Complex64> = echo.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft(&mut spectrum);
    let freqs = fftfreq(n, wf.dt());
    let positive = 1..n.div_ceil(2);
    let total: f64 = positive.clone().map(|k| spectrum[k].norm_sqr()).sum();
    let centroid = positive.clone().map(|k| freqs[k] * spectrum[k].norm_sqr()).sum::<f64>() / total;
    let var = positive
        .clone()
        .map(|k| (freqs[k] - centroid).powi(2) * spectrum[k].norm_sqr())
        .sum::<f64>()
        / total;
    let third = positive
        .map(|k| (freqs[k] - centroid).powi(3) * spectrum[k].norm_sqr())
        .sum::<f64>()
        / total;
    Ok(DispersionFeatures {
        width_s,
        centroid_hz: centroid,
        skewness: third / var.powf(1.5),
    })
}
