//! Forward model for in-wall scans: point scatterers under a lossy wall,
//! observed by a probe sliding along the surface.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarimetry::{fresnel, EnvironmentLabel, Material, WallType};
use crate::waveform::WaveformConfig;

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

pub const DEFAULT_FRAME_RATE: f64 = 40.0;
pub const DEFAULT_RANGE_SAMPLES: usize = 256;
/// Envelope support in standard deviations; beyond it a pulse is treated as zero.
const PULSE_SUPPORT_SIGMAS: f64 = 8.0;

/// Propagation speed inside a wall of relative permittivity `permittivity`.
pub fn wave_speed(permittivity: f64) -> f64 {
    C0 / permittivity.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub x0: f64,
    pub z0: f64,
    pub material: Material,
    /// Complex reflectivity folded into the echo amplitude, `|beta| <= 1`.
    pub reflectivity: Complex64,
    pub refractive_index: Complex64,
    /// Pulse broadening per unit bandwidth, ns/GHz.
    #[serde(default)]
    pub dispersion_slope: f64,
}

impl Target {
    /// Target with the material's default index and dispersion. The
    /// reflectivity is the unit phasor of the normal-incidence co-pol
    /// coefficient against a wall of `permittivity`.
    pub fn of_material(x0: f64, z0: f64, material: Material, permittivity: f64) -> Result<Target> {
        let index = material.default_index().ok_or_else(|| {
            Error::invalid("material", "custom targets need an explicit refractive index")
        })?;
        Target::with_index(x0, z0, material, index, permittivity)
    }

    /// Like [`Target::of_material`] with an explicit refractive index.
    pub fn with_index(x0: f64, z0: f64, material: Material, index: Complex64, permittivity: f64) -> Result<Target> {
        if !(permittivity >= 1.0 && permittivity.is_finite()) {
            return Err(Error::invalid("permittivity", format!("must be >= 1, got {permittivity}")));
        }
        let gamma = fresnel(Complex64::new(permittivity.sqrt(), 0.0), index, 0.0)?.gamma_p;
        let reflectivity = if gamma.norm() > 0.0 {
            gamma / gamma.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let t = Target {
            x0,
            z0,
            material,
            reflectivity,
            refractive_index: index,
            dispersion_slope: material.default_dispersion_slope(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::invalid("z0", format!("depth must be > 0, got {}", self.z0)));
        }
        // slack for unit phasors that round one ulp above 1
        if !(self.reflectivity.norm() <= 1.0 + 1e-12) {
            return Err(Error::invalid("reflectivity", "|beta| must be <= 1"));
        }
        if self.refractive_index.norm() == 0.0 || !self.refractive_index.is_finite() {
            return Err(Error::invalid("refractive_index", "must be finite and nonzero"));
        }
        if !(self.dispersion_slope >= 0.0 && self.dispersion_slope.is_finite()) {
            return Err(Error::invalid("dispersion_slope", "must be >= 0"));
        }
        Ok(())
    }

    /// Pulse standard deviation after material dispersion.
    pub fn broadened_sigma(&self, wf: &WaveformConfig) -> f64 {
        wf.sigma() + self.dispersion_slope * 1e-9 * (wf.bandwidth() / 1e9)
    }
}

fn default_wall() -> WallType {
    WallType::Concrete
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub permittivity: f64,
    /// Wall loss at the carrier, dB/m.
    pub attenuation_db_per_m: f64,
    #[serde(default = "default_wall")]
    pub wall: WallType,
    pub targets: Vec<Target>,
}

impl Scene {
    pub fn new(permittivity: f64, attenuation_db_per_m: f64, targets: Vec<Target>) -> Result<Scene> {
        let s = Scene {
            permittivity,
            attenuation_db_per_m,
            wall: WallType::Concrete,
            targets,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.permittivity >= 1.0 && self.permittivity.is_finite()) {
            return Err(Error::invalid(
                "permittivity",
                format!("must be >= 1, got {}", self.permittivity),
            ));
        }
        if !(self.attenuation_db_per_m >= 0.0 && self.attenuation_db_per_m.is_finite()) {
            return Err(Error::invalid("attenuation_db_per_m", "must be >= 0"));
        }
        for (i, t) in self.targets.iter().enumerate() {
            t.validate()?;
            if self.targets[..i].iter().any(|o| o.x0 == t.x0 && o.z0 == t.z0) {
                return Err(Error::invalid("targets", "duplicate target position"));
            }
        }
        Ok(())
    }

    pub fn wave_speed(&self) -> f64 {
        wave_speed(self.permittivity)
    }

    pub fn wall_index(&self) -> Complex64 {
        Complex64::new(self.permittivity.sqrt(), 0.0)
    }

    /// Environment class of the scene, bucketed on its shallowest target.
    pub fn environment(&self) -> EnvironmentLabel {
        let depth = self
            .targets
            .iter()
            .map(|t| t.z0)
            .fold(f64::INFINITY, f64::min);
        EnvironmentLabel {
            wall: self.wall,
            depth_bucket: EnvironmentLabel::depth_bucket_for(depth),
            moisture_bucket: EnvironmentLabel::moisture_bucket_for(self.permittivity),
        }
    }
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

fn default_range_samples() -> usize {
    DEFAULT_RANGE_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Probe speed along the wall, m/s.
    pub speed: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub scan_length: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// Samples per received frame (`N_t`).
    #[serde(default = "default_range_samples")]
    pub range_samples: usize,
    /// Relative standard deviation of per-column step jitter; 0 disables it.
    #[serde(default)]
    pub speed_jitter: f64,
}

impl ScanConfig {
    pub fn new(speed: f64, scan_length: f64) -> ScanConfig {
        ScanConfig {
            speed,
            frame_rate: DEFAULT_FRAME_RATE,
            scan_length,
            noise_std: 0.0,
            seed: 0,
            range_samples: DEFAULT_RANGE_SAMPLES,
            speed_jitter: 0.0,
        }
    }

    pub fn dx(&self) -> f64 {
        self.speed / self.frame_rate
    }

    /// Number of probe positions, `floor(scan_length / dx)`.
    pub fn columns(&self) -> usize {
        let ratio = self.scan_length / self.dx();
        (ratio + 1e-9 * ratio.abs().max(1.0)).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid("speed", "must be > 0"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::invalid("frame_rate", "must be > 0"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be >= 0"));
        }
        if self.range_samples == 0 {
            return Err(Error::invalid("range_samples", "must be >= 1"));
        }
        if !(self.speed_jitter >= 0.0 && self.speed_jitter.is_finite()) {
            return Err(Error::invalid("speed_jitter", "must be >= 0"));
        }
        if !(self.scan_length.is_finite()) || self.columns() == 0 {
            return Err(Error::invalid(
                "scan_length",
                format!("{} m is shorter than one step of {} m", self.scan_length, self.dx()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    CoPol,
    CrossPol,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::CoPol => 0x0c0_0000_0000_0001,
            Channel::CrossPol => 0xc05_0000_0000_0002,
        }
    }
}

/// Ground truth attached to synthetic scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scene: Scene,
    pub scan: ScanConfig,
}

/// Received signal matrix, one row per probe position (`N_x x N_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct BScan {
    pub data: Array2<f32>,
    pub channel: Channel,
    /// Actual probe step, m.
    pub dx: f64,
    pub frame_rate: f64,
    pub sample_rate: f64,
    pub waveform: WaveformConfig,
    pub provenance: Option<Provenance>,
}

impl BScan {
    pub fn new(
        data: Array2<f32>,
        channel: Channel,
        dx: f64,
        frame_rate: f64,
        waveform: WaveformConfig,
    ) -> Result<BScan> {
        let b = BScan {
            data,
            channel,
            dx,
            frame_rate,
            sample_rate: waveform.sample_rate(),
            waveform,
            provenance: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nt) = self.data.dim();
        if nx == 0 || nt == 0 {
            return Err(Error::ShapeMismatch(format!("empty scan {nx}x{nt}")));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data", "contains non-finite values"));
        }
        if !(self.dx > 0.0 && self.frame_rate > 0.0 && self.sample_rate > 0.0) {
            return Err(Error::invalid("axes", "dx, frame_rate and sample_rate must be > 0"));
        }
        Ok(())
    }

    pub fn columns(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// Axis-compatible scan with a different matrix.
    pub fn with_data(&self, data: Array2<f32>) -> BScan {
        BScan {
            data,
            ..self.clone()
        }
    }
}

/// Two-way travel time from probe position `probe_x` to `target`.
pub fn echo_delay(target: &Target, probe_x: f64, scene: &Scene) -> f64 {
    2.0 / scene.wave_speed() * (probe_x - target.x0).hypot(target.z0)
}

/// Complex echo amplitude of `target` seen from `probe_x` on `channel`:
/// reflectivity, polarization gain at the geometric incidence angle,
/// 1/r spreading and two-way wall loss.
pub fn echo_amplitude(target: &Target, probe_x: f64, scene: &Scene, channel: Channel) -> Complex64 {
    let dx = (probe_x - target.x0).abs();
    let r = dx.hypot(target.z0);
    let incidence = dx.atan2(target.z0).min(PI / 2.0 - 1e-12);
    let gain = match fresnel(scene.wall_index(), target.refractive_index, incidence) {
        Ok(pair) => match channel {
            Channel::CoPol => pair.gamma_p.norm(),
            Channel::CrossPol => pair.gamma_s.norm(),
        },
        Err(_) => 0.0,
    };
    let loss = 10f64.powf(-scene.attenuation_db_per_m * 2.0 * r / 20.0);
    target.reflectivity * (gain * loss / r)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent noise stream for one (channel, probe position) pair.
fn noise_rng(seed: u64, channel: Channel, probe_x: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(probe_x.to_bits() ^ channel.tag()));
    rng
}

fn add_echo(out: &mut [f64], target: &Target, probe_x: f64, scene: &Scene, wf: &WaveformConfig, channel: Channel) {
    let beta = echo_amplitude(target, probe_x, scene, channel);
    if beta.norm() == 0.0 {
        return;
    }
    let tau = echo_delay(target, probe_x, scene);
    let sigma = target.broadened_sigma(wf);
    let fs = wf.sample_rate();
    let omega = 2.0 * PI * wf.carrier();
    let (mag, phase) = (beta.norm(), beta.arg());
    let lo = ((tau - PULSE_SUPPORT_SIGMAS * sigma) * fs).floor().max(0.0) as usize;
    let hi = (((tau + PULSE_SUPPORT_SIGMAS * sigma) * fs).ceil().max(0.0) as usize).min(out.len());
    for (n, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
        let d = n as f64 / fs - tau;
        *o += mag * wf.envelope_at(d, sigma) * (omega * d + phase).cos();
    }
}

/// One received RF frame at `probe_x`: the superposition of all target
/// echoes plus white Gaussian noise.
pub fn synthesize_ascan(
    scene: &Scene,
    probe_x: f64,
    cfg: &ScanConfig,
    wf: &WaveformConfig,
    channel: Channel,
) -> Vec<f64> {
    let mut out = vec![0.0; cfg.range_samples];
    for t in &scene.targets {
        add_echo(&mut out, t, probe_x, scene, wf, channel);
    }
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).expect("validated noise std");
        let mut rng = noise_rng(cfg.seed, channel, probe_x);
        out.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    out
}

/// Probe positions for a scan, including optional step jitter.
pub fn probe_positions(cfg: &ScanConfig) -> Vec<f64> {
    let n = cfg.columns();
    let dx = cfg.dx();
    if cfg.speed_jitter == 0.0 {
        return (0..n).map(|i| i as f64 * dx).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(splitmix(0x6a17_7e55));
    let normal = Normal::new(0.0, cfg.speed_jitter).expect("validated jitter");
    let mut x = 0.0;
    (0..n)
        .map(|i| {
            if i > 0 {
                x += dx * (1.0 + normal.sample(&mut rng)).max(0.0);
            }
            x
        })
        .collect()
}

/// Stacks frames at every probe position into a B-scan.
pub fn synthesize_bscan(
    scene: &Scene,
    cfg: &ScanConfig,
    wf: &WaveformConfig,
    channel: Channel,
) -> Result<BScan> {
    scene.validate()?;
    cfg.validate()?;
    let positions = probe_positions(cfg);
    let nt = cfg.range_samples;
    let rows: Vec<Vec<f64>> = positions
        .par_iter()
        .map(|x| synthesize_ascan(scene, *x, cfg, wf, channel))
        .collect();
    let mut data = Array2::<f32>::zeros((positions.len(), nt));
    for (mut row, col) in data.outer_iter_mut().zip(&rows) {
        row.iter_mut().zip(col).for_each(|(d, s)| *d = *s as f32);
    }
    Ok(BScan {
        data,
        channel,
        dx: cfg.dx(),
        frame_rate: cfg.frame_rate,
        sample_rate: wf.sample_rate(),
        waveform: *wf,
        provenance: Some(Provenance {
            scene: scene.clone(),
            scan: cfg.clone(),
        }),
    })
}

/// Noise standard deviation giving `snr_db` against a peak amplitude.
pub fn noise_std_for_snr(peak_amplitude: f64, snr_db: f64) -> f64 {
    peak_amplitude / 10f64.powf(snr_db / 20.0)
}
