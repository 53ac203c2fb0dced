//! Moving-range to moving-depth conversion: range compression, the
//! frequency-wavenumber range-migration algorithm and time-domain
//! back-projection.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{fft, fft2, fftfreq, ifft, ifft2};
use crate::scene::{wave_speed, BScan};
use crate::waveform::{mix_down, LowPass, WaveformConfig};

/// Regularization of the range-compression equalizer relative to the peak
/// replica power.
pub const DEFAULT_EQUALIZATION: f64 = 0.05;

/// Time-axis zero padding before the 2-D transform; keeps the phase step
/// between neighbouring frequency bins small for the Stolt interpolation.
const TIME_OVERSAMPLING: usize = 4;

/// Magnitude image over (probe position, depth), `N_x x N_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusedImage {
    pub data: Array2<f32>,
    pub dx: f64,
    pub dz: f64,
    pub origin_depth: f64,
}

impl FocusedImage {
    pub fn new(data: Array2<f32>, dx: f64, dz: f64, origin_depth: f64) -> Result<Self> {
        let img = FocusedImage {
            data,
            dx,
            dz,
            origin_depth,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nz) = self.data.dim();
        if nx == 0 || nz == 0 {
            return Err(Error::ShapeMismatch(format!("empty image {nx}x{nz}")));
        }
        if self.data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("data", "image values must be finite and >= 0"));
        }
        if !(self.dx > 0.0 && self.dz > 0.0 && self.origin_depth.is_finite()) {
            return Err(Error::invalid("axes", "dx and dz must be > 0"));
        }
        Ok(())
    }

    pub fn x_at(&self, ix: f64) -> f64 {
        ix * self.dx
    }

    pub fn z_at(&self, iz: f64) -> f64 {
        self.origin_depth + iz * self.dz
    }

    /// Index and value of the brightest pixel.
    pub fn peak(&self) -> (usize, usize, f32) {
        let mut best = (0, 0, f32::NEG_INFINITY);
        for ((ix, iz), v) in self.data.indexed_iter() {
            if *v > best.2 {
                best = (ix, iz, *v);
            }
        }
        best
    }

    /// Position (x, z) in metres of the brightest pixel.
    pub fn peak_position(&self) -> (f64, f64) {
        let (ix, iz, _) = self.peak();
        (self.x_at(ix as f64), self.z_at(iz as f64))
    }
}

/// Spectrum over (kx, omega) with its axes in rad/m and rad/s.
#[derive(Debug, Clone)]
pub struct SpectrumMatrix {
    pub data: Array2<Complex64>,
    pub kx: Vec<f64>,
    pub omega: Vec<f64>,
}

impl SpectrumMatrix {
    /// 2-D transform of a complex baseband matrix sampled every `dx` metres
    /// and `1 / sample_rate` seconds. `omega` is the RF angular frequency,
    /// carrier included.
    pub fn from_baseband(
        data: &Array2<Complex64>,
        dx: f64,
        sample_rate: f64,
        carrier: f64,
        padded: (usize, usize),
    ) -> SpectrumMatrix {
        let (nx, nt) = data.dim();
        let (lx, lt) = padded;
        assert!(lx >= nx && lt >= nt);
        let mut spectrum = Array2::<Complex64>::zeros((lx, lt));
        spectrum.slice_mut(ndarray::s![..nx, ..nt]).assign(data);
        fft2(&mut spectrum);
        SpectrumMatrix {
            data: spectrum,
            kx: fftfreq(lx, dx).into_iter().map(|k| 2.0 * PI * k).collect(),
            omega: fftfreq(lt, 1.0 / sample_rate)
                .into_iter()
                .map(|f| 2.0 * PI * (f + carrier))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusOptions {
    /// Equalizer regularization for range compression.
    pub equalization: f64,
    /// Hann taper across the probe axis before focusing.
    pub taper: bool,
    /// Back-projection only: ignore probe positions farther than this from the pixel, m.
    pub aperture: Option<f64>,
}

impl Default for FocusOptions {
    fn default() -> Self {
        FocusOptions {
            equalization: DEFAULT_EQUALIZATION,
            taper: false,
            aperture: None,
        }
    }
}

fn check_params(permittivity: f64, speed: f64) -> Result<()> {
    if !(permittivity >= 1.0 && permittivity.is_finite()) {
        return Err(Error::invalid(
            "permittivity",
            format!("must be >= 1, got {permittivity}"),
        ));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::invalid("speed", format!("must be > 0, got {speed}")));
    }
    Ok(())
}

/// Baseband matched filter followed by a regularized equalizer,
/// `H = conj(G) / (|G|^2 + lambda * max|G|^2)`, for `len`-point transforms.
struct RangeFilter {
    len: usize,
    response: Vec<Complex64>,
}

impl RangeFilter {
    fn new(wf: &WaveformConfig, sample_rate: f64, samples: usize, equalization: f64) -> Self {
        let half = (8.0 * wf.sigma() * sample_rate).ceil() as usize;
        let len = (samples + 2 * half).next_power_of_two();
        let dt = 1.0 / sample_rate;
        let mut replica: Vec<Complex64> = (0..len)
            .map(|n| {
                let k = if n < len.div_ceil(2) { n as f64 } else { n as f64 - len as f64 };
                Complex64::new(wf.envelope_at(k * dt, wf.sigma()), 0.0)
            })
            .collect();
        fft(&mut replica);
        let peak = replica.iter().map(|g| g.norm_sqr()).fold(0.0, f64::max);
        let reg = equalization * peak;
        let dc = replica[0].norm_sqr();
        // unit gain at DC
        let scale = (dc + reg) / dc;
        let response = replica
            .iter()
            .map(|g| g.conj() * (scale / (g.norm_sqr() + reg)))
            .collect();
        RangeFilter { len, response }
    }

    fn apply(&self, lowpass: &LowPass, row: &[f64], sample_rate: f64, carrier: f64, out: &mut [Complex64]) {
        let mixed = mix_down(row, 0.0, 1.0 / sample_rate, carrier);
        let mut buf = vec![Complex64::default(); self.len];
        lowpass.apply(&mixed, &mut buf[..row.len()]);
        fft(&mut buf);
        buf.iter_mut().zip(&self.response).for_each(|(b, h)| *b *= h);
        ifft(&mut buf);
        out.copy_from_slice(&buf[..out.len()]);
    }
}

/// Demodulates every frame to complex baseband and pulse-compresses it
/// along range. A point echo at delay `tau` peaks at sample `round(tau f_s)`.
pub fn range_compress(b: &BScan, wf: &WaveformConfig) -> Result<Array2<Complex64>> {
    range_compress_with(b, wf, DEFAULT_EQUALIZATION)
}

pub fn range_compress_with(b: &BScan, wf: &WaveformConfig, equalization: f64) -> Result<Array2<Complex64>> {
    if (b.sample_rate - wf.sample_rate()).abs() > 1e-9 * wf.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: wf.sample_rate(),
            found: b.sample_rate,
        });
    }
    if !(equalization > 0.0 && equalization.is_finite()) {
        return Err(Error::invalid("equalization", "must be > 0"));
    }
    let (nx, nt) = b.data.dim();
    let filter = RangeFilter::new(wf, b.sample_rate, nt, equalization);
    let lowpass = LowPass::for_waveform(wf, b.sample_rate);
    let mut out = Array2::<Complex64>::zeros((nx, nt));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(b.data.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(mut dst, src)| {
            let row: Vec<f64> = src.iter().map(|v| *v as f64).collect();
            let mut tmp = vec![Complex64::default(); nt];
            filter.apply(&lowpass, &row, b.sample_rate, wf.carrier(), &mut tmp);
            dst.iter_mut().zip(&tmp).for_each(|(d, s)| *d = *s);
        });
    Ok(out)
}

fn hann_taper(data: &mut Array2<Complex64>) {
    let n = data.nrows();
    if n < 2 {
        return;
    }
    for (i, mut row) in data.outer_iter_mut().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        row.iter_mut().for_each(|v| *v *= w);
    }
}

/// Range-migration focusing with default options.
pub fn rma(b: &BScan, permittivity: f64, speed: f64) -> Result<FocusedImage> {
    rma_with(b, permittivity, speed, &FocusOptions::default())
}

/// Range-migration focusing.
///
/// `permittivity` and `speed` are the caller's estimates of the wall and of
/// the probe motion; the probe step is taken as `speed / frame_rate`.
pub fn rma_with(b: &BScan, permittivity: f64, speed: f64, opts: &FocusOptions) -> Result<FocusedImage> {
    check_params(permittivity, speed)?;
    let wf = b.waveform;
    let mut comp = range_compress_with(b, &wf, opts.equalization)?;
    if opts.taper {
        hann_taper(&mut comp);
    }
    let (nx, nt) = comp.dim();
    let c = wave_speed(permittivity);
    let dx = speed / b.frame_rate;
    let lx = nx.next_power_of_two();
    let lt = (TIME_OVERSAMPLING * nt).next_power_of_two();
    let spectrum = SpectrumMatrix::from_baseband(&comp, dx, b.sample_rate, wf.carrier(), (lx, lt));
    let mut focused = stolt_map(&spectrum, c, b.sample_rate);
    ifft2(&mut focused);
    let data = focused
        .slice(ndarray::s![..nx, ..nt])
        .mapv(|v| v.norm() as f32);
    FocusedImage::new(data, dx, c / (2.0 * b.sample_rate), 0.0)
}

/// Resamples each kx row from omega onto a uniform kz grid through
/// `omega = (c/2) sqrt(kx^2 + kz^2)` by linear interpolation. The kz grid
/// is `(2/c) * omega_k` for the transform's own frequency bins, so the
/// inverse transform lands on depth spacing `c / (2 f_s)`.
fn stolt_map(spectrum: &SpectrumMatrix, c: f64, sample_rate: f64) -> Array2<Complex64> {
    let (lx, lt) = spectrum.data.dim();
    let d_omega = 2.0 * PI * sample_rate / lt as f64;
    let carrier_omega = spectrum.omega[0];
    let half = (lt / 2) as f64;
    // sorted position j holds bin (j + lt/2) % lt, baseband omega (j - lt/2) * d_omega
    let bin_of = |j: usize| (j + lt / 2) % lt;
    let omega_max = spectrum.omega.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Array2::<Complex64>::zeros((lx, lt));
    out.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut dst)| {
            let kx = spectrum.kx[row];
            if kx * kx > (2.0 * omega_max / c).powi(2) {
                return;
            }
            let src = spectrum.data.row(row);
            for (m, d) in dst.iter_mut().enumerate() {
                let kz = 2.0 / c * spectrum.omega[m];
                if kz <= 0.0 {
                    continue;
                }
                let omega = 0.5 * c * kx.hypot(kz);
                let pos = (omega - carrier_omega) / d_omega + half;
                if pos < 0.0 || pos > (lt - 1) as f64 {
                    continue;
                }
                let j = pos.floor() as usize;
                let frac = pos - j as f64;
                let lo = src[bin_of(j)];
                let hi = if j + 1 < lt { src[bin_of(j + 1)] } else { lo };
                *d = lo * (1.0 - frac) + hi * frac;
            }
        });
    out
}

/// Pixel grid for back-projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub z0: f64,
    pub dz: f64,
    pub nz: usize,
}

impl ImageGrid {
    /// The grid `rma` produces for the same scan and parameters.
    pub fn for_scan(b: &BScan, permittivity: f64, speed: f64) -> ImageGrid {
        ImageGrid {
            x0: 0.0,
            dx: speed / b.frame_rate,
            nx: b.columns(),
            z0: 0.0,
            dz: wave_speed(permittivity) / (2.0 * b.sample_rate),
            nz: b.samples(),
        }
    }

    /// Same grid limited to depths below `max_depth`.
    pub fn with_max_depth(mut self, max_depth: f64) -> ImageGrid {
        let n = ((max_depth - self.z0) / self.dz).floor() as usize + 1;
        self.nz = self.nz.min(n.max(1));
        self
    }
}

pub fn backproject(b: &BScan, permittivity: f64, speed: f64, grid: &ImageGrid) -> Result<FocusedImage> {
    backproject_with(b, permittivity, speed, grid, &FocusOptions::default())
}

/// Time-domain back-projection: every pixel coherently sums the range
/// compressed frames at its two-way delay, with carrier phase restored.
pub fn backproject_with(
    b: &BScan,
    permittivity: f64,
    speed: f64,
    grid: &ImageGrid,
    opts: &FocusOptions,
) -> Result<FocusedImage> {
    check_params(permittivity, speed)?;
    if grid.nx == 0 || grid.nz == 0 || !(grid.dx > 0.0 && grid.dz > 0.0) {
        return Err(Error::invalid("grid", "grid must be non-empty with positive spacing"));
    }
    let wf = b.waveform;
    let mut comp = range_compress_with(b, &wf, opts.equalization)?;
    if opts.taper {
        hann_taper(&mut comp);
    }
    let (nx, nt) = comp.dim();
    let c = wave_speed(permittivity);
    let step = speed / b.frame_rate;
    let fs = b.sample_rate;
    let omega_c = 2.0 * PI * wf.carrier();
    let aperture = opts.aperture.unwrap_or(f64::INFINITY);

    // When pixels sit on probe positions the delay depends only on the
    // column offset, so delays and carrier phasors are tabulated once.
    let aligned = grid.x0 == 0.0 && (grid.dx - step).abs() <= 1e-12 * step;
    let table: Option<Vec<(f64, Complex64)>> = aligned.then(|| {
        let mut t = Vec::with_capacity(nx * grid.nz);
        for off in 0..nx {
            let dxm = off as f64 * step;
            for iz in 0..grid.nz {
                let z = grid.z0 + iz as f64 * grid.dz;
                let tau = 2.0 / c * dxm.hypot(z);
                t.push((tau * fs, Complex64::from_polar(1.0, omega_c * tau)));
            }
        }
        t
    });

    let sample = |row: usize, pos: f64| -> Option<Complex64> {
        if pos < 0.0 || pos > (nt - 1) as f64 {
            return None;
        }
        let j = pos.floor() as usize;
        let frac = pos - j as f64;
        let lo = comp[[row, j]];
        let hi = if j + 1 < nt { comp[[row, j + 1]] } else { lo };
        Some(lo * (1.0 - frac) + hi * frac)
    };

    let mut data = Array2::<f32>::zeros((grid.nx, grid.nz));
    data.outer_iter_mut()
        .into_par_iter()
        .enumerate()
        .for_each(|(ix, mut col)| {
            let xp = grid.x0 + ix as f64 * grid.dx;
            let mut acc = vec![Complex64::default(); grid.nz];
            for i in 0..nx {
                let xi = i as f64 * step;
                if (xi - xp).abs() > aperture {
                    continue;
                }
                match &table {
                    Some(t) => {
                        let off = ix.abs_diff(i);
                        let base = off * grid.nz;
                        for (iz, a) in acc.iter_mut().enumerate() {
                            let (pos, phasor) = t[base + iz];
                            if let Some(v) = sample(i, pos) {
                                *a += v * phasor;
                            }
                        }
                    }
                    None => {
                        for (iz, a) in acc.iter_mut().enumerate() {
                            let z = grid.z0 + iz as f64 * grid.dz;
                            let tau = 2.0 / c * (xi - xp).hypot(z);
                            if let Some(v) = sample(i, tau * fs) {
                                *a += v * Complex64::from_polar(1.0, omega_c * tau);
                            }
                        }
                    }
                }
            }
            col.iter_mut().zip(&acc).for_each(|(d, a)| *d = a.norm() as f32);
        });
    FocusedImage::new(data, grid.dx, grid.dz, grid.z0)
}

/// Shannon entropy (nats) of the L1-normalized magnitude image; lower is sharper.
pub fn image_entropy(img: &FocusedImage) -> Result<f64> {
    let total: f64 = img.data.iter().map(|v| *v as f64).sum();
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    Ok(img
        .data
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let p = *v as f64 / total;
            -p * p.ln()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarimetry::Material;
    use crate::scene::{synthesize_bscan, Channel, ScanConfig, Scene, Target};

    fn point_scan(x0: f64, z0: f64, eps: f64, len: f64) -> BScan {
        let wf = WaveformConfig::default();
        let scene = Scene::new(
            eps,
            50.0,
            vec![Target::of_material(x0, z0, Material::NonCorrodedRebar, eps).unwrap()],
        )
        .unwrap();
        synthesize_bscan(&scene, &ScanConfig::new(0.02, len), &wf, Channel::CoPol).unwrap()
    }

    fn delayed_rows(delays: &[f64], nt: usize) -> BScan {
        let wf = WaveformConfig::default();
        let omega = 2.0 * PI * wf.carrier();
        let data = Array2::from_shape_fn((delays.len(), nt), |(i, n)| {
            let d = n as f64 * wf.dt() - delays[i];
            (wf.envelope_at(d, wf.sigma()) * (omega * d).cos()) as f32
        });
        BScan::new(data, Channel::CoPol, 0.0005, 40.0, wf).unwrap()
    }

    fn argmax(row: impl Iterator<Item = f64>) -> usize {
        row.enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn compression_peaks_at_zero_lag() {
        // Whole pulses inside the record: the response peaks at the echo's
        // own sample, i.e. at zero lag of the replica.
        let wf = WaveformConfig::default();
        for d in [70usize, 101, 150] {
            let b = delayed_rows(&[d as f64 * wf.dt()], 256);
            let comp = range_compress(&b, &wf).unwrap();
            assert_eq!(argmax(comp.row(0).iter().map(|v| v.norm())), d);
        }
    }

    #[test]
    fn compression_peak_at_rounded_delay() {
        let b = delayed_rows(&[1e-9], 128);
        let comp = range_compress(&b, &b.waveform).unwrap();
        let expect = (1e-9 * b.sample_rate).round() as usize;
        assert_eq!(expect, 23);
        assert_eq!(argmax(comp.row(0).iter().map(|v| v.norm())), expect);
    }

    fn width_3db(env: &[f64]) -> f64 {
        let p = argmax(env.iter().copied());
        let level = env[p] / 2f64.sqrt();
        let cross = |mut i: usize, step: isize| -> f64 {
            loop {
                let j = (i as isize + step) as usize;
                if env[j] < level {
                    return i as f64 + step as f64 * (env[i] - level) / (env[i] - env[j]);
                }
                i = j;
            }
        };
        cross(p, 1) - cross(p, -1)
    }

    #[test]
    fn compression_narrows_the_pulse() {
        let b = delayed_rows(&[4e-9], 256);
        let wf = b.waveform;
        let raw: Vec<f64> = b.data.row(0).iter().map(|v| *v as f64).collect();
        let env: Vec<f64> = crate::waveform::demodulate(
            &crate::waveform::TimeSeries::new(0.0, wf.dt(), raw),
            &wf,
        )
        .values
        .iter()
        .map(|v| v.norm())
        .collect();
        let comp = range_compress(&b, &wf).unwrap();
        let compressed: Vec<f64> = comp.row(0).iter().map(|v| v.norm()).collect();
        let (before, after) = (width_3db(&env), width_3db(&compressed));
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn mismatched_rate_rejected() {
        let b = delayed_rows(&[0.0], 64);
        let other = WaveformConfig::new(1.0, 7.29e9, 1.5e9, 30e9).unwrap();
        assert!(matches!(
            range_compress(&b, &other),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn invalid_focus_parameters() {
        let b = delayed_rows(&[0.0; 4], 64);
        assert!(rma(&b, 0.5, 0.02).is_err());
        assert!(rma(&b, 9.0, 0.0).is_err());
        let g = ImageGrid::for_scan(&b, 9.0, 0.02);
        assert!(backproject(&b, 0.9, 0.02, &g).is_err());
        assert!(backproject(&b, 9.0, -1.0, &g).is_err());
    }

    #[test]
    fn zero_scan_focuses_to_zero() {
        let wf = WaveformConfig::default();
        let b = BScan::new(Array2::zeros((32, 64)), Channel::CoPol, 0.0005, 40.0, wf).unwrap();
        let img = rma(&b, 9.0, 0.02).unwrap();
        assert!(img.data.iter().all(|v| *v == 0.0));
        let bp = backproject(&b, 9.0, 0.02, &ImageGrid::for_scan(&b, 9.0, 0.02)).unwrap();
        assert!(bp.data.iter().all(|v| *v == 0.0));
        assert!(matches!(image_entropy(&img), Err(Error::AllZero)));
    }

    #[test]
    fn rma_focuses_point_target() {
        let b = point_scan(0.1, 0.05, 9.0, 0.2);
        let img = rma(&b, 9.0, 0.02).unwrap();
        let (x, z) = img.peak_position();
        let half_cell = wave_speed(9.0) / (4.0 * b.waveform.bandwidth());
        assert!((x - 0.1).abs() <= half_cell, "x {x}");
        assert!((z - 0.05).abs() <= half_cell, "z {z}");
        assert!((x - 0.1).abs() <= 2.0 * img.dx && (z - 0.05).abs() <= 2.0 * img.dz);
    }

    #[test]
    fn backprojection_matches_rma_peak() {
        let b = point_scan(0.06, 0.04, 9.0, 0.12);
        let img = rma(&b, 9.0, 0.02).unwrap();
        let grid = ImageGrid::for_scan(&b, 9.0, 0.02);
        let bp = backproject(&b, 9.0, 0.02, &grid).unwrap();
        let (a, c) = (img.peak(), bp.peak());
        assert!(a.0.abs_diff(c.0) <= 1 && a.1.abs_diff(c.1) <= 1, "{a:?} vs {c:?}");
        // general (unaligned) path agrees with the tabulated one
        let shifted = ImageGrid { x0: 1e-9, ..grid };
        let bp2 = backproject(&b, 9.0, 0.02, &shifted).unwrap();
        let d = bp2.peak();
        assert!(d.0.abs_diff(c.0) <= 1 && d.1.abs_diff(c.1) <= 1);
    }

    #[test]
    fn wrong_permittivity_defocuses() {
        let b = point_scan(0.1, 0.05, 9.0, 0.2);
        let good = image_entropy(&rma(&b, 9.0, 0.02).unwrap()).unwrap();
        let bad = image_entropy(&rma(&b, 7.0, 0.02).unwrap()).unwrap();
        assert!(bad > good, "{bad} <= {good}");
    }

    #[test]
    fn rma_is_shift_covariant() {
        let a = rma(&point_scan(0.08, 0.05, 9.0, 0.2), 9.0, 0.02).unwrap().peak();
        let b = rma(&point_scan(0.08 + 7.0 * 0.0005, 0.05, 9.0, 0.2), 9.0, 0.02)
            .unwrap()
            .peak();
        assert_eq!(b.0, a.0 + 7);
        assert_eq!(b.1, a.1);
    }

    #[test]
    fn entropy_reference_values() {
        let mut data = Array2::<f32>::zeros((4, 5));
        data[[2, 3]] = 7.0;
        let img = FocusedImage::new(data, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(image_entropy(&img).unwrap(), 0.0);
        let uniform = FocusedImage::new(Array2::from_elem((4, 5), 0.3), 1.0, 1.0, 0.0).unwrap();
        assert!((image_entropy(&uniform).unwrap() - 20f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn spectrum_axes() {
        let data = Array2::<Complex64>::zeros((8, 16));
        let s = SpectrumMatrix::from_baseband(&data, 0.001, 20e9, 7e9, (8, 32));
        assert_eq!(s.kx.len(), 8);
        assert_eq!(s.omega.len(), 32);
        assert!((s.omega[0] - 2.0 * PI * 7e9).abs() < 1e-3);
        assert!((s.kx[1] - 2.0 * PI / (8.0 * 0.001)).abs() < 1e-9);
    }
}
