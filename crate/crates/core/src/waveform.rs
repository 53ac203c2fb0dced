//! Transmitted IR-UWB pulse: Gaussian baseband, carrier modulation and
//! quadrature demodulation back to complex baseband.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CARRIER_HZ: f64 = 7.29e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 1.5e9;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 23.328e9;

/// Minimum demodulation low-pass length.
pub const LOWPASS_TAPS: usize = 129;
/// Taps per unit of `f_s / B`. Keeps the Hamming transition band (about
/// `3.3 f_s / taps`) well inside the cutoff when the pulse is narrow
/// relative to the sample rate; the default waveform still gets 129.
pub const LOWPASS_TAPS_PER_RATIO: f64 = 8.25;
/// Demodulation low-pass cutoff as a multiple of the pulse bandwidth. At
/// exactly `B` the filter's transition band eats into the envelope tails
/// (about 2% error at 10% of peak); `4/3 B` keeps the round trip under 1%.
pub const LOWPASS_CUTOFF_FACTOR: f64 = 4.0 / 3.0;

/// Gaussian pulse and carrier parameters.
///
/// `sigma` is tied to `bandwidth` through the two-sided -10 dB width of the
/// pulse's power spectrum: `sigma = sqrt(ln 10) / (pi * bandwidth)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWaveform")]
pub struct WaveformConfig {
    amplitude: f64,
    sigma_s: f64,
    carrier_hz: f64,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWaveform {
    amplitude: f64,
    #[serde(default)]
    sigma_s: Option<f64>,
    carrier_hz: f64,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
}

impl TryFrom<RawWaveform> for WaveformConfig {
    type Error = Error;

    fn try_from(raw: RawWaveform) -> Result<Self> {
        let cfg = WaveformConfig::new(
            raw.amplitude,
            raw.carrier_hz,
            raw.bandwidth_hz,
            raw.sample_rate_hz,
        )?;
        if let Some(sigma) = raw.sigma_s {
            if !((sigma - cfg.sigma_s).abs() <= 1e-9 * cfg.sigma_s) {
                return Err(Error::invalid(
                    "sigma_s",
                    format!("{sigma:e} inconsistent with bandwidth (expected {:e})", cfg.sigma_s),
                ));
            }
        }
        Ok(cfg)
    }
}

impl Default for WaveformConfig {
    fn default() -> Self {
        WaveformConfig::new(
            1.0,
            DEFAULT_CARRIER_HZ,
            DEFAULT_BANDWIDTH_HZ,
            DEFAULT_SAMPLE_RATE_HZ,
        )
        .expect("default waveform is valid")
    }
}

/// Pulse standard deviation for a given two-sided -10 dB power bandwidth.
pub fn sigma_for_bandwidth(bandwidth_hz: f64) -> f64 {
    LN_10.sqrt() / (PI * bandwidth_hz)
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

impl WaveformConfig {
    pub fn new(amplitude: f64, carrier_hz: f64, bandwidth_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        positive("amplitude", amplitude)?;
        positive("carrier_hz", carrier_hz)?;
        positive("bandwidth_hz", bandwidth_hz)?;
        positive("sample_rate_hz", sample_rate_hz)?;
        let highest = carrier_hz + bandwidth_hz / 2.0;
        if sample_rate_hz <= 2.0 * highest {
            return Err(Error::Nyquist {
                sample_rate: sample_rate_hz,
                highest,
            });
        }
        Ok(WaveformConfig {
            amplitude,
            sigma_s: sigma_for_bandwidth(bandwidth_hz),
            carrier_hz,
            bandwidth_hz,
            sample_rate_hz,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_s
    }

    pub fn carrier(&self) -> f64 {
        self.carrier_hz
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Highest frequency that the sampling must support.
    pub fn highest_frequency(&self) -> f64 {
        self.carrier_hz + self.bandwidth_hz / 2.0
    }

    /// Same waveform, different amplitude.
    pub fn with_amplitude(self, amplitude: f64) -> Result<Self> {
        WaveformConfig::new(amplitude, self.carrier_hz, self.bandwidth_hz, self.sample_rate_hz)
    }

    /// Baseband envelope with an arbitrary standard deviation, evaluated at `t`.
    pub(crate) fn envelope_at(&self, t: f64, sigma: f64) -> f64 {
        self.amplitude * (-t * t / (2.0 * sigma * sigma)).exp()
    }

    /// Half-amplitude (-3 dB) full width of the baseband envelope, in seconds.
    pub fn envelope_width_3db(&self) -> f64 {
        2.0 * self.sigma_s * std::f64::consts::LN_2.sqrt()
    }
}

/// Uniformly sampled sequence with the time of its first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub start: f64,
    pub dt: f64,
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(start: f64, dt: f64, values: Vec<T>) -> Self {
        TimeSeries { start, dt, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start + index as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.time(i))
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Symmetric time axis `-half..=half` samples around `t = 0` at the waveform rate.
pub fn centered_axis(cfg: &WaveformConfig, half: usize) -> Vec<f64> {
    let dt = cfg.dt();
    (0..=2 * half)
        .map(|i| (i as f64 - half as f64) * dt)
        .collect()
}

/// Baseband pulse `s(t) = a * exp(-t^2 / (2 sigma^2))` sampled on `t_axis`.
///
/// The axis must be uniform with spacing `1 / f_s`.
pub fn gaussian_pulse(cfg: &WaveformConfig, t_axis: &[f64]) -> Result<TimeSeries<f64>> {
    let dt = cfg.dt();
    let tol = 1e-6 * dt;
    let uniform = t_axis
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= tol);
    if !uniform || t_axis.is_empty() {
        return Err(Error::NonUniformGrid { expected_dt: dt });
    }
    let start = t_axis[0];
    // Evaluate on the ideal grid so that t = 0 lands exactly on a sample.
    let values = (0..t_axis.len())
        .map(|i| cfg.envelope_at(start + i as f64 * dt, cfg.sigma_s))
        .collect();
    Ok(TimeSeries::new(start, dt, values))
}

fn check_nyquist(rate: f64, cfg: &WaveformConfig) -> Result<()> {
    let highest = cfg.highest_frequency();
    if !(rate > 2.0 * highest) {
        return Err(Error::Nyquist {
            sample_rate: rate,
            highest,
        });
    }
    Ok(())
}

/// Carrier modulation `x(t) = s(t) cos(2 pi f_c t)`.
pub fn modulate(s: &TimeSeries<f64>, cfg: &WaveformConfig) -> Result<TimeSeries<f64>> {
    check_nyquist(s.sample_rate(), cfg)?;
    let w = 2.0 * PI * cfg.carrier_hz;
    let values = s
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * (w * s.time(i)).cos())
        .collect();
    Ok(TimeSeries::new(s.start, s.dt, values))
}

/// Windowed-sinc (Hamming) low-pass FIR with unity DC gain.
#[derive(Debug, Clone)]
pub struct LowPass {
    taps: Vec<f64>,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64, ntaps: usize) -> Self {
        assert!(ntaps % 2 == 1, "odd tap count keeps the filter zero-phase");
        let fc = cutoff_hz / sample_rate_hz;
        let mid = (ntaps / 2) as f64;
        let mut taps: Vec<f64> = (0..ntaps)
            .map(|n| {
                let k = n as f64 - mid;
                let sinc = if k == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * k).sin() / (PI * k)
                };
                let hamming = 0.54 - 0.46 * (2.0 * PI * n as f64 / (ntaps - 1) as f64).cos();
                sinc * hamming
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        LowPass { taps }
    }

    pub fn for_waveform(cfg: &WaveformConfig, sample_rate_hz: f64) -> Self {
        let wanted = (LOWPASS_TAPS_PER_RATIO * sample_rate_hz / cfg.bandwidth_hz).ceil() as usize;
        let ntaps = wanted.max(LOWPASS_TAPS) | 1;
        LowPass::new(LOWPASS_CUTOFF_FACTOR * cfg.bandwidth_hz, sample_rate_hz, ntaps)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Zero-phase ("same"-length) convolution with zero extension at the edges.
    pub fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        let n = input.len();
        let half = self.taps.len() / 2;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut acc = Complex64::default();
            for j in lo..=hi {
                acc += input[j] * self.taps[j + half - i];
            }
            *o = acc;
        }
    }
}

/// Mixes `values` (sampled at `start + i*dt`) down by the carrier, scaled by 2.
pub(crate) fn mix_down(values: &[f64], start: f64, dt: f64, carrier_hz: f64) -> Vec<Complex64> {
    let w = 2.0 * PI * carrier_hz;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| Complex64::from_polar(2.0 * v, -w * (start + i as f64 * dt)))
        .collect()
}

/// Quadrature demodulation to complex baseband.
///
/// Multiplies by `2 exp(-j 2 pi f_c t)` and low-passes with a 129-tap
/// Hamming-windowed sinc at cutoff `4/3 B`, so `|demodulate(modulate(s))| ~ s`.
pub fn demodulate(x: &TimeSeries<f64>, cfg: &WaveformConfig) -> TimeSeries<Complex64> {
    let mixed = mix_down(&x.values, x.start, x.dt, cfg.carrier_hz);
    let lp = LowPass::for_waveform(cfg, x.sample_rate());
    let mut out = vec![Complex64::default(); mixed.len()];
    lp.apply(&mixed, &mut out);
    TimeSeries::new(x.start, x.dt, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::{fft, fftfreq};

    fn cfg() -> WaveformConfig {
        WaveformConfig::default()
    }

    #[test]
    fn sigma_for_paper_bandwidth() {
        let c = cfg();
        assert!((c.sigma() - 0.3220e-9).abs() < 0.00005e-9, "{}", c.sigma());
    }

    #[test]
    fn pulse_peak_and_sigma_point() {
        let c = cfg();
        let s = gaussian_pulse(&c, &centered_axis(&c, 20)).unwrap();
        assert_eq!(s.values[20], c.amplitude());
        // Off-grid evaluation at t = sigma.
        let at_sigma = c.envelope_at(c.sigma(), c.sigma());
        assert!((at_sigma - 0.606_530_659_7).abs() < 1e-9);
    }

    #[test]
    fn non_uniform_axis_rejected() {
        let c = cfg();
        let mut axis = centered_axis(&c, 5);
        axis[3] += 0.1 * c.dt();
        assert!(matches!(
            gaussian_pulse(&c, &axis),
            Err(Error::NonUniformGrid { .. })
        ));
        let wrong_rate: Vec<f64> = (0..10).map(|i| i as f64 * 2.0 * c.dt()).collect();
        assert!(gaussian_pulse(&c, &wrong_rate).is_err());
    }

    #[test]
    fn nyquist_enforced() {
        assert!(matches!(
            WaveformConfig::new(1.0, 7.29e9, 1.5e9, 16.0e9),
            Err(Error::Nyquist { .. })
        ));
        let c = cfg();
        let slow = TimeSeries::new(0.0, 1.0 / 10e9, vec![1.0; 8]);
        assert!(matches!(modulate(&slow, &c), Err(Error::Nyquist { .. })));
    }

    #[test]
    fn minus_10db_points_at_half_bandwidth() {
        // Oracle: FFT of a finely zero-padded pulse, linear search for the
        // -10 dB crossing of the power spectrum.
        let c = cfg();
        let n = 1 << 16;
        let half = 200;
        let s = gaussian_pulse(&c, &centered_axis(&c, half)).unwrap();
        let mut buf = vec![Complex64::default(); n];
        for (i, v) in s.values.iter().enumerate() {
            let idx = (i as isize - half as isize).rem_euclid(n as isize) as usize;
            buf[idx] = Complex64::new(*v, 0.0);
        }
        fft(&mut buf);
        let freqs = fftfreq(n, c.dt());
        let p0 = buf[0].norm_sqr();
        let bin = freqs[1];
        let cross = (1..n / 2)
            .find(|&k| buf[k].norm_sqr() < 0.1 * p0)
            .map(|k| freqs[k])
            .unwrap();
        assert!((cross - 0.75e9).abs() <= bin, "{cross} vs 0.75 GHz, bin {bin}");
        // Negative side mirrors it.
        let neg = (1..n / 2)
            .find(|&k| buf[n - k].norm_sqr() < 0.1 * p0)
            .map(|k| freqs[n - k])
            .unwrap();
        assert!((neg + 0.75e9).abs() <= bin);
    }

    #[test]
    fn modulation_nulls_and_peak() {
        let c = WaveformConfig::new(1.0, 7.29e9, 1.5e9, 4.0 * 7.29e9).unwrap();
        let s = gaussian_pulse(&c, &centered_axis(&c, 40)).unwrap();
        let x = modulate(&s, &c).unwrap();
        assert_eq!(x.values[40], 1.0);
        // quarter carrier period is exactly one sample at f_s = 4 f_c
        assert!(x.values[41].abs() < 1e-12);
    }

    #[test]
    fn modulated_spectrum_peaks_at_carrier() {
        let c = cfg();
        let n = 4096;
        let s = gaussian_pulse(&c, &centered_axis(&c, 300)).unwrap();
        let x = modulate(&s, &c).unwrap();
        let mut buf: Vec<Complex64> = x.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        buf.resize(n, Complex64::default());
        fft(&mut buf);
        let freqs = fftfreq(n, c.dt());
        let peak = (0..n / 2)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        let nearest = (0..n / 2)
            .min_by(|&a, &b| (freqs[a] - 7.29e9).abs().total_cmp(&(freqs[b] - 7.29e9).abs()))
            .unwrap();
        assert!((peak as isize - nearest as isize).abs() <= 1);
        let peak_neg = (n / 2..n)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        assert!((freqs[peak_neg] + 7.29e9).abs() <= 1.5 * freqs[1]);
        // conjugate symmetry of a real input
        for k in 1..n / 2 {
            assert!((buf[k] - buf[n - k].conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn demodulate_zero_is_zero() {
        let c = cfg();
        let x = TimeSeries::new(0.0, c.dt(), vec![0.0; 64]);
        assert!(demodulate(&x, &c).values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn demodulate_pure_carrier_is_one() {
        let c = cfg();
        let n = 600;
        let x = TimeSeries::new(
            0.0,
            c.dt(),
            (0..n)
                .map(|i| (2.0 * PI * c.carrier() * i as f64 * c.dt()).cos())
                .collect(),
        );
        let y = demodulate(&x, &c);
        for v in &y.values[100..n - 100] {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-2, "{v}");
        }
    }

    #[test]
    fn envelope_roundtrip() {
        let c = cfg();
        let s = gaussian_pulse(&c, &centered_axis(&c, 200)).unwrap();
        let y = demodulate(&modulate(&s, &c).unwrap(), &c);
        for (a, b) in s.values.iter().zip(&y.values) {
            if *a > 0.1 * c.amplitude() {
                assert!((b.norm() - a).abs() / a < 1e-2);
            }
        }
    }

    #[test]
    fn default_waveform_uses_minimum_taps() {
        assert_eq!(LowPass::for_waveform(&cfg(), DEFAULT_SAMPLE_RATE_HZ).taps().len(), LOWPASS_TAPS);
        let narrow = WaveformConfig::new(1.0, 7.29e9, 0.5e9, 40e9).unwrap();
        assert_eq!(LowPass::for_waveform(&narrow, 40e9).taps().len(), 661);
    }

    #[test]
    fn lowpass_has_unity_dc_and_symmetric_taps() {
        let lp = LowPass::new(1.5e9, DEFAULT_SAMPLE_RATE_HZ, LOWPASS_TAPS);
        assert_eq!(lp.taps().len(), 129);
        assert!((lp.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..64 {
            assert!((lp.taps()[k] - lp.taps()[128 - k]).abs() < 1e-15);
        }
    }

    #[test]
    fn json_roundtrip_and_sigma_consistency() {
        let c = cfg();
        let text = serde_json::to_string(&c).unwrap();
        let back: WaveformConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
        let bad = text.replace(&format!("{:?}", c.sigma()), "1e-9");
        assert!(serde_json::from_str::<WaveformConfig>(&bad).is_err());
    }
}
