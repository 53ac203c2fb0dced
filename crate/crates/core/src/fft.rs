//! Thin helpers over `rustfft` for the 1-D and 2-D transforms used by the
//! focusing and spectral code.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Sample frequencies for an `n`-point transform, numpy `fftfreq` ordering.
pub fn fftfreq(n: usize, d: f64) -> Vec<f64> {
    let scale = 1.0 / (n as f64 * d);
    (0..n)
        .map(|k| {
            let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
            k * scale
        })
        .collect()
}

pub fn fft(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Normalized inverse transform.
pub fn ifft(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

fn transform_axis(data: &mut Array2<Complex64>, axis: Axis, inverse: bool) {
    let n = data.len_of(axis);
    if n == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    for mut lane in data.lanes_mut(axis) {
        line.iter_mut().zip(lane.iter()).for_each(|(d, s)| *d = *s);
        plan.process_with_scratch(&mut line, &mut scratch);
        lane.iter_mut()
            .zip(line.iter())
            .for_each(|(d, s)| *d = *s * scale);
    }
}

pub fn fft2(data: &mut Array2<Complex64>) {
    transform_axis(data, Axis(1), false);
    transform_axis(data, Axis(0), false);
}

pub fn ifft2(data: &mut Array2<Complex64>) {
    transform_axis(data, Axis(1), true);
    transform_axis(data, Axis(0), true);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fftfreq_matches_numpy_layout() {
        assert_eq!(fftfreq(4, 1.0), vec![0.0, 0.25, -0.5, -0.25]);
        assert_eq!(fftfreq(5, 0.5), vec![0.0, 0.4, 0.8, -0.8, -0.4]);
    }

    #[test]
    fn fft2_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let orig = Array2::from_shape_fn((37, 64), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut work = orig.clone();
        fft2(&mut work);
        let energy_in: f64 = orig.iter().map(|v| v.norm_sqr()).sum();
        let energy_freq: f64 = work.iter().map(|v| v.norm_sqr()).sum();
        // Parseval with unnormalized forward transform.
        assert!((energy_freq / (37.0 * 64.0) - energy_in).abs() / energy_in < 1e-12);
        ifft2(&mut work);
        let err: f64 = orig
            .iter()
            .zip(work.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((err / energy_in).sqrt() < 1e-9);
    }
}
