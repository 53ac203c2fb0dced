use wallscan::FocusedImage;

/// Binary PGM with depth down the rows and probe position across, mapped
/// linearly from [0, max] to [0, 255].
pub fn pgm(img: &FocusedImage) -> Vec<u8> {
    let (nx, nz) = img.data.dim();
    let max = img.data.iter().fold(0f32, |a, v| a.max(*v));
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = format!("P5\n{nx} {nz}\n255\n").into_bytes();
    out.reserve(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            out.push((img.data[[ix, iz]] * scale).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Empirical CDF rows `(error, fraction <= error)` of `errors`.
pub fn cdf(mut errors: Vec<f64>) -> Vec<(f64, f64)> {
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, (i + 1) as f64 / n))
        .collect()
}

pub fn csv_field(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| format!("{x:e}")).unwrap_or_default()
}
