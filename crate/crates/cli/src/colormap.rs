//! Fixed perceptually uniform colormap for PLY exports.
//!
//! Viridis, sampled at nine evenly spaced anchors from `#440154` (t = 0,
//! low) to `#fde725` (t = 1, high) and interpolated linearly in sRGB.

const VIRIDIS: [[u8; 3]; 9] = [
    [0x44, 0x01, 0x54],
    [0x47, 0x2d, 0x7b],
    [0x3b, 0x52, 0x8b],
    [0x2c, 0x72, 0x8e],
    [0x21, 0x91, 0x8c],
    [0x28, 0xae, 0x80],
    [0x5e, 0xc9, 0x62],
    [0xad, 0xdc, 0x30],
    [0xfd, 0xe7, 0x25],
];

/// Color of `t ∈ [0, 1]`; values outside are clamped, NaN maps to the low end.
pub fn viridis(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let w = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    std::array::from_fn(|c| (a[c] as f64 + w * (b[c] as f64 - a[c] as f64)).round() as u8)
}

/// Min–max normalization to `[0, 1]`; a (numerically) constant input maps
/// to 0.5 everywhere.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12 * hi.abs().max(lo.abs())) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn colors(values: &[f64]) -> Vec<[u8; 3]> {
    normalize(values).into_iter().map(viridis).collect()
}
