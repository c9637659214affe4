//! Voxelwise and smoothing intensity transforms.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::volume::Volume3;

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Min-max normalizes, raises to `gamma`, and maps back to the original range.
/// A constant volume has no range to normalize and is returned unchanged.
pub fn gamma_transform(vol: &Volume3, gamma: f64) -> Result<Volume3> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let (lo, hi) = min_max(vol.data());
    let range = hi - lo;
    if !range.is_finite() || range <= 0.0 {
        return Ok(vol.clone());
    }
    vol.map(|v| ((v - lo) / range).powf(gamma) * range + lo)
}

/// Gamma applied to the negated image, then negated back.
pub fn inverted_gamma_transform(vol: &Volume3, gamma: f64) -> Result<Volume3> {
    let negated = vol.map(|v| -v)?;
    gamma_transform(&negated, gamma)?.map(|v| -v)
}

/// Adds independent `N(0, sigma²)` noise to every voxel.
pub fn gaussian_noise<R: Rng + ?Sized>(vol: &Volume3, sigma: f64, rng: &mut R) -> Result<Volume3> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(vol.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    vol.with_data(vol.data().iter().map(|&v| v + normal.sample(rng)).collect())
}

pub fn brightness(vol: &Volume3, multiplier: f64) -> Result<Volume3> {
    vol.map(|v| v * multiplier)
}

/// Standard deviation of all voxel values.
pub fn intensity_std(vol: &Volume3) -> f64 {
    let n = vol.len() as f64;
    let mean = vol.data().iter().sum::<f64>() / n;
    (vol.data().iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable Gaussian smoothing with `sigma` in voxels; edges are clamped.
pub fn gaussian_blur(vol: &Volume3, sigma: f64) -> Result<Volume3> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(vol.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let dims = vol.dims();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut cur = vol.data().to_vec();

    for axis in 0..3 {
        let n = dims[axis] as isize;
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        let mut next = vec![0.0; cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let pos = ((idx / stride) % dims[axis]) as isize;
            let base = idx - pos as usize * stride;
            *out = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let p = (pos + k as isize - radius).clamp(0, n - 1) as usize;
                    w * cur[base + p * stride]
                })
                .sum();
        }
        cur = next;
    }
    vol.with_data(cur)
}
