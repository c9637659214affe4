//! Shared fixtures and brute-force oracles for the integration suites.
//!
//! The oracles here deliberately avoid the crate's own algorithms: component
//! labels come from iterated minimum propagation instead of a BFS, and
//! metrics are evaluated straight from their set definitions.

#![allow(dead_code)]

use petct_datakit::{PetCtCase, Tracer, Volume3, VolumeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn idx(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

pub fn random_binary(rng: &mut impl Rng, dims: [usize; 3], density: f64) -> Volume3 {
    let n = dims.iter().product();
    let data = (0..n).map(|_| if rng.random::<f64>() < density { 1.0 } else { 0.0 }).collect();
    Volume3::new(dims, [1.0; 3], data, VolumeKind::Binary).unwrap()
}

pub fn random_field(rng: &mut impl Rng, dims: [usize; 3], lo: f64, hi: f64, kind: VolumeKind) -> Volume3 {
    let n = dims.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Volume3::new(dims, [1.0; 3], data, kind).unwrap()
}

/// Neighbour offsets written out from the definition: 6 shares a face,
/// 18 a face or an edge, 26 anything.
pub fn neighbours(connectivity: u8) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                let keep = match connectivity {
                    6 => nonzero == 1,
                    18 => nonzero == 1 || nonzero == 2,
                    26 => nonzero >= 1,
                    _ => panic!("bad connectivity"),
                };
                if keep {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// For each foreground voxel, the smallest linear index in its component;
/// `usize::MAX` for background. Computed by propagating minima to a fixpoint.
pub fn min_index_labels(mask: &[bool], dims: [usize; 3], connectivity: u8) -> Vec<usize> {
    let offs = neighbours(connectivity);
    let mut lab: Vec<usize> = (0..mask.len()).map(|i| if mask[i] { i } else { usize::MAX }).collect();
    loop {
        let mut changed = false;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let i = idx(dims, x, y, z);
                    if !mask[i] {
                        continue;
                    }
                    for o in &offs {
                        let (nx, ny, nz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                        if nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] as i64 || ny >= dims[1] as i64 || nz >= dims[2] as i64 {
                            continue;
                        }
                        let j = idx(dims, nx as usize, ny as usize, nz as usize);
                        if mask[j] && lab[j] < lab[i] {
                            lab[i] = lab[j];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return lab;
        }
    }
}

pub fn mask_of(v: &Volume3) -> Vec<bool> {
    v.data().iter().map(|&x| x != 0.0).collect()
}

/// Total voxels of `source` components that share no voxel with `other`.
pub fn unmatched_voxels_oracle(source: &[bool], other: &[bool], dims: [usize; 3], connectivity: u8) -> usize {
    let lab = min_index_labels(source, dims, connectivity);
    let mut total = 0;
    for root in 0..source.len() {
        if !source[root] || lab[root] != root {
            continue;
        }
        let members: Vec<usize> = (0..source.len()).filter(|&i| lab[i] == root).collect();
        if !members.iter().any(|&i| other[i]) {
            total += members.len();
        }
    }
    total
}

pub fn dice_oracle(p: &[bool], g: &[bool]) -> f64 {
    let inter = p.iter().zip(g).filter(|(a, b)| **a && **b).count() as f64;
    let sp = p.iter().filter(|a| **a).count() as f64;
    let sg = g.iter().filter(|a| **a).count() as f64;
    if sp + sg == 0.0 {
        1.0
    } else {
        2.0 * inter / (sp + sg)
    }
}

/// Output of an integer shift by `s` voxels (out[q] = in[q - s]), or `None`
/// where the source falls outside the grid.
pub fn shifted_index_oracle(v: &Volume3, s: [i64; 3]) -> Vec<Option<f64>> {
    let d = v.dims();
    let mut out = Vec::with_capacity(v.len());
    for z in 0..d[2] as i64 {
        for y in 0..d[1] as i64 {
            for x in 0..d[0] as i64 {
                let (sx, sy, sz) = (x - s[0], y - s[1], z - s[2]);
                let inside = sx >= 0 && sy >= 0 && sz >= 0 && sx < d[0] as i64 && sy < d[1] as i64 && sz < d[2] as i64;
                out.push(inside.then(|| v.get(sx as usize, sy as usize, sz as usize)));
            }
        }
    }
    out
}

/// CT with a gradient, PET with a few hot spots, and a label over the hottest ones.
pub fn phantom_case(case_id: &str, tracer: Tracer, dims: [usize; 3], seed: u64) -> PetCtCase {
    let mut r = rng(seed);
    let n: usize = dims.iter().product();
    let ct: Vec<f64> = (0..n).map(|i| -800.0 + (i % 97) as f64 * 15.0 + r.random_range(-5.0..5.0)).collect();
    let mut pet: Vec<f64> = (0..n).map(|_| r.random_range(0.2..1.5)).collect();
    let mut label = vec![0.0; n];
    for _ in 0..3 {
        let c = r.random_range(0..n);
        pet[c] = 12.0;
        label[c] = 1.0;
    }
    PetCtCase::new(
        case_id,
        tracer,
        Volume3::new(dims, [2.0, 2.0, 3.0], ct, VolumeKind::Hu).unwrap(),
        Volume3::new(dims, [2.0, 2.0, 3.0], pet, VolumeKind::Suv).unwrap(),
        Some(Volume3::new(dims, [2.0, 2.0, 3.0], label, VolumeKind::Binary).unwrap()),
    )
    .unwrap()
}

/// Two-sided 99% normal-approximation interval for a binomial proportion.
pub fn binomial_ci99(p: f64, n: usize) -> (f64, f64) {
    let half = 2.5758 * (p * (1.0 - p) / n as f64).sqrt();
    (p - half, p + half)
}
