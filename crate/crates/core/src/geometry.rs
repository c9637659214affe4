//! Rigid resampling and mirroring in voxel space.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::volume::Volume3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// A subset of `{x, y, z}`, used for mirror transforms.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct AxisSet(u8);

impl AxisSet {
    pub const EMPTY: AxisSet = AxisSet(0);
    pub const X: AxisSet = AxisSet(1);
    pub const Y: AxisSet = AxisSet(2);
    pub const Z: AxisSet = AxisSet(4);
    pub const XY: AxisSet = AxisSet(3);
    pub const XZ: AxisSet = AxisSet(5);
    pub const YZ: AxisSet = AxisSet(6);
    pub const ALL: AxisSet = AxisSet(7);

    pub fn from_bits(bits: u8) -> Option<AxisSet> {
        (bits <= 7).then_some(AxisSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn of(axes: &[Axis]) -> AxisSet {
        axes.iter().fold(AxisSet::EMPTY, |s, &a| s.with(a))
    }

    pub fn with(self, axis: Axis) -> AxisSet {
        AxisSet(self.0 | (1 << axis.index()))
    }

    pub fn contains(self, axis: Axis) -> bool {
        self.0 & (1 << axis.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn axes(self) -> Vec<Axis> {
        Axis::ALL.into_iter().filter(|&a| self.contains(a)).collect()
    }
}

impl std::ops::BitOr for AxisSet {
    type Output = AxisSet;

    fn bitor(self, rhs: AxisSet) -> AxisSet {
        AxisSet(self.0 | rhs.0)
    }
}

impl fmt::Debug for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .axes()
            .into_iter()
            .map(|a| match a {
                Axis::X => "x",
                Axis::Y => "y",
                Axis::Z => "z",
            })
            .collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

impl Serialize for AxisSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.axes().serialize(s)
    }
}

impl<'de> Deserialize<'de> for AxisSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(AxisSet::of(&Vec::<Axis>::deserialize(d)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Interp {
    Nearest,
    Trilinear,
}

/// Rotation about one axis followed by a translation, in voxel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidParams {
    pub rotation_deg: f64,
    #[serde(default = "default_rotation_axis")]
    pub rotation_axis: Axis,
    pub shift_voxels: [f64; 3],
}

fn default_rotation_axis() -> Axis {
    Axis::Z
}

impl Default for RigidParams {
    fn default() -> Self {
        RigidParams::identity()
    }
}

impl RigidParams {
    pub fn identity() -> Self {
        RigidParams {
            rotation_deg: 0.0,
            rotation_axis: Axis::Z,
            shift_voxels: [0.0; 3],
        }
    }

    pub fn rotation(deg: f64) -> Self {
        RigidParams {
            rotation_deg: deg,
            ..Self::identity()
        }
    }

    pub fn shift(shift: [f64; 3]) -> Self {
        RigidParams {
            shift_voxels: shift,
            ..Self::identity()
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.shift_voxels.iter().all(|&s| s == 0.0)
    }
}

pub(crate) type Mat3 = [[f64; 3]; 3];

/// Rotation matrix by `deg` about `axis` (right-handed).
pub(crate) fn rotation_matrix(axis: Axis, deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    match axis {
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
    }
}

#[inline]
fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Continuous voxel coordinate of the volume center.
pub fn volume_center(dims: [usize; 3]) -> [f64; 3] {
    [
        (dims[0] as f64 - 1.0) / 2.0,
        (dims[1] as f64 - 1.0) / 2.0,
        (dims[2] as f64 - 1.0) / 2.0,
    ]
}

/// Rotates about the volume center, then translates.
///
/// The output voxel `q` takes the input value at
/// `R⁻¹ (q − c − t) + c`; samples falling outside the grid read `pad_value`.
pub fn apply_rigid(vol: &Volume3, params: &RigidParams, interp: Interp, pad_value: f64) -> Volume3 {
    if params.is_identity() {
        return vol.clone();
    }
    let inverse = rotation_matrix(params.rotation_axis, -params.rotation_deg);
    resample_inverse(vol, &inverse, params.shift_voxels, interp, pad_value)
}

/// Pull-back resampling: output voxel `q` reads input at `inv (q − c − t) + c`.
pub(crate) fn resample_inverse(
    vol: &Volume3,
    inv: &Mat3,
    shift: [f64; 3],
    interp: Interp,
    pad_value: f64,
) -> Volume3 {
    let dims = vol.dims();
    let [nx, ny, _] = dims;
    let c = volume_center(dims);
    let src = vol.data();
    let mut out = vec![0.0; vol.len()];

    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slab)| {
        for y in 0..ny {
            for x in 0..nx {
                let q = [
                    x as f64 - c[0] - shift[0],
                    y as f64 - c[1] - shift[1],
                    z as f64 - c[2] - shift[2],
                ];
                let r = mat_vec(inv, q);
                let p = [r[0] + c[0], r[1] + c[1], r[2] + c[2]];
                slab[x + nx * y] = match interp {
                    Interp::Nearest => sample_nearest(src, dims, p),
                    Interp::Trilinear => sample_trilinear(src, dims, p),
                }
                .unwrap_or(pad_value);
            }
        }
    });

    vol.with_data_unchecked(out)
}

fn sample_nearest(src: &[f64], dims: [usize; 3], p: [f64; 3]) -> Option<f64> {
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let r = p[a].round();
        if !(r >= 0.0 && r <= (dims[a] - 1) as f64) {
            return None;
        }
        idx[a] = r as usize;
    }
    Some(src[idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])])
}

/// Returns `(i0, i1, frac)` for one axis, or `None` outside `[0, n-1]`.
#[inline]
fn axis_weights(p: f64, n: usize) -> Option<(usize, usize, f64)> {
    const EPS: f64 = 1e-9;
    let max = (n - 1) as f64;
    if !(p >= -EPS && p <= max + EPS) {
        return None;
    }
    let p = p.clamp(0.0, max);
    let i0 = (p.floor() as usize).min(n.saturating_sub(2));
    let i1 = (i0 + 1).min(n - 1);
    Some((i0, i1, p - i0 as f64))
}

fn sample_trilinear(src: &[f64], dims: [usize; 3], p: [f64; 3]) -> Option<f64> {
    let (x0, x1, fx) = axis_weights(p[0], dims[0])?;
    let (y0, y1, fy) = axis_weights(p[1], dims[1])?;
    let (z0, z1, fz) = axis_weights(p[2], dims[2])?;
    let at = |x: usize, y: usize, z: usize| src[x + dims[0] * (y + dims[1] * z)];
    let lerp = |a: f64, b: f64, t: f64| a * (1.0 - t) + b * t;

    let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), fx);
    let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), fx);
    let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), fx);
    let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), fx);
    let c0 = lerp(c00, c10, fy);
    let c1 = lerp(c01, c11, fy);
    Some(lerp(c0, c1, fz))
}

/// Flips the volume along every axis in `axes`.
pub fn mirror(vol: &Volume3, axes: AxisSet) -> Volume3 {
    if axes.is_empty() {
        return vol.clone();
    }
    let [nx, ny, nz] = vol.dims();
    let fx = axes.contains(Axis::X);
    let fy = axes.contains(Axis::Y);
    let fz = axes.contains(Axis::Z);
    let src = vol.data();
    let mut out = Vec::with_capacity(src.len());
    for z in 0..nz {
        let sz = if fz { nz - 1 - z } else { z };
        for y in 0..ny {
            let sy = if fy { ny - 1 - y } else { y };
            let row = nx * (sy + ny * sz);
            if fx {
                out.extend(src[row..row + nx].iter().rev());
            } else {
                out.extend_from_slice(&src[row..row + nx]);
            }
        }
    }
    vol.with_data_unchecked(out)
}
