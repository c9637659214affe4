//! Declarative augmentation schemes applied on the fly with seeded randomness.
//!
//! A scheme is an ordered list of [`TransformSpec`]s. Each transform fires
//! independently with its probability. Spatial transforms (`AFFINE`,
//! `MIRROR`) move CT, PET and label together; intensity transforms touch CT
//! and PET only, with separate random draws per modality; `MISALIGN` moves
//! the CT alone.

mod intensity;

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use intensity::{
    brightness, gamma_transform, gaussian_blur, gaussian_noise, intensity_std,
    inverted_gamma_transform,
};

use crate::case::PetCtCase;
use crate::error::{Error, Result};
use crate::geometry::{resample_inverse, rotation_matrix, Axis, AxisSet, Interp};
use crate::misalign::{apply_misalignment, sample_misalignment, MisalignConfig};
use crate::rng::{substream, Modality};
use crate::volume::{Volume3, VolumeKind};

const BASELINE_JSON: &str = include_str!("../../presets/baseline.json");

/// Factor applied to affine amplitudes by [`subtle_scheme`].
pub const SUBTLE_FACTOR: f64 = 0.5;

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> std::result::Result<Range, String> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Range { lo, hi })
        } else {
            Err(format!("invalid range [{lo}, {hi}]"))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Shrinks or widens the range around `center` by `factor`.
    pub fn scaled_about(&self, center: f64, factor: f64) -> Range {
        Range {
            lo: center + (self.lo - center) * factor,
            hi: center + (self.hi - center) * factor,
        }
    }
}

impl TryFrom<[f64; 2]> for Range {
    type Error = String;

    fn try_from([lo, hi]: [f64; 2]) -> std::result::Result<Self, String> {
        Range::new(lo, hi)
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> [f64; 2] {
        [r.lo, r.hi]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformKind {
    Affine,
    GaussianNoise,
    GaussianBlur,
    Brightness,
    Gamma,
    GammaInverted,
    Mirror,
    Misalign,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Affine => "AFFINE",
            TransformKind::GaussianNoise => "GAUSSIAN_NOISE",
            TransformKind::GaussianBlur => "GAUSSIAN_BLUR",
            TransformKind::Brightness => "BRIGHTNESS",
            TransformKind::Gamma => "GAMMA",
            TransformKind::GammaInverted => "GAMMA_INVERTED",
            TransformKind::Mirror => "MIRROR",
            TransformKind::Misalign => "MISALIGN",
        }
    }

    pub fn is_intensity(self) -> bool {
        matches!(
            self,
            TransformKind::GaussianNoise
                | TransformKind::GaussianBlur
                | TransformKind::Brightness
                | TransformKind::Gamma
                | TransformKind::GammaInverted
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rotation about one axis combined with isotropic scaling, about the volume center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineAmplitude {
    pub rotation_deg: Range,
    pub scale: Range,
    #[serde(default = "z_axis")]
    pub rotation_axis: Axis,
    /// Interpolation for CT and PET. Labels always use nearest neighbour.
    #[serde(default = "trilinear", skip_serializing_if = "is_trilinear")]
    pub interp: Interp,
}

fn z_axis() -> Axis {
    Axis::Z
}

fn trilinear() -> Interp {
    Interp::Trilinear
}

fn is_trilinear(i: &Interp) -> bool {
    *i == Interp::Trilinear
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAmplitude {
    /// Noise SD as a fraction of the volume's intensity SD.
    pub sigma_rel: Range,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlurAmplitude {
    pub sigma_voxels: Range,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrightnessAmplitude {
    pub multiplier: Range,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaAmplitude {
    pub gamma: Range,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorAmplitude {
    pub axes: AxisSet,
    /// Independent flip probability of each listed axis.
    pub p_axis: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitude {
    Affine(AffineAmplitude),
    GaussianNoise(NoiseAmplitude),
    GaussianBlur(BlurAmplitude),
    Brightness(BrightnessAmplitude),
    Gamma(GammaAmplitude),
    GammaInverted(GammaAmplitude),
    Mirror(MirrorAmplitude),
    Misalign(MisalignConfig),
}

impl Amplitude {
    pub fn kind(&self) -> TransformKind {
        match self {
            Amplitude::Affine(_) => TransformKind::Affine,
            Amplitude::GaussianNoise(_) => TransformKind::GaussianNoise,
            Amplitude::GaussianBlur(_) => TransformKind::GaussianBlur,
            Amplitude::Brightness(_) => TransformKind::Brightness,
            Amplitude::Gamma(_) => TransformKind::Gamma,
            Amplitude::GammaInverted(_) => TransformKind::GammaInverted,
            Amplitude::Mirror(_) => TransformKind::Mirror,
            Amplitude::Misalign(_) => TransformKind::Misalign,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct TransformSpec {
    pub probability: f64,
    pub amplitude: Amplitude,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: TransformKind,
    p: f64,
    #[serde(default)]
    amplitude: Value,
}

impl TryFrom<RawSpec> for TransformSpec {
    type Error = String;

    fn try_from(raw: RawSpec) -> std::result::Result<Self, String> {
        fn parse<T: serde::de::DeserializeOwned>(kind: TransformKind, v: Value) -> std::result::Result<T, String> {
            let v = if v.is_null() { json!({}) } else { v };
            serde_json::from_value(v).map_err(|e| format!("{kind} amplitude: {e}"))
        }
        let a = raw.amplitude;
        let amplitude = match raw.kind {
            TransformKind::Affine => Amplitude::Affine(parse(raw.kind, a)?),
            TransformKind::GaussianNoise => Amplitude::GaussianNoise(parse(raw.kind, a)?),
            TransformKind::GaussianBlur => Amplitude::GaussianBlur(parse(raw.kind, a)?),
            TransformKind::Brightness => Amplitude::Brightness(parse(raw.kind, a)?),
            TransformKind::Gamma => Amplitude::Gamma(parse(raw.kind, a)?),
            TransformKind::GammaInverted => Amplitude::GammaInverted(parse(raw.kind, a)?),
            TransformKind::Mirror => Amplitude::Mirror(parse(raw.kind, a)?),
            TransformKind::Misalign => Amplitude::Misalign(parse(raw.kind, a)?),
        };
        let spec = TransformSpec {
            probability: raw.p,
            amplitude,
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<TransformSpec> for RawSpec {
    fn from(spec: TransformSpec) -> RawSpec {
        let amplitude = match &spec.amplitude {
            Amplitude::Affine(a) => serde_json::to_value(a),
            Amplitude::GaussianNoise(a) => serde_json::to_value(a),
            Amplitude::GaussianBlur(a) => serde_json::to_value(a),
            Amplitude::Brightness(a) => serde_json::to_value(a),
            Amplitude::Gamma(a) | Amplitude::GammaInverted(a) => serde_json::to_value(a),
            Amplitude::Mirror(a) => serde_json::to_value(a),
            Amplitude::Misalign(a) => serde_json::to_value(a),
        }
        .expect("amplitude records serialize");
        RawSpec {
            kind: spec.kind(),
            p: spec.probability,
            amplitude,
        }
    }
}

impl TransformSpec {
    pub fn new(probability: f64, amplitude: Amplitude) -> Result<Self> {
        let spec = TransformSpec {
            probability,
            amplitude,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> TransformKind {
        self.amplitude.kind()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.kind())));
        if !(0.0..=1.0).contains(&self.probability) {
            return bad(format!("probability {} outside [0, 1]", self.probability));
        }
        match &self.amplitude {
            Amplitude::Affine(a) => {
                if a.scale.lo <= 0.0 {
                    return bad(format!("scale must be positive, got {:?}", a.scale));
                }
            }
            Amplitude::GaussianNoise(a) if a.sigma_rel.lo < 0.0 => {
                return bad("noise sigma must be >= 0".into())
            }
            Amplitude::GaussianBlur(a) if a.sigma_voxels.lo < 0.0 => {
                return bad("blur sigma must be >= 0".into())
            }
            Amplitude::Gamma(a) | Amplitude::GammaInverted(a) if a.gamma.lo <= 0.0 => {
                return bad("gamma must be positive".into())
            }
            Amplitude::Mirror(a) if !(0.0..=1.0).contains(&a.p_axis) => {
                return bad(format!("p_axis {} outside [0, 1]", a.p_axis))
            }
            Amplitude::Misalign(cfg) => cfg.validate()?,
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentScheme {
    pub name: String,
    pub transforms: Vec<TransformSpec>,
}

impl AugmentScheme {
    pub fn validate(&self) -> Result<()> {
        for t in &self.transforms {
            t.validate()?;
        }
        let misaligns = self.count(TransformKind::Misalign);
        if misaligns > 1 {
            return Err(Error::DuplicateMisalign);
        }
        if self.name == "subtle" || self.name.starts_with("subtle+") {
            for kind in [TransformKind::GaussianBlur, TransformKind::GammaInverted] {
                if self.contains(kind) {
                    return Err(Error::Config(format!("subtle scheme must not contain {kind}")));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, kind: TransformKind) -> bool {
        self.count(kind) > 0
    }

    fn count(&self, kind: TransformKind) -> usize {
        self.transforms.iter().filter(|t| t.kind() == kind).count()
    }

    pub fn kinds(&self) -> Vec<TransformKind> {
        self.transforms.iter().map(TransformSpec::kind).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scheme: AugmentScheme = serde_json::from_str(s)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheme serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Framework-convention default pipeline, read from the shipped `baseline.json` preset.
pub fn baseline_scheme() -> AugmentScheme {
    AugmentScheme::from_json(BASELINE_JSON).expect("baseline preset is valid")
}

/// `scheme` without blur or inverted gamma, and with affine amplitudes
/// scaled towards identity by `factor`.
pub fn subtle_from(scheme: &AugmentScheme, factor: f64) -> AugmentScheme {
    let transforms = scheme
        .transforms
        .iter()
        .filter(|t| !matches!(t.kind(), TransformKind::GaussianBlur | TransformKind::GammaInverted))
        .map(|t| match t.amplitude {
            Amplitude::Affine(a) => TransformSpec {
                probability: t.probability,
                amplitude: Amplitude::Affine(AffineAmplitude {
                    rotation_deg: a.rotation_deg.scaled_about(0.0, factor),
                    scale: a.scale.scaled_about(1.0, factor),
                    ..a
                }),
            },
            _ => *t,
        })
        .collect();
    AugmentScheme {
        name: "subtle".into(),
        transforms,
    }
}

pub fn subtle_scheme() -> AugmentScheme {
    subtle_from(&baseline_scheme(), SUBTLE_FACTOR)
}

/// Prepends a `MISALIGN` step and suffixes the name with `+misal`.
pub fn with_misalignment(scheme: &AugmentScheme, cfg: MisalignConfig) -> Result<AugmentScheme> {
    if scheme.contains(TransformKind::Misalign) {
        return Err(Error::DuplicateMisalign);
    }
    let mut transforms = Vec::with_capacity(scheme.transforms.len() + 1);
    transforms.push(TransformSpec::new(1.0, Amplitude::Misalign(cfg))?);
    transforms.extend_from_slice(&scheme.transforms);
    Ok(AugmentScheme {
        name: format!("{}+misal", scheme.name),
        transforms,
    })
}

/// One transform that fired during [`apply_scheme_logged`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiredTransform {
    pub index: usize,
    pub kind: TransformKind,
    pub params: Value,
}

pub fn apply_scheme(case: &PetCtCase, scheme: &AugmentScheme, seed: u64) -> Result<PetCtCase> {
    apply_scheme_logged(case, scheme, seed).map(|(c, _)| c)
}

/// Applies `scheme` and records every transform that fired with its sampled parameters.
pub fn apply_scheme_logged(
    case: &PetCtCase,
    scheme: &AugmentScheme,
    seed: u64,
) -> Result<(PetCtCase, Vec<FiredTransform>)> {
    case.validate()?;
    scheme.validate()?;
    let id = case.case_id();
    let mut cur = case.clone();
    let mut log = Vec::new();

    for (index, spec) in scheme.transforms.iter().enumerate() {
        let mut shared = substream(seed, id, index, Modality::Shared);
        if shared.random::<f64>() >= spec.probability {
            continue;
        }
        let params = match &spec.amplitude {
            Amplitude::Misalign(cfg) => {
                let rigid = sample_misalignment(cfg, &mut shared);
                if rigid.is_identity() {
                    continue;
                }
                cur = apply_misalignment(&cur, &rigid, cfg);
                serde_json::to_value(rigid)?
            }
            Amplitude::Mirror(m) => {
                let axes = m
                    .axes
                    .axes()
                    .into_iter()
                    .filter(|_| shared.random::<f64>() < m.p_axis)
                    .fold(AxisSet::EMPTY, AxisSet::with);
                cur = cur.mirrored(axes);
                json!({ "axes": axes })
            }
            Amplitude::Affine(a) => {
                let rotation = a.rotation_deg.sample(&mut shared);
                let scale = a.scale.sample(&mut shared);
                cur = apply_affine(&cur, a, rotation, scale)?;
                json!({ "rotation_deg": rotation, "scale": scale, "rotation_axis": a.rotation_axis })
            }
            amp => {
                let mut sampled = serde_json::Map::new();
                let mut out = Vec::with_capacity(2);
                for (modality, vol) in [(Modality::Ct, cur.ct()), (Modality::Pet, cur.pet())] {
                    let mut rng = substream(seed, id, index, modality);
                    let (v, value) = apply_intensity(amp, vol, &mut rng)?;
                    let key = if modality == Modality::Ct { "ct" } else { "pet" };
                    sampled.insert(key.into(), json!(value));
                    out.push(v);
                }
                let pet = out.pop().expect("two modalities");
                let ct = out.pop().expect("two modalities");
                cur = cur.with_volumes(ct, pet, cur.label().cloned())?;
                Value::Object(sampled)
            }
        };
        log.push(FiredTransform {
            index,
            kind: spec.kind(),
            params,
        });
    }
    Ok((cur, log))
}

/// Samples the transform parameter for one modality and applies it.
fn apply_intensity<R: Rng + ?Sized>(amp: &Amplitude, vol: &Volume3, rng: &mut R) -> Result<(Volume3, f64)> {
    match amp {
        Amplitude::GaussianNoise(a) => {
            let rel = a.sigma_rel.sample(rng);
            let sigma = rel * intensity_std(vol);
            Ok((gaussian_noise(vol, sigma, rng)?, sigma))
        }
        Amplitude::GaussianBlur(a) => {
            let sigma = a.sigma_voxels.sample(rng);
            Ok((gaussian_blur(vol, sigma)?, sigma))
        }
        Amplitude::Brightness(a) => {
            let m = a.multiplier.sample(rng);
            Ok((brightness(vol, m)?, m))
        }
        Amplitude::Gamma(a) => {
            let g = a.gamma.sample(rng);
            Ok((gamma_transform(vol, g)?, g))
        }
        Amplitude::GammaInverted(a) => {
            let g = a.gamma.sample(rng);
            Ok((inverted_gamma_transform(vol, g)?, g))
        }
        other => unreachable!("{} is not an intensity transform", other.kind()),
    }
}

/// Rotation plus isotropic scaling about the center, identical for all volumes.
fn apply_affine(case: &PetCtCase, a: &AffineAmplitude, rotation_deg: f64, scale: f64) -> Result<PetCtCase> {
    let rot = rotation_matrix(a.rotation_axis, -rotation_deg);
    let inv = rot.map(|row| row.map(|v| v / scale));
    let warp = |v: &Volume3, interp: Interp| resample_inverse(v, &inv, [0.0; 3], interp, v.kind().default_pad());
    let ct = warp(case.ct(), a.interp);
    let pet = warp(case.pet(), a.interp);
    let label = case.label().map(|l| warp(l, Interp::Nearest));
    debug_assert!(label.as_ref().is_none_or(|l| l.kind() == VolumeKind::Binary));
    case.with_volumes(ct, pet, label)
}
