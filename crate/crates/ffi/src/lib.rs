//! C ABI over `petct-datakit`.
//!
//! Volumes cross the boundary as opaque `PdkVolume` handles owned by the
//! caller and released with `pdk_volume_free`. Every fallible call returns a
//! `PdkStatus`; on failure `pdk_last_error` gives a message for the calling
//! thread. Panics are caught and reported as `PDK_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use petct_datakit::components::Connectivity;
use petct_datakit::geometry::{apply_rigid, mirror, Axis, AxisSet, Interp, RigidParams};
use petct_datakit::metrics::{dice, false_negative_volume_ml, false_positive_volume_ml};
use petct_datakit::nifti::{load_nifti, save_nifti};
use petct_datakit::postprocess::suv_mask;
use petct_datakit::scheduler::{plan_ensemble, plan_tta, SchedulerBudget};
use petct_datakit::{Error, Volume3, VolumeKind};

/// Opaque volume handle.
pub struct PdkVolume {
    inner: Volume3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    GridMismatch = 5,
    KindMismatch = 6,
    BufferTooSmall = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdkVolumeKind {
    Hu = 0,
    Suv = 1,
    Binary = 2,
    Prob = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdkInterp {
    Nearest = 0,
    Trilinear = 1,
}

/// Rotation about one axis (0 = x, 1 = y, 2 = z) followed by a shift in voxels.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PdkRigidParams {
    pub rotation_deg: f64,
    pub rotation_axis: u8,
    pub shift_voxels: [f64; 3],
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PdkBudget {
    pub case_limit_s: f64,
    pub ensemble_limit_s: f64,
    pub tta_limit_per_model_s: f64,
    pub max_tta: u32,
    pub max_models: u32,
    pub tta_window_includes_first_pass: bool,
}

impl From<PdkVolumeKind> for VolumeKind {
    fn from(k: PdkVolumeKind) -> Self {
        match k {
            PdkVolumeKind::Hu => VolumeKind::Hu,
            PdkVolumeKind::Suv => VolumeKind::Suv,
            PdkVolumeKind::Binary => VolumeKind::Binary,
            PdkVolumeKind::Prob => VolumeKind::Prob,
        }
    }
}

impl From<VolumeKind> for PdkVolumeKind {
    fn from(k: VolumeKind) -> Self {
        match k {
            VolumeKind::Hu => PdkVolumeKind::Hu,
            VolumeKind::Suv => PdkVolumeKind::Suv,
            VolumeKind::Binary => PdkVolumeKind::Binary,
            VolumeKind::Prob => PdkVolumeKind::Prob,
        }
    }
}

impl From<SchedulerBudget> for PdkBudget {
    fn from(b: SchedulerBudget) -> Self {
        PdkBudget {
            case_limit_s: b.case_limit_s,
            ensemble_limit_s: b.ensemble_limit_s,
            tta_limit_per_model_s: b.tta_limit_per_model_s,
            max_tta: b.max_tta as u32,
            max_models: b.max_models as u32,
            tta_window_includes_first_pass: b.tta_window_includes_first_pass,
        }
    }
}

impl PdkBudget {
    fn to_budget(self) -> Result<SchedulerBudget, Failure> {
        let b = SchedulerBudget {
            case_limit_s: self.case_limit_s,
            ensemble_limit_s: self.ensemble_limit_s,
            tta_limit_per_model_s: self.tta_limit_per_model_s,
            max_tta: self.max_tta as usize,
            max_models: self.max_models as usize,
            tta_window_includes_first_pass: self.tta_window_includes_first_pass,
            ..SchedulerBudget::default()
        };
        b.validate()?;
        Ok(b)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PdkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => PdkStatus::Io,
            Error::MalformedHeader(_)
            | Error::UnsupportedDatatype(_)
            | Error::UnsupportedDimensionality(_)
            | Error::NonAxisAligned => PdkStatus::Format,
            Error::GridMismatch(_) => PdkStatus::GridMismatch,
            Error::KindMismatch { .. } => PdkStatus::KindMismatch,
            _ => PdkStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PdkStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PdkStatus::InvalidArgument, msg.into())
}

fn guard<F>(f: F) -> PdkStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            PdkStatus::Panic
        }
    }
}

unsafe fn vol_ref<'a>(v: *const PdkVolume, what: &str) -> Result<&'a Volume3, Failure> {
    v.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

unsafe fn emit(out: *mut *mut PdkVolume, vol: Volume3) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(PdkVolume { inner: vol }));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v;
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pdk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a volume from `len` x-fastest values. `dims` and `spacing` point to 3 elements each.
#[no_mangle]
pub unsafe extern "C" fn pdk_volume_new(
    dims: *const usize,
    spacing: *const f64,
    data: *const f64,
    len: usize,
    kind: PdkVolumeKind,
    out: *mut *mut PdkVolume,
) -> PdkStatus {
    guard(|| {
        if dims.is_null() || spacing.is_null() {
            return Err(null("dims/spacing"));
        }
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let d = std::slice::from_raw_parts(dims, 3);
        let s = std::slice::from_raw_parts(spacing, 3);
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let vol = Volume3::new([d[0], d[1], d[2]], [s[0], s[1], s[2]], values, kind.into())?;
        emit(out, vol)
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_volume_load(path: *const c_char, kind: PdkVolumeKind, out: *mut *mut PdkVolume) -> PdkStatus {
    guard(|| {
        let path = path_arg(path)?;
        emit(out, load_nifti(path, kind.into())?)
    })
}

/// Writes NIfTI-1; gzip-compressed when the path ends in `.gz`.
#[no_mangle]
pub unsafe extern "C" fn pdk_volume_save(vol: *const PdkVolume, path: *const c_char) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        let path = path_arg(path)?;
        Ok(save_nifti(v, path)?)
    })
}

/// Releases a handle. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pdk_volume_free(vol: *mut PdkVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pdk_volume_dims(vol: *const PdkVolume, out: *mut usize) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&v.dims());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_volume_spacing(vol: *const PdkVolume, out: *mut f64) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&v.spacing());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_volume_kind(vol: *const PdkVolume, out: *mut PdkVolumeKind) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        write_out(out, v.kind().into())
    })
}

/// Number of voxels, 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn pdk_volume_len(vol: *const PdkVolume) -> usize {
    vol.as_ref().map_or(0, |h| h.inner.len())
}

/// Copies the voxel values into `buf`, which must hold at least `pdk_volume_len` values.
#[no_mangle]
pub unsafe extern "C" fn pdk_volume_copy_data(vol: *const PdkVolume, buf: *mut f64, buf_len: usize) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if buf_len < v.len() {
            return Err(Failure(
                PdkStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, volume has {}", v.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v.data());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_suv_mask(
    pred: *const PdkVolume,
    pet: *const PdkVolume,
    threshold: f64,
    out: *mut *mut PdkVolume,
) -> PdkStatus {
    guard(|| {
        let masked = suv_mask(vol_ref(pred, "pred")?, vol_ref(pet, "pet")?, threshold)?;
        emit(out, masked)
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_dice(pred: *const PdkVolume, gt: *const PdkVolume, out: *mut f64) -> PdkStatus {
    guard(|| {
        let d = dice(vol_ref(pred, "pred")?, vol_ref(gt, "gt")?)?;
        write_out(out, d)
    })
}

fn parse_connectivity(c: u8) -> Result<Connectivity, Failure> {
    Connectivity::try_from(c).map_err(invalid)
}

/// `connectivity` is 6, 18 or 26.
#[no_mangle]
pub unsafe extern "C" fn pdk_fp_volume_ml(
    pred: *const PdkVolume,
    gt: *const PdkVolume,
    connectivity: u8,
    out: *mut f64,
) -> PdkStatus {
    guard(|| {
        let v = false_positive_volume_ml(vol_ref(pred, "pred")?, vol_ref(gt, "gt")?, parse_connectivity(connectivity)?)?;
        write_out(out, v)
    })
}

/// `connectivity` is 6, 18 or 26.
#[no_mangle]
pub unsafe extern "C" fn pdk_fn_volume_ml(
    pred: *const PdkVolume,
    gt: *const PdkVolume,
    connectivity: u8,
    out: *mut f64,
) -> PdkStatus {
    guard(|| {
        let v = false_negative_volume_ml(vol_ref(pred, "pred")?, vol_ref(gt, "gt")?, parse_connectivity(connectivity)?)?;
        write_out(out, v)
    })
}

/// `axes` is a bit set: 1 = x, 2 = y, 4 = z.
#[no_mangle]
pub unsafe extern "C" fn pdk_mirror(vol: *const PdkVolume, axes: u8, out: *mut *mut PdkVolume) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        let axes = AxisSet::from_bits(axes).ok_or_else(|| invalid(format!("axis bits {axes} out of range")))?;
        emit(out, mirror(v, axes))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_apply_rigid(
    vol: *const PdkVolume,
    params: *const PdkRigidParams,
    interp: PdkInterp,
    pad_value: f64,
    out: *mut *mut PdkVolume,
) -> PdkStatus {
    guard(|| {
        let v = vol_ref(vol, "vol")?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let axis = match p.rotation_axis {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            a => return Err(invalid(format!("rotation axis {a} out of range"))),
        };
        if !p.rotation_deg.is_finite() || !p.shift_voxels.iter().all(|s| s.is_finite()) || pad_value.is_nan() {
            return Err(invalid("rigid parameters must be finite"));
        }
        let params = RigidParams {
            rotation_deg: p.rotation_deg,
            rotation_axis: axis,
            shift_voxels: p.shift_voxels,
        };
        let interp = match interp {
            PdkInterp::Nearest => Interp::Nearest,
            PdkInterp::Trilinear => Interp::Trilinear,
        };
        emit(out, apply_rigid(v, &params, interp, pad_value))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pdk_budget_default(out: *mut PdkBudget) -> PdkStatus {
    guard(|| write_out(out, SchedulerBudget::default().into()))
}

/// Extra TTA passes that fit after a first pass of `first_pass_s` seconds.
#[no_mangle]
pub unsafe extern "C" fn pdk_plan_tta(first_pass_s: f64, budget: *const PdkBudget, out: *mut usize) -> PdkStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.to_budget()?;
        if !(first_pass_s > 0.0 && first_pass_s.is_finite()) {
            return Err(invalid("first_pass_s must be positive"));
        }
        write_out(out, plan_tta(first_pass_s, &b))
    })
}

/// Ensemble size for a per-model time of `model_time_s` seconds.
#[no_mangle]
pub unsafe extern "C" fn pdk_plan_ensemble(model_time_s: f64, budget: *const PdkBudget, out: *mut usize) -> PdkStatus {
    guard(|| {
        let b = budget.as_ref().ok_or_else(|| null("budget"))?.to_budget()?;
        if !(model_time_s > 0.0 && model_time_s.is_finite()) {
            return Err(invalid("model_time_s must be positive"));
        }
        write_out(out, plan_ensemble(model_time_s, &b))
    })
}
