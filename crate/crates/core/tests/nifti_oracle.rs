//! NIfTI I/O checked against the `nifti` crate as an independent reader/writer.

mod common;

use ndarray::{Array3, IxDyn};
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, NiftiVolume, ReaderOptions};
use petct_datakit::nifti::{load_nifti, save_nifti};
use petct_datakit::{Error, Volume3, VolumeKind};
use proptest::prelude::*;

fn header(pixdim: [f32; 3]) -> NiftiHeader {
    NiftiHeader {
        pixdim: [1.0, pixdim[0], pixdim[1], pixdim[2], 1.0, 1.0, 1.0, 1.0],
        ..NiftiHeader::default()
    }
}

#[test]
fn reads_reference_float32_gz() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.nii.gz");
    let arr = Array3::from_shape_fn((4, 4, 4), |(x, y, z)| (x as f32) + 10.0 * y as f32 - 0.5 * z as f32);
    let h = header([2.0, 2.0, 3.0]);
    nifti::writer::WriterOptions::new(&path).reference_header(&h).write_nifti(&arr).unwrap();

    let v = load_nifti(&path, VolumeKind::Hu).unwrap();
    assert_eq!(v.dims(), [4, 4, 4]);
    assert_eq!(v.spacing(), [2.0, 2.0, 3.0]);
    for z in 0..4 {
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(v.get(x, y, z), arr[[x, y, z]] as f64);
            }
        }
    }
}

#[test]
fn reads_reference_integer_types_with_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i16.nii");
    let arr = Array3::from_shape_fn((3, 2, 2), |(x, y, z)| (x as i16) - 4 * y as i16 + 7 * z as i16);
    let mut h = header([1.5, 1.5, 2.0]);
    h.scl_slope = 2.0;
    h.scl_inter = -1.0;
    // the writer resets scaling, so patch the header fields on disk afterwards
    nifti::writer::WriterOptions::new(&path).reference_header(&h).write_nifti(&arr).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[112..116].copy_from_slice(&2.0f32.to_le_bytes());
    bytes[116..120].copy_from_slice(&(-1.0f32).to_le_bytes());
    std::fs::write(&path, &bytes).unwrap();

    let v = load_nifti(&path, VolumeKind::Hu).unwrap();
    assert_eq!(v.spacing(), [1.5, 1.5, 2.0]);
    for z in 0..2 {
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(v.get(x, y, z), 2.0 * arr[[x, y, z]] as f64 - 1.0);
            }
        }
    }
}

#[test]
fn binary_is_written_as_uint8() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.nii.gz");
    let mut r = common::rng(3);
    let v = common::random_binary(&mut r, [5, 4, 3], 0.3);
    save_nifti(&v, &path).unwrap();

    let obj = ReaderOptions::new().read_file(&path).unwrap();
    let h = obj.header();
    assert_eq!(h.datatype, 2, "NIFTI_TYPE_UINT8");
    assert_eq!(h.bitpix, 8);
    assert_eq!(&h.dim[..4], &[3, 5, 4, 3]);
    let arr = obj.into_volume().into_ndarray::<u8>().unwrap();
    for (i, &val) in v.data().iter().enumerate() {
        let [x, y, z] = v.coords(i);
        assert_eq!(arr[IxDyn(&[x, y, z])] as f64, val);
    }
}

#[test]
fn written_header_matches_reference_reader() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pet.nii");
    let data: Vec<f64> = (0..60).map(|i| i as f64 * 0.25).collect();
    let v = Volume3::new([5, 4, 3], [1.5, 1.5, 2.0], data, VolumeKind::Suv)
        .unwrap()
        .with_origin([-10.0, 4.5, 100.0]);
    save_nifti(&v, &path).unwrap();

    let obj = ReaderOptions::new().read_file(&path).unwrap();
    let h = obj.header();
    assert_eq!(&h.pixdim[1..4], &[1.5, 1.5, 2.0]);
    assert!(h.sform_code > 0);
    assert_eq!(h.srow_x, [1.5, 0.0, 0.0, -10.0]);
    assert_eq!(h.srow_y, [0.0, 1.5, 0.0, 4.5]);
    assert_eq!(h.srow_z, [0.0, 0.0, 2.0, 100.0]);
    assert_eq!(obj.volume().data_type(), nifti::NiftiType::Float32);
    let arr = obj.into_volume().into_ndarray::<f64>().unwrap();
    for (i, &val) in v.data().iter().enumerate() {
        let [x, y, z] = v.coords(i);
        assert_eq!(arr[IxDyn(&[x, y, z])], val);
    }
}

#[test]
fn two_dimensional_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slice.nii");
    let arr = ndarray::Array2::<f32>::zeros((4, 4));
    nifti::writer::WriterOptions::new(&path).reference_header(&header([1.0; 3])).write_nifti(&arr).unwrap();
    let err = load_nifti(&path, VolumeKind::Hu).unwrap_err();
    assert!(matches!(err, Error::UnsupportedDimensionality(_)), "{err}");
    assert!(err.to_string().contains("unsupported dimensionality"));
}

#[test]
fn oblique_sform_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oblique.nii");
    let arr = Array3::<f32>::zeros((2, 2, 2));
    let mut h = header([1.0; 3]);
    h.sform_code = 1;
    let (c, s) = (30f32.to_radians().cos(), 30f32.to_radians().sin());
    h.srow_x = [c, -s, 0.0, 0.0];
    h.srow_y = [s, c, 0.0, 0.0];
    h.srow_z = [0.0, 0.0, 1.0, 0.0];
    nifti::writer::WriterOptions::new(&path).reference_header(&h).write_nifti(&arr).unwrap();
    assert!(matches!(load_nifti(&path, VolumeKind::Hu), Err(Error::NonAxisAligned)));
}

#[test]
fn garbage_is_a_header_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.nii");
    std::fs::write(&path, vec![7u8; 400]).unwrap();
    assert!(matches!(load_nifti(&path, VolumeKind::Hu), Err(Error::MalformedHeader(_))));
    assert!(matches!(load_nifti(dir.path().join("nope.nii"), VolumeKind::Hu), Err(Error::Io { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact(
        dims in prop::array::uniform3(1usize..7),
        spacing in prop::array::uniform3(0.1f64..5.0),
        seed in any::<u64>(),
        kind_ix in 0usize..4,
        gz in any::<bool>(),
        f32_exact in any::<bool>(),
    ) {
        let kind = [VolumeKind::Hu, VolumeKind::Suv, VolumeKind::Binary, VolumeKind::Prob][kind_ix];
        let mut r = common::rng(seed);
        let v = match kind {
            VolumeKind::Binary => common::random_binary(&mut r, dims, 0.4),
            VolumeKind::Prob => common::random_field(&mut r, dims, 0.0, 1.0, kind),
            _ => common::random_field(&mut r, dims, -1000.0, 3000.0, kind),
        };
        let v = if f32_exact { v.map(|x| x as f32 as f64).unwrap() } else { v };
        let v = Volume3::new(dims, spacing, v.into_data(), kind).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if gz { "v.nii.gz" } else { "v.nii" });
        save_nifti(&v, &path).unwrap();
        let back = load_nifti(&path, kind).unwrap();
        prop_assert_eq!(back.dims(), v.dims());
        let same = back.data().iter().zip(v.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
        // spacing is stored as f32 in the header
        prop_assert_eq!(back.spacing(), spacing.map(|s| s as f32 as f64));
    }
}
