mod common;

use std::path::PathBuf;

use petct_datakit::metrics::{aggregate, dice, evaluate_case, false_negative_volume_ml, false_positive_volume_ml, CaseMetrics, MetricsReport, Units};
use petct_datakit::{Connectivity, Error, Tracer, Volume3, VolumeKind};
use proptest::prelude::*;
use rand::Rng;

fn ml(voxels: usize, s: [f64; 3]) -> f64 {
    voxels as f64 * s[0] * s[1] * s[2] / 1000.0
}

fn respaced(v: &Volume3, s: [f64; 3]) -> Volume3 {
    Volume3::new(v.dims(), s, v.data().to_vec(), v.kind()).unwrap()
}

#[test]
fn random_pairs_match_brute_force() {
    let mut r = common::rng(31);
    let dims = [8, 8, 8];
    for i in 0..1000 {
        let spacing = if i % 2 == 0 { [1.0; 3] } else { [2.0, 2.0, 3.0] };
        let dp = r.random_range(0.02..0.4);
        let dg = r.random_range(0.02..0.4);
        let p = respaced(&common::random_binary(&mut r, dims, dp), spacing);
        let g = respaced(&common::random_binary(&mut r, dims, dg), spacing);
        let (pm, gm) = (common::mask_of(&p), common::mask_of(&g));
        assert!((dice(&p, &g).unwrap() - common::dice_oracle(&pm, &gm)).abs() <= 1e-12);
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let c = conn.neighbor_count();
            assert_eq!(
                false_positive_volume_ml(&p, &g, conn).unwrap(),
                ml(common::unmatched_voxels_oracle(&pm, &gm, dims, c), spacing)
            );
            assert_eq!(
                false_negative_volume_ml(&p, &g, conn).unwrap(),
                ml(common::unmatched_voxels_oracle(&gm, &pm, dims, c), spacing)
            );
        }
    }
}

#[test]
fn dice_examples() {
    let dims = [4, 4, 1];
    let mut p = vec![0.0; 16];
    let mut g = vec![0.0; 16];
    for i in 0..8 {
        p[i] = 1.0;
        g[i + 4] = 1.0;
    }
    let pv = Volume3::new(dims, [1.0; 3], p, VolumeKind::Binary).unwrap();
    let gv = Volume3::new(dims, [1.0; 3], g, VolumeKind::Binary).unwrap();
    assert_eq!(dice(&pv, &gv).unwrap(), 0.5);
    assert_eq!(dice(&pv, &pv).unwrap(), 1.0);
    let empty = Volume3::zeros(dims, [1.0; 3], VolumeKind::Binary).unwrap();
    assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
    assert_eq!(dice(&pv, &empty).unwrap(), 0.0);
    let other = Volume3::zeros([4, 4, 2], [1.0; 3], VolumeKind::Binary).unwrap();
    assert!(matches!(dice(&pv, &other), Err(Error::GridMismatch(_))));
}

fn cm(id: &str, tracer: Tracer, dice: f64, fp: f64, fn_: f64) -> CaseMetrics {
    CaseMetrics { case_id: id.into(), tracer, dice, fp_vol_ml: fp, fn_vol_ml: fn_ }
}

#[test]
fn aggregate_examples() {
    let r = aggregate(vec![cm("a", Tracer::Fdg, 0.6, 0.0, 0.0), cm("b", Tracer::Psma, 0.4, 0.0, 0.0)]).unwrap();
    assert!((r.summary.dice_balanced - 0.5).abs() < 1e-15);

    let r = aggregate(vec![
        cm("a", Tracer::Fdg, 0.6, 0.0, 0.0),
        cm("b", Tracer::Fdg, 0.6, 0.0, 0.0),
        cm("c", Tracer::Fdg, 0.6, 0.0, 0.0),
        cm("d", Tracer::Psma, 0.4, 0.0, 0.0),
    ])
    .unwrap();
    assert!((r.summary.dice_mean - 0.55).abs() < 1e-15);
    assert!((r.summary.dice_balanced - 0.5).abs() < 1e-15);
    assert_eq!((r.summary.n_fdg, r.summary.n_psma), (Some(3), Some(1)));

    let single = aggregate(vec![cm("a", Tracer::Psma, 0.3, 1.0, 2.0), cm("b", Tracer::Psma, 0.5, 3.0, 4.0)]).unwrap();
    assert!(single.summary.single_tracer);
    assert_eq!(single.summary.dice_fdg, None);
    assert!((single.summary.dice_balanced - 0.4).abs() < 1e-15);
    assert!((single.summary.fp_vol_mean_ml - 2.0).abs() < 1e-15);

    assert!(matches!(aggregate(vec![]), Err(Error::Metrics(_))));
}

#[test]
fn hand_computed_two_case_report() {
    // case 1 (FDG, spacing 2 mm): pred 3 voxels, gt 2 voxels, overlap 1, one stray pred voxel
    // case 2 (PSMA, 1 mm): pred empty, gt a 4-voxel lesion
    let d = [6, 1, 1];
    let v = |ones: &[usize], s: f64| {
        let mut data = vec![0.0; 6];
        for &i in ones {
            data[i] = 1.0;
        }
        Volume3::new(d, [s; 3], data, VolumeKind::Binary).unwrap()
    };
    let c1 = evaluate_case("fdg_1", Tracer::Fdg, &v(&[0, 1, 4], 2.0), &v(&[1, 2], 2.0), Connectivity::TwentySix).unwrap();
    assert!((c1.dice - 0.4).abs() < 1e-15);
    assert_eq!(c1.fp_vol_ml, 0.008);
    assert_eq!(c1.fn_vol_ml, 0.0);
    let c2 = evaluate_case("psma_1", Tracer::Psma, &v(&[], 1.0), &v(&[2, 3, 4, 5], 1.0), Connectivity::TwentySix).unwrap();
    assert_eq!(c2.dice, 0.0);
    assert_eq!(c2.fp_vol_ml, 0.0);
    assert_eq!(c2.fn_vol_ml, 0.004);

    let r = aggregate(vec![c1, c2]).unwrap();
    let s = &r.summary;
    assert!((s.dice_mean - 0.2).abs() < 1e-15);
    assert!((s.dice_balanced - 0.2).abs() < 1e-15);
    assert!((s.fp_vol_mean_ml - 0.004).abs() < 1e-15);
    assert!((s.fn_vol_mean_ml - 0.002).abs() < 1e-15);
    r.validate().unwrap();
}

#[test]
fn duplicating_one_tracer_moves_mean_but_not_balanced() {
    let mut r = common::rng(32);
    for _ in 0..100 {
        let base: Vec<CaseMetrics> = (0..r.random_range(2..8))
            .map(|i| {
                let t = if i % 2 == 0 { Tracer::Fdg } else { Tracer::Psma };
                cm(&format!("c{i}"), t, r.random_range(0.0..1.0), 0.0, 0.0)
            })
            .collect();
        let mut dup = base.clone();
        dup.extend(base.iter().filter(|c| c.tracer == Tracer::Fdg).cloned());
        let a = aggregate(base).unwrap().summary;
        let b = aggregate(dup).unwrap().summary;
        assert!((a.dice_balanced - b.dice_balanced).abs() < 1e-12);
        assert!((a.dice_fdg.unwrap() - b.dice_fdg.unwrap()).abs() < 1e-12);
        if (a.dice_fdg.unwrap() - a.dice_psma.unwrap()).abs() > 1e-6 {
            assert!((a.dice_mean - b.dice_mean).abs() > 1e-12);
        }
    }
}

#[test]
fn report_json_round_trip_and_tamper_detection() {
    let r = aggregate(vec![cm("a", Tracer::Fdg, 0.61, 1.5, 0.25), cm("b", Tracer::Psma, 0.42, 0.0, 3.0)]).unwrap();
    let back = MetricsReport::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);

    let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    v["summary"]["dice_mean"] = serde_json::json!(0.9);
    assert!(MetricsReport::from_json(&v.to_string()).is_err());

    let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    v["per_case"][0]["dice"] = serde_json::json!(1.5);
    assert!(MetricsReport::from_json(&v.to_string()).is_err());
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

const SUMMARY_FIXTURES: [(&str, [f64; 6]); 4] = [
    ("summary_baseline.json", [57.64, 49.05, 53.27, 52.23, 6.09, 30.90]),
    ("summary_baseline_misal.json", [54.09, 47.64, 50.76, 50.03, 5.69, 33.37]),
    ("summary_subtle.json", [55.26, 47.65, 51.36, 50.47, 6.74, 29.82]),
    ("summary_subtle_misal.json", [57.50, 50.92, 54.08, 53.36, 8.37, 24.75]),
];

#[test]
fn summary_fixtures_round_trip_losslessly() {
    for (file, vals) in SUMMARY_FIXTURES {
        let text = std::fs::read_to_string(fixture(file)).unwrap();
        let report = MetricsReport::from_json(&text).unwrap();
        let s = &report.summary;
        assert_eq!(s.units, Units::Percent);
        assert_eq!(
            [s.dice_fdg.unwrap(), s.dice_psma.unwrap(), s.dice_mean, s.dice_balanced, s.fp_vol_mean_ml, s.fn_vol_mean_ml],
            vals,
            "{file}"
        );
        assert_eq!((s.n_fdg, s.n_psma), (None, None));
        let original: serde_json::Value = serde_json::from_str(&text).unwrap();
        let again: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(original, again, "{file}");
        assert_eq!(MetricsReport::from_json(&report.to_json()).unwrap(), report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fp_of_pair_is_fn_of_swapped_pair(seed in any::<u64>(), dims in prop::array::uniform3(1usize..7), c26 in any::<bool>()) {
        let mut r = common::rng(seed);
        let p = common::random_binary(&mut r, dims, 0.3);
        let g = common::random_binary(&mut r, dims, 0.3);
        let conn = if c26 { Connectivity::TwentySix } else { Connectivity::Six };
        prop_assert_eq!(false_positive_volume_ml(&p, &g, conn).unwrap(), false_negative_volume_ml(&g, &p, conn).unwrap());
        let d = dice(&p, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, dice(&g, &p).unwrap());
    }
}
