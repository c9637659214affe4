//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use petct_datakit::augment::{apply_scheme, baseline_scheme, subtle_scheme, Amplitude, AugmentScheme, TransformKind};
use petct_datakit::components::Connectivity;
use petct_datakit::geometry::{apply_rigid, mirror, Axis, AxisSet, Interp, RigidParams};
use petct_datakit::scheduler::mock::{simulate, LatencySpec};
use petct_datakit::{
    apply_misalignment, dice, false_negative_volume_ml, false_positive_volume_ml, plan_tta, sample_misalignment, suv_mask,
    MetricsReport, MisalignConfig, SchedulerBudget, Tracer, Volume3, VolumeKind,
};
use rand::Rng;
use sha2::{Digest, Sha256};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Option<u64>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn misalignment_contract() -> Check {
    let cfg = MisalignConfig::default();
    let case = common::phantom_case("c1", Tracer::Psma, [6, 6, 3], 1);
    let mut r = common::rng(1001);
    let n = 100_000;
    let (mut rot, mut shift) = (0, 0);
    for i in 0..n {
        let p = sample_misalignment(&cfg, &mut r);
        ensure(p.rotation_deg.abs() <= 5.0, || format!("sample {i}: rotation {}", p.rotation_deg))?;
        ensure(p.shift_voxels[0].abs() <= 2.0 && p.shift_voxels[1].abs() <= 2.0 && p.shift_voxels[2] == 0.0, || {
            format!("sample {i}: shift {:?}", p.shift_voxels)
        })?;
        rot += (p.rotation_deg != 0.0) as usize;
        shift += (p.shift_voxels != [0.0; 3]) as usize;
        if !p.is_identity() {
            let out = apply_misalignment(&case, &p, &cfg);
            ensure(out.pet().bitwise_eq(case.pet()) && out.label().unwrap().bitwise_eq(case.label().unwrap()), || {
                format!("sample {i}: PET or label changed")
            })?;
        }
    }
    let (lo, hi) = common::binomial_ci99(0.1, n);
    let (fr, ft) = (rot as f64 / n as f64, shift as f64 / n as f64);
    ensure((lo..=hi).contains(&fr) && (lo..=hi).contains(&ft), || format!("rates {fr:.4}/{ft:.4} outside [{lo:.4}, {hi:.4}]"))?;
    Ok(format!("{n} samples in bounds, rotation rate {fr:.4}, translation rate {ft:.4}"))
}

fn metric_oracles() -> Check {
    let mut r = common::rng(1002);
    let dims = [8, 8, 8];
    for i in 0..1000 {
        let (dp, dg) = (r.random_range(0.05..0.5), r.random_range(0.05..0.5));
        let pred = common::random_binary(&mut r, dims, dp);
        let gt = common::random_binary(&mut r, dims, dg);
        let (p, g) = (common::mask_of(&pred), common::mask_of(&gt));
        let d = dice(&pred, &gt).map_err(|e| e.to_string())?;
        ensure((d - common::dice_oracle(&p, &g)).abs() <= 1e-12, || format!("pair {i}: dice {d}"))?;
        for (conn, c) in [(Connectivity::Six, 6), (Connectivity::TwentySix, 26)] {
            // unit spacing: mL = voxels / 1000
            let fp = false_positive_volume_ml(&pred, &gt, conn).map_err(|e| e.to_string())?;
            let fn_ = false_negative_volume_ml(&pred, &gt, conn).map_err(|e| e.to_string())?;
            let want_fp = common::unmatched_voxels_oracle(&p, &g, dims, c) as f64 / 1000.0;
            let want_fn = common::unmatched_voxels_oracle(&g, &p, dims, c) as f64 / 1000.0;
            ensure(fp == want_fp && fn_ == want_fn, || format!("pair {i}, {c}-conn: fp {fp} vs {want_fp}, fn {fn_} vs {want_fn}"))?;
        }
    }
    Ok("1000 pairs, connectivities 6 and 26".into())
}

fn scheduler_budget() -> Check {
    let budget = SchedulerBudget::default();
    for l in 1..=300 {
        let l = l as f64;
        let (_, t) = simulate(&LatencySpec::Constant { seconds: l }, &budget, 5).map_err(|e| e.to_string())?;
        ensure(t.n_tta <= 2 && t.n_models <= 5, || format!("L={l}: n_tta {} n_models {}", t.n_tta, t.n_models))?;
        let feasible = (1 + plan_tta(l, &budget)) as f64 * l <= budget.ensemble_limit_s;
        ensure(t.total_s <= 170.0 + l, || format!("L={l}: total {}", t.total_s))?;
        ensure(!feasible || t.total_s <= 170.0, || format!("L={l}: feasible plan but total {}", t.total_s))?;
    }
    for (l, want) in [(5.0, (2, 5)), (60.0, (0, 2))] {
        let (_, t) = simulate(&LatencySpec::Constant { seconds: l }, &budget, 5).map_err(|e| e.to_string())?;
        ensure((t.n_tta, t.n_models) == want, || format!("L={l}: got ({}, {})", t.n_tta, t.n_models))?;
    }
    Ok("L = 1..300 within budget, 5 s -> (2, 5), 60 s -> (0, 2)".into())
}

fn suv_masking() -> Check {
    let mut r = common::rng(1004);
    let mut boundary = 0;
    for i in 0..500 {
        let dims = [r.random_range(2..9), r.random_range(2..9), r.random_range(2..6)];
        let pred = common::random_binary(&mut r, dims, 0.5);
        let pet = common::random_field(&mut r, dims, 0.0, 3.0, VolumeKind::Suv).map(|v| if v > 2.5 { 1.0 } else { v }).unwrap();
        let t1: f64 = r.random_range(0.0..3.0);
        let t2: f64 = r.random_range(0.0..3.0);
        let err = |e: petct_datakit::Error| e.to_string();
        let once = suv_mask(&pred, &pet, 1.0).map_err(err)?;
        ensure(suv_mask(&once, &pet, 1.0).map_err(err)?.bitwise_eq(&once), || format!("case {i}: not idempotent"))?;
        ensure(once.data().iter().zip(pred.data()).all(|(o, p)| o <= p), || format!("case {i}: not a subset"))?;
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let n_lo = suv_mask(&pred, &pet, lo).map_err(err)?.foreground_count();
        let n_hi = suv_mask(&pred, &pet, hi).map_err(err)?.foreground_count();
        ensure(n_hi <= n_lo, || format!("case {i}: {n_hi} voxels at {hi} > {n_lo} at {lo}"))?;
        for (j, &s) in pet.data().iter().enumerate() {
            if s == 1.0 && pred.data()[j] == 1.0 {
                boundary += 1;
                ensure(once.data()[j] == 1.0, || format!("case {i}: SUV 1.0 voxel {j} dropped"))?;
            }
        }
    }
    ensure(boundary > 0, || "no boundary voxels generated".into())?;
    Ok(format!("500 cases, {boundary} boundary voxels retained"))
}

fn geometry() -> Check {
    let mut r = common::rng(1005);
    for n in 0..100 {
        let dims = [r.random_range(6..12), r.random_range(6..12), r.random_range(4..8)];
        let k = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-50.0..50.0)];
        let p = RigidParams {
            rotation_deg: r.random_range(-30.0..30.0),
            rotation_axis: Axis::Z,
            shift_voxels: [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), 0.0],
        };
        let data: Vec<f64> = (0..dims.iter().product::<usize>())
            .map(|i| {
                let (x, y, z) = (i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1]));
                k[0] * x as f64 + k[1] * y as f64 + k[2] * z as f64 + k[3]
            })
            .collect();
        let v = Volume3::new(dims, [1.0; 3], data, VolumeKind::Hu).map_err(|e| e.to_string())?;
        let out = apply_rigid(&v, &p, Interp::Trilinear, -1000.0);
        let c = dims.map(|d| (d as f64 - 1.0) / 2.0);
        let (s, co) = (-p.rotation_deg).to_radians().sin_cos();
        for i in 0..out.len() {
            let [x, y, z] = out.coords(i);
            let (dx, dy) = (x as f64 - c[0] - p.shift_voxels[0], y as f64 - c[1] - p.shift_voxels[1]);
            let src = [co * dx - s * dy + c[0], s * dx + co * dy + c[1], z as f64];
            if (0..3).all(|a| src[a] >= 0.0 && src[a] <= dims[a] as f64 - 1.0) {
                let want = k[0] * src[0] + k[1] * src[1] + k[2] * src[2] + k[3];
                ensure((out.data()[i] - want).abs() < 1e-6, || format!("param set {n}: {} vs {want}", out.data()[i]))?;
            }
        }
    }
    for n in 0..300 {
        let dims = [r.random_range(1..10), r.random_range(1..10), r.random_range(1..10)];
        let v = common::random_field(&mut r, dims, -1000.0, 1000.0, VolumeKind::Hu);
        let sh = [r.random_range(-3i64..=3), r.random_range(-3i64..=3), r.random_range(-2i64..=2)];
        let out = apply_rigid(&v, &RigidParams::shift(sh.map(|x| x as f64)), Interp::Nearest, -1000.0);
        let ok = common::shifted_index_oracle(&v, sh).into_iter().zip(out.data()).all(|(w, &g)| g == w.unwrap_or(-1000.0));
        ensure(ok, || format!("shift case {n}: {sh:?} differs from index oracle"))?;
        let axes = AxisSet::from_bits(r.random_range(0..8)).unwrap();
        ensure(mirror(&mirror(&v, axes), axes).bitwise_eq(&v), || format!("mirror {axes} not an involution"))?;
    }
    Ok("100 trilinear parameter sets, 300 nearest shifts and mirrors".into())
}

fn digest(case: &petct_datakit::PetCtCase) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in [case.ct(), case.pet(), case.label().unwrap()] {
        for x in v.data() {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().into()
}

fn scheme_structure() -> Check {
    let (base, subtle) = (baseline_scheme(), subtle_scheme());
    let expected: Vec<TransformKind> = base
        .kinds()
        .into_iter()
        .filter(|k| !matches!(k, TransformKind::GaussianBlur | TransformKind::GammaInverted))
        .collect();
    ensure(subtle.kinds() == expected, || format!("subtle kinds {:?}", subtle.kinds()))?;
    let affine = |s: &AugmentScheme| {
        s.transforms.iter().find_map(|t| match t.amplitude {
            Amplitude::Affine(a) => Some(a),
            _ => None,
        })
    };
    let (b, s) = (affine(&base).ok_or("baseline has no AFFINE")?, affine(&subtle).ok_or("subtle has no AFFINE")?);
    ensure(s.rotation_deg.width() < b.rotation_deg.width() && s.scale.width() < b.scale.width(), || {
        format!("affine amplitudes not smaller: {s:?} vs {b:?}")
    })?;
    let case = common::phantom_case("det", Tracer::Fdg, [10, 9, 6], 6);
    for scheme in [&base, &subtle] {
        for seed in 0..10u64 {
            let a = apply_scheme(&case, scheme, seed).map_err(|e| e.to_string())?;
            let b = apply_scheme(&case, scheme, seed).map_err(|e| e.to_string())?;
            ensure(digest(&a) == digest(&b), || format!("{} seed {seed}: checksums differ", scheme.name))?;
        }
    }
    Ok("subtle = baseline minus blur and inverted gamma, smaller affine; checksums stable".into())
}

fn summary_fixture() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut names = Vec::new();
    for name in ["summary_baseline", "summary_baseline_misal", "summary_subtle", "summary_subtle_misal"] {
        let input = fixtures.join(format!("{name}.json"));
        let out = dir.path().join(format!("{name}.json"));
        let code = petct_datakit::cli::run(["petct-datakit", "evaluate", "--report-in", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        ensure(code == 0, || format!("{name}: exit {code}"))?;
        let read = |p: &std::path::Path| -> std::result::Result<serde_json::Value, String> {
            serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
        };
        ensure(read(&input)? == read(&out)?, || format!("{name}: re-serialized report differs"))?;
        MetricsReport::from_json(&std::fs::read_to_string(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        names.push(name);
    }
    Ok(format!("{} fixture reports round-trip losslessly", names.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("misalignment contract", misalignment_contract, Some(30)),
        ("metric oracle equivalence", metric_oracles, Some(60)),
        ("scheduler budget safety", scheduler_budget, Some(10)),
        ("SUV masking", suv_masking, Some(10)),
        ("geometry", geometry, None),
        ("scheme structure", scheme_structure, None),
        ("report fixture", summary_fixture, None),
    ];
    let mut failed = 0;
    for (n, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let res = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let res = match (res, limit) {
            (Ok(_), Some(s)) if took > Duration::from_secs(s) => Err(format!("took {took:.2?}, limit {s} s")),
            (r, _) => r,
        };
        match res {
            Ok(msg) => println!("criterion {}: PASS {name} ({msg}; {took:.2?})", n + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({msg}; {took:.2?})", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
