//! Built-in invariant battery behind the `selftest` subcommand.
//!
//! Each check prints one `PASS`/`FAIL` line; output is fully deterministic
//! so two consecutive runs are byte-identical.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::bench::assign_bench;
use super::config::HarnessConfig;
use super::pipeline::run_pipeline;
use super::recover::recover_shift;
use super::scene::{gen_scene, gen_scene_matched};
use crate::align::{grid_sample, OffsetField};
use crate::assign::{geoshape, Box, GeoShapeParams};
use crate::loss::{region_kl, RegionSpec};
use crate::tensor::FeatureMap;
use crate::wavelet::{dwt_haar, idwt_haar};

fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-2.0..2.0))
}

fn check(out: &mut String, name: &str, ok: bool) -> bool {
    out.push_str(if ok { "PASS " } else { "FAIL " });
    out.push_str(name);
    out.push('\n');
    ok
}

fn wavelet_roundtrip() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    (0..20).all(|_| {
        let x = random_map(&mut rng, 2, 16, 16);
        let bands = dwt_haar(&x).unwrap();
        let back = idwt_haar(&bands).unwrap();
        let max_err = x
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let e_in: f64 = x.data().iter().map(|v| v * v).sum();
        let e_out: f64 = [&bands.ll, &bands.lh, &bands.hl, &bands.hh]
            .iter()
            .flat_map(|b| b.data())
            .map(|v| v * v)
            .sum();
        max_err < 1e-12 && (e_in - e_out).abs() < 1e-10 * e_in.max(1.0)
    })
}

fn grid_identity() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    (0..10).all(|_| {
        let x = random_map(&mut rng, 3, 12, 10);
        let zero = OffsetField::constant(12, 10, 0.0, 0.0);
        grid_sample(&x, &zero).unwrap() == x
    })
}

fn geoshape_hand_value() -> bool {
    let params = GeoShapeParams::default();
    let a = Box::new(0.0, 0.0, 2.0, 2.0).unwrap();
    let g = Box::new(1.0, 0.0, 2.0, 2.0).unwrap();
    let psi = geoshape(&a, &g, &params);
    (psi - (-11.0_f64 / 12.0).exp()).abs() < 1e-10
        && geoshape(&a, &a, &params) == 1.0
}

fn geoshape_invariance() -> bool {
    let params = GeoShapeParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    (0..100).all(|_| {
        let a = Box::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.5..4.0),
        )
        .unwrap();
        let g = Box::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(0.5..4.0),
            rng.gen_range(0.5..4.0),
        )
        .unwrap();
        let s = rng.gen_range(0.5..3.0);
        let (tx, ty) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let map = |b: &Box| Box::new(s * b.cx + tx, s * b.cy + ty, s * b.w, s * b.h).unwrap();
        (geoshape(&a, &g, &params) - geoshape(&map(&a), &map(&g), &params)).abs() < 1e-12
    })
}

fn kl_properties() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let x = random_map(&mut rng, 3, 8, 8);
    let y = random_map(&mut rng, 3, 8, 8);
    let spec = RegionSpec::new(Box::new(4.0, 4.0, 6.0, 6.0).unwrap(), 1, 1.0).unwrap();
    let self_kl = region_kl(&x, &x, &spec).unwrap();
    let fwd = region_kl(&x, &y, &spec).unwrap();
    let bwd = region_kl(&y, &x, &spec).unwrap();
    self_kl == 0.0 && fwd > 0.0 && (fwd - bwd).abs() < 1e-12
}

fn bench_analytic() -> bool {
    let params = GeoShapeParams::default();
    let rows = assign_bench(
        &[2.0, 4.0, 8.0, 16.0],
        &[0.0, 1.0, 2.0, 4.0, 20.0],
        &params,
    )
    .unwrap();
    rows.iter().all(|r| match r.analytic_iou {
        Some(a) => (r.iou - a).abs() < 1e-12,
        None => r.iou == 0.0 && r.psi > 0.0,
    })
}

fn scene_determinism() -> bool {
    let cfg = HarnessConfig {
        seed: 9,
        noise_sigma: 0.05,
        true_shift: (1.5, -0.5),
        ..HarnessConfig::default()
    };
    let a = gen_scene(&cfg).unwrap();
    let b = gen_scene(&cfg).unwrap();
    a.visible == b.visible && a.thermal == b.thermal && a.gts == b.gts
}

fn shift_recovery() -> bool {
    let matched = gen_scene_matched(&HarnessConfig {
        seed: 17,
        ..HarnessConfig::default()
    })
    .unwrap();
    if recover_shift(&matched.visible, &matched.thermal, 8.0, 1.0).unwrap() != (0.0, 0.0) {
        return false;
    }
    let cfg = HarnessConfig {
        seed: 23,
        true_shift: (-2.0, 3.0),
        ..HarnessConfig::default()
    };
    let scene = gen_scene(&cfg).unwrap();
    let (dx, dy) = recover_shift(&scene.visible, &scene.thermal, 8.0, 1.0).unwrap();
    ((dx + 2.0).powi(2) + (dy - 3.0).powi(2)).sqrt() < 0.25
}

fn pipeline_direction() -> bool {
    let cfg = HarnessConfig {
        seed: 31,
        true_shift: (2.0, 1.0),
        ..HarnessConfig::default()
    };
    let (report, _, _, _) = run_pipeline(&cfg).unwrap();
    report.region_kl_after < report.region_kl_before && report.shift_error < 0.25
}

/// Runs every check; returns the printable transcript and the overall
/// verdict.
pub fn run() -> (String, bool) {
    let mut out = String::new();
    let mut ok = true;
    ok &= check(&mut out, "wavelet round trip and energy", wavelet_roundtrip());
    ok &= check(&mut out, "grid-sample identity at zero offsets", grid_identity());
    ok &= check(&mut out, "geoshape hand value exp(-11/12)", geoshape_hand_value());
    ok &= check(&mut out, "geoshape scale/translation invariance", geoshape_invariance());
    ok &= check(&mut out, "region KL identity and symmetry", kl_properties());
    ok &= check(&mut out, "assign-bench analytic IoU column", bench_analytic());
    ok &= check(&mut out, "scene generation determinism", scene_determinism());
    ok &= check(&mut out, "sub-pixel shift recovery", shift_recovery());
    ok &= check(&mut out, "pipeline KL reduction after alignment", pipeline_direction());
    out.push_str(if ok { "selftest: OK\n" } else { "selftest: FAILED\n" });
    (out, ok)
}
