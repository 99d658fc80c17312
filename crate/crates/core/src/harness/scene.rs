//! Deterministic synthetic RGBT scene generation.
//!
//! Each scene renders Gaussian blobs at non-overlapping positions into a
//! visible and a thermal stream. The two streams share blob geometry but
//! differ in per-channel amplitude; the thermal content is translated by
//! the configured true shift via bilinear sampling, then both streams get
//! additive Gaussian noise. Same seed, same bytes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::config::HarnessConfig;
use crate::align::{grid_sample, OffsetField};
use crate::assign::Box;
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

const PLACEMENT_RETRIES: usize = 200;

/// One generated scene: the two modality maps, ground-truth boxes in the
/// thermal (reference) frame, and the shift that was applied.
#[derive(Debug, Clone)]
pub struct Scene {
    pub visible: FeatureMap,
    pub thermal: FeatureMap,
    pub gts: Vec<Box>,
    pub true_shift: (f64, f64),
}

struct Blob {
    cx: f64,
    cy: f64,
    side: f64,
    sigma: f64,
    /// per-channel amplitude of the visible rendering
    amps: Vec<f64>,
}

/// Renders blobs into a `(channels, h, w)` map; `gain[c]` scales channel
/// `c`'s amplitudes.
fn render(blobs: &[Blob], gains: &[f64], channels: usize, h: usize, w: usize) -> FeatureMap {
    FeatureMap::from_fn(channels, h, w, |c, y, x| {
        let mut v = 0.0;
        for blob in blobs {
            let dx = x as f64 - blob.cx;
            let dy = y as f64 - blob.cy;
            let r2 = dx * dx + dy * dy;
            // beyond 5 sigma the blob is numerically irrelevant
            if r2 < (5.0 * blob.sigma).powi(2) {
                v += gains[c] * blob.amps[c] * (-r2 / (2.0 * blob.sigma * blob.sigma)).exp();
            }
        }
        v
    })
}

/// Per-channel amplitudes of one object: a shuffled ramp over [0.6, 1.4]
/// with a little jitter. Shuffling keeps objects distinct while the ramp
/// guarantees genuine across-channel contrast, which the channel-softmax
/// losses downstream rely on.
fn draw_amps(channels: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if channels == 1 {
        return vec![rng.gen_range(0.8..1.2)];
    }
    let mut amps: Vec<f64> = (0..channels)
        .map(|c| 0.6 + 0.8 * c as f64 / (channels - 1) as f64 + rng.gen_range(-0.05..0.05))
        .collect();
    amps.shuffle(rng);
    amps
}

fn place_blobs(cfg: &HarnessConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Blob>> {
    let (lo, hi) = cfg.object_size;
    // keep blobs and their shifted copies away from the borders so border
    // clamping never touches object content
    let margin = 8.0 + 0.75 * hi + 2.0;
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    if w - 1.0 - margin <= margin || h - 1.0 - margin <= margin {
        return Err(Error::SceneGeneration(format!(
            "image {}x{} too small for object size up to {}",
            cfg.width, cfg.height, hi
        )));
    }
    let mut blobs: Vec<Blob> = Vec::with_capacity(cfg.num_objects);
    for _ in 0..cfg.num_objects {
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let side = rng.gen_range(lo..=hi);
            let cx = rng.gen_range(margin..(w - 1.0 - margin));
            let cy = rng.gen_range(margin..(h - 1.0 - margin));
            let ok = blobs.iter().all(|b| {
                let min_dist = (b.side + side) / 2.0 + 2.0;
                let dx = b.cx - cx;
                let dy = b.cy - cy;
                dx * dx + dy * dy >= min_dist * min_dist
            });
            if ok {
                let amps = draw_amps(cfg.channels, rng);
                blobs.push(Blob {
                    cx,
                    cy,
                    side,
                    sigma: side / 4.0,
                    amps,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::SceneGeneration(format!(
                "could not place {} non-overlapping objects in {}x{}",
                cfg.num_objects, cfg.width, cfg.height
            )));
        }
    }
    Ok(blobs)
}

fn generate(cfg: &HarnessConfig, matched_gains: bool) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let blobs = place_blobs(cfg, &mut rng)?;

    // thermal per-channel gains; drawn either way to keep the rng stream
    // identical between the two modes
    let drawn: Vec<f64> = (0..cfg.channels).map(|_| rng.gen_range(0.95..1.05)).collect();
    let unit = vec![1.0; cfg.channels];
    let thermal_gains = if matched_gains { &unit } else { &drawn };

    let visible_content = render(&blobs, &unit, cfg.channels, cfg.height, cfg.width);
    let thermal_content = render(&blobs, thermal_gains, cfg.channels, cfg.height, cfg.width);
    let (sx, sy) = cfg.true_shift;
    // thermal(y, x) = content(y - sy, x - sx): content moved by +shift
    let offsets = OffsetField::constant(cfg.height, cfg.width, -sx, -sy);
    let mut thermal = grid_sample(&thermal_content, &offsets)?;
    let mut visible = visible_content;

    if cfg.noise_sigma > 0.0 {
        for v in visible.data_mut() {
            *v += cfg.noise_sigma * sample_standard_normal(&mut rng);
        }
        for v in thermal.data_mut() {
            *v += cfg.noise_sigma * sample_standard_normal(&mut rng);
        }
    }

    let gts = blobs
        .iter()
        .map(|b| Box::new(b.cx + sx, b.cy + sy, b.side, b.side))
        .collect::<Result<Vec<_>>>()?;

    Ok(Scene {
        visible,
        thermal,
        gts,
        true_shift: cfg.true_shift,
    })
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per sample keeps the stream simple and
    // deterministic
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generates a scene with modality-specific thermal channel gains.
pub fn gen_scene(cfg: &HarnessConfig) -> Result<Scene> {
    generate(cfg, false)
}

/// Generates a scene whose two modalities share identical amplitudes
/// (useful for exact-equality checks).
pub fn gen_scene_matched(cfg: &HarnessConfig) -> Result<Scene> {
    generate(cfg, true)
}
