//! Sub-pixel recovery of a constant translation between two feature maps.
//!
//! The search minimizes the mean squared difference between the translated
//! visible map and the thermal map over a coarse offset grid, then refines
//! each axis with a parabolic fit. Channels are standardized to zero mean
//! and unit variance first, which makes the objective invariant to
//! per-channel gain and cancels the energy loss that bilinear
//! interpolation would otherwise introduce at fractional offsets.

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

fn channel_stats(map: &FeatureMap, ci: usize) -> (f64, f64) {
    let (_, h, w) = map.shape();
    let n = (h * w) as f64;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = map.get(ci, y, x);
            sum += v;
            sq += v * v;
        }
    }
    let mean = sum / n;
    (mean, (sq / n - mean * mean).max(0.0))
}

fn standardized_plane(map: &FeatureMap, ci: usize, mean: f64, var: f64) -> FeatureMap {
    let (_, h, w) = map.shape();
    let inv = 1.0 / var.sqrt();
    FeatureMap::from_fn(1, h, w, |_, y, x| (map.get(ci, y, x) - mean) * inv)
}

/// Standardized per-channel copies of both maps, keeping only channels
/// where both have (numerically) non-zero variance.
fn standardize_pair(a: &FeatureMap, b: &FeatureMap) -> (Vec<FeatureMap>, Vec<FeatureMap>) {
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for ci in 0..a.channels() {
        let (ma, va) = channel_stats(a, ci);
        let (mb, vb) = channel_stats(b, ci);
        if va < 1e-18 || vb < 1e-18 {
            continue;
        }
        pa.push(standardized_plane(a, ci, ma, va));
        pb.push(standardized_plane(b, ci, mb, vb));
    }
    (pa, pb)
}

/// Mean squared difference between `v` translated by `(dx, dy)` and `t`,
/// over an interior window that never reads outside the grid.
fn cost(
    v: &[FeatureMap],
    t: &[FeatureMap],
    dx: f64,
    dy: f64,
    margin: usize,
    h: usize,
    w: usize,
) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for (vc, tc) in v.iter().zip(t) {
        for y in margin..h - margin {
            for x in margin..w - margin {
                // translated(y, x) = v(y - dy, x - dx), bilinear
                let sx = x as f64 - dx;
                let sy = y as f64 - dy;
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = sx - x0;
                let fy = sy - y0;
                let (x0, y0) = (x0 as usize, y0 as usize);
                let v00 = vc.get(0, y0, x0);
                let v01 = vc.get(0, y0, x0 + 1);
                let v10 = vc.get(0, y0 + 1, x0);
                let v11 = vc.get(0, y0 + 1, x0 + 1);
                let warped = v00 * (1.0 - fx) * (1.0 - fy)
                    + v01 * fx * (1.0 - fy)
                    + v10 * (1.0 - fx) * fy
                    + v11 * fx * fy;
                let d = warped - tc.get(0, y, x);
                acc += d * d;
                count += 1;
            }
        }
    }
    acc / count as f64
}

/// Estimates the constant translation taking `visible` content onto
/// `thermal`, searching `[-search_radius, search_radius]^2` coarsely and
/// refining per axis with a parabolic fit.
pub fn recover_shift(
    visible: &FeatureMap,
    thermal: &FeatureMap,
    search_radius: f64,
    coarse_step: f64,
) -> Result<(f64, f64)> {
    if visible.shape() != thermal.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", visible.shape()),
            got: format!("{:?}", thermal.shape()),
        });
    }
    if !(coarse_step > 0.0) || search_radius < coarse_step {
        return Err(Error::InvalidArgument(
            "need search_radius >= coarse_step > 0".into(),
        ));
    }
    let (_, h, w) = visible.shape();
    let margin = search_radius.ceil() as usize + 2;
    if h <= 2 * margin + 1 || w <= 2 * margin + 1 {
        return Err(Error::InvalidArgument(format!(
            "maps of {}x{} too small for search radius {}",
            h, w, search_radius
        )));
    }

    let (v, t) = standardize_pair(visible, thermal);
    if v.is_empty() {
        return Err(Error::DegenerateScene);
    }

    let steps = (2.0 * search_radius / coarse_step).floor() as i64;
    let eval =
        |dx: f64, dy: f64| cost(&v, &t, dx, dy, margin, h, w);

    let mut best = (0.0, 0.0);
    let mut best_cost = f64::INFINITY;
    let mut max_cost = f64::NEG_INFINITY;
    for iy in 0..=steps {
        for ix in 0..=steps {
            let dx = -search_radius + ix as f64 * coarse_step;
            let dy = -search_radius + iy as f64 * coarse_step;
            let c = eval(dx, dy);
            max_cost = max_cost.max(c);
            if c < best_cost {
                best_cost = c;
                best = (dx, dy);
            }
        }
    }
    if max_cost - best_cost <= 1e-12 * max_cost.max(1.0) {
        return Err(Error::DegenerateScene);
    }
    if best_cost == 0.0 {
        // exact match at a coarse node, nothing to refine
        return Ok(best);
    }

    // per-axis parabolic refinement around the coarse minimum
    let refine = |center: f64, c0: f64, along_x: bool, other: f64| -> f64 {
        if center - coarse_step < -search_radius || center + coarse_step > search_radius {
            return center;
        }
        let (cm, cp) = if along_x {
            (
                eval(center - coarse_step, other),
                eval(center + coarse_step, other),
            )
        } else {
            (
                eval(other, center - coarse_step),
                eval(other, center + coarse_step),
            )
        };
        let denom = cm - 2.0 * c0 + cp;
        if denom <= 0.0 {
            return center;
        }
        let delta = 0.5 * (cm - cp) / denom;
        center + delta.clamp(-0.5, 0.5) * coarse_step
    };
    let dx = refine(best.0, best_cost, true, best.1);
    let dy = refine(best.1, best_cost, false, best.0);
    Ok((dx, dy))
}
