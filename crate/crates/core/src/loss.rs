//! Object-centered bidirectional-KL consistency loss and the total-loss
//! composition.
//!
//! The KL term crops an enlarged ground-truth region from the fused and
//! thermal maps, treats the channel softmax at each pixel as a categorical
//! distribution, and averages `KL(p||q) + KL(q||p)` over the region's
//! pixels, so the value is invariant to region size.

use crate::assign::Box;
use crate::error::{Error, Result};
use crate::tensor::{channel_softmax, FeatureMap};

/// Scalar loss terms of one training step; `cls`, `reg` and `ctr` are
/// opaque caller-supplied values.
#[derive(Debug, Clone, Copy)]
pub struct LossComponents {
    pub cls: f64,
    pub reg: f64,
    pub ctr: f64,
    pub kl: f64,
    pub lambda: f64,
}

impl LossComponents {
    pub fn new(cls: f64, reg: f64, ctr: f64, kl: f64, lambda: f64) -> Result<Self> {
        let vals = [cls, reg, ctr, kl, lambda];
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("loss components"));
        }
        if kl < 0.0 || lambda < 0.0 {
            return Err(Error::InvalidArgument(
                "kl and lambda must be non-negative".into(),
            ));
        }
        Ok(Self {
            cls,
            reg,
            ctr,
            kl,
            lambda,
        })
    }
}

/// `cls + reg + ctr + lambda * kl`. The reference scaling factor is
/// `lambda = 0.1`.
pub fn total_loss(c: &LossComponents) -> f64 {
    c.cls + c.reg + c.ctr + c.lambda * c.kl
}

/// Default KL scaling factor.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Image-space box plus the stride and enlargement factor mapping it onto a
/// feature grid.
#[derive(Debug, Clone, Copy)]
pub struct RegionSpec {
    pub bbox: Box,
    pub stride: usize,
    pub enlarge: f64,
}

impl RegionSpec {
    pub fn new(bbox: Box, stride: usize, enlarge: f64) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        if !(enlarge > 0.0) {
            return Err(Error::InvalidArgument("enlarge must be positive".into()));
        }
        Ok(Self {
            bbox,
            stride,
            enlarge,
        })
    }
}

/// Half-open index ranges `[y0, y1) x [x0, x1)` of a region on a feature
/// grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridRegion {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

/// Maps the enlarged box onto grid indices: corners are divided by the
/// stride, floored on the min side and ceiled on the max side (so the
/// region over-covers the object), then clipped to the grid.
pub fn region_indices(height: usize, width: usize, spec: &RegionSpec) -> Result<GridRegion> {
    let half_w = spec.bbox.w * spec.enlarge / 2.0;
    let half_h = spec.bbox.h * spec.enlarge / 2.0;
    let s = spec.stride as f64;
    let x0 = ((spec.bbox.cx - half_w) / s).floor();
    let x1 = ((spec.bbox.cx + half_w) / s).ceil();
    let y0 = ((spec.bbox.cy - half_h) / s).floor();
    let y1 = ((spec.bbox.cy + half_h) / s).ceil();

    let x0 = x0.max(0.0) as usize;
    let y0 = y0.max(0.0) as usize;
    let x1 = (x1.max(0.0) as usize).min(width);
    let y1 = (y1.max(0.0) as usize).min(height);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::EmptyRegion);
    }
    Ok(GridRegion { x0, x1, y0, y1 })
}

/// Extracts the enlarged, stride-mapped sub-map for a region.
pub fn crop_region(map: &FeatureMap, spec: &RegionSpec) -> Result<FeatureMap> {
    let r = region_indices(map.height(), map.width(), spec)?;
    Ok(FeatureMap::from_fn(
        map.channels(),
        r.y1 - r.y0,
        r.x1 - r.x0,
        |c, y, x| map.get(c, r.y0 + y, r.x0 + x),
    ))
}

fn check_same_shape(fused: &FeatureMap, thermal: &FeatureMap) -> Result<()> {
    if fused.shape() != thermal.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", fused.shape()),
            got: format!("{:?}", thermal.shape()),
        });
    }
    Ok(())
}

/// Bidirectional KL divergence between the per-pixel channel distributions
/// of the cropped fused and thermal regions, averaged over pixels.
///
/// Softmax outputs are strictly positive, so no epsilon is needed in the
/// logs.
pub fn region_kl(fused: &FeatureMap, thermal: &FeatureMap, spec: &RegionSpec) -> Result<f64> {
    check_same_shape(fused, thermal)?;
    let p = channel_softmax(&crop_region(fused, spec)?);
    let q = channel_softmax(&crop_region(thermal, spec)?);
    let (c, h, w) = p.shape();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            for ci in 0..c {
                let pi = p.get(ci, y, x);
                let qi = q.get(ci, y, x);
                total += pi * (pi / qi).ln() + qi * (qi / pi).ln();
            }
        }
    }
    Ok(total / (h * w) as f64)
}

/// Analytic gradient of [`region_kl`] with respect to the raw values of
/// `fused`; exactly zero at every pixel outside the cropped region.
pub fn region_kl_grad(
    fused: &FeatureMap,
    thermal: &FeatureMap,
    spec: &RegionSpec,
) -> Result<FeatureMap> {
    check_same_shape(fused, thermal)?;
    let r = region_indices(fused.height(), fused.width(), spec)?;
    let p = channel_softmax(&crop_region(fused, spec)?);
    let q = channel_softmax(&crop_region(thermal, spec)?);
    let (c, rh, rw) = p.shape();
    let n = (rh * rw) as f64;

    let mut grad = FeatureMap::zeros(fused.channels(), fused.height(), fused.width());
    for y in 0..rh {
        for x in 0..rw {
            // forward KL(p||q) at this pixel, needed by the softmax backprop
            let kl_pq: f64 = (0..c)
                .map(|ci| {
                    let pi = p.get(ci, y, x);
                    pi * (pi / q.get(ci, y, x)).ln()
                })
                .sum();
            for ci in 0..c {
                let pi = p.get(ci, y, x);
                let qi = q.get(ci, y, x);
                // d/dz_i [KL(p||q)] = p_i (log(p_i/q_i) - KL(p||q))
                // d/dz_i [KL(q||p)] = p_i - q_i
                let g = pi * ((pi / qi).ln() - kl_pq) + (pi - qi);
                grad.set(ci, r.y0 + y, r.x0 + x, g / n);
            }
        }
    }
    Ok(grad)
}

/// Mean of [`region_kl`] over a set of ground-truth boxes.
pub fn multi_region_kl(
    fused: &FeatureMap,
    thermal: &FeatureMap,
    boxes: &[Box],
    stride: usize,
    enlarge: f64,
) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::InvalidArgument("no boxes given".into()));
    }
    let mut total = 0.0;
    for bx in boxes {
        total += region_kl(fused, thermal, &RegionSpec::new(*bx, stride, enlarge)?)?;
    }
    Ok(total / boxes.len() as f64)
}
